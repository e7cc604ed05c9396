//! A single Fourier mode under linear damping against the scalar Volterra
//! mode equation V' = -c kappa^2 (a * V).

use std::f64::consts::PI;

use kbkz::kernels::{DampingFunction, RelaxationKernel};
use kbkz::solver::{mode_amplitude, stable_dt, Forcing, InitialData, Solver, SolverOptions, SpatialGrid};

fn main() -> kbkz::Result<()> {
    let kernel = RelaxationKernel::doi_edwards(Some(100.0))?;
    let damping = DampingFunction::linear(-1.0)?;
    let oracle = mode_amplitude(&kernel, PI * PI, 0.1, |_| 0.0, 1.0, 1, 1000)?;
    for interior in [31, 63, 127, 255] {
        let grid = SpatialGrid::new(1.0, interior)?;
        let steps = (1.0 / stable_dt(&grid, &kernel, &damping, 0.5)).ceil() as usize;
        let mut solver = Solver::new(
            grid,
            &kernel,
            &damping,
            &InitialData::single_mode(0.1, 1),
            Forcing::Zero,
            SolverOptions::new(1.0 / steps as f64, steps),
        )?;
        solver.run()?;
        let v = solver.state().velocity(steps);
        let (mut num, mut den) = (0.0, 0.0);
        for (i, x) in grid.positions().iter().enumerate() {
            let exact = oracle[1] * (PI * x).sin();
            num += (v[i] - exact).powi(2);
            den += exact * exact;
        }
        println!("N = {interior:>3}, {steps:>3} steps: relative error at t = 1 is {:.3e}", (num / den).sqrt());
    }
    Ok(())
}
