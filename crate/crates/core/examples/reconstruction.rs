//! Rebuild v_xx and u_xx from the velocity history through the inversion
//! operator, on a manufactured linear run.

use kbkz::kernels::{DampingFunction, RelaxationKernel};
use kbkz::solver::{reconstruct_uxx, reconstruct_vxx, Forcing, InitialData, Manufactured, Solver, SolverOptions, SpatialGrid};
use kbkz::spectral::build_inversion;

fn main() -> kbkz::Result<()> {
    let kernel = RelaxationKernel::doi_edwards(Some(100.0))?;
    let damping = DampingFunction::linear(-1.0)?;
    let (t_end, steps) = (1.0, 400);
    let dt = t_end / steps as f64;
    let grid = SpatialGrid::new(1.0, 63)?;
    let forcing = Manufactured::new(&kernel, &damping, 0.1, 1, 2.0, 1.0)?;
    let mut solver = Solver::new(
        grid,
        &kernel,
        &damping,
        &InitialData::zero(),
        Forcing::Manufactured(forcing),
        SolverOptions::new(dt, steps),
    )?;
    solver.run()?;
    let op = build_inversion(&kernel, None, dt, t_end)?;
    let vxx = reconstruct_vxx(solver.state(), &op, &kernel, &damping)?;
    let uxx = reconstruct_uxx(solver.state(), &op, &kernel, &damping)?;
    println!("v_xx: relative L2 gap to finite differences {:.3e}", vxx.relative_l2);
    println!("u_xx: relative L2 gap to finite differences {:.3e}", uxx.relative_l2);
    Ok(())
}
