//! Doi-Edwards kernel and damping with small initial data: energy,
//! certificates and the pointwise remainder bounds.

use kbkz::diagnostics::{energy_report, lemma_checks, sobolev_constant};
use kbkz::kernels::{DampingFunction, RelaxationKernel};
use kbkz::solver::{stable_dt, Forcing, InitialData, Solver, SolverOptions, SpatialGrid};

fn main() -> kbkz::Result<()> {
    let kernel = RelaxationKernel::doi_edwards(Some(100.0))?;
    let damping = DampingFunction::doi_edwards()?;
    let grid = SpatialGrid::new(1.0, 32)?;
    let t_end = 5.0;
    let steps = (t_end / stable_dt(&grid, &kernel, &damping, 0.5)).ceil() as usize;
    let mut solver = Solver::new(
        grid,
        &kernel,
        &damping,
        &InitialData::single_mode(1e-3, 1),
        Forcing::Zero,
        SolverOptions::new(t_end / steps as f64, steps),
    )?;
    let termination = solver.run()?;
    println!("termination: {termination:?}");
    let state = solver.state();
    let outputs: Vec<usize> = (0..=5).map(|j| j * steps / 5).collect();
    let report = energy_report(state, &kernel, &damping, sobolev_constant(1.0), &outputs)?;
    println!("E(0) = {:.6e} <= {:.6e}", report.energy_at_zero, report.e0_bound);
    for row in &report.rows {
        println!(
            "t = {:.3}  E = {:.6e}  nu = {:.6e}  sup|u_x| = {:.6e}  small {}  hyperbolic {}",
            row.t, row.energy, row.nu, row.sup_strain, row.flags.smallness_ok, row.flags.hyperbolicity_ok
        );
    }
    for c in lemma_checks(state, &kernel, &damping, &outputs)? {
        println!(
            "t = {:.3}  worst bound ratios: g {:.3e}  g' {:.3e}  G {:.3e}  G_t {:.3e}",
            c.t, c.ratio_g0, c.ratio_g1, c.ratio_g, c.ratio_g_t
        );
    }
    Ok(())
}
