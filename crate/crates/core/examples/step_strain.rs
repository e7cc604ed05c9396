//! Stress after a sudden shear: sigma(t) follows -g(gamma0) a(t).

use kbkz::kernels::{DampingFunction, RelaxationKernel};
use kbkz::solver::{compute_stress, MemoryWeights, ShearState, SpatialGrid};

fn main() -> kbkz::Result<()> {
    let kernel = RelaxationKernel::doi_edwards(Some(100.0))?;
    let damping = DampingFunction::doi_edwards()?;
    let grid = SpatialGrid::new(1.0, 16)?;
    let (dt, steps, gamma0) = (1e-3, 2000, 0.1);
    let n = grid.nodes();
    let zero = vec![0.0; n];
    // v_0 = 0 and u_1 = dt/2 v_1 = gamma0 x
    let mut v1 = zero.clone();
    for (i, v) in v1.iter_mut().enumerate().take(n - 1).skip(1) {
        *v = 2.0 * gamma0 * grid.x(i) / dt;
    }
    // alternating sign holds u fixed after the ramp
    let mut v = vec![zero.clone(), v1];
    for _ in 2..=steps {
        let next: Vec<f64> = v.last().unwrap().iter().map(|x| -x).collect();
        v.push(next);
    }
    let state = ShearState::from_history(grid, dt, v, vec![zero; steps + 1])?;
    let weights = MemoryWeights::new(&kernel, dt, steps);
    let c = n / 2;
    for k in [10, 100, 500, 2000] {
        let t = k as f64 * dt;
        let sigma = compute_stress(&state, &weights, &damping, k).sigma[c];
        let strain = state.strain_field(k)[c];
        let reference = -damping.g(strain) * kernel.eval(t, 0)?;
        println!("t = {t:.3}: sigma = {sigma:.6e}, -g(strain) a(t) = {reference:.6e}");
    }
    Ok(())
}
