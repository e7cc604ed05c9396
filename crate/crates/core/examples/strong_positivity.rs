//! Lower bound of (1 + omega^2) Re F a over a frequency grid for truncated
//! Doi-Edwards kernels.

use kbkz::kernels::RelaxationKernel;
use kbkz::spectral::{check_strong_positivity, log_symmetric_grid};

fn main() -> kbkz::Result<()> {
    let omegas = log_symmetric_grid(1e-3, 1e4, 10_001)?;
    for n in [100.0, 1e4] {
        let k = RelaxationKernel::doi_edwards(Some(n))?;
        let r = check_strong_positivity(&k, &omegas)?;
        println!(
            "truncation {n:>7}: grid min {:.12} at omega = {:.4e}, constructive {:.6}, 1/81 = {:.12}",
            r.m1_grid,
            r.argmin_omega,
            r.m1_constructive,
            1.0 / 81.0
        );
    }
    Ok(())
}
