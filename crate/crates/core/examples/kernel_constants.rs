//! Doi-Edwards relaxation kernel: a(0), its spectrum at zero, psi and abar.

use kbkz::kernels::{check_measure_hypotheses, RelaxationKernel};
use kbkz::spectral::fourier_exact;

fn main() -> kbkz::Result<()> {
    let full = RelaxationKernel::doi_edwards(None)?;
    let pi = std::f64::consts::PI;
    println!("a(0)      = {:.15}  (pi^2/8 - 1 = {:.15})", full.a0(), pi * pi / 8.0 - 1.0);
    println!("Re F a(0) = {:.15}  (pi^4/96 - 1 = {:.15})", fourier_exact(&full, 0.0).re, pi.powi(4) / 96.0 - 1.0);
    for t in [0.01, 0.1, 1.0] {
        println!("a({t}) = {:.12e}, a'({t}) = {:.12e}", full.eval(t, 0)?, full.eval(t, 1)?);
    }
    let report = check_measure_hypotheses(full.measure(), 0.25)?;
    println!("moment checks passed: {}", report.passed());

    let truncated = RelaxationKernel::doi_edwards(Some(100.0))?;
    println!("truncated at rate 100: {} atoms, abar = {:.12}", truncated.atoms().len(), truncated.abar());
    for t in [0.0, 0.5, 2.0] {
        println!("psi({t}) = {:.12e}", truncated.psi(t)?);
    }
    Ok(())
}
