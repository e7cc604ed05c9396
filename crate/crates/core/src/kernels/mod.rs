//! Relaxation kernels, damping functions and the checks on both.

mod damping;
mod measure;
mod relaxation;

pub use damping::{
    estimate_damping_constants, eval_g_de, eval_g_de_checked, DampingConstants, DampingFunction,
    DampingModel, SphereRule, DEFAULT_SPHERE_RULE, G_DE_FAST_RANGE, G_DE_TOLERANCE,
    THETA_SCAN_STEP,
};
pub use measure::{
    check_measure_hypotheses, Atom, FamilyTail, MeasureFamily, MeasureReport, MeasureSpec,
    DE_FIRST_OMITTED,
};
pub use relaxation::{r0, RelaxationKernel};

/// `psi` sampled at `times` together with `abar`.
pub fn psi_and_abar(
    kernel: &RelaxationKernel,
    times: &[f64],
) -> crate::error::Result<(Vec<f64>, f64)> {
    let psi = times
        .iter()
        .map(|&t| kernel.psi(t))
        .collect::<crate::error::Result<Vec<_>>>()?;
    Ok((psi, kernel.abar()))
}
