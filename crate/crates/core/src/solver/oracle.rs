use crate::error::{Error, Result};
use crate::kernels::RelaxationKernel;

/// Amplitude of one Fourier mode under linear damping,
/// `V' = -c kappa^2 (a * V) + F(t)`, integrated with classical RK4 on the
/// system augmented by `Z_rho = int_0^t e^{-rho (t - s)} V(s) ds` per atom.
/// Returns `V` at `t_j = j * dt_out`, `j = 0..=steps`.
pub fn mode_amplitude(
    kernel: &RelaxationKernel,
    stiffness: f64,
    v0: f64,
    forcing: impl Fn(f64) -> f64,
    dt_out: f64,
    steps: usize,
    substeps: usize,
) -> Result<Vec<f64>> {
    if kernel.has_tail() {
        return Err(Error::Usage("the mode oracle needs a truncated kernel".into()));
    }
    if !(dt_out > 0.0) || substeps == 0 {
        return Err(Error::Domain("mode oracle needs dt_out > 0 and substeps >= 1".into()));
    }
    let atoms = kernel.atoms();
    let (_, rho_max) = kernel.rate_range();
    // keep rho h inside the RK4 stability interval with a wide margin
    let per = substeps.max((dt_out * rho_max / 0.5).ceil() as usize);
    let h = dt_out / per as f64;
    let m = atoms.len();
    let rhs = |t: f64, y: &[f64], out: &mut [f64]| {
        let mem: f64 = atoms.iter().zip(&y[1..]).map(|(a, z)| a.weight * z).sum();
        out[0] = -stiffness * mem + forcing(t);
        for (j, a) in atoms.iter().enumerate() {
            out[j + 1] = y[0] - a.rate * y[j + 1];
        }
    };
    let mut y = vec![0.0; m + 1];
    y[0] = v0;
    let mut out = vec![v0];
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; m + 1], vec![0.0; m + 1], vec![0.0; m + 1], vec![0.0; m + 1]);
    let mut tmp = vec![0.0; m + 1];
    for j in 0..steps {
        for s in 0..per {
            let t = j as f64 * dt_out + s as f64 * h;
            rhs(t, &y, &mut k1);
            for q in 0..=m {
                tmp[q] = y[q] + 0.5 * h * k1[q];
            }
            rhs(t + 0.5 * h, &tmp, &mut k2);
            for q in 0..=m {
                tmp[q] = y[q] + 0.5 * h * k2[q];
            }
            rhs(t + 0.5 * h, &tmp, &mut k3);
            for q in 0..=m {
                tmp[q] = y[q] + h * k3[q];
            }
            rhs(t + h, &tmp, &mut k4);
            for q in 0..=m {
                y[q] += h / 6.0 * (k1[q] + 2.0 * k2[q] + 2.0 * k3[q] + k4[q]);
            }
        }
        out.push(y[0]);
    }
    Ok(out)
}
