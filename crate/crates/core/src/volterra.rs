//! Time-domain convolution engine: `b * w`, the quadratic form `Q`, the
//! forward difference `Delta_h`, and the inversion formula.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::RelaxationKernel;
use crate::numerics::{derivative, trapezoid, trapezoid_weight};
use crate::spectral::InversionOperator;

/// Samples on `t_k = k dt`, `k = 0..len`, zero for `t < 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSignal {
    dt: f64,
    samples: Vec<f64>,
}

impl TimeSignal {
    pub fn new(dt: f64, samples: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Domain(format!("time step must be > 0, got {dt}")));
        }
        if samples.len() < 2 {
            return Err(Error::Usage(format!(
                "time signal needs at least 2 samples, got {}",
                samples.len()
            )));
        }
        Ok(Self { dt, samples })
    }

    pub(crate) fn from_parts(dt: f64, samples: Vec<f64>) -> Self {
        Self { dt, samples }
    }

    /// Sample `f` at `t_k = k dt`, `k = 0..=steps`.
    pub fn from_fn(dt: f64, steps: usize, f: impl Fn(f64) -> f64) -> Self {
        Self {
            dt,
            samples: (0..=steps).map(|k| f(k as f64 * dt)).collect(),
        }
    }

    /// The kernel sampled on `steps + 1` grid points.
    pub fn from_kernel(kernel: &RelaxationKernel, dt: f64, steps: usize) -> Self {
        Self::from_fn(dt, steps, |t| kernel.eval_unchecked(t, 0))
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn t_end(&self) -> f64 {
        (self.samples.len() - 1) as f64 * self.dt
    }

    pub fn l2_norm(&self) -> f64 {
        trapezoid(&self.samples.iter().map(|v| v * v).collect::<Vec<_>>(), self.dt).sqrt()
    }

    pub fn l1_norm(&self) -> f64 {
        trapezoid(&self.samples.iter().map(|v| v.abs()).collect::<Vec<_>>(), self.dt)
    }

    pub fn linf_norm(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Centered differences inside, second-order one-sided at the ends.
    pub fn derivative(&self) -> TimeSignal {
        Self::from_parts(self.dt, derivative(&self.samples, self.dt))
    }

    pub fn scaled(&self, c: f64) -> TimeSignal {
        Self::from_parts(self.dt, self.samples.iter().map(|v| c * v).collect())
    }

    /// Pointwise difference; signals must share the grid.
    pub fn sub(&self, other: &TimeSignal) -> Result<TimeSignal> {
        check_grids(self, other)?;
        let n = self.len().min(other.len());
        Ok(Self::from_parts(
            self.dt,
            (0..n).map(|k| self.samples[k] - other.samples[k]).collect(),
        ))
    }

    pub fn truncated(&self, len: usize) -> TimeSignal {
        Self::from_parts(self.dt, self.samples[..len.min(self.len())].to_vec())
    }

    pub fn write_csv<W: Write>(&self, mut out: W, column: &str) -> Result<()> {
        writeln!(out, "t,{column}")?;
        for (k, v) in self.samples.iter().enumerate() {
            writeln!(out, "{:.16e},{v:.16e}", k as f64 * self.dt)?;
        }
        Ok(())
    }
}

fn check_grids(a: &TimeSignal, b: &TimeSignal) -> Result<()> {
    if (a.dt - b.dt).abs() > 1e-12 * a.dt.max(b.dt) {
        return Err(Error::Usage(format!(
            "signals on different grids: dt = {} vs {}",
            a.dt, b.dt
        )));
    }
    Ok(())
}

/// Trapezoid convolution of raw samples, `min(len)` outputs:
/// `(b * w)_k = dt [b_k w_0 / 2 + sum_{0<j<k} b_{k-j} w_j + b_0 w_k / 2]`.
pub fn convolve_samples(b: &[f64], w: &[f64], dt: f64) -> Vec<f64> {
    let n = b.len().min(w.len());
    (0..n)
        .into_par_iter()
        .map(|k| {
            if k == 0 {
                return 0.0;
            }
            let mut acc = 0.5 * (b[k] * w[0] + b[0] * w[k]);
            for j in 1..k {
                acc += b[k - j] * w[j];
            }
            dt * acc
        })
        .collect()
}

/// `(b * w)(t_k) = int_0^{t_k} b(t_k - s) w(s) ds` by the trapezoid rule.
/// The result has the length of `w`; `b` must be at least as long.
pub fn convolve(b: &TimeSignal, w: &TimeSignal) -> Result<TimeSignal> {
    check_grids(b, w)?;
    if b.len() < w.len() {
        return Err(Error::Usage(format!(
            "kernel has {} samples, signal has {}",
            b.len(),
            w.len()
        )));
    }
    Ok(TimeSignal::from_parts(w.dt, convolve_samples(&b.samples, &w.samples, w.dt)))
}

/// `convolve` with the kernel sampled exactly on the signal grid.
pub fn convolve_kernel(kernel: &RelaxationKernel, w: &TimeSignal) -> TimeSignal {
    let b = TimeSignal::from_kernel(kernel, w.dt, w.len() - 1);
    TimeSignal::from_parts(w.dt, convolve_samples(&b.samples, &w.samples, w.dt))
}

/// `Q(w, t, b) = int_0^t w (b * w) ds` with `t` the end of `w`.
pub fn qform(w: &TimeSignal, b: &TimeSignal) -> Result<f64> {
    let c = convolve(b, w)?;
    Ok(trapezoid(
        &w.samples.iter().zip(&c.samples).map(|(x, y)| x * y).collect::<Vec<_>>(),
        w.dt,
    ))
}

/// `qform` with an exactly sampled kernel.
pub fn qform_kernel(w: &TimeSignal, kernel: &RelaxationKernel) -> f64 {
    let c = convolve_kernel(kernel, w);
    trapezoid(
        &w.samples.iter().zip(&c.samples).map(|(x, y)| x * y).collect::<Vec<_>>(),
        w.dt,
    )
}

/// A field on a uniform space-time grid, indexed `[time][node]` with the
/// nodes spanning the closed interval.
#[derive(Clone, Debug, PartialEq)]
pub struct SpaceTimeField {
    pub dx: f64,
    pub dt: f64,
    pub data: Vec<Vec<f64>>,
}

impl SpaceTimeField {
    pub fn from_fn(dx: f64, nodes: usize, dt: f64, steps: usize, f: impl Fn(f64, f64) -> f64) -> Self {
        let data = (0..=steps)
            .map(|k| (0..nodes).map(|i| f(i as f64 * dx, k as f64 * dt)).collect())
            .collect();
        Self { dx, dt, data }
    }

    pub fn steps(&self) -> usize {
        self.data.len().saturating_sub(1)
    }

    pub fn nodes(&self) -> usize {
        self.data.first().map_or(0, |r| r.len())
    }

    /// Time series at one node.
    pub fn node_signal(&self, i: usize) -> TimeSignal {
        TimeSignal::from_parts(self.dt, self.data.iter().map(|r| r[i]).collect())
    }
}

/// `Q(w, t, b) = int_0^t int_Omega w (b * w) dx ds` over the whole field:
/// trapezoid in space first, then in time.
pub fn qform_field(w: &SpaceTimeField, b: &TimeSignal) -> Result<f64> {
    if (w.dt - b.dt).abs() > 1e-12 * w.dt.max(b.dt) {
        return Err(Error::Usage("field and kernel on different time grids".into()));
    }
    if b.len() < w.data.len() {
        return Err(Error::Usage("kernel shorter than the field history".into()));
    }
    let nodes = w.nodes();
    let per_node: Vec<Vec<f64>> = (0..nodes)
        .into_par_iter()
        .map(|i| {
            let s: Vec<f64> = w.data.iter().map(|r| r[i]).collect();
            let c = convolve_samples(&b.samples, &s, w.dt);
            s.iter().zip(&c).map(|(x, y)| x * y).collect()
        })
        .collect();
    let in_space: Vec<f64> = (0..w.data.len())
        .map(|k| {
            (0..nodes)
                .map(|i| trapezoid_weight(i, nodes, w.dx) * per_node[i][k])
                .sum()
        })
        .collect();
    Ok(trapezoid(&in_space, w.dt))
}

fn grid_multiple(h: f64, dt: f64) -> Result<usize> {
    let m = (h / dt).round();
    if !(h > 0.0) || (h - m * dt).abs() > 1e-9 * dt || m < 1.0 {
        return Err(Error::Usage(format!(
            "shift h = {h} is not a positive multiple of dt = {dt}"
        )));
    }
    Ok(m as usize)
}

/// `(Delta_h w)(t_k) = w(t_k + h) - w(t_k)` for all `t_k + h` on the grid.
pub fn delta_h(w: &TimeSignal, h: f64) -> Result<TimeSignal> {
    let m = grid_multiple(h, w.dt)?;
    if m + 2 > w.len() {
        return Err(Error::Usage(format!("shift h = {h} leaves fewer than 2 samples")));
    }
    Ok(TimeSignal::from_parts(
        w.dt,
        (0..w.len() - m).map(|k| w.samples[k + m] - w.samples[k]).collect(),
    ))
}

/// `Delta_h` applied at every node of a field.
pub fn delta_h_field(w: &SpaceTimeField, h: f64) -> Result<SpaceTimeField> {
    let m = grid_multiple(h, w.dt)?;
    if m + 2 > w.data.len() {
        return Err(Error::Usage(format!("shift h = {h} leaves fewer than 2 steps")));
    }
    let data = (0..w.data.len() - m)
        .map(|k| {
            w.data[k + m]
                .iter()
                .zip(&w.data[k])
                .map(|(a, b)| a - b)
                .collect()
        })
        .collect();
    Ok(SpaceTimeField {
        dx: w.dx,
        dt: w.dt,
        data,
    })
}

/// Output of `invert`.
#[derive(Clone, Debug)]
pub struct Inversion {
    pub w: TimeSignal,
    /// `||b * w - l||_{L2} / ||l||_{L2}` (absolute when `l = 0`)
    pub forward_residual: f64,
}

/// Relative size of `l(0)` accepted as zero.
pub const L0_TOLERANCE: f64 = 1e-10;

/// `w = l' / b(0+) + B1 * l' + B2 * l`.
pub fn invert(op: &InversionOperator, l: &TimeSignal) -> Result<Inversion> {
    if (op.dt() - l.dt).abs() > 1e-12 * op.dt() {
        return Err(Error::Usage(format!(
            "operator built for dt = {}, signal has dt = {}",
            op.dt(),
            l.dt
        )));
    }
    if l.len() > op.len() {
        return Err(Error::Usage(format!(
            "operator covers {} samples, signal has {}",
            op.len(),
            l.len()
        )));
    }
    let scale = l.linf_norm();
    if l.samples[0].abs() > L0_TOLERANCE * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::Domain(format!(
            "l(0) = {:e} is not zero: the signal must start from rest",
            l.samples[0]
        )));
    }
    let lp = derivative(&l.samples, l.dt);
    let w = apply_inversion(op, &l.samples, &lp, l.dt);
    let back = convolve_samples(op.kernel_samples(), &w, l.dt);
    let diff: Vec<f64> = back.iter().zip(&l.samples).map(|(a, b)| (a - b).powi(2)).collect();
    let num = trapezoid(&diff, l.dt).sqrt();
    let den = l.l2_norm();
    Ok(Inversion {
        w: TimeSignal::from_parts(l.dt, w),
        forward_residual: if den > 0.0 { num / den } else { num },
    })
}

fn apply_inversion(op: &InversionOperator, l: &[f64], lp: &[f64], dt: f64) -> Vec<f64> {
    let c1 = convolve_samples(op.b1(), lp, dt);
    let c2 = convolve_samples(op.b2(), l, dt);
    (0..l.len()).map(|k| lp[k] / op.b0() + c1[k] + c2[k]).collect()
}

/// `w = l' / b(0+) + B1 * l' + B2 * l` with `l'` supplied by the caller.
/// No start-from-rest check is made on `l`.
pub fn invert_with_derivative(op: &InversionOperator, l: &[f64], lp: &[f64], dt: f64) -> Result<Vec<f64>> {
    if (op.dt() - dt).abs() > 1e-12 * op.dt() {
        return Err(Error::Usage(format!("operator built for dt = {}, signal has dt = {dt}", op.dt())));
    }
    if l.len() != lp.len() || l.len() > op.len() {
        return Err(Error::Usage(format!(
            "signal of {} samples with derivative of {}: operator covers {}",
            l.len(),
            lp.len(),
            op.len()
        )));
    }
    Ok(apply_inversion(op, l, lp, dt))
}

/// Relative L2 distance `||a - b|| / ||b||`.
pub fn relative_l2(a: &TimeSignal, b: &TimeSignal) -> Result<f64> {
    let d = a.sub(b)?;
    let den = b.truncated(d.len()).l2_norm();
    Ok(if den > 0.0 { d.l2_norm() / den } else { d.l2_norm() })
}

/// Terms of the Garding-type ratio
/// `[w(t)^2 + int w^2] / [Q(w)/M1 + Q(w_t)/M1 + w(0)^2]`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct GardingRatio {
    pub numerator: f64,
    pub denominator: f64,
    pub ratio: f64,
}

pub fn garding_ratio(w: &TimeSignal, kernel: &RelaxationKernel, m1: f64) -> GardingRatio {
    let s = &w.samples;
    let numerator = s[s.len() - 1].powi(2) + trapezoid(&s.iter().map(|v| v * v).collect::<Vec<_>>(), w.dt);
    let wt = w.derivative();
    let denominator = qform_kernel(w, kernel) / m1 + qform_kernel(&wt, kernel) / m1 + s[0] * s[0];
    GardingRatio {
        numerator,
        denominator,
        ratio: numerator / denominator,
    }
}

/// `max_k |(b * w)'(t_k) - b(0+) w(t_k) - (b' * w)(t_k)|` with the left side
/// differentiated on the grid.
pub fn derivative_identity_residual(kernel: &RelaxationKernel, w: &TimeSignal) -> f64 {
    let n = w.len();
    let conv = convolve_kernel(kernel, w);
    let lhs = derivative(&conv.samples, w.dt);
    let bp: Vec<f64> = (0..n).map(|k| kernel.eval_unchecked(k as f64 * w.dt, 1)).collect();
    let c = convolve_samples(&bp, &w.samples, w.dt);
    (0..n)
        .map(|k| (lhs[k] - kernel.a0() * w.samples[k] - c[k]).abs())
        .fold(0.0, f64::max)
}

/// One resolution of the round trip `w -> l = b * w -> inverted w`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct RoundTrip {
    pub dt: f64,
    /// `||w_inverted - w|| / ||w||`
    pub relative_l2: f64,
    pub forward_residual: f64,
}

/// Round trip of the test signal `w` on `[0, t_end]` at step `dt`.
pub fn round_trip(kernel: &RelaxationKernel, w: impl Fn(f64) -> f64, dt: f64, t_end: f64) -> Result<RoundTrip> {
    let steps = (t_end / dt).round() as usize;
    if steps < 2 {
        return Err(Error::Usage(format!("round trip needs at least 2 steps, dt = {dt}, t_end = {t_end}")));
    }
    let op = crate::spectral::build_inversion(kernel, None, dt, t_end)?;
    let exact = TimeSignal::from_fn(dt, steps, w);
    let l = convolve_kernel(kernel, &exact);
    let inv = invert(&op, &l)?;
    Ok(RoundTrip {
        dt,
        relative_l2: relative_l2(&inv.w, &exact)?,
        forward_residual: inv.forward_residual,
    })
}

/// Round trips at `dt_coarse / 2^j`, `j = 0..levels`, with the observed
/// orders `log2(e_j / e_{j+1})`.
#[derive(Clone, Debug, Serialize)]
pub struct RoundTripStudy {
    pub rows: Vec<RoundTrip>,
    pub orders: Vec<f64>,
}

impl RoundTripStudy {
    pub fn min_order(&self) -> f64 {
        self.orders.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "dt,relative_l2,forward_residual,order")?;
        for (j, r) in self.rows.iter().enumerate() {
            let order = if j == 0 { String::new() } else { format!("{:.16e}", self.orders[j - 1]) };
            writeln!(out, "{:.16e},{:.16e},{:.16e},{}", r.dt, r.relative_l2, r.forward_residual, order)?;
        }
        Ok(())
    }
}

pub fn round_trip_study(
    kernel: &RelaxationKernel,
    w: impl Fn(f64) -> f64 + Copy,
    dt_coarse: f64,
    levels: usize,
    t_end: f64,
) -> Result<RoundTripStudy> {
    if levels < 2 {
        return Err(Error::Usage("a convergence study needs at least two resolutions".into()));
    }
    let rows = (0..levels)
        .map(|j| round_trip(kernel, w, dt_coarse / (1u64 << j) as f64, t_end))
        .collect::<Result<Vec<_>>>()?;
    let orders = rows.windows(2).map(|p| (p[0].relative_l2 / p[1].relative_l2).log2()).collect();
    Ok(RoundTripStudy { rows, orders })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::build_inversion;

    fn exp_kernel() -> RelaxationKernel {
        RelaxationKernel::exponential(1.0, 1.0).unwrap()
    }

    #[test]
    fn convolution_with_constant() {
        let w = TimeSignal::from_fn(1e-3, 2000, |_| 1.0);
        let c = convolve_kernel(&exp_kernel(), &w);
        for (k, v) in c.samples().iter().enumerate() {
            let t = k as f64 * 1e-3;
            assert!((v - (1.0 - (-t).exp())).abs() < 1e-7);
        }
    }

    #[test]
    fn convolution_is_commutative_and_zero_kernel_gives_zero() {
        let a = TimeSignal::from_fn(0.01, 300, |t| (3.0 * t).sin());
        let b = TimeSignal::from_fn(0.01, 300, |t| t * (-t).exp());
        let ab = convolve(&a, &b).unwrap();
        let ba = convolve(&b, &a).unwrap();
        for (x, y) in ab.samples().iter().zip(ba.samples()) {
            assert!((x - y).abs() < 1e-14);
        }
        let z = TimeSignal::from_fn(0.01, 300, |_| 0.0);
        assert!(convolve(&z, &a).unwrap().samples().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let a = TimeSignal::from_fn(0.01, 10, |t| t);
        let b = TimeSignal::from_fn(0.02, 10, |t| t);
        assert!(matches!(convolve(&a, &b), Err(Error::Usage(_))));
    }

    #[test]
    fn qform_of_unit_field() {
        let w = SpaceTimeField::from_fn(0.01, 101, 1e-3, 1000, |_, _| 1.0);
        let b = TimeSignal::from_kernel(&exp_kernel(), 1e-3, 1000);
        let q = qform_field(&w, &b).unwrap();
        assert!((q - (-1.0f64).exp()).abs() < 1e-6);
    }

    #[test]
    fn delta_h_of_linear_signal() {
        let w = TimeSignal::from_fn(0.1, 20, |t| 3.0 * t + 1.0);
        let d = delta_h(&w, 0.3).unwrap();
        assert_eq!(d.len(), 18);
        assert!(d.samples().iter().all(|v| (v - 0.9).abs() < 1e-12));
        assert!(matches!(delta_h(&w, 0.25), Err(Error::Usage(_))));
    }

    #[test]
    fn second_difference_identity() {
        let w = TimeSignal::from_fn(0.1, 20, |t| t.sin());
        let dd = delta_h(&delta_h(&w, 0.2).unwrap(), 0.2).unwrap();
        for (k, v) in dd.samples().iter().enumerate() {
            let s = w.samples();
            assert!((v - (s[k + 4] - 2.0 * s[k + 2] + s[k])).abs() < 1e-14);
        }
    }

    #[test]
    fn exponential_inversion_is_derivative_plus_identity() {
        let op = build_inversion(&exp_kernel(), Some(2), 1e-3, 2.0).unwrap();
        let l = TimeSignal::from_fn(1e-3, 2000, |t| t * t * (-t).exp() + (2.0 * t).sin());
        let w = invert(&op, &l).unwrap().w;
        let lp = l.derivative();
        let closed = TimeSignal::new(
            1e-3,
            lp.samples().iter().zip(l.samples()).map(|(a, b)| a + b).collect(),
        )
        .unwrap();
        let err = relative_l2(&w, &closed).unwrap();
        assert!(err < 1e-6, "{err:e}");
    }

    #[test]
    fn inversion_requires_start_from_rest() {
        let op = build_inversion(&exp_kernel(), Some(2), 1e-2, 1.0).unwrap();
        let l = TimeSignal::from_fn(1e-2, 100, |t| 1.0 + t);
        assert!(matches!(invert(&op, &l), Err(Error::Domain(_))));
        let z = TimeSignal::from_fn(1e-2, 100, |_| 0.0);
        assert!(invert(&op, &z).unwrap().w.samples().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn derivative_identity_is_second_order() {
        let k = RelaxationKernel::doi_edwards(Some(30.0)).unwrap();
        let r1 = derivative_identity_residual(&k, &TimeSignal::from_fn(2e-3, 500, |t| (2.0 * t).cos()));
        let r2 = derivative_identity_residual(&k, &TimeSignal::from_fn(1e-3, 1000, |t| (2.0 * t).cos()));
        assert!(r1 / r2 > 3.5, "{r1} {r2}");
    }
}
