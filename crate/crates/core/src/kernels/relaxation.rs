use std::collections::hash_map::DefaultHasher;
use std::f64::consts::PI;
use std::hash::{Hash, Hasher};
use std::io::Write;

use statrs::function::erf::erfc;

use super::measure::{Atom, FamilyTail, MeasureSpec};
use crate::error::{Error, Result};
use crate::numerics::{exprel2_neg, upper_gamma_half_integer, upper_gamma_three_halves, KahanSum};

/// Exponents beyond this contribute exactly zero in double precision.
const EXP_CUTOFF: f64 = 745.0;

/// The relaxation kernel `a(t) = sum_{rho < n} w e^{-rho t}` built from a
/// measure and an optional rate cutoff `n`.
///
/// For an untruncated generated family the unmaterialized atoms enter
/// `eval` through a midpoint Euler-Maclaurin tail whose relative error is
/// `O(Y^-4)` with `Y = 2 * first_omitted` (about `1e-20` for Doi-Edwards).
#[derive(Clone, Debug)]
pub struct RelaxationKernel {
    measure: MeasureSpec,
    truncation: Option<f64>,
    atoms: Vec<Atom>,
    tail: Option<FamilyTail>,
    a0: f64,
    abar: f64,
    l1: f64,
    fingerprint: u64,
}

impl RelaxationKernel {
    /// Keep the atoms with rate `< truncation`; `None` keeps all of them.
    pub fn new(measure: MeasureSpec, truncation: Option<f64>) -> Result<Self> {
        let (atoms, tail) = match truncation {
            None => (measure.atoms().to_vec(), measure.tail()),
            Some(n) => {
                if !(n.is_finite() && n > 0.0) {
                    return Err(Error::Domain(format!(
                        "truncation level must be finite and > 0, got {n}"
                    )));
                }
                if let Some(t) = measure.tail() {
                    let first_rate = (t.cell_edge() + 1.0).powi(2);
                    if n > first_rate {
                        return Err(Error::Usage(format!(
                            "truncation {n:e} exceeds the materialized part of the family \
                             (rates below {first_rate:e}); use the untruncated kernel"
                        )));
                    }
                }
                let kept: Vec<Atom> = measure
                    .atoms()
                    .iter()
                    .copied()
                    .filter(|a| a.rate < n)
                    .collect();
                if kept.is_empty() {
                    return Err(Error::Domain(format!(
                        "truncation {n} removes every atom of the measure"
                    )));
                }
                (kept, None)
            }
        };

        let mut hasher = DefaultHasher::new();
        for a in &atoms {
            a.rate.to_bits().hash(&mut hasher);
            a.weight.to_bits().hash(&mut hasher);
        }
        tail.map(|t| t.first_omitted).hash(&mut hasher);

        let mut kernel = Self {
            measure,
            truncation,
            atoms,
            tail,
            a0: 0.0,
            abar: 0.0,
            l1: 0.0,
            fingerprint: hasher.finish(),
        };
        kernel.a0 = kernel.eval(0.0, 0)?;
        kernel.l1 = kernel.sum_small_first(|a| a.weight / a.rate)
            + kernel.tail.map_or(0.0, |t| t.odd_power_tail(4.0));
        // the tail of the abar series is below sum (2k+1)^-4 over omitted atoms
        kernel.abar = kernel.sum_small_first(|a| a.weight * a.rate * abar_integral(a.rate));
        Ok(kernel)
    }

    /// Single exponential `w e^{-rho t}`.
    pub fn exponential(rate: f64, weight: f64) -> Result<Self> {
        Self::new(MeasureSpec::single(rate, weight)?, None)
    }

    /// Doi-Edwards kernel, truncated at rate `n` when given.
    pub fn doi_edwards(truncation: Option<f64>) -> Result<Self> {
        Self::new(MeasureSpec::doi_edwards(), truncation)
    }

    fn sum_small_first(&self, f: impl Fn(&Atom) -> f64) -> f64 {
        let mut acc = KahanSum::default();
        for a in self.atoms.iter().rev() {
            acc.add(f(a));
        }
        acc.value()
    }

    pub fn measure(&self) -> &MeasureSpec {
        &self.measure
    }

    /// Retained atoms, sorted by increasing rate.
    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn truncation(&self) -> Option<f64> {
        self.truncation
    }

    /// Whether the kernel carries an analytic tail of unmaterialized atoms.
    pub fn has_tail(&self) -> bool {
        self.tail.is_some()
    }

    /// Identifies the atom list; equal kernels have equal fingerprints.
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    /// `a(0+)`
    pub fn a0(&self) -> f64 {
        self.a0
    }

    /// `a'(0+)`; infinite for kernels with an unbounded rate tail.
    pub fn a0_derivative(&self) -> f64 {
        if self.tail.is_some() {
            f64::NEG_INFINITY
        } else {
            -self.sum_small_first(|a| a.weight * a.rate)
        }
    }

    /// `int_0^inf |a'(s)| min(s, sqrt s) ds`
    pub fn abar(&self) -> f64 {
        self.abar
    }

    /// `||a||_{L1} = sum w / rho`
    pub fn l1_norm(&self) -> f64 {
        self.l1
    }

    /// `||a'||_{L1} = a(0+)` since `a` decreases to zero.
    pub fn derivative_l1_norm(&self) -> f64 {
        self.a0
    }

    /// `sum w rho^{-2}`, the second moment of the retained atoms.
    pub fn inverse_square_moment(&self) -> f64 {
        self.sum_small_first(|a| a.weight / (a.rate * a.rate))
    }

    /// Smallest and largest retained rate.
    pub fn rate_range(&self) -> (f64, f64) {
        (self.atoms[0].rate, self.atoms[self.atoms.len() - 1].rate)
    }

    /// Derivative of the given order (0..=3) of `a` at `t >= 0`.
    pub fn eval(&self, t: f64, order: usize) -> Result<f64> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::Domain(format!("kernel evaluated at t = {t}")));
        }
        if order > 3 {
            return Err(Error::Domain(format!(
                "derivative order {order} not supported (max 3)"
            )));
        }
        if t == 0.0 && order > 0 && self.tail.is_some() {
            return Err(Error::Domain(format!(
                "derivative of order {order} diverges at t = 0 for the untruncated family"
            )));
        }
        Ok(self.eval_unchecked(t, order))
    }

    /// `eval` without argument checks; callers guarantee `t >= 0`, order <= 3.
    pub(crate) fn eval_unchecked(&self, t: f64, order: usize) -> f64 {
        let sign = if order.is_multiple_of(2) { 1.0 } else { -1.0 };
        let mut acc = KahanSum::default();
        for a in &self.atoms {
            let x = a.rate * t;
            if x > EXP_CUTOFF {
                break;
            }
            acc.add(a.weight * a.rate.powi(order as i32) * (-x).exp());
        }
        let tail = match self.tail {
            Some(tl) => de_tail(tl.cell_edge(), t, order),
            None => 0.0,
        };
        sign * (acc.value() + tail)
    }

    /// `a(t)` and `a'(t)` at `t >= 0` without tail or checks. Only for
    /// kernels without a tail.
    pub(crate) fn value_and_slope(&self, t: f64) -> (f64, f64) {
        let mut v = 0.0;
        let mut d = 0.0;
        for a in &self.atoms {
            let x = a.rate * t;
            if x > EXP_CUTOFF {
                break;
            }
            let e = a.weight * (-x).exp();
            v += e;
            d -= a.rate * e;
        }
        (v, d)
    }

    /// Count of samples violating `(-1)^k a^(k)(t) >= 0`, `k = 0..=3`.
    pub fn total_monotonicity_violations(&self, times: &[f64]) -> Result<usize> {
        let mut bad = 0;
        for &t in times {
            for k in 0..=3 {
                if t == 0.0 && k > 0 && self.tail.is_some() {
                    continue;
                }
                let v = self.eval(t, k)?;
                let signed = if k % 2 == 0 { v } else { -v };
                if signed < 0.0 {
                    bad += 1;
                }
            }
        }
        Ok(bad)
    }

    /// `psi(t) = |a'(t)| r0(t) + 2 int_t^inf |a'| r0`, `r0(s) = min(s, sqrt s)`.
    pub fn psi(&self, t: f64) -> Result<f64> {
        if self.tail.is_some() {
            return Err(Error::Usage(
                "psi requires a truncated kernel (the untruncated family has |a'(0+)| = inf)".into(),
            ));
        }
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::Domain(format!("psi evaluated at t = {t}")));
        }
        let r = r0(t);
        Ok(self.sum_small_first(|a| {
            let x = a.rate * t;
            let head = if x > EXP_CUTOFF { 0.0 } else { (-x).exp() * r };
            a.weight * a.rate * (head + 2.0 * tail_integral(a.rate, t))
        }))
    }

    /// Write `t, a, a', a''` rows.
    pub fn write_csv<W: Write>(&self, mut out: W, times: &[f64]) -> Result<()> {
        writeln!(out, "t,a,a_prime,a_second")?;
        for &t in times {
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e}",
                t,
                self.eval(t, 0)?,
                self.eval(t, 1)?,
                self.eval(t, 2)?
            )?;
        }
        Ok(())
    }
}

/// `r0(s) = min(s, sqrt s)`
pub fn r0(s: f64) -> f64 {
    if s < 1.0 {
        s
    } else {
        s.sqrt()
    }
}

/// `int_0^inf r0(s) e^{-rho s} ds`, split at the kink `s = 1`.
fn abar_integral(rho: f64) -> f64 {
    exprel2_neg(rho) + rho.powf(-1.5) * upper_gamma_three_halves(rho)
}

/// `int_t^inf r0(s) e^{-rho s} ds`
fn tail_integral(rho: f64, t: f64) -> f64 {
    if t < 1.0 {
        // int_t^1 s e^{-rho s} = int_0^1 - int_0^t
        let head = exprel2_neg(rho) - t * t * exprel2_neg(rho * t);
        head + rho.powf(-1.5) * upper_gamma_three_halves(rho)
    } else {
        rho.powf(-1.5) * upper_gamma_three_halves(rho * t)
    }
}

/// Doi-Edwards atoms with `2k + 1 > y0`: `sum_k y^{2m-2} e^{-y^2 t}` over odd
/// `y`, by the midpoint rule with Euler-Maclaurin correction.
fn de_tail(y0: f64, t: f64, order: usize) -> f64 {
    let m = order as i32;
    let x = y0 * y0 * t;
    if x > EXP_CUTOFF {
        return 0.0;
    }
    let integral = if order == 0 {
        if t == 0.0 {
            1.0 / y0
        } else {
            (-x).exp() / y0 - (PI * t).sqrt() * erfc(x.sqrt())
        }
    } else {
        0.5 * t.powf(0.5 - m as f64) * upper_gamma_half_integer(order, x)
    };
    let slope = (-x).exp()
        * ((2 * m - 2) as f64 * y0.powi(2 * m - 3) - 2.0 * t * y0.powi(2 * m - 1));
    0.5 * integral + slope / 12.0
}
