use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::KahanSum;

/// One point mass of the relaxation measure: `weight * delta(rate)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub rate: f64,
    pub weight: f64,
}

/// Named rules generating an infinite atom family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeasureFamily {
    /// weight `1/(2k+1)^2` at rate `(2k+1)^2`, `k >= 1`
    DoiEdwards,
}

/// Index of the first Doi-Edwards atom that is not materialized. Atoms with
/// `k < DE_FIRST_OMITTED` have weight at least `1e-10`; the remainder is
/// handled by analytic tail sums.
pub const DE_FIRST_OMITTED: u64 = 50_000;

/// Atoms of a generated family beyond the materialized list.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FamilyTail {
    pub family: MeasureFamily,
    pub first_omitted: u64,
}

impl FamilyTail {
    /// Left edge of the midpoint cell of the first omitted atom, in the
    /// variable `y = 2k + 1` (atoms sit at odd `y`, cells have width 2).
    pub(crate) fn cell_edge(&self) -> f64 {
        2.0 * self.first_omitted as f64
    }

    /// Tail of `sum_k (2k+1)^{-q}` over omitted atoms, `q > 1`, by the
    /// midpoint Euler-Maclaurin formula. Error is `O(Y^{-q-3})`.
    pub(crate) fn odd_power_tail(&self, q: f64) -> f64 {
        if q <= 1.0 {
            return f64::INFINITY;
        }
        let y = self.cell_edge();
        y.powf(1.0 - q) / (2.0 * (q - 1.0)) - q * y.powf(-q - 1.0) / 12.0
    }
}

/// A finite positive atomic measure on the rates, optionally generated from a
/// named family whose unmaterialized tail is tracked analytically.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasureSpec {
    atoms: Vec<Atom>,
    tail: Option<FamilyTail>,
}

impl MeasureSpec {
    /// Explicit atom list. Rates and weights must be finite and strictly
    /// positive; atoms are sorted by rate.
    pub fn from_atoms(mut atoms: Vec<Atom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::Domain("measure has no atoms".into()));
        }
        for (i, a) in atoms.iter().enumerate() {
            if !(a.rate.is_finite() && a.rate > 0.0) {
                return Err(Error::Domain(format!(
                    "atom {i}: rate must be finite and > 0, got {}",
                    a.rate
                )));
            }
            if !(a.weight.is_finite() && a.weight > 0.0) {
                return Err(Error::Domain(format!(
                    "atom {i}: weight must be finite and > 0, got {}",
                    a.weight
                )));
            }
        }
        atoms.sort_by(|a, b| a.rate.total_cmp(&b.rate));
        Ok(Self { atoms, tail: None })
    }

    /// The measure `sum_{k>=1} (2k+1)^{-2} delta_{(2k+1)^2}`.
    pub fn doi_edwards() -> Self {
        let atoms = (1..DE_FIRST_OMITTED)
            .map(|k| {
                let r = (2 * k + 1) as f64;
                Atom {
                    rate: r * r,
                    weight: 1.0 / (r * r),
                }
            })
            .collect();
        Self {
            atoms,
            tail: Some(FamilyTail {
                family: MeasureFamily::DoiEdwards,
                first_omitted: DE_FIRST_OMITTED,
            }),
        }
    }

    pub fn single(rate: f64, weight: f64) -> Result<Self> {
        Self::from_atoms(vec![Atom { rate, weight }])
    }

    pub fn from_family(family: MeasureFamily) -> Self {
        match family {
            MeasureFamily::DoiEdwards => Self::doi_edwards(),
        }
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn tail(&self) -> Option<FamilyTail> {
        self.tail
    }

    pub fn family(&self) -> Option<MeasureFamily> {
        self.tail.map(|t| t.family)
    }

    /// Multiply every weight by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::Domain(format!("scale must be > 0, got {c}")));
        }
        if self.tail.is_some() {
            return Err(Error::Usage(
                "scaling a generated family with an analytic tail is not supported".into(),
            ));
        }
        Self::from_atoms(
            self.atoms
                .iter()
                .map(|a| Atom {
                    rate: a.rate,
                    weight: a.weight * c,
                })
                .collect(),
        )
    }

    /// `sum w rho^beta` over all atoms including the analytic tail
    /// (`+inf` when a generated tail diverges).
    pub fn power_moment(&self, beta: f64) -> f64 {
        let mut acc = KahanSum::default();
        // smallest terms first
        let mut terms: Vec<f64> = self
            .atoms
            .iter()
            .map(|a| a.weight * a.rate.powf(beta))
            .collect();
        terms.sort_by(|a, b| a.total_cmp(b));
        for t in terms {
            acc.add(t);
        }
        let tail = match self.tail {
            None => 0.0,
            // w rho^beta = (2k+1)^{2 beta - 2}
            Some(t) => t.odd_power_tail(2.0 - 2.0 * beta),
        };
        acc.value() + tail
    }
}

/// Outcome of the finiteness checks on `rho^{-2}` and `rho^gamma` moments.
#[derive(Clone, Debug, Serialize)]
pub struct MeasureReport {
    pub gamma: f64,
    /// `sum w rho^{-2}`
    pub inverse_square_moment: f64,
    /// `sum w rho^gamma`
    pub gamma_moment: f64,
    pub inverse_square_ok: bool,
    pub gamma_moment_ok: bool,
    /// finite but dominated by near-zero rates
    pub ill_conditioned: bool,
    pub notes: Vec<String>,
}

impl MeasureReport {
    pub fn passed(&self) -> bool {
        self.inverse_square_ok && self.gamma_moment_ok
    }
}

/// Check the two moment conditions a relaxation measure must satisfy: finite
/// `int rho^{-2} dmu` and finite `int rho^gamma dmu` for the given
/// `gamma in (0, 1)`.
pub fn check_measure_hypotheses(measure: &MeasureSpec, gamma: f64) -> Result<MeasureReport> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::Domain(format!("gamma must lie in (0,1), got {gamma}")));
    }
    let inv_sq = measure.power_moment(-2.0);
    let pow_g = measure.power_moment(gamma);
    let mass = measure.power_moment(0.0);
    let mut notes = Vec::new();
    if let Some(t) = measure.tail() {
        // w rho^beta ~ (2k+1)^{2 beta - 2}: converges iff beta < 1/2
        let exponent = 2.0 - 2.0 * gamma;
        if exponent > 1.0 {
            notes.push(format!(
                "{:?} tail from k = {}: terms ~ (2k+1)^-{exponent:.3}, convergent p-series",
                t.family, t.first_omitted
            ));
        } else {
            notes.push(format!(
                "{:?} tail: terms ~ (2k+1)^-{exponent:.3}, divergent (needs gamma < 1/2)",
                t.family
            ));
        }
        notes.push(format!(
            "{:?} tail for rho^-2: terms ~ (2k+1)^-6, convergent p-series",
            t.family
        ));
    } else {
        notes.push(format!(
            "finite list of {} atoms: both moments are finite sums",
            measure.atoms().len()
        ));
    }
    let ill_conditioned = inv_sq > 1e8 * mass;
    if ill_conditioned {
        notes.push(format!(
            "rho^-2 moment {inv_sq:.3e} exceeds 1e8 x total mass {mass:.3e}: near-zero rates dominate"
        ));
    }
    Ok(MeasureReport {
        gamma,
        inverse_square_moment: inv_sq,
        gamma_moment: pow_g,
        inverse_square_ok: inv_sq.is_finite(),
        gamma_moment_ok: pow_g.is_finite(),
        ill_conditioned,
        notes,
    })
}
