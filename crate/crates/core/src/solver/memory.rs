use crate::kernels::RelaxationKernel;
use crate::numerics::{exprel2_neg, exprel_neg};

/// Product-trapezoid weights for `int_0^{t_K} a'(tau) phi(tau) dtau` with
/// `phi` piecewise linear on the grid and `a'` integrated exactly per atom.
///
/// Cell `m` (`tau in [m h, (m+1) h]`) contributes `alpha_m phi_m + beta_m phi_{m+1}`.
#[derive(Clone, Debug)]
pub struct MemoryWeights {
    dt: f64,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    /// `a(t_m)` and `a'(t_m)`
    a: Vec<f64>,
    a_prime: Vec<f64>,
    /// per atom: `(q, c A, c B)` with `q = e^{-rho h}`, `c = -w rho`
    recursion: Vec<(f64, f64, f64)>,
}

impl MemoryWeights {
    /// Weights for steps `0..=steps`. The kernel must have no analytic tail.
    pub fn new(kernel: &RelaxationKernel, dt: f64, steps: usize) -> Self {
        let atoms = kernel.atoms();
        let coef: Vec<(f64, f64, f64)> = atoms
            .iter()
            .map(|at| {
                let x = at.rate * dt;
                let b = dt * exprel2_neg(x);
                let a = dt * exprel_neg(x) - b;
                (at.rate, -at.weight * at.rate * a, -at.weight * at.rate * b)
            })
            .collect();
        let mut alpha = vec![0.0; steps + 1];
        let mut beta = vec![0.0; steps + 1];
        let mut a = vec![0.0; steps + 1];
        let mut a_prime = vec![0.0; steps + 1];
        for m in 0..=steps {
            let t = m as f64 * dt;
            let (mut sa, mut sb) = (0.0, 0.0);
            for &(rate, ca, cb) in &coef {
                let e = (-rate * t).exp();
                if e == 0.0 {
                    break;
                }
                sa += ca * e;
                sb += cb * e;
            }
            alpha[m] = sa;
            beta[m] = sb;
            let (v, s) = kernel.value_and_slope(t);
            a[m] = v;
            a_prime[m] = s;
        }
        let recursion = atoms
            .iter()
            .zip(&coef)
            .map(|(at, &(_, ca, cb))| ((-at.rate * dt).exp(), ca, cb))
            .collect();
        Self {
            dt,
            alpha,
            beta,
            a,
            a_prime,
            recursion,
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.alpha.len() - 1
    }

    #[inline]
    pub fn alpha(&self, m: usize) -> f64 {
        self.alpha[m]
    }

    #[inline]
    pub fn beta(&self, m: usize) -> f64 {
        self.beta[m]
    }

    #[inline]
    pub fn a(&self, m: usize) -> f64 {
        self.a[m]
    }

    #[inline]
    pub fn a_prime(&self, m: usize) -> f64 {
        self.a_prime[m]
    }

    /// Weight of `phi(t_m)` in the rule over `[0, t_k]`, `1 <= m <= k`.
    #[inline]
    pub fn weight(&self, k: usize, m: usize) -> f64 {
        let head = if m < k { self.alpha[m] } else { 0.0 };
        head + self.beta[m - 1]
    }

    /// `sum_{m=1}^k weight(k, m)`; adding `alpha(0)`, the weight of `phi(0)`,
    /// gives `a(t_k) - a(0)` up to rounding.
    pub fn weight_sum(&self, k: usize) -> f64 {
        (1..=k).map(|m| self.weight(k, m)).sum()
    }

    pub(crate) fn recursion(&self) -> &[(f64, f64, f64)] {
        &self.recursion
    }
}

/// Running sums of the strain history per atom, so that the linear memory
/// sum `sum_m weight(k, m) U_{k-m}` costs `O(atoms)` per cell and step.
#[derive(Clone, Debug)]
pub struct RecursiveMemory {
    /// `[cell][atom]`: `P_k = sum_{m=1}^{k-1} q^m U_{k-m}`
    p: Vec<Vec<f64>>,
    /// `[cell][atom]`: `Q_k = sum_{m=1}^{k} q^{m-1} U_{k-m}`
    q: Vec<Vec<f64>>,
}

impl RecursiveMemory {
    pub fn new(cells: usize, atoms: usize) -> Self {
        Self {
            p: vec![vec![0.0; atoms]; cells],
            q: vec![vec![0.0; atoms]; cells],
        }
    }

    /// Advance from step `k` to `k + 1` given the accepted strain `U_k`.
    pub fn push(&mut self, weights: &MemoryWeights, strain: &[f64]) {
        let rec = weights.recursion();
        for (cell, &u) in strain.iter().enumerate() {
            let (p, q) = (&mut self.p[cell], &mut self.q[cell]);
            for (j, &(qq, _, _)) in rec.iter().enumerate() {
                p[j] = qq * (u + p[j]);
                q[j] = u + qq * q[j];
            }
        }
    }

    /// `sum_{m=1}^k weight(k, m) U_{k-m}` for one cell at the current step.
    pub fn history_sum(&self, weights: &MemoryWeights, cell: usize) -> f64 {
        let (p, q) = (&self.p[cell], &self.q[cell]);
        weights
            .recursion()
            .iter()
            .enumerate()
            .map(|(j, &(_, ca, cb))| ca * p[j] + cb * q[j])
            .sum()
    }
}
