//! Small numerical building blocks shared by the kernel, spectral and solver
//! modules: Gauss-Legendre rules, Chebyshev approximants, stable exponential
//! moments and trapezoid helpers.

use statrs::function::erf::erfc;
use std::f64::consts::PI;

/// Gauss-Legendre nodes and weights on [-1, 1].
///
/// Newton iteration on the three-term recurrence, started from the
/// Tricomi approximation of the roots.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Chebyshev interpolant on `[lo, hi]` together with the coefficient series
/// of its first three derivatives.
#[derive(Clone, Debug)]
pub struct Chebyshev {
    lo: f64,
    hi: f64,
    /// coefficient series for orders 0..=3
    series: [Vec<f64>; 4],
}

impl Chebyshev {
    /// Interpolate `f` at `n` Chebyshev points of the first kind.
    pub fn interpolate(lo: f64, hi: f64, n: usize, f: impl Fn(f64) -> f64) -> Self {
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        let values: Vec<f64> = (0..n)
            .map(|k| {
                let theta = PI * (k as f64 + 0.5) / n as f64;
                f(mid + half * theta.cos())
            })
            .collect();
        let mut coeffs = vec![0.0; n];
        for (j, c) in coeffs.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (k, v) in values.iter().enumerate() {
                acc += v * (PI * j as f64 * (k as f64 + 0.5) / n as f64).cos();
            }
            *c = 2.0 * acc / n as f64;
        }
        coeffs[0] *= 0.5;
        // drop the trailing rounding-noise plateau; derivatives amplify it by k^2 per order
        let cap = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        let floor = 8.0 * f64::EPSILON * cap;
        let keep = coeffs.iter().rposition(|c| c.abs() > floor).map_or(1, |j| j + 1);
        coeffs.truncate(keep);
        Self::from_coefficients(lo, hi, coeffs)
    }

    /// Build from coefficients `c_j` of `sum c_j T_j`.
    pub fn from_coefficients(lo: f64, hi: f64, coeffs: Vec<f64>) -> Self {
        let scale = 2.0 / (hi - lo);
        let d1 = derivative_series(&coeffs, scale);
        let d2 = derivative_series(&d1, scale);
        let d3 = derivative_series(&d2, scale);
        Self {
            lo,
            hi,
            series: [coeffs, d1, d2, d3],
        }
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    /// Evaluate the derivative of the given order (0..=3).
    pub fn eval(&self, x: f64, order: usize) -> f64 {
        let t = (2.0 * x - self.lo - self.hi) / (self.hi - self.lo);
        clenshaw(&self.series[order], t)
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.series[0]
    }
}

fn clenshaw(c: &[f64], t: f64) -> f64 {
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    for &ck in c.iter().skip(1).rev() {
        let b0 = 2.0 * t * b1 - b2 + ck;
        b2 = b1;
        b1 = b0;
    }
    t * b1 - b2 + c.first().copied().unwrap_or(0.0)
}

fn derivative_series(c: &[f64], scale: f64) -> Vec<f64> {
    let n = c.len();
    if n <= 1 {
        return vec![0.0];
    }
    let mut d = vec![0.0; n];
    // d_{k-1} = d_{k+1} + 2 k c_k
    for k in (1..n).rev() {
        let next = if k + 1 < n { d[k + 1] } else { 0.0 };
        d[k - 1] = next + 2.0 * k as f64 * c[k];
    }
    d[0] *= 0.5;
    d.pop();
    d.iter().map(|v| v * scale).collect()
}

/// `(1 - e^{-x}) / x`, stable near zero.
pub fn exprel_neg(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - 0.5 * x
    } else {
        -(-x).exp_m1() / x
    }
}

/// `(1 - (1 + x) e^{-x}) / x^2`, stable near zero.
pub fn exprel2_neg(x: f64) -> f64 {
    if x.abs() < 0.1 {
        // sum_{n>=2} (-1)^n (n-1) x^{n-2} / n!
        let mut term_fact = 2.0; // n!
        let mut xp = 1.0;
        let mut acc = 0.0;
        for n in 2..22 {
            if n > 2 {
                term_fact *= n as f64;
                xp *= -x;
            }
            acc += (n as f64 - 1.0) * xp / term_fact;
        }
        acc
    } else {
        (-(-x).exp_m1() - x * (-x).exp()) / (x * x)
    }
}

/// Upper incomplete gamma function `Gamma(3/2, x)` for `x >= 0`.
pub fn upper_gamma_three_halves(x: f64) -> f64 {
    let sx = x.sqrt();
    sx * (-x).exp() + 0.5 * PI.sqrt() * erfc(sx)
}

/// Upper incomplete gamma function `Gamma(k - 1/2, x)` for k = 1, 2, 3.
pub fn upper_gamma_half_integer(k: usize, x: f64) -> f64 {
    let sx = x.sqrt();
    let g_half = PI.sqrt() * erfc(sx);
    match k {
        1 => g_half,
        2 => 0.5 * g_half + sx * (-x).exp(),
        3 => 1.5 * (0.5 * g_half + sx * (-x).exp()) + x * sx * (-x).exp(),
        _ => panic!("upper_gamma_half_integer supports k = 1..=3"),
    }
}

/// Composite trapezoid weight for node `j` of `n` equally spaced nodes.
#[inline]
pub fn trapezoid_weight(j: usize, n: usize, h: f64) -> f64 {
    if n < 2 {
        0.0
    } else if j == 0 || j == n - 1 {
        0.5 * h
    } else {
        h
    }
}

/// Trapezoid integral of equally spaced samples.
pub fn trapezoid(samples: &[f64], h: f64) -> f64 {
    let n = samples.len();
    if n < 2 {
        return 0.0;
    }
    let inner: f64 = samples[1..n - 1].iter().sum();
    h * (inner + 0.5 * (samples[0] + samples[n - 1]))
}

/// Compensated (Kahan-Babuska) accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// First derivative of equally spaced samples: centered in the interior,
/// second-order one-sided at both ends.
pub fn derivative(samples: &[f64], h: f64) -> Vec<f64> {
    let n = samples.len();
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        2 => {
            let d = (samples[1] - samples[0]) / h;
            vec![d, d]
        }
        _ => {
            let mut out = vec![0.0; n];
            out[0] = (-3.0 * samples[0] + 4.0 * samples[1] - samples[2]) / (2.0 * h);
            for i in 1..n - 1 {
                out[i] = (samples[i + 1] - samples[i - 1]) / (2.0 * h);
            }
            out[n - 1] =
                (3.0 * samples[n - 1] - 4.0 * samples[n - 2] + samples[n - 3]) / (2.0 * h);
            out
        }
    }
}

/// Second derivative of equally spaced samples: centered in the interior,
/// second-order one-sided at both ends (needs four samples, falls back to
/// first order with three).
pub fn second_derivative(samples: &[f64], h: f64) -> Vec<f64> {
    let n = samples.len();
    let h2 = h * h;
    if n < 3 {
        return vec![0.0; n];
    }
    let mut out = vec![0.0; n];
    for i in 1..n - 1 {
        out[i] = (samples[i + 1] - 2.0 * samples[i] + samples[i - 1]) / h2;
    }
    if n >= 4 {
        out[0] = (2.0 * samples[0] - 5.0 * samples[1] + 4.0 * samples[2] - samples[3]) / h2;
        out[n - 1] = (2.0 * samples[n - 1] - 5.0 * samples[n - 2] + 4.0 * samples[n - 3]
            - samples[n - 4])
            / h2;
    } else {
        out[0] = out[1];
        out[n - 1] = out[n - 2];
    }
    out
}

/// Third derivative of equally spaced samples: five-point centered stencil in
/// the interior, second-order one-sided stencils on the two nodes next to each
/// end. Needs at least five samples.
pub fn third_derivative(samples: &[f64], h: f64) -> Vec<f64> {
    let n = samples.len();
    let h3 = h * h * h;
    if n < 5 {
        return vec![0.0; n];
    }
    let mut out = vec![0.0; n];
    for i in 2..n - 2 {
        out[i] = (samples[i + 2] - 2.0 * samples[i + 1] + 2.0 * samples[i - 1] - samples[i - 2])
            / (2.0 * h3);
    }
    let fwd = |s: &[f64]| {
        (-5.0 * s[0] + 18.0 * s[1] - 24.0 * s[2] + 14.0 * s[3] - 3.0 * s[4]) / (2.0 * h3)
    };
    if n >= 6 {
        out[0] = fwd(&samples[0..5]);
        out[1] = fwd(&samples[1..6]);
        let rev: Vec<f64> = samples[n - 6..].iter().rev().copied().collect();
        out[n - 1] = -fwd(&rev[0..5]);
        out[n - 2] = -fwd(&rev[1..6]);
    } else {
        out[0] = fwd(&samples[0..5]);
        out[1] = out[2];
        out[n - 2] = out[n - 3];
        let rev: Vec<f64> = samples.iter().rev().copied().collect();
        out[n - 1] = -fwd(&rev[0..5]);
    }
    out
}
