use std::f64::consts::PI;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{gauss_legendre, Chebyshev};

/// Product rule on the unit sphere: Gauss-Legendre in `cos(polar)` times the
/// trapezoid rule in azimuth. Exact for polynomials of degree `2 * polar - 1`
/// in `cos(polar)` times trigonometric polynomials of degree `< azimuth`.
#[derive(Clone, Debug)]
pub struct SphereRule {
    polar: usize,
    azimuth: usize,
    /// `(u1, u2, u3, weight)`
    points: Vec<[f64; 4]>,
}

impl SphereRule {
    pub fn new(polar: usize, azimuth: usize) -> Result<Self> {
        if polar < 2 || azimuth < 4 {
            return Err(Error::Domain(format!(
                "sphere rule needs polar >= 2 and azimuth >= 4, got {polar} x {azimuth}"
            )));
        }
        let (z, wz) = gauss_legendre(polar);
        let dphi = 2.0 * PI / azimuth as f64;
        let mut points = Vec::with_capacity(polar * azimuth);
        for (zi, wi) in z.iter().zip(&wz) {
            let s = (1.0 - zi * zi).sqrt();
            for j in 0..azimuth {
                let phi = j as f64 * dphi;
                points.push([s * phi.cos(), s * phi.sin(), *zi, wi * dphi]);
            }
        }
        Ok(Self {
            polar,
            azimuth,
            points,
        })
    }

    pub fn size(&self) -> (usize, usize) {
        (self.polar, self.azimuth)
    }

    /// `int_{S^2} f(u) dS`
    pub fn integrate(&self, f: impl Fn(f64, f64, f64) -> f64) -> f64 {
        self.points.iter().map(|p| p[3] * f(p[0], p[1], p[2])).sum()
    }
}

/// Default and check rules used by `eval_g_de`.
pub const DEFAULT_SPHERE_RULE: (usize, usize) = (128, 256);
const CHECK_SPHERE_RULE: (usize, usize) = (64, 128);
/// Default tolerance on the difference between the two rules.
pub const G_DE_TOLERANCE: f64 = 1e-12;

fn default_rules() -> &'static (SphereRule, SphereRule) {
    static RULES: OnceLock<(SphereRule, SphereRule)> = OnceLock::new();
    RULES.get_or_init(|| {
        (
            SphereRule::new(DEFAULT_SPHERE_RULE.0, DEFAULT_SPHERE_RULE.1).unwrap(),
            SphereRule::new(CHECK_SPHERE_RULE.0, CHECK_SPHERE_RULE.1).unwrap(),
        )
    })
}

fn g_de_with(rule: &SphereRule, y: f64) -> f64 {
    -rule.integrate(|u1, u2, u3| {
        let d = u1 - u2 * y;
        let q = d * d + u2 * u2 + u3 * u3;
        u1 * u2 / (q * q.sqrt())
    })
}

/// Doi-Edwards damping function
/// `g(y) = -int_{S^2} u1 u2 [(u1 - u2 y)^2 + u2^2 + u3^2]^{-3/2} dS`
/// on the default 128 x 256 rule. The error estimate is the difference to a
/// 64 x 128 rule; exceeding `G_DE_TOLERANCE * max(1, |g|)` is an error.
pub fn eval_g_de(y: f64) -> Result<f64> {
    let (fine, coarse) = default_rules();
    eval_g_de_checked(y, fine, coarse, G_DE_TOLERANCE)
}

/// `eval_g_de` with caller-chosen rules and tolerance.
pub fn eval_g_de_checked(y: f64, fine: &SphereRule, coarse: &SphereRule, tol: f64) -> Result<f64> {
    if !y.is_finite() {
        return Err(Error::Domain(format!("g_DE evaluated at y = {y}")));
    }
    let a = g_de_with(fine, y);
    let b = g_de_with(coarse, y);
    let err = (a - b).abs();
    let requested = tol * a.abs().max(1.0);
    if err > requested {
        return Err(Error::Accuracy {
            achieved: err,
            requested,
            context: format!("g_DE({y}) on {:?} vs {:?} sphere rule", fine.size(), coarse.size()),
        });
    }
    Ok(a)
}

/// Interval on which `g_DE` is replaced by its Chebyshev interpolant.
pub const G_DE_FAST_RANGE: f64 = 2.5;
const G_DE_CHEBYSHEV_NODES: usize = 100;

fn g_de_interpolant() -> &'static Chebyshev {
    static CHEB: OnceLock<Chebyshev> = OnceLock::new();
    CHEB.get_or_init(|| {
        let (fine, _) = default_rules();
        let raw = Chebyshev::interpolate(
            -G_DE_FAST_RANGE,
            G_DE_FAST_RANGE,
            G_DE_CHEBYSHEV_NODES,
            |y| g_de_with(fine, y),
        );
        // g_DE is odd: drop the even coefficients, which only carry rounding noise
        let coeffs = raw
            .coefficients()
            .iter()
            .enumerate()
            .map(|(j, c)| if j % 2 == 0 { 0.0 } else { *c })
            .collect();
        Chebyshev::from_coefficients(-G_DE_FAST_RANGE, G_DE_FAST_RANGE, coeffs)
    })
}

/// Damping function models.
#[derive(Clone, Debug)]
pub enum DampingModel {
    /// `g(y) = sum c_i y^i`
    Polynomial(Vec<f64>),
    /// `g_DE`, through a Chebyshev interpolant on `[-2.5, 2.5]` and direct sphere
    /// quadrature with finite-difference derivatives outside it.
    DoiEdwards,
    /// Least-squares fit of a table, constrained to `g(0) = g''(0) = 0`.
    Tabulated {
        coefficients: Vec<f64>,
        range: (f64, f64),
        residual: f64,
    },
}

impl DampingModel {
    /// `g(y) = slope * y`
    pub fn linear(slope: f64) -> Self {
        DampingModel::Polynomial(vec![0.0, slope])
    }

    /// Fit `g(y) = c1 y + sum_{i=3..=degree} c_i y^i` to the samples by least
    /// squares.
    pub fn fit_table(ys: &[f64], gs: &[f64], degree: usize) -> Result<Self> {
        if ys.len() != gs.len() {
            return Err(Error::Config("table columns have different lengths".into()));
        }
        let powers: Vec<usize> = std::iter::once(1).chain(3..=degree.max(3)).collect();
        if ys.len() < powers.len() + 1 {
            return Err(Error::Config(format!(
                "table has {} rows, need at least {} for degree {degree}",
                ys.len(),
                powers.len() + 1
            )));
        }
        if ys.iter().chain(gs).any(|v| !v.is_finite()) {
            return Err(Error::Config("table contains non-finite values".into()));
        }
        let lo = ys.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let scale = lo.abs().max(hi.abs());
        if scale == 0.0 {
            return Err(Error::Config("table abscissae are all zero".into()));
        }
        let a = DMatrix::from_fn(ys.len(), powers.len(), |i, j| {
            (ys[i] / scale).powi(powers[j] as i32)
        });
        let b = DVector::from_column_slice(gs);
        let sol = a
            .clone()
            .svd(true, true)
            .solve(&b, 1e-14)
            .map_err(|e| Error::Config(format!("table fit failed: {e}")))?;
        let residual = (&a * &sol - &b).amax();
        let mut coefficients = vec![0.0; degree.max(3) + 1];
        for (j, &p) in powers.iter().enumerate() {
            coefficients[p] = sol[j] / scale.powi(p as i32);
        }
        Ok(DampingModel::Tabulated {
            coefficients,
            range: (lo, hi),
            residual,
        })
    }

    /// Derivative of order 0..=3 at `y`.
    pub fn eval(&self, y: f64, order: usize) -> f64 {
        match self {
            DampingModel::Polynomial(c) | DampingModel::Tabulated { coefficients: c, .. } => {
                poly_derivative(c, y, order)
            }
            DampingModel::DoiEdwards => {
                if y.abs() <= G_DE_FAST_RANGE {
                    g_de_interpolant().eval(y, order)
                } else {
                    g_de_direct_derivative(y, order)
                }
            }
        }
    }

    /// Interval where the model is trusted; `None` when defined on all of R.
    pub fn domain(&self) -> Option<(f64, f64)> {
        match self {
            DampingModel::Tabulated { range, .. } => Some(*range),
            _ => None,
        }
    }

    pub fn is_linear(&self) -> bool {
        match self {
            DampingModel::Polynomial(c) | DampingModel::Tabulated { coefficients: c, .. } => {
                c.iter().skip(2).all(|v| *v == 0.0)
            }
            DampingModel::DoiEdwards => false,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DampingModel::Polynomial(_) => "polynomial",
            DampingModel::DoiEdwards => "doi-edwards",
            DampingModel::Tabulated { .. } => "tabulated",
        }
    }
}

fn poly_derivative(c: &[f64], y: f64, order: usize) -> f64 {
    let mut acc = 0.0;
    for i in (order..c.len()).rev() {
        let mut falling = 1.0;
        for j in 0..order {
            falling *= (i - j) as f64;
        }
        acc = acc * y + falling * c[i];
    }
    acc
}

/// Five-point central differences of the direct quadrature.
fn g_de_direct_derivative(y: f64, order: usize) -> f64 {
    let (fine, _) = default_rules();
    let g = |x: f64| g_de_with(fine, x);
    let h = 1e-2 * y.abs().max(1.0);
    match order {
        0 => g(y),
        1 => (g(y - 2.0 * h) - 8.0 * g(y - h) + 8.0 * g(y + h) - g(y + 2.0 * h)) / (12.0 * h),
        2 => {
            (-g(y - 2.0 * h) + 16.0 * g(y - h) - 30.0 * g(y) + 16.0 * g(y + h) - g(y + 2.0 * h))
                / (12.0 * h * h)
        }
        _ => (-g(y - 2.0 * h) + 2.0 * g(y - h) - 2.0 * g(y + h) + g(y + 2.0 * h)) / (2.0 * h * h * h),
    }
}

/// Constants of a damping function on its hyperbolicity window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DampingConstants {
    /// radius `theta <= 1` of the window where `g' < 0`
    pub theta: f64,
    /// `max |g'(y) - g'(0)| / y^2` and `|g'''(y) - g'''(0)| / |y|` over the scan
    pub k: f64,
    /// `-max g'` over the window
    pub gamma: f64,
    /// `g'(0)`
    pub slope_at_zero: f64,
}

/// Scan step of the sign scan for `theta`.
pub const THETA_SCAN_STEP: f64 = 1e-3;

/// Largest `theta <= 1` with `g' < 0` on a `1e-3` grid over `[-theta, theta]`,
/// refined by bisection at the first sign change; then `gamma` and `K` on the
/// same grid.
pub fn estimate_damping_constants(model: &DampingModel) -> Result<DampingConstants> {
    let d1 = |y: f64| model.eval(y, 1);
    let slope0 = d1(0.0);
    if !(slope0 < 0.0) {
        return Err(Error::Hypothesis(format!(
            "g'(0) = {slope0} is not negative: model not hyperbolic at rest"
        )));
    }
    let steps = (1.0 / THETA_SCAN_STEP).round() as usize;
    let mut theta = 1.0;
    for i in 1..=steps {
        let y = i as f64 * THETA_SCAN_STEP;
        let prev = (i - 1) as f64 * THETA_SCAN_STEP;
        let mut root = f64::INFINITY;
        for sign in [1.0, -1.0] {
            if d1(sign * y) >= 0.0 {
                let (mut lo, mut hi) = (prev, y);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if d1(sign * mid) < 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                root = root.min(lo);
            }
        }
        if root.is_finite() {
            theta = root;
            break;
        }
    }
    let mut grid: Vec<f64> = (1..=steps)
        .map(|i| i as f64 * THETA_SCAN_STEP)
        .filter(|&y| y < theta)
        .collect();
    grid.push(theta);
    let d3_0 = model.eval(0.0, 3);
    let mut max_slope = slope0;
    let mut k: f64 = 0.0;
    for &y in &grid {
        for s in [y, -y] {
            let g1 = d1(s);
            max_slope = max_slope.max(g1);
            k = k.max((g1 - slope0).abs() / (s * s));
            k = k.max((model.eval(s, 3) - d3_0).abs() / s.abs());
        }
    }
    Ok(DampingConstants {
        theta,
        k,
        gamma: -max_slope,
        slope_at_zero: slope0,
    })
}

/// A damping model together with its validated constants.
#[derive(Clone, Debug)]
pub struct DampingFunction {
    model: DampingModel,
    constants: DampingConstants,
    lemma_constant: f64,
}

impl DampingFunction {
    /// Validate `g(0) = 0`, `g''(0) = 0`, `g'(0) < 0` and estimate constants.
    pub fn new(model: DampingModel) -> Result<Self> {
        let g0 = model.eval(0.0, 0);
        let g2 = model.eval(0.0, 2);
        let scale = model.eval(0.0, 1).abs().max(1.0);
        if g0.abs() > 1e-12 * scale {
            return Err(Error::Hypothesis(format!("g(0) = {g0:e} is not zero")));
        }
        if g2.abs() > 1e-8 * scale {
            return Err(Error::Hypothesis(format!("g''(0) = {g2:e} is not zero")));
        }
        let constants = estimate_damping_constants(&model)?;
        let mut lemma: f64 = constants.k;
        let steps = (constants.theta / THETA_SCAN_STEP).ceil() as usize;
        for i in 0..=steps {
            let y = (i as f64 * THETA_SCAN_STEP).min(constants.theta);
            for s in [y, -y] {
                for order in 1..=3 {
                    lemma = lemma.max(model.eval(s, order).abs());
                }
            }
        }
        Ok(Self {
            model,
            constants,
            lemma_constant: lemma,
        })
    }

    pub fn linear(slope: f64) -> Result<Self> {
        Self::new(DampingModel::linear(slope))
    }

    pub fn doi_edwards() -> Result<Self> {
        Self::new(DampingModel::DoiEdwards)
    }

    pub fn model(&self) -> &DampingModel {
        &self.model
    }

    pub fn constants(&self) -> DampingConstants {
        self.constants
    }

    pub fn theta(&self) -> f64 {
        self.constants.theta
    }

    pub fn k(&self) -> f64 {
        self.constants.k
    }

    pub fn gamma(&self) -> f64 {
        self.constants.gamma
    }

    pub fn slope_at_zero(&self) -> f64 {
        self.constants.slope_at_zero
    }

    /// Constant used in the remainder bounds:
    /// `max(K, sup |g'|, sup |g''|, sup |g'''|)` over `[-theta, theta]`.
    pub fn lemma_constant(&self) -> f64 {
        self.lemma_constant
    }

    pub fn is_linear(&self) -> bool {
        self.model.is_linear()
    }

    #[inline]
    pub fn g(&self, y: f64) -> f64 {
        self.model.eval(y, 0)
    }

    #[inline]
    pub fn d1(&self, y: f64) -> f64 {
        self.model.eval(y, 1)
    }

    #[inline]
    pub fn d2(&self, y: f64) -> f64 {
        self.model.eval(y, 2)
    }

    #[inline]
    pub fn d3(&self, y: f64) -> f64 {
        self.model.eval(y, 3)
    }

    pub fn eval(&self, y: f64, order: usize) -> Result<f64> {
        if order > 3 {
            return Err(Error::Domain(format!(
                "derivative order {order} not supported (max 3)"
            )));
        }
        Ok(self.model.eval(y, order))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g_de_is_odd_and_vanishes_at_zero() {
        assert!(eval_g_de(0.0).unwrap().abs() < 1e-14);
        let a = eval_g_de(0.3).unwrap();
        let b = eval_g_de(-0.3).unwrap();
        assert!((a + b).abs() < 2e-12);
    }

    #[test]
    fn g_de_reference_values() {
        assert!((eval_g_de(0.3).unwrap() + 0.73817).abs() < 1e-5);
        assert!((eval_g_de(1.0).unwrap() + 2.03234).abs() < 1e-5);
    }

    #[test]
    fn default_rule_is_converged_on_fast_range() {
        let fine = SphereRule::new(256, 512).unwrap();
        let (rule, _) = default_rules();
        for y in [-2.5, -1.7, 0.2, 2.0, 2.5] {
            let d = (g_de_with(rule, y) - g_de_with(&fine, y)).abs();
            assert!(d < 1e-13, "y={y}: {d:e}");
        }
    }

    #[test]
    fn interpolant_matches_quadrature() {
        let (rule, _) = default_rules();
        for i in 0..=50 {
            let y = -2.5 + 0.1 * i as f64;
            let d = (DampingModel::DoiEdwards.eval(y, 0) - g_de_with(rule, y)).abs();
            assert!(d < 1e-12, "y={y}: {d:e}");
        }
    }

    #[test]
    fn g_de_slope_at_zero() {
        let s = DampingModel::DoiEdwards.eval(0.0, 1);
        assert!((s + 4.0 * PI / 5.0).abs() < 1e-10, "{s}");
    }

    #[test]
    fn interpolant_derivatives_agree_with_finite_differences() {
        let m = DampingModel::DoiEdwards;
        for y in [-0.8, 0.1, 0.5, 1.0] {
            for order in 1..=3 {
                let h = 1e-3;
                let fd = (m.eval(y + h, order - 1) - m.eval(y - h, order - 1)) / (2.0 * h);
                let v = m.eval(y, order);
                assert!((v - fd).abs() < 1e-5 * v.abs().max(1.0), "y={y} order={order}");
            }
        }
    }

    #[test]
    fn outside_fast_range_matches_inside_at_edge() {
        let inside = DampingModel::DoiEdwards.eval(2.5, 1);
        let outside = g_de_direct_derivative(2.5, 1);
        assert!((inside - outside).abs() < 1e-6);
    }

    #[test]
    fn far_argument_fails_accuracy_check() {
        assert!(matches!(eval_g_de(200.0), Err(Error::Accuracy { .. })));
    }

    #[test]
    fn linear_constants() {
        let c = estimate_damping_constants(&DampingModel::linear(-1.0)).unwrap();
        assert_eq!(c.theta, 1.0);
        assert_eq!(c.gamma, 1.0);
        assert_eq!(c.k, 0.0);
    }

    #[test]
    fn cubic_theta_is_capped_below_root() {
        // g = y^3 - y, g' = 3y^2 - 1
        let c = estimate_damping_constants(&DampingModel::Polynomial(vec![0.0, -1.0, 0.0, 1.0]))
            .unwrap();
        let root = 1.0 / 3f64.sqrt();
        assert!(c.theta <= root && root - c.theta < 1e-12, "{}", c.theta);
        assert!(c.gamma >= 0.0 && c.gamma < 1e-10);
    }

    #[test]
    fn positive_slope_is_rejected() {
        assert!(matches!(
            estimate_damping_constants(&DampingModel::linear(1.0)),
            Err(Error::Hypothesis(_))
        ));
    }

    #[test]
    fn doi_edwards_constants() {
        let g = DampingFunction::doi_edwards().unwrap();
        assert_eq!(g.theta(), 1.0);
        // g' is even with its largest value on [-1, 1] at the endpoints
        let (rule, _) = default_rules();
        let h = 1e-4;
        let fd = (g_de_with(rule, 1.0 + h) - g_de_with(rule, 1.0 - h)) / (2.0 * h);
        assert!((g.gamma() + fd).abs() < 1e-6, "{} vs {}", g.gamma(), -fd);
        assert!(g.k().is_finite() && g.k() > 0.0);
        assert!(g.lemma_constant() >= g.slope_at_zero().abs());
    }

    #[test]
    fn nonzero_curvature_at_origin_is_rejected() {
        assert!(DampingFunction::new(DampingModel::Polynomial(vec![0.0, -1.0, 0.5])).is_err());
        assert!(DampingFunction::new(DampingModel::Polynomial(vec![0.1, -1.0])).is_err());
    }

    #[test]
    fn table_fit_recovers_polynomial() {
        let ys: Vec<f64> = (0..41).map(|i| -1.0 + 0.05 * i as f64).collect();
        let gs: Vec<f64> = ys.iter().map(|y| -2.0 * y + 0.3 * y * y * y).collect();
        let m = DampingModel::fit_table(&ys, &gs, 5).unwrap();
        assert!((m.eval(0.4, 1) - (-2.0 + 0.9 * 0.16)).abs() < 1e-10);
        assert_eq!(m.eval(0.0, 0), 0.0);
        assert_eq!(m.eval(0.0, 2), 0.0);
        assert_eq!(m.domain(), Some((-1.0, 1.0)));
    }
}
