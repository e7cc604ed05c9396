//! Fourier-side checks on relaxation kernels and the ingredients of the
//! convolution inversion formula.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::RelaxationKernel;
use crate::numerics::{gauss_legendre, KahanSum};
use crate::volterra::{convolve_samples, TimeSignal};

/// `F a(omega) = sum w / (rho + i omega)` over the retained atoms. The
/// unmaterialized tail of a generated family contributes less than
/// `sum_{k >= 5e4} (2k+1)^-4 < 2e-16` and is omitted.
pub fn fourier_exact(kernel: &RelaxationKernel, omega: f64) -> Complex64 {
    let mut re = KahanSum::default();
    let mut im = KahanSum::default();
    for a in kernel.atoms().iter().rev() {
        let d = a.rate * a.rate + omega * omega;
        re.add(a.weight * a.rate / d);
        im.add(-a.weight * omega / d);
    }
    Complex64::new(re.value(), im.value())
}

/// `F a'(omega) = -sum w rho / (rho + i omega)`.
pub fn fourier_derivative_exact(kernel: &RelaxationKernel, omega: f64) -> Complex64 {
    let mut re = KahanSum::default();
    let mut im = KahanSum::default();
    for a in kernel.atoms().iter().rev() {
        let d = a.rate * a.rate + omega * omega;
        re.add(-a.weight * a.rate * a.rate / d);
        im.add(a.weight * a.rate * omega / d);
    }
    Complex64::new(re.value(), im.value())
}

/// `0` together with `+-` logarithmically spaced frequencies in
/// `[omega_min, omega_max]`; `n` points in total (rounded up to odd).
pub fn log_symmetric_grid(omega_min: f64, omega_max: f64, n: usize) -> Result<Vec<f64>> {
    if !(omega_min > 0.0 && omega_max > omega_min) || n < 3 {
        return Err(Error::Domain(format!(
            "log grid needs 0 < omega_min < omega_max and n >= 3, got {omega_min}, {omega_max}, {n}"
        )));
    }
    let half = n / 2;
    let (l0, l1) = (omega_min.ln(), omega_max.ln());
    let pos: Vec<f64> = (0..half)
        .map(|i| (l0 + (l1 - l0) * i as f64 / (half - 1).max(1) as f64).exp())
        .collect();
    let mut grid: Vec<f64> = pos.iter().rev().map(|w| -w).collect();
    grid.push(0.0);
    grid.extend(pos);
    Ok(grid)
}

/// Samples of `F a` and `F a'` on a frequency grid.
#[derive(Clone, Debug, Serialize)]
pub struct SpectralProfile {
    pub omegas: Vec<f64>,
    pub fa: Vec<(f64, f64)>,
    pub fa_prime: Vec<(f64, f64)>,
    /// `min (1 + omega^2) Re F a` over the grid
    pub m1: f64,
}

pub fn spectral_profile(kernel: &RelaxationKernel, omegas: &[f64]) -> SpectralProfile {
    let fa: Vec<Complex64> = omegas.par_iter().map(|&w| fourier_exact(kernel, w)).collect();
    let fa_prime: Vec<Complex64> = omegas
        .par_iter()
        .map(|&w| fourier_derivative_exact(kernel, w))
        .collect();
    let m1 = omegas
        .iter()
        .zip(&fa)
        .map(|(w, f)| (1.0 + w * w) * f.re)
        .fold(f64::INFINITY, f64::min);
    SpectralProfile {
        omegas: omegas.to_vec(),
        fa: fa.iter().map(|c| (c.re, c.im)).collect(),
        fa_prime: fa_prime.iter().map(|c| (c.re, c.im)).collect(),
        m1,
    }
}

impl SpectralProfile {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "omega,re_fa,im_fa,re_fa_prime,im_fa_prime")?;
        for ((w, a), b) in self.omegas.iter().zip(&self.fa).zip(&self.fa_prime) {
            writeln!(out, "{w:.16e},{:.16e},{:.16e},{:.16e},{:.16e}", a.0, a.1, b.0, b.1)?;
        }
        Ok(())
    }
}

/// Outcome of the strong positivity check `Re F a >= M1 / (1 + omega^2)`.
#[derive(Clone, Debug, Serialize)]
pub struct PositivityReport {
    pub pass: bool,
    /// `min (1 + omega^2) Re F a` over the grid
    pub m1_grid: f64,
    pub argmin_omega: f64,
    /// `rho_lo mu([rho_lo, rho_hi]) min(1, rho_hi^-2)`, best over atom windows
    pub m1_constructive: f64,
    pub constructive_window: (f64, f64),
    /// limit of `(1 + omega^2) Re F a` as `omega -> inf`, i.e. `sum w rho`
    pub high_frequency_limit: f64,
    pub grid_points: usize,
    pub omega_max: f64,
}

/// Atom windows searched for the constructive lower bound.
const CONSTRUCTIVE_WINDOW_ATOMS: usize = 200;

/// Grid minimum of `(1 + omega^2) Re F a`, cross-checked against the
/// constructive bound `Re F a >= rho_lo mu([rho_lo, rho_hi]) / (rho_hi^2 + omega^2)`.
pub fn check_strong_positivity(kernel: &RelaxationKernel, omegas: &[f64]) -> Result<PositivityReport> {
    if omegas.is_empty() {
        return Err(Error::Domain("empty frequency grid".into()));
    }
    let values: Vec<f64> = omegas
        .par_iter()
        .map(|&w| (1.0 + w * w) * fourier_exact(kernel, w).re)
        .collect();
    let (imin, m1_grid) = values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |(bi, bv), (i, &v)| if v < bv { (i, v) } else { (bi, bv) });

    let atoms = kernel.atoms();
    let m = atoms.len().min(CONSTRUCTIVE_WINDOW_ATOMS);
    let mut best = (0.0, (atoms[0].rate, atoms[0].rate));
    for i in 0..m {
        let mut mass = 0.0;
        for a in &atoms[i..m] {
            mass += a.weight;
            // (1 + w^2)/(hi^2 + w^2) is monotone in w^2: extremes at 0 and inf
            let bound = atoms[i].rate * mass * (1.0 / (a.rate * a.rate)).min(1.0);
            if bound > best.0 {
                best = (bound, (atoms[i].rate, a.rate));
            }
        }
    }
    let high = if kernel.has_tail() {
        f64::INFINITY
    } else {
        -kernel.a0_derivative()
    };
    let omega_max = omegas.iter().fold(0.0f64, |m, w| m.max(w.abs()));
    let pass = m1_grid > 0.0 && m1_grid >= best.0 * (1.0 - 1e-12) && high > 0.0;
    Ok(PositivityReport {
        pass,
        m1_grid,
        argmin_omega: omegas[imin],
        m1_constructive: best.0,
        constructive_window: best.1,
        high_frequency_limit: high,
        grid_points: omegas.len(),
        omega_max,
    })
}

/// Target for `|F b'|^p / |F b|` at the Nyquist frequency when choosing `p`.
pub const POWER_TAIL_TARGET: f64 = 1e-10;
pub const MAX_POWER: usize = 12;

/// `|F b'(omega)|^p / |F b(omega)|`
pub fn power_tail_ratio(kernel: &RelaxationKernel, p: usize, omega: f64) -> f64 {
    fourier_derivative_exact(kernel, omega).norm().powi(p as i32) / fourier_exact(kernel, omega).norm()
}

/// Smallest `p >= 2` with `|F b'|^p / |F b| < 1e-10` at `omega = pi / dt`,
/// capped at `MAX_POWER`.
pub fn default_power(kernel: &RelaxationKernel, dt: f64) -> usize {
    let omega = std::f64::consts::PI / dt;
    (2..=MAX_POWER)
        .find(|&p| power_tail_ratio(kernel, p, omega) < POWER_TAIL_TARGET)
        .unwrap_or(MAX_POWER)
}

/// Sampled data of the inversion formula
/// `w = l' / b(0+) + B1 * l' + B2 * l` for `b * w = l`.
#[derive(Clone, Debug)]
pub struct InversionOperator {
    b0: f64,
    p: usize,
    dt: f64,
    b: Vec<f64>,
    b1: Vec<f64>,
    b2: Vec<f64>,
    fingerprint: u64,
    info: InversionInfo,
}

/// Numbers recorded while building an `InversionOperator`.
#[derive(Clone, Debug, Serialize)]
pub struct InversionInfo {
    pub b0: f64,
    pub p: usize,
    pub dt: f64,
    pub samples: usize,
    pub b1_l1: f64,
    pub b2_l1: f64,
    /// `|| F^-1[(F b')^p / F b] ||_{L1}` on the sampled range
    pub ratio_l1: f64,
    /// `|F b'|^p / |F b|` at the Nyquist frequency
    pub ratio_at_nyquist: f64,
    pub fft_size: usize,
    pub period: f64,
    pub subtracted_terms: usize,
    /// `min |F b(omega)| (1 + |omega|)` over the FFT frequencies
    pub min_scaled_fb: f64,
}

const MAX_FFT_SIZE: usize = 1 << 24;
/// Highest power `y^m` removed analytically before the FFT.
const SUBTRACTED_ORDER: usize = 10;

/// Build `B1`, `B2` on `t_k = k dt`, `k = 0..=round(t_end / dt)`.
///
/// `B1 = sum_{k=1}^{p-1} (-1)^k (b')^{*k} / b0^{k+1}` by iterated trapezoid
/// convolution. `B2 = (-1)^p / b0^p F^-1[(F b')^p / F b]`: with
/// `lambda = max rate` and `y = lambda / (lambda + i omega)` the ratio is
/// `lambda (-1)^p y^{p-1} Q(y)` for a power series `Q` whose leading terms
/// are inverted exactly (`y^m <-> lambda^m t^{m-1} e^{-lambda t} / (m-1)!`)
/// and whose remainder goes through an inverse FFT.
pub fn build_inversion(
    kernel: &RelaxationKernel,
    p: Option<usize>,
    dt: f64,
    t_end: f64,
) -> Result<InversionOperator> {
    if kernel.has_tail() {
        return Err(Error::Usage(
            "inversion needs a truncated kernel (finite b'(0+))".into(),
        ));
    }
    if !(dt > 0.0 && dt.is_finite()) || !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::Domain(format!("need dt > 0 and t_end > 0, got {dt}, {t_end}")));
    }
    let steps = (t_end / dt).round() as usize;
    if steps < 1 {
        return Err(Error::Usage(format!(
            "time grid with dt = {dt} and t_end = {t_end} has a single point"
        )));
    }
    let n = steps + 1;
    let p = p.unwrap_or_else(|| default_power(kernel, dt));
    if p < 2 {
        return Err(Error::Domain(format!("convolution power must be >= 2, got {p}")));
    }
    let b0 = kernel.a0();
    if !(b0 > 0.0) {
        return Err(Error::IllPosed(format!("b(0+) = {b0} is not positive")));
    }
    let atoms = kernel.atoms();
    let (rho_min, lambda) = kernel.rate_range();

    // exact samples of b and b'
    let (b, bp): (Vec<f64>, Vec<f64>) = (0..n).map(|k| kernel.value_and_slope(k as f64 * dt)).unzip();

    // B1 by iterated convolution
    let mut b1 = vec![0.0; n];
    let mut power = bp.clone();
    for k in 1..p {
        if k > 1 {
            power = convolve_samples(&power, &bp, dt);
        }
        let c = if k % 2 == 0 { 1.0 } else { -1.0 } / b0.powi(k as i32 + 1);
        for (o, v) in b1.iter_mut().zip(&power) {
            *o += c * v;
        }
    }

    // series coefficients of Q = B(y)^p / A(y)
    let j_terms = SUBTRACTED_ORDER.saturating_sub(p - 1).max(1);
    let mut a_ser = vec![0.0; j_terms];
    let mut b_ser = vec![0.0; j_terms];
    for a in atoms {
        let c = 1.0 - a.rate / lambda;
        let mut cm = 1.0;
        for m in 0..j_terms {
            a_ser[m] += a.weight * cm;
            b_ser[m] += a.weight * (a.rate / lambda) * cm;
            cm *= c;
        }
    }
    let mut num = vec![0.0; j_terms];
    num[0] = 1.0;
    for _ in 0..p {
        num = series_mul(&num, &b_ser);
    }
    let r = series_div(&num, &a_ser);

    // remainder by inverse FFT
    let period = t_end + (40.0 + 3.0 * p as f64) / rho_min;
    let fft_size = ((period / dt).ceil() as usize).next_power_of_two().max(2 * n.next_power_of_two());
    if fft_size > MAX_FFT_SIZE {
        return Err(Error::Accuracy {
            achieved: (MAX_FFT_SIZE as f64) * dt,
            requested: period,
            context: format!(
                "FFT period for smallest rate {rho_min:e} at dt = {dt:e} exceeds 2^24 samples"
            ),
        });
    }
    let d_omega = 2.0 * std::f64::consts::PI / (fft_size as f64 * dt);
    let half = fft_size / 2;
    let mut spectrum: Vec<Complex64> = (0..fft_size)
        .into_par_iter()
        .map(|k| {
            let omega = if k < half { k as f64 } else { k as f64 - fft_size as f64 } * d_omega;
            let y = Complex64::new(lambda, 0.0) / Complex64::new(lambda, omega);
            let mut a_y = Complex64::new(0.0, 0.0);
            let mut b_y = Complex64::new(0.0, 0.0);
            for a in atoms {
                let inv = Complex64::new(1.0, 0.0) / (Complex64::new(1.0, 0.0) - y * (1.0 - a.rate / lambda));
                a_y += a.weight * inv;
                b_y += a.weight * (a.rate / lambda) * inv;
            }
            let q = b_y.powu(p as u32) / a_y;
            let mut partial = Complex64::new(0.0, 0.0);
            let mut yj = Complex64::new(1.0, 0.0);
            for rj in &r {
                partial += rj * yj;
                yj *= y;
            }
            y.powu(p as u32 - 1) * (q - partial)
        })
        .collect();
    let min_scaled_fb = (0..fft_size)
        .into_par_iter()
        .map(|k| {
            let omega = if k < half { k as f64 } else { k as f64 - fft_size as f64 } * d_omega;
            fourier_exact(kernel, omega).norm() * (1.0 + omega.abs())
        })
        .reduce(|| f64::INFINITY, f64::min);
    if !(min_scaled_fb > 1e-12 * b0) {
        return Err(Error::IllPosed(format!(
            "|F b(omega)| (1 + |omega|) drops to {min_scaled_fb:e}"
        )));
    }
    FftPlanner::new().plan_fft_inverse(fft_size).process(&mut spectrum);
    let scale = 1.0 / (fft_size as f64 * dt);

    let ln_lambda = lambda.ln();
    let b2: Vec<f64> = (0..n)
        .map(|k| {
            let t = k as f64 * dt;
            let mut exact = 0.0;
            for (j, rj) in r.iter().enumerate() {
                exact += rj * gamma_density(p - 1 + j, lambda, ln_lambda, t);
            }
            lambda * (exact + spectrum[k].re * scale) / b0.powi(p as i32)
        })
        .collect();

    let l1 = |v: &[f64]| crate::numerics::trapezoid(&v.iter().map(|x| x.abs()).collect::<Vec<_>>(), dt);
    let b2_l1 = l1(&b2);
    let info = InversionInfo {
        b0,
        p,
        dt,
        samples: n,
        b1_l1: l1(&b1),
        b2_l1,
        ratio_l1: b0.powi(p as i32) * b2_l1,
        ratio_at_nyquist: power_tail_ratio(kernel, p, std::f64::consts::PI / dt),
        fft_size,
        period: fft_size as f64 * dt,
        subtracted_terms: r.len(),
        min_scaled_fb,
    };
    Ok(InversionOperator {
        b0,
        p,
        dt,
        b,
        b1,
        b2,
        fingerprint: kernel.fingerprint(),
        info,
    })
}

/// `lambda^m t^{m-1} e^{-lambda t} / (m-1)!`, inverse Laplace transform of
/// `(lambda / (lambda + s))^m`.
fn gamma_density(m: usize, lambda: f64, ln_lambda: f64, t: f64) -> f64 {
    if t == 0.0 {
        return if m == 1 { lambda } else { 0.0 };
    }
    let mf = m as f64;
    (mf * ln_lambda + (mf - 1.0) * t.ln() - lambda * t - ln_factorial(m - 1)).exp()
}

fn ln_factorial(k: usize) -> f64 {
    (2..=k).map(|i| (i as f64).ln()).sum()
}

fn series_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len();
    (0..n)
        .map(|k| (0..=k).map(|i| a[i] * b[k - i]).sum())
        .collect()
}

fn series_div(num: &[f64], den: &[f64]) -> Vec<f64> {
    let n = num.len();
    let mut q = vec![0.0; n];
    for k in 0..n {
        let s: f64 = (1..=k).map(|i| den[i] * q[k - i]).sum();
        q[k] = (num[k] - s) / den[0];
    }
    q
}

impl InversionOperator {
    pub fn b0(&self) -> f64 {
        self.b0
    }

    pub fn power(&self) -> usize {
        self.p
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.b1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.b1.is_empty()
    }

    pub fn b1(&self) -> &[f64] {
        &self.b1
    }

    pub fn b2(&self) -> &[f64] {
        &self.b2
    }

    /// Samples of the kernel `b` on the same grid.
    pub fn kernel_samples(&self) -> &[f64] {
        &self.b
    }

    pub fn kernel_fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn info(&self) -> &InversionInfo {
        &self.info
    }

    pub fn b1_signal(&self) -> TimeSignal {
        TimeSignal::from_parts(self.dt, self.b1.clone())
    }

    pub fn b2_signal(&self) -> TimeSignal {
        TimeSignal::from_parts(self.dt, self.b2.clone())
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,b1,b2")?;
        for (k, (x, y)) in self.b1.iter().zip(&self.b2).enumerate() {
            writeln!(out, "{:.16e},{x:.16e},{y:.16e}", k as f64 * self.dt)?;
        }
        Ok(())
    }
}

/// `(1 / 2 pi) int Re F a(tau) |F w~(tau)|^2 dtau` for the piecewise-linear
/// interpolant `w~` of the samples, zero outside `[0, t_end]`. The transform
/// of `w~` is exact; the `tau` integral uses 8-point Gauss-Legendre panels
/// out to `tau_max` plus the leading `1/tau^4` asymptotic tail.
pub fn parseval_qform(w: &TimeSignal, kernel: &RelaxationKernel) -> f64 {
    let dt = w.dt();
    let s = w.samples();
    let n = s.len();
    let t_end = (n - 1) as f64 * dt;
    if s.iter().all(|v| *v == 0.0) {
        return 0.0;
    }
    let slopes: Vec<f64> = s.windows(2).map(|p| (p[1] - p[0]) / dt).collect();
    let w_hat = |tau: f64| -> Complex64 {
        if tau == 0.0 {
            return Complex64::new(crate::numerics::trapezoid(s, dt), 0.0);
        }
        let step = Complex64::from_polar(1.0, -tau * dt);
        let mut z = Complex64::new(1.0, 0.0);
        let mut acc = Complex64::new(0.0, 0.0);
        for m in &slopes {
            acc += m * z;
            z *= step;
        }
        let i_tau = Complex64::new(0.0, tau);
        let seg = (Complex64::new(1.0, 0.0) - step) / i_tau;
        (s[0] - s[n - 1] * Complex64::from_polar(1.0, -tau * t_end) + seg * acc) / i_tau
    };
    let (rho_max, sum_w_rho) = {
        let (_, hi) = kernel.rate_range();
        (hi, -kernel.a0_derivative())
    };
    let panel = (1.0f64).min(std::f64::consts::FRAC_PI_2 / t_end.max(1e-300));
    let tau_max = (10.0 * rho_max).max(200.0 / t_end.max(1e-3)).min(0.25 * std::f64::consts::PI / dt);
    let panels = (tau_max / panel).ceil() as usize;
    let (x, wq) = gauss_legendre(8);
    let body: f64 = (0..panels)
        .into_par_iter()
        .map(|j| {
            let lo = j as f64 * panel;
            let mut acc = 0.0;
            for (xi, wi) in x.iter().zip(&wq) {
                let tau = lo + 0.5 * panel * (xi + 1.0);
                acc += wi * fourier_exact(kernel, tau).re * w_hat(tau).norm_sqr();
            }
            0.5 * panel * acc
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum();
    let tau_end = panels as f64 * panel;
    let tail = sum_w_rho * (s[0] * s[0] + s[n - 1] * s[n - 1]) / (3.0 * tau_end.powi(3));
    // the integrand is even in tau
    (2.0 * (body + tail)) / (2.0 * std::f64::consts::PI)
}

/// JSON-ready positivity summary written by the kernel check.
#[derive(Clone, Debug, Serialize)]
pub struct SpectralSummary {
    pub positivity: PositivityReport,
    pub inversion: Option<InversionInfo>,
}
