use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::{DampingFunction, RelaxationKernel};
use crate::numerics::{derivative, second_derivative, trapezoid_weight, KahanSum};
use crate::spectral::InversionOperator;
use crate::volterra::invert_with_derivative;

use super::memory::MemoryWeights;
use super::state::ShearState;

/// Nonlinear remainder `G(x, t)` and its time derivative on the nodes at one step.
#[derive(Clone, Debug, PartialEq)]
pub struct Remainder {
    pub step: usize,
    /// `G` (zero on boundary nodes)
    pub g: Vec<f64>,
    /// `G_t` (zero on boundary nodes)
    pub g_t: Vec<f64>,
}

/// Nodal histories shared by the remainder and the reconstruction.
pub(crate) struct NodalHistory {
    /// `[step][node]`: `u_x` by central differences
    pub strain: Vec<Vec<f64>>,
    /// `[step][node]`: `v_x`
    pub gradient: Vec<Vec<f64>>,
    /// `[step][node]`: `v_xx`
    pub curvature: Vec<Vec<f64>>,
}

impl NodalHistory {
    pub fn new(state: &ShearState, last: usize) -> Self {
        let steps: Vec<usize> = (0..=last).collect();
        Self {
            strain: steps.par_iter().map(|&k| state.nodal_strain(k)).collect(),
            gradient: steps.par_iter().map(|&k| state.velocity_gradient(k)).collect(),
            curvature: steps.par_iter().map(|&k| state.velocity_curvature(k)).collect(),
        }
    }
}

fn check_weights(state: &ShearState, weights: &MemoryWeights, k: usize) -> Result<()> {
    if (weights.dt() - state.dt()).abs() > 1e-12 * state.dt() || weights.steps() < k {
        return Err(Error::Usage("memory weights do not cover this history".into()));
    }
    if k > state.step() {
        return Err(Error::Usage(format!("step {k} is beyond the stored history")));
    }
    Ok(())
}

/// `G` and `G_t` at one node and step:
///
/// `G = int_0^t v_xx(s) int_{t-s}^inf a'(tau) [g'(vbar_x(tau)) - g'(0)] dtau ds`,
/// `G_t = v_xx(t) H(0) - int_0^t v_xx(s) a'(t-s) D(t-s) ds
///        + int_0^t v_xx(s) int_{t-s}^inf a'(tau) g''(vbar_x(tau)) [v_x(t) - v_x(t-tau)] dtau ds`,
/// with `vbar_x(tau) = u_x(t) - u_x(t - tau)`, equal to `u_x(t)` for `tau >= t`.
fn remainder_at_node(
    hist: &NodalHistory,
    weights: &MemoryWeights,
    damping: &DampingFunction,
    k: usize,
    i: usize,
) -> (f64, f64) {
    let h = weights.dt();
    let s0 = damping.slope_at_zero();
    let uk = hist.strain[k][i];
    let vk = hist.gradient[k][i];
    // D_m, E_m for tau = m h, m = 0..=k
    let mut d = vec![0.0; k + 1];
    let mut e = vec![0.0; k + 1];
    for m in 1..=k {
        let y = uk - hist.strain[k - m][i];
        d[m] = damping.d1(y) - s0;
        e[m] = damping.d2(y) * (vk - hist.gradient[k - m][i]);
    }
    let ak = weights.a(k);
    let d_inf = damping.d1(uk) - s0;
    let e_inf = damping.d2(uk) * vk;
    // H_j, J_j: inner integrals from tau = (k - j) h to infinity, built from j = 0 upward
    let mut hj = -ak * d_inf;
    let mut jj = -ak * e_inf;
    let mut g = KahanSum::default();
    let mut t2 = KahanSum::default();
    let mut t3 = KahanSum::default();
    for j in 0..=k {
        if j > 0 {
            let m = k - j;
            hj += weights.alpha(m) * d[m] + weights.beta(m) * d[m + 1];
            jj += weights.alpha(m) * e[m] + weights.beta(m) * e[m + 1];
        }
        let w = trapezoid_weight(j, k + 1, h) * hist.curvature[j][i];
        g.add(w * hj);
        t2.add(-w * weights.a_prime(k - j) * d[k - j]);
        t3.add(w * jj);
    }
    let t1 = hist.curvature[k][i] * hj;
    (g.value(), t1 + t2.value() + t3.value())
}

pub(crate) fn remainder_with(
    hist: &NodalHistory,
    weights: &MemoryWeights,
    damping: &DampingFunction,
    k: usize,
    nodes: usize,
) -> Remainder {
    if damping.is_linear() {
        return Remainder {
            step: k,
            g: vec![0.0; nodes],
            g_t: vec![0.0; nodes],
        };
    }
    let vals: Vec<(f64, f64)> = (0..nodes)
        .into_par_iter()
        .map(|i| {
            if i == 0 || i == nodes - 1 {
                (0.0, 0.0)
            } else {
                remainder_at_node(hist, weights, damping, k, i)
            }
        })
        .collect();
    Remainder {
        step: k,
        g: vals.iter().map(|v| v.0).collect(),
        g_t: vals.iter().map(|v| v.1).collect(),
    }
}

/// `G` and `G_t` at step `k` of a stored history. Zero for linear damping.
pub fn remainder(state: &ShearState, weights: &MemoryWeights, damping: &DampingFunction, k: usize) -> Result<Remainder> {
    check_weights(state, weights, k)?;
    let hist = NodalHistory::new(state, k);
    Ok(remainder_with(&hist, weights, damping, k, state.grid().nodes()))
}

/// `G` at step `k`.
pub fn remainder_g(state: &ShearState, weights: &MemoryWeights, damping: &DampingFunction, k: usize) -> Result<Vec<f64>> {
    Ok(remainder(state, weights, damping, k)?.g)
}

/// `G_t` at step `k`.
pub fn remainder_g_t(state: &ShearState, weights: &MemoryWeights, damping: &DampingFunction, k: usize) -> Result<Vec<f64>> {
    Ok(remainder(state, weights, damping, k)?.g_t)
}

/// A field rebuilt from the inversion identities next to its finite-difference
/// counterpart, both `[step][node]` with zero boundary rows.
#[derive(Clone, Debug)]
pub struct Reconstruction {
    pub reconstructed: Vec<Vec<f64>>,
    pub finite_difference: Vec<Vec<f64>>,
    /// `||reconstructed - fd|| / ||fd||` over interior nodes and all steps
    pub relative_l2: f64,
}

fn space_time_relative_l2(a: &[Vec<f64>], b: &[Vec<f64>], dx: f64, dt: f64) -> f64 {
    let rows = a.len();
    let (mut num, mut den) = (KahanSum::default(), KahanSum::default());
    for j in 0..rows {
        let w = trapezoid_weight(j, rows, dt) * dx;
        let n = a[j].len();
        for i in 1..n - 1 {
            num.add(w * (a[j][i] - b[j][i]).powi(2));
            den.add(w * b[j][i].powi(2));
        }
    }
    if den.value() > 0.0 {
        (num.value() / den.value()).sqrt()
    } else {
        num.value().sqrt()
    }
}

struct Ingredients {
    /// `[node][step]`
    f: Vec<Vec<f64>>,
    f_t: Vec<Vec<f64>>,
    v_t: Vec<Vec<f64>>,
    v_tt: Vec<Vec<f64>>,
    g: Vec<Vec<f64>>,
    g_t: Vec<Vec<f64>>,
}

#[allow(clippy::needless_range_loop)]
fn ingredients(
    state: &ShearState,
    op: &InversionOperator,
    kernel: &RelaxationKernel,
    damping: &DampingFunction,
) -> Result<Ingredients> {
    if op.kernel_fingerprint() != kernel.fingerprint() {
        return Err(Error::Usage("inversion operator was built for a different kernel".into()));
    }
    let dt = state.dt();
    if (op.dt() - dt).abs() > 1e-12 * dt {
        return Err(Error::Usage(format!("inversion operator has dt = {}, history has dt = {dt}", op.dt())));
    }
    let last = state.step();
    if op.len() < last + 1 {
        return Err(Error::Usage(format!(
            "inversion operator covers {} samples, history has {}",
            op.len(),
            last + 1
        )));
    }
    if last < 3 {
        return Err(Error::Usage("reconstruction needs at least four stored steps".into()));
    }
    let n = state.grid().nodes();
    let weights = MemoryWeights::new(kernel, dt, last);
    let (g, g_t) = if damping.is_linear() {
        (vec![vec![0.0; last + 1]; n], vec![vec![0.0; last + 1]; n])
    } else {
        let hist = NodalHistory::new(state, last);
        let rows: Vec<Remainder> = (0..=last)
            .map(|k| remainder_with(&hist, &weights, damping, k, n))
            .collect();
        (
            (0..n).map(|i| rows.iter().map(|r| r.g[i]).collect()).collect(),
            (0..n).map(|i| rows.iter().map(|r| r.g_t[i]).collect()).collect(),
        )
    };
    let v0_curv = state.velocity_curvature(0);
    let c0 = damping.slope_at_zero() * kernel.a0();
    let mut out = Ingredients {
        f: Vec::with_capacity(n),
        f_t: Vec::with_capacity(n),
        v_t: Vec::with_capacity(n),
        v_tt: Vec::with_capacity(n),
        g,
        g_t,
    };
    for i in 0..n {
        let f = state.node_forcing(i);
        let v = state.node_velocity(i);
        let f_t = derivative(&f, dt);
        let mut v_t = derivative(&v, dt);
        let mut v_tt = second_derivative(&v, dt);
        // start-up values from the equation itself: v_t = f, v_tt = -g'(0) a(0) v0'' + f_t
        v_t[0] = f[0];
        v_tt[0] = -c0 * v0_curv[i] + f_t[0];
        out.f.push(f);
        out.f_t.push(f_t);
        out.v_t.push(v_t);
        out.v_tt.push(v_tt);
    }
    Ok(out)
}

fn rows_from_columns(cols: &[Vec<f64>], steps: usize) -> Vec<Vec<f64>> {
    let n = cols.len();
    let mut rows = vec![vec![0.0; n]; steps];
    for (i, col) in cols.iter().enumerate() {
        if i == 0 || i == n - 1 {
            continue;
        }
        for (j, v) in col.iter().enumerate() {
            rows[j][i] = *v;
        }
    }
    rows
}

/// Rebuild `v_xx` from the velocity history through
/// `v_xx = [ (f_t + G_t - v_tt)/a(0) + A1 * (f_t + G_t - v_tt) + A2 * (f + G - v_t) ] / g'(0)`
/// with `A1 = B1`, `A2 = B2` of the kernel's inversion operator.
pub fn reconstruct_vxx(
    state: &ShearState,
    op: &InversionOperator,
    kernel: &RelaxationKernel,
    damping: &DampingFunction,
) -> Result<Reconstruction> {
    let ing = ingredients(state, op, kernel, damping)?;
    let s0 = damping.slope_at_zero();
    let n = state.grid().nodes();
    let steps = state.step() + 1;
    let dt = state.dt();
    let cols: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            if i == 0 || i == n - 1 {
                return Ok(vec![0.0; steps]);
            }
            let l: Vec<f64> = (0..steps).map(|j| (ing.f[i][j] + ing.g[i][j] - ing.v_t[i][j]) / s0).collect();
            let lp: Vec<f64> = (0..steps).map(|j| (ing.f_t[i][j] + ing.g_t[i][j] - ing.v_tt[i][j]) / s0).collect();
            invert_with_derivative(op, &l, &lp, dt)
        })
        .collect::<Result<_>>()?;
    let reconstructed = rows_from_columns(&cols, steps);
    let finite_difference: Vec<Vec<f64>> = (0..steps)
        .map(|k| {
            let mut r = state.velocity_curvature(k);
            r[0] = 0.0;
            r[n - 1] = 0.0;
            r
        })
        .collect();
    let relative_l2 = space_time_relative_l2(&reconstructed, &finite_difference, state.grid().dx(), dt);
    Ok(Reconstruction {
        reconstructed,
        finite_difference,
        relative_l2,
    })
}

fn cumulative_trapezoid(samples: &[f64], h: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(samples.len());
    let mut acc = KahanSum::default();
    out.push(0.0);
    for w in samples.windows(2) {
        acc.add(0.5 * h * (w[0] + w[1]));
        out.push(acc.value());
    }
    out
}

/// Rebuild `u_xx` through
/// `u_xx = [ (f + G - v_t)/a(0) + A1 * (f + G - v_t) + A2 * (int f + int G - v + v0) ] / g'(0)`.
pub fn reconstruct_uxx(
    state: &ShearState,
    op: &InversionOperator,
    kernel: &RelaxationKernel,
    damping: &DampingFunction,
) -> Result<Reconstruction> {
    let ing = ingredients(state, op, kernel, damping)?;
    let s0 = damping.slope_at_zero();
    let n = state.grid().nodes();
    let steps = state.step() + 1;
    let dt = state.dt();
    let cols: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            if i == 0 || i == n - 1 {
                return Ok(vec![0.0; steps]);
            }
            let v = state.node_velocity(i);
            let int_f = cumulative_trapezoid(&ing.f[i], dt);
            let int_g = cumulative_trapezoid(&ing.g[i], dt);
            let l: Vec<f64> = (0..steps).map(|j| (int_f[j] + int_g[j] - v[j] + v[0]) / s0).collect();
            let lp: Vec<f64> = (0..steps).map(|j| (ing.f[i][j] + ing.g[i][j] - ing.v_t[i][j]) / s0).collect();
            invert_with_derivative(op, &l, &lp, dt)
        })
        .collect::<Result<_>>()?;
    let reconstructed = rows_from_columns(&cols, steps);
    let finite_difference: Vec<Vec<f64>> = (0..steps)
        .map(|k| {
            let mut r = second_derivative(state.displacement(k), state.grid().dx());
            r[0] = 0.0;
            r[n - 1] = 0.0;
            r
        })
        .collect();
    let relative_l2 = space_time_relative_l2(&reconstructed, &finite_difference, state.grid().dx(), dt);
    Ok(Reconstruction {
        reconstructed,
        finite_difference,
        relative_l2,
    })
}

/// Time integral of a `[step][node]` field by the same trapezoid that builds `u` from `v`.
pub fn integrate_in_time(field: &[Vec<f64>], dt: f64) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(field.len());
    let n = field.first().map_or(0, Vec::len);
    out.push(vec![0.0; n]);
    for k in 1..field.len() {
        let prev = &out[k - 1];
        let row = (0..n).map(|i| prev[i] + 0.5 * dt * (field[k - 1][i] + field[k][i])).collect();
        out.push(row);
    }
    out
}

/// Relative L2 distance between two `[step][node]` fields over interior nodes.
pub fn field_relative_l2(a: &[Vec<f64>], b: &[Vec<f64>], dx: f64, dt: f64) -> f64 {
    space_time_relative_l2(a, b, dx, dt)
}
