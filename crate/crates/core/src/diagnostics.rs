//! Energy functionals, the data measures of `f` and `v0`, and the
//! smallness, hyperbolicity and remainder-bound predicates built on them.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::{r0, DampingFunction, RelaxationKernel};
use crate::numerics::{derivative, second_derivative, third_derivative, trapezoid, trapezoid_weight, KahanSum};
use crate::solver::{remainder, MemoryWeights, ShearState, SpatialGrid};

/// Explicit one-dimensional Sobolev constant `sqrt(max(2, 2/L) + 1)`.
pub fn sobolev_constant(length: f64) -> f64 {
    ((2.0f64).max(2.0 / length) + 1.0).sqrt()
}

/// Per-step time derivatives of a `[step][node]` history by centred
/// differences (second-order one-sided at the first and last step).
fn time_derivatives(rows: &[Vec<f64>], dt: f64) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let steps = rows.len();
    let n = rows.first().map_or(0, Vec::len);
    let cols: Vec<(Vec<f64>, Vec<f64>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let series: Vec<f64> = rows.iter().map(|r| r[i]).collect();
            (derivative(&series, dt), second_derivative(&series, dt))
        })
        .collect();
    let mut d1 = vec![vec![0.0; n]; steps];
    let mut d2 = vec![vec![0.0; n]; steps];
    for (i, (a, b)) in cols.iter().enumerate() {
        for j in 0..steps {
            d1[j][i] = a[j];
            d2[j][i] = b[j];
        }
    }
    (d1, d2)
}

fn sq_integral(values: &[f64], dx: f64) -> f64 {
    let sq: Vec<f64> = values.iter().map(|v| v * v).collect();
    trapezoid(&sq, dx)
}

/// Spatial integrals of the squared fields entering the energy at one step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct EnergyDensities {
    pub v: f64,
    pub v_x: f64,
    pub v_t: f64,
    pub v_xx: f64,
    pub v_xt: f64,
    pub v_tt: f64,
    pub u: f64,
    pub u_x: f64,
    pub u_xx: f64,
    pub u_xxx: f64,
}

impl EnergyDensities {
    /// Integrand of the running supremum in the full energy.
    pub fn sup_part(&self) -> f64 {
        self.v + self.v_x + self.v_t + self.v_xx + self.v_xt + self.v_tt + self.u + self.u_x + self.u_xx + self.u_xxx
    }

    /// Integrand of the time integral in the full energy.
    pub fn integral_part(&self) -> f64 {
        self.v + self.v_x + self.v_t + self.v_xx + self.v_xt + self.v_tt
    }

    pub fn sup_part_first(&self) -> f64 {
        self.v + self.v_x + self.v_t + self.v_xt + self.v_tt
    }

    pub fn integral_part_first(&self) -> f64 {
        self.v + self.v_x + self.v_t + self.v_xt
    }
}

/// Energy functionals and related sup-norms at every stored step.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnergySeries {
    pub times: Vec<f64>,
    pub densities: Vec<EnergyDensities>,
    /// running sup of the full integrand plus its running time integral
    pub energy: Vec<f64>,
    /// the same for the first-order part
    pub energy_first: Vec<f64>,
    pub nu: Vec<f64>,
    /// `sup_x |u_x(x, t)|` over nodes and cells
    pub sup_strain: Vec<f64>,
}

/// Minimum history length (in stored steps) for the energy.
pub const MIN_ENERGY_STEPS: usize = 3;

/// `E(t)`, `E_1(t)`, `nu(t)` and `sup |u_x|` at every stored step. Sups run
/// over the stored steps up to and including `t`.
pub fn energy(state: &ShearState) -> Result<EnergySeries> {
    let steps = state.step() + 1;
    if steps < MIN_ENERGY_STEPS {
        return Err(Error::Usage(format!(
            "energy needs at least {MIN_ENERGY_STEPS} stored steps, history has {steps}"
        )));
    }
    let dx = state.grid().dx();
    let dt = state.dt();
    let (v_t, v_tt) = time_derivatives(state.velocities(), dt);
    let per_step: Vec<(EnergyDensities, f64, f64, f64)> = (0..steps)
        .into_par_iter()
        .map(|k| {
            let v = state.velocity(k);
            let u = state.displacement(k);
            let vx = derivative(v, dx);
            let vxx = second_derivative(v, dx);
            let vxt = derivative(&v_t[k], dx);
            let ux = derivative(u, dx);
            let uxx = second_derivative(u, dx);
            let uxxx = third_derivative(u, dx);
            let d = EnergyDensities {
                v: sq_integral(v, dx),
                v_x: sq_integral(&vx, dx),
                v_t: sq_integral(&v_t[k], dx),
                v_xx: sq_integral(&vxx, dx),
                v_xt: sq_integral(&vxt, dx),
                v_tt: sq_integral(&v_tt[k], dx),
                u: sq_integral(u, dx),
                u_x: sq_integral(&ux, dx),
                u_xx: sq_integral(&uxx, dx),
                u_xxx: sq_integral(&uxxx, dx),
            };
            let pointwise = (0..v.len())
                .map(|i| (v[i] * v[i] + vx[i] * vx[i] + v_t[k][i] * v_t[k][i]).sqrt())
                .fold(0.0, f64::max);
            let sup_vx2 = vx.iter().fold(0.0f64, |m, x| m.max(x * x));
            let cell_max = state.strain_field(k).iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let node_max = ux.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            (d, pointwise, sup_vx2, cell_max.max(node_max))
        })
        .collect();
    let mut out = EnergySeries {
        times: (0..steps).map(|k| k as f64 * dt).collect(),
        densities: Vec::with_capacity(steps),
        energy: Vec::with_capacity(steps),
        energy_first: Vec::with_capacity(steps),
        nu: Vec::with_capacity(steps),
        sup_strain: Vec::with_capacity(steps),
    };
    let (mut sup_full, mut sup_first, mut sup_point) = (0.0f64, 0.0f64, 0.0f64);
    let (mut int_full, mut int_first, mut int_vx) = (KahanSum::default(), KahanSum::default(), KahanSum::default());
    for k in 0..steps {
        let (d, point, vx2, strain) = per_step[k];
        sup_full = sup_full.max(d.sup_part());
        sup_first = sup_first.max(d.sup_part_first());
        sup_point = sup_point.max(point);
        if k > 0 {
            let (p, _, pvx2, _) = per_step[k - 1];
            int_full.add(0.5 * dt * (p.integral_part() + d.integral_part()));
            int_first.add(0.5 * dt * (p.integral_part_first() + d.integral_part_first()));
            int_vx.add(0.5 * dt * (pvx2 + vx2));
        }
        out.densities.push(d);
        out.energy.push(sup_full + int_full.value());
        out.energy_first.push(sup_first + int_first.value());
        out.nu.push(sup_point + int_vx.value().max(0.0).sqrt());
        out.sup_strain.push(strain);
    }
    Ok(out)
}

/// `nu(t)` at every stored step.
pub fn nu(state: &ShearState) -> Result<Vec<f64>> {
    Ok(energy(state)?.nu)
}

/// Discrete measures of the data over the simulated horizon.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DataMeasures {
    /// `F(f)`: sup of `int f^2 + f_x^2 + f_t^2 + (int_0^t f)^2 + (int_0^t f_x)^2`
    /// plus the space-time integral of `f^2 + f_x^2 + f_t^2 + f_tt^2`
    pub f_measure: f64,
    /// `V0 = ||v0||_{H^2}^2`
    pub v0_measure: f64,
}

/// `V0 = int v0^2 + v0'^2 + v0''^2` by difference quotients.
pub fn v0_measure(grid: &SpatialGrid, v0: &[f64]) -> f64 {
    let dx = grid.dx();
    sq_integral(v0, dx) + sq_integral(&derivative(v0, dx), dx) + sq_integral(&second_derivative(v0, dx), dx)
}

/// `F(f)` from forcing samples `[step][node]` on a uniform grid.
pub fn f_measure(grid: &SpatialGrid, dt: f64, f: &[Vec<f64>]) -> f64 {
    let steps = f.len();
    if steps == 0 {
        return 0.0;
    }
    let dx = grid.dx();
    let n = grid.nodes();
    let (f_t, f_tt) = if steps >= 2 {
        time_derivatives(f, dt)
    } else {
        (vec![vec![0.0; n]; steps], vec![vec![0.0; n]; steps])
    };
    let mut running: Vec<KahanSum> = vec![KahanSum::default(); n];
    let mut sup = 0.0f64;
    let mut integral = KahanSum::default();
    for k in 0..steps {
        if k > 0 {
            for (i, acc) in running.iter_mut().enumerate() {
                acc.add(0.5 * dt * (f[k - 1][i] + f[k][i]));
            }
        }
        let prim: Vec<f64> = running.iter().map(KahanSum::value).collect();
        let fx = derivative(&f[k], dx);
        let head = sq_integral(&f[k], dx)
            + sq_integral(&fx, dx)
            + sq_integral(&f_t[k], dx)
            + sq_integral(&prim, dx)
            + sq_integral(&derivative(&prim, dx), dx);
        sup = sup.max(head);
        let body = sq_integral(&f[k], dx) + sq_integral(&fx, dx) + sq_integral(&f_t[k], dx) + sq_integral(&f_tt[k], dx);
        integral.add(trapezoid_weight(k, steps, dt) * body);
    }
    sup + integral.value()
}

/// Both data measures for a stored run.
pub fn data_measures(state: &ShearState) -> DataMeasures {
    DataMeasures {
        f_measure: f_measure(state.grid(), state.dt(), state.forcings()),
        v0_measure: v0_measure(state.grid(), state.velocity(0)),
    }
}

/// `E(0)` from the data alone. With `u(., 0) = 0` and `sigma(., 0) = 0` the
/// equation gives `v_t(0) = f(0)` and `v_tt(0) = -g'(0) a(0) v0'' + f_t(0)`.
pub fn initial_energy(grid: &SpatialGrid, v0: &[f64], f0: &[f64], f_t0: &[f64], a0: f64, slope_at_zero: f64) -> f64 {
    let dx = grid.dx();
    let v0xx = second_derivative(v0, dx);
    let v_tt: Vec<f64> = v0xx.iter().zip(f_t0).map(|(c, ft)| -slope_at_zero * a0 * c + ft).collect();
    let d = EnergyDensities {
        v: sq_integral(v0, dx),
        v_x: sq_integral(&derivative(v0, dx), dx),
        v_t: sq_integral(f0, dx),
        v_xx: sq_integral(&v0xx, dx),
        v_xt: sq_integral(&derivative(f0, dx), dx),
        v_tt: sq_integral(&v_tt, dx),
        ..EnergyDensities::default()
    };
    d.sup_part()
}

/// The initial-energy inequality on its own.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InitialCertificate {
    pub energy_at_zero: f64,
    /// `"history"` (difference quotients over the stored steps) or `"data"`
    pub source: &'static str,
    pub f_measure: f64,
    pub v0_measure: f64,
    pub e0_bound: f64,
    pub e0_bound_ok: bool,
}

/// Initial-energy inequality for a run of any length. Histories too short
/// for time differences fall back to `initial_energy`.
pub fn initial_certificate(state: &ShearState, kernel: &RelaxationKernel, damping: &DampingFunction) -> Result<InitialCertificate> {
    let data = data_measures(state);
    let (energy_at_zero, source) = if state.step() + 1 >= MIN_ENERGY_STEPS {
        (energy(state)?.energy[0], "history")
    } else {
        let n = state.grid().nodes();
        let f_t0: Vec<f64> = (0..n)
            .map(|i| derivative(&state.node_forcing(i), state.dt())[0])
            .collect();
        let e = initial_energy(
            state.grid(),
            state.velocity(0),
            state.forcing(0),
            &f_t0,
            kernel.a0(),
            damping.slope_at_zero(),
        );
        (e, "data")
    };
    let bound = e0_bound(kernel.a0(), damping.slope_at_zero(), data.f_measure, data.v0_measure);
    Ok(InitialCertificate {
        energy_at_zero,
        source,
        f_measure: data.f_measure,
        v0_measure: data.v0_measure,
        e0_bound: bound,
        e0_bound_ok: energy_at_zero <= bound + E0_SLACK * bound.max(1.0),
    })
}

/// Certificate flags at one output time.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Certificates {
    /// `E(t) <= theta^2 / (4 C^2)`
    pub smallness_ok: bool,
    /// `sup |u_x| <= theta / 2`
    pub hyperbolicity_ok: bool,
    /// `E(0) <= 2 [1 + a(0)^2 g'(0)^2] (F + V0)`
    pub e0_bound_ok: bool,
    /// `nu(t) <= C sqrt(E(t))`
    pub nu_bound_ok: bool,
    /// `sup |u_x| <= C sqrt(E(t))`
    pub strain_bound_ok: bool,
    /// smallness at every step so far implies the hyperbolicity flag now
    pub implication_ok: bool,
}

/// One row of the energy report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnergyRow {
    pub step: usize,
    pub t: f64,
    pub energy: f64,
    pub energy_first: f64,
    pub nu: f64,
    pub sup_strain: f64,
    pub flags: Certificates,
}

/// Energy diagnostics at the output steps of a run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnergyReport {
    pub rows: Vec<EnergyRow>,
    pub f_measure: f64,
    pub v0_measure: f64,
    pub c_omega: f64,
    pub theta: f64,
    pub a0: f64,
    pub slope_at_zero: f64,
    pub energy_at_zero: f64,
    pub e0_bound: f64,
}

/// Relative slack allowed in the initial-energy inequality.
pub const E0_SLACK: f64 = 1e-6;

/// Quantities the certificates are evaluated on.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CertificateInputs {
    pub energy: f64,
    pub energy_at_zero: f64,
    pub nu: f64,
    pub sup_strain: f64,
    pub f_measure: f64,
    pub v0_measure: f64,
    pub c_omega: f64,
    /// smallness held at every earlier output step
    pub small_so_far: bool,
}

/// Evaluate the certificate predicates.
pub fn check_certificates(q: &CertificateInputs, theta: f64, a0: f64, slope_at_zero: f64) -> Certificates {
    let c2 = q.c_omega * q.c_omega;
    let root = q.energy.max(0.0).sqrt();
    let smallness_ok = q.energy <= theta * theta / (4.0 * c2);
    let hyperbolicity_ok = q.sup_strain <= 0.5 * theta;
    let bound = e0_bound(a0, slope_at_zero, q.f_measure, q.v0_measure);
    Certificates {
        smallness_ok,
        hyperbolicity_ok,
        e0_bound_ok: q.energy_at_zero <= bound + E0_SLACK * bound.max(1.0),
        nu_bound_ok: q.nu <= q.c_omega * root,
        strain_bound_ok: q.sup_strain <= q.c_omega * root,
        implication_ok: !(q.small_so_far && smallness_ok) || hyperbolicity_ok,
    }
}

/// `2 [1 + a(0)^2 g'(0)^2] (F + V0)`.
pub fn e0_bound(a0: f64, slope_at_zero: f64, f_measure: f64, v0_measure: f64) -> f64 {
    2.0 * (1.0 + a0 * a0 * slope_at_zero * slope_at_zero) * (f_measure + v0_measure)
}

/// Energy report at the given output steps (each `<= state.step()`).
pub fn energy_report(
    state: &ShearState,
    kernel: &RelaxationKernel,
    damping: &DampingFunction,
    c_omega: f64,
    output_steps: &[usize],
) -> Result<EnergyReport> {
    let series = energy(state)?;
    let data = data_measures(state);
    let theta = damping.theta();
    let a0 = kernel.a0();
    let s0 = damping.slope_at_zero();
    let e_zero = series.energy[0];
    let mut rows = Vec::with_capacity(output_steps.len());
    let mut small_so_far = true;
    let mut last = None;
    for &k in output_steps {
        if k > state.step() || last.is_some_and(|l| k <= l) {
            return Err(Error::Usage(format!("output step {k} out of order or beyond the history")));
        }
        last = Some(k);
        let inputs = CertificateInputs {
            energy: series.energy[k],
            energy_at_zero: e_zero,
            nu: series.nu[k],
            sup_strain: series.sup_strain[k],
            f_measure: data.f_measure,
            v0_measure: data.v0_measure,
            c_omega,
            small_so_far,
        };
        let flags = check_certificates(&inputs, theta, a0, s0);
        small_so_far &= flags.smallness_ok;
        rows.push(EnergyRow {
            step: k,
            t: series.times[k],
            energy: series.energy[k],
            energy_first: series.energy_first[k],
            nu: series.nu[k],
            sup_strain: series.sup_strain[k],
            flags,
        });
    }
    Ok(EnergyReport {
        rows,
        f_measure: data.f_measure,
        v0_measure: data.v0_measure,
        c_omega,
        theta,
        a0,
        slope_at_zero: s0,
        energy_at_zero: e_zero,
        e0_bound: e0_bound(a0, s0, data.f_measure, data.v0_measure),
    })
}

impl EnergyReport {
    /// `E` never decreases across the reported rows.
    pub fn energy_monotone(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].energy >= w[0].energy)
    }

    pub fn all(&self, pick: impl Fn(&Certificates) -> bool) -> bool {
        self.rows.iter().all(|r| pick(&r.flags))
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "step,t,energy,energy_first,nu,sup_strain,smallness_ok,hyperbolicity_ok,e0_bound_ok,nu_bound_ok,strain_bound_ok,implication_ok"
        )?;
        for r in &self.rows {
            let f = r.flags;
            writeln!(
                out,
                "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{},{},{},{},{}",
                r.step,
                r.t,
                r.energy,
                r.energy_first,
                r.nu,
                r.sup_strain,
                f.smallness_ok,
                f.hyperbolicity_ok,
                f.e0_bound_ok,
                f.nu_bound_ok,
                f.strain_bound_ok,
                f.implication_ok
            )?;
        }
        Ok(())
    }
}

/// Worst ratios `lhs / rhs` of the remainder bounds at one step; a bound
/// holds when its ratio is at most one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LemmaCheck {
    pub step: usize,
    pub t: f64,
    pub nu: f64,
    /// `|g(vbar_x) - g(0)| <= K min(nu r0(s), theta)`
    pub ratio_g0: f64,
    /// `|g'(vbar_x) - g'(0)| <= K min(nu r0(s), theta)`
    pub ratio_g1: f64,
    /// `|G| <= K nu (|v_xx| * psi)`
    pub ratio_g: f64,
    /// `|G_t| <= K nu abar |v_xx| + K nu (|v_xx| * psi)`
    pub ratio_g_t: f64,
}

/// Relative rounding slack applied to every remainder bound.
pub const LEMMA_SLACK: f64 = 1e-9;

impl LemmaCheck {
    pub fn holds(&self) -> bool {
        let lim = 1.0 + LEMMA_SLACK;
        self.ratio_g0 <= lim && self.ratio_g1 <= lim && self.ratio_g <= lim && self.ratio_g_t <= lim
    }
}

fn ratio(lhs: f64, rhs: f64) -> f64 {
    let lhs = lhs.abs();
    if lhs <= f64::MIN_POSITIVE {
        0.0
    } else if rhs <= 0.0 {
        f64::INFINITY
    } else {
        lhs / rhs
    }
}

/// Evaluate the pointwise remainder bounds at the given steps, with `nu`
/// taken from `energy` and `K` the damping function's lemma constant.
pub fn lemma_checks(
    state: &ShearState,
    kernel: &RelaxationKernel,
    damping: &DampingFunction,
    steps: &[usize],
) -> Result<Vec<LemmaCheck>> {
    if kernel.has_tail() {
        return Err(Error::Usage("remainder bounds need a truncated kernel".into()));
    }
    let series = energy(state)?;
    let last = state.step();
    let dt = state.dt();
    let weights = MemoryWeights::new(kernel, dt, last);
    let psi: Vec<f64> = (0..=last).map(|m| kernel.psi(m as f64 * dt)).collect::<Result<_>>()?;
    let abar = kernel.abar();
    let kc = damping.lemma_constant();
    let theta = damping.theta();
    let n = state.grid().nodes();
    let curvature: Vec<Vec<f64>> = (0..=last).into_par_iter().map(|k| state.velocity_curvature(k)).collect();
    let strain: Vec<Vec<f64>> = (0..=last).into_par_iter().map(|k| state.nodal_strain(k)).collect();
    let g0 = damping.g(0.0);
    let s0 = damping.slope_at_zero();
    steps
        .iter()
        .map(|&k| {
            if k > last {
                return Err(Error::Usage(format!("step {k} is beyond the stored history")));
            }
            let nu = series.nu[k];
            let rem = remainder(state, &weights, damping, k)?;
            let per_node: Vec<(f64, f64, f64, f64)> = (1..n - 1)
                .into_par_iter()
                .map(|i| {
                    let mut conv = KahanSum::default();
                    for j in 0..=k {
                        conv.add(trapezoid_weight(j, k + 1, dt) * curvature[j][i].abs() * psi[k - j]);
                    }
                    let conv = conv.value();
                    let rg = ratio(rem.g[i], kc * nu * conv);
                    let rgt = ratio(rem.g_t[i], kc * nu * abar * curvature[k][i].abs() + kc * nu * conv);
                    let (mut r0m, mut r1m) = (0.0f64, 0.0f64);
                    for m in 0..=k {
                        let y = strain[k][i] - strain[k - m][i];
                        let bound = kc * (nu * r0(m as f64 * dt)).min(theta);
                        r0m = r0m.max(ratio(damping.g(y) - g0, bound));
                        r1m = r1m.max(ratio(damping.d1(y) - s0, bound));
                    }
                    (r0m, r1m, rg, rgt)
                })
                .collect();
            let fold = |sel: fn(&(f64, f64, f64, f64)) -> f64| per_node.iter().map(sel).fold(0.0, f64::max);
            Ok(LemmaCheck {
                step: k,
                t: k as f64 * dt,
                nu,
                ratio_g0: fold(|r| r.0),
                ratio_g1: fold(|r| r.1),
                ratio_g: fold(|r| r.2),
                ratio_g_t: fold(|r| r.3),
            })
        })
        .collect()
}

/// Write lemma ratios as CSV.
pub fn write_lemma_csv<W: Write>(checks: &[LemmaCheck], mut out: W) -> Result<()> {
    writeln!(out, "step,t,nu,ratio_g0,ratio_g1,ratio_g,ratio_g_t,holds")?;
    for c in checks {
        writeln!(
            out,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
            c.step,
            c.t,
            c.nu,
            c.ratio_g0,
            c.ratio_g1,
            c.ratio_g,
            c.ratio_g_t,
            c.holds()
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn manufactured(n: usize, dt: f64, steps: usize) -> ShearState {
        let grid = SpatialGrid::new(1.0, n).unwrap();
        let nodes = grid.nodes();
        let v: Vec<Vec<f64>> = (0..=steps)
            .map(|j| {
                let t = j as f64 * dt;
                let mut row: Vec<f64> = grid.positions().iter().map(|x| (PI * x).sin() * (-t).exp()).collect();
                row[0] = 0.0;
                row[nodes - 1] = 0.0;
                row
            })
            .collect();
        ShearState::from_history(grid, dt, v, vec![vec![0.0; nodes]; steps + 1]).unwrap()
    }

    #[test]
    fn zero_state_has_zero_energy() {
        let grid = SpatialGrid::new(1.0, 10).unwrap();
        let s = ShearState::from_history(grid, 0.1, vec![vec![0.0; 12]; 5], vec![vec![0.0; 12]; 5]).unwrap();
        let e = energy(&s).unwrap();
        assert!(e.energy.iter().chain(&e.nu).all(|v| *v == 0.0));
        let d = data_measures(&s);
        assert_eq!((d.f_measure, d.v0_measure), (0.0, 0.0));
    }

    #[test]
    fn energy_of_a_decaying_mode_matches_closed_form() {
        // v = sin(pi x) e^{-t}, u = sin(pi x)(1 - e^{-t}) on (0, 1)
        let dt = 1e-3;
        let steps = 1000;
        let s = manufactured(127, dt, steps);
        let e = energy(&s).unwrap();
        let p2 = PI * PI;
        let a = (3.0 + 2.0 * p2 + p2 * p2) / 2.0;
        let b = (1.0 + p2 + p2 * p2 + p2 * p2 * p2) / 2.0;
        let density = |t: f64| a * (-2.0 * t).exp() + b * (1.0 - (-t).exp()).powi(2);
        for k in [0, 250, 1000] {
            let t = k as f64 * dt;
            let sup = (0..=k).map(|j| density(j as f64 * dt)).fold(0.0, f64::max);
            let exact = sup + a / 2.0 * (1.0 - (-2.0 * t).exp());
            assert!((e.energy[k] - exact).abs() < 1e-3 * exact, "{} vs {exact}", e.energy[k]);
        }
        // nu = sup sqrt(v^2 + v_x^2 + v_t^2) + sqrt(int sup v_x^2)
        let t: f64 = 1.0;
        let point = PI.max(2f64.sqrt());
        let exact_nu = point + (p2 * (1.0 - (-2.0 * t).exp()) / 2.0).sqrt();
        assert!((e.nu[1000] - exact_nu).abs() < 1e-3 * exact_nu, "{} vs {exact_nu}", e.nu[1000]);
    }

    #[test]
    fn initial_energy_agrees_with_the_history_form() {
        // linear run started from rest: v_tt(0) = -g'(0) a(0) v0''
        use crate::kernels::{DampingFunction, RelaxationKernel};
        use crate::solver::{Forcing, InitialData, Solver, SolverOptions};
        let k = RelaxationKernel::exponential(1.0, 1.0).unwrap();
        let g = DampingFunction::linear(-1.0).unwrap();
        let grid = SpatialGrid::new(1.0, 63).unwrap();
        let mut s = Solver::new(grid, &k, &g, &InitialData::single_mode(0.1, 1), Forcing::Zero, SolverOptions::new(1e-3, 8)).unwrap();
        s.run().unwrap();
        let from_history = energy(s.state()).unwrap().energy[0];
        let z = vec![0.0; grid.nodes()];
        let from_data = initial_energy(&grid, s.state().velocity(0), &z, &z, k.a0(), g.slope_at_zero());
        assert!((from_history - from_data).abs() < 1e-4 * from_data, "{from_history} {from_data}");
    }

    #[test]
    fn v0_measure_of_the_first_mode() {
        let grid = SpatialGrid::new(1.0, 255).unwrap();
        let v0: Vec<f64> = grid.positions().iter().map(|x| (PI * x).sin()).collect();
        let exact = (1.0 + PI * PI + PI.powi(4)) / 2.0;
        assert!((v0_measure(&grid, &v0) - exact).abs() < 1e-3 * exact);
    }

    #[test]
    fn f_measure_is_quadratic() {
        let grid = SpatialGrid::new(1.0, 20).unwrap();
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|j| grid.positions().iter().map(|x| (PI * x).sin() * (j as f64 * 0.05).sin()).collect())
            .collect();
        let doubled: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|v| 2.0 * v).collect()).collect();
        let a = f_measure(&grid, 0.05, &rows);
        let b = f_measure(&grid, 0.05, &doubled);
        assert!((b - 4.0 * a).abs() < 1e-12 * b);
    }

    #[test]
    fn certificates_on_zero_data_are_all_true() {
        let q = CertificateInputs {
            energy: 0.0,
            energy_at_zero: 0.0,
            nu: 0.0,
            sup_strain: 0.0,
            f_measure: 0.0,
            v0_measure: 0.0,
            c_omega: sobolev_constant(1.0),
            small_so_far: true,
        };
        let f = check_certificates(&q, 1.0, 0.2, -2.5);
        assert!(f.smallness_ok && f.hyperbolicity_ok && f.e0_bound_ok && f.nu_bound_ok && f.strain_bound_ok && f.implication_ok);
    }

    #[test]
    fn sobolev_constant_values() {
        assert!((sobolev_constant(1.0) - 3f64.sqrt()).abs() < 1e-15);
        assert!((sobolev_constant(0.5) - 5f64.sqrt()).abs() < 1e-15);
    }
}
