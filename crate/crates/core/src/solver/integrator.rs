use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{DampingFunction, RelaxationKernel};

use super::data::{Forcing, InitialData, SpatialGrid};
use super::memory::{MemoryWeights, RecursiveMemory};
use super::state::ShearState;

/// What to do when the accumulated strain leaves `[-theta, theta]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BreachPolicy {
    /// stop with a breach report
    #[default]
    Abort,
    /// clamp the argument of `g` to `[-theta, theta]` and continue (non-conforming)
    Clamp,
}

/// How the memory sum is evaluated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MemoryMethod {
    /// recursive for linear damping under the abort policy, direct otherwise
    #[default]
    Auto,
    Direct,
    /// per-atom running sums; linear damping only
    Recursive,
}

/// Time-stepping controls.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverOptions {
    pub dt: f64,
    pub steps: usize,
    /// relative tolerance on the corrector increment
    #[serde(default = "default_corrector_tol")]
    pub corrector_tol: f64,
    /// corrector passes per step; 1 gives plain Heun
    #[serde(default = "default_max_corrections")]
    pub max_corrections: usize,
    #[serde(default)]
    pub breach: BreachPolicy,
    #[serde(default)]
    pub memory: MemoryMethod,
}

fn default_corrector_tol() -> f64 {
    1e-12
}

fn default_max_corrections() -> usize {
    30
}

impl SolverOptions {
    pub fn new(dt: f64, steps: usize) -> Self {
        Self {
            dt,
            steps,
            corrector_tol: default_corrector_tol(),
            max_corrections: default_max_corrections(),
            breach: BreachPolicy::Abort,
            memory: MemoryMethod::Auto,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::Domain(format!("time step must be > 0, got {}", self.dt)));
        }
        if self.max_corrections == 0 {
            return Err(Error::Domain("max_corrections must be >= 1".into()));
        }
        if !(self.corrector_tol > 0.0) {
            return Err(Error::Domain("corrector_tol must be > 0".into()));
        }
        Ok(())
    }
}

/// Largest step allowed by the wave-speed bound `dt <= c dx / sqrt(|g'(0)| a(0))`.
pub fn stable_dt(grid: &SpatialGrid, kernel: &RelaxationKernel, damping: &DampingFunction, safety: f64) -> f64 {
    safety * grid.dx() / (damping.slope_at_zero().abs() * kernel.a0()).sqrt()
}

/// First strain-window violation seen during a run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BreachRecord {
    pub time: f64,
    pub x: f64,
    pub value: f64,
    pub theta: f64,
}

/// Why a run stopped.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Termination {
    Completed,
    HyperbolicityBreach(BreachRecord),
    Divergence { last_valid_time: f64, reason: String },
}

/// Counters collected while stepping.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct StepStats {
    pub steps: usize,
    pub corrections: usize,
    pub max_corrections_in_step: usize,
    pub clamped: bool,
    pub first_breach: Option<BreachRecord>,
}

/// Shear stress at the cell midpoints.
#[derive(Clone, Debug, PartialEq)]
pub struct StressField {
    pub positions: Vec<f64>,
    pub sigma: Vec<f64>,
    /// some argument of `g` left the model's trusted domain
    pub outside_domain: bool,
}

/// Explicit predictor with a trapezoidal corrector iterated to convergence,
/// full-history memory and Dirichlet ends.
pub struct Solver<'a> {
    kernel: &'a RelaxationKernel,
    damping: &'a DampingFunction,
    forcing: Forcing,
    options: SolverOptions,
    weights: MemoryWeights,
    recursive: Option<RecursiveMemory>,
    state: ShearState,
    rhs: Vec<f64>,
    strain_lo: Vec<f64>,
    strain_hi: Vec<f64>,
    stats: StepStats,
    slope0: f64,
}

/// Relative increment below which a corrector that stops contracting is
/// taken to have reached rounding level.
const NOISE_FLOOR: f64 = 1e-9;

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

impl<'a> Solver<'a> {
    pub fn new(
        grid: SpatialGrid,
        kernel: &'a RelaxationKernel,
        damping: &'a DampingFunction,
        initial: &InitialData,
        forcing: Forcing,
        options: SolverOptions,
    ) -> Result<Self> {
        options.validate()?;
        if kernel.has_tail() {
            return Err(Error::Usage(
                "the time stepper needs a truncated kernel (set a finite truncation)".into(),
            ));
        }
        forcing.validate(&grid, damping)?;
        let n = grid.nodes();
        let mut v0 = initial.sample(&grid)?;
        let scale = max_abs(&v0).max(f64::MIN_POSITIVE);
        for end in [0, n - 1] {
            if v0[end].abs() > 1e-12 * scale {
                return Err(Error::Hypothesis(format!(
                    "initial velocity is {:e} at x = {}: v0 must vanish on the boundary",
                    v0[end],
                    grid.x(end)
                )));
            }
            v0[end] = 0.0;
        }
        let mut f0 = vec![0.0; n];
        forcing.sample(&grid, 0.0, &mut f0)?;
        let fscale = max_abs(&f0).max(f64::MIN_POSITIVE);
        for end in [0, n - 1] {
            if f0[end].abs() > 1e-12 * fscale {
                return Err(Error::Hypothesis(format!(
                    "forcing is {:e} at x = {}, t = 0: f(., 0) must vanish on the boundary",
                    f0[end],
                    grid.x(end)
                )));
            }
        }
        let recursive = match options.memory {
            MemoryMethod::Direct => false,
            MemoryMethod::Recursive => {
                if !damping.is_linear() {
                    return Err(Error::Usage("recursive memory requires a linear damping function".into()));
                }
                if options.breach == BreachPolicy::Clamp {
                    return Err(Error::Usage("recursive memory cannot clamp individual strain increments".into()));
                }
                true
            }
            MemoryMethod::Auto => damping.is_linear() && options.breach == BreachPolicy::Abort,
        };
        let weights = MemoryWeights::new(kernel, options.dt, options.steps);
        let state = ShearState::new(grid, options.dt, v0, f0)?;
        let mut solver = Self {
            kernel,
            damping,
            forcing,
            recursive: recursive.then(|| RecursiveMemory::new(grid.cells(), kernel.atoms().len())),
            weights,
            state,
            rhs: vec![0.0; n],
            strain_lo: vec![0.0; grid.cells()],
            strain_hi: vec![0.0; grid.cells()],
            stats: StepStats::default(),
            slope0: damping.slope_at_zero(),
            options,
        };
        let strain0 = vec![0.0; grid.cells()];
        solver.rhs = solver.rhs_at(0, &strain0, solver.state.forcing(0));
        Ok(solver)
    }

    pub fn state(&self) -> &ShearState {
        &self.state
    }

    pub fn into_state(self) -> ShearState {
        self.state
    }

    pub fn weights(&self) -> &MemoryWeights {
        &self.weights
    }

    pub fn stats(&self) -> &StepStats {
        &self.stats
    }

    pub fn options(&self) -> &SolverOptions {
        &self.options
    }

    pub fn uses_recursive_memory(&self) -> bool {
        self.recursive.is_some()
    }

    /// Current `v_t` on the nodes (memory term plus forcing).
    pub fn current_rhs(&self) -> &[f64] {
        &self.rhs
    }

    fn clamp_arg(&self, y: f64) -> f64 {
        match self.options.breach {
            BreachPolicy::Abort => y,
            BreachPolicy::Clamp => {
                let th = self.damping.theta();
                y.clamp(-th, th)
            }
        }
    }

    /// Stress in every cell at step `k` for a candidate strain `strain`, with
    /// the stored history supplying steps `0..k`.
    fn stress_at(&self, k: usize, strain: &[f64]) -> Vec<f64> {
        let w = &self.weights;
        if let Some(rec) = &self.recursive {
            // g(y) = s y: sigma = -s (a(0) + alpha_0) U_k - s sum_m W_k(m) U_{k-m},
            // since sum_m W_k(m) = a(t_k) - a(0) - alpha_0
            let s = self.slope0;
            let a0 = w.a(0) + w.alpha(0);
            return strain
                .par_iter()
                .enumerate()
                .map(|(c, &u)| -s * (a0 * u + rec.history_sum(w, c)))
                .collect();
        }
        let g = self.damping;
        let ak = w.a(k);
        strain
            .par_iter()
            .enumerate()
            .map(|(c, &u)| {
                let hist = self.state.cell_strain(c);
                let mut acc = -g.g(self.clamp_arg(u)) * ak;
                for m in 1..=k {
                    acc += w.weight(k, m) * g.g(self.clamp_arg(u - hist[k - m]));
                }
                acc
            })
            .collect()
    }

    fn rhs_at(&self, k: usize, strain: &[f64], f: &[f64]) -> Vec<f64> {
        let sigma = self.stress_at(k, strain);
        let dx = self.state.grid().dx();
        let n = f.len();
        let mut out = vec![0.0; n];
        for i in 1..n - 1 {
            out[i] = (sigma[i] - sigma[i - 1]) / dx + f[i];
        }
        out
    }

    fn strain_of(&self, u: &[f64]) -> Vec<f64> {
        let dx = self.state.grid().dx();
        u.windows(2).map(|p| (p[1] - p[0]) / dx).collect()
    }

    /// Advance one step. Errors with `HyperbolicityBreach` (abort policy, the
    /// offending step is kept in the history) or `Divergence`.
    pub fn step(&mut self) -> Result<()> {
        let k = self.state.step();
        if k >= self.options.steps {
            return Err(Error::Usage(format!("run already reached its {} steps", self.options.steps)));
        }
        let dt = self.options.dt;
        let t_new = (k + 1) as f64 * dt;
        let t_old = k as f64 * dt;
        let grid = *self.state.grid();
        let n = grid.nodes();
        let mut f_new = vec![0.0; n];
        self.forcing.sample(&grid, t_new, &mut f_new)?;
        if let Some(rec) = self.recursive.as_mut() {
            let current = self.state.strain_field(k);
            rec.push(&self.weights, &current);
        }
        let vk = self.state.velocity(k).to_vec();
        let rk = self.rhs.clone();
        let mut v_star: Vec<f64> = vk.iter().zip(&rk).map(|(v, r)| v + dt * r).collect();
        v_star[0] = 0.0;
        v_star[n - 1] = 0.0;
        let mut prev_delta = f64::INFINITY;
        let mut accepted = false;
        let mut passes = 0;
        for pass in 1..=self.options.max_corrections {
            passes = pass;
            let u_star = self.state.next_displacement(&v_star);
            let strain = self.strain_of(&u_star);
            let r_star = self.rhs_at(k + 1, &strain, &f_new);
            let mut v_new: Vec<f64> = (0..n).map(|i| vk[i] + 0.5 * dt * (rk[i] + r_star[i])).collect();
            v_new[0] = 0.0;
            v_new[n - 1] = 0.0;
            if v_new.iter().any(|x| !x.is_finite()) {
                return Err(Error::Divergence {
                    last_valid_time: t_old,
                    reason: format!("non-finite velocity in corrector pass {pass}"),
                });
            }
            let delta = v_new.iter().zip(&v_star).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            v_star = v_new;
            if self.options.max_corrections == 1 {
                accepted = true;
                break;
            }
            // rounding in v_k + dt/2 (r_k + r*) scales with the rhs terms too
            let scale = max_abs(&v_star)
                .max(max_abs(&vk))
                .max(dt * max_abs(&rk))
                .max(dt * max_abs(&r_star));
            if delta <= self.options.corrector_tol * scale {
                accepted = true;
                break;
            }
            // stalled at the rounding floor of the spatial differences
            if pass >= 3 && delta > 0.5 * prev_delta && delta <= NOISE_FLOOR * scale {
                accepted = true;
                break;
            }
            if pass >= 3 && delta > prev_delta {
                return Err(Error::Divergence {
                    last_valid_time: t_old,
                    reason: format!(
                        "corrector increments grew from {prev_delta:.3e} to {delta:.3e} (step too large for the wave speed)"
                    ),
                });
            }
            prev_delta = delta;
        }
        if !accepted {
            return Err(Error::Divergence {
                last_valid_time: t_old,
                reason: format!(
                    "corrector did not reach tolerance {:e} in {} passes",
                    self.options.corrector_tol, self.options.max_corrections
                ),
            });
        }
        self.stats.corrections += passes;
        self.stats.max_corrections_in_step = self.stats.max_corrections_in_step.max(passes);
        self.state.push(v_star, f_new.clone())?;
        self.stats.steps += 1;
        let k1 = k + 1;
        let strain = self.state.strain_field(k1);
        let breach = self.update_window(&strain, t_new);
        self.rhs = self.rhs_at(k1, &strain, &f_new);
        if self.rhs.iter().any(|x| !x.is_finite()) {
            return Err(Error::Divergence {
                last_valid_time: t_old,
                reason: "non-finite right-hand side".into(),
            });
        }
        if let Some(b) = breach {
            if self.stats.first_breach.is_none() {
                self.stats.first_breach = Some(b);
            }
            match self.options.breach {
                BreachPolicy::Abort => {
                    return Err(Error::HyperbolicityBreach {
                        time: b.time,
                        x: b.x,
                        value: b.value,
                        theta: b.theta,
                    })
                }
                BreachPolicy::Clamp => self.stats.clamped = true,
            }
        }
        Ok(())
    }

    /// Extend the running strain range; report the worst violation of
    /// `|U_k - U_j| <= theta` (including `j = 0`, where `U = 0`).
    fn update_window(&mut self, strain: &[f64], t: f64) -> Option<BreachRecord> {
        let theta = self.damping.theta();
        let mut worst: Option<(usize, f64)> = None;
        for (c, &u) in strain.iter().enumerate() {
            let lo = self.strain_lo[c].min(u);
            let hi = self.strain_hi[c].max(u);
            self.strain_lo[c] = lo;
            self.strain_hi[c] = hi;
            let spread = (u - lo).max(hi - u);
            if spread > theta && worst.is_none_or(|(_, w)| spread > w) {
                worst = Some((c, spread));
            }
        }
        worst.map(|(c, value)| BreachRecord {
            time: t,
            x: (c as f64 + 0.5) * self.state.grid().dx(),
            value,
            theta,
        })
    }

    /// Step until the configured horizon or the first failure.
    pub fn run(&mut self) -> Result<Termination> {
        self.run_with(|_| Ok(()))
    }

    /// As `run`, calling `observe` after every accepted step.
    pub fn run_with(&mut self, mut observe: impl FnMut(&ShearState) -> Result<()>) -> Result<Termination> {
        while self.state.step() < self.options.steps {
            match self.step() {
                Ok(()) => observe(&self.state)?,
                Err(Error::HyperbolicityBreach { time, x, value, theta }) => {
                    observe(&self.state)?;
                    return Ok(Termination::HyperbolicityBreach(BreachRecord { time, x, value, theta }));
                }
                Err(Error::Divergence { last_valid_time, reason }) => {
                    return Ok(Termination::Divergence { last_valid_time, reason })
                }
                Err(e) => return Err(e),
            }
        }
        Ok(Termination::Completed)
    }

    /// Memory term of the momentum equation at the latest step (the
    /// right-hand side without forcing). Errors if the strain window is violated.
    pub fn memory_rhs(&self) -> Result<Vec<f64>> {
        let k = self.state.step();
        let theta = self.damping.theta();
        let spread = self.state.max_strain_increment(k);
        if spread > theta && self.options.breach == BreachPolicy::Abort {
            let (c, _) = (0..self.state.grid().cells())
                .map(|c| {
                    let h = &self.state.cell_strain(c)[..=k];
                    let (lo, hi) = h.iter().fold((0.0f64, 0.0f64), |(l, u), &s| (l.min(s), u.max(s)));
                    (c, (h[k] - lo).max(hi - h[k]))
                })
                .fold((0, 0.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            return Err(Error::HyperbolicityBreach {
                time: self.state.time(),
                x: (c as f64 + 0.5) * self.state.grid().dx(),
                value: spread,
                theta,
            });
        }
        let f = vec![0.0; self.state.grid().nodes()];
        let strain = self.state.strain_field(k);
        Ok(self.direct_rhs(k, &strain, &f))
    }

    /// Right-hand side through the direct memory sum regardless of the method in use.
    fn direct_rhs(&self, k: usize, strain: &[f64], f: &[f64]) -> Vec<f64> {
        let sigma = compute_stress_at(&self.state, &self.weights, self.damping, k, strain).sigma;
        let dx = self.state.grid().dx();
        let n = f.len();
        let mut out = vec![0.0; n];
        for i in 1..n - 1 {
            out[i] = (sigma[i] - sigma[i - 1]) / dx + f[i];
        }
        out
    }

    /// Stress at the latest step by the direct sum.
    pub fn compute_stress(&self) -> StressField {
        compute_stress(&self.state, &self.weights, self.damping, self.state.step())
    }

    /// Stress at the latest step by whichever memory method the solver uses.
    pub fn stress_in_use(&self) -> Vec<f64> {
        let k = self.state.step();
        self.stress_at(k, &self.state.strain_field(k))
    }

    pub fn kernel(&self) -> &RelaxationKernel {
        self.kernel
    }

    pub fn damping(&self) -> &DampingFunction {
        self.damping
    }
}

/// `sigma = -g(U_k) a(t_k) + sum_m W_k(m) g(U_k - U_{k-m})` at step `k` of a
/// stored history, by the direct product-trapezoid sum.
pub fn compute_stress(state: &ShearState, weights: &MemoryWeights, damping: &DampingFunction, k: usize) -> StressField {
    compute_stress_at(state, weights, damping, k, &state.strain_field(k))
}

fn compute_stress_at(
    state: &ShearState,
    weights: &MemoryWeights,
    damping: &DampingFunction,
    k: usize,
    strain: &[f64],
) -> StressField {
    let domain = damping.model().domain();
    let inside = |y: f64| domain.is_none_or(|(lo, hi)| y >= lo && y <= hi);
    let ak = weights.a(k);
    let res: Vec<(f64, bool)> = strain
        .par_iter()
        .enumerate()
        .map(|(c, &u)| {
            let hist = state.cell_strain(c);
            let mut ok = inside(u);
            let mut acc = -damping.g(u) * ak;
            for m in 1..=k {
                let y = u - hist[k - m];
                ok &= inside(y);
                acc += weights.weight(k, m) * damping.g(y);
            }
            (acc, ok)
        })
        .collect();
    StressField {
        positions: state.grid().cell_centers(),
        sigma: res.iter().map(|r| r.0).collect(),
        outside_domain: res.iter().any(|r| !r.1),
    }
}
