use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::config::RunConfig;
use super::output::{num, to_json, RunDir};
use super::ExitCode;
use crate::diagnostics::{
    energy_report, initial_certificate, lemma_checks, sobolev_constant, write_lemma_csv, EnergyReport, InitialCertificate,
    LemmaCheck,
};
use crate::error::{Error, Result};
use crate::kernels::{check_measure_hypotheses, DampingFunction, MeasureReport, RelaxationKernel};
use crate::numerics::derivative;
use crate::solver::{
    compute_stress, stable_dt, ShearState, Solver, SolverOptions, StepStats, Termination,
};
use crate::spectral::{build_inversion, check_strong_positivity, log_symmetric_grid, spectral_profile, InversionInfo, PositivityReport};
use crate::volterra::{round_trip_study, RoundTripStudy};

/// Raw config text, its hash and the parsed form.
pub struct LoadedConfig {
    pub config: RunConfig,
    pub text: String,
    pub sha256: String,
    pub base: std::path::PathBuf,
}

pub fn load(path: &Path) -> Result<LoadedConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let config = RunConfig::from_toml(&text).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
        other => other,
    })?;
    let sha256 = Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect();
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(LoadedConfig {
        config,
        text,
        sha256,
        base,
    })
}

#[derive(Serialize)]
struct Timing {
    wall_seconds: f64,
    threads: usize,
}

#[derive(Serialize)]
struct KernelSummary {
    a0: f64,
    abar: Option<f64>,
    atoms: usize,
    truncation: Option<f64>,
    has_tail: bool,
    rate_range: (f64, f64),
    fingerprint: String,
}

impl KernelSummary {
    fn of(k: &RelaxationKernel) -> Self {
        Self {
            a0: k.a0(),
            abar: (!k.has_tail()).then(|| k.abar()),
            atoms: k.atoms().len(),
            truncation: k.truncation(),
            has_tail: k.has_tail(),
            rate_range: k.rate_range(),
            fingerprint: format!("{:016x}", k.fingerprint()),
        }
    }
}

#[derive(Serialize)]
struct DampingSummary {
    model: &'static str,
    theta: f64,
    k: f64,
    gamma: f64,
    slope_at_zero: f64,
    lemma_constant: f64,
}

impl DampingSummary {
    fn of(d: &DampingFunction) -> Self {
        Self {
            model: d.model().name(),
            theta: d.theta(),
            k: d.k(),
            gamma: d.gamma(),
            slope_at_zero: d.slope_at_zero(),
            lemma_constant: d.lemma_constant(),
        }
    }
}

#[derive(Serialize)]
struct CertificateSummary {
    energy_at_zero: f64,
    e0_bound: f64,
    e0_bound_ok: bool,
    f_measure: f64,
    v0_measure: f64,
    c_omega: f64,
    smallness_ok: bool,
    hyperbolicity_ok: bool,
    nu_bound_ok: bool,
    strain_bound_ok: bool,
    implication_ok: bool,
    energy_monotone: bool,
    rows: usize,
}

impl CertificateSummary {
    fn of(r: &EnergyReport) -> Self {
        Self {
            energy_at_zero: r.energy_at_zero,
            e0_bound: r.e0_bound,
            e0_bound_ok: r.all(|f| f.e0_bound_ok),
            f_measure: r.f_measure,
            v0_measure: r.v0_measure,
            c_omega: r.c_omega,
            smallness_ok: r.all(|f| f.smallness_ok),
            hyperbolicity_ok: r.all(|f| f.hyperbolicity_ok),
            nu_bound_ok: r.all(|f| f.nu_bound_ok),
            strain_bound_ok: r.all(|f| f.strain_bound_ok),
            implication_ok: r.all(|f| f.implication_ok),
            energy_monotone: r.energy_monotone(),
            rows: r.rows.len(),
        }
    }
}

#[derive(Serialize)]
struct LemmaSummary {
    all_hold: bool,
    max_ratio_g0: f64,
    max_ratio_g1: f64,
    max_ratio_g: f64,
    max_ratio_g_t: f64,
}

impl LemmaSummary {
    fn of(c: &[LemmaCheck]) -> Self {
        let m = |f: fn(&LemmaCheck) -> f64| c.iter().map(f).fold(0.0, f64::max);
        Self {
            all_hold: c.iter().all(LemmaCheck::holds),
            max_ratio_g0: m(|c| c.ratio_g0),
            max_ratio_g1: m(|c| c.ratio_g1),
            max_ratio_g: m(|c| c.ratio_g),
            max_ratio_g_t: m(|c| c.ratio_g_t),
        }
    }
}

#[derive(Serialize)]
struct RunSummary {
    length: f64,
    interior: usize,
    dx: f64,
    dt: f64,
    steps: usize,
    steps_taken: usize,
    t_final: f64,
    recursive_memory: bool,
}

#[derive(Serialize)]
struct SimulateManifest<'a> {
    command: &'static str,
    version: &'static str,
    config_sha256: &'a str,
    config_toml: &'a str,
    config: &'a RunConfig,
    run: RunSummary,
    kernel: KernelSummary,
    damping: DampingSummary,
    termination: &'a Termination,
    stats: &'a StepStats,
    initial: InitialCertificate,
    certificates: Option<CertificateSummary>,
    lemma: Option<LemmaSummary>,
    notes: Vec<String>,
    files: Vec<String>,
    exit_code: i32,
    timing: Timing,
}

/// Steps at which energy rows are reported: `0, every, 2 every, ...` and the last.
pub fn output_steps(last: usize, every: usize) -> Vec<usize> {
    let mut s: Vec<usize> = (0..=last).step_by(every.max(1)).collect();
    if s.last() != Some(&last) {
        s.push(last);
    }
    s
}

fn probe_header(probes: &[f64]) -> String {
    let mut h = String::from("step,t");
    for p in probes {
        h.push_str(&format!(",v@{p},u@{p},ux@{p}"));
    }
    h
}

fn probe_row(state: &ShearState, probes: &[f64]) -> String {
    let k = state.step();
    let grid = state.grid();
    let mut row = format!("{k},{}", num(state.time()));
    let v = state.velocity(k);
    let u = state.displacement(k);
    let strain = state.strain_field(k);
    for &p in probes {
        row.push_str(&format!(
            ",{},{},{}",
            num(grid.interpolate(v, p)),
            num(grid.interpolate(u, p)),
            num(grid.interpolate_cells(&strain, p))
        ));
    }
    row
}

fn snapshot_step(state: &ShearState, t: f64) -> usize {
    ((t / state.dt()).round() as usize).min(state.step())
}

fn write_snapshot(dir: &mut RunDir, state: &ShearState, solver: &Solver, k: usize) -> Result<()> {
    let grid = *state.grid();
    let v = state.velocity(k).to_vec();
    let u = state.displacement(k).to_vec();
    let ux = derivative(&u, grid.dx());
    let vxx = state.velocity_curvature(k);
    dir.write_with(&format!("snapshot_{k:06}.csv"), |w| {
        writeln!(w, "x,v,u,u_x,v_xx")?;
        for i in 0..grid.nodes() {
            writeln!(w, "{},{},{},{},{}", num(grid.x(i)), num(v[i]), num(u[i]), num(ux[i]), num(vxx[i]))?;
        }
        Ok(())
    })?;
    let stress = compute_stress(state, solver.weights(), solver.damping(), k);
    dir.write_with(&format!("stress_{k:06}.csv"), |w| {
        writeln!(w, "x,sigma")?;
        for (x, s) in stress.positions.iter().zip(&stress.sigma) {
            writeln!(w, "{},{}", num(*x), num(*s))?;
        }
        Ok(())
    })
}

pub fn simulate(loaded: &LoadedConfig, out: &Path, threads: usize) -> Result<ExitCode> {
    let started = Instant::now();
    let cfg = &loaded.config;
    let kernel = cfg.kernel.build()?;
    let damping = cfg.damping.build(&loaded.base)?;
    let grid = cfg.spatial_grid()?;
    let initial = cfg.initial.build(&loaded.base)?;
    let forcing = cfg.forcing.build(&loaded.base, &kernel, &damping, grid.length())?;
    let dt_target = match cfg.time.dt {
        Some(dt) => dt,
        None => stable_dt(&grid, &kernel, &damping, cfg.time.cfl_safety),
    };
    let steps = ((cfg.time.t_end / dt_target).ceil() as usize).max(1);
    let dt = cfg.time.t_end / steps as f64;
    let mut options = SolverOptions::new(dt, steps);
    options.corrector_tol = cfg.time.corrector_tol;
    options.max_corrections = cfg.time.max_corrections;
    options.breach = cfg.time.breach;
    options.memory = cfg.time.memory;
    let mut solver = Solver::new(grid, &kernel, &damping, &initial, forcing, options)?;

    let mut dir = RunDir::create(out)?;
    let probes = cfg.output.probes.clone();
    let mut probe_rows = vec![probe_header(&probes)];
    if !probes.is_empty() {
        probe_rows.push(probe_row(solver.state(), &probes));
    }
    let termination = solver.run_with(|s| {
        if !probes.is_empty() {
            probe_rows.push(probe_row(s, &probes));
        }
        Ok(())
    })?;
    if !probes.is_empty() {
        let text = probe_rows.join("\n") + "\n";
        dir.write_text("probes.csv", &text)?;
    }

    let state = solver.state();
    let last = state.step();
    let mut notes = Vec::new();
    let mut snaps: Vec<usize> = cfg.output.snapshot_times.iter().map(|&t| snapshot_step(state, t)).collect();
    snaps.sort_unstable();
    snaps.dedup();
    for k in snaps {
        write_snapshot(&mut dir, state, &solver, k)?;
    }

    let initial = initial_certificate(state, &kernel, &damping)?;
    let c_omega = cfg.diagnostics.c_omega.unwrap_or_else(|| sobolev_constant(grid.length()));
    let steps_out = output_steps(last, cfg.output.every);
    let (certificates, lemma) = if last + 1 >= crate::diagnostics::MIN_ENERGY_STEPS {
        let report = energy_report(state, &kernel, &damping, c_omega, &steps_out)?;
        dir.write_with("energy.csv", |w| report.write_csv(w))?;
        let lemma = if cfg.output.lemma_checks {
            let checks = lemma_checks(state, &kernel, &damping, &steps_out)?;
            dir.write_with("lemma.csv", |w| write_lemma_csv(&checks, w))?;
            Some(LemmaSummary::of(&checks))
        } else {
            None
        };
        (Some(CertificateSummary::of(&report)), lemma)
    } else {
        notes.push(format!("history of {} steps is too short for energy diagnostics", last + 1));
        (None, None)
    };

    let exit = match &termination {
        Termination::Completed => ExitCode::Success,
        Termination::HyperbolicityBreach(_) => ExitCode::HyperbolicityBreach,
        Termination::Divergence { .. } => ExitCode::Divergence,
    };
    let mut files = dir.files().to_vec();
    files.push("manifest.json".into());
    let manifest = SimulateManifest {
        command: "simulate",
        version: env!("CARGO_PKG_VERSION"),
        config_sha256: &loaded.sha256,
        config_toml: &loaded.text,
        config: cfg,
        run: RunSummary {
            length: grid.length(),
            interior: grid.interior(),
            dx: grid.dx(),
            dt,
            steps,
            steps_taken: last,
            t_final: state.time(),
            recursive_memory: solver.uses_recursive_memory(),
        },
        kernel: KernelSummary::of(&kernel),
        damping: DampingSummary::of(&damping),
        termination: &termination,
        stats: solver.stats(),
        initial,
        certificates,
        lemma,
        notes,
        files,
        exit_code: exit as i32,
        timing: Timing {
            wall_seconds: started.elapsed().as_secs_f64(),
            threads,
        },
    };
    dir.write_text("manifest.json", &to_json(&manifest)?)?;
    Ok(exit)
}

#[derive(Serialize)]
struct KernelCheckManifest<'a> {
    command: &'static str,
    version: &'static str,
    config_sha256: &'a str,
    config_toml: &'a str,
    kernel: KernelSummary,
    damping: DampingSummary,
    measure: MeasureReport,
    positivity: PositivityReport,
    monotonicity_samples: usize,
    monotonicity_violations: usize,
    psi_at_zero: Option<f64>,
    inversion: Option<InversionInfo>,
    checks: Vec<(String, bool)>,
    passed: bool,
    files: Vec<String>,
    exit_code: i32,
    timing: Timing,
}

pub fn kernel_check(loaded: &LoadedConfig, out: &Path, threads: usize) -> Result<ExitCode> {
    let started = Instant::now();
    let cfg = &loaded.config;
    let kc = &cfg.kernel_check;
    let kernel = cfg.kernel.build()?;
    let mut dir = RunDir::create(out)?;
    let mut checks: Vec<(String, bool)> = Vec::new();

    let measure = check_measure_hypotheses(kernel.measure(), cfg.kernel.gamma())?;
    checks.push(("measure_inverse_square_moment".into(), measure.inverse_square_ok));
    checks.push(("measure_gamma_moment".into(), measure.gamma_moment_ok));

    let omegas = log_symmetric_grid(kc.omega_min, kc.omega_max, kc.omega_points)?;
    let positivity = check_strong_positivity(&kernel, &omegas)?;
    checks.push(("strong_positivity".into(), positivity.pass));
    let profile = spectral_profile(&kernel, &omegas);
    dir.write_with("spectrum.csv", |w| profile.write_csv(w))?;

    let first = usize::from(kernel.has_tail());
    let mut times: Vec<f64> = (first..=kc.samples).map(|j| kc.t_max * j as f64 / kc.samples as f64).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let random: Vec<f64> = (0..kc.samples).map(|_| rng.random_range(1e-6..kc.t_max)).collect();
    dir.write_with("kernel.csv", |w| kernel.write_csv(w, &times))?;
    times.extend(random);
    let violations = kernel.total_monotonicity_violations(&times)?;
    checks.push(("total_monotonicity".into(), violations == 0));

    let (psi_at_zero, inversion) = if kernel.has_tail() {
        (None, None)
    } else {
        let grid: Vec<f64> = (0..=kc.samples).map(|j| kc.t_max * j as f64 / kc.samples as f64).collect();
        let psi = grid.iter().map(|&t| kernel.psi(t)).collect::<Result<Vec<_>>>()?;
        let abar = kernel.abar();
        dir.write_with("psi.csv", |w| {
            writeln!(w, "t,psi")?;
            for (t, p) in grid.iter().zip(&psi) {
                writeln!(w, "{},{}", num(*t), num(*p))?;
            }
            Ok(())
        })?;
        // psi(0) = 2 abar
        checks.push((
            "psi_at_zero_is_twice_abar".into(),
            (psi[0] - 2.0 * abar).abs() <= 1e-10 * abar.max(1.0),
        ));
        let op = build_inversion(&kernel, None, kc.inversion_dt, kc.inversion_t_end)?;
        dir.write_with("inversion.csv", |w| op.write_csv(w))?;
        let info = op.info().clone();
        checks.push((
            "inversion_kernels_finite".into(),
            info.b1_l1.is_finite() && info.b2_l1.is_finite(),
        ));
        (Some(psi[0]), Some(info))
    };

    let d = cfg.damping.build(&loaded.base)?;
    checks.push(("damping_theta_positive".into(), d.theta() > 0.0));
    checks.push(("damping_gamma_positive".into(), d.gamma() > 0.0));
    let damping = DampingSummary::of(&d);

    let passed = checks.iter().all(|c| c.1);
    let exit = if passed { ExitCode::Success } else { ExitCode::CheckFailed };
    let mut files = dir.files().to_vec();
    files.push("manifest.json".into());
    let manifest = KernelCheckManifest {
        command: "kernel-check",
        version: env!("CARGO_PKG_VERSION"),
        config_sha256: &loaded.sha256,
        config_toml: &loaded.text,
        kernel: KernelSummary::of(&kernel),
        damping,
        measure,
        positivity,
        monotonicity_samples: times.len(),
        monotonicity_violations: violations,
        psi_at_zero,
        inversion,
        checks,
        passed,
        files,
        exit_code: exit as i32,
        timing: Timing {
            wall_seconds: started.elapsed().as_secs_f64(),
            threads,
        },
    };
    dir.write_text("manifest.json", &to_json(&manifest)?)?;
    Ok(exit)
}

/// Smooth test signal: a constant plus three seeded sinusoids.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct TestSignal {
    pub offset: f64,
    pub amplitudes: [f64; 3],
    pub frequencies: [f64; 3],
    pub phases: [f64; 3],
}

impl TestSignal {
    pub fn random(rng: &mut impl Rng) -> Self {
        let mut s = Self {
            offset: rng.random_range(-1.0..1.0),
            amplitudes: [0.0; 3],
            frequencies: [0.0; 3],
            phases: [0.0; 3],
        };
        for j in 0..3 {
            s.amplitudes[j] = rng.random_range(-1.0..1.0);
            s.frequencies[j] = rng.random_range(0.5..6.0);
            s.phases[j] = rng.random_range(0.0..std::f64::consts::TAU);
        }
        s
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.offset
            + (0..3)
                .map(|j| self.amplitudes[j] * (self.frequencies[j] * t + self.phases[j]).sin())
                .sum::<f64>()
    }
}

/// Fixed signal of the inversion demo.
pub fn reference_signal(t: f64) -> f64 {
    1.0 + (3.0 * t).sin() + 0.5 * t * (-t).exp()
}

#[derive(Serialize)]
struct InvertDemoManifest<'a> {
    command: &'static str,
    version: &'static str,
    config_sha256: &'a str,
    config_toml: &'a str,
    kernel: KernelSummary,
    signals: Vec<Option<TestSignal>>,
    studies: Vec<RoundTripStudy>,
    min_order: f64,
    required_order: f64,
    passed: bool,
    files: Vec<String>,
    exit_code: i32,
    timing: Timing,
}

pub fn invert_demo(loaded: &LoadedConfig, out: &Path, threads: usize) -> Result<ExitCode> {
    let started = Instant::now();
    let cfg = &loaded.config;
    let inv = &cfg.inversion;
    let kernel = cfg.kernel.build()?;
    if kernel.has_tail() {
        return Err(Error::Usage("invert-demo needs a truncated kernel (set kernel.truncation)".into()));
    }
    let finest = inv.dt_coarse / (1u64 << inv.levels.saturating_sub(1).min(40)) as f64;
    if inv.levels < 2 || (inv.t_end / inv.dt_coarse).round() < 2.0 || !finest.is_finite() {
        return Err(Error::Usage(format!(
            "invert-demo needs at least 2 levels and 2 coarse steps, got levels = {}, t_end / dt = {}",
            inv.levels,
            inv.t_end / inv.dt_coarse
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut signals: Vec<Option<TestSignal>> = vec![None];
    signals.extend((0..inv.random_signals).map(|_| Some(TestSignal::random(&mut rng))));
    let studies = signals
        .iter()
        .map(|s| match s {
            None => round_trip_study(&kernel, reference_signal, inv.dt_coarse, inv.levels, inv.t_end),
            Some(sig) => {
                let sig = *sig;
                round_trip_study(&kernel, move |t| sig.eval(t), inv.dt_coarse, inv.levels, inv.t_end)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let mut dir = RunDir::create(out)?;
    dir.write_with("roundtrip.csv", |w| {
        writeln!(w, "signal,dt,relative_l2,forward_residual,order")?;
        for (j, st) in studies.iter().enumerate() {
            for (i, r) in st.rows.iter().enumerate() {
                let order = if i == 0 { String::new() } else { num(st.orders[i - 1]) };
                writeln!(
                    w,
                    "{j},{},{},{},{order}",
                    num(r.dt),
                    num(r.relative_l2),
                    num(r.forward_residual)
                )?;
            }
        }
        Ok(())
    })?;
    let min_order = studies.iter().map(RoundTripStudy::min_order).fold(f64::INFINITY, f64::min);
    let passed = min_order >= inv.min_order;
    let exit = if passed { ExitCode::Success } else { ExitCode::CheckFailed };
    let mut files = dir.files().to_vec();
    files.push("manifest.json".into());
    let manifest = InvertDemoManifest {
        command: "invert-demo",
        version: env!("CARGO_PKG_VERSION"),
        config_sha256: &loaded.sha256,
        config_toml: &loaded.text,
        kernel: KernelSummary::of(&kernel),
        signals,
        studies,
        min_order,
        required_order: inv.min_order,
        passed,
        files,
        exit_code: exit as i32,
        timing: Timing {
            wall_seconds: started.elapsed().as_secs_f64(),
            threads,
        },
    };
    dir.write_text("manifest.json", &to_json(&manifest)?)?;
    Ok(exit)
}
