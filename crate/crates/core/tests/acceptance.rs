//! Acceptance criteria 1-10. Prints one PASS/FAIL line per criterion (with
//! the measured values underneath) and exits non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use kbkz::cli::{self, reference_signal, TestSignal};
use kbkz::kernels::{eval_g_de, DampingFunction, RelaxationKernel};
use kbkz::solver::{
    reconstruct_uxx, reconstruct_vxx, stable_dt, Forcing, InitialData, Manufactured, Solver, SolverOptions,
    SpatialGrid, Termination,
};
use kbkz::spectral::{build_inversion, check_strong_positivity, fourier_exact, log_symmetric_grid, parseval_qform};
use kbkz::volterra::{invert, qform_kernel, relative_l2, round_trip_study, TimeSignal};

#[derive(Default)]
struct Checks(Vec<(bool, String)>);

impl Checks {
    fn le(&mut self, what: impl AsRef<str>, value: f64, limit: f64) {
        self.0.push((value <= limit, format!("{} = {value:.4e} (limit <= {limit:.4e})", what.as_ref())));
    }

    fn ge(&mut self, what: impl AsRef<str>, value: f64, limit: f64) {
        self.0.push((value >= limit, format!("{} = {value:.6e} (limit >= {limit:.6e})", what.as_ref())));
    }

    fn holds(&mut self, what: impl AsRef<str>, ok: bool) {
        self.0.push((ok, what.as_ref().to_string()));
    }
}

fn scenario_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn relative_l2_slices(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

// ---------------------------------------------------------------- 1

fn kernel_constants() -> kbkz::Result<Checks> {
    let mut c = Checks::default();
    let k = RelaxationKernel::doi_edwards(None)?;
    // partial sums to K plus the integral tail from K + 1/2
    let big_k = 1_000_000u64;
    let odd = |k: u64| (2 * k + 1) as f64;
    let s2: f64 = (1..=big_k).rev().map(|k| odd(k).powi(-2)).sum::<f64>() + 1.0 / (2.0 * odd(big_k + 1) - 2.0);
    let s4: f64 = (1..=big_k).rev().map(|k| odd(k).powi(-4)).sum::<f64>() + 1.0 / (6.0 * (odd(big_k) + 1.0).powi(3));
    let a0_closed = PI * PI / 8.0 - 1.0;
    let s4_closed = PI.powi(4) / 96.0 - 1.0;
    c.le("|a_DE(0) - partial sum + tail|", (k.a0() - s2).abs(), 1e-10);
    c.le("|a_DE(0) - (pi^2/8 - 1)|", (k.a0() - a0_closed).abs(), 1e-10);
    c.le("|partial sum + tail - (pi^2/8 - 1)|", (s2 - a0_closed).abs(), 1e-10);
    let re0 = fourier_exact(&k, 0.0).re;
    c.le("|Re F a_DE(0) - (pi^4/96 - 1)|", (re0 - s4_closed).abs(), 1e-10);
    c.le("|Re F a_DE(0) - partial sum + tail|", (re0 - s4).abs(), 1e-10);
    Ok(c)
}

// ---------------------------------------------------------------- 2

/// Jittered Monte-Carlo estimate of -3 int_{S^2} u1^2 u2^2: one uniform point
/// per cell of an equal-area (z, phi) partition.
fn monte_carlo_slope(rng: &mut ChaCha8Rng, nz: usize, nphi: usize) -> f64 {
    let mut sum = 0.0;
    for i in 0..nz {
        let mut row = 0.0;
        for j in 0..nphi {
            let z = -1.0 + 2.0 * (i as f64 + rng.random::<f64>()) / nz as f64;
            let phi = 2.0 * PI * (j as f64 + rng.random::<f64>()) / nphi as f64;
            let s2 = 1.0 - z * z;
            let (sp, cp) = phi.sin_cos();
            row += s2 * s2 * cp * cp * sp * sp;
        }
        sum += row;
    }
    -3.0 * 4.0 * PI * sum / (nz * nphi) as f64
}

fn damping_function() -> kbkz::Result<Checks> {
    let mut c = Checks::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let g = DampingFunction::doi_edwards()?;
    let (mut odd_quad, mut odd_interp) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let y: f64 = rng.random_range(-1.0..=1.0);
        odd_quad = odd_quad.max((eval_g_de(y)? + eval_g_de(-y)?).abs());
        odd_interp = odd_interp.max((g.g(y) + g.g(-y)).abs());
    }
    c.le("max |g_DE(y) + g_DE(-y)|, quadrature", odd_quad, 1e-8);
    c.le("max |g_DE(y) + g_DE(-y)|, solver interpolant", odd_interp, 1e-8);
    let h = 1e-2;
    let fd = (eval_g_de(-2.0 * h)? - 8.0 * eval_g_de(-h)? + 8.0 * eval_g_de(h)? - eval_g_de(2.0 * h)?) / (12.0 * h);
    let mc = monte_carlo_slope(&mut rng, 1000, 2000);
    c.le("|FD g_DE'(0) - Monte-Carlo oracle|", (fd - mc).abs(), 1e-4);
    c.le("|FD g_DE'(0) + 4 pi / 5|", (fd + 4.0 * PI / 5.0).abs(), 1e-4);
    c.le("|Monte-Carlo oracle + 4 pi / 5|", (mc + 4.0 * PI / 5.0).abs(), 1e-4);
    Ok(c)
}

// ---------------------------------------------------------------- 3

fn strong_positivity() -> kbkz::Result<Checks> {
    let mut c = Checks::default();
    let omegas = log_symmetric_grid(1e-3, 1e4, 10_000)?;
    let bound = 1.0 / 81.0 - 1e-12;
    for n in [100.0, 1e4] {
        let k = RelaxationKernel::doi_edwards(Some(n))?;
        let report = check_strong_positivity(&k, &omegas)?;
        let direct = omegas
            .iter()
            .map(|w| (1.0 + w * w) * k.atoms().iter().map(|a| a.weight * a.rate / (a.rate * a.rate + w * w)).sum::<f64>())
            .fold(f64::INFINITY, f64::min);
        c.ge(format!("n = {n}: min (1 + w^2) Re F a_n over {} points", omegas.len()), report.m1_grid, bound);
        c.ge(format!("n = {n}: same minimum from the atoms directly"), direct, bound);
    }
    Ok(c)
}

// ---------------------------------------------------------------- 4

fn inversion() -> kbkz::Result<Checks> {
    let mut c = Checks::default();
    for (name, k) in [
        ("e^-t", RelaxationKernel::exponential(1.0, 1.0)?),
        ("a_DE, n = 100", RelaxationKernel::doi_edwards(Some(100.0))?),
    ] {
        let study = round_trip_study(&k, reference_signal, 8e-3, 4, 1.0)?;
        let finest = study.rows.last().expect("four levels");
        c.holds(format!("{name}: finest dt = {:.1e}", finest.dt), (finest.dt - 1e-3).abs() < 1e-15);
        c.le(format!("{name}: round-trip relative L2 at dt = 1e-3"), finest.relative_l2, 1e-4);
        c.ge(format!("{name}: min order over three halvings {:.3?}", study.orders), study.min_order(), 1.7);
    }
    // b = e^-t: w = l' + l exactly
    let k = RelaxationKernel::exponential(1.0, 1.0)?;
    let (dt, steps) = (2.5e-4, 4000);
    let l = TimeSignal::from_fn(dt, steps, |t| (3.0 * t).sin() + t * (-t).exp());
    let exact = TimeSignal::from_fn(dt, steps, |t| 3.0 * (3.0 * t).cos() + (3.0 * t).sin() + (-t).exp());
    let op = build_inversion(&k, None, dt, dt * steps as f64)?;
    let w = invert(&op, &l)?.w;
    c.le("e^-t: relative L2 of w against l' + l", relative_l2(&w, &exact)?, 1e-6);
    Ok(c)
}

// ---------------------------------------------------------------- 5

fn qform() -> kbkz::Result<Checks> {
    let mut c = Checks::default();
    let exp = RelaxationKernel::exponential(1.0, 1.0)?;
    let one = TimeSignal::from_fn(1e-3, 1000, |_| 1.0);
    c.le("|Q(1, 1, e^-s) - e^-1|", (qform_kernel(&one, &exp) - (-1.0f64).exp()).abs(), 1e-6);

    let de = RelaxationKernel::doi_edwards(Some(100.0))?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for (name, k, dt, steps) in [("e^-t", &exp, 2.5e-4, 4000), ("a_DE, n = 100", &de, 1e-4, 10_000)] {
        let mut worst = 0.0f64;
        for _ in 0..20 {
            let s = TestSignal::random(&mut rng);
            let w = TimeSignal::from_fn(dt, steps, |t| s.eval(t));
            let time = qform_kernel(&w, k);
            let freq = parseval_qform(&w, k);
            worst = worst.max((time - freq).abs() / time.abs());
        }
        c.le(format!("{name}: worst Parseval relative gap over 20 signals"), worst, 1e-6);
    }

    for n in [100.0, 1e4] {
        let k = RelaxationKernel::doi_edwards(Some(n))?;
        let mut lowest = f64::INFINITY;
        for j in 0..50 {
            let w = if j % 2 == 0 {
                let s = TestSignal::random(&mut rng);
                TimeSignal::from_fn(1e-3, 1000, |t| s.eval(t))
            } else {
                let samples: Vec<f64> = (0..=1000).map(|_| rng.random_range(-1.0..1.0)).collect();
                TimeSignal::new(1e-3, samples)?
            };
            lowest = lowest.min(qform_kernel(&w, &k));
        }
        c.ge(format!("n = {n}: min Q(w, 1, a_n) over 50 signals"), lowest, -1e-12);
    }
    Ok(c)
}

// ---------------------------------------------------------------- 6

/// exp(A) by scaling and squaring with a Taylor series.
fn expm(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let norm = a.iter().map(|r| r.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max);
    let squarings = (norm / 0.25).log2().ceil().max(0.0) as i32;
    let scale = 2f64.powi(-squarings);
    let mul = |x: &[Vec<f64>], y: &[Vec<f64>]| -> Vec<Vec<f64>> {
        (0..n).map(|i| (0..n).map(|j| (0..n).map(|m| x[i][m] * y[m][j]).sum()).collect()).collect()
    };
    let scaled: Vec<Vec<f64>> = a.iter().map(|r| r.iter().map(|x| x * scale).collect()).collect();
    let mut sum: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect();
    let mut term = sum.clone();
    for p in 1..30 {
        term = mul(&term, &scaled).into_iter().map(|r| r.into_iter().map(|x| x / p as f64).collect()).collect();
        for i in 0..n {
            for j in 0..n {
                sum[i][j] += term[i][j];
            }
        }
    }
    for _ in 0..squarings {
        sum = mul(&sum, &sum);
    }
    sum
}

/// Mode amplitude of v_t = int a(t - s) c v_xx(s) ds with one Fourier mode,
/// written as V' = -stiffness sum Z_j, Z_j' = w_j V - rho_j Z_j.
fn mode_oracle(kernel: &RelaxationKernel, stiffness: f64, v0: f64, t: f64) -> f64 {
    let atoms = kernel.atoms();
    let n = atoms.len() + 1;
    let mut a = vec![vec![0.0; n]; n];
    for (j, atom) in atoms.iter().enumerate() {
        a[0][j + 1] = -stiffness * t;
        a[j + 1][0] = atom.weight * t;
        a[j + 1][j + 1] = -atom.rate * t;
    }
    expm(&a)[0][0] * v0
}

fn run_mode(kernel: &RelaxationKernel, damping: &DampingFunction, interior: usize, steps: usize) -> kbkz::Result<(SpatialGrid, Vec<f64>)> {
    let grid = SpatialGrid::new(1.0, interior)?;
    let mut solver = Solver::new(
        grid,
        kernel,
        damping,
        &InitialData::single_mode(0.1, 1),
        Forcing::Zero,
        SolverOptions::new(1.0 / steps as f64, steps),
    )?;
    match solver.run()? {
        Termination::Completed => Ok((grid, solver.state().velocity(steps).to_vec())),
        other => Err(kbkz::Error::Usage(format!("mode run stopped early: {other:?}"))),
    }
}

fn linear_solver() -> kbkz::Result<Checks> {
    let mut c = Checks::default();
    let kernel = RelaxationKernel::doi_edwards(Some(100.0))?;
    let damping = DampingFunction::linear(-1.0)?;
    let stiffness = -damping.slope_at_zero() * PI * PI;

    let grid = SpatialGrid::new(1.0, 254)?;
    c.holds(format!("grid has {} nodes", grid.nodes()), grid.nodes() == 256);
    let steps = (1.0 / stable_dt(&grid, &kernel, &damping, 0.5)).ceil() as usize;
    let (grid, v) = run_mode(&kernel, &damping, 254, steps)?;
    let amp = mode_oracle(&kernel, stiffness, 0.1, 1.0);
    let exact: Vec<f64> = grid.positions().iter().map(|x| amp * (PI * x).sin()).collect();
    c.le(format!("relative error at t = 1 against the mode oracle ({steps} steps)"), relative_l2_slices(&v, &exact), 1e-3);

    // nested grids x = i / 64, i / 128, i / 256 with dt = dx
    let runs = [(63, 64), (127, 128), (255, 256)]
        .into_iter()
        .map(|(n, s)| {
            let g = SpatialGrid::new(1.0, n)?;
            c.holds(format!("N = {n}: dt = 1/{s} within the stable step"), 1.0 / s as f64 <= stable_dt(&g, &kernel, &damping, 1.0));
            run_mode(&kernel, &damping, n, s).map(|r| r.1)
        })
        .collect::<kbkz::Result<Vec<_>>>()?;
    let coarse = |v: &[f64], stride: usize| -> Vec<f64> { v.iter().step_by(stride).copied().collect() };
    let r0 = &runs[0];
    let e1 = relative_l2_slices(r0, &coarse(&runs[1], 2));
    let e2 = relative_l2_slices(&coarse(&runs[1], 2), &coarse(&runs[2], 4));
    c.ge(format!("self-convergence order (differences {e1:.3e}, {e2:.3e})"), (e1 / e2).log2(), 1.7);
    Ok(c)
}

// ---------------------------------------------------------------- CLI helpers

fn command_for(name: &str) -> fn(&cli::LoadedConfig, &Path, usize) -> kbkz::Result<cli::ExitCode> {
    if name.starts_with("kernel-") {
        cli::kernel_check
    } else if name.starts_with("invert-") {
        cli::invert_demo
    } else {
        cli::simulate
    }
}

fn scenarios() -> Vec<(String, PathBuf)> {
    let mut list: Vec<(String, PathBuf)> = fs::read_dir(scenario_dir())
        .expect("scenarios directory")
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .map(|p| (p.file_stem().unwrap().to_string_lossy().into_owned(), p))
        .collect();
    list.sort();
    list
}

fn run_scenario(name: &str, path: &Path, out: &Path) -> kbkz::Result<cli::ExitCode> {
    let loaded = cli::load(path)?;
    command_for(name)(&loaded, out, 1)
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).expect("manifest")).expect("valid JSON")
}

fn read_csv(path: &Path) -> Vec<BTreeMap<String, String>> {
    let text = fs::read_to_string(path).expect("csv");
    let mut lines = text.lines();
    let header: Vec<String> = lines.next().unwrap_or("").split(',').map(str::to_string).collect();
    lines
        .map(|l| header.iter().cloned().zip(l.split(',').map(str::to_string)).collect())
        .collect()
}

fn num(row: &BTreeMap<String, String>, key: &str) -> f64 {
    row[key].parse().expect("number")
}

// ---------------------------------------------------------------- 7

fn nonlinear_small_data(out: &Path) -> kbkz::Result<Checks> {
    let mut c = Checks::default();
    let path = scenario_dir().join("small-de-mode.toml");
    let loaded = cli::load(&path)?;
    let cfg = &loaded.config;
    c.holds("scenario horizon t = 5", cfg.time.t_end == 5.0);
    let code = cli::simulate(&loaded, out, 1)?;
    c.holds(format!("exit code {code:?}"), code == cli::ExitCode::Success);
    let manifest = read_json(&out.join("manifest.json"));
    c.holds("kernel is a truncated a_DE", manifest["kernel"]["truncation"].as_f64() == Some(100.0) && manifest["damping"]["model"] == "doi-edwards");
    c.holds("run completed", manifest["termination"]["kind"] == "completed");
    let energy = read_csv(&out.join("energy.csv"));
    let last_t = energy.last().map_or(0.0, |r| num(r, "t"));
    c.holds(format!("{} output steps, last at t = {last_t}", energy.len()), energy.len() > 10 && (last_t - 5.0).abs() < 1e-12);
    c.holds("hyperbolicity_ok at every output step", energy.iter().all(|r| r["hyperbolicity_ok"] == "true"));
    c.holds("implication_ok at every output step", energy.iter().all(|r| r["implication_ok"] == "true"));
    let lemma = read_csv(&out.join("lemma.csv"));
    c.holds("lemma rows match the output steps", lemma.len() == energy.len());
    for key in ["ratio_g0", "ratio_g1", "ratio_g", "ratio_g_t"] {
        let worst = lemma.iter().map(|r| num(r, key)).fold(0.0, f64::max);
        c.le(format!("max {key} (value / bound)"), worst, 1.0);
    }
    Ok(c)
}

// ---------------------------------------------------------------- 8

fn reconstruction() -> kbkz::Result<Checks> {
    let mut c = Checks::default();
    let kernel = RelaxationKernel::doi_edwards(Some(100.0))?;
    let damping = DampingFunction::linear(-1.0)?;
    let (t_end, steps) = (1.0, 400);
    let dt = t_end / steps as f64;
    let forcing = Manufactured::new(&kernel, &damping, 0.1, 1, 2.0, 1.0)?;
    let mut solver = Solver::new(
        SpatialGrid::new(1.0, 63)?,
        &kernel,
        &damping,
        &InitialData::zero(),
        Forcing::Manufactured(forcing),
        SolverOptions::new(dt, steps),
    )?;
    c.holds("manufactured run completed", matches!(solver.run()?, Termination::Completed));
    let op = build_inversion(&kernel, None, dt, t_end)?;
    let vxx = reconstruct_vxx(solver.state(), &op, &kernel, &damping)?;
    let uxx = reconstruct_uxx(solver.state(), &op, &kernel, &damping)?;
    c.le("reconstructed v_xx vs finite differences, relative L2", vxx.relative_l2, 1e-2);
    c.le("reconstructed u_xx vs finite differences, relative L2", uxx.relative_l2, 1e-2);
    Ok(c)
}

// ---------------------------------------------------------------- 9

fn certificates(out: &Path) -> kbkz::Result<Checks> {
    let mut c = Checks::default();
    let mut simulated = 0;
    for (name, path) in scenarios() {
        let dir = out.join(&name);
        let code = run_scenario(&name, &path, &dir)?;
        let manifest = read_json(&dir.join("manifest.json"));
        if manifest["command"] != "simulate" {
            continue;
        }
        simulated += 1;
        let init = &manifest["initial"];
        let a0 = manifest["kernel"]["a0"].as_f64().unwrap();
        let slope = manifest["damping"]["slope_at_zero"].as_f64().unwrap();
        let data = init["f_measure"].as_f64().unwrap() + init["v0_measure"].as_f64().unwrap();
        let bound = 2.0 * (1.0 + a0 * a0 * slope * slope) * data;
        let e0 = init["energy_at_zero"].as_f64().unwrap();
        c.le(format!("{name} (exit {code:?}): E(0) - 2[1 + a0^2 g'(0)^2](F + V0)"), e0 - bound, 1e-6);
        let energy_csv = dir.join("energy.csv");
        if !energy_csv.exists() {
            c.holds(format!("{name}: no energy history (stopped at t = {})", manifest["termination"]["last_valid_time"]), true);
            continue;
        }
        let length = manifest["config"]["grid"]["length"].as_f64().unwrap();
        let c_omega = (f64::max(2.0, 2.0 / length) + 1.0).sqrt();
        let rows = read_csv(&energy_csv);
        let worst_nu = rows.iter().map(|r| num(r, "nu") - c_omega * num(r, "energy").sqrt()).fold(f64::NEG_INFINITY, f64::max);
        c.le(format!("{name}: max nu - C sqrt(E) over {} rows", rows.len()), worst_nu, 0.0);
        let worst_drop = rows.windows(2).map(|w| num(&w[0], "energy") - num(&w[1], "energy")).fold(0.0, f64::max);
        c.le(format!("{name}: largest decrease of E between output steps"), worst_drop, 0.0);
    }
    c.holds(format!("{simulated} simulate scenarios checked"), simulated >= 3);
    Ok(c)
}

// ---------------------------------------------------------------- 10

fn without_timing(mut v: Value) -> Value {
    if let Some(obj) = v.as_object_mut() {
        obj.remove("timing");
    }
    v
}

fn determinism(first: &Path, second: &Path) -> kbkz::Result<Checks> {
    let mut c = Checks::default();
    for (name, path) in scenarios() {
        let (a, b) = (first.join(&name), second.join(&name));
        if !a.exists() {
            run_scenario(&name, &path, &a)?;
        }
        run_scenario(&name, &path, &b)?;
        let mut files: Vec<String> = fs::read_dir(&a)?
            .filter_map(|e| e.ok())
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .filter(|f| f != "manifest.json")
            .collect();
        files.sort();
        let identical = files.iter().all(|f| fs::read(a.join(f)).ok() == fs::read(b.join(f)).ok());
        let manifests = without_timing(read_json(&a.join("manifest.json"))) == without_timing(read_json(&b.join("manifest.json")));
        c.holds(format!("{name}: {} data files byte-identical: {identical}; manifests equal apart from timing: {manifests}", files.len()), identical && manifests);
    }
    Ok(c)
}

// ---------------------------------------------------------------- runner

fn main() {
    let work = tempfile::tempdir().expect("temporary directory");
    let (w7, w9, w10) = (work.path().join("c7"), work.path().join("c9"), work.path().join("c10"));
    type Criterion<'a> = (usize, &'a str, Option<Duration>, Box<dyn Fn() -> kbkz::Result<Checks> + 'a>);
    let criteria: Vec<Criterion> = vec![
        (1, "kernel constants", Some(Duration::from_secs(1)), Box::new(kernel_constants)),
        (2, "damping function", Some(Duration::from_secs(10)), Box::new(damping_function)),
        (3, "strong positivity", Some(Duration::from_secs(5)), Box::new(strong_positivity)),
        (4, "inversion", Some(Duration::from_secs(30)), Box::new(inversion)),
        (5, "Q-form", Some(Duration::from_secs(30)), Box::new(qform)),
        (6, "solver, linear regime", Some(Duration::from_secs(120)), Box::new(linear_solver)),
        (7, "solver, nonlinear small data", Some(Duration::from_secs(300)), Box::new(|| nonlinear_small_data(&w7))),
        (8, "reconstruction identity", Some(Duration::from_secs(60)), Box::new(reconstruction)),
        (9, "certificates", None, Box::new(|| certificates(&w9))),
        (10, "determinism", None, Box::new(|| determinism(&w9, &w10))),
    ];
    let mut failed = 0;
    for (id, name, limit, run) in &criteria {
        let started = Instant::now();
        let result = run();
        let elapsed = started.elapsed();
        let (mut checks, error) = match result {
            Ok(c) => (c, None),
            Err(e) => (Checks::default(), Some(e.to_string())),
        };
        if let Some(limit) = limit {
            checks.holds(format!("runtime {:.2} s (limit < {} s)", elapsed.as_secs_f64(), limit.as_secs()), elapsed < *limit);
        }
        let ok = error.is_none() && checks.0.iter().all(|(ok, _)| *ok);
        if !ok {
            failed += 1;
        }
        println!("criterion {id:>2} {name}: {} ({:.2} s)", if ok { "PASS" } else { "FAIL" }, elapsed.as_secs_f64());
        if let Some(e) = error {
            println!("    error: {e}");
        }
        for (ok, line) in &checks.0 {
            println!("    [{}] {line}", if *ok { "ok" } else { "x " });
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
