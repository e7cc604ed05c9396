//! Property tests for the kernel, transform, convolution, solver, energy and
//! configuration invariants.

use std::f64::consts::PI;

use proptest::prelude::*;

use kbkz::cli::RunConfig;
use kbkz::diagnostics::{energy_report, initial_energy, sobolev_constant, v0_measure};
use kbkz::kernels::{eval_g_de, Atom, DampingFunction, DampingModel, MeasureSpec, RelaxationKernel};
use kbkz::solver::{
    compute_stress, stable_dt, Forcing, InitialData, MemoryWeights, ShearState, Solver, SolverOptions, SpatialGrid,
    Termination,
};
use kbkz::spectral::{build_inversion, fourier_exact};
use kbkz::volterra::{convolve_kernel, derivative_identity_residual, invert, qform_kernel, relative_l2, TimeSignal};

fn atoms() -> impl Strategy<Value = Vec<Atom>> {
    prop::collection::vec((0.1f64..50.0, 0.01f64..2.0), 1..6)
        .prop_map(|v| v.into_iter().map(|(rate, weight)| Atom { rate, weight }).collect())
}

fn kernel_from(atoms: Vec<Atom>) -> RelaxationKernel {
    RelaxationKernel::new(MeasureSpec::from_atoms(atoms).unwrap(), None).unwrap()
}

/// Smooth signal `sum c_j sin(k_j t)` with w(0) = 0.
fn smooth_signal() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.0f64..1.0, 0.5f64..6.0), 1..4)
}

fn eval_signal(terms: &[(f64, f64)], t: f64) -> f64 {
    terms.iter().map(|(c, k)| c * (k * t).sin()).sum()
}

fn run_single_mode<'a>(
    kernel: &'a RelaxationKernel,
    damping: &'a DampingFunction,
    interior: usize,
    amplitude: f64,
    mode: u32,
    t_end: f64,
) -> (Solver<'a>, Termination, usize) {
    let grid = SpatialGrid::new(1.0, interior).unwrap();
    let steps = (t_end / stable_dt(&grid, kernel, damping, 0.5)).ceil() as usize;
    let mut solver = Solver::new(
        grid,
        kernel,
        damping,
        &InitialData::single_mode(amplitude, mode),
        Forcing::Zero,
        SolverOptions::new(t_end / steps as f64, steps),
    )
    .unwrap();
    let end = solver.run().unwrap();
    (solver, end, steps)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn atomic_kernels_are_totally_monotone(atoms in atoms(), e in -4.0f64..1.0) {
        let k = kernel_from(atoms);
        let t = 10f64.powf(e);
        for order in 0..=3usize {
            let sign = if order % 2 == 0 { 1.0 } else { -1.0 };
            prop_assert!(sign * k.eval(t, order).unwrap() >= 0.0);
        }
    }

    #[test]
    fn truncation_is_monotone(n1 in 10.0f64..1e4, ratio in 1.0f64..100.0, e in -6.0f64..1.0) {
        let t = 10f64.powf(e);
        let small = RelaxationKernel::doi_edwards(Some(n1)).unwrap();
        let large = RelaxationKernel::doi_edwards(Some(n1 * ratio)).unwrap();
        let full = RelaxationKernel::doi_edwards(None).unwrap();
        let (a1, a2, a3) = (small.eval(t, 0).unwrap(), large.eval(t, 0).unwrap(), full.eval(t, 0).unwrap());
        prop_assert!(a1 <= a2);
        prop_assert!(a2 <= a3 * (1.0 + 1e-14));
    }

    #[test]
    fn g_de_is_odd(y in -1.0f64..1.0) {
        prop_assert!((eval_g_de(y).unwrap() + eval_g_de(-y).unwrap()).abs() <= 1e-8);
    }

    #[test]
    fn g_de_slope_stays_within_the_lipschitz_bound(s in -1.0f64..1.0) {
        let g = DampingFunction::doi_edwards().unwrap();
        let y = s * g.theta();
        prop_assert!((g.d1(y) - g.d1(0.0)).abs() <= g.k() * y * y + 1e-12);
        prop_assert!(g.d1(y) <= -g.gamma() + 1e-12);
    }

    #[test]
    fn transform_is_the_atomic_closed_form(atoms in atoms(), omega in -1e3f64..1e3) {
        let k = kernel_from(atoms.clone());
        let fa = fourier_exact(&k, omega);
        let (mut re, mut im) = (0.0, 0.0);
        for a in &atoms {
            let d = a.rate * a.rate + omega * omega;
            re += a.weight * a.rate / d;
            im -= a.weight * omega / d;
        }
        prop_assert!(fa.re > 0.0);
        prop_assert!((fa.re - re).abs() <= 1e-12 * re);
        prop_assert!((fa.im - im).abs() <= 1e-12 * (re + im.abs()));
    }

    #[test]
    fn qform_is_nonnegative(atoms in atoms(), samples in prop::collection::vec(-1.0f64..1.0, 2..400)) {
        let k = kernel_from(atoms);
        let w = TimeSignal::new(2e-3, samples).unwrap();
        prop_assert!(qform_kernel(&w, &k) >= -1e-12);
    }

    #[test]
    fn memory_weights_integrate_the_slope(atoms in atoms(), dt in 1e-3f64..0.05, k in 1usize..200) {
        let kernel = kernel_from(atoms);
        let w = MemoryWeights::new(&kernel, dt, k);
        let total = w.weight_sum(k) + w.alpha(0);
        let exact = kernel.eval(k as f64 * dt, 0).unwrap() - kernel.a0();
        prop_assert!((total - exact).abs() <= 1e-12 * kernel.a0());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn inversion_recovers_smooth_signals_at_second_order(terms in smooth_signal(), n in prop::sample::select(vec![25.0, 100.0])) {
        let k = RelaxationKernel::doi_edwards(Some(n)).unwrap();
        let mut errors = Vec::new();
        for dt in [4e-3, 2e-3] {
            let steps = (1.0 / dt) as usize;
            let w = TimeSignal::from_fn(dt, steps, |t| eval_signal(&terms, t));
            let op = build_inversion(&k, None, dt, 1.0).unwrap();
            let back = invert(&op, &convolve_kernel(&k, &w)).unwrap().w;
            errors.push(relative_l2(&back, &w).unwrap());
        }
        prop_assert!(errors[1] <= 1e-2);
        prop_assert!(errors[1] <= errors[0] / 3.0, "errors {errors:?}");
    }

    #[test]
    fn derivative_identity_is_second_order(atoms in atoms(), terms in smooth_signal()) {
        let k = kernel_from(atoms);
        let res: Vec<f64> = [2e-3, 1e-3]
            .iter()
            .map(|&dt| derivative_identity_residual(&k, &TimeSignal::from_fn(dt, (1.0 / dt) as usize, |t| eval_signal(&terms, t))))
            .collect();
        prop_assert!(res[1] <= res[0] / 3.0 || res[1] <= 1e-10, "residuals {res:?}");
    }

    #[test]
    fn small_runs_keep_the_energy_invariants(
        amplitude in 1e-4f64..5e-2,
        mode in 1u32..4,
        interior in 12usize..40,
        de_damping in any::<bool>(),
    ) {
        let kernel = RelaxationKernel::doi_edwards(Some(100.0)).unwrap();
        let damping = if de_damping {
            DampingFunction::doi_edwards().unwrap()
        } else {
            DampingFunction::new(DampingModel::Polynomial(vec![0.0, -1.0, 0.0, 0.3])).unwrap()
        };
        let (solver, end, steps) = run_single_mode(&kernel, &damping, interior, amplitude, mode, 0.5);
        prop_assert!(matches!(end, Termination::Completed));
        let state = solver.state();
        let n = state.grid().nodes();
        for k in 0..=steps {
            let v = state.velocity(k);
            prop_assert!(v[0] == 0.0 && v[n - 1] == 0.0);
        }
        for k in 0..steps {
            let (u0, u1) = (state.displacement(k), state.displacement(k + 1));
            let (v0, v1) = (state.velocity(k), state.velocity(k + 1));
            for i in 0..n {
                prop_assert!(u1[i] == u0[i] + 0.5 * state.dt() * (v0[i] + v1[i]));
            }
        }
        let c = sobolev_constant(1.0);
        let outputs: Vec<usize> = (0..=steps).collect();
        let report = energy_report(state, &kernel, &damping, c, &outputs).unwrap();
        prop_assert!(report.rows.windows(2).all(|w| w[1].energy >= w[0].energy));
        let mut small_so_far = true;
        for row in &report.rows {
            prop_assert!(row.nu <= c * row.energy.sqrt());
            prop_assert!(row.sup_strain <= c * row.energy.sqrt());
            small_so_far &= row.flags.smallness_ok;
            if small_so_far {
                prop_assert!(row.flags.hyperbolicity_ok);
            }
        }
        prop_assert!(report.energy_at_zero <= report.e0_bound + 1e-6);
    }

    #[test]
    fn zero_history_stays_zero_with_zero_stress(interior in 8usize..40, steps in 3usize..40) {
        let kernel = RelaxationKernel::doi_edwards(Some(100.0)).unwrap();
        let damping = DampingFunction::doi_edwards().unwrap();
        let grid = SpatialGrid::new(1.0, interior).unwrap();
        let dt = stable_dt(&grid, &kernel, &damping, 0.5);
        let mut solver = Solver::new(grid, &kernel, &damping, &InitialData::zero(), Forcing::Zero, SolverOptions::new(dt, steps)).unwrap();
        prop_assert!(matches!(solver.run().unwrap(), Termination::Completed));
        let state: &ShearState = solver.state();
        prop_assert!(state.velocities().iter().flatten().all(|x| *x == 0.0));
        let w = MemoryWeights::new(&kernel, dt, steps);
        prop_assert!(compute_stress(state, &w, &damping, steps).sigma.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn data_measures_scale_quadratically(scale in 0.01f64..10.0, amplitude in 1e-3f64..1.0, mode in 1u32..5) {
        let grid = SpatialGrid::new(1.0, 63).unwrap();
        let v0: Vec<f64> = grid.positions().iter().map(|x| amplitude * (mode as f64 * PI * x).sin()).collect();
        let scaled: Vec<f64> = v0.iter().map(|v| scale * v).collect();
        let zero = vec![0.0; v0.len()];
        let (m, ms) = (v0_measure(&grid, &v0), v0_measure(&grid, &scaled));
        prop_assert!((ms - scale * scale * m).abs() <= 1e-12 * ms);
        let (e, es) = (
            initial_energy(&grid, &v0, &zero, &zero, 0.2, -2.5),
            initial_energy(&grid, &scaled, &zero, &zero, 0.2, -2.5),
        );
        prop_assert!((es - scale * scale * e).abs() <= 1e-12 * es);
    }

    #[test]
    fn config_round_trips(
        length in 0.1f64..10.0,
        interior in 8usize..200,
        rate in 0.1f64..100.0,
        weight in 0.01f64..10.0,
        slope in -5.0f64..-0.01,
        t_end in 0.1f64..10.0,
        probe in 0.01f64..0.99,
        seed in any::<u64>(),
    ) {
        let text = format!(
            "seed = {seed}\n\n[kernel]\nfamily = \"exponential\"\nrate = {rate:?}\nweight = {weight:?}\n\n\
             [damping]\nkind = \"linear\"\nslope = {slope:?}\n\n[grid]\nlength = {length:?}\ninterior = {interior}\n\n\
             [time]\nt_end = {t_end:?}\n\n[initial]\nkind = \"single-mode\"\namplitude = 0.01\nmode = 1\n\n\
             [output]\nprobes = [{:?}]\nsnapshot_times = [{t_end:?}]\n",
            probe * length
        );
        let cfg = RunConfig::from_toml(&text).unwrap();
        let again = RunConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        prop_assert_eq!(cfg, again);
    }
}
