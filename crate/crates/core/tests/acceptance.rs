//! Acceptance suite: one test per verification criterion, each ending with
//! an explicit pass line (visible with `--nocapture`). The Monte-Carlo items
//! run on the collapsed fast path with seeded, worker-count-independent
//! streams, so every number here is reproducible.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qshift_core::channels::{
    compose_shifts, compose_shifts_sequential, conjugation_residual, shift, ShiftParam,
};
use qshift_core::density::{trace_distance_pure, KernelPoint, PureDensity};
use qshift_core::experiments::{
    presets, run_experiment, CompositionMode, ExperimentConfig, PacketSpec, ProbeSpec,
    ProbeVerdict, TheoremTag, Tolerances,
};
use qshift_core::grid::{Domain, GridSpec, WaveFunction};
use qshift_core::sources::{DistributionSpec, SeedPolicy};

fn preset(name: &str) -> ExperimentConfig {
    presets().into_iter().find(|(n, _)| n == name).unwrap_or_else(|| panic!("preset {name}")).1
}

fn run_preset(name: &str) -> qshift_core::experiments::ConvergenceReport {
    let cfg = preset(name);
    run_experiment(&cfg, cfg.seed_policy.master_seed).unwrap()
}

fn random_wave(grid: GridSpec, seed: u64) -> WaveFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = (0..grid.len())
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    WaveFunction::new(grid, Domain::Position, samples).unwrap()
}

fn unit_packet(grid: GridSpec) -> WaveFunction {
    WaveFunction::gaussian_packet(grid, &[0.0], 1.0).unwrap().normalized().unwrap()
}

#[test]
fn criterion_01_fourier_shift_phase_identity() {
    // F ρ[S_a u] F^{-1}(α,β) = e^{i a (α-β)} ρ[Fu](α,β) on a 16x16
    // frequency subsample, 20 random shifts, d=1, L=16, N=1024
    let grid = GridSpec::new(1, 16.0, 1024).unwrap();
    let u = unit_packet(grid);
    let rho0 = PureDensity::new(u.clone()).unwrap();
    let da = grid.freq_spacing();
    let ms: Vec<i64> = (0..16).map(|k| -512 + 64 * k).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(2026_01);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let a = rng.random_range(-2.0..2.0);
        let moved = shift(&u, &ShiftParam::new(vec![a]).unwrap()).unwrap();
        let rho_a = PureDensity::new(moved).unwrap();
        for &ma in &ms {
            for &mb in &ms {
                let p = KernelPoint::new(vec![ma as f64 * da], vec![mb as f64 * da]);
                let lhs = rho_a.fourier_kernel_at(&p).unwrap();
                let phase = Complex64::from_polar(1.0, a * (ma - mb) as f64 * da);
                let rhs = phase * rho0.fourier_kernel_at(&p).unwrap();
                worst = worst.max((lhs - rhs).norm());
            }
        }
    }
    assert!(worst < 1e-9, "max residual {worst:.3e}");
    println!("[PASS] criterion 01: shift-phase kernel identity, max residual {worst:.3e}");
}

#[test]
fn criterion_02_group_collapse_and_unitarity_drift() {
    let grid = GridSpec::new(1, 16.0, 1024).unwrap();
    let u = unit_packet(grid);
    let mut rng = ChaCha8Rng::seed_from_u64(2026_02);
    let shifts: Vec<ShiftParam> =
        (0..100).map(|_| ShiftParam::new(vec![rng.random_range(-0.05..0.05)]).unwrap()).collect();

    // unitarity drift along the sequential application
    let mut v = u.clone();
    for (i, s) in shifts.iter().rev().enumerate() {
        v = shift(&v, s).unwrap();
        let drift = (v.norm() - 1.0).abs();
        assert!(drift < 1e-12 * (i + 2) as f64, "drift {drift:.3e} after {} shifts", i + 1);
    }

    let collapsed = compose_shifts(&u, &shifts).unwrap();
    let sequential = compose_shifts_sequential(&u, &shifts).unwrap();
    let sup = collapsed.sup_distance(&sequential).unwrap();
    assert!(sup < 1e-9, "sup difference {sup:.3e}");
    println!("[PASS] criterion 02: group collapse, sup difference {sup:.3e}");
}

#[test]
fn criterion_03_trace_norm_bound_ten_thousand_pairs() {
    let grid = GridSpec::new(1, 6.0, 256).unwrap();
    let mut worst_violation = f64::NEG_INFINITY;
    for seed in 0..10_000u64 {
        let a = random_wave(grid, 30_000 + seed).normalized().unwrap();
        let b = random_wave(grid, 80_000 + seed).normalized().unwrap();
        let td = trace_distance_pure(&a, &b).unwrap();
        let bound = 2.0 * a.distance(&b).unwrap();
        worst_violation = worst_violation.max(td - bound);
    }
    assert!(worst_violation <= 1e-12, "violation {worst_violation:.3e}");
    println!(
        "[PASS] criterion 03: trace-norm bound on 10^4 pairs, worst slack {worst_violation:.3e}"
    );
}

#[test]
fn criterion_04_slln_kernel_and_wot_decay() {
    // Rademacher(±1)+0.3, Gaussian packet; median path error at n=10^4 at
    // least 5x below n=10^2 and under 0.02 for kernel(0,0) and the
    // half-line indicator
    for (name, probe_idx) in [("slln_kernel", 0usize), ("slln_wot", 0usize)] {
        let report = run_preset(name);
        assert!(report.passed, "{name} failed: {report:?}");
        let probe = &report.probes[probe_idx];
        let med_first = probe.rows.first().unwrap().error.unwrap();
        let med_last = probe.rows.last().unwrap().error.unwrap();
        assert!(med_last < 0.02, "{name}: final median {med_last}");
        assert!(
            med_first >= 5.0 * med_last,
            "{name}: decay {med_first} -> {med_last} below 5x"
        );
        println!(
            "[PASS] criterion 04 ({name}): median error {med_first:.4} -> {med_last:.4} \
             (factor {:.1})",
            med_first / med_last
        );
    }
}

#[test]
fn criterion_05_clt_kernel_mean_clause() {
    // M=20000 replicas, n=400, Σ=1, probe (α,β)=(1,-1): the 99% CI of the
    // replica mean covers e^{-2}·ρ[Fu](1,-1)
    let started = std::time::Instant::now();
    let mut cfg = preset("clt_kernel");
    cfg.replicas = 20_000;
    let report = run_experiment(&cfg, 202_605).unwrap();
    let probe = &report.probes[0];
    let row = probe.rows.last().unwrap();
    assert_eq!(row.mean_covered, Some(true), "CI does not cover the damped target: {row:?}");

    // the analytic target agrees with the closed form for the unit packet:
    // e^{-2}·Fu(1)·Fu(-1) = e^{-2}·π^{-1/2}e^{-1}
    let target = probe.target.unwrap();
    let closed = std::f64::consts::PI.powf(-0.5) * (-3.0f64).exp();
    assert!((target.re - closed).abs() < 1e-6, "target {} vs closed form {closed}", target.re);
    assert!(target.im.abs() < 1e-9);

    // damping has modulus at most 1: replica mean cannot exceed the
    // undamped kernel value beyond noise
    let summary = row.summary.as_ref().unwrap();
    let undamped = closed * (2.0f64).exp();
    assert!(summary.mean.norm() <= undamped + 3.0 * summary.std_error);

    assert!(report.passed);
    println!(
        "[PASS] criterion 05: mean clause covered, |mean - target| = {:.2e} ({:.0?})",
        row.error.unwrap(),
        started.elapsed()
    );
}

fn clt_rep_config(theorem: TheoremTag, probes: Vec<ProbeSpec>) -> ExperimentConfig {
    ExperimentConfig {
        theorem,
        grid: GridSpec::new(1, 4.0 * std::f64::consts::PI, 512).unwrap(),
        initial_state: PacketSpec::Gaussian { center: vec![0.0], width: 1.0 },
        distribution: DistributionSpec::uniform_unit_variance_1d(),
        n_schedule: vec![400],
        replicas: 5000,
        probes,
        times: None,
        seed_policy: SeedPolicy::new(0),
        tolerances: Tolerances::default(),
        composition: CompositionMode::Collapsed,
    }
}

#[test]
fn criterion_06_clt_distributional_repetitions() {
    // KS at the 1% level between n=400 compositions and S_η references,
    // M=5000 each, must pass in at least 48 of 50 seeded repetitions for
    // the kernel value (re and im) and the projector trace
    let started = std::time::Instant::now();
    let kernel_cfg = clt_rep_config(
        TheoremTag::CltKernel,
        vec![ProbeSpec::FourierKernelPoint { alpha: vec![1.0], beta: vec![-1.0] }],
    );
    let trace_cfg = clt_rep_config(TheoremTag::CltWot, vec![ProbeSpec::InitialProjector]);

    let mut kernel_re = 0;
    let mut kernel_im = 0;
    let mut trace_re = 0;
    for rep in 0..50u64 {
        let report = run_experiment(&kernel_cfg, 600 + rep).unwrap();
        let row = report.probes[0].rows.last().unwrap().clone();
        if row.ks_re.unwrap().p_value >= 0.01 {
            kernel_re += 1;
        }
        if row.ks_im.unwrap().p_value >= 0.01 {
            kernel_im += 1;
        }

        let report = run_experiment(&trace_cfg, 6600 + rep).unwrap();
        let row = report.probes[0].rows.last().unwrap().clone();
        if row.ks_re.unwrap().p_value >= 0.01 {
            trace_re += 1;
        }
    }
    assert!(kernel_re >= 48, "kernel re passes: {kernel_re}/50");
    assert!(kernel_im >= 48, "kernel im passes: {kernel_im}/50");
    assert!(trace_re >= 48, "trace passes: {trace_re}/50");
    println!(
        "[PASS] criterion 06: KS repetitions {kernel_re}/{kernel_im}/{trace_re} of 50 \
         (kernel re/im, trace) ({:.0?})",
        started.elapsed()
    );
}

#[test]
fn criterion_07_clt_wot_mean_comparison() {
    // Welch-style two-sample mean comparison, composition vs η-reference,
    // not rejected at 1% with M=5000
    let cfg = clt_rep_config(TheoremTag::CltWot, vec![ProbeSpec::InitialProjector]);
    let report = run_experiment(&cfg, 202_607).unwrap();
    let row = report.probes[0].rows.last().unwrap();
    let mean_test = row.mean_test.unwrap();
    assert!(
        mean_test.p_value >= 0.01,
        "mean comparison rejected: z = {}, p = {}",
        mean_test.z,
        mean_test.p_value
    );
    assert!(report.passed);
    println!(
        "[PASS] criterion 07: mean comparison z = {:.3}, p = {:.3}",
        mean_test.z, mean_test.p_value
    );
}

#[test]
fn criterion_08_random_walk_marginals() {
    // marginal KS at t ∈ {0.25, 0.5, 1} between the polygonal line
    // (n=2000, M=2000) and tr(ρ[S_w(t)·u]A) references at the 1% level; the
    // t=1 marginal additionally matches an independent Σ=1 limit reference
    let started = std::time::Instant::now();
    let report = run_preset("random_walk");
    assert!(report.passed, "walk report failed");
    for probe in &report.probes {
        assert_eq!(probe.rows.len(), 3);
        for row in &probe.rows {
            assert_eq!(row.pass, Some(true), "t = {:?} failed: {row:?}", row.t);
            if let Some(ks) = row.ks_re {
                assert!(ks.p_value >= 0.01, "t = {:?}: p = {}", row.t, ks.p_value);
            }
        }
        assert!(!probe.extra_ks.is_empty(), "missing t=1 limit cross-check");
        for extra in &probe.extra_ks {
            assert!(extra.pass, "{}: p = {}", extra.label, extra.ks.p_value);
        }
        assert_eq!(probe.increments.len(), 2, "increments are recorded");
    }
    println!(
        "[PASS] criterion 08: walk marginals at t = 0.25/0.5/1 and the Σ=1 cross-check \
         ({:.0?})",
        started.elapsed()
    );
}

#[test]
fn criterion_09_l1_decay_and_uniform_bound() {
    // E|Δ_n| at n=10^4 under one fifth of its n=10^2 value (M=2000 per n),
    // and every |Δ_n| within 2‖A‖
    let report = run_preset("l1_wot");
    assert!(report.passed);
    let probe = &report.probes[0];
    let first = probe.rows.first().unwrap().error.unwrap();
    let last = probe.rows.last().unwrap().error.unwrap();
    assert!(last < first / 5.0, "E|Δ| decay {first} -> {last} below 5x");
    for row in &probe.rows {
        assert!(row.max_abs.unwrap() <= 2.0 + 1e-12, "uniform bound violated: {row:?}");
    }
    println!(
        "[PASS] criterion 09: E|Δ| {first:.4} -> {last:.4} (factor {:.1}), bound respected",
        first / last
    );
}

#[test]
fn criterion_10_impulse_conjugation_and_duality() {
    // conjugation residual under 1e-10 on 100 random (u, a)
    let grid = GridSpec::new(1, 16.0, 1024).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2026_10);
    let mut worst = 0.0f64;
    for seed in 0..100u64 {
        let u = random_wave(grid, 50_000 + seed);
        let a = rng.random_range(-3.0..3.0);
        worst = worst.max(conjugation_residual(&u, &[a]).unwrap());
    }
    assert!(worst < 1e-10, "max conjugation residual {worst:.3e}");

    // Fourier duality: the impulse run on u with frequency-kernel probes
    // matches a shift run on the dual grid with Fu as the packet and the
    // negated law, probe for probe
    let freq_grid = GridSpec::new(1, 4.0 * std::f64::consts::PI, 1024).unwrap();
    let impulse_cfg = ExperimentConfig {
        theorem: TheoremTag::ImpulseSlln,
        grid: freq_grid,
        initial_state: PacketSpec::Gaussian { center: vec![0.0], width: 1.0 },
        distribution: DistributionSpec::rademacher_1d(0.3),
        n_schedule: vec![100, 1000, 10_000],
        replicas: 50,
        probes: vec![
            ProbeSpec::FourierKernelPoint { alpha: vec![1.0], beta: vec![-1.0] },
            ProbeSpec::FourierKernelPoint { alpha: vec![0.5], beta: vec![-0.75] },
            ProbeSpec::HalfspaceIndicator { axis: 0, threshold: 0.0 },
        ],
        times: None,
        seed_policy: SeedPolicy::new(1010),
        tolerances: Tolerances::default(),
        composition: CompositionMode::Collapsed,
    };

    // dual packet: Fu rearranged to monotone order as position samples on
    // the dual grid (half-width Δα·N/2, spacing Δα)
    let u = unit_packet(freq_grid);
    let fu = u.fourier().unwrap();
    let n = freq_grid.points();
    let dual_half = freq_grid.freq_spacing() * (n / 2) as f64;
    let dual_grid = GridSpec::new(1, dual_half, n).unwrap();
    let dual_samples: Vec<[f64; 2]> = (0..n)
        .map(|k| {
            let z = fu.samples()[(k + n / 2) % n];
            [z.re, z.im]
        })
        .collect();
    let dir = tempfile::tempdir().unwrap();
    let packet_path = dir.path().join("dual_packet.json");
    std::fs::write(&packet_path, serde_json::to_string(&dual_samples).unwrap()).unwrap();

    let dual_cfg = ExperimentConfig {
        theorem: TheoremTag::SllnKernel,
        grid: dual_grid,
        initial_state: PacketSpec::SampleFile { path: packet_path.display().to_string() },
        distribution: DistributionSpec::rademacher_1d(0.3).negated(),
        n_schedule: vec![100, 1000, 10_000],
        replicas: 50,
        probes: vec![
            ProbeSpec::KernelPoint { x: vec![1.0], y: vec![-1.0] },
            ProbeSpec::KernelPoint { x: vec![0.5], y: vec![-0.75] },
        ],
        times: None,
        seed_policy: SeedPolicy::new(1011),
        tolerances: Tolerances::default(),
        composition: CompositionMode::Collapsed,
    };

    let impulse_report = run_experiment(&impulse_cfg, 1010).unwrap();
    let dual_report = run_experiment(&dual_cfg, 1011).unwrap();
    assert!(impulse_report.passed, "impulse run failed");
    assert!(dual_report.passed, "dual shift run failed");

    // multiplication probes under impulse are flagged, not passed
    assert_eq!(impulse_report.probes[2].verdict, ProbeVerdict::Vacuous);

    for pi in 0..2 {
        let a = &impulse_report.probes[pi];
        let b = &dual_report.probes[pi];
        let ta = a.target.unwrap();
        let tb = b.target.unwrap();
        assert!((ta - tb).norm() < 1e-9, "probe {pi}: targets {ta} vs {tb}");

        // medians over 50 independent seeds agree within a 3-sigma band
        // built from the interquartile ranges
        let ra = a.rows.last().unwrap();
        let rb = b.rows.last().unwrap();
        let med_a = ra.error.unwrap();
        let med_b = rb.error.unwrap();
        let iqr = |row: &qshift_core::experiments::ProbeRow| {
            let q = &row.summary.as_ref().unwrap().quantiles;
            q[3] - q[1]
        };
        let tol = 3.0 * (iqr(ra) + iqr(rb)) / (impulse_cfg.replicas as f64).sqrt() + 1e-9;
        assert!(
            (med_a - med_b).abs() <= tol,
            "probe {pi}: medians {med_a} vs {med_b}, tolerance {tol}"
        );
    }
    println!(
        "[PASS] criterion 10: conjugation residual {worst:.2e}, duality medians agree, \
         vacuous probe flagged"
    );
}
