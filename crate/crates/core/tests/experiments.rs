//! End-to-end runner behavior on small configurations: trivial laws,
//! fast-path validation, determinism across worker counts, and vacuous-probe
//! flagging.

use num_complex::Complex64;
use qshift_core::experiments::{
    run_experiment, CompositionMode, ExperimentConfig, PacketSpec, ProbeSpec, ProbeVerdict,
    TheoremTag, Tolerances,
};
use qshift_core::grid::GridSpec;
use qshift_core::sources::{DistributionSpec, SeedPolicy};

fn small_grid() -> GridSpec {
    GridSpec::new(1, 16.0, 256).unwrap()
}

fn freq_grid() -> GridSpec {
    GridSpec::new(1, 4.0 * std::f64::consts::PI, 256).unwrap()
}

fn base_cfg(theorem: TheoremTag, grid: GridSpec) -> ExperimentConfig {
    ExperimentConfig {
        theorem,
        grid,
        initial_state: PacketSpec::Gaussian { center: vec![0.0], width: 1.0 },
        distribution: DistributionSpec::rademacher_1d(0.3),
        n_schedule: vec![100, 1000],
        replicas: 20,
        probes: vec![ProbeSpec::KernelPoint { x: vec![0.0], y: vec![0.0] }],
        times: None,
        seed_policy: SeedPolicy::new(1),
        tolerances: Tolerances::default(),
        composition: CompositionMode::Collapsed,
    }
}

#[test]
fn deterministic_law_gives_zero_errors() {
    let mut cfg = base_cfg(TheoremTag::SllnKernel, small_grid());
    cfg.distribution =
        DistributionSpec::FiniteDiscrete { atoms: vec![vec![0.3]], probs: vec![1.0] };
    cfg.replicas = 5;
    let report = run_experiment(&cfg, 7).unwrap();
    assert!(report.passed);
    for probe in &report.probes {
        for row in &probe.rows {
            assert!(row.error.unwrap() < 1e-10, "error {:?}", row.error);
        }
    }
}

#[test]
fn slln_kernel_target_is_the_shifted_density() {
    let cfg = base_cfg(TheoremTag::SllnKernel, small_grid());
    let report = run_experiment(&cfg, 7).unwrap();
    // kernel(0,0) of ρ[S_{0.3} u] is |u(0.3)|² = π^{-1/2} e^{-0.09}
    let expected = std::f64::consts::PI.powf(-0.5) * (-0.09f64).exp();
    let target = report.probes[0].target.unwrap();
    assert!((target.re - expected).abs() < 1e-9, "target {target}");
    assert!(target.im.abs() < 1e-12);
    // errors must shrink along the schedule
    let first = report.probes[0].rows[0].error.unwrap();
    let last = report.probes[0].rows[1].error.unwrap();
    assert!(last < first, "no decay: {first} -> {last}");
}

#[test]
fn sequential_composition_matches_collapsed_fast_path() {
    for theorem in [TheoremTag::SllnKernel, TheoremTag::ImpulseSlln] {
        let grid = small_grid();
        let mut cfg = base_cfg(theorem, grid);
        cfg.n_schedule = vec![10, 100];
        cfg.replicas = 5;
        if theorem == TheoremTag::ImpulseSlln {
            cfg.probes = vec![
                ProbeSpec::KernelPoint { x: vec![0.5], y: vec![-1.0] },
                ProbeSpec::InitialProjector,
            ];
        }
        let fast = run_experiment(&cfg, 11).unwrap();
        cfg.composition = CompositionMode::Sequential;
        let slow = run_experiment(&cfg, 11).unwrap();
        for (pf, ps) in fast.probes.iter().zip(&slow.probes) {
            for (rf, rs) in pf.rows.iter().zip(&ps.rows) {
                let ef = rf.error.unwrap();
                let es = rs.error.unwrap();
                assert!((ef - es).abs() < 1e-9, "{theorem:?}: {ef} vs {es}");
                let mf = rf.summary.as_ref().unwrap().mean;
                let ms = rs.summary.as_ref().unwrap().mean;
                assert!((mf - ms).norm() < 1e-9);
            }
        }
    }
}

#[test]
fn identical_seeds_are_bitwise_reproducible_across_worker_counts() {
    let mut cfg = base_cfg(TheoremTag::CltWot, small_grid());
    cfg.distribution = DistributionSpec::uniform_unit_variance_1d();
    cfg.n_schedule = vec![50];
    cfg.replicas = 64;
    cfg.probes = vec![
        ProbeSpec::InitialProjector,
        ProbeSpec::HalfspaceIndicator { axis: 0, threshold: 0.0 },
    ];

    let run_with = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| run_experiment(&cfg, 99).unwrap().to_json().unwrap())
    };
    let single = run_with(1);
    let eight = run_with(8);
    assert_eq!(single, eight);
}

#[test]
fn report_round_trips_through_json() {
    let mut cfg = base_cfg(TheoremTag::SllnWot, small_grid());
    cfg.probes = vec![ProbeSpec::HalfspaceIndicator { axis: 0, threshold: 0.0 }];
    cfg.replicas = 8;
    let report = run_experiment(&cfg, 3).unwrap();
    let json = report.to_json().unwrap();
    let back = qshift_core::experiments::ConvergenceReport::from_json(&json).unwrap();
    assert_eq!(back, report);
}

#[test]
fn vacuous_probes_are_flagged_not_passed() {
    // multiplication operators under the impulse channel
    let mut cfg = base_cfg(TheoremTag::ImpulseSlln, freq_grid());
    cfg.probes = vec![
        ProbeSpec::HalfspaceIndicator { axis: 0, threshold: 0.0 },
        ProbeSpec::InitialProjector,
    ];
    cfg.replicas = 8;
    // errors shrink like n^{-1/2}, so a 100 -> 1000 schedule supports a
    // decay factor of about sqrt(10); the default 5 needs a wider schedule
    cfg.tolerances.decay_factor = 2.0;
    let report = run_experiment(&cfg, 5).unwrap();
    assert_eq!(report.probes[0].verdict, ProbeVerdict::Vacuous);
    assert!(report.probes[0].vacuous_reason.is_some());
    assert_eq!(report.probes[1].verdict, ProbeVerdict::Pass);
    assert!(report.passed);

    // frequency-diagonal kernel under the shift channel
    let mut cfg = base_cfg(TheoremTag::CltKernel, freq_grid());
    cfg.distribution = DistributionSpec::uniform_unit_variance_1d();
    cfg.n_schedule = vec![50];
    cfg.replicas = 100;
    cfg.probes = vec![
        ProbeSpec::FourierKernelPoint { alpha: vec![1.0], beta: vec![1.0] },
        ProbeSpec::FourierKernelPoint { alpha: vec![1.0], beta: vec![-1.0] },
    ];
    let report = run_experiment(&cfg, 6).unwrap();
    assert_eq!(report.probes[0].verdict, ProbeVerdict::Vacuous);
    assert_ne!(report.probes[1].verdict, ProbeVerdict::Vacuous);

    // a run with only vacuous probes verifies nothing and must not pass
    cfg.probes = vec![ProbeSpec::FourierKernelPoint { alpha: vec![1.0], beta: vec![1.0] }];
    let report = run_experiment(&cfg, 6).unwrap();
    assert!(!report.passed);
}

#[test]
fn clt_kernel_mean_matches_damped_target_on_a_small_run() {
    let mut cfg = base_cfg(TheoremTag::CltKernel, freq_grid());
    cfg.distribution = DistributionSpec::uniform_unit_variance_1d();
    cfg.n_schedule = vec![100];
    cfg.replicas = 800;
    cfg.probes = vec![ProbeSpec::FourierKernelPoint { alpha: vec![1.0], beta: vec![-1.0] }];
    let report = run_experiment(&cfg, 12).unwrap();
    let probe = &report.probes[0];
    assert_eq!(probe.verdict, ProbeVerdict::Pass, "rows: {:?}", probe.rows);

    // the damping factor has modulus at most one, so the replica mean cannot
    // exceed the undamped kernel by more than noise
    let row = probe.rows.last().unwrap();
    let summary = row.summary.as_ref().unwrap();
    let undamped = probe.target.unwrap().norm() * (2.0f64).exp(); // damping e^{-2} removed
    assert!(summary.mean.norm() <= undamped + 3.0 * summary.std_error + 1e-12);
}

#[test]
fn l1_deltas_respect_the_uniform_operator_bound() {
    let mut cfg = base_cfg(TheoremTag::L1Wot, small_grid());
    cfg.probes = vec![ProbeSpec::HalfspaceIndicator { axis: 0, threshold: 0.0 }];
    cfg.n_schedule = vec![20, 200];
    cfg.replicas = 50;
    let report = run_experiment(&cfg, 13).unwrap();
    for row in &report.probes[0].rows {
        // ‖indicator‖ = 1, so |Δ| ≤ 2
        assert!(row.max_abs.unwrap() <= 2.0 + 1e-12);
    }
    let first = report.probes[0].rows[0].error.unwrap();
    let last = report.probes[0].rows[1].error.unwrap();
    assert!(last < first);
}

#[test]
fn walk_rows_cover_requested_times_and_t0_is_trivial() {
    let mut cfg = base_cfg(TheoremTag::RandomWalk, small_grid());
    cfg.distribution = DistributionSpec::uniform_unit_variance_1d();
    cfg.n_schedule = vec![64];
    cfg.replicas = 60;
    cfg.times = Some(vec![0.0, 0.5, 1.0]);
    cfg.probes = vec![ProbeSpec::HalfspaceIndicator { axis: 0, threshold: 0.0 }];
    let report = run_experiment(&cfg, 14).unwrap();
    let probe = &report.probes[0];
    assert_eq!(probe.rows.len(), 3);
    // t = 0 is the empty composition on both sides
    let row0 = &probe.rows[0];
    assert_eq!(row0.t, Some(0.0));
    assert_eq!(row0.pass, Some(true));
    assert!(row0.ks_re.is_none(), "t=0 marginal is degenerate-equal, not KS-tested");
    // the t = 1 marginal is additionally compared against an independent
    // Gaussian-limit reference
    assert!(!probe.extra_ks.is_empty());
    // increments recorded for adjacent pairs
    assert_eq!(probe.increments.len(), 2);
}

#[test]
fn wraparound_excursions_are_counted() {
    let mut cfg = base_cfg(TheoremTag::SllnWot, GridSpec::new(1, 8.0, 256).unwrap());
    // the width-1 packet density has sigma 1/sqrt(2); displacing its center
    // to -4 puts the 6-sigma support past the edge of the [-8, 8) box
    cfg.distribution = DistributionSpec::rademacher_1d(4.0);
    cfg.probes = vec![ProbeSpec::HalfspaceIndicator { axis: 0, threshold: 0.0 }];
    cfg.n_schedule = vec![50];
    cfg.replicas = 10;
    let report = run_experiment(&cfg, 15).unwrap();
    assert!(report.wraparound_warnings > 0);
}

#[test]
fn evaluated_states_stay_normalized() {
    let cfg = base_cfg(TheoremTag::SllnKernel, small_grid());
    let report = run_experiment(&cfg, 16).unwrap();
    assert!(report.max_norm_drift < 1e-9);
    assert!(report.evaluations > 0);
}

#[test]
fn zero_mean_law_on_a_diagonal_kernel_converges_at_the_root_n_scale() {
    // symmetric zero-mean law, position-diagonal probe: errors vanish and
    // the final median stays within 10x of the law's n^{-1/2} scale
    let mut cfg = base_cfg(TheoremTag::SllnKernel, small_grid());
    cfg.distribution = DistributionSpec::uniform_unit_variance_1d();
    cfg.n_schedule = vec![100, 10_000];
    cfg.replicas = 20;
    cfg.probes = vec![ProbeSpec::KernelPoint { x: vec![0.5], y: vec![0.5] }];
    let report = run_experiment(&cfg, 18).unwrap();
    let last = report.probes[0].rows.last().unwrap().error.unwrap();
    let scale = 1.0 / (10_000f64).sqrt();
    assert!(last < 10.0 * scale, "median {last} vs scale {scale}");
    assert!(report.passed);
}

#[test]
fn two_dimensional_runs_work_end_to_end() {
    let grid = GridSpec::new(2, 8.0, 64).unwrap();
    let mut cfg = base_cfg(TheoremTag::SllnWot, grid);
    cfg.initial_state = PacketSpec::Gaussian { center: vec![0.0, 0.0], width: 1.0 };
    cfg.distribution = DistributionSpec::RademacherProduct {
        scale: vec![1.0, 1.0],
        offset: vec![0.3, -0.2],
    };
    cfg.probes = vec![
        ProbeSpec::HalfspaceIndicator { axis: 1, threshold: 0.0 },
        ProbeSpec::InitialProjector,
    ];
    cfg.n_schedule = vec![100, 1000];
    cfg.replicas = 10;
    cfg.tolerances.decay_factor = 2.0;
    let report = run_experiment(&cfg, 19).unwrap();
    assert!(report.passed, "{report:?}");
    assert!(report.max_norm_drift < 1e-9);
}

#[test]
fn identity_operator_rows_are_constant_one() {
    let mut cfg = base_cfg(TheoremTag::SllnWot, small_grid());
    cfg.probes = vec![ProbeSpec::IdentityOperator];
    cfg.replicas = 6;
    let report = run_experiment(&cfg, 17).unwrap();
    let probe = &report.probes[0];
    assert_eq!(probe.verdict, ProbeVerdict::Pass);
    let target = probe.target.unwrap();
    assert!((target - Complex64::new(1.0, 0.0)).norm() < 1e-10);
    for row in &probe.rows {
        assert!(row.error.unwrap() < 1e-10);
    }
}
