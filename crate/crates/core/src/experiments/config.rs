//! Experiment configuration: one JSON document with explicit fields for
//! every knob, validated before any computation runs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Domain, GridSpec};
use crate::sources::{DistributionSpec, SeedPolicy, TriangularArraySpec};

/// Which limit statement an experiment verifies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TheoremTag {
    SllnKernel,
    CltKernel,
    SllnWot,
    CltWot,
    L1Wot,
    RandomWalk,
    ImpulseSlln,
    ImpulseClt,
    ImpulseL1,
    ImpulseWalk,
}

/// Which unitary channel drives the composition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    Shift,
    Impulse,
}

/// The four experiment shapes behind the ten tags.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EngineKind {
    /// Nested-prefix almost-sure convergence, `1/n` scaling.
    Slln,
    /// Independent replicas per `n`, `1/√n` scaling, distributional tests.
    Clt,
    /// Independent replicas per `n`, `1/n` scaling, `E|Δ_n|` decay.
    L1,
    /// Triangular-array polygonal line against Wiener references.
    Walk,
}

impl TheoremTag {
    pub fn all() -> [TheoremTag; 10] {
        [
            TheoremTag::SllnKernel,
            TheoremTag::CltKernel,
            TheoremTag::SllnWot,
            TheoremTag::CltWot,
            TheoremTag::L1Wot,
            TheoremTag::RandomWalk,
            TheoremTag::ImpulseSlln,
            TheoremTag::ImpulseClt,
            TheoremTag::ImpulseL1,
            TheoremTag::ImpulseWalk,
        ]
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            TheoremTag::SllnKernel => "slln_kernel",
            TheoremTag::CltKernel => "clt_kernel",
            TheoremTag::SllnWot => "slln_wot",
            TheoremTag::CltWot => "clt_wot",
            TheoremTag::L1Wot => "l1_wot",
            TheoremTag::RandomWalk => "random_walk",
            TheoremTag::ImpulseSlln => "impulse_slln",
            TheoremTag::ImpulseClt => "impulse_clt",
            TheoremTag::ImpulseL1 => "impulse_l1",
            TheoremTag::ImpulseWalk => "impulse_walk",
        }
    }

    pub fn channel(&self) -> ChannelKind {
        match self {
            TheoremTag::SllnKernel
            | TheoremTag::CltKernel
            | TheoremTag::SllnWot
            | TheoremTag::CltWot
            | TheoremTag::L1Wot
            | TheoremTag::RandomWalk => ChannelKind::Shift,
            _ => ChannelKind::Impulse,
        }
    }

    pub fn engine(&self) -> EngineKind {
        match self {
            TheoremTag::SllnKernel | TheoremTag::SllnWot | TheoremTag::ImpulseSlln => {
                EngineKind::Slln
            }
            TheoremTag::CltKernel | TheoremTag::CltWot | TheoremTag::ImpulseClt => EngineKind::Clt,
            TheoremTag::L1Wot | TheoremTag::ImpulseL1 => EngineKind::L1,
            TheoremTag::RandomWalk | TheoremTag::ImpulseWalk => EngineKind::Walk,
        }
    }
}

impl std::fmt::Display for TheoremTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Initial pure state: an analytic Gaussian packet or raw samples from a
/// JSON file (an array of `[re, im]` pairs in row-major grid order). States
/// are normalized after construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PacketSpec {
    Gaussian { center: Vec<f64>, width: f64 },
    SampleFile { path: String },
}

/// What to measure on each evaluated state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProbeSpec {
    /// Position kernel `ρ(x, y)`.
    KernelPoint { x: Vec<f64>, y: Vec<f64> },
    /// Frequency kernel `(FρF^{-1})(α, β)`.
    FourierKernelPoint { alpha: Vec<f64>, beta: Vec<f64> },
    /// `tr(ρ·1)` — the constant-one multiplication operator.
    IdentityOperator,
    /// `tr(ρ·1_{x_axis ≥ threshold})`.
    HalfspaceIndicator { axis: usize, threshold: f64 },
    /// `tr(ρ·|u₀⟩⟨u₀|)` for the initial state `u₀`.
    InitialProjector,
    /// Projector onto the initial state displaced by `S_b`.
    ShiftedInitialProjector { displacement: Vec<f64> },
}

impl ProbeSpec {
    pub fn is_kernel(&self) -> bool {
        matches!(self, ProbeSpec::KernelPoint { .. })
    }

    pub fn is_fourier_kernel(&self) -> bool {
        matches!(self, ProbeSpec::FourierKernelPoint { .. })
    }

    pub fn is_operator(&self) -> bool {
        !self.is_kernel() && !self.is_fourier_kernel()
    }

    pub fn slug(&self) -> String {
        match self {
            ProbeSpec::KernelPoint { .. } => "kernel".into(),
            ProbeSpec::FourierKernelPoint { .. } => "fourier_kernel".into(),
            ProbeSpec::IdentityOperator => "identity".into(),
            ProbeSpec::HalfspaceIndicator { .. } => "indicator".into(),
            ProbeSpec::InitialProjector => "projector".into(),
            ProbeSpec::ShiftedInitialProjector { .. } => "shifted_projector".into(),
        }
    }

    pub fn label(&self) -> String {
        match self {
            ProbeSpec::KernelPoint { x, y } => format!("kernel(x={x:?}, y={y:?})"),
            ProbeSpec::FourierKernelPoint { alpha, beta } => {
                format!("fourier_kernel(alpha={alpha:?}, beta={beta:?})")
            }
            ProbeSpec::IdentityOperator => "identity".into(),
            ProbeSpec::HalfspaceIndicator { axis, threshold } => {
                format!("indicator(axis={axis}, threshold={threshold})")
            }
            ProbeSpec::InitialProjector => "projector(initial)".into(),
            ProbeSpec::ShiftedInitialProjector { displacement } => {
                format!("projector(initial shifted by {displacement:?})")
            }
        }
    }
}

/// Decision thresholds. Every default is part of the report contract.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Significance level of every KS decision.
    #[serde(default = "default_ks_level")]
    pub ks_level: f64,
    /// Confidence of mean intervals; mean-comparison tests reject below
    /// `1 - mean_confidence`.
    #[serde(default = "default_mean_confidence")]
    pub mean_confidence: f64,
    /// Required error-decay factor from the smallest to the largest `n`.
    #[serde(default = "default_decay_factor")]
    pub decay_factor: f64,
    /// Upper bound on the final-`n` median error (SLLN engines).
    #[serde(default = "default_final_error")]
    pub final_error: f64,
    /// Errors below this floor count as converged-to-zero and make the decay
    /// requirement vacuous (degenerate laws).
    #[serde(default = "default_degenerate_floor")]
    pub degenerate_floor: f64,
}

fn default_ks_level() -> f64 {
    0.01
}
fn default_mean_confidence() -> f64 {
    0.99
}
fn default_decay_factor() -> f64 {
    5.0
}
fn default_final_error() -> f64 {
    0.02
}
fn default_degenerate_floor() -> f64 {
    1e-9
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            ks_level: default_ks_level(),
            mean_confidence: default_mean_confidence(),
            decay_factor: default_decay_factor(),
            final_error: default_final_error(),
            degenerate_floor: default_degenerate_floor(),
        }
    }
}

/// Whether compositions are collapsed to a single channel application via
/// the group law (the Monte-Carlo fast path) or applied factor by factor
/// (validation only).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CompositionMode {
    #[default]
    Collapsed,
    Sequential,
}

/// Full description of one seeded Monte-Carlo experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub theorem: TheoremTag,
    pub grid: GridSpec,
    pub initial_state: PacketSpec,
    pub distribution: DistributionSpec,
    pub n_schedule: Vec<usize>,
    pub replicas: usize,
    pub probes: Vec<ProbeSpec>,
    #[serde(default)]
    pub times: Option<Vec<f64>>,
    pub seed_policy: SeedPolicy,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub composition: CompositionMode,
}

impl ExperimentConfig {
    /// Schema- and invariant-level checks; no computation beyond a few
    /// moments. Errors name the offending field.
    pub fn validate(&self) -> Result<()> {
        let cfg_err = |field: &str, msg: String| Err(Error::config(field, msg));

        self.distribution.validate()?;
        if self.distribution.dim() != self.grid.dim() {
            return cfg_err(
                "distribution",
                format!(
                    "law dimension {} does not match grid dimension {}",
                    self.distribution.dim(),
                    self.grid.dim()
                ),
            );
        }

        match &self.initial_state {
            PacketSpec::Gaussian { center, width } => {
                if center.len() != self.grid.dim() {
                    return cfg_err(
                        "initial_state.center",
                        format!("expected {} components, got {}", self.grid.dim(), center.len()),
                    );
                }
                if !(width.is_finite() && *width > 0.0) {
                    return cfg_err("initial_state.width", format!("must be positive, got {width}"));
                }
            }
            PacketSpec::SampleFile { path } => {
                if path.is_empty() {
                    return cfg_err("initial_state.path", "must not be empty".into());
                }
            }
        }

        if self.n_schedule.is_empty() {
            return cfg_err("n_schedule", "must not be empty".into());
        }
        if self.n_schedule[0] == 0 {
            return cfg_err("n_schedule", "entries must be positive".into());
        }
        if !self.n_schedule.windows(2).all(|w| w[0] < w[1]) {
            return cfg_err("n_schedule", "must be strictly increasing".into());
        }
        if self.replicas == 0 {
            return cfg_err("replicas", "must be at least 1".into());
        }
        if self.probes.is_empty() {
            return cfg_err("probes", "must not be empty".into());
        }

        let engine = self.theorem.engine();

        // CLT compositions require centered increments.
        if engine == EngineKind::Clt {
            let (mean, _) = self.distribution.mean_cov();
            let worst = mean.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if worst > 1e-12 {
                return cfg_err(
                    "distribution",
                    format!(
                        "the central limit statement assumes zero-mean random vectors; \
                         this law has mean {mean:?}"
                    ),
                );
            }
        }

        match engine {
            EngineKind::Walk => {
                if self.grid.dim() != 1 {
                    return cfg_err(
                        "grid",
                        "the random-walk statement is for dimension 1".into(),
                    );
                }
                if self.n_schedule.len() != 1 {
                    return cfg_err(
                        "n_schedule",
                        "random-walk runs take exactly one step count".into(),
                    );
                }
                let times = match &self.times {
                    Some(t) if !t.is_empty() => t,
                    _ => return cfg_err("times", "random-walk runs need sampling times".into()),
                };
                let ok = times.windows(2).all(|w| w[0] <= w[1])
                    && times.iter().all(|&t| (0.0..=1.0).contains(&t));
                if !ok {
                    return cfg_err("times", "must be sorted within [0, 1]".into());
                }
                // base law feeds ξ_{n,k} = base_k/√n
                TriangularArraySpec::new(self.n_schedule[0], self.distribution.clone())
                    .map_err(|e| Error::config("distribution", e.to_string()))?;
                if self.composition == CompositionMode::Sequential {
                    return cfg_err(
                        "composition",
                        "sequential mode is not supported for walk runs".into(),
                    );
                }
            }
            _ => {
                if self.times.is_some() {
                    return cfg_err("times", "only random-walk runs take sampling times".into());
                }
            }
        }

        for (i, probe) in self.probes.iter().enumerate() {
            self.validate_probe(i, probe)?;
        }

        let t = &self.tolerances;
        if !(0.0 < t.ks_level && t.ks_level < 1.0) {
            return cfg_err("tolerances.ks_level", "must be in (0, 1)".into());
        }
        if !(0.0 < t.mean_confidence && t.mean_confidence < 1.0) {
            return cfg_err("tolerances.mean_confidence", "must be in (0, 1)".into());
        }
        if !(t.decay_factor >= 1.0) {
            return cfg_err("tolerances.decay_factor", "must be at least 1".into());
        }
        if !(t.final_error > 0.0) {
            return cfg_err("tolerances.final_error", "must be positive".into());
        }
        Ok(())
    }

    fn validate_probe(&self, index: usize, probe: &ProbeSpec) -> Result<()> {
        let field = format!("probes[{index}]");
        let engine = self.theorem.engine();
        let kind_ok = match self.theorem {
            TheoremTag::SllnKernel => !probe.is_operator(),
            TheoremTag::CltKernel => probe.is_fourier_kernel(),
            TheoremTag::SllnWot
            | TheoremTag::CltWot
            | TheoremTag::L1Wot
            | TheoremTag::RandomWalk
            | TheoremTag::ImpulseClt
            | TheoremTag::ImpulseL1
            | TheoremTag::ImpulseWalk => probe.is_operator(),
            TheoremTag::ImpulseSlln => true,
        };
        if !kind_ok {
            return Err(Error::config(
                field,
                format!(
                    "probe {} is not valid for theorem {} (engine {:?})",
                    probe.label(),
                    self.theorem,
                    engine
                ),
            ));
        }

        match probe {
            ProbeSpec::KernelPoint { x, y } => {
                for p in [x, y] {
                    self.grid.index_of(Domain::Position, p).map_err(|e| {
                        Error::config(&field, format!("{}: {e}", probe.label()))
                    })?;
                }
            }
            ProbeSpec::FourierKernelPoint { alpha, beta } => {
                for p in [alpha, beta] {
                    self.grid.index_of(Domain::Frequency, p).map_err(|e| {
                        Error::config(&field, format!("{}: {e}", probe.label()))
                    })?;
                }
            }
            ProbeSpec::HalfspaceIndicator { axis, .. } => {
                if *axis >= self.grid.dim() {
                    return Err(Error::config(
                        field,
                        format!("indicator axis {axis} out of range for dim {}", self.grid.dim()),
                    ));
                }
            }
            ProbeSpec::ShiftedInitialProjector { displacement } => {
                if displacement.len() != self.grid.dim() {
                    return Err(Error::config(
                        field,
                        format!(
                            "displacement needs {} components, got {}",
                            self.grid.dim(),
                            displacement.len()
                        ),
                    ));
                }
            }
            ProbeSpec::IdentityOperator | ProbeSpec::InitialProjector => {}
        }
        Ok(())
    }
}

/// Bundled preset configurations, one per theorem tag, named by the tag.
pub fn presets() -> Vec<(String, ExperimentConfig)> {
    let grid_shift = GridSpec::new(1, 16.0, 1024).expect("static grid");
    // frequency spacing 1/4, so integer frequency probes are on-grid
    let grid_freq = GridSpec::new(1, 4.0 * std::f64::consts::PI, 1024).expect("static grid");
    let packet = PacketSpec::Gaussian { center: vec![0.0], width: 1.0 };
    let rademacher = DistributionSpec::rademacher_1d(0.3);
    let uniform = DistributionSpec::uniform_unit_variance_1d();

    let base = |theorem: TheoremTag,
                grid: GridSpec,
                distribution: DistributionSpec,
                n_schedule: Vec<usize>,
                replicas: usize,
                probes: Vec<ProbeSpec>,
                times: Option<Vec<f64>>,
                seed: u64| ExperimentConfig {
        theorem,
        grid,
        initial_state: packet.clone(),
        distribution,
        n_schedule,
        replicas,
        probes,
        times,
        seed_policy: SeedPolicy::new(seed),
        tolerances: Tolerances::default(),
        composition: CompositionMode::Collapsed,
    };

    let slln_schedule = vec![100, 1000, 10_000];
    let walk_times = Some(vec![0.25, 0.5, 1.0]);

    let configs = vec![
        base(
            TheoremTag::SllnKernel,
            grid_shift,
            rademacher.clone(),
            slln_schedule.clone(),
            50,
            vec![
                ProbeSpec::KernelPoint { x: vec![0.0], y: vec![0.0] },
                ProbeSpec::KernelPoint { x: vec![0.5], y: vec![-0.5] },
            ],
            None,
            101,
        ),
        base(
            TheoremTag::CltKernel,
            grid_freq,
            uniform.clone(),
            vec![400],
            5000,
            vec![ProbeSpec::FourierKernelPoint { alpha: vec![1.0], beta: vec![-1.0] }],
            None,
            102,
        ),
        base(
            TheoremTag::SllnWot,
            grid_shift,
            rademacher.clone(),
            slln_schedule.clone(),
            50,
            vec![
                ProbeSpec::HalfspaceIndicator { axis: 0, threshold: 0.0 },
                ProbeSpec::InitialProjector,
            ],
            None,
            103,
        ),
        base(
            TheoremTag::CltWot,
            grid_shift,
            uniform.clone(),
            vec![400],
            5000,
            vec![
                ProbeSpec::InitialProjector,
                ProbeSpec::HalfspaceIndicator { axis: 0, threshold: 0.0 },
            ],
            None,
            104,
        ),
        base(
            TheoremTag::L1Wot,
            grid_shift,
            rademacher.clone(),
            vec![100, 10_000],
            2000,
            vec![ProbeSpec::HalfspaceIndicator { axis: 0, threshold: 0.0 }],
            None,
            105,
        ),
        base(
            TheoremTag::RandomWalk,
            grid_shift,
            uniform.clone(),
            vec![2000],
            2000,
            vec![
                ProbeSpec::HalfspaceIndicator { axis: 0, threshold: 0.0 },
                ProbeSpec::InitialProjector,
            ],
            walk_times.clone(),
            106,
        ),
        base(
            TheoremTag::ImpulseSlln,
            grid_freq,
            rademacher.clone(),
            slln_schedule,
            50,
            vec![
                ProbeSpec::FourierKernelPoint { alpha: vec![1.0], beta: vec![-1.0] },
                ProbeSpec::InitialProjector,
                // multiplication operators are blind to impulse phases; kept
                // here to exercise the vacuous-probe flagging
                ProbeSpec::HalfspaceIndicator { axis: 0, threshold: 0.0 },
            ],
            None,
            107,
        ),
        base(
            TheoremTag::ImpulseClt,
            grid_freq,
            uniform.clone(),
            vec![400],
            5000,
            vec![ProbeSpec::InitialProjector],
            None,
            108,
        ),
        base(
            TheoremTag::ImpulseL1,
            grid_freq,
            rademacher,
            vec![100, 10_000],
            2000,
            vec![ProbeSpec::InitialProjector],
            None,
            109,
        ),
        base(
            TheoremTag::ImpulseWalk,
            grid_freq,
            uniform,
            vec![1000],
            1000,
            vec![ProbeSpec::InitialProjector],
            walk_times,
            110,
        ),
    ];

    configs.into_iter().map(|c| (c.theorem.as_str().to_string(), c)).collect()
}
