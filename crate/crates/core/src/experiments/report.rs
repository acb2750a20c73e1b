//! Self-contained experiment reports: every verdict is derivable from the
//! recorded numbers and the echoed configuration alone.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::experiments::config::{ExperimentConfig, ProbeSpec, TheoremTag};
use crate::stats::{KsResult, MeanComparison, SampleSummary};

/// Embedded in every artifact this crate writes.
pub const REPORT_FORMAT_VERSION: &str = "1";

/// Fixed header of the per-probe CSV files.
pub const CSV_HEADER: &str = "n_or_t,error_or_stat,ci_lo,ci_hi,ks_d,ks_p";

/// Verdict of a single probe.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeVerdict {
    Pass,
    Fail,
    /// The probe cannot distinguish the composition from its limit (for
    /// example a phase-blind diagonal kernel); it is excluded from the
    /// overall verdict rather than counted as a pass.
    Vacuous,
}

/// One row of probe data, indexed by composition length `n` or by walk time
/// `t`. Which statistics are present depends on the engine; absent ones are
/// recorded as null.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub n: Option<u64>,
    pub t: Option<f64>,
    /// Median per-path error (a.s. engines), `E|Δ_n|` (L1), or the distance
    /// between the replica mean and its target (CLT engines).
    pub error: Option<f64>,
    /// Summary of the row's underlying sample: per-path errors, `|Δ_n|`
    /// values, replica values, or polygonal-line values.
    pub summary: Option<SampleSummary>,
    pub ks_re: Option<KsResult>,
    pub ks_im: Option<KsResult>,
    pub mean_test: Option<MeanComparison>,
    /// Whether the replica-mean confidence interval covers the analytic
    /// target (CLT kernel mean clause).
    pub mean_covered: Option<bool>,
    /// Largest `|Δ_n|` seen in the row (L1 engine; bounded by `2‖A‖`).
    pub max_abs: Option<f64>,
    pub pass: Option<bool>,
}

impl ProbeRow {
    pub fn empty() -> Self {
        ProbeRow {
            n: None,
            t: None,
            error: None,
            summary: None,
            ks_re: None,
            ks_im: None,
            mean_test: None,
            mean_covered: None,
            max_abs: None,
            pass: None,
        }
    }
}

/// Named auxiliary KS comparison (for example the walk's `t = 1` marginal
/// against an independent Gaussian-limit reference).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedKs {
    pub label: String,
    pub ks: KsResult,
    pub pass: bool,
}

/// Increment statistics between adjacent walk times; recorded, not tested.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IncrementSummary {
    pub from_t: f64,
    pub to_t: f64,
    pub composition: SampleSummary,
    pub reference: SampleSummary,
}

/// Everything measured for one probe.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub probe: ProbeSpec,
    pub label: String,
    pub verdict: ProbeVerdict,
    pub vacuous_reason: Option<String>,
    /// Limit value (a.s./L1 engines) or analytic mean target (CLT kernel).
    pub target: Option<Complex64>,
    pub rows: Vec<ProbeRow>,
    pub extra_ks: Vec<NamedKs>,
    pub increments: Vec<IncrementSummary>,
}

/// Full record of one experiment run. Serialization is deterministic for a
/// given `(config, master_seed)` regardless of worker count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub format_version: String,
    pub theorem: TheoremTag,
    pub master_seed: u64,
    pub config: ExperimentConfig,
    pub probes: Vec<ProbeReport>,
    /// Evaluated displacements whose packet support reached the box edge.
    pub wraparound_warnings: u64,
    /// Largest `|‖state‖ - 1|` over all evaluated states.
    pub max_norm_drift: f64,
    /// Total probe evaluations performed.
    pub evaluations: u64,
    /// True when every non-vacuous probe passed (and at least one probe was
    /// non-vacuous).
    pub passed: bool,
}

impl ConvergenceReport {
    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v}")).unwrap_or_default()
}

/// Plot-ready CSV for one probe: header [`CSV_HEADER`], one row per schedule
/// entry. `error_or_stat` carries the row error when defined, otherwise the
/// real-part KS statistic; `ci_lo`/`ci_hi` bound the real part of the row's
/// sample mean.
pub fn write_probe_csv<W: Write>(probe: &ProbeReport, mut w: W) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for row in &probe.rows {
        let n_or_t = row
            .n
            .map(|n| format!("{n}"))
            .or_else(|| row.t.map(|t| format!("{t}")))
            .unwrap_or_default();
        let stat = row.error.or(row.ks_re.map(|k| k.statistic));
        let (lo, hi) = row
            .summary
            .as_ref()
            .map(|s| (Some(s.ci_re.lo), Some(s.ci_re.hi)))
            .unwrap_or((None, None));
        writeln!(
            w,
            "{},{},{},{},{},{}",
            n_or_t,
            fmt_opt(stat),
            fmt_opt(lo),
            fmt_opt(hi),
            fmt_opt(row.ks_re.map(|k| k.statistic)),
            fmt_opt(row.ks_re.map(|k| k.p_value)),
        )?;
    }
    Ok(())
}

/// `probe_03_indicator.csv`-style file name for the `idx`-th probe.
pub fn probe_csv_name(idx: usize, probe: &ProbeReport) -> String {
    format!("probe_{idx:02}_{}.csv", probe.probe.slug())
}
