//! Seeded Monte-Carlo experiments: one runner per limit statement, wiring
//! channels, densities, random sources and statistics into self-contained
//! convergence reports.

mod config;
mod report;
mod runner;

pub use config::{
    presets, ChannelKind, CompositionMode, EngineKind, ExperimentConfig, PacketSpec, ProbeSpec,
    TheoremTag, Tolerances,
};
pub use report::{
    probe_csv_name, write_probe_csv, ConvergenceReport, IncrementSummary, NamedKs, ProbeReport,
    ProbeRow, ProbeVerdict, CSV_HEADER, REPORT_FORMAT_VERSION,
};
pub use runner::run_experiment;
