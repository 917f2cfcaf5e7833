//! Seeded multi-trial experiments, median aggregation and plot data.
//!
//! [`run`] resolves an [`ExperimentConfig`], executes it and writes its
//! outputs (CSV of record, SVG plots, JSON manifest) into a directory.

pub mod config;
pub mod output;
pub mod runner;
pub mod seed;
pub mod summary;
pub mod validate;

use std::path::{Path, PathBuf};

use log::info;

pub use config::{ExperimentConfig, ExperimentKind, MRule, StrategySpec, SweepPoint};
pub use output::{emit_outputs, read_summary_csv};
pub use runner::{run_experiment, TrialRecord};
pub use summary::{median, median_aggregate, SummaryRow};

use crate::Result;

/// Files written by [`run`] and the strategy summary, if any.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub files: Vec<PathBuf>,
    pub summary: Vec<SummaryRow>,
}

/// Runs `cfg` and writes its outputs under `out_dir`.
pub fn run(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunReport> {
    cfg.validate()?;
    let (mut files, summary) = match cfg.experiment {
        ExperimentKind::MseVsM | ExperimentKind::MseVsN | ExperimentKind::RatioVsN => {
            let records = run_experiment(cfg)?;
            let summary = median_aggregate(&records, cfg);
            (emit_outputs(&summary, &records, cfg, out_dir)?, summary)
        }
        ExperimentKind::Coherence => (output::emit_coherence(&cfg.dimensions(), out_dir, false)?, Vec::new()),
        ExperimentKind::OneSparseValidate => {
            let rows = runner::one_sparse_validation(cfg)?;
            (output::emit_one_sparse(&rows, out_dir)?, Vec::new())
        }
    };
    files.push(output::write_manifest(cfg, out_dir, &files)?);
    info!("wrote {} files to {}", files.len(), out_dir.display());
    Ok(RunReport { files, summary })
}
