//! Median aggregation of trial records.

use log::warn;
use serde::{Deserialize, Serialize};

use super::config::{ratio_pairs, ExperimentConfig};
use super::runner::TrialRecord;

/// Median with the midpoint convention for even counts; `None` when empty.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    Some(if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        (sorted[mid - 1] + sorted[mid]) / 2.0
    })
}

/// One line of `summary.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub experiment: String,
    pub strategy: String,
    pub n: usize,
    pub m: usize,
    pub s: usize,
    pub sigma2: f64,
    pub median_sq_error: f64,
    pub trials: usize,
    pub master_seed: u64,
}

/// Median `sq_error` per `(n, m, strategy)`, in order of first appearance.
pub fn median_aggregate(records: &[TrialRecord], cfg: &ExperimentConfig) -> Vec<SummaryRow> {
    let mut keys: Vec<(usize, usize, &str)> = Vec::new();
    for r in records {
        let key = (r.n, r.m, r.strategy.as_str());
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .filter_map(|(n, m, strategy)| {
            let group: Vec<&TrialRecord> = records
                .iter()
                .filter(|r| r.n == n && r.m == m && r.strategy == strategy)
                .collect();
            let errors: Vec<f64> = group.iter().map(|r| r.sq_error).collect();
            let Some(med) = median(&errors) else {
                warn!("no trials for {strategy} at n={n}, m={m}; omitted");
                return None;
            };
            Some(SummaryRow {
                experiment: cfg.experiment.label().to_string(),
                strategy: strategy.to_string(),
                n,
                m,
                s: group[0].s,
                sigma2: cfg.sigma2,
                median_sq_error: med,
                trials: errors.len(),
                master_seed: cfg.master_seed,
            })
        })
        .collect()
}

/// Nonadaptive-over-adaptive median ratio at one dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub n: usize,
    pub m: usize,
    pub s: usize,
    pub nonadaptive: String,
    pub adaptive: String,
    pub ratio: f64,
    pub log_n: f64,
    pub n_over_s: f64,
}

/// Ratios for every paired strategy at every sweep point present in `summary`.
pub fn ratio_rows(summary: &[SummaryRow], cfg: &ExperimentConfig) -> Vec<RatioRow> {
    let lookup = |n: usize, m: usize, label: &str| {
        summary
            .iter()
            .find(|r| r.n == n && r.m == m && r.strategy == label)
            .map(|r| r.median_sq_error)
    };
    let mut out = Vec::new();
    for point in cfg.sweep_points() {
        for (non, ada) in ratio_pairs(&cfg.strategies) {
            let (Some(num), Some(den)) = (lookup(point.n, point.m, &non.label()), lookup(point.n, point.m, &ada.label()))
            else {
                continue;
            };
            out.push(RatioRow {
                n: point.n,
                m: point.m,
                s: cfg.s,
                nonadaptive: non.label(),
                adaptive: ada.label(),
                ratio: num / den,
                log_n: (point.n as f64).ln(),
                n_over_s: point.n as f64 / cfg.s as f64,
            });
        }
    }
    out
}
