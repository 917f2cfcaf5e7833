//! Experiment configuration (JSON, unknown keys rejected) and its resolution
//! into concrete sweep points.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::sensing::{RecoveryMethod, SensingOptions, StrategyConfig, StrategyKind};
use crate::signals::SupportModel;
use crate::transforms::{BasisKind, MAX_DENSE_DIM};
use crate::{Error, Result};

pub const DEFAULT_TRIALS: usize = 200;
pub const DEFAULT_N_SWEEP: [usize; 5] = [64, 128, 256, 512, 1024];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// Median error against the number of measurements.
    MseVsM,
    /// Median error against the dimension.
    MseVsN,
    /// Nonadaptive-to-adaptive median ratio against the dimension.
    RatioVsN,
    /// Coherence table and block-removal curves.
    Coherence,
    /// Monte Carlo check of the 1-sparse repeated-measurement MSE.
    OneSparseValidate,
}

impl ExperimentKind {
    pub fn label(self) -> &'static str {
        match self {
            ExperimentKind::MseVsM => "mse-vs-m",
            ExperimentKind::MseVsN => "mse-vs-n",
            ExperimentKind::RatioVsN => "ratio-vs-n",
            ExperimentKind::Coherence => "coherence",
            ExperimentKind::OneSparseValidate => "one-sparse-validate",
        }
    }

    fn runs_strategies(self) -> bool {
        matches!(self, ExperimentKind::MseVsM | ExperimentKind::MseVsN | ExperimentKind::RatioVsN)
    }
}

/// Strategy entry of a config file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct StrategySpec {
    pub kind: StrategyKind,
    #[serde(default = "default_recovery")]
    pub recovery: RecoveryMethod,
}

impl StrategySpec {
    pub fn label(&self) -> String {
        format!("{}+{}", self.kind.label(), self.recovery.label())
    }
}

fn default_recovery() -> RecoveryMethod {
    RecoveryMethod::Cosamp
}

/// `m = round(fraction · n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct MRule {
    pub fraction: f64,
}

impl MRule {
    pub fn apply(&self, n: usize) -> usize {
        (self.fraction * n as f64).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_sweep: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_sweep: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_rule: Option<MRule>,
    #[serde(default = "default_s")]
    pub s: usize,
    #[serde(default = "default_sigma2")]
    pub sigma2: f64,
    #[serde(default = "default_support_model")]
    pub support_model: SupportModel,
    #[serde(default = "default_basis")]
    pub basis: BasisKind,
    #[serde(default)]
    pub strategies: Vec<StrategySpec>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub master_seed: u64,
    /// Worker threads; all available cores when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default)]
    pub sensing: SensingOptions,
}

fn default_s() -> usize {
    10
}

fn default_sigma2() -> f64 {
    1e-4
}

fn default_support_model() -> SupportModel {
    SupportModel::Tree
}

fn default_basis() -> BasisKind {
    BasisKind::Haar
}

fn default_trials() -> usize {
    DEFAULT_TRIALS
}

/// One `(n, m)` operating point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SweepPoint {
    pub n: usize,
    pub m: usize,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Dimensions to sweep: `n-sweep`, else `n`, else the default sweep.
    pub fn dimensions(&self) -> Vec<usize> {
        match (&self.n_sweep, self.n) {
            (Some(sweep), _) => sweep.clone(),
            (None, Some(n)) => vec![n],
            (None, None) => DEFAULT_N_SWEEP.to_vec(),
        }
    }

    fn measurements_for(&self, n: usize) -> Vec<usize> {
        if let Some(sweep) = &self.m_sweep {
            sweep.clone()
        } else if let Some(m) = self.m {
            vec![m]
        } else if let Some(rule) = &self.m_rule {
            vec![rule.apply(n)]
        } else {
            Vec::new()
        }
    }

    /// Sweep points in `(n, m)` order.
    pub fn sweep_points(&self) -> Vec<SweepPoint> {
        self.dimensions()
            .into_iter()
            .flat_map(|n| self.measurements_for(n).into_iter().map(move |m| SweepPoint { n, m }))
            .collect()
    }

    pub fn strategy_config(&self, spec: &StrategySpec, point: SweepPoint) -> StrategyConfig {
        StrategyConfig {
            kind: spec.kind,
            recovery: spec.recovery,
            m: point.m,
            s: self.s,
            noise_var: self.sigma2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.n.is_some() && self.n_sweep.is_some() {
            return bad("give either `n` or `n-sweep`, not both".into());
        }
        let ns = self.dimensions();
        if ns.is_empty() {
            return bad("`n-sweep` is empty".into());
        }
        for &n in &ns {
            if n < 2 || !n.is_power_of_two() || n > MAX_DENSE_DIM {
                return bad(format!("dimension {n} must be a power of two in 2..={MAX_DENSE_DIM}"));
            }
        }
        if self.trials == 0 {
            return bad("`trials` must be at least 1".into());
        }
        if !(self.sigma2.is_finite() && self.sigma2 >= 0.0) {
            return bad(format!("`sigma2` = {} must be finite and ≥ 0", self.sigma2));
        }
        if self.workers == Some(0) {
            return bad("`workers` must be at least 1".into());
        }
        if self.experiment == ExperimentKind::Coherence {
            return Ok(());
        }

        let given = [self.m.is_some(), self.m_sweep.is_some(), self.m_rule.is_some()]
            .iter()
            .filter(|&&g| g)
            .count();
        if given != 1 {
            return bad("give exactly one of `m`, `m-sweep` or `m-rule`".into());
        }
        if let Some(rule) = &self.m_rule {
            if !(rule.fraction.is_finite() && rule.fraction > 0.0) {
                return bad("`m-rule.fraction` must be positive".into());
            }
        }
        if self.m_sweep.as_ref().is_some_and(|v| v.is_empty()) {
            return bad("`m-sweep` is empty".into());
        }
        let any_adaptive = self.strategies.iter().any(|s| s.kind.is_adaptive());
        let min_m = if any_adaptive || self.experiment == ExperimentKind::OneSparseValidate {
            2
        } else {
            1
        };
        for p in self.sweep_points() {
            if p.m < min_m {
                return bad(format!("m = {} at n = {} (need m ≥ {min_m})", p.m, p.n));
            }
        }

        if self.experiment == ExperimentKind::OneSparseValidate {
            return Ok(());
        }
        if self.s == 0 {
            return bad("`s` must be at least 1".into());
        }
        if let Some(&n) = ns.iter().find(|&&n| self.s > n) {
            return bad(format!("s = {} exceeds n = {n}", self.s));
        }
        if self.experiment.runs_strategies() && self.strategies.is_empty() {
            return bad("`strategies` is empty".into());
        }
        let mut labels: Vec<String> = self.strategies.iter().map(StrategySpec::label).collect();
        labels.sort();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return bad("duplicate strategy".into());
        }
        if self.experiment == ExperimentKind::RatioVsN && ratio_pairs(&self.strategies).is_empty() {
            return bad("ratio-vs-n needs a nonadaptive strategy and its adaptive counterpart".into());
        }
        Ok(())
    }
}

/// `(nonadaptive, adaptive)` strategy pairs sharing a sampling density and
/// recovery method.
pub fn ratio_pairs(strategies: &[StrategySpec]) -> Vec<(StrategySpec, StrategySpec)> {
    let counterpart = |k: StrategyKind| match k {
        StrategyKind::NonadaptiveUniform => Some(StrategyKind::AdaptiveUniform),
        StrategyKind::NonadaptiveVds => Some(StrategyKind::AdaptiveVds),
        _ => None,
    };
    strategies
        .iter()
        .filter_map(|&non| {
            let target = counterpart(non.kind)?;
            strategies
                .iter()
                .find(|a| a.kind == target && a.recovery == non.recovery)
                .map(|&a| (non, a))
        })
        .collect()
}
