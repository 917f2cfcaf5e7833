//! End-to-end sensing strategies: nonadaptive (uniform or variable-density
//! row sampling), two-stage adaptive, and oracle adaptive.
//!
//! Every strategy consumes exactly `m` DFT rows. Final coefficients always
//! come from least squares on the estimated support using all `m`
//! measurements.

use log::{debug, warn};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::design::{draw_plan, sample_rows, sampling_pmf, solve_relaxation, MeasurementPlan, SolverOptions};
use crate::linalg::{norm_sqr, select_columns, CMatrix};
use crate::recovery::{bpdn, cosamp, default_epsilon, ls_on_support, top_s_threshold, RecoveryProblem};
use crate::signals::{add_noise, NoiseModel, SparseSignal};
use crate::transforms::{validate_support, BasisKind, DftEnsemble, SparsityBasis};
use crate::{Error, Result};

/// Row-sampling density `p_j ∝ 1/max(1, min(j, n − j))`, normalized.
pub fn vds_pmf(n: usize) -> Result<Vec<f64>> {
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::arg(format!("dimension {n} is not a power of two")));
    }
    let raw: Vec<f64> = (0..n).map(|j| 1.0 / j.min(n - j).max(1) as f64).collect();
    let total: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|p| p / total).collect())
}

/// Which rows are measured and how they are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyKind {
    NonadaptiveUniform,
    NonadaptiveVds,
    AdaptiveUniform,
    AdaptiveVds,
    Oracle,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 5] = [
        StrategyKind::NonadaptiveUniform,
        StrategyKind::NonadaptiveVds,
        StrategyKind::AdaptiveUniform,
        StrategyKind::AdaptiveVds,
        StrategyKind::Oracle,
    ];

    pub fn label(self) -> &'static str {
        match self {
            StrategyKind::NonadaptiveUniform => "nonadaptive-uniform",
            StrategyKind::NonadaptiveVds => "nonadaptive-vds",
            StrategyKind::AdaptiveUniform => "adaptive-uniform",
            StrategyKind::AdaptiveVds => "adaptive-vds",
            StrategyKind::Oracle => "oracle",
        }
    }

    pub fn is_adaptive(self) -> bool {
        matches!(self, StrategyKind::AdaptiveUniform | StrategyKind::AdaptiveVds)
    }

    pub fn is_nonadaptive(self) -> bool {
        matches!(self, StrategyKind::NonadaptiveUniform | StrategyKind::NonadaptiveVds)
    }

    fn uses_vds(self) -> bool {
        matches!(self, StrategyKind::NonadaptiveVds | StrategyKind::AdaptiveVds)
    }
}

/// Sparse recovery algorithm used for support estimation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecoveryMethod {
    Cosamp,
    L1,
}

impl RecoveryMethod {
    pub fn label(self) -> &'static str {
        match self {
            RecoveryMethod::Cosamp => "cosamp",
            RecoveryMethod::L1 => "l1",
        }
    }
}

/// One strategy at one operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrategyConfig {
    pub kind: StrategyKind,
    pub recovery: RecoveryMethod,
    pub m: usize,
    pub s: usize,
    pub noise_var: f64,
}

impl StrategyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.s == 0 {
            return Err(Error::arg("sparsity must be at least 1"));
        }
        if self.m == 0 {
            return Err(Error::arg("at least one measurement is required"));
        }
        if self.kind.is_adaptive() && self.m < 2 {
            return Err(Error::arg("adaptive strategies need m ≥ 2"));
        }
        NoiseModel::new(self.noise_var)?;
        Ok(())
    }

    /// `"<kind>+<recovery>"`.
    pub fn label(&self) -> String {
        format!("{}+{}", self.kind.label(), self.recovery.label())
    }
}

/// Iteration caps and limits shared by all strategies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensingOptions {
    pub cosamp_iters: usize,
    pub l1_iters: usize,
    pub solver: SolverOptions,
    pub max_rejects: usize,
}

impl Default for SensingOptions {
    fn default() -> Self {
        Self {
            cosamp_iters: 50,
            l1_iters: 500,
            solver: SolverOptions::default(),
            max_rejects: 100,
        }
    }
}

/// Immutable objects shared by every trial at one dimension.
#[derive(Debug, Clone)]
pub struct SensingContext {
    basis: SparsityBasis,
    dft: DftEnsemble,
    /// `G = FΨ`, so row `j`, column `k` is `<f_j, ψ_k>`.
    ensemble: CMatrix,
    uniform: Vec<f64>,
    vds: Vec<f64>,
}

impl SensingContext {
    pub fn new(kind: BasisKind, n: usize) -> Result<Self> {
        let basis = SparsityBasis::new(kind, n)?;
        let dft = DftEnsemble::new(n)?;
        let ensemble = basis.coefficient_ensemble(&dft)?;
        Ok(Self {
            basis,
            dft,
            ensemble,
            uniform: vec![1.0 / n as f64; n],
            vds: vds_pmf(n)?,
        })
    }

    pub fn n(&self) -> usize {
        self.dft.n()
    }

    pub fn basis(&self) -> &SparsityBasis {
        &self.basis
    }

    pub fn dft(&self) -> &DftEnsemble {
        &self.dft
    }

    pub fn ensemble(&self) -> &CMatrix {
        &self.ensemble
    }

    /// Design operator `AΨ_Λ`: every ensemble row, the columns of `support`.
    pub fn design_operator(&self, support: &[usize]) -> CMatrix {
        select_columns(&self.ensemble, support)
    }

    fn nonadaptive_pmf(&self, kind: StrategyKind) -> &[f64] {
        if kind.uses_vds() {
            &self.vds
        } else {
            &self.uniform
        }
    }

    /// `y_i = <f_{row_i}, x> + z_i`.
    pub fn measure<R: Rng + ?Sized>(
        &self,
        signal: &SparseSignal,
        rows: &[usize],
        noise_var: f64,
        rng: &mut R,
    ) -> Result<Vec<Complex64>> {
        if signal.n != self.n() || signal.basis != self.basis.kind() {
            return Err(Error::arg("signal does not match the sensing context"));
        }
        let clean: Vec<Complex64> = rows.iter().map(|&j| self.dft.measure(j, &signal.x)).collect();
        add_noise(&clean, NoiseModel::new(noise_var)?, rng)
    }
}

/// Result of one strategy run.
#[derive(Debug, Clone)]
pub struct SensingOutcome {
    /// Canonical-domain estimate `Ψ α̂`.
    pub x_hat: Vec<Complex64>,
    pub alpha_hat: Vec<Complex64>,
    /// Final (sorted) support estimate.
    pub support: Vec<usize>,
    pub plan: MeasurementPlan,
    pub sq_error: f64,
    /// The final least-squares system was rank deficient; the estimate is zero.
    pub failed: bool,
    /// Stage 2 could not be designed or drawn and used stage-1 sampling instead.
    pub fallback: bool,
}

impl SensingOutcome {
    pub fn support_correct(&self, signal: &SparseSignal) -> bool {
        self.support == signal.support
    }
}

/// Runs `cfg.kind` on `signal`.
pub fn run_strategy<R: Rng + ?Sized>(
    ctx: &SensingContext,
    signal: &SparseSignal,
    cfg: &StrategyConfig,
    opts: &SensingOptions,
    rng: &mut R,
) -> Result<SensingOutcome> {
    match cfg.kind {
        StrategyKind::NonadaptiveUniform | StrategyKind::NonadaptiveVds => {
            run_nonadaptive(ctx, signal, cfg, opts, rng)
        }
        StrategyKind::AdaptiveUniform | StrategyKind::AdaptiveVds => run_adaptive(ctx, signal, cfg, opts, rng),
        StrategyKind::Oracle => run_oracle(ctx, signal, cfg, opts, rng),
    }
}

fn estimate_support(
    y: &[Complex64],
    operator: &CMatrix,
    cfg: &StrategyConfig,
    opts: &SensingOptions,
) -> Result<Vec<usize>> {
    let problem = RecoveryProblem::new(y, operator, cfg.s, cfg.noise_var)?;
    match cfg.recovery {
        RecoveryMethod::Cosamp => Ok(cosamp(&problem, opts.cosamp_iters)?.support),
        RecoveryMethod::L1 => {
            let out = bpdn(&problem, default_epsilon(cfg.noise_var, y.len()), opts.l1_iters)?;
            Ok(top_s_threshold(&out.coefficients, cfg.s))
        }
    }
}

fn finish(
    ctx: &SensingContext,
    signal: &SparseSignal,
    y: &[Complex64],
    operator: &CMatrix,
    support: Vec<usize>,
    plan: MeasurementPlan,
    fallback: bool,
) -> Result<SensingOutcome> {
    let n = ctx.n();
    let mut alpha_hat = vec![Complex64::new(0.0, 0.0); n];
    let failed = match ls_on_support(y, &select_columns(operator, &support)) {
        Ok(vals) => {
            for (&i, v) in support.iter().zip(vals) {
                alpha_hat[i] = v;
            }
            false
        }
        Err(Error::RankDeficient(msg)) => {
            debug!("final support system rank deficient: {msg}");
            true
        }
        Err(e) => return Err(e),
    };
    let x_hat = ctx.basis.synthesize_complex(&alpha_hat)?;
    let diff: Vec<Complex64> = x_hat.iter().zip(&signal.x).map(|(a, &b)| a - b).collect();
    Ok(SensingOutcome {
        sq_error: norm_sqr(&diff),
        x_hat,
        alpha_hat,
        support,
        plan,
        failed,
        fallback,
    })
}

/// Measures the rows of `plan`, estimates the support with `cfg.recovery`
/// and fits least squares on it.
pub fn recover_with_plan<R: Rng + ?Sized>(
    ctx: &SensingContext,
    signal: &SparseSignal,
    plan: MeasurementPlan,
    cfg: &StrategyConfig,
    opts: &SensingOptions,
    rng: &mut R,
) -> Result<SensingOutcome> {
    cfg.validate()?;
    let y = ctx.measure(signal, &plan.rows, cfg.noise_var, rng)?;
    let operator = plan.restrict(&ctx.ensemble);
    let support = estimate_support(&y, &operator, cfg, opts)?;
    finish(ctx, signal, &y, &operator, support, plan, false)
}

/// `m` rows i.i.d. from the uniform or VDS density, then sparse recovery.
pub fn run_nonadaptive<R: Rng + ?Sized>(
    ctx: &SensingContext,
    signal: &SparseSignal,
    cfg: &StrategyConfig,
    opts: &SensingOptions,
    rng: &mut R,
) -> Result<SensingOutcome> {
    if !cfg.kind.is_nonadaptive() {
        return Err(Error::arg(format!("{} is not a nonadaptive strategy", cfg.kind.label())));
    }
    cfg.validate()?;
    let rows = sample_rows(ctx.nonadaptive_pmf(cfg.kind), cfg.m, rng)?;
    recover_with_plan(ctx, signal, MeasurementPlan::new(rows), cfg, opts, rng)
}

/// Designs and draws `budget` rows for `support`.
fn designed_rows<R: Rng + ?Sized>(
    ctx: &SensingContext,
    support: &[usize],
    budget: usize,
    opts: &SensingOptions,
    rng: &mut R,
) -> Result<MeasurementPlan> {
    if support.is_empty() {
        return Err(Error::SupportNotIdentifiable);
    }
    let b = ctx.design_operator(support);
    let solution = solve_relaxation(&b, budget, &opts.solver)?;
    if !solution.converged {
        debug!(
            "design solver stopped after {} iterations, gap {:e}",
            solution.iterations, solution.duality_gap
        );
    }
    let pmf = sampling_pmf(&solution.weights)?;
    draw_plan(&pmf, budget, &b, rng, opts.max_rejects)
}

/// Two-stage protocol: `⌊m/2⌋` nonadaptive rows, a design on the estimated
/// support for the remaining rows, then recovery on all `m` measurements.
pub fn run_adaptive<R: Rng + ?Sized>(
    ctx: &SensingContext,
    signal: &SparseSignal,
    cfg: &StrategyConfig,
    opts: &SensingOptions,
    rng: &mut R,
) -> Result<SensingOutcome> {
    if !cfg.kind.is_adaptive() {
        return Err(Error::arg(format!("{} is not an adaptive strategy", cfg.kind.label())));
    }
    cfg.validate()?;
    let first = cfg.m / 2;
    let pmf = ctx.nonadaptive_pmf(cfg.kind);

    let stage1 = MeasurementPlan::new(sample_rows(pmf, first, rng)?);
    let y1 = ctx.measure(signal, &stage1.rows, cfg.noise_var, rng)?;
    let op1 = stage1.restrict(&ctx.ensemble);
    let guess = estimate_support(&y1, &op1, cfg, opts)?;
    complete_adaptive(ctx, signal, cfg, opts, stage1, y1, &guess, rng)
}

/// Second stage of [`run_adaptive`] given the first-stage plan, its
/// measurements and a support estimate: designs and measures the remaining
/// `m − |stage1|` rows, then recovers from all `m` measurements.
#[allow(clippy::too_many_arguments)]
pub fn complete_adaptive<R: Rng + ?Sized>(
    ctx: &SensingContext,
    signal: &SparseSignal,
    cfg: &StrategyConfig,
    opts: &SensingOptions,
    stage1: MeasurementPlan,
    y1: Vec<Complex64>,
    guess: &[usize],
    rng: &mut R,
) -> Result<SensingOutcome> {
    cfg.validate()?;
    if stage1.len() != y1.len() || stage1.len() >= cfg.m {
        return Err(Error::arg("first-stage rows must match their measurements and leave rows for stage 2"));
    }
    let second = cfg.m - stage1.len();
    let pmf = ctx.nonadaptive_pmf(cfg.kind);
    let (stage2, fallback) = match designed_rows(ctx, guess, second, opts, rng) {
        Ok(plan) => (plan, false),
        Err(e @ (Error::SupportNotIdentifiable | Error::RejectionLimit(_) | Error::InvalidArgument(_))) => {
            warn!("stage-2 design unavailable ({e}); sampling the remaining rows nonadaptively");
            (MeasurementPlan::new(sample_rows(pmf, second, rng)?), true)
        }
        Err(e) => return Err(e),
    };
    let y2 = ctx.measure(signal, &stage2.rows, cfg.noise_var, rng)?;

    let plan = stage1.concat(&stage2);
    let mut y = y1;
    y.extend(y2);
    let operator = plan.restrict(&ctx.ensemble);
    let support = estimate_support(&y, &operator, cfg, opts)?;
    finish(ctx, signal, &y, &operator, support, plan, fallback)
}

/// Designs all `m` rows on the true support and fits least squares on it.
pub fn run_oracle<R: Rng + ?Sized>(
    ctx: &SensingContext,
    signal: &SparseSignal,
    cfg: &StrategyConfig,
    opts: &SensingOptions,
    rng: &mut R,
) -> Result<SensingOutcome> {
    if cfg.kind != StrategyKind::Oracle {
        return Err(Error::arg(format!("{} is not the oracle strategy", cfg.kind.label())));
    }
    cfg.validate()?;
    validate_support(ctx.n(), &signal.support)?;
    let plan = designed_rows(ctx, &signal.support, cfg.m, opts, rng)?;
    let y = ctx.measure(signal, &plan.rows, cfg.noise_var, rng)?;
    let operator = plan.restrict(&ctx.ensemble);
    finish(ctx, signal, &y, &operator, signal.support.clone(), plan, false)
}
