//! Closed-form and Monte Carlo validation suite.
//!
//! Each check returns a [`CriterionReport`]; a check passes only if its
//! numerical condition holds and it finishes inside its time limit.

use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::config::{ExperimentConfig, ExperimentKind, StrategySpec};
use super::runner::repeated_row_mse;
use super::summary::SummaryRow;
use crate::analysis::{bayes_posterior_risk, bayes_risk_closed_form, minmax_bounds, CoherenceTable};
use crate::design::{design_gradient, design_objective, solve_relaxation, SolverOptions};
use crate::linalg::{select_columns, CMatrix};
use crate::sensing::{RecoveryMethod, SensingContext, StrategyKind};
use crate::signals::{sample_uniform_support, SupportModel};
use crate::transforms::{BasisKind, DftEnsemble};

/// Outcome of one validation check.
#[derive(Debug, Clone)]
pub struct CriterionReport {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
    pub limit: Duration,
}

impl CriterionReport {
    /// `PASS [k] name (elapsed / limit): detail`.
    pub fn line(&self) -> String {
        format!(
            "{} [{}] {} ({:.1} s / {} s): {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.elapsed.as_secs_f64(),
            self.limit.as_secs(),
            self.detail
        )
    }
}

fn timed(id: u8, name: &'static str, limit_secs: u64, check: impl FnOnce() -> (bool, String)) -> CriterionReport {
    let start = Instant::now();
    let (ok, detail) = check();
    let elapsed = start.elapsed();
    let limit = Duration::from_secs(limit_secs);
    CriterionReport {
        id,
        name,
        passed: ok && elapsed <= limit,
        detail,
        elapsed,
        limit,
    }
}

fn complex_normal<R: Rng + ?Sized>(rng: &mut R, var: f64) -> Complex64 {
    let sd = (var / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(sd * re, sd * im)
}

/// Closed-form coherence equals brute force for every `n ∈ {2, …, 256}`, and
/// the min-max / max-max bounds are `√(2/n)` and `1`.
pub fn closed_form_coherence() -> CriterionReport {
    timed(1, "closed-form coherence", 10, || {
        let mut worst_table = 0.0f64;
        let mut worst_bound = 0.0f64;
        for k in 1..=8 {
            let n = 1usize << k;
            let (Ok(cf), Ok(bf), Ok((lo, hi))) =
                (CoherenceTable::closed_form(n), CoherenceTable::brute_force(n), minmax_bounds(n))
            else {
                return (false, format!("n = {n}: table construction failed"));
            };
            worst_table = worst_table.max(cf.max_abs_diff(&bf));
            worst_bound = worst_bound
                .max((lo - (2.0 / n as f64).sqrt()).abs())
                .max((hi - 1.0).abs());
        }
        (
            worst_table <= 1e-10 && worst_bound <= 1e-10,
            format!("max |closed − brute| = {worst_table:.2e}, max bound deviation = {worst_bound:.2e}"),
        )
    })
}

/// Empirical MSE of the repeated best-row estimator at `n = 64, m = 32`.
pub fn repeated_measurement_mse() -> CriterionReport {
    timed(2, "repeated best-row MSE", 30, || {
        let (n, m, noise_var, draws) = (64usize, 32usize, 1e-4, 100_000usize);
        let Ok(table) = CoherenceTable::closed_form(n) else {
            return (false, "coherence table failed".into());
        };
        let mut details = Vec::new();
        let mut ok = true;
        for (idx, expected) in [(0usize, noise_var / m as f64), (n / 2 + 8, (n as f64 / 2.0) * noise_var / m as f64)] {
            let (row, _) = table.best_row(idx);
            match repeated_row_mse(n, m, row, idx, noise_var, draws, 0x5eed + idx as u64) {
                Ok(mse) => {
                    let rel = (mse / expected - 1.0).abs();
                    ok &= rel <= 0.03;
                    details.push(format!("Λ={idx} j={row}: {mse:.4e} vs {expected:.4e} ({:.2}%)", 100.0 * rel));
                }
                Err(e) => {
                    ok = false;
                    details.push(format!("Λ={idx}: {e}"));
                }
            }
        }
        (ok, details.join("; "))
    })
}

/// `‖F'_Λ‖_F² = s·m/n` for random plans and supports.
pub fn frobenius_invariant() -> CriterionReport {
    timed(3, "Frobenius invariant", 5, || {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut worst = 0.0f64;
        let ensembles: Vec<DftEnsemble> = [32usize, 64, 128].iter().map(|&n| DftEnsemble::new(n).unwrap()).collect();
        for _ in 0..1000 {
            let dft = &ensembles[rng.random_range(0..ensembles.len())];
            let n = dft.n();
            let m = rng.random_range(1..=2 * n);
            let s = rng.random_range(1..=n);
            let rows: Vec<usize> = (0..m).map(|_| rng.random_range(0..n)).collect();
            let support = sample_uniform_support(n, s, &mut rng).unwrap();
            let restricted = select_columns(&dft.rows_matrix(&rows), &support);
            let fro: f64 = restricted.iter().map(|z| z.norm_sqr()).sum();
            let expected = (s * m) as f64 / n as f64;
            worst = worst.max((fro - expected).abs());
        }
        (worst <= 1e-10, format!("max |‖F'_Λ‖² − sm/n| = {worst:.2e} over 1000 plans"))
    })
}

/// Gradient against central differences, monotone solver histories, and the
/// 1-sparse optimum `1/(m · max_j coherence²)` for every support at `n = 64`.
pub fn design_solver_certification() -> CriterionReport {
    timed(4, "design solver certification", 60, || {
        let n = 64;
        let Ok(ctx) = SensingContext::new(BasisKind::Haar, n) else {
            return (false, "context construction failed".into());
        };
        let mut rng = ChaCha8Rng::seed_from_u64(4);

        let mut worst_grad = 0.0f64;
        let mut monotone = true;
        for point in 0..100 {
            let s = rng.random_range(1..=4);
            let support = sample_uniform_support(n, s, &mut rng).unwrap();
            let b = ctx.design_operator(&support);
            let m = rng.random_range(8..=64);
            let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
            let scale = m as f64 * rng.random_range(0.5..1.0) / raw.iter().sum::<f64>();
            let w: Vec<f64> = raw.iter().map(|x| x * scale).collect();
            let Some((_, g)) = design_gradient(&w, &b) else {
                return (false, format!("point {point}: singular information matrix"));
            };
            let mut fd = vec![0.0; n];
            for i in 0..n {
                let h = 1e-4 * w[i];
                let mut plus = w.clone();
                let mut minus = w.clone();
                plus[i] += h;
                minus[i] -= h;
                fd[i] = (design_objective(&plus, &b) - design_objective(&minus, &b)) / (2.0 * h);
            }
            let scale = g.iter().fold(0.0f64, |a, x| a.max(x.abs()));
            let err = g.iter().zip(&fd).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
            worst_grad = worst_grad.max(err / scale);

            if point % 5 == 0 {
                match solve_relaxation(&b, m, &SolverOptions::default()) {
                    Ok(sol) => monotone &= sol.history.windows(2).all(|w| w[1] <= w[0]),
                    Err(_) => monotone = false,
                }
            }
        }

        let m = 32;
        let table = CoherenceTable::closed_form(n).unwrap();
        let mut worst_opt = 0.0f64;
        for idx in 0..n {
            let (_, c) = table.best_row(idx);
            let expected = 1.0 / (m as f64 * c * c);
            match solve_relaxation(&ctx.design_operator(&[idx]), m, &SolverOptions::default()) {
                Ok(sol) => worst_opt = worst_opt.max((sol.objective / expected - 1.0).abs()),
                Err(e) => return (false, format!("Λ={idx}: {e}")),
            }
        }
        (
            worst_grad <= 1e-5 && monotone && worst_opt <= 1e-6,
            format!(
                "max gradient rel. error {worst_grad:.2e}; histories monotone: {monotone}; \
                 max 1-sparse optimum rel. error {worst_opt:.2e}"
            ),
        )
    })
}

/// Monte Carlo of the ridge estimator `(B^H B + σ²/ρ² I)^{-1} B^H y` on
/// random `20 × 5` operators: its noise-propagated error `E‖W z‖²` and, with
/// `α ~ CN(0, ρ² I)`, its full error `E‖α̂ − α‖²` against the closed form.
pub fn bayes_risk_validator() -> CriterionReport {
    timed(5, "Bayes-risk validator", 30, || {
        let (rows, cols, noise_var, prior_var, draws) = (20usize, 5usize, 0.05, 1.0, 100_000usize);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut ok = true;
        let mut details = Vec::new();
        for op in 0..5 {
            let b = CMatrix::from_fn(rows, cols, |_, _| complex_normal(&mut rng, 1.0));
            let closed = bayes_risk_closed_form(&b, noise_var, prior_var).unwrap();
            let posterior = bayes_posterior_risk(&b, noise_var, prior_var).unwrap();
            let ratio = noise_var / prior_var;
            let gram = b.adjoint() * &b + CMatrix::identity(cols, cols) * Complex64::new(ratio, 0.0);
            let Some(w) = gram.cholesky().map(|c| c.solve(&b.adjoint())) else {
                return (false, "ridge system singular".into());
            };
            let (mut noise_term, mut full) = (0.0, 0.0);
            for _ in 0..draws {
                let alpha = DMatrix::from_fn(cols, 1, |_, _| complex_normal(&mut rng, prior_var));
                let z = DMatrix::from_fn(rows, 1, |_, _| complex_normal(&mut rng, noise_var));
                let wz = &w * &z;
                let est = &w * (&b * &alpha + &z);
                noise_term += wz.iter().map(|c| c.norm_sqr()).sum::<f64>();
                full += (est - alpha).iter().map(|c| c.norm_sqr()).sum::<f64>();
            }
            noise_term /= draws as f64;
            full /= draws as f64;
            let rel_noise = (noise_term / closed - 1.0).abs();
            let rel_full = (full / closed - 1.0).abs();
            ok &= rel_noise <= 0.03 && rel_full <= 0.03;
            details.push(format!(
                "op {op}: closed {closed:.4e}, E‖Wz‖² {noise_term:.4e} ({:.2}%), E‖α̂−α‖² {full:.4e} ({:.2}%), posterior {posterior:.4e}",
                100.0 * rel_noise,
                100.0 * rel_full
            ));
        }
        (ok, details.join("; "))
    })
}

fn strategy(kind: StrategyKind) -> StrategySpec {
    StrategySpec {
        kind,
        recovery: RecoveryMethod::Cosamp,
    }
}

fn desk_config(model: SupportModel, m_sweep: Vec<usize>, strategies: Vec<StrategySpec>, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        experiment: ExperimentKind::MseVsM,
        n: Some(256),
        n_sweep: None,
        m: None,
        m_sweep: Some(m_sweep),
        m_rule: None,
        s: 10,
        sigma2: 1e-4,
        support_model: model,
        basis: BasisKind::Haar,
        strategies,
        trials: 200,
        master_seed: seed,
        workers: None,
        sensing: Default::default(),
    }
}

fn run_summary(cfg: &ExperimentConfig) -> std::result::Result<Vec<SummaryRow>, String> {
    let records = super::run_experiment(cfg).map_err(|e| e.to_string())?;
    Ok(super::median_aggregate(&records, cfg))
}

fn median_of(summary: &[SummaryRow], m: usize, kind: StrategyKind) -> f64 {
    let label = strategy(kind).label();
    summary
        .iter()
        .find(|r| r.m == m && r.strategy == label)
        .map_or(f64::NAN, |r| r.median_sq_error)
}

/// `oracle ≤ adaptive-VDS ≤ nonadaptive-VDS ≤ nonadaptive-uniform` at `m`.
fn ordering(summary: &[SummaryRow], m: usize) -> (bool, String) {
    let chain = [
        StrategyKind::Oracle,
        StrategyKind::AdaptiveVds,
        StrategyKind::NonadaptiveVds,
        StrategyKind::NonadaptiveUniform,
    ];
    let values: Vec<f64> = chain.iter().map(|&k| median_of(summary, m, k)).collect();
    let ok = values.windows(2).all(|w| w[0] <= w[1]);
    let text = chain
        .iter()
        .zip(&values)
        .map(|(k, v)| format!("{} {v:.3e}", k.label()))
        .collect::<Vec<_>>()
        .join(" ≤? ");
    (ok, text)
}

/// Desk-scale ordering of median errors at `n = 256, s = 10, m = 154`, tree supports.
pub fn tree_support_ordering() -> CriterionReport {
    timed(6, "strategy ordering (tree supports)", 600, || {
        let cfg = desk_config(
            SupportModel::Tree,
            vec![154],
            vec![
                strategy(StrategyKind::Oracle),
                strategy(StrategyKind::AdaptiveVds),
                strategy(StrategyKind::NonadaptiveVds),
                strategy(StrategyKind::NonadaptiveUniform),
            ],
            2016,
        );
        let summary = match run_summary(&cfg) {
            Ok(s) => s,
            Err(e) => return (false, e),
        };
        let (ordered, text) = ordering(&summary, 154);
        let ratio = median_of(&summary, 154, StrategyKind::NonadaptiveUniform) / median_of(&summary, 154, StrategyKind::Oracle);
        let threshold = 256.0 / (4.0 * 10.0);
        (
            ordered && ratio > threshold,
            format!("{text}; uniform/oracle ratio {ratio:.3e} (need > {threshold})"),
        )
    })
}

/// Small-`m` crossover and large-`m` ordering with uniform supports.
pub fn small_measurement_crossover() -> CriterionReport {
    timed(7, "small-measurement crossover (uniform supports)", 600, || {
        let small: Vec<usize> = (20..=80).step_by(10).collect();
        let mut sweep = small.clone();
        sweep.push(154);
        let cfg = desk_config(
            SupportModel::Uniform,
            sweep,
            StrategyKind::ALL.iter().map(|&k| strategy(k)).collect(),
            2017,
        );
        let summary = match run_summary(&cfg) {
            Ok(s) => s,
            Err(e) => return (false, e),
        };
        let summary = &summary;
        let crossings: Vec<String> = small
            .iter()
            .flat_map(|&m| {
                [
                    (StrategyKind::NonadaptiveUniform, StrategyKind::AdaptiveUniform),
                    (StrategyKind::NonadaptiveVds, StrategyKind::AdaptiveVds),
                ]
                .into_iter()
                .filter(move |&(non, ada)| median_of(summary, m, non) < median_of(summary, m, ada))
                .map(move |(non, _)| format!("m={m} ({})", non.label()))
            })
            .collect();
        let (ordered, text) = ordering(summary, 154);
        (
            !crossings.is_empty() && ordered,
            format!(
                "nonadaptive below adaptive at [{}]; m=154: {text}",
                crossings.join(", ")
            ),
        )
    })
}

fn csv_files(dir: &Path) -> std::io::Result<Vec<(String, Vec<u8>)>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "csv") {
            let name = path.file_name().unwrap().to_string_lossy().into_owned();
            out.push((name, fs::read(&path)?));
        }
    }
    out.sort();
    Ok(out)
}

/// Two runs of one config into separate directories under `scratch` produce
/// byte-identical CSV files.
pub fn determinism(scratch: &Path) -> CriterionReport {
    timed(8, "determinism", 120, || {
        let mut strategies: Vec<StrategySpec> = StrategyKind::ALL.iter().map(|&k| strategy(k)).collect();
        strategies.push(StrategySpec {
            kind: StrategyKind::AdaptiveVds,
            recovery: RecoveryMethod::L1,
        });
        let mut cfg = desk_config(SupportModel::Tree, vec![20, 38], strategies, 8);
        cfg.n = Some(64);
        cfg.s = 4;
        cfg.trials = 12;
        let mut outputs = Vec::new();
        for (k, workers) in [(0, None), (1, Some(1))] {
            let dir = scratch.join(format!("run-{k}"));
            let mut run_cfg = cfg.clone();
            run_cfg.workers = workers;
            if let Err(e) = super::run(&run_cfg, &dir) {
                return (false, format!("run {k}: {e}"));
            }
            match csv_files(&dir) {
                Ok(files) => outputs.push(files),
                Err(e) => return (false, format!("{}: {e}", dir.display())),
            }
        }
        let names: Vec<&str> = outputs[0].iter().map(|(n, _)| n.as_str()).collect();
        let identical = !outputs[0].is_empty() && outputs[0] == outputs[1];
        (identical, format!("compared {} (worker counts differ between runs)", names.join(", ")))
    })
}

/// Runs the checks in `ids` (1–8) in order; `scratch` hosts the determinism runs.
pub fn run_criteria(ids: &[u8], scratch: &Path) -> Vec<CriterionReport> {
    ids.iter()
        .filter_map(|&id| match id {
            1 => Some(closed_form_coherence()),
            2 => Some(repeated_measurement_mse()),
            3 => Some(frobenius_invariant()),
            4 => Some(design_solver_certification()),
            5 => Some(bayes_risk_validator()),
            6 => Some(tree_support_ordering()),
            7 => Some(small_measurement_crossover()),
            8 => Some(determinism(scratch)),
            _ => None,
        })
        .collect()
}
