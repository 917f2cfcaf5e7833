//! Sparse recovery in the coefficient domain: CoSaMP, basis-pursuit denoising
//! (BPDN), top-`s` thresholding and least squares on a fixed support.
//!
//! Every routine works with the effective operator `Φ = A'Ψ` (`m × n`, complex)
//! and complex measurements `y`. Estimates are complex; canonical-domain
//! errors equal coefficient-domain errors because `Ψ` is unitary.

use std::cell::Cell;

use log::warn;
use nalgebra::DVector;
use num_complex::Complex64;

use crate::linalg::{
    adjoint_mat_vec, mat_vec, norm_sqr, rank_of_singular_values, select_columns, CMatrix, CVector,
};
use crate::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Measurements together with the operator that produced them.
#[derive(Debug, Clone, Copy)]
pub struct RecoveryProblem<'a> {
    pub y: &'a [Complex64],
    /// Effective sensing operator `A'Ψ`, `m × n`.
    pub operator: &'a CMatrix,
    pub sparsity: usize,
    pub noise_var: f64,
}

impl<'a> RecoveryProblem<'a> {
    pub fn new(y: &'a [Complex64], operator: &'a CMatrix, sparsity: usize, noise_var: f64) -> Result<Self> {
        if y.is_empty() {
            return Err(Error::arg("at least one measurement is required"));
        }
        if operator.nrows() != y.len() {
            return Err(Error::arg(format!(
                "operator has {} rows but there are {} measurements",
                operator.nrows(),
                y.len()
            )));
        }
        if sparsity == 0 {
            return Err(Error::arg("sparsity must be at least 1"));
        }
        if !(noise_var >= 0.0) {
            return Err(Error::arg("noise variance must be ≥ 0"));
        }
        Ok(Self {
            y,
            operator,
            sparsity,
            noise_var,
        })
    }

    pub fn n(&self) -> usize {
        self.operator.ncols()
    }

    pub fn m(&self) -> usize {
        self.operator.nrows()
    }

    fn residual(&self, coefficients: &[Complex64]) -> Vec<Complex64> {
        let fit = mat_vec(self.operator, coefficients);
        self.y.iter().zip(fit).map(|(a, b)| a - b).collect()
    }

    fn residual_norm(&self, coefficients: &[Complex64]) -> f64 {
        norm_sqr(&self.residual(coefficients)).sqrt()
    }
}

/// Indices of the `s` largest entries of `magnitudes`, ties broken by the
/// lower index, returned in ascending order.
pub fn top_s_by_magnitude(magnitudes: &[f64], s: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..magnitudes.len()).collect();
    idx.sort_by(|&a, &b| magnitudes[b].total_cmp(&magnitudes[a]).then(a.cmp(&b)));
    idx.truncate(s);
    idx.sort_unstable();
    idx
}

/// Support of the `s` largest-magnitude coefficients.
pub fn top_s_threshold(alpha: &[Complex64], s: usize) -> Vec<usize> {
    let mags: Vec<f64> = alpha.iter().map(|z| z.norm()).collect();
    top_s_by_magnitude(&mags, s)
}

/// Minimum-norm least squares `Φ_Λ^† y` for an operator of full column rank.
pub fn ls_on_support(y: &[Complex64], restricted: &CMatrix) -> Result<Vec<Complex64>> {
    if restricted.nrows() != y.len() {
        return Err(Error::arg("restricted operator and measurements disagree in length"));
    }
    let cols = restricted.ncols();
    if cols == 0 {
        return Ok(Vec::new());
    }
    let svd = restricted.clone().svd(true, true);
    let sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    let rank = rank_of_singular_values(&sv);
    if rank < cols {
        return Err(Error::RankDeficient(format!(
            "restricted operator has rank {rank} < {cols}"
        )));
    }
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    // x = V Σ^{-1} U^H y
    let uy = u.adjoint() * CVector::from_column_slice(y);
    let scaled = DVector::from_iterator(
        uy.len(),
        uy.iter().zip(&sv).map(|(c, &s)| c / s),
    );
    let x = v_t.adjoint() * scaled;
    Ok(x.iter().copied().collect())
}

/// Least squares on the columns in `support`, ridge-regularized by
/// `1e-12 · trace/|T|` when the normal equations are ill-conditioned.
fn regularized_ls(operator: &CMatrix, y: &[Complex64], support: &[usize]) -> Vec<Complex64> {
    let sub = select_columns(operator, support);
    let rhs = sub.adjoint() * CVector::from_column_slice(y);
    let gram = sub.adjoint() * &sub;
    let t = support.len();
    if let Some(chol) = gram.clone().cholesky() {
        let l = chol.l_dirty();
        let diag: Vec<f64> = (0..t).map(|i| l[(i, i)].re.powi(2)).collect();
        let (lo, hi) = diag
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), &d| (lo.min(d), hi.max(d)));
        if lo > 1e-10 * hi {
            return chol.solve(&rhs).iter().copied().collect();
        }
    }
    let trace: f64 = (0..t).map(|i| gram[(i, i)].re).sum();
    let ridge = 1e-12 * trace / t as f64;
    let mut reg = gram;
    for i in 0..t {
        reg[(i, i)] += ridge.max(f64::MIN_POSITIVE);
    }
    match reg.cholesky() {
        Some(chol) => chol.solve(&rhs).iter().copied().collect(),
        None => vec![ZERO; t],
    }
}

/// Result of [`cosamp`].
#[derive(Debug, Clone)]
pub struct CosampOutput {
    pub coefficients: Vec<Complex64>,
    /// Sorted support of `coefficients`.
    pub support: Vec<usize>,
    pub iterations: usize,
    pub residual_norm: f64,
}

/// Compressive sampling matching pursuit.
///
/// Each iteration forms the proxy `Φ^H r`, merges its `2s` largest entries
/// with the current support, solves least squares on the merged set, prunes
/// to the `s` largest and updates the residual. Stops after `max_iters` or
/// once the residual no longer drops by more than `1e-8` relative; the best
/// iterate seen is returned.
pub fn cosamp(problem: &RecoveryProblem<'_>, max_iters: usize) -> Result<CosampOutput> {
    if max_iters == 0 {
        return Err(Error::arg("max_iters must be at least 1"));
    }
    let n = problem.n();
    let s = problem.sparsity.min(n);
    let y_norm = norm_sqr(problem.y).sqrt();
    let mut coefficients = vec![ZERO; n];
    let mut support: Vec<usize> = Vec::new();
    if y_norm == 0.0 {
        return Ok(CosampOutput {
            coefficients,
            support,
            iterations: 0,
            residual_norm: 0.0,
        });
    }
    let mut residual = problem.y.to_vec();
    let mut best = y_norm;
    let mut iterations = 0;

    for _ in 0..max_iters {
        iterations += 1;
        let proxy = adjoint_mat_vec(problem.operator, &residual);
        let mags: Vec<f64> = proxy.iter().map(|z| z.norm()).collect();
        let mut merged = top_s_by_magnitude(&mags, 2 * s);
        merged.extend_from_slice(&support);
        merged.sort_unstable();
        merged.dedup();

        let b = regularized_ls(problem.operator, problem.y, &merged);
        let keep = top_s_threshold(&b, s);
        let mut next = vec![ZERO; n];
        for &k in &keep {
            next[merged[k]] = b[k];
        }
        let next_residual = problem.residual(&next);
        let res = norm_sqr(&next_residual).sqrt();

        if res >= best {
            break;
        }
        let stalled = res > best * (1.0 - 1e-8);
        coefficients = next;
        support = keep
            .iter()
            .map(|&k| merged[k])
            .filter(|&i| coefficients[i] != ZERO)
            .collect();
        support.sort_unstable();
        residual = next_residual;
        best = res;
        if stalled || res <= 1e-14 * y_norm {
            break;
        }
    }

    Ok(CosampOutput {
        coefficients,
        support,
        iterations,
        residual_norm: best,
    })
}

/// Residual radius `σ√m (1 + 2/√m)` used for BPDN when the noise variance is known.
pub fn default_epsilon(noise_var: f64, m: usize) -> f64 {
    let root_m = (m as f64).sqrt();
    noise_var.sqrt() * root_m * (1.0 + 2.0 / root_m)
}

/// Result of [`bpdn`].
#[derive(Debug, Clone)]
pub struct BpdnOutput {
    pub coefficients: Vec<Complex64>,
    pub residual_norm: f64,
    pub l1_norm: f64,
    /// `false` when a subproblem hit its iteration cap or feasibility had to be
    /// restored by a minimum-norm correction.
    pub converged: bool,
}

fn l1(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm()).sum()
}

fn soft_threshold(z: Complex64, tau: f64) -> Complex64 {
    let r = z.norm();
    if r <= tau {
        ZERO
    } else {
        z * ((r - tau) / r)
    }
}

/// FISTA with adaptive restart on `½‖Φx − y‖² + λ‖x‖₁`.
fn lasso_fista(
    op: &CMatrix,
    y: &[Complex64],
    lambda: f64,
    lipschitz: f64,
    start: &[Complex64],
    max_iters: usize,
    tol: f64,
) -> (Vec<Complex64>, bool) {
    let step = 1.0 / lipschitz;
    let mut x = start.to_vec();
    let mut z = x.clone();
    let mut theta = 1.0f64;
    for _ in 0..max_iters {
        let fit = mat_vec(op, &z);
        let r: Vec<Complex64> = fit.iter().zip(y).map(|(a, b)| a - b).collect();
        let grad = adjoint_mat_vec(op, &r);
        let next: Vec<Complex64> = z
            .iter()
            .zip(&grad)
            .map(|(zi, gi)| soft_threshold(zi - gi * step, lambda * step))
            .collect();

        let diff: Vec<Complex64> = next.iter().zip(&x).map(|(a, b)| a - b).collect();
        let change = norm_sqr(&diff).sqrt();
        let scale = norm_sqr(&next).sqrt().max(f64::MIN_POSITIVE);

        // restart momentum when the step opposes the previous direction
        let along: f64 = z
            .iter()
            .zip(&next)
            .zip(&diff)
            .map(|((zi, ni), di)| ((zi - ni).conj() * di).re)
            .sum();
        let theta_next = if along > 0.0 {
            1.0
        } else {
            (1.0 + (1.0 + 4.0 * theta * theta).sqrt()) / 2.0
        };
        let momentum = if along > 0.0 { 0.0 } else { (theta - 1.0) / theta_next };
        z = next
            .iter()
            .zip(&diff)
            .map(|(ni, di)| ni + di * momentum)
            .collect();
        theta = theta_next;
        x = next;
        if change <= tol * scale {
            return (x, true);
        }
    }
    (x, false)
}

/// Least squares on the support of `x`, if it stays sign-consistent with `x`.
fn debias_on_support(op: &CMatrix, y: &[Complex64], x: &[Complex64]) -> Option<Vec<Complex64>> {
    let max = x.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return None;
    }
    let support: Vec<usize> = (0..x.len()).filter(|&i| x[i].norm() > 1e-9 * max).collect();
    if support.len() > op.nrows() {
        return None;
    }
    let vals = ls_on_support(y, &select_columns(op, &support)).ok()?;
    let consistent = support
        .iter()
        .zip(&vals)
        .all(|(&i, v)| (x[i].conj() * v).re > 0.0);
    if !consistent {
        return None;
    }
    let mut out = vec![ZERO; x.len()];
    for (&i, v) in support.iter().zip(vals) {
        out[i] = v;
    }
    Some(out)
}

/// `x + Φ^†(y − Φx)`: the nearest point (in ℓ2) that fits `y` as well as possible.
fn min_norm_correction(op: &CMatrix, y: &[Complex64], x: &[Complex64]) -> Vec<Complex64> {
    let r: Vec<Complex64> = {
        let fit = mat_vec(op, x);
        y.iter().zip(fit).map(|(a, b)| a - b).collect()
    };
    let svd = op.clone().svd(true, true);
    let corr = svd
        .solve(&CVector::from_column_slice(&r), 1e-12 * svd.singular_values.max())
        .map(|c| c.iter().copied().collect::<Vec<_>>())
        .unwrap_or_else(|_| vec![ZERO; x.len()]);
    x.iter().zip(corr).map(|(a, b)| a + b).collect()
}

/// Basis-pursuit denoising: `min ‖α‖₁` subject to `‖Φα − y‖₂ ≤ ε`.
///
/// Solves the penalized problem `½‖Φα − y‖² + λ‖α‖₁` with FISTA (at most
/// `max_iters` iterations per penalty, relative iterate-change tolerance
/// `1e-6`), descending `λ` geometrically from `‖Φ^H y‖∞` until the residual
/// fits inside `ε`, then bisecting `λ` in log-space so the residual sits at
/// the constraint boundary. When `ε` lies below what the path can reach
/// (e.g. `ε = 0`), the active set is debiased by least squares.
///
/// Feasibility is checked against `ε(1 + 1e-6)` plus a `1e-12·‖y‖` floor for
/// round-off.
pub fn bpdn(problem: &RecoveryProblem<'_>, epsilon: f64, max_iters: usize) -> Result<BpdnOutput> {
    if !(epsilon >= 0.0) {
        return Err(Error::arg("epsilon must be ≥ 0"));
    }
    if max_iters == 0 {
        return Err(Error::arg("max_iters must be at least 1"));
    }
    const TOL: f64 = 1e-6;
    let op = problem.operator;
    let y = problem.y;
    let n = problem.n();
    let y_norm = norm_sqr(y).sqrt();
    let bound = epsilon * (1.0 + 1e-6) + 1e-12 * y_norm;
    let zero = vec![ZERO; n];
    let finish = |coefficients: Vec<Complex64>, converged: bool| {
        let residual_norm = problem.residual_norm(&coefficients);
        BpdnOutput {
            l1_norm: l1(&coefficients),
            coefficients,
            residual_norm,
            converged,
        }
    };
    if y_norm <= epsilon {
        return Ok(finish(zero, true));
    }

    let proxy = adjoint_mat_vec(op, y);
    let lambda_max = proxy.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let sigma_max = crate::linalg::singular_values(op).first().copied().unwrap_or(0.0);
    if lambda_max == 0.0 || sigma_max == 0.0 {
        // y is orthogonal to the range of Φ: nothing beats zero
        warn!("bpdn: measurements orthogonal to the operator range");
        return Ok(finish(zero, false));
    }
    let lipschitz = sigma_max * sigma_max * (1.0 + 1e-9);
    let all_converged = Cell::new(true);
    let solve = |lambda: f64, start: &[Complex64]| {
        let (x, ok) = lasso_fista(op, y, lambda, lipschitz, start, max_iters, TOL);
        all_converged.set(all_converged.get() && ok);
        let res = problem.residual_norm(&x);
        (x, res)
    };

    // descend until feasible
    let mut hi = (lambda_max, zero.clone());
    let mut feasible: Option<(f64, Vec<Complex64>, f64)> = None;
    let mut lambda = lambda_max * 0.5;
    let mut last = zero.clone();
    while lambda > lambda_max * 1e-12 {
        let (x, res) = solve(lambda, &hi.1);
        if res <= bound {
            feasible = Some((lambda, x, res));
            break;
        }
        if let Some(d) = debias_on_support(op, y, &x) {
            if problem.residual_norm(&d) <= bound && epsilon <= 1e-12 * y_norm {
                // ε at round-off level: the debiased active set is the limit of the path
                return Ok(finish(d, all_converged.get()));
            }
        }
        last = x.clone();
        hi = (lambda, x);
        lambda *= 0.3;
    }

    let Some((mut lo_lambda, mut best, mut best_res)) = feasible else {
        let restored = debias_on_support(op, y, &last)
            .filter(|d| problem.residual_norm(d) <= bound)
            .unwrap_or_else(|| min_norm_correction(op, y, &last));
        warn!("bpdn: residual bound {epsilon:e} not reached along the penalty path");
        return Ok(finish(restored, false));
    };

    // bisection towards the constraint boundary
    let mut hi_lambda = hi.0;
    for _ in 0..40 {
        if best_res >= epsilon * (1.0 - 1e-4) || hi_lambda / lo_lambda < 1.0 + 1e-6 {
            break;
        }
        let mid = (lo_lambda * hi_lambda).sqrt();
        let (x, res) = solve(mid, &best);
        if res <= bound {
            lo_lambda = mid;
            best = x;
            best_res = res;
        } else {
            hi_lambda = mid;
        }
    }
    Ok(finish(best, all_converged.get()))
}
