//! Continuous A-optimal measurement design and its discrete sampler.
//!
//! Given the design operator `B = AΨ_Λ` (one row per ensemble element, one
//! column per support index) the relaxation minimizes
//!
//! ```text
//!     f(w) = trace((B^H diag(w) B)^{-1})   subject to  w ≥ 0,  Σ w ≤ m
//! ```
//!
//! which is convex in `w`. Its partial derivatives are
//! `∂f/∂w_i = -‖b_i M^{-1}‖²` with `M = B^H diag(w) B` and `b_i` the i-th row
//! of `B`. A discrete plan of `m` rows is then drawn with replacement from
//! `p_i = w_i / m`, rejecting plans whose restricted operator loses rank.

use log::debug;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::{hermitian_inverse, numerical_rank, select_rows, singular_values, CMatrix};
use crate::transforms::DftEnsemble;
use crate::{Error, Result};

/// Nonnegative per-row weights with trace budget `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignWeights {
    weights: Vec<f64>,
    budget: usize,
}

impl DesignWeights {
    pub fn new(weights: Vec<f64>, budget: usize) -> Result<Self> {
        if budget == 0 {
            return Err(Error::arg("design budget must be positive"));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::arg("design weights must be finite and nonnegative"));
        }
        let trace: f64 = weights.iter().sum();
        if trace > budget as f64 + 1e-9 * (1.0 + budget as f64) {
            return Err(Error::arg(format!("weights sum to {trace} > budget {budget}")));
        }
        Ok(Self { weights, budget })
    }

    /// `w_i = m/n` on every row.
    pub fn uniform(n: usize, budget: usize) -> Result<Self> {
        Self::new(vec![budget as f64 / n as f64; n], budget)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn trace(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// `B^H diag(w) B`, skipping rows with zero weight.
fn information_matrix(weights: &[f64], b: &CMatrix) -> CMatrix {
    let (n, s) = b.shape();
    let data = b.as_slice();
    let active: Vec<usize> = (0..n).filter(|&i| weights[i] > 0.0).collect();
    let mut gram = CMatrix::zeros(s, s);
    for k in 0..s {
        let bk = &data[k * n..(k + 1) * n];
        for l in k..s {
            let bl = &data[l * n..(l + 1) * n];
            let mut acc = Complex64::new(0.0, 0.0);
            for &i in &active {
                acc += bk[i].conj() * bl[i] * weights[i];
            }
            gram[(k, l)] = acc;
            gram[(l, k)] = acc.conj();
        }
    }
    gram
}

fn trace_re(inv: &CMatrix) -> f64 {
    (0..inv.nrows()).map(|i| inv[(i, i)].re).sum()
}

/// `trace((B^H diag(w) B)^{-1})`, or `+∞` when the weighted Gram is singular.
pub fn design_objective(weights: &[f64], b: &CMatrix) -> f64 {
    assert_eq!(weights.len(), b.nrows(), "one weight per ensemble row");
    match hermitian_inverse(&information_matrix(weights, b)) {
        Some(inv) => {
            let t = trace_re(&inv);
            if t.is_finite() && t > 0.0 {
                t
            } else {
                f64::INFINITY
            }
        }
        None => f64::INFINITY,
    }
}

/// Objective and gradient, `None` when the weighted Gram is singular.
pub fn design_gradient(weights: &[f64], b: &CMatrix) -> Option<(f64, Vec<f64>)> {
    assert_eq!(weights.len(), b.nrows(), "one weight per ensemble row");
    let inv = hermitian_inverse(&information_matrix(weights, b))?;
    let f = trace_re(&inv);
    if !(f.is_finite() && f > 0.0) {
        return None;
    }
    // ∂f/∂w_i = -‖(B M^{-1})_i‖², accumulated one column of B M^{-1} at a time
    let (n, s) = b.shape();
    let data = b.as_slice();
    let mut grad = vec![0.0; n];
    let mut col = vec![Complex64::new(0.0, 0.0); n];
    for l in 0..s {
        col.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
        for k in 0..s {
            let coef = inv[(k, l)];
            for (c, &bik) in col.iter_mut().zip(&data[k * n..(k + 1) * n]) {
                *c += bik * coef;
            }
        }
        for (g, c) in grad.iter_mut().zip(&col) {
            *g -= c.norm_sqr();
        }
    }
    Some((f, grad))
}

/// Euclidean projection onto `{w ≥ 0, Σ w ≤ radius}`.
pub fn project_capped_simplex(v: &[f64], radius: f64) -> Vec<f64> {
    let clipped: Vec<f64> = v.iter().map(|&x| x.max(0.0)).collect();
    if clipped.iter().sum::<f64>() <= radius {
        return clipped;
    }
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumsum += uj;
        let t = (cumsum - radius) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        } else {
            break;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// Stopping rule and iteration cap for [`solve_relaxation`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            max_iters: 5000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RelaxationSolution {
    pub weights: DesignWeights,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after every accepted iteration, starting with the initial point.
    pub history: Vec<f64>,
    /// `m · max_i ‖b_i M^{-1}‖² − f`, an upper bound on the suboptimality.
    pub duality_gap: f64,
}

fn jittered_uniform(n: usize, budget: f64) -> Vec<f64> {
    // deterministic ±1% multiplicative jitter
    let raw: Vec<f64> = (0..n)
        .map(|i| 1.0 + 0.01 * ((i as f64 + 1.0) * 0.618_033_988_749_895).fract().mul_add(2.0, -1.0))
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|r| r * budget / total).collect()
}

/// Newton step restricted to the face `{w_i > 0}` and the budget hyperplane,
/// truncated at the face boundary and backtracked to an Armijo decrease.
///
/// Uses `∂²f/∂w_i∂w_j = 2 Re(P_ij Q_ji)` with `P = B M^{-1} B^H` and
/// `Q = B M^{-2} B^H`. Skipped while the face has more than `s² + 1` rows.
fn newton_on_face(b: &CMatrix, w: &[f64], f: f64, g: &[f64], budget: f64) -> Option<(Vec<f64>, f64, Vec<f64>)> {
    let s = b.ncols();
    let face: Vec<usize> = (0..w.len()).filter(|&i| w[i] > 0.0).collect();
    let k = face.len();
    if k < 2 || k > s * s + 1 {
        return None;
    }
    let inv = hermitian_inverse(&information_matrix(w, b))?;
    let rows = select_rows(b, &face);
    let x = &rows * &inv;
    let p = &x * rows.adjoint();
    let q = &x * x.adjoint();
    let mut h = DMatrix::<f64>::from_fn(k, k, |i, j| 2.0 * (p[(i, j)] * q[(j, i)]).re);
    let ridge = 1e-12 * (0..k).map(|i| h[(i, i)]).fold(0.0, f64::max);
    for i in 0..k {
        h[(i, i)] += ridge;
    }
    let chol = h.cholesky()?;
    let g_face = DVector::from_iterator(k, face.iter().map(|&i| g[i]));
    let h_inv_g = chol.solve(&g_face);
    let h_inv_1 = chol.solve(&DVector::from_element(k, 1.0));
    let slack = budget - face.iter().map(|&i| w[i]).sum::<f64>();
    let nu = -(slack + h_inv_g.sum()) / h_inv_1.sum();
    let d = -(h_inv_g + h_inv_1 * nu);
    let slope = g_face.dot(&d);
    if !(slope < 0.0) {
        return None;
    }
    let mut t = face
        .iter()
        .zip(d.iter())
        .filter(|(_, &di)| di < 0.0)
        .map(|(&i, &di)| -w[i] / di)
        .fold(1.0f64, f64::min);
    for _ in 0..30 {
        let mut trial = w.to_vec();
        for (&i, &di) in face.iter().zip(d.iter()) {
            let v = w[i] + t * di;
            trial[i] = if v > 1e-14 * budget { v } else { 0.0 };
        }
        if let Some((ft, gt)) = design_gradient(&trial, b) {
            if ft <= f + 1e-4 * t * slope {
                return Some((trial, ft, gt));
            }
        }
        t *= 0.5;
    }
    None
}

/// Solves the continuous A-optimal design relaxation by projected gradient
/// descent with Barzilai–Borwein step proposals and Armijo backtracking.
///
/// Terminates when the relative duality gap `(m·max_i d_i − f)/f` or the
/// unit-step projected-gradient norm `‖w − P(w − ∇f)‖ / (1 + f)` drops below
/// `tol`, when no descent step can be found, or after `max_iters`.
pub fn solve_relaxation(b: &CMatrix, budget: usize, opts: &SolverOptions) -> Result<RelaxationSolution> {
    if budget == 0 {
        return Err(Error::arg("design budget must be positive"));
    }
    let (n, s) = (b.nrows(), b.ncols());
    if s == 0 || numerical_rank(b) < s {
        return Err(Error::SupportNotIdentifiable);
    }
    let m = budget as f64;
    let mut w = jittered_uniform(n, m);
    let (mut f, mut g) = design_gradient(&w, b).ok_or(Error::SupportNotIdentifiable)?;
    let mut history = vec![f];
    let max_abs_g = g.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
    let mut step = (m / n as f64) / max_abs_g.max(f64::MIN_POSITIVE);
    let mut converged = false;
    let mut gap = f64::INFINITY;
    let mut iterations = 0;

    while iterations < opts.max_iters {
        let d_max = g.iter().fold(0.0f64, |a, &x| a.max(-x));
        gap = m * d_max - f;
        if gap <= opts.tol * f {
            converged = true;
            break;
        }
        let unit = project_capped_simplex(
            &w.iter().zip(&g).map(|(wi, gi)| wi - gi).collect::<Vec<_>>(),
            m,
        );
        let pg = w.iter().zip(&unit).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        if pg <= opts.tol * (1.0 + f.abs()) {
            converged = true;
            break;
        }

        let mut accepted = None;
        for _ in 0..60 {
            let trial = project_capped_simplex(
                &w.iter().zip(&g).map(|(wi, gi)| wi - step * gi).collect::<Vec<_>>(),
                m,
            );
            let decrease: f64 = g.iter().zip(trial.iter().zip(&w)).map(|(gi, (a, b))| gi * (a - b)).sum();
            if let Some((ft, gt)) = design_gradient(&trial, b) {
                if ft <= f + 1e-4 * decrease {
                    accepted = Some((trial, ft, gt));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((w_next, f_next, g_next)) = accepted else {
            debug!("design solver: no descent step after {iterations} iterations");
            break;
        };
        iterations += 1;

        // Barzilai–Borwein proposal for the next step
        let (mut ss, mut sy) = (0.0, 0.0);
        for i in 0..n {
            let dw = w_next[i] - w[i];
            ss += dw * dw;
            sy += dw * (g_next[i] - g[i]);
        }
        step = if sy > 0.0 && ss > 0.0 { ss / sy } else { step * 2.0 };

        let improved = f_next < f;
        w = w_next;
        f = f_next;
        g = g_next;
        history.push(f);
        if let Some((w_newton, f_newton, g_newton)) = newton_on_face(b, &w, f, &g, m) {
            w = w_newton;
            f = f_newton;
            g = g_newton;
            history.push(f);
        }
        if !improved && ss == 0.0 {
            break;
        }
    }

    // clean projection round-off so the budget invariant holds exactly
    let total: f64 = w.iter().sum();
    if total > m {
        w.iter_mut().for_each(|x| *x *= m / total);
        f = design_objective(&w, b);
    }
    Ok(RelaxationSolution {
        weights: DesignWeights::new(w, budget)?,
        objective: f,
        iterations,
        converged,
        history,
        duality_gap: gap,
    })
}

/// Sampling distribution `p_i = w_i / trace(w)` (equal to `w_i/m` when the
/// budget binds).
pub fn sampling_pmf(weights: &DesignWeights) -> Result<Vec<f64>> {
    let trace = weights.trace();
    if !(trace > 0.0) {
        return Err(Error::arg("design weights are all zero"));
    }
    Ok(weights.weights().iter().map(|w| w / trace).collect())
}

/// A length-`m` sequence of ensemble rows, repeats allowed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasurementPlan {
    pub rows: Vec<usize>,
    /// Plans rejected for rank deficiency before this one was accepted.
    #[serde(default)]
    pub rejections: usize,
}

impl MeasurementPlan {
    pub fn new(rows: Vec<usize>) -> Self {
        Self { rows, rejections: 0 }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// `A'`, the `m × n` matrix of chosen DFT rows.
    pub fn realized_matrix(&self, dft: &DftEnsemble) -> CMatrix {
        dft.rows_matrix(&self.rows)
    }

    /// The chosen rows of an ensemble-indexed operator (e.g. `A'Ψ_Λ` from `AΨ_Λ`).
    pub fn restrict(&self, operator: &CMatrix) -> CMatrix {
        select_rows(operator, &self.rows)
    }

    /// Concatenation of two plans (stage 1 followed by stage 2).
    pub fn concat(&self, other: &MeasurementPlan) -> MeasurementPlan {
        let mut rows = self.rows.clone();
        rows.extend_from_slice(&other.rows);
        MeasurementPlan {
            rows,
            rejections: self.rejections + other.rejections,
        }
    }
}

fn check_pmf(pmf: &[f64]) -> Result<()> {
    if pmf.is_empty() || pmf.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::arg("pmf entries must be finite and nonnegative"));
    }
    let total: f64 = pmf.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::arg(format!("pmf sums to {total}, not 1")));
    }
    Ok(())
}

/// `m` rows drawn i.i.d. from `pmf`, without any rank check.
pub fn sample_rows<R: Rng + ?Sized>(pmf: &[f64], m: usize, rng: &mut R) -> Result<Vec<usize>> {
    check_pmf(pmf)?;
    let dist = WeightedIndex::new(pmf).map_err(|e| Error::arg(format!("pmf: {e}")))?;
    Ok((0..m).map(|_| dist.sample(rng)).collect())
}

/// Draws `m` rows with replacement from `pmf`, redrawing the whole plan until
/// the restricted operator `A'Ψ_Λ` (rows of `b`) has rank `s`.
pub fn draw_plan<R: Rng + ?Sized>(
    pmf: &[f64],
    m: usize,
    b: &CMatrix,
    rng: &mut R,
    max_rejects: usize,
) -> Result<MeasurementPlan> {
    let s = b.ncols();
    if pmf.len() != b.nrows() {
        return Err(Error::arg("pmf length differs from the ensemble size"));
    }
    if m < s {
        return Err(Error::arg(format!("{m} measurements cannot identify {s} coefficients")));
    }
    check_pmf(pmf)?;
    let dist = WeightedIndex::new(pmf).map_err(|e| Error::arg(format!("pmf: {e}")))?;
    for rejections in 0..max_rejects.max(1) {
        let rows: Vec<usize> = (0..m).map(|_| dist.sample(rng)).collect();
        let plan = MeasurementPlan { rows, rejections };
        if numerical_rank(&plan.restrict(b)) >= s {
            return Ok(plan);
        }
    }
    Err(Error::RejectionLimit(max_rejects))
}

/// `σ² ‖(A'Ψ_Λ)^†‖_F² = σ² Σ 1/σ_i²` for a full-column-rank restricted operator.
pub fn oracle_mse(restricted: &CMatrix, noise_var: f64) -> Result<f64> {
    let sv = singular_values(restricted);
    if crate::linalg::rank_of_singular_values(&sv) < restricted.ncols() {
        return Err(Error::RankDeficient("restricted operator is rank deficient".into()));
    }
    Ok(noise_var * sv.iter().map(|s| 1.0 / (s * s)).sum::<f64>())
}

/// `σ² trace((Φ^H Φ)^{-1})`, the explicit trace-inverse form of [`oracle_mse`].
pub fn oracle_mse_trace(restricted: &CMatrix, noise_var: f64) -> Result<f64> {
    let gram = restricted.adjoint() * restricted;
    let inv = hermitian_inverse(&gram)
        .ok_or_else(|| Error::RankDeficient("restricted Gram is singular".into()))?;
    Ok(noise_var * (0..inv.nrows()).map(|i| inv[(i, i)].re).sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::select_columns;
    use crate::transforms::{BasisKind, SparsityBasis};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fourier_haar(n: usize) -> CMatrix {
        let dft = DftEnsemble::new(n).unwrap();
        SparsityBasis::new(BasisKind::Haar, n)
            .unwrap()
            .coefficient_ensemble(&dft)
            .unwrap()
    }

    fn random_weights(n: usize, budget: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
        let t: f64 = raw.iter().sum();
        raw.iter().map(|r| r * budget / t).collect()
    }

    #[test]
    fn objective_examples() {
        let n = 16;
        let m = 8;
        let f = DftEnsemble::new(n).unwrap().matrix();
        let b = select_columns(&f, &[2, 5, 11]);
        let w = DesignWeights::uniform(n, m).unwrap();
        let obj = design_objective(w.weights(), &b);
        assert!((obj - 3.0 * n as f64 / m as f64).abs() < 1e-12);

        let g = fourier_haar(n);
        let b0 = select_columns(&g, &[0]);
        let mut w = vec![0.0; n];
        w[0] = m as f64;
        assert!((design_objective(&w, &b0) - 1.0 / m as f64).abs() < 1e-14);

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = random_weights(n, 5.0, &mut rng);
        let b = select_columns(&g, &[1, 6]);
        let scaled: Vec<f64> = w.iter().map(|x| x * 3.0).collect();
        let (a, c) = (design_objective(&w, &b), design_objective(&scaled, &b));
        assert!((c - a / 3.0).abs() <= 1e-12 * a);

        // singular Gram: weight only on rows orthogonal to the scaling column
        let mut w = vec![1.0; n];
        w[0] = 0.0;
        assert!(design_objective(&w, &b0).is_infinite() || design_objective(&w, &b0) > 1e20);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let n = 32;
        let g = fourier_haar(n);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for trial in 0..20 {
            let s = 1 + trial % 5;
            let support = rand::seq::index::sample(&mut rng, n, s).into_vec();
            let b = select_columns(&g, &support);
            let w = random_weights(n, 10.0, &mut rng);
            let (_, grad) = design_gradient(&w, &b).unwrap();
            let fd: Vec<f64> = (0..n)
                .map(|i| {
                    let h = 1e-6 * w[i].max(1e-3);
                    let (mut up, mut dn) = (w.clone(), w.clone());
                    up[i] += h;
                    dn[i] -= h;
                    (design_objective(&up, &b) - design_objective(&dn, &b)) / (2.0 * h)
                })
                .collect();
            let num: f64 = fd.iter().zip(&grad).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let den: f64 = grad.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(num <= 1e-5 * den, "trial {trial}: {num} / {den}");
        }
    }

    #[test]
    fn objective_is_convex_along_segments() {
        let n = 32;
        let g = fourier_haar(n);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let s = rng.random_range(1..6);
            let support = rand::seq::index::sample(&mut rng, n, s).into_vec();
            let b = select_columns(&g, &support);
            let w1 = random_weights(n, 12.0, &mut rng);
            let w2 = random_weights(n, 12.0, &mut rng);
            let t: f64 = rng.random_range(0.01..0.99);
            let mix: Vec<f64> = w1.iter().zip(&w2).map(|(a, b)| t * a + (1.0 - t) * b).collect();
            let lhs = design_objective(&mix, &b);
            let rhs = t * design_objective(&w1, &b) + (1.0 - t) * design_objective(&w2, &b);
            assert!(lhs <= rhs + 1e-9, "{lhs} > {rhs}");
        }
    }

    #[test]
    fn projection_properties() {
        let p = project_capped_simplex(&[0.5, -1.0, 0.2], 2.0);
        assert_eq!(p, vec![0.5, 0.0, 0.2]);
        let p = project_capped_simplex(&[3.0, 1.0, 0.0], 2.0);
        assert!((p.iter().sum::<f64>() - 2.0).abs() < 1e-12);
        assert!((p[0] - 2.0).abs() < 1e-12 && p[1] == 0.0);
        let p = project_capped_simplex(&[1.0, 1.0, 1.0, 1.0], 2.0);
        assert!(p.iter().all(|x| (x - 0.5).abs() < 1e-12));
    }

    #[test]
    fn solver_scaling_support_concentrates_on_dc() {
        let n = 64;
        let m = 20;
        let b = select_columns(&fourier_haar(n), &[0]);
        let sol = solve_relaxation(&b, m, &SolverOptions::default()).unwrap();
        assert!(sol.weights.weights()[0] >= 0.999 * m as f64);
        assert!((sol.objective * m as f64 - 1.0).abs() <= 1e-6);
        assert!(sol.history.windows(2).all(|h| h[1] <= h[0]));
    }

    #[test]
    fn solver_finest_block_hits_lower_bound() {
        let n = 64;
        let m = 20;
        let b = select_columns(&fourier_haar(n), &[40]);
        let sol = solve_relaxation(&b, m, &SolverOptions::default()).unwrap();
        let expect = (n as f64 / 2.0) / m as f64;
        assert!((sol.objective / expect - 1.0).abs() <= 1e-6, "{} vs {expect}", sol.objective);
        assert!(sol.history.windows(2).all(|h| h[1] <= h[0]));
        assert!((sol.weights.trace() - m as f64).abs() <= 1e-6 * m as f64);
    }

    #[test]
    fn solver_multi_support_certifies_and_saturates() {
        let n = 128;
        let m = 40;
        let g = fourier_haar(n);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..5 {
            let support = crate::signals::sample_tree_support(n, 8, &mut rng).unwrap();
            let b = select_columns(&g, &support);
            let sol = solve_relaxation(&b, m, &SolverOptions::default()).unwrap();
            assert!(sol.objective.is_finite());
            assert!((sol.weights.trace() - m as f64).abs() <= 1e-6 * m as f64);
            assert!(sol.history.windows(2).all(|h| h[1] <= h[0]));
            let uniform = design_objective(DesignWeights::uniform(n, m).unwrap().weights(), &b);
            assert!(sol.objective <= uniform);
        }
    }

    #[test]
    fn solver_rejects_rank_deficient_operator() {
        let b = CMatrix::from_fn(8, 2, |i, _| Complex64::new(i as f64, 0.0));
        assert!(matches!(
            solve_relaxation(&b, 4, &SolverOptions::default()),
            Err(Error::SupportNotIdentifiable)
        ));
    }

    #[test]
    fn pmf_examples() {
        let w = DesignWeights::uniform(8, 4).unwrap();
        assert!(sampling_pmf(&w).unwrap().iter().all(|p| (p - 0.125).abs() < 1e-15));
        let w = DesignWeights::new(vec![0.0, 5.0, 0.0], 5).unwrap();
        assert_eq!(sampling_pmf(&w).unwrap(), vec![0.0, 1.0, 0.0]);
        let w = DesignWeights::new(vec![2.0, 1.0, 1.0], 4).unwrap();
        assert_eq!(sampling_pmf(&w).unwrap(), vec![0.5, 0.25, 0.25]);
        let w = DesignWeights::new(vec![0.0, 0.0], 4).unwrap();
        assert!(sampling_pmf(&w).is_err());
        assert!(DesignWeights::new(vec![3.0, 2.0], 4).is_err());
        assert!(DesignWeights::new(vec![-1.0, 2.0], 4).is_err());
    }

    #[test]
    fn draw_plan_examples() {
        let n = 16;
        let g = fourier_haar(n);
        let mut pmf = vec![0.0; n];
        pmf[0] = 1.0;
        let b1 = select_columns(&g, &[0]);
        let plan = draw_plan(&pmf, 5, &b1, &mut ChaCha8Rng::seed_from_u64(0), 100).unwrap();
        assert_eq!(plan.rows, vec![0; 5]);
        assert_eq!(plan.rejections, 0);

        let b2 = select_columns(&g, &[0, 3]);
        let err = draw_plan(&pmf, 5, &b2, &mut ChaCha8Rng::seed_from_u64(0), 100).unwrap_err();
        assert!(matches!(err, Error::RejectionLimit(100)));
        assert!(draw_plan(&pmf, 1, &b2, &mut ChaCha8Rng::seed_from_u64(0), 100).is_err());
    }

    #[test]
    fn uniform_plans_identify_random_supports() {
        let n = 1024;
        let dft = DftEnsemble::new(n).unwrap();
        let haar = crate::transforms::HaarBasis::new(n).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let support = crate::signals::sample_uniform_support(n, 10, &mut rng).unwrap();
        let b = CMatrix::from_fn(n, support.len(), |_, _| Complex64::new(0.0, 0.0));
        let mut b = b;
        for (c, &idx) in support.iter().enumerate() {
            let col = crate::linalg::to_complex(&haar.column(idx));
            for (j, v) in dft.forward(&col).unwrap().into_iter().enumerate() {
                b[(j, c)] = v;
            }
        }
        let pmf = vec![1.0 / n as f64; n];
        let runs = 1000;
        let first = (0..runs)
            .filter(|_| draw_plan(&pmf, 100, &b, &mut rng, 100).unwrap().rejections == 0)
            .count();
        assert!(first as f64 >= 0.99 * runs as f64, "{first}");
    }

    #[test]
    fn oracle_mse_examples() {
        let n = 64;
        let g = fourier_haar(n);
        let (j, idx, m, sigma2) = (32usize, 40usize, 10usize, 1e-4);
        let plan = MeasurementPlan::new(vec![j; m]);
        let restricted = plan.restrict(&select_columns(&g, &[idx]));
        let coh = g[(j, idx)].norm();
        let expect = (1.0 / m as f64) / (coh * coh) * sigma2;
        assert!((oracle_mse(&restricted, sigma2).unwrap() / expect - 1.0).abs() < 1e-12);

        // Gram = c·I
        let c: f64 = 2.5;
        let q = CMatrix::from_fn(6, 3, |i, k| Complex64::new(if i == k { c.sqrt() } else { 0.0 }, 0.0));
        assert!((oracle_mse(&q, sigma2).unwrap() - 3.0 * sigma2 / c).abs() < 1e-15);

        let bad = CMatrix::from_element(4, 2, Complex64::new(1.0, 0.0));
        assert!(oracle_mse(&bad, sigma2).is_err());
    }

    #[test]
    fn oracle_mse_svd_equals_trace_form() {
        let n = 64;
        let g = fourier_haar(n);
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..50 {
            let support = crate::signals::sample_tree_support(n, 5, &mut rng).unwrap();
            let rows: Vec<usize> = (0..30).map(|_| rng.random_range(0..n)).chain(0..n).collect();
            let r = MeasurementPlan::new(rows).restrict(&select_columns(&g, &support));
            let a = oracle_mse(&r, 1e-3).unwrap();
            let b = oracle_mse_trace(&r, 1e-3).unwrap();
            assert!((a / b - 1.0).abs() <= 1e-10);
        }
    }
}
