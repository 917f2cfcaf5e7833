//! Sparse test signals, coefficient values and measurement noise.
//!
//! Supports are either drawn uniformly or grown as a rooted subtree of the
//! Haar index tree: node 0 (scaling) has the single child 1, and node `j ≥ 1`
//! has children `2j` and `2j + 1` when they are below `n`.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::transforms::{validate_support, BasisKind, SparsityBasis};
use crate::{Error, Result};

/// How the support of a planted signal is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SupportModel {
    Uniform,
    Tree,
}

/// An exactly `s`-sparse signal, `x = Ψ α`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSignal {
    pub n: usize,
    /// Sorted support of `coefficients`.
    pub support: Vec<usize>,
    pub coefficients: Vec<f64>,
    pub basis: BasisKind,
    pub x: Vec<f64>,
}

impl SparseSignal {
    pub fn sparsity(&self) -> usize {
        self.support.len()
    }

    /// Builds a signal from coefficients supported exactly on `support`.
    pub fn from_coefficients(
        basis: &SparsityBasis,
        support: Vec<usize>,
        coefficients: Vec<f64>,
    ) -> Result<Self> {
        let n = basis.n();
        if coefficients.len() != n {
            return Err(Error::arg("coefficient vector has the wrong length"));
        }
        let x = basis.synthesize(&coefficients)?;
        let mut support = support;
        support.sort_unstable();
        Ok(Self {
            n,
            support,
            coefficients,
            basis: basis.kind(),
            x,
        })
    }

    /// Draws a support from `model` and `N(√n, 1)` values on it.
    pub fn generate<R: Rng + ?Sized>(
        basis: &SparsityBasis,
        s: usize,
        model: SupportModel,
        rng: &mut R,
    ) -> Result<Self> {
        let n = basis.n();
        let support = match model {
            SupportModel::Uniform => sample_uniform_support(n, s, rng)?,
            SupportModel::Tree => sample_tree_support(n, s, rng)?,
        };
        let coefficients = draw_coefficients(&support, n, rng)?;
        Self::from_coefficients(basis, support, coefficients)
    }
}

fn check_sparsity(n: usize, s: usize) -> Result<()> {
    if s == 0 || s > n {
        return Err(Error::arg(format!("sparsity {s} must lie in 1..={n}")));
    }
    Ok(())
}

/// `s` distinct indices drawn uniformly without replacement, sorted.
pub fn sample_uniform_support<R: Rng + ?Sized>(n: usize, s: usize, rng: &mut R) -> Result<Vec<usize>> {
    check_sparsity(n, s)?;
    let mut support = rand::seq::index::sample(rng, n, s).into_vec();
    support.sort_unstable();
    Ok(support)
}

/// Rooted tree support: starts at the scaling index 0 and adds, `s - 1` times,
/// one index drawn uniformly from the unchosen nodes whose parent is chosen.
pub fn sample_tree_support<R: Rng + ?Sized>(n: usize, s: usize, rng: &mut R) -> Result<Vec<usize>> {
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::arg(format!("dimension {n} is not a power of two")));
    }
    check_sparsity(n, s)?;
    let mut chosen = vec![0usize];
    let mut frontier: Vec<usize> = tree_children(0, n).collect();
    for _ in 1..s {
        // frontier is nonempty while fewer than n nodes are chosen
        let pick = frontier.swap_remove(rng.random_range(0..frontier.len()));
        chosen.push(pick);
        frontier.extend(tree_children(pick, n));
    }
    chosen.sort_unstable();
    Ok(chosen)
}

/// Children of `node` in the Haar index tree, restricted to `0..n`.
pub fn tree_children(node: usize, n: usize) -> impl Iterator<Item = usize> {
    let kids: [Option<usize>; 2] = if node == 0 {
        [Some(1), None]
    } else {
        [Some(2 * node), Some(2 * node + 1)]
    };
    kids.into_iter().flatten().filter(move |&c| c < n)
}

/// Parent of a nonzero node in the Haar index tree.
pub fn tree_parent(node: usize) -> Option<usize> {
    match node {
        0 => None,
        1 => Some(0),
        j => Some(j / 2),
    }
}

/// Coefficients i.i.d. `N(√n, 1)` on `support`, zero elsewhere.
pub fn draw_coefficients<R: Rng + ?Sized>(support: &[usize], n: usize, rng: &mut R) -> Result<Vec<f64>> {
    validate_support(n, support)?;
    let dist = Normal::new((n as f64).sqrt(), 1.0).expect("unit variance is valid");
    let mut alpha = vec![0.0; n];
    for &i in support {
        let mut v = dist.sample(rng);
        // a zero draw would shrink the support; probability zero but keep the invariant
        while v == 0.0 {
            v = dist.sample(rng);
        }
        alpha[i] = v;
    }
    Ok(alpha)
}

/// Measurement noise variance `σ²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub variance: f64,
}

impl NoiseModel {
    pub fn new(variance: f64) -> Result<Self> {
        if !(variance >= 0.0) || !variance.is_finite() {
            return Err(Error::arg(format!("noise variance {variance} must be finite and ≥ 0")));
        }
        Ok(Self { variance })
    }
}

/// Adds circularly-symmetric complex Gaussian noise with total variance `σ²`
/// per entry (`σ²/2` on each of the real and imaginary parts).
pub fn add_noise<R: Rng + ?Sized>(
    clean: &[Complex64],
    model: NoiseModel,
    rng: &mut R,
) -> Result<Vec<Complex64>> {
    if clean.is_empty() {
        return Err(Error::arg("measurement vector must be nonempty"));
    }
    let model = NoiseModel::new(model.variance)?;
    if model.variance == 0.0 {
        return Ok(clean.to_vec());
    }
    let dist = Normal::new(0.0, (model.variance / 2.0).sqrt()).expect("valid std-dev");
    Ok(clean
        .iter()
        .map(|&y| y + Complex64::new(dist.sample(rng), dist.sample(rng)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn uniform_support_full_and_errors() {
        assert_eq!(sample_uniform_support(4, 4, &mut rng(1)).unwrap(), vec![0, 1, 2, 3]);
        assert!(sample_uniform_support(4, 5, &mut rng(1)).is_err());
        assert!(sample_uniform_support(4, 0, &mut rng(1)).is_err());
    }

    #[test]
    fn uniform_support_frequencies() {
        let (n, s, draws) = (1024usize, 10usize, 100_000usize);
        let mut counts = vec![0usize; n];
        let mut r = rng(7);
        for _ in 0..draws {
            let sup = sample_uniform_support(n, s, &mut r).unwrap();
            assert_eq!(sup.len(), s);
            assert!(sup.windows(2).all(|w| w[0] < w[1]));
            for i in sup {
                counts[i] += 1;
            }
        }
        let p = s as f64 / n as f64;
        let sd = (draws as f64 * p * (1.0 - p)).sqrt();
        // 3 std per index would fail ~0.3% of 1024 cells by chance; use the max over cells
        // against a 5-sigma envelope and check the bulk at 3 sigma.
        let mean = draws as f64 * p;
        let within3 = counts.iter().filter(|&&c| (c as f64 - mean).abs() <= 3.0 * sd).count();
        assert!(within3 as f64 >= 0.99 * n as f64, "{within3}");
        assert!(counts.iter().all(|&c| (c as f64 - mean).abs() <= 5.0 * sd));
    }

    #[test]
    fn uniform_support_coin() {
        let draws = 10_000;
        let mut r = rng(11);
        let zeros = (0..draws)
            .filter(|_| sample_uniform_support(2, 1, &mut r).unwrap() == vec![0])
            .count();
        let sd = (draws as f64 * 0.25).sqrt();
        assert!((zeros as f64 - draws as f64 / 2.0).abs() <= 3.0 * sd);
    }

    #[test]
    fn tree_support_examples() {
        assert_eq!(sample_tree_support(8, 1, &mut rng(0)).unwrap(), vec![0]);
        assert_eq!(sample_tree_support(8, 2, &mut rng(0)).unwrap(), vec![0, 1]);
        assert!(sample_tree_support(8, 9, &mut rng(0)).is_err());
        assert_eq!(sample_tree_support(8, 8, &mut rng(0)).unwrap(), (0..8).collect::<Vec<_>>());

        let draws = 10_000;
        let mut r = rng(5);
        let mut with2 = 0;
        for _ in 0..draws {
            let sup = sample_tree_support(8, 3, &mut r).unwrap();
            assert!(sup == vec![0, 1, 2] || sup == vec![0, 1, 3], "{sup:?}");
            if sup[2] == 2 {
                with2 += 1;
            }
        }
        let sd = (draws as f64 * 0.25).sqrt();
        assert!((with2 as f64 - draws as f64 / 2.0).abs() <= 3.0 * sd);
    }

    #[test]
    fn coefficients_have_expected_mean() {
        let n = 1024;
        let support: Vec<usize> = (0..10).map(|i| i * 97).collect();
        let mut r = rng(3);
        let trials = 10_000;
        let mut sum = 0.0;
        for _ in 0..trials {
            let a = draw_coefficients(&support, n, &mut r).unwrap();
            for (i, &v) in a.iter().enumerate() {
                if !support.contains(&i) {
                    assert_eq!(v, 0.0);
                }
            }
            sum += support.iter().map(|&i| a[i]).sum::<f64>();
        }
        let count = (trials * support.len()) as f64;
        let se = 1.0 / count.sqrt();
        assert!((sum / count - 32.0).abs() <= 3.0 * se);
        assert!(draw_coefficients(&[], n, &mut r).is_err());
    }

    #[test]
    fn noise_statistics() {
        let clean = vec![Complex64::new(1.0, -2.0); 10_000];
        let out = add_noise(&clean, NoiseModel { variance: 0.0 }, &mut rng(1)).unwrap();
        assert_eq!(out, clean);
        assert!(add_noise(&clean, NoiseModel { variance: -1.0 }, &mut rng(1)).is_err());

        let var = 1e-4;
        let out = add_noise(&clean, NoiseModel { variance: var }, &mut rng(2)).unwrap();
        let z: Vec<Complex64> = out.iter().zip(&clean).map(|(a, b)| a - b).collect();
        let m = z.len() as f64;
        let mean: Complex64 = z.iter().sum::<Complex64>() / m;
        let emp_var = z.iter().map(|w| (w - mean).norm_sqr()).sum::<f64>() / (m - 1.0);
        assert!((emp_var / var - 1.0).abs() < 0.05, "{emp_var}");
        // each component has std sqrt(var/2); its sample mean has std-err sqrt(var/2/m)
        let se = (var / 2.0 / m).sqrt();
        assert!(mean.re.abs() <= 3.0 * se && mean.im.abs() <= 3.0 * se);
    }

    #[test]
    fn generated_signal_is_consistent() {
        let basis = SparsityBasis::new(BasisKind::Haar, 64).unwrap();
        let sig = SparseSignal::generate(&basis, 6, SupportModel::Tree, &mut rng(9)).unwrap();
        let nnz: Vec<usize> = (0..64).filter(|&i| sig.coefficients[i] != 0.0).collect();
        assert_eq!(nnz, sig.support);
        let nx: f64 = sig.x.iter().map(|v| v * v).sum();
        let na: f64 = sig.coefficients.iter().map(|v| v * v).sum();
        assert!((nx - na).abs() <= 1e-10 * na);
    }

    proptest! {
        #[test]
        fn tree_supports_are_rooted(log_n in 1u32..=10, frac in 0.0f64..1.0, seed in any::<u64>()) {
            let n = 1usize << log_n;
            let s = 1 + ((n - 1) as f64 * frac) as usize;
            let sup = sample_tree_support(n, s, &mut rng(seed)).unwrap();
            prop_assert_eq!(sup.len(), s);
            prop_assert_eq!(sup[0], 0);
            for &j in &sup[1..] {
                let parent = tree_parent(j).unwrap();
                prop_assert!(sup.binary_search(&parent).is_ok());
            }
        }

        #[test]
        fn generation_is_deterministic(seed in any::<u64>()) {
            let basis = SparsityBasis::new(BasisKind::Haar, 128).unwrap();
            let a = SparseSignal::generate(&basis, 7, SupportModel::Uniform, &mut rng(seed)).unwrap();
            let b = SparseSignal::generate(&basis, 7, SupportModel::Uniform, &mut rng(seed)).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
