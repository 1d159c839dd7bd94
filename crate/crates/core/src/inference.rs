//! Parameter inference on a fixed model: maximum likelihood, the Dirichlet
//! full conditional, its moments, and the asymptotic-normality comparison
//! against the per-leaf Fisher blocks.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::Serialize;

use crate::context_tree::{ContextTree, ParameterVector};
use crate::counting::CountTrie;
use crate::error::{BctError, Result};
use crate::estimator::xlogx_ratio;

/// Maximum-likelihood fit on `T_MAX`.
#[derive(Clone, Debug, PartialEq)]
pub struct MleFit {
    pub tree: ContextTree,
    pub theta: ParameterVector,
    pub log_lik: f64,
}

/// Maximum likelihood: the tree is `T_MAX` (the shape of the count trie)
/// and `θ̂_s = a_s / M_s`. Contexts with no data get the uniform vector.
pub fn mle(trie: &CountTrie) -> MleFit {
    let tree = trie.to_tree();
    let m = trie.alphabet_size();
    let rows: Vec<Vec<f64>> = tree
        .leaves()
        .iter()
        .map(|leaf| {
            let counts = trie.counts_for(leaf);
            let total: u64 = counts.iter().sum();
            if total == 0 {
                vec![1.0 / m as f64; m]
            } else {
                counts.iter().map(|&a| a as f64 / total as f64).collect()
            }
        })
        .collect();
    let theta = ParameterVector::new(&tree, rows).expect("frequencies form probability vectors");
    let log_lik = max_log_likelihood(&tree, trie).expect("T_MAX fits its own trie");
    MleFit {
        tree,
        theta,
        log_lik,
    }
}

/// `max_θ log P(x | θ, T) = Σ_s Σ_j a_s(j) log(a_s(j) / M_s)`.
pub fn max_log_likelihood(tree: &ContextTree, trie: &CountTrie) -> Result<f64> {
    check_tree(tree, trie)?;
    Ok(tree
        .leaves()
        .iter()
        .map(|leaf| {
            let counts = trie.counts_for(leaf);
            let total = counts.iter().sum::<u64>() as f64;
            counts
                .iter()
                .map(|&a| xlogx_ratio(a as f64, total))
                .sum::<f64>()
        })
        .sum())
}

/// `log P(x | θ, T) = Σ_s Σ_j a_s(j) log θ_s(j)`. Fails with
/// [`BctError::ZeroProbability`] if an observed transition has `θ_s(j) = 0`.
pub fn log_likelihood(
    tree: &ContextTree,
    theta: &ParameterVector,
    trie: &CountTrie,
) -> Result<f64> {
    check_tree(tree, trie)?;
    let mut total = 0.0;
    for (i, leaf) in tree.leaves().iter().enumerate() {
        for (j, (&a, &p)) in trie.counts_for(leaf).iter().zip(theta.row(i)).enumerate() {
            if a == 0 {
                continue;
            }
            if p <= 0.0 {
                return Err(BctError::ZeroProbability {
                    context: leaf.to_string(),
                    symbol: j,
                });
            }
            total += a as f64 * p.ln();
        }
    }
    Ok(total)
}

fn check_tree(tree: &ContextTree, trie: &CountTrie) -> Result<()> {
    if tree.alphabet_size() != trie.alphabet_size() {
        return Err(BctError::Structure(format!(
            "tree is {}-ary but the counts are over {} symbols",
            tree.alphabet_size(),
            trie.alphabet_size()
        )));
    }
    tree.check_depth(trie.depth())
}

/// Independent Dirichlet posteriors, one per leaf of a fixed model.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DirichletPosterior {
    #[serde(skip)]
    pub tree: ContextTree,
    /// `a_s(j) + 1/2` per leaf, in leaf order.
    pub alphas: Vec<Vec<f64>>,
}

impl DirichletPosterior {
    /// Dirichlet covariance at leaf `leaf`:
    /// `Cov(i, j) = α_i (δ_ij α_0 - α_j) / (α_0² (α_0 + 1))`.
    pub fn covariance(&self, leaf: usize) -> Vec<Vec<f64>> {
        let alpha = &self.alphas[leaf];
        let a0: f64 = alpha.iter().sum();
        let scale = a0 * a0 * (a0 + 1.0);
        (0..alpha.len())
            .map(|i| {
                (0..alpha.len())
                    .map(|j| {
                        let diag = if i == j { a0 } else { 0.0 };
                        alpha[i] * (diag - alpha[j]) / scale
                    })
                    .collect()
            })
            .collect()
    }
}

/// The full conditional `π(θ | x, T)`: `Dir(a_s + 1/2)` at every leaf.
pub fn full_conditional(trie: &CountTrie, tree: &ContextTree) -> Result<DirichletPosterior> {
    check_tree(tree, trie)?;
    let alphas = tree
        .leaves()
        .iter()
        .map(|leaf| {
            trie.counts_for(leaf)
                .iter()
                .map(|&a| a as f64 + 0.5)
                .collect()
        })
        .collect();
    Ok(DirichletPosterior {
        tree: tree.clone(),
        alphas,
    })
}

/// Draws `θ` from the posterior by normalizing independent Gamma variates.
pub fn sample_params<R: Rng + ?Sized>(post: &DirichletPosterior, rng: &mut R) -> ParameterVector {
    let rows = post
        .alphas
        .iter()
        .map(|alpha| loop {
            let draws: Vec<f64> = alpha
                .iter()
                .map(|&a| Gamma::new(a, 1.0).expect("alpha >= 1/2").sample(rng))
                .collect();
            let sum: f64 = draws.iter().sum();
            // All draws underflowing to zero is possible only in principle.
            if sum > 0.0 {
                let mut row: Vec<f64> = draws.iter().map(|g| g / sum).collect();
                let last = row.len() - 1;
                row[last] = (1.0 - row[..last].iter().sum::<f64>()).max(0.0);
                break row;
            }
        })
        .collect();
    ParameterVector::new(&post.tree, rows).expect("normalized draws are probability vectors")
}

/// Closed-form posterior means and marginal variances.
#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorMoments {
    pub mean: ParameterVector,
    pub variance: Vec<Vec<f64>>,
}

/// Mean `(a(j) + 1/2) / (M + m/2)` and variance
/// `(a(j) + 1/2)(M - a(j) + (m-1)/2) / ((M + m/2)² (M + m/2 + 1))`.
pub fn posterior_moments(post: &DirichletPosterior) -> PosteriorMoments {
    let mut means = Vec::with_capacity(post.alphas.len());
    let mut variance = Vec::with_capacity(post.alphas.len());
    for alpha in &post.alphas {
        let a0: f64 = alpha.iter().sum();
        means.push(alpha.iter().map(|a| a / a0).collect::<Vec<_>>());
        variance.push(
            alpha
                .iter()
                .map(|a| a * (a0 - a) / (a0 * a0 * (a0 + 1.0)))
                .collect(),
        );
    }
    PosteriorMoments {
        mean: ParameterVector::new(&post.tree, means)
            .expect("Dirichlet means are probability vectors"),
        variance,
    }
}

/// `J_s = (1/π(s)) [diag(θ*_s) - θ*_sᵗ θ*_s]` for one leaf.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FisherBlock {
    pub context: String,
    pub mass: f64,
    pub theta: Vec<f64>,
    pub matrix: Vec<Vec<f64>>,
    /// Some `θ*_s(j)` is zero, so the block has rank below `m - 1`.
    pub degenerate: bool,
}

/// One Fisher block per leaf of `tree`; `masses[i]` is the stationary
/// probability of leaf `i`.
pub fn fisher_blocks(
    tree: &ContextTree,
    theta_star: &ParameterVector,
    masses: &[f64],
) -> Result<Vec<FisherBlock>> {
    if masses.len() != tree.leaf_count() || theta_star.rows().len() != tree.leaf_count() {
        return Err(BctError::Parameter(
            "Fisher blocks need one mass and one parameter row per leaf".into(),
        ));
    }
    tree.leaves()
        .iter()
        .zip(theta_star.rows())
        .zip(masses)
        .map(|((ctx, theta), &mass)| {
            if mass.is_nan() || mass <= 0.0 {
                return Err(BctError::ZeroMass(ctx.to_string()));
            }
            let matrix = (0..theta.len())
                .map(|i| {
                    (0..theta.len())
                        .map(|j| {
                            let diag = if i == j { theta[i] } else { 0.0 };
                            (diag - theta[i] * theta[j]) / mass
                        })
                        .collect()
                })
                .collect();
            Ok(FisherBlock {
                context: ctx.to_string(),
                mass,
                theta: theta.clone(),
                matrix,
                degenerate: theta.contains(&0.0),
            })
        })
        .collect()
}

/// The block-diagonal matrix `J = ⊕_s J_s`.
pub fn assemble_block_diagonal(blocks: &[FisherBlock]) -> Vec<Vec<f64>> {
    let size: usize = blocks.iter().map(|b| b.matrix.len()).sum();
    let mut out = vec![vec![0.0; size]; size];
    let mut offset = 0;
    for block in blocks {
        for (i, row) in block.matrix.iter().enumerate() {
            out[offset + i][offset..offset + row.len()].copy_from_slice(row);
        }
        offset += block.matrix.len();
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LeafNormality {
    pub context: String,
    /// `n · Cov(θ_s | x, T)`.
    pub scaled_covariance: Vec<Vec<f64>>,
    pub fisher: Vec<Vec<f64>>,
    pub max_relative_deviation: f64,
    pub max_diagonal_deviation: f64,
    pub posterior_mean: Vec<f64>,
    pub max_mean_error: f64,
    pub off_diagonal_signs_agree: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NormalityReport {
    pub n: u64,
    pub leaves: Vec<LeafNormality>,
    pub max_relative_deviation: f64,
    pub max_diagonal_deviation: f64,
    pub max_mean_error: f64,
}

/// Compares `n` times the posterior covariance on `tree` with the Fisher
/// blocks, entry by entry, using the analytic Dirichlet covariance.
pub fn normality_check(
    trie: &CountTrie,
    tree: &ContextTree,
    blocks: &[FisherBlock],
    n: u64,
) -> Result<NormalityReport> {
    if blocks.len() != tree.leaf_count() {
        return Err(BctError::Parameter(format!(
            "{} Fisher blocks for a tree with {} leaves",
            blocks.len(),
            tree.leaf_count()
        )));
    }
    let post = full_conditional(trie, tree)?;
    let moments = posterior_moments(&post);
    let leaves: Vec<LeafNormality> = blocks
        .iter()
        .enumerate()
        .map(|(leaf, block)| {
            let scaled: Vec<Vec<f64>> = post
                .covariance(leaf)
                .into_iter()
                .map(|row| row.into_iter().map(|c| c * n as f64).collect())
                .collect();
            let mut max_rel: f64 = 0.0;
            let mut max_diag: f64 = 0.0;
            let mut signs = true;
            for (i, (row, fisher_row)) in scaled.iter().zip(&block.matrix).enumerate() {
                for (j, (&c, &f)) in row.iter().zip(fisher_row).enumerate() {
                    if f != 0.0 {
                        let rel = (c - f).abs() / f.abs();
                        max_rel = max_rel.max(rel);
                        if i == j {
                            max_diag = max_diag.max(rel);
                        }
                    }
                    if i != j && f != 0.0 && (c < 0.0) != (f < 0.0) {
                        signs = false;
                    }
                }
            }
            let mean = moments.mean.row(leaf).to_vec();
            let mean_err = mean
                .iter()
                .zip(&block.theta)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            LeafNormality {
                context: block.context.clone(),
                scaled_covariance: scaled,
                fisher: block.matrix.clone(),
                max_relative_deviation: max_rel,
                max_diagonal_deviation: max_diag,
                posterior_mean: mean,
                max_mean_error: mean_err,
                off_diagonal_signs_agree: signs,
            }
        })
        .collect();
    let fold = |f: fn(&LeafNormality) -> f64| leaves.iter().map(f).fold(0.0, f64::max);
    Ok(NormalityReport {
        n,
        max_relative_deviation: fold(|l| l.max_relative_deviation),
        max_diagonal_deviation: fold(|l| l.max_diagonal_deviation),
        max_mean_error: fold(|l| l.max_mean_error),
        leaves,
    })
}
