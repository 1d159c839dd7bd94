//! Computable regret bounds and simulation suites for the asymptotic
//! results: MAP consistency, posterior concentration and predictive
//! convergence.

use std::f64::consts::{E, PI};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::chain_sim::{simulate_stationary, stationary, ChainSpec, Stationary};
use crate::context_tree::{is_minimal, prior_log, ContextTree, ParameterVector};
use crate::counting::{CountTrie, SymbolSequence};
use crate::ctw::{ctw_mix_log, map_tree, model_posterior_log, CtwState};
use crate::error::{BctError, Result};
use crate::inference::{full_conditional, log_likelihood, posterior_moments};
use crate::seed::replicate_rng;

/// Tolerance used when checking that the true model is minimal.
pub const MINIMALITY_TOLERANCE: f64 = 1e-9;

/// `C(T, m, β) = (|T|(m-1)/2) log|T| - |T| log m + log π_D(T; β)`.
pub fn theorem1_constant(tree: &ContextTree, beta: f64, max_depth: usize) -> Result<f64> {
    let leaves = tree.leaf_count() as f64;
    let m = tree.alphabet_size() as f64;
    Ok(
        leaves * (m - 1.0) / 2.0 * leaves.ln() - leaves * m.ln()
            + prior_log(tree, max_depth, beta)?,
    )
}

/// Per-leaf penalty of the achievability bound: `log m`.
pub fn corollary_leaf_constant(m: usize) -> f64 {
    (m as f64).ln()
}

/// Per-leaf constant of the minimax lower bound:
/// `log(√(2π) / (2^{m/2} Γ(m/2)))`.
pub fn minimax_leaf_constant(m: usize) -> f64 {
    let m = m as f64;
    0.5 * (2.0 * PI).ln() - m / 2.0 * 2f64.ln() - ln_gamma(m / 2.0)
}

/// `Δ_m = log m - log(√(2π) / (2^{m/2} Γ(m/2)))`.
pub fn delta_m(m: usize) -> Result<f64> {
    if m < 2 {
        return Err(BctError::InvalidAlphabet(m));
    }
    let mf = m as f64;
    Ok(mf.ln() - 0.5 * (2.0 * PI).ln() + mf / 2.0 * 2f64.ln() + ln_gamma(mf / 2.0))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegretReport {
    pub n: usize,
    pub leaves: usize,
    pub log_mixture: f64,
    pub log_likelihood: f64,
    /// `log P*_D(x) - log P(x | θ, T)`.
    pub regret: f64,
    pub corollary_bound: f64,
    pub corollary_slack: f64,
    /// Present when `n ≥ e|T|`.
    pub theorem1_bound: Option<f64>,
    pub theorem1_slack: Option<f64>,
}

impl RegretReport {
    pub fn bounds_hold(&self) -> bool {
        self.corollary_slack >= 0.0 && self.theorem1_slack.map_or(true, |s| s >= 0.0)
    }
}

/// Regret of the mixture against the source `(T, θ)` on `seq`, with both
/// lower bounds. The analysis depth is the context length of `seq`.
pub fn regret_report(
    seq: &SymbolSequence,
    tree: &ContextTree,
    theta: &ParameterVector,
    beta: f64,
) -> Result<RegretReport> {
    let depth = seq.depth();
    tree.check_depth(depth)?;
    let m = tree.alphabet_size();
    let trie = CountTrie::build(seq);
    let log_mixture = ctw_mix_log(&trie, beta)?;
    let log_lik = log_likelihood(tree, theta, &trie)?;
    let regret = log_mixture - log_lik;
    let log_prior = prior_log(tree, depth, beta)?;

    let penalty: f64 = tree
        .leaves()
        .iter()
        .map(|s| trie.counts_for(s).iter().sum::<u64>())
        .filter(|&total| total > 0)
        .map(|total| (m as f64 - 1.0) / 2.0 * (total as f64).ln() + corollary_leaf_constant(m))
        .sum();
    let corollary_bound = -(penalty - log_prior);

    let n = seq.len();
    let leaves = tree.leaf_count();
    let theorem1_bound = if n as f64 >= E * leaves as f64 {
        let c = theorem1_constant(tree, beta, depth)?;
        Some(-(leaves as f64 * (m as f64 - 1.0) / 2.0) * (n as f64).ln() + c)
    } else {
        None
    };
    Ok(RegretReport {
        n,
        leaves,
        log_mixture,
        log_likelihood: log_lik,
        regret,
        corollary_bound,
        corollary_slack: regret - corollary_bound,
        theorem1_bound,
        theorem1_slack: theorem1_bound.map(|b| regret - b),
    })
}

/// Pass thresholds for the simulation suites.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteThresholds {
    pub recovery: f64,
    pub posterior_mass: f64,
    pub deviation: f64,
}

impl Default for SuiteThresholds {
    fn default() -> Self {
        Self {
            recovery: 0.95,
            posterior_mass: 0.9,
            deviation: 0.01,
        }
    }
}

impl SuiteThresholds {
    /// Applies one `key=value` override.
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment.split_once('=').ok_or_else(|| {
            BctError::Parameter(format!(
                "threshold override {assignment:?} is not key=value"
            ))
        })?;
        let value: f64 = value.trim().parse().map_err(|_| {
            BctError::Parameter(format!("threshold {key} has non-numeric value {value:?}"))
        })?;
        let slot = match key.trim() {
            "recovery" => &mut self.recovery,
            "posterior_mass" | "posterior" => &mut self.posterior_mass,
            "deviation" => &mut self.deviation,
            other => return Err(BctError::Parameter(format!("unknown threshold {other:?}"))),
        };
        *slot = value;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConsistencyPoint {
    pub n: usize,
    pub recovery_fraction: f64,
    pub mean_posterior_true: f64,
    pub mean_parameter_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrendCheck {
    pub recovery_nondecreasing: bool,
    pub posterior_nondecreasing: bool,
    pub parameter_error_nonincreasing: bool,
}

impl TrendCheck {
    pub fn holds(&self) -> bool {
        self.recovery_nondecreasing
            && self.posterior_nondecreasing
            && self.parameter_error_nonincreasing
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConsistencyReport {
    pub true_tree: String,
    pub beta: f64,
    pub depth: usize,
    pub replicates: usize,
    pub seed: u64,
    pub points: Vec<ConsistencyPoint>,
    /// `None` when the grid has a single point and no trend can be tested.
    pub trends: Option<TrendCheck>,
}

impl ConsistencyReport {
    /// Final-point thresholds and, where testable, the trends.
    pub fn passes(&self, thresholds: &SuiteThresholds) -> bool {
        let Some(last) = self.points.last() else {
            return false;
        };
        last.recovery_fraction >= thresholds.recovery
            && last.mean_posterior_true >= thresholds.posterior_mass
            && self.trends.as_ref().map_or(true, TrendCheck::holds)
    }
}

fn check_suite_spec(spec: &ChainSpec, depth: usize) -> Result<Stationary> {
    spec.tree().check_depth(depth)?;
    let law = stationary(spec)?;
    if !is_minimal(spec.tree(), spec.theta(), MINIMALITY_TOLERANCE)? {
        return Err(BctError::Precondition(format!(
            "model {} is not minimal for its parameters",
            spec.tree()
        )));
    }
    Ok(law)
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Simulates `replicates` stationary paths of length `max(n_grid)` and
/// evaluates each prefix of length `n ∈ n_grid`: whether the MAP model is the
/// true model, `π(T* | x)`, and `‖E[θ | x, T*] - θ*‖_∞`.
pub fn consistency_suite(
    spec: &ChainSpec,
    beta: f64,
    depth: usize,
    n_grid: &[usize],
    replicates: usize,
    seed: u64,
) -> Result<ConsistencyReport> {
    if n_grid.is_empty() || replicates == 0 {
        return Err(BctError::Precondition("empty grid or no replicates".into()));
    }
    let law = check_suite_spec(spec, depth)?;
    let truth = spec.tree();
    let n_max = *n_grid.iter().max().expect("grid is nonempty");

    let per_replicate: Vec<Vec<(bool, f64, f64)>> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = replicate_rng(seed, r as u64);
            let seq = simulate_stationary(spec, &law, depth, n_max, &mut rng)?;
            n_grid
                .iter()
                .map(|&n| {
                    let trie = CountTrie::build(&seq.prefix(n));
                    let map = map_tree(&trie, beta, depth)?;
                    let posterior = model_posterior_log(truth, &trie, beta)?.exp();
                    let moments = posterior_moments(&full_conditional(&trie, truth)?);
                    let error = moments
                        .mean
                        .rows()
                        .iter()
                        .zip(spec.theta().rows())
                        .map(|(a, b)| max_abs_diff(a, b))
                        .fold(0.0, f64::max);
                    Ok((map.tree == *truth, posterior, error))
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let reps = replicates as f64;
    let points: Vec<ConsistencyPoint> = n_grid
        .iter()
        .enumerate()
        .map(|(k, &n)| {
            let column = per_replicate.iter().map(|row| row[k]);
            ConsistencyPoint {
                n,
                recovery_fraction: column.clone().filter(|c| c.0).count() as f64 / reps,
                mean_posterior_true: column.clone().map(|c| c.1).sum::<f64>() / reps,
                mean_parameter_error: column.map(|c| c.2).sum::<f64>() / reps,
            }
        })
        .collect();

    // Trends are read in order of increasing n, with one replicate of slack
    // on the fractions.
    let trends = (points.len() > 1).then(|| {
        let mut order: Vec<&ConsistencyPoint> = points.iter().collect();
        order.sort_by_key(|p| p.n);
        let slack = 1.0 / reps;
        let pairs = || order.windows(2).map(|w| (w[0], w[1]));
        TrendCheck {
            recovery_nondecreasing: pairs()
                .all(|(a, b)| b.recovery_fraction >= a.recovery_fraction - slack),
            posterior_nondecreasing: pairs()
                .all(|(a, b)| b.mean_posterior_true >= a.mean_posterior_true - slack),
            parameter_error_nonincreasing: pairs()
                .all(|(a, b)| b.mean_parameter_error <= a.mean_parameter_error),
        }
    });

    Ok(ConsistencyReport {
        true_tree: truth.to_canonical(),
        beta,
        depth,
        replicates,
        seed,
        points,
        trends,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ZetaSummary {
    pub context: String,
    pub mean: f64,
    pub max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PredictiveReport {
    pub n: usize,
    pub beta: f64,
    pub depth: usize,
    pub replicates: usize,
    pub seed: u64,
    /// Per replicate `max_j |P*(j | x) - θ*_s(j)|` at the final context.
    pub deviations: Vec<f64>,
    pub mean_max_deviation: f64,
    /// `ζ_s` at each internal node of the true model.
    pub zeta: Vec<ZetaSummary>,
}

impl PredictiveReport {
    pub fn passes(&self, thresholds: &SuiteThresholds) -> bool {
        self.mean_max_deviation < thresholds.deviation
            && self.zeta.iter().all(|z| z.mean < thresholds.deviation)
    }
}

/// Streams `replicates` stationary paths of length `n` and compares the
/// final posterior predictive with the true conditional law.
pub fn predictive_suite(
    spec: &ChainSpec,
    beta: f64,
    depth: usize,
    n: usize,
    replicates: usize,
    seed: u64,
) -> Result<PredictiveReport> {
    if replicates == 0 {
        return Err(BctError::Precondition("no replicates".into()));
    }
    spec.tree().check_depth(depth)?;
    let law = stationary(spec)?;
    let internal = spec.tree().internal_nodes();

    let runs: Vec<(f64, Vec<f64>)> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = replicate_rng(seed, r as u64);
            let seq = simulate_stationary(spec, &law, depth, n, &mut rng)?;
            let state = CtwState::from_sequence(&seq, beta)?;
            let truth = spec.transition(seq.all_symbols())?;
            let deviation = max_abs_diff(&state.predictive(), truth);
            let zetas = internal
                .iter()
                .map(|s| state.log_zeta(s).map_or(0.0, f64::exp))
                .collect();
            Ok((deviation, zetas))
        })
        .collect::<Result<_>>()?;

    let reps = replicates as f64;
    let deviations: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let zeta = internal
        .iter()
        .enumerate()
        .map(|(k, s)| ZetaSummary {
            context: s.to_string(),
            mean: runs.iter().map(|r| r.1[k]).sum::<f64>() / reps,
            max: runs.iter().map(|r| r.1[k]).fold(0.0, f64::max),
        })
        .collect();
    Ok(PredictiveReport {
        n,
        beta,
        depth,
        replicates,
        seed,
        mean_max_deviation: deviations.iter().sum::<f64>() / reps,
        deviations,
        zeta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain_sim::generate;
    use crate::context_tree::Alphabet;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_state() -> ChainSpec {
        let tree = ContextTree::complete(2, 1).unwrap();
        let theta = ParameterVector::new(&tree, vec![vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
        ChainSpec::new(1, tree, theta).unwrap()
    }

    fn coin() -> ChainSpec {
        let tree = ContextTree::root(2).unwrap();
        ChainSpec::new(0, tree.clone(), ParameterVector::uniform(&tree)).unwrap()
    }

    #[test]
    fn theorem1_constant_examples() {
        let expected = -2.0 * 2f64.ln();
        let lambda = ContextTree::root(2).unwrap();
        assert!((theorem1_constant(&lambda, 0.5, 1).unwrap() - expected).abs() < 1e-14);
        let full = ContextTree::complete(2, 1).unwrap();
        assert!((theorem1_constant(&full, 0.5, 1).unwrap() - expected).abs() < 1e-14);
        let mut previous = f64::INFINITY;
        for d in 0..5 {
            let c = theorem1_constant(&ContextTree::complete(2, d).unwrap(), 0.5, 5).unwrap();
            assert!(c < previous);
            previous = c;
        }
    }

    #[test]
    fn delta_m_values() {
        assert!((delta_m(2).unwrap() - (4.0 / (2.0 * PI).sqrt()).ln()).abs() < 1e-15);
        assert!((delta_m(2).unwrap() - 0.4674).abs() < 1e-4);
        for m in 2..=16 {
            let d = delta_m(m).unwrap();
            assert!(d > 0.0);
            assert!((corollary_leaf_constant(m) - minimax_leaf_constant(m) - d).abs() < 1e-12);
        }
        assert!(delta_m(1).is_err());
    }

    #[test]
    fn regret_single_symbol() {
        let lambda = ContextTree::root(2).unwrap();
        let seq = SymbolSequence::new(Alphabet::new(2).unwrap(), vec![], vec![0]).unwrap();
        let report = regret_report(&seq, &lambda, &ParameterVector::uniform(&lambda), 0.5).unwrap();
        assert!((report.log_mixture - 0.5f64.ln()).abs() < 1e-14);
        assert!(report.regret.abs() < 1e-14);
        assert!((report.corollary_bound + 2f64.ln()).abs() < 1e-14);
        assert!(report.theorem1_bound.is_none());
        assert!(report.bounds_hold());
    }

    #[test]
    fn regret_rejects_impossible_data() {
        let lambda = ContextTree::root(2).unwrap();
        let det = ParameterVector::new(&lambda, vec![vec![1.0, 0.0]]).unwrap();
        let seq = SymbolSequence::new(Alphabet::new(2).unwrap(), vec![], vec![0, 1]).unwrap();
        assert!(matches!(
            regret_report(&seq, &lambda, &det, 0.5),
            Err(BctError::ZeroProbability { .. })
        ));
    }

    #[test]
    fn regret_bounds_hold_on_simulated_chain() {
        let spec = two_state();
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let seq = generate(&spec, 50 + 40 * seed as usize, &[0, 1, 1], &mut rng).unwrap();
            let report = regret_report(&seq, spec.tree(), spec.theta(), 0.5).unwrap();
            assert!(report.bounds_hold(), "{report:?}");
            assert!(report.theorem1_slack.is_some());
        }
    }

    #[test]
    fn thresholds_parse_overrides() {
        let mut t = SuiteThresholds::default();
        t.set("recovery=0.8").unwrap();
        t.set("deviation = 0.05").unwrap();
        assert_eq!(t.recovery, 0.8);
        assert_eq!(t.deviation, 0.05);
        assert!(t.set("bogus=1").is_err());
        assert!(t.set("recovery").is_err());
    }

    #[test]
    fn suites_refuse_bad_specs() {
        let tree = ContextTree::complete(2, 1).unwrap();
        let same = ParameterVector::new(&tree, vec![vec![0.3, 0.7], vec![0.3, 0.7]]).unwrap();
        let redundant = ChainSpec::new(1, tree.clone(), same).unwrap();
        assert!(consistency_suite(&redundant, 0.5, 2, &[100], 2, 0).is_err());
        let periodic = ParameterVector::new(&tree, vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let periodic = ChainSpec::new(1, tree, periodic).unwrap();
        assert!(matches!(
            consistency_suite(&periodic, 0.5, 2, &[100], 2, 0),
            Err(BctError::NotErgodic(_))
        ));
    }

    #[test]
    fn single_point_grid_is_flagged() {
        let report = consistency_suite(&coin(), 0.5, 2, &[100], 4, 3).unwrap();
        assert!(report.trends.is_none());
        assert_eq!(report.points.len(), 1);
    }

    #[test]
    fn suites_are_deterministic() {
        let a = consistency_suite(&two_state(), 0.5, 3, &[200, 2000], 8, 11).unwrap();
        let b = consistency_suite(&two_state(), 0.5, 3, &[200, 2000], 8, 11).unwrap();
        assert_eq!(a, b);
        assert!(a.trends.is_some());
    }

    #[test]
    fn deterministic_source_predictive() {
        let tree = ContextTree::root(2).unwrap();
        let theta = ParameterVector::new(&tree, vec![vec![1.0, 0.0]]).unwrap();
        let spec = ChainSpec::new(0, tree, theta).unwrap();
        let report = predictive_suite(&spec, 0.5, 0, 999, 2, 0).unwrap();
        for d in report.deviations {
            assert!((d - 0.5 / 1000.0).abs() < 1e-12);
        }
    }
}
