//! Self-check harness: oracle equalities, bound validity and normalization
//! (hard assertions) plus the simulation suites (statistical).

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::Serialize;

use crate::chain_sim::{generate, smbt_compare, stationary, ChainSpec};
use crate::context_tree::{enumerate_models, prior_log, Alphabet, ContextTree, ParameterVector};
use crate::counting::{CountTrie, SymbolSequence};
use crate::ctw::{
    ctw_mix_log, ctw_node_logs, map_tree, marginal_log, model_posterior_log, CtwState,
};
use crate::estimator::{log_sum_exp, pe_bounds, pe_log};
use crate::inference::{fisher_blocks, full_conditional, normality_check, sample_params};
use crate::seed::replicate_rng;
use crate::theory::{
    consistency_suite, corollary_leaf_constant, delta_m, minimax_leaf_constant, predictive_suite,
    regret_report, SuiteThresholds,
};
use crate::Result;

const BETAS: [f64; 3] = [0.3, 0.5, 0.7];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    Hard,
    Statistical,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckItem {
    pub name: String,
    pub kind: CheckKind,
    pub passed: bool,
    pub detail: String,
    /// The first failing instance, if any.
    pub witness: Option<String>,
}

#[derive(Clone, Debug, Default)]
pub struct VerifyConfig {
    pub seed: u64,
    pub quick: bool,
    /// Deliberately misreads β as 1 - β in the mixture, to exercise the
    /// failure path.
    pub inject_beta_flip: bool,
    pub thresholds: SuiteThresholds,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub quick: bool,
    pub items: Vec<CheckItem>,
}

impl VerifyReport {
    pub fn hard_failures(&self) -> impl Iterator<Item = &CheckItem> {
        self.items
            .iter()
            .filter(|i| i.kind == CheckKind::Hard && !i.passed)
    }

    pub fn all_passed(&self) -> bool {
        self.items.iter().all(|i| i.passed)
    }
}

/// A random proper tree: each node above `max_depth` splits with
/// probability 1/2.
pub fn random_tree<R: Rng + ?Sized>(
    m: usize,
    max_depth: usize,
    rng: &mut R,
) -> Result<ContextTree> {
    let mut leaves = Vec::new();
    let mut stack = vec![crate::Context::root()];
    while let Some(ctx) = stack.pop() {
        if ctx.depth() < max_depth && rng.random_bool(0.5) {
            stack.extend((0..m).map(|j| ctx.child(j)));
        } else {
            leaves.push(ctx);
        }
    }
    ContextTree::from_leaves(m, &leaves)
}

/// A random chain on a random tree with Dirichlet(1, ..., 1) rows.
pub fn random_chain<R: Rng + ?Sized>(m: usize, max_depth: usize, rng: &mut R) -> Result<ChainSpec> {
    let tree = random_tree(m, max_depth, rng)?;
    let exp = Gamma::new(1.0, 1.0).expect("valid shape");
    let rows = (0..tree.leaf_count())
        .map(|_| loop {
            let draws: Vec<f64> = (0..m).map(|_| exp.sample(rng)).collect();
            let total: f64 = draws.iter().sum();
            if total > 0.0 {
                break draws.into_iter().map(|d| d / total).collect();
            }
        })
        .collect();
    let theta = ParameterVector::new(&tree, rows)?;
    ChainSpec::new(max_depth, tree, theta)
}

/// A sequence of length `n` from a random chain, with a uniform initial
/// context of length `depth`.
pub fn random_sequence<R: Rng + ?Sized>(
    m: usize,
    depth: usize,
    n: usize,
    rng: &mut R,
) -> Result<SymbolSequence> {
    let spec = random_chain(m, depth, rng)?;
    let context: Vec<usize> = (0..depth).map(|_| rng.random_range(0..m)).collect();
    generate(&spec, n, &context, rng)
}

pub fn describe(seq: &SymbolSequence) -> String {
    let join = |s: &[usize]| s.iter().map(usize::to_string).collect::<Vec<_>>().join(" ");
    format!(
        "m={} D={} context=[{}] body=[{}]",
        seq.alphabet().size(),
        seq.depth(),
        join(seq.context()),
        join(seq.body())
    )
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

struct Outcome {
    passed: bool,
    detail: String,
    witness: Option<String>,
}

fn item(name: &str, kind: CheckKind, outcome: Result<Outcome>) -> CheckItem {
    match outcome {
        Ok(o) => CheckItem {
            name: name.into(),
            kind,
            passed: o.passed,
            detail: o.detail,
            witness: o.witness,
        },
        Err(e) => CheckItem {
            name: name.into(),
            kind,
            passed: false,
            detail: format!("error: {e}"),
            witness: None,
        },
    }
}

/// Runs `check` on `count` instances in parallel and reports the first
/// failure by index.
fn sweep<F>(count: usize, seed: u64, stream: u64, check: F) -> Result<Outcome>
where
    F: Fn(&mut rand_chacha::ChaCha8Rng) -> Result<Option<String>> + Sync,
{
    let results: Vec<Option<String>> = (0..count)
        .into_par_iter()
        .map(|i| check(&mut replicate_rng(seed ^ stream, i as u64)))
        .collect::<Result<_>>()?;
    let failures = results.iter().filter(|r| r.is_some()).count();
    Ok(Outcome {
        passed: failures == 0,
        detail: format!("{} of {count} instances failed", failures),
        witness: results.into_iter().flatten().next(),
    })
}

fn prior_normalization(quick: bool) -> Result<Outcome> {
    let max_binary = if quick { 3 } else { 4 };
    let mut cases: Vec<(usize, usize)> = (0..=max_binary).map(|d| (2, d)).collect();
    cases.extend([(3, 1), (3, 2)]);
    let mut worst: f64 = 0.0;
    let mut witness = None;
    for &(m, d) in &cases {
        let models = enumerate_models(m, d)?;
        for beta in BETAS {
            let logs: Vec<f64> = models
                .iter()
                .map(|t| prior_log(t, d, beta))
                .collect::<Result<_>>()?;
            let err = (log_sum_exp(&logs).exp() - 1.0).abs();
            if err > 1e-10 && witness.is_none() {
                witness = Some(format!(
                    "m={m} D={d} beta={beta} total={}",
                    log_sum_exp(&logs).exp()
                ));
            }
            worst = worst.max(err);
        }
    }
    Ok(Outcome {
        passed: witness.is_none(),
        detail: format!("{} (m, D) cases, max |sum - 1| = {worst:.3e}", cases.len()),
        witness,
    })
}

fn ctw_enumeration(config: &VerifyConfig) -> Result<Outcome> {
    let count = if config.quick { 60 } else { 500 };
    let flip = config.inject_beta_flip;
    sweep(count, config.seed, 0x01, |rng| {
        let depth = rng.random_range(0..=3);
        let n = rng.random_range(0..=100);
        let beta = BETAS[rng.random_range(0..3)];
        let seq = random_sequence(2, depth, n, rng)?;
        let trie = CountTrie::build(&seq);
        let mixture_beta = if flip { 1.0 - beta } else { beta };
        let fast = ctw_mix_log(&trie, mixture_beta)?;
        let terms: Vec<f64> = enumerate_models(2, depth)?
            .iter()
            .map(|t| Ok(prior_log(t, depth, beta)? + marginal_log(t, &trie)?))
            .collect::<Result<_>>()?;
        let slow = log_sum_exp(&terms);
        Ok((!rel_close(fast, slow, 1e-10)).then(|| {
            format!(
                "{} beta={beta} recursion={fast} enumeration={slow}",
                describe(&seq)
            )
        }))
    })
}

fn predictive_normalization(config: &VerifyConfig) -> Result<Outcome> {
    let count = if config.quick { 60 } else { 500 };
    sweep(count, config.seed, 0x01, |rng| {
        let depth = rng.random_range(0..=3);
        let n = rng.random_range(0..=100);
        let beta = BETAS[rng.random_range(0..3)];
        let seq = random_sequence(2, depth, n, rng)?;
        let mut state = CtwState::new(2, depth, beta, seq.context())?;
        for (t, &s) in seq.body().iter().enumerate() {
            let total: f64 = state.predictive().iter().sum();
            if (total - 1.0).abs() > 1e-10 {
                return Ok(Some(format!(
                    "{} beta={beta} step={t} sum={total}",
                    describe(&seq)
                )));
            }
            state.update(s)?;
        }
        Ok(None)
    })
}

fn string_sum(config: &VerifyConfig) -> Result<Outcome> {
    let max_n = if config.quick { 6 } else { 8 };
    let mut checked = 0;
    for depth in 0..=2usize {
        for n in 0..=max_n {
            for beta in BETAS {
                let context = vec![0; depth];
                let total: f64 = (0..1usize << n)
                    .map(|bits| {
                        let body = (0..n).map(|i| (bits >> i) & 1).collect();
                        let seq = SymbolSequence::new(Alphabet::new(2)?, context.clone(), body)?;
                        Ok(ctw_mix_log(&CountTrie::build(&seq), beta)?.exp())
                    })
                    .sum::<Result<f64>>()?;
                checked += 1;
                if (total - 1.0).abs() > 1e-10 {
                    return Ok(Outcome {
                        passed: false,
                        detail: "string probabilities do not sum to one".into(),
                        witness: Some(format!("D={depth} n={n} beta={beta} sum={total}")),
                    });
                }
            }
        }
    }
    Ok(Outcome {
        passed: true,
        detail: format!("{checked} (D, n, beta) cases sum to one"),
        witness: None,
    })
}

fn streaming_batch(config: &VerifyConfig) -> Result<Outcome> {
    let count = if config.quick { 20 } else { 100 };
    sweep(count, config.seed, 0x02, |rng| {
        let m = rng.random_range(2..=3);
        let depth = rng.random_range(0..=4);
        let n = rng.random_range(0..=500);
        let beta = BETAS[rng.random_range(0..3)];
        let seq = random_sequence(m, depth, n, rng)?;
        let state = CtwState::from_sequence(&seq, beta)?;
        let trie = CountTrie::build(&seq);
        if *state.trie() != trie {
            return Ok(Some(format!("{} counts differ", describe(&seq))));
        }
        let batch = ctw_node_logs(&trie, beta)?;
        let stream = state.node_logs();
        let bad = (0..trie.node_count()).find(|&k| {
            !rel_close(batch.log_pe[k], stream.log_pe[k], 1e-10)
                || !rel_close(batch.log_pw[k], stream.log_pw[k], 1e-10)
        });
        Ok(bad.map(|k| format!("{} beta={beta} node={k}", describe(&seq))))
    })
}

fn kt_sandwich(config: &VerifyConfig) -> Result<Outcome> {
    sweep(1000, config.seed, 0x03, |rng| {
        let m = rng.random_range(2..=6);
        let big_m: u64 = rng.random_range(1..=10_000);
        // Random composition of M into m parts.
        let mut cuts: Vec<u64> = (0..m - 1).map(|_| rng.random_range(0..=big_m)).collect();
        cuts.sort_unstable();
        let mut counts = Vec::with_capacity(m);
        let mut prev = 0;
        for c in cuts.into_iter().chain([big_m]) {
            counts.push(c - prev);
            prev = c;
        }
        let (lo, hi) = pe_bounds(&counts)?;
        let v = pe_log(&counts);
        Ok((!(lo <= v && v <= hi))
            .then(|| format!("counts={counts:?} lower={lo} value={v} upper={hi}")))
    })
}

fn regret_bounds(config: &VerifyConfig) -> Result<Outcome> {
    let count = if config.quick { 100 } else { 1000 };
    sweep(count, config.seed, 0x04, |rng| {
        let m = rng.random_range(2..=3);
        let depth = rng.random_range(0..=3);
        let n = rng.random_range(1..=2000);
        let beta = BETAS[rng.random_range(0..3)];
        let spec = random_chain(m, depth, rng)?;
        let context: Vec<usize> = (0..depth).map(|_| rng.random_range(0..m)).collect();
        let seq = generate(&spec, n, &context, rng)?;
        let report = regret_report(&seq, spec.tree(), spec.theta(), beta)?;
        Ok((!report.bounds_hold()).then(|| {
            format!(
                "tree={} beta={beta} n={n} corollary_slack={} theorem1_slack={:?}",
                spec.tree(),
                report.corollary_slack,
                report.theorem1_slack
            )
        }))
    })
}

fn delta_identity() -> Result<Outcome> {
    for m in 2..=16 {
        let gap = corollary_leaf_constant(m) - minimax_leaf_constant(m);
        let d = delta_m(m)?;
        if (gap - d).abs() > 1e-12 || d <= 0.0 {
            return Ok(Outcome {
                passed: false,
                detail: "per-leaf constant gap differs from delta_m".into(),
                witness: Some(format!("m={m} gap={gap} delta={d}")),
            });
        }
    }
    Ok(Outcome {
        passed: true,
        detail: format!("m = 2..16, delta_2 = {:.6}", delta_m(2)?),
        witness: None,
    })
}

fn map_oracle(config: &VerifyConfig) -> Result<Outcome> {
    let count = if config.quick { 60 } else { 500 };
    sweep(count, config.seed, 0x05, |rng| {
        let (m, depth) = if rng.random_bool(0.8) {
            (2, rng.random_range(0..=3))
        } else {
            (3, rng.random_range(0..=2))
        };
        let n = rng.random_range(0..=60);
        let beta = BETAS[rng.random_range(0..3)];
        let seq = random_sequence(m, depth, n, rng)?;
        let trie = CountTrie::build(&seq);
        let mut scored: Vec<(f64, ContextTree)> = enumerate_models(m, depth)?
            .into_iter()
            .map(|t| Ok((model_posterior_log(&t, &trie, beta)?, t)))
            .collect::<Result<_>>()?;
        scored.sort_by(|a, b| b.0.total_cmp(&a.0));
        if scored.len() > 1 && scored[0].0 - scored[1].0 <= 1e-9 {
            return Ok(None);
        }
        let map = map_tree(&trie, beta, depth)?;
        Ok((map.tree != scored[0].1).then(|| {
            format!(
                "{} beta={beta} map={} brute_force={}",
                describe(&seq),
                map.tree,
                scored[0].1
            )
        }))
    })
}

fn lemma1_monte_carlo(config: &VerifyConfig) -> Result<Outcome> {
    let draws = 100_000;
    sweep(20, config.seed, 0x06, |rng| {
        let depth = rng.random_range(0..=2);
        let n = rng.random_range(1..=12);
        let seq = random_sequence(2, depth, n, rng)?;
        let tree = random_tree(2, depth, rng)?;
        let trie = CountTrie::build(&seq);
        let exact = marginal_log(&tree, &trie)?.exp();
        let prior = full_conditional(&CountTrie::new(2, depth)?, &tree)?;
        let counts: Vec<Vec<u64>> = tree.leaves().iter().map(|s| trie.counts_for(s)).collect();
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for _ in 0..draws {
            let theta = sample_params(&prior, rng);
            let lik: f64 = counts
                .iter()
                .zip(theta.rows())
                .map(|(a, row)| {
                    a.iter()
                        .zip(row)
                        .map(|(&k, p)| p.powi(k as i32))
                        .product::<f64>()
                })
                .product();
            sum += lik;
            sum_sq += lik * lik;
        }
        let mean = sum / draws as f64;
        let se = ((sum_sq / draws as f64 - mean * mean).max(0.0) / draws as f64).sqrt();
        Ok(((exact - mean).abs() > 3.0 * se).then(|| {
            format!(
                "{} tree={tree} exact={exact} estimate={mean} se={se}",
                describe(&seq)
            )
        }))
    })
}

fn two_state() -> Result<ChainSpec> {
    let tree = ContextTree::complete(2, 1)?;
    let theta = ParameterVector::new(&tree, vec![vec![0.9, 0.1], vec![0.2, 0.8]])?;
    ChainSpec::new(1, tree, theta)
}

fn fair_coin() -> Result<ChainSpec> {
    let tree = ContextTree::root(2)?;
    ChainSpec::new(0, tree.clone(), ParameterVector::uniform(&tree))
}

fn consistency(config: &VerifyConfig) -> Result<Outcome> {
    let report = consistency_suite(
        &two_state()?,
        0.5,
        5,
        &[1_000, 10_000, 50_000],
        100,
        config.seed,
    )?;
    let last = report.points.last().expect("three grid points");
    Ok(Outcome {
        passed: report.passes(&config.thresholds),
        detail: format!(
            "n={} recovery={:.3} posterior={:.4} trends={:?}",
            last.n, last.recovery_fraction, last.mean_posterior_true, report.trends
        ),
        witness: None,
    })
}

fn predictive(config: &VerifyConfig) -> Result<Outcome> {
    let report = predictive_suite(&two_state()?, 0.5, 5, 100_000, 20, config.seed)?;
    let zeta = report.zeta.iter().map(|z| z.mean).fold(0.0, f64::max);
    Ok(Outcome {
        passed: report.passes(&config.thresholds),
        detail: format!(
            "mean max deviation={:.5} max mean zeta={zeta:.3e}",
            report.mean_max_deviation
        ),
        witness: None,
    })
}

fn normality(config: &VerifyConfig) -> Result<Outcome> {
    let n = 100_000;
    let mut details = Vec::new();
    let mut passed = true;
    for (k, spec) in [two_state()?, fair_coin()?].into_iter().enumerate() {
        let law = stationary(&spec)?;
        let masses = law.leaf_masses(spec.tree())?;
        let blocks = fisher_blocks(spec.tree(), spec.theta(), &masses)?;
        let mut rng = replicate_rng(config.seed ^ 0x07, k as u64);
        let seq = crate::chain_sim::simulate_stationary(&spec, &law, spec.depth(), n, &mut rng)?;
        let report = normality_check(&CountTrie::build(&seq), spec.tree(), &blocks, n as u64)?;
        passed &= report.max_diagonal_deviation <= 0.1 && report.max_mean_error <= 0.01;
        details.push(format!(
            "{}: diagonal deviation {:.4}, mean error {:.5}",
            spec.tree(),
            report.max_diagonal_deviation,
            report.max_mean_error
        ));
    }
    Ok(Outcome {
        passed,
        detail: details.join("; "),
        witness: None,
    })
}

fn smbt(config: &VerifyConfig) -> Result<Outcome> {
    let spec = two_state()?;
    let trees = [
        spec.tree().clone(),
        ContextTree::root(2)?,
        ContextTree::complete(2, 2)?,
    ];
    let reports = smbt_compare(
        &spec,
        &trees,
        100_000,
        &mut replicate_rng(config.seed ^ 0x08, 0),
    )?;
    let ordered = reports[0].empirical_rate < reports[1].empirical_rate;
    Ok(Outcome {
        passed: ordered && reports.iter().all(|r| r.gap < 0.005),
        detail: reports
            .iter()
            .map(|r| format!("{}: gap {:.5}", r.tree, r.gap))
            .collect::<Vec<_>>()
            .join("; "),
        witness: None,
    })
}

/// Runs every check. Quick mode shrinks the sweeps and skips the
/// simulation suites.
pub fn run(config: &VerifyConfig) -> VerifyReport {
    use CheckKind::*;
    let mut items = vec![
        item(
            "prior_normalization",
            Hard,
            prior_normalization(config.quick),
        ),
        item("ctw_enumeration_oracle", Hard, ctw_enumeration(config)),
        item(
            "predictive_normalization",
            Hard,
            predictive_normalization(config),
        ),
        item("string_probabilities_sum_to_one", Hard, string_sum(config)),
        item("streaming_matches_batch", Hard, streaming_batch(config)),
        item("kt_bounds_sandwich", Hard, kt_sandwich(config)),
        item("regret_bounds", Hard, regret_bounds(config)),
        item("delta_m_identity", Hard, delta_identity()),
        item("map_oracle", Hard, map_oracle(config)),
    ];
    if !config.quick {
        items.extend([
            item(
                "marginal_monte_carlo",
                Statistical,
                lemma1_monte_carlo(config),
            ),
            item("map_consistency", Statistical, consistency(config)),
            item("predictive_convergence", Statistical, predictive(config)),
            item("posterior_normality", Statistical, normality(config)),
            item("entropy_rate_limit", Statistical, smbt(config)),
        ]);
    }
    VerifyReport {
        seed: config.seed,
        quick: config.quick,
        items,
    }
}
