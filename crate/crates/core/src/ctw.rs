//! Context-tree weighting.
//!
//! At every node `s` of the count trie the weighted probability is
//!
//! ```text
//! P_w(s) = P_e(a_s)                                   if s is at depth D
//! P_w(s) = β P_e(a_s) + (1 - β) Π_j P_w(sj)           otherwise
//! ```
//!
//! and `P_w(λ)` is the prior predictive likelihood: the probability of the
//! data averaged over every model of depth at most `D` and its parameters.
//! Zero-count nodes have `P_e = P_w = 1`, so they never need to exist.

use crate::context_tree::{prior_log, Context, ContextTree};
use crate::counting::{CountTrie, NodeId, SymbolSequence};
use crate::error::{check_beta, BctError, Result};
use crate::estimator::{log_add_exp, pe_log, pe_step_unchecked};

/// Per-node `log P_e` and `log P_w`, indexed by trie node id.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeLogs {
    pub log_pe: Vec<f64>,
    pub log_pw: Vec<f64>,
}

/// Recomputes `log P_e` and `log P_w` at every node of `trie` from its counts.
pub fn ctw_node_logs(trie: &CountTrie, beta: f64) -> Result<NodeLogs> {
    check_beta(beta)?;
    let (log_beta, log_rest) = (beta.ln(), (-beta).ln_1p());
    let len = trie.node_count();
    let log_pe: Vec<f64> = (0..len).map(|node| pe_log(trie.counts(node))).collect();
    let mut log_pw = vec![0.0; len];
    // Children have larger ids than their parents.
    for node in (0..len).rev() {
        log_pw[node] = match trie.children(node) {
            None => log_pe[node],
            Some(children) => {
                let split: f64 = children.map(|c| log_pw[c]).sum();
                log_add_exp(log_beta + log_pe[node], log_rest + split)
            }
        };
    }
    Ok(NodeLogs { log_pe, log_pw })
}

/// `log P*_D`, the log prior predictive likelihood of the data in `trie`.
pub fn ctw_mix_log(trie: &CountTrie, beta: f64) -> Result<f64> {
    ctw_node_logs(trie, beta).map(|logs| logs.log_pw[trie.root()])
}

/// `log P(x | T) = Σ_{s ∈ T} log P_e(a_s)`.
pub fn marginal_log(tree: &ContextTree, trie: &CountTrie) -> Result<f64> {
    check_alphabets(tree, trie)?;
    tree.check_depth(trie.depth())?;
    Ok(tree
        .leaves()
        .iter()
        .map(|leaf| {
            trie.node(leaf)
                .map_or(0.0, |node| pe_log(trie.counts(node)))
        })
        .sum())
}

/// `log π(T | x) = log π_D(T) + log P(x | T) - log P*_D(x)`.
pub fn model_posterior_log(tree: &ContextTree, trie: &CountTrie, beta: f64) -> Result<f64> {
    let prior = prior_log(tree, trie.depth(), beta)?;
    let evidence = ctw_mix_log(trie, beta)?;
    Ok((prior + marginal_log(tree, trie)? - evidence).min(0.0))
}

fn check_alphabets(tree: &ContextTree, trie: &CountTrie) -> Result<()> {
    if tree.alphabet_size() != trie.alphabet_size() {
        return Err(BctError::Structure(format!(
            "tree is {}-ary but the counts are over {} symbols",
            tree.alphabet_size(),
            trie.alphabet_size()
        )));
    }
    Ok(())
}

/// The maximum a posteriori model and its unnormalized log posterior
/// `log π_D(T*) + log P(x | T*)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MapTree {
    pub tree: ContextTree,
    pub log_posterior_unnorm: f64,
}

/// Finds the MAP tree over all models of depth at most `max_depth`.
///
/// The maximizing analogue of the weighting recursion,
/// `P_m(s) = max(β P_e(s), (1-β) Π_j P_m(sj))`, is evaluated bottom-up and
/// the arg-max decisions are replayed from the root. Ties keep the leaf.
/// Subtrees without data are handled in closed form: their best value only
/// depends on depth, and for `β < 1/2` splitting them is preferred.
pub fn map_tree(trie: &CountTrie, beta: f64, max_depth: usize) -> Result<MapTree> {
    check_beta(beta)?;
    if max_depth > trie.depth() {
        return Err(BctError::Parameter(format!(
            "MAP depth {max_depth} exceeds the count depth {}",
            trie.depth()
        )));
    }
    let (log_beta, log_rest) = (beta.ln(), (-beta).ln_1p());
    let m = trie.alphabet_size();

    // Best value of an empty subtree rooted at depth d, and whether it splits.
    let mut empty_value = vec![0.0; max_depth + 1];
    let mut empty_split = vec![false; max_depth + 1];
    for d in (0..max_depth).rev() {
        let split = log_rest + m as f64 * empty_value[d + 1];
        empty_split[d] = split > log_beta;
        empty_value[d] = split.max(log_beta);
    }

    let mut best = vec![0.0; trie.node_count()];
    let mut split = vec![false; trie.node_count()];
    // Depth-first post-order with explicit depths.
    let mut stack = vec![(trie.root(), 0usize, false)];
    while let Some((node, depth, expanded)) = stack.pop() {
        if depth == max_depth {
            best[node] = pe_log(trie.counts(node));
            continue;
        }
        match trie.children(node) {
            None => {
                debug_assert_eq!(trie.total(node), 0);
                best[node] = empty_value[depth];
                split[node] = empty_split[depth];
            }
            Some(children) if !expanded => {
                stack.push((node, depth, true));
                stack.extend(children.map(|c| (c, depth + 1, false)));
            }
            Some(children) => {
                let keep = log_beta + pe_log(trie.counts(node));
                let divide = log_rest + children.map(|c| best[c]).sum::<f64>();
                split[node] = divide > keep;
                best[node] = divide.max(keep);
            }
        }
    }

    let mut leaves = Vec::new();
    let mut stack = vec![(Some(trie.root()), Vec::new())];
    while let Some((node, ctx)) = stack.pop() {
        let depth = ctx.len();
        let splits = depth < max_depth
            && match node {
                Some(n) => split[n],
                None => empty_split[depth],
            };
        if splits {
            for j in (0..m).rev() {
                let mut c = ctx.clone();
                c.push(j);
                stack.push((node.and_then(|n| trie.child(n, j)), c));
            }
        } else {
            leaves.push(Context::new(ctx));
        }
    }
    let tree = ContextTree::from_leaves(m, &leaves)?;
    Ok(MapTree {
        tree,
        log_posterior_unnorm: best[trie.root()],
    })
}

/// How the posterior predictive at one context decomposes into the KT
/// predictions of the nodes along the context path.
#[derive(Clone, Debug, PartialEq)]
pub struct MixtureDiagnostics {
    /// The depth-`D` context, most recent symbol first.
    pub context: Context,
    /// `log ζ_{s_t} = log P_e(s_t) - Σ_j log P_w(s_t j)` for `t = 0..D`.
    pub log_zeta: Vec<f64>,
    /// Weight of the KT prediction of `s_t` for `t = 0..=D`.
    pub coefficients: Vec<f64>,
    /// KT predictive vector of `s_t` for `t = 0..=D`.
    pub kt_predictive: Vec<Vec<f64>>,
}

impl MixtureDiagnostics {
    /// `Σ_t coefficient_t · KT_t`, which equals the posterior predictive.
    pub fn reconstruct(&self) -> Vec<f64> {
        let m = self.kt_predictive[0].len();
        (0..m)
            .map(|j| {
                self.coefficients
                    .iter()
                    .zip(&self.kt_predictive)
                    .map(|(c, kt)| c * kt[j])
                    .sum()
            })
            .collect()
    }
}

/// Sequential CTW: consumes one symbol at a time, touching only the `D + 1`
/// nodes on the current context path.
#[derive(Clone, Debug)]
pub struct CtwState {
    trie: CountTrie,
    log_pe: Vec<f64>,
    log_pw: Vec<f64>,
    beta: f64,
    log_beta: f64,
    log_rest: f64,
    recent: Vec<usize>,
    log_prob: f64,
    path: Vec<NodeId>,
}

impl CtwState {
    /// Starts from an empty body; `context` holds the last `depth` symbols
    /// before it, oldest first.
    pub fn new(m: usize, depth: usize, beta: f64, context: &[usize]) -> Result<Self> {
        check_beta(beta)?;
        let trie = CountTrie::new(m, depth)?;
        if context.len() != depth {
            return Err(BctError::Precondition(format!(
                "initial context has {} symbols, expected {depth}",
                context.len()
            )));
        }
        if let Some(&bad) = context.iter().find(|&&s| s >= m) {
            return Err(BctError::SymbolOutOfRange { symbol: bad, m });
        }
        Ok(Self {
            trie,
            log_pe: vec![0.0],
            log_pw: vec![0.0],
            beta,
            log_beta: beta.ln(),
            log_rest: (-beta).ln_1p(),
            recent: context.to_vec(),
            log_prob: 0.0,
            path: Vec::with_capacity(depth + 1),
        })
    }

    /// Streams the whole body of `seq` through a fresh state.
    pub fn from_sequence(seq: &SymbolSequence, beta: f64) -> Result<Self> {
        let mut state = Self::new(seq.alphabet().size(), seq.depth(), beta, seq.context())?;
        for &s in seq.body() {
            state.update(s)?;
        }
        Ok(state)
    }

    /// Consumes `symbol` and returns `log P*_D(symbol | past)`.
    pub fn update(&mut self, symbol: usize) -> Result<f64> {
        let m = self.trie.alphabet_size();
        if symbol >= m {
            return Err(BctError::SymbolOutOfRange { symbol, m });
        }
        let mut path = std::mem::take(&mut self.path);
        self.trie.descend_creating(&self.recent, &mut path);
        let len = self.trie.node_count();
        self.log_pe.resize(len, 0.0);
        self.log_pw.resize(len, 0.0);

        let previous = self.log_pw[self.trie.root()];
        for &node in path.iter().rev() {
            let counts = self.trie.counts(node);
            self.log_pe[node] += pe_step_unchecked(counts, counts[symbol]).ln();
            self.trie.increment(node, symbol);
            self.log_pw[node] = match self.trie.children(node) {
                None => self.log_pe[node],
                Some(children) => {
                    let split: f64 = children.map(|c| self.log_pw[c]).sum();
                    log_add_exp(self.log_beta + self.log_pe[node], self.log_rest + split)
                }
            };
        }
        self.path = path;

        if !self.recent.is_empty() {
            self.recent.remove(0);
            self.recent.push(symbol);
        }
        let cond = self.log_pw[self.trie.root()] - previous;
        self.log_prob += cond;
        Ok(cond)
    }

    /// The posterior predictive distribution of the next symbol. Leaves the
    /// state unchanged.
    pub fn predictive(&self) -> Vec<f64> {
        let m = self.trie.alphabet_size();
        let path = self.existing_path(&self.current_context());
        let depth = self.trie.depth();
        let zeros = vec![0u64; m];
        (0..m)
            .map(|j| {
                // Walk up from depth D, tracking the hypothetical new log P_w.
                let mut new_pw = 0.0;
                for d in (0..=depth).rev() {
                    let node = path.get(d).copied();
                    let counts = node.map_or(zeros.as_slice(), |n| self.trie.counts(n));
                    let pe = node.map_or(0.0, |n| self.log_pe[n]);
                    let new_pe = pe + pe_step_unchecked(counts, counts[j]).ln();
                    new_pw = if d == depth {
                        new_pe
                    } else {
                        let on_path = path.get(d + 1).copied();
                        let split = match node.and_then(|n| self.trie.children(n)) {
                            Some(children) => children
                                .map(|c| {
                                    if Some(c) == on_path {
                                        new_pw
                                    } else {
                                        self.log_pw[c]
                                    }
                                })
                                .sum(),
                            None => new_pw,
                        };
                        log_add_exp(self.log_beta + new_pe, self.log_rest + split)
                    };
                }
                (new_pw - self.log_pw[self.trie.root()]).exp()
            })
            .collect()
    }

    /// Decomposition of the predictive at the current context.
    pub fn mixture_diagnostics(&self) -> MixtureDiagnostics {
        self.mixture_diagnostics_at(&self.current_context())
            .expect("current context has depth D")
    }

    /// Decomposition of the predictive at an arbitrary depth-`D` context.
    pub fn mixture_diagnostics_at(&self, ctx: &Context) -> Result<MixtureDiagnostics> {
        let depth = self.trie.depth();
        let m = self.trie.alphabet_size();
        if ctx.depth() != depth {
            return Err(BctError::Precondition(format!(
                "diagnostics need a depth-{depth} context, got {ctx}"
            )));
        }
        if let Some(&bad) = ctx.symbols().iter().find(|&&s| s >= m) {
            return Err(BctError::SymbolOutOfRange { symbol: bad, m });
        }
        let path = self.existing_path(ctx);
        let zeros = vec![0u64; m];
        let kt_predictive: Vec<Vec<f64>> = (0..=depth)
            .map(|d| {
                let counts = path
                    .get(d)
                    .map_or(zeros.as_slice(), |&n| self.trie.counts(n));
                (0..m)
                    .map(|j| pe_step_unchecked(counts, counts[j]))
                    .collect()
            })
            .collect();
        let log_zeta: Vec<f64> = (0..depth)
            .map(|d| path.get(d).map_or(0.0, |&n| self.node_log_zeta(n)))
            .collect();

        let mut coefficients = Vec::with_capacity(depth + 1);
        let mut reach = 1.0;
        for lz in &log_zeta {
            // Share kept by the KT estimate at this node.
            let keep = 1.0 / (1.0 + (self.log_rest - self.log_beta - lz).exp());
            coefficients.push(reach * keep);
            reach *= 1.0 - keep;
        }
        coefficients.push(reach);
        Ok(MixtureDiagnostics {
            context: ctx.clone(),
            log_zeta,
            coefficients,
            kt_predictive,
        })
    }

    /// `log ζ_s` for a materialized internal node `s`; `Some(0.0)` for
    /// contexts without data above depth `D`.
    pub fn log_zeta(&self, ctx: &Context) -> Option<f64> {
        if ctx.depth() >= self.trie.depth() {
            return None;
        }
        Some(self.trie.node(ctx).map_or(0.0, |n| self.node_log_zeta(n)))
    }

    fn node_log_zeta(&self, node: NodeId) -> f64 {
        let split: f64 = self
            .trie
            .children(node)
            .map_or(0.0, |c| c.map(|c| self.log_pw[c]).sum());
        self.log_pe[node] - split
    }

    fn existing_path(&self, ctx: &Context) -> Vec<NodeId> {
        let mut path = vec![self.trie.root()];
        let mut node = self.trie.root();
        for &j in ctx.symbols() {
            match self.trie.child(node, j) {
                Some(c) => {
                    node = c;
                    path.push(c);
                }
                None => break,
            }
        }
        path
    }

    /// The current depth-`D` context, most recent symbol first.
    pub fn current_context(&self) -> Context {
        Context::new(self.recent.iter().rev().copied().collect())
    }

    /// Running `log P*_D` of the consumed body.
    pub fn log_prob(&self) -> f64 {
        self.log_prob
    }

    /// `log P_w` at the root; equal to [`CtwState::log_prob`] up to rounding.
    pub fn root_log_pw(&self) -> f64 {
        self.log_pw[self.trie.root()]
    }

    pub fn trie(&self) -> &CountTrie {
        &self.trie
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn node_logs(&self) -> NodeLogs {
        NodeLogs {
            log_pe: self.log_pe.clone(),
            log_pw: self.log_pw.clone(),
        }
    }

    pub fn node_log_pe(&self, node: NodeId) -> f64 {
        self.log_pe[node]
    }

    pub fn node_log_pw(&self, node: NodeId) -> f64 {
        self.log_pw[node]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::context_tree::{enumerate_models, Alphabet};
    use crate::estimator::log_sum_exp;

    fn seq(m: usize, ctx: &[usize], body: &[usize]) -> SymbolSequence {
        SymbolSequence::new(Alphabet::new(m).unwrap(), ctx.to_vec(), body.to_vec()).unwrap()
    }

    fn lcg(seed: u64, len: usize, m: usize) -> Vec<usize> {
        let mut state = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
        (0..len)
            .map(|_| {
                state = state
                    .wrapping_mul(6364136223846793005)
                    .wrapping_add(1442695040888963407);
                ((state >> 33) % m as u64) as usize
            })
            .collect()
    }

    fn brute_force_mix(trie: &CountTrie, beta: f64) -> f64 {
        let d = trie.depth();
        let terms: Vec<f64> = enumerate_models(trie.alphabet_size(), d)
            .unwrap()
            .iter()
            .map(|t| prior_log(t, d, beta).unwrap() + marginal_log(t, trie).unwrap())
            .collect();
        log_sum_exp(&terms)
    }

    #[test]
    fn depth_zero_is_kt() {
        let trie = CountTrie::build(&seq(2, &[], &[0, 1, 1, 0, 0]));
        assert_eq!(ctw_mix_log(&trie, 0.3).unwrap(), pe_log(&[3, 2]));
    }

    #[test]
    fn worked_example_is_one_sixteenth() {
        let trie = CountTrie::build(&seq(2, &[0], &[0, 1, 1]));
        let mix = ctw_mix_log(&trie, 0.5).unwrap();
        assert!((mix - (1.0f64 / 16.0).ln()).abs() < 1e-14);
        assert!((mix - brute_force_mix(&trie, 0.5)).abs() < 1e-14);
        let lambda = ContextTree::root(2).unwrap();
        let post = model_posterior_log(&lambda, &trie, 0.5).unwrap();
        assert!((post - 0.5f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn beta_validation() {
        let trie = CountTrie::new(2, 1).unwrap();
        assert!(ctw_mix_log(&trie, 0.0).is_err());
        assert!(ctw_mix_log(&trie, 1.0).is_err());
        assert!(map_tree(&trie, 1.5, 1).is_err());
        assert!(CtwState::new(2, 1, -0.1, &[0]).is_err());
    }

    #[test]
    fn strings_of_length_three_sum_to_one() {
        for depth in 0..=2 {
            let ctx = vec![1; depth];
            let total: f64 = (0..8usize)
                .map(|code| {
                    let body: Vec<usize> = (0..3).map(|k| (code >> k) & 1).collect();
                    ctw_mix_log(&CountTrie::build(&seq(2, &ctx, &body)), 0.4)
                        .unwrap()
                        .exp()
                })
                .sum();
            assert!((total - 1.0).abs() < 1e-12, "depth {depth}: {total}");
        }
    }

    #[test]
    fn recursion_matches_enumeration() {
        for case in 0..60u64 {
            let m = 2 + (case % 2) as usize;
            let depth = (case % 3) as usize;
            let beta = [0.3, 0.5, 0.7][(case % 3) as usize];
            let s =
                SymbolSequence::peel(Alphabet::new(m).unwrap(), lcg(case, depth + 30, m), depth)
                    .unwrap();
            let trie = CountTrie::build(&s);
            let a = ctw_mix_log(&trie, beta).unwrap();
            let b = brute_force_mix(&trie, beta);
            assert!(
                (a - b).abs() < 1e-10 * b.abs().max(1.0),
                "case {case}: {a} vs {b}"
            );
        }
    }

    #[test]
    fn first_symbol_at_depth_zero_is_half() {
        let mut state = CtwState::new(2, 0, 0.3, &[]).unwrap();
        assert_eq!(state.predictive(), vec![0.5, 0.5]);
        let cond = state.update(1).unwrap();
        assert!((cond.exp() - 0.5).abs() < 1e-15);
        let three = CtwState::new(3, 2, 0.5, &[0, 2]).unwrap();
        for p in three.predictive() {
            assert!((p - 1.0 / 3.0).abs() < 1e-14);
        }
    }

    #[test]
    fn streaming_matches_batch() {
        for case in 0..40u64 {
            let m = 2 + (case % 3) as usize;
            let depth = (case % 5) as usize;
            let beta = 0.2 + 0.15 * (case % 5) as f64;
            let s = SymbolSequence::peel(
                Alphabet::new(m).unwrap(),
                lcg(case + 100, depth + 200, m),
                depth,
            )
            .unwrap();
            let state = CtwState::from_sequence(&s, beta).unwrap();
            let trie = CountTrie::build(&s);
            assert_eq!(state.trie(), &trie);
            let batch = ctw_node_logs(&trie, beta).unwrap();
            let stream = state.node_logs();
            for node in 0..trie.node_count() {
                assert!((batch.log_pe[node] - stream.log_pe[node]).abs() < 1e-10);
                assert!((batch.log_pw[node] - stream.log_pw[node]).abs() < 1e-10);
            }
            assert!((state.log_prob() - batch.log_pw[0]).abs() < 1e-10);
        }
    }

    #[test]
    fn update_changes_exactly_one_path() {
        let s = seq(2, &[0, 1, 1], &lcg(9, 120, 2));
        let mut state = CtwState::from_sequence(&s, 0.5).unwrap();
        let before = state.node_logs();
        state.update(1).unwrap();
        let after = state.node_logs();
        let changed = (0..before.log_pw.len())
            .filter(|&n| before.log_pw[n] != after.log_pw[n])
            .count()
            + (before.log_pw.len()..after.log_pw.len()).count();
        assert_eq!(changed, 4);
    }

    #[test]
    fn predictive_is_batch_ratio() {
        for case in 0..30u64 {
            let m = 2 + (case % 2) as usize;
            let depth = (case % 4) as usize;
            let s = SymbolSequence::peel(
                Alphabet::new(m).unwrap(),
                lcg(case + 7, depth + 60, m),
                depth,
            )
            .unwrap();
            let state = CtwState::from_sequence(&s, 0.6).unwrap();
            let base = ctw_mix_log(&CountTrie::build(&s), 0.6).unwrap();
            let pred = state.predictive();
            assert!((pred.iter().sum::<f64>() - 1.0).abs() < 1e-10);
            for (j, p) in pred.iter().enumerate() {
                let mut longer = s.clone();
                longer.push(j).unwrap();
                let ratio = (ctw_mix_log(&CountTrie::build(&longer), 0.6).unwrap() - base).exp();
                assert!((p - ratio).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn diagnostics_reconstruct_predictive() {
        let s = seq(3, &[0, 2, 1], &lcg(21, 400, 3));
        let state = CtwState::from_sequence(&s, 0.5).unwrap();
        let diag = state.mixture_diagnostics();
        assert_eq!(diag.coefficients.len(), 4);
        assert!((diag.coefficients.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        assert!(diag.coefficients.iter().all(|&c| c >= 0.0));
        for (a, b) in diag.reconstruct().iter().zip(state.predictive()) {
            assert!((a - b).abs() < 1e-10);
        }
        let d0 = CtwState::new(2, 0, 0.5, &[]).unwrap().mixture_diagnostics();
        assert_eq!(d0.coefficients, vec![1.0]);
    }

    #[test]
    fn map_on_empty_data() {
        let empty = CountTrie::new(2, 1).unwrap();
        let map = map_tree(&empty, 0.5, 1).unwrap();
        assert!(map.tree.is_root_only());
        // With β < 1/2 every split of an empty subtree gains prior mass.
        let map = map_tree(&CountTrie::new(2, 2).unwrap(), 0.3, 2).unwrap();
        assert_eq!(map.tree, ContextTree::complete(2, 2).unwrap());
    }

    #[test]
    fn map_matches_enumeration() {
        for case in 0..120u64 {
            let depth = (case % 4) as usize;
            let beta = [0.3, 0.5, 0.7][(case / 4 % 3) as usize];
            let n = (case * 13 % 80) as usize;
            let s = SymbolSequence::peel(
                Alphabet::new(2).unwrap(),
                lcg(case + 55, depth + n, 2),
                depth,
            )
            .unwrap();
            let trie = CountTrie::build(&s);
            let map = map_tree(&trie, beta, depth).unwrap();
            let mut scored: Vec<(f64, ContextTree)> = enumerate_models(2, depth)
                .unwrap()
                .into_iter()
                .map(|t| {
                    (
                        prior_log(&t, depth, beta).unwrap() + marginal_log(&t, &trie).unwrap(),
                        t,
                    )
                })
                .collect();
            scored.sort_by(|a, b| b.0.total_cmp(&a.0));
            let own = prior_log(&map.tree, depth, beta).unwrap()
                + marginal_log(&map.tree, &trie).unwrap();
            assert!((own - map.log_posterior_unnorm).abs() < 1e-9);
            assert!((scored[0].0 - own).abs() < 1e-9);
            if scored.len() < 2 || scored[0].0 - scored[1].0 > 1e-9 {
                assert_eq!(map.tree, scored[0].1, "case {case}");
            }
        }
    }

    #[test]
    fn posteriors_normalize() {
        let s = seq(3, &[1, 0], &lcg(4, 50, 3));
        let trie = CountTrie::build(&s);
        let total: f64 = enumerate_models(3, 2)
            .unwrap()
            .iter()
            .map(|t| model_posterior_log(t, &trie, 0.45).unwrap().exp())
            .sum();
        assert!((total - 1.0).abs() < 1e-10);
        let d0 = CountTrie::build(&seq(2, &[], &[1, 1, 0]));
        assert_eq!(
            model_posterior_log(&ContextTree::root(2).unwrap(), &d0, 0.5).unwrap(),
            0.0
        );
    }
}
