//! Variable-memory chains: simulation, the stationary law of the lifted
//! first-order chain on `A^D`, and the entropy-rate functional.
//!
//! Lifted states are encoded base `m` with the most recent symbol as the
//! least significant digit, so appending symbol `j` to state `z` gives
//! `(z * m + j) mod m^D`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::context_tree::Alphabet;
use crate::context_tree::{Context, ContextTree, ParameterVector};
use crate::counting::{CountTrie, SymbolSequence};
use crate::ctw::marginal_log;
use crate::error::{BctError, Result};

/// Default cap on `m^D` for the stationary solve.
pub const STATE_CAP: u128 = 1 << 20;
pub const STATIONARY_TOLERANCE: f64 = 1e-12;
pub const MAX_POWER_ITERATIONS: usize = 1_000_000;

/// A simulatable chain: memory length `D`, model `T` of depth at most `D`,
/// and one transition row per leaf.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainSpec {
    depth: usize,
    tree: ContextTree,
    theta: ParameterVector,
}

/// On-disk form of a [`ChainSpec`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSpecDocument {
    pub alphabet_size: usize,
    pub depth: usize,
    /// Canonical tree text.
    pub tree: String,
    /// One row per leaf, leaves in canonical depth-first order.
    pub theta: Vec<Vec<f64>>,
}

impl ChainSpec {
    pub fn new(depth: usize, tree: ContextTree, theta: ParameterVector) -> Result<Self> {
        tree.check_depth(depth)?;
        let theta = ParameterVector::new(&tree, theta.rows().to_vec())?;
        Ok(Self { depth, tree, theta })
    }

    pub fn from_document(doc: &ChainSpecDocument) -> Result<Self> {
        let tree = ContextTree::parse(doc.alphabet_size, &doc.tree)?;
        let theta = ParameterVector::new(&tree, doc.theta.clone())?;
        Self::new(doc.depth, tree, theta)
    }

    pub fn to_document(&self) -> ChainSpecDocument {
        ChainSpecDocument {
            alphabet_size: self.alphabet_size(),
            depth: self.depth,
            tree: self.tree.to_canonical(),
            theta: self.theta.rows().to_vec(),
        }
    }

    pub fn alphabet_size(&self) -> usize {
        self.tree.alphabet_size()
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn tree(&self) -> &ContextTree {
        &self.tree
    }

    pub fn theta(&self) -> &ParameterVector {
        &self.theta
    }

    /// The same chain viewed with a longer memory.
    pub fn with_depth(&self, depth: usize) -> Result<Self> {
        Self::new(depth, self.tree.clone(), self.theta.clone())
    }

    /// Next-symbol law after `past` (chronological, at least `D` symbols).
    pub fn transition(&self, past: &[usize]) -> Result<&[f64]> {
        self.tree.leaf_index_of(past).map(|i| self.theta.row(i))
    }

    /// `m^D`, saturating.
    pub fn state_count(&self) -> u128 {
        (self.alphabet_size() as u128).saturating_pow(self.depth as u32)
    }

    fn leaf_of_states(&self, states: usize) -> Vec<u32> {
        let m = self.alphabet_size();
        let mut past = vec![0usize; self.depth];
        (0..states)
            .map(|z| {
                let mut code = z;
                for slot in past.iter_mut().rev() {
                    *slot = code % m;
                    code /= m;
                }
                self.tree
                    .leaf_index_of(&past)
                    .expect("lifted states have length D") as u32
            })
            .collect()
    }
}

fn draw<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (j, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return j;
        }
    }
    // Rounding left a sliver above the cumulative sum; take the last
    // symbol with positive probability.
    probs
        .iter()
        .rposition(|&p| p > 0.0)
        .unwrap_or(probs.len() - 1)
}

/// Simulates `n` symbols following `context` (chronological, at least `D`
/// symbols), which becomes the sequence's initial context.
pub fn generate<R: Rng + ?Sized>(
    spec: &ChainSpec,
    n: usize,
    context: &[usize],
    rng: &mut R,
) -> Result<SymbolSequence> {
    let alphabet = Alphabet::new(spec.alphabet_size())?;
    if context.len() < spec.depth {
        return Err(BctError::Precondition(format!(
            "initial context has {} symbols, the chain needs {}",
            context.len(),
            spec.depth
        )));
    }
    for &s in context {
        alphabet.check(s)?;
    }
    let mut symbols = Vec::with_capacity(context.len() + n);
    symbols.extend_from_slice(context);
    for _ in 0..n {
        let next = draw(spec.transition(&symbols)?, rng);
        symbols.push(next);
    }
    SymbolSequence::peel(alphabet, symbols, context.len())
}

/// Draws a stationary start and returns `n` symbols whose initial context
/// has length `context_depth`.
pub fn simulate_stationary<R: Rng + ?Sized>(
    spec: &ChainSpec,
    stationary: &Stationary,
    context_depth: usize,
    n: usize,
    rng: &mut R,
) -> Result<SymbolSequence> {
    let m = spec.alphabet_size();
    if stationary.depth != spec.depth || stationary.m != m {
        return Err(BctError::Parameter(
            "stationary law was computed for a different chain".into(),
        ));
    }
    let mut code = draw(&stationary.probs, rng);
    let mut start = vec![0usize; spec.depth];
    for slot in start.iter_mut().rev() {
        *slot = code % m;
        code /= m;
    }
    let warmup = context_depth.saturating_sub(spec.depth);
    let full = generate(spec, warmup + n, &start, rng)?;
    let symbols = full.all_symbols();
    let offset = symbols.len() - n - context_depth;
    SymbolSequence::peel(Alphabet::new(m)?, symbols[offset..].to_vec(), context_depth)
}

/// Stationary law of the lifted chain on `A^D`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Stationary {
    pub m: usize,
    pub depth: usize,
    /// Indexed by lifted state code.
    pub probs: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    /// The whole lifted state graph is one communicating class.
    pub irreducible: bool,
}

impl Stationary {
    /// `π(s)`: probability that the most recent `|s|` symbols read `s`
    /// (newest first). Requires `|s| ≤ D`.
    pub fn mass(&self, ctx: &Context) -> Result<f64> {
        let (code, stride) = self.suffix_code(ctx)?;
        Ok(self.probs.iter().skip(code).step_by(stride).sum())
    }

    pub fn leaf_masses(&self, tree: &ContextTree) -> Result<Vec<f64>> {
        tree.leaves().iter().map(|s| self.mass(s)).collect()
    }

    fn suffix_code(&self, ctx: &Context) -> Result<(usize, usize)> {
        if ctx.depth() > self.depth {
            return Err(BctError::Precondition(format!(
                "context {ctx} is deeper than the lifted depth {}",
                self.depth
            )));
        }
        let mut code = 0;
        let mut stride = 1;
        for &s in ctx.symbols() {
            if s >= self.m {
                return Err(BctError::SymbolOutOfRange {
                    symbol: s,
                    m: self.m,
                });
            }
            code += s * stride;
            stride *= self.m;
        }
        Ok((code, stride))
    }

    /// `‖πK - π‖₁` for the chain `spec`.
    pub fn fixed_point_residual(&self, spec: &ChainSpec) -> f64 {
        let next = step(spec, &spec.leaf_of_states(self.probs.len()), &self.probs);
        l1(&next, &self.probs)
    }
}

fn step(spec: &ChainSpec, leaf_of: &[u32], probs: &[f64]) -> Vec<f64> {
    let m = spec.alphabet_size();
    let states = probs.len();
    let mut next = vec![0.0; states];
    for (z, &p) in probs.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let row = spec.theta.row(leaf_of[z] as usize);
        let base = (z * m) % states;
        for (j, &q) in row.iter().enumerate() {
            next[(base + j) % states] += p * q;
        }
    }
    next
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Strongly connected components of the lifted transition graph, by an
/// iterative Tarjan walk. Returns the component id of every state.
fn components(spec: &ChainSpec, leaf_of: &[u32]) -> (Vec<u32>, usize) {
    const UNSEEN: u32 = u32::MAX;
    let m = spec.alphabet_size();
    let states = leaf_of.len();
    let edge = |v: usize, j: usize| -> Option<usize> {
        (spec.theta.row(leaf_of[v] as usize)[j] > 0.0).then(|| (v * m + j) % states)
    };

    let mut index = vec![UNSEEN; states];
    let mut low = vec![0u32; states];
    let mut on_stack = vec![false; states];
    let mut comp = vec![UNSEEN; states];
    let mut stack = Vec::new();
    let mut frames: Vec<(usize, usize)> = Vec::new();
    let mut counter = 0u32;
    let mut n_comp = 0usize;

    for root in 0..states {
        if index[root] != UNSEEN {
            continue;
        }
        index[root] = counter;
        low[root] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root] = true;
        frames.push((root, 0));
        while let Some(frame) = frames.last_mut() {
            let v = frame.0;
            if frame.1 < m {
                let j = frame.1;
                frame.1 += 1;
                if let Some(w) = edge(v, j) {
                    if index[w] == UNSEEN {
                        index[w] = counter;
                        low[w] = counter;
                        counter += 1;
                        stack.push(w);
                        on_stack[w] = true;
                        frames.push((w, 0));
                    } else if on_stack[w] {
                        low[v] = low[v].min(index[w]);
                    }
                }
            } else {
                frames.pop();
                if let Some(&(u, _)) = frames.last() {
                    low[u] = low[u].min(low[v]);
                }
                if low[v] == index[v] {
                    while let Some(w) = stack.pop() {
                        on_stack[w] = false;
                        comp[w] = n_comp as u32;
                        if w == v {
                            break;
                        }
                    }
                    n_comp += 1;
                }
            }
        }
    }
    (comp, n_comp)
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Result of the ergodicity analysis of the lifted chain.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Ergodicity {
    pub closed_classes: usize,
    pub period: usize,
    pub irreducible: bool,
}

impl Ergodicity {
    /// A single closed class, aperiodic: the stationary law is unique and
    /// the chain converges to it from any start.
    pub fn is_ergodic(&self) -> bool {
        self.closed_classes == 1 && self.period == 1
    }
}

fn analyse(spec: &ChainSpec, leaf_of: &[u32]) -> (Ergodicity, Vec<bool>) {
    let m = spec.alphabet_size();
    let states = leaf_of.len();
    let (comp, n_comp) = components(spec, leaf_of);
    let mut closed = vec![true; n_comp];
    for v in 0..states {
        for (j, &q) in spec.theta.row(leaf_of[v] as usize).iter().enumerate() {
            if q > 0.0 && comp[(v * m + j) % states] != comp[v] {
                closed[comp[v] as usize] = false;
            }
        }
    }
    let closed_ids: Vec<usize> = (0..n_comp).filter(|&c| closed[c]).collect();
    let mut period = 0;
    let mut in_class = vec![false; states];
    if let [class] = closed_ids.as_slice() {
        for v in 0..states {
            in_class[v] = comp[v] as usize == *class;
        }
        // Breadth-first levels inside the class; the period is the gcd of
        // level differences along every edge.
        let root = in_class.iter().position(|&b| b).expect("class is nonempty");
        let mut level = vec![usize::MAX; states];
        level[root] = 0;
        let mut queue = std::collections::VecDeque::from([root]);
        while let Some(v) = queue.pop_front() {
            for (j, &q) in spec.theta.row(leaf_of[v] as usize).iter().enumerate() {
                let w = (v * m + j) % states;
                if q == 0.0 || !in_class[w] {
                    continue;
                }
                if level[w] == usize::MAX {
                    level[w] = level[v] + 1;
                    queue.push_back(w);
                } else {
                    period = gcd(period, (level[v] + 1).abs_diff(level[w]));
                }
            }
        }
    }
    (
        Ergodicity {
            closed_classes: closed_ids.len(),
            period,
            irreducible: n_comp == 1,
        },
        in_class,
    )
}

/// Ergodicity analysis of the lifted chain, refusing state spaces above
/// [`STATE_CAP`].
pub fn ergodicity(spec: &ChainSpec) -> Result<Ergodicity> {
    let states = checked_states(spec, STATE_CAP)?;
    Ok(analyse(spec, &spec.leaf_of_states(states)).0)
}

fn checked_states(spec: &ChainSpec, cap: u128) -> Result<usize> {
    let states = spec.state_count();
    if states > cap {
        return Err(BctError::TooManyStates { states, cap });
    }
    Ok(states as usize)
}

/// Stationary law by power iteration, after checking ergodicity.
pub fn stationary(spec: &ChainSpec) -> Result<Stationary> {
    stationary_with_cap(spec, STATE_CAP)
}

pub fn stationary_with_cap(spec: &ChainSpec, cap: u128) -> Result<Stationary> {
    let states = checked_states(spec, cap)?;
    let leaf_of = spec.leaf_of_states(states);
    let (erg, in_class) = analyse(spec, &leaf_of);
    if erg.closed_classes != 1 {
        return Err(BctError::NotErgodic(format!(
            "lifted chain has {} closed communicating classes",
            erg.closed_classes
        )));
    }
    if erg.period != 1 {
        return Err(BctError::NotErgodic(format!(
            "lifted chain is periodic with period {}",
            erg.period
        )));
    }
    let support = in_class.iter().filter(|&&b| b).count() as f64;
    let mut probs: Vec<f64> = in_class
        .iter()
        .map(|&b| if b { 1.0 / support } else { 0.0 })
        .collect();
    let mut residual = f64::INFINITY;
    for iteration in 1..=MAX_POWER_ITERATIONS {
        let next = step(spec, &leaf_of, &probs);
        residual = l1(&next, &probs);
        probs = next;
        if residual < STATIONARY_TOLERANCE {
            let total: f64 = probs.iter().sum();
            probs.iter_mut().for_each(|p| *p /= total);
            return Ok(Stationary {
                m: spec.alphabet_size(),
                depth: spec.depth,
                probs,
                iterations: iteration,
                residual,
                irreducible: erg.irreducible,
            });
        }
    }
    Err(BctError::NotConverged {
        iterations: MAX_POWER_ITERATIONS,
        residual,
    })
}

/// `θ*_s(j) = π(sj) / π(s)` for every leaf of `tree`, where `π(sj)` is the
/// stationary probability of seeing context `s` followed by `j`. Leaves of
/// the true model recover their own rows; other trees get the induced
/// parameters. Zero-mass leaves get the uniform row.
pub fn induced_parameters(
    spec: &ChainSpec,
    stationary: &Stationary,
    tree: &ContextTree,
) -> Result<ParameterVector> {
    let m = spec.alphabet_size();
    let leaf_of = spec.leaf_of_states(stationary.probs.len());
    let rows = tree
        .leaves()
        .iter()
        .map(|s| {
            let (code, stride) = stationary.suffix_code(s)?;
            let mut joint = vec![0.0; m];
            let mut mass = 0.0;
            for z in (code..stationary.probs.len()).step_by(stride) {
                let p = stationary.probs[z];
                mass += p;
                for (acc, q) in joint.iter_mut().zip(spec.theta.row(leaf_of[z] as usize)) {
                    *acc += p * q;
                }
            }
            Ok(if mass > 0.0 {
                let mut row: Vec<f64> = joint.iter().map(|x| x / mass).collect();
                let last = m - 1;
                row[last] = (1.0 - row[..last].iter().sum::<f64>()).max(0.0);
                row
            } else {
                vec![1.0 / m as f64; m]
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ParameterVector::new(tree, rows)
}

/// `H̄(X | T) = -Σ_s π(s) Σ_j θ_s(j) log θ_s(j)` in nats per symbol.
pub fn entropy_rate(tree: &ContextTree, theta: &ParameterVector, masses: &[f64]) -> Result<f64> {
    if masses.len() != tree.leaf_count() || theta.rows().len() != tree.leaf_count() {
        return Err(BctError::Parameter(
            "entropy rate needs one mass and one parameter row per leaf".into(),
        ));
    }
    if let Some(bad) = masses.iter().find(|&&p| p.is_nan() || p < 0.0) {
        return Err(BctError::Parameter(format!("invalid context mass {bad}")));
    }
    Ok(masses
        .iter()
        .zip(theta.rows())
        .map(|(&mass, row)| {
            let h: f64 = row.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.ln()).sum();
            mass * h
        })
        .sum())
}

/// Entropy rate of `spec` as seen through the model `tree`, using the
/// induced parameters where `tree` differs from the true model.
pub fn tree_entropy_rate(spec: &ChainSpec, tree: &ContextTree) -> Result<f64> {
    let lifted = spec.with_depth(spec.depth.max(tree.depth()))?;
    let law = stationary(&lifted)?;
    let theta = induced_parameters(&lifted, &law, tree)?;
    entropy_rate(tree, &theta, &law.leaf_masses(tree)?)
}

/// Empirical `-log P(x | T) / n` against `H̄(X | T)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SmbtReport {
    pub tree: String,
    pub n: usize,
    pub empirical_rate: f64,
    pub entropy_rate: f64,
    pub gap: f64,
}

/// Simulates `n` stationary symbols and compares the per-symbol log marginal
/// likelihood under `tree` with the entropy-rate functional.
pub fn smbt_check<R: Rng + ?Sized>(
    spec: &ChainSpec,
    tree: &ContextTree,
    n: usize,
    rng: &mut R,
) -> Result<SmbtReport> {
    smbt_compare(spec, std::slice::from_ref(tree), n, rng).map(|mut r| r.remove(0))
}

/// [`smbt_check`] for several models scored on one simulated path.
pub fn smbt_compare<R: Rng + ?Sized>(
    spec: &ChainSpec,
    trees: &[ContextTree],
    n: usize,
    rng: &mut R,
) -> Result<Vec<SmbtReport>> {
    if n == 0 {
        return Err(BctError::Precondition(
            "the per-symbol rate is undefined for an empty sample".into(),
        ));
    }
    let depth = trees
        .iter()
        .map(ContextTree::depth)
        .fold(spec.depth, usize::max);
    let law = stationary(spec)?;
    let seq = simulate_stationary(spec, &law, depth, n, rng)?;
    let trie = CountTrie::build(&seq);
    trees
        .iter()
        .map(|tree| {
            let empirical_rate = -marginal_log(tree, &trie)? / n as f64;
            let entropy_rate = tree_entropy_rate(spec, tree)?;
            Ok(SmbtReport {
                tree: tree.to_canonical(),
                n,
                empirical_rate,
                entropy_rate,
                gap: (empirical_rate - entropy_rate).abs(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_state() -> ChainSpec {
        let tree = ContextTree::complete(2, 1).unwrap();
        let theta = ParameterVector::new(&tree, vec![vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
        ChainSpec::new(1, tree, theta).unwrap()
    }

    fn iid(depth: usize, row: Vec<f64>) -> ChainSpec {
        let tree = ContextTree::root(row.len()).unwrap();
        let theta = ParameterVector::new(&tree, vec![row]).unwrap();
        ChainSpec::new(depth, tree, theta).unwrap()
    }

    fn h(row: &[f64]) -> f64 {
        row.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.ln()).sum()
    }

    #[test]
    fn deterministic_source_emits_zeros() {
        let spec = iid(0, vec![1.0, 0.0]);
        let seq = generate(&spec, 500, &[], &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert!(seq.body().iter().all(|&s| s == 0));
    }

    #[test]
    fn generation_is_seeded() {
        let spec = two_state();
        let a = generate(&spec, 200, &[0], &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = generate(&spec, 200, &[0], &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        assert!(generate(&spec, 5, &[], &mut ChaCha8Rng::seed_from_u64(9)).is_err());
    }

    #[test]
    fn two_state_stationary_law() {
        let law = stationary(&two_state()).unwrap();
        assert!((law.probs[0] - 2.0 / 3.0).abs() < 1e-11);
        assert!((law.probs[1] - 1.0 / 3.0).abs() < 1e-11);
        assert!(law.fixed_point_residual(&two_state()) < 1e-10);
        assert!(law.irreducible);
    }

    #[test]
    fn iid_stationary_is_product_measure() {
        let row = vec![0.2, 0.5, 0.3];
        let law = stationary(&iid(3, row.clone())).unwrap();
        for (z, &p) in law.probs.iter().enumerate() {
            let expected = row[z % 3] * row[z / 3 % 3] * row[z / 9];
            assert!((p - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn masses_over_leaves_sum_to_one() {
        let tree = ContextTree::parse(2, "((()())())").unwrap();
        let theta =
            ParameterVector::new(&tree, vec![vec![0.7, 0.3], vec![0.1, 0.9], vec![0.5, 0.5]])
                .unwrap();
        let spec = ChainSpec::new(3, tree.clone(), theta).unwrap();
        let law = stationary(&spec).unwrap();
        let masses = law.leaf_masses(&tree).unwrap();
        assert!((masses.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(masses.iter().all(|&p| p > 0.0));
        assert!(law.fixed_point_residual(&spec) < 1e-10);
        let induced = induced_parameters(&spec, &law, &tree).unwrap();
        for (a, b) in induced.rows().iter().zip(spec.theta().rows()) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn non_ergodic_chains_are_refused() {
        // Two absorbing states.
        let tree = ContextTree::complete(2, 1).unwrap();
        let theta = ParameterVector::new(&tree, vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let spec = ChainSpec::new(1, tree.clone(), theta).unwrap();
        assert!(matches!(stationary(&spec), Err(BctError::NotErgodic(_))));
        // Alternation has period 2.
        let theta = ParameterVector::new(&tree, vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let spec = ChainSpec::new(1, tree, theta).unwrap();
        assert_eq!(ergodicity(&spec).unwrap().period, 2);
        assert!(matches!(stationary(&spec), Err(BctError::NotErgodic(_))));
    }

    #[test]
    fn transient_states_are_allowed() {
        // State 1 always moves to 0; 0 is absorbing.
        let spec = iid(1, vec![1.0, 0.0]);
        let law = stationary(&spec).unwrap();
        assert!(!law.irreducible);
        assert_eq!(law.probs, vec![1.0, 0.0]);
    }

    #[test]
    fn state_cap_is_enforced() {
        let spec = iid(21, vec![0.5, 0.5]);
        assert!(matches!(
            stationary(&spec),
            Err(BctError::TooManyStates { .. })
        ));
    }

    #[test]
    fn entropy_rate_examples() {
        let lambda = ContextTree::root(2).unwrap();
        let det = ParameterVector::new(&lambda, vec![vec![1.0, 0.0]]).unwrap();
        assert_eq!(entropy_rate(&lambda, &det, &[1.0]).unwrap(), 0.0);
        let fair = ParameterVector::uniform(&lambda);
        assert!((entropy_rate(&lambda, &fair, &[1.0]).unwrap() - 2f64.ln()).abs() < 1e-15);

        let spec = two_state();
        let expected = 2.0 / 3.0 * h(&[0.9, 0.1]) + 1.0 / 3.0 * h(&[0.2, 0.8]);
        let rate = tree_entropy_rate(&spec, spec.tree()).unwrap();
        assert!((rate - expected).abs() < 1e-11);
        // Coarser model loses information.
        let coarse = tree_entropy_rate(&spec, &lambda).unwrap();
        assert!(coarse > rate);
        assert!((coarse - h(&[2.0 / 3.0, 1.0 / 3.0])).abs() < 1e-11);
        // Deeper model sees the same rate.
        let deep = tree_entropy_rate(&spec, &ContextTree::complete(2, 2).unwrap()).unwrap();
        assert!((deep - rate).abs() < 1e-11);
    }

    #[test]
    fn empirical_frequencies_converge() {
        let spec = two_state();
        let law = stationary(&spec).unwrap();
        let seq = simulate_stationary(&spec, &law, 1, 100_000, &mut ChaCha8Rng::seed_from_u64(5))
            .unwrap();
        let trie = CountTrie::build(&seq);
        for (i, leaf) in spec.tree().leaves().iter().enumerate() {
            let counts = trie.counts_for(leaf);
            let total = counts.iter().sum::<u64>() as f64;
            let p = spec.theta().row(i)[0];
            let sd = (p * (1.0 - p) / total).sqrt();
            assert!((counts[0] as f64 / total - p).abs() < 3.0 * sd);
        }
    }

    #[test]
    fn smbt_needs_data() {
        let spec = two_state();
        assert!(smbt_check(&spec, spec.tree(), 0, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }

    #[test]
    fn stationary_start_with_longer_context() {
        let spec = two_state();
        let law = stationary(&spec).unwrap();
        let seq =
            simulate_stationary(&spec, &law, 4, 50, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert_eq!(seq.depth(), 4);
        assert_eq!(seq.len(), 50);
    }

    #[test]
    fn document_round_trip() {
        let spec = two_state();
        assert_eq!(ChainSpec::from_document(&spec.to_document()).unwrap(), spec);
        let mut bad = spec.to_document();
        bad.theta[0] = vec![0.5, 0.6];
        assert!(ChainSpec::from_document(&bad).is_err());
    }
}
