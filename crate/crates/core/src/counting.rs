//! Symbol sequences and the count trie.
//!
//! The trie holds, for every context `s` of depth at most `D` that occurs in
//! the data, the count vector `a_s`: how often each symbol followed `s`.
//! Whenever a node is expanded all `m` children are allocated at once, so the
//! trie is always a proper tree; children never seen in the data keep
//! all-zero counts.

use crate::context_tree::{Alphabet, Context, ContextTree};
use crate::error::{BctError, Result};

/// An initial context `x_{-D+1}^0` followed by the body `x_1^n`, both in
/// chronological order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymbolSequence {
    alphabet: Alphabet,
    depth: usize,
    symbols: Vec<usize>,
}

impl SymbolSequence {
    pub fn new(alphabet: Alphabet, context: Vec<usize>, body: Vec<usize>) -> Result<Self> {
        let depth = context.len();
        let mut symbols = context;
        symbols.extend(body);
        Self::from_symbols(alphabet, symbols, depth)
    }

    /// Treats the first `depth` symbols as the initial context.
    pub fn peel(alphabet: Alphabet, symbols: Vec<usize>, depth: usize) -> Result<Self> {
        if symbols.len() < depth {
            return Err(BctError::Precondition(format!(
                "{} symbols cannot supply an initial context of length {depth}",
                symbols.len()
            )));
        }
        Self::from_symbols(alphabet, symbols, depth)
    }

    fn from_symbols(alphabet: Alphabet, symbols: Vec<usize>, depth: usize) -> Result<Self> {
        for &s in &symbols {
            alphabet.check(s)?;
        }
        Ok(Self {
            alphabet,
            depth,
            symbols,
        })
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    /// Length of the initial context.
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn context(&self) -> &[usize] {
        &self.symbols[..self.depth]
    }

    pub fn body(&self) -> &[usize] {
        &self.symbols[self.depth..]
    }

    /// Context followed by body.
    pub fn all_symbols(&self) -> &[usize] {
        &self.symbols
    }

    /// Body length `n`.
    pub fn len(&self) -> usize {
        self.symbols.len() - self.depth
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Everything observed before body symbol `i` (0-based).
    pub fn past(&self, i: usize) -> &[usize] {
        &self.symbols[..self.depth + i]
    }

    /// The first `n` body symbols with the same context.
    pub fn prefix(&self, n: usize) -> Self {
        Self {
            alphabet: self.alphabet,
            depth: self.depth,
            symbols: self.symbols[..self.depth + n].to_vec(),
        }
    }

    pub fn push(&mut self, symbol: usize) -> Result<()> {
        self.alphabet.check(symbol)?;
        self.symbols.push(symbol);
        Ok(())
    }
}

/// Index of a node in a [`CountTrie`].
pub type NodeId = usize;

const NO_CHILDREN: u32 = u32::MAX;

/// Count vectors `a_s` for every context of depth at most `D` seen in the
/// data, completed to a proper tree.
///
/// Children are always allocated after their parent, so iterating node ids
/// in decreasing order visits children before parents.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CountTrie {
    m: usize,
    depth: usize,
    counts: Vec<u64>,
    first_child: Vec<u32>,
}

impl CountTrie {
    /// A trie for an empty body: just the root, with zero counts.
    pub fn new(m: usize, depth: usize) -> Result<Self> {
        Alphabet::new(m)?;
        Ok(Self {
            m,
            depth,
            counts: vec![0; m],
            first_child: vec![NO_CHILDREN],
        })
    }

    /// Counts every body symbol of `seq` under each suffix of its past, up to
    /// depth `seq.depth()`.
    pub fn build(seq: &SymbolSequence) -> Self {
        let m = seq.alphabet().size();
        let mut trie = Self::new(m, seq.depth()).expect("alphabet already validated");
        let mut path = Vec::with_capacity(seq.depth() + 1);
        for (i, &symbol) in seq.body().iter().enumerate() {
            trie.descend_creating(seq.past(i), &mut path);
            for &node in &path {
                trie.counts[node * m + symbol] += 1;
            }
        }
        trie
    }

    /// Adds one observation `next` whose past ends with `recent_past`
    /// (chronological order, at least `D` symbols). Exactly the `D + 1` nodes
    /// on the context path change.
    pub fn update(&mut self, next: usize, recent_past: &[usize]) -> Result<()> {
        if next >= self.m {
            return Err(BctError::SymbolOutOfRange {
                symbol: next,
                m: self.m,
            });
        }
        if recent_past.len() < self.depth {
            return Err(BctError::Precondition(format!(
                "update needs the last {} symbols, got {}",
                self.depth,
                recent_past.len()
            )));
        }
        if let Some(&bad) = recent_past
            .iter()
            .rev()
            .take(self.depth)
            .find(|&&s| s >= self.m)
        {
            return Err(BctError::SymbolOutOfRange {
                symbol: bad,
                m: self.m,
            });
        }
        let mut path = Vec::with_capacity(self.depth + 1);
        self.descend_creating(recent_past, &mut path);
        for &node in &path {
            self.counts[node * self.m + next] += 1;
        }
        Ok(())
    }

    /// Fills `path` with the nodes `s_0 = λ, s_1, ..., s_D` for the context
    /// at the end of `past`, allocating children as needed. The caller
    /// guarantees `past` has at least `D` in-range symbols.
    pub(crate) fn descend_creating(&mut self, past: &[usize], path: &mut Vec<NodeId>) {
        path.clear();
        let mut node = 0;
        path.push(node);
        for &symbol in past.iter().rev().take(self.depth) {
            if self.first_child[node] == NO_CHILDREN {
                let first = self.first_child.len();
                self.first_child[node] =
                    u32::try_from(first).expect("count trie exceeds u32 nodes");
                self.first_child.resize(first + self.m, NO_CHILDREN);
                self.counts.resize((first + self.m) * self.m, 0);
            }
            node = self.first_child[node] as usize + symbol;
            path.push(node);
        }
    }

    #[inline]
    pub(crate) fn increment(&mut self, node: NodeId, symbol: usize) {
        self.counts[node * self.m + symbol] += 1;
    }

    pub fn alphabet_size(&self) -> usize {
        self.m
    }

    /// Maximal context depth `D`.
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn root(&self) -> NodeId {
        0
    }

    pub fn node_count(&self) -> usize {
        self.first_child.len()
    }

    pub fn counts(&self, node: NodeId) -> &[u64] {
        &self.counts[node * self.m..(node + 1) * self.m]
    }

    /// `M_s`, the number of observations at `node`.
    pub fn total(&self, node: NodeId) -> u64 {
        self.counts(node).iter().sum()
    }

    pub fn is_leaf(&self, node: NodeId) -> bool {
        self.first_child[node] == NO_CHILDREN
    }

    pub fn child(&self, node: NodeId, symbol: usize) -> Option<NodeId> {
        match self.first_child[node] {
            NO_CHILDREN => None,
            first => Some(first as usize + symbol),
        }
    }

    pub fn children(&self, node: NodeId) -> Option<std::ops::Range<NodeId>> {
        match self.first_child[node] {
            NO_CHILDREN => None,
            first => Some(first as usize..first as usize + self.m),
        }
    }

    /// Looks up the node for `ctx`, if it was materialized.
    pub fn node(&self, ctx: &Context) -> Option<NodeId> {
        let mut node = 0;
        for &j in ctx.symbols() {
            if j >= self.m {
                return None;
            }
            node = self.child(node, j)?;
        }
        Some(node)
    }

    /// The count vector for `ctx`; contexts that were never materialized
    /// have zero counts.
    pub fn counts_for(&self, ctx: &Context) -> Vec<u64> {
        match self.node(ctx) {
            Some(node) => self.counts(node).to_vec(),
            None => vec![0; self.m],
        }
    }

    /// All nodes with their contexts, in depth-first symbol order.
    pub fn contexts(&self) -> Vec<(Context, NodeId)> {
        let mut out = Vec::with_capacity(self.node_count());
        let mut stack = vec![(Vec::new(), 0usize)];
        while let Some((ctx, node)) = stack.pop() {
            if let Some(children) = self.children(node) {
                for (j, child) in children.enumerate().rev() {
                    let mut c = ctx.clone();
                    c.push(j);
                    stack.push((c, child));
                }
            }
            out.push((Context::new(ctx), node));
        }
        out
    }

    /// The shape of the trie as a context tree (`T_MAX` after completion).
    pub fn to_tree(&self) -> ContextTree {
        let leaves: Vec<Context> = self
            .contexts()
            .into_iter()
            .filter(|(_, node)| self.is_leaf(*node))
            .map(|(ctx, _)| ctx)
            .collect();
        ContextTree::from_leaves(self.m, &leaves).expect("count tries are proper")
    }
}
