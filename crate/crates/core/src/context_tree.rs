//! Proper m-ary context trees, their parameters, and the model prior.
//!
//! A context is written most-recent-symbol first: the context `022` matches
//! any past whose last symbol is `0`, preceded by `2`, preceded by `2`. The
//! children of a node `s` are the contexts `s0, s1, ..., s(m-1)`, each one
//! reaching one symbol further back in time.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use crate::error::{check_beta, BctError, Result};

/// Default ceiling on the number of models `enumerate_models` will produce.
pub const MODEL_ENUMERATION_CAP: u128 = 1_000;

/// Finite alphabet `{0, 1, ..., m-1}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Alphabet {
    size: usize,
}

impl Alphabet {
    pub fn new(size: usize) -> Result<Self> {
        if size < 2 {
            return Err(BctError::InvalidAlphabet(size));
        }
        Ok(Self { size })
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn check(&self, symbol: usize) -> Result<()> {
        if symbol < self.size {
            Ok(())
        } else {
            Err(BctError::SymbolOutOfRange {
                symbol,
                m: self.size,
            })
        }
    }
}

/// A context string, most recent symbol first. The empty context is the root.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Context(Vec<usize>);

impl Context {
    pub fn root() -> Self {
        Self(Vec::new())
    }

    /// Builds a context from symbols given most recent first.
    pub fn new(symbols: Vec<usize>) -> Self {
        Self(symbols)
    }

    /// Builds the depth-`depth` context of a past given in chronological
    /// order (oldest first).
    pub fn from_past(past: &[usize], depth: usize) -> Result<Self> {
        if past.len() < depth {
            return Err(BctError::Precondition(format!(
                "past of length {} is shorter than the context depth {depth}",
                past.len()
            )));
        }
        Ok(Self(past.iter().rev().take(depth).copied().collect()))
    }

    pub fn symbols(&self) -> &[usize] {
        &self.0
    }

    pub fn depth(&self) -> usize {
        self.0.len()
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    /// The context one symbol further back: `s` followed by the older symbol `j`.
    pub fn child(&self, j: usize) -> Self {
        let mut symbols = self.0.clone();
        symbols.push(j);
        Self(symbols)
    }

    pub fn parent(&self) -> Option<Self> {
        if self.0.is_empty() {
            None
        } else {
            Some(Self(self.0[..self.0.len() - 1].to_vec()))
        }
    }

    /// True when `self` is a prefix of `other`, i.e. `other` lies in the
    /// subtree rooted at `self`.
    pub fn is_ancestor_of(&self, other: &Context) -> bool {
        other.0.starts_with(&self.0)
    }
}

impl fmt::Display for Context {
    /// Digits are concatenated for alphabets up to 10 symbols and
    /// dot-separated otherwise; the root prints as the empty string.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let wide = self.0.iter().any(|&s| s >= 10);
        for (i, s) in self.0.iter().enumerate() {
            if wide && i > 0 {
                f.write_str(".")?;
            }
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

impl FromStr for Context {
    type Err = BctError;

    fn from_str(s: &str) -> Result<Self> {
        let parse_err = |t: &str| BctError::Parameter(format!("invalid context symbol {t:?}"));
        if s.contains('.') {
            s.split('.')
                .map(|t| t.parse::<usize>().map_err(|_| parse_err(t)))
                .collect::<Result<Vec<_>>>()
                .map(Self)
        } else {
            s.chars()
                .map(|c| {
                    c.to_digit(10)
                        .map(|d| d as usize)
                        .ok_or_else(|| parse_err(&c.to_string()))
                })
                .collect::<Result<Vec<_>>>()
                .map(Self)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum Shape {
    Leaf,
    Split(Vec<Shape>),
}

impl Shape {
    fn depth(&self) -> usize {
        match self {
            Shape::Leaf => 0,
            Shape::Split(children) => 1 + children.iter().map(Shape::depth).max().unwrap_or(0),
        }
    }

    fn complete(m: usize, depth: usize) -> Self {
        if depth == 0 {
            Shape::Leaf
        } else {
            Shape::Split(vec![Shape::complete(m, depth - 1); m])
        }
    }

    fn write_canonical(&self, out: &mut String) {
        out.push('(');
        if let Shape::Split(children) = self {
            for child in children {
                child.write_canonical(out);
            }
        }
        out.push(')');
    }

    /// Returns the subtree at `path`, if `path` names a node.
    fn node(&self, path: &[usize]) -> Option<&Shape> {
        match (path.split_first(), self) {
            (None, _) => Some(self),
            (Some((&j, rest)), Shape::Split(children)) => children.get(j)?.node(rest),
            (Some(_), Shape::Leaf) => None,
        }
    }

    fn node_mut(&mut self, path: &[usize]) -> Option<&mut Shape> {
        match path.split_first() {
            None => Some(self),
            Some((&j, rest)) => match self {
                Shape::Split(children) => children.get_mut(j)?.node_mut(rest),
                Shape::Leaf => None,
            },
        }
    }
}

#[derive(Clone, Copy, Debug)]
enum Slot {
    Leaf(usize),
    Split(usize),
}

/// A proper m-ary tree: every internal node has exactly `m` children.
///
/// Leaves are indexed in depth-first order with children visited in symbol
/// order; that order is shared by [`ParameterVector`] rows and by the
/// canonical text form.
#[derive(Clone, Debug)]
pub struct ContextTree {
    m: usize,
    shape: Shape,
    slots: Vec<Slot>,
    leaves: Vec<Context>,
    depth: usize,
}

impl PartialEq for ContextTree {
    fn eq(&self, other: &Self) -> bool {
        self.m == other.m && self.shape == other.shape
    }
}

impl Eq for ContextTree {}

impl std::hash::Hash for ContextTree {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.m.hash(state);
        self.shape.hash(state);
    }
}

impl ContextTree {
    fn from_shape(m: usize, shape: Shape) -> Self {
        fn fill(
            shape: &Shape,
            slot: usize,
            ctx: &mut Vec<usize>,
            slots: &mut Vec<Slot>,
            leaves: &mut Vec<Context>,
        ) {
            match shape {
                Shape::Leaf => {
                    slots[slot] = Slot::Leaf(leaves.len());
                    leaves.push(Context(ctx.clone()));
                }
                Shape::Split(children) => {
                    let first = slots.len();
                    slots.extend(std::iter::repeat(Slot::Leaf(usize::MAX)).take(children.len()));
                    slots[slot] = Slot::Split(first);
                    for (j, child) in children.iter().enumerate() {
                        ctx.push(j);
                        fill(child, first + j, ctx, slots, leaves);
                        ctx.pop();
                    }
                }
            }
        }

        let mut slots = vec![Slot::Leaf(usize::MAX)];
        let mut leaves = Vec::new();
        fill(&shape, 0, &mut Vec::new(), &mut slots, &mut leaves);
        let depth = shape.depth();
        Self {
            m,
            shape,
            slots,
            leaves,
            depth,
        }
    }

    /// The root-only tree Λ (an i.i.d. model).
    pub fn root(m: usize) -> Result<Self> {
        Alphabet::new(m)?;
        Ok(Self::from_shape(m, Shape::Leaf))
    }

    /// The complete tree with every leaf at depth `depth`.
    pub fn complete(m: usize, depth: usize) -> Result<Self> {
        Alphabet::new(m)?;
        Ok(Self::from_shape(m, Shape::complete(m, depth)))
    }

    /// Builds the proper tree whose leaf set is exactly `leaves`.
    pub fn from_leaves(m: usize, leaves: &[Context]) -> Result<Self> {
        Alphabet::new(m)?;
        if leaves.is_empty() {
            return Err(BctError::Structure("a tree needs at least one leaf".into()));
        }
        let mut shape = Shape::Leaf;
        for leaf in leaves {
            let mut node = &mut shape;
            for &j in leaf.symbols() {
                if j >= m {
                    return Err(BctError::SymbolOutOfRange { symbol: j, m });
                }
                if let Shape::Leaf = node {
                    *node = Shape::Split(vec![Shape::Leaf; m]);
                }
                match node {
                    Shape::Split(children) => node = &mut children[j],
                    Shape::Leaf => unreachable!(),
                }
            }
        }
        let tree = Self::from_shape(m, shape);
        let wanted: HashSet<&Context> = leaves.iter().collect();
        let got: HashSet<&Context> = tree.leaves.iter().collect();
        if wanted.len() != leaves.len() || wanted != got {
            return Err(BctError::Structure(format!(
                "leaf set does not form a proper {m}-ary tree"
            )));
        }
        Ok(tree)
    }

    /// Parses the canonical text form: `()` is a leaf, an internal node is
    /// `(` followed by its `m` children in symbol order and `)`.
    pub fn parse(m: usize, text: &str) -> Result<Self> {
        fn node(m: usize, bytes: &[u8], pos: &mut usize) -> Result<Shape> {
            let err = |at: usize, what: &str| {
                BctError::Structure(format!("canonical tree form, byte {at}: {what}"))
            };
            if bytes.get(*pos) != Some(&b'(') {
                return Err(err(*pos, "expected '('"));
            }
            *pos += 1;
            let mut children = Vec::new();
            while bytes.get(*pos) == Some(&b'(') {
                children.push(node(m, bytes, pos)?);
            }
            if bytes.get(*pos) != Some(&b')') {
                return Err(err(*pos, "expected '(' or ')'"));
            }
            *pos += 1;
            match children.len() {
                0 => Ok(Shape::Leaf),
                n if n == m => Ok(Shape::Split(children)),
                n => Err(err(
                    *pos - 1,
                    &format!("node has {n} children, expected 0 or {m}"),
                )),
            }
        }

        Alphabet::new(m)?;
        let bytes: Vec<u8> = text.bytes().filter(|b| !b.is_ascii_whitespace()).collect();
        let mut pos = 0;
        let shape = node(m, &bytes, &mut pos)?;
        if pos != bytes.len() {
            return Err(BctError::Structure(format!(
                "canonical tree form: trailing input at byte {pos}"
            )));
        }
        Ok(Self::from_shape(m, shape))
    }

    pub fn to_canonical(&self) -> String {
        let mut out = String::new();
        self.shape.write_canonical(&mut out);
        out
    }

    pub fn alphabet_size(&self) -> usize {
        self.m
    }

    /// Depth of the deepest leaf.
    pub fn depth(&self) -> usize {
        self.depth
    }

    /// `|T|`, the number of leaves.
    pub fn leaf_count(&self) -> usize {
        self.leaves.len()
    }

    /// `L_d(T)`, the number of leaves at depth exactly `d`.
    pub fn leaves_at_depth(&self, d: usize) -> usize {
        self.leaves.iter().filter(|s| s.depth() == d).count()
    }

    pub fn leaves(&self) -> &[Context] {
        &self.leaves
    }

    pub fn is_root_only(&self) -> bool {
        matches!(self.shape, Shape::Leaf)
    }

    /// Internal nodes in depth-first order.
    pub fn internal_nodes(&self) -> Vec<Context> {
        fn walk(shape: &Shape, ctx: &mut Vec<usize>, out: &mut Vec<Context>) {
            if let Shape::Split(children) = shape {
                out.push(Context(ctx.clone()));
                for (j, child) in children.iter().enumerate() {
                    ctx.push(j);
                    walk(child, ctx, out);
                    ctx.pop();
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.shape, &mut Vec::new(), &mut out);
        out
    }

    pub fn is_leaf(&self, ctx: &Context) -> bool {
        matches!(self.shape.node(ctx.symbols()), Some(Shape::Leaf))
    }

    pub fn is_internal(&self, ctx: &Context) -> bool {
        matches!(self.shape.node(ctx.symbols()), Some(Shape::Split(_)))
    }

    /// Index of `ctx` among the leaves, if it is one.
    pub fn leaf_index(&self, ctx: &Context) -> Option<usize> {
        let mut slot = 0;
        for &j in ctx.symbols() {
            match self.slots[slot] {
                Slot::Split(first) if j < self.m => slot = first + j,
                _ => return None,
            }
        }
        match self.slots[slot] {
            Slot::Leaf(i) => Some(i),
            Slot::Split(_) => None,
        }
    }

    /// Index of the unique leaf that is a suffix of `past` (chronological
    /// order, most recent symbol last).
    pub fn leaf_index_of(&self, past: &[usize]) -> Result<usize> {
        let mut slot = 0;
        let mut back = past.iter().rev();
        loop {
            match self.slots[slot] {
                Slot::Leaf(i) => return Ok(i),
                Slot::Split(first) => {
                    let &j = back.next().ok_or_else(|| {
                        BctError::Precondition(format!(
                            "past of length {} does not reach a leaf of a depth-{} tree",
                            past.len(),
                            self.depth
                        ))
                    })?;
                    if j >= self.m {
                        return Err(BctError::SymbolOutOfRange {
                            symbol: j,
                            m: self.m,
                        });
                    }
                    slot = first + j;
                }
            }
        }
    }

    /// The leaf context that is a suffix of `past` (chronological order).
    pub fn context_of(&self, past: &[usize]) -> Result<&Context> {
        self.leaf_index_of(past).map(|i| &self.leaves[i])
    }

    /// Fails unless every leaf has depth at most `max_depth`.
    pub fn check_depth(&self, max_depth: usize) -> Result<()> {
        if self.depth > max_depth {
            Err(BctError::Structure(format!(
                "tree has depth {} but the maximal depth is {max_depth}",
                self.depth
            )))
        } else {
            Ok(())
        }
    }

    /// Replaces the leaf `ctx` with an internal node carrying `m` new leaves.
    pub fn split_leaf(&self, ctx: &Context) -> Result<Self> {
        let subtree = Self::complete(self.m, 1)?;
        self.join_subtree(ctx, &subtree)
    }

    /// Collapses the subtree under the internal node `ctx` into a leaf.
    pub fn prune(&self, ctx: &Context) -> Result<Self> {
        let mut shape = self.shape.clone();
        match shape.node_mut(ctx.symbols()) {
            Some(node @ Shape::Split(_)) => *node = Shape::Leaf,
            _ => {
                return Err(BctError::Structure(format!(
                    "context {ctx:?} is not an internal node"
                )))
            }
        }
        Ok(Self::from_shape(self.m, shape))
    }

    /// Grafts `subtree` onto the leaf `leaf`, giving `T ∪ S`.
    ///
    /// When the result must stay within depth `D`, check it with
    /// [`ContextTree::check_depth`]; [`join_subtree`] does this.
    pub fn join_subtree(&self, leaf: &Context, subtree: &ContextTree) -> Result<Self> {
        if subtree.m != self.m {
            return Err(BctError::Structure(format!(
                "cannot graft a {}-ary subtree onto a {}-ary tree",
                subtree.m, self.m
            )));
        }
        let mut shape = self.shape.clone();
        match shape.node_mut(leaf.symbols()) {
            Some(node @ Shape::Leaf) => *node = subtree.shape.clone(),
            _ => {
                return Err(BctError::Structure(format!(
                    "context {leaf:?} is not a leaf of the tree"
                )))
            }
        }
        Ok(Self::from_shape(self.m, shape))
    }

    /// Sibling groups whose members are all leaves, as (parent, leaf indices).
    pub fn leaf_sibling_groups(&self) -> Vec<(Context, Vec<usize>)> {
        self.internal_nodes()
            .into_iter()
            .filter_map(|parent| {
                let idx: Option<Vec<usize>> = (0..self.m)
                    .map(|j| self.leaf_index(&parent.child(j)))
                    .collect();
                idx.map(|idx| (parent, idx))
            })
            .collect()
    }
}

impl fmt::Display for ContextTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_canonical())
    }
}

/// One probability vector per leaf, in the tree's leaf order.
#[derive(Clone, Debug, PartialEq)]
pub struct ParameterVector {
    rows: Vec<Vec<f64>>,
}

/// Tolerance on `Σ_j θ_s(j) = 1`.
pub const SIMPLEX_TOLERANCE: f64 = 1e-12;

impl ParameterVector {
    pub fn new(tree: &ContextTree, rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.len() != tree.leaf_count() {
            return Err(BctError::Parameter(format!(
                "{} parameter rows for a tree with {} leaves",
                rows.len(),
                tree.leaf_count()
            )));
        }
        for (row, ctx) in rows.iter().zip(tree.leaves()) {
            if row.len() != tree.alphabet_size() {
                return Err(BctError::Parameter(format!(
                    "row for context {ctx} has {} entries, expected {}",
                    row.len(),
                    tree.alphabet_size()
                )));
            }
            let sum: f64 = row.iter().sum();
            if row.iter().any(|p| p.is_nan() || *p < 0.0) || (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
                return Err(BctError::Parameter(format!(
                    "row for context {ctx} is not a probability vector: {row:?}"
                )));
            }
        }
        Ok(Self { rows })
    }

    pub fn uniform(tree: &ContextTree) -> Self {
        let m = tree.alphabet_size();
        Self {
            rows: vec![vec![1.0 / m as f64; m]; tree.leaf_count()],
        }
    }

    /// Rebuilds θ from the free coordinates `φ_s = (θ_s(0), ..., θ_s(m-2))`.
    pub fn from_phi(tree: &ContextTree, phi: &[Vec<f64>]) -> Result<Self> {
        let rows = phi
            .iter()
            .map(|p| {
                let mut row = p.clone();
                row.push(1.0 - p.iter().sum::<f64>());
                row
            })
            .collect();
        Self::new(tree, rows)
    }

    pub fn to_phi(&self) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .map(|r| r[..r.len() - 1].to_vec())
            .collect()
    }

    pub fn row(&self, leaf: usize) -> &[f64] {
        &self.rows[leaf]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn get(&self, tree: &ContextTree, ctx: &Context) -> Option<&[f64]> {
        tree.leaf_index(ctx).map(|i| self.rows[i].as_slice())
    }
}

/// Natural log of the model prior `π_D(T; β) = α^{|T|-1} β^{|T|-L_D(T)}`
/// with `α = (1-β)^{1/(m-1)}`.
pub fn prior_log(tree: &ContextTree, max_depth: usize, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    tree.check_depth(max_depth)?;
    let m = tree.alphabet_size() as f64;
    let leaves = tree.leaf_count() as f64;
    let log_alpha = (1.0 - beta).ln() / (m - 1.0);
    let shallow = leaves - tree.leaves_at_depth(max_depth) as f64;
    Ok((leaves - 1.0) * log_alpha + shallow * beta.ln())
}

/// Number of proper m-ary trees of depth at most `max_depth`, saturating.
pub fn model_count(m: usize, max_depth: usize) -> u128 {
    let mut count: u128 = 1;
    for _ in 0..max_depth {
        let mut power: u128 = 1;
        for _ in 0..m {
            power = power.saturating_mul(count);
        }
        count = power.saturating_add(1);
    }
    count
}

/// Every proper m-ary tree of depth at most `max_depth`, refusing when
/// there are more than [`MODEL_ENUMERATION_CAP`].
pub fn enumerate_models(m: usize, max_depth: usize) -> Result<Vec<ContextTree>> {
    enumerate_models_capped(m, max_depth, MODEL_ENUMERATION_CAP)
}

pub fn enumerate_models_capped(m: usize, max_depth: usize, cap: u128) -> Result<Vec<ContextTree>> {
    Alphabet::new(m)?;
    let projected = model_count(m, max_depth);
    if projected > cap {
        return Err(BctError::TooManyModels { projected, cap });
    }
    let mut shapes = vec![Shape::Leaf];
    for _ in 0..max_depth {
        let mut tuples: Vec<Vec<Shape>> = vec![Vec::new()];
        for _ in 0..m {
            tuples = tuples
                .into_iter()
                .flat_map(|prefix| {
                    shapes.iter().map(move |s| {
                        let mut t = prefix.clone();
                        t.push(s.clone());
                        t
                    })
                })
                .collect();
        }
        let mut next = vec![Shape::Leaf];
        next.extend(tuples.into_iter().map(Shape::Split));
        shapes = next;
    }
    Ok(shapes
        .into_iter()
        .map(|s| ContextTree::from_shape(m, s))
        .collect())
}

/// `T ∪ S` with `S` grafted at the leaf `leaf`, checked against depth `D`.
pub fn join_subtree(
    tree: &ContextTree,
    leaf: &Context,
    subtree: &ContextTree,
    max_depth: usize,
) -> Result<ContextTree> {
    tree.check_depth(max_depth)?;
    if leaf.depth() >= max_depth {
        return Err(BctError::Structure(format!(
            "graft point {leaf} must be shallower than the maximal depth {max_depth}"
        )));
    }
    if leaf.depth() + subtree.depth() > max_depth {
        return Err(BctError::Structure(format!(
            "subtree of depth {} at {leaf} exceeds the maximal depth {max_depth}",
            subtree.depth()
        )));
    }
    tree.join_subtree(leaf, subtree)
}

/// True iff the tree is Λ, or every sibling group of leaves holds two
/// parameter rows differing by more than `tol` in sup-norm.
pub fn is_minimal(tree: &ContextTree, theta: &ParameterVector, tol: f64) -> Result<bool> {
    if theta.rows.len() != tree.leaf_count() {
        return Err(BctError::Parameter(format!(
            "{} parameter rows for a tree with {} leaves",
            theta.rows.len(),
            tree.leaf_count()
        )));
    }
    if tree.is_root_only() {
        return Ok(true);
    }
    let distinct = |a: &[f64], b: &[f64]| a.iter().zip(b).any(|(x, y)| (x - y).abs() > tol);
    Ok(tree.leaf_sibling_groups().iter().all(|(_, group)| {
        group.iter().enumerate().any(|(k, &i)| {
            group[k + 1..]
                .iter()
                .any(|&l| distinct(theta.row(i), theta.row(l)))
        })
    }))
}
