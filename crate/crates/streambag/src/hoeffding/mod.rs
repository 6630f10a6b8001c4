//! Incremental Hoeffding decision trees.
//!
//! Leaves accumulate per-class counts plus per-attribute statistics (value
//! counts for nominals, Gaussian class estimators for numerics). Every
//! `grace_period` units of weight a leaf evaluates candidate splits and splits
//! when the best attribute's information gain beats the runner-up by more than
//! the Hoeffding bound, or when the bound itself has shrunk below the
//! tie-break threshold.

mod observer;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use observer::{GaussianEstimator, Observer, ScoredSplit, SplitTest};
pub use observer::{build_observers, information_gain};

use crate::data::{Instance, Prediction, Schema};
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// One-sided Hoeffding bound for a statistic with range `range` after `n`
/// observations at confidence `1 - delta`.
pub fn hoeffding_bound(range: f64, delta: f64, n: f64) -> Result<f64> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::domain(format!("delta must lie in (0, 1], got {delta}")));
    }
    if !(n > 0.0) || !range.is_finite() || range < 0.0 {
        return Err(Error::domain(format!("invalid bound arguments: range {range}, n {n}")));
    }
    Ok((range * range * (1.0 / delta).ln() / (2.0 * n)).sqrt())
}

/// Growth parameters. The defaults are the standard VFDT settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// Weight a leaf must accumulate between split evaluations.
    pub grace_period: u64,
    /// `delta` of the Hoeffding bound.
    pub split_confidence: f64,
    /// Split regardless of the gain gap once the bound falls below this.
    pub tie_threshold: f64,
    /// Candidate thresholds evaluated per numeric attribute.
    pub split_points: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams { grace_period: 200, split_confidence: 1e-7, tie_threshold: 0.05, split_points: 10 }
    }
}

impl TreeParams {
    pub fn validate(&self) -> Result<()> {
        if self.grace_period == 0 {
            return Err(Error::domain("grace_period must be >= 1"));
        }
        if !(self.split_confidence > 0.0 && self.split_confidence <= 1.0) {
            return Err(Error::domain("split_confidence must lie in (0, 1]"));
        }
        if !(self.tie_threshold >= 0.0) || self.split_points == 0 {
            return Err(Error::domain("invalid tie_threshold or split_points"));
        }
        Ok(())
    }
}

/// Which attributes a leaf may observe and split on.
#[derive(Debug, Clone, PartialEq)]
pub enum AttrPolicy {
    /// All attributes (plain trees).
    All,
    /// A fixed subset shared by the whole tree (random-patch members).
    Fixed(Arc<Vec<usize>>),
    /// A fresh random subset of this size, drawn per leaf (random forests).
    RandomPerLeaf(usize),
}

#[derive(Debug, Clone, PartialEq)]
struct Leaf {
    class_counts: Vec<f64>,
    observers: Vec<Observer>,
    weight_at_last_eval: f64,
    initialized: bool,
}

impl Leaf {
    fn new(n_classes: usize, seed_counts: Option<Vec<f64>>) -> Self {
        let class_counts = seed_counts.unwrap_or_else(|| vec![0.0; n_classes]);
        let weight_at_last_eval = class_counts.iter().sum();
        Leaf { class_counts, observers: Vec::new(), weight_at_last_eval, initialized: false }
    }

    fn total_weight(&self) -> f64 {
        self.class_counts.iter().sum()
    }

    fn learn(&mut self, x: &Instance, schema: &Schema, policy: &AttrPolicy, rng: &mut RngStream) {
        if !self.initialized {
            self.observers = match policy {
                AttrPolicy::All => build_observers(schema, None),
                AttrPolicy::Fixed(set) => build_observers(schema, Some(set)),
                AttrPolicy::RandomPerLeaf(k) => {
                    let subset = rng.distinct_indices(schema.n_attributes(), *k);
                    build_observers(schema, Some(&subset))
                }
            };
            self.initialized = true;
        }
        let label = x.label() as usize;
        self.class_counts[label] += 1.0;
        for (attr, obs) in self.observers.iter_mut().enumerate() {
            obs.observe(x.value(attr), label, 1.0);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf(Leaf),
    Split { test: SplitTest, children: Vec<Node> },
}

impl Node {
    fn count_splits(&self) -> usize {
        match self {
            Node::Leaf(_) => 0,
            Node::Split { children, .. } => 1 + children.iter().map(Node::count_splits).sum::<usize>(),
        }
    }

    fn depth(&self) -> usize {
        match self {
            Node::Leaf(_) => 0,
            Node::Split { children, .. } => 1 + children.iter().map(Node::depth).max().unwrap_or(0),
        }
    }
}

/// Incremental Hoeffding tree classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct HoeffdingTree {
    schema: Arc<Schema>,
    params: TreeParams,
    policy: AttrPolicy,
    root: Node,
    split_nodes: usize,
    split_attempts: u64,
}

impl HoeffdingTree {
    pub fn new(schema: Arc<Schema>, params: TreeParams, policy: AttrPolicy) -> Result<Self> {
        params.validate()?;
        if let AttrPolicy::Fixed(set) = &policy {
            if set.is_empty() || set.iter().any(|&i| i >= schema.n_attributes()) {
                return Err(Error::domain("fixed attribute subset is empty or out of range"));
            }
        }
        if let AttrPolicy::RandomPerLeaf(k) = policy {
            if k == 0 || k > schema.n_attributes() {
                return Err(Error::domain("per-leaf subset size out of range"));
            }
        }
        let root = Node::Leaf(Leaf::new(schema.n_classes(), None));
        Ok(HoeffdingTree { schema, params, policy, root, split_nodes: 0, split_attempts: 0 })
    }

    pub fn schema(&self) -> &Arc<Schema> {
        &self.schema
    }

    /// An empty tree with the same configuration.
    pub fn fresh(&self) -> Self {
        HoeffdingTree {
            schema: Arc::clone(&self.schema),
            params: self.params,
            policy: self.policy.clone(),
            root: Node::Leaf(Leaf::new(self.schema.n_classes(), None)),
            split_nodes: 0,
            split_attempts: 0,
        }
    }

    pub fn reset(&mut self) {
        self.root = Node::Leaf(Leaf::new(self.schema.n_classes(), None));
        self.split_nodes = 0;
    }

    /// Number of internal (split) nodes.
    pub fn split_node_count(&self) -> usize {
        self.split_nodes
    }

    /// Cumulative count of grace-period split evaluations.
    pub fn split_attempts(&self) -> u64 {
        self.split_attempts
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    /// Attributes tested by the tree's split nodes, in preorder.
    pub fn split_attributes(&self) -> Vec<usize> {
        fn walk(node: &Node, out: &mut Vec<usize>) {
            if let Node::Split { test, children } = node {
                out.push(test.attr());
                for child in children {
                    walk(child, out);
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.root, &mut out);
        out
    }

    fn check_conforms(&self, x: &Instance) -> Result<()> {
        if x.values().len() != self.schema.n_attributes() {
            return Err(Error::schema("instance does not conform to the tree's schema"));
        }
        Ok(())
    }

    /// Raw class counts at the leaf `x` routes to. An untrained tree yields zeros.
    pub fn class_votes(&self, x: &Instance) -> Vec<f64> {
        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf(leaf) => return leaf.class_counts.clone(),
                Node::Split { test, children } => node = &children[test.branch(x)],
            }
        }
    }

    pub fn predict(&self, x: &Instance) -> Result<Prediction> {
        self.check_conforms(x)?;
        Prediction::new(self.class_votes(x))
    }

    /// Trains on `x` with integer weight `weight`, exactly equivalent to
    /// `weight` consecutive unit-weight updates (bit-identical state, including
    /// split timing). `rng` feeds per-leaf subset draws and is untouched by
    /// other policies.
    pub fn train(&mut self, x: &Instance, weight: u64, rng: &mut RngStream) -> Result<()> {
        self.check_conforms(x)?;
        for _ in 0..weight {
            self.train_unit(x, rng);
        }
        Ok(())
    }

    /// One unit-weight update. Returns true when the update caused a split.
    pub fn train_unit(&mut self, x: &Instance, rng: &mut RngStream) -> bool {
        let schema = Arc::clone(&self.schema);
        let params = self.params;
        let policy = self.policy.clone();
        let mut node = &mut self.root;
        loop {
            match node {
                Node::Split { test, children } => {
                    let b = test.branch(x);
                    node = &mut children[b];
                }
                Node::Leaf(_) => break,
            }
        }
        let Node::Leaf(leaf) = node else { unreachable!() };
        leaf.learn(x, &schema, &policy, rng);
        let total = leaf.total_weight();
        if total - leaf.weight_at_last_eval < params.grace_period as f64 {
            return false;
        }
        leaf.weight_at_last_eval = total;
        self.split_attempts += 1;
        let Some(split) = evaluate_split(leaf, &schema, &params) else {
            return false;
        };
        let children: Vec<Node> = split
            .post
            .into_iter()
            .map(|dist| Node::Leaf(Leaf::new(schema.n_classes(), Some(dist))))
            .collect();
        *node = Node::Split { test: split.test, children };
        self.split_nodes += 1;
        debug_assert_eq!(self.split_nodes, self.root.count_splits());
        true
    }
}

/// Decides whether a leaf splits, and on what. Candidates compete against the
/// null split (gain 0); ties across attributes keep the lowest index.
fn evaluate_split(leaf: &Leaf, schema: &Schema, params: &TreeParams) -> Option<ScoredSplit> {
    let observed_classes = leaf.class_counts.iter().filter(|&&c| c > 0.0).count();
    if observed_classes < 2 {
        return None;
    }
    let mut best: Option<ScoredSplit> = None;
    let mut second_gain = 0.0f64;
    for (attr, obs) in leaf.observers.iter().enumerate() {
        if let Some(cand) = obs.best_split(attr, params.split_points) {
            match &best {
                Some(b) if cand.gain <= b.gain => {
                    if cand.gain > second_gain {
                        second_gain = cand.gain;
                    }
                }
                _ => {
                    if let Some(b) = best.take() {
                        if b.gain > second_gain {
                            second_gain = b.gain;
                        }
                    }
                    best = Some(cand);
                }
            }
        }
    }
    let best = best?;
    let range = (schema.n_classes().max(2) as f64).log2();
    let eps = hoeffding_bound(range, params.split_confidence, leaf.total_weight())
        .expect("params validated at construction");
    if best.gain - second_gain > eps || eps < params.tie_threshold {
        Some(best)
    } else {
        None
    }
}

/// A Hoeffding tree whose split-node count is capped; exceeding the cap resets
/// the whole tree to a single fresh leaf.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundedTree {
    tree: HoeffdingTree,
    max_split_nodes: usize,
    resets: u64,
}

impl BoundedTree {
    pub fn new(tree: HoeffdingTree, max_split_nodes: usize) -> Result<Self> {
        if max_split_nodes == 0 {
            return Err(Error::domain("max_split_nodes must be >= 1"));
        }
        Ok(BoundedTree { tree, max_split_nodes, resets: 0 })
    }

    pub fn tree(&self) -> &HoeffdingTree {
        &self.tree
    }

    pub fn max_split_nodes(&self) -> usize {
        self.max_split_nodes
    }

    pub fn resets(&self) -> u64 {
        self.resets
    }

    pub fn train(&mut self, x: &Instance, weight: u64, rng: &mut RngStream) -> Result<()> {
        self.tree.check_conforms(x)?;
        for _ in 0..weight {
            if self.tree.train_unit(x, rng) && self.tree.split_node_count() > self.max_split_nodes {
                self.tree.reset();
                self.resets += 1;
            }
        }
        Ok(())
    }
}

/// Base learner held by an ensemble member.
#[derive(Debug, Clone, PartialEq)]
pub enum Learner {
    Tree(HoeffdingTree),
    Bounded(BoundedTree),
}

impl Learner {
    pub fn class_votes(&self, x: &Instance) -> Vec<f64> {
        match self {
            Learner::Tree(t) => t.class_votes(x),
            Learner::Bounded(b) => b.tree.class_votes(x),
        }
    }

    pub fn predict(&self, x: &Instance) -> Result<Prediction> {
        match self {
            Learner::Tree(t) => t.predict(x),
            Learner::Bounded(b) => b.tree.predict(x),
        }
    }

    pub fn train(&mut self, x: &Instance, weight: u64, rng: &mut RngStream) -> Result<()> {
        match self {
            Learner::Tree(t) => t.train(x, weight, rng),
            Learner::Bounded(b) => b.train(x, weight, rng),
        }
    }

    /// An empty learner with identical configuration (used on drift resets).
    pub fn fresh(&self) -> Learner {
        match self {
            Learner::Tree(t) => Learner::Tree(t.fresh()),
            Learner::Bounded(b) => Learner::Bounded(BoundedTree {
                tree: b.tree.fresh(),
                max_split_nodes: b.max_split_nodes,
                resets: 0,
            }),
        }
    }

    pub fn split_node_count(&self) -> usize {
        match self {
            Learner::Tree(t) => t.split_node_count(),
            Learner::Bounded(b) => b.tree.split_node_count(),
        }
    }
}
