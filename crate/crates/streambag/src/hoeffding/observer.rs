//! Per-leaf attribute statistics and split scoring.

use crate::data::{AttributeKind, Instance, Schema};

/// A candidate falls out of consideration unless at least two branches carry
/// this fraction of the leaf's weight.
const MIN_BRANCH_FRAC: f64 = 0.01;

/// Incremental weighted Gaussian (Welford form). Variance is the sample
/// variance (n - 1 denominator), matching the usual streaming-tree estimator.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GaussianEstimator {
    weight: f64,
    mean: f64,
    variance_sum: f64,
}

impl GaussianEstimator {
    pub fn add(&mut self, value: f64, weight: f64) {
        if weight <= 0.0 {
            return;
        }
        if self.weight == 0.0 {
            self.weight = weight;
            self.mean = value;
            self.variance_sum = 0.0;
        } else {
            self.weight += weight;
            let last_mean = self.mean;
            self.mean += weight * (value - last_mean) / self.weight;
            self.variance_sum += weight * (value - last_mean) * (value - self.mean);
        }
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        if self.weight > 1.0 {
            (self.variance_sum / (self.weight - 1.0)).max(0.0)
        } else {
            0.0
        }
    }

    pub fn std_dev(&self) -> f64 {
        self.variance().sqrt()
    }

    /// Estimated fraction of this class's mass at or below `x`. Zero-variance
    /// estimators degenerate to a step at the mean.
    pub fn cdf(&self, x: f64) -> f64 {
        let sd = self.std_dev();
        if sd > 0.0 {
            0.5 * (1.0 + libm::erf((x - self.mean) / (sd * std::f64::consts::SQRT_2)))
        } else if x >= self.mean {
            1.0
        } else {
            0.0
        }
    }
}

/// Split decided by a grown tree node.
#[derive(Debug, Clone, PartialEq)]
pub enum SplitTest {
    /// Multiway split: one child per declared value.
    Nominal { attr: usize },
    /// Binary split: `value <= threshold` routes to child 0.
    NumericLe { attr: usize, threshold: f64 },
}

impl SplitTest {
    pub fn branch(&self, x: &Instance) -> usize {
        match *self {
            SplitTest::Nominal { attr } => x.nominal_value(attr),
            SplitTest::NumericLe { attr, threshold } => {
                if x.value(attr) <= threshold {
                    0
                } else {
                    1
                }
            }
        }
    }

    pub fn attr(&self) -> usize {
        match *self {
            SplitTest::Nominal { attr } | SplitTest::NumericLe { attr, .. } => attr,
        }
    }
}

/// A scored split proposal for one attribute.
#[derive(Debug, Clone)]
pub struct ScoredSplit {
    pub gain: f64,
    pub test: SplitTest,
    pub post: Vec<Vec<f64>>,
}

/// Attribute statistics held by a leaf. `Inactive` marks attributes outside
/// the leaf's feature subset; they are neither tracked nor split on.
#[derive(Debug, Clone, PartialEq)]
pub enum Observer {
    Inactive,
    Nominal { counts: Vec<f64>, n_values: usize },
    Numeric { per_class: Vec<GaussianEstimator>, min: f64, max: f64 },
}

impl Observer {
    pub fn for_attribute(kind: &AttributeKind, n_classes: usize) -> Self {
        match kind {
            AttributeKind::Nominal { values } => Observer::Nominal {
                counts: vec![0.0; values.len() * n_classes],
                n_values: values.len(),
            },
            AttributeKind::Numeric => Observer::Numeric {
                per_class: vec![GaussianEstimator::default(); n_classes],
                min: f64::INFINITY,
                max: f64::NEG_INFINITY,
            },
        }
    }

    pub fn observe(&mut self, value: f64, class: usize, weight: f64) {
        match self {
            Observer::Inactive => {}
            Observer::Nominal { counts, n_values } => {
                let v = value as usize;
                let n_classes = counts.len() / *n_values;
                counts[v * n_classes + class] += weight;
            }
            Observer::Numeric { per_class, min, max } => {
                per_class[class].add(value, weight);
                *min = min.min(value);
                *max = max.max(value);
            }
        }
    }

    /// The attribute's best split proposal, or `None` when it cannot beat the
    /// null split. Ties between numeric thresholds keep the lowest threshold.
    pub fn best_split(&self, attr: usize, split_points: usize) -> Option<ScoredSplit> {
        match self {
            Observer::Inactive => None,
            Observer::Nominal { counts, n_values } => {
                let n_classes = counts.len() / n_values;
                let post: Vec<Vec<f64>> =
                    (0..*n_values).map(|v| counts[v * n_classes..(v + 1) * n_classes].to_vec()).collect();
                let gain = information_gain(&post);
                (gain > 0.0).then(|| ScoredSplit { gain, test: SplitTest::Nominal { attr }, post })
            }
            Observer::Numeric { per_class, min, max } => {
                if !(max > min) {
                    return None;
                }
                let mut best: Option<ScoredSplit> = None;
                for i in 1..=split_points {
                    let t = min + (max - min) * i as f64 / (split_points + 1) as f64;
                    let mut left = vec![0.0; per_class.len()];
                    let mut right = vec![0.0; per_class.len()];
                    for (c, est) in per_class.iter().enumerate() {
                        let below = est.weight() * est.cdf(t);
                        left[c] = below;
                        right[c] = (est.weight() - below).max(0.0);
                    }
                    let post = vec![left, right];
                    let gain = information_gain(&post);
                    if gain > 0.0 && best.as_ref().map_or(true, |b| gain > b.gain) {
                        best = Some(ScoredSplit {
                            gain,
                            test: SplitTest::NumericLe { attr, threshold: t },
                            post,
                        });
                    }
                }
                best
            }
        }
    }
}

/// Information gain (log2 entropy) of a partition, computed from the post-split
/// class distributions; the pre-split distribution is their element-wise sum.
/// Returns -inf when fewer than two branches carry `MIN_BRANCH_FRAC` of the mass.
pub fn information_gain(post: &[Vec<f64>]) -> f64 {
    let n_classes = post.first().map_or(0, Vec::len);
    let mut pre = vec![0.0; n_classes];
    for branch in post {
        for (acc, &v) in pre.iter_mut().zip(branch) {
            *acc += v;
        }
    }
    let total: f64 = pre.iter().sum();
    if total <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let viable = post.iter().filter(|b| b.iter().sum::<f64>() >= MIN_BRANCH_FRAC * total).count();
    if viable < 2 {
        return f64::NEG_INFINITY;
    }
    let mut weighted = 0.0;
    for branch in post {
        let w: f64 = branch.iter().sum();
        if w > 0.0 {
            weighted += (w / total) * entropy(branch, w);
        }
    }
    entropy(&pre, total) - weighted
}

fn entropy(dist: &[f64], total: f64) -> f64 {
    let mut h = 0.0;
    for &c in dist {
        if c > 0.0 {
            let p = c / total;
            h -= p * p.log2();
        }
    }
    h
}

/// Builds the observer row for a fresh leaf, honoring the active-attribute set.
pub fn build_observers(schema: &Schema, active: Option<&[usize]>) -> Vec<Observer> {
    let n_classes = schema.n_classes();
    match active {
        None => schema.attributes().iter().map(|a| Observer::for_attribute(&a.kind, n_classes)).collect(),
        Some(set) => {
            let mut row: Vec<Observer> = (0..schema.n_attributes()).map(|_| Observer::Inactive).collect();
            for &i in set {
                row[i] = Observer::for_attribute(&schema.attribute(i).kind, n_classes);
            }
            row
        }
    }
}
