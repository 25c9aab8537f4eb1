use ndarray::{Array1, ArrayView1, ArrayView2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Fitted, FittedModel, TrainingMeta};
use crate::error::{Error, Result};
use crate::seeds::mix;

/// Bootstrapped CART ensemble with Gini splits and majority voting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    pub min_samples_split: usize,
    /// `None` grows every tree until its leaves are pure.
    pub max_depth: Option<usize>,
    /// Features tried per split; `None` means `floor(sqrt(p))`.
    pub max_features: Option<usize>,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            min_samples_split: 2,
            max_depth: None,
            max_features: None,
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::InvalidParameter("n_trees must be positive".into()));
        }
        if self.min_samples_split < 2 {
            return Err(Error::InvalidParameter("min_samples_split must be at least 2".into()));
        }
        if self.max_features == Some(0) {
            return Err(Error::InvalidParameter("max_features must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf { vote: f64 },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    /// A tree that always votes `vote`.
    pub fn leaf(vote: bool) -> Self {
        Self {
            nodes: vec![Node::Leaf { vote: f64::from(u8::from(vote)) }],
        }
    }

    /// One split: `x[feature] <= threshold` goes left.
    pub fn stump(feature: usize, threshold: f64, left_vote: bool, right_vote: bool) -> Self {
        Self {
            nodes: vec![
                Node::Split { feature, threshold, left: 1, right: 2 },
                Node::Leaf { vote: f64::from(u8::from(left_vote)) },
                Node::Leaf { vote: f64::from(u8::from(right_vote)) },
            ],
        }
    }

    fn vote(&self, row: ArrayView1<f64>) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { vote } => return vote,
                Node::Split { feature, threshold, left, right } => {
                    i = if row[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    pub trees: Vec<Tree>,
    pub n_features: usize,
}

impl Forest {
    pub fn from_trees(trees: Vec<Tree>, n_features: usize) -> Self {
        Self { trees, n_features }
    }

    /// Fraction of trees voting for class 1.
    pub fn predict(&self, x: ArrayView2<f64>) -> Array1<f64> {
        let n = self.trees.len() as f64;
        x.rows()
            .into_iter()
            .map(|row| self.trees.iter().map(|t| t.vote(row)).sum::<f64>() / n)
            .collect()
    }
}

fn gini(ones: f64, total: f64) -> f64 {
    if total == 0.0 {
        return 0.0;
    }
    let p = ones / total;
    2.0 * p * (1.0 - p)
}

struct SplitChoice {
    feature: usize,
    threshold: f64,
    /// weighted child impurity, lower is better
    impurity: f64,
}

/// Best threshold on one feature for the given samples, if the feature is
/// not constant there.
fn best_split_on(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    samples: &[usize],
    feature: usize,
    buf: &mut Vec<(f64, f64)>,
) -> Option<SplitChoice> {
    buf.clear();
    buf.extend(samples.iter().map(|&s| (x[(s, feature)], y[s])));
    buf.sort_by(|a, b| a.0.total_cmp(&b.0));
    if buf[0].0 == buf[buf.len() - 1].0 {
        return None;
    }
    let total = buf.len() as f64;
    let total_ones: f64 = buf.iter().map(|p| p.1).sum();
    let mut left_ones = 0.0;
    let mut best: Option<SplitChoice> = None;
    for i in 0..buf.len() - 1 {
        left_ones += buf[i].1;
        if buf[i].0 == buf[i + 1].0 {
            continue;
        }
        let nl = (i + 1) as f64;
        let nr = total - nl;
        let impurity = (nl * gini(left_ones, nl) + nr * gini(total_ones - left_ones, nr)) / total;
        if best.as_ref().is_none_or(|b| impurity < b.impurity) {
            let mut threshold = 0.5 * (buf[i].0 + buf[i + 1].0);
            if threshold >= buf[i + 1].0 {
                threshold = buf[i].0;
            }
            best = Some(SplitChoice { feature, threshold, impurity });
        }
    }
    best
}

fn grow_tree(
    p: &ForestParams,
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    samples: Vec<usize>,
    mtry: usize,
    rng: &mut ChaCha8Rng,
) -> Tree {
    let n_features = x.ncols();
    let mut nodes = Vec::new();
    let mut buf = Vec::with_capacity(samples.len());
    let mut features: Vec<usize> = (0..n_features).collect();
    // (node slot, samples, depth)
    let mut stack = vec![(0usize, samples, 0usize)];
    nodes.push(Node::Leaf { vote: 0.0 });
    while let Some((slot, samples, depth)) = stack.pop() {
        let total = samples.len() as f64;
        let ones: f64 = samples.iter().map(|&s| y[s]).sum();
        let vote = f64::from(u8::from(2.0 * ones > total));
        let pure = ones == 0.0 || ones == total;
        if pure || samples.len() < p.min_samples_split || p.max_depth.is_some_and(|d| depth >= d) {
            nodes[slot] = Node::Leaf { vote };
            continue;
        }
        // Draw features in random order; look at the first `mtry`, and keep
        // going only while every feature seen so far is constant here.
        features.shuffle(rng);
        let mut best: Option<SplitChoice> = None;
        for (tried, &f) in features.iter().enumerate() {
            if tried >= mtry && best.is_some() {
                break;
            }
            if let Some(c) = best_split_on(x, y, &samples, f, &mut buf) {
                if best.as_ref().is_none_or(|b| c.impurity < b.impurity) {
                    best = Some(c);
                }
            }
        }
        let Some(choice) = best else {
            nodes[slot] = Node::Leaf { vote };
            continue;
        };
        let (left, right): (Vec<usize>, Vec<usize>) = samples
            .into_iter()
            .partition(|&s| x[(s, choice.feature)] <= choice.threshold);
        let (li, ri) = (nodes.len(), nodes.len() + 1);
        nodes.push(Node::Leaf { vote: 0.0 });
        nodes.push(Node::Leaf { vote: 0.0 });
        nodes[slot] = Node::Split {
            feature: choice.feature,
            threshold: choice.threshold,
            left: li,
            right: ri,
        };
        stack.push((ri, right, depth + 1));
        stack.push((li, left, depth + 1));
    }
    Tree { nodes }
}

pub(crate) fn fit(p: &ForestParams, x: ArrayView2<f64>, y: ArrayView1<f64>, seed: u64) -> Result<FittedModel> {
    let n = x.nrows();
    let n_features = x.ncols();
    let mtry = p
        .max_features
        .unwrap_or_else(|| ((n_features as f64).sqrt().floor() as usize).max(1))
        .min(n_features);
    let trees = (0..p.n_trees)
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix(&[seed, t as u64]));
            let samples: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            grow_tree(p, x, y, samples, mtry, &mut rng)
        })
        .collect();
    Ok(FittedModel {
        model: Fitted::Forest(Forest { trees, n_features }),
        meta: TrainingMeta {
            iterations: p.n_trees,
            ..TrainingMeta::default()
        },
    })
}
