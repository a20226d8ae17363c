//! Extremely randomized trees for (latitude, longitude) regression.
//!
//! Each tree is grown on the full training set. At every node each feature
//! that is not constant among the node's samples gets one cut drawn
//! uniformly between its node minimum and maximum; the cut with the largest
//! reduction in squared error (summed over both outputs) wins. A node
//! becomes a leaf when it has fewer than `min_samples_split` samples, sits at
//! `max_depth`, has constant targets, or admits no cut that leaves
//! `min_samples_leaf` samples on both sides.
//!
//! Trees draw from independent random streams derived from the forest seed
//! and their index, so they can be grown in parallel and the forest is still
//! a pure function of `(data, config)`.

use rand_chacha::rand_core::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::Coord;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtraTreesConfig {
    #[serde(default = "defaults::n_estimators")]
    pub n_estimators: usize,
    #[serde(default = "defaults::min_samples_split")]
    pub min_samples_split: usize,
    #[serde(default = "defaults::min_samples_leaf")]
    pub min_samples_leaf: usize,
    /// `None` grows until the other stopping rules apply.
    #[serde(default)]
    pub max_depth: Option<usize>,
    #[serde(default)]
    pub seed: u64,
}

mod defaults {
    pub fn n_estimators() -> usize {
        100
    }
    pub fn min_samples_split() -> usize {
        2
    }
    pub fn min_samples_leaf() -> usize {
        1
    }
}

impl Default for ExtraTreesConfig {
    fn default() -> Self {
        ExtraTreesConfig {
            n_estimators: 100,
            min_samples_split: 2,
            min_samples_leaf: 1,
            max_depth: None,
            seed: 0,
        }
    }
}

impl ExtraTreesConfig {
    /// The configuration that generalized best on the Antwerp validation set.
    pub fn tuned() -> Self {
        ExtraTreesConfig {
            n_estimators: 100,
            min_samples_split: 14,
            min_samples_leaf: 1,
            max_depth: Some(40),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_estimators == 0 {
            return Err(Error::Config("n_estimators must be at least 1".into()));
        }
        if self.min_samples_split < 2 {
            return Err(Error::Config("min_samples_split must be at least 2".into()));
        }
        if self.min_samples_leaf == 0 || self.min_samples_leaf > self.min_samples_split {
            return Err(Error::Config(
                "min_samples_leaf must be between 1 and min_samples_split".into(),
            ));
        }
        if self.max_depth == Some(0) {
            return Err(Error::Config("max_depth must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Split {
        feature: usize,
        cut: f64,
        /// Arena index of the `< cut` child.
        left: usize,
        /// Arena index of the `>= cut` child.
        right: usize,
    },
    Leaf {
        value: [f64; 2],
        samples: usize,
    },
}

/// One tree, nodes in an arena with the root at index 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> [f64; 2] {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                TreeNode::Split {
                    feature,
                    cut,
                    left,
                    right,
                } => {
                    at = if x[feature] < cut { left } else { right };
                }
                TreeNode::Leaf { value, .. } => return value,
            }
        }
    }

    /// Depth of the deepest leaf; a lone root leaf has depth 0.
    pub fn depth(&self) -> usize {
        let mut deepest = 0;
        let mut stack = vec![(0usize, 0usize)];
        while let Some((at, d)) = stack.pop() {
            match self.nodes[at] {
                TreeNode::Split { left, right, .. } => {
                    stack.push((left, d + 1));
                    stack.push((right, d + 1));
                }
                TreeNode::Leaf { .. } => deepest = deepest.max(d),
            }
        }
        deepest
    }

    pub fn leaves(&self) -> impl Iterator<Item = (&[f64; 2], usize)> {
        self.nodes.iter().filter_map(|n| match n {
            TreeNode::Leaf { value, samples } => Some((value, *samples)),
            _ => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
    pub feature_count: usize,
}

/// Mean that returns the common value exactly when all inputs are equal.
fn anchored_mean(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let mut it = values.clone();
    let Some(first) = it.next() else { return 0.0 };
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + (v - first), n + 1));
    first + sum / n as f64
}

struct Grower<'a> {
    /// Column-major: `columns[f][i]`.
    columns: Vec<Vec<f64>>,
    targets: &'a [[f64; 2]],
    cfg: &'a ExtraTreesConfig,
}

struct Candidate {
    feature: usize,
    cut: f64,
    n_left: usize,
    score: f64,
}

impl Grower<'_> {
    fn leaf(&self, samples: &[usize]) -> TreeNode {
        let value = [0, 1].map(|d| anchored_mean(samples.iter().map(|&i| self.targets[i][d])));
        TreeNode::Leaf {
            value,
            samples: samples.len(),
        }
    }

    fn targets_constant(&self, samples: &[usize]) -> bool {
        let t0 = self.targets[samples[0]];
        samples.iter().all(|&i| self.targets[i] == t0)
    }

    /// Best random cut for the node, if any feature admits a valid one.
    fn best_split(&self, samples: &[usize], rng: &mut impl RngCore) -> Option<Candidate> {
        let n = samples.len();
        let mean =
            [0, 1].map(|d| samples.iter().map(|&i| self.targets[i][d]).sum::<f64>() / n as f64);
        let mut best: Option<Candidate> = None;
        for (feature, column) in self.columns.iter().enumerate() {
            let (lo, hi) = samples
                .iter()
                .map(|&i| column[i])
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                    (lo.min(v), hi.max(v))
                });
            if hi <= lo {
                continue;
            }
            let mut cut = lo + rng::open01(rng) * (hi - lo);
            // keep both sides non-empty when rounding lands on an endpoint
            if cut <= lo || cut > hi {
                cut = hi;
            }
            // between-group sum of squares of the centered targets
            let mut left_sum = [0.0; 2];
            let mut n_left = 0usize;
            for &i in samples {
                if column[i] < cut {
                    n_left += 1;
                    left_sum[0] += self.targets[i][0] - mean[0];
                    left_sum[1] += self.targets[i][1] - mean[1];
                }
            }
            let n_right = n - n_left;
            if n_left < self.cfg.min_samples_leaf || n_right < self.cfg.min_samples_leaf {
                continue;
            }
            let score: f64 = left_sum
                .iter()
                .map(|s| s * s / n_left as f64 + s * s / n_right as f64)
                .sum();
            if best.as_ref().is_none_or(|b| score > b.score) {
                best = Some(Candidate {
                    feature,
                    cut,
                    n_left,
                    score,
                });
            }
        }
        best
    }

    fn grow(&self, tree_index: u64) -> Tree {
        let mut rng = rng::stream(self.cfg.seed, tree_index);
        let mut samples: Vec<usize> = (0..self.targets.len()).collect();
        let mut nodes = vec![TreeNode::Leaf {
            value: [0.0; 2],
            samples: 0,
        }];
        // (arena slot, sample range, depth)
        let mut stack = vec![(0usize, 0usize, samples.len(), 0usize)];
        while let Some((slot, start, end, depth)) = stack.pop() {
            let node_samples = &mut samples[start..end];
            let stop = node_samples.len() < self.cfg.min_samples_split
                || self.cfg.max_depth.is_some_and(|m| depth >= m)
                || self.targets_constant(node_samples);
            let split = if stop {
                None
            } else {
                self.best_split(node_samples, &mut rng)
            };
            let Some(c) = split else {
                nodes[slot] = self.leaf(node_samples);
                continue;
            };
            let column = &self.columns[c.feature];
            // stable partition keeps sample order (and so leaf means) independent of history
            let (mut left, mut right): (Vec<usize>, Vec<usize>) =
                node_samples.iter().partition(|&&i| column[i] < c.cut);
            debug_assert_eq!(left.len(), c.n_left);
            let mid = start + left.len();
            left.append(&mut right);
            node_samples.copy_from_slice(&left);

            let (l, r) = (nodes.len(), nodes.len() + 1);
            nodes.push(TreeNode::Leaf {
                value: [0.0; 2],
                samples: 0,
            });
            nodes.push(TreeNode::Leaf {
                value: [0.0; 2],
                samples: 0,
            });
            nodes[slot] = TreeNode::Split {
                feature: c.feature,
                cut: c.cut,
                left: l,
                right: r,
            };
            stack.push((r, mid, end, depth + 1));
            stack.push((l, start, mid, depth + 1));
        }
        Tree { nodes }
    }
}

impl Forest {
    /// Grows `cfg.n_estimators` trees on all rows of `features`.
    pub fn fit<R: AsRef<[f64]>>(
        features: &[R],
        targets: &[Coord],
        cfg: &ExtraTreesConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        if features.is_empty() {
            return Err(Error::Fit(
                "extra trees need at least one training row".into(),
            ));
        }
        if features.len() != targets.len() {
            return Err(Error::Fit(format!(
                "{} feature rows but {} targets",
                features.len(),
                targets.len()
            )));
        }
        let dim = features[0].as_ref().len();
        if features.iter().any(|r| r.as_ref().len() != dim) {
            return Err(Error::Fit("feature rows must share one length".into()));
        }
        if features
            .iter()
            .any(|r| r.as_ref().iter().any(|v| !v.is_finite()))
        {
            return Err(Error::Fit("features must be finite".into()));
        }
        let columns = (0..dim)
            .map(|f| features.iter().map(|r| r.as_ref()[f]).collect())
            .collect();
        let targets: Vec<[f64; 2]> = targets.iter().map(|c| [c.lat, c.lon]).collect();
        let grower = Grower {
            columns,
            targets: &targets,
            cfg,
        };
        let indices: Vec<u64> = (0..cfg.n_estimators as u64).collect();
        let trees = crate::par_map(&indices, |&t| grower.grow(t));
        Ok(Forest {
            trees,
            feature_count: dim,
        })
    }

    /// Mean of the per-tree leaf values reached by `x`.
    ///
    /// Panics if `x` does not have `feature_count` entries.
    pub fn predict(&self, x: &[f64]) -> Coord {
        assert_eq!(
            x.len(),
            self.feature_count,
            "query has {} features, forest expects {}",
            x.len(),
            self.feature_count
        );
        let per_tree: Vec<[f64; 2]> = self.trees.iter().map(|t| t.predict(x)).collect();
        Coord::new(
            anchored_mean(per_tree.iter().map(|v| v[0])),
            anchored_mean(per_tree.iter().map(|v| v[1])),
        )
    }

    pub fn predict_batch<R: AsRef<[f64]> + Sync>(&self, queries: &[R]) -> Vec<Coord> {
        crate::par_map(queries, |q| self.predict(q.as_ref()))
    }
}
