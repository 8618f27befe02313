use serde::{Deserialize, Serialize};

use crate::models::ModelError;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GbtConfig {
    pub rounds: usize,
    pub max_depth: usize,
    /// Shrinkage applied to every tree.
    pub eta: f64,
    pub min_leaf: usize,
}

impl Default for GbtConfig {
    fn default() -> Self {
        Self {
            rounds: 100,
            max_depth: 3,
            eta: 0.1,
            min_leaf: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum TreeNode<T> {
    Leaf {
        value: T,
    },
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: T,
        left: usize,
        right: usize,
    },
}

/// Regression tree; node 0 is the root.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree<T> {
    pub nodes: Vec<TreeNode<T>>,
}

impl<T: Scalar> Tree<T> {
    pub fn predict(&self, x: &[T]) -> T {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if x[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    }
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk<T>(nodes: &[TreeNode<T>], i: usize) -> usize {
            match &nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => {
                    1 + walk(nodes, *left).max(walk(nodes, *right))
                }
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsemble<T> {
    pub base_score: T,
    pub eta: T,
    pub trees: Vec<Tree<T>>,
}

pub fn gbt_predict<T: Scalar>(ensemble: &TreeEnsemble<T>, x: &[T]) -> T {
    let sum = ensemble.trees.iter().map(|t| t.predict(x)).sum::<T>();
    ensemble.base_score + ensemble.eta * sum
}

struct Builder<'a, T> {
    x: &'a [Vec<T>],
    residual: &'a [T],
    /// Row indices sorted by each feature, ties by row index.
    sorted: &'a [Vec<usize>],
    max_depth: usize,
    min_leaf: usize,
    nodes: Vec<TreeNode<T>>,
}

impl<T: Scalar> Builder<'_, T> {
    fn mean(&self, rows: &[usize]) -> T {
        rows.iter().map(|&i| self.residual[i]).sum::<T>() / T::of(rows.len() as f64)
    }

    /// Best `(gain, feature, threshold)` by exact greedy search.
    fn best_split(&self, rows: &[usize], member: &[bool]) -> Option<(T, usize, T)> {
        let n = rows.len();
        let total = rows.iter().map(|&i| self.residual[i]).sum::<T>();
        let parent = total * total / T::of(n as f64);
        let mut best: Option<(T, usize, T)> = None;
        for (j, order) in self.sorted.iter().enumerate() {
            let mut left_sum = T::zero();
            let mut prev: Option<usize> = None;
            for (count, &i) in order.iter().filter(|&&i| member[i]).enumerate() {
                if let Some(p) = prev {
                    let (a, b) = (self.x[p][j], self.x[i][j]);
                    if count >= self.min_leaf && n - count >= self.min_leaf && a < b {
                        let right = total - left_sum;
                        let gain = left_sum * left_sum / T::of(count as f64)
                            + right * right / T::of((n - count) as f64)
                            - parent;
                        if gain > T::zero() && best.is_none_or(|(g, _, _)| gain > g) {
                            let mid = (a + b) / T::of(2.0);
                            best = Some((gain, j, if mid < b { mid } else { a }));
                        }
                    }
                }
                left_sum += self.residual[i];
                prev = Some(i);
            }
        }
        best
    }

    fn grow(&mut self, rows: Vec<usize>, depth: usize, member: &mut [bool]) -> usize {
        let id = self.nodes.len();
        self.nodes.push(TreeNode::Leaf {
            value: self.mean(&rows),
        });
        if depth >= self.max_depth || rows.len() < 2 * self.min_leaf {
            return id;
        }
        rows.iter().for_each(|&i| member[i] = true);
        let split = self.best_split(&rows, member);
        rows.iter().for_each(|&i| member[i] = false);
        let Some((_, feature, threshold)) = split else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) =
            rows.iter().partition(|&&i| self.x[i][feature] <= threshold);
        let left = self.grow(l, depth + 1, member);
        let right = self.grow(r, depth + 1, member);
        self.nodes[id] = TreeNode::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }
}

/// Squared-error gradient boosting: starts from the target mean and fits
/// each tree to the current residuals.
pub fn gbt_fit<T: Scalar>(
    x: &[Vec<T>],
    y: &[T],
    config: &GbtConfig,
) -> Result<TreeEnsemble<T>, ModelError> {
    let n = x.len();
    if n == 0 || y.len() != n {
        return Err(ModelError::EmptyTable);
    }
    if config.rounds == 0 || config.min_leaf == 0 {
        return Err(ModelError::InvalidConfig(
            "rounds and min_leaf must be at least 1".into(),
        ));
    }
    let p = x[0].len();
    let base_score = y.iter().copied().sum::<T>() / T::of(n as f64);
    let eta = T::of(config.eta);
    let sorted: Vec<Vec<usize>> = (0..p)
        .map(|j| {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| {
                x[a][j]
                    .partial_cmp(&x[b][j])
                    .expect("finite features")
                    .then(a.cmp(&b))
            });
            idx
        })
        .collect();
    let mut sums = vec![T::zero(); n];
    let mut trees = Vec::with_capacity(config.rounds);
    let mut member = vec![false; n];
    for _ in 0..config.rounds {
        let residual: Vec<T> = (0..n)
            .map(|i| y[i] - (base_score + eta * sums[i]))
            .collect();
        let mut b = Builder {
            x,
            residual: &residual,
            sorted: &sorted,
            max_depth: config.max_depth,
            min_leaf: config.min_leaf,
            nodes: vec![],
        };
        b.grow((0..n).collect(), 0, &mut member);
        let tree = Tree { nodes: b.nodes };
        for i in 0..n {
            sums[i] += tree.predict(&x[i]);
        }
        trees.push(tree);
    }
    Ok(TreeEnsemble {
        base_score,
        eta,
        trees,
    })
}
