//! Regression trees (CART) for conditional-mean estimation.
//!
//! A tree is grown greedily by squared-error splitting, pruned into a nested
//! cost-complexity sequence by weakest-link cutting, and a member of that
//! sequence is chosen on an independent test sample with the one-standard-
//! error rule. Predictions are leaf means, so a tree is a piecewise constant
//! estimate of `E[Y | X = x]`.
//!
//! Inputs are dense row-major matrices: `x[r * n_features + c]`.

mod grow;
mod prune;
mod select;

use std::fmt::Write as _;

pub use grow::{grow, DEFAULT_MIN_LEAF};
pub use prune::{prune_sequence, PruneSequence};
pub use select::{best_min_leaf, fit_with_holdout, select_index, select_tree, Selection};

use crate::error::{FbsdeError, Result};
use crate::scalar::Real;

/// Routing rule or terminal marker of a node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NodeKind<T> {
    Leaf,
    /// Samples with `x[feature] <= threshold` go to `left`.
    Internal {
        feature: usize,
        threshold: T,
        left: usize,
        right: usize,
    },
}

/// A tree node. Statistics are kept on internal nodes too, pruning needs them.
#[derive(Debug, Clone, PartialEq)]
pub struct Node<T> {
    pub kind: NodeKind<T>,
    /// Mean training response in the node.
    pub mean: T,
    /// Number of training samples routed to the node.
    pub count: usize,
    /// Within-node sum of squared deviations from `mean`.
    pub sse: T,
}

impl<T> Node<T> {
    pub fn is_leaf(&self) -> bool {
        matches!(self.kind, NodeKind::Leaf)
    }
}

/// Fitted regression tree. Node `0` is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTree<T> {
    nodes: Vec<Node<T>>,
    n_features: usize,
    n_train: usize,
}

impl<T: Real> RegressionTree<T> {
    pub(crate) fn from_nodes(nodes: Vec<Node<T>>, n_features: usize, n_train: usize) -> Self {
        debug_assert!(!nodes.is_empty());
        Self { nodes, n_features, n_train }
    }

    /// Tree with a single leaf predicting `mean` everywhere.
    pub fn constant(mean: T, n_features: usize) -> Self {
        Self::from_nodes(vec![Node { kind: NodeKind::Leaf, mean, count: 0, sse: T::zero() }], n_features, 0)
    }

    pub fn nodes(&self) -> &[Node<T>] {
        &self.nodes
    }

    pub fn root(&self) -> &Node<T> {
        &self.nodes[0]
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_train(&self) -> usize {
        self.n_train
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }

    /// Resubstitution error `R(T)`: summed leaf squared error over `n_train`.
    pub fn mse(&self) -> T {
        if self.n_train == 0 {
            return T::zero();
        }
        let sse: T = self.nodes.iter().filter(|n| n.is_leaf()).map(|n| n.sse).sum();
        sse / T::from_usize_lossy(self.n_train)
    }

    /// Index of the leaf that `x` is routed to.
    #[inline]
    pub fn leaf_index(&self, x: &[T]) -> usize {
        let mut id = 0;
        loop {
            match self.nodes[id].kind {
                NodeKind::Leaf => return id,
                NodeKind::Internal { feature, threshold, left, right } => {
                    id = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    /// Prediction without the dimension check.
    #[inline]
    pub(crate) fn eval(&self, x: &[T]) -> T {
        self.nodes[self.leaf_index(x)].mean
    }

    /// Conditional-mean estimate at `x`.
    pub fn predict(&self, x: &[T]) -> Result<T> {
        if x.len() != self.n_features {
            return Err(FbsdeError::invalid(format!("expected {} features, got {}", self.n_features, x.len())));
        }
        Ok(self.eval(x))
    }

    /// Predictions for every row of a row-major matrix.
    pub fn predict_rows(&self, x: &[T]) -> Result<Vec<T>> {
        if self.n_features == 0 || !x.len().is_multiple_of(self.n_features) {
            return Err(FbsdeError::invalid("matrix width does not match the tree"));
        }
        Ok(x.chunks_exact(self.n_features).map(|row| self.eval(row)).collect())
    }

    /// Indented text dump, one node per line.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let mut stack = vec![(0usize, 0usize)];
        while let Some((id, depth)) = stack.pop() {
            let node = &self.nodes[id];
            let pad = "  ".repeat(depth);
            match node.kind {
                NodeKind::Leaf => {
                    let _ = writeln!(out, "{pad}leaf mean={} count={}", node.mean, node.count);
                }
                NodeKind::Internal { feature, threshold, left, right } => {
                    let _ = writeln!(out, "{pad}x[{feature}] <= {threshold} count={}", node.count);
                    stack.push((right, depth + 1));
                    stack.push((left, depth + 1));
                }
            }
        }
        out
    }
}

pub(crate) fn check_design<T: Real>(x: &[T], n_features: usize, y: &[T]) -> Result<()> {
    if y.is_empty() {
        return Err(FbsdeError::invalid("empty training set"));
    }
    if n_features == 0 {
        return Err(FbsdeError::invalid("at least one feature is required"));
    }
    if x.len() != y.len() * n_features {
        return Err(FbsdeError::invalid(format!(
            "design matrix has {} entries, expected {} x {}",
            x.len(),
            y.len(),
            n_features
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(FbsdeError::invalid("non-finite response"));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(FbsdeError::invalid("non-finite predictor"));
    }
    Ok(())
}

/// Copies the selected rows of `(x, y)` into new buffers.
pub(crate) fn gather_rows<T: Real>(x: &[T], n_features: usize, y: &[T], rows: &[usize]) -> (Vec<T>, Vec<T>) {
    let mut xs = Vec::with_capacity(rows.len() * n_features);
    let mut ys = Vec::with_capacity(rows.len());
    for &r in rows {
        xs.extend_from_slice(&x[r * n_features..(r + 1) * n_features]);
        ys.push(y[r]);
    }
    (xs, ys)
}
