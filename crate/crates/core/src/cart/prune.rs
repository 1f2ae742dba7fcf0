use super::{Node, NodeKind, RegressionTree};
use crate::scalar::Real;

/// Nested cost-complexity sequence `T_1 > T_2 > ... > root`.
///
/// Subtree `k` is optimal for `alpha` in `[alphas[k], alphas[k+1])`. All
/// members share the node arena of the grown tree; `collapse[id]` records
/// the complexity parameter at which internal node `id` becomes a leaf.
#[derive(Debug, Clone)]
pub struct PruneSequence<T> {
    base: RegressionTree<T>,
    alphas: Vec<T>,
    collapse: Vec<T>,
}

/// Weakest-link pruning of a grown tree.
///
/// Repeatedly computes `g(t) = (R(t) - R(T_t)) / (|leaves(T_t)| - 1)` for the
/// internal nodes of the current subtree and collapses every node attaining
/// the minimum. The first member is the tree with all zero-gain branches
/// removed, the last is the root alone.
pub fn prune_sequence<T: Real>(tree: &RegressionTree<T>) -> PruneSequence<T> {
    let nodes = tree.nodes();
    let n_train = T::from_usize_lossy(tree.n_train().max(1));
    let risk: Vec<T> = nodes.iter().map(|n| n.sse / n_train).collect();
    let scale = risk[0];

    let mut collapse: Vec<T> =
        nodes.iter().map(|n| if n.is_leaf() { T::neg_infinity() } else { T::infinity() }).collect();
    let mut alphas = vec![T::zero()];
    let mut gs: Vec<Option<T>> = vec![None; nodes.len()];
    let mut branch_risk = vec![T::zero(); nodes.len()];
    let mut branch_leaves = vec![0usize; nodes.len()];

    while collapse[0] == T::infinity() {
        let current = *alphas.last().expect("non-empty");
        let order = postorder_alive(nodes, &collapse, current);
        let mut g_min = T::infinity();
        for &id in &order {
            gs[id] = None;
            match nodes[id].kind {
                NodeKind::Internal { left, right, .. } if collapse[id] > current => {
                    branch_risk[id] = branch_risk[left] + branch_risk[right];
                    branch_leaves[id] = branch_leaves[left] + branch_leaves[right];
                    let g = (risk[id] - branch_risk[id]) / T::from_usize_lossy(branch_leaves[id] - 1);
                    g_min = g_min.min(g);
                    gs[id] = Some(g);
                }
                _ => {
                    branch_risk[id] = risk[id];
                    branch_leaves[id] = 1;
                }
            }
        }
        let tol = g_min.abs() * T::lit(1e-10) + scale * T::lit(1e-14);
        // A minimum at or below the current level is a tie with it.
        let level = if g_min <= current + tol {
            current
        } else {
            alphas.push(g_min);
            g_min
        };
        let cut = level.max(g_min) + tol;
        for &id in &order {
            if let Some(g) = gs[id] {
                if g <= cut && collapse[id] > level {
                    collapse_branch(nodes, &mut collapse, id, level);
                }
            }
        }
    }
    PruneSequence { base: tree.clone(), alphas, collapse }
}

/// Internal nodes still present at `alpha`, children before parents.
fn postorder_alive<T: Real>(nodes: &[Node<T>], collapse: &[T], alpha: T) -> Vec<usize> {
    let mut out = Vec::new();
    let mut stack = vec![(0usize, false)];
    while let Some((id, expanded)) = stack.pop() {
        match nodes[id].kind {
            NodeKind::Internal { left, right, .. } if collapse[id] > alpha && !expanded => {
                stack.push((id, true));
                stack.push((right, false));
                stack.push((left, false));
            }
            _ => out.push(id),
        }
    }
    out
}

fn collapse_branch<T: Real>(nodes: &[Node<T>], collapse: &mut [T], id: usize, alpha: T) {
    let mut stack = vec![id];
    while let Some(k) = stack.pop() {
        if let NodeKind::Internal { left, right, .. } = nodes[k].kind {
            if collapse[k] > alpha {
                collapse[k] = alpha;
                stack.push(left);
                stack.push(right);
            }
        }
    }
}

impl<T: Real> PruneSequence<T> {
    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }

    pub fn alphas(&self) -> &[T] {
        &self.alphas
    }

    pub fn base(&self) -> &RegressionTree<T> {
        &self.base
    }

    #[inline]
    fn is_cut(&self, id: usize, k: usize) -> bool {
        self.collapse[id] <= self.alphas[k]
    }

    /// Leaf index (in the base arena) that `x` reaches in subtree `k`.
    #[inline]
    fn leaf_in(&self, k: usize, x: &[T]) -> usize {
        let nodes = self.base.nodes();
        let mut id = 0;
        loop {
            match nodes[id].kind {
                NodeKind::Internal { feature, threshold, left, right } if !self.is_cut(id, k) => {
                    id = if x[feature] <= threshold { left } else { right };
                }
                _ => return id,
            }
        }
    }

    /// Prediction of subtree `k` at `x` (no dimension check).
    #[inline]
    pub fn predict(&self, k: usize, x: &[T]) -> T {
        self.base.nodes()[self.leaf_in(k, x)].mean
    }

    /// Base-arena ids of the internal nodes of subtree `k`.
    pub fn internal_node_ids(&self, k: usize) -> Vec<usize> {
        let nodes = self.base.nodes();
        let mut out = Vec::new();
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            if let NodeKind::Internal { left, right, .. } = nodes[id].kind {
                if !self.is_cut(id, k) {
                    out.push(id);
                    stack.push(left);
                    stack.push(right);
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Number of leaves `|T_k|`.
    pub fn n_leaves(&self, k: usize) -> usize {
        self.internal_node_ids(k).len() + 1
    }

    /// Resubstitution error `R(T_k)`.
    pub fn risk(&self, k: usize) -> T {
        self.tree(k).mse()
    }

    /// Materialises subtree `k` as a standalone tree.
    pub fn tree(&self, k: usize) -> RegressionTree<T> {
        let src = self.base.nodes();
        let mut nodes: Vec<Node<T>> = Vec::new();
        let mut stack = vec![(0usize, None::<(usize, bool)>)];
        while let Some((id, parent)) = stack.pop() {
            let new_id = nodes.len();
            let mut node = src[id].clone();
            if let Some((p, is_left)) = parent {
                if let NodeKind::Internal { left, right, .. } = &mut nodes[p].kind {
                    if is_left {
                        *left = new_id;
                    } else {
                        *right = new_id;
                    }
                }
            }
            match src[id].kind {
                NodeKind::Internal { left, right, .. } if !self.is_cut(id, k) => {
                    stack.push((right, Some((new_id, false))));
                    stack.push((left, Some((new_id, true))));
                }
                _ => node.kind = NodeKind::Leaf,
            }
            nodes.push(node);
        }
        RegressionTree::from_nodes(nodes, self.base.n_features(), self.base.n_train())
    }
}
