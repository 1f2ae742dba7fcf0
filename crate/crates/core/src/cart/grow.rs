use super::{check_design, Node, NodeKind, RegressionTree};
use crate::error::{FbsdeError, Result};
use crate::scalar::Real;

/// Minimum leaf size suggested by Breiman et al.
pub const DEFAULT_MIN_LEAF: usize = 5;

struct Candidate<T> {
    feature: usize,
    threshold: T,
    gain: T,
}

/// Grows a regression tree by greedy squared-error splitting.
///
/// At every node the split maximising the reduction in within-node squared
/// error over all features and all midpoints between consecutive distinct
/// values is applied. A node becomes a leaf when it holds fewer than
/// `2 * min_leaf` samples, when its responses are all equal, or when no
/// admissible split reduces the error. Ties go to the lowest feature index,
/// then the smallest threshold.
pub fn grow<T: Real>(x: &[T], n_features: usize, y: &[T], min_leaf: usize) -> Result<RegressionTree<T>> {
    check_design(x, n_features, y)?;
    if min_leaf == 0 {
        return Err(FbsdeError::invalid("min_leaf must be at least 1"));
    }
    let n = y.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut nodes: Vec<Node<T>> = Vec::new();
    let mut scratch: Vec<(T, T)> = Vec::with_capacity(n);

    nodes.push(leaf_stats(y, &order));
    let mut stack = vec![(0usize, 0usize, n)];
    while let Some((id, start, end)) = stack.pop() {
        let rows = &mut order[start..end];
        let Some(split) = best_split(x, n_features, y, rows, min_leaf, &nodes[id], &mut scratch) else {
            continue;
        };
        let mid = start + partition(rows, |r| x[r * n_features + split.feature] <= split.threshold);
        let left = nodes.len();
        nodes.push(leaf_stats(y, &order[start..mid]));
        let right = nodes.len();
        nodes.push(leaf_stats(y, &order[mid..end]));
        nodes[id].kind = NodeKind::Internal { feature: split.feature, threshold: split.threshold, left, right };
        stack.push((right, mid, end));
        stack.push((left, start, mid));
    }
    Ok(RegressionTree::from_nodes(nodes, n_features, n))
}

fn leaf_stats<T: Real>(y: &[T], rows: &[usize]) -> Node<T> {
    let count = rows.len();
    let mean = rows.iter().map(|&r| y[r]).sum::<T>() / T::from_usize_lossy(count);
    let sse = rows.iter().map(|&r| (y[r] - mean).powi(2)).sum::<T>();
    Node { kind: NodeKind::Leaf, mean, count, sse }
}

/// Stable in-place partition; returns the number of rows satisfying `pred`.
fn partition(rows: &mut [usize], pred: impl Fn(usize) -> bool) -> usize {
    let (mut yes, no): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&r| pred(r));
    let k = yes.len();
    yes.extend(no);
    rows.copy_from_slice(&yes);
    k
}

fn midpoint<T: Real>(lo: T, hi: T) -> T {
    let mid = lo + (hi - lo) / T::lit(2.0);
    // Adjacent floats: keep `lo <= t < hi` so routing matches the sweep.
    if mid >= hi {
        lo
    } else {
        mid
    }
}

fn best_split<T: Real>(
    x: &[T],
    n_features: usize,
    y: &[T],
    rows: &[usize],
    min_leaf: usize,
    node: &Node<T>,
    scratch: &mut Vec<(T, T)>,
) -> Option<Candidate<T>> {
    let n = rows.len();
    if n < 2 * min_leaf {
        return None;
    }
    let first = y[rows[0]];
    if rows.iter().all(|&r| y[r] == first) {
        return None;
    }
    let mean = node.mean;
    let nf = T::from_usize_lossy(n);
    let total: T = rows.iter().map(|&r| y[r] - mean).sum();
    let base = total * total / nf;
    // Gains below this are rounding noise of the centred sums.
    let floor = node.sse * T::lit(64.0) * T::epsilon();

    let mut best: Option<Candidate<T>> = None;
    for feature in 0..n_features {
        scratch.clear();
        scratch.extend(rows.iter().map(|&r| (x[r * n_features + feature], y[r] - mean)));
        scratch.sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).expect("finite predictors"));
        if scratch[0].0 == scratch[n - 1].0 {
            continue;
        }
        let mut left_sum = T::zero();
        for k in 1..n {
            left_sum = left_sum + scratch[k - 1].1;
            if k < min_leaf || n - k < min_leaf {
                continue;
            }
            let (lo, hi) = (scratch[k - 1].0, scratch[k].0);
            if lo == hi {
                continue;
            }
            let right_sum = total - left_sum;
            let gain = left_sum * left_sum / T::from_usize_lossy(k)
                + right_sum * right_sum / T::from_usize_lossy(n - k)
                - base;
            if gain > floor && best.as_ref().is_none_or(|b| gain > b.gain) {
                best = Some(Candidate { feature, threshold: midpoint(lo, hi), gain });
            }
        }
    }
    best
}
