use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{check_design, gather_rows, grow, prune_sequence, PruneSequence, RegressionTree};
use crate::error::{FbsdeError, Result};
use crate::scalar::Real;

/// Outcome of test-sample selection over a prune sequence.
#[derive(Debug, Clone)]
pub struct Selection<T> {
    /// Chosen member of the sequence.
    pub index: usize,
    /// Member with the smallest test error.
    pub min_index: usize,
    /// Test-sample mean squared error of every member.
    pub errors: Vec<T>,
    /// Standard error of the minimal test error.
    pub standard_error: T,
}

/// One-standard-error selection on an independent test sample.
///
/// Picks the smallest member whose test error is within one standard error
/// of the minimum. The standard error is computed from the residuals of the
/// minimising member.
pub fn select_index<T: Real>(seq: &PruneSequence<T>, x_test: &[T], y_test: &[T]) -> Result<Selection<T>> {
    let width = seq.base().n_features();
    check_design(x_test, width, y_test).map_err(|e| match e {
        FbsdeError::InvalidArgument(msg) if y_test.is_empty() => {
            FbsdeError::InvalidArgument(format!("test set: {msg}"))
        }
        other => other,
    })?;
    let n2 = T::from_usize_lossy(y_test.len());
    let rows: Vec<&[T]> = x_test.chunks_exact(width).collect();

    let errors: Vec<T> = (0..seq.len())
        .map(|k| rows.iter().zip(y_test).map(|(row, &y)| (y - seq.predict(k, row)).powi(2)).sum::<T>() / n2)
        .collect();

    // Ties resolve towards the smaller tree (later in the sequence).
    let mut min_index = 0;
    for (k, &e) in errors.iter().enumerate() {
        if e <= errors[min_index] {
            min_index = k;
        }
    }
    let r_min = errors[min_index];
    let fourth: T = rows.iter().zip(y_test).map(|(row, &y)| (y - seq.predict(min_index, row)).powi(4)).sum::<T>() / n2;
    let standard_error = (fourth - r_min * r_min).max(T::zero()).sqrt() / n2.sqrt();

    let bound = r_min + standard_error;
    let index = (min_index..seq.len()).rev().find(|&k| errors[k] <= bound).unwrap_or(min_index);
    Ok(Selection { index, min_index, errors, standard_error })
}

/// Materialises the member chosen by [`select_index`].
pub fn select_tree<T: Real>(seq: &PruneSequence<T>, x_test: &[T], y_test: &[T]) -> Result<RegressionTree<T>> {
    let sel = select_index(seq, x_test, y_test)?;
    Ok(seq.tree(sel.index))
}

/// Grow on a random part of the data, prune, and select on the rest.
///
/// `holdout_fraction` of the rows (rounded, at least one, at most `n - 1`)
/// form the test sample.
pub fn fit_with_holdout<T: Real>(
    x: &[T],
    n_features: usize,
    y: &[T],
    min_leaf: usize,
    holdout_fraction: f64,
    seed: u64,
) -> Result<RegressionTree<T>> {
    check_design(x, n_features, y)?;
    let n = y.len();
    if n < 2 {
        return Err(FbsdeError::invalid("holdout fitting needs at least two samples"));
    }
    if !(holdout_fraction > 0.0 && holdout_fraction < 1.0) {
        return Err(FbsdeError::invalid(format!("holdout fraction must lie in (0, 1), got {holdout_fraction}")));
    }
    let n_test = ((n as f64 * holdout_fraction).round() as usize).clamp(1, n - 1);
    let mut rows: Vec<usize> = (0..n).collect();
    rows.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (test_rows, train_rows) = rows.split_at(n_test);

    let (x_train, y_train) = gather_rows(x, n_features, y, train_rows);
    let (x_test, y_test) = gather_rows(x, n_features, y, test_rows);
    let tree = grow(&x_train, n_features, &y_train, min_leaf)?;
    let seq = prune_sequence(&tree);
    select_tree(&seq, &x_test, &y_test)
}

/// Chooses a minimum leaf size by `n_folds`-fold cross-validation of unpruned trees.
///
/// Returns the candidate with the smallest cross-validated mean squared
/// prediction error; ties go to the larger leaf size.
pub fn best_min_leaf<T: Real>(
    x: &[T],
    n_features: usize,
    y: &[T],
    candidates: &[usize],
    n_folds: usize,
    seed: u64,
) -> Result<usize> {
    check_design(x, n_features, y)?;
    if candidates.is_empty() {
        return Err(FbsdeError::invalid("no min_leaf candidates given"));
    }
    if candidates.contains(&0) {
        return Err(FbsdeError::invalid("min_leaf candidates must be positive"));
    }
    let n = y.len();
    if n_folds < 2 || n_folds > n {
        return Err(FbsdeError::invalid(format!(
            "{n_folds} folds on {n} samples leave an empty training or test part"
        )));
    }
    let mut rows: Vec<usize> = (0..n).collect();
    rows.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let folds: Vec<(Vec<T>, Vec<T>, Vec<T>, Vec<T>)> = (0..n_folds)
        .map(|f| {
            let (lo, hi) = (f * n / n_folds, (f + 1) * n / n_folds);
            let train: Vec<usize> = rows[..lo].iter().chain(&rows[hi..]).copied().collect();
            let (xt, yt) = gather_rows(x, n_features, y, &train);
            let (xv, yv) = gather_rows(x, n_features, y, &rows[lo..hi]);
            (xt, yt, xv, yv)
        })
        .collect();

    let mut sorted = candidates.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut best: Option<(usize, T)> = None;
    for &leaf in sorted.iter().rev() {
        let mut sse = T::zero();
        for (xt, yt, xv, yv) in &folds {
            let tree = grow(xt, n_features, yt, leaf)?;
            sse = sse + xv.chunks_exact(n_features).zip(yv).map(|(row, &v)| (v - tree.eval(row)).powi(2)).sum::<T>();
        }
        let cv = sse / T::from_usize_lossy(n);
        let better = match best {
            None => true,
            Some((_, b)) => cv < b - b.abs() * T::lit(1e-9),
        };
        if better {
            best = Some((leaf, cv));
        }
    }
    Ok(best.expect("candidates non-empty").0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_member_sequence_is_returned() {
        let tree = grow(&[1.0, 2.0], 1, &[3.0, 3.0], 1).unwrap();
        let seq = prune_sequence(&tree);
        let chosen = select_tree(&seq, &[5.0], &[0.0]).unwrap();
        assert_eq!(chosen.n_leaves(), 1);
    }

    #[test]
    fn empty_test_set_is_rejected() {
        let tree = grow(&[1.0, 2.0], 1, &[3.0, 4.0], 1).unwrap();
        let seq = prune_sequence(&tree);
        assert!(select_tree(&seq, &[], &[]).is_err());
    }

    #[test]
    fn training_set_as_test_set_gives_smallest_exact_tree() {
        // Pure tree on a two-level step: several members interpolate, the
        // two-leaf one is the smallest with zero error.
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let y = [0.0, 0.0, 0.0, 2.0, 2.0, 2.0];
        let tree = grow(&x, 1, &y, 1).unwrap();
        let seq = prune_sequence(&tree);
        let sel = select_index(&seq, &x, &y).unwrap();
        assert_eq!(sel.errors[sel.min_index], 0.0);
        assert_eq!(sel.standard_error, 0.0);
        assert_eq!(seq.n_leaves(sel.index), 2);
    }

    #[test]
    fn holdout_fit_on_constant_response() {
        let x: Vec<f64> = (0..40).map(|i| i as f64).collect();
        let y = vec![1.25; 40];
        let tree = fit_with_holdout(&x, 1, &y, 5, 0.5, 3).unwrap();
        assert_eq!(tree.n_leaves(), 1);
        assert_eq!(tree.predict(&[17.0]).unwrap(), 1.25);
    }

    #[test]
    fn holdout_fit_is_deterministic() {
        let x: Vec<f64> = (0..300).map(|i| (i as f64 * 0.37).sin()).collect();
        let y: Vec<f64> = x.iter().enumerate().map(|(i, v)| v * v + 0.01 * ((i * 7919) % 13) as f64).collect();
        let a = fit_with_holdout(&x, 1, &y, 5, 0.5, 11).unwrap();
        let b = fit_with_holdout(&x, 1, &y, 5, 0.5, 11).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.n_train(), 150);
    }

    #[test]
    fn holdout_rejects_bad_fraction() {
        let x = [1.0, 2.0, 3.0];
        let y = [1.0, 2.0, 3.0];
        assert!(fit_with_holdout(&x, 1, &y, 1, 0.0, 0).is_err());
        assert!(fit_with_holdout(&x, 1, &y, 1, 1.0, 0).is_err());
        assert!(fit_with_holdout(&[1.0], 1, &[1.0], 1, 0.5, 0).is_err());
    }

    #[test]
    fn constant_response_ties_go_to_largest_leaf() {
        let x: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let y = vec![3.0; 50];
        assert_eq!(best_min_leaf(&x, 1, &y, &[1, 5, 10], 5, 1).unwrap(), 10);
    }

    #[test]
    fn cv_rejects_empty_training_folds() {
        let x = [1.0, 2.0, 3.0];
        let y = [1.0, 2.0, 3.0];
        assert!(best_min_leaf(&x, 1, &y, &[1], 1, 0).is_err());
        assert!(best_min_leaf(&x, 1, &y, &[1], 4, 0).is_err());
        assert!(best_min_leaf(&x, 1, &y, &[], 2, 0).is_err());
    }
}
