use std::ops::Range;

use rand::RngCore;
use rayon::prelude::*;

use crate::cart::{fit_with_holdout, grow, RegressionTree};
use crate::error::{FbsdeError, Result};
use crate::paths::{PathEnsemble, TimeGrid};
use crate::problems::Fbsde;
use crate::rng::{stream_rng, tree_stream};
use crate::scalar::Real;

use super::SchemeParams;

/// Consecutive residual increases that count as Picard divergence.
const DIVERGENCE_RUN: usize = 5;

/// Backward state of one sample group at a single time index.
///
/// Entries follow the group's row order: `y[k]`, `z[k * d + j]`, and the
/// driver value `f[k] = f(t, x, y, z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BackwardState<T> {
    pub y: Vec<T>,
    pub z: Vec<T>,
    pub f: Vec<T>,
    pub noise_dim: usize,
}

impl<T: Real> BackwardState<T> {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn z_row(&self, k: usize) -> &[T] {
        &self.z[k * self.noise_dim..(k + 1) * self.noise_dim]
    }
}

/// How conditional expectations are regressed at one time step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreePolicy {
    pub min_leaf: usize,
    /// Holdout fraction for prune-and-select; `None` grows without pruning.
    pub holdout: Option<f64>,
    /// Base seed for the holdout splits.
    pub seed: u64,
}

impl TreePolicy {
    /// Fits one tree; `(step, group, response)` selects the random stream.
    pub fn fit<T: Real>(
        &self,
        x: &[T],
        n_features: usize,
        y: &[T],
        step: usize,
        group: usize,
        response: usize,
    ) -> Result<RegressionTree<T>> {
        match self.holdout {
            Some(frac) if y.len() >= 2 => {
                let split_seed = stream_rng(self.seed, tree_stream(step, group, response)).next_u64();
                fit_with_holdout(x, n_features, y, self.min_leaf, frac, split_seed)
            }
            _ => grow(x, n_features, y, self.min_leaf),
        }
    }
}

/// Terminal data `y = g(x_T)`, `z = grad g(x_T) b(T, x_T)` for the samples in `rows`.
pub fn terminal_condition<T: Real, P: Fbsde<T> + ?Sized>(
    problem: &P,
    ens: &PathEnsemble<T>,
    rows: Range<usize>,
) -> Result<BackwardState<T>> {
    let d = ens.noise_dim();
    let last = ens.n_steps();
    let t = problem.horizon();
    let mut state = BackwardState {
        y: Vec::with_capacity(rows.len()),
        z: vec![T::zero(); rows.len() * d],
        f: Vec::with_capacity(rows.len()),
        noise_dim: d,
    };
    for (k, m) in rows.enumerate() {
        let x = ens.state(m, last);
        let y = problem.terminal(x);
        let z = &mut state.z[k * d..(k + 1) * d];
        problem.terminal_z(x, z);
        let f = problem.driver(t, x, y, z);
        state.y.push(y);
        state.f.push(f);
    }
    check_finite(&state.y, last, "terminal value")?;
    check_finite(&state.z, last, "terminal hedge")?;
    check_finite(&state.f, last, "terminal driver")?;
    Ok(state)
}

/// Regression response for the Z-update, coordinate `j`:
/// `(y dW_j / dt + (1 - theta1) f dW_j - (1 - theta2) z_j) / theta2`.
pub(crate) fn z_responses<T: Real>(
    next: &BackwardState<T>,
    dw: impl Fn(usize) -> T,
    dt: T,
    scheme: &SchemeParams,
    j: usize,
) -> Vec<T> {
    let inv_t2 = T::lit(1.0 / scheme.theta2);
    let c_f = T::lit((1.0 - scheme.theta1) / scheme.theta2);
    let c_z = T::lit((1.0 - scheme.theta2) / scheme.theta2);
    let explicit_z = scheme.theta2 != 1.0;
    (0..next.len())
        .map(|k| {
            let w = dw(k);
            let mut r = inv_t2 * next.y[k] * w / dt + c_f * next.f[k] * w;
            if explicit_z {
                r = r - c_z * next.z[k * next.noise_dim + j];
            }
            r
        })
        .collect()
}

/// Regression response for the Y-update: `y + dt (1 - theta3) f`.
pub(crate) fn y_responses<T: Real>(next: &BackwardState<T>, dt: T, scheme: &SchemeParams) -> Vec<T> {
    let c = dt * T::lit(1.0 - scheme.theta3);
    next.y.iter().zip(&next.f).map(|(&y, &f)| y + c * f).collect()
}

/// Predictor matrix `x[rows][i]`, row-major.
fn predictors<T: Real>(ens: &PathEnsemble<T>, i: usize, rows: &Range<usize>) -> Vec<T> {
    let mut x = Vec::with_capacity(rows.len() * ens.state_dim());
    for m in rows.clone() {
        x.extend_from_slice(ens.state(m, i));
    }
    x
}

/// Z-update at step `i` for one group. Returns `z_hat` (row-major `rows x d`)
/// and the leaf count of each coordinate's tree.
#[allow(clippy::too_many_arguments)]
pub fn z_step<T: Real>(
    next: &BackwardState<T>,
    ens: &PathEnsemble<T>,
    grid: &TimeGrid<T>,
    i: usize,
    rows: Range<usize>,
    group: usize,
    scheme: &SchemeParams,
    policy: &TreePolicy,
) -> Result<(Vec<T>, Vec<usize>)> {
    let (n, d) = (ens.state_dim(), ens.noise_dim());
    let x = predictors(ens, i, &rows);
    let dt = grid.dt(i);
    let fitted: Vec<(Vec<T>, usize)> = (0..d)
        .into_par_iter()
        .map(|j| {
            let resp = z_responses(next, |k| ens.increment(rows.start + k, i)[j], dt, scheme, j);
            check_finite(&resp, i, "Z response")?;
            let tree = policy.fit(&x, n, &resp, i, group, j)?;
            let pred = x.chunks_exact(n).map(|row| tree.eval(row)).collect();
            Ok((pred, tree.n_leaves()))
        })
        .collect::<Result<_>>()?;
    let mut z = vec![T::zero(); rows.len() * d];
    let mut leaves = Vec::with_capacity(d);
    for (j, (pred, l)) in fitted.into_iter().enumerate() {
        for (k, v) in pred.into_iter().enumerate() {
            z[k * d + j] = v;
        }
        leaves.push(l);
    }
    Ok((z, leaves))
}

/// Outcome of the Picard iteration at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct PicardTrace {
    /// `max_m |y^(k+1) - y^(k)|` after every iteration performed.
    pub residuals: Vec<f64>,
}

/// Solves `y = e + c f(t, x, y, z)` by fixed-point iteration from `y = e`,
/// sample by sample. `c = 0` returns `e` untouched.
#[allow(clippy::too_many_arguments)]
pub(crate) fn picard<T: Real, P: Fbsde<T> + ?Sized>(
    problem: &P,
    t: T,
    xs: &[T],
    n: usize,
    e: &[T],
    z: &[T],
    d: usize,
    c: T,
    iterations: usize,
    step: usize,
) -> Result<(Vec<T>, PicardTrace)> {
    let mut y = e.to_vec();
    let mut trace = PicardTrace { residuals: Vec::new() };
    if c == T::zero() {
        return Ok((y, trace));
    }
    let rel_tol = T::lit(1e-12).max(T::epsilon() * T::lit(8.0));
    let mut rising = 0;
    let mut next = vec![T::zero(); y.len()];
    for _ in 0..iterations {
        let mut residual = T::zero();
        let mut scale = T::one();
        for k in 0..y.len() {
            let x = &xs[k * n..(k + 1) * n];
            let v = e[k] + c * problem.driver(t, x, y[k], &z[k * d..(k + 1) * d]);
            residual = residual.max((v - y[k]).abs());
            scale = scale.max(v.abs());
            next[k] = v;
        }
        std::mem::swap(&mut y, &mut next);
        if !residual.is_finite() {
            return Err(FbsdeError::NumericalFailure {
                step,
                detail: "Picard iterate is not finite; try a smaller time step".into(),
            });
        }
        if let Some(&prev) = trace.residuals.last() {
            rising = if residual.as_f64() > prev { rising + 1 } else { 0 };
        }
        trace.residuals.push(residual.as_f64());
        if rising >= DIVERGENCE_RUN {
            return Err(FbsdeError::NumericalFailure {
                step,
                detail: format!(
                    "Picard iteration diverges (residual grew {DIVERGENCE_RUN} times in a row); try a smaller time step"
                ),
            });
        }
        if residual <= rel_tol * scale {
            break;
        }
    }
    Ok((y, trace))
}

/// Y-update at step `i` for one group, given `z_hat` at `i`. Returns
/// `y_hat`, the leaf count of the tree and the Picard trace.
#[allow(clippy::too_many_arguments)]
pub fn y_step<T: Real, P: Fbsde<T> + ?Sized>(
    problem: &P,
    next: &BackwardState<T>,
    z: &[T],
    ens: &PathEnsemble<T>,
    grid: &TimeGrid<T>,
    i: usize,
    rows: Range<usize>,
    group: usize,
    scheme: &SchemeParams,
    policy: &TreePolicy,
) -> Result<(Vec<T>, usize, PicardTrace)> {
    let (n, d) = (ens.state_dim(), ens.noise_dim());
    let x = predictors(ens, i, &rows);
    let dt = grid.dt(i);
    let resp = y_responses(next, dt, scheme);
    check_finite(&resp, i, "Y response")?;
    let tree = policy.fit(&x, n, &resp, i, group, d)?;
    let e: Vec<T> = x.chunks_exact(n).map(|row| tree.eval(row)).collect();
    let c = dt * T::lit(scheme.theta3);
    let (y, trace) = picard(problem, grid.t(i), &x, n, &e, z, d, c, scheme.picard_iters, i)?;
    Ok((y, tree.n_leaves(), trace))
}

/// Per-group record of one backward step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub y_leaves: usize,
    pub z_leaves: Vec<usize>,
    pub picard: PicardTrace,
}

/// One full backward step `i+1 -> i` for the group `rows`: Z-update,
/// Y-update and the driver values at `t_i`.
#[allow(clippy::too_many_arguments)]
pub fn backward_step<T: Real, P: Fbsde<T> + ?Sized>(
    problem: &P,
    next: &BackwardState<T>,
    ens: &PathEnsemble<T>,
    grid: &TimeGrid<T>,
    i: usize,
    rows: Range<usize>,
    group: usize,
    scheme: &SchemeParams,
    policy: &TreePolicy,
) -> Result<(BackwardState<T>, StepRecord)> {
    let d = ens.noise_dim();
    let (z, z_leaves) = z_step(next, ens, grid, i, rows.clone(), group, scheme, policy)?;
    let (y, y_leaves, picard) = y_step(problem, next, &z, ens, grid, i, rows.clone(), group, scheme, policy)?;
    let t = grid.t(i);
    let f: Vec<T> = rows
        .clone()
        .enumerate()
        .map(|(k, m)| problem.driver(t, ens.state(m, i), y[k], &z[k * d..(k + 1) * d]))
        .collect();
    check_finite(&f, i, "driver")?;
    Ok((BackwardState { y, z, f, noise_dim: d }, StepRecord { y_leaves, z_leaves, picard }))
}

/// Final step to `t_0` on the pooled samples. The predictor is the constant
/// `x_0`, so every conditional expectation is a sample mean.
pub fn pooled_first_step<T: Real, P: Fbsde<T> + ?Sized>(
    problem: &P,
    next: &BackwardState<T>,
    ens: &PathEnsemble<T>,
    grid: &TimeGrid<T>,
    scheme: &SchemeParams,
) -> Result<(T, Vec<T>, PicardTrace)> {
    let d = ens.noise_dim();
    let count = T::from_usize_lossy(next.len());
    let dt = grid.dt(0);
    let z0: Vec<T> = (0..d)
        .map(|j| {
            let resp = z_responses(next, |k| ens.increment(k, 0)[j], dt, scheme, j);
            resp.into_iter().sum::<T>() / count
        })
        .collect();
    let e = y_responses(next, dt, scheme).into_iter().sum::<T>() / count;
    check_finite(&z0, 0, "Z_0")?;
    check_finite(&[e], 0, "Y_0 expectation")?;
    let x0 = ens.state(0, 0);
    let c = dt * T::lit(scheme.theta3);
    let (y, trace) = picard(problem, grid.t(0), x0, x0.len(), &[e], &z0, d, c, scheme.picard_iters, 0)?;
    Ok((y[0], z0, trace))
}

fn check_finite<T: Real>(v: &[T], step: usize, what: &str) -> Result<()> {
    match v.iter().position(|x| !x.is_finite()) {
        None => Ok(()),
        Some(k) => Err(FbsdeError::NumericalFailure { step, detail: format!("{what} is not finite for sample {k}") }),
    }
}
