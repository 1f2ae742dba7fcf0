//! Backward theta-scheme with regression-tree conditional expectations.
//!
//! From the terminal condition the solver steps back to `t_1` separately on
//! each group of `G` samples. At every step it fits one tree per Brownian
//! coordinate for `Z` and one tree for the explicit part of `Y`, then
//! resolves the implicit driver term by Picard iteration. The last step to
//! `t_0` pools all samples and uses plain averages.

mod step;

use rand::RngCore;
use rayon::prelude::*;

pub use step::{
    backward_step, pooled_first_step, terminal_condition, y_step, z_step, BackwardState, PicardTrace, StepRecord,
    TreePolicy,
};

use crate::cart::{best_min_leaf, DEFAULT_MIN_LEAF};
use crate::error::{FbsdeError, Result};
use crate::paths::{simulate_euler, PathEnsemble, TimeGrid};
use crate::problems::Fbsde;
use crate::rng::{cv_stream, stream_rng};
use crate::scalar::Real;

/// Weights `(theta1, theta2, theta3)` of the time discretisation and the
/// number of Picard iterations for the implicit `Y` update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeParams {
    pub theta1: f64,
    pub theta2: f64,
    pub theta3: f64,
    pub picard_iters: usize,
}

impl SchemeParams {
    pub const DEFAULT_PICARD: usize = 20;

    pub fn new(theta1: f64, theta2: f64, theta3: f64, picard_iters: usize) -> Result<Self> {
        let s = Self { theta1, theta2, theta3, picard_iters };
        s.validate()?;
        Ok(s)
    }

    /// Scheme with the default Picard count.
    pub fn theta(theta1: f64, theta2: f64, theta3: f64) -> Result<Self> {
        Self::new(theta1, theta2, theta3, Self::DEFAULT_PICARD)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta2 > 0.0 && self.theta2 <= 1.0) {
            return Err(FbsdeError::invalid("theta2 must be in (0,1]"));
        }
        for (name, v) in [("theta1", self.theta1), ("theta3", self.theta3)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(FbsdeError::invalid(format!("{name} must be in [0,1]")));
            }
        }
        if self.picard_iters == 0 {
            return Err(FbsdeError::invalid("picard iterations must be at least 1"));
        }
        Ok(())
    }
}

impl Default for SchemeParams {
    /// `(1/2, 1, 1/2)`, second order in `Y`.
    fn default() -> Self {
        Self { theta1: 0.5, theta2: 1.0, theta3: 0.5, picard_iters: Self::DEFAULT_PICARD }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MinLeaf {
    Fixed(usize),
    /// Cross-validated once at the first backward step, then frozen.
    Auto,
}

/// Sample sizes and regression settings of one solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub n_samples: usize,
    pub group_size: usize,
    pub min_leaf: MinLeaf,
    /// Prune and select each tree on a holdout sample. Off by default: the
    /// unpruned trees are grown on the whole group. Never applied to
    /// nonlinear problems.
    pub prune: bool,
    pub holdout_fraction: f64,
    /// Leaf sizes tried by [`MinLeaf::Auto`].
    pub cv_candidates: Vec<usize>,
    pub cv_folds: usize,
}

impl SolverConfig {
    pub const DEFAULT_GROUP: usize = 1000;

    /// `n_samples` split into groups of 1000 (or one group if fewer).
    pub fn new(n_samples: usize) -> Self {
        Self {
            n_samples,
            group_size: n_samples.min(Self::DEFAULT_GROUP),
            min_leaf: MinLeaf::Fixed(DEFAULT_MIN_LEAF),
            prune: false,
            holdout_fraction: 0.5,
            cv_candidates: vec![5, 10, 20, 50, 100, 200, 500],
            cv_folds: 5,
        }
    }

    pub fn with_group_size(mut self, g: usize) -> Self {
        self.group_size = g;
        self
    }

    pub fn with_min_leaf(mut self, min_leaf: MinLeaf) -> Self {
        self.min_leaf = min_leaf;
        self
    }

    pub fn with_pruning(mut self, holdout_fraction: f64) -> Self {
        self.prune = true;
        self.holdout_fraction = holdout_fraction;
        self
    }

    pub fn n_groups(&self) -> usize {
        self.n_samples / self.group_size
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 || self.group_size == 0 {
            return Err(FbsdeError::invalid("sample and group sizes must be positive"));
        }
        if self.group_size > self.n_samples {
            return Err(FbsdeError::invalid(format!(
                "group size {} exceeds the sample size {}",
                self.group_size, self.n_samples
            )));
        }
        if !self.n_samples.is_multiple_of(self.group_size) {
            return Err(FbsdeError::invalid(format!(
                "sample size {} is not a multiple of the group size {}; choose M = k * G",
                self.n_samples, self.group_size
            )));
        }
        if !(self.holdout_fraction > 0.0 && self.holdout_fraction < 1.0) {
            return Err(FbsdeError::invalid("holdout fraction must be in (0,1)"));
        }
        match self.min_leaf {
            MinLeaf::Fixed(0) => Err(FbsdeError::invalid("min_leaf must be positive")),
            MinLeaf::Auto if self.cv_candidates.is_empty() || self.cv_candidates.contains(&0) => {
                Err(FbsdeError::invalid("min_leaf candidates must be positive and non-empty"))
            }
            _ => Ok(()),
        }
    }
}

/// Per-step summary, averaged over groups.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics {
    pub step: usize,
    /// Mean leaf count of the `Y` trees.
    pub y_leaves: f64,
    /// Mean leaf count of the `Z` trees over groups and coordinates.
    pub z_leaves: f64,
    /// Largest Picard residual over groups, per iteration.
    pub picard_residuals: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub min_leaf: usize,
    pub pruned: bool,
    /// Indexed by time step, `0..N_T`.
    pub steps: Vec<StepDiagnostics>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult<T> {
    pub y0: T,
    pub z0: Vec<T>,
    pub diagnostics: Diagnostics,
}

fn check_grid<T: Real, P: Fbsde<T> + ?Sized>(problem: &P, grid: &TimeGrid<T>) -> Result<()> {
    let (a, b) = (grid.horizon().as_f64(), problem.horizon().as_f64());
    if (a - b).abs() > 1e-6 * b.abs().max(1.0) {
        return Err(FbsdeError::invalid(format!("grid ends at {a}, problem horizon is {b}")));
    }
    Ok(())
}

/// Simulates `config.n_samples` forward paths with `seed` and solves backward.
pub fn solve<T: Real, P: Fbsde<T> + ?Sized>(
    problem: &P,
    grid: &TimeGrid<T>,
    scheme: &SchemeParams,
    config: &SolverConfig,
    seed: u64,
) -> Result<SolveResult<T>> {
    scheme.validate()?;
    config.validate()?;
    check_grid(problem, grid)?;
    let ens = simulate_euler(problem, grid, config.n_samples, seed)?;
    solve_ensemble(problem, grid, &ens, scheme, config, seed)
}

/// Backward pass on a given ensemble; `seed` drives the tree randomness.
pub fn solve_ensemble<T: Real, P: Fbsde<T> + ?Sized>(
    problem: &P,
    grid: &TimeGrid<T>,
    ens: &PathEnsemble<T>,
    scheme: &SchemeParams,
    config: &SolverConfig,
    seed: u64,
) -> Result<SolveResult<T>> {
    scheme.validate()?;
    config.validate()?;
    if ens.n_samples() != config.n_samples || ens.n_steps() != grid.n_steps() {
        return Err(FbsdeError::invalid("ensemble does not match the grid and sample size"));
    }
    if ens.state_dim() != problem.state_dim() || ens.noise_dim() != problem.noise_dim() {
        return Err(FbsdeError::invalid("ensemble dimensions do not match the problem"));
    }
    let n_steps = grid.n_steps();
    let g = config.group_size;
    let n_groups = config.n_groups();
    let pruned = config.prune && !problem.is_nonlinear();
    let min_leaf = resolve_min_leaf(problem, grid, ens, scheme, config, seed)?;
    let policy = TreePolicy { min_leaf, holdout: pruned.then_some(config.holdout_fraction), seed };

    let per_group: Vec<(BackwardState<T>, Vec<StepRecord>)> = (0..n_groups)
        .into_par_iter()
        .map(|grp| {
            let rows = grp * g..(grp + 1) * g;
            let mut state = terminal_condition(problem, ens, rows.clone())?;
            let mut records = Vec::with_capacity(n_steps.saturating_sub(1));
            for i in (1..n_steps).rev() {
                let (s, rec) = backward_step(problem, &state, ens, grid, i, rows.clone(), grp, scheme, &policy)?;
                state = s;
                records.push(rec);
            }
            records.reverse();
            Ok((state, records))
        })
        .collect::<Result<_>>()?;

    let d = ens.noise_dim();
    let mut pooled = BackwardState {
        y: Vec::with_capacity(config.n_samples),
        z: Vec::with_capacity(config.n_samples * d),
        f: Vec::with_capacity(config.n_samples),
        noise_dim: d,
    };
    for (s, _) in &per_group {
        pooled.y.extend_from_slice(&s.y);
        pooled.z.extend_from_slice(&s.z);
        pooled.f.extend_from_slice(&s.f);
    }
    let (y0, z0, trace0) = pooled_first_step(problem, &pooled, ens, grid, scheme)?;

    let mut steps = vec![StepDiagnostics { step: 0, y_leaves: 1.0, z_leaves: 1.0, picard_residuals: trace0.residuals }];
    for i in 1..n_steps {
        let recs: Vec<&StepRecord> = per_group.iter().map(|(_, r)| &r[i - 1]).collect();
        let y_leaves = recs.iter().map(|r| r.y_leaves as f64).sum::<f64>() / n_groups as f64;
        let z_total: usize = recs.iter().flat_map(|r| &r.z_leaves).sum();
        let z_leaves = z_total as f64 / (n_groups * d) as f64;
        let iters = recs.iter().map(|r| r.picard.residuals.len()).max().unwrap_or(0);
        let picard_residuals = (0..iters)
            .map(|k| recs.iter().filter_map(|r| r.picard.residuals.get(k)).fold(0.0f64, |a, &b| a.max(b)))
            .collect();
        steps.push(StepDiagnostics { step: i, y_leaves, z_leaves, picard_residuals });
    }
    Ok(SolveResult { y0, z0, diagnostics: Diagnostics { min_leaf, pruned, steps } })
}

/// Fixed leaf size, or cross-validation on group 0's `Y` response at the
/// first backward step.
fn resolve_min_leaf<T: Real, P: Fbsde<T> + ?Sized>(
    problem: &P,
    grid: &TimeGrid<T>,
    ens: &PathEnsemble<T>,
    scheme: &SchemeParams,
    config: &SolverConfig,
    seed: u64,
) -> Result<usize> {
    let n_steps = grid.n_steps();
    match config.min_leaf {
        MinLeaf::Fixed(l) => Ok(l),
        MinLeaf::Auto if n_steps < 2 => Ok(DEFAULT_MIN_LEAF),
        MinLeaf::Auto => {
            let i = n_steps - 1;
            let rows = 0..config.group_size;
            let terminal = terminal_condition(problem, ens, rows.clone())?;
            let resp = step::y_responses(&terminal, grid.dt(i), scheme);
            let mut x = Vec::with_capacity(rows.len() * ens.state_dim());
            for m in rows {
                x.extend_from_slice(ens.state(m, i));
            }
            let folds = config.cv_folds.min(resp.len());
            let cv_seed = stream_rng(seed, cv_stream(i)).next_u64();
            best_min_leaf(&x, ens.state_dim(), &resp, &config.cv_candidates, folds, cv_seed)
        }
    }
}

/// Seeds for repeated runs: blocks of five runs alternate between two base
/// seeds, run `k` (from 0) gets `base + k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedSchedule {
    pub base_a: u64,
    pub base_b: u64,
    pub block: usize,
}

impl SeedSchedule {
    pub fn new(base_a: u64, base_b: u64) -> Self {
        Self { base_a, base_b, block: 5 }
    }

    pub fn seed(&self, run: usize) -> u64 {
        let base = if (run / self.block.max(1)).is_multiple_of(2) { self.base_a } else { self.base_b };
        base.wrapping_add(run as u64)
    }

    pub fn seeds(&self, n_runs: usize) -> Vec<u64> {
        (0..n_runs).map(|k| self.seed(k)).collect()
    }
}

impl Default for SeedSchedule {
    fn default() -> Self {
        Self::new(12345, 67890)
    }
}

/// Independent solves, one per seed.
pub fn solve_many<T: Real, P: Fbsde<T> + ?Sized>(
    problem: &P,
    grid: &TimeGrid<T>,
    scheme: &SchemeParams,
    config: &SolverConfig,
    seeds: &[u64],
) -> Result<Vec<SolveResult<T>>> {
    seeds.iter().map(|&s| solve(problem, grid, scheme, config, s)).collect()
}
