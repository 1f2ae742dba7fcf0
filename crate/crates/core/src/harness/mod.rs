//! Repeated-run experiments: error statistics, convergence rates, tables.

mod table;
mod verify;

use std::time::Instant;

pub use table::{emit_table, format_sci, TableFormat};
pub use verify::{fast_checks, CheckOutcome};

use crate::error::{FbsdeError, Result};
use crate::paths::TimeGrid;
use crate::problems::{Fbsde, ProblemKind};
use crate::solver::{solve, MinLeaf, SchemeParams, SeedSchedule, SolverConfig};

/// How a run's deviation from the reference is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorMode {
    Absolute,
    Relative,
}

/// One `(N_T, M)` table cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cell {
    pub n_steps: usize,
    pub n_samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub problem: ProblemKind,
    pub sigma: Option<f64>,
    pub scheme: SchemeParams,
    pub cells: Vec<Cell>,
    /// Group size; cells with fewer samples run as a single group.
    pub group_size: usize,
    pub min_leaf: MinLeaf,
    pub prune: bool,
    pub holdout_fraction: f64,
    pub n_runs: usize,
    pub seeds: SeedSchedule,
    pub error_mode: ErrorMode,
    /// Overrides the catalog reference for `Y_0`.
    pub reference_y0: Option<f64>,
}

impl ExperimentSpec {
    /// Defaults: scheme `(1/2, 1, 1/2)`, `G = 1000`, `min_leaf = 5`, ten runs,
    /// relative errors unless the reference is zero.
    pub fn new(problem: ProblemKind, cells: Vec<Cell>) -> Self {
        Self {
            problem,
            sigma: None,
            scheme: SchemeParams::default(),
            cells,
            group_size: SolverConfig::DEFAULT_GROUP,
            min_leaf: MinLeaf::Fixed(crate::cart::DEFAULT_MIN_LEAF),
            prune: false,
            holdout_fraction: 0.5,
            n_runs: 10,
            seeds: SeedSchedule::default(),
            error_mode: if problem == ProblemKind::Oscillatory { ErrorMode::Absolute } else { ErrorMode::Relative },
            reference_y0: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.cells.is_empty() {
            return Err(FbsdeError::invalid("at least one (N_T, M) cell is required"));
        }
        if self.n_runs == 0 {
            return Err(FbsdeError::invalid("runs must be at least 1"));
        }
        self.scheme.validate()?;
        for cell in &self.cells {
            if cell.n_steps == 0 {
                return Err(FbsdeError::invalid("N_T must be at least 1"));
            }
            self.solver_config(cell).validate()?;
        }
        Ok(())
    }

    pub fn solver_config(&self, cell: &Cell) -> SolverConfig {
        let mut cfg = SolverConfig::new(cell.n_samples)
            .with_group_size(self.group_size.min(cell.n_samples))
            .with_min_leaf(self.min_leaf.clone());
        cfg.prune = self.prune;
        cfg.holdout_fraction = self.holdout_fraction;
        cfg
    }
}

/// `Y_0` and `Z_0` of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub y0: f64,
    pub z0: Vec<f64>,
}

/// Anything that produces one run of a cell; the default solves the FBSDE.
pub trait CellSolver {
    fn run(&self, cell: &Cell, seed: u64) -> Result<RunOutput>;
}

/// Reference solution used to score runs.
#[derive(Debug, Clone, PartialEq)]
pub struct Reference {
    pub y0: f64,
    pub z0: Option<Vec<f64>>,
}

/// Solves a catalog problem in double precision.
pub struct TreeSolver {
    problem: Box<dyn Fbsde<f64>>,
    spec: ExperimentSpec,
}

impl TreeSolver {
    pub fn new(spec: &ExperimentSpec) -> Result<Self> {
        Ok(Self { problem: spec.problem.build::<f64>(spec.sigma)?, spec: spec.clone() })
    }

    /// Reference from the spec override or the catalog.
    pub fn reference(&self) -> Result<Reference> {
        let y0 = match self.spec.reference_y0 {
            Some(v) => v,
            None => self.problem.reference_y0().map(|r| r.value).ok_or_else(|| {
                FbsdeError::invalid(format!("no reference value for {}; set `reference`", self.problem.name()))
            })?,
        };
        let z0 = if self.spec.reference_y0.is_some() { None } else { self.problem.exact_z0() };
        Ok(Reference { y0, z0 })
    }
}

impl CellSolver for TreeSolver {
    fn run(&self, cell: &Cell, seed: u64) -> Result<RunOutput> {
        let grid = TimeGrid::equidistant(self.problem.horizon(), cell.n_steps)?;
        let res = solve(self.problem.as_ref(), &grid, &self.spec.scheme, &self.spec.solver_config(cell), seed)?;
        Ok(RunOutput { y0: res.y0, z0: res.z0 })
    }
}

/// Statistics of one cell over all runs.
#[derive(Debug, Clone, PartialEq)]
pub struct CellStats {
    pub cell: Cell,
    pub mean_err_y: f64,
    pub std_y: f64,
    pub mean_err_z: Option<f64>,
    pub std_z: Option<f64>,
    pub mean_runtime_s: f64,
    pub mean_y0: f64,
    /// Set when a run failed; the statistics are then NaN.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentStats {
    pub cells: Vec<CellStats>,
    pub convergence_rate_y: Option<f64>,
    pub convergence_rate_z: Option<f64>,
}

impl ExperimentStats {
    pub fn any_failed(&self) -> bool {
        self.cells.iter().any(|c| c.failure.is_some())
    }
}

/// Runs the spec with the tree solver against the catalog reference.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentStats> {
    spec.validate()?;
    let solver = TreeSolver::new(spec)?;
    let reference = solver.reference()?;
    run_experiment_with(spec, &solver, &reference)
}

/// Runs every cell `spec.n_runs` times with `solver`. A failing run marks
/// its cell as failed without stopping the other cells.
pub fn run_experiment_with(
    spec: &ExperimentSpec,
    solver: &dyn CellSolver,
    reference: &Reference,
) -> Result<ExperimentStats> {
    if spec.cells.is_empty() || spec.n_runs == 0 {
        return Err(FbsdeError::invalid("experiment needs cells and at least one run"));
    }
    if spec.error_mode == ErrorMode::Relative && reference.y0 == 0.0 {
        return Err(FbsdeError::invalid("relative errors need a non-zero reference"));
    }
    let seeds = spec.seeds.seeds(spec.n_runs);
    let cells: Vec<CellStats> = spec
        .cells
        .iter()
        .map(|cell| {
            let mut outputs = Vec::with_capacity(seeds.len());
            let mut seconds = 0.0;
            for &seed in &seeds {
                let start = Instant::now();
                match solver.run(cell, seed) {
                    Ok(out) => outputs.push(out),
                    Err(e) => return failed_cell(*cell, e.to_string()),
                }
                seconds += start.elapsed().as_secs_f64();
            }
            let mut stats = cell_stats(*cell, &outputs, reference, spec.error_mode);
            stats.mean_runtime_s = seconds / seeds.len() as f64;
            stats
        })
        .collect();

    let rate = |pick: fn(&CellStats) -> Option<f64>| {
        let points: Vec<(usize, f64)> = cells
            .iter()
            .filter_map(|c| pick(c).map(|e| (c.cell.n_steps, e)))
            .filter(|&(_, e)| e > 0.0 && e.is_finite())
            .collect();
        convergence_rate(&points).ok()
    };
    let convergence_rate_y = rate(|c| Some(c.mean_err_y));
    let convergence_rate_z = rate(|c| c.mean_err_z);
    Ok(ExperimentStats { cells, convergence_rate_y, convergence_rate_z })
}

fn failed_cell(cell: Cell, reason: String) -> CellStats {
    CellStats {
        cell,
        mean_err_y: f64::NAN,
        std_y: f64::NAN,
        mean_err_z: None,
        std_z: None,
        mean_runtime_s: f64::NAN,
        mean_y0: f64::NAN,
        failure: Some(reason),
    }
}

/// Mean error and sample standard deviation of the raw values over runs.
pub fn cell_stats(cell: Cell, runs: &[RunOutput], reference: &Reference, mode: ErrorMode) -> CellStats {
    let scale = |r: f64| match mode {
        ErrorMode::Absolute => 1.0,
        ErrorMode::Relative => r.abs(),
    };
    let ys: Vec<f64> = runs.iter().map(|r| r.y0).collect();
    let mean_err_y =
        runs.iter().map(|r| (r.y0 - reference.y0).abs()).sum::<f64>() / runs.len() as f64 / scale(reference.y0);

    let (mean_err_z, std_z) = match &reference.z0 {
        Some(z_ref) if runs.iter().all(|r| r.z0.len() == z_ref.len()) => {
            let ref_norm = norm(z_ref);
            let errs = runs.iter().map(|r| norm_diff(&r.z0, z_ref)).sum::<f64>() / runs.len() as f64;
            let err = if mode == ErrorMode::Relative && ref_norm > 0.0 { errs / ref_norm } else { errs };
            let d = z_ref.len();
            let var: f64 = (0..d).map(|j| sample_std(&runs.iter().map(|r| r.z0[j]).collect::<Vec<_>>()).powi(2)).sum();
            (Some(err), Some(var.sqrt()))
        }
        _ => (None, None),
    };
    CellStats {
        cell,
        mean_err_y,
        std_y: sample_std(&ys),
        mean_err_z,
        std_z,
        mean_runtime_s: 0.0,
        mean_y0: ys.iter().sum::<f64>() / ys.len() as f64,
        failure: None,
    }
}

/// Standard deviation with the `1/(n-1)` normalisation; 0 for one value.
/// Deviations are taken from the first value, so equal inputs give exactly 0.
pub fn sample_std(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let shifted: Vec<f64> = v.iter().map(|x| x - v[0]).collect();
    let mean = shifted.iter().sum::<f64>() / v.len() as f64;
    (shifted.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Negated least-squares slope of `log2(err)` against `log2(N_T)`.
pub fn convergence_rate(points: &[(usize, f64)]) -> Result<f64> {
    if points.len() < 2 {
        return Err(FbsdeError::invalid("convergence rate needs at least two cells"));
    }
    if points.iter().any(|&(n, e)| n == 0 || !(e > 0.0) || !e.is_finite()) {
        return Err(FbsdeError::invalid("convergence rate needs positive steps and errors"));
    }
    let xs: Vec<f64> = points.iter().map(|&(n, _)| (n as f64).log2()).collect();
    let ys: Vec<f64> = points.iter().map(|&(_, e)| e.log2()).collect();
    let k = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / k, ys.iter().sum::<f64>() / k);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(FbsdeError::invalid("convergence rate needs at least two distinct N_T"));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(-sxy / sxx)
}
