//! Forward path ensembles on a time grid.
//!
//! The ensemble stores the Euler-Maruyama discretisation of the forward
//! state together with the Brownian increments that produced it, since the
//! backward solver reuses both. Sampling is split into fixed-size chunks,
//! each drawing from its own random stream, so a parallel run is
//! bit-identical to a sequential one.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{FbsdeError, Result};
use crate::rng;
use crate::scalar::Real;

/// Samples per random stream.
const CHUNK: usize = 512;

/// Partition `0 = t_0 < t_1 < ... < t_N = T` of the time horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid<T> {
    points: Vec<T>,
    steps: Vec<T>,
}

impl<T: Real> TimeGrid<T> {
    /// Equidistant grid with `n_steps` steps of size `horizon / n_steps`.
    pub fn equidistant(horizon: T, n_steps: usize) -> Result<Self> {
        if !(horizon > T::zero()) || !horizon.is_finite() {
            return Err(FbsdeError::invalid(format!("horizon must be positive, got {horizon}")));
        }
        if n_steps == 0 {
            return Err(FbsdeError::invalid("number of time steps must be at least 1"));
        }
        let n = T::from_usize_lossy(n_steps);
        let dt = horizon / n;
        let mut points: Vec<T> = (0..=n_steps).map(|i| horizon * T::from_usize_lossy(i) / n).collect();
        points[n_steps] = horizon;
        Ok(Self { points, steps: vec![dt; n_steps] })
    }

    /// Grid from explicit, strictly increasing points starting at zero.
    pub fn from_points(points: Vec<T>) -> Result<Self> {
        if points.len() < 2 {
            return Err(FbsdeError::invalid("a grid needs at least two points"));
        }
        if points[0] != T::zero() {
            return Err(FbsdeError::invalid("grid must start at t = 0"));
        }
        if points.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
            return Err(FbsdeError::invalid("grid points must be finite and strictly increasing"));
        }
        let steps = points.windows(2).map(|w| w[1] - w[0]).collect();
        Ok(Self { points, steps })
    }

    pub fn n_steps(&self) -> usize {
        self.steps.len()
    }

    pub fn points(&self) -> &[T] {
        &self.points
    }

    pub fn steps(&self) -> &[T] {
        &self.steps
    }

    #[inline]
    pub fn t(&self, i: usize) -> T {
        self.points[i]
    }

    /// Step size `t_{i+1} - t_i`.
    #[inline]
    pub fn dt(&self, i: usize) -> T {
        self.steps[i]
    }

    pub fn horizon(&self) -> T {
        self.points[self.points.len() - 1]
    }
}

/// Forward dynamics `dX = a(t, X) dt + b(t, X) dW` with deterministic `X_0`.
pub trait ForwardSde<T: Real>: Send + Sync {
    /// Dimension `n` of the state.
    fn state_dim(&self) -> usize;

    /// Dimension `d` of the driving Brownian motion.
    fn noise_dim(&self) -> usize;

    fn initial_state(&self) -> Vec<T>;

    /// Writes `a(t, x)` into `out` (length `n`).
    fn drift(&self, t: T, x: &[T], out: &mut [T]);

    /// Writes `b(t, x)` into `out`, row-major `n x d`.
    fn diffusion(&self, t: T, x: &[T], out: &mut [T]);

    /// One Euler-Maruyama step. `scratch` is a reusable buffer owned by the caller.
    ///
    /// Problems with structured diffusion (diagonal, scalar) override this to
    /// avoid the dense `n x d` product.
    fn euler_step(&self, t: T, dt: T, x: &[T], dw: &[T], next: &mut [T], scratch: &mut Vec<T>) {
        let n = self.state_dim();
        let d = self.noise_dim();
        scratch.resize(n * d, T::zero());
        self.drift(t, x, next);
        self.diffusion(t, x, scratch);
        for k in 0..n {
            let row = &scratch[k * d..(k + 1) * d];
            let noise: T = row.iter().zip(dw).map(|(&b, &w)| b * w).sum();
            next[k] = x[k] + next[k] * dt + noise;
        }
    }
}

/// Standard `d`-dimensional Brownian motion started at the origin.
#[derive(Debug, Clone, Copy)]
pub struct BrownianMotion {
    pub dim: usize,
}

impl<T: Real> ForwardSde<T> for BrownianMotion {
    fn state_dim(&self) -> usize {
        self.dim
    }

    fn noise_dim(&self) -> usize {
        self.dim
    }

    fn initial_state(&self) -> Vec<T> {
        vec![T::zero(); self.dim]
    }

    fn drift(&self, _t: T, _x: &[T], out: &mut [T]) {
        out.fill(T::zero());
    }

    fn diffusion(&self, _t: T, _x: &[T], out: &mut [T]) {
        out.fill(T::zero());
        for k in 0..self.dim {
            out[k * self.dim + k] = T::one();
        }
    }

    fn euler_step(&self, _t: T, _dt: T, x: &[T], dw: &[T], next: &mut [T], _scratch: &mut Vec<T>) {
        for ((n, &x), &w) in next.iter_mut().zip(x).zip(dw) {
            *n = x + w;
        }
    }
}

/// `M` sampled forward paths and their Brownian increments.
///
/// Logical shapes are `x: [M][N+1][n]` and `dw: [M][N][d]`, stored
/// sample-major in flat vectors. `dw[m][i]` is the increment over
/// `[t_i, t_{i+1}]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble<T> {
    n_samples: usize,
    n_steps: usize,
    state_dim: usize,
    noise_dim: usize,
    x: Vec<T>,
    dw: Vec<T>,
    seed_record: Vec<u64>,
}

impl<T: Real> PathEnsemble<T> {
    /// Assembles an ensemble from raw sample-major buffers.
    pub fn from_raw(
        n_samples: usize,
        n_steps: usize,
        state_dim: usize,
        noise_dim: usize,
        x: Vec<T>,
        dw: Vec<T>,
    ) -> Result<Self> {
        if x.len() != n_samples * (n_steps + 1) * state_dim {
            return Err(FbsdeError::invalid("state buffer has the wrong length"));
        }
        if dw.len() != n_samples * n_steps * noise_dim {
            return Err(FbsdeError::invalid("increment buffer has the wrong length"));
        }
        Ok(Self { n_samples, n_steps, state_dim, noise_dim, x, dw, seed_record: Vec::new() })
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn noise_dim(&self) -> usize {
        self.noise_dim
    }

    pub fn seed_record(&self) -> &[u64] {
        &self.seed_record
    }

    /// State of sample `m` at grid index `i`.
    #[inline]
    pub fn state(&self, m: usize, i: usize) -> &[T] {
        let n = self.state_dim;
        let start = (m * (self.n_steps + 1) + i) * n;
        &self.x[start..start + n]
    }

    /// Increment of sample `m` over `[t_i, t_{i+1}]`.
    #[inline]
    pub fn increment(&self, m: usize, i: usize) -> &[T] {
        let d = self.noise_dim;
        let start = (m * self.n_steps + i) * d;
        &self.dw[start..start + d]
    }

    pub fn states_raw(&self) -> &[T] {
        &self.x
    }

    pub fn increments_raw(&self) -> &[T] {
        &self.dw
    }

    /// Consumes the ensemble, returning `(x, dw)`.
    pub fn into_raw(self) -> (Vec<T>, Vec<T>) {
        (self.x, self.dw)
    }
}

/// Simulates `n_samples` Euler-Maruyama paths of `sde` on `grid`.
pub fn simulate_euler<T: Real, S: ForwardSde<T> + ?Sized>(
    sde: &S,
    grid: &TimeGrid<T>,
    n_samples: usize,
    seed: u64,
) -> Result<PathEnsemble<T>> {
    if n_samples == 0 {
        return Err(FbsdeError::invalid("number of samples must be at least 1"));
    }
    let n = sde.state_dim();
    let d = sde.noise_dim();
    let x0 = sde.initial_state();
    if x0.len() != n {
        return Err(FbsdeError::invalid("initial state does not match the state dimension"));
    }
    let n_steps = grid.n_steps();
    let x_per_sample = (n_steps + 1) * n;
    let dw_per_sample = n_steps * d;
    let mut x = vec![T::zero(); n_samples * x_per_sample];
    let mut dw = vec![T::zero(); n_samples * dw_per_sample];
    let sqrt_dt: Vec<T> = grid.steps().iter().map(|h| h.sqrt()).collect();

    x.par_chunks_mut(CHUNK * x_per_sample).zip(dw.par_chunks_mut(CHUNK * dw_per_sample.max(1))).enumerate().for_each(
        |(chunk, (xs, ws))| {
            let mut rng = rng::stream_rng(seed, rng::path_stream(chunk));
            let mut scratch = Vec::new();
            let samples = xs.len() / x_per_sample;
            for s in 0..samples {
                let path = &mut xs[s * x_per_sample..(s + 1) * x_per_sample];
                let incs = &mut ws[s * dw_per_sample..(s + 1) * dw_per_sample];
                path[..n].copy_from_slice(&x0);
                for i in 0..n_steps {
                    let w = &mut incs[i * d..(i + 1) * d];
                    for wj in w.iter_mut() {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        *wj = T::lit(z) * sqrt_dt[i];
                    }
                    let (head, tail) = path.split_at_mut((i + 1) * n);
                    sde.euler_step(grid.t(i), grid.dt(i), &head[i * n..], w, &mut tail[..n], &mut scratch);
                }
            }
        },
    );

    Ok(PathEnsemble { n_samples, n_steps, state_dim: n, noise_dim: d, x, dw, seed_record: vec![seed] })
}

/// Brownian paths `X = W` in `dim` dimensions.
pub fn simulate_brownian<T: Real>(
    grid: &TimeGrid<T>,
    n_samples: usize,
    dim: usize,
    seed: u64,
) -> Result<PathEnsemble<T>> {
    if dim == 0 {
        return Err(FbsdeError::invalid("Brownian dimension must be at least 1"));
    }
    simulate_euler(&BrownianMotion { dim }, grid, n_samples, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Frozen;

    impl ForwardSde<f64> for Frozen {
        fn state_dim(&self) -> usize {
            1
        }
        fn noise_dim(&self) -> usize {
            1
        }
        fn initial_state(&self) -> Vec<f64> {
            vec![5.0]
        }
        fn drift(&self, _t: f64, _x: &[f64], out: &mut [f64]) {
            out[0] = 0.0;
        }
        fn diffusion(&self, _t: f64, _x: &[f64], out: &mut [f64]) {
            out[0] = 0.0;
        }
    }

    struct Gbm {
        mu: f64,
        sigma: f64,
        s0: f64,
    }

    impl ForwardSde<f64> for Gbm {
        fn state_dim(&self) -> usize {
            1
        }
        fn noise_dim(&self) -> usize {
            1
        }
        fn initial_state(&self) -> Vec<f64> {
            vec![self.s0]
        }
        fn drift(&self, _t: f64, x: &[f64], out: &mut [f64]) {
            out[0] = self.mu * x[0];
        }
        fn diffusion(&self, _t: f64, x: &[f64], out: &mut [f64]) {
            out[0] = self.sigma * x[0];
        }
    }

    fn mean_var(v: &[f64]) -> (f64, f64) {
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, var)
    }

    #[test]
    fn equidistant_grids() {
        let g = TimeGrid::equidistant(0.5, 2).unwrap();
        assert_eq!(g.points(), &[0.0, 0.25, 0.5]);

        let g = TimeGrid::equidistant(0.5, 32).unwrap();
        assert_eq!(g.points().len(), 33);
        assert!(g.steps().iter().all(|&h| h == 0.015625));
        assert_eq!(g.horizon(), 0.5);

        let g = TimeGrid::equidistant(1.0, 1).unwrap();
        assert_eq!(g.points(), &[0.0, 1.0]);
    }

    #[test]
    fn grid_rejects_bad_arguments() {
        assert!(TimeGrid::equidistant(0.0, 4).is_err());
        assert!(TimeGrid::equidistant(-1.0, 4).is_err());
        assert!(TimeGrid::equidistant(1.0, 0).is_err());
        assert!(TimeGrid::from_points(vec![0.0, 0.5, 0.5]).is_err());
        assert!(TimeGrid::from_points(vec![0.1, 0.5]).is_err());
        let g = TimeGrid::from_points(vec![0.0f64, 0.1, 0.5]).unwrap();
        assert!((g.dt(1) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn frozen_dynamics_stay_put() {
        let grid = TimeGrid::equidistant(1.0, 4).unwrap();
        let ens = simulate_euler(&Frozen, &grid, 50, 3).unwrap();
        for m in 0..50 {
            for i in 0..=4 {
                assert_eq!(ens.state(m, i), &[5.0]);
            }
        }
    }

    #[test]
    fn brownian_paths_telescope() {
        let grid = TimeGrid::equidistant(1.0, 6).unwrap();
        let ens = simulate_brownian(&grid, 200, 1, 11).unwrap();
        for m in 0..200 {
            assert_eq!(ens.state(m, 0), &[0.0]);
            let sum: f64 = (0..6).map(|i| ens.increment(m, i)[0]).sum();
            assert!((ens.state(m, 6)[0] - sum).abs() < 1e-12);
        }
    }

    #[test]
    fn brownian_terminal_moments() {
        let grid = TimeGrid::equidistant(1.0, 1).unwrap();
        let m = 100_000;
        let ens = simulate_brownian(&grid, m, 1, 5).unwrap();
        let terminal: Vec<f64> = (0..m).map(|k| ens.state(k, 1)[0]).collect();
        let (mean, var) = mean_var(&terminal);
        assert!(mean.abs() < 3.0 / (m as f64).sqrt(), "mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "var {var}");
    }

    #[test]
    fn gbm_mean_matches_closed_form() {
        let grid = TimeGrid::equidistant(0.5, 8).unwrap();
        let m = 100_000;
        let gbm = Gbm { mu: 0.06, sigma: 0.02, s0: 100.0 };
        let ens = simulate_euler(&gbm, &grid, m, 42).unwrap();
        let terminal: Vec<f64> = (0..m).map(|k| ens.state(k, 8)[0]).collect();
        let (mean, var) = mean_var(&terminal);
        let se = (var / m as f64).sqrt();
        // The Euler mean (1 + mu dt)^N S0 sits about one standard error below.
        let exact = 100.0 * 0.03f64.exp();
        assert!((mean - exact).abs() < 3.0 * se, "mean {mean} vs {exact}, se {se}");
    }

    #[test]
    fn identical_seeds_reproduce() {
        let grid = TimeGrid::equidistant(0.5, 5).unwrap();
        let a = simulate_brownian(&grid, 3000, 2, 99).unwrap();
        let b = simulate_brownian(&grid, 3000, 2, 99).unwrap();
        let c = simulate_brownian(&grid, 3000, 2, 100).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.increments_raw(), c.increments_raw());
        assert_eq!(a.seed_record(), &[99]);
    }

    #[test]
    fn parallel_schedule_matches_sequential() {
        let grid = TimeGrid::equidistant(0.5, 4).unwrap();
        let parallel = simulate_brownian::<f64>(&grid, 5000, 1, 8).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let sequential = pool.install(|| simulate_brownian::<f64>(&grid, 5000, 1, 8).unwrap());
        assert_eq!(parallel, sequential);
    }

    #[test]
    fn increments_are_uncorrelated_across_samples() {
        let grid = TimeGrid::equidistant(1.0, 2).unwrap();
        let m = 100_000;
        let ens = simulate_brownian::<f64>(&grid, m, 1, 17).unwrap();
        // Pair sample 2k with 2k+1: their increments should be uncorrelated.
        let a: Vec<f64> = (0..m / 2).map(|k| ens.increment(2 * k, 0)[0]).collect();
        let b: Vec<f64> = (0..m / 2).map(|k| ens.increment(2 * k + 1, 0)[0]).collect();
        let (ma, va) = mean_var(&a);
        let (mb, vb) = mean_var(&b);
        let cov = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (a.len() as f64 - 1.0);
        let corr = cov / (va * vb).sqrt();
        assert!(corr.abs() < 4.0 / (m as f64).sqrt(), "corr {corr}");
    }

    #[test]
    fn brownian_mean_is_constant_in_time() {
        let grid = TimeGrid::equidistant(1.0, 10).unwrap();
        let m = 50_000;
        let ens = simulate_brownian::<f64>(&grid, m, 1, 23).unwrap();
        for i in 1..=10 {
            let v: Vec<f64> = (0..m).map(|k| ens.state(k, i)[0]).collect();
            let (mean, var) = mean_var(&v);
            assert!(mean.abs() < 4.0 * (var / m as f64).sqrt(), "step {i}: mean {mean}");
        }
    }

    #[test]
    fn single_precision_paths() {
        let grid = TimeGrid::<f32>::equidistant(1.0, 4).unwrap();
        let ens = simulate_brownian(&grid, 100, 3, 1).unwrap();
        assert_eq!(ens.state(7, 0), &[0.0f32; 3]);
        assert!(ens.increments_raw().iter().all(|w| w.is_finite()));
    }

    #[test]
    fn raw_constructor_checks_shapes() {
        assert!(PathEnsemble::<f64>::from_raw(2, 1, 1, 1, vec![0.0; 4], vec![0.0; 2]).is_ok());
        assert!(PathEnsemble::<f64>::from_raw(2, 1, 1, 1, vec![0.0; 3], vec![0.0; 2]).is_err());
        assert!(simulate_brownian::<f64>(&TimeGrid::equidistant(1.0, 1).unwrap(), 0, 1, 0).is_err());
    }
}
