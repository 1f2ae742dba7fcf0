use super::gbm::{delegate_gbm, IidGbm};
use super::{argmax, Fbsde, ReferenceValue};
use crate::error::{FbsdeError, Result};
use crate::scalar::Real;

/// European payoff hedged with a borrowing rate above the lending rate,
/// which makes the driver nonlinear.
///
/// `D = 1` prices a call struck at 100; larger `D` price the call spread
/// `(max S - K1)^+ - 2 (max S - K2)^+`.
#[derive(Debug, Clone, PartialEq)]
pub struct DifferentRatesCall {
    gbm: IidGbm,
    pub rate_lend: f64,
    pub rate_borrow: f64,
    pub horizon: f64,
    pub strike: f64,
    /// Upper strike of the spread, unused for `D = 1`.
    pub strike_upper: f64,
}

impl DifferentRatesCall {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(FbsdeError::invalid("dimension must be at least 1"));
        }
        let (strike, strike_upper) = if dim == 1 { (100.0, f64::INFINITY) } else { (120.0, 150.0) };
        Ok(Self {
            gbm: IidGbm { dim, s0: 100.0, mu: 0.06, sigma: 0.2 },
            rate_lend: 0.04,
            rate_borrow: 0.06,
            horizon: 0.5,
            strike,
            strike_upper,
        })
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.gbm.sigma = sigma;
        self
    }

    pub fn dim(&self) -> usize {
        self.gbm.dim
    }

    pub fn sigma(&self) -> f64 {
        self.gbm.sigma
    }
}

delegate_gbm!(DifferentRatesCall);

impl<T: Real> Fbsde<T> for DifferentRatesCall {
    fn name(&self) -> String {
        format!("rates:{}", self.gbm.dim)
    }

    fn horizon(&self) -> T {
        T::lit(self.horizon)
    }

    fn driver(&self, _t: T, _x: &[T], y: T, z: &[T]) -> T {
        let sigma = T::lit(self.gbm.sigma);
        let (rl, rb) = (T::lit(self.rate_lend), T::lit(self.rate_borrow));
        let scaled: T = z.iter().copied().sum::<T>() / sigma;
        -rl * y - (T::lit(self.gbm.mu) - rl) * scaled + (rb - rl) * (scaled - y).max(T::zero())
    }

    fn terminal(&self, x: &[T]) -> T {
        let top = argmax(x).1;
        let call = (top - T::lit(self.strike)).max(T::zero());
        if self.gbm.dim == 1 {
            call
        } else {
            call - T::lit(2.0) * (top - T::lit(self.strike_upper)).max(T::zero())
        }
    }

    fn terminal_z(&self, x: &[T], out: &mut [T]) {
        out.fill(T::zero());
        let (j, top) = argmax(x);
        let mut slope = 0.0;
        if top > T::lit(self.strike) {
            slope += 1.0;
        }
        if self.gbm.dim > 1 && top > T::lit(self.strike_upper) {
            slope -= 2.0;
        }
        out[j] = T::lit(slope * self.gbm.sigma) * top;
    }

    /// Finite-difference price for `D = 1`, multilevel Picard for `D = 100`;
    /// both at `sigma = 0.2`.
    fn reference_y0(&self) -> Option<ReferenceValue> {
        if (self.gbm.sigma - 0.2).abs() > 1e-12 {
            return None;
        }
        match self.gbm.dim {
            1 => Some(ReferenceValue::tabulated(7.156, "finite differences, D=1")),
            100 => Some(ReferenceValue::tabulated(21.2988, "multilevel Picard, D=100")),
            _ => None,
        }
    }

    fn is_nonlinear(&self) -> bool {
        true
    }

    fn lipschitz(&self) -> Option<f64> {
        let spread = self.rate_borrow - self.rate_lend;
        let z_coef = ((self.gbm.mu - self.rate_lend).abs() + spread.abs()) / self.gbm.sigma;
        Some((self.rate_lend.abs() + spread.abs()).max(z_coef * (self.gbm.dim as f64).sqrt()))
    }
}
