use super::gbm::{delegate_gbm, IidGbm};
use super::{bs_closed_form, Fbsde, ReferenceValue};
use crate::scalar::Real;

/// European call under geometric Brownian motion with a dividend yield,
/// priced through its replication BSDE.
#[derive(Debug, Clone, PartialEq)]
pub struct BlackScholesCall {
    gbm: IidGbm,
    pub strike: f64,
    pub rate: f64,
    pub dividend: f64,
    pub horizon: f64,
}

impl BlackScholesCall {
    pub fn new() -> Self {
        Self {
            gbm: IidGbm { dim: 1, s0: 100.0, mu: 0.05, sigma: 0.2 },
            strike: 100.0,
            rate: 0.03,
            dividend: 0.04,
            horizon: 0.33,
        }
    }

    pub fn spot(&self) -> f64 {
        self.gbm.s0
    }

    pub fn sigma(&self) -> f64 {
        self.gbm.sigma
    }

    /// Market price of risk `(mu - r + d) / sigma`.
    fn risk_premium(&self) -> f64 {
        (self.gbm.mu - self.rate + self.dividend) / self.gbm.sigma
    }

    fn closed_form(&self) -> (f64, f64) {
        bs_closed_form(self.gbm.s0, self.strike, self.rate, self.dividend, self.gbm.sigma, self.horizon)
            .expect("valid built-in parameters")
    }
}

impl Default for BlackScholesCall {
    fn default() -> Self {
        Self::new()
    }
}

delegate_gbm!(BlackScholesCall);

impl<T: Real> Fbsde<T> for BlackScholesCall {
    fn name(&self) -> String {
        "black-scholes".into()
    }

    fn horizon(&self) -> T {
        T::lit(self.horizon)
    }

    fn driver(&self, _t: T, _x: &[T], y: T, z: &[T]) -> T {
        -T::lit(self.rate) * y - T::lit(self.risk_premium()) * z[0]
    }

    fn terminal(&self, x: &[T]) -> T {
        (x[0] - T::lit(self.strike)).max(T::zero())
    }

    fn terminal_z(&self, x: &[T], out: &mut [T]) {
        out[0] = if x[0] > T::lit(self.strike) { T::lit(self.gbm.sigma) * x[0] } else { T::zero() };
    }

    fn reference_y0(&self) -> Option<ReferenceValue> {
        Some(ReferenceValue::closed_form(self.closed_form().0))
    }

    fn exact_z0(&self) -> Option<Vec<f64>> {
        let (_, delta) = self.closed_form();
        Some(vec![self.gbm.sigma * self.gbm.s0 * delta])
    }

    fn lipschitz(&self) -> Option<f64> {
        Some(self.rate.abs().max(self.risk_premium().abs()))
    }
}
