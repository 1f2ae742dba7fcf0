use super::gbm::{delegate_gbm, IidGbm};
use super::{argmax, bs_closed_form, Fbsde, ReferenceValue};
use crate::error::{FbsdeError, Result};
use crate::scalar::Real;

/// Call on the maximum of `D` iid geometric Brownian motions.
#[derive(Debug, Clone, PartialEq)]
pub struct RainbowMaxCall {
    gbm: IidGbm,
    pub strike: f64,
    pub rate: f64,
    pub horizon: f64,
}

impl RainbowMaxCall {
    pub fn new(dim: usize, sigma: f64) -> Result<Self> {
        if dim == 0 {
            return Err(FbsdeError::invalid("rainbow dimension must be at least 1"));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(FbsdeError::invalid(format!("sigma must be positive, got {sigma}")));
        }
        Ok(Self { gbm: IidGbm { dim, s0: 100.0, mu: 0.06, sigma }, strike: 100.0, rate: 0.04, horizon: 0.1 })
    }

    pub fn dim(&self) -> usize {
        self.gbm.dim
    }

    pub fn sigma(&self) -> f64 {
        self.gbm.sigma
    }

    fn risk_premium(&self) -> f64 {
        (self.gbm.mu - self.rate) / self.gbm.sigma
    }

    fn closed_form_1d(&self) -> Option<(f64, f64)> {
        (self.gbm.dim == 1).then(|| {
            bs_closed_form(self.gbm.s0, self.strike, self.rate, 0.0, self.gbm.sigma, self.horizon)
                .expect("valid parameters")
        })
    }
}

delegate_gbm!(RainbowMaxCall);

impl<T: Real> Fbsde<T> for RainbowMaxCall {
    fn name(&self) -> String {
        format!("rainbow:{}", self.gbm.dim)
    }

    fn horizon(&self) -> T {
        T::lit(self.horizon)
    }

    fn driver(&self, _t: T, _x: &[T], y: T, z: &[T]) -> T {
        let sum: T = z.iter().copied().sum();
        -T::lit(self.rate) * y - T::lit(self.risk_premium()) * sum
    }

    fn terminal(&self, x: &[T]) -> T {
        (argmax(x).1 - T::lit(self.strike)).max(T::zero())
    }

    fn terminal_z(&self, x: &[T], out: &mut [T]) {
        out.fill(T::zero());
        let (j, top) = argmax(x);
        if top > T::lit(self.strike) {
            out[j] = T::lit(self.gbm.sigma) * top;
        }
    }

    /// Closed form for `D = 1`; externally computed prices for `D = 10`
    /// and `D = 100` at `sigma = 0.2`.
    fn reference_y0(&self) -> Option<ReferenceValue> {
        if let Some((price, _)) = self.closed_form_1d() {
            return Some(ReferenceValue::closed_form(price));
        }
        if (self.gbm.sigma - 0.2).abs() > 1e-12 {
            return None;
        }
        match self.gbm.dim {
            10 => Some(ReferenceValue::tabulated(10.4689, "multilevel Picard, D=10")),
            100 => Some(ReferenceValue::tabulated(17.4267, "multilevel Picard, D=100")),
            _ => None,
        }
    }

    fn exact_z0(&self) -> Option<Vec<f64>> {
        self.closed_form_1d().map(|(_, delta)| vec![self.gbm.sigma * self.gbm.s0 * delta])
    }

    fn lipschitz(&self) -> Option<f64> {
        Some(self.rate.abs().max(self.risk_premium().abs() * (self.gbm.dim as f64).sqrt()))
    }
}
