use super::{Fbsde, ReferenceValue};
use crate::paths::ForwardSde;
use crate::scalar::Real;

/// Variance floor inside the driver, where `1 / sqrt(nu)` appears.
const NU_FLOOR: f64 = 1e-8;

/// European call in the Heston model with state `(nu, S)` driven by two
/// independent Brownian motions. The variance uses full truncation: its
/// positive part enters both drift and diffusion.
#[derive(Debug, Clone, PartialEq)]
pub struct HestonCall {
    pub s0: f64,
    pub strike: f64,
    pub rate: f64,
    pub mu: f64,
    /// Market price of volatility risk.
    pub lambda: f64,
    pub horizon: f64,
    pub nu0: f64,
    pub nu_mean: f64,
    pub kappa: f64,
    pub sigma_nu: f64,
    pub rho: f64,
}

impl HestonCall {
    pub fn new() -> Self {
        Self {
            s0: 50.0,
            strike: 50.0,
            rate: 0.03,
            mu: 0.05,
            lambda: 0.0,
            horizon: 0.5,
            nu0: 0.04,
            nu_mean: 0.04,
            kappa: 1.9,
            sigma_nu: 0.1,
            rho: -0.7,
        }
    }

    fn rho_bar(&self) -> f64 {
        (1.0 - self.rho * self.rho).sqrt()
    }
}

impl Default for HestonCall {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> ForwardSde<T> for HestonCall {
    fn state_dim(&self) -> usize {
        2
    }

    fn noise_dim(&self) -> usize {
        2
    }

    fn initial_state(&self) -> Vec<T> {
        vec![T::lit(self.nu0), T::lit(self.s0)]
    }

    fn drift(&self, _t: T, x: &[T], out: &mut [T]) {
        let nu = x[0].max(T::zero());
        out[0] = T::lit(self.kappa) * (T::lit(self.nu_mean) - nu);
        out[1] = T::lit(self.mu) * x[1];
    }

    fn diffusion(&self, _t: T, x: &[T], out: &mut [T]) {
        let vol = x[0].max(T::zero()).sqrt();
        out[0] = T::lit(self.sigma_nu) * vol;
        out[1] = T::zero();
        out[2] = x[1] * T::lit(self.rho) * vol;
        out[3] = x[1] * T::lit(self.rho_bar()) * vol;
    }
}

impl<T: Real> Fbsde<T> for HestonCall {
    fn name(&self) -> String {
        "heston".into()
    }

    fn horizon(&self) -> T {
        T::lit(self.horizon)
    }

    fn driver(&self, _t: T, x: &[T], y: T, z: &[T]) -> T {
        let vol = x[0].max(T::lit(NU_FLOOR)).sqrt();
        let (lambda, sigma_nu, rho_bar) = (T::lit(self.lambda), T::lit(self.sigma_nu), T::lit(self.rho_bar()));
        let z1_coef = -lambda * vol / sigma_nu;
        let z2_coef =
            T::lit(self.rho) * lambda * vol / (rho_bar * sigma_nu) - T::lit(self.mu - self.rate) / (rho_bar * vol);
        z1_coef * z[0] + z2_coef * z[1] - T::lit(self.rate) * y
    }

    fn terminal(&self, x: &[T]) -> T {
        (x[1] - T::lit(self.strike)).max(T::zero())
    }

    fn terminal_z(&self, x: &[T], out: &mut [T]) {
        if x[1] > T::lit(self.strike) {
            let vol = x[0].max(T::zero()).sqrt();
            out[0] = x[1] * T::lit(self.rho) * vol;
            out[1] = x[1] * T::lit(self.rho_bar()) * vol;
        } else {
            out[0] = T::zero();
            out[1] = T::zero();
        }
    }

    fn reference_y0(&self) -> Option<ReferenceValue> {
        Some(ReferenceValue::tabulated(3.1825, "semi-analytic Heston price"))
    }
}
