use super::{Fbsde, ReferenceValue};
use crate::paths::ForwardSde;
use crate::scalar::Real;

/// BSDE on a scalar Brownian motion with the oscillating solution
/// `Y_t = sin(W_t + t/2)`, `Z_t = cos(W_t + t/2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OscillatoryBsde {
    pub horizon: f64,
}

impl OscillatoryBsde {
    pub fn new() -> Self {
        Self { horizon: 0.5 }
    }
}

impl Default for OscillatoryBsde {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> ForwardSde<T> for OscillatoryBsde {
    fn state_dim(&self) -> usize {
        1
    }

    fn noise_dim(&self) -> usize {
        1
    }

    fn initial_state(&self) -> Vec<T> {
        vec![T::zero()]
    }

    fn drift(&self, _t: T, _x: &[T], out: &mut [T]) {
        out[0] = T::zero();
    }

    fn diffusion(&self, _t: T, _x: &[T], out: &mut [T]) {
        out[0] = T::one();
    }

    fn euler_step(&self, _t: T, _dt: T, x: &[T], dw: &[T], next: &mut [T], _scratch: &mut Vec<T>) {
        next[0] = x[0] + dw[0];
    }
}

impl<T: Real> Fbsde<T> for OscillatoryBsde {
    fn name(&self) -> String {
        "oscillatory".into()
    }

    fn horizon(&self) -> T {
        T::lit(self.horizon)
    }

    fn driver(&self, _t: T, _x: &[T], y: T, z: &[T]) -> T {
        (y - z[0]) / T::lit(2.0)
    }

    fn terminal(&self, x: &[T]) -> T {
        (x[0] + T::lit(self.horizon / 2.0)).sin()
    }

    fn terminal_z(&self, x: &[T], out: &mut [T]) {
        out[0] = (x[0] + T::lit(self.horizon / 2.0)).cos();
    }

    fn reference_y0(&self) -> Option<ReferenceValue> {
        Some(ReferenceValue::closed_form(0.0))
    }

    fn exact_z0(&self) -> Option<Vec<f64>> {
        Some(vec![1.0])
    }

    fn lipschitz(&self) -> Option<f64> {
        Some(0.5)
    }
}
