use crate::paths::ForwardSde;
use crate::scalar::Real;

/// `dim` independent geometric Brownian motions with common parameters.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct IidGbm {
    pub dim: usize,
    pub s0: f64,
    pub mu: f64,
    pub sigma: f64,
}

impl<T: Real> ForwardSde<T> for IidGbm {
    fn state_dim(&self) -> usize {
        self.dim
    }

    fn noise_dim(&self) -> usize {
        self.dim
    }

    fn initial_state(&self) -> Vec<T> {
        vec![T::lit(self.s0); self.dim]
    }

    fn drift(&self, _t: T, x: &[T], out: &mut [T]) {
        let mu = T::lit(self.mu);
        for (o, &s) in out.iter_mut().zip(x) {
            *o = mu * s;
        }
    }

    fn diffusion(&self, _t: T, x: &[T], out: &mut [T]) {
        out.fill(T::zero());
        let sigma = T::lit(self.sigma);
        for (k, &s) in x.iter().enumerate() {
            out[k * self.dim + k] = sigma * s;
        }
    }

    fn euler_step(&self, _t: T, dt: T, x: &[T], dw: &[T], next: &mut [T], _scratch: &mut Vec<T>) {
        let (mu_dt, sigma) = (T::lit(self.mu) * dt, T::lit(self.sigma));
        for ((n, &s), &w) in next.iter_mut().zip(x).zip(dw) {
            *n = s + s * (mu_dt + sigma * w);
        }
    }
}

/// Implements [`ForwardSde`] by forwarding to the `gbm` field.
macro_rules! delegate_gbm {
    ($ty:ty) => {
        impl<T: $crate::scalar::Real> $crate::paths::ForwardSde<T> for $ty {
            fn state_dim(&self) -> usize {
                <_ as $crate::paths::ForwardSde<T>>::state_dim(&self.gbm)
            }
            fn noise_dim(&self) -> usize {
                <_ as $crate::paths::ForwardSde<T>>::noise_dim(&self.gbm)
            }
            fn initial_state(&self) -> Vec<T> {
                self.gbm.initial_state()
            }
            fn drift(&self, t: T, x: &[T], out: &mut [T]) {
                self.gbm.drift(t, x, out)
            }
            fn diffusion(&self, t: T, x: &[T], out: &mut [T]) {
                self.gbm.diffusion(t, x, out)
            }
            fn euler_step(&self, t: T, dt: T, x: &[T], dw: &[T], next: &mut [T], scratch: &mut Vec<T>) {
                self.gbm.euler_step(t, dt, x, dw, next, scratch)
            }
        }
    };
}
pub(crate) use delegate_gbm;
