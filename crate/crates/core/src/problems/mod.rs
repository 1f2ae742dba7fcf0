//! Benchmark FBSDEs.
//!
//! Every problem pairs forward dynamics (through [`ForwardSde`]) with a
//! driver `f(t, x, y, z)` under the convention `-dY = f dt - Z dW`, a
//! terminal payoff `g` and a sampler for the terminal hedge component
//! `Z_T = grad g(X_T) b(T, X_T)`. Payoff kinks use the one-sided derivative
//! that is zero on the at/below-strike side.

mod black_scholes;
mod closed_form;
mod gbm;
mod heston;
mod oscillatory;
mod rainbow;
mod rates;

use std::fmt;
use std::str::FromStr;

pub use black_scholes::BlackScholesCall;
pub use closed_form::{bs_closed_form, normal_cdf};
pub use heston::HestonCall;
pub use oscillatory::OscillatoryBsde;
pub use rainbow::RainbowMaxCall;
pub use rates::DifferentRatesCall;

use crate::error::{FbsdeError, Result};
use crate::paths::ForwardSde;
use crate::scalar::Real;

/// Decoupled FBSDE: forward dynamics plus the backward data.
pub trait Fbsde<T: Real>: ForwardSde<T> {
    fn name(&self) -> String;

    /// Terminal time `T`.
    fn horizon(&self) -> T;

    /// Driver `f(t, x, y, z)`; `z` has length `noise_dim()`.
    fn driver(&self, t: T, x: &[T], y: T, z: &[T]) -> T;

    /// Terminal payoff `g(x)`.
    fn terminal(&self, x: &[T]) -> T;

    /// Writes the terminal hedge sample `grad g(x) b(T, x)` into `out`.
    fn terminal_z(&self, x: &[T], out: &mut [T]);

    fn reference_y0(&self) -> Option<ReferenceValue> {
        None
    }

    /// Exact `Z_0`, when known in closed form.
    fn exact_z0(&self) -> Option<Vec<f64>> {
        None
    }

    /// Nonlinear problems get cross-validated leaf sizes and no pruning.
    fn is_nonlinear(&self) -> bool {
        false
    }

    /// Lipschitz constant `L` with `|f(y,z) - f(y',z')| <= L (|y-y'| + |z-z'|)`.
    fn lipschitz(&self) -> Option<f64> {
        None
    }
}

/// Provenance of a reference solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceSource {
    ClosedForm,
    /// Externally computed value, with a short description of its origin.
    Tabulated(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceValue {
    pub value: f64,
    pub source: ReferenceSource,
}

impl ReferenceValue {
    pub fn closed_form(value: f64) -> Self {
        Self { value, source: ReferenceSource::ClosedForm }
    }

    pub fn tabulated(value: f64, origin: &'static str) -> Self {
        Self { value, source: ReferenceSource::Tabulated(origin) }
    }
}

/// Catalog entry, addressable by name: `oscillatory`, `black-scholes`,
/// `heston`, `rainbow:D`, `rates:D`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    Oscillatory,
    BlackScholes,
    Heston,
    Rainbow { dim: usize },
    DifferentRates { dim: usize },
}

impl ProblemKind {
    /// Names accepted by the catalog, with the dimension placeholder.
    pub const NAMES: [&'static str; 5] = ["oscillatory", "black-scholes", "heston", "rainbow:D", "rates:D"];

    /// Whether [`ProblemKind::build`] needs an explicit volatility.
    pub fn requires_sigma(&self) -> bool {
        matches!(self, ProblemKind::Rainbow { .. })
    }

    /// Instantiates the problem. `sigma` overrides the volatility of the
    /// multi-asset problems and is mandatory for the rainbow option.
    pub fn build<T: Real>(&self, sigma: Option<f64>) -> Result<Box<dyn Fbsde<T>>> {
        if let Some(s) = sigma {
            if !(s > 0.0 && s.is_finite()) {
                return Err(FbsdeError::invalid(format!("sigma must be positive, got {s}")));
            }
        }
        Ok(match *self {
            ProblemKind::Oscillatory => Box::new(OscillatoryBsde::new()),
            ProblemKind::BlackScholes => Box::new(BlackScholesCall::new()),
            ProblemKind::Heston => Box::new(HestonCall::new()),
            ProblemKind::Rainbow { dim } => {
                let sigma = sigma.ok_or_else(|| FbsdeError::invalid("the rainbow option requires sigma"))?;
                Box::new(RainbowMaxCall::new(dim, sigma)?)
            }
            ProblemKind::DifferentRates { dim } => {
                let mut p = DifferentRatesCall::new(dim)?;
                if let Some(s) = sigma {
                    p = p.with_sigma(s);
                }
                Box::new(p)
            }
        })
    }
}

impl FromStr for ProblemKind {
    type Err = FbsdeError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let (head, dim) = match s.split_once(':') {
            Some((h, d)) => {
                let dim: usize = d.parse().map_err(|_| FbsdeError::UnknownProblem(format!("{s} (bad dimension)")))?;
                if dim == 0 {
                    return Err(FbsdeError::UnknownProblem(format!("{s} (dimension must be positive)")));
                }
                (h, Some(dim))
            }
            None => (s.as_str(), None),
        };
        match (head, dim) {
            ("oscillatory", None) => Ok(ProblemKind::Oscillatory),
            ("black-scholes", None) => Ok(ProblemKind::BlackScholes),
            ("heston", None) => Ok(ProblemKind::Heston),
            ("rainbow", Some(dim)) => Ok(ProblemKind::Rainbow { dim }),
            ("rates", Some(dim)) => Ok(ProblemKind::DifferentRates { dim }),
            _ => Err(FbsdeError::UnknownProblem(s.clone())),
        }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProblemKind::Oscillatory => write!(f, "oscillatory"),
            ProblemKind::BlackScholes => write!(f, "black-scholes"),
            ProblemKind::Heston => write!(f, "heston"),
            ProblemKind::Rainbow { dim } => write!(f, "rainbow:{dim}"),
            ProblemKind::DifferentRates { dim } => write!(f, "rates:{dim}"),
        }
    }
}

/// Index of the largest coordinate; ties go to the lowest index.
pub(crate) fn argmax<T: Real>(x: &[T]) -> (usize, T) {
    let mut best = (0, x[0]);
    for (j, &v) in x.iter().enumerate().skip(1) {
        if v > best.1 {
            best = (j, v);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for name in ["oscillatory", "black-scholes", "heston", "rainbow:10", "rates:1"] {
            let kind: ProblemKind = name.parse().unwrap();
            assert_eq!(kind.to_string(), name);
        }
        assert!("rainbow".parse::<ProblemKind>().is_err());
        assert!("rates:0".parse::<ProblemKind>().is_err());
        assert!("heston:2".parse::<ProblemKind>().is_err());
        assert!("nope".parse::<ProblemKind>().is_err());
    }

    #[test]
    fn rainbow_needs_sigma() {
        let kind: ProblemKind = "rainbow:3".parse().unwrap();
        assert!(kind.requires_sigma());
        assert!(kind.build::<f64>(None).is_err());
        assert!(kind.build::<f64>(Some(-0.1)).is_err());
        let p = kind.build::<f64>(Some(0.2)).unwrap();
        assert_eq!(p.state_dim(), 3);
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0, 2.0]), (1, 3.0));
    }
}
