use super::{run_experiment, Cell, ExperimentSpec};
use crate::problems::ProblemKind;
use crate::solver::{MinLeaf, SchemeParams};

/// Result of one quick self-check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn spec(problem: ProblemKind, cells: &[(usize, usize)], runs: usize) -> ExperimentSpec {
    let mut s =
        ExperimentSpec::new(problem, cells.iter().map(|&(n_steps, n_samples)| Cell { n_steps, n_samples }).collect());
    s.n_runs = runs;
    if matches!(problem, ProblemKind::Rainbow { .. }) {
        s.sigma = Some(0.2);
    }
    s
}

fn error_check(name: &'static str, s: ExperimentSpec, max_y: f64, max_z: Option<f64>) -> CheckOutcome {
    match run_experiment(&s) {
        Ok(stats) => {
            let c = &stats.cells[0];
            let z_ok = match (max_z, c.mean_err_z) {
                (Some(limit), Some(e)) => e <= limit,
                (Some(_), None) => false,
                (None, _) => true,
            };
            let passed = c.failure.is_none() && c.mean_err_y <= max_y && z_ok;
            let z = c.mean_err_z.map(|e| format!(", err_z {e:.4e}")).unwrap_or_default();
            CheckOutcome { name, passed, detail: format!("err_y {:.4e}{z}", c.mean_err_y) }
        }
        Err(e) => CheckOutcome { name, passed: false, detail: e.to_string() },
    }
}

/// Accuracy checks on the cheaper table cells plus two consistency checks.
/// Each cell takes seconds to a minute with an optimised build. `progress`
/// sees each outcome as it completes.
pub fn fast_checks(mut progress: impl FnMut(&CheckOutcome)) -> Vec<CheckOutcome> {
    let mut out = Vec::new();
    let mut push = |c: CheckOutcome| {
        progress(&c);
        out.push(c);
    };

    let rainbow = |dim| ProblemKind::Rainbow { dim };
    push(error_check(
        "oscillatory N_T=8 M=20000",
        spec(ProblemKind::Oscillatory, &[(8, 20000)], 10),
        0.012,
        Some(0.035),
    ));
    push(error_check(
        "black-scholes N_T=8 M=30000",
        spec(ProblemKind::BlackScholes, &[(8, 30000)], 10),
        0.012,
        Some(0.035),
    ));
    push(error_check("heston N_T=8 M=10000", spec(ProblemKind::Heston, &[(8, 10000)], 10), 0.02, None));
    push(error_check("rainbow:1 N_T=12 M=10000", spec(rainbow(1), &[(12, 10000)], 10), 0.02, None));
    push(error_check("rainbow:10 N_T=12 M=2000", spec(rainbow(10), &[(12, 2000)], 10), 0.025, None));
    let mut rates = spec(ProblemKind::DifferentRates { dim: 1 }, &[(10, 20000)], 10);
    rates.min_leaf = MinLeaf::Auto;
    push(error_check("rates:1 N_T=10 M=20000 auto", rates, 0.02, None));

    let s = spec(ProblemKind::BlackScholes, &[(4, 2000)], 2);
    let (a, b) = (run_experiment(&s), run_experiment(&s));
    push(CheckOutcome {
        name: "fixed seeds reproduce",
        passed: matches!((&a, &b), (Ok(x), Ok(y)) if x.cells[0].mean_y0 == y.cells[0].mean_y0),
        detail: String::new(),
    });

    push(CheckOutcome {
        name: "theta2=0 rejected",
        passed: SchemeParams::theta(0.5, 0.0, 0.5).is_err(),
        detail: String::new(),
    });
    out
}
