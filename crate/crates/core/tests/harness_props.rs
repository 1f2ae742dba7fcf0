use fbsde_core::harness::{
    cell_stats, convergence_rate, emit_table, run_experiment_with, Cell, CellSolver, ErrorMode, ExperimentSpec,
    Reference, RunOutput, TableFormat,
};
use fbsde_core::problems::ProblemKind;
use fbsde_core::Result;
use proptest::prelude::*;

const STUDY_NT: [usize; 5] = [2, 4, 8, 16, 32];

fn cr(errors: [f64; 5]) -> f64 {
    let points: Vec<(usize, f64)> = STUDY_NT.iter().copied().zip(errors).collect();
    convergence_rate(&points).unwrap()
}

#[test]
fn reference_rows_give_their_known_rates() {
    assert!((cr([0.0262, 0.0174, 0.0056, 0.0027, 7.9174e-04]) - 1.28).abs() < 0.005);
    assert!((cr([0.0516, 0.0448, 0.0149, 0.0091, 0.0066]) - 0.82).abs() < 0.005);
    assert!((cr([0.0329, 0.0194, 0.0080, 0.0045, 0.0012]) - 1.17).abs() < 0.005);
    assert!((cr([0.1142, 0.0752, 0.0235, 0.0157, 0.0092]) - 0.95).abs() < 0.005);
}

/// Returns `reference + offset(seed)`.
struct Shifted {
    reference: f64,
    offset: fn(u64) -> f64,
}

impl CellSolver for Shifted {
    fn run(&self, _cell: &Cell, seed: u64) -> Result<RunOutput> {
        let y0 = self.reference + (self.offset)(seed);
        Ok(RunOutput { y0, z0: vec![y0] })
    }
}

fn spec(n_runs: usize, mode: ErrorMode) -> ExperimentSpec {
    let mut s = ExperimentSpec::new(
        ProblemKind::BlackScholes,
        vec![Cell { n_steps: 2, n_samples: 1000 }, Cell { n_steps: 4, n_samples: 2000 }],
    );
    s.n_runs = n_runs;
    s.error_mode = mode;
    s
}

#[test]
fn dyadic_shift_is_recovered_exactly() {
    let solver = Shifted { reference: 4.5, offset: |_| -0.125 };
    let reference = Reference { y0: 4.5, z0: Some(vec![4.5]) };
    let stats = run_experiment_with(&spec(10, ErrorMode::Absolute), &solver, &reference).unwrap();
    for c in &stats.cells {
        assert_eq!((c.mean_err_y, c.std_y), (0.125, 0.0));
        assert_eq!((c.mean_err_z, c.std_z), (Some(0.125), Some(0.0)));
    }
}

#[test]
fn csv_output_round_trips() {
    let solver = Shifted { reference: 4.3671, offset: |s| (s % 7) as f64 * 1e-3 };
    let reference = Reference { y0: 4.3671, z0: None };
    let stats = run_experiment_with(&spec(10, ErrorMode::Relative), &solver, &reference).unwrap();
    let text = emit_table(&stats, TableFormat::Csv, true);
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 3);
    for (row, cell) in rows.iter().zip(&stats.cells) {
        assert_eq!(row[0].parse::<usize>().unwrap(), cell.cell.n_steps);
        assert_eq!(row[1].parse::<usize>().unwrap(), cell.cell.n_samples);
        let err: f64 = row[2].parse().unwrap();
        assert!((err - cell.mean_err_y).abs() <= 5e-5 * cell.mean_err_y);
        assert_eq!((&row[4], &row[5]), ("", ""));
        assert!(row[6].parse::<f64>().unwrap() >= 0.0);
    }
    assert_eq!(&rows[2][0], "CR_lsq");
}

proptest! {
    #[test]
    fn constant_shift_gives_its_size(reference in 0.5f64..50.0, c in -1.0f64..1.0) {
        let shifted = RunOutput { y0: reference + c, z0: vec![] };
        let stats = cell_stats(Cell { n_steps: 1, n_samples: 1 }, &vec![shifted; 10], &Reference { y0: reference, z0: None }, ErrorMode::Absolute);
        prop_assert!((stats.mean_err_y - c.abs()).abs() <= 1e-14 * reference);
        prop_assert_eq!(stats.std_y, 0.0);
    }

    #[test]
    fn statistics_ignore_run_order(values in prop::collection::vec(-3.0f64..3.0, 2..12), rotate in 0usize..12) {
        let runs: Vec<RunOutput> = values.iter().map(|&y| RunOutput { y0: y, z0: vec![2.0 * y] }).collect();
        let mut permuted = runs.clone();
        permuted.rotate_left(rotate % runs.len());
        permuted.reverse();
        let reference = Reference { y0: 0.3, z0: Some(vec![0.6]) };
        let cell = Cell { n_steps: 1, n_samples: 1 };
        let a = cell_stats(cell, &runs, &reference, ErrorMode::Relative);
        let b = cell_stats(cell, &permuted, &reference, ErrorMode::Relative);
        let close = |x: f64, y: f64| (x - y).abs() <= 1e-12 * x.abs().max(1.0);
        prop_assert!(close(a.mean_err_y, b.mean_err_y) && close(a.std_y, b.std_y));
        prop_assert!(close(a.mean_err_z.unwrap(), b.mean_err_z.unwrap()) && close(a.std_z.unwrap(), b.std_z.unwrap()));
    }

    #[test]
    fn rate_ignores_error_scale(errs in prop::collection::vec(1e-6f64..1.0, 5), k in 1e-3f64..1e3) {
        let points: Vec<(usize, f64)> = STUDY_NT.iter().copied().zip(errs.iter().copied()).collect();
        let scaled: Vec<(usize, f64)> = points.iter().map(|&(n, e)| (n, k * e)).collect();
        let (a, b) = (convergence_rate(&points).unwrap(), convergence_rate(&scaled).unwrap());
        prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
    }
}
