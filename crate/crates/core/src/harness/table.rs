use std::fmt::Write as _;

use super::ExperimentStats;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Markdown,
}

const HEADER: [&str; 7] = ["N_T", "M", "mean_err_y", "std_y", "mean_err_z", "std_z", "runtime_s"];
const CR_LABEL: &str = "CR_lsq";

/// Scientific notation with a 4-digit fraction and a signed two-digit
/// exponent, e.g. `7.9174e-04`.
pub fn format_sci(v: f64) -> String {
    if !v.is_finite() {
        return "NaN".into();
    }
    let s = format!("{v:.4e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

/// Renders one row per cell plus a convergence-rate footer. Runtimes are
/// written only when `timing` is set, so default output is reproducible
/// byte for byte.
pub fn emit_table(stats: &ExperimentStats, format: TableFormat, timing: bool) -> String {
    let mut rows: Vec<[String; 7]> = Vec::new();
    for c in &stats.cells {
        let opt = |v: Option<f64>| v.map(format_sci).unwrap_or_default();
        let row = if let Some(reason) = &c.failure {
            [
                c.cell.n_steps.to_string(),
                c.cell.n_samples.to_string(),
                "failed".into(),
                String::new(),
                String::new(),
                String::new(),
                sanitize(reason),
            ]
        } else {
            [
                c.cell.n_steps.to_string(),
                c.cell.n_samples.to_string(),
                format_sci(c.mean_err_y),
                format_sci(c.std_y),
                opt(c.mean_err_z),
                opt(c.std_z),
                if timing { format!("{:.2}", c.mean_runtime_s) } else { String::new() },
            ]
        };
        rows.push(row);
    }
    let rate = |v: Option<f64>| v.map(|r| format!("{r:.2}")).unwrap_or_default();
    rows.push([
        CR_LABEL.into(),
        String::new(),
        rate(stats.convergence_rate_y),
        String::new(),
        rate(stats.convergence_rate_z),
        String::new(),
        String::new(),
    ]);

    let mut out = String::new();
    match format {
        TableFormat::Csv => {
            out.push_str(&HEADER.join(","));
            out.push('\n');
            for row in &rows {
                out.push_str(&row.join(","));
                out.push('\n');
            }
        }
        TableFormat::Markdown => {
            let _ = writeln!(out, "| {} |", HEADER.join(" | "));
            let _ = writeln!(out, "|{}", "---|".repeat(HEADER.len()));
            for row in &rows {
                let _ = writeln!(out, "| {} |", row.join(" | "));
            }
            out.push_str("\nCR_lsq: least-squares slope of log2(error) against log2(N_T), negated.\n");
        }
    }
    out
}

fn sanitize(reason: &str) -> String {
    reason.replace([',', '|', '\n'], ";")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{Cell, CellStats};

    fn stats() -> ExperimentStats {
        let cell = |n, m, e: f64, z: Option<f64>| CellStats {
            cell: Cell { n_steps: n, n_samples: m },
            mean_err_y: e,
            std_y: e / 2.0,
            mean_err_z: z,
            std_z: z.map(|v| v / 2.0),
            mean_runtime_s: 1.234,
            mean_y0: 0.0,
            failure: None,
        };
        ExperimentStats {
            cells: vec![cell(2, 1000, 0.0262, Some(0.0516)), cell(4, 2000, 7.9174e-4, None)],
            convergence_rate_y: Some(1.2812),
            convergence_rate_z: None,
        }
    }

    #[test]
    fn scientific_format() {
        assert_eq!(format_sci(7.9174e-4), "7.9174e-04");
        assert_eq!(format_sci(0.0262), "2.6200e-02");
        assert_eq!(format_sci(12.5), "1.2500e+01");
        assert_eq!(format_sci(0.0), "0.0000e+00");
        assert_eq!(format_sci(f64::NAN), "NaN");
    }

    #[test]
    fn csv_layout() {
        let text = emit_table(&stats(), TableFormat::Csv, false);
        let expected = "N_T,M,mean_err_y,std_y,mean_err_z,std_z,runtime_s\n\
                        2,1000,2.6200e-02,1.3100e-02,5.1600e-02,2.5800e-02,\n\
                        4,2000,7.9174e-04,3.9587e-04,,,\n\
                        CR_lsq,,1.28,,,,\n";
        assert_eq!(text, expected);
    }

    #[test]
    fn timing_column_is_opt_in() {
        let text = emit_table(&stats(), TableFormat::Csv, true);
        assert!(text.lines().nth(1).unwrap().ends_with(",1.23"));
    }

    #[test]
    fn markdown_has_one_row_per_cell() {
        let text = emit_table(&stats(), TableFormat::Markdown, false);
        let table_rows = text.lines().filter(|l| l.starts_with("| ")).count();
        assert_eq!(table_rows, 1 + 2 + 1);
        assert!(text.contains("| 4 | 2000 | 7.9174e-04 |"));
    }
}
