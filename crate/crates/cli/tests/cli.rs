use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fbsde_cli::config::parse_config;

fn fbsde(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fbsde")).args(args).output().expect("binary runs")
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn list_problems_prints_the_catalog() {
    let out = fbsde(&["list-problems"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let names: Vec<&str> = text.lines().collect();
    assert_eq!(names, ["oscillatory", "black-scholes", "heston", "rainbow:D", "rates:D"]);
}

#[test]
fn unknown_subcommand_exits_2_with_usage() {
    let out = fbsde(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("Usage"), "{}", stderr(&out));
}

#[test]
fn black_scholes_config_writes_six_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("black_scholes.csv");
    let config = configs_dir().join("black_scholes.cfg");
    let out = fbsde(&["run", "--config", config.to_str().unwrap(), "--runs", "1", "--out", out_path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));

    let mut reader = csv::Reader::from_path(&out_path).unwrap();
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, ["N_T", "M", "mean_err_y", "std_y", "mean_err_z", "std_z", "runtime_s"]);
    let records: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    let data: Vec<&csv::StringRecord> = records.iter().filter(|r| &r[0] != "CR_lsq").collect();
    assert_eq!(data.len(), 6);
    let n_t: Vec<&str> = data.iter().map(|r| &r[0]).collect();
    assert_eq!(n_t, ["2", "4", "8", "12", "16", "20"]);
    for r in &data {
        let e: f64 = r[2].parse().unwrap();
        assert!(e.is_finite() && e >= 0.0);
        assert_eq!(&r[6], "", "runtime is opt-in");
    }
    assert_eq!(records.len(), 7);
}

#[test]
fn same_config_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("small.cfg");
    std::fs::write(&config, "problem = black-scholes\nNT = 2, 4\nM = 1000, 2000\nruns = 3\n").unwrap();
    let run = |name: &str| {
        let path = dir.path().join(name);
        let out = fbsde(&["run", "--config", config.to_str().unwrap(), "--out", path.to_str().unwrap()]);
        assert!(out.status.success(), "{}", stderr(&out));
        std::fs::read(path).unwrap()
    };
    assert_eq!(run("a.csv"), run("b.csv"));
}

#[test]
fn flags_without_a_config_file() {
    let out =
        fbsde(&["run", "--problem", "oscillatory", "--nt", "2", "--m", "1000", "--runs", "2", "--format", "markdown"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("| N_T | M | mean_err_y |"));
    assert!(text.contains("| 2 | 1000 |"));
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.cfg");
    std::fs::write(&config, "problem = oscillatory\nNT = 2\nM = 1000\ntheta2 = 0\n").unwrap();
    let bad = fbsde(&["run", "--config", config.to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(2));
    let good = fbsde(&["run", "--config", config.to_str().unwrap(), "--theta2", "1", "--runs", "1"]);
    assert!(good.status.success(), "{}", stderr(&good));
}

#[test]
fn theta2_zero_is_a_config_error() {
    let out = fbsde(&["run", "--problem", "oscillatory", "--nt", "8", "--m", "20000", "--theta2", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("theta2 must be in (0,1]"), "{}", stderr(&out));
}

#[test]
fn config_errors_name_the_key() {
    let cases: [&[&str]; 4] = [
        &["run", "--problem", "rainbow:10", "--nt", "12", "--m", "2000"],
        &["run", "--problem", "oscillatory", "--nt", "2", "--m", "1000", "--min-leaf", "tiny"],
        &["run", "--problem", "oscillatory", "--nt", "2", "--m", "1500"],
        &["run", "--problem", "rates", "--nt", "2", "--m", "1000"],
    ];
    let keys = ["sigma", "min_leaf", "G", "problem"];
    for (args, key) in cases.iter().zip(keys) {
        let out = fbsde(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(stderr(&out).contains(&format!("`{key}`")), "{args:?}: {}", stderr(&out));
    }

    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.cfg");
    std::fs::write(&config, "problem = oscillatory\nNT = 2\nM = 1000\nsamples = 3\n").unwrap();
    let out = fbsde(&["run", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("`samples`: unknown key"), "{}", stderr(&out));
}

#[test]
fn bad_thread_count_is_a_config_error() {
    let out =
        Command::new(env!("CARGO_BIN_EXE_fbsde")).arg("list-problems").env("FBSDE_THREADS", "many").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("FBSDE_THREADS"));
}

#[test]
fn shipped_configs_parse() {
    let mut count = 0;
    for entry in std::fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        let text = std::fs::read_to_string(&path).unwrap();
        parse_config(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        count += 1;
    }
    assert!(count >= 8);
}

#[test]
fn oscillatory_steps_config_has_the_study_cells() {
    let text = std::fs::read_to_string(configs_dir().join("oscillatory_steps.cfg")).unwrap();
    let cfg = parse_config(&text).unwrap();
    let cells: Vec<(usize, usize)> = cfg.spec.cells.iter().map(|c| (c.n_steps, c.n_samples)).collect();
    assert_eq!(cells, [(2, 1000), (4, 2000), (8, 20000), (16, 100000), (32, 300000)]);
    assert_eq!((cfg.spec.group_size, cfg.spec.n_runs, cfg.spec.scheme.picard_iters), (1000, 10, 20));
}
