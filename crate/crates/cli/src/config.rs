//! Flat `key = value` run configuration.
//!
//! One key per line; `#` starts a comment. Keys are case-insensitive.
//!
//! | key        | type                     | default              |
//! |------------|--------------------------|----------------------|
//! | problem    | catalog name             | required             |
//! | dims       | integer > 0              | from `problem`       |
//! | sigma      | real > 0                 | problem default      |
//! | theta1     | real in [0, 1]           | 0.5                  |
//! | theta2     | real in (0, 1]           | 1                    |
//! | theta3     | real in [0, 1]           | 0.5                  |
//! | picard     | integer >= 1             | 20                   |
//! | NT         | comma-separated integers | required             |
//! | M          | comma-separated integers | required             |
//! | G          | integer >= 1             | 1000                 |
//! | min_leaf   | integer >= 1 or `auto`   | 5                    |
//! | prune      | bool                     | false                |
//! | holdout    | real in (0, 1)           | 0.5                  |
//! | runs       | integer >= 1             | 10                   |
//! | seed_a     | integer                  | 12345                |
//! | seed_b     | integer                  | 67890                |
//! | error      | `absolute` / `relative`  | by problem           |
//! | reference  | real                     | catalog value        |
//! | out        | path                     | stdout               |
//! | format     | `csv` / `markdown`       | csv                  |
//! | timing     | bool                     | false                |
//!
//! `NT` and `M` pair up element-wise; a single value is repeated to match
//! the other list.

use std::path::PathBuf;
use std::str::FromStr;

use fbsde_core::harness::{Cell, ErrorMode, ExperimentSpec, TableFormat};
use fbsde_core::problems::ProblemKind;
use fbsde_core::solver::{MinLeaf, SchemeParams, SeedSchedule, SolverConfig};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("config key `{key}`: {message}")]
pub struct ConfigError {
    pub key: String,
    pub message: String,
}

impl ConfigError {
    fn new(key: &str, message: impl Into<String>) -> Self {
        let key = match key {
            "nt" => "NT",
            "m" => "M",
            "g" => "G",
            k => k,
        };
        Self { key: key.to_string(), message: message.into() }
    }
}

pub const KEYS: [&str; 21] = [
    "problem",
    "dims",
    "sigma",
    "theta1",
    "theta2",
    "theta3",
    "picard",
    "nt",
    "m",
    "g",
    "min_leaf",
    "prune",
    "holdout",
    "runs",
    "seed_a",
    "seed_b",
    "error",
    "reference",
    "out",
    "format",
    "timing",
];

/// Raw settings before validation; later assignments win.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    entries: Vec<(String, String)>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut raw = Self::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ConfigError::new(line, format!("line {} is not `key = value`", lineno + 1)))?;
            raw.set(key.trim(), value.trim())?;
        }
        Ok(raw)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let key = key.to_ascii_lowercase();
        if !KEYS.contains(&key.as_str()) {
            return Err(ConfigError::new(&key, "unknown key"));
        }
        self.entries.retain(|(k, _)| *k != key);
        self.entries.push((key, value.to_string()));
        Ok(())
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    fn typed<T: FromStr>(&self, key: &str, what: &str) -> Result<Option<T>, ConfigError> {
        self.get(key)
            .map(|v| v.parse::<T>().map_err(|_| ConfigError::new(key, format!("expected {what}, got `{v}`"))))
            .transpose()
    }

    fn list(&self, key: &str) -> Result<Option<Vec<usize>>, ConfigError> {
        self.get(key)
            .map(|v| {
                v.split(',')
                    .map(|s| {
                        s.trim()
                            .parse::<usize>()
                            .map_err(|_| ConfigError::new(key, format!("expected integers, got `{}`", s.trim())))
                    })
                    .collect()
            })
            .transpose()
    }

    fn flag(&self, key: &str) -> Result<Option<bool>, ConfigError> {
        self.get(key)
            .map(|v| match v.to_ascii_lowercase().as_str() {
                "true" | "yes" | "1" => Ok(true),
                "false" | "no" | "0" => Ok(false),
                _ => Err(ConfigError::new(key, format!("expected true or false, got `{v}`"))),
            })
            .transpose()
    }

    /// Validates every key and fills defaults.
    pub fn resolve(&self) -> Result<RunConfig, ConfigError> {
        let name = self.get("problem").ok_or_else(|| ConfigError::new("problem", "required"))?;
        let dims: Option<usize> = self.typed("dims", "a positive integer")?;
        let problem_text = match dims {
            Some(0) => return Err(ConfigError::new("dims", "must be positive")),
            Some(d) if !name.contains(':') => format!("{name}:{d}"),
            Some(d) if !name.ends_with(&format!(":{d}")) => {
                return Err(ConfigError::new("dims", format!("conflicts with problem `{name}`")))
            }
            _ => name.to_string(),
        };
        let problem: ProblemKind =
            problem_text.parse().map_err(|e: fbsde_core::FbsdeError| ConfigError::new("problem", e.to_string()))?;

        let sigma: Option<f64> = self.typed("sigma", "a real number")?;
        match sigma {
            Some(s) if !(s > 0.0 && s.is_finite()) => return Err(ConfigError::new("sigma", "must be positive")),
            None if problem.requires_sigma() => {
                return Err(ConfigError::new("sigma", format!("required for {problem}")))
            }
            _ => {}
        }

        let defaults = SchemeParams::default();
        let theta1 = self.typed("theta1", "a real number")?.unwrap_or(defaults.theta1);
        let theta2 = self.typed("theta2", "a real number")?.unwrap_or(defaults.theta2);
        let theta3 = self.typed("theta3", "a real number")?.unwrap_or(defaults.theta3);
        let picard = self.typed("picard", "a positive integer")?.unwrap_or(defaults.picard_iters);
        let scheme = SchemeParams::new(theta1, theta2, theta3, picard).map_err(|e| {
            let msg = e.to_string();
            let key = ["theta1", "theta2", "theta3", "picard"].into_iter().find(|k| msg.contains(k)).unwrap_or("theta");
            ConfigError::new(key, msg)
        })?;

        let nt = self.list("nt")?.ok_or_else(|| ConfigError::new("NT", "required"))?;
        let m = self.list("m")?.ok_or_else(|| ConfigError::new("M", "required"))?;
        let cells = pair_cells(&nt, &m)?;

        let group_size = self.typed("g", "a positive integer")?.unwrap_or(SolverConfig::DEFAULT_GROUP);
        if group_size == 0 {
            return Err(ConfigError::new("G", "must be positive"));
        }
        let min_leaf = match self.get("min_leaf") {
            None => MinLeaf::Fixed(fbsde_core::cart::DEFAULT_MIN_LEAF),
            Some(v) if v.eq_ignore_ascii_case("auto") => MinLeaf::Auto,
            Some(v) => match v.parse::<usize>() {
                Ok(n) if n >= 1 => MinLeaf::Fixed(n),
                _ => {
                    return Err(ConfigError::new(
                        "min_leaf",
                        format!("expected a positive integer or `auto`, got `{v}`"),
                    ))
                }
            },
        };
        let prune = self.flag("prune")?.unwrap_or(false);
        let holdout = self.typed("holdout", "a real number")?.unwrap_or(0.5);
        if !(holdout > 0.0 && holdout < 1.0) {
            return Err(ConfigError::new("holdout", "must be in (0, 1)"));
        }
        let runs = self.typed("runs", "a positive integer")?.unwrap_or(10);
        if runs == 0 {
            return Err(ConfigError::new("runs", "must be at least 1"));
        }
        let seed_defaults = SeedSchedule::default();
        let seed_a = self.typed("seed_a", "an unsigned integer")?.unwrap_or(seed_defaults.base_a);
        let seed_b = self.typed("seed_b", "an unsigned integer")?.unwrap_or(seed_defaults.base_b);

        let error_mode = match self.get("error").map(str::to_ascii_lowercase).as_deref() {
            None => None,
            Some("absolute" | "abs") => Some(ErrorMode::Absolute),
            Some("relative" | "rel") => Some(ErrorMode::Relative),
            Some(v) => return Err(ConfigError::new("error", format!("expected absolute or relative, got `{v}`"))),
        };
        let reference = self.typed("reference", "a real number")?;
        let format = match self.get("format").map(str::to_ascii_lowercase).as_deref() {
            None | Some("csv") => TableFormat::Csv,
            Some("markdown" | "md") => TableFormat::Markdown,
            Some(v) => return Err(ConfigError::new("format", format!("expected csv or markdown, got `{v}`"))),
        };

        let mut spec = ExperimentSpec::new(problem, cells);
        spec.sigma = sigma;
        spec.scheme = scheme;
        spec.group_size = group_size;
        spec.min_leaf = min_leaf;
        spec.prune = prune;
        spec.holdout_fraction = holdout;
        spec.n_runs = runs;
        spec.seeds = SeedSchedule::new(seed_a, seed_b);
        if let Some(mode) = error_mode {
            spec.error_mode = mode;
        }
        spec.reference_y0 = reference;
        for cell in &spec.cells {
            if cell.n_samples % spec.group_size.min(cell.n_samples) != 0 {
                return Err(ConfigError::new(
                    "G",
                    format!("M={} is not a multiple of G={}", cell.n_samples, spec.group_size),
                ));
            }
        }

        Ok(RunConfig {
            spec,
            out: self.get("out").map(PathBuf::from),
            format,
            timing: self.flag("timing")?.unwrap_or(false),
        })
    }
}

fn pair_cells(nt: &[usize], m: &[usize]) -> Result<Vec<Cell>, ConfigError> {
    if nt.is_empty() {
        return Err(ConfigError::new("NT", "empty list"));
    }
    if let Some(k) = nt.iter().position(|&n| n == 0) {
        return Err(ConfigError::new("NT", format!("entry {} must be positive", k + 1)));
    }
    if let Some(k) = m.iter().position(|&n| n == 0) {
        return Err(ConfigError::new("M", format!("entry {} must be positive", k + 1)));
    }
    let len = match (nt.len(), m.len()) {
        (a, b) if a == b => a,
        (1, b) => b,
        (a, 1) => a,
        (a, b) => return Err(ConfigError::new("M", format!("{b} values do not pair with {a} NT values"))),
    };
    let at = |v: &[usize], k: usize| if v.len() == 1 { v[0] } else { v[k] };
    Ok((0..len).map(|k| Cell { n_steps: at(nt, k), n_samples: at(m, k) }).collect())
}

/// A validated run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub spec: ExperimentSpec,
    pub out: Option<PathBuf>,
    pub format: TableFormat,
    pub timing: bool,
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    RawConfig::parse(text)?.resolve()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config("problem=oscillatory\nNT=8\nM=20000\n").unwrap();
        let s = &cfg.spec;
        assert_eq!(s.problem, ProblemKind::Oscillatory);
        assert_eq!(s.cells, vec![Cell { n_steps: 8, n_samples: 20000 }]);
        assert_eq!((s.group_size, s.scheme.picard_iters, s.n_runs), (1000, 20, 10));
        assert_eq!(s.scheme, SchemeParams::default());
        assert_eq!(s.min_leaf, MinLeaf::Fixed(5));
        assert_eq!(s.error_mode, ErrorMode::Absolute);
        assert_eq!((cfg.format, cfg.timing, cfg.out), (TableFormat::Csv, false, None));
    }

    #[test]
    fn theta2_zero_is_rejected() {
        let err = parse_config("problem=oscillatory\nNT=8\nM=20000\ntheta1=0.5\ntheta2=0\ntheta3=0.5").unwrap_err();
        assert_eq!(err.key, "theta2");
        assert!(err.message.contains("theta2 must be in (0,1]"), "{err}");
    }

    #[test]
    fn cells_pair_element_wise() {
        let cfg = parse_config(
            "# oscillatory, (1/2, 1, 1/2)\nproblem = oscillatory\nNT = 2, 4, 8, 16\nM = 1000, 2000, 20000, 100000\n",
        )
        .unwrap();
        let cells: Vec<(usize, usize)> = cfg.spec.cells.iter().map(|c| (c.n_steps, c.n_samples)).collect();
        assert_eq!(cells, vec![(2, 1000), (4, 2000), (8, 20000), (16, 100000)]);
    }

    #[test]
    fn single_values_broadcast() {
        let cfg = parse_config("problem=heston\nNT=8\nM=100,500,1000").unwrap();
        assert_eq!(cfg.spec.cells.len(), 3);
        assert!(cfg.spec.cells.iter().all(|c| c.n_steps == 8));
    }

    #[test]
    fn errors_name_the_key() {
        let cases = [
            ("problem=oscillatory\nNT=8\nM=20000\nbogus=1", "bogus"),
            ("problem=oscillatory\nNT=8\nM=twenty", "M"),
            ("problem=oscillatory\nNT=8\nM=20000\nruns=0", "runs"),
            ("problem=oscillatory\nNT=8\nM=20000\nG=3000", "G"),
            ("problem=oscillatory\nNT=8\nM=2500\nG=1000", "G"),
            ("problem=oscillatory\nNT=8,4\nM=1,2,3", "M"),
            ("problem=rainbow:10\nNT=8\nM=2000", "sigma"),
            ("problem=nonsense\nNT=8\nM=2000", "problem"),
            ("problem=oscillatory\nNT=8\nM=2000\nmin_leaf=0", "min_leaf"),
            ("problem=oscillatory\nNT=8\nM=2000\nholdout=1.5", "holdout"),
            ("problem=oscillatory\nNT=8\nM=2000\nformat=xml", "format"),
            ("problem=oscillatory\nNT=8\nM=2000\nprune=maybe", "prune"),
            ("problem=oscillatory\nM=2000", "NT"),
        ];
        for (text, key) in cases {
            let err = parse_config(text).unwrap_err();
            assert_eq!(err.key, key, "{text}: {err}");
        }
    }

    #[test]
    fn dims_completes_the_problem_name() {
        let cfg = parse_config("problem=rainbow\ndims=10\nsigma=0.2\nNT=12\nM=2000").unwrap();
        assert_eq!(cfg.spec.problem, ProblemKind::Rainbow { dim: 10 });
        assert_eq!(cfg.spec.sigma, Some(0.2));
        assert_eq!(parse_config("problem=rates:1\ndims=100\nNT=10\nM=2000").unwrap_err().key, "dims");
    }

    #[test]
    fn auto_min_leaf_and_flags() {
        let cfg =
            parse_config("problem=rates:1\nNT=10\nM=20000\nmin_leaf=auto\nprune=true\nformat=markdown\ntiming=yes")
                .unwrap();
        assert_eq!(cfg.spec.min_leaf, MinLeaf::Auto);
        assert!(cfg.spec.prune && cfg.timing);
        assert_eq!(cfg.format, TableFormat::Markdown);
    }
}
