//! Run configuration: flat `key = value` text. Keys before the first section
//! header configure the run; a `[scenario-name]` section overrides that
//! scenario's constants. Sections naming other scenarios are ignored.
//!
//! ```text
//! scenario = harmonic
//! seed = 7
//! n = 10000
//! dt = 0.1
//!
//! [harmonic]
//! omega = 3
//! x_lo = -5
//! x_hi = 5
//! ```

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::wavefunctions::{Domain, Model, Scenario};

/// `(line number, key, value)`.
type Entry = (usize, String, String);

pub const DEFAULT_EPSILON: f64 = 1e-3;
pub const DEFAULT_QUANTILES: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverChoice {
    Quantile,
    Guidance,
    Both,
}

impl FromStr for SolverChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quantile" => Ok(Self::Quantile),
            "guidance" => Ok(Self::Guidance),
            "both" => Ok(Self::Both),
            other => Err(Error::Parse(format!("unknown solver '{other}' (quantile, guidance, both)"))),
        }
    }
}

impl SolverChoice {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Quantile => "quantile",
            Self::Guidance => "guidance",
            Self::Both => "both",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub seed: u64,
    pub n: usize,
    pub dt: f64,
    pub epsilon: f64,
    pub quantiles: Vec<f64>,
    pub solver: SolverChoice,
    pub sweep_n: Vec<usize>,
    pub sweep_dt: Vec<f64>,
    pub sweep_seeds: Vec<u64>,
    pub ks_seeds: usize,
    pub ks_times: usize,
    pub ks_alpha: f64,
    /// Multiplies every emitted length (positions and errors).
    pub length_scale: f64,
    /// Multiplies every emitted time.
    pub time_scale: f64,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    /// Catalog scenario with the particle count and step of its reference run.
    pub fn for_scenario(name: &str) -> Result<Self> {
        let scenario = Scenario::by_name(name)?;
        let (n, dt) = match name {
            "harmonic" => (10_000, 0.1),
            "free" => (100_000, 0.15),
            "two-slit" => (100_000, 100.0 / 30.0),
            "square-well" => (10_000, 0.05),
            "eigenstate" => (10_000, 0.1),
            _ => (1_000, 0.1),
        };
        Ok(Self {
            scenario,
            seed: 1,
            n,
            dt,
            epsilon: DEFAULT_EPSILON,
            quantiles: DEFAULT_QUANTILES.to_vec(),
            solver: SolverChoice::Quantile,
            sweep_n: vec![1_000, 10_000, 100_000],
            sweep_dt: vec![dt],
            sweep_seeds: (1..=10).collect(),
            ks_seeds: 100,
            ks_times: 5,
            ks_alpha: 0.01,
            length_scale: 1.0,
            time_scale: 1.0,
            out: None,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        let bad = |msg: String| Err(Error::Validation(msg));
        if self.n < 2 {
            return bad(format!("n must be at least 2, got {}", self.n));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad(format!("epsilon must lie in (0, 1), got {}", self.epsilon));
        }
        if let Some(p) = self.quantiles.iter().find(|p| !(**p > 0.0 && **p < 1.0)) {
            return bad(format!("quantile must lie in (0, 1), got {p}"));
        }
        if !(self.ks_alpha > 0.0 && self.ks_alpha < 1.0) {
            return bad(format!("ks_alpha must lie in (0, 1), got {}", self.ks_alpha));
        }
        if !(self.length_scale > 0.0 && self.time_scale > 0.0) {
            return bad("output scales must be positive".into());
        }
        Ok(())
    }

    /// Parses config text. `scenario` may be overridden by `scenario_hint`
    /// (e.g. from the command line) before scenario sections are applied.
    pub fn parse(text: &str, scenario_hint: Option<&str>) -> Result<Self> {
        let mut run_keys: Vec<Entry> = Vec::new();
        let mut sections: Vec<(String, Vec<Entry>)> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| Error::Parse(format!("line {lineno}: unterminated section header")))?;
                sections.push((name.trim().to_string(), Vec::new()));
                continue;
            }
            let (key, value) =
                line.split_once('=').ok_or_else(|| Error::Parse(format!("line {lineno}: expected key = value")))?;
            let entry = (lineno, key.trim().to_string(), value.trim().to_string());
            match sections.last_mut() {
                Some((_, entries)) => entries.push(entry),
                None => run_keys.push(entry),
            }
        }

        let file_scenario = run_keys.iter().find(|(_, k, _)| k == "scenario").map(|(_, _, v)| v.as_str());
        let name = scenario_hint.or(file_scenario).ok_or_else(|| Error::Parse("no scenario given".into()))?;
        let mut config = Self::for_scenario(name)?;
        let mut dt_set = false;
        for (lineno, key, value) in &run_keys {
            if key == "dt" {
                dt_set = true;
            }
            config.apply_run_key(key, value).map_err(|e| at_line(*lineno, e))?;
        }
        if !dt_set {
            config.sweep_dt = vec![config.dt];
        }
        for (section, entries) in &sections {
            if section != name {
                continue;
            }
            for (lineno, key, value) in entries {
                apply_scenario_key(&mut config.scenario, key, value).map_err(|e| at_line(*lineno, e))?;
            }
        }
        config.validate()?;
        Ok(config)
    }

    fn apply_run_key(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "scenario" => {}
            "seed" => self.seed = num(key, value)?,
            "n" => self.n = num(key, value)?,
            "dt" => self.dt = num(key, value)?,
            "epsilon" => self.epsilon = num(key, value)?,
            "quantiles" => self.quantiles = list(key, value)?,
            "solver" => self.solver = value.parse()?,
            "sweep_n" => self.sweep_n = list(key, value)?,
            "sweep_dt" => self.sweep_dt = list(key, value)?,
            "sweep_seeds" => self.sweep_seeds = list(key, value)?,
            "ks_seeds" => self.ks_seeds = num(key, value)?,
            "ks_times" => self.ks_times = num(key, value)?,
            "ks_alpha" => self.ks_alpha = num(key, value)?,
            "length_scale" => self.length_scale = num(key, value)?,
            "time_scale" => self.time_scale = num(key, value)?,
            "out" => self.out = Some(PathBuf::from(value)),
            other => return Err(Error::Parse(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Emits the config in the same format [`RunConfig::parse`] reads.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let join = |v: &[String]| v.join(",");
        let s = &self.scenario;
        let _ = writeln!(out, "scenario = {}", s.name);
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(out, "n = {}", self.n);
        let _ = writeln!(out, "dt = {}", self.dt);
        let _ = writeln!(out, "epsilon = {}", self.epsilon);
        let _ = writeln!(out, "quantiles = {}", join(&strs(&self.quantiles)));
        let _ = writeln!(out, "solver = {}", self.solver.as_str());
        let _ = writeln!(out, "sweep_n = {}", join(&strs(&self.sweep_n)));
        let _ = writeln!(out, "sweep_dt = {}", join(&strs(&self.sweep_dt)));
        let _ = writeln!(out, "sweep_seeds = {}", join(&strs(&self.sweep_seeds)));
        let _ = writeln!(out, "ks_seeds = {}", self.ks_seeds);
        let _ = writeln!(out, "ks_times = {}", self.ks_times);
        let _ = writeln!(out, "ks_alpha = {}", self.ks_alpha);
        let _ = writeln!(out, "length_scale = {}", self.length_scale);
        let _ = writeln!(out, "time_scale = {}", self.time_scale);
        if let Some(path) = &self.out {
            let _ = writeln!(out, "out = {}", path.display());
        }
        let _ = writeln!(out, "\n[{}]", s.name);
        let _ = writeln!(out, "hbar = {}", s.hbar);
        let _ = writeln!(out, "m = {}", s.mass);
        let _ = writeln!(out, "x_lo = {}", s.domain.lo);
        let _ = writeln!(out, "x_hi = {}", s.domain.hi);
        let _ = writeln!(out, "t0 = {}", s.t_range.0);
        let _ = writeln!(out, "t1 = {}", s.t_range.1);
        match &s.model {
            Model::Harmonic { omega, levels } => {
                let _ = writeln!(out, "omega = {omega}");
                let _ = writeln!(out, "levels = {}", join(&strs(levels)));
            }
            Model::FreeGaussian { a } => {
                let _ = writeln!(out, "a = {a}");
            }
            Model::TwoSlit { y0, sigma0 } => {
                let _ = writeln!(out, "y0 = {y0}");
                let _ = writeln!(out, "sigma0 = {sigma0}");
            }
            Model::SquareWell { width } => {
                let _ = writeln!(out, "width = {width}");
            }
            Model::Uniform => {}
        }
        out
    }
}

fn apply_scenario_key(s: &mut Scenario, key: &str, value: &str) -> Result<()> {
    match (key, &mut s.model) {
        ("hbar", _) => s.hbar = num(key, value)?,
        ("m", _) => s.mass = num(key, value)?,
        ("x_lo", _) => s.domain = Domain { lo: num(key, value)?, hi: s.domain.hi },
        ("x_hi", _) => s.domain = Domain { lo: s.domain.lo, hi: num(key, value)? },
        ("t0", _) => s.t_range.0 = num(key, value)?,
        ("t1", _) => s.t_range.1 = num(key, value)?,
        ("omega", Model::Harmonic { omega, .. }) => *omega = num(key, value)?,
        ("levels", Model::Harmonic { levels, .. }) => *levels = list(key, value)?,
        ("a", Model::FreeGaussian { a }) => *a = num(key, value)?,
        ("y0", Model::TwoSlit { y0, .. }) => *y0 = num(key, value)?,
        ("sigma0", Model::TwoSlit { sigma0, .. }) => *sigma0 = num(key, value)?,
        ("width", Model::SquareWell { width }) => *width = num(key, value)?,
        (other, _) => return Err(Error::Parse(format!("unknown key '{other}' for scenario '{}'", s.name))),
    }
    Ok(())
}

fn at_line(lineno: usize, err: Error) -> Error {
    match err {
        Error::Parse(msg) => Error::Parse(format!("line {lineno}: {msg}")),
        Error::Validation(msg) => Error::Validation(format!("line {lineno}: {msg}")),
        other => other,
    }
}

fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| Error::Validation(format!("'{value}' is not a valid value for {key}")))
}

pub fn list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value.split(',').map(|v| num(key, v)).collect()
}

fn strs<T: ToString>(v: &[T]) -> Vec<String> {
    v.iter().map(ToString::to_string).collect()
}
