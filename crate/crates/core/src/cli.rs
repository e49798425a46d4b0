//! Command-line front end: config resolution, run orchestration, CSV output
//! and the metadata sidecar.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{list, RunConfig, SolverChoice};
use crate::error::{Error, Result};
use crate::generator::{ensemble_bound, generate_ensemble, rank_for_quantile, select_by_quantile};
use crate::grid::TimeGrid;
use crate::io::{write_compare, write_ks, write_sweep, CompareRow, KsRow, TrajectoryTable};
use crate::metrics::{
    convergence_sweep, ks_critical_value, ks_statistic, max_step_displacement, track_against_quantile_oracle,
    OracleAnchor,
};
use crate::oracles::{guidance_trajectory, CpfCache, OracleTolerances};
use crate::sampling::{check_parameters, rejection_sample, step_stream, SamplerConfig, PRNG_ID};
use crate::wavefunctions::{estimate_rho_max_at, eval_rho, CATALOG};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;
pub const EXIT_NODE: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "dsbohm", version, about = "Bohmian trajectories by density sampling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample an ensemble and write selected trajectories.
    Generate {
        #[command(flatten)]
        common: CommonArgs,
        /// Write every trajectory instead of the quantile selection.
        #[arg(long)]
        all: bool,
    },
    /// Reference trajectories from CPF inversion and/or the guidance law.
    Oracle {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        solver: Option<String>,
    },
    /// Error of sampled trajectories against quantile oracles.
    Compare {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Error table over N x dt x seed.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        sweep_n: Option<String>,
        #[arg(long)]
        sweep_dt: Option<String>,
        #[arg(long)]
        sweep_seeds: Option<String>,
    },
    /// Kolmogorov-Smirnov check of the sampler against the quadrature CPF.
    SampleTest {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        ks_seeds: Option<usize>,
        #[arg(long)]
        ks_times: Option<usize>,
        #[arg(long)]
        alpha: Option<f64>,
    },
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// key = value config file
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Particle count N.
    #[arg(long = "particles", short = 'n')]
    n: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Comma-separated quantile labels in (0, 1).
    #[arg(long)]
    quantiles: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    length_scale: Option<f64>,
    #[arg(long)]
    time_scale: Option<f64>,
}

impl CommonArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut config = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
                RunConfig::parse(&text, self.scenario.as_deref())?
            }
            None => {
                let name = self
                    .scenario
                    .as_deref()
                    .ok_or_else(|| Error::Parse("either --scenario or --config is required".into()))?;
                RunConfig::for_scenario(name)?
            }
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(n) = self.n {
            config.n = n;
        }
        if let Some(dt) = self.dt {
            config.dt = dt;
            config.sweep_dt = vec![dt];
        }
        if let Some(eps) = self.epsilon {
            config.epsilon = eps;
        }
        if let Some(q) = &self.quantiles {
            config.quantiles = list("quantiles", q)?;
        }
        if let Some(out) = &self.out {
            config.out = Some(out.clone());
        }
        if let Some(s) = self.length_scale {
            config.length_scale = s;
        }
        if let Some(s) = self.time_scale {
            config.time_scale = s;
        }
        Ok(config)
    }
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Unsupported(_) | Error::Parse(_) => EXIT_USAGE,
        Error::Validation(_) | Error::BoundViolation { .. } | Error::Boundary(_) | Error::GridMismatch(_) => {
            EXIT_VALIDATION
        }
        Error::NodeRegion { .. } | Error::NodeEncounter { .. } => EXIT_NODE,
        Error::Io(_) => EXIT_IO,
    }
}

/// Parses `argv` (including the program name), runs the command, and returns the exit status.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return err.exit_code();
        }
    };
    match execute(cli.command) {
        Ok(path) => {
            eprintln!("wrote {}", path.display());
            EXIT_OK
        }
        Err(err) => {
            eprintln!("error: {err}");
            if let Error::Unsupported(_) | Error::Parse(_) = err {
                eprintln!(
                    "usage: dsbohm <generate|oracle|compare|sweep|sample-test> --scenario <{}> [options]",
                    CATALOG.join("|")
                );
            }
            exit_code(&err)
        }
    }
}

fn execute(command: Command) -> Result<PathBuf> {
    match command {
        Command::Generate { common, all } => {
            let config = common.resolve()?;
            config.validate()?;
            run_generate(&config, all)
        }
        Command::Oracle { common, solver } => {
            let mut config = common.resolve()?;
            if let Some(s) = solver {
                config.solver = s.parse()?;
            }
            config.validate()?;
            run_oracle(&config)
        }
        Command::Compare { common } => {
            let config = common.resolve()?;
            config.validate()?;
            run_compare(&config)
        }
        Command::Sweep { common, sweep_n, sweep_dt, sweep_seeds } => {
            let mut config = common.resolve()?;
            if let Some(v) = sweep_n {
                config.sweep_n = list("sweep_n", &v)?;
            }
            if let Some(v) = sweep_dt {
                config.sweep_dt = list("sweep_dt", &v)?;
            }
            if let Some(v) = sweep_seeds {
                config.sweep_seeds = list("sweep_seeds", &v)?;
            }
            config.validate()?;
            run_sweep(&config)
        }
        Command::SampleTest { common, ks_seeds, ks_times, alpha } => {
            let mut config = common.resolve()?;
            if let Some(v) = ks_seeds {
                config.ks_seeds = v;
            }
            if let Some(v) = ks_times {
                config.ks_times = v;
            }
            if let Some(v) = alpha {
                config.ks_alpha = v;
            }
            config.validate()?;
            run_sample_test(&config)
        }
    }
}

fn output_path(config: &RunConfig, command: &str) -> PathBuf {
    config.out.clone().unwrap_or_else(|| PathBuf::from(format!("{}-{command}.csv", config.scenario.name)))
}

fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".meta.txt");
    PathBuf::from(name)
}

fn write_outputs<F>(config: &RunConfig, command: &str, extra_meta: &str, body: F) -> Result<PathBuf>
where
    F: FnOnce(&mut BufWriter<File>) -> Result<()>,
{
    let out = output_path(config, command);
    let mut w = BufWriter::new(File::create(&out).map_err(|e| Error::Io(format!("{}: {e}", out.display())))?);
    body(&mut w)?;
    w.flush()?;

    let tol = OracleTolerances::default();
    let mut meta = String::new();
    let _ = writeln!(meta, "command = {command}");
    let _ = writeln!(meta, "seed = {}", config.seed);
    let _ = writeln!(meta, "prng = {PRNG_ID}");
    let _ = writeln!(meta, "cpf_points = {}", tol.cpf_points);
    let _ = writeln!(meta, "inversion_rel_tol = {:e}", tol.inversion_rel_tol);
    let _ = writeln!(meta, "rk4_substeps = {}", tol.rk4_substeps);
    meta.push_str(extra_meta);
    let _ = writeln!(meta, "\n# config");
    meta.push_str(&config.to_text());
    fs::write(sidecar_path(&out), meta)?;
    Ok(out)
}

fn run_grid(config: &RunConfig) -> Result<TimeGrid> {
    TimeGrid::covering(config.scenario.t_range.0, config.scenario.t_range.1, config.dt)
}

fn parameter_notes(config: &RunConfig, bound: f64) -> Result<String> {
    let mut notes = String::new();
    let _ = writeln!(notes, "rho_max_bound = {bound}");
    for w in check_parameters(config.scenario.width(), bound, config.epsilon, config.n, config.dt)? {
        eprintln!("warning: {w}");
        let _ = writeln!(notes, "warning = {w}");
    }
    Ok(notes)
}

fn scaled_table(config: &RunConfig, grid: &TimeGrid, ranks: Vec<usize>, columns: Vec<Vec<f64>>) -> TrajectoryTable {
    let times = grid.times().map(|t| t * config.time_scale).collect();
    let columns = columns.into_iter().map(|c| c.into_iter().map(|x| x * config.length_scale).collect()).collect();
    TrajectoryTable::new(times, ranks, columns)
}

fn run_generate(config: &RunConfig, all: bool) -> Result<PathBuf> {
    let s = &config.scenario;
    let grid = run_grid(config)?;
    let sampler = SamplerConfig::new(config.seed, config.n, config.dt, config.epsilon)?;
    let bound = ensemble_bound(s, &grid)?;
    let mut meta = parameter_notes(config, bound)?;
    let ensemble = generate_ensemble(s, &grid, &sampler)?;
    let ranks = if all { (0..config.n).collect() } else { select_by_quantile(&ensemble, &config.quantiles)? };
    let columns = ranks.iter().map(|&i| ensemble.trajectory(i)).collect();
    let fractions = &ensemble.meta.accepted_fractions;
    let mean_fraction = fractions.iter().sum::<f64>() / fractions.len() as f64;
    let _ = writeln!(meta, "mean_accepted_fraction = {mean_fraction}");
    let table = scaled_table(config, &grid, ranks, columns);
    write_outputs(config, "generate", &meta, |w| table.write(w))
}

fn run_oracle(config: &RunConfig) -> Result<PathBuf> {
    let s = &config.scenario;
    let grid = run_grid(config)?;
    let cache = CpfCache::new(s.clone());
    let ranks: Vec<usize> = config.quantiles.iter().map(|&p| rank_for_quantile(p, config.n)).collect();
    let mut blocks = Vec::new();
    if matches!(config.solver, SolverChoice::Quantile | SolverChoice::Both) {
        let columns = config
            .quantiles
            .iter()
            .map(|&p| cache.quantile_trajectory(p, &grid).map(|o| o.positions))
            .collect::<Result<Vec<_>>>()?;
        blocks.push(("quantile".to_string(), scaled_table(config, &grid, ranks.clone(), columns)));
    }
    if matches!(config.solver, SolverChoice::Guidance | SolverChoice::Both) {
        let columns = config
            .quantiles
            .iter()
            .map(|&p| {
                let x0 = cache.invert(p, grid.t0())?;
                guidance_trajectory(s, x0, &grid).map(|o| o.positions)
            })
            .collect::<Result<Vec<_>>>()?;
        blocks.push(("guidance".to_string(), scaled_table(config, &grid, ranks.clone(), columns)));
    }
    let table = TrajectoryTable::tagged(blocks)?;
    write_outputs(config, "oracle", "", |w| table.write(w))
}

fn run_compare(config: &RunConfig) -> Result<PathBuf> {
    let s = &config.scenario;
    let grid = run_grid(config)?;
    let sampler = SamplerConfig::new(config.seed, config.n, config.dt, config.epsilon)?;
    let bound = ensemble_bound(s, &grid)?;
    let meta = parameter_notes(config, bound)?;
    let ensemble = generate_ensemble(s, &grid, &sampler)?;
    let ranks = select_by_quantile(&ensemble, &config.quantiles)?;
    let cache = CpfCache::new(s.clone());
    let tracked = track_against_quantile_oracle(&cache, &ensemble, &ranks, OracleAnchor::SampledStart)?;
    let rows: Vec<CompareRow> = tracked
        .iter()
        .map(|tr| CompareRow {
            p: tr.p,
            rank: tr.rank,
            sup_error: tr.report.sup_error,
            rms_error: tr.report.rms_error,
            max_normalized_error: tr.report.normalized_errors.iter().copied().fold(0.0, f64::max),
            max_step_dx: max_step_displacement(&tr.positions),
            two_l_over_n: 2.0 * s.width() / config.n as f64,
        })
        .collect();
    write_outputs(config, "compare", &meta, |w| write_compare(w, &rows, config.length_scale))
}

fn run_sweep(config: &RunConfig) -> Result<PathBuf> {
    let report = convergence_sweep(
        &config.scenario,
        &config.sweep_n,
        &config.sweep_dt,
        &config.sweep_seeds,
        &config.quantiles,
        config.epsilon,
    )?;
    let failed = report.rows.iter().filter(|r| !r.is_ok()).count();
    let meta = format!("rows = {}\nfailed_rows = {failed}\n", report.rows.len());
    write_outputs(config, "sweep", &meta, |w| write_sweep(w, &report.rows, config.length_scale, config.time_scale))
}

/// KS checks at `ks_times` evenly spaced times for seeds `seed..seed + ks_seeds`.
pub fn sample_test_rows(config: &RunConfig) -> Result<Vec<KsRow>> {
    let s = &config.scenario;
    let (t0, t1) = s.t_range;
    let times: Vec<f64> = match config.ks_times {
        0 => return Err(Error::Validation("ks_times must be at least 1".into())),
        1 => vec![t0],
        k => (0..k).map(|j| t0 + (t1 - t0) * j as f64 / (k - 1) as f64).collect(),
    };
    let cache = CpfCache::new(s.clone());
    let critical = ks_critical_value(config.n, config.ks_alpha);
    let mut rows = Vec::new();
    for (j, &t) in times.iter().enumerate() {
        let bound = estimate_rho_max_at(s, t, 4096)?;
        let table = cache.table(t);
        for k in 0..config.ks_seeds as u64 {
            let seed = config.seed.wrapping_add(k);
            let mut rng = step_stream(seed, j as u64);
            let batch = rejection_sample(|x| eval_rho(s, x, t), t, s.domain, bound, config.n, &mut rng)?;
            let statistic = ks_statistic(&batch.values, |x| table.cpf(x))?;
            rows.push(KsRow { seed, t, n: config.n, statistic, critical });
        }
    }
    Ok(rows)
}

fn run_sample_test(config: &RunConfig) -> Result<PathBuf> {
    let rows = sample_test_rows(config)?;
    let passed = rows.iter().filter(|r| r.passed()).count();
    let meta = format!("ks_alpha = {}\nks_passed = {passed}/{}\n", config.ks_alpha, rows.len());
    write_outputs(config, "sample-test", &meta, |w| write_ks(w, &rows, config.time_scale))
}
