//! Error measures between sampled and reference trajectories, the KS
//! statistic, and N/δt convergence sweeps.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::generator::{generate_ensemble, TrajectoryEnsemble};
use crate::grid::TimeGrid;
use crate::oracles::{CpfCache, OracleTrajectory};
use crate::sampling::SamplerConfig;
use crate::wavefunctions::{eval_rho, Scenario};

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub per_step_errors: Vec<f64>,
    pub sup_error: f64,
    pub rms_error: f64,
    /// Per-step error times ρ at the oracle position (dimensionless).
    pub normalized_errors: Vec<f64>,
}

/// Per-step absolute differences between a sampled trajectory on `grid` and an oracle.
pub fn compare_trajectories(
    s: &Scenario,
    grid: &TimeGrid,
    ds: &[f64],
    oracle: &OracleTrajectory,
) -> Result<ErrorReport> {
    if oracle.grid != *grid {
        return Err(Error::GridMismatch(format!("trajectory grid {grid:?} vs oracle grid {:?}", oracle.grid)));
    }
    if ds.len() != grid.len() || oracle.positions.len() != grid.len() {
        return Err(Error::GridMismatch(format!(
            "expected {} positions, got {} and {}",
            grid.len(),
            ds.len(),
            oracle.positions.len()
        )));
    }
    let per_step_errors: Vec<f64> = ds.iter().zip(&oracle.positions).map(|(a, b)| (a - b).abs()).collect();
    let normalized_errors = per_step_errors
        .iter()
        .zip(&oracle.positions)
        .enumerate()
        .map(|(n, (e, &x))| e * eval_rho(s, x, grid.time(n)))
        .collect();
    let sup_error = per_step_errors.iter().copied().fold(0.0, f64::max);
    let rms_error = (per_step_errors.iter().map(|e| e * e).sum::<f64>() / per_step_errors.len() as f64).sqrt();
    Ok(ErrorReport { per_step_errors, sup_error, rms_error, normalized_errors })
}

/// Two-sided one-sample KS statistic of `samples` against `cdf`.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Validation("KS statistic of an empty batch".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok(sorted.iter().enumerate().fold(0.0, |d, (i, &x)| {
        let f = cdf(x);
        let upper = ((i + 1) as f64 / n - f).abs();
        let lower = (i as f64 / n - f).abs();
        d.max(upper).max(lower)
    }))
}

/// Asymptotic KS critical value `sqrt(-ln(alpha/2) / 2) / sqrt(n)`; 1.628/√n at α = 0.01.
pub fn ks_critical_value(n: usize, alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt() / (n as f64).sqrt()
}

/// How the oracle quantile for a sampled trajectory is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleAnchor {
    /// `P = (i + 1/2) / N`.
    Nominal,
    /// `P = CPF(x_i(t_0), t_0)`: the oracle starts from the sampled initial position.
    SampledStart,
}

/// The oracle quantile for trajectory `rank` of `ensemble`.
pub fn anchor_quantile(cache: &CpfCache, ensemble: &TrajectoryEnsemble, rank: usize, anchor: OracleAnchor) -> f64 {
    match anchor {
        OracleAnchor::Nominal => ensemble.nominal_quantile(rank),
        OracleAnchor::SampledStart => {
            let t0 = ensemble.grid().t0();
            cache.cpf(ensemble.position(rank, 0), t0).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON)
        }
    }
}

/// Tracked trajectory with its quantile oracle and error report.
#[derive(Debug, Clone)]
pub struct TrackedTrajectory {
    pub rank: usize,
    pub p: f64,
    pub positions: Vec<f64>,
    pub oracle: OracleTrajectory,
    pub report: ErrorReport,
}

/// Compares each trajectory in `ranks` against its quantile oracle.
pub fn track_against_quantile_oracle(
    cache: &CpfCache,
    ensemble: &TrajectoryEnsemble,
    ranks: &[usize],
    anchor: OracleAnchor,
) -> Result<Vec<TrackedTrajectory>> {
    let grid = ensemble.grid();
    ranks
        .iter()
        .map(|&rank| {
            let p = anchor_quantile(cache, ensemble, rank, anchor);
            let oracle = cache.quantile_trajectory(p, grid)?;
            let positions = ensemble.trajectory(rank);
            let report = compare_trajectories(cache.scenario(), grid, &positions, &oracle)?;
            Ok(TrackedTrajectory { rank, p, positions, oracle, report })
        })
        .collect()
}

/// Quantile-estimator standard deviation `sqrt(P(1-P)/N) / rho`.
pub fn quantile_noise(p: f64, n: usize, rho: f64) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt() / rho
}

/// Largest step-to-step displacement along a trajectory.
pub fn max_step_displacement(positions: &[f64]) -> f64 {
    positions.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max)
}

/// Mean error where ρ is above its median vs where it is at or below it.
/// Returns `(high_density_mean, low_density_mean)`.
pub fn regional_error_contrast(samples: &[(f64, f64)]) -> Result<(f64, f64)> {
    if samples.len() < 2 {
        return Err(Error::Validation("need at least two (error, rho) samples".into()));
    }
    let mut rhos: Vec<f64> = samples.iter().map(|&(_, r)| r).collect();
    rhos.sort_by(f64::total_cmp);
    let median = median_sorted(&rhos);
    let mean = |it: Vec<f64>| it.iter().sum::<f64>() / it.len().max(1) as f64;
    let high = mean(samples.iter().filter(|s| s.1 > median).map(|s| s.0).collect());
    let low = mean(samples.iter().filter(|s| s.1 <= median).map(|s| s.0).collect());
    Ok((high, low))
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    median_sorted(&v)
}

fn median_sorted(v: &[f64]) -> f64 {
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub scenario: String,
    pub n: usize,
    pub dt: f64,
    pub seed: u64,
    pub p: f64,
    pub sup_error: f64,
    pub rms_error: f64,
    pub max_step_dx: f64,
    /// The loose `2L/N` displacement scale, reported for reference.
    pub two_l_over_n: f64,
    /// `None` on success, the error message on a failed cell.
    pub failure: Option<String>,
}

impl SweepRow {
    pub fn is_ok(&self) -> bool {
        self.failure.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub scenario: String,
    pub t_range: (f64, f64),
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    /// Successful rows matching `(n, dt, p)`.
    pub fn cell(&self, n: usize, dt: f64, p: f64) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(move |r| r.is_ok() && r.n == n && r.dt == dt && r.p == p)
    }
}

/// Runs every `(N, δt, seed)` combination and compares the trajectories at
/// `quantiles` against quantile oracles anchored at the sampled start.
/// Failed cells become rows with `failure` set; the sweep carries on.
pub fn convergence_sweep(
    s: &Scenario,
    n_list: &[usize],
    dt_list: &[f64],
    seeds: &[u64],
    quantiles: &[f64],
    epsilon: f64,
) -> Result<SweepReport> {
    if n_list.is_empty() || dt_list.is_empty() || seeds.is_empty() || quantiles.is_empty() {
        return Err(Error::Validation("sweep lists must be nonempty".into()));
    }
    if let Some(p) = quantiles.iter().find(|p| !(**p > 0.0 && **p < 1.0)) {
        return Err(Error::Validation(format!("quantile must lie in (0, 1), got {p}")));
    }
    let cache = CpfCache::new(s.clone());
    let width = s.width();
    let cells: Vec<(usize, f64, u64)> = n_list
        .iter()
        .flat_map(|&n| dt_list.iter().flat_map(move |&dt| seeds.iter().map(move |&seed| (n, dt, seed))))
        .collect();

    let rows = cells
        .par_iter()
        .map(|&(n, dt, seed)| {
            let blank = |p: f64| SweepRow {
                scenario: s.name.clone(),
                n,
                dt,
                seed,
                p,
                sup_error: f64::NAN,
                rms_error: f64::NAN,
                max_step_dx: f64::NAN,
                two_l_over_n: 2.0 * width / n as f64,
                failure: None,
            };
            let run = || -> Result<Vec<SweepRow>> {
                let grid = TimeGrid::covering(s.t_range.0, s.t_range.1, dt)?;
                let config = SamplerConfig::new(seed, n, dt, epsilon)?;
                let ensemble = generate_ensemble(s, &grid, &config)?;
                let ranks: Vec<usize> = quantiles.iter().map(|&p| crate::generator::rank_for_quantile(p, n)).collect();
                let tracked = track_against_quantile_oracle(&cache, &ensemble, &ranks, OracleAnchor::SampledStart)?;
                Ok(tracked
                    .iter()
                    .zip(quantiles)
                    .map(|(tr, &p)| SweepRow {
                        sup_error: tr.report.sup_error,
                        rms_error: tr.report.rms_error,
                        max_step_dx: max_step_displacement(&tr.positions),
                        ..blank(p)
                    })
                    .collect())
            };
            run().unwrap_or_else(|err| {
                quantiles.iter().map(|&p| SweepRow { failure: Some(err.to_string()), ..blank(p) }).collect()
            })
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();

    Ok(SweepReport { scenario: s.name.clone(), t_range: s.t_range, rows })
}
