//! Statistical checks of the sampler, the generator and the error metrics.

use density_sampling::generator::{coordinate_seed, rank_for_quantile};
use density_sampling::metrics::{
    convergence_sweep, ks_critical_value, ks_statistic, quantile_noise, track_against_quantile_oracle, OracleAnchor,
};
use density_sampling::oracles::CpfTable;
use density_sampling::sampling::step_stream;
use density_sampling::wavefunctions::{estimate_rho_max_at, CATALOG};
use density_sampling::{
    eval_rho, generate_ensemble, generate_separable, rejection_sample, CpfCache, MultiDensity, SamplerConfig, Scenario,
    TimeGrid,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

const EPSILON: f64 = 1e-3;

fn trapezoid_mass(s: &Scenario, t: f64) -> f64 {
    let m = 20_000;
    let h = s.width() / m as f64;
    let inner: f64 = (1..m).map(|k| eval_rho(s, s.domain.lo + k as f64 * h, t)).sum();
    h * (inner + 0.5 * (eval_rho(s, s.domain.lo, t) + eval_rho(s, s.domain.hi, t)))
}

#[test]
fn acceptance_fraction_matches_binomial_expectation() {
    let n = 100_000;
    for (k, name) in CATALOG.iter().enumerate() {
        let s = Scenario::by_name(name).unwrap();
        let t = 0.5 * (s.t_range.0 + s.t_range.1);
        let bound = estimate_rho_max_at(&s, t, 4096).unwrap();
        let mut rng = step_stream(500 + k as u64, 0);
        let batch = rejection_sample(|x| eval_rho(&s, x, t), t, s.domain, bound, n, &mut rng).unwrap();
        let p = trapezoid_mass(&s, t) / (bound * s.width());
        // accepted count is fixed, so the fraction estimate has variance p^2 (1 - p) / n
        let se = (p * p * (1.0 - p) / n as f64).sqrt();
        assert!(
            (batch.accepted_fraction - p).abs() <= 3.0 * se + 1e-12,
            "{name}: fraction {} vs expected {p} (se {se})",
            batch.accepted_fraction
        );
    }
}

#[test]
fn samples_fit_the_quadrature_cpf() {
    let n = 10_000;
    let critical = ks_critical_value(n, 0.01);
    let mut times_rng = ChaCha8Rng::seed_from_u64(77);
    for name in CATALOG {
        let s = Scenario::by_name(name).unwrap();
        for j in 0..5u64 {
            let t = times_rng.gen_range(s.t_range.0..=s.t_range.1);
            let bound = estimate_rho_max_at(&s, t, 4096).unwrap();
            let table = CpfTable::build(&s, t);
            let passes = (0..100u64)
                .into_par_iter()
                .filter(|&seed| {
                    let mut rng = step_stream(seed, j);
                    let batch = rejection_sample(|x| eval_rho(&s, x, t), t, s.domain, bound, n, &mut rng).unwrap();
                    ks_statistic(&batch.values, |x| table.cpf(x)).unwrap() < critical
                })
                .count();
            assert!(passes >= 95, "{name} at t={t}: {passes}/100 batches pass KS");
        }
    }
}

#[test]
fn stationary_median_does_not_drift() {
    let s = Scenario::eigenstate();
    let n = 10_000;
    let grid = TimeGrid::covering(0.0, 3.0, 0.1).unwrap();
    let ensemble = generate_ensemble(&s, &grid, &SamplerConfig::new(8, n, 0.1, EPSILON).unwrap()).unwrap();
    let path = ensemble.trajectory(rank_for_quantile(0.5, n));
    let times: Vec<f64> = grid.times().collect();
    let (tm, xm) = (times.iter().sum::<f64>() / times.len() as f64, path.iter().sum::<f64>() / path.len() as f64);
    let slope = times.iter().zip(&path).map(|(t, x)| (t - tm) * (x - xm)).sum::<f64>()
        / times.iter().map(|t| (t - tm).powi(2)).sum::<f64>();
    let drift = (slope * (grid.t_end() - grid.t0())).abs();
    let sigma_q = (0.25 / n as f64).sqrt() / eval_rho(&s, xm, 0.0);
    assert!(drift <= 3.0 * sigma_q, "median drift {drift} over the run vs 3 sigma_q = {}", 3.0 * sigma_q);
}

#[test]
fn sampled_trajectories_fluctuate_at_quantile_noise() {
    let s = Scenario::harmonic();
    let n = 10_000;
    let grid = TimeGrid::covering(0.0, 3.0, 0.1).unwrap();
    let cache = CpfCache::new(s.clone());
    let ranks: Vec<usize> = (1..=9).map(|k| rank_for_quantile(k as f64 / 10.0, n)).collect();
    let runs: Vec<_> = (0..100u64)
        .map(|seed| {
            let config = SamplerConfig::new(1_000 + seed, n, 0.1, EPSILON).unwrap();
            let ensemble = generate_ensemble(&s, &grid, &config).unwrap();
            track_against_quantile_oracle(&cache, &ensemble, &ranks, OracleAnchor::Nominal).unwrap()
        })
        .collect();
    let mut checked = 0;
    for j in 0..ranks.len() {
        let oracle = &runs[0][j].oracle;
        for step in 0..grid.len() {
            let rho = eval_rho(&s, oracle.positions[step], grid.time(step));
            if rho <= 1e-2 {
                continue;
            }
            let ms = runs.iter().map(|r| r[j].report.per_step_errors[step].powi(2)).sum::<f64>() / runs.len() as f64;
            let bound = 3.0 * quantile_noise(runs[0][j].p, n, rho);
            assert!(ms.sqrt() <= bound, "P={} step {step}: rms {} > {bound}", runs[0][j].p, ms.sqrt());
            checked += 1;
        }
    }
    assert!(checked > 200);
}

#[test]
fn density_weighted_errors_stay_small() {
    let configs = [
        (Scenario::harmonic(), 10_000, 0.1, 21),
        (Scenario::free(), 100_000, 0.15, 22),
        (Scenario::two_slit(), 100_000, 100.0 / 30.0, 23),
        (Scenario::square_well(), 10_000, 0.05, 24),
    ];
    for (s, n, dt, seed) in configs {
        let grid = TimeGrid::covering(s.t_range.0, s.t_range.1, dt).unwrap();
        let ensemble = generate_ensemble(&s, &grid, &SamplerConfig::new(seed, n, dt, EPSILON).unwrap()).unwrap();
        let cache = CpfCache::new(s.clone());
        let ranks: Vec<usize> = (1..=9).map(|k| rank_for_quantile(k as f64 / 10.0, n)).collect();
        let tracked = track_against_quantile_oracle(&cache, &ensemble, &ranks, OracleAnchor::SampledStart).unwrap();
        let mut normalized: Vec<f64> = tracked.iter().flat_map(|tr| tr.report.normalized_errors.clone()).collect();
        normalized.sort_by(f64::total_cmp);
        let p99 = normalized[(0.99 * (normalized.len() - 1) as f64).round() as usize];
        assert!(p99 < 0.05, "{}: 99th percentile of rho-weighted error {p99}", s.name);
        for tr in &tracked {
            assert!(tr.report.sup_error >= tr.report.rms_error && tr.report.rms_error >= 0.0);
        }
    }
}

#[test]
fn step_size_leaves_positional_error_unchanged() {
    let s = Scenario::harmonic();
    let dts = [0.2, 0.1, 0.05];
    let seeds: Vec<u64> = (1..=10).collect();
    let report = convergence_sweep(&s, &[10_000], &dts, &seeds, &[0.5], EPSILON).unwrap();
    let stats: Vec<(f64, f64)> = dts
        .iter()
        .map(|&dt| {
            let rms: Vec<f64> = report.cell(10_000, dt, 0.5).map(|r| r.rms_error).collect();
            assert_eq!(rms.len(), seeds.len());
            let mean = rms.iter().sum::<f64>() / rms.len() as f64;
            let var = rms.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (rms.len() - 1) as f64;
            (mean, (var / rms.len() as f64).sqrt())
        })
        .collect();
    for a in 0..stats.len() {
        for b in a + 1..stats.len() {
            let ((ma, sa), (mb, sb)) = (stats[a], stats[b]);
            assert!(
                (ma - mb).abs() <= 3.0 * (sa * sa + sb * sb).sqrt(),
                "mean rms at dt={} is {ma}, at dt={} is {mb}",
                dts[a],
                dts[b]
            );
        }
    }
}

#[test]
fn separable_coordinate_matches_standalone_run() {
    let s = Scenario::free();
    let grid = TimeGrid::covering(0.0, 3.0, 0.15).unwrap();
    let config = SamplerConfig::new(99, 2_000, 0.15, EPSILON).unwrap();
    let density = MultiDensity::Separable(vec![s.clone(), s.clone()]);
    let set = generate_separable(&density, &grid, &config, &[vec![0.1, -0.2], vec![-0.5, 0.3]]).unwrap();
    for d in 0..2 {
        let alone = generate_ensemble(&s, &grid, &config.with_seed(coordinate_seed(99, d))).unwrap();
        assert_eq!(alone, set.ensembles[d]);
    }
    assert_ne!(set.ensembles[0].slice(0), set.ensembles[1].slice(0));
    for k in 0..2 {
        assert_eq!(set.path(k).len(), grid.len());
        assert!(set.bindings[k].iter().all(|&i| i < config.n));
    }
}
