//! Checks of the closed-form scenarios and reference solvers against
//! independent computations.

use std::f64::consts::PI;

use density_sampling::wavefunctions::{eval_velocity_fd, ScenarioKind, CATALOG};
use density_sampling::{eval_rho, eval_velocity, guidance_trajectory, quantile_trajectory, Scenario, TimeGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::erf::erf;

fn catalog() -> Vec<Scenario> {
    CATALOG.iter().map(|n| Scenario::by_name(n).unwrap()).collect()
}

/// Composite Simpson on `2m` panels.
fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, m: usize) -> f64 {
    let panels = 2 * m;
    let h = (b - a) / panels as f64;
    let mut sum = f(a) + f(b);
    for k in 1..panels {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(a + k as f64 * h);
    }
    sum * h / 3.0
}

#[test]
fn densities_stay_normalized() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for s in catalog() {
        for _ in 0..20 {
            let t = rng.gen_range(s.t_range.0..=s.t_range.1);
            let mass = simpson(|x| eval_rho(&s, x, t), s.domain.lo, s.domain.hi, 10_000);
            assert!((mass - 1.0).abs() <= 1e-6, "{} at t={t}: mass {mass}", s.name);
        }
    }
}

#[test]
fn analytic_velocity_matches_finite_difference() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for s in catalog().into_iter().filter(|s| s.kind() == ScenarioKind::WavefunctionBacked) {
        let mut checked = 0;
        while checked < 100 {
            let x = rng.gen_range(s.domain.lo..=s.domain.hi);
            let t = rng.gen_range(s.t_range.0..=s.t_range.1);
            if eval_rho(&s, x, t) <= 1e-3 {
                continue;
            }
            let exact = eval_velocity(&s, x, t).unwrap();
            let fd = eval_velocity_fd(&s, x, t).unwrap();
            // relative, with unit velocity as the floor for near-zero fields
            assert!(
                (exact - fd).abs() <= 1e-6 * exact.abs().max(1.0),
                "{} at ({x}, {t}): analytic {exact}, difference quotient {fd}",
                s.name
            );
            checked += 1;
        }
    }
}

#[test]
fn harmonic_density_has_the_oscillator_period() {
    let s = Scenario::harmonic();
    let period = 2.0 * PI / 3.0;
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..500 {
        let x = rng.gen_range(-5.0..=5.0);
        let t = rng.gen_range(0.0..=3.0);
        let (a, b) = (eval_rho(&s, x, t), eval_rho(&s, x, t + period));
        assert!((a - b).abs() <= 1e-10, "rho({x}, {t}) = {a} vs {b} one period later");
    }
}

#[test]
fn stationary_state_has_no_flow() {
    let s = Scenario::eigenstate();
    for x in [-2.0, -0.3, 0.0, 0.7, 1.9] {
        assert!(eval_velocity(&s, x, 1.3).unwrap().abs() <= 1e-12);
    }
    let grid = TimeGrid::covering(0.0, 3.0, 0.1).unwrap();
    let g = guidance_trajectory(&s, 0.4, &grid).unwrap();
    assert!(g.positions.iter().all(|x| *x == 0.4));
    let q = quantile_trajectory(&s, 0.3, &grid).unwrap();
    assert!(q.positions.iter().all(|x| (x - q.positions[0]).abs() <= 1e-9));
}

#[test]
fn harmonic_guidance_repeats_each_period() {
    let s = Scenario::harmonic();
    let per_period = 40;
    let grid = TimeGrid::new(0.0, 2.0 * PI / 3.0 / per_period as f64, 2 * per_period).unwrap();
    for p in [0.1, 0.5, 0.9] {
        let x0 = quantile_trajectory(&s, p, &grid).unwrap().positions[0];
        let g = guidance_trajectory(&s, x0, &grid).unwrap();
        for n in 0..=per_period {
            let (a, b) = (g.positions[n], g.positions[n + per_period]);
            assert!((a - b).abs() <= 1e-6, "P={p} step {n}: {a} vs {b}");
        }
    }
}

#[test]
fn oracles_follow_the_spreading_packet() {
    let s = Scenario::free();
    let grid = TimeGrid::covering(0.0, 3.0, 0.15).unwrap();
    let sigma0 = 1.0 / (2.0 * (PI / 2.0).sqrt());
    for z in [-1.5, -0.5, 0.0, 1.0, 2.0] {
        let p = 0.5 * (1.0 + erf(z / 2f64.sqrt()));
        let q = quantile_trajectory(&s, p, &grid).unwrap();
        let g = guidance_trajectory(&s, z * sigma0, &grid).unwrap();
        for (n, t) in grid.times().enumerate() {
            let exact = z * sigma0 * (1.0 + (PI * t).powi(2)).sqrt();
            // the quantile side carries the O(h^2) error of the 4096-point quadrature
            assert!((q.positions[n] - exact).abs() <= 1e-4, "quantile z={z} t={t}: {} vs {exact}", q.positions[n]);
            assert!((g.positions[n] - exact).abs() <= 1e-6, "guidance z={z} t={t}: {} vs {exact}", g.positions[n]);
        }
    }
}
