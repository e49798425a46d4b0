//! The density-sampling trajectory generator.
//!
//! At every grid time `t_n` (including `n = 0`) an independent batch of `N`
//! positions is drawn from ρ(·, t_n) and sorted; trajectory `i` is the chain
//! of `i`-th smallest positions. Nothing is differentiated or integrated, and
//! trajectories cannot cross because every slice is sorted.

use std::fmt;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::oracles::CpfCache;
use crate::sampling::{derive_seed, rejection_sample, step_stream, SamplerConfig, PRNG_ID};
use crate::wavefunctions::{estimate_rho_max_between, eval_rho, Scenario, MIN_BOUND_RESOLUTION};

/// Spatial resolution of the bound estimate used by the generator.
pub const BOUND_RESOLUTION_X: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleMeta {
    pub scenario: String,
    pub seed: u64,
    pub n: usize,
    pub dt: f64,
    pub bound: f64,
    pub prng: &'static str,
    /// Acceptance fraction of each step's batch.
    pub accepted_fractions: Vec<f64>,
}

/// `N` rank-linked trajectories on a [`TimeGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryEnsemble {
    grid: TimeGrid,
    /// Step-major: `slices[n][i]` is trajectory `i` at `t_n`, ascending in `i`.
    slices: Vec<Vec<f64>>,
    pub meta: EnsembleMeta,
}

impl TrajectoryEnsemble {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn n_particles(&self) -> usize {
        self.meta.n
    }

    pub fn position(&self, i: usize, n: usize) -> f64 {
        self.slices[n][i]
    }

    /// Sorted positions at step `n`.
    pub fn slice(&self, n: usize) -> &[f64] {
        &self.slices[n]
    }

    pub fn trajectory(&self, i: usize) -> Vec<f64> {
        self.slices.iter().map(|s| s[i]).collect()
    }

    /// Quantile label of trajectory `i` under the midpoint rule, `(i + 1/2) / N`.
    pub fn nominal_quantile(&self, i: usize) -> f64 {
        (i as f64 + 0.5) / self.meta.n as f64
    }

    /// True if every slice is nondecreasing in trajectory index.
    pub fn is_rank_ordered(&self) -> bool {
        self.slices.iter().all(|s| s.windows(2).all(|w| w[0] <= w[1]))
    }
}

/// Bound used by [`generate_ensemble`]: safety-scaled max of ρ over the
/// domain and the grid's time span, with every grid time on the t-axis.
pub fn ensemble_bound(s: &Scenario, grid: &TimeGrid) -> Result<f64> {
    let per_span = 4 * grid.steps();
    let nt = per_span * (MIN_BOUND_RESOLUTION - 1).div_ceil(per_span).max(1) + 1;
    estimate_rho_max_between(s, grid.t0(), grid.t_end(), BOUND_RESOLUTION_X, nt)
}

pub fn generate_ensemble(s: &Scenario, grid: &TimeGrid, config: &SamplerConfig) -> Result<TrajectoryEnsemble> {
    let bound = ensemble_bound(s, grid)?;
    generate_ensemble_with_bound(s, grid, config, bound)
}

/// As [`generate_ensemble`] with a caller-supplied density bound.
pub fn generate_ensemble_with_bound(
    s: &Scenario,
    grid: &TimeGrid,
    config: &SamplerConfig,
    bound: f64,
) -> Result<TrajectoryEnsemble> {
    config.validate()?;
    s.validate()?;
    if config.dt != grid.dt() {
        return Err(Error::GridMismatch(format!("sampler dt = {} but grid dt = {}", config.dt, grid.dt())));
    }
    let batches = (0..grid.len())
        .into_par_iter()
        .map(|n| {
            let t = grid.time(n);
            let mut rng = step_stream(config.seed, n as u64);
            let mut batch = rejection_sample(|x| eval_rho(s, x, t), t, s.domain, bound, config.n, &mut rng)?;
            // stable sort: exact ties keep draw order
            batch.values.sort_by(f64::total_cmp);
            Ok(batch)
        })
        .collect::<Result<Vec<_>>>()?;

    let accepted_fractions = batches.iter().map(|b| b.accepted_fraction).collect();
    let slices = batches.into_iter().map(|b| b.values).collect();
    Ok(TrajectoryEnsemble {
        grid: *grid,
        slices,
        meta: EnsembleMeta {
            scenario: s.name.clone(),
            seed: config.seed,
            n: config.n,
            dt: config.dt,
            bound,
            prng: PRNG_ID,
            accepted_fractions,
        },
    })
}

/// Nearest rank under the midpoint rule, ties to the lower rank, clamped to `[0, N-1]`.
pub fn rank_for_quantile(p: f64, n: usize) -> usize {
    let raw = (p * n as f64 - 1.0).ceil();
    raw.clamp(0.0, (n - 1) as f64) as usize
}

/// Trajectory indices for the quantile labels `quantiles`.
pub fn select_by_quantile(ensemble: &TrajectoryEnsemble, quantiles: &[f64]) -> Result<Vec<usize>> {
    let n = ensemble.n_particles();
    if n == 0 {
        return Err(Error::Validation("empty ensemble".into()));
    }
    quantiles
        .iter()
        .map(|&p| {
            if p > 0.0 && p < 1.0 {
                Ok(rank_for_quantile(p, n))
            } else {
                Err(Error::Validation(format!("quantile must lie in (0, 1), got {p}")))
            }
        })
        .collect()
}

/// Joint density `rho(point, t)`.
pub type JointDensity = Box<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;

/// A multi-dimensional density offered to [`generate_separable`].
pub enum MultiDensity {
    /// Product of one-dimensional marginals, one per coordinate.
    Separable(Vec<Scenario>),
    /// A joint density `rho(point, t)` with no product structure.
    Joint { dims: usize, rho: JointDensity },
}

impl fmt::Debug for MultiDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MultiDensity::Separable(m) => f.debug_tuple("Separable").field(m).finish(),
            MultiDensity::Joint { dims, .. } => f.debug_struct("Joint").field("dims", dims).finish_non_exhaustive(),
        }
    }
}

/// One ensemble per coordinate plus each particle's bound ranks.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiTrajectorySet {
    pub ensembles: Vec<TrajectoryEnsemble>,
    /// `bindings[k][d]` is particle `k`'s rank in coordinate `d`'s ensemble.
    pub bindings: Vec<Vec<usize>>,
    /// Initial marginal CPF values the ranks were taken from.
    pub bound_quantiles: Vec<Vec<f64>>,
}

impl MultiTrajectorySet {
    /// Position of particle `k` at step `n`, one entry per coordinate.
    pub fn point(&self, k: usize, n: usize) -> Vec<f64> {
        self.bindings[k].iter().zip(&self.ensembles).map(|(&i, e)| e.position(i, n)).collect()
    }

    pub fn path(&self, k: usize) -> Vec<Vec<f64>> {
        (0..self.ensembles[0].grid().len()).map(|n| self.point(k, n)).collect()
    }
}

/// Seed used for coordinate `d` of a separable run.
pub fn coordinate_seed(master: u64, d: usize) -> u64 {
    derive_seed(master, d as u64)
}

/// Runs the one-dimensional generator independently on each coordinate of a
/// separable density and binds each initial point to per-coordinate ranks
/// through the initial marginal CPFs. Joint densities are refused: without a
/// product structure there is no ordering to link samples by.
pub fn generate_separable(
    density: &MultiDensity,
    grid: &TimeGrid,
    config: &SamplerConfig,
    initial_points: &[Vec<f64>],
) -> Result<MultiTrajectorySet> {
    let marginals = match density {
        MultiDensity::Separable(m) => m,
        MultiDensity::Joint { dims, .. } => {
            return Err(Error::Unsupported(format!(
                "joint {dims}-dimensional density is not separable; sampled points have no natural ordering"
            )))
        }
    };
    if marginals.is_empty() {
        return Err(Error::Validation("no marginals given".into()));
    }
    for (k, point) in initial_points.iter().enumerate() {
        if point.len() != marginals.len() {
            return Err(Error::Validation(format!(
                "initial point {k} has {} coordinates, expected {}",
                point.len(),
                marginals.len()
            )));
        }
        for (x, m) in point.iter().zip(marginals) {
            if !m.domain.contains(*x) {
                return Err(Error::Validation(format!("initial point {k} lies outside the domain of '{}'", m.name)));
            }
        }
    }

    let ensembles = marginals
        .iter()
        .enumerate()
        .map(|(d, m)| generate_ensemble(m, grid, &config.with_seed(coordinate_seed(config.seed, d))))
        .collect::<Result<Vec<_>>>()?;

    let caches: Vec<CpfCache> = marginals.iter().cloned().map(CpfCache::new).collect();
    let t0 = grid.t0();
    let bound_quantiles: Vec<Vec<f64>> =
        initial_points.iter().map(|point| point.iter().zip(&caches).map(|(&x, c)| c.cpf(x, t0)).collect()).collect();
    let bindings =
        bound_quantiles.iter().map(|ps| ps.iter().map(|&p| rank_for_quantile(p, config.n)).collect()).collect();
    Ok(MultiTrajectorySet { ensembles, bindings, bound_quantiles })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn small_config(seed: u64, dt: f64) -> SamplerConfig {
        SamplerConfig::new(seed, 500, dt, 1e-3).unwrap()
    }

    #[test]
    fn slices_are_sorted_and_in_domain() {
        let s = Scenario::harmonic();
        let grid = TimeGrid::covering(0.0, 1.0, 0.1).unwrap();
        let e = generate_ensemble(&s, &grid, &small_config(5, 0.1)).unwrap();
        assert!(e.is_rank_ordered());
        assert_eq!(e.grid().len(), 11);
        assert_eq!(e.trajectory(0).len(), 11);
        for n in 0..grid.len() {
            assert!(e.slice(n).iter().all(|&x| s.domain.contains(x)));
        }
        assert!(e.meta.accepted_fractions.iter().all(|&f| f > 0.0 && f <= 1.0));
    }

    #[test]
    fn deterministic_per_seed() {
        let s = Scenario::free();
        let grid = TimeGrid::covering(0.0, 0.6, 0.15).unwrap();
        let a = generate_ensemble(&s, &grid, &small_config(9, 0.15)).unwrap();
        let b = generate_ensemble(&s, &grid, &small_config(9, 0.15)).unwrap();
        let c = generate_ensemble(&s, &grid, &small_config(10, 0.15)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.slice(0), c.slice(0));
    }

    #[test]
    fn bound_violation_propagates() {
        let s = Scenario::free();
        let grid = TimeGrid::covering(0.0, 0.3, 0.15).unwrap();
        let err = generate_ensemble_with_bound(&s, &grid, &small_config(1, 0.15), 0.5).unwrap_err();
        assert!(matches!(err, Error::BoundViolation { .. }));
    }

    #[test]
    fn dt_mismatch_rejected() {
        let s = Scenario::free();
        let grid = TimeGrid::covering(0.0, 0.3, 0.15).unwrap();
        assert!(matches!(generate_ensemble(&s, &grid, &small_config(1, 0.1)), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn rank_rule_examples() {
        assert_eq!(rank_for_quantile(0.5, 101), 50);
        assert_eq!(rank_for_quantile(0.999999, 10), 9);
        assert_eq!(rank_for_quantile(1e-9, 10), 0);
        let got: Vec<usize> = (1..=9).map(|k| rank_for_quantile(k as f64 / 10.0, 10_000)).collect();
        assert_eq!(got, vec![999, 1999, 2999, 3999, 4999, 5999, 6999, 7999, 8999]);
    }

    #[test]
    fn select_validates() {
        let s = Scenario::uniform();
        let grid = TimeGrid::covering(0.0, 0.2, 0.1).unwrap();
        let e = generate_ensemble(&s, &grid, &SamplerConfig::new(1, 101, 0.1, 1e-3).unwrap()).unwrap();
        assert_eq!(select_by_quantile(&e, &[0.5]).unwrap(), vec![50]);
        assert!(select_by_quantile(&e, &[0.0]).is_err());
        assert!(select_by_quantile(&e, &[1.2]).is_err());
    }

    #[test]
    fn separable_binding_uses_initial_cpf() {
        let well = Scenario::square_well();
        let grid = TimeGrid::covering(0.0, 0.2, 0.05).unwrap();
        let config = SamplerConfig::new(4, 1000, 0.05, 1e-3).unwrap();
        let density = MultiDensity::Separable(vec![well.clone(), well]);
        let set = generate_separable(&density, &grid, &config, &[vec![0.5, 0.0]]).unwrap();
        let px = set.bound_quantiles[0][0];
        assert!((px - (0.5 + 4.0 / (3.0 * PI))).abs() < 1e-6);
        assert_eq!(set.bindings[0], vec![rank_for_quantile(px, 1000), 0]);
        assert_eq!(set.path(0).len(), grid.len());
    }

    #[test]
    fn joint_density_refused() {
        let grid = TimeGrid::covering(0.0, 0.2, 0.05).unwrap();
        let config = SamplerConfig::new(4, 100, 0.05, 1e-3).unwrap();
        let joint = MultiDensity::Joint { dims: 2, rho: Box::new(|p: &[f64], _t| (-(p[0] * p[1]).powi(2)).exp()) };
        assert!(matches!(generate_separable(&joint, &grid, &config, &[vec![0.0, 0.0]]), Err(Error::Unsupported(_))));
    }

    #[test]
    fn separable_rejects_outside_points() {
        let well = Scenario::square_well();
        let grid = TimeGrid::covering(0.0, 0.2, 0.05).unwrap();
        let config = SamplerConfig::new(4, 100, 0.05, 1e-3).unwrap();
        let density = MultiDensity::Separable(vec![well.clone(), well]);
        assert!(generate_separable(&density, &grid, &config, &[vec![1.5, 0.2]]).is_err());
        assert!(generate_separable(&density, &grid, &config, &[vec![0.5]]).is_err());
    }
}
