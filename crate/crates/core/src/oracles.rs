//! Reference Bohm trajectories by two independent routes: inverting the
//! cumulative probability function at fixed `P`, and integrating the
//! guidance law with fixed-step RK4.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::wavefunctions::{eval_rho, eval_velocity, Scenario};

/// Uniform quadrature points across the domain for each CPF slice.
pub const CPF_POINTS: usize = 4096;

/// Bisection stops once the bracket is narrower than this fraction of `L`.
pub const INVERSION_REL_TOL: f64 = 1e-10;

/// RK4 substeps per output step.
pub const RK4_SUBSTEPS: usize = 10;

/// Cumulative probability of one time slice: composite trapezoid over
/// [`CPF_POINTS`] nodes, renormalized so the last entry is exactly 1.
#[derive(Debug, Clone)]
pub struct CpfTable {
    t: f64,
    lo: f64,
    hi: f64,
    h: f64,
    rho: Vec<f64>,
    cum: Vec<f64>,
    mass: f64,
}

impl CpfTable {
    pub fn build(s: &Scenario, t: f64) -> Self {
        let (lo, hi) = (s.domain.lo, s.domain.hi);
        let h = (hi - lo) / (CPF_POINTS - 1) as f64;
        let rho: Vec<f64> = (0..CPF_POINTS)
            .map(|i| {
                let x = if i == CPF_POINTS - 1 { hi } else { lo + i as f64 * h };
                eval_rho(s, x, t)
            })
            .collect();
        let mut cum = Vec::with_capacity(CPF_POINTS);
        cum.push(0.0);
        let mut acc = 0.0;
        for w in rho.windows(2) {
            acc += 0.5 * h * (w[0] + w[1]);
            cum.push(acc);
        }
        let mass = acc;
        if mass > 0.0 {
            cum.iter_mut().for_each(|c| *c /= mass);
        }
        Self { t, lo, hi, h, rho, cum, mass }
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    /// Unnormalized trapezoid mass of the slice over the domain.
    pub fn domain_mass(&self) -> f64 {
        self.mass
    }

    /// CPF at `x` (clamped into the domain). Inside a cell ρ is taken as the
    /// linear interpolant, which keeps the CPF continuous and nondecreasing.
    pub fn cpf(&self, x: f64) -> f64 {
        if x <= self.lo {
            return 0.0;
        }
        if x >= self.hi {
            return 1.0;
        }
        let pos = (x - self.lo) / self.h;
        let k = (pos.floor() as usize).min(CPF_POINTS - 2);
        let frac = pos - k as f64;
        let partial = self.h * frac * (self.rho[k] + 0.5 * frac * (self.rho[k + 1] - self.rho[k]));
        let p = self.cum[k] + partial / self.mass;
        p.min(1.0)
    }

    /// Leftmost `x` with `cpf(x) >= p`, to within `1e-10 L`.
    pub fn invert(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Boundary(p));
        }
        let tol = INVERSION_REL_TOL * (self.hi - self.lo);
        // narrow to the bracketing cell before bisecting
        let k = self.cum.partition_point(|&c| c < p).clamp(1, CPF_POINTS - 1);
        let mut lo = self.lo + (k - 1) as f64 * self.h;
        let mut hi = if k == CPF_POINTS - 1 { self.hi } else { self.lo + k as f64 * self.h };
        if self.cpf(lo) >= p {
            lo = self.lo;
        }
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            if self.cpf(mid) >= p {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }
}

pub fn cpf(s: &Scenario, x: f64, t: f64) -> f64 {
    CpfTable::build(s, t).cpf(x)
}

pub fn invert_cpf(s: &Scenario, p: f64, t: f64) -> Result<f64> {
    CpfTable::build(s, t).invert(p)
}

/// Per-time CPF tables for one scenario. Safe for concurrent readers; a
/// missing slice is built outside the lock and inserted once.
#[derive(Debug)]
pub struct CpfCache {
    scenario: Scenario,
    tables: RwLock<HashMap<u64, Arc<CpfTable>>>,
}

impl CpfCache {
    pub fn new(scenario: Scenario) -> Self {
        Self { scenario, tables: RwLock::new(HashMap::new()) }
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn table(&self, t: f64) -> Arc<CpfTable> {
        let key = t.to_bits();
        if let Some(table) = self.tables.read().expect("cpf cache poisoned").get(&key) {
            return Arc::clone(table);
        }
        let built = Arc::new(CpfTable::build(&self.scenario, t));
        let mut tables = self.tables.write().expect("cpf cache poisoned");
        Arc::clone(tables.entry(key).or_insert(built))
    }

    pub fn cpf(&self, x: f64, t: f64) -> f64 {
        self.table(t).cpf(x)
    }

    pub fn invert(&self, p: f64, t: f64) -> Result<f64> {
        self.table(t).invert(p)
    }

    pub fn quantile_trajectory(&self, p: f64, grid: &TimeGrid) -> Result<OracleTrajectory> {
        let positions = grid.times().map(|t| self.invert(p, t)).collect::<Result<Vec<_>>>()?;
        Ok(OracleTrajectory {
            grid: *grid,
            positions,
            solver: Solver::Quantile { p },
            tolerances: OracleTolerances::default(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Solver {
    Quantile { p: f64 },
    Guidance { x0: f64 },
}

impl Solver {
    pub fn tag(&self) -> &'static str {
        match self {
            Solver::Quantile { .. } => "quantile",
            Solver::Guidance { .. } => "guidance",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleTolerances {
    pub cpf_points: usize,
    pub inversion_rel_tol: f64,
    pub rk4_substeps: usize,
}

impl Default for OracleTolerances {
    fn default() -> Self {
        Self { cpf_points: CPF_POINTS, inversion_rel_tol: INVERSION_REL_TOL, rk4_substeps: RK4_SUBSTEPS }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleTrajectory {
    pub grid: TimeGrid,
    pub positions: Vec<f64>,
    pub solver: Solver,
    pub tolerances: OracleTolerances,
}

/// `x_P(t_n) = CPF^{-1}(P, t_n)` at every grid time.
pub fn quantile_trajectory(s: &Scenario, p: f64, grid: &TimeGrid) -> Result<OracleTrajectory> {
    CpfCache::new(s.clone()).quantile_trajectory(p, grid)
}

/// Integrates `dx/dt = v(x, t)` from `x0` with classical RK4 at `dt / 10`.
/// Aborts with [`Error::NodeEncounter`] if any stage lands in a node region.
pub fn guidance_trajectory(s: &Scenario, x0: f64, grid: &TimeGrid) -> Result<OracleTrajectory> {
    let node = |step: usize, t: f64, x: f64| {
        move |err: Error| match err {
            Error::NodeRegion { .. } => Error::NodeEncounter { last_good_step: step, t, x },
            other => other,
        }
    };
    eval_velocity(s, x0, grid.t0()).map_err(node(0, grid.t0(), x0))?;

    let h = grid.dt() / RK4_SUBSTEPS as f64;
    let mut positions = Vec::with_capacity(grid.len());
    positions.push(x0);
    let mut x = x0;
    for step in 0..grid.steps() {
        let t_step = grid.time(step);
        for sub in 0..RK4_SUBSTEPS {
            let t = t_step + sub as f64 * h;
            let v = |xx: f64, tt: f64| eval_velocity(s, xx, tt).map_err(node(step, t_step, positions[step]));
            let k1 = v(x, t)?;
            let k2 = v(x + 0.5 * h * k1, t + 0.5 * h)?;
            let k3 = v(x + 0.5 * h * k2, t + 0.5 * h)?;
            let k4 = v(x + h * k3, t + h)?;
            x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        positions.push(x);
    }
    Ok(OracleTrajectory {
        grid: *grid,
        positions,
        solver: Solver::Guidance { x0 },
        tolerances: OracleTolerances::default(),
    })
}
