//! Bohmian trajectories from a time-dependent density by per-step Monte Carlo
//! sampling and rank linking, checked against quantile (CPF inversion) and
//! guidance-law reference solvers.

// negated float comparisons are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod generator;
pub mod grid;
pub mod io;
pub mod metrics;
pub mod oracles;
pub mod sampling;
pub mod wavefunctions;

pub use error::{Error, Result};
pub use generator::{
    generate_ensemble, generate_separable, select_by_quantile, MultiDensity, MultiTrajectorySet, TrajectoryEnsemble,
};
pub use grid::TimeGrid;
pub use oracles::{cpf, guidance_trajectory, invert_cpf, quantile_trajectory, CpfCache, OracleTrajectory};
pub use sampling::{choose_parameters, rejection_sample, SampleBatch, SamplerConfig};
pub use wavefunctions::{estimate_rho_max, eval_psi, eval_rho, eval_velocity, Scenario};
