//! Seeded acceptance-rejection sampling of ρ(·, t) with a uniform proposal,
//! and the (N, δt) parameter rules.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::wavefunctions::Domain;

/// Recorded in run metadata.
pub const PRNG_ID: &str = "ChaCha8Rng (rand_chacha 0.3): key = seed_from_u64(seed), stream = step index";

/// Multiplier in the working rule `N = ceil(2 L rho_max * 1000)`.
pub const PARTICLES_PER_UNIT_MASS: f64 = 1e3;

/// `N` must exceed this multiple of `2 L rho_max` to count as "much greater".
pub const MUCH_GREATER_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerConfig {
    pub seed: u64,
    pub n: usize,
    pub dt: f64,
    pub epsilon: f64,
}

impl SamplerConfig {
    pub fn new(seed: u64, n: usize, dt: f64, epsilon: f64) -> Result<Self> {
        let config = Self { seed, n, dt, epsilon };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Validation(format!("particle count must be at least 2, got {}", self.n)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Validation(format!("time step must be positive, got {}", self.dt)));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::Validation(format!("epsilon must lie in (0, 1), got {}", self.epsilon)));
        }
        Ok(())
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }
}

/// Random stream for one time step. Depends only on `(seed, step)`, so steps
/// can be drawn in any order or in parallel.
pub fn step_stream(seed: u64, step: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(step);
    rng
}

/// Child seed for an independent sub-run (e.g. one coordinate of a separable problem).
pub fn derive_seed(master: u64, index: u64) -> u64 {
    // splitmix64 finalizer over the combined words
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub t: f64,
    pub values: Vec<f64>,
    /// Accepted draws over proposed draws.
    pub accepted_fraction: f64,
}

/// Draws `n` points from `density` on `domain` by von Neumann acceptance-rejection:
/// propose `(x, y)` uniform on `domain x [0, bound)` and keep `x` when `y < density(x)`.
///
/// A proposal where `density(x) > bound` aborts with [`Error::BoundViolation`].
pub fn rejection_sample<F, R>(
    density: F,
    t: f64,
    domain: Domain,
    bound: f64,
    n: usize,
    rng: &mut R,
) -> Result<SampleBatch>
where
    F: Fn(f64) -> f64,
    R: Rng + ?Sized,
{
    if !(bound > 0.0 && bound.is_finite()) {
        return Err(Error::Validation(format!("density bound must be positive, got {bound}")));
    }
    let width = domain.width();
    let mut values = Vec::with_capacity(n);
    let mut proposed: u64 = 0;
    while values.len() < n {
        let x = domain.lo + width * rng.gen::<f64>();
        let y = bound * rng.gen::<f64>();
        proposed += 1;
        let rho = density(x);
        if rho > bound {
            return Err(Error::BoundViolation { x, t, rho, bound });
        }
        if y < rho {
            values.push(x);
        }
    }
    let accepted_fraction = if proposed == 0 { 1.0 } else { n as f64 / proposed as f64 };
    Ok(SampleBatch { t, values, accepted_fraction })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParameterWarning {
    /// `N` does not satisfy `N >> 2 L rho_max`.
    TooFewParticles { n: usize, two_l_rho_max: f64 },
    /// `δt` exceeds the ceiling `L / (ε N)`.
    StepAboveCeiling { dt: f64, ceiling: f64 },
}

impl fmt::Display for ParameterWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParameterWarning::TooFewParticles { n, two_l_rho_max } => write!(
                f,
                "N = {n} violates N >> 2 L rho_max = {two_l_rho_max} (want N > {})",
                MUCH_GREATER_FACTOR * two_l_rho_max
            ),
            ParameterWarning::StepAboveCeiling { dt, ceiling } => {
                write!(f, "dt = {dt} exceeds the ceiling L/(epsilon N) = {ceiling}")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParameterChoice {
    pub n: usize,
    pub dt: f64,
}

fn require_positive(label: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Validation(format!("{label} must be positive, got {v}")))
    }
}

/// `N = ceil(2 L rho_max * 1000)` and `δt = L / (ε N)`.
pub fn choose_parameters(width: f64, rho_max: f64, epsilon: f64) -> Result<ParameterChoice> {
    require_positive("L", width)?;
    require_positive("rho_max", rho_max)?;
    require_positive("epsilon", epsilon)?;
    let n = (2.0 * width * rho_max * PARTICLES_PER_UNIT_MASS).ceil().max(2.0) as usize;
    Ok(ParameterChoice { n, dt: step_ceiling(width, epsilon, n) })
}

/// Largest `δt` accepted for `N` particles: `L / (ε N)`.
pub fn step_ceiling(width: f64, epsilon: f64, n: usize) -> f64 {
    width / (epsilon * n as f64)
}

/// Checks caller-chosen `(N, δt)`; violations are warnings, not errors.
pub fn check_parameters(width: f64, rho_max: f64, epsilon: f64, n: usize, dt: f64) -> Result<Vec<ParameterWarning>> {
    require_positive("L", width)?;
    require_positive("rho_max", rho_max)?;
    require_positive("epsilon", epsilon)?;
    let mut warnings = Vec::new();
    let two_l_rho_max = 2.0 * width * rho_max;
    if !(n as f64 > MUCH_GREATER_FACTOR * two_l_rho_max) {
        warnings.push(ParameterWarning::TooFewParticles { n, two_l_rho_max });
    }
    let ceiling = step_ceiling(width, epsilon, n);
    if dt > ceiling {
        warnings.push(ParameterWarning::StepAboveCeiling { dt, ceiling });
    }
    Ok(warnings)
}
