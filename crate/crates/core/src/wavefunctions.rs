//! Closed-form wavefunctions and densities for the scenario catalog, their
//! Bohm velocity fields, and density-bound estimation.
//!
//! All quantities are in naturalized units. A [`Scenario`] is immutable once
//! built, so every evaluation here is a pure function.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Densities below this value are treated as nodes for velocity evaluation.
pub const VELOCITY_FLOOR: f64 = 1e-12;

/// Multiplier applied to the grid maximum in [`estimate_rho_max`].
pub const RHO_MAX_SAFETY: f64 = 1.1;

/// Smallest grid resolution accepted by [`estimate_rho_max`].
pub const MIN_BOUND_RESOLUTION: usize = 64;

/// Closed interval of positions `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain {
    pub lo: f64,
    pub hi: f64,
}

impl Domain {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Validation(format!("invalid domain [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lo, self.hi)
    }
}

/// The analytic model behind a scenario.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    /// Equal-weight superposition of harmonic oscillator eigenstates.
    Harmonic { omega: f64, levels: Vec<usize> },
    /// Free Gaussian packet centered at the origin, `exp(-a x^2)` at t = 0.
    FreeGaussian { a: f64 },
    /// Two free Gaussian packets at `±y0` with initial width `sigma0`, zero momentum.
    TwoSlit { y0: f64, sigma0: f64 },
    /// One coordinate of the square-well state `sin(pi x/W) e^{-iE1 t} + sin(2 pi x/W) e^{-4iE1 t}`.
    SquareWell { width: f64 },
    /// Uniform density on the domain, no wavefunction.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    WavefunctionBacked,
    DensityOnly,
}

/// A named time-dependent density with its domain and physical constants.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub hbar: f64,
    pub mass: f64,
    pub domain: Domain,
    pub t_range: (f64, f64),
    pub model: Model,
}

/// Names accepted by [`Scenario::by_name`].
pub const CATALOG: [&str; 6] = ["harmonic", "free", "two-slit", "square-well", "eigenstate", "uniform"];

impl Scenario {
    pub fn new(
        name: impl Into<String>,
        hbar: f64,
        mass: f64,
        domain: Domain,
        t_range: (f64, f64),
        model: Model,
    ) -> Result<Self> {
        let scenario = Self { name: name.into(), hbar, mass, domain, t_range, model };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |label: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Validation(format!("{label} must be positive and finite, got {v}")))
            }
        };
        positive("hbar", self.hbar)?;
        positive("m", self.mass)?;
        Domain::new(self.domain.lo, self.domain.hi)?;
        let (t0, t1) = self.t_range;
        if !(t0.is_finite() && t1.is_finite() && t0 < t1) {
            return Err(Error::Validation(format!("invalid time range [{t0}, {t1}]")));
        }
        match &self.model {
            Model::Harmonic { omega, levels } => {
                positive("omega", *omega)?;
                if levels.is_empty() {
                    return Err(Error::Validation("harmonic superposition needs at least one level".into()));
                }
            }
            Model::FreeGaussian { a } => positive("a", *a)?,
            Model::TwoSlit { y0, sigma0 } => {
                positive("y0", *y0)?;
                positive("sigma0", *sigma0)?;
            }
            Model::SquareWell { width } => positive("width", *width)?,
            Model::Uniform => {}
        }
        Ok(())
    }

    /// Harmonic superposition of levels 0, 1, 3, 5 with ħ = 1, ω = 3, m = 1.
    pub fn harmonic() -> Self {
        Self {
            name: "harmonic".into(),
            hbar: 1.0,
            mass: 1.0,
            domain: Domain { lo: -5.0, hi: 5.0 },
            t_range: (0.0, 3.0),
            model: Model::Harmonic { omega: 3.0, levels: vec![0, 1, 3, 5] },
        }
    }

    /// Spreading free Gaussian with a = π/2.
    pub fn free() -> Self {
        Self {
            name: "free".into(),
            hbar: 1.0,
            mass: 1.0,
            domain: Domain { lo: -20.0, hi: 20.0 },
            t_range: (0.0, 3.0),
            model: Model::FreeGaussian { a: PI / 2.0 },
        }
    }

    /// Two packets at ±15 with initial width 2.5; the pattern at t = 100 stays inside the domain.
    pub fn two_slit() -> Self {
        Self {
            name: "two-slit".into(),
            hbar: 1.0,
            mass: 1.0,
            domain: Domain { lo: -129.668, hi: 129.668 },
            t_range: (0.0, 100.0),
            model: Model::TwoSlit { y0: 15.0, sigma0: 2.5 },
        }
    }

    /// One coordinate of the separable 2D infinite well of unit width.
    pub fn square_well() -> Self {
        Self {
            name: "square-well".into(),
            hbar: 1.0,
            mass: 1.0,
            domain: Domain { lo: 0.0, hi: 1.0 },
            t_range: (0.0, 1.0),
            model: Model::SquareWell { width: 1.0 },
        }
    }

    /// Harmonic ground state: a stationary density for diagnostics.
    pub fn eigenstate() -> Self {
        Self {
            name: "eigenstate".into(),
            hbar: 1.0,
            mass: 1.0,
            domain: Domain { lo: -5.0, hi: 5.0 },
            t_range: (0.0, 3.0),
            model: Model::Harmonic { omega: 3.0, levels: vec![0] },
        }
    }

    pub fn uniform() -> Self {
        Self {
            name: "uniform".into(),
            hbar: 1.0,
            mass: 1.0,
            domain: Domain { lo: 0.0, hi: 1.0 },
            t_range: (0.0, 1.0),
            model: Model::Uniform,
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "harmonic" => Ok(Self::harmonic()),
            "free" => Ok(Self::free()),
            "two-slit" => Ok(Self::two_slit()),
            "square-well" => Ok(Self::square_well()),
            "eigenstate" => Ok(Self::eigenstate()),
            "uniform" => Ok(Self::uniform()),
            other => Err(Error::Unsupported(format!("unknown scenario '{other}' (known: {})", CATALOG.join(", ")))),
        }
    }

    pub fn kind(&self) -> ScenarioKind {
        match self.model {
            Model::Uniform => ScenarioKind::DensityOnly,
            _ => ScenarioKind::WavefunctionBacked,
        }
    }

    pub fn width(&self) -> f64 {
        self.domain.width()
    }
}

/// Hermite polynomials `H_0..=H_n` at `xi` by the three-term recurrence.
pub fn hermite_all(n: usize, xi: f64) -> Vec<f64> {
    let mut h = Vec::with_capacity(n + 1);
    h.push(1.0);
    if n >= 1 {
        h.push(2.0 * xi);
    }
    for k in 1..n {
        let next = 2.0 * xi * h[k] - 2.0 * k as f64 * h[k - 1];
        h.push(next);
    }
    h
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// ψ and ∂ψ/∂x from the closed forms. `None` for density-only models.
fn psi_with_derivative(s: &Scenario, x: f64, t: f64) -> Option<(Complex64, Complex64)> {
    let hbar = s.hbar;
    let m = s.mass;
    match &s.model {
        Model::Harmonic { omega, levels } => {
            let a = (hbar / (m * omega)).sqrt();
            let xi = x / a;
            let top = levels.iter().copied().max().unwrap_or(0);
            let h = hermite_all(top, xi);
            let gauss = (-0.5 * xi * xi).exp();
            let prefactor = 1.0 / (a * PI.sqrt()).sqrt() / (levels.len() as f64).sqrt();
            let mut psi = Complex64::new(0.0, 0.0);
            let mut dpsi = Complex64::new(0.0, 0.0);
            for &n in levels {
                let energy = hbar * omega * (n as f64 + 0.5);
                let phase = Complex64::from_polar(1.0, -energy * t / hbar);
                let norm = prefactor / (2f64.powi(n as i32) * factorial(n)).sqrt();
                let dh = if n == 0 { 0.0 } else { 2.0 * n as f64 * h[n - 1] };
                psi += phase * (norm * h[n] * gauss);
                dpsi += phase * (norm * gauss * (dh - xi * h[n]) / a);
            }
            Some((psi, dpsi))
        }
        Model::FreeGaussian { a } => {
            let (psi, dpsi) = free_gaussian(*a, 2.0 * hbar * a / m, x, t);
            Some((psi, dpsi))
        }
        Model::TwoSlit { y0, sigma0 } => {
            let a = 1.0 / (4.0 * sigma0 * sigma0);
            let beta = 2.0 * hbar * a / m;
            let norm = 1.0 / (2.0 * (1.0 + (-2.0 * a * y0 * y0).exp())).sqrt();
            let (p1, d1) = free_gaussian(a, beta, x - y0, t);
            let (p2, d2) = free_gaussian(a, beta, x + y0, t);
            Some(((p1 + p2) * norm, (d1 + d2) * norm))
        }
        Model::SquareWell { width } => {
            if !(0.0..=*width).contains(&x) {
                return Some((Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)));
            }
            let e1 = PI * PI * hbar * hbar / (2.0 * m * width * width);
            let k = PI / width;
            let amp = 1.0 / width.sqrt();
            let u1 = Complex64::from_polar(1.0, -e1 * t / hbar);
            let u2 = Complex64::from_polar(1.0, -4.0 * e1 * t / hbar);
            let psi = (u1 * (k * x).sin() + u2 * (2.0 * k * x).sin()) * amp;
            let dpsi = (u1 * (k * (k * x).cos()) + u2 * (2.0 * k * (2.0 * k * x).cos())) * amp;
            Some((psi, dpsi))
        }
        Model::Uniform => None,
    }
}

/// Free Gaussian `(2a/π)^{1/4} exp(-a x²/(1+iβt)) / sqrt(1+iβt)` and its x-derivative.
fn free_gaussian(a: f64, beta: f64, x: f64, t: f64) -> (Complex64, Complex64) {
    let denom = Complex64::new(1.0, beta * t);
    let psi = (2.0 * a / PI).powf(0.25) * (-(a * x * x) / denom).exp() / denom.sqrt();
    let dpsi = psi * (-2.0 * a * x) / denom;
    (psi, dpsi)
}

pub fn eval_psi(s: &Scenario, x: f64, t: f64) -> Result<Complex64> {
    psi_with_derivative(s, x, t)
        .map(|(psi, _)| psi)
        .ok_or_else(|| Error::Unsupported(format!("scenario '{}' has no wavefunction", s.name)))
}

/// Probability density `|ψ|²`, or the closed form for density-only scenarios.
pub fn eval_rho(s: &Scenario, x: f64, t: f64) -> f64 {
    match &s.model {
        Model::Uniform => {
            if s.domain.contains(x) {
                1.0 / s.domain.width()
            } else {
                0.0
            }
        }
        _ => psi_with_derivative(s, x, t).map_or(0.0, |(psi, _)| psi.norm_sqr()),
    }
}

fn velocity_from(s: &Scenario, x: f64, t: f64, psi: Complex64, dpsi: Complex64) -> Result<f64> {
    let rho = psi.norm_sqr();
    if !(rho >= VELOCITY_FLOOR) {
        return Err(Error::NodeRegion { x, t, rho });
    }
    Ok(s.hbar / s.mass * (psi.conj() * dpsi).im / rho)
}

/// Bohm velocity `(ħ/m) Im(ψ* ∂ψ/∂x) / ρ` using the analytic derivative.
pub fn eval_velocity(s: &Scenario, x: f64, t: f64) -> Result<f64> {
    let (psi, dpsi) = psi_with_derivative(s, x, t)
        .ok_or_else(|| Error::Unsupported(format!("scenario '{}' has no velocity field", s.name)))?;
    velocity_from(s, x, t, psi, dpsi)
}

/// Bohm velocity with ∂ψ/∂x from a central difference of step `L * 1e-6`.
pub fn eval_velocity_fd(s: &Scenario, x: f64, t: f64) -> Result<f64> {
    let h = s.width() * 1e-6;
    let psi = eval_psi(s, x, t)?;
    let dpsi = (eval_psi(s, x + h, t)? - eval_psi(s, x - h, t)?) / (2.0 * h);
    velocity_from(s, x, t, psi, dpsi)
}

/// Safety-scaled maximum of ρ over the domain and the scenario's time range.
pub fn estimate_rho_max(s: &Scenario, nx: usize, nt: usize) -> Result<f64> {
    estimate_rho_max_between(s, s.t_range.0, s.t_range.1, nx, nt)
}

/// As [`estimate_rho_max`] over the time window `[t_lo, t_hi]`, endpoints included.
pub fn estimate_rho_max_between(s: &Scenario, t_lo: f64, t_hi: f64, nx: usize, nt: usize) -> Result<f64> {
    if nx < MIN_BOUND_RESOLUTION || nt < MIN_BOUND_RESOLUTION {
        return Err(Error::Validation(format!(
            "bound resolution must be at least {MIN_BOUND_RESOLUTION} per axis, got {nx} x {nt}"
        )));
    }
    let mut best = 0.0f64;
    for j in 0..nt {
        let t = t_lo + (t_hi - t_lo) * j as f64 / (nt - 1) as f64;
        best = best.max(slice_max(s, t, nx));
    }
    Ok(best * RHO_MAX_SAFETY)
}

/// Safety-scaled maximum of ρ(·, t) at a single time.
pub fn estimate_rho_max_at(s: &Scenario, t: f64, nx: usize) -> Result<f64> {
    if nx < MIN_BOUND_RESOLUTION {
        return Err(Error::Validation(format!("bound resolution must be at least {MIN_BOUND_RESOLUTION}, got {nx}")));
    }
    Ok(slice_max(s, t, nx) * RHO_MAX_SAFETY)
}

fn slice_max(s: &Scenario, t: f64, nx: usize) -> f64 {
    let Domain { lo, hi } = s.domain;
    (0..nx).map(|i| eval_rho(s, lo + (hi - lo) * i as f64 / (nx - 1) as f64, t)).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trapezoid(s: &Scenario, t: f64, points: usize) -> f64 {
        let Domain { lo, hi } = s.domain;
        let h = (hi - lo) / (points - 1) as f64;
        let inner: f64 = (1..points - 1).map(|i| eval_rho(s, lo + i as f64 * h, t)).sum();
        h * (inner + 0.5 * (eval_rho(s, lo, t) + eval_rho(s, hi, t)))
    }

    #[test]
    fn hermite_recurrence_matches_closed_forms() {
        let xi = 0.7;
        let h = hermite_all(5, xi);
        let closed = [
            1.0,
            2.0 * xi,
            4.0 * xi * xi - 2.0,
            8.0 * xi.powi(3) - 12.0 * xi,
            16.0 * xi.powi(4) - 48.0 * xi * xi + 12.0,
            32.0 * xi.powi(5) - 160.0 * xi.powi(3) + 120.0 * xi,
        ];
        for (got, want) in h.iter().zip(closed) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn harmonic_origin_amplitude() {
        let s = Scenario::harmonic();
        let a = 1.0 / 3f64.sqrt();
        let expected = 1.0 / (2.0 * (a * PI.sqrt()).sqrt());
        let psi = eval_psi(&s, 0.0, 0.0).unwrap();
        assert!((psi.norm() - expected).abs() < 1e-14);
        assert!((psi.norm() - 0.4943).abs() < 1e-4);
        assert!((eval_rho(&s, 0.0, 0.0) - 0.2443).abs() < 1e-4);
    }

    #[test]
    fn free_gaussian_origin() {
        let s = Scenario::free();
        let psi = eval_psi(&s, 0.0, 0.0).unwrap();
        assert!((psi.re - 1.0).abs() < 1e-15 && psi.im.abs() < 1e-15);
        assert!((eval_rho(&s, 0.0, 0.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn square_well_wall_is_node() {
        let s = Scenario::square_well();
        for t in [0.0, 0.3, 0.77] {
            assert_eq!(eval_psi(&s, 0.0, t).unwrap().norm(), 0.0);
        }
        assert_eq!(eval_rho(&s, -0.1, 0.2), 0.0);
    }

    #[test]
    fn density_only_has_no_psi() {
        let s = Scenario::uniform();
        assert!(matches!(eval_psi(&s, 0.5, 0.0), Err(Error::Unsupported(_))));
        assert!(matches!(eval_velocity(&s, 0.5, 0.0), Err(Error::Unsupported(_))));
        assert_eq!(eval_rho(&s, 0.5, 0.3), 1.0);
    }

    #[test]
    fn velocity_examples() {
        let eig = Scenario::eigenstate();
        for (x, t) in [(0.3, 0.0), (-1.2, 1.7), (2.0, 2.9)] {
            assert!(eval_velocity(&eig, x, t).unwrap().abs() < 1e-14);
        }
        let free = Scenario::free();
        for t in [0.0, 0.5, 2.0] {
            assert!(eval_velocity(&free, 0.0, t).unwrap().abs() < 1e-15);
        }
        let v = eval_velocity(&free, 1.0, 1.0).unwrap();
        let expected = PI * PI / (1.0 + PI * PI);
        assert!((v - expected).abs() < 1e-12, "{v} vs {expected}");
        assert!((v - 0.9080).abs() < 1e-4);
    }

    #[test]
    fn velocity_refused_at_node() {
        let s = Scenario::square_well();
        // ψ(2/3, 0) = sin(2π/3) + sin(4π/3) = 0
        let err = eval_velocity(&s, 2.0 / 3.0, 0.0).unwrap_err();
        assert!(matches!(err, Error::NodeRegion { .. }));
    }

    #[test]
    fn normalization_at_start() {
        for name in CATALOG {
            let s = Scenario::by_name(name).unwrap();
            let mass = trapezoid(&s, s.t_range.0, 4096);
            assert!((mass - 1.0).abs() < 1e-6, "{name}: {mass}");
        }
    }

    #[test]
    fn rho_max_examples() {
        let u = Scenario::uniform();
        assert!((estimate_rho_max(&u, 64, 64).unwrap() - 1.1).abs() < 1e-12);
        let f = Scenario::free();
        let at0 = estimate_rho_max_at(&f, 0.0, 4097).unwrap();
        assert!((at0 - 1.1).abs() < 1e-6);
        let h = Scenario::harmonic();
        assert!(estimate_rho_max(&h, 128, 128).unwrap() / RHO_MAX_SAFETY >= 0.2443);
        assert!(estimate_rho_max(&h, 32, 128).is_err());
    }

    #[test]
    fn catalog_lookup() {
        for name in CATALOG {
            let s = Scenario::by_name(name).unwrap();
            assert_eq!(s.name, name);
            s.validate().unwrap();
        }
        assert!(matches!(Scenario::by_name("nosuch"), Err(Error::Unsupported(_))));
        let mut bad = Scenario::free();
        bad.mass = 0.0;
        assert!(bad.validate().is_err());
    }
}
