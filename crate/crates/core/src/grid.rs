use crate::error::{Error, Result};

/// Uniform time grid `t_n = t0 + n * dt` for `n = 0..=steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t0: f64,
    dt: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, dt: f64, steps: usize) -> Result<Self> {
        if !t0.is_finite() || !dt.is_finite() {
            return Err(Error::Validation("time grid values must be finite".into()));
        }
        if dt <= 0.0 {
            return Err(Error::Validation(format!("time step must be positive, got {dt}")));
        }
        if steps == 0 {
            return Err(Error::Validation("time grid needs at least one step".into()));
        }
        Ok(Self { t0, dt, steps })
    }

    /// Grid with step `dt` whose last point lands within `dt/2` of `t1`.
    pub fn covering(t0: f64, t1: f64, dt: f64) -> Result<Self> {
        if !(t1 > t0) {
            return Err(Error::Validation(format!("empty time range [{t0}, {t1}]")));
        }
        if !(dt > 0.0) {
            return Err(Error::Validation(format!("time step must be positive, got {dt}")));
        }
        let steps = ((t1 - t0) / dt).round().max(1.0) as usize;
        Self::new(t0, dt, steps)
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Number of grid points, `steps + 1`.
    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn time(&self, n: usize) -> f64 {
        self.t0 + n as f64 * self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.steps)
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.steps).map(move |n| self.time(n))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn covering_hits_endpoint() {
        let g = TimeGrid::covering(0.0, 100.0, 100.0 / 30.0).unwrap();
        assert_eq!(g.steps(), 30);
        assert!((g.t_end() - 100.0).abs() <= g.dt() / 2.0);

        let g = TimeGrid::covering(0.0, 3.0, 0.1).unwrap();
        assert_eq!(g.steps(), 30);
        assert_eq!(g.len(), 31);
        assert_eq!(g.times().count(), 31);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(TimeGrid::new(0.0, 0.0, 3).is_err());
        assert!(TimeGrid::new(0.0, 0.1, 0).is_err());
        assert!(TimeGrid::covering(1.0, 1.0, 0.1).is_err());
        assert!(TimeGrid::covering(0.0, 1.0, f64::NAN).is_err());
    }
}
