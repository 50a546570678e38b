use serde::{Deserialize, Serialize};

use crate::error::{MechError, Result};

/// Points closer than this to `hi` are replaced by `hi` itself.
const ENDPOINT_SNAP: f64 = 1e-9;

/// A closed interval discretized with a fixed step. The upper endpoint is
/// always part of the point set, even when `hi - lo` is not a multiple of
/// `step`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGrid")]
pub struct Grid {
    lo: f64,
    hi: f64,
    step: f64,
}

#[derive(Deserialize)]
struct RawGrid {
    lo: f64,
    hi: f64,
    step: f64,
}

impl TryFrom<RawGrid> for Grid {
    type Error = MechError;

    fn try_from(raw: RawGrid) -> Result<Self> {
        Grid::new(raw.lo, raw.hi, raw.step)
    }
}

impl Grid {
    pub fn new(lo: f64, hi: f64, step: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && step.is_finite()) {
            return Err(MechError::Validation(format!(
                "grid bounds must be finite (lo={lo}, hi={hi}, step={step})"
            )));
        }
        if step <= 0.0 {
            return Err(MechError::Validation(format!(
                "grid step must be > 0, got {step}"
            )));
        }
        if lo > hi {
            return Err(MechError::Validation(format!(
                "grid lo {lo} exceeds hi {hi}"
            )));
        }
        Ok(Self { lo, hi, step })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Number of points, `hi` included.
    pub fn len(&self) -> usize {
        self.interior_count() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    // Points of the form lo + k*step lying strictly below hi (after snapping).
    fn interior_count(&self) -> usize {
        let span = self.hi - self.lo;
        if span <= ENDPOINT_SNAP {
            return 0;
        }
        let mut k = (span / self.step).floor() as usize;
        while k > 0 && self.lo + k as f64 * self.step >= self.hi - ENDPOINT_SNAP {
            k -= 1;
        }
        k + 1
    }

    pub fn point(&self, index: usize) -> f64 {
        let interior = self.interior_count();
        if index < interior {
            self.lo + index as f64 * self.step
        } else {
            self.hi
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    /// The same interval at half the step.
    pub fn refined(&self) -> Self {
        Self {
            step: self.step / 2.0,
            ..*self
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn includes_hi_when_step_divides() {
        let g = Grid::new(0.0, 4.0, 1.0).unwrap();
        assert_eq!(g.points(), vec![0.0, 1.0, 2.0, 3.0, 4.0]);
        assert_eq!(g.len(), 5);
    }

    #[test]
    fn includes_hi_when_step_does_not_divide() {
        let g = Grid::new(0.0, 1.0, 0.3).unwrap();
        let pts = g.points();
        assert_eq!(pts.len(), 5);
        assert!((pts[3] - 0.9).abs() < 1e-12);
        assert_eq!(pts[4], 1.0);
    }

    #[test]
    fn degenerate_interval_is_single_point() {
        let g = Grid::new(2.5, 2.5, 0.1).unwrap();
        assert_eq!(g.points(), vec![2.5]);
    }

    #[test]
    fn default_gamma_grid_has_81_points() {
        let g = Grid::new(0.0, 4.0, 0.05).unwrap();
        assert_eq!(g.len(), 81);
        assert!((g.point(10) - 0.5).abs() < 1e-12);
        assert_eq!(g.point(80), 4.0);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid::new(0.0, 1.0, 0.0).is_err());
        assert!(Grid::new(0.0, 1.0, -0.1).is_err());
        assert!(Grid::new(2.0, 1.0, 0.1).is_err());
        assert!(Grid::new(0.0, f64::NAN, 0.1).is_err());
    }

    #[test]
    fn refinement_keeps_original_points() {
        let g = Grid::new(0.0, 4.0, 0.25).unwrap();
        let fine = g.refined();
        for (i, p) in g.points().into_iter().enumerate() {
            assert!((fine.point(2 * i) - p).abs() < 1e-12);
        }
    }
}
