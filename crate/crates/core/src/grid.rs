use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform time grid `t_j = j * dt`, `j = 0..=n_steps`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    dt: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(dt: f64, n_steps: usize) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
        }
        if n_steps == 0 {
            return Err(Error::InvalidArgument("grid needs at least one step".into()));
        }
        Ok(Self { dt, n_steps })
    }

    /// Grid covering `[0, t_max]`; `t_max` is rounded to the nearest whole
    /// number of steps.
    pub fn covering(t_max: f64, dt: f64) -> Result<Self> {
        if !(t_max.is_finite() && t_max >= dt) {
            return Err(Error::InvalidArgument(format!("t_max {t_max} must be at least dt {dt}")));
        }
        Self::new(dt, (t_max / dt).round() as usize)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn n_points(&self) -> usize {
        self.n_steps + 1
    }

    pub fn time(&self, j: usize) -> f64 {
        j as f64 * self.dt
    }

    pub fn t_max(&self) -> f64 {
        self.time(self.n_steps)
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|j| self.time(j)).collect()
    }

    /// Indices `0, stride, 2*stride, ...`, always ending with `n_steps`.
    pub fn output_indices(&self, stride: usize) -> Vec<usize> {
        let stride = stride.max(1);
        let mut idx: Vec<usize> = (0..=self.n_steps).step_by(stride).collect();
        if *idx.last().unwrap() != self.n_steps {
            idx.push(self.n_steps);
        }
        idx
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn covering_grid() {
        let g = TimeGrid::covering(10.0, 1e-3).unwrap();
        assert_eq!(g.n_steps(), 10_000);
        assert!((g.t_max() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn output_indices_include_end() {
        let g = TimeGrid::new(0.1, 10).unwrap();
        assert_eq!(g.output_indices(4), vec![0, 4, 8, 10]);
        assert_eq!(g.output_indices(5), vec![0, 5, 10]);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(TimeGrid::new(0.0, 3).is_err());
        assert!(TimeGrid::new(0.1, 0).is_err());
        assert!(TimeGrid::covering(0.01, 0.1).is_err());
    }
}
