use crate::error::{Error, Result};

/// Uniform time grid `t_k = t0 + (t1 - t0) k / steps`, `k = 0..=steps`.
///
/// The requested step is rounded down so that an integer number of steps
/// lands exactly on `t1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t0: f64,
    t1: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, t1: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidStep(dt));
        }
        if !(t1 > t0) || !t0.is_finite() || !t1.is_finite() {
            return Err(Error::InvalidInterval { t0, t1 });
        }
        let steps = ((t1 - t0) / dt - 1e-9).ceil().max(1.0) as usize;
        Ok(Self { t0, t1, steps })
    }

    pub fn with_steps(t0: f64, t1: f64, steps: usize) -> Result<Self> {
        if !(t1 > t0) || !t0.is_finite() || !t1.is_finite() {
            return Err(Error::InvalidInterval { t0, t1 });
        }
        if steps == 0 {
            return Err(Error::InvalidStep(0.0));
        }
        Ok(Self { t0, t1, steps })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t1(&self) -> f64 {
        self.t1
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

    pub fn dt(&self) -> f64 {
        (self.t1 - self.t0) / self.steps as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.steps {
            self.t1
        } else {
            self.t0 + (self.t1 - self.t0) * (k as f64 / self.steps as f64)
        }
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|k| self.time(k))
    }

    /// Every `stride`-th point; `steps` must be divisible by `stride`.
    pub fn subsample(&self, stride: usize) -> Option<Self> {
        if stride == 0 || !self.steps.is_multiple_of(stride) {
            return None;
        }
        Some(Self { t0: self.t0, t1: self.t1, steps: self.steps / stride })
    }

    /// Index of the grid point closest to `t`, if it lies within 1e-6 of the
    /// step size.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let x = (t - self.t0) / self.dt();
        let k = x.round();
        if k < 0.0 || k > self.steps as f64 || (x - k).abs() > 1e-6 {
            return None;
        }
        Some(k as usize)
    }
}
