//! Radial, time and tensor polar grids.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::angular::AngularGrid;
use crate::error::{Error, Result};
use crate::functions::Point;

/// Cell-centred radial grid on (0,R): r_i = (i+½)Δr, never touching 0 or R.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    pub radius: f64,
    pub n: usize,
}

impl RadialGrid {
    pub fn new(radius: f64, n: usize) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidParameter(format!("radius must be positive, got {radius}")));
        }
        if n < 4 {
            return Err(Error::InvalidParameter(format!("need at least 4 radial cells, got {n}")));
        }
        Ok(Self { radius, n })
    }

    pub fn dr(&self) -> f64 {
        self.radius / self.n as f64
    }

    pub fn r(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dr()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.r(i)).collect()
    }

    pub fn refined(&self, factor: usize) -> Self {
        Self { radius: self.radius, n: self.n * factor }
    }
}

/// Uniform time grid t_n = nΔt, n = 0..=N_t.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub horizon: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon >= 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidParameter(format!("horizon must be >= 0, got {horizon}")));
        }
        if steps == 0 && horizon > 0.0 {
            return Err(Error::InvalidParameter("positive horizon needs at least one step".into()));
        }
        Ok(Self { horizon, steps })
    }

    pub fn dt(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.horizon / self.steps as f64
        }
    }

    pub fn t(&self, n: usize) -> f64 {
        if n == self.steps {
            self.horizon
        } else {
            n as f64 * self.dt()
        }
    }

    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn refined(&self, factor: usize) -> Self {
        Self { horizon: self.horizon, steps: self.steps * factor }
    }

    /// Prefix of this grid ending at step `n`.
    pub fn truncated(&self, n: usize) -> Self {
        Self { horizon: self.t(n), steps: n }
    }
}

/// Tensor grid radial × angular; node (i,k) has flat index `i * n_ang + k`.
#[derive(Debug, Clone)]
pub struct PolarGrid {
    pub radial: RadialGrid,
    pub angular: Arc<AngularGrid>,
}

impl PolarGrid {
    pub fn new(radial: RadialGrid, angular: Arc<AngularGrid>) -> Self {
        Self { radial, angular }
    }

    pub fn build(dim: usize, radius: f64, n_r: usize, n_theta: usize, n_phi: usize) -> Result<Self> {
        Ok(Self::new(RadialGrid::new(radius, n_r)?, Arc::new(AngularGrid::new(dim, n_theta, n_phi)?)))
    }

    pub fn dim(&self) -> usize {
        self.angular.dim
    }

    pub fn n_r(&self) -> usize {
        self.radial.n
    }

    pub fn n_ang(&self) -> usize {
        self.angular.len()
    }

    pub fn len(&self) -> usize {
        self.n_r() * self.n_ang()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, i: usize, k: usize) -> Point {
        self.point_at(self.radial.r(i), k)
    }

    pub fn point_at(&self, r: f64, k: usize) -> Point {
        let d = self.angular.dirs[k];
        [r * d[0], r * d[1], r * d[2]]
    }

    /// Volume quadrature weight of node (i,k) (midpoint in r).
    pub fn volume_weight(&self, i: usize, k: usize) -> f64 {
        let r = self.radial.r(i);
        r.powi(self.dim() as i32 - 1) * self.radial.dr() * self.angular.weights[k]
    }

    /// Nodal samples of a function of position.
    pub fn sample(&self, f: impl Fn(&Point) -> f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        for i in 0..self.n_r() {
            for k in 0..self.n_ang() {
                out.push(f(&self.point(i, k)));
            }
        }
        out
    }

    /// Same radial resolution refined by `factor`, same angular grid.
    pub fn refined(&self, factor: usize) -> Self {
        Self { radial: self.radial.refined(factor), angular: self.angular.clone() }
    }
}
