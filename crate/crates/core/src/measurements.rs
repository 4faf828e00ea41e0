//! Measured data g₁(t,r) = Φ[u(t)](r), g₂(t) = Ψ[u(t)] and their time
//! derivatives.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{RadialGrid, TimeGrid};
use crate::stencil::{fd_weights, savitzky_golay5, uniform_derivative};

/// First and second time derivatives of both measurements.
#[derive(Debug, Clone)]
pub struct TimeDerivatives {
    pub g1_t: Vec<Vec<f64>>,
    pub g1_tt: Vec<Vec<f64>>,
    pub g2_t: Vec<f64>,
    pub g2_tt: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DerivativeSource {
    Analytic,
    FiniteDifference,
    /// Finite differences with the second derivative smoothed.
    Smoothed,
}

/// How measurement perturbations are generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Perturbation {
    /// Independent Gaussian factor per sample.
    Samples,
    /// Smooth random factor in (t, r); see [`MeasurementSet::with_smooth_perturbation`].
    Smooth,
}

#[derive(Debug, Clone)]
pub struct MeasurementSet {
    pub time: TimeGrid,
    pub radial: RadialGrid,
    /// g₁[n][i] at (t_n, r_i).
    pub g1: Vec<Vec<f64>>,
    pub g2: Vec<f64>,
    analytic: Option<TimeDerivatives>,
    /// Relative level of injected noise, 0 for clean data.
    pub noise_level: f64,
}

const FIRST_WIDTH: usize = 5;
const SECOND_WIDTH: usize = 6;

fn column(rows: &[Vec<f64>], i: usize) -> Vec<f64> {
    rows.iter().map(|r| r[i]).collect()
}

fn derivative_series(v: &[f64], dt: f64, order: usize, width: usize) -> Result<Vec<f64>> {
    let w = width.min(v.len());
    if w < order + 1 {
        return Err(Error::InvalidParameter(format!(
            "{} time levels are too few for a derivative of order {order}",
            v.len()
        )));
    }
    Ok(uniform_derivative(v, dt, order, w))
}

impl MeasurementSet {
    pub fn new(time: TimeGrid, radial: RadialGrid, g1: Vec<Vec<f64>>, g2: Vec<f64>) -> Result<Self> {
        if g1.len() != time.len() || g2.len() != time.len() || g1.iter().any(|r| r.len() != radial.n) {
            return Err(Error::GridMismatch("measurement arrays do not match their grids".into()));
        }
        if g1.iter().flatten().chain(g2.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("measurements".into()));
        }
        Ok(Self { time, radial, g1, g2, analytic: None, noise_level: 0.0 })
    }

    pub fn with_analytic_derivatives(mut self, d: TimeDerivatives) -> Result<Self> {
        let nt = self.time.len();
        let ok = d.g1_t.len() == nt
            && d.g1_tt.len() == nt
            && d.g2_t.len() == nt
            && d.g2_tt.len() == nt
            && d.g1_t.iter().chain(d.g1_tt.iter()).all(|r| r.len() == self.radial.n);
        if !ok {
            return Err(Error::GridMismatch("analytic derivative arrays do not match the grids".into()));
        }
        self.analytic = Some(d);
        Ok(self)
    }

    pub fn drop_analytic_derivatives(mut self) -> Self {
        self.analytic = None;
        self
    }

    pub fn derivative_source(&self) -> DerivativeSource {
        if self.analytic.is_some() {
            DerivativeSource::Analytic
        } else if self.noise_level > 0.0 {
            DerivativeSource::Smoothed
        } else {
            DerivativeSource::FiniteDifference
        }
    }

    /// Analytic derivatives when attached, else fourth-order differences.
    pub fn time_derivatives(&self) -> Result<TimeDerivatives> {
        if let Some(d) = &self.analytic {
            return Ok(d.clone());
        }
        let dt = self.time.dt();
        if self.time.steps == 0 {
            return Err(Error::InvalidParameter("time derivatives need at least one step".into()));
        }
        let smooth = self.noise_level > 0.0;
        let nr = self.radial.n;
        let nt = self.time.len();
        let mut g1_t = vec![vec![0.0; nr]; nt];
        let mut g1_tt = vec![vec![0.0; nr]; nt];
        for i in 0..nr {
            let s = column(&self.g1, i);
            let d1 = derivative_series(&s, dt, 1, FIRST_WIDTH)?;
            let mut d2 = derivative_series(&s, dt, 2, SECOND_WIDTH)?;
            if smooth {
                d2 = savitzky_golay5(&d2);
            }
            for n in 0..nt {
                g1_t[n][i] = d1[n];
                g1_tt[n][i] = d2[n];
            }
        }
        let g2_t = derivative_series(&self.g2, dt, 1, FIRST_WIDTH)?;
        let mut g2_tt = derivative_series(&self.g2, dt, 2, SECOND_WIDTH)?;
        if smooth {
            g2_tt = savitzky_golay5(&g2_tt);
        }
        Ok(TimeDerivatives { g1_t, g1_tt, g2_t, g2_tt })
    }

    /// Multiplicative Gaussian noise g(1 + δξ), reproducible from `seed`.
    pub fn with_noise(mut self, level: f64, seed: u64) -> Result<Self> {
        if !(level >= 0.0 && level.is_finite()) {
            return Err(Error::InvalidParameter(format!("noise level must be >= 0, got {level}")));
        }
        if level == 0.0 {
            return Ok(self);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for row in &mut self.g1 {
            for v in row.iter_mut() {
                let xi: f64 = StandardNormal.sample(&mut rng);
                *v *= 1.0 + level * xi;
            }
        }
        for v in &mut self.g2 {
            let xi: f64 = StandardNormal.sample(&mut rng);
            *v *= 1.0 + level * xi;
        }
        self.analytic = None;
        self.noise_level = level;
        Ok(self)
    }

    /// Multiplicative perturbation g(1 + δξ) by a smooth random field
    /// ξ(t,r) = Σ c_ab cos(aπt/T) cos(bπr/R), a, b < 3, with standard normal
    /// coefficients scaled so that ξ has unit variance. Unlike sample noise,
    /// its time and radial derivatives are of the same size as ξ itself.
    pub fn with_smooth_perturbation(mut self, level: f64, seed: u64) -> Result<Self> {
        if !(level >= 0.0 && level.is_finite()) {
            return Err(Error::InvalidParameter(format!("perturbation level must be >= 0, got {level}")));
        }
        if level == 0.0 {
            return Ok(self);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = || -> f64 { StandardNormal.sample(&mut rng) };
        let c1: Vec<[f64; 3]> = (0..3).map(|_| [draw() / 3.0, draw() / 3.0, draw() / 3.0]).collect();
        let c2: Vec<f64> = (0..3).map(|_| draw() / 3f64.sqrt()).collect();
        let (horizon, radius) = (self.time.horizon, self.radial.radius);
        let mode = |a: usize, x: f64, l: f64| (a as f64 * std::f64::consts::PI * x / l).cos();
        for (n, row) in self.g1.iter_mut().enumerate() {
            let t = self.time.t(n);
            for (i, v) in row.iter_mut().enumerate() {
                let r = self.radial.r(i);
                let xi: f64 = (0..3).map(|a| (0..3).map(|b| c1[a][b] * mode(a, t, horizon) * mode(b, r, radius)).sum::<f64>()).sum();
                *v *= 1.0 + level * xi;
            }
        }
        for (n, v) in self.g2.iter_mut().enumerate() {
            let t = self.time.t(n);
            let eta: f64 = (0..3).map(|a| c2[a] * mode(a, t, horizon)).sum();
            *v *= 1.0 + level * eta;
        }
        self.analytic = None;
        self.noise_level = level;
        Ok(self)
    }

    pub fn perturbed(self, kind: Perturbation, level: f64, seed: u64) -> Result<Self> {
        match kind {
            Perturbation::Samples => self.with_noise(level, seed),
            Perturbation::Smooth => self.with_smooth_perturbation(level, seed),
        }
    }

    /// The data on [0, t_n].
    pub fn truncated(&self, n: usize) -> Result<Self> {
        if n > self.time.steps {
            return Err(Error::InvalidParameter(format!("step {n} beyond the {} available", self.time.steps)));
        }
        let cut = |d: &TimeDerivatives| TimeDerivatives {
            g1_t: d.g1_t[..=n].to_vec(),
            g1_tt: d.g1_tt[..=n].to_vec(),
            g2_t: d.g2_t[..=n].to_vec(),
            g2_tt: d.g2_tt[..=n].to_vec(),
        };
        Ok(Self {
            time: self.time.truncated(n),
            radial: self.radial,
            g1: self.g1[..=n].to_vec(),
            g2: self.g2[..=n].to_vec(),
            analytic: self.analytic.as_ref().map(cut),
            noise_level: self.noise_level,
        })
    }

    /// Transfer to coarser grids: every `time.steps`-th level is kept (the
    /// step counts must divide) and g₁ is interpolated in r by four-point
    /// Lagrange stencils, reflected evenly through r = 0.
    pub fn resample(&self, time: TimeGrid, radial: RadialGrid) -> Result<Self> {
        if (time.horizon - self.time.horizon).abs() > 1e-12 * self.time.horizon.max(1.0)
            || (radial.radius - self.radial.radius).abs() > 1e-12 * self.radial.radius
        {
            return Err(Error::GridMismatch("resampling needs the same horizon and radius".into()));
        }
        if time.steps == 0 || !self.time.steps.is_multiple_of(time.steps) {
            return Err(Error::GridMismatch(format!(
                "cannot subsample {} steps onto {}",
                self.time.steps, time.steps
            )));
        }
        let stride = self.time.steps / time.steps;
        let targets = radial.nodes();
        let src = self.radial;
        let weights: Vec<(Vec<isize>, Vec<f64>)> = targets.iter().map(|&r| lagrange4(&src, r)).collect();
        let pick = |row: &Vec<f64>| -> Vec<f64> {
            weights
                .iter()
                .map(|(idx, w)| idx.iter().zip(w).map(|(&j, w)| w * row[reflect(j)]).sum())
                .collect()
        };
        let g1 = (0..time.len()).map(|n| pick(&self.g1[n * stride])).collect();
        let g2 = (0..time.len()).map(|n| self.g2[n * stride]).collect();
        let analytic = self.analytic.as_ref().map(|d| TimeDerivatives {
            g1_t: (0..time.len()).map(|n| pick(&d.g1_t[n * stride])).collect(),
            g1_tt: (0..time.len()).map(|n| pick(&d.g1_tt[n * stride])).collect(),
            g2_t: (0..time.len()).map(|n| d.g2_t[n * stride]).collect(),
            g2_tt: (0..time.len()).map(|n| d.g2_tt[n * stride]).collect(),
        });
        Ok(Self { time, radial, g1, g2, analytic, noise_level: self.noise_level })
    }

    /// Largest relative deviation from another set on the same grids.
    pub fn relative_difference(&self, other: &MeasurementSet) -> Result<(f64, f64)> {
        if self.time.len() != other.time.len() || self.radial.n != other.radial.n {
            return Err(Error::GridMismatch("measurement sets live on different grids".into()));
        }
        let (mut d1, mut n1) = (0.0f64, 0.0f64);
        for (a, b) in self.g1.iter().flatten().zip(other.g1.iter().flatten()) {
            d1 = d1.max((a - b).abs());
            n1 = n1.max(b.abs());
        }
        let (mut d2, mut n2) = (0.0f64, 0.0f64);
        for (a, b) in self.g2.iter().zip(&other.g2) {
            d2 = d2.max((a - b).abs());
            n2 = n2.max(b.abs());
        }
        Ok((d1 / n1.max(f64::MIN_POSITIVE), d2 / n2.max(f64::MIN_POSITIVE)))
    }
}

/// Negative indices stand for mirrored nodes r_{−1−j} = −r_j.
fn reflect(j: isize) -> usize {
    if j < 0 {
        (-1 - j) as usize
    } else {
        j as usize
    }
}

fn lagrange4(src: &RadialGrid, r: f64) -> (Vec<isize>, Vec<f64>) {
    let dr = src.dr();
    let n = src.n as isize;
    let pos = r / dr - 0.5;
    let mut start = pos.floor() as isize - 1;
    start = start.min(n - 4);
    let idx: Vec<isize> = (start..start + 4).collect();
    let xs: Vec<f64> = idx.iter().map(|&j| (j as f64 + 0.5) * dr).collect();
    let w = fd_weights(r, &xs, 0).swap_remove(0);
    (idx, w)
}
