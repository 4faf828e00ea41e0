//! Refinement and closed-loop drivers shared by the CLI and the test suites.

use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::forward::{solve_forward, ForwardOptions};
use crate::grid::{PolarGrid, TimeGrid};
use crate::identify::{identify, kernel_error, IdentificationResult, IdentifyOptions, IdentifyStatus};
use crate::manufactured::ManufacturedCase;
use crate::measurements::{MeasurementSet, Perturbation};

/// Angular resolution used by the studies: 16 nodes on the circle, a 6×12
/// Gauss product grid on the sphere.
pub fn study_grid(dim: usize, radius: f64, n_r: usize) -> Result<PolarGrid> {
    match dim {
        2 => PolarGrid::build(2, radius, n_r, 0, 16),
        3 => PolarGrid::build(3, radius, n_r, 6, 12),
        d => Err(Error::InvalidParameter(format!("dimension must be 2 or 3, got {d}"))),
    }
}

fn log2_ratio(a: f64, b: f64) -> f64 {
    if b > 0.0 {
        (a / b).log2()
    } else {
        f64::INFINITY
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ForwardLevel {
    pub n_r: usize,
    pub n_t: usize,
    /// max over nodes of |u_h(T) − u*(T)|.
    pub error: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ForwardConvergence {
    pub case: String,
    pub dim: usize,
    pub levels: Vec<ForwardLevel>,
    /// log₂ of successive error ratios.
    pub orders: Vec<f64>,
}

impl ForwardConvergence {
    pub fn min_order(&self) -> f64 {
        self.orders.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Forward solve with the exact kernel on each (N_r, N_t) and compare the final
/// state with the manufactured solution.
pub fn forward_convergence(case: &ManufacturedCase, levels: &[(usize, usize)]) -> Result<ForwardConvergence> {
    let mut out = Vec::new();
    for &(n_r, n_t) in levels {
        let start = Instant::now();
        let grid = study_grid(case.spec.dim(), case.spec.radius(), n_r)?;
        let ops = case.operators(&grid)?;
        let time = TimeGrid::new(case.spec.horizon, n_t)?;
        let kernel = case.kernel_field(time, &grid);
        let sol = solve_forward(&case.spec, ops.clone(), time, &kernel, ForwardOptions { keep_trajectory: false, ..Default::default() })?;
        let exact = case.exact_state(&ops, case.spec.horizon);
        let error = sol.final_state().iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        out.push(ForwardLevel { n_r, n_t, error, seconds: start.elapsed().as_secs_f64() });
    }
    let orders = out.windows(2).map(|w| log2_ratio(w[0].error, w[1].error)).collect();
    Ok(ForwardConvergence { case: case.name.clone(), dim: case.spec.dim(), levels: out, orders })
}

/// Measurements for identification on (N_r, N_t), produced by a forward solve
/// on a grid `refine` times finer in r and t and subsampled onto the coarse one.
pub fn synthesize(case: &ManufacturedCase, n_r: usize, n_t: usize, refine: usize) -> Result<MeasurementSet> {
    if refine == 0 {
        return Err(Error::InvalidParameter("refinement factor must be at least 1".into()));
    }
    let fine = study_grid(case.spec.dim(), case.spec.radius(), n_r * refine)?;
    let ops = case.operators(&fine)?;
    let ftime = TimeGrid::new(case.spec.horizon, n_t * refine)?;
    let sol = solve_forward(&case.spec, ops, ftime, &case.kernel_field(ftime, &fine), ForwardOptions { keep_trajectory: false, ..Default::default() })?;
    let coarse = study_grid(case.spec.dim(), case.spec.radius(), n_r)?;
    sol.measurements().resample(TimeGrid::new(case.spec.horizon, n_t)?, coarse.radial)
}

#[derive(Debug, Clone, Serialize)]
pub struct ClosedLoop {
    pub case: String,
    pub dim: usize,
    pub n_r: usize,
    pub n_t: usize,
    pub refine: usize,
    pub noise: f64,
    /// Relative sup_t L₂ᵖ error against the true kernel (absolute when it is zero).
    pub kernel_error: f64,
    /// max of the relative g₁, g₂ residuals after re-simulation.
    pub equivalence: Option<f64>,
    pub status: IdentifyStatus,
    pub reached_horizon: f64,
    pub seconds: f64,
}

/// Synthesize, optionally perturb, identify and score against the true kernel.
pub fn closed_loop(
    case: &ManufacturedCase,
    n_r: usize,
    n_t: usize,
    refine: usize,
    noise: Option<(f64, u64)>,
    opts: &IdentifyOptions,
) -> Result<(ClosedLoop, IdentificationResult)> {
    let start = Instant::now();
    let mut meas = synthesize(case, n_r, n_t, refine)?;
    if let Some((level, seed)) = noise {
        meas = meas.with_noise(level, seed)?;
    }
    let grid = study_grid(case.spec.dim(), case.spec.radius(), n_r)?;
    let ops = case.operators(&grid)?;
    let res = identify(&case.spec, ops, &meas, opts)?;
    let exact = case.kernel_field(meas.time, &grid);
    let err = kernel_error(&res.k, &exact.k, &grid.radial, case.spec.p)?;
    let summary = ClosedLoop {
        case: case.name.clone(),
        dim: case.spec.dim(),
        n_r,
        n_t,
        refine,
        noise: noise.map_or(0.0, |n| n.0),
        kernel_error: err,
        equivalence: res.equivalence.as_ref().map(|e| e.max()),
        status: res.status,
        reached_horizon: res.reached_horizon,
        seconds: start.elapsed().as_secs_f64(),
    };
    Ok((summary, res))
}

#[derive(Debug, Clone, Serialize)]
pub struct NoiseLevel {
    pub delta: f64,
    /// Relative L₂ᵖ distance to the kernel recovered from clean data, over
    /// the part of [0, T] the perturbed run reached.
    pub deviation: f64,
    pub status: IdentifyStatus,
    pub reached_horizon: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct NoiseStudy {
    pub case: String,
    pub dim: usize,
    pub perturbation: Perturbation,
    pub levels: Vec<NoiseLevel>,
    /// Least-squares slope of log deviation against log δ.
    pub slope: f64,
}

impl NoiseStudy {
    /// Every perturbed run reached the horizon.
    pub fn complete(&self) -> bool {
        self.levels.iter().all(|l| !matches!(l.status, IdentifyStatus::FailedAt { .. }))
    }
}

/// Sensitivity of the recovered kernel to multiplicative measurement
/// perturbations. The same seed is used at every level, so the perturbation
/// direction is fixed and only its size changes.
pub fn noise_study(
    case: &ManufacturedCase,
    n_r: usize,
    n_t: usize,
    deltas: &[f64],
    kind: Perturbation,
    seed: u64,
) -> Result<NoiseStudy> {
    let opts = IdentifyOptions { equivalence_check: false, ..Default::default() };
    let clean = synthesize(case, n_r, n_t, 2)?;
    let grid = study_grid(case.spec.dim(), case.spec.radius(), n_r)?;
    let ops = case.operators(&grid)?;
    let base = identify(&case.spec, ops.clone(), &clean, &opts)?;
    let mut levels = Vec::new();
    for &delta in deltas {
        let noisy = clean.clone().perturbed(kind, delta, seed)?;
        let res = identify(&case.spec, ops.clone(), &noisy, &opts)?;
        let deviation = kernel_error(&res.k, &base.k, &grid.radial, case.spec.p)?;
        levels.push(NoiseLevel { delta, deviation, status: res.status, reached_horizon: res.reached_horizon });
    }
    let pts: Vec<(f64, f64)> = levels.iter().map(|l| (l.delta.ln(), l.deviation.ln())).collect();
    let n = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(NoiseStudy { case: case.name.clone(), dim: case.spec.dim(), perturbation: kind, levels, slope: sxy / sxx })
}
