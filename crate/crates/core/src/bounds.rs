//! Discrete checks of the a-priori bounds on Φ, Ψ, E and ℳ and of the
//! weighted Hölder embedding, over randomized smooth instances.
//!
//! Every check returns a relative defect (lhs − rhs)/rhs; a bound holds on an
//! instance when the defect is nonpositive.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::functions::SpatialFn;
use crate::grid::{PolarGrid, RadialGrid};
use crate::model::{default_psi, CoefficientModel};
use crate::norms::{holder_constants, weighted_lp_norm, weighted_sobolev_norm};
use crate::operators::{e_apply, m_apply, Operators};

fn rel(lhs: f64, rhs: f64) -> f64 {
    if rhs > 0.0 {
        (lhs - rhs) / rhs
    } else if lhs > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

/// Surface measure |S^{d−1}|.
pub fn sphere_measure(dim: usize) -> f64 {
    if dim == 3 {
        4.0 * PI
    } else {
        2.0 * PI
    }
}

/// ‖u‖_{Lᵖ(Ω)} with the solver's quadrature.
pub fn lp_norm(ops: &Operators, u: &[f64], p: f64) -> Result<f64> {
    let abs: Vec<f64> = u.iter().map(|v| v.abs().powf(p)).collect();
    Ok(ops.integrate(&abs)?.powf(1.0 / p))
}

/// ‖Φ[u]‖_{L^p_{d−1}} ≤ |S|^{1/p'} ‖u‖_{Lᵖ(Ω)}.
pub fn phi_bound_defect(ops: &Operators, u: &[f64], p: f64) -> Result<f64> {
    let sigma = (ops.dim() - 1) as f64;
    let lhs = weighted_lp_norm(&ops.grid.radial, &ops.phi(u)?, sigma, p)?;
    let rhs = sphere_measure(ops.dim()).powf(1.0 - 1.0 / p) * lp_norm(ops, u, p)?;
    Ok(rel(lhs, rhs))
}

/// |Ψ[v]| ≤ |Ω|^{1/p'} ‖ψ‖_∞ ‖v‖_{Lᵖ(Ω)}.
pub fn psi_bound_defect(ops: &Operators, v: &[f64], p: f64) -> Result<f64> {
    let dim = ops.dim();
    let radius = ops.grid.radial.radius;
    let volume = sphere_measure(dim) * radius.powi(dim as i32) / dim as f64;
    let psi_max = ops.psi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let lhs = ops.psi(v)?.abs();
    let rhs = volume.powf(1.0 - 1.0 / p) * psi_max * lp_norm(ops, v, p)?;
    Ok(rel(lhs, rhs))
}

/// Hardy-type constant of ‖Eq‖ᵖ_{σ,p} ≤ C‖q‖ᵖ_{σ,p}: (Rᵖ/(σ+1))((p−1)/(p−1−σ))^{p−1}.
pub fn e_bound_constant(radius: f64, p: f64, sigma: f64) -> Result<f64> {
    if p <= sigma + 1.0 {
        return Err(Error::InvalidParameter(format!("E bound needs p > σ+1 = {}, got {p}", sigma + 1.0)));
    }
    Ok(radius.powf(p) / (sigma + 1.0) * ((p - 1.0) / (p - 1.0 - sigma)).powf(p - 1.0))
}

pub fn e_bound_defect(grid: &RadialGrid, q: &[f64], p: f64, sigma: f64) -> Result<f64> {
    let eq = e_apply(q, grid.dr());
    let lhs = weighted_lp_norm(grid, &eq, sigma, p)?.powf(p);
    let rhs = e_bound_constant(grid.radius, p, sigma)? * weighted_lp_norm(grid, q, sigma, p)?.powf(p);
    Ok(rel(lhs, rhs))
}

/// ‖ℳ(q,w)‖ᵖ_{Lᵖ(Ω)} ≤ |S| ‖w‖ᵖ_∞ ‖q‖ᵖ_{L^p_{d−1}}.
pub fn m_bound_defect(ops: &Operators, q: &[f64], w: &[f64], p: f64) -> Result<f64> {
    let sigma = (ops.dim() - 1) as f64;
    let lhs = lp_norm(ops, &m_apply(q, w)?, p)?.powf(p);
    let w_max = w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let rhs = sphere_measure(ops.dim()) * w_max.powf(p) * weighted_lp_norm(&ops.grid.radial, q, sigma, p)?.powf(p);
    Ok(rel(lhs, rhs))
}

/// max |u_i − u_j| − C|r_i − r_j|^γ ‖u‖_{W^{1,p}_σ}, relative to C‖u‖_{W^{1,p}_σ}.
pub fn holder_defect(grid: &RadialGrid, u: &[f64], p: f64, sigma: f64) -> Result<f64> {
    let (c, gamma) = holder_constants(p, sigma)?;
    let scale = c * weighted_sobolev_norm(grid, u, sigma, p, 1)?;
    if scale == 0.0 {
        return Ok(0.0);
    }
    let mut worst = f64::NEG_INFINITY;
    for i in 0..grid.n {
        for j in i + 1..grid.n {
            let lhs = (u[i] - u[j]).abs();
            let rhs = (grid.r(j) - grid.r(i)).powf(gamma) * scale;
            worst = worst.max((lhs - rhs) / scale);
        }
    }
    Ok(worst)
}

/// A random smooth field on the ball: a cubic polynomial plus a sine of a
/// linear form, coefficients scaled to the radius.
pub fn random_field(rng: &mut impl Rng, dim: usize, radius: f64) -> SpatialFn {
    let mut terms = Vec::new();
    for a in 0..=3u32 {
        for b in 0..=3 - a {
            for c in 0..=3 - a - b {
                if dim == 2 && c > 0 {
                    continue;
                }
                let deg = (a + b + c) as i32;
                let coef = rng.random_range(-1.0..1.0) / radius.powi(deg);
                terms.push((coef, [a, b, c]));
            }
        }
    }
    let mut lin = vec![(rng.random_range(-1.0..1.0), [0, 0, 0])];
    for axis in 0..dim {
        let mut pow = [0; 3];
        pow[axis] = 1;
        lin.push((rng.random_range(-2.0..2.0) / radius, pow));
    }
    SpatialFn::Sum(vec![SpatialFn::poly(&terms), SpatialFn::Sin(Box::new(SpatialFn::poly(&lin)))])
}

/// A random smooth radial profile: cubic in r plus a damped oscillation.
pub fn random_profile(rng: &mut impl Rng, grid: &RadialGrid) -> Vec<f64> {
    let r0 = grid.radius;
    let c: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
    let freq = rng.random_range(0.5..4.0);
    let phase = rng.random_range(0.0..2.0 * PI);
    grid.nodes()
        .into_iter()
        .map(|r| {
            let s = r / r0;
            c[0] + c[1] * s + c[2] * s * s + c[3] * s * s * s + 0.5 * (freq * PI * s + phase).sin() * (-s).exp()
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub dim: usize,
    pub instances: usize,
    pub phi: f64,
    pub psi: f64,
    pub e: f64,
    pub m: f64,
    pub holder: f64,
}

impl BoundReport {
    pub fn worst(&self) -> f64 {
        [self.phi, self.psi, self.e, self.m, self.holder].into_iter().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Largest relative defect of each bound over `instances` random draws.
/// Exponents are drawn from (σ+1.5, 8) so that E and the embedding apply.
pub fn bound_suite(dim: usize, instances: usize, seed: u64) -> Result<BoundReport> {
    let radius = 1.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sigma = (dim - 1) as f64;
    let presets = ["isotropic", "structured", "trig"];
    let mut grids = Vec::new();
    for (n_r, n_theta, n_phi) in [(12, 8, 16), (24, 6, 12)] {
        let grid = if dim == 3 {
            PolarGrid::build(3, radius, n_r, n_theta, n_phi)?
        } else {
            PolarGrid::build(2, radius, n_r, 0, 2 * n_phi)?
        };
        for name in presets {
            let model = CoefficientModel::preset(name, dim, radius)?;
            grids.push(Operators::new(&model, &grid, &default_psi(radius))?);
        }
    }
    let mut report = BoundReport {
        dim,
        instances,
        phi: f64::NEG_INFINITY,
        psi: f64::NEG_INFINITY,
        e: f64::NEG_INFINITY,
        m: f64::NEG_INFINITY,
        holder: f64::NEG_INFINITY,
    };
    for n in 0..instances {
        let ops = &grids[n % grids.len()];
        let p = rng.random_range(sigma + 1.5..8.0);
        let fu = random_field(&mut rng, dim, radius);
        let fw = random_field(&mut rng, dim, radius);
        let u = ops.sample(|x| fu.value(x));
        let w = ops.sample(|x| fw.value(x));
        let q = random_profile(&mut rng, &ops.grid.radial);
        report.phi = report.phi.max(phi_bound_defect(ops, &u, p)?);
        report.psi = report.psi.max(psi_bound_defect(ops, &u, p)?);
        report.e = report.e.max(e_bound_defect(&ops.grid.radial, &q, p, sigma)?);
        report.m = report.m.max(m_bound_defect(ops, &q, &w, p)?);
        report.holder = report.holder.max(holder_defect(&ops.grid.radial, &q, p, sigma)?);
    }
    Ok(report)
}
