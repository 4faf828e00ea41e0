//! Registry of exact (u*, k*) pairs with the source f that makes u* solve
//! the forward problem.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::forcing::{Forcing, ManufacturedForcing};
use crate::forward::KernelField;
use crate::functions::{RadialFn, RadialKernel, SpaceTimeFn, SpatialFn, TimeFn};
use crate::grid::{PolarGrid, TimeGrid};
use crate::measurements::{MeasurementSet, TimeDerivatives};
use crate::model::{default_psi, BoundaryKind, CoefficientModel, OperatorBC, ProblemSpec};
use crate::nondegeneracy::Certificate;
use crate::operators::Operators;

pub const CASE_NAMES: [&str; 3] = ["zero-kernel", "poly-kernel", "decay-kernel"];

/// Time scale of the transient part of u*.
const RATE: f64 = -1.0;

#[derive(Debug, Clone)]
pub struct ManufacturedCase {
    pub name: String,
    pub preset: String,
    pub spec: ProblemSpec,
    pub solution: SpaceTimeFn,
    pub kernel: RadialKernel,
}

/// ℬu = ∂_j(b_jk ∂_k u) with b = ½I + (x₁/R)² e₁e₁ᵀ, and 𝒞u = ∂₁u / R.
pub fn default_operators(dim: usize, radius: f64) -> Result<OperatorBC> {
    let b = (0..dim)
        .map(|j| {
            (0..dim)
                .map(|k| match (j, k) {
                    (0, 0) => SpatialFn::poly(&[(0.5, [0, 0, 0]), (1.0 / (radius * radius), [2, 0, 0])]),
                    _ if j == k => SpatialFn::Constant(0.5),
                    _ => SpatialFn::zero(),
                })
                .collect()
        })
        .collect();
    let c = (0..dim).map(|j| SpatialFn::Constant(if j == 0 { 1.0 / radius } else { 0.0 })).collect();
    OperatorBC::new(b, c)
}

fn quadratic_u0(dim: usize, radius: f64) -> SpatialFn {
    let s = 1.0 / (radius * radius);
    let mut t = vec![
        (1.0, [0, 0, 0]),
        (1.0 / radius, [1, 0, 0]),
        (0.5 * s, [2, 0, 0]),
        (0.3 * s, [0, 2, 0]),
        (0.2 * s, [1, 1, 0]),
    ];
    if dim == 3 {
        t.push((0.2 * s, [0, 0, 2]));
        t.push((-0.1 * s, [0, 1, 1]));
    }
    SpatialFn::poly(&t)
}

fn transient(dim: usize, radius: f64) -> SpatialFn {
    let s = 1.0 / (radius * radius);
    let mut t = vec![
        (0.5, [0, 0, 0]),
        (0.3 / radius, [0, 1, 0]),
        (-0.4 * s, [1, 1, 0]),
        (0.25 * s, [2, 0, 0]),
        (0.25 * s, [0, 2, 0]),
    ];
    if dim == 3 {
        t.push((0.25 * s, [0, 0, 2]));
        t.push((0.2 / radius, [0, 0, 1]));
    }
    SpatialFn::poly(&t)
}

/// (|x|² − R²)² / R², vanishing with its normal derivative on the sphere.
fn boundary_bump(dim: usize, radius: f64) -> SpatialFn {
    let r2 = radius * radius;
    let mut t = vec![(-r2, [0, 0, 0]), (1.0, [2, 0, 0]), (1.0, [0, 2, 0])];
    if dim == 3 {
        t.push((1.0, [0, 0, 2]));
    }
    let q = SpatialFn::poly(&t);
    q.clone().times(q).scaled(1.0 / r2)
}

impl ManufacturedCase {
    pub fn build(name: &str, dim: usize, preset: &str) -> Result<Self> {
        Self::build_with(name, dim, preset, 1.0, BoundaryKind::Dirichlet)
    }

    pub fn build_with(name: &str, dim: usize, preset: &str, radius: f64, boundary: BoundaryKind) -> Result<Self> {
        let model = CoefficientModel::preset(preset, dim, radius)?;
        let ops = default_operators(dim, radius)?;
        let r2 = radius * radius;
        let (solution, kernel, u0) = match name {
            "zero-kernel" => {
                // linear data: the discrete operators are exact, so u* stays put on any grid
                let u0 = SpatialFn::poly(&[(1.0, [0, 0, 0]), (1.0 / radius, [1, 0, 0])]);
                (SpaceTimeFn::steady(u0.clone()), RadialKernel::zero(), u0)
            }
            "poly-kernel" | "decay-kernel" => {
                let u0 = quadratic_u0(dim, radius);
                let w = transient(dim, radius);
                let sol = SpaceTimeFn::new(vec![
                    (TimeFn::constant(1.0), u0.clone()),
                    (TimeFn::constant(-1.0), w.clone()),
                    (TimeFn::exp(1.0, RATE), w),
                ]);
                let kernel = if name == "poly-kernel" {
                    let rho = RadialFn::Polynomial(vec![1.0, 0.0, 1.0 / r2]);
                    RadialKernel { terms: vec![(TimeFn::constant(1.0), rho.clone()), (TimeFn::linear(1.0), rho)] }
                } else {
                    let rho = RadialFn::Cosine { amp: 1.0, freq: PI / (2.0 * radius), phase: 0.0 };
                    RadialKernel { terms: vec![(TimeFn::exp(1.0, -1.0), rho)] }
                };
                (sol, kernel, u0)
            }
            other => {
                return Err(Error::Config(format!(
                    "unknown manufactured case '{other}' (known: {})",
                    CASE_NAMES.join(", ")
                )))
            }
        };
        // u₁ agrees with u* to first order on the boundary but differs inside
        let mut u1 = solution.clone();
        if name != "zero-kernel" {
            let bump = boundary_bump(dim, radius).scaled(0.5);
            u1.terms.push((TimeFn::exp(1.0, RATE), bump.clone()));
            u1.terms.push((TimeFn::constant(-1.0), bump));
        }
        let forcing = ManufacturedForcing::new(model.clone(), ops.clone(), solution.clone(), kernel.clone())?;
        let spec = ProblemSpec {
            model,
            ops,
            boundary,
            f: Forcing::Manufactured(Box::new(forcing)),
            u0,
            u1,
            psi: default_psi(radius),
            horizon: 0.5,
            p: 4.0,
        };
        Ok(Self { name: name.into(), preset: preset.into(), spec, solution, kernel })
    }

    pub fn registry(dim: usize, preset: &str) -> Result<Vec<Self>> {
        CASE_NAMES.iter().map(|n| Self::build(n, dim, preset)).collect()
    }

    pub fn operators(&self, grid: &PolarGrid) -> Result<Arc<Operators>> {
        Ok(Arc::new(Operators::new(&self.spec.model, grid, &self.spec.psi)?))
    }

    pub fn exact_state(&self, ops: &Operators, t: f64) -> Vec<f64> {
        ops.sample(|x| self.solution.value(t, x))
    }

    pub fn kernel_field(&self, time: TimeGrid, grid: &PolarGrid) -> KernelField {
        KernelField::from_kernel(&self.kernel, time, grid.radial)
    }

    /// Φ_h, Ψ_h of u* and of its time derivatives on the grid.
    pub fn exact_measurements(&self, ops: &Operators, time: TimeGrid) -> Result<MeasurementSet> {
        let series = |n: u32| -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
            let mut g1 = Vec::with_capacity(time.len());
            let mut g2 = Vec::with_capacity(time.len());
            for m in 0..time.len() {
                let t = time.t(m);
                let u = ops.sample(|x| self.solution.deriv_value(t, x, n));
                g1.push(ops.phi(&u)?);
                g2.push(ops.psi(&u)?);
            }
            Ok((g1, g2))
        };
        let (g1, g2) = series(0)?;
        let (g1_t, g2_t) = series(1)?;
        let (g1_tt, g2_tt) = series(2)?;
        MeasurementSet::new(time, ops.grid.radial, g1, g2)?
            .with_analytic_derivatives(TimeDerivatives { g1_t, g1_tt, g2_t, g2_tt })
    }

    pub fn certificate(&self, ops: &Operators) -> Result<Certificate> {
        crate::identify::certificate(&self.spec, ops)
    }
}
