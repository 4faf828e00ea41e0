//! Structured coefficients of 𝒜, the free operators ℬ and 𝒞, problem data
//! and structural validation.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forcing::Forcing;
use crate::functions::{norm, Jet, Mat3, Point, RadialFn, SpaceTimeFn, SpatialFn};
use crate::grid::PolarGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryKind {
    #[serde(alias = "D", alias = "dirichlet")]
    Dirichlet,
    #[serde(alias = "N", alias = "neumann")]
    Neumann,
}

/// a_jk = a δ_jk + (b+c)(δ_jk − n_j n_k) − d n_j n_k with n = x/|x|.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoefficientModel {
    pub dim: usize,
    pub radius: f64,
    pub a: RadialFn,
    pub b: RadialFn,
    pub d: RadialFn,
    pub c: SpatialFn,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipticityBounds {
    pub alpha1: f64,
    pub alpha2: f64,
    /// Extreme Rayleigh quotients observed in the random sampling.
    pub sampled_min: f64,
    pub sampled_max: f64,
}

impl CoefficientModel {
    pub fn new(dim: usize, radius: f64, a: RadialFn, b: RadialFn, d: RadialFn, c: SpatialFn) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::InvalidParameter(format!("dimension must be 2 or 3, got {dim}")));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidParameter(format!("radius must be positive, got {radius}")));
        }
        Ok(Self { dim, radius, a, b, d, c })
    }

    /// a ≡ 1, b = c = d ≡ 0 (𝒜 = Δ).
    pub fn isotropic(dim: usize, radius: f64) -> Result<Self> {
        Self::new(dim, radius, RadialFn::Constant(1.0), RadialFn::zero(), RadialFn::zero(), SpatialFn::zero())
    }

    /// Polynomial coefficients with a non-radial c.
    pub fn structured(dim: usize, radius: f64) -> Result<Self> {
        let r2 = 1.0 / (radius * radius);
        let c = SpatialFn::poly(&[(1.0, [2, 0, 0]), (1.0, [0, 2, 0]), (1.0, [0, 0, 2])])
            .times(SpatialFn::poly(&[(1.0, [0, 0, 0]), (1.0 / radius, [1, 0, 0])]))
            .scaled(0.1 * r2);
        Self::new(
            dim,
            radius,
            RadialFn::Polynomial(vec![1.0, 0.0, 0.5 * r2]),
            RadialFn::Polynomial(vec![0.0, 0.0, 0.3 * r2]),
            RadialFn::Polynomial(vec![0.0, 0.0, 0.2 * r2]),
            c,
        )
    }

    /// Trigonometric radial profiles, c ≡ 0.
    pub fn trig(dim: usize, radius: f64) -> Result<Self> {
        let k = PI / radius;
        let cos = |amp: f64| RadialFn::Cosine { amp, freq: k, phase: 0.0 };
        Self::new(
            dim,
            radius,
            RadialFn::Sum(vec![RadialFn::Constant(1.5), cos(0.25)]),
            RadialFn::Sum(vec![RadialFn::Constant(0.1), cos(-0.1)]),
            RadialFn::Sum(vec![RadialFn::Constant(0.1), cos(-0.1)]),
            SpatialFn::zero(),
        )
    }

    pub fn preset(name: &str, dim: usize, radius: f64) -> Result<Self> {
        match name {
            "isotropic" => Self::isotropic(dim, radius),
            "structured" => Self::structured(dim, radius),
            "trig" => Self::trig(dim, radius),
            other => Err(Error::Config(format!(
                "unknown coefficient preset '{other}' (known: isotropic, structured, trig)"
            ))),
        }
    }

    pub fn h(&self, r: f64) -> f64 {
        self.a.value(r) - self.d.value(r)
    }

    pub fn h_d1(&self, r: f64) -> f64 {
        self.a.d1(r) - self.d.d1(r)
    }

    fn check_domain(&self, x: &Point) -> Result<f64> {
        let r = norm(x);
        if r > self.radius * (1.0 + 1e-12) {
            return Err(Error::OutsideDomain { radius: r, domain: self.radius });
        }
        Ok(r)
    }

    pub fn assemble_aij(&self, x: &Point) -> Result<Mat3> {
        let r = self.check_domain(x)?;
        let mut m = [[0.0; 3]; 3];
        let a = self.a.value(r);
        if r == 0.0 {
            for (j, row) in m.iter_mut().enumerate().take(self.dim) {
                row[j] = a;
            }
            return Ok(m);
        }
        let gamma = self.b.value(r) + self.c.value(x);
        let delta = self.d.value(r);
        let n = [x[0] / r, x[1] / r, x[2] / r];
        for j in 0..self.dim {
            for k in j..self.dim {
                let dl = if j == k { 1.0 } else { 0.0 };
                m[j][k] = a * dl + gamma * (dl - n[j] * n[k]) - delta * n[j] * n[k];
                m[k][j] = m[j][k];
            }
        }
        Ok(m)
    }

    /// 𝒜u = Σ_j ∂_j(Σ_k a_jk ∂_k u) in Cartesian form from the jet of u.
    /// At the exact origin the value is taken along the first axis at
    /// distance 1e−9·R.
    pub fn apply_cartesian(&self, x: &Point, u: &Jet) -> f64 {
        let mut x = *x;
        let mut r = norm(&x);
        if r == 0.0 {
            x = [1e-9 * self.radius, 0.0, 0.0];
            r = x[0];
        }
        let dim = self.dim;
        let n = [x[0] / r, x[1] / r, x[2] / r];
        let (a0, a1, _) = self.a.eval3(r);
        let (b0, b1, _) = self.b.eval3(r);
        let (d0, d1, _) = self.d.eval3(r);
        let cj = self.c.jet(&x);
        let gamma = b0 + cj.v;
        let mut grad_gamma = [0.0; 3];
        for k in 0..dim {
            grad_gamma[k] = b1 * n[k] + cj.g[k];
        }
        let dr_gamma: f64 = (0..dim).map(|k| grad_gamma[k] * n[k]).sum();
        let sig = (dim - 1) as f64;
        let mut out = 0.0;
        for j in 0..dim {
            for k in 0..dim {
                let dl = if j == k { 1.0 } else { 0.0 };
                let ajk = a0 * dl + gamma * (dl - n[j] * n[k]) - d0 * n[j] * n[k];
                out += ajk * u.h[j][k];
            }
        }
        for k in 0..dim {
            let gk = a1 * n[k] + grad_gamma[k] - dr_gamma * n[k] - sig * (gamma + d0) * n[k] / r
                - d1 * n[k];
            out += gk * u.g[k];
        }
        out
    }

    /// Sampling nodes for pointwise constraint checks: `n` cells on [0,R],
    /// endpoints included.
    fn radial_samples(&self, n: usize) -> Vec<f64> {
        (0..=n).map(|i| self.radius * i as f64 / n as f64).collect()
    }

    /// α₁ = min h, α₂ = max(a+b) + max|c|, plus a randomized check of the
    /// quadratic-form sandwich.
    pub fn ellipticity_bounds(&self, n_samples: usize, seed: u64) -> Result<EllipticityBounds> {
        let rs = self.radial_samples(n_samples.max(16));
        let alpha1 = rs.iter().map(|&r| self.h(r)).fold(f64::INFINITY, f64::min);
        if !(alpha1 > 0.0) {
            return Err(Error::DegenerateEllipticity { min_h: alpha1 });
        }
        let max_ab = rs.iter().map(|&r| self.a.value(r) + self.b.value(r)).fold(f64::MIN, f64::max);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut max_c: f64 = 0.0;
        let mut pts = Vec::with_capacity(n_samples);
        for _ in 0..n_samples {
            let x = self.random_point(&mut rng);
            max_c = max_c.max(self.c.value(&x).abs());
            pts.push(x);
        }
        let alpha2 = max_ab + max_c;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for x in &pts {
            let m = self.assemble_aij(x)?;
            let mut xi = [0.0; 3];
            for v in xi.iter_mut().take(self.dim) {
                *v = rng.random_range(-1.0..1.0);
            }
            let nxi: f64 = xi.iter().map(|v| v * v).sum();
            if nxi < 1e-12 {
                continue;
            }
            let mut q = 0.0;
            for j in 0..3 {
                for k in 0..3 {
                    q += m[j][k] * xi[j] * xi[k];
                }
            }
            lo = lo.min(q / nxi);
            hi = hi.max(q / nxi);
        }
        Ok(EllipticityBounds { alpha1, alpha2, sampled_min: lo, sampled_max: hi })
    }

    /// Uniform random point in the closed ball.
    pub fn random_point(&self, rng: &mut impl Rng) -> Point {
        loop {
            let mut x = [0.0; 3];
            for v in x.iter_mut().take(self.dim) {
                *v = rng.random_range(-self.radius..=self.radius);
            }
            if norm(&x) <= self.radius {
                return x;
            }
        }
    }
}

/// ℬ = Σ ∂_j(b_jk ∂_k) and 𝒞 = Σ c_j ∂_j.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OperatorBC {
    pub b: Vec<Vec<SpatialFn>>,
    pub c: Vec<SpatialFn>,
}

impl OperatorBC {
    pub fn new(b: Vec<Vec<SpatialFn>>, c: Vec<SpatialFn>) -> Result<Self> {
        let dim = c.len();
        if !(dim == 2 || dim == 3) || b.len() != dim || b.iter().any(|row| row.len() != dim) {
            return Err(Error::InvalidParameter("ℬ needs a d×d and 𝒞 a d-vector of coefficients".into()));
        }
        Ok(Self { b, c })
    }

    /// b_jk = β(x) δ_jk and a constant drift vector.
    pub fn scalar(dim: usize, beta: SpatialFn, drift: &[f64]) -> Result<Self> {
        let b = (0..dim)
            .map(|j| (0..dim).map(|k| if j == k { beta.clone() } else { SpatialFn::zero() }).collect())
            .collect();
        let c = (0..dim).map(|j| SpatialFn::Constant(drift.get(j).copied().unwrap_or(0.0))).collect();
        Self::new(b, c)
    }

    pub fn dim(&self) -> usize {
        self.c.len()
    }

    pub fn apply_b(&self, x: &Point, u: &Jet) -> f64 {
        let dim = self.dim();
        let mut out = 0.0;
        for j in 0..dim {
            for k in 0..dim {
                let bj = self.b[j][k].jet(x);
                out += bj.v * u.h[j][k] + bj.g[j] * u.g[k];
            }
        }
        out
    }

    pub fn apply_c(&self, x: &Point, u: &Jet) -> f64 {
        (0..self.dim()).map(|j| self.c[j].value(x) * u.g[j]).sum()
    }
}

/// Default measurement weight ψ(x) = (R²−|x|²)(1+x₁/R).
pub fn default_psi(radius: f64) -> SpatialFn {
    let r2 = radius * radius;
    SpatialFn::poly(&[(r2, [0, 0, 0]), (-1.0, [2, 0, 0]), (-1.0, [0, 2, 0]), (-1.0, [0, 0, 2])])
        .times(SpatialFn::poly(&[(1.0, [0, 0, 0]), (1.0 / radius, [1, 0, 0])]))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub model: CoefficientModel,
    pub ops: OperatorBC,
    pub boundary: BoundaryKind,
    pub f: Forcing,
    pub u0: SpatialFn,
    pub u1: SpaceTimeFn,
    pub psi: SpatialFn,
    pub horizon: f64,
    pub p: f64,
}

impl ProblemSpec {
    pub fn dim(&self) -> usize {
        self.model.dim
    }

    pub fn radius(&self) -> f64 {
        self.model.radius
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub residual: f64,
    /// Warning-level checks never block a run.
    pub warning: bool,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    fn push(&mut self, name: &str, residual: f64, tol: f64, warning: bool) {
        self.checks.push(Check {
            name: name.to_string(),
            passed: residual.is_finite() && residual <= tol,
            residual,
            warning,
        });
    }

    /// True when every blocking check passed.
    pub fn ok(&self) -> bool {
        self.checks.iter().all(|c| c.passed || c.warning)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed && !c.warning).collect()
    }

    pub fn warnings(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed && c.warning).collect()
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn into_result(self) -> Result<Self> {
        if self.ok() {
            Ok(self)
        } else {
            let names: Vec<String> = self
                .failures()
                .iter()
                .map(|c| format!("{} (residual {:.3e})", c.name, c.residual))
                .collect();
            Err(Error::InvalidParameter(format!("problem validation failed: {}", names.join(", "))))
        }
    }
}

/// Initial measurement samples for the compatibility checks Φ[u₀]=g₁(0,·),
/// Ψ[u₀]=g₂(0); `g1` is given at the radial nodes of the grid.
#[derive(Debug, Clone)]
pub struct InitialMeasurements {
    pub g1: Vec<f64>,
    pub g2: f64,
}

const REL_TOL: f64 = 1e-9;

/// Check every structural hypothesis on a sample set made of the solver grid
/// plus a 10× refined radial grid.
pub fn validate_spec(spec: &ProblemSpec, grid: &PolarGrid, initial: Option<&InitialMeasurements>) -> ValidationReport {
    let m = &spec.model;
    let mut rep = ValidationReport::default();
    let big_r = m.radius;
    let mut rs = m.radial_samples(10 * grid.n_r());
    rs.extend(grid.radial.nodes());
    let ang = &grid.angular;

    let dim_bound = if m.dim == 3 { 3.0 } else { 2.0 };
    rep.push("p > dimension", (dim_bound - spec.p).max(0.0) + if spec.p > dim_bound { 0.0 } else { 1.0 }, 0.0, false);
    rep.push(
        "dimensions agree",
        ((m.dim != spec.ops.dim()) as u8 + (m.dim != grid.dim()) as u8) as f64,
        0.0,
        false,
    );

    let scale = rs.iter().map(|&r| m.a.value(r).abs()).fold(1e-300, f64::max);
    let neg = |f: &RadialFn| rs.iter().map(|&r| (-f.value(r)).max(0.0)).fold(0.0, f64::max);
    rep.push("a nonnegative", neg(&m.a), REL_TOL * scale, false);
    rep.push("b nonnegative", neg(&m.b), REL_TOL * scale, false);
    rep.push("d nonnegative", neg(&m.d), REL_TOL * scale, false);

    let mut pts: Vec<Point> = Vec::new();
    for &r in rs.iter().step_by(5) {
        for k in 0..ang.len() {
            pts.push(grid.point_at(r, k));
        }
    }
    let c_neg = pts.iter().map(|x| (-m.c.value(x)).max(0.0)).fold(0.0, f64::max);
    rep.push("c nonnegative", c_neg, REL_TOL * scale, false);

    let eps = 1e-8 * scale;
    let gap = rs.iter().map(|&r| m.a.value(r) - m.d.value(r)).fold(f64::INFINITY, f64::min);
    rep.push("a > d", (eps - gap).max(0.0), 0.0, false);
    rep.push("b(0)+c(0)=0", (m.b.value(0.0) + m.c.value(&[0.0; 3])).abs(), REL_TOL * scale, false);
    rep.push("d(0)=0", m.d.value(0.0).abs(), REL_TOL * scale, false);

    // symmetry and conormal alignment
    let mut sym: f64 = 0.0;
    for x in &pts {
        if let Ok(a) = m.assemble_aij(x) {
            for j in 0..3 {
                for k in 0..3 {
                    sym = sym.max((a[j][k] - a[k][j]).abs());
                }
            }
        }
    }
    rep.push("a_jk symmetric", sym, 0.0, false);
    let mut conormal: f64 = 0.0;
    let h_r = m.h(big_r);
    for k in 0..ang.len() {
        let n = ang.dirs[k];
        let x = grid.point_at(big_r, k);
        if let Ok(a) = m.assemble_aij(&x) {
            for j in 0..3 {
                let an: f64 = (0..3).map(|l| a[j][l] * n[l]).sum();
                conormal = conormal.max((an - h_r * n[j]).abs());
            }
        }
    }
    rep.push("conormal parallel to normal", conormal, 1e-12 * scale.max(1.0), false);

    // ℬ, 𝒞 coefficients finite on the closed ball
    let mut bc_bad = 0.0;
    for x in &pts {
        for row in &spec.ops.b {
            for e in row {
                let j = e.jet(x);
                if !j.v.is_finite() || j.g.iter().any(|g| !g.is_finite()) {
                    bc_bad += 1.0;
                }
            }
        }
        if spec.ops.c.iter().any(|c| !c.value(x).is_finite()) {
            bc_bad += 1.0;
        }
    }
    rep.push("B, C coefficients bounded", bc_bad, 0.0, false);

    // boundary compatibility between u₀ and u₁(0,·)
    let mut mismatch: f64 = 0.0;
    let mut bscale: f64 = 1.0;
    for k in 0..ang.len() {
        let x = grid.point_at(big_r, k);
        let n = ang.dirs[k];
        let j0 = spec.u0.jet(&x);
        let j1 = spec.u1.jet(0.0, &x, 0);
        let res = match spec.boundary {
            BoundaryKind::Dirichlet => {
                bscale = bscale.max(j0.v.abs());
                j0.v - j1.v
            }
            BoundaryKind::Neumann => {
                let dn = |j: &Jet| (0..3).map(|l| j.g[l] * n[l]).sum::<f64>();
                bscale = bscale.max(dn(&j0).abs());
                dn(&j0) - dn(&j1)
            }
        };
        mismatch = mismatch.max(res.abs());
    }
    rep.push("initial/boundary compatibility", mismatch, REL_TOL * bscale, false);

    if spec.boundary == BoundaryKind::Dirichlet {
        let psi_b = (0..ang.len())
            .map(|k| spec.psi.value(&grid.point_at(big_r, k)).abs())
            .fold(0.0, f64::max);
        rep.push("psi vanishes on boundary", psi_b, 1e-12, false);
    }

    if let Some(init) = initial {
        let mut r1: f64 = 0.0;
        for i in 0..grid.n_r().min(init.g1.len()) {
            let r = grid.radial.r(i);
            let phi: f64 = (0..ang.len()).map(|k| ang.weights[k] * spec.u0.value(&grid.point_at(r, k))).sum();
            r1 = r1.max((phi - init.g1[i]).abs());
        }
        let mut psi_u0 = 0.0;
        for i in 0..grid.n_r() {
            for k in 0..ang.len() {
                let x = grid.point(i, k);
                psi_u0 += grid.volume_weight(i, k) * spec.psi.value(&x) * spec.u0.value(&x);
            }
        }
        let g1s = init.g1.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        rep.push("Phi[u0] = g1(0)", r1, 1e-8 * g1s, false);
        rep.push("Psi[u0] = g2(0)", (psi_u0 - init.g2).abs(), 1e-8 * init.g2.abs().max(1.0), false);
    }

    // extra regularity at the origin; reported only
    let flat = |f: &RadialFn, with_value: bool| {
        let (v, d1, d2) = f.eval3(0.0);
        let v = if with_value { v.abs() } else { 0.0 };
        v.max(d1.abs()).max(d2.abs())
    };
    rep.push("a'(0)=a''(0)=0", m.a.d1(0.0).abs().max(m.a.d2(0.0).abs()), 1e-9, true);
    rep.push("b, b', b'' vanish at 0", flat(&m.b, true), 1e-9, true);
    rep.push("d, d', d'' vanish at 0", flat(&m.d, true), 1e-9, true);
    let cj = m.c.jet(&[0.0; 3]);
    let cflat = cj.g.iter().map(|v| v.abs()).chain(cj.h.iter().flatten().map(|v| v.abs())).fold(0.0, f64::max);
    rep.push("grad c, hess c vanish at 0", cflat, 1e-9, true);
    rep
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec_for(model: CoefficientModel) -> ProblemSpec {
        let dim = model.dim;
        let radius = model.radius;
        let u = SpatialFn::poly(&[(1.0, [1, 0, 0]), (0.5, [2, 0, 0])]);
        ProblemSpec {
            ops: OperatorBC::scalar(dim, SpatialFn::Constant(1.0), &[1.0]).unwrap(),
            boundary: BoundaryKind::Dirichlet,
            f: Forcing::zero(),
            u0: u.clone(),
            u1: SpaceTimeFn::steady(u),
            psi: default_psi(radius),
            horizon: 1.0,
            p: 4.0,
            model,
        }
    }

    #[test]
    fn isotropic_matrix_is_identity() {
        let m = CoefficientModel::isotropic(3, 1.0).unwrap();
        let a = m.assemble_aij(&[0.3, -0.2, 0.1]).unwrap();
        for j in 0..3 {
            for k in 0..3 {
                assert_eq!(a[j][k], if j == k { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn symbolic_entries_on_axis() {
        let m = CoefficientModel::new(
            3,
            1.0,
            RadialFn::Constant(2.0),
            RadialFn::Polynomial(vec![0.0, 0.0, 1.0]),
            RadialFn::Polynomial(vec![0.0, 0.0, 0.5]),
            SpatialFn::zero(),
        )
        .unwrap();
        let a = m.assemble_aij(&[1.0, 0.0, 0.0]).unwrap();
        assert!((a[0][0] - 1.5).abs() < 1e-15);
        assert!((a[1][1] - 3.0).abs() < 1e-15);
        assert!((a[2][2] - 3.0).abs() < 1e-15);
        assert_eq!(a[0][1], 0.0);
        assert!(m.assemble_aij(&[1.1, 0.0, 0.0]).is_err());
        let b = m.ellipticity_bounds(200, 1).unwrap();
        assert!((b.alpha1 - 1.5).abs() < 1e-15);
    }

    #[test]
    fn origin_gives_scaled_identity() {
        let m = CoefficientModel::structured(3, 1.0).unwrap();
        let a = m.assemble_aij(&[0.0; 3]).unwrap();
        assert_eq!(a[0][0], 1.0);
        assert_eq!(a[0][1], 0.0);
    }

    #[test]
    fn cartesian_apply_matches_divergence_by_differences() {
        let m = CoefficientModel::structured(3, 1.0).unwrap();
        let u = SpatialFn::Sin(Box::new(SpatialFn::poly(&[(1.0, [1, 0, 0]), (0.7, [0, 1, 1])])));
        let x = [0.3, 0.2, -0.4];
        let h = 1e-4;
        let flux = |y: &Point, j: usize| {
            let a = m.assemble_aij(y).unwrap();
            let g = u.jet(y).g;
            (0..3).map(|k| a[j][k] * g[k]).sum::<f64>()
        };
        let mut div = 0.0;
        for j in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[j] += h;
            xm[j] -= h;
            div += (flux(&xp, j) - flux(&xm, j)) / (2.0 * h);
        }
        let exact = m.apply_cartesian(&x, &u.jet(&x));
        assert!((div - exact).abs() < 1e-6, "{div} vs {exact}");
    }

    #[test]
    fn validation_flags_nonzero_d_at_origin() {
        let mut m = CoefficientModel::isotropic(3, 1.0).unwrap();
        m.d = RadialFn::Constant(0.1);
        let grid = PolarGrid::build(3, 1.0, 8, 4, 8).unwrap();
        let rep = validate_spec(&spec_for(m), &grid, None);
        let c = rep.get("d(0)=0").unwrap();
        assert!(!c.passed);
        assert!((c.residual - 0.1).abs() < 1e-15);
        assert!(!rep.ok());
    }

    #[test]
    fn consistent_spec_passes() {
        for preset in ["isotropic", "structured", "trig"] {
            let m = CoefficientModel::preset(preset, 3, 1.0).unwrap();
            let grid = PolarGrid::build(3, 1.0, 8, 4, 8).unwrap();
            let rep = validate_spec(&spec_for(m), &grid, None);
            assert!(rep.ok(), "{preset}: {:?}", rep.failures());
        }
    }

    #[test]
    fn boundary_bump_is_measured() {
        let m = CoefficientModel::isotropic(2, 1.0).unwrap();
        let mut spec = spec_for(m);
        spec.ops = OperatorBC::scalar(2, SpatialFn::Constant(1.0), &[1.0]).unwrap();
        spec.u1.terms.push((
            crate::functions::TimeFn::constant(1e-3),
            SpatialFn::Exp(Box::new(SpatialFn::poly(&[(-50.0, [0, 2, 0]), (-50.0, [0, 0, 0]), (100.0, [1, 0, 0]), (-50.0, [2, 0, 0])]))),
        ));
        let grid = PolarGrid::build(2, 1.0, 8, 0, 32).unwrap();
        let rep = validate_spec(&spec, &grid, None);
        let c = rep.get("initial/boundary compatibility").unwrap();
        assert!((c.residual - 1e-3).abs() < 1e-9, "{}", c.residual);
    }
}
