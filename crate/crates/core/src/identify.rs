//! Kernel identification: the data pipeline and the causal (v, l, q)
//! fixed-point march, with reconstruction of (u, k).

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{boundary_data, closure, memory_term, solve_forward, CrankNicolson, ForwardOptions, KernelField};
use crate::grid::{RadialGrid, TimeGrid};
use crate::measurements::{DerivativeSource, MeasurementSet};
use crate::model::{BoundaryKind, ProblemSpec};
use crate::nondegeneracy::Certificate;
use crate::norms::{radial_derivative, weighted_lp_norm};
use crate::operators::{e_apply, m_apply, Closure, GridBC, Operators};

/// Sign conventions for the initial-data formulas. `AsPrinted` reproduces
/// the published signs, which disagree with the fixed-point equations
/// whenever N₁⁰(0) or Ψ₁[v₀] is nonzero; it exists to demonstrate that.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FormulaVariant {
    #[default]
    Corrected,
    AsPrinted,
}

impl FormulaVariant {
    fn sign(self) -> f64 {
        match self {
            FormulaVariant::Corrected => 1.0,
            FormulaVariant::AsPrinted => -1.0,
        }
    }
}

/// Everything derived from data before the march starts. Time-indexed
/// arrays have one entry per level of the measurement grid.
#[derive(Debug, Clone)]
pub struct DataPipeline {
    pub time: TimeGrid,
    pub variant: FormulaVariant,
    pub n1_0: Vec<Vec<f64>>,
    pub n2_0: Vec<f64>,
    pub n3_0: Vec<Vec<f64>>,
    pub n0: Vec<f64>,
    pub l0: Vec<f64>,
    pub q0: Vec<Vec<f64>>,
    /// ℬD_tu₁, 𝒞D_tu₁ and 𝒜D_tu₁ − D_t²u₁ + D_tf on the grid.
    pub z0: Vec<Vec<f64>>,
    pub z1: Vec<Vec<f64>>,
    pub z2: Vec<Vec<f64>>,
    pub v0: Vec<f64>,
    pub psi1_v0: f64,
    /// The closed-form kernel at t = 0 and the field l̃₂ entering it.
    pub k0: Vec<f64>,
    pub l2: Vec<f64>,
    /// k₀(R) and k₀′ from the closed form.
    pub k0_at_r: f64,
    pub k0_prime: Vec<f64>,
    /// l₀(0) − J₁⁻¹Ψ₁[v₀] and q₀(0) ∓ J₂J₁⁻¹Ψ₁[v₀].
    pub l0_tilde: f64,
    pub q0_tilde: Vec<f64>,
    pub diagnostics: PipelineDiagnostics,
}

#[derive(Debug, Clone, Serialize)]
pub struct PipelineDiagnostics {
    pub derivative_source: DerivativeSource,
    /// Relative mismatch of Φ[v₀] with D_tg₁(0) − Φ[D_tu₁(0)].
    pub phi_v0_residual: f64,
    /// Relative mismatch of Ψ[v₀] with D_tg₂(0) − Ψ[D_tu₁(0)].
    pub psi_v0_residual: f64,
    /// max |F| and its extrapolated boundary value, where
    /// F = k₀′𝒞u₀ + k₀ℬu₀ + 𝒜²u₀ + 𝒜f(0) − D_t²u₁(0) + D_tf(0).
    pub f_max: f64,
    pub f_boundary: f64,
    /// sup_t of the r²-weighted Lᵖ norm of (1/r)D_tD_rg₁.
    pub inner_regularity: f64,
    pub warnings: Vec<String>,
}

/// Boundary data of the n-th time derivative of u₁, per angular node.
fn u1_boundary(spec: &ProblemSpec, ops: &Operators, t: f64, n: u32) -> Vec<f64> {
    boundary_data(spec.boundary, &spec.u1, ops, t, n)
}

/// Φ of boundary data: the single closure entry of a radial field.
fn radial_closure_value(ops: &Operators, data: &[f64]) -> f64 {
    data.iter().zip(&ops.grid.angular.weights).map(|(a, b)| a * b).sum()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn build_pipeline(
    spec: &ProblemSpec,
    ops: &Operators,
    meas: &MeasurementSet,
    cert: &Certificate,
    variant: FormulaVariant,
) -> Result<DataPipeline> {
    if meas.radial.n != ops.n_r() || (meas.radial.radius - ops.grid.radial.radius).abs() > 1e-12 * meas.radial.radius {
        return Err(Error::GridMismatch("measurements and operators use different radial grids".into()));
    }
    let time = meas.time;
    let der = meas.time_derivatives()?;
    let kind = spec.boundary;
    let bc = GridBC::new(&spec.ops, &ops.grid);
    let sign = variant.sign();
    let nt = time.len();
    let mut pipe = DataPipeline {
        time,
        variant,
        n1_0: Vec::with_capacity(nt),
        n2_0: Vec::with_capacity(nt),
        n3_0: Vec::with_capacity(nt),
        n0: Vec::with_capacity(nt),
        l0: Vec::with_capacity(nt),
        q0: Vec::with_capacity(nt),
        z0: Vec::with_capacity(nt),
        z1: Vec::with_capacity(nt),
        z2: Vec::with_capacity(nt),
        v0: Vec::new(),
        psi1_v0: 0.0,
        k0: Vec::new(),
        l2: Vec::new(),
        k0_at_r: 0.0,
        k0_prime: Vec::new(),
        l0_tilde: 0.0,
        q0_tilde: Vec::new(),
        diagnostics: PipelineDiagnostics {
            derivative_source: meas.derivative_source(),
            phi_v0_residual: 0.0,
            psi_v0_residual: 0.0,
            f_max: 0.0,
            f_boundary: 0.0,
            inner_regularity: 0.0,
            warnings: Vec::new(),
        },
    };
    for n in 0..nt {
        let t = time.t(n);
        let ft = ops.sample(|x| spec.f.deriv_value(t, x, 1));
        let u1t = ops.sample(|x| spec.u1.deriv_value(t, x, 1));
        let u1tt = ops.sample(|x| spec.u1.deriv_value(t, x, 2));
        let bdt = u1_boundary(spec, ops, t, 1);
        let cl = closure(kind, &bdt);
        let rad = [radial_closure_value(ops, &bdt)];
        let a1 = ops.atilde1(&der.g1_t[n], &closure(kind, &rad))?;
        let phi_ft = ops.phi(&ft)?;
        let n1: Vec<f64> = (0..ops.n_r()).map(|i| der.g1_tt[n][i] - a1[i] - phi_ft[i]).collect();
        let n2 = der.g2_tt[n] - ops.psi1(&u1t, &cl)? - ops.psi(&ft)?;
        let n3 = cert.j3_apply(&n1);
        let n0 = n2 - ops.psi(&m_apply(&n3, &cert.cu0)?)? + sign * ops.psi(&m_apply(&e_apply(&n3, ops.dr()), &cert.bu0)?)?;
        let l0 = n0 / cert.j1;
        let q0: Vec<f64> = cert.j2.iter().zip(&n3).map(|(j, s)| j * l0 + s).collect();
        let au = ops.atilde(&u1t, &cl)?;
        let z2: Vec<f64> = (0..au.len()).map(|j| au[j] - u1tt[j] + ft[j]).collect();
        pipe.z0.push(ops.b_apply(&bc, &u1t, &cl)?);
        pipe.z1.push(ops.c_apply(&bc, &u1t, &cl)?);
        pipe.z2.push(z2);
        pipe.n1_0.push(n1);
        pipe.n2_0.push(n2);
        pipe.n3_0.push(n3);
        pipe.n0.push(n0);
        pipe.l0.push(l0);
        pipe.q0.push(q0);
    }
    if pipe.n1_0.iter().flatten().chain(pipe.n2_0.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("data pipeline (derivative estimates too rough)".into()));
    }

    // initial data
    let u0 = ops.sample(|x| spec.u0.value(x));
    let b0 = u1_boundary(spec, ops, 0.0, 0);
    let au0 = ops.atilde(&u0, &closure(kind, &b0))?;
    let f0 = ops.sample(|x| spec.f.value(0.0, x));
    let u1t0 = ops.sample(|x| spec.u1.deriv_value(0.0, x, 1));
    let v0: Vec<f64> = (0..u0.len()).map(|j| au0[j] + f0[j] - u1t0[j]).collect();
    let zeros = vec![0.0; ops.n_ang()];
    let psi1_v0 = ops.psi1(&v0, &closure(kind, &zeros))?;

    // closed form of k at t = 0
    let n10 = &pipe.n1_0[0];
    let ln = cert.l_apply(n10);
    let inner: Vec<f64> = (0..ops.n_r())
        .map(|i| n10[i] / cert.c_phi[i] + cert.b_phi[i] / cert.c_phi[i] * ln[i])
        .collect();
    let neg_ln: Vec<f64> = ln.iter().map(|v| -v).collect();
    let l2: Vec<f64> = m_apply(&inner, &cert.cu0)?
        .iter()
        .zip(m_apply(&neg_ln, &cert.bu0)?)
        .map(|(a, b)| a + b)
        .collect();
    let k0_at_r = (-sign * ops.psi(&l2)? + pipe.n2_0[0] - psi1_v0) / cert.j1;
    let k0: Vec<f64> = (0..ops.n_r()).map(|i| k0_at_r * cert.exp_q[i] - ln[i]).collect();
    let k0_prime: Vec<f64> = (0..ops.n_r())
        .map(|i| (n10[i] - cert.b_phi[i] * k0[i]) / cert.c_phi[i])
        .collect();
    let corr = psi1_v0 / cert.j1;
    pipe.l0_tilde = pipe.l0[0] - corr;
    pipe.q0_tilde = pipe.q0[0].iter().zip(&cert.j2).map(|(q, j)| q - sign * j * corr).collect();

    // consistency of v₀ with the data
    let d = &mut pipe.diagnostics;
    let phi_v0 = ops.phi(&v0)?;
    let phi_u1t = ops.phi(&u1t0)?;
    let target: Vec<f64> = sub(&der.g1_t[0], &phi_u1t);
    let scale = max_abs(&der.g1_t[0]).max(max_abs(&phi_u1t)).max(max_abs(&phi_v0)).max(f64::MIN_POSITIVE);
    d.phi_v0_residual = max_abs(&sub(&phi_v0, &target)) / scale;
    let psi_target = der.g2_t[0] - ops.psi(&u1t0)?;
    let pscale = der.g2_t[0].abs().max(ops.psi(&v0)?.abs()).max(f64::MIN_POSITIVE);
    d.psi_v0_residual = (ops.psi(&v0)? - psi_target).abs() / pscale;

    // compatibility residual F
    let a2u0 = ops.atilde(&au0, &Closure::Extrapolate)?;
    let af0 = ops.atilde(&f0, &Closure::Extrapolate)?;
    let u1tt0 = ops.sample(|x| spec.u1.deriv_value(0.0, x, 2));
    let ft0 = ops.sample(|x| spec.f.deriv_value(0.0, x, 1));
    let kq = m_apply(&k0_prime, &cert.cu0)?;
    let kb = m_apply(&k0, &cert.bu0)?;
    let fres: Vec<f64> = (0..u0.len()).map(|j| kq[j] + kb[j] + a2u0[j] + af0[j] - u1tt0[j] + ft0[j]).collect();
    d.f_max = max_abs(&fres);
    let na = ops.n_ang();
    let nr = ops.n_r();
    d.f_boundary = (0..na)
        .map(|k| {
            let at = |i: usize| fres[i * na + k];
            ((15.0 * at(nr - 1) - 10.0 * at(nr - 2) + 3.0 * at(nr - 3)) / 8.0).abs()
        })
        .fold(0.0, f64::max);
    if kind == BoundaryKind::Dirichlet && d.f_boundary > 1e-2 * d.f_max.max(1.0) {
        d.warnings.push(format!(
            "compatibility residual F does not vanish on the boundary ({:.3e})",
            d.f_boundary
        ));
    }

    // (1/r) D_t D_r g₁ near the origin
    let radial = meas.radial;
    let mut reg: f64 = 0.0;
    let mut blowup = false;
    for row in &der.g1_t {
        let dr = radial_derivative(&radial, row, 1);
        let w: Vec<f64> = dr.iter().enumerate().map(|(i, v)| v / radial.r(i)).collect();
        reg = reg.max(weighted_lp_norm(&radial, &w, 2.0, spec.p)?);
        let typical = max_abs(&w[w.len() / 4..]);
        if !w[0].is_finite() || w[0].abs() > 100.0 * typical.max(1e-300) && w[0].abs() > 1e-8 {
            blowup = true;
        }
    }
    d.inner_regularity = reg;
    if !reg.is_finite() || blowup {
        d.warnings.push("(1/r) D_t D_r g1 grows near r = 0; data may be too rough at the origin".into());
    }
    if d.phi_v0_residual > 1e-2 || d.psi_v0_residual > 1e-2 {
        d.warnings.push(format!(
            "initial data inconsistent with measurements: Phi residual {:.2e}, Psi residual {:.2e}",
            d.phi_v0_residual, d.psi_v0_residual
        ));
    }

    pipe.v0 = v0;
    pipe.psi1_v0 = psi1_v0;
    pipe.k0 = k0;
    pipe.l2 = l2;
    pipe.k0_at_r = k0_at_r;
    pipe.k0_prime = k0_prime;
    Ok(pipe)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct IdentifyOptions {
    /// Update (relative, absolute below magnitude 1) at which the inner iteration stops.
    pub tol: f64,
    pub max_iter: usize,
    /// Retries of a failed step, each halving the relaxation factor.
    pub max_halvings: usize,
    pub variant: FormulaVariant,
    /// Re-simulate with the recovered kernel and compare with the data.
    pub equivalence_check: bool,
}

impl Default for IdentifyOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 50, max_halvings: 4, variant: FormulaVariant::Corrected, equivalence_check: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum IdentifyStatus {
    Converged,
    /// Some steps needed an under-relaxed inner iteration.
    Relaxed { steps: usize },
    /// The inner iteration failed at this step; results stop one step earlier.
    FailedAt { step: usize, time: f64 },
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct StepLog {
    pub step: usize,
    pub time: f64,
    pub iterations: usize,
    pub update: f64,
    /// Sequence of update ratios is summarised by the last one.
    pub contraction: f64,
    pub relaxation: f64,
}

/// Defects between the state at t = 0 and the pipeline's initial values.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RoundTrip {
    pub v: f64,
    /// l(0) against k₀(R) and q(0) against k₀′.
    pub l_vs_k0: f64,
    pub q_vs_k0: f64,
    /// l(0), q(0) against l̃₀, q̃₀.
    pub l_vs_tilde: f64,
    pub q_vs_tilde: f64,
}

impl RoundTrip {
    pub fn max(&self) -> f64 {
        [self.v, self.l_vs_k0, self.q_vs_k0, self.l_vs_tilde, self.q_vs_tilde].into_iter().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct EquivalenceReport {
    /// sup_t ‖Φ[u_fwd] − g₁‖ / sup_t ‖g₁‖ in the r²-weighted Lᵖ norm.
    pub g1_residual: f64,
    /// sup_t |Ψ[u_fwd] − g₂| / sup_t |g₂|.
    pub g2_residual: f64,
}

impl EquivalenceReport {
    pub fn max(&self) -> f64 {
        self.g1_residual.max(self.g2_residual)
    }
}

#[derive(Debug, Clone)]
pub struct IdentificationResult {
    /// Levels actually reached.
    pub time: TimeGrid,
    pub radial: RadialGrid,
    pub v: Vec<Vec<f64>>,
    pub l: Vec<f64>,
    pub q: Vec<Vec<f64>>,
    /// k = l − Eq.
    pub k: Vec<Vec<f64>>,
    /// u₁(t) − u₁(0) + u₀ + ∫₀ᵗ v.
    pub u: Vec<Vec<f64>>,
    pub log: Vec<StepLog>,
    pub status: IdentifyStatus,
    pub reached_horizon: f64,
    pub round_trip: RoundTrip,
    pub equivalence: Option<EquivalenceReport>,
    pub diagnostics: PipelineDiagnostics,
    pub certificate: Certificate,
}

impl IdentificationResult {
    pub fn kernel_field(&self) -> Result<KernelField> {
        KernelField::from_values_and_derivative(self.k.clone(), self.q.clone(), self.time, self.radial)
    }
}

/// N₁ at step m from the history (entry m holds the current iterate).
pub fn n1_apply(
    k: &[Vec<f64>],
    q: &[Vec<f64>],
    bv: &[Vec<f64>],
    cv: &[Vec<f64>],
    m: usize,
    dt: f64,
    na: usize,
) -> Vec<f64> {
    let mut out = memory_term(k, q, bv, cv, m, dt, na);
    for v in &mut out {
        *v = -*v;
    }
    out
}

/// Nondegeneracy certificate for the problem's u₀.
pub fn certificate(spec: &ProblemSpec, ops: &Operators) -> Result<Certificate> {
    let bc = GridBC::new(&spec.ops, &ops.grid);
    let u0 = ops.sample(|x| spec.u0.value(x));
    let data = u1_boundary(spec, ops, 0.0, 0);
    let cl = closure(spec.boundary, &data);
    Certificate::new(ops, ops.b_apply(&bc, &u0, &cl)?, ops.c_apply(&bc, &u0, &cl)?)
}

struct March<'a> {
    ops: &'a Operators,
    pipe: &'a DataPipeline,
    cert: &'a Certificate,
    bc: GridBC,
    cn: Option<CrankNicolson>,
    kind: BoundaryKind,
    dt: f64,
    zeros: Vec<f64>,
    v: Vec<Vec<f64>>,
    l: Vec<f64>,
    q: Vec<Vec<f64>>,
    k: Vec<Vec<f64>>,
    /// ℬv + z₀ and 𝒞v + z₁.
    bv: Vec<Vec<f64>>,
    cv: Vec<Vec<f64>>,
    /// Source of the v-equation at each accepted level.
    src: Vec<Vec<f64>>,
}

struct Iterate {
    v: Vec<f64>,
    l: f64,
    q: Vec<f64>,
}

fn rel_update(new: &[f64], old: &[f64]) -> f64 {
    let d = new.iter().zip(old).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
    if d == 0.0 {
        0.0
    } else {
        d / max_abs(new).max(max_abs(old)).max(f64::MIN_POSITIVE)
    }
}

/// Relative for iterates of size ≥ 1, absolute below, so that iterates that
/// sit at roundoff level (a vanishing kernel) do not stall the stopping test.
fn mixed_update(new: &[f64], old: &[f64]) -> f64 {
    let d = new.iter().zip(old).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
    d / max_abs(new).max(max_abs(old)).max(1.0)
}

impl March<'_> {
    fn homogeneous(&self) -> Closure<'_> {
        closure(self.kind, &self.zeros)
    }

    fn kernel(&self, l: f64, q: &[f64]) -> Vec<f64> {
        e_apply(q, self.ops.dr()).iter().map(|e| l - e).collect()
    }

    fn set_level(&mut self, m: usize, v: Vec<f64>, l: f64, q: Vec<f64>) -> Result<()> {
        let k = self.kernel(l, &q);
        let cl = self.homogeneous();
        let bv: Vec<f64> = self.ops.b_apply(&self.bc, &v, &cl)?.iter().zip(&self.pipe.z0[m]).map(|(a, b)| a + b).collect();
        let cv: Vec<f64> = self.ops.c_apply(&self.bc, &v, &cl)?.iter().zip(&self.pipe.z1[m]).map(|(a, b)| a + b).collect();
        if self.v.len() == m {
            self.v.push(v);
            self.l.push(l);
            self.q.push(q);
            self.k.push(k);
            self.bv.push(bv);
            self.cv.push(cv);
        } else {
            self.v[m] = v;
            self.l[m] = l;
            self.q[m] = q;
            self.k[m] = k;
            self.bv[m] = bv;
            self.cv[m] = cv;
        }
        Ok(())
    }

    /// (l, q) from the fixed-point equations given N₁ and v at one level.
    fn lq(&self, m: usize, n1: &[f64], v: &[f64]) -> Result<(f64, Vec<f64>)> {
        let ops = self.ops;
        let n2 = self.cert.j3_apply(&ops.phi(n1)?);
        let en2 = e_apply(&n2, ops.dr());
        let n3 = (ops.psi(n1)? - ops.psi(&m_apply(&n2, &self.cert.cu0)?)? + ops.psi(&m_apply(&en2, &self.cert.bu0)?)?
            - ops.psi1(v, &self.homogeneous())?)
            / self.cert.j1;
        let l = self.pipe.l0[m] + n3;
        let q = (0..ops.n_r()).map(|i| self.pipe.q0[m][i] + self.cert.j2[i] * n3 + n2[i]).collect();
        Ok((l, q))
    }

    fn source(&self, m: usize, n1: &[f64], l: f64, q: &[f64]) -> Result<Vec<f64>> {
        let k = self.kernel(l, q);
        let kb = m_apply(&k, &self.cert.bu0)?;
        let qc = m_apply(q, &self.cert.cu0)?;
        Ok((0..n1.len()).map(|j| -n1[j] + kb[j] + qc[j] + self.pipe.z2[m][j]).collect())
    }

    fn start(&mut self) -> Result<()> {
        let v0 = self.pipe.v0.clone();
        let zero = vec![0.0; v0.len()];
        let (l, q) = self.lq(0, &zero, &v0)?;
        let src = self.source(0, &zero, l, &q)?;
        self.set_level(0, v0, l, q)?;
        self.src.push(src);
        Ok(())
    }

    /// Inner iteration at level m with relaxation ω; Ok(None) when it
    /// does not converge.
    fn step(&mut self, m: usize, omega: f64, opts: &IdentifyOptions) -> Result<Option<StepLog>> {
        let guess = if m >= 2 {
            let ex = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| 2.0 * x - y).collect::<Vec<f64>>();
            Iterate {
                v: ex(&self.v[m - 1], &self.v[m - 2]),
                l: 2.0 * self.l[m - 1] - self.l[m - 2],
                q: ex(&self.q[m - 1], &self.q[m - 2]),
            }
        } else {
            Iterate { v: self.v[m - 1].clone(), l: self.l[m - 1], q: self.q[m - 1].clone() }
        };
        let mut it = guess;
        self.set_level(m, it.v.clone(), it.l, it.q.clone())?;
        let na = self.ops.n_ang();
        let mut last = f64::INFINITY;
        let mut ratio = 0.0;
        for iter in 1..=opts.max_iter {
            let n1 = n1_apply(&self.k, &self.q, &self.bv, &self.cv, m, self.dt, na);
            let (l, q) = self.lq(m, &n1, &it.v)?;
            let src = self.source(m, &n1, l, &q)?;
            let cn = self.cn.as_ref().expect("time step available");
            let v = cn.step(self.ops, &self.v[m - 1], &self.src[m - 1], &src, &self.zeros, &self.zeros)?;
            let relax = |new: Vec<f64>, old: &[f64]| -> Vec<f64> {
                if omega == 1.0 {
                    new
                } else {
                    new.iter().zip(old).map(|(a, b)| b + omega * (a - b)).collect()
                }
            };
            let next = Iterate { v: relax(v, &it.v), l: it.l + omega * (l - it.l), q: relax(q, &it.q) };
            let dl = mixed_update(&[next.l], &[it.l]);
            let update = mixed_update(&next.v, &it.v).max(dl).max(mixed_update(&next.q, &it.q));
            if !update.is_finite() {
                return Ok(None);
            }
            if last.is_finite() && last > 0.0 {
                ratio = update / last;
            }
            last = update;
            it = next;
            self.set_level(m, it.v.clone(), it.l, it.q.clone())?;
            if update <= opts.tol {
                let n1 = n1_apply(&self.k, &self.q, &self.bv, &self.cv, m, self.dt, na);
                let src = self.source(m, &n1, it.l, &it.q)?;
                if self.src.len() == m {
                    self.src.push(src);
                } else {
                    self.src[m] = src;
                }
                return Ok(Some(StepLog {
                    step: m,
                    time: self.pipe.time.t(m),
                    iterations: iter,
                    update,
                    contraction: ratio,
                    relaxation: omega,
                }));
            }
        }
        Ok(None)
    }

    fn truncate(&mut self, m: usize) {
        for v in [&mut self.v, &mut self.q, &mut self.k, &mut self.bv, &mut self.cv, &mut self.src] {
            v.truncate(m);
        }
        self.l.truncate(m);
    }
}

/// Identify the kernel from measurements on the operators' grid.
pub fn identify(spec: &ProblemSpec, ops: Arc<Operators>, meas: &MeasurementSet, opts: &IdentifyOptions) -> Result<IdentificationResult> {
    let psi_boundary = (0..ops.n_ang())
        .map(|k| spec.psi.value(&ops.grid.point_at(ops.grid.radial.radius, k)).abs())
        .fold(0.0, f64::max);
    if psi_boundary > 1e-12 * max_abs(&ops.psi).max(1.0) {
        return Err(Error::Unsupported(format!(
            "identification needs psi = 0 on the boundary (found {psi_boundary:.3e})"
        )));
    }
    let cert = certificate(spec, &ops)?;
    let pipe = build_pipeline(spec, &ops, meas, &cert, opts.variant)?;
    let time = meas.time;
    let dt = time.dt();
    let cn = if time.steps > 0 { Some(CrankNicolson::new(&ops, dt, spec.boundary)?) } else { None };
    let mut march = March {
        ops: &ops,
        pipe: &pipe,
        cert: &cert,
        bc: GridBC::new(&spec.ops, &ops.grid),
        cn,
        kind: spec.boundary,
        dt,
        zeros: vec![0.0; ops.n_ang()],
        v: Vec::new(),
        l: Vec::new(),
        q: Vec::new(),
        k: Vec::new(),
        bv: Vec::new(),
        cv: Vec::new(),
        src: Vec::new(),
    };
    march.start()?;
    let round_trip = RoundTrip {
        v: rel_update(&march.v[0], &pipe.v0),
        l_vs_k0: (march.l[0] - pipe.k0_at_r).abs() / pipe.k0_at_r.abs().max(1.0),
        q_vs_k0: rel_update(&march.q[0], &pipe.k0_prime).min(max_abs(&sub(&march.q[0], &pipe.k0_prime))),
        l_vs_tilde: (march.l[0] - pipe.l0_tilde).abs() / pipe.l0_tilde.abs().max(1.0),
        q_vs_tilde: rel_update(&march.q[0], &pipe.q0_tilde).min(max_abs(&sub(&march.q[0], &pipe.q0_tilde))),
    };
    let mut log = Vec::new();
    let mut status = IdentifyStatus::Converged;
    let mut relaxed = 0;
    'steps: for m in 1..=time.steps {
        let mut omega = 1.0;
        for attempt in 0..=opts.max_halvings {
            march.truncate(m);
            if let Some(entry) = march.step(m, omega, opts)? {
                if attempt > 0 {
                    relaxed += 1;
                }
                log.push(entry);
                continue 'steps;
            }
            omega *= 0.5;
        }
        march.truncate(m);
        status = IdentifyStatus::FailedAt { step: m, time: time.t(m) };
        break;
    }
    if status == IdentifyStatus::Converged && relaxed > 0 {
        status = IdentifyStatus::Relaxed { steps: relaxed };
    }
    let reached = march.v.len() - 1;
    let rtime = time.truncated(reached);

    // u = u₁(t) − u₁(0) + u₀ + ∫₀ᵗ v (trapezoid)
    let u0 = ops.sample(|x| spec.u0.value(x));
    let u10 = ops.sample(|x| spec.u1.value(0.0, x));
    let mut integral = vec![0.0; u0.len()];
    let mut u = Vec::with_capacity(reached + 1);
    for n in 0..=reached {
        if n > 0 {
            for (s, (a, b)) in integral.iter_mut().zip(march.v[n - 1].iter().zip(&march.v[n])) {
                *s += 0.5 * dt * (a + b);
            }
        }
        let t = rtime.t(n);
        let u1 = ops.sample(|x| spec.u1.value(t, x));
        u.push((0..u0.len()).map(|j| u1[j] - u10[j] + u0[j] + integral[j]).collect());
    }

    let March { v, l, q, k, .. } = march;
    let mut result = IdentificationResult {
        time: rtime,
        radial: ops.grid.radial,
        v,
        l,
        q,
        k,
        u,
        log,
        status,
        reached_horizon: rtime.horizon,
        round_trip,
        equivalence: None,
        diagnostics: pipe.diagnostics.clone(),
        certificate: cert,
    };
    if opts.equivalence_check && reached > 0 {
        result.equivalence = Some(equivalence(spec, ops.clone(), &result, &meas.truncated(reached)?)?);
    }
    Ok(result)
}

/// Forward solve with the recovered kernel, compared with the data.
pub fn equivalence(spec: &ProblemSpec, ops: Arc<Operators>, result: &IdentificationResult, meas: &MeasurementSet) -> Result<EquivalenceReport> {
    let kernel = result.kernel_field()?;
    let sol = solve_forward(spec, ops, result.time, &kernel, ForwardOptions { keep_trajectory: false, ..Default::default() })?;
    let radial = result.radial;
    let (mut d1, mut n1, mut d2, mut n2) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for n in 0..result.time.len() {
        d1 = d1.max(weighted_lp_norm(&radial, &sub(&sol.g1[n], &meas.g1[n]), 2.0, spec.p)?);
        n1 = n1.max(weighted_lp_norm(&radial, &meas.g1[n], 2.0, spec.p)?);
        d2 = d2.max((sol.g2[n] - meas.g2[n]).abs());
        n2 = n2.max(meas.g2[n].abs());
    }
    Ok(EquivalenceReport { g1_residual: d1 / n1.max(f64::MIN_POSITIVE), g2_residual: d2 / n2.max(f64::MIN_POSITIVE) })
}

/// sup_t ‖k − k_ref‖ / sup_t ‖k_ref‖ in the r²-weighted Lᵖ norm; with a
/// vanishing reference the absolute error is returned.
pub fn kernel_error(k: &[Vec<f64>], k_ref: &[Vec<f64>], radial: &RadialGrid, p: f64) -> Result<f64> {
    if k.len() > k_ref.len() {
        return Err(Error::GridMismatch("reference kernel is shorter than the recovered one".into()));
    }
    let (mut d, mut s) = (0.0f64, 0.0f64);
    for (a, b) in k.iter().zip(k_ref) {
        d = d.max(weighted_lp_norm(radial, &sub(a, b), 2.0, p)?);
        s = s.max(weighted_lp_norm(radial, b, 2.0, p)?);
    }
    Ok(if s > 0.0 { d / s } else { d })
}
