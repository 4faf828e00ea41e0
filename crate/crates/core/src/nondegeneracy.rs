//! Nondegeneracy certificate for u₀ and the radial operators built from it:
//! J₀ (min |Φ[𝒞u₀]|), J(u₀), J₁ = Ψ[J(u₀)], J₂, J₃ and L.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::operators::{m_apply, Operators};

/// Radial ODE data: with a = Φ[ℬu₀]/Φ[𝒞u₀], `Lg` solves
/// y' = −(g + Φ[ℬu₀] y)/Φ[𝒞u₀], y(R) = 0, and J₃g = −y'.
#[derive(Debug, Clone, Serialize)]
pub struct Certificate {
    /// Φ[ℬu₀] at the radial nodes.
    pub b_phi: Vec<f64>,
    /// Φ[𝒞u₀] at the radial nodes.
    pub c_phi: Vec<f64>,
    /// J₀ lower bound m = min |Φ[𝒞u₀]|.
    pub m: f64,
    pub j1: f64,
    /// exp ∫_r^R Φ[ℬu₀]/Φ[𝒞u₀].
    pub exp_q: Vec<f64>,
    pub j2: Vec<f64>,
    /// J(u₀) on the full grid.
    pub j_field: Vec<f64>,
    #[serde(skip)]
    pub bu0: Vec<f64>,
    #[serde(skip)]
    pub cu0: Vec<f64>,
    pub dr: f64,
}

/// Thresholds relative to the natural scale of each quantity.
pub const M_REL: f64 = 1e-6;
pub const J1_REL: f64 = 1e-8;
pub const J_FIELD_REL: f64 = 1e-10;

impl Certificate {
    /// Build and check the certificate from nodal ℬu₀ and 𝒞u₀.
    pub fn new(ops: &Operators, bu0: Vec<f64>, cu0: Vec<f64>) -> Result<Self> {
        let b_phi = ops.phi(&bu0)?;
        let c_phi = ops.phi(&cu0)?;
        let c_max = c_phi.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let m = c_phi.iter().fold(f64::INFINITY, |a, v| a.min(v.abs()));
        let sign_change = c_phi.windows(2).any(|w| w[0] * w[1] <= 0.0);
        if !(m > 0.0) || m < M_REL * c_max || sign_change || !m.is_finite() {
            return Err(Error::Nondegeneracy {
                reason: format!(
                    "J0: min |Phi[C u0]| = {m:.3e} is below {M_REL:e} x max {c_max:.3e} (or changes sign)"
                ),
                min_phi_c: m,
                j1: f64::NAN,
            });
        }
        let mut cert = Self {
            b_phi,
            c_phi,
            m,
            j1: 0.0,
            exp_q: Vec::new(),
            j2: Vec::new(),
            j_field: Vec::new(),
            bu0,
            cu0,
            dr: ops.dr(),
        };
        let (lb, _) = cert.l_and_j3(&cert.b_phi.clone());
        cert.exp_q = lb.iter().map(|v| 1.0 + v).collect();
        cert.j2 = (0..cert.c_phi.len())
            .map(|i| -cert.b_phi[i] / cert.c_phi[i] * cert.exp_q[i])
            .collect();
        let ratio: Vec<f64> = cert.b_phi.iter().zip(&cert.c_phi).map(|(b, c)| b / c).collect();
        let drift = m_apply(&ratio, &cert.cu0)?;
        let diff: Vec<f64> = cert.bu0.iter().zip(&drift).map(|(b, d)| b - d).collect();
        cert.j_field = m_apply(&cert.exp_q, &diff)?;
        cert.j1 = ops.psi(&cert.j_field)?;

        let abs = |v: &[f64]| -> Result<f64> { ops.integrate(&v.iter().map(|x| x.abs()).collect::<Vec<_>>()) };
        let j_l1 = abs(&cert.j_field)?;
        let scale = abs(&cert.bu0)? + abs(&drift)?;
        let psi_max = ops.psi.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if !(j_l1 > J_FIELD_REL * scale) {
            return Err(Error::Nondegeneracy {
                reason: format!(
                    "J(u0) vanishes identically (L1 norm {j_l1:.3e} against scale {scale:.3e}); \
                     radial data cannot determine the kernel"
                ),
                min_phi_c: m,
                j1: cert.j1,
            });
        }
        if !(cert.j1.abs() >= J1_REL * psi_max * j_l1) {
            return Err(Error::Nondegeneracy {
                reason: format!(
                    "J1 = Psi[J(u0)] = {:.3e} is below {J1_REL:e} x |psi| x |J(u0)|_1 = {:.3e}",
                    cert.j1,
                    J1_REL * psi_max * j_l1
                ),
                min_phi_c: m,
                j1: cert.j1,
            });
        }
        Ok(cert)
    }

    pub fn n_r(&self) -> usize {
        self.c_phi.len()
    }

    /// (Lg, J₃g) by marching the ODE inward with the same trapezoid rule
    /// as [`crate::operators::e_apply`], so that L = E∘J₃ holds exactly.
    pub fn l_and_j3(&self, g: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.n_r();
        let dr = self.dr;
        let a: Vec<f64> = (0..n).map(|i| self.b_phi[i] / self.c_phi[i]).collect();
        let s: Vec<f64> = (0..n).map(|i| g[i] / self.c_phi[i]).collect();
        let mut y = vec![0.0; n];
        let mut z = vec![0.0; n];
        // last half cell and first trapezoid coupled: 2×2 solve
        let (a1, a2, s1, s2) = (a[n - 1], a[n - 2], s[n - 1], s[n - 2]);
        let m11 = 1.0 - 5.0 * dr * a1 / 8.0;
        let m12 = dr * a2 / 8.0;
        let m21 = -(1.0 + dr * a1 / 2.0);
        let m22 = 1.0 - dr * a2 / 2.0;
        let r1 = dr * (5.0 * s1 - s2) / 8.0;
        let r2 = dr * (s1 + s2) / 2.0;
        let det = m11 * m22 - m12 * m21;
        y[n - 1] = (r1 * m22 - m12 * r2) / det;
        y[n - 2] = (m11 * r2 - m21 * r1) / det;
        z[n - 1] = s1 + a1 * y[n - 1];
        z[n - 2] = s2 + a2 * y[n - 2];
        for i in (0..n - 2).rev() {
            y[i] = (y[i + 1] + 0.5 * dr * (s[i] + z[i + 1])) / (1.0 - 0.5 * dr * a[i]);
            z[i] = s[i] + a[i] * y[i];
        }
        (y, z)
    }

    pub fn l_apply(&self, g: &[f64]) -> Vec<f64> {
        self.l_and_j3(g).0
    }

    /// J₃g = (g + Φ[ℬu₀]·Lg)/Φ[𝒞u₀].
    pub fn j3_apply(&self, g: &[f64]) -> Vec<f64> {
        self.l_and_j3(g).1
    }

    /// max_r |Φ[J(u₀)](r)|, zero in exact arithmetic.
    pub fn identity_defect(&self, ops: &Operators) -> Result<f64> {
        Ok(ops.phi(&self.j_field)?.iter().fold(0.0, |a, v| a.max(v.abs())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::SpatialFn;
    use crate::grid::PolarGrid;
    use crate::model::{default_psi, CoefficientModel, OperatorBC};
    use crate::operators::{e_apply, GridBC};

    fn setup(dim: usize, n: usize) -> (Operators, OperatorBC) {
        let grid = if dim == 3 {
            PolarGrid::build(3, 1.0, n, 4, 8).unwrap()
        } else {
            PolarGrid::build(2, 1.0, n, 0, 12).unwrap()
        };
        let model = CoefficientModel::isotropic(dim, 1.0).unwrap();
        let bc = OperatorBC::scalar(dim, SpatialFn::poly(&[(1.0, [0, 0, 0]), (0.5, [0, 2, 0])]), &[1.0])
            .unwrap();
        (Operators::new(&model, &grid, &default_psi(1.0)).unwrap(), bc)
    }

    fn analytic(ops: &Operators, bc: &OperatorBC, u: &SpatialFn) -> (Vec<f64>, Vec<f64>) {
        (
            ops.sample(|x| bc.apply_b(x, &u.jet(x))),
            ops.sample(|x| bc.apply_c(x, &u.jet(x))),
        )
    }

    fn u0() -> SpatialFn {
        SpatialFn::poly(&[(1.0, [1, 0, 0]), (0.5, [2, 0, 0]), (0.5, [0, 2, 0]), (0.5, [0, 0, 2]), (0.3, [1, 1, 0])])
    }

    #[test]
    fn certificate_passes_and_identity_holds() {
        for dim in [2, 3] {
            let (ops, bc) = setup(dim, 16);
            let (b, c) = analytic(&ops, &bc, &u0());
            let cert = Certificate::new(&ops, b, c).unwrap();
            assert!(cert.m > 0.1);
            assert!(cert.identity_defect(&ops).unwrap() < 1e-10);
            // grid-based ℬ, 𝒞 give a nearby certificate
            let gbc = GridBC::new(&bc, &ops.grid);
            let u = ops.sample(|x| u0().value(x));
            let g: Vec<f64> = (0..ops.n_ang()).map(|k| u0().value(&ops.grid.point_at(1.0, k))).collect();
            let cl = crate::operators::Closure::Dirichlet(&g);
            let cert2 =
                Certificate::new(&ops, ops.b_apply(&gbc, &u, &cl).unwrap(), ops.c_apply(&gbc, &u, &cl).unwrap())
                    .unwrap();
            assert!((cert.j1 - cert2.j1).abs() < 0.05 * cert.j1.abs());
        }
    }

    #[test]
    fn l_equals_e_of_j3_and_exp_identity() {
        let (ops, bc) = setup(3, 24);
        let (b, c) = analytic(&ops, &bc, &u0());
        let cert = Certificate::new(&ops, b, c).unwrap();
        let g: Vec<f64> = ops.grid.radial.nodes().iter().map(|r| (3.0 * r).cos() + r).collect();
        let (l, j3) = cert.l_and_j3(&g);
        let e = e_apply(&j3, ops.dr());
        for i in 0..l.len() {
            assert!((l[i] - e[i]).abs() < 1e-13);
        }
        let ej2 = e_apply(&cert.j2, ops.dr());
        for i in 0..l.len() {
            assert!((ej2[i] - (1.0 - cert.exp_q[i])).abs() < 1e-13);
        }
    }

    #[test]
    fn l_with_zero_b_is_scaled_tail_integral() {
        let (ops, _) = setup(3, 20);
        let n = ops.n_r();
        let cert = Certificate {
            b_phi: vec![0.0; n],
            c_phi: vec![2.0; n],
            m: 2.0,
            j1: 1.0,
            exp_q: vec![1.0; n],
            j2: vec![0.0; n],
            j_field: vec![],
            bu0: vec![],
            cu0: vec![],
            dr: ops.dr(),
        };
        let g: Vec<f64> = ops.grid.radial.nodes().iter().map(|r| 2.0 * r).collect();
        let l = cert.l_apply(&g);
        for (i, r) in ops.grid.radial.nodes().iter().enumerate() {
            assert!((l[i] - 0.5 * (1.0 - r * r)).abs() < 1e-3 / n as f64);
        }
        assert!(cert.l_apply(&vec![0.0; n]).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn radial_data_is_rejected() {
        // ℬ = Δ and 𝒞 = x·∇ keep radial data radial, so J(u₀) ≡ 0
        let (ops, _) = setup(3, 12);
        let bc = OperatorBC::new(
            (0..3).map(|j| (0..3).map(|k| SpatialFn::Constant(if j == k { 1.0 } else { 0.0 })).collect()).collect(),
            (0..3).map(|j| SpatialFn::coordinate(j, 1.0)).collect(),
        )
        .unwrap();
        let u = SpatialFn::poly(&[(1.0, [2, 0, 0]), (1.0, [0, 2, 0]), (1.0, [0, 0, 2]), (1.0, [0, 0, 0])]);
        let (b, c) = analytic(&ops, &bc, &u);
        match Certificate::new(&ops, b, c) {
            Err(Error::Nondegeneracy { reason, .. }) => assert!(reason.contains("vanishes identically"), "{reason}"),
            other => panic!("expected nondegeneracy failure, got {other:?}"),
        }
        // with a Cartesian drift the same data fails the J0 bound
        let (ops, bc) = setup(3, 12);
        let (b, c) = analytic(&ops, &bc, &u);
        assert!(matches!(Certificate::new(&ops, b, c), Err(Error::Nondegeneracy { .. })));
    }
}
