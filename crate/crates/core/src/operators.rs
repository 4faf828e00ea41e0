//! Discrete measurement and differential operators on the polar grid:
//! Φ, Ψ, Ψ₁, Ã, Ã₁, ℬ, 𝒞, E and ℳ.
//!
//! Ghost values: across the pole the antipodal node is used, so the radial
//! stencil at r₀ reads a straight line through the origin. The outer ghost
//! at r_N = R + Δr/2 comes from a [`Closure`].

use nalgebra::DMatrix;

use crate::angular::AngularGrid;
use crate::error::{Error, Result};
use crate::functions::{Point, SpatialFn};
use crate::grid::PolarGrid;
use crate::model::{CoefficientModel, OperatorBC};

/// How the outer ghost value is produced, one entry per angular node
/// (a single entry for radial fields).
#[derive(Debug, Clone, Copy)]
pub enum Closure<'a> {
    /// Boundary values at r = R; quadratic through the last two nodes.
    Dirichlet(&'a [f64]),
    /// Radial derivative at r = R.
    Neumann(&'a [f64]),
    /// Ghost values given directly.
    Ghost(&'a [f64]),
    /// Quadratic extrapolation from the last three nodes.
    Extrapolate,
}

impl Closure<'_> {
    fn ghost(&self, k: usize, u1: f64, u2: f64, u3: f64, dr: f64) -> f64 {
        match self {
            Closure::Dirichlet(g) => (8.0 * g[k] - 6.0 * u1 + u2) / 3.0,
            Closure::Neumann(g) => u1 + dr * g[k],
            Closure::Ghost(g) => g[k],
            Closure::Extrapolate => 3.0 * u1 - 3.0 * u2 + u3,
        }
    }
}

/// Cached operator tables for one model on one grid.
#[derive(Debug, Clone)]
pub struct Operators {
    pub grid: PolarGrid,
    pub model: CoefficientModel,
    /// h at r_{i−½} = iΔr, i = 0..=N.
    pub h_half: Vec<f64>,
    /// h at the nodes.
    pub h_node: Vec<f64>,
    /// Angular blocks (a+b)Λ + div_S(c̃∇_S), one per radius.
    pub blocks: Vec<DMatrix<f64>>,
    /// r_i^{d−1} Δr.
    pub shell: Vec<f64>,
    pub psi: Vec<f64>,
    pub psi_r: Vec<f64>,
    psi_fn: SpatialFn,
}

pub fn index(n_ang: usize, i: usize, k: usize) -> usize {
    i * n_ang + k
}

impl Operators {
    pub fn new(model: &CoefficientModel, grid: &PolarGrid, psi: &SpatialFn) -> Result<Self> {
        if model.dim != grid.dim() {
            return Err(Error::GridMismatch(format!(
                "model is {}-dimensional, grid is {}-dimensional",
                model.dim,
                grid.dim()
            )));
        }
        if (model.radius - grid.radial.radius).abs() > 1e-14 * model.radius {
            return Err(Error::GridMismatch("model and grid radii differ".into()));
        }
        let n = grid.n_r();
        let dr = grid.radial.dr();
        let ang = &grid.angular;
        let na = ang.len();
        let h_half = (0..=n).map(|i| model.h(i as f64 * dr)).collect();
        let h_node = (0..n).map(|i| model.h(grid.radial.r(i))).collect();
        let lap = &ang.laplacian;
        let mut blocks = Vec::with_capacity(n);
        for i in 0..n {
            let r = grid.radial.r(i);
            let ab = model.a.value(r) + model.b.value(r);
            let mut m = lap * ab;
            let c: Vec<f64> = (0..na).map(|k| model.c.value(&grid.point(i, k))).collect();
            if c.iter().any(|&v| v != 0.0) {
                // div(c∇u) = ½(Δ(cu) + cΔu − uΔc)
                let mut lc = vec![0.0; na];
                AngularGrid::apply(lap, &c, &mut lc);
                for j in 0..na {
                    for k in 0..na {
                        m[(j, k)] += 0.5 * (lap[(j, k)] * c[k] + c[j] * lap[(j, k)]);
                    }
                    m[(j, j)] -= 0.5 * lc[j];
                }
            }
            blocks.push(m);
        }
        let sig = grid.dim() as i32 - 1;
        let shell = (0..n).map(|i| grid.radial.r(i).powi(sig) * dr).collect();
        let mut psi_v = Vec::with_capacity(n * na);
        let mut psi_r = Vec::with_capacity(n * na);
        for i in 0..n {
            for k in 0..na {
                let x = grid.point(i, k);
                let j = psi.jet(&x);
                let d = ang.dirs[k];
                psi_v.push(j.v);
                psi_r.push(j.g[0] * d[0] + j.g[1] * d[1] + j.g[2] * d[2]);
            }
        }
        Ok(Self {
            grid: grid.clone(),
            model: model.clone(),
            h_half,
            h_node,
            blocks,
            shell,
            psi: psi_v,
            psi_r,
            psi_fn: psi.clone(),
        })
    }

    pub fn n_r(&self) -> usize {
        self.grid.n_r()
    }

    pub fn n_ang(&self) -> usize {
        self.grid.n_ang()
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn dr(&self) -> f64 {
        self.grid.radial.dr()
    }

    pub fn psi_fn(&self) -> &SpatialFn {
        &self.psi_fn
    }

    fn check_full(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.grid.len() {
            return Err(Error::GridMismatch(format!(
                "field has {} values, grid has {} nodes",
                v.len(),
                self.grid.len()
            )));
        }
        Ok(())
    }

    fn check_radial(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.n_r() {
            return Err(Error::GridMismatch(format!(
                "radial field has {} values, grid has {} radii",
                v.len(),
                self.n_r()
            )));
        }
        Ok(())
    }

    /// Ghost values (inner, outer) for angular node k of a full field.
    fn ghosts(&self, u: &[f64], k: usize, closure: &Closure) -> (f64, f64) {
        let na = self.n_ang();
        let n = self.n_r();
        let inner = u[self.grid.angular.antipode[k]];
        let at = |i: usize| u[index(na, i, k)];
        let outer = closure.ghost(k, at(n - 1), at(n - 2), at(n - 3), self.dr());
        (inner, outer)
    }

    /// Φ[v](r_i) = Σ_k W_k v(r_i, k).
    pub fn phi(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check_full(v)?;
        let na = self.n_ang();
        let w = &self.grid.angular.weights;
        Ok(v.chunks(na).map(|row| row.iter().zip(w).map(|(a, b)| a * b).sum()).collect())
    }

    /// Ψ[v] = Σ r^{d−1}Δr W ψ v.
    pub fn psi(&self, v: &[f64]) -> Result<f64> {
        self.check_full(v)?;
        self.psi_weighted(v, &self.psi)
    }

    fn psi_weighted(&self, v: &[f64], psi: &[f64]) -> Result<f64> {
        let na = self.n_ang();
        let w = &self.grid.angular.weights;
        let mut s = 0.0;
        for i in 0..self.n_r() {
            let mut row = 0.0;
            for k in 0..na {
                let j = index(na, i, k);
                row += w[k] * psi[j] * v[j];
            }
            s += self.shell[i] * row;
        }
        Ok(s)
    }

    /// Σ r^{d−1}Δr W v, the plain volume integral.
    pub fn integrate(&self, v: &[f64]) -> Result<f64> {
        self.check_full(v)?;
        let phi = self.phi(v)?;
        Ok(phi.iter().zip(&self.shell).map(|(a, b)| a * b).sum())
    }

    /// Radial derivative of a full field by centred differences with ghosts.
    pub fn radial_derivative(&self, u: &[f64], closure: &Closure) -> Result<Vec<f64>> {
        self.check_full(u)?;
        let (n, na, dr) = (self.n_r(), self.n_ang(), self.dr());
        let mut out = vec![0.0; u.len()];
        for k in 0..na {
            let (gi, go) = self.ghosts(u, k, closure);
            for i in 0..n {
                let lo = if i == 0 { gi } else { u[index(na, i - 1, k)] };
                let hi = if i + 1 == n { go } else { u[index(na, i + 1, k)] };
                out[index(na, i, k)] = (hi - lo) / (2.0 * dr);
            }
        }
        Ok(out)
    }

    /// Polar form of 𝒜 on the grid.
    pub fn atilde(&self, u: &[f64], closure: &Closure) -> Result<Vec<f64>> {
        self.check_full(u)?;
        let (n, na, dr) = (self.n_r(), self.n_ang(), self.dr());
        let sig = (self.dim() - 1) as f64;
        let mut out = vec![0.0; u.len()];
        for k in 0..na {
            let (gi, go) = self.ghosts(u, k, closure);
            for i in 0..n {
                let r = self.grid.radial.r(i);
                let c = u[index(na, i, k)];
                let lo = if i == 0 { gi } else { u[index(na, i - 1, k)] };
                let hi = if i + 1 == n { go } else { u[index(na, i + 1, k)] };
                out[index(na, i, k)] = (self.h_half[i + 1] * (hi - c) - self.h_half[i] * (c - lo))
                    / (dr * dr)
                    + sig * self.h_node[i] / r * (hi - lo) / (2.0 * dr);
            }
        }
        let ang = self.angular_part(u)?;
        for (o, a) in out.iter_mut().zip(ang) {
            *o += a;
        }
        Ok(out)
    }

    /// The purely angular blocks of Ã: r⁻²[(a+b)Δ_S + div_S(c̃∇_S)]u.
    pub fn angular_part(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.check_full(u)?;
        let na = self.n_ang();
        let mut out = vec![0.0; u.len()];
        for i in 0..self.n_r() {
            let r = self.grid.radial.r(i);
            let s = &u[i * na..(i + 1) * na];
            AngularGrid::apply(&self.blocks[i], s, &mut out[i * na..(i + 1) * na]);
            for v in &mut out[i * na..(i + 1) * na] {
                *v /= r * r;
            }
        }
        Ok(out)
    }

    /// Radial reduced operator D_r(hD_r) + (d−1)(h/r)D_r on a radial field.
    pub fn atilde1(&self, w: &[f64], closure: &Closure) -> Result<Vec<f64>> {
        self.check_radial(w)?;
        let (n, dr) = (self.n_r(), self.dr());
        let sig = (self.dim() - 1) as f64;
        let go = closure.ghost(0, w[n - 1], w[n - 2], w[n - 3], dr);
        Ok((0..n)
            .map(|i| {
                let r = self.grid.radial.r(i);
                let lo = if i == 0 { w[0] } else { w[i - 1] };
                let hi = if i + 1 == n { go } else { w[i + 1] };
                (self.h_half[i + 1] * (hi - w[i]) - self.h_half[i] * (w[i] - lo)) / (dr * dr)
                    + sig * self.h_node[i] / r * (hi - lo) / (2.0 * dr)
            })
            .collect())
    }

    /// Weak pairing Ψ₁[w] = −∫ h ψ_r w_r + ∫ ψ r⁻²[(a+b)Δ_S + div_S(c̃∇_S)]w.
    pub fn psi1(&self, w: &[f64], closure: &Closure) -> Result<f64> {
        let wr = self.radial_derivative(w, closure)?;
        let ang = self.angular_part(w)?;
        let na = self.n_ang();
        let wts = &self.grid.angular.weights;
        let mut s = 0.0;
        for i in 0..self.n_r() {
            let mut row = 0.0;
            for k in 0..na {
                let j = index(na, i, k);
                row += wts[k] * (-self.h_node[i] * wr[j] * self.psi_r[j] + self.psi[j] * ang[j]);
            }
            s += self.shell[i] * row;
        }
        Ok(s)
    }

    /// Cartesian gradient components of a full field.
    pub fn gradient(&self, u: &[f64], closure: &Closure) -> Result<Vec<Vec<f64>>> {
        let ur = self.radial_derivative(u, closure)?;
        let (n, na, dim) = (self.n_r(), self.n_ang(), self.dim());
        let ang = &self.grid.angular;
        let mut out = vec![vec![0.0; u.len()]; dim];
        let mut tmp = vec![0.0; na];
        for (ax, g) in out.iter_mut().enumerate() {
            for i in 0..n {
                let r = self.grid.radial.r(i);
                AngularGrid::apply(&ang.grad[ax], &u[i * na..(i + 1) * na], &mut tmp);
                for k in 0..na {
                    let j = index(na, i, k);
                    g[j] = ang.dirs[k][ax] * ur[j] + tmp[k] / r;
                }
            }
        }
        Ok(out)
    }

    /// ℬu = Σ_j ∂_j(Σ_k b_jk ∂_k u), as the divergence of the discrete flux.
    pub fn b_apply(&self, ops: &GridBC, u: &[f64], closure: &Closure) -> Result<Vec<f64>> {
        let g = self.gradient(u, closure)?;
        let dim = self.dim();
        let mut total = vec![0.0; u.len()];
        for j in 0..dim {
            let mut flux = vec![0.0; u.len()];
            for (k, gk) in g.iter().enumerate() {
                let b = &ops.b[j][k];
                for (f, (bv, gv)) in flux.iter_mut().zip(b.iter().zip(gk)) {
                    *f += bv * gv;
                }
            }
            let d = self.gradient(&flux, &Closure::Extrapolate)?;
            for (t, v) in total.iter_mut().zip(&d[j]) {
                *t += v;
            }
        }
        Ok(total)
    }

    /// 𝒞u = Σ c_j ∂_j u.
    pub fn c_apply(&self, ops: &GridBC, u: &[f64], closure: &Closure) -> Result<Vec<f64>> {
        let g = self.gradient(u, closure)?;
        let mut out = vec![0.0; u.len()];
        for (j, gj) in g.iter().enumerate() {
            for (o, (c, v)) in out.iter_mut().zip(ops.c[j].iter().zip(gj)) {
                *o += c * v;
            }
        }
        Ok(out)
    }

    /// Nodal samples of a position function on this grid.
    pub fn sample(&self, f: impl Fn(&Point) -> f64) -> Vec<f64> {
        self.grid.sample(f)
    }
}

/// Nodal coefficient tables of ℬ and 𝒞.
#[derive(Debug, Clone)]
pub struct GridBC {
    pub b: Vec<Vec<Vec<f64>>>,
    pub c: Vec<Vec<f64>>,
}

impl GridBC {
    pub fn new(ops: &OperatorBC, grid: &PolarGrid) -> Self {
        let b = ops
            .b
            .iter()
            .map(|row| row.iter().map(|f| grid.sample(|x| f.value(x))).collect())
            .collect();
        let c = ops.c.iter().map(|f| grid.sample(|x| f.value(x))).collect();
        Self { b, c }
    }
}

/// Tail integral Eq(r_i) = ∫_{r_i}^R q by reverse trapezoid; the last half
/// cell uses linear extrapolation (exact for linear q).
pub fn e_apply(q: &[f64], dr: f64) -> Vec<f64> {
    let n = q.len();
    let mut out = vec![0.0; n];
    if n == 0 {
        return out;
    }
    out[n - 1] = if n >= 2 { dr * (5.0 * q[n - 1] - q[n - 2]) / 8.0 } else { 0.5 * dr * q[0] };
    for i in (0..n - 1).rev() {
        out[i] = out[i + 1] + 0.5 * dr * (q[i] + q[i + 1]);
    }
    out
}

/// ℳ(q,w)(x) = q(|x|) w(x).
pub fn m_apply(q: &[f64], w: &[f64]) -> Result<Vec<f64>> {
    if q.is_empty() || !w.len().is_multiple_of(q.len()) {
        return Err(Error::GridMismatch(format!(
            "radial factor of length {} does not divide field of length {}",
            q.len(),
            w.len()
        )));
    }
    let na = w.len() / q.len();
    Ok(w.iter().enumerate().map(|(j, v)| q[j / na] * v).collect())
}

/// Largest defect of the product rule Φ[ρu] = ρΦ[u] for a radial ρ.
pub fn phi_multiplier_identity_check(ops: &Operators, rho: &[f64], u: &[f64]) -> Result<f64> {
    let lhs = ops.phi(&m_apply(rho, u)?)?;
    let rhs = ops.phi(u)?;
    Ok(lhs
        .iter()
        .zip(rhs.iter().zip(rho))
        .map(|(a, (b, r))| (a - r * b).abs())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::{Jet, RadialFn};
    use crate::model::default_psi;

    fn ops(dim: usize, n: usize, preset: &str) -> Operators {
        let grid = if dim == 3 {
            PolarGrid::build(3, 1.0, n, 6, 12).unwrap()
        } else {
            PolarGrid::build(2, 1.0, n, 0, 16).unwrap()
        };
        let model = CoefficientModel::preset(preset, dim, 1.0).unwrap();
        Operators::new(&model, &grid, &default_psi(1.0)).unwrap()
    }

    #[test]
    fn phi_of_constants_and_harmonics() {
        for dim in [2, 3] {
            let o = ops(dim, 8, "isotropic");
            let one = vec![1.0; o.grid.len()];
            let s = o.grid.angular.total_measure();
            assert!(o.phi(&one).unwrap().iter().all(|v| (v - s).abs() < 1e-12));
            let x1 = o.sample(|x| x[0]);
            assert!(o.phi(&x1).unwrap().iter().all(|v| v.abs() < 1e-12));
            let rad = o.sample(|x| (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt().sin());
            let phi = o.phi(&rad).unwrap();
            for (i, v) in phi.iter().enumerate() {
                assert!((v - s * o.grid.radial.r(i).sin()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn atilde_of_r_squared_is_six() {
        let o = ops(3, 8, "isotropic");
        let u = o.sample(|x| x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
        let g = vec![1.0; o.n_ang()];
        let a = o.atilde(&u, &Closure::Dirichlet(&g)).unwrap();
        assert!(a.iter().all(|v| (v - 6.0).abs() < 1e-9), "{:?}", &a[..4]);
        let one = vec![1.0; u.len()];
        let z = o.atilde(&one, &Closure::Dirichlet(&g)).unwrap();
        assert!(z.iter().all(|v| v.abs() < 1e-9));
        let w: Vec<f64> = o.grid.radial.nodes().iter().map(|r| r * r).collect();
        let a1 = o.atilde1(&w, &Closure::Dirichlet(&[1.0])).unwrap();
        assert!(a1.iter().all(|v| (v - 6.0).abs() < 1e-9));
    }

    #[test]
    fn angular_blocks_are_annihilated_by_phi() {
        for dim in [2, 3] {
            let o = ops(dim, 6, "structured");
            let u = o.sample(|x| (x[0] + 2.0 * x[1]).exp() * (1.0 + x[2]));
            let a = o.angular_part(&u).unwrap();
            assert!(o.phi(&a).unwrap().iter().all(|v| v.abs() < 1e-10));
        }
    }

    #[test]
    fn discrete_operator_matches_cartesian_form() {
        // second order in the r^{d-1}-weighted L² norm; pointwise the pole
        // node carries an O(Δr) truncation for odd-in-r components
        let u = SpatialFn::poly(&[(1.0, [1, 1, 0]), (0.5, [2, 0, 1]), (-0.3, [0, 0, 2]), (1.0, [1, 0, 0])]);
        let mut errs = Vec::new();
        for n in [16, 32] {
            let o = ops(3, n, "structured");
            let uv = o.sample(|x| u.value(x));
            let ghost: Vec<f64> = (0..o.n_ang())
                .map(|k| u.value(&o.grid.point_at(1.0 + 0.5 * o.dr(), k)))
                .collect();
            let a = o.atilde(&uv, &Closure::Ghost(&ghost)).unwrap();
            let exact = o.sample(|x| o.model.apply_cartesian(x, &u.jet(x)));
            let e2: Vec<f64> = a.iter().zip(&exact).map(|(a, b)| (a - b).powi(2)).collect();
            errs.push(o.integrate(&e2).unwrap().sqrt());
        }
        assert!(errs[1] < 1e-3 && errs[0] / errs[1] > 3.5, "{errs:?}");
    }

    #[test]
    fn b_and_c_match_analytic() {
        let o = ops(3, 32, "isotropic");
        let bc = OperatorBC::scalar(
            3,
            SpatialFn::poly(&[(1.0, [0, 0, 0]), (0.5, [0, 2, 0])]),
            &[1.0, 0.0, 0.5],
        )
        .unwrap();
        let gbc = GridBC::new(&bc, &o.grid);
        let u = SpatialFn::poly(&[(1.0, [1, 0, 0]), (0.5, [2, 0, 0]), (0.5, [0, 2, 0]), (0.5, [0, 0, 2])]);
        let uv = o.sample(|x| u.value(x));
        let g: Vec<f64> = (0..o.n_ang()).map(|k| u.value(&o.grid.point_at(1.0, k))).collect();
        let b = o.b_apply(&gbc, &uv, &Closure::Dirichlet(&g)).unwrap();
        let c = o.c_apply(&gbc, &uv, &Closure::Dirichlet(&g)).unwrap();
        let bx = o.sample(|x| bc.apply_b(x, &u.jet(x)));
        let cx = o.sample(|x| bc.apply_c(x, &u.jet(x)));
        let eb = b.iter().zip(&bx).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let ec = c.iter().zip(&cx).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(eb < 5e-3 && ec < 1e-10, "{eb} {ec}");
    }

    #[test]
    fn e_operator_examples() {
        let n = 50;
        let dr = 1.0 / n as f64;
        let r: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) * dr).collect();
        let e1 = e_apply(&vec![1.0; n], dr);
        let e2 = e_apply(&r.iter().map(|r| 2.0 * r).collect::<Vec<_>>(), dr);
        for i in 0..n {
            assert!((e1[i] - (1.0 - r[i])).abs() < 1e-14);
            assert!((e2[i] - (1.0 - r[i] * r[i])).abs() < 1e-3 * dr);
        }
    }

    #[test]
    fn psi1_vanishes_on_constants() {
        let o = ops(3, 8, "structured");
        let c = vec![2.5; o.grid.len()];
        let g = vec![2.5; o.n_ang()];
        assert!(o.psi1(&c, &Closure::Dirichlet(&g)).unwrap().abs() < 1e-12);
    }

    #[test]
    fn multiplier_identity() {
        let o = ops(3, 8, "isotropic");
        let rho: Vec<f64> = o.grid.radial.nodes().iter().map(|r| r.sin()).collect();
        let u = o.sample(|x| x[1].exp());
        assert!(phi_multiplier_identity_check(&o, &rho, &u).unwrap() < 1e-12);
        let _ = (Jet::default(), RadialFn::zero());
    }
}
