//! Angular quadrature on the circle / sphere with a spectral basis.
//!
//! d=2: N_φ equispaced nodes, real Fourier basis (Nyquist cosine included).
//! d=3: Gauss–Legendre in cosθ times 2N_θ equispaced φ nodes, real spherical
//! harmonics up to degree N_θ−1. Node index is `it * n_phi + ip`.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::functions::Point;

#[derive(Debug, Clone)]
pub struct AngularGrid {
    pub dim: usize,
    pub n_theta: usize,
    pub n_phi: usize,
    pub dirs: Vec<Point>,
    pub weights: Vec<f64>,
    pub e_theta: Vec<Point>,
    pub e_phi: Vec<Point>,
    pub sin_theta: Vec<f64>,
    pub antipode: Vec<usize>,
    /// Basis values, nodes × modes, orthonormal in the quadrature inner product.
    pub basis: DMatrix<f64>,
    /// Surface-Laplacian eigenvalue of each mode.
    pub eigen: Vec<f64>,
    /// Quadrature projection onto the basis, modes × nodes.
    pub proj: DMatrix<f64>,
    /// Spectral Laplace–Beltrami matrix.
    pub laplacian: DMatrix<f64>,
    /// Cartesian components of the surface gradient, one matrix per axis.
    pub grad: Vec<DMatrix<f64>>,
    /// Polynomial degree integrated exactly.
    pub exact_degree: usize,
}

/// Gauss–Legendre nodes (ascending) and weights on (−1,1).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d != 0.0 {
            dp = d;
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        // z is descending from +1; mirror to keep exact symmetry
        x[n - 1 - i] = z;
        x[i] = -z;
        w[n - 1 - i] = wi;
        w[i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Unnormalised associated Legendre values P_l^m(μ) for l ≤ lmax, m ≤ l,
/// stored as `p[m][l]`.
fn assoc_legendre(lmax: usize, mu: f64) -> Vec<Vec<f64>> {
    let s = (1.0 - mu * mu).max(0.0).sqrt();
    let mut p = vec![vec![0.0; lmax + 1]; lmax + 1];
    let mut pmm = 1.0;
    for m in 0..=lmax {
        if m > 0 {
            pmm *= -((2 * m - 1) as f64) * s;
        }
        p[m][m] = pmm;
        if m < lmax {
            p[m][m + 1] = mu * (2 * m + 1) as f64 * pmm;
        }
        for l in m + 2..=lmax {
            p[m][l] = ((2 * l - 1) as f64 * mu * p[m][l - 1] - (l + m - 1) as f64 * p[m][l - 2])
                / (l - m) as f64;
        }
    }
    p
}

impl AngularGrid {
    /// Circle with `n_phi` nodes (even, ≥ 4).
    pub fn circle(n_phi: usize) -> Result<Self> {
        if n_phi < 4 || !n_phi.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "angular node count must be even and at least 4, got {n_phi}"
            )));
        }
        let n = n_phi;
        let w0 = 2.0 * PI / n as f64;
        let phis: Vec<f64> = (0..n).map(|j| 2.0 * PI * j as f64 / n as f64).collect();
        let dirs = phis.iter().map(|p| [p.cos(), p.sin(), 0.0]).collect();
        let e_phi: Vec<Point> = phis.iter().map(|p| [-p.sin(), p.cos(), 0.0]).collect();
        let antipode = (0..n).map(|j| (j + n / 2) % n).collect();

        let mut basis = DMatrix::zeros(n, n);
        let mut dbasis = DMatrix::zeros(n, n);
        let mut eigen = Vec::with_capacity(n);
        let mut col = 0;
        let c0 = 1.0 / (2.0 * PI).sqrt();
        let c1 = 1.0 / PI.sqrt();
        for j in 0..n {
            basis[(j, 0)] = c0;
        }
        eigen.push(0.0);
        col += 1;
        for m in 1..n / 2 {
            let mf = m as f64;
            for (j, &p) in phis.iter().enumerate() {
                basis[(j, col)] = c1 * (mf * p).cos();
                dbasis[(j, col)] = -c1 * mf * (mf * p).sin();
                basis[(j, col + 1)] = c1 * (mf * p).sin();
                dbasis[(j, col + 1)] = c1 * mf * (mf * p).cos();
            }
            eigen.push(-mf * mf);
            eigen.push(-mf * mf);
            col += 2;
        }
        let mn = (n / 2) as f64;
        for (j, &p) in phis.iter().enumerate() {
            basis[(j, col)] = c0 * (mn * p).cos();
        }
        eigen.push(-mn * mn);

        let weights = vec![w0; n];
        let proj = Self::projection(&basis, &weights);
        let laplacian = &basis * DMatrix::from_diagonal(&eigen.clone().into()) * &proj;
        let dphi = &dbasis * &proj;
        let grad = (0..2)
            .map(|ax| {
                let mut g = dphi.clone();
                for j in 0..n {
                    let s = e_phi[j][ax];
                    for k in 0..n {
                        g[(j, k)] *= s;
                    }
                }
                g
            })
            .collect();
        Ok(Self {
            dim: 2,
            n_theta: 0,
            n_phi: n,
            dirs,
            weights,
            e_theta: vec![[0.0; 3]; n],
            e_phi,
            sin_theta: vec![1.0; n],
            antipode,
            basis,
            eigen,
            proj,
            laplacian,
            grad,
            exact_degree: n - 1,
        })
    }

    /// Sphere with `n_theta` Gauss–Legendre rings and `2 n_theta` meridians.
    pub fn sphere(n_theta: usize) -> Result<Self> {
        if n_theta < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 polar rings, got {n_theta}"
            )));
        }
        let n_phi = 2 * n_theta;
        let (mu, wmu) = gauss_legendre(n_theta);
        let lmax = n_theta - 1;
        let n = n_theta * n_phi;
        let nb = (lmax + 1) * (lmax + 1);
        let phis: Vec<f64> = (0..n_phi).map(|j| 2.0 * PI * j as f64 / n_phi as f64).collect();

        let mut dirs = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        let mut e_theta = Vec::with_capacity(n);
        let mut e_phi = Vec::with_capacity(n);
        let mut sin_theta = Vec::with_capacity(n);
        let mut antipode = Vec::with_capacity(n);
        for it in 0..n_theta {
            let ct = mu[it];
            let st = (1.0 - ct * ct).sqrt();
            for (ip, &p) in phis.iter().enumerate() {
                let (sp, cp) = p.sin_cos();
                dirs.push([st * cp, st * sp, ct]);
                weights.push(wmu[it] * 2.0 * PI / n_phi as f64);
                e_theta.push([ct * cp, ct * sp, -st]);
                e_phi.push([-sp, cp, 0.0]);
                sin_theta.push(st);
                antipode.push((n_theta - 1 - it) * n_phi + (ip + n_phi / 2) % n_phi);
            }
        }

        let mut basis = DMatrix::zeros(n, nb);
        let mut dtheta = DMatrix::zeros(n, nb);
        let mut dphi = DMatrix::zeros(n, nb);
        let mut eigen = vec![0.0; nb];
        let col_of = |l: usize, m: i64| l * l + (m + l as i64) as usize;
        for it in 0..n_theta {
            let ct = mu[it];
            let st = (1.0 - ct * ct).sqrt();
            let p = assoc_legendre(lmax, ct);
            for l in 0..=lmax {
                for m in 0..=l {
                    let plm = p[m][l];
                    let plm1 = if l >= 1 && l > m { p[m][l - 1] } else { 0.0 };
                    let dpl = (l as f64 * ct * plm - (l + m) as f64 * plm1) / st;
                    for (ip, &ph) in phis.iter().enumerate() {
                        let row = it * n_phi + ip;
                        let mf = m as f64;
                        let (s, c) = (mf * ph).sin_cos();
                        let cc = col_of(l, m as i64);
                        basis[(row, cc)] = plm * c;
                        dtheta[(row, cc)] = dpl * c;
                        dphi[(row, cc)] = -plm * mf * s;
                        if m > 0 {
                            let cs = col_of(l, -(m as i64));
                            basis[(row, cs)] = plm * s;
                            dtheta[(row, cs)] = dpl * s;
                            dphi[(row, cs)] = plm * mf * c;
                        }
                    }
                }
                for m in -(l as i64)..=(l as i64) {
                    eigen[col_of(l, m)] = -((l * (l + 1)) as f64);
                }
            }
        }
        // normalise each mode numerically
        for c in 0..nb {
            let norm2: f64 = (0..n).map(|k| weights[k] * basis[(k, c)].powi(2)).sum();
            let s = 1.0 / norm2.sqrt();
            for k in 0..n {
                basis[(k, c)] *= s;
                dtheta[(k, c)] *= s;
                dphi[(k, c)] *= s;
            }
        }
        let proj = Self::projection(&basis, &weights);
        let laplacian = &basis * DMatrix::from_diagonal(&eigen.clone().into()) * &proj;
        let d_theta = &dtheta * &proj;
        let d_phi = &dphi * &proj;
        let grad = (0..3)
            .map(|ax| {
                let mut g = DMatrix::zeros(n, n);
                for j in 0..n {
                    let a = e_theta[j][ax];
                    let b = e_phi[j][ax] / sin_theta[j];
                    for k in 0..n {
                        g[(j, k)] = a * d_theta[(j, k)] + b * d_phi[(j, k)];
                    }
                }
                g
            })
            .collect();
        Ok(Self {
            dim: 3,
            n_theta,
            n_phi,
            dirs,
            weights,
            e_theta,
            e_phi,
            sin_theta,
            antipode,
            basis,
            eigen,
            proj,
            laplacian,
            grad,
            exact_degree: 2 * n_theta - 1,
        })
    }

    pub fn new(dim: usize, n_theta: usize, n_phi: usize) -> Result<Self> {
        match dim {
            2 => Self::circle(n_phi),
            3 => {
                if n_phi != 0 && n_phi != 2 * n_theta {
                    return Err(Error::InvalidParameter(format!(
                        "sphere grid uses n_phi = 2 n_theta ({}), got {n_phi}",
                        2 * n_theta
                    )));
                }
                Self::sphere(n_theta)
            }
            _ => Err(Error::InvalidParameter(format!("dimension must be 2 or 3, got {dim}"))),
        }
    }

    fn projection(basis: &DMatrix<f64>, weights: &[f64]) -> DMatrix<f64> {
        let mut p = basis.transpose();
        for k in 0..weights.len() {
            for c in 0..p.nrows() {
                p[(c, k)] *= weights[k];
            }
        }
        p
    }

    pub fn len(&self) -> usize {
        self.dirs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dirs.is_empty()
    }

    /// Measure of the unit circle / sphere.
    pub fn total_measure(&self) -> f64 {
        if self.dim == 2 {
            2.0 * PI
        } else {
            4.0 * PI
        }
    }

    /// Quadrature of nodal values over the unit circle / sphere.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    /// Apply a dense node-space matrix to a nodal vector.
    pub fn apply(m: &DMatrix<f64>, values: &[f64], out: &mut [f64]) {
        let n = values.len();
        for (j, o) in out.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in 0..n {
                s += m[(j, k)] * values[k];
            }
            *o = s;
        }
    }
}
