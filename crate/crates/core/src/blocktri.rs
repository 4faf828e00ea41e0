//! Block-tridiagonal solver with dense diagonal blocks and scalar
//! off-diagonal blocks (multiples of the identity).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct BlockTridiag {
    block: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    /// Inverses of the eliminated diagonal blocks.
    inv: Vec<DMatrix<f64>>,
    /// Largest 1-norm condition number among eliminated blocks.
    pub condition_estimate: f64,
}

fn norm1(m: &DMatrix<f64>) -> f64 {
    m.column_iter().map(|c| c.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

impl BlockTridiag {
    /// Row i reads `lower[i] x_{i−1} + diag[i] x_i + upper[i] x_{i+1}`;
    /// `lower[0]` and `upper[n−1]` are ignored.
    pub fn factor(diag: Vec<DMatrix<f64>>, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let n = diag.len();
        if n == 0 || lower.len() != n || upper.len() != n {
            return Err(Error::LinearSolve("inconsistent block-tridiagonal shape".into()));
        }
        let block = diag[0].nrows();
        let mut inv: Vec<DMatrix<f64>> = Vec::with_capacity(n);
        let mut cond: f64 = 0.0;
        for (i, mut d) in diag.into_iter().enumerate() {
            if i > 0 {
                let s = lower[i] * upper[i - 1];
                if s != 0.0 {
                    d -= &inv[i - 1] * s;
                }
            }
            let dn = norm1(&d);
            let di = d
                .try_inverse()
                .ok_or_else(|| Error::LinearSolve(format!("singular diagonal block {i}")))?;
            cond = cond.max(dn * norm1(&di));
            if !cond.is_finite() {
                return Err(Error::LinearSolve(format!("non-finite inverse at block {i}")));
            }
            inv.push(di);
        }
        Ok(Self { block, lower, upper, inv, condition_estimate: cond })
    }

    /// Solve in place.
    pub fn solve(&self, rhs: &mut [f64]) {
        let n = self.inv.len();
        let b = self.block;
        let mut g: Vec<DVector<f64>> = Vec::with_capacity(n);
        for i in 0..n {
            let mut r = DVector::from_column_slice(&rhs[i * b..(i + 1) * b]);
            if i > 0 {
                r.axpy(-self.lower[i], &g[i - 1], 1.0);
            }
            g.push(&self.inv[i] * r);
        }
        let mut x = g.pop().unwrap();
        rhs[(n - 1) * b..].copy_from_slice(x.as_slice());
        for i in (0..n - 1).rev() {
            let corr = &self.inv[i] * &x * self.upper[i];
            x = &g[i] - corr;
            rhs[i * b..(i + 1) * b].copy_from_slice(x.as_slice());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn solves_random_system() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (n, b) = (6, 4);
        let diag: Vec<DMatrix<f64>> = (0..n)
            .map(|_| DMatrix::from_fn(b, b, |i, j| if i == j { 6.0 } else { rng.random_range(-1.0..1.0) }))
            .collect();
        let lower: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let upper: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x: Vec<f64> = (0..n * b).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut rhs = vec![0.0; n * b];
        for i in 0..n {
            let xi = DVector::from_column_slice(&x[i * b..(i + 1) * b]);
            let mut r = &diag[i] * xi;
            if i > 0 {
                r += DVector::from_column_slice(&x[(i - 1) * b..i * b]) * lower[i];
            }
            if i + 1 < n {
                r += DVector::from_column_slice(&x[(i + 1) * b..(i + 2) * b]) * upper[i];
            }
            rhs[i * b..(i + 1) * b].copy_from_slice(r.as_slice());
        }
        let f = BlockTridiag::factor(diag, lower, upper).unwrap();
        f.solve(&mut rhs);
        for (a, b) in rhs.iter().zip(&x) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(f.condition_estimate >= 1.0);
    }
}
