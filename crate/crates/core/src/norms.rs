//! Weighted Lᵖ / Sobolev norms on the radial grid and the Hölder embedding
//! check for W_σ^{1,p}(0,R).

use crate::error::{Error, Result};
use crate::grid::RadialGrid;
use crate::stencil::uniform_derivative;

fn check_finite(values: &[f64]) -> Result<()> {
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("field value at radial node {i}")));
    }
    Ok(())
}

/// (Σ Δr r_i^σ |f_i|^p)^{1/p}, midpoint rule.
pub fn weighted_lp_norm(grid: &RadialGrid, values: &[f64], sigma: f64, p: f64) -> Result<f64> {
    if p < 1.0 {
        return Err(Error::InvalidParameter(format!("p must be >= 1, got {p}")));
    }
    if values.len() != grid.n {
        return Err(Error::GridMismatch(format!("{} values on {} radial nodes", values.len(), grid.n)));
    }
    check_finite(values)?;
    let dr = grid.dr();
    let s: f64 = values
        .iter()
        .enumerate()
        .map(|(i, v)| dr * grid.r(i).powf(sigma) * v.abs().powf(p))
        .sum();
    Ok(s.powf(1.0 / p))
}

/// Radial derivative by fourth-order stencils (shifted one-sided near the ends).
pub fn radial_derivative(grid: &RadialGrid, values: &[f64], order: usize) -> Vec<f64> {
    uniform_derivative(values, grid.dr(), order, 4 + order)
}

/// (Σ_{j≤k} ‖D^j f‖^p_{σ,p})^{1/p}.
pub fn weighted_sobolev_norm(grid: &RadialGrid, values: &[f64], sigma: f64, p: f64, k: usize) -> Result<f64> {
    if k > 2 {
        return Err(Error::InvalidParameter(format!("derivative level must be 0, 1 or 2, got {k}")));
    }
    let mut total = weighted_lp_norm(grid, values, sigma, p)?.powf(p);
    for order in 1..=k {
        let d = radial_derivative(grid, values, order);
        total += weighted_lp_norm(grid, &d, sigma, p)?.powf(p);
    }
    Ok(total.powf(1.0 / p))
}

/// Constant and exponent of |u(t)−u(s)| ≤ C|t−s|^γ ‖u‖_{W_σ^{1,p}}.
pub fn holder_constants(p: f64, sigma: f64) -> Result<(f64, f64)> {
    if p <= sigma + 1.0 {
        return Err(Error::InvalidParameter(format!(
            "Hölder embedding needs p > σ+1 = {}, got {p}",
            sigma + 1.0
        )));
    }
    let p_conj = p / (p - 1.0);
    let c = ((p - 1.0) / (p - 1.0 - sigma)).powf(1.0 / p_conj);
    Ok((c, (p - 1.0 - sigma) / p))
}

/// Largest value of |u_i−u_j| − C|r_i−r_j|^γ‖u‖_{W_σ^{1,p}} over node pairs;
/// nonpositive up to quadrature error. σ = 2 gives the ball case.
pub fn holder_embedding_check(grid: &RadialGrid, values: &[f64], p: f64, sigma: f64) -> Result<f64> {
    let (c, gamma) = holder_constants(p, sigma)?;
    let norm = weighted_sobolev_norm(grid, values, sigma, p, 1)?;
    let mut worst = f64::NEG_INFINITY;
    for i in 0..grid.n {
        for j in i + 1..grid.n {
            let lhs = (values[i] - values[j]).abs();
            let rhs = c * (grid.r(j) - grid.r(i)).powf(gamma) * norm;
            worst = worst.max(lhs - rhs);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_and_linear_norms() {
        let g = RadialGrid::new(1.0, 200).unwrap();
        let ones = vec![1.0; g.n];
        let n = weighted_lp_norm(&g, &ones, 2.0, 2.0).unwrap();
        assert!((n - (1.0f64 / 3.0).sqrt()).abs() < 1e-5);
        let r = g.nodes();
        assert!((weighted_lp_norm(&g, &r, 0.0, 1.0).unwrap() - 0.5).abs() < 1e-12);
        assert!(weighted_lp_norm(&g, &ones, 0.0, 0.5).is_err());
        let mut bad = ones.clone();
        bad[3] = f64::NAN;
        assert!(matches!(weighted_lp_norm(&g, &bad, 0.0, 2.0), Err(Error::NonFinite(_))));
    }

    #[test]
    fn sobolev_of_r_squared() {
        let g = RadialGrid::new(1.0, 400).unwrap();
        let f: Vec<f64> = g.nodes().iter().map(|r| r * r).collect();
        let n = weighted_sobolev_norm(&g, &f, 2.0, 2.0, 1).unwrap();
        assert!((n - (1.0f64 / 7.0 + 4.0 / 5.0).sqrt()).abs() < 1e-5);
        let c = vec![3.0; g.n];
        let a = weighted_sobolev_norm(&g, &c, 1.0, 3.0, 1).unwrap();
        let b = weighted_lp_norm(&g, &c, 1.0, 3.0).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn holder_defects() {
        let g = RadialGrid::new(1.0, 64).unwrap();
        let c = vec![2.0; g.n];
        assert!(holder_embedding_check(&g, &c, 4.0, 2.0).unwrap() <= 0.0);
        let r = g.nodes();
        assert!(holder_embedding_check(&g, &r, 4.0, 2.0).unwrap() <= 1e-8);
        assert!(holder_embedding_check(&g, &r, 3.0, 2.0).is_err());
    }
}
