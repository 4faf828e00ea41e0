//! Finite-difference weights on arbitrary node sets.

/// Fornberg's recursion: weights `w[m][j]` such that
/// `f^(m)(x0) ≈ Σ_j w[m][j] f(xs[j])` for every derivative order `m <= max_order`.
pub fn fd_weights(x0: f64, xs: &[f64], max_order: usize) -> Vec<Vec<f64>> {
    let n = xs.len();
    let mut c = vec![vec![0.0; n]; max_order + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    for i in 1..n {
        let mn = i.min(max_order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Derivative of order `order` of uniformly sampled values at every sample,
/// using `width`-point stencils: centered in the interior, shifted one-sided
/// near the ends.
pub fn uniform_derivative(values: &[f64], spacing: f64, order: usize, width: usize) -> Vec<f64> {
    let n = values.len();
    assert!(n >= width, "need at least {width} samples, got {n}");
    let half = width / 2;
    let mut out = vec![0.0; n];
    let mut cache: Vec<(usize, Vec<f64>)> = Vec::new();
    for (i, o) in out.iter_mut().enumerate() {
        let start = if i < half {
            0
        } else if i + width - half > n {
            n - width
        } else {
            i - half
        };
        let offset = i - start;
        let w = match cache.iter().find(|(off, _)| *off == offset) {
            Some((_, w)) => w.clone(),
            None => {
                let xs: Vec<f64> = (0..width).map(|j| j as f64).collect();
                let w = fd_weights(offset as f64, &xs, order)[order].clone();
                cache.push((offset, w.clone()));
                w
            }
        };
        let s: f64 = w.iter().zip(&values[start..start + width]).map(|(a, b)| a * b).sum();
        *o = s / spacing.powi(order as i32);
    }
    out
}

/// Five-point quadratic least-squares (Savitzky–Golay) smoothing; the two
/// samples at each end are left untouched.
pub fn savitzky_golay5(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut out = values.to_vec();
    if n < 5 {
        return out;
    }
    for i in 2..n - 2 {
        out[i] = (-3.0 * values[i - 2] + 12.0 * values[i - 1] + 17.0 * values[i]
            + 12.0 * values[i + 1]
            - 3.0 * values[i + 2])
            / 35.0;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn central_weights_match_textbook() {
        let w = fd_weights(0.0, &[-2.0, -1.0, 0.0, 1.0, 2.0], 2);
        let d1 = [1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0];
        let d2 = [-1.0 / 12.0, 4.0 / 3.0, -5.0 / 2.0, 4.0 / 3.0, -1.0 / 12.0];
        for j in 0..5 {
            assert!((w[1][j] - d1[j]).abs() < 1e-14);
            assert!((w[2][j] - d2[j]).abs() < 1e-14);
        }
    }

    #[test]
    fn one_sided_stencils_exact_on_quartics() {
        let h = 0.1;
        let f = |t: f64| 1.0 + 2.0 * t - t * t + 0.5 * t.powi(3) + 0.25 * t.powi(4);
        let df = |t: f64| 2.0 - 2.0 * t + 1.5 * t * t + t.powi(3);
        let ddf = |t: f64| -2.0 + 3.0 * t + 3.0 * t * t;
        let vals: Vec<f64> = (0..9).map(|i| f(i as f64 * h)).collect();
        let d1 = uniform_derivative(&vals, h, 1, 5);
        let d2 = uniform_derivative(&vals, h, 2, 6);
        for i in 0..9 {
            let t = i as f64 * h;
            assert!((d1[i] - df(t)).abs() < 1e-10, "d1 at {i}");
            assert!((d2[i] - ddf(t)).abs() < 1e-8, "d2 at {i}");
        }
    }

    #[test]
    fn savitzky_golay_preserves_quadratics() {
        let vals: Vec<f64> = (0..10).map(|i| (i as f64).powi(2) - 3.0 * i as f64).collect();
        let s = savitzky_golay5(&vals);
        for (a, b) in s.iter().zip(&vals) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
