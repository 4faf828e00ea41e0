use memkernel::angular::gauss_legendre;
use memkernel::functions::{norm, Point};
use memkernel::manufactured::{ManufacturedCase, CASE_NAMES};
use memkernel::study::study_grid;
use memkernel::verify::PRESETS;

fn sample_points(dim: usize) -> Vec<Point> {
    let mut pts = vec![[0.0; 3], [0.3, -0.2, 0.0], [-0.5, 0.6, 0.0], [0.9, 0.1, 0.0], [0.0, -0.99, 0.0]];
    if dim == 3 {
        pts.extend([[0.2, 0.3, -0.4], [0.0, 0.0, 0.95], [-0.4, -0.4, 0.5]]);
    }
    pts
}

/// f − (u*_t − 𝒜u* − ∫₀ᵗ k(t−s)ℬu*(s) + k_r(t−s)𝒞u*(s) ds), the memory
/// integral by 24-point Gauss–Legendre instead of closed-form convolutions.
fn residual(case: &ManufacturedCase, t: f64, x: &Point) -> f64 {
    let sol = &case.solution;
    let r = norm(x);
    let (nodes, weights) = gauss_legendre(24);
    let memory: f64 = nodes
        .iter()
        .zip(&weights)
        .map(|(z, w)| {
            let s = 0.5 * t * (z + 1.0);
            let jet = sol.jet(s, x, 0);
            0.5 * t
                * w
                * (case.kernel.value(t - s, r) * case.spec.ops.apply_b(x, &jet)
                    + case.kernel.dr(t - s, r) * case.spec.ops.apply_c(x, &jet))
        })
        .sum();
    let lhs = sol.deriv_value(t, x, 1) - case.spec.model.apply_cartesian(x, &sol.jet(t, x, 0)) - memory;
    case.spec.f.value(t, x) - lhs
}

#[test]
fn forcing_matches_an_independent_residual() {
    for dim in [2, 3] {
        for preset in PRESETS {
            for name in CASE_NAMES {
                let case = ManufacturedCase::build(name, dim, preset).unwrap();
                for x in sample_points(dim) {
                    for t in [0.0, 0.1, 0.37, 0.5] {
                        let res = residual(&case, t, &x);
                        assert!(res.abs() <= 1e-9, "{name}/{preset} d={dim} t={t} x={x:?}: {res:e}");
                    }
                }
            }
        }
    }
}

#[test]
fn data_are_consistent_with_the_solution() {
    for dim in [2, 3] {
        for name in CASE_NAMES {
            let case = ManufacturedCase::build(name, dim, "trig").unwrap();
            for x in sample_points(dim) {
                assert!((case.solution.value(0.0, &x) - case.spec.u0.value(&x)).abs() < 1e-14);
                let r = norm(&x);
                if r > 0.0 {
                    let b: Point = [x[0] / r, x[1] / r, x[2] / r];
                    for t in [0.0, 0.25, 0.5] {
                        assert!((case.solution.value(t, &b) - case.spec.u1.value(t, &b)).abs() < 1e-13);
                    }
                }
            }
        }
    }
}

#[test]
fn certificates_are_comfortably_nondegenerate() {
    for dim in [2, 3] {
        for preset in PRESETS {
            for name in CASE_NAMES {
                let case = ManufacturedCase::build(name, dim, preset).unwrap();
                let grid = study_grid(dim, 1.0, 16).unwrap();
                let ops = case.operators(&grid).unwrap();
                let cert = case.certificate(&ops).unwrap();
                assert!(cert.m >= 1e-3, "{name}/{preset} d={dim}: m = {}", cert.m);
            }
        }
    }
}

#[test]
fn unknown_names_are_configuration_errors() {
    assert!(matches!(ManufacturedCase::build("nope", 2, "trig"), Err(memkernel::Error::Config(_))));
    assert!(matches!(ManufacturedCase::build("poly-kernel", 2, "nope"), Err(memkernel::Error::Config(_))));
}
