use std::f64::consts::PI;

use memkernel::grid::{RadialGrid, TimeGrid};
use memkernel::manufactured::ManufacturedCase;
use memkernel::measurements::{DerivativeSource, MeasurementSet, Perturbation};
use memkernel::study::study_grid;

fn max_diff_rows(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter().flatten().zip(b.iter().flatten()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn unit_field_has_sphere_measure() {
    for (dim, s) in [(2, 2.0 * PI), (3, 4.0 * PI)] {
        let case = ManufacturedCase::build("poly-kernel", dim, "isotropic").unwrap();
        // ∫ψ for ψ = (1 − |x|²)(1 + x₁) is |S|·(1/d − 1/(d+2)); midpoint rule in r
        let exact = s * (1.0 / dim as f64 - 1.0 / (dim as f64 + 2.0));
        let mut errs = Vec::new();
        for n in [10, 20] {
            let grid = study_grid(dim, 1.0, n).unwrap();
            let ops = case.operators(&grid).unwrap();
            let ones = vec![1.0; grid.len()];
            assert!(ops.phi(&ones).unwrap().iter().all(|g| (g - s).abs() < 1e-12));
            errs.push((ops.psi(&ones).unwrap() - exact).abs());
        }
        assert!(errs[0] < 1e-2 * exact && (errs[0] / errs[1]).log2() > 1.9, "{errs:?}");
    }
}

#[test]
fn finite_difference_derivatives_are_fourth_order() {
    let case = ManufacturedCase::build("decay-kernel", 2, "structured").unwrap();
    let grid = study_grid(2, 1.0, 8).unwrap();
    let ops = case.operators(&grid).unwrap();
    let mut errs = Vec::new();
    for steps in [16, 32] {
        let meas = case.exact_measurements(&ops, TimeGrid::new(0.5, steps).unwrap()).unwrap();
        assert_eq!(meas.derivative_source(), DerivativeSource::Analytic);
        let exact = meas.time_derivatives().unwrap();
        let fd_set = meas.drop_analytic_derivatives();
        assert_eq!(fd_set.derivative_source(), DerivativeSource::FiniteDifference);
        let fd = fd_set.time_derivatives().unwrap();
        errs.push((max_diff_rows(&fd.g1_t, &exact.g1_t), max_diff_rows(&fd.g1_tt, &exact.g1_tt)));
    }
    let first = (errs[0].0 / errs[1].0).log2();
    let second = (errs[0].1 / errs[1].1).log2();
    assert!(first > 3.5 && second > 3.5, "{errs:?}");
}

#[test]
fn noise_is_reproducible_and_relative() {
    let case = ManufacturedCase::build("poly-kernel", 2, "trig").unwrap();
    let grid = study_grid(2, 1.0, 8).unwrap();
    let ops = case.operators(&grid).unwrap();
    let clean = case.exact_measurements(&ops, TimeGrid::new(0.5, 8).unwrap()).unwrap();
    let a = clean.clone().with_noise(1e-3, 5).unwrap();
    let b = clean.clone().with_noise(1e-3, 5).unwrap();
    assert_eq!(a.g1, b.g1);
    assert_eq!(a.derivative_source(), DerivativeSource::Smoothed);
    let (d1, d2) = a.relative_difference(&clean).unwrap();
    assert!(d1 > 0.0 && d1 < 1e-2 && d2 < 1e-2);
    assert!(clean.clone().with_noise(-1.0, 0).is_err());
}

/// Change in the estimated g₁_tt caused by a perturbation of size 1e-4.
fn second_derivative_change(kind: Perturbation, steps: usize) -> f64 {
    let case = ManufacturedCase::build("poly-kernel", 2, "structured").unwrap();
    let grid = study_grid(2, 1.0, 8).unwrap();
    let ops = case.operators(&grid).unwrap();
    let clean = case.exact_measurements(&ops, TimeGrid::new(0.5, steps).unwrap()).unwrap().drop_analytic_derivatives();
    let base = clean.time_derivatives().unwrap();
    let noisy = clean.perturbed(kind, 1e-4, 9).unwrap();
    assert_eq!(noisy.derivative_source(), DerivativeSource::Smoothed);
    max_diff_rows(&noisy.time_derivatives().unwrap().g1_tt, &base.g1_tt)
}

#[test]
fn smooth_perturbations_stay_small_in_derivatives() {
    let smooth = second_derivative_change(Perturbation::Smooth, 64) / second_derivative_change(Perturbation::Smooth, 16);
    let samples = second_derivative_change(Perturbation::Samples, 64) / second_derivative_change(Perturbation::Samples, 16);
    assert!(smooth < 2.0, "{smooth}");
    assert!(samples > 8.0, "{samples}");
}

#[test]
fn smooth_perturbation_is_reproducible_and_relative() {
    let case = ManufacturedCase::build("poly-kernel", 3, "trig").unwrap();
    let grid = study_grid(3, 1.0, 6).unwrap();
    let ops = case.operators(&grid).unwrap();
    let clean = case.exact_measurements(&ops, TimeGrid::new(0.5, 8).unwrap()).unwrap();
    let a = clean.clone().perturbed(Perturbation::Smooth, 1e-3, 3).unwrap();
    let b = clean.clone().perturbed(Perturbation::Smooth, 1e-3, 3).unwrap();
    assert_eq!(a.g1, b.g1);
    assert_eq!(a.g2, b.g2);
    let (d1, d2) = a.relative_difference(&clean).unwrap();
    assert!(d1 > 0.0 && d1 < 1e-2 && d2 > 0.0 && d2 < 1e-2);
    assert!(clean.perturbed(Perturbation::Smooth, f64::NAN, 0).is_err());
}

#[test]
fn truncation_keeps_the_prefix() {
    let case = ManufacturedCase::build("poly-kernel", 3, "isotropic").unwrap();
    let grid = study_grid(3, 1.0, 6).unwrap();
    let ops = case.operators(&grid).unwrap();
    let meas = case.exact_measurements(&ops, TimeGrid::new(0.5, 10).unwrap()).unwrap();
    let cut = meas.truncated(4).unwrap();
    assert_eq!(cut.time.steps, 4);
    assert_eq!(cut.g1[..], meas.g1[..5]);
    assert!(meas.truncated(11).is_err());
}

#[test]
fn resampling_is_exact_on_even_quadratics() {
    let fine = RadialGrid::new(1.0, 16).unwrap();
    let coarse = RadialGrid::new(1.0, 8).unwrap();
    let time = TimeGrid::new(1.0, 4).unwrap();
    let profile = |r: f64, t: f64| (1.0 + t) * (2.0 - 0.5 * r * r);
    let g1 = (0..time.len()).map(|n| fine.nodes().iter().map(|&r| profile(r, time.t(n))).collect()).collect();
    let g2 = (0..time.len()).map(|n| time.t(n)).collect();
    let meas = MeasurementSet::new(time, fine, g1, g2).unwrap();
    let out = meas.resample(TimeGrid::new(1.0, 2).unwrap(), coarse).unwrap();
    for (n, row) in out.g1.iter().enumerate() {
        for (i, v) in row.iter().enumerate() {
            assert!((v - profile(coarse.r(i), out.time.t(n))).abs() < 1e-13);
        }
    }
    assert!(meas.resample(TimeGrid::new(1.0, 3).unwrap(), coarse).is_err());
}

#[test]
fn mismatched_arrays_are_rejected() {
    let radial = RadialGrid::new(1.0, 4).unwrap();
    let time = TimeGrid::new(1.0, 2).unwrap();
    assert!(MeasurementSet::new(time, radial, vec![vec![0.0; 4]; 2], vec![0.0; 3]).is_err());
    assert!(MeasurementSet::new(time, radial, vec![vec![f64::NAN; 4]; 3], vec![0.0; 3]).is_err());
}
