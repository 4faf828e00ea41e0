use memkernel::functions::{SpaceTimeFn, SpatialFn};
use memkernel::grid::TimeGrid;
use memkernel::identify::{identify, kernel_error, FormulaVariant, IdentifyOptions, IdentifyStatus};
use memkernel::manufactured::{ManufacturedCase, CASE_NAMES};
use memkernel::study::study_grid;
use memkernel::Error;

fn exact_run(name: &str, dim: usize, n_r: usize, n_t: usize, opts: &IdentifyOptions) -> (ManufacturedCase, memkernel::identify::IdentificationResult) {
    let case = ManufacturedCase::build(name, dim, "structured").unwrap();
    let grid = study_grid(dim, 1.0, n_r).unwrap();
    let ops = case.operators(&grid).unwrap();
    let meas = case.exact_measurements(&ops, TimeGrid::new(case.spec.horizon, n_t).unwrap()).unwrap();
    let res = identify(&case.spec, ops, &meas, opts).unwrap();
    (case, res)
}

fn no_equivalence() -> IdentifyOptions {
    IdentifyOptions { equivalence_check: false, ..Default::default() }
}

#[test]
fn zero_kernel_is_recovered_at_once() {
    for dim in [2, 3] {
        let (_, res) = exact_run("zero-kernel", dim, 12, 8, &no_equivalence());
        assert_eq!(res.status, IdentifyStatus::Converged);
        let kmax = res.k.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(kmax < 1e-8, "d={dim} max |k| = {kmax:e}");
        assert!(res.log.iter().all(|s| s.iterations <= 2), "{:?}", res.log);
    }
}

#[test]
fn initial_values_round_trip_on_every_case() {
    for dim in [2, 3] {
        for name in CASE_NAMES {
            let (_, res) = exact_run(name, dim, 12, 4, &no_equivalence());
            assert!(res.round_trip.max() < 1e-8, "{name} d={dim}: {:?}", res.round_trip);
        }
    }
}

#[test]
fn printed_signs_break_the_round_trip_only_for_nonzero_kernels() {
    let printed = IdentifyOptions { variant: FormulaVariant::AsPrinted, ..no_equivalence() };
    let (_, res) = exact_run("poly-kernel", 2, 12, 4, &printed);
    assert!(res.round_trip.max() > 1e-3, "{:?}", res.round_trip);
    let (_, res) = exact_run("zero-kernel", 2, 12, 4, &printed);
    assert!(res.round_trip.max() < 1e-8, "{:?}", res.round_trip);
}

#[test]
fn exact_data_error_is_second_order_in_space() {
    let mut errs = Vec::new();
    for n_r in [16, 32] {
        let (case, res) = exact_run("poly-kernel", 2, n_r, 16, &no_equivalence());
        let grid = study_grid(2, 1.0, n_r).unwrap();
        let exact = case.kernel_field(res.time, &grid);
        errs.push(kernel_error(&res.k, &exact.k, &grid.radial, case.spec.p).unwrap());
    }
    assert!(errs[1] < 5e-2 && (errs[0] / errs[1]).log2() > 1.8, "{errs:?}");
}

#[test]
fn recovery_is_causal() {
    let case = ManufacturedCase::build("decay-kernel", 2, "trig").unwrap();
    let grid = study_grid(2, 1.0, 12).unwrap();
    let ops = case.operators(&grid).unwrap();
    let meas = case.exact_measurements(&ops, TimeGrid::new(case.spec.horizon, 12).unwrap()).unwrap();
    let full = identify(&case.spec, ops.clone(), &meas, &no_equivalence()).unwrap();
    let part = identify(&case.spec, ops, &meas.truncated(5).unwrap(), &no_equivalence()).unwrap();
    assert_eq!(part.k.len(), 6);
    for n in 0..=5 {
        let d = full.k[n].iter().zip(&part.k[n]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(d < 1e-10, "step {n}: {d:e}");
    }
}

#[test]
fn equivalence_check_reproduces_the_data() {
    let (_, res) = exact_run("poly-kernel", 2, 16, 8, &IdentifyOptions::default());
    let eq = res.equivalence.expect("equivalence requested");
    assert!(eq.max() < 1e-2, "{eq:?}");
}

#[test]
fn radial_initial_state_is_rejected() {
    let mut case = ManufacturedCase::build("zero-kernel", 3, "isotropic").unwrap();
    let radial = SpatialFn::poly(&[(1.0, [0, 0, 0]), (0.5, [2, 0, 0]), (0.5, [0, 2, 0]), (0.5, [0, 0, 2])]);
    case.spec.u0 = radial.clone();
    case.spec.u1 = SpaceTimeFn::steady(radial);
    let grid = study_grid(3, 1.0, 10).unwrap();
    let ops = case.operators(&grid).unwrap();
    let meas = case.exact_measurements(&ops, TimeGrid::new(0.5, 4).unwrap()).unwrap();
    match identify(&case.spec, ops, &meas, &no_equivalence()) {
        Err(Error::Nondegeneracy { .. }) => {}
        other => panic!("expected a nondegeneracy error, got {:?}", other.map(|r| r.status)),
    }
}

#[test]
fn weight_not_vanishing_on_the_boundary_is_unsupported() {
    let mut case = ManufacturedCase::build("poly-kernel", 2, "isotropic").unwrap();
    case.spec.psi = SpatialFn::Constant(1.0);
    let grid = study_grid(2, 1.0, 8).unwrap();
    let ops = case.operators(&grid).unwrap();
    let meas = case.exact_measurements(&ops, TimeGrid::new(0.5, 4).unwrap()).unwrap();
    assert!(matches!(identify(&case.spec, ops, &meas, &no_equivalence()), Err(Error::Unsupported(_))));
}

#[test]
fn kernel_error_is_relative_and_zero_on_itself() {
    let grid = study_grid(2, 1.0, 8).unwrap();
    let k = vec![vec![1.0; 8], vec![2.0; 8]];
    assert_eq!(kernel_error(&k, &k, &grid.radial, 4.0).unwrap(), 0.0);
    let half: Vec<Vec<f64>> = k.iter().map(|r| r.iter().map(|v| 0.5 * v).collect()).collect();
    assert!((kernel_error(&half, &k, &grid.radial, 4.0).unwrap() - 0.5).abs() < 1e-14);
}
