//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on failure.

use std::process::ExitCode;
use std::time::Instant;

use memkernel::bounds::bound_suite;
use memkernel::functions::{SpaceTimeFn, SpatialFn};
use memkernel::grid::TimeGrid;
use memkernel::identify::{identify, IdentifyOptions, IdentifyStatus};
use memkernel::manufactured::{ManufacturedCase, CASE_NAMES};
use memkernel::measurements::Perturbation;
use memkernel::study::{closed_loop, forward_convergence, noise_study, study_grid, ClosedLoop};
use memkernel::verify::{operator_report, VerifyOptions, PRESETS};
use memkernel::{Error, Result};

struct Outcome {
    pass: bool,
    detail: String,
}

/// Runs one criterion; `limit_s` is its runtime budget, if it has one.
fn report(id: usize, title: &str, limit_s: Option<f64>, run: impl FnOnce() -> Result<Outcome>) -> bool {
    let start = Instant::now();
    let out = run();
    let secs = start.elapsed().as_secs_f64();
    let (pass, detail) = match out {
        Ok(o) => (o.pass && limit_s.is_none_or(|l| secs <= l), o.detail),
        Err(e) => (false, format!("error: {e}")),
    };
    let tag = if pass { "PASS" } else { "FAIL" };
    let budget = limit_s.map_or(String::new(), |l| format!(", limit {l:.0} s"));
    println!("criterion {id} {tag} {title}: {detail} [{secs:.1} s{budget}]");
    pass
}

fn operator_identities() -> Result<Outcome> {
    let mut pass = true;
    let mut parts = Vec::new();
    for dim in [2, 3] {
        let rep = operator_report(&VerifyOptions::new(dim))?;
        pass &= rep.passes(1.9, 1e-10) && rep.fields.len() >= 30;
        parts.push(format!(
            "d={dim}: order comm {:.2} dual {:.2}, annihilation angular {:.1e} J {:.1e}",
            rep.min_commutation_order, rep.min_duality_order, rep.angular_annihilation, rep.j_annihilation
        ));
    }
    Ok(Outcome { pass, detail: parts.join("; ") })
}

fn bounds() -> Result<Outcome> {
    let mut pass = true;
    let mut parts = Vec::new();
    for dim in [2, 3] {
        let rep = bound_suite(dim, 120, 2024 + dim as u64)?;
        pass &= rep.worst() <= 1e-6;
        parts.push(format!(
            "d={dim} ({} draws): Phi {:.2e} Psi {:.2e} E {:.2e} M {:.2e} Holder {:.2e}",
            rep.instances, rep.phi, rep.psi, rep.e, rep.m, rep.holder
        ));
    }
    Ok(Outcome { pass, detail: format!("max relative defect {}", parts.join("; ")) })
}

fn forward_mms() -> Result<Outcome> {
    let mut pass = true;
    let mut parts = Vec::new();
    for dim in [2, 3] {
        for name in ["poly-kernel", "decay-kernel"] {
            let case = ManufacturedCase::build(name, dim, "structured")?;
            let study = forward_convergence(&case, &[(16, 32), (32, 64), (64, 128)])?;
            pass &= study.min_order() >= 1.9;
            let orders: Vec<String> = study.orders.iter().map(|o| format!("{o:.2}")).collect();
            parts.push(format!("{name} d={dim} orders {}", orders.join("/")));
        }
    }
    Ok(Outcome { pass, detail: parts.join("; ") })
}

struct ClosedLoopRuns {
    /// (coarse, refined) poly-kernel runs per dimension.
    poly: Vec<(ClosedLoop, ClosedLoop)>,
    zero: Vec<ClosedLoop>,
}

fn loop_grids(dim: usize) -> [(usize, usize); 2] {
    if dim == 2 {
        [(32, 16), (64, 32)]
    } else {
        [(64, 16), (128, 32)]
    }
}

fn closed_loop_runs() -> Result<ClosedLoopRuns> {
    let opts = IdentifyOptions::default();
    let mut poly = Vec::new();
    let mut zero = Vec::new();
    for dim in [2, 3] {
        let [coarse, fine] = loop_grids(dim);
        let case = ManufacturedCase::build("poly-kernel", dim, "structured")?;
        let a = closed_loop(&case, coarse.0, coarse.1, 2, None, &opts)?.0;
        let b = closed_loop(&case, fine.0, fine.1, 2, None, &opts)?.0;
        poly.push((a, b));
        let case = ManufacturedCase::build("zero-kernel", dim, "structured")?;
        zero.push(closed_loop(&case, coarse.0, coarse.1, 2, None, &opts)?.0);
    }
    Ok(ClosedLoopRuns { poly, zero })
}

fn complete(run: &ClosedLoop) -> bool {
    !matches!(run.status, IdentifyStatus::FailedAt { .. })
}

fn closed_loop_criterion(runs: &ClosedLoopRuns, secs: f64) -> Outcome {
    let mut pass = secs <= 600.0;
    let mut parts = vec![format!("runs took {secs:.1} s of 600")];
    for (a, b) in &runs.poly {
        pass &= a.kernel_error <= 5e-2 && b.kernel_error <= 1.5e-2 && complete(a) && complete(b);
        parts.push(format!(
            "poly d={} ({},{}) {:.2e} -> ({},{}) {:.2e}",
            a.dim, a.n_r, a.n_t, a.kernel_error, b.n_r, b.n_t, b.kernel_error
        ));
    }
    for z in &runs.zero {
        pass &= z.kernel_error <= 1e-8 && complete(z);
        parts.push(format!("zero d={} |k| {:.1e}", z.dim, z.kernel_error));
    }
    Outcome { pass, detail: parts.join("; ") }
}

fn equivalence_criterion(runs: &ClosedLoopRuns) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for ((a, b), z) in runs.poly.iter().zip(&runs.zero) {
        for run in [a, b, z] {
            // the zero kernel has no relative error; it is held to its dimension's coarse poly error
            let baseline = if run.case == "zero-kernel" { a.kernel_error } else { run.kernel_error };
            let residual = run.equivalence.unwrap_or(f64::INFINITY);
            pass &= residual <= 2.0 * baseline;
            parts.push(format!("{} d={} N_r={} {:.1e} <= {:.1e}", run.case, run.dim, run.n_r, residual, 2.0 * baseline));
        }
    }
    Outcome { pass, detail: parts.join("; ") }
}

fn round_trip() -> Result<Outcome> {
    let opts = IdentifyOptions { equivalence_check: false, ..Default::default() };
    let mut worst = 0.0f64;
    let mut count = 0;
    for dim in [2, 3] {
        for preset in PRESETS {
            for name in CASE_NAMES {
                let case = ManufacturedCase::build(name, dim, preset)?;
                let grid = study_grid(dim, 1.0, 16)?;
                let ops = case.operators(&grid)?;
                let meas = case.exact_measurements(&ops, TimeGrid::new(case.spec.horizon, 4)?)?;
                let res = identify(&case.spec, ops, &meas, &opts)?;
                worst = worst.max(res.round_trip.max());
                count += 1;
            }
        }
    }
    Ok(Outcome { pass: worst <= 1e-8, detail: format!("{count} case/preset/dimension combinations, worst defect {worst:.1e}") })
}

fn continuous_dependence() -> Result<Outcome> {
    let case = ManufacturedCase::build("poly-kernel", 2, "structured")?;
    let deltas = [1e-4, 3e-4, 1e-3];
    let study = noise_study(&case, 32, 16, &deltas, Perturbation::Smooth, 17)?;
    let devs: Vec<String> = study.levels.iter().map(|l| format!("{:.0e}:{:.2e}", l.delta, l.deviation)).collect();
    // per-sample noise is reported, not scored: its derivatives scale like δ/Δt²
    let samples = noise_study(&case, 32, 16, &deltas, Perturbation::Samples, 17)?;
    let failed = samples.levels.iter().filter(|l| matches!(l.status, IdentifyStatus::FailedAt { .. })).count();
    Ok(Outcome {
        pass: study.complete() && (study.slope - 1.0).abs() <= 0.2,
        detail: format!(
            "smooth perturbation slope {:.3}, all runs reach T: {} (deviation by delta {}); per-sample noise: gain {:.1e} at 1e-4, {failed}/3 runs stop early",
            study.slope,
            study.complete(),
            devs.join(" "),
            samples.levels[0].deviation / deltas[0],
        ),
    })
}

fn degeneracy() -> Result<Outcome> {
    let mut pass = true;
    let mut parts = Vec::new();
    for dim in [2, 3] {
        let mut case = ManufacturedCase::build("zero-kernel", dim, "structured")?;
        let mut terms = vec![(1.0, [0, 0, 0]), (0.5, [2, 0, 0]), (0.5, [0, 2, 0])];
        if dim == 3 {
            terms.push((0.5, [0, 0, 2]));
        }
        let radial = SpatialFn::poly(&terms);
        case.spec.u0 = radial.clone();
        case.spec.u1 = SpaceTimeFn::steady(radial);
        let grid = study_grid(dim, 1.0, 16)?;
        let ops = case.operators(&grid)?;
        let meas = case.exact_measurements(&ops, TimeGrid::new(0.5, 4)?)?;
        match identify(&case.spec, ops, &meas, &IdentifyOptions::default()) {
            Err(e @ Error::Nondegeneracy { .. }) => parts.push(format!("d={dim} rejected ({e})")),
            Err(e) => {
                pass = false;
                parts.push(format!("d={dim} wrong error ({e})"));
            }
            Ok(_) => {
                pass = false;
                parts.push(format!("d={dim} accepted"));
            }
        }
    }
    Ok(Outcome { pass, detail: parts.join("; ") })
}

fn main() -> ExitCode {
    let mut ok = true;
    ok &= report(1, "operator identities", Some(60.0), operator_identities);
    ok &= report(2, "a-priori bounds", Some(60.0), bounds);
    ok &= report(3, "forward convergence", Some(300.0), forward_mms);
    let start = Instant::now();
    let runs = closed_loop_runs();
    let loop_secs = start.elapsed().as_secs_f64();
    match runs {
        Ok(runs) => {
            ok &= report(4, "closed-loop identification", None, || Ok(closed_loop_criterion(&runs, loop_secs)));
            ok &= report(5, "equivalence", None, || Ok(equivalence_criterion(&runs)));
        }
        Err(e) => {
            println!("criterion 4 FAIL closed-loop identification: error: {e}");
            println!("criterion 5 FAIL equivalence: error: {e}");
            ok = false;
        }
    }
    ok &= report(6, "initial-data round trip", None, round_trip);
    ok &= report(7, "continuous dependence", None, continuous_dependence);
    ok &= report(8, "degeneracy detection", None, degeneracy);
    if ok {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: some criteria failed");
        ExitCode::FAILURE
    }
}
