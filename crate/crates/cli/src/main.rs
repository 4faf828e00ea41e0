use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use memkernel::bounds::bound_suite;
use memkernel::config::ExperimentConfig;
use memkernel::forward::{solve_forward, ForwardOptions};
use memkernel::identify::{identify, kernel_error, IdentifyStatus};
use memkernel::io::{read_measurements, write_binary, write_radial_series, write_time_series};
use memkernel::model::{validate_spec, InitialMeasurements};
use memkernel::study::{closed_loop, forward_convergence, noise_study, synthesize};
use memkernel::verify::{operator_report, VerifyOptions};
use memkernel::{Error, Result};

const SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(name = "memkernel", version, about = "Forward solves and memory-kernel identification on a disk or ball")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// TOML experiment configuration (defaults apply without one).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Data-grid refinement factor for synthetic measurements.
    #[arg(long, global = true)]
    refine: Option<usize>,
    /// Relative multiplicative noise added to synthetic measurements.
    #[arg(long, global = true)]
    noise: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Space dimension, 2 or 3.
    #[arg(long, global = true)]
    dim: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Solve the forward problem with the case's kernel and write u, g₁, g₂.
    Forward,
    /// Recover the kernel from measurement files or synthetic data.
    Identify,
    /// Refinement check of the operator identities and a-priori bounds.
    VerifyOperators,
    /// Forward and closed-loop refinement study over the configured levels.
    Convergence,
    /// Sensitivity of the recovered kernel to measurement noise.
    Perturb,
    /// Check the problem hypotheses and the nondegeneracy certificate.
    Validate,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Forward => "forward",
            Command::Identify => "identify",
            Command::VerifyOperators => "verify-operators",
            Command::Convergence => "convergence",
            Command::Perturb => "perturb",
            Command::Validate => "validate",
        }
    }
}

/// Files written by a command, recorded in the manifest.
struct Outputs {
    dir: PathBuf,
    files: Vec<Value>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new() })
    }

    fn path(&mut self, name: &str, kind: &str, shape: &[usize]) -> PathBuf {
        self.files.push(json!({ "file": name, "kind": kind, "shape": shape }));
        self.dir.join(name)
    }

    fn json(&mut self, name: &str, value: &Value) -> Result<()> {
        let path = self.path(name, "json", &[]);
        fs::write(path, serde_json::to_string_pretty(value).expect("serializable"))?;
        Ok(())
    }
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(v) = &common.out {
        cfg.out = v.clone();
    }
    if let Some(v) = common.refine {
        cfg.refine = v;
    }
    if let Some(v) = common.noise {
        cfg.noise = v;
    }
    if let Some(v) = common.seed {
        cfg.seed = v;
    }
    if let Some(v) = common.dim {
        cfg.dim = v;
    }
    cfg.check()?;
    Ok(cfg)
}

struct Run {
    summary: Value,
    ok: bool,
}

fn forward(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<Run> {
    let case = cfg.case()?;
    let grid = cfg.polar_grid(cfg.grid.n_r)?;
    let ops = case.operators(&grid)?;
    let time = cfg.time_grid(case.spec.horizon)?;
    let opts = ForwardOptions { keep_trajectory: true, ..cfg.forward_options() };
    let sol = solve_forward(&case.spec, ops.clone(), time, &case.kernel_field(time, &grid), opts)?;
    let exact = case.exact_state(&ops, case.spec.horizon);
    let err = sol.final_state().iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let (n_r, n_ang) = (grid.n_r(), grid.n_ang());
    write_radial_series(&out.path("g1.csv", "csv t,r,value", &[time.len(), n_r]), &time, &grid.radial, &sol.g1)?;
    write_time_series(&out.path("g2.csv", "csv t,value", &[time.len()]), &time, &sol.g2)?;
    let levels = sol.u.len();
    write_binary(
        &out.path("u.bin", "f64 little-endian, level × radius × direction", &[levels, n_r, n_ang]),
        sol.u.iter().flat_map(|(_, u)| u.iter().copied()),
    )?;
    let steps: Vec<usize> = sol.u.iter().map(|(n, _)| *n).collect();
    let dirs: Vec<f64> = grid.angular.dirs.iter().flat_map(|d| d.iter().copied()).collect();
    write_binary(&out.path("directions.bin", "f64 little-endian unit vectors", &[n_ang, 3]), dirs)?;
    println!("forward: {} steps on N_r = {n_r}, {n_ang} directions; max error vs exact at T = {err:.3e}", time.steps);
    Ok(Run {
        summary: json!({ "solver": sol.meta, "stored_levels": steps, "final_max_error_vs_exact": err }),
        ok: true,
    })
}

fn identify_cmd(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<Run> {
    let case = cfg.case()?;
    let (meas, source) = match &cfg.measurements {
        Some(files) => {
            let m = read_measurements(&files.g1, &files.g2)?;
            if (m.radial.radius - cfg.radius).abs() > 1e-9 * cfg.radius {
                return Err(Error::Config(format!(
                    "measurement radius {} differs from the configured radius {}",
                    m.radial.radius, cfg.radius
                )));
            }
            let m = if cfg.noise > 0.0 { m.with_noise(cfg.noise, cfg.seed)? } else { m };
            (m, "files")
        }
        None => {
            let m = synthesize(&case, cfg.grid.n_r, cfg.grid.n_t, cfg.refine)?;
            let m = if cfg.noise > 0.0 { m.with_noise(cfg.noise, cfg.seed)? } else { m };
            (m, "synthetic")
        }
    };
    let grid = cfg.polar_grid(meas.radial.n)?;
    let ops = case.operators(&grid)?;
    let res = identify(&case.spec, ops, &meas, &cfg.identify_options())?;
    let n_r = grid.n_r();
    let levels = res.k.len();
    write_radial_series(&out.path("k.csv", "csv t,r,value", &[levels, n_r]), &res.time, &res.radial, &res.k)?;
    write_radial_series(&out.path("q.csv", "csv t,r,value", &[levels, n_r]), &res.time, &res.radial, &res.q)?;
    write_time_series(&out.path("l.csv", "csv t,value", &[levels]), &res.time, &res.l)?;
    write_binary(&out.path("k.bin", "f64 little-endian, level × radius", &[levels, n_r]), res.k.iter().flatten().copied())?;
    out.json("steps.json", &serde_json::to_value(&res.log).expect("serializable"))?;
    let truth = if source == "synthetic" {
        let exact = case.kernel_field(res.time, &grid);
        Some(kernel_error(&res.k, &exact.k, &grid.radial, case.spec.p)?)
    } else {
        None
    };
    let ok = !matches!(res.status, IdentifyStatus::FailedAt { .. });
    println!(
        "identify: {source} data, status {:?}, reached t = {}, round trip {:.2e}{}{}",
        res.status,
        res.reached_horizon,
        res.round_trip.max(),
        res.equivalence.map_or(String::new(), |e| format!(", equivalence residual {:.2e}", e.max())),
        truth.map_or(String::new(), |e| format!(", kernel error vs truth {e:.3e}")),
    );
    for w in &res.diagnostics.warnings {
        println!("warning: {w}");
    }
    Ok(Run {
        summary: json!({
            "data": source,
            "status": res.status,
            "reached_horizon": res.reached_horizon,
            "round_trip": res.round_trip,
            "equivalence": res.equivalence,
            "kernel_error_vs_truth": truth,
            "diagnostics": res.diagnostics,
            "certificate": { "min_phi_c": res.certificate.m, "j1": res.certificate.j1 },
        }),
        ok,
    })
}

fn verify_operators(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<Run> {
    let mut opts = VerifyOptions::new(cfg.dim);
    opts.radius = cfg.radius;
    opts.fields = cfg.fields;
    opts.seed = cfg.seed;
    let rep = operator_report(&opts)?;
    let bounds = bound_suite(cfg.dim, cfg.instances, cfg.seed)?;
    let ok = rep.passes(1.9, 1e-10) && bounds.worst() <= 1e-6;
    println!(
        "verify-operators d={}: commutation order {:.2}, duality order {:.2}, annihilation {:.1e}/{:.1e}, worst bound defect {:.2e}",
        cfg.dim, rep.min_commutation_order, rep.min_duality_order, rep.angular_annihilation, rep.j_annihilation, bounds.worst()
    );
    let report = json!({ "identities": rep, "bounds": bounds });
    out.json("operators.json", &report)?;
    Ok(Run { summary: json!({ "passed": ok }), ok })
}

fn convergence(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<Run> {
    let case = cfg.case()?;
    let levels: Vec<(usize, usize)> = cfg.levels.iter().map(|l| (l[0], l[1])).collect();
    let fwd = forward_convergence(&case, &levels)?;
    println!("forward convergence ({}, d={}):", case.name, cfg.dim);
    for (i, l) in fwd.levels.iter().enumerate() {
        let order = if i > 0 { format!("{:.2}", fwd.orders[i - 1]) } else { "-".into() };
        println!("  N_r={:4} N_t={:4}  error {:.3e}  order {order}", l.n_r, l.n_t, l.error);
    }
    let mut loops = Vec::new();
    println!("closed-loop identification (data refined {}x):", cfg.refine);
    for &(n_r, n_t) in &levels {
        let (s, _) = closed_loop(&case, n_r, n_t, cfg.refine, None, &cfg.identify_options())?;
        println!("  N_r={n_r:4} N_t={n_t:4}  kernel error {:.3e}  status {:?}", s.kernel_error, s.status);
        loops.push(s);
    }
    out.json("convergence.json", &json!({ "forward": fwd, "closed_loop": loops }))?;
    Ok(Run { summary: json!({ "forward_min_order": fwd.min_order() }), ok: true })
}

fn perturb(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<Run> {
    let case = cfg.case()?;
    let study = noise_study(&case, cfg.grid.n_r, cfg.grid.n_t, &cfg.noise_levels, cfg.perturbation, cfg.seed)?;
    for l in &study.levels {
        println!("  delta {:.1e}  deviation {:.3e}  status {:?}", l.delta, l.deviation, l.status);
    }
    println!("perturb ({:?}): log-log slope {:.3}", study.perturbation, study.slope);
    out.json("perturb.json", &serde_json::to_value(&study).expect("serializable"))?;
    Ok(Run { summary: json!({ "slope": study.slope, "complete": study.complete() }), ok: study.complete() })
}

fn validate(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<Run> {
    let case = cfg.case()?;
    let grid = cfg.polar_grid(cfg.grid.n_r)?;
    let ops = case.operators(&grid)?;
    let meas = case.exact_measurements(&ops, cfg.time_grid(case.spec.horizon)?)?;
    let initial = InitialMeasurements { g1: meas.g1[0].clone(), g2: meas.g2[0] };
    let rep = validate_spec(&case.spec, &grid, Some(&initial));
    for c in &rep.checks {
        let tag = match (c.passed, c.warning) {
            (true, _) => "ok",
            (false, true) => "warn",
            (false, false) => "FAIL",
        };
        println!("  {tag:4} {} (residual {:.2e})", c.name, c.residual);
    }
    let cert = case.certificate(&ops);
    let cert_json = match &cert {
        Ok(c) => json!({ "ok": true, "min_phi_c": c.m, "j1": c.j1 }),
        Err(e) => json!({ "ok": false, "error": e.to_string() }),
    };
    match &cert {
        Ok(c) => println!("  ok   nondegeneracy certificate (min |Phi[C u0]| {:.3e}, J1 {:.3e})", c.m, c.j1),
        Err(e) => println!("  FAIL nondegeneracy certificate: {e}"),
    }
    let ok = rep.ok() && cert.is_ok();
    out.json("validate.json", &json!({ "checks": rep, "certificate": cert_json }))?;
    Ok(Run { summary: json!({ "passed": ok }), ok })
}

fn run(cli: &Cli) -> Result<bool> {
    let start = Instant::now();
    let cfg = load_config(&cli.common)?;
    let mut out = Outputs::new(&cfg.out)?;
    let cmd = cli.command;
    let result = match cmd {
        Command::Forward => forward(&cfg, &mut out)?,
        Command::Identify => identify_cmd(&cfg, &mut out)?,
        Command::VerifyOperators => verify_operators(&cfg, &mut out)?,
        Command::Convergence => convergence(&cfg, &mut out)?,
        Command::Perturb => perturb(&cfg, &mut out)?,
        Command::Validate => validate(&cfg, &mut out)?,
    };
    let manifest = json!({
        "schema_version": SCHEMA_VERSION,
        "command": cmd.name(),
        "config": cfg,
        "grids": {
            "dim": cfg.dim,
            "radius": cfg.radius,
            "n_r": cfg.grid.n_r,
            "n_t": cfg.grid.n_t,
            "refine": cfg.refine,
        },
        "tolerances": {
            "fixed_point_tol": cfg.solver.tol,
            "max_iter": cfg.solver.max_iter,
            "max_halvings": cfg.solver.max_halvings,
        },
        "timings": { "total_s": start.elapsed().as_secs_f64() },
        "outputs": out.files,
        "result": result.summary,
    });
    fs::write(out.dir.join("manifest.json"), serde_json::to_string_pretty(&manifest).expect("serializable"))?;
    Ok(result.ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("memkernel: {} finished with failed checks", cli.command.name());
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("memkernel: {e}");
            ExitCode::from(if matches!(e, Error::Config(_) | Error::Parse(_)) { 2 } else { 1 })
        }
    }
}
