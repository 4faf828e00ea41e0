//! Grid-refinement check of the operator identities behind the reduction:
//! Φ commutes with Ã (Φ[Ãu] = Ã₁Φ[u]), Ψ[Ãw] = Ψ₁[w] when ψ vanishes on the
//! boundary, and Φ annihilates the angular blocks of Ã and J(u₀).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bounds::random_field;
use crate::error::Result;
use crate::functions::SpatialFn;
use crate::grid::PolarGrid;
use crate::manufactured::ManufacturedCase;
use crate::model::{default_psi, CoefficientModel};
use crate::norms::weighted_lp_norm;
use crate::operators::{Closure, Operators};

pub const PRESETS: [&str; 3] = ["isotropic", "structured", "trig"];

#[derive(Debug, Clone, Serialize)]
pub struct VerifyOptions {
    pub dim: usize,
    pub radius: f64,
    pub levels: Vec<usize>,
    pub fields: usize,
    pub seed: u64,
}

impl VerifyOptions {
    pub fn new(dim: usize) -> Self {
        Self { dim, radius: 1.0, levels: vec![16, 32, 64], fields: 10, seed: 1 }
    }
}

/// Errors of one random field on one preset, one entry per level.
#[derive(Debug, Clone, Serialize)]
pub struct FieldErrors {
    pub preset: String,
    pub field: usize,
    pub commutation: Vec<f64>,
    pub duality: Vec<f64>,
    pub commutation_order: f64,
    pub duality_order: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OperatorReport {
    pub dim: usize,
    pub levels: Vec<usize>,
    pub fields: Vec<FieldErrors>,
    pub min_commutation_order: f64,
    pub min_duality_order: f64,
    /// max |Φ[angular blocks u]| relative to max |angular blocks u|.
    pub angular_annihilation: f64,
    /// max |Φ[J(u₀)]| relative to max |ℬu₀|, over manufactured cases.
    pub j_annihilation: f64,
    /// max |Φ_h[Ã_h u] − Ã₁,h Φ_h[u]|, the identity at the discrete level.
    pub discrete_commutation: f64,
}

impl OperatorReport {
    pub fn passes(&self, min_order: f64, annihilation_tol: f64) -> bool {
        self.min_commutation_order >= min_order
            && self.min_duality_order >= min_order
            && self.angular_annihilation < annihilation_tol
            && self.j_annihilation < annihilation_tol
    }
}

fn grid(dim: usize, radius: f64, n_r: usize) -> Result<PolarGrid> {
    if dim == 3 {
        PolarGrid::build(3, radius, n_r, 14, 28)
    } else {
        PolarGrid::build(2, radius, n_r, 0, 32)
    }
}

fn order(errs: &[f64]) -> f64 {
    match errs {
        [.., a, b] if *b > 0.0 => (a / b).log2(),
        [.., _, _] => f64::INFINITY,
        _ => f64::NAN,
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Ã₁Φ[u] evaluated from exact derivatives: Φ[h u_rr + (h′ + (d−1)h/r) u_r].
fn exact_atilde1_phi(ops: &Operators, model: &CoefficientModel, u: &SpatialFn) -> Vec<f64> {
    let ang = &ops.grid.angular;
    let sig = (ops.dim() - 1) as f64;
    ops.grid
        .radial
        .nodes()
        .into_iter()
        .map(|r| {
            let (h, h1) = (model.h(r), model.h_d1(r));
            (0..ops.n_ang())
                .map(|k| {
                    let n = ang.dirs[k];
                    let jet = u.jet(&ops.grid.point_at(r, k));
                    let ur: f64 = (0..3).map(|j| jet.g[j] * n[j]).sum();
                    let urr: f64 = (0..3).flat_map(|j| (0..3).map(move |l| (j, l))).map(|(j, l)| n[j] * jet.h[j][l] * n[l]).sum();
                    ang.weights[k] * (h * urr + (h1 + sig * h / r) * ur)
                })
                .sum()
        })
        .collect()
}

struct Level {
    commutation: f64,
    duality: f64,
    angular: f64,
    discrete: f64,
}

fn level(ops: &Operators, model: &CoefficientModel, u: &SpatialFn) -> Result<Level> {
    let sig = (ops.dim() - 1) as f64;
    let radius = ops.grid.radial.radius;
    let nodes = ops.sample(|x| u.value(x));
    // Exact ghost values at R + Δr/2: the quadratic Dirichlet ghost has an
    // O(Δr) truncation in the last row, which would mask the identity.
    let ghost_r = radius + 0.5 * ops.dr();
    let ghost: Vec<f64> = (0..ops.n_ang()).map(|k| u.value(&ops.grid.point_at(ghost_r, k))).collect();
    let cl = Closure::Ghost(&ghost);
    let au = ops.atilde(&nodes, &cl)?;
    let phi_au = ops.phi(&au)?;
    let exact = exact_atilde1_phi(ops, model, u);
    let diff: Vec<f64> = phi_au.iter().zip(&exact).map(|(a, b)| a - b).collect();
    let commutation = weighted_lp_norm(&ops.grid.radial, &diff, sig, 2.0)?;

    let duality = (ops.psi(&au)? - ops.psi1(&nodes, &cl)?).abs();

    let ang = ops.angular_part(&nodes)?;
    let angular = max_abs(&ops.phi(&ang)?) / max_abs(&ang).max(f64::MIN_POSITIVE);

    let w = ops.phi(&nodes)?;
    let wg: f64 = (0..ops.n_ang()).map(|k| ops.grid.angular.weights[k] * ghost[k]).sum();
    let a1 = ops.atilde1(&w, &Closure::Ghost(&[wg]))?;
    let discrete = phi_au.iter().zip(&a1).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / max_abs(&a1).max(1.0);
    Ok(Level { commutation, duality, angular, discrete })
}

/// Refinement study over every preset and `opts.fields` random fields.
pub fn operator_report(opts: &VerifyOptions) -> Result<OperatorReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let fields: Vec<SpatialFn> = (0..opts.fields).map(|_| random_field(&mut rng, opts.dim, opts.radius)).collect();
    let mut rows = Vec::new();
    let mut angular: f64 = 0.0;
    let mut discrete: f64 = 0.0;
    let mut j_annihilation: f64 = 0.0;
    for preset in PRESETS {
        let model = CoefficientModel::preset(preset, opts.dim, opts.radius)?;
        let mut per_field: Vec<(Vec<f64>, Vec<f64>)> = vec![(Vec::new(), Vec::new()); fields.len()];
        for &n_r in &opts.levels {
            let g = grid(opts.dim, opts.radius, n_r)?;
            let ops = Operators::new(&model, &g, &default_psi(opts.radius))?;
            for (f, errs) in fields.iter().zip(per_field.iter_mut()) {
                let lv = level(&ops, &model, f)?;
                errs.0.push(lv.commutation);
                errs.1.push(lv.duality);
                angular = angular.max(lv.angular);
                discrete = discrete.max(lv.discrete);
            }
            for case in ManufacturedCase::registry(opts.dim, preset)? {
                if case.name == "zero-kernel" {
                    continue;
                }
                let ops = case.operators(&g)?;
                let cert = case.certificate(&ops)?;
                let scale = max_abs(&cert.bu0).max(f64::MIN_POSITIVE);
                j_annihilation = j_annihilation.max(cert.identity_defect(&ops)? / scale);
            }
        }
        for (i, (c, d)) in per_field.into_iter().enumerate() {
            rows.push(FieldErrors {
                preset: preset.to_string(),
                field: i,
                commutation_order: order(&c),
                duality_order: order(&d),
                commutation: c,
                duality: d,
            });
        }
    }
    let min_of = |f: fn(&FieldErrors) -> f64| rows.iter().map(f).fold(f64::INFINITY, f64::min);
    Ok(OperatorReport {
        dim: opts.dim,
        levels: opts.levels.clone(),
        min_commutation_order: min_of(|r| r.commutation_order),
        min_duality_order: min_of(|r| r.duality_order),
        fields: rows,
        angular_annihilation: angular,
        j_annihilation,
        discrete_commutation: discrete,
    })
}
