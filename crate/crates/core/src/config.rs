//! TOML experiment configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::ForwardOptions;
use crate::grid::{PolarGrid, TimeGrid};
use crate::identify::{FormulaVariant, IdentifyOptions};
use crate::manufactured::ManufacturedCase;
use crate::measurements::Perturbation;
use crate::model::BoundaryKind;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n_r: usize,
    pub n_t: usize,
    /// Gauss nodes in θ (sphere only).
    #[serde(default)]
    pub n_theta: Option<usize>,
    /// Nodes in φ.
    #[serde(default)]
    pub n_phi: Option<usize>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { n_r: 32, n_t: 16, n_theta: None, n_phi: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
    pub variant: FormulaVariant,
    pub equivalence_check: bool,
    pub corrector_sweeps: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let o = IdentifyOptions::default();
        Self {
            tol: o.tol,
            max_iter: o.max_iter,
            max_halvings: o.max_halvings,
            variant: o.variant,
            equivalence_check: o.equivalence_check,
            corrector_sweeps: ForwardOptions::default().corrector_sweeps,
        }
    }
}

/// CSV files with measured data: g₁ as `t,r,value` rows, g₂ as `t,value`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementFiles {
    pub g1: PathBuf,
    pub g2: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Manufactured problem that supplies coefficients, operators and data.
    pub case: String,
    pub preset: String,
    pub dim: usize,
    pub radius: f64,
    pub boundary: BoundaryKind,
    pub grid: GridConfig,
    /// Synthetic data come from a forward solve this many times finer.
    pub refine: usize,
    pub noise: f64,
    pub seed: u64,
    pub out: PathBuf,
    pub measurements: Option<MeasurementFiles>,
    pub solver: SolverConfig,
    /// (N_r, N_t) pairs for refinement studies.
    pub levels: Vec<[usize; 2]>,
    pub noise_levels: Vec<f64>,
    /// Perturbation used by the sensitivity study; `noise` always perturbs samples.
    pub perturbation: Perturbation,
    /// Random fields per preset in the operator check.
    pub fields: usize,
    /// Random draws per bound.
    pub instances: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            case: "poly-kernel".into(),
            preset: "structured".into(),
            dim: 2,
            radius: 1.0,
            boundary: BoundaryKind::Dirichlet,
            grid: GridConfig::default(),
            refine: 2,
            noise: 0.0,
            seed: 1,
            out: PathBuf::from("out"),
            measurements: None,
            solver: SolverConfig::default(),
            levels: vec![[16, 32], [32, 64], [64, 128]],
            noise_levels: vec![1e-4, 3e-4, 1e-3],
            perturbation: Perturbation::Smooth,
            fields: 10,
            instances: 100,
        }
    }
}

impl ExperimentConfig {
    /// Parse a TOML file; relative measurement paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        if let (Some(m), Some(dir)) = (cfg.measurements.as_mut(), path.parent()) {
            for p in [&mut m.g1, &mut m.g2] {
                if p.is_relative() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn check(&self) -> Result<()> {
        if self.dim != 2 && self.dim != 3 {
            return Err(Error::Config(format!("dim must be 2 or 3, got {}", self.dim)));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::Config(format!("radius must be positive, got {}", self.radius)));
        }
        if self.refine == 0 {
            return Err(Error::Config("refine must be at least 1".into()));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::Config(format!("noise must be >= 0, got {}", self.noise)));
        }
        if self.grid.n_t == 0 {
            return Err(Error::Config("grid.n_t must be positive".into()));
        }
        if self.noise_levels.iter().any(|d| !(*d > 0.0)) {
            return Err(Error::Config("noise_levels must be positive".into()));
        }
        Ok(())
    }

    pub fn case(&self) -> Result<ManufacturedCase> {
        ManufacturedCase::build_with(&self.case, self.dim, &self.preset, self.radius, self.boundary)
    }

    pub fn polar_grid(&self, n_r: usize) -> Result<PolarGrid> {
        match self.dim {
            2 => PolarGrid::build(2, self.radius, n_r, 0, self.grid.n_phi.unwrap_or(16)),
            _ => PolarGrid::build(3, self.radius, n_r, self.grid.n_theta.unwrap_or(6), self.grid.n_phi.unwrap_or(12)),
        }
    }

    pub fn time_grid(&self, horizon: f64) -> Result<TimeGrid> {
        TimeGrid::new(horizon, self.grid.n_t)
    }

    pub fn identify_options(&self) -> IdentifyOptions {
        let s = &self.solver;
        IdentifyOptions {
            tol: s.tol,
            max_iter: s.max_iter,
            max_halvings: s.max_halvings,
            variant: s.variant,
            equivalence_check: s.equivalence_check,
        }
    }

    pub fn forward_options(&self) -> ForwardOptions {
        ForwardOptions { corrector_sweeps: self.solver.corrector_sweeps, ..Default::default() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_missing_fields() {
        let cfg = ExperimentConfig::parse("dim = 3\n[grid]\nn_r = 8\nn_t = 4\n").unwrap();
        assert_eq!(cfg.dim, 3);
        assert_eq!(cfg.case, "poly-kernel");
        assert_eq!(cfg.grid.n_r, 8);
        assert!(cfg.measurements.is_none());
    }

    #[test]
    fn bad_values_are_config_errors() {
        assert!(matches!(ExperimentConfig::parse("dim = 4"), Err(Error::Config(_))));
        assert!(matches!(ExperimentConfig::parse("unknown = 1"), Err(Error::Config(_))));
        assert!(matches!(ExperimentConfig::parse("noise = -1.0"), Err(Error::Config(_))));
    }

    #[test]
    fn solver_section_maps_to_options() {
        let cfg = ExperimentConfig::parse("[solver]\ntol = 1e-8\nmax_iter = 7\nmax_halvings = 1\nvariant = \"as-printed\"\nequivalence_check = false\ncorrector_sweeps = 2\n").unwrap();
        let o = cfg.identify_options();
        assert_eq!(o.max_iter, 7);
        assert_eq!(o.variant, FormulaVariant::AsPrinted);
        assert_eq!(cfg.forward_options().corrector_sweeps, 2);
    }
}
