//! Source terms f(t,x): separable data, or the residual of a chosen exact
//! pair (u*, k*) so that u* solves the forward problem.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functions::{convolve_deriv, norm, Point, RadialKernel, SpaceTimeFn};
use crate::model::{CoefficientModel, OperatorBC};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Forcing {
    Separable(SpaceTimeFn),
    Manufactured(Box<ManufacturedForcing>),
}

impl Default for Forcing {
    fn default() -> Self {
        Forcing::Separable(SpaceTimeFn::default())
    }
}

impl From<SpaceTimeFn> for Forcing {
    fn from(f: SpaceTimeFn) -> Self {
        Forcing::Separable(f)
    }
}

impl Forcing {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn value(&self, t: f64, x: &Point) -> f64 {
        self.deriv_value(t, x, 0)
    }

    /// n-th time derivative at (t, x).
    pub fn deriv_value(&self, t: f64, x: &Point, n: u32) -> f64 {
        match self {
            Forcing::Separable(f) => f.deriv_value(t, x, n),
            Forcing::Manufactured(m) => m.deriv_value(t, x, n),
        }
    }
}

/// f = D_t u* − 𝒜u* − ∫k*ℬu* − ∫D_r k*𝒞u*, evaluated from jets of u* and
/// closed-form convolutions. Time factors of u* must be pure exponentials.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManufacturedForcing {
    pub model: CoefficientModel,
    pub ops: OperatorBC,
    pub solution: SpaceTimeFn,
    pub kernel: RadialKernel,
}

impl ManufacturedForcing {
    pub fn new(model: CoefficientModel, ops: OperatorBC, solution: SpaceTimeFn, kernel: RadialKernel) -> Result<Self> {
        if solution.terms.iter().any(|(tau, _)| tau.power != 0) {
            return Err(Error::Unsupported(
                "manufactured solutions need exponential time factors".into(),
            ));
        }
        if model.dim != ops.dim() {
            return Err(Error::GridMismatch("operator and model dimensions differ".into()));
        }
        Ok(Self { model, ops, solution, kernel })
    }

    pub fn deriv_value(&self, t: f64, x: &Point, n: u32) -> f64 {
        let r = norm(x);
        let mut out = 0.0;
        for (tau, phi) in &self.solution.terms {
            let j = phi.jet(x);
            out += tau.deriv(t, n + 1) * j.v - tau.deriv(t, n) * self.model.apply_cartesian(x, &j);
            if self.kernel.terms.is_empty() {
                continue;
            }
            let (bphi, cphi) = (self.ops.apply_b(x, &j), self.ops.apply_c(x, &j));
            for (kappa, rho) in &self.kernel.terms {
                let conv = convolve_deriv(kappa, tau, t, n).expect("time factors checked in new");
                let (v, d1, _) = rho.eval3(r);
                out -= conv * (v * bphi + d1 * cphi);
            }
        }
        out
    }
}
