//! Forward solver: Crank–Nicolson in 𝒜 with explicit trapezoidal memory
//! terms and a predictor–corrector for the convolution endpoint.

use std::sync::Arc;

use serde::Serialize;

use crate::blocktri::BlockTridiag;
use crate::error::{Error, Result};
use crate::functions::{RadialKernel, SpaceTimeFn};
use crate::grid::{PolarGrid, RadialGrid, TimeGrid};
use crate::measurements::MeasurementSet;
use crate::model::{BoundaryKind, ProblemSpec};
use crate::operators::{index, Closure, GridBC, Operators};
use crate::stencil::uniform_derivative;

/// k(t_n, r_i) and D_r k(t_n, r_i).
#[derive(Debug, Clone)]
pub struct KernelField {
    pub time: TimeGrid,
    pub radial: RadialGrid,
    pub k: Vec<Vec<f64>>,
    pub kr: Vec<Vec<f64>>,
}

impl KernelField {
    pub fn zero(time: TimeGrid, radial: RadialGrid) -> Self {
        let z = vec![vec![0.0; radial.n]; time.len()];
        Self { time, radial, k: z.clone(), kr: z }
    }

    pub fn from_kernel(kernel: &RadialKernel, time: TimeGrid, radial: RadialGrid) -> Self {
        let nodes = radial.nodes();
        let k = (0..time.len()).map(|n| nodes.iter().map(|&r| kernel.value(time.t(n), r)).collect()).collect();
        let kr = (0..time.len()).map(|n| nodes.iter().map(|&r| kernel.dr(time.t(n), r)).collect()).collect();
        Self { time, radial, k, kr }
    }

    /// Values only; D_r k by fourth-order stencils.
    pub fn from_values(values: Vec<Vec<f64>>, time: TimeGrid, radial: RadialGrid) -> Result<Self> {
        let kr = values.iter().map(|row| uniform_derivative(row, radial.dr(), 1, 5)).collect();
        Self::from_values_and_derivative(values, kr, time, radial)
    }

    pub fn from_values_and_derivative(
        k: Vec<Vec<f64>>,
        kr: Vec<Vec<f64>>,
        time: TimeGrid,
        radial: RadialGrid,
    ) -> Result<Self> {
        let ok = k.len() == time.len()
            && kr.len() == time.len()
            && k.iter().chain(kr.iter()).all(|row| row.len() == radial.n);
        if !ok {
            return Err(Error::GridMismatch("kernel field shape does not match its grids".into()));
        }
        if k.iter().chain(kr.iter()).flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("kernel field".into()));
        }
        Ok(Self { time, radial, k, kr })
    }
}

/// Boundary data for the closure at time t: Dirichlet values or normal
/// derivatives of u₁ on the sphere of radius R.
pub fn boundary_data(kind: BoundaryKind, u1: &SpaceTimeFn, ops: &Operators, t: f64, t_deriv: u32) -> Vec<f64> {
    let grid = &ops.grid;
    let r = grid.radial.radius;
    (0..grid.n_ang())
        .map(|k| {
            let x = grid.point_at(r, k);
            match kind {
                BoundaryKind::Dirichlet => u1.deriv_value(t, &x, t_deriv),
                BoundaryKind::Neumann => {
                    let j = u1.jet(t, &x, t_deriv);
                    let n = grid.angular.dirs[k];
                    j.g[0] * n[0] + j.g[1] * n[1] + j.g[2] * n[2]
                }
            }
        })
        .collect()
}

pub fn closure(kind: BoundaryKind, data: &[f64]) -> Closure<'_> {
    match kind {
        BoundaryKind::Dirichlet => Closure::Dirichlet(data),
        BoundaryKind::Neumann => Closure::Neumann(data),
    }
}

/// Factorised (I − ½Δt Ã) with the boundary closure folded into the last row.
#[derive(Debug, Clone)]
pub struct CrankNicolson {
    pub dt: f64,
    pub boundary: BoundaryKind,
    factor: BlockTridiag,
    beta_last: f64,
}

impl CrankNicolson {
    pub fn new(ops: &Operators, dt: f64, boundary: BoundaryKind) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
        }
        let (n, na, dr) = (ops.n_r(), ops.n_ang(), ops.dr());
        let sig = (ops.dim() - 1) as f64;
        let th = 0.5 * dt;
        let mut diag = Vec::with_capacity(n);
        let mut lower = vec![0.0; n];
        let mut upper = vec![0.0; n];
        let mut beta_last = 0.0;
        for i in 0..n {
            let r = ops.grid.radial.r(i);
            let alpha = ops.h_half[i] / (dr * dr) - sig * ops.h_node[i] / (2.0 * r * dr);
            let beta = ops.h_half[i + 1] / (dr * dr) + sig * ops.h_node[i] / (2.0 * r * dr);
            let centre = -(ops.h_half[i] + ops.h_half[i + 1]) / (dr * dr);
            let mut d = &ops.blocks[i] * (-th / (r * r));
            let mut c = centre;
            let mut lo = alpha;
            if i + 1 == n {
                beta_last = beta;
                match boundary {
                    BoundaryKind::Dirichlet => {
                        c -= 2.0 * beta;
                        lo += beta / 3.0;
                    }
                    BoundaryKind::Neumann => c += beta,
                }
            }
            for k in 0..na {
                d[(k, k)] += 1.0 - th * c;
            }
            if i == 0 {
                for k in 0..na {
                    d[(k, ops.grid.angular.antipode[k])] -= th * alpha;
                }
            } else {
                lower[i] = -th * lo;
            }
            upper[i] = -th * beta;
            diag.push(d);
        }
        let factor = BlockTridiag::factor(diag, lower, upper)?;
        Ok(Self { dt, boundary, factor, beta_last })
    }

    pub fn condition_estimate(&self) -> f64 {
        self.factor.condition_estimate
    }

    /// One step: (I − ½ΔtÃ)u¹ = (I + ½ΔtÃ)u⁰ + ½Δt(s⁰ + s¹) with boundary
    /// data `bc0`, `bc1` at the two ends.
    pub fn step(&self, ops: &Operators, u0: &[f64], src0: &[f64], src1: &[f64], bc0: &[f64], bc1: &[f64]) -> Result<Vec<f64>> {
        let th = 0.5 * self.dt;
        let au = ops.atilde(u0, &closure(self.boundary, bc0))?;
        let mut rhs: Vec<f64> = (0..u0.len()).map(|j| u0[j] + th * (au[j] + src0[j] + src1[j])).collect();
        let (n, na, dr) = (ops.n_r(), ops.n_ang(), ops.dr());
        for k in 0..na {
            let extra = match self.boundary {
                BoundaryKind::Dirichlet => self.beta_last * 8.0 / 3.0 * bc1[k],
                BoundaryKind::Neumann => self.beta_last * dr * bc1[k],
            };
            rhs[index(na, n - 1, k)] += th * extra;
        }
        self.factor.solve(&mut rhs);
        if rhs.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("Crank-Nicolson solution".into()));
        }
        Ok(rhs)
    }
}

/// Trapezoid convolution Δt Σ_j w_j [k_{m−j} ℬu^j + kr_{m−j} 𝒞u^j] over
/// the stored history j = 0..=m; radial factors are broadcast over angles.
pub fn memory_term(k: &[Vec<f64>], kr: &[Vec<f64>], bu: &[Vec<f64>], cu: &[Vec<f64>], m: usize, dt: f64, na: usize) -> Vec<f64> {
    let len = bu[0].len();
    let mut out = vec![0.0; len];
    if m == 0 {
        return out;
    }
    for j in 0..=m {
        let w = if j == 0 || j == m { 0.5 * dt } else { dt };
        for (i, (ki, kri)) in k[m - j].iter().zip(&kr[m - j]).enumerate() {
            let (a, b) = (w * ki, w * kri);
            if a == 0.0 && b == 0.0 {
                continue;
            }
            let s = i * na..(i + 1) * na;
            for ((o, x), y) in out[s.clone()].iter_mut().zip(&bu[j][s.clone()]).zip(&cu[j][s]) {
                *o += a * x + b * y;
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy)]
pub struct ForwardOptions {
    /// Corrector sweeps after the predictor at each step.
    pub corrector_sweeps: usize,
    /// Keep every time level of u (otherwise only the first and last).
    pub keep_trajectory: bool,
}

impl Default for ForwardOptions {
    fn default() -> Self {
        Self { corrector_sweeps: 1, keep_trajectory: true }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolverMeta {
    pub dt: f64,
    pub steps: usize,
    pub linear_solves: usize,
    pub corrector_sweeps: usize,
    pub condition_estimate: f64,
}

#[derive(Debug, Clone)]
pub struct ForwardSolution {
    pub time: TimeGrid,
    pub grid: PolarGrid,
    /// u at each kept time level, paired with its step index.
    pub u: Vec<(usize, Vec<f64>)>,
    pub g1: Vec<Vec<f64>>,
    pub g2: Vec<f64>,
    pub meta: SolverMeta,
}

impl ForwardSolution {
    pub fn final_state(&self) -> &[f64] {
        &self.u.last().expect("at least the initial state").1
    }

    pub fn state(&self, n: usize) -> Option<&[f64]> {
        self.u.iter().find(|(m, _)| *m == n).map(|(_, v)| v.as_slice())
    }

    pub fn measurements(&self) -> MeasurementSet {
        MeasurementSet::new(self.time, self.grid.radial, self.g1.clone(), self.g2.clone())
            .expect("solver output has consistent shape")
    }
}

/// Marches the forward problem one step at a time, keeping the ℬu, 𝒞u
/// history the convolutions need.
pub struct ForwardStepper<'a> {
    pub spec: &'a ProblemSpec,
    pub ops: Arc<Operators>,
    pub bc: GridBC,
    pub time: TimeGrid,
    pub kernel: &'a KernelField,
    cn: CrankNicolson,
    opts: ForwardOptions,
    n: usize,
    u: Vec<f64>,
    bu: Vec<Vec<f64>>,
    cu: Vec<Vec<f64>>,
    mem: Vec<f64>,
    src: Vec<f64>,
    bdata: Vec<f64>,
    pub linear_solves: usize,
}

impl<'a> ForwardStepper<'a> {
    pub fn new(spec: &'a ProblemSpec, ops: Arc<Operators>, time: TimeGrid, kernel: &'a KernelField, opts: ForwardOptions) -> Result<Self> {
        if kernel.time.steps < time.steps || kernel.radial.n != ops.n_r() {
            return Err(Error::GridMismatch("kernel field does not cover the solver grids".into()));
        }
        if (kernel.time.dt() - time.dt()).abs() > 1e-12 * time.dt().max(1e-300) && time.steps > 0 {
            return Err(Error::GridMismatch("kernel field time step differs from the solver's".into()));
        }
        let dt = if time.steps > 0 { time.dt() } else { 1.0 };
        let cn = CrankNicolson::new(&ops, dt, spec.boundary)?;
        let bc = GridBC::new(&spec.ops, &ops.grid);
        let u = ops.sample(|x| spec.u0.value(x));
        let bdata = boundary_data(spec.boundary, &spec.u1, &ops, 0.0, 0);
        let cl = closure(spec.boundary, &bdata);
        let bu0 = ops.b_apply(&bc, &u, &cl)?;
        let cu0 = ops.c_apply(&bc, &u, &cl)?;
        let src = ops.sample(|x| spec.f.value(0.0, x));
        let mem = vec![0.0; u.len()];
        Ok(Self {
            spec,
            ops,
            bc,
            time,
            kernel,
            cn,
            opts,
            n: 0,
            u,
            bu: vec![bu0],
            cu: vec![cu0],
            mem,
            src,
            bdata,
            linear_solves: 0,
        })
    }

    pub fn step_index(&self) -> usize {
        self.n
    }

    pub fn state(&self) -> &[f64] {
        &self.u
    }

    pub fn condition_estimate(&self) -> f64 {
        self.cn.condition_estimate()
    }

    /// Advance from t_n to t_{n+1}.
    pub fn step_forward(&mut self) -> Result<&[f64]> {
        if self.n >= self.time.steps {
            return Err(Error::InvalidParameter("time horizon already reached".into()));
        }
        let ops = self.ops.clone();
        let m = self.n + 1;
        let t1 = self.time.t(m);
        let dt = self.time.dt();
        let na = ops.n_ang();
        let f1 = ops.sample(|x| self.spec.f.value(t1, x));
        let b1 = boundary_data(self.spec.boundary, &self.spec.u1, &ops, t1, 0);
        let src0: Vec<f64> = self.mem.iter().zip(&self.src).map(|(a, b)| a + b).collect();
        // predictor: the unknown endpoint of the convolution uses u^n
        self.bu.push(self.bu[self.n].clone());
        self.cu.push(self.cu[self.n].clone());
        let mut u1 = Vec::new();
        let mut mem1 = Vec::new();
        for sweep in 0..=self.opts.corrector_sweeps {
            if sweep > 0 {
                let cl = closure(self.spec.boundary, &b1);
                self.bu[m] = ops.b_apply(&self.bc, &u1, &cl)?;
                self.cu[m] = ops.c_apply(&self.bc, &u1, &cl)?;
            }
            mem1 = memory_term(&self.kernel.k, &self.kernel.kr, &self.bu, &self.cu, m, dt, na);
            let src1: Vec<f64> = mem1.iter().zip(&f1).map(|(a, b)| a + b).collect();
            u1 = self.cn.step(&ops, &self.u, &src0, &src1, &self.bdata, &b1)?;
            self.linear_solves += 1;
        }
        let cl = closure(self.spec.boundary, &b1);
        self.bu[m] = ops.b_apply(&self.bc, &u1, &cl)?;
        self.cu[m] = ops.c_apply(&self.bc, &u1, &cl)?;
        // keep the memory consistent with the accepted state
        if self.opts.corrector_sweeps > 0 {
            mem1 = memory_term(&self.kernel.k, &self.kernel.kr, &self.bu, &self.cu, m, dt, na);
        }
        self.mem = mem1;
        self.src = f1;
        self.bdata = b1;
        self.u = u1;
        self.n = m;
        Ok(&self.u)
    }
}

/// Solve on [0,T] and record g₁ = Φ[u], g₂ = Ψ[u] at every step.
pub fn solve_forward(spec: &ProblemSpec, ops: Arc<Operators>, time: TimeGrid, kernel: &KernelField, opts: ForwardOptions) -> Result<ForwardSolution> {
    let mut st = ForwardStepper::new(spec, ops.clone(), time, kernel, opts)?;
    let mut g1 = vec![ops.phi(st.state())?];
    let mut g2 = vec![ops.psi(st.state())?];
    let mut u = vec![(0, st.state().to_vec())];
    for n in 1..=time.steps {
        let s = st.step_forward()?;
        g1.push(ops.phi(s)?);
        g2.push(ops.psi(s)?);
        if opts.keep_trajectory || n == time.steps {
            u.push((n, s.to_vec()));
        }
    }
    let meta = SolverMeta {
        dt: time.dt(),
        steps: time.steps,
        linear_solves: st.linear_solves,
        corrector_sweeps: opts.corrector_sweeps,
        condition_estimate: st.condition_estimate(),
    };
    Ok(ForwardSolution { time, grid: ops.grid.clone(), u, g1, g2, meta })
}
