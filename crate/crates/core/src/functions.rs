//! Analytic function presets with exact derivatives: radial profiles,
//! full-space scalar fields, time factors and separable space-time sums.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];

pub fn norm(x: &Point) -> f64 {
    (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
}

/// Value, gradient and Hessian of a scalar field at one point.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Jet {
    pub v: f64,
    pub g: Point,
    pub h: Mat3,
}

impl Jet {
    pub fn constant(v: f64) -> Self {
        Self { v, ..Default::default() }
    }

    fn scale(mut self, s: f64) -> Self {
        self.v *= s;
        for j in 0..3 {
            self.g[j] *= s;
            for k in 0..3 {
                self.h[j][k] *= s;
            }
        }
        self
    }

    fn add(mut self, o: &Jet) -> Self {
        self.v += o.v;
        for j in 0..3 {
            self.g[j] += o.g[j];
            for k in 0..3 {
                self.h[j][k] += o.h[j][k];
            }
        }
        self
    }

    fn mul(&self, o: &Jet) -> Jet {
        let mut out = Jet { v: self.v * o.v, ..Default::default() };
        for j in 0..3 {
            out.g[j] = self.v * o.g[j] + o.v * self.g[j];
            for k in 0..3 {
                out.h[j][k] = self.v * o.h[j][k]
                    + o.v * self.h[j][k]
                    + self.g[j] * o.g[k]
                    + o.g[j] * self.g[k];
            }
        }
        out
    }

    /// Chain rule for `φ(self)` given φ, φ', φ''.
    fn compose(&self, f0: f64, f1: f64, f2: f64) -> Jet {
        let mut out = Jet { v: f0, ..Default::default() };
        for j in 0..3 {
            out.g[j] = f1 * self.g[j];
            for k in 0..3 {
                out.h[j][k] = f1 * self.h[j][k] + f2 * self.g[j] * self.g[k];
            }
        }
        out
    }

    /// Laplacian restricted to the first `dim` coordinates.
    pub fn laplacian(&self, dim: usize) -> f64 {
        (0..dim).map(|j| self.h[j][j]).sum()
    }
}

/// Natural cubic spline through tabulated samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SplineData", into = "SplineData")]
pub struct CubicSpline {
    knots: Vec<f64>,
    values: Vec<f64>,
    second: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SplineData {
    r: Vec<f64>,
    v: Vec<f64>,
}

impl TryFrom<SplineData> for CubicSpline {
    type Error = Error;
    fn try_from(d: SplineData) -> Result<Self> {
        CubicSpline::new(d.r, d.v)
    }
}

impl From<CubicSpline> for SplineData {
    fn from(s: CubicSpline) -> Self {
        SplineData { r: s.knots, v: s.values }
    }
}

impl CubicSpline {
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let n = knots.len();
        if n < 3 || values.len() != n {
            return Err(Error::InvalidParameter(
                "spline needs at least 3 knots and matching values".into(),
            ));
        }
        if knots.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("spline knots must increase".into()));
        }
        // tridiagonal system for the natural spline second derivatives
        let mut second = vec![0.0; n];
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        for i in 1..n - 1 {
            let h0 = knots[i] - knots[i - 1];
            let h1 = knots[i + 1] - knots[i];
            let a = h0 / 6.0;
            let b = (h0 + h1) / 3.0;
            let cc = h1 / 6.0;
            let rhs = (values[i + 1] - values[i]) / h1 - (values[i] - values[i - 1]) / h0;
            let m = b - a * c[i - 1];
            c[i] = cc / m;
            d[i] = (rhs - a * d[i - 1]) / m;
        }
        for i in (1..n - 1).rev() {
            second[i] = d[i] - c[i] * second[i + 1];
        }
        Ok(Self { knots, values, second })
    }

    fn eval(&self, r: f64) -> (f64, f64, f64) {
        let n = self.knots.len();
        let i = match self.knots.partition_point(|&k| k <= r) {
            0 => 0,
            p if p >= n => n - 2,
            p => p - 1,
        };
        let (x0, x1) = (self.knots[i], self.knots[i + 1]);
        let h = x1 - x0;
        let a = (x1 - r) / h;
        let b = (r - x0) / h;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.second[i], self.second[i + 1]);
        let v = a * y0 + b * y1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let d1 = (y1 - y0) / h - (3.0 * a * a - 1.0) * h * m0 / 6.0
            + (3.0 * b * b - 1.0) * h * m1 / 6.0;
        let d2 = a * m0 + b * m1;
        (v, d1, d2)
    }
}

/// A function of the radius with analytic derivatives where available.
#[derive(Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadialFn {
    Constant(f64),
    /// Coefficients of 1, r, r², ...
    Polynomial(Vec<f64>),
    /// `amp * cos(freq * r + phase)`
    Cosine { amp: f64, freq: f64, phase: f64 },
    /// `amp * exp(rate * r)`
    Exp { amp: f64, rate: f64 },
    Tabulated(CubicSpline),
    Sum(Vec<RadialFn>),
    Product(Box<RadialFn>, Box<RadialFn>),
    /// Evaluation rule without analytic derivatives; derivatives fall back
    /// to fourth-order central differences.
    #[serde(skip)]
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for RadialFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RadialFn::Constant(c) => write!(f, "Constant({c})"),
            RadialFn::Polynomial(c) => write!(f, "Polynomial({c:?})"),
            RadialFn::Cosine { amp, freq, phase } => {
                write!(f, "Cosine {{ amp: {amp}, freq: {freq}, phase: {phase} }}")
            }
            RadialFn::Exp { amp, rate } => write!(f, "Exp {{ amp: {amp}, rate: {rate} }}"),
            RadialFn::Tabulated(s) => write!(f, "Tabulated({} knots)", s.knots.len()),
            RadialFn::Sum(v) => f.debug_tuple("Sum").field(v).finish(),
            RadialFn::Product(a, b) => f.debug_tuple("Product").field(a).field(b).finish(),
            RadialFn::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

const FD_STEP: f64 = 1e-3;

impl RadialFn {
    pub fn zero() -> Self {
        RadialFn::Constant(0.0)
    }

    pub fn custom(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        RadialFn::Custom(Arc::new(f))
    }

    pub fn has_analytic_derivatives(&self) -> bool {
        match self {
            RadialFn::Custom(_) => false,
            RadialFn::Sum(v) => v.iter().all(|f| f.has_analytic_derivatives()),
            RadialFn::Product(a, b) => a.has_analytic_derivatives() && b.has_analytic_derivatives(),
            _ => true,
        }
    }

    /// Value, first and second derivative at `r`.
    pub fn eval3(&self, r: f64) -> (f64, f64, f64) {
        match self {
            RadialFn::Constant(c) => (*c, 0.0, 0.0),
            RadialFn::Polynomial(c) => {
                let (mut v, mut d1, mut d2) = (0.0, 0.0, 0.0);
                for &ck in c.iter().rev() {
                    d2 = d2 * r + 2.0 * d1;
                    d1 = d1 * r + v;
                    v = v * r + ck;
                }
                (v, d1, d2)
            }
            RadialFn::Cosine { amp, freq, phase } => {
                let a = freq * r + phase;
                (amp * a.cos(), -amp * freq * a.sin(), -amp * freq * freq * a.cos())
            }
            RadialFn::Exp { amp, rate } => {
                let e = amp * (rate * r).exp();
                (e, rate * e, rate * rate * e)
            }
            RadialFn::Tabulated(s) => s.eval(r),
            RadialFn::Sum(v) => v.iter().fold((0.0, 0.0, 0.0), |acc, f| {
                let (a, b, c) = f.eval3(r);
                (acc.0 + a, acc.1 + b, acc.2 + c)
            }),
            RadialFn::Product(a, b) => {
                let (f0, f1, f2) = a.eval3(r);
                let (g0, g1, g2) = b.eval3(r);
                (f0 * g0, f1 * g0 + f0 * g1, f2 * g0 + 2.0 * f1 * g1 + f0 * g2)
            }
            RadialFn::Custom(f) => {
                let h = FD_STEP;
                let fm2 = f(r - 2.0 * h);
                let fm1 = f(r - h);
                let f0 = f(r);
                let fp1 = f(r + h);
                let fp2 = f(r + 2.0 * h);
                let d1 = (fm2 - 8.0 * fm1 + 8.0 * fp1 - fp2) / (12.0 * h);
                let d2 = (-fm2 + 16.0 * fm1 - 30.0 * f0 + 16.0 * fp1 - fp2) / (12.0 * h * h);
                (f0, d1, d2)
            }
        }
    }

    pub fn value(&self, r: f64) -> f64 {
        self.eval3(r).0
    }

    pub fn d1(&self, r: f64) -> f64 {
        self.eval3(r).1
    }

    pub fn d2(&self, r: f64) -> f64 {
        self.eval3(r).2
    }
}

/// Monomial `coef * x^p0 * y^p1 * z^p2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coef: f64,
    pub pow: [u32; 3],
}

fn ipow(x: f64, p: i64) -> f64 {
    if p < 0 {
        0.0
    } else {
        x.powi(p as i32)
    }
}

impl Monomial {
    fn jet(&self, x: &Point) -> Jet {
        let p = [self.pow[0] as i64, self.pow[1] as i64, self.pow[2] as i64];
        let mono = |d: [i64; 3]| -> f64 {
            let mut v = self.coef;
            for j in 0..3 {
                let e = p[j] - d[j];
                if e < 0 {
                    return 0.0;
                }
                // falling factorial
                let mut ff = 1.0;
                for q in 0..d[j] {
                    ff *= (p[j] - q) as f64;
                }
                v *= ff * ipow(x[j], e);
            }
            v
        };
        let mut out = Jet { v: mono([0, 0, 0]), ..Default::default() };
        for j in 0..3 {
            let mut d = [0; 3];
            d[j] = 1;
            out.g[j] = mono(d);
            for k in 0..3 {
                let mut d = [0; 3];
                d[j] += 1;
                d[k] += 1;
                out.h[j][k] = mono(d);
            }
        }
        out
    }
}

/// A scalar field on the closed ball with exact gradient and Hessian.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpatialFn {
    Constant(f64),
    Polynomial(Vec<Monomial>),
    Radial(RadialFn),
    Sum(Vec<SpatialFn>),
    Product(Box<SpatialFn>, Box<SpatialFn>),
    Exp(Box<SpatialFn>),
    Sin(Box<SpatialFn>),
    Cos(Box<SpatialFn>),
}

impl SpatialFn {
    pub fn zero() -> Self {
        SpatialFn::Constant(0.0)
    }

    /// `coef * x_axis`.
    pub fn coordinate(axis: usize, coef: f64) -> Self {
        let mut pow = [0; 3];
        pow[axis] = 1;
        SpatialFn::Polynomial(vec![Monomial { coef, pow }])
    }

    pub fn poly(terms: &[(f64, [u32; 3])]) -> Self {
        SpatialFn::Polynomial(terms.iter().map(|&(coef, pow)| Monomial { coef, pow }).collect())
    }

    pub fn scaled(self, s: f64) -> Self {
        SpatialFn::Product(Box::new(SpatialFn::Constant(s)), Box::new(self))
    }

    pub fn times(self, other: SpatialFn) -> Self {
        SpatialFn::Product(Box::new(self), Box::new(other))
    }

    pub fn jet(&self, x: &Point) -> Jet {
        match self {
            SpatialFn::Constant(c) => Jet::constant(*c),
            SpatialFn::Polynomial(ms) => {
                ms.iter().fold(Jet::default(), |acc, m| acc.add(&m.jet(x)))
            }
            SpatialFn::Radial(f) => {
                let r = norm(x);
                let (v, d1, d2) = f.eval3(r);
                let mut out = Jet { v, ..Default::default() };
                if r < 1e-300 {
                    for j in 0..3 {
                        out.h[j][j] = d2;
                    }
                    return out;
                }
                let n = [x[0] / r, x[1] / r, x[2] / r];
                for j in 0..3 {
                    out.g[j] = d1 * n[j];
                    for k in 0..3 {
                        let delta = if j == k { 1.0 } else { 0.0 };
                        out.h[j][k] = d2 * n[j] * n[k] + d1 / r * (delta - n[j] * n[k]);
                    }
                }
                out
            }
            SpatialFn::Sum(v) => v.iter().fold(Jet::default(), |acc, f| acc.add(&f.jet(x))),
            SpatialFn::Product(a, b) => a.jet(x).mul(&b.jet(x)),
            SpatialFn::Exp(f) => {
                let j = f.jet(x);
                let e = j.v.exp();
                j.compose(e, e, e)
            }
            SpatialFn::Sin(f) => {
                let j = f.jet(x);
                let (s, c) = j.v.sin_cos();
                j.compose(s, c, -s)
            }
            SpatialFn::Cos(f) => {
                let j = f.jet(x);
                let (s, c) = j.v.sin_cos();
                j.compose(c, -s, -c)
            }
        }
    }

    pub fn value(&self, x: &Point) -> f64 {
        match self {
            SpatialFn::Constant(c) => *c,
            SpatialFn::Polynomial(ms) => ms
                .iter()
                .map(|m| {
                    m.coef
                        * x[0].powi(m.pow[0] as i32)
                        * x[1].powi(m.pow[1] as i32)
                        * x[2].powi(m.pow[2] as i32)
                })
                .sum(),
            SpatialFn::Radial(f) => f.value(norm(x)),
            SpatialFn::Sum(v) => v.iter().map(|f| f.value(x)).sum(),
            SpatialFn::Product(a, b) => a.value(x) * b.value(x),
            SpatialFn::Exp(f) => f.value(x).exp(),
            SpatialFn::Sin(f) => f.value(x).sin(),
            SpatialFn::Cos(f) => f.value(x).cos(),
        }
    }
}

/// `amp * t^power * exp(rate * t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeFn {
    pub amp: f64,
    #[serde(default)]
    pub power: u32,
    #[serde(default)]
    pub rate: f64,
}

impl TimeFn {
    pub fn constant(amp: f64) -> Self {
        Self { amp, power: 0, rate: 0.0 }
    }

    pub fn exp(amp: f64, rate: f64) -> Self {
        Self { amp, power: 0, rate }
    }

    pub fn linear(amp: f64) -> Self {
        Self { amp, power: 1, rate: 0.0 }
    }

    /// n-th time derivative.
    pub fn deriv(&self, t: f64, n: u32) -> f64 {
        let p = self.power;
        let mut sum = 0.0;
        let mut binom = 1.0;
        for k in 0..=n.min(p) {
            if k > 0 {
                binom *= (n - k + 1) as f64 / k as f64;
            }
            let mut falling = 1.0;
            for q in 0..k {
                falling *= (p - q) as f64;
            }
            sum += binom * falling * ipow(t, (p - k) as i64) * self.rate.powi((n - k) as i32);
        }
        self.amp * sum * (self.rate * t).exp()
    }

    pub fn value(&self, t: f64) -> f64 {
        self.deriv(t, 0)
    }
}

/// `∫_0^t σ^p e^{δσ} dσ`.
fn moment_integral(p: u32, delta: f64, t: f64) -> f64 {
    if (delta * t).abs() < 1.0 {
        let mut sum = 0.0;
        let mut term_pref = 1.0; // δ^k / k!
        for k in 0..60u32 {
            if k > 0 {
                term_pref *= delta / k as f64;
            }
            let term = term_pref * t.powi((p + k + 1) as i32) / (p + k + 1) as f64;
            sum += term;
            if term.abs() <= 1e-18 * sum.abs().max(1e-300) {
                break;
            }
        }
        sum
    } else {
        let e = (delta * t).exp();
        let mut phi = (e - 1.0) / delta;
        for q in 1..=p {
            phi = (t.powi(q as i32) * e - q as f64 * phi) / delta;
        }
        phi
    }
}

/// `∫_0^t kernel(σ) signal(t-σ) dσ` in closed form; `signal` must be a pure
/// exponential (power 0).
pub fn convolve(kernel: &TimeFn, signal: &TimeFn, t: f64) -> Result<f64> {
    if signal.power != 0 {
        return Err(Error::Unsupported(
            "closed-form convolution needs an exponential signal".into(),
        ));
    }
    let delta = kernel.rate - signal.rate;
    Ok(kernel.amp * signal.amp * (signal.rate * t).exp() * moment_integral(kernel.power, delta, t))
}

/// n-th time derivative of [`convolve`].
pub fn convolve_deriv(kernel: &TimeFn, signal: &TimeFn, t: f64, n: u32) -> Result<f64> {
    let mut out = signal.rate.powi(n as i32) * convolve(kernel, signal, t)?;
    for j in 0..n {
        out += kernel.deriv(t, j) * signal.deriv(0.0, n - 1 - j);
    }
    Ok(out)
}

/// Separable space-time function `Σ_m τ_m(t) U_m(x)`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SpaceTimeFn {
    pub terms: Vec<(TimeFn, SpatialFn)>,
}

impl SpaceTimeFn {
    pub fn new(terms: Vec<(TimeFn, SpatialFn)>) -> Self {
        Self { terms }
    }

    pub fn steady(u: SpatialFn) -> Self {
        Self { terms: vec![(TimeFn::constant(1.0), u)] }
    }

    /// Jet in x of the `n`-th time derivative.
    pub fn jet(&self, t: f64, x: &Point, n: u32) -> Jet {
        self.terms
            .iter()
            .fold(Jet::default(), |acc, (tau, u)| acc.add(&u.jet(x).scale(tau.deriv(t, n))))
    }

    pub fn value(&self, t: f64, x: &Point) -> f64 {
        self.deriv_value(t, x, 0)
    }

    /// Value of the `n`-th time derivative.
    pub fn deriv_value(&self, t: f64, x: &Point, n: u32) -> f64 {
        self.terms.iter().map(|(tau, u)| tau.deriv(t, n) * u.value(x)).sum()
    }

    pub fn at_time(&self, t: f64, n: u32) -> SpatialFn {
        SpatialFn::Sum(
            self.terms
                .iter()
                .map(|(tau, u)| u.clone().scaled(tau.deriv(t, n)))
                .collect(),
        )
    }
}

/// Radial memory kernel `k(t,r) = Σ_p κ_p(t) ρ_p(r)`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RadialKernel {
    pub terms: Vec<(TimeFn, RadialFn)>,
}

impl RadialKernel {
    pub fn zero() -> Self {
        Self { terms: Vec::new() }
    }

    pub fn value(&self, t: f64, r: f64) -> f64 {
        self.terms.iter().map(|(k, rho)| k.value(t) * rho.value(r)).sum()
    }

    pub fn dr(&self, t: f64, r: f64) -> f64 {
        self.terms.iter().map(|(k, rho)| k.value(t) * rho.d1(r)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_jet(f: &SpatialFn, x: Point) -> Jet {
        let h = 1e-4;
        let mut out = Jet { v: f.value(&x), ..Default::default() };
        for j in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[j] += h;
            xm[j] -= h;
            out.g[j] = (f.value(&xp) - f.value(&xm)) / (2.0 * h);
            let gp = f.jet(&xp).g;
            let gm = f.jet(&xm).g;
            for k in 0..3 {
                out.h[j][k] = (gp[k] - gm[k]) / (2.0 * h);
            }
        }
        out
    }

    #[test]
    fn spatial_jets_match_differences() {
        let f = SpatialFn::Sum(vec![
            SpatialFn::poly(&[(1.0, [1, 0, 0]), (0.5, [2, 1, 0]), (-0.3, [0, 0, 3])]),
            SpatialFn::Exp(Box::new(SpatialFn::coordinate(1, 0.7))).times(SpatialFn::Radial(
                RadialFn::Polynomial(vec![1.0, 0.0, 0.4]),
            )),
            SpatialFn::Sin(Box::new(SpatialFn::coordinate(2, 1.3))),
        ]);
        let x = [0.3, -0.2, 0.45];
        let a = f.jet(&x);
        let b = fd_jet(&f, x);
        assert!((a.v - b.v).abs() < 1e-14);
        for j in 0..3 {
            assert!((a.g[j] - b.g[j]).abs() < 1e-7);
            for k in 0..3 {
                assert!((a.h[j][k] - b.h[j][k]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn radial_fd_fallback_is_fourth_order() {
        let exact = RadialFn::Cosine { amp: 1.0, freq: 2.0, phase: 0.3 };
        let custom = RadialFn::custom(|r| (2.0 * r + 0.3).cos());
        assert!(!custom.has_analytic_derivatives());
        for &r in &[0.1, 0.5, 0.9] {
            let (_, a1, a2) = exact.eval3(r);
            let (_, c1, c2) = custom.eval3(r);
            assert!((a1 - c1).abs() < 1e-10);
            assert!((a2 - c2).abs() < 1e-7);
        }
    }

    #[test]
    fn spline_reproduces_cubic_interior() {
        let knots: Vec<f64> = (0..41).map(|i| i as f64 / 40.0).collect();
        let vals: Vec<f64> = knots.iter().map(|r| (3.0 * r).sin()).collect();
        let s = RadialFn::Tabulated(CubicSpline::new(knots, vals).unwrap());
        let (v, d1, _) = s.eval3(0.5123);
        assert!((v - (3.0f64 * 0.5123).sin()).abs() < 1e-6);
        assert!((d1 - 3.0 * (3.0f64 * 0.5123).cos()).abs() < 1e-3);
    }

    #[test]
    fn polynomial_radial_derivatives() {
        let p = RadialFn::Polynomial(vec![1.0, 2.0, 3.0, 4.0]);
        let (v, d1, d2) = p.eval3(0.5);
        assert!((v - (1.0 + 1.0 + 0.75 + 0.5)).abs() < 1e-14);
        assert!((d1 - (2.0 + 3.0 + 3.0)).abs() < 1e-14);
        assert!((d2 - (6.0 + 12.0)).abs() < 1e-14);
    }

    #[test]
    fn time_derivatives_of_t_exp() {
        let f = TimeFn { amp: 2.0, power: 1, rate: -0.5 };
        let t = 0.7;
        let h = 1e-4;
        let fd2 = (f.value(t + h) - 2.0 * f.value(t) + f.value(t - h)) / (h * h);
        assert!((f.deriv(t, 2) - fd2).abs() < 1e-6);
    }

    fn quad_conv(k: &TimeFn, s: &TimeFn, t: f64) -> f64 {
        // composite Simpson oracle
        let n = 2000;
        let h = t / n as f64;
        let g = |sig: f64| k.value(sig) * s.value(t - sig);
        let mut sum = g(0.0) + g(t);
        for i in 1..n {
            sum += if i % 2 == 1 { 4.0 } else { 2.0 } * g(i as f64 * h);
        }
        sum * h / 3.0
    }

    #[test]
    fn closed_form_convolutions_match_quadrature() {
        let kernels = [TimeFn::constant(1.0), TimeFn::linear(0.5), TimeFn::exp(1.0, -1.0)];
        let signals = [TimeFn::exp(1.0, 0.0), TimeFn::exp(0.7, -0.5), TimeFn::exp(1.2, -1.0)];
        for k in &kernels {
            for s in &signals {
                for &t in &[0.05, 0.6, 3.0] {
                    let a = convolve(k, s, t).unwrap();
                    let b = quad_conv(k, s, t);
                    assert!((a - b).abs() < 1e-10, "{k:?} {s:?} {t}: {a} vs {b}");
                    let h = 1e-5;
                    let fd = (convolve(k, s, t + h).unwrap() - convolve(k, s, t - h).unwrap())
                        / (2.0 * h);
                    assert!((convolve_deriv(k, s, t, 1).unwrap() - fd).abs() < 1e-7);
                    let fd2 = (convolve_deriv(k, s, t + h, 1).unwrap() - convolve_deriv(k, s, t - h, 1).unwrap())
                        / (2.0 * h);
                    assert!((convolve_deriv(k, s, t, 2).unwrap() - fd2).abs() < 1e-6);
                }
            }
        }
    }
}
