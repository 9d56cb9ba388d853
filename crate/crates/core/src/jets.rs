//! Truncated third-order Taylor arithmetic.
//!
//! A [`Jet3`] carries a value together with all partial derivatives up to
//! order three in at most [`MAX_VARS`] variables. Second and third derivative
//! tables are filled from their canonical `i <= j <= k` entries and then
//! mirrored, so the symmetry of the tables is exact.
//!
//! Maps written once against the [`Scalar`] trait can be evaluated either on
//! plain `f64` or on jets, and the value slot of the jet result agrees with the
//! plain evaluation bit for bit because both run the same floating point
//! operations in the same order.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use crate::error::{Error, Result};

/// Largest number of independent variables a jet can carry.
pub const MAX_VARS: usize = 4;

/// Finite-difference steps used by [`fd_check`], indexed by derivative order.
pub const FD_STEPS: [f64; 3] = [1e-5, 1e-4, 5e-3];

type D2 = [[f64; MAX_VARS]; MAX_VARS];
type D3 = [[[f64; MAX_VARS]; MAX_VARS]; MAX_VARS];

#[derive(Clone, Copy, PartialEq)]
pub struct Jet3 {
    nvars: u8,
    order: u8,
    v: f64,
    d1: [f64; MAX_VARS],
    d2: D2,
    d3: D3,
}

impl Debug for Jet3 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let n = self.nvars as usize;
        f.debug_struct("Jet3")
            .field("order", &self.order)
            .field("value", &self.v)
            .field("d1", &&self.d1[..n])
            .finish_non_exhaustive()
    }
}

impl Jet3 {
    /// A constant; its derivatives are exactly zero to every order.
    pub fn constant(v: f64) -> Self {
        Self {
            nvars: 0,
            order: 3,
            v,
            d1: [0.0; MAX_VARS],
            d2: [[0.0; MAX_VARS]; MAX_VARS],
            d3: [[[0.0; MAX_VARS]; MAX_VARS]; MAX_VARS],
        }
    }

    /// The coordinate function `u_i` at value `v`, in `nvars` variables.
    pub fn variable(v: f64, i: usize, nvars: usize) -> Self {
        assert!(nvars <= MAX_VARS, "at most {MAX_VARS} jet variables");
        assert!(i < nvars, "variable index {i} out of range for {nvars} variables");
        let mut j = Self::constant(v);
        j.nvars = nvars as u8;
        j.d1[i] = 1.0;
        j
    }

    /// Seeds one jet per coordinate of `u`.
    pub fn variables(u: &[f64]) -> Vec<Self> {
        u.iter()
            .enumerate()
            .map(|(i, &v)| Self::variable(v, i, u.len()))
            .collect()
    }

    pub fn value(&self) -> f64 {
        self.v
    }

    pub fn nvars(&self) -> usize {
        self.nvars as usize
    }

    /// Highest derivative order whose entries are meaningful.
    pub fn order(&self) -> u8 {
        self.order
    }

    pub fn d1(&self, i: usize) -> f64 {
        self.d1[i]
    }

    pub fn d2(&self, i: usize, j: usize) -> f64 {
        self.d2[i][j]
    }

    pub fn d3(&self, i: usize, j: usize, k: usize) -> f64 {
        self.d3[i][j][k]
    }

    pub fn gradient(&self) -> Vec<f64> {
        self.d1[..self.nvars()].to_vec()
    }

    /// Errors unless the jet carries derivatives up to `need`.
    pub fn require_order(&self, need: u8) -> Result<()> {
        if self.order < need {
            return Err(Error::JetOrder {
                have: self.order,
                need,
            });
        }
        Ok(())
    }

    /// The jet of `∂f/∂u_i`, one order lower.
    pub fn partial(&self, i: usize) -> Self {
        let n = self.nvars();
        let mut out = Self::constant(0.0);
        out.nvars = self.nvars;
        out.order = self.order.saturating_sub(1);
        if n == 0 {
            return out;
        }
        out.v = self.d1[i];
        for j in 0..n {
            out.d1[j] = self.d2[i][j];
            for k in 0..n {
                out.d2[j][k] = self.d3[i][j][k];
            }
        }
        out
    }

    /// Drops derivative information above `order`.
    pub fn truncate(&self, order: u8) -> Self {
        let mut out = *self;
        out.order = self.order.min(order);
        out
    }

    pub fn is_finite(&self) -> bool {
        let n = self.nvars();
        if !self.v.is_finite() {
            return false;
        }
        for i in 0..n {
            if !self.d1[i].is_finite() {
                return false;
            }
            for j in 0..n {
                if !self.d2[i][j].is_finite() {
                    return false;
                }
                for k in 0..n {
                    if !self.d3[i][j][k].is_finite() {
                        return false;
                    }
                }
            }
        }
        true
    }

    pub fn abs(self) -> Self {
        if self.v < 0.0 {
            -self
        } else {
            self
        }
    }

    fn blank(nvars: u8, order: u8, v: f64) -> Self {
        let mut out = Self::constant(v);
        out.nvars = nvars;
        out.order = order;
        out
    }

    fn join(a: &Self, b: &Self) -> (u8, u8) {
        let nvars = match (a.nvars, b.nvars) {
            (0, m) | (m, 0) => m,
            (m, k) => {
                assert_eq!(m, k, "jets over different variable counts");
                m
            }
        };
        (nvars, a.order.min(b.order))
    }

    fn mirror2(d2: &mut D2, i: usize, j: usize, val: f64) {
        d2[i][j] = val;
        d2[j][i] = val;
    }

    fn mirror3(d3: &mut D3, i: usize, j: usize, k: usize, val: f64) {
        d3[i][j][k] = val;
        d3[i][k][j] = val;
        d3[j][i][k] = val;
        d3[j][k][i] = val;
        d3[k][i][j] = val;
        d3[k][j][i] = val;
    }

    /// Composes a scalar function with derivatives `f0..f3` at `self.v`.
    fn chain(&self, f0: f64, f1: f64, f2: f64, f3: f64) -> Self {
        let n = self.nvars();
        let mut out = Self::blank(self.nvars, self.order, f0);
        let a = self;
        for i in 0..n {
            out.d1[i] = f1 * a.d1[i];
        }
        if self.order >= 2 {
            for i in 0..n {
                for j in i..n {
                    let v = f1 * a.d2[i][j] + f2 * a.d1[i] * a.d1[j];
                    Self::mirror2(&mut out.d2, i, j, v);
                }
            }
        }
        if self.order >= 3 {
            for i in 0..n {
                for j in i..n {
                    for k in j..n {
                        let v = f1 * a.d3[i][j][k]
                            + f2 * (a.d2[i][j] * a.d1[k] + a.d2[i][k] * a.d1[j] + a.d2[j][k] * a.d1[i])
                            + f3 * a.d1[i] * a.d1[j] * a.d1[k];
                        Self::mirror3(&mut out.d3, i, j, k, v);
                    }
                }
            }
        }
        out
    }

    fn mul_jet(&self, b: &Self) -> Self {
        let a = self;
        let (nvars, order) = Self::join(a, b);
        let n = nvars as usize;
        let mut out = Self::blank(nvars, order, a.v * b.v);
        for i in 0..n {
            out.d1[i] = a.d1[i] * b.v + a.v * b.d1[i];
        }
        if order >= 2 {
            for i in 0..n {
                for j in i..n {
                    let v = a.d2[i][j] * b.v
                        + a.d1[i] * b.d1[j]
                        + a.d1[j] * b.d1[i]
                        + a.v * b.d2[i][j];
                    Self::mirror2(&mut out.d2, i, j, v);
                }
            }
        }
        if order >= 3 {
            for i in 0..n {
                for j in i..n {
                    for k in j..n {
                        let v = a.d3[i][j][k] * b.v
                            + a.d2[i][j] * b.d1[k]
                            + a.d2[i][k] * b.d1[j]
                            + a.d2[j][k] * b.d1[i]
                            + a.d1[i] * b.d2[j][k]
                            + a.d1[j] * b.d2[i][k]
                            + a.d1[k] * b.d2[i][j]
                            + a.v * b.d3[i][j][k];
                        Self::mirror3(&mut out.d3, i, j, k, v);
                    }
                }
            }
        }
        out
    }

    fn linear(&self, b: &Self, sb: f64) -> Self {
        let a = self;
        let (nvars, order) = Self::join(a, b);
        let n = nvars as usize;
        let v = if sb > 0.0 { a.v + b.v } else { a.v - b.v };
        let mut out = Self::blank(nvars, order, v);
        for i in 0..n {
            out.d1[i] = a.d1[i] + sb * b.d1[i];
            for j in 0..n {
                out.d2[i][j] = a.d2[i][j] + sb * b.d2[i][j];
                for k in 0..n {
                    out.d3[i][j][k] = a.d3[i][j][k] + sb * b.d3[i][j][k];
                }
            }
        }
        out
    }

    fn scale(&self, s: f64) -> Self {
        let n = self.nvars();
        let mut out = *self;
        out.v = self.v * s;
        for i in 0..n {
            out.d1[i] *= s;
            for j in 0..n {
                out.d2[i][j] *= s;
                for k in 0..n {
                    out.d3[i][j][k] *= s;
                }
            }
        }
        out
    }
}

impl Add for Jet3 {
    type Output = Jet3;
    fn add(self, rhs: Jet3) -> Jet3 {
        self.linear(&rhs, 1.0)
    }
}

impl Sub for Jet3 {
    type Output = Jet3;
    fn sub(self, rhs: Jet3) -> Jet3 {
        self.linear(&rhs, -1.0)
    }
}

impl Mul for Jet3 {
    type Output = Jet3;
    fn mul(self, rhs: Jet3) -> Jet3 {
        self.mul_jet(&rhs)
    }
}

impl Div for Jet3 {
    type Output = Jet3;
    fn div(self, rhs: Jet3) -> Jet3 {
        let mut out = self.mul_jet(&Scalar::recip(rhs));
        out.v = self.v / rhs.v;
        out
    }
}

impl Neg for Jet3 {
    type Output = Jet3;
    fn neg(self) -> Jet3 {
        let mut out = self.scale(-1.0);
        out.v = -self.v;
        out
    }
}

impl Add<f64> for Jet3 {
    type Output = Jet3;
    fn add(mut self, rhs: f64) -> Jet3 {
        self.v += rhs;
        self
    }
}

impl Sub<f64> for Jet3 {
    type Output = Jet3;
    fn sub(mut self, rhs: f64) -> Jet3 {
        self.v -= rhs;
        self
    }
}

impl Mul<f64> for Jet3 {
    type Output = Jet3;
    fn mul(self, rhs: f64) -> Jet3 {
        self.scale(rhs)
    }
}

impl Div<f64> for Jet3 {
    type Output = Jet3;
    fn div(self, rhs: f64) -> Jet3 {
        let mut out = self.scale(1.0 / rhs);
        out.v = self.v / rhs;
        out
    }
}

impl Mul<Jet3> for f64 {
    type Output = Jet3;
    fn mul(self, rhs: Jet3) -> Jet3 {
        let mut out = rhs.scale(self);
        out.v = self * rhs.v;
        out
    }
}

impl AddAssign for Jet3 {
    fn add_assign(&mut self, rhs: Jet3) {
        *self = *self + rhs;
    }
}

impl SubAssign for Jet3 {
    fn sub_assign(&mut self, rhs: Jet3) {
        *self = *self - rhs;
    }
}

impl MulAssign for Jet3 {
    fn mul_assign(&mut self, rhs: Jet3) {
        *self = *self * rhs;
    }
}

/// Number type that maps are written against: `f64` or [`Jet3`].
pub trait Scalar:
    Copy
    + Debug
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
{
    fn cst(v: f64) -> Self;
    fn value(&self) -> f64;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn sinh(self) -> Self;
    fn cosh(self) -> Self;
    fn sqrt(self) -> Self;
    fn powf(self, p: f64) -> Self;
    fn recip(self) -> Self;
}

impl Scalar for f64 {
    fn cst(v: f64) -> Self {
        v
    }
    fn value(&self) -> f64 {
        *self
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn sinh(self) -> Self {
        f64::sinh(self)
    }
    fn cosh(self) -> Self {
        f64::cosh(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn powf(self, p: f64) -> Self {
        f64::powf(self, p)
    }
    fn recip(self) -> Self {
        f64::recip(self)
    }
}

impl Scalar for Jet3 {
    fn cst(v: f64) -> Self {
        Jet3::constant(v)
    }
    fn value(&self) -> f64 {
        self.v
    }
    fn exp(self) -> Self {
        let e = self.v.exp();
        self.chain(e, e, e, e)
    }
    fn ln(self) -> Self {
        let r = 1.0 / self.v;
        self.chain(self.v.ln(), r, -r * r, 2.0 * r * r * r)
    }
    fn sin(self) -> Self {
        let (s, c) = (self.v.sin(), self.v.cos());
        self.chain(s, c, -s, -c)
    }
    fn cos(self) -> Self {
        let (s, c) = (self.v.sin(), self.v.cos());
        self.chain(c, -s, -c, s)
    }
    fn sinh(self) -> Self {
        let (s, c) = (self.v.sinh(), self.v.cosh());
        self.chain(s, c, s, c)
    }
    fn cosh(self) -> Self {
        let (s, c) = (self.v.sinh(), self.v.cosh());
        self.chain(c, s, c, s)
    }
    fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        let f1 = 0.5 / s;
        let f2 = -0.25 / (s * self.v);
        let f3 = 0.375 / (s * self.v * self.v);
        self.chain(s, f1, f2, f3)
    }
    fn powf(self, p: f64) -> Self {
        let x = self.v;
        self.chain(
            x.powf(p),
            p * x.powf(p - 1.0),
            p * (p - 1.0) * x.powf(p - 2.0),
            p * (p - 1.0) * (p - 2.0) * x.powf(p - 3.0),
        )
    }
    fn recip(self) -> Self {
        let r = 1.0 / self.v;
        let r2 = r * r;
        self.chain(self.v.recip(), -r2, 2.0 * r2 * r, -6.0 * r2 * r2)
    }
}

/// Open axis-aligned box `lo < u < hi`.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl DomainBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        assert_eq!(lo.len(), hi.len(), "box bounds of different length");
        assert!(lo.iter().zip(&hi).all(|(a, b)| a < b), "empty box");
        Self { lo, hi }
    }

    /// The cube `(lo, hi)^dim`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Self {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, u: &[f64]) -> bool {
        u.len() == self.dim()
            && u
                .iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(x, (a, b))| *a < *x && *x < *b)
    }

    /// Distance from `u` to the nearest face (negative outside).
    pub fn margin(&self, u: &[f64]) -> f64 {
        u.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(x, (a, b))| (x - a).min(b - x))
            .fold(f64::INFINITY, f64::min)
    }

    /// The box shrunk by `m` on every side.
    pub fn shrink(&self, m: f64) -> Self {
        Self::new(
            self.lo.iter().map(|a| a + m).collect(),
            self.hi.iter().map(|b| b - m).collect(),
        )
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }
}

/// A parametrised map written once over any [`Scalar`].
pub trait ParamMap: Send + Sync {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn domain(&self) -> &DomainBox;
    fn map<S: Scalar>(&self, u: &[S]) -> Vec<S>;
}

/// Object-safe view of a [`ParamMap`].
pub trait SmoothMap: Send + Sync {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn domain(&self) -> &DomainBox;
    fn eval_f64(&self, u: &[f64]) -> Vec<f64>;
    fn eval_jet(&self, u: &[Jet3]) -> Vec<Jet3>;
}

impl<T: ParamMap> SmoothMap for T {
    fn input_dim(&self) -> usize {
        ParamMap::input_dim(self)
    }
    fn output_dim(&self) -> usize {
        ParamMap::output_dim(self)
    }
    fn domain(&self) -> &DomainBox {
        ParamMap::domain(self)
    }
    fn eval_f64(&self, u: &[f64]) -> Vec<f64> {
        self.map(u)
    }
    fn eval_jet(&self, u: &[Jet3]) -> Vec<Jet3> {
        self.map(u)
    }
}

fn check_input(f: &dyn SmoothMap, u: &[f64]) -> Result<()> {
    if u.len() != f.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: f.input_dim(),
            got: u.len(),
        });
    }
    if !f.domain().contains(u) {
        return Err(Error::OutsideDomain { point: u.to_vec() });
    }
    Ok(())
}

/// Plain evaluation with domain and finiteness checks.
pub fn evaluate(f: &dyn SmoothMap, u: &[f64]) -> Result<Vec<f64>> {
    check_input(f, u)?;
    let out = f.eval_f64(u);
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(out)
}

/// Third-order jets of every output component of `f` at `u`.
pub fn jet_eval(f: &dyn SmoothMap, u: &[f64]) -> Result<Vec<Jet3>> {
    check_input(f, u)?;
    if u.len() > MAX_VARS {
        return Err(Error::InvalidParameter(format!(
            "{} parameters exceed the jet capacity of {MAX_VARS}",
            u.len()
        )));
    }
    let out = f.eval_jet(&Jet3::variables(u));
    if out.iter().any(|j| !j.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(out)
}

/// Central finite-difference derivatives of a vector-valued function.
///
/// Entry `[c][idx]` holds component `c`, where `idx` enumerates the index
/// tuples of the requested order in lexicographic order (full tables, not just
/// the canonical entries). The stencils use half steps so that no evaluation
/// strays further than `1.5 * step` from `u`.
pub fn central_differences<F>(f: F, u: &[f64], order: u8, step: f64) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    if !(1..=3).contains(&order) {
        return Err(Error::InvalidParameter(format!("finite-difference order {order}")));
    }
    let n = u.len();
    let half = 0.5 * step;
    // Sum over sign patterns of the product of the per-axis stencil signs.
    let stencil = |axes: &[usize]| -> Result<Vec<f64>> {
        let mut acc: Option<Vec<f64>> = None;
        for mask in 0..(1u32 << axes.len()) {
            let mut p = u.to_vec();
            let mut sign = 1.0;
            for (bit, &ax) in axes.iter().enumerate() {
                if mask & (1 << bit) != 0 {
                    p[ax] += half;
                } else {
                    p[ax] -= half;
                    sign = -sign;
                }
            }
            let y = f(&p)?;
            match acc.as_mut() {
                None => acc = Some(y.iter().map(|v| sign * v).collect()),
                Some(a) => {
                    for (ai, yi) in a.iter_mut().zip(&y) {
                        *ai += sign * yi;
                    }
                }
            }
        }
        let scale = step.powi(axes.len() as i32);
        Ok(acc.unwrap_or_default().into_iter().map(|v| v / scale).collect())
    };
    let tuples: Vec<Vec<usize>> = match order {
        1 => (0..n).map(|i| vec![i]).collect(),
        2 => (0..n).flat_map(|i| (0..n).map(move |j| vec![i, j])).collect(),
        _ => (0..n)
            .flat_map(|i| (0..n).flat_map(move |j| (0..n).map(move |k| vec![i, j, k])))
            .collect(),
    };
    let mut per_tuple = Vec::with_capacity(tuples.len());
    for t in &tuples {
        per_tuple.push(stencil(t)?);
    }
    let m = per_tuple.first().map_or(0, Vec::len);
    Ok((0..m)
        .map(|c| per_tuple.iter().map(|row| row[c]).collect())
        .collect())
}

/// The jet derivative entries of `order`, laid out as in [`central_differences`].
pub fn jet_derivatives(j: &Jet3, order: u8) -> Vec<f64> {
    let n = j.nvars();
    match order {
        1 => (0..n).map(|i| j.d1(i)).collect(),
        2 => (0..n).flat_map(|i| (0..n).map(move |k| j.d2(i, k))).collect(),
        _ => (0..n)
            .flat_map(|i| (0..n).flat_map(move |a| (0..n).map(move |b| j.d3(i, a, b))))
            .collect(),
    }
}

/// Largest absolute gap between jet derivatives of `order` and central
/// finite differences taken with the step from [`FD_STEPS`].
pub fn fd_check(f: &dyn SmoothMap, u: &[f64], order: u8) -> Result<f64> {
    if !(1..=3).contains(&order) {
        return Err(Error::InvalidParameter(format!("finite-difference order {order}")));
    }
    let step = FD_STEPS[order as usize - 1];
    check_input(f, u)?;
    let margin = 2.0 * step;
    if f.domain().margin(u) < margin {
        return Err(Error::MarginViolated {
            point: u.to_vec(),
            margin,
        });
    }
    let jets = jet_eval(f, u)?;
    let fd = central_differences(|p| evaluate(f, p), u, order, step)?;
    let mut worst = 0.0f64;
    for (jet, approx) in jets.iter().zip(&fd) {
        for (a, b) in jet_derivatives(jet, order).iter().zip(approx) {
            worst = worst.max((a - b).abs());
        }
    }
    Ok(worst)
}
