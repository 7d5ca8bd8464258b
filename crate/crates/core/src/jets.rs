//! Truncated multivariate Taylor arithmetic in the three formal variables
//! `(alpha, a, abar)`.
//!
//! A [`Jet`] of order `N` stores the normalized Taylor coefficients
//! `d^(i+j+k) f / (d alpha^i d a^j d abar^k) / (i! j! k!)` for every multi-index
//! with `i + j + k <= N`. With this normalization a product of two jets is a
//! plain truncated Cauchy product, and smooth univariate functions are applied
//! by composing their Taylor series with the nilpotent part of the argument.
//!
//! `a` and `abar` are independent variables here (Wirtinger style). Whether a
//! computed jet is consistent with `abar = conj(a)` is something callers test,
//! never something this module assumes.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::OnceLock;

use thiserror::Error;

use crate::params::ModelParams;
use crate::C64;

/// Highest jet order with a precomputed multiplication table.
pub const MAX_ORDER: usize = 12;

/// Default order used by the coefficient cascade.
pub const DEFAULT_ORDER: usize = 4;

/// Principal-branch operations reject values this close (relative) to the
/// negative real axis.
pub const BRANCH_CUT_GUARD: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum JetError {
    #[error("jet orders differ ({0} vs {1})")]
    OrderMismatch(usize, usize),
    #[error("jet order {0} exceeds the supported maximum {MAX_ORDER}")]
    OrderTooHigh(usize),
    #[error("seed order must be at least 1")]
    ZeroSeedOrder,
    #[error("cannot differentiate an order-0 jet")]
    NoPartials,
    #[error("division by a jet whose value slot is zero")]
    ZeroDivisor,
    #[error("cot evaluated where sin vanishes (value {0})")]
    CotSingular(f64),
    #[error("principal branch undefined at {0} (on or near the negative real axis)")]
    BranchCut(C64),
    #[error("operation {op} expects {expected} argument(s), got {got}")]
    Arity {
        op: &'static str,
        expected: usize,
        got: usize,
    },
}

/// One of the three formal variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    Alpha,
    A,
    Abar,
}

impl Var {
    pub const ALL: [Var; 3] = [Var::Alpha, Var::A, Var::Abar];

    fn unit(self) -> [usize; 3] {
        match self {
            Var::Alpha => [1, 0, 0],
            Var::A => [0, 1, 0],
            Var::Abar => [0, 0, 1],
        }
    }

    fn slot(self) -> usize {
        match self {
            Var::Alpha => 0,
            Var::A => 1,
            Var::Abar => 2,
        }
    }
}

/// Multi-index bookkeeping for one order.
struct Layout {
    order: usize,
    indices: Vec<[usize; 3]>,
    /// Dense lookup `(i, j, k) -> position`, `usize::MAX` when `i+j+k > order`.
    lookup: Vec<usize>,
    /// `(out, lhs, rhs)` with `idx[lhs] + idx[rhs] == idx[out]`.
    products: Vec<(u32, u32, u32)>,
    /// Position of the index with `i_a` and `i_abar` exchanged.
    transpose: Vec<usize>,
}

impl Layout {
    fn build(order: usize) -> Self {
        let side = order + 1;
        let mut indices = Vec::new();
        for deg in 0..=order {
            for i in (0..=deg).rev() {
                for j in (0..=deg - i).rev() {
                    indices.push([i, j, deg - i - j]);
                }
            }
        }
        let mut lookup = vec![usize::MAX; side * side * side];
        for (pos, m) in indices.iter().enumerate() {
            lookup[(m[0] * side + m[1]) * side + m[2]] = pos;
        }
        let at = |m: [usize; 3]| lookup[(m[0] * side + m[1]) * side + m[2]];
        let mut products = Vec::new();
        for (p, mp) in indices.iter().enumerate() {
            for (q, mq) in indices.iter().enumerate() {
                let s = [mp[0] + mq[0], mp[1] + mq[1], mp[2] + mq[2]];
                if s[0] + s[1] + s[2] <= order {
                    products.push((at(s) as u32, p as u32, q as u32));
                }
            }
        }
        products.sort_unstable();
        let transpose = indices.iter().map(|m| at([m[0], m[2], m[1]])).collect();
        Layout {
            order,
            indices,
            lookup,
            products,
            transpose,
        }
    }

    fn position(&self, m: [usize; 3]) -> Option<usize> {
        if m.iter().sum::<usize>() > self.order {
            return None;
        }
        let side = self.order + 1;
        Some(self.lookup[(m[0] * side + m[1]) * side + m[2]])
    }
}

fn layout(order: usize) -> &'static Layout {
    static LAYOUTS: [OnceLock<Layout>; MAX_ORDER + 1] = [const { OnceLock::new() }; MAX_ORDER + 1];
    LAYOUTS[order].get_or_init(|| Layout::build(order))
}

/// Number of coefficient slots of a jet of the given order, `C(order + 3, 3)`.
pub fn slot_count(order: usize) -> usize {
    (order + 1) * (order + 2) * (order + 3) / 6
}

/// Truncated Taylor expansion of a complex scalar in `(alpha, a, abar)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    order: usize,
    coeffs: Vec<C64>,
}

impl Jet {
    pub fn constant(order: usize, value: C64) -> Result<Self, JetError> {
        if order > MAX_ORDER {
            return Err(JetError::OrderTooHigh(order));
        }
        let mut coeffs = vec![C64::new(0.0, 0.0); slot_count(order)];
        coeffs[0] = value;
        Ok(Jet { order, coeffs })
    }

    /// Coordinate jet of `var` at `value`.
    pub fn variable(order: usize, var: Var, value: C64) -> Result<Self, JetError> {
        let mut jet = Self::constant(order, value)?;
        if order >= 1 {
            let pos = layout(order).position(var.unit()).unwrap();
            jet.coeffs[pos] = C64::new(1.0, 0.0);
        }
        Ok(jet)
    }

    fn zeros_like(&self) -> Self {
        Jet {
            order: self.order,
            coeffs: vec![C64::new(0.0, 0.0); self.coeffs.len()],
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn value(&self) -> C64 {
        self.coeffs[0]
    }

    /// Normalized coefficient at multi-index `(i_alpha, i_a, i_abar)`; zero
    /// beyond the stored order.
    pub fn coeff(&self, m: [usize; 3]) -> C64 {
        layout(self.order)
            .position(m)
            .map_or(C64::new(0.0, 0.0), |p| self.coeffs[p])
    }

    /// Mixed partial derivative (coefficient times the factorials).
    pub fn derivative(&self, m: [usize; 3]) -> C64 {
        let fact = |n: usize| (1..=n).product::<usize>() as f64;
        self.coeff(m) * (fact(m[0]) * fact(m[1]) * fact(m[2]))
    }

    /// First partial with respect to `var`, read from the order-1 slot.
    pub fn first_partial(&self, var: Var) -> C64 {
        self.coeff(var.unit())
    }

    /// Iterator over `(multi-index, normalized coefficient)`.
    pub fn iter(&self) -> impl Iterator<Item = ([usize; 3], C64)> + '_ {
        layout(self.order)
            .indices
            .iter()
            .copied()
            .zip(self.coeffs.iter().copied())
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    fn same_order(&self, other: &Jet) -> Result<(), JetError> {
        if self.order == other.order {
            Ok(())
        } else {
            Err(JetError::OrderMismatch(self.order, other.order))
        }
    }

    pub fn checked_add(&self, other: &Jet) -> Result<Jet, JetError> {
        self.same_order(other)?;
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(x, y)| x + y).collect();
        Ok(Jet {
            order: self.order,
            coeffs,
        })
    }

    pub fn checked_sub(&self, other: &Jet) -> Result<Jet, JetError> {
        self.same_order(other)?;
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(x, y)| x - y).collect();
        Ok(Jet {
            order: self.order,
            coeffs,
        })
    }

    pub fn checked_mul(&self, other: &Jet) -> Result<Jet, JetError> {
        self.same_order(other)?;
        let mut out = self.zeros_like();
        for &(o, p, q) in &layout(self.order).products {
            out.coeffs[o as usize] += self.coeffs[p as usize] * other.coeffs[q as usize];
        }
        Ok(out)
    }

    pub fn checked_div(&self, other: &Jet) -> Result<Jet, JetError> {
        self.same_order(other)?;
        self.checked_mul(&other.recip()?)
    }

    pub fn scale(&self, k: f64) -> Jet {
        self.map(|c| c * k)
    }

    pub fn scale_complex(&self, k: C64) -> Jet {
        self.map(|c| c * k)
    }

    pub fn add_scalar(&self, k: C64) -> Jet {
        let mut out = self.clone();
        out.coeffs[0] += k;
        out
    }

    fn map(&self, f: impl Fn(C64) -> C64) -> Jet {
        Jet {
            order: self.order,
            coeffs: self.coeffs.iter().map(|&c| f(c)).collect(),
        }
    }

    /// `sum_k series[k] * (self - value)^k`, truncated at the jet order.
    /// `series` must hold `order + 1` Taylor coefficients of the outer function
    /// at the value slot.
    fn compose(&self, series: &[C64]) -> Jet {
        debug_assert_eq!(series.len(), self.order + 1);
        let mut delta = self.clone();
        delta.coeffs[0] = C64::new(0.0, 0.0);
        let mut acc = Jet::constant(self.order, series[self.order]).unwrap();
        for k in (0..self.order).rev() {
            acc = acc.checked_mul(&delta).unwrap();
            acc.coeffs[0] += series[k];
        }
        acc
    }

    pub fn recip(&self) -> Result<Jet, JetError> {
        let v = self.value();
        if v.norm() == 0.0 || !v.is_finite() {
            return Err(JetError::ZeroDivisor);
        }
        let inv = v.inv();
        let mut series = Vec::with_capacity(self.order + 1);
        let mut term = inv;
        for _ in 0..=self.order {
            series.push(term);
            term = -term * inv;
        }
        Ok(self.compose(&series))
    }

    pub fn sin(&self) -> Jet {
        let v = self.value();
        self.compose(&trig_series(v.sin(), v.cos(), self.order))
    }

    pub fn cos(&self) -> Jet {
        let v = self.value();
        // d/dx cos = -sin, so cos behaves like sin with a quarter-phase shift.
        self.compose(&trig_series(v.cos(), -v.sin(), self.order))
    }

    pub fn cot(&self) -> Result<Jet, JetError> {
        let s = self.value().sin();
        if s.norm() <= 1e-15 {
            return Err(JetError::CotSingular(self.value().re));
        }
        self.cos().checked_div(&self.sin())
    }

    /// Principal square root; rejects values on or near the branch cut.
    pub fn sqrt(&self) -> Result<Jet, JetError> {
        self.powf(0.5)
    }

    /// Principal power with a real exponent. Integer exponents are allowed
    /// everywhere except at a zero value slot with a negative exponent.
    pub fn powf(&self, p: f64) -> Result<Jet, JetError> {
        let v = self.value();
        let integral = p.fract() == 0.0;
        if v.norm() == 0.0 {
            if integral && p >= 0.0 {
                return Ok(self.powi(p as u32));
            }
            return Err(JetError::ZeroDivisor);
        }
        if !integral && v.re < 0.0 && v.im.abs() <= BRANCH_CUT_GUARD * v.norm() {
            return Err(JetError::BranchCut(v));
        }
        let mut series = Vec::with_capacity(self.order + 1);
        let mut binom = 1.0;
        for k in 0..=self.order {
            series.push(v.powf(p - k as f64) * binom);
            binom *= (p - k as f64) / (k as f64 + 1.0);
        }
        Ok(self.compose(&series))
    }

    pub fn powi(&self, n: u32) -> Jet {
        let mut acc = Jet::constant(self.order, C64::new(1.0, 0.0)).unwrap();
        for _ in 0..n {
            acc = acc.checked_mul(self).unwrap();
        }
        acc
    }

    /// Jet of the partial derivative with respect to `var`, one order lower.
    pub fn partial(&self, var: Var) -> Result<Jet, JetError> {
        if self.order == 0 {
            return Err(JetError::NoPartials);
        }
        let src = layout(self.order);
        let dst = layout(self.order - 1);
        let s = var.slot();
        let coeffs = dst
            .indices
            .iter()
            .map(|m| {
                let mut up = *m;
                up[s] += 1;
                self.coeffs[src.position(up).unwrap()] * (up[s] as f64)
            })
            .collect();
        Ok(Jet {
            order: self.order - 1,
            coeffs,
        })
    }

    /// Drop every coefficient above `order`.
    pub fn truncate(&self, order: usize) -> Jet {
        assert!(order <= self.order, "cannot raise jet order by truncation");
        let n = slot_count(order);
        Jet {
            order,
            coeffs: self.coeffs[..n].to_vec(),
        }
    }

    /// Jet of `(alpha, a, abar) -> conj(f(alpha, abar, a))` at the same
    /// conjugate-pair point: conjugate every coefficient and exchange the
    /// `a`/`abar` indices.
    pub fn swap_conjugate(&self) -> Jet {
        let lay = layout(self.order);
        let coeffs = lay.transpose.iter().map(|&src| self.coeffs[src].conj()).collect();
        Jet {
            order: self.order,
            coeffs,
        }
    }
}

fn trig_series(s: C64, c: C64, order: usize) -> Vec<C64> {
    // Derivatives of sin cycle through sin, cos, -sin, -cos.
    let cycle = [s, c, -s, -c];
    let mut out = Vec::with_capacity(order + 1);
    let mut fact = 1.0;
    for k in 0..=order {
        if k > 0 {
            fact *= k as f64;
        }
        out.push(cycle[k % 4] / fact);
    }
    out
}

impl fmt::Display for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Jet(order {})[", self.order)?;
        for (i, (m, c)) in self.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{:?}: {}", m, c)?;
        }
        write!(f, "]")
    }
}

// Operator sugar for code paths where orders are matched by construction.
// Mismatched orders panic; use the `checked_*` methods for untrusted input.
macro_rules! jet_binop {
    ($trait:ident, $method:ident, $checked:ident) => {
        impl $trait<&Jet> for &Jet {
            type Output = Jet;
            fn $method(self, rhs: &Jet) -> Jet {
                self.$checked(rhs).expect("jet order mismatch")
            }
        }
        impl $trait<Jet> for Jet {
            type Output = Jet;
            fn $method(self, rhs: Jet) -> Jet {
                (&self).$method(&rhs)
            }
        }
        impl $trait<&Jet> for Jet {
            type Output = Jet;
            fn $method(self, rhs: &Jet) -> Jet {
                (&self).$method(rhs)
            }
        }
        impl $trait<Jet> for &Jet {
            type Output = Jet;
            fn $method(self, rhs: Jet) -> Jet {
                self.$method(&rhs)
            }
        }
    };
}

jet_binop!(Add, add, checked_add);
jet_binop!(Sub, sub, checked_sub);
jet_binop!(Mul, mul, checked_mul);

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.map(|c| -c)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        -&self
    }
}

impl Mul<f64> for &Jet {
    type Output = Jet;
    fn mul(self, k: f64) -> Jet {
        self.scale(k)
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, k: f64) -> Jet {
        self.scale(k)
    }
}

impl Add<f64> for &Jet {
    type Output = Jet;
    fn add(self, k: f64) -> Jet {
        self.add_scalar(C64::new(k, 0.0))
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(self, k: f64) -> Jet {
        self.add_scalar(C64::new(k, 0.0))
    }
}

impl Sub<f64> for &Jet {
    type Output = Jet;
    fn sub(self, k: f64) -> Jet {
        self.add_scalar(C64::new(-k, 0.0))
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(self, k: f64) -> Jet {
        self.add_scalar(C64::new(-k, 0.0))
    }
}

/// Elementary operations accepted by [`apply`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum JetOp {
    Add,
    Sub,
    Mul,
    Div,
    Sin,
    Cos,
    Cot,
    Sqrt,
    Power(f64),
    Scale(f64),
}

impl JetOp {
    fn arity(self) -> usize {
        match self {
            JetOp::Add | JetOp::Sub | JetOp::Mul | JetOp::Div => 2,
            _ => 1,
        }
    }
}

/// Checked dispatch over [`JetOp`].
pub fn apply(op: JetOp, args: &[&Jet]) -> Result<Jet, JetError> {
    if args.len() != op.arity() {
        return Err(JetError::Arity {
            op: match op {
                JetOp::Add => "add",
                JetOp::Sub => "sub",
                JetOp::Mul => "mul",
                JetOp::Div => "div",
                JetOp::Sin => "sin",
                JetOp::Cos => "cos",
                JetOp::Cot => "cot",
                JetOp::Sqrt => "sqrt",
                JetOp::Power(_) => "power",
                JetOp::Scale(_) => "scale",
            },
            expected: op.arity(),
            got: args.len(),
        });
    }
    let x = args[0];
    match op {
        JetOp::Add => x.checked_add(args[1]),
        JetOp::Sub => x.checked_sub(args[1]),
        JetOp::Mul => x.checked_mul(args[1]),
        JetOp::Div => x.checked_div(args[1]),
        JetOp::Sin => Ok(x.sin()),
        JetOp::Cos => Ok(x.cos()),
        JetOp::Cot => x.cot(),
        JetOp::Sqrt => x.sqrt(),
        JetOp::Power(p) => x.powf(p),
        JetOp::Scale(k) => Ok(x.scale(k)),
    }
}

/// Where the coefficient functions are evaluated. `abar` is normally
/// `conj(a)` but is kept independent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalPoint {
    pub alpha: f64,
    pub a: C64,
    pub abar: C64,
    pub params: ModelParams,
}

impl EvalPoint {
    pub fn conjugate_pair(alpha: f64, a: C64, params: ModelParams) -> Self {
        EvalPoint {
            alpha,
            a,
            abar: a.conj(),
            params,
        }
    }

    /// The point `(alpha, abar, a)`.
    pub fn swapped(&self) -> Self {
        EvalPoint {
            a: self.abar,
            abar: self.a,
            ..*self
        }
    }
}

/// Coordinate jets for `alpha`, `a` and `abar` at `point`.
pub fn seed(point: &EvalPoint, order: usize) -> Result<(Jet, Jet, Jet), JetError> {
    if order == 0 {
        return Err(JetError::ZeroSeedOrder);
    }
    Ok((
        Jet::variable(order, Var::Alpha, C64::new(point.alpha, 0.0))?,
        Jet::variable(order, Var::A, point.a)?,
        Jet::variable(order, Var::Abar, point.abar)?,
    ))
}
