//! The coefficient functions `t1 .. t13` of `(alpha, a, abar)`.
//!
//! Each coefficient is produced as a [`Jet`]. Partial derivatives of lower
//! coefficients are read from jets evaluated one order higher and then
//! differentiated, so a value-only request for `t12` walks the cascade down to
//! fourth-order jets of `t1`/`t2`:
//!
//! ```text
//! t1,t2 -> t3,t4 -> t5,t6 -> t7,t8 -> t9,t10 -> t11 -> t12,t13
//! ```
//!
//! The overlined coefficient is `tbar_i(alpha, a, abar) = conj(t_i(alpha,
//! conj abar, conj a))`, the holomorphic extension of `conj(t_i)`. At
//! conjugate-pair points it is the [`Jet::swap_conjugate`] of `t_i` at the same
//! point; elsewhere it is taken from a mirror evaluator.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jets::{self, EvalPoint, Jet, JetError, Var};
use crate::C64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoeffError {
    #[error("coefficient index {0} is outside 1..=13")]
    InvalidIndex(u8),
    #[error("singular point: {0}")]
    SingularPoint(String),
    #[error("zero denominator: {0}")]
    ZeroDenominator(String),
    #[error("t{0} relies on a reconstructed reading of its printed formula and reconciliation is set to reject")]
    UnresolvedFormula(u8),
    #[error("t{index} at order {order} needs jets of order {needed}, above the configured maximum {max}")]
    OrderBudget {
        index: u8,
        order: usize,
        needed: usize,
        max: usize,
    },
    #[error(transparent)]
    Jet(#[from] JetError),
}

/// Sign in front of the square root in `t11`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }

    pub fn flipped(self) -> Branch {
        match self {
            Branch::Plus => Branch::Minus,
            Branch::Minus => Branch::Plus,
        }
    }
}

/// Whether evaluation may proceed through coefficients whose printed form had
/// to be reconstructed (the unbalanced braces in `t10`, the alternate `t9`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reconciliation {
    #[default]
    Assume,
    Reject,
}

/// Reading of the last term of `t9`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum T9Mode {
    /// `conj(a t1) * d t6 / d abar`, literally as printed.
    #[default]
    AsPrinted,
    /// `conj(a t1) * d t7 / d abar`, parallel to the preceding `t7` terms.
    Alternate,
}

impl fmt::Display for T9Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            T9Mode::AsPrinted => "as_printed",
            T9Mode::Alternate => "alternate",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoeffOptions {
    pub reconciliation: Reconciliation,
    pub t9_mode: T9Mode,
    /// Minimum distance of `sin alpha` from 0 and of `sin^2 alpha` from 2/3.
    pub sing_guard: f64,
    /// Minimum magnitude of `t9` for `t11`, and of the `t11` discriminant.
    pub zero_guard: f64,
    /// Highest jet order the cascade may allocate.
    pub max_order: usize,
}

impl Default for CoeffOptions {
    fn default() -> Self {
        CoeffOptions {
            reconciliation: Reconciliation::Assume,
            t9_mode: T9Mode::AsPrinted,
            sing_guard: 1e-6,
            zero_guard: 1e-12,
            max_order: jets::DEFAULT_ORDER,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CoeffId {
    pub index: u8,
    pub conjugated: bool,
    pub branch: Branch,
}

impl CoeffId {
    pub fn new(index: u8) -> Result<Self, CoeffError> {
        if !(1..=13).contains(&index) {
            return Err(CoeffError::InvalidIndex(index));
        }
        Ok(CoeffId {
            index,
            conjugated: false,
            branch: Branch::Plus,
        })
    }

    pub fn conjugated(mut self) -> Self {
        self.conjugated = true;
        self
    }

    pub fn with_branch(mut self, branch: Branch) -> Self {
        self.branch = branch;
        self
    }

    /// Extra jet orders the cascade consumes below this coefficient.
    pub fn depth(&self) -> usize {
        match self.index {
            1 | 2 => 0,
            3..=6 => 1,
            7 | 8 => 2,
            9..=11 => 3,
            _ => 4,
        }
    }
}

/// Common jets at one order.
struct Base {
    alpha: Jet,
    a: Jet,
    abar: Jet,
    sin: Jet,
    cos: Jet,
    cot: Jet,
    /// `1 / sin^2 alpha`
    csc2: Jet,
    /// `-2 + 3 sin^2 alpha`
    kahler_den: Jet,
}

/// Memoizing evaluator bound to one point. Not shared between threads; build
/// one per point.
pub struct CoeffEvaluator {
    point: EvalPoint,
    opts: CoeffOptions,
    base: HashMap<usize, std::rc::Rc<Base>>,
    cache: HashMap<(u8, Branch, usize), Jet>,
    /// Evaluator at `(alpha, conj abar, conj a)`, for off-pair points.
    mirror: Option<Box<CoeffEvaluator>>,
}

impl CoeffEvaluator {
    pub fn new(point: EvalPoint, opts: CoeffOptions) -> Result<Self, CoeffError> {
        let s = point.alpha.sin();
        if s.abs() <= opts.sing_guard {
            return Err(CoeffError::SingularPoint(format!(
                "sin(alpha) = {s:e} at alpha = {}",
                point.alpha
            )));
        }
        Ok(CoeffEvaluator {
            point,
            opts,
            base: HashMap::new(),
            cache: HashMap::new(),
            mirror: None,
        })
    }

    pub fn point(&self) -> &EvalPoint {
        &self.point
    }

    pub fn eval(&mut self, id: CoeffId, order: usize) -> Result<Jet, CoeffError> {
        if !(1..=13).contains(&id.index) {
            return Err(CoeffError::InvalidIndex(id.index));
        }
        let needed = order + id.depth();
        if needed > self.opts.max_order.min(jets::MAX_ORDER) {
            return Err(CoeffError::OrderBudget {
                index: id.index,
                order,
                needed,
                max: self.opts.max_order.min(jets::MAX_ORDER),
            });
        }
        if id.index != 2 {
            let s2 = self.point.alpha.sin().powi(2);
            if (s2 - 2.0 / 3.0).abs() <= self.opts.sing_guard {
                return Err(CoeffError::SingularPoint(format!(
                    "sin^2(alpha) = {s2} is within {} of 2/3",
                    self.opts.sing_guard
                )));
            }
        }
        if id.conjugated {
            self.bar(id.index, id.branch, order)
        } else {
            self.get(id.index, id.branch, order)
        }
    }

    /// Jet of `tbar_index`.
    fn bar(&mut self, index: u8, branch: Branch, n: usize) -> Result<Jet, CoeffError> {
        let p = self.point;
        if p.abar == p.a.conj() {
            return Ok(self.get(index, branch, n)?.swap_conjugate());
        }
        if self.mirror.is_none() {
            let q = EvalPoint {
                a: p.abar.conj(),
                abar: p.a.conj(),
                ..p
            };
            self.mirror = Some(Box::new(CoeffEvaluator::new(q, self.opts)?));
        }
        let m = self.mirror.as_mut().expect("mirror just built");
        Ok(m.get(index, branch, n)?.swap_conjugate())
    }

    fn base(&mut self, n: usize) -> Result<std::rc::Rc<Base>, CoeffError> {
        if let Some(b) = self.base.get(&n) {
            return Ok(b.clone());
        }
        // Order-0 requests still go through seeded jets of order >= 1 so that
        // the coordinate slots exist; truncate at the end.
        let seed_order = n.max(1);
        let (alpha, a, abar) = jets::seed(&self.point, seed_order)?;
        let (alpha, a, abar) = (alpha.truncate(n), a.truncate(n), abar.truncate(n));
        let sin = alpha.sin();
        let cos = alpha.cos();
        let cot = alpha.cot()?;
        let sin2 = &sin * &sin;
        let csc2 = sin2.recip()?;
        let kahler_den = sin2 * 3.0 - 2.0;
        let b = std::rc::Rc::new(Base {
            alpha,
            a,
            abar,
            sin,
            cos,
            cot,
            csc2,
            kahler_den,
        });
        self.base.insert(n, b.clone());
        Ok(b)
    }

    fn get(&mut self, index: u8, branch: Branch, n: usize) -> Result<Jet, CoeffError> {
        let key_branch = if index >= 11 { branch } else { Branch::Plus };
        if let Some(j) = self.cache.get(&(index, key_branch, n)) {
            return Ok(j.clone());
        }
        let jet = match index {
            1 => self.t1(n)?,
            2 => self.t2(n)?,
            3 => self.t3(n)?,
            4 => self.t4(n)?,
            5 => self.t5(n)?,
            6 => self.t6(n)?,
            7 => self.t7(n)?,
            8 => self.t8(n)?,
            9 => self.t9(n)?,
            10 => self.t10(n)?,
            11 => self.t11(n, branch)?,
            12 => self.t12(n, branch)?,
            13 => self.t13(n, branch)?,
            other => return Err(CoeffError::InvalidIndex(other)),
        };
        self.cache.insert((index, key_branch, n), jet.clone());
        Ok(jet)
    }

    fn rho(&self) -> f64 {
        self.point.params.rho
    }

    fn b(&self) -> f64 {
        self.point.params.b
    }

    /// `a abar + rho/2 (-2 + 3 sin^2 alpha)`.
    fn ricci(&mut self, n: usize) -> Result<Jet, CoeffError> {
        let bs = self.base(n)?;
        let rho = self.rho();
        Ok(&bs.a * &bs.abar + &bs.kahler_den * (0.5 * rho))
    }

    fn t1(&mut self, n: usize) -> Result<Jet, CoeffError> {
        let bs = self.base(n)?;
        let b = self.b();
        let s2 = &bs.sin * &bs.sin;
        let num = &s2 * (12.0 * b) - 4.0 * b + &bs.a * 4.0 + &bs.a * &s2 * 3.0;
        Ok((num * &bs.cot).checked_div(&bs.kahler_den)?)
    }

    fn t2(&mut self, n: usize) -> Result<Jet, CoeffError> {
        let bs = self.base(n)?;
        let (b, rho) = (self.b(), self.rho());
        Ok(&bs.a * (&bs.abar - b) * &bs.cot * 2.0 + &bs.sin * &bs.cos * (1.5 * rho))
    }

    fn t3(&mut self, n: usize) -> Result<Jet, CoeffError> {
        let b = self.b();
        let t1_up = self.get(1, Branch::Plus, n + 1)?;
        let t2_up = self.get(2, Branch::Plus, n + 1)?;
        let bs = self.base(n)?;
        let (a, ab, cot) = (&bs.a, &bs.abar, &bs.cot);
        let t1 = t1_up.truncate(n);
        let t2 = t2_up.truncate(n);
        let t2b = self.bar(2, Branch::Plus, n)?;
        let dt1_dal = t1_up.partial(Var::Alpha)?;
        let dt1_da = t1_up.partial(Var::A)?;
        let dt2_dal = t2_up.partial(Var::Alpha)?;
        let dt2_dab = t2_up.partial(Var::Abar)?;
        Ok(-(&t1 * &t2) - &t2 * (a - b) * cot + a * (ab - b) * &t1 * cot * 3.0
            - a * (ab + b) * dt1_dal
            - a * &t2 * dt1_da
            + (a + b) * dt2_dal
            + t2b * dt2_dab)
    }

    fn t4(&mut self, n: usize) -> Result<Jet, CoeffError> {
        let b = self.b();
        let t2 = self.get(2, Branch::Plus, n)?;
        let bs = self.base(n)?;
        let (a, ab, cot) = (&bs.a, &bs.abar, &bs.cot);
        let t1b_up = self.bar(1, Branch::Plus, n + 1)?;
        let t1b = t1b_up.truncate(n);
        let t2b = self.bar(2, Branch::Plus, n)?;
        let bracket = &t2 * cot - (a - b) * (ab - b) * cot * cot - (a - b) * (ab + b) * &bs.csc2;
        Ok(bracket * 2.0 + t1b * (a - b) * cot
            - (a + b) * t1b_up.partial(Var::Alpha)?
            - t2b * t1b_up.partial(Var::Abar)?)
    }

    fn t5(&mut self, n: usize) -> Result<Jet, CoeffError> {
        let t3 = self.get(3, Branch::Plus, n)?;
        let t4b = self.bar(4, Branch::Plus, n)?;
        let ricci = self.ricci(n)?;
        let bs = self.base(n)?;
        Ok(t3 * &bs.abar - t4b * ricci)
    }

    fn t6(&mut self, n: usize) -> Result<Jet, CoeffError> {
        let rho = self.rho();
        if rho == 0.0 {
            return Err(CoeffError::ZeroDenominator("rho = 0 in t6".into()));
        }
        let t5 = self.get(5, Branch::Plus, n)?;
        let ricci = self.ricci(n)?;
        let bs = self.base(n)?;
        let den = &bs.kahler_den * (0.5 * rho);
        Ok((-t5).checked_div(&den)? * ricci)
    }

    fn t7(&mut self, n: usize) -> Result<Jet, CoeffError> {
        let t3b = self.bar(3, Branch::Plus, n)?;
        let t6_up = self.get(6, Branch::Plus, n + 1)?;
        Ok(-t3b + t6_up.partial(Var::A)?)
    }

    fn t8(&mut self, n: usize) -> Result<Jet, CoeffError> {
        let b = self.b();
        let t6_up = self.get(6, Branch::Plus, n + 1)?;
        let t1 = self.get(1, Branch::Plus, n)?;
        let t2b = self.bar(2, Branch::Plus, n)?;
        let bs = self.base(n)?;
        let (a, cot) = (&bs.a, &bs.cot);
        let t6 = t6_up.truncate(n);
        Ok(t6 * (a - b) * cot * (-3.0)
            + (a + b) * t6_up.partial(Var::Alpha)?
            + a * t1 * t6_up.partial(Var::A)?
            + t2b * t6_up.partial(Var::Abar)?)
    }

    fn reconciled(&self, index: u8) -> Result<(), CoeffError> {
        match self.opts.reconciliation {
            Reconciliation::Assume => Ok(()),
            Reconciliation::Reject => Err(CoeffError::UnresolvedFormula(index)),
        }
    }

    fn t9(&mut self, n: usize) -> Result<Jet, CoeffError> {
        if self.opts.t9_mode == T9Mode::Alternate {
            self.reconciled(9)?;
        }
        let b = self.b();
        let t6_up = self.get(6, Branch::Plus, n + 1)?;
        let t7_up = self.get(7, Branch::Plus, n + 1)?;
        let t8b = self.bar(8, Branch::Plus, n)?;
        let t1b = self.bar(1, Branch::Plus, n)?;
        let t2 = self.get(2, Branch::Plus, n)?;
        let bs = self.base(n)?;
        let (ab, cot) = (&bs.abar, &bs.cot);
        let t6 = t6_up.truncate(n);
        let t7 = t7_up.truncate(n);
        let last = match self.opts.t9_mode {
            T9Mode::AsPrinted => t6_up.partial(Var::Abar)?,
            T9Mode::Alternate => t7_up.partial(Var::Abar)?,
        };
        let inner = -(ab - b) * &t7 * cot
            + (ab + b) * t7_up.partial(Var::Alpha)?
            + t2 * t7_up.partial(Var::A)?
            + ab * t1b * last;
        Ok(t6 * inner - t7 * t8b)
    }

    fn t10(&mut self, n: usize) -> Result<Jet, CoeffError> {
        self.reconciled(10)?;
        let b = self.b();
        let t3_up = self.get(3, Branch::Plus, n + 1)?;
        let t7_up = self.get(7, Branch::Plus, n + 1)?;
        let t8_up = self.get(8, Branch::Plus, n + 1)?;
        let t6 = self.get(6, Branch::Plus, n)?;
        let t1b = self.bar(1, Branch::Plus, n)?;
        let t2 = self.get(2, Branch::Plus, n)?;
        let bs = self.base(n)?;
        let (a, ab, cot) = (&bs.a, &bs.abar, &bs.cot);
        let t2b = self.bar(2, Branch::Plus, n)?;
        let t3 = t3_up.truncate(n);
        let t7 = t7_up.truncate(n);
        let t8 = t8_up.truncate(n);
        let t7b = self.bar(7, Branch::Plus, n)?;
        let t8b = self.bar(8, Branch::Plus, n)?;
        let first = &t3 * &t7 - &t7 * t7b - (ab - b) * &t8 * cot * 4.0
            + (ab + b) * t8_up.partial(Var::Alpha)?
            + &t2 * t8_up.partial(Var::A)?
            + ab * t1b * t8_up.partial(Var::Abar)?;
        let last = t2b * cot * 3.0 - (ab - b) * (a + b) * &bs.csc2 * 3.0 - (ab - b) * (a - b) * cot * cot * 3.0
            + t3_up.partial(Var::A)?
            - t7_up.partial(Var::Abar)?;
        Ok(&t6 * first - &t8 * t8b - &t6 * &t6 * last)
    }

    fn t11(&mut self, n: usize, branch: Branch) -> Result<Jet, CoeffError> {
        let t9 = self.get(9, Branch::Plus, n)?;
        let t10 = self.get(10, Branch::Plus, n)?;
        let t6 = self.get(6, Branch::Plus, n)?;
        if t9.value().norm() <= self.opts.zero_guard {
            return Err(CoeffError::ZeroDenominator(format!(
                "|t9| = {:e} in t11",
                t9.value().norm()
            )));
        }
        let disc = &t10 * &t10 - &t9 * self.bar(9, Branch::Plus, n)? * &t6 * 4.0;
        if disc.value().norm() <= self.opts.zero_guard {
            return Err(CoeffError::ZeroDenominator(
                "t11 discriminant vanishes (double root)".into(),
            ));
        }
        let root = discriminant_root(&disc)?;
        let num = -t10 + root * branch.sign();
        Ok(num.checked_div(&(t9 * 2.0))?)
    }

    fn t12(&mut self, n: usize, branch: Branch) -> Result<Jet, CoeffError> {
        let b = self.b();
        let t11_up = self.get(11, branch, n + 1)?;
        let t6 = self.get(6, Branch::Plus, n)?;
        let t7 = self.get(7, Branch::Plus, n)?;
        let t8 = self.get(8, Branch::Plus, n)?;
        let t1 = self.get(1, Branch::Plus, n)?;
        let t2b = self.bar(2, Branch::Plus, n)?;
        let bs = self.base(n)?;
        let a = &bs.a;
        let t11 = t11_up.truncate(n);
        let t11b = self.bar(11, branch, n)?;
        let d_al = t11_up.partial(Var::Alpha)?;
        let d_a = t11_up.partial(Var::A)?;
        let d_ab = t11_up.partial(Var::Abar)?;
        let along = (a + b) * d_al + a * t1 * &d_a + t2b * d_ab;
        Ok(t7 * &t11 + t8 - t6 * d_a - t11b * along)
    }

    fn t13(&mut self, n: usize, branch: Branch) -> Result<Jet, CoeffError> {
        let b = self.b();
        let t11_up = self.get(11, branch, n + 1)?;
        let t3 = self.get(3, Branch::Plus, n)?;
        let t1b = self.bar(1, Branch::Plus, n)?;
        let t2 = self.get(2, Branch::Plus, n)?;
        let bs = self.base(n)?;
        let (ab, cot) = (&bs.abar, &bs.cot);
        let t11 = t11_up.truncate(n);
        let t11b = self.bar(11, branch, n)?;
        let d_al = t11_up.partial(Var::Alpha)?;
        let d_a = t11_up.partial(Var::A)?;
        let d_ab = t11_up.partial(Var::Abar)?;
        let along = (ab + b) * d_al + t2 * d_a + t11b * &d_ab + ab * t1b * &d_ab;
        Ok(t3 + (ab - b) * &t11 * cot * 3.0 - along)
    }

    #[allow(dead_code)]
    fn alpha_jet(&mut self, n: usize) -> Result<Jet, CoeffError> {
        Ok(self.base(n)?.alpha.clone())
    }
}

/// Square root of the `t11` discriminant with the branch cut placed away from
/// the value: principal for `Re >= 0`, `i sqrt(-disc)` otherwise. At
/// conjugate-pair points the discriminant is real and, where real solutions
/// exist, negative, so the principal cut would sit exactly on the value.
fn discriminant_root(disc: &Jet) -> Result<Jet, JetError> {
    if disc.value().re >= 0.0 {
        disc.sqrt()
    } else {
        Ok((-disc).sqrt()?.scale_complex(C64::new(0.0, 1.0)))
    }
}

/// Evaluate one coefficient as a jet of the requested order.
pub fn eval_t(id: CoeffId, point: &EvalPoint, order: usize, opts: &CoeffOptions) -> Result<Jet, CoeffError> {
    CoeffEvaluator::new(*point, *opts)?.eval(id, order)
}

/// `-6b (a - abar)(5 + 3 cos 2alpha) sin^2 alpha / (1 + 3 cos 2alpha)^2`.
pub fn t4_skew_closed_form(point: &EvalPoint) -> C64 {
    let (al, b) = (point.alpha, point.params.b);
    let c2 = (2.0 * al).cos();
    let s2 = al.sin().powi(2);
    -6.0 * b * (point.a - point.abar) * (5.0 + 3.0 * c2) * s2 / (1.0 + 3.0 * c2).powi(2)
}

/// `t4 - tbar4 - closed form`, with `tbar4` evaluated by direct substitution
/// at `(alpha, abar, a)`.
pub fn t4_skew_residual(point: &EvalPoint, opts: &CoeffOptions) -> Result<C64, CoeffError> {
    let id = CoeffId::new(4)?;
    let t4 = eval_t(id, point, 0, opts)?.value();
    let t4_bar = eval_t(id, &point.swapped(), 0, opts)?.value();
    Ok(t4 - t4_bar - t4_skew_closed_form(point))
}

/// Both roots of the `t11` quadratic from given `t9`, `t10`, `t6` values.
pub fn t11_roots_from_parts(t9: C64, t10: C64, t6: C64, guard: f64) -> Result<(C64, C64), CoeffError> {
    if t9.norm() <= guard {
        return Err(CoeffError::ZeroDenominator(format!("|t9| = {:e}", t9.norm())));
    }
    let disc = t10 * t10 - 4.0 * t9 * t9.conj() * t6;
    let root = if disc.re >= 0.0 {
        disc.sqrt()
    } else {
        C64::new(0.0, 1.0) * (-disc).sqrt()
    };
    Ok(((-t10 + root) / (2.0 * t9), (-t10 - root) / (2.0 * t9)))
}

/// `(t11+, t11-)` at a point.
pub fn t11_roots(point: &EvalPoint, opts: &CoeffOptions) -> Result<(C64, C64), CoeffError> {
    let mut ev = CoeffEvaluator::new(*point, *opts)?;
    let id = CoeffId::new(11)?;
    let plus = ev.eval(id.with_branch(Branch::Plus), 0)?.value();
    let minus = ev.eval(id.with_branch(Branch::Minus), 0)?.value();
    Ok((plus, minus))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ModelParams;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn pt(alpha: f64, a: C64, rho: f64, b: f64) -> EvalPoint {
        EvalPoint::conjugate_pair(alpha, a, ModelParams::new(rho, b))
    }

    fn value(i: u8, p: &EvalPoint) -> C64 {
        eval_t(CoeffId::new(i).unwrap(), p, 0, &CoeffOptions::default())
            .unwrap()
            .value()
    }

    #[test]
    fn t1_vanishes_at_half_pi() {
        for b in [0.5, 1.0, 2.5] {
            let v = value(1, &pt(FRAC_PI_2, C64::new(0.3, -1.2), -3.0, b));
            assert!(v.norm() < 1e-14, "{v}");
        }
    }

    #[test]
    fn t2_vanishes_at_half_pi() {
        for rho in [-3.0, 1.0, 4.0] {
            let v = value(2, &pt(FRAC_PI_2, C64::new(0.7, 0.4), rho, 1.0));
            assert!(v.norm() < 1e-14, "{v}");
        }
    }

    #[test]
    fn t1_exact_value_at_quarter_pi() {
        // (-4 + 6 + 8 + 3) * cot(pi/4) / (-2 + 3/2) = -26
        let v = value(1, &pt(FRAC_PI_4, C64::new(2.0, 0.0), -3.0, 1.0));
        assert!((v - C64::new(-26.0, 0.0)).norm() < 1e-12, "{v}");
    }

    #[test]
    fn t2_zero_when_abar_equals_b_and_flat() {
        let v = value(2, &pt(FRAC_PI_4, C64::new(1.0, 0.0), 0.0, 1.0));
        assert!(v.norm() < 1e-15);
    }

    #[test]
    fn invalid_index_rejected() {
        assert_eq!(CoeffId::new(14).unwrap_err(), CoeffError::InvalidIndex(14));
        assert_eq!(CoeffId::new(0).unwrap_err(), CoeffError::InvalidIndex(0));
    }

    #[test]
    fn singular_set_is_guarded() {
        let alpha = (2.0f64 / 3.0).sqrt().asin();
        let p = pt(alpha, C64::new(0.2, 0.3), -3.0, 1.0);
        let err = eval_t(CoeffId::new(1).unwrap(), &p, 0, &CoeffOptions::default()).unwrap_err();
        assert!(matches!(err, CoeffError::SingularPoint(_)));
        // t2 has no such denominator
        assert!(eval_t(CoeffId::new(2).unwrap(), &p, 0, &CoeffOptions::default()).is_ok());
        let p0 = pt(1e-9, C64::new(0.2, 0.3), -3.0, 1.0);
        assert!(matches!(
            eval_t(CoeffId::new(2).unwrap(), &p0, 0, &CoeffOptions::default()),
            Err(CoeffError::SingularPoint(_))
        ));
    }

    #[test]
    fn t6_requires_nonflat() {
        let p = pt(0.7, C64::new(0.2, 0.3), 0.0, 1.0);
        let err = eval_t(CoeffId::new(6).unwrap(), &p, 0, &CoeffOptions::default()).unwrap_err();
        assert!(matches!(err, CoeffError::ZeroDenominator(_)));
    }

    #[test]
    fn reject_mode_blocks_t10() {
        let p = pt(0.7, C64::new(0.2, 0.3), -3.0, 1.0);
        let opts = CoeffOptions {
            reconciliation: Reconciliation::Reject,
            ..Default::default()
        };
        assert_eq!(
            eval_t(CoeffId::new(10).unwrap(), &p, 0, &opts).unwrap_err(),
            CoeffError::UnresolvedFormula(10)
        );
        // the printed t9 is usable, the alternate reading is not
        assert!(eval_t(CoeffId::new(9).unwrap(), &p, 0, &opts).is_ok());
        let alt = CoeffOptions {
            t9_mode: T9Mode::Alternate,
            ..opts
        };
        assert_eq!(
            eval_t(CoeffId::new(9).unwrap(), &p, 0, &alt).unwrap_err(),
            CoeffError::UnresolvedFormula(9)
        );
    }

    #[test]
    fn order_budget_enforced() {
        let p = pt(0.7, C64::new(0.2, 0.3), -3.0, 1.0);
        let err = eval_t(CoeffId::new(12).unwrap(), &p, 1, &CoeffOptions::default()).unwrap_err();
        assert!(matches!(err, CoeffError::OrderBudget { needed: 5, .. }));
    }

    #[test]
    fn t4_skew_vanishes_for_real_a() {
        let p = pt(0.8, C64::new(0.6, 0.0), -3.0, 1.0);
        let r = t4_skew_residual(&p, &CoeffOptions::default()).unwrap();
        assert!(r.norm() < 1e-12);
        assert!(t4_skew_closed_form(&p).norm() == 0.0);
    }

    #[test]
    fn t4_skew_at_half_pi() {
        // cos(2 alpha) = -1: closed form = -6 b (2i)(2) / 4 = -6 b i
        let p = pt(FRAC_PI_2, C64::new(1.0, 1.0), -3.0, 1.0);
        let closed = t4_skew_closed_form(&p);
        assert!((closed - C64::new(0.0, -6.0)).norm() < 1e-12);
        let r = t4_skew_residual(&p, &CoeffOptions::default()).unwrap();
        assert!(r.norm() <= 1e-12, "{r}");
    }

    #[test]
    fn t11_double_root_from_parts() {
        let (p, m) = t11_roots_from_parts(C64::new(1.0, 0.0), C64::new(-2.0, 0.0), C64::new(1.0, 0.0), 1e-12).unwrap();
        assert!((p - 1.0).norm() < 1e-15 && (m - 1.0).norm() < 1e-15);
    }

    #[test]
    fn t11_from_parts_solves_both_relations() {
        let (t9, t10, t6) = (C64::new(0.3, -1.1), C64::new(0.4, 0.0), C64::new(2.0, 0.0));
        let (p, m) = t11_roots_from_parts(t9, t10, t6, 1e-12).unwrap();
        for x in [p, m] {
            assert!((2.0 * (t9 * x).re + t10.re).abs() < 1e-14);
            assert!((x.norm_sqr() - 2.0).abs() < 1e-14);
        }
    }
}
