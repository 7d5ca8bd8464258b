//! One-dimensional reductions: the profile ODE
//!
//! ```text
//! da/dalpha = cot(alpha) / (conj(a) + b) * (-2b a + 2|a|^2 + 3 rho/2 sin^2 alpha)
//! ```
//!
//! the coefficient
//!
//! ```text
//! F(alpha) = (|a - b|^2 + 3 rho/2 sin^2 alpha) / |a + b|^2 * cot(alpha)
//! ```
//!
//! the potential `K` with `K'' = -F K'`, and its inverse `psi`, which solves
//! `psi'' = F(psi) psi'^2`.
//!
//! Every interpolant is a Chebyshev series fitted to integrator output taken
//! exactly at Chebyshev–Lobatto stations, so derivatives and grid stencils see
//! a smooth function rather than piecewise dense-output polynomials.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cheb::{lobatto_nodes, Cheb, ChebC};
use crate::ode::{self, OdeError, OdeOptions};
use crate::params::{ModelParams, ParamsError};
use crate::C64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProfileError {
    #[error("alpha range [{0}, {1}] must satisfy 0 < lo < hi < pi")]
    InvalidRange(f64, f64),
    #[error("alpha0 = {alpha0} is outside [{lo}, {hi}]")]
    Alpha0Outside { alpha0: f64, lo: f64, hi: f64 },
    #[error("|a0 + b| = {0:e} is below the guard")]
    NearPole(f64),
    #[error("guard tripped ({reason}); the solution exists on [{valid_lo}, {valid_hi}]")]
    GuardTripped {
        reason: String,
        valid_lo: f64,
        valid_hi: f64,
    },
    #[error(transparent)]
    Step(#[from] OdeError),
    #[error("alpha = {alpha} outside the profile range [{lo}, {hi}]")]
    OutOfRange { alpha: f64, lo: f64, hi: f64 },
    #[error("t = {t} outside the potential range [{lo}, {hi}]")]
    OutOfPotentialRange { t: f64, lo: f64, hi: f64 },
    #[error("F has a relative imaginary part {0:e} at alpha = {1}")]
    ComplexF(f64, f64),
    #[error("K'(alpha0) must be positive, got {0}")]
    NonpositiveSlope(f64),
    #[error("the potential has not been built")]
    NoPotential,
    #[error("the Chebyshev fit of {0} did not converge with {1} samples")]
    Unresolved(&'static str, usize),
    #[error(transparent)]
    Params(#[from] ParamsError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileOptions {
    pub tol: f64,
    /// Minimum `|a + b|` along the solution.
    pub pole_guard: f64,
    /// Half-width of the masked band around `sin^2 alpha = 2/3`.
    pub sing_guard: f64,
    /// Largest number of Chebyshev intervals tried.
    pub max_nodes: usize,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        ProfileOptions {
            tol: 1e-12,
            pole_guard: 1e-8,
            sing_guard: 1e-6,
            max_nodes: 1024,
        }
    }
}

impl ProfileOptions {
    pub fn with_tol(tol: f64) -> Self {
        ProfileOptions {
            tol,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuardKind {
    /// `sin^2 alpha` within the guard of 2/3, where `t1` and the cascade blow up.
    KahlerSingular,
    /// Real initial value: the solution stays real and the surface is not of
    /// general type.
    RealInitialValue,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GuardEvent {
    pub kind: GuardKind,
    pub alpha_lo: f64,
    pub alpha_hi: f64,
}

/// `K` normalization: `K(alpha0) = k0`, `K'(alpha0) = kprime0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    #[serde(rename = "K0")]
    pub k0: f64,
    #[serde(rename = "Kprime0")]
    pub kprime0: f64,
}

impl Default for Normalization {
    fn default() -> Self {
        Normalization { k0: 0.0, kprime0: 1.0 }
    }
}

#[derive(Debug, Clone)]
pub struct Potential {
    pub normalization: Normalization,
    /// `K'`
    g: Cheb,
    /// `K''`
    dg: Cheb,
    k: Cheb,
    /// `(K, alpha)` on a uniform alpha grid, increasing in both.
    table: Vec<(f64, f64)>,
}

impl Potential {
    pub fn k(&self, alpha: f64) -> f64 {
        self.k.eval(alpha)
    }

    pub fn k_prime(&self, alpha: f64) -> f64 {
        self.g.eval(alpha)
    }

    pub fn k_second(&self, alpha: f64) -> f64 {
        self.dg.eval(alpha)
    }

    pub fn range(&self) -> (f64, f64) {
        (self.table[0].0, self.table[self.table.len() - 1].0)
    }
}

#[derive(Debug, Clone)]
pub struct ProfileSolution {
    pub params: ModelParams,
    pub alpha0: f64,
    pub a0: C64,
    pub alpha_range: (f64, f64),
    pub tol: f64,
    pub guard_events: Vec<GuardEvent>,
    a: ChebC,
    potential: Option<Potential>,
    opts: ProfileOptions,
}

/// Right-hand side of the profile ODE.
pub fn profile_rhs(alpha: f64, a: C64, params: &ModelParams) -> C64 {
    let (b, rho) = (params.b, params.rho);
    let s = alpha.sin();
    let cot = alpha.cos() / s;
    cot / (a.conj() + b) * (-2.0 * b * a + 2.0 * a.norm_sqr() + 1.5 * rho * s * s)
}

/// `F` from an explicit value of `a`, with the intermediate kept complex so
/// that its imaginary part can be inspected.
pub fn f_complex(alpha: f64, a: C64, params: &ModelParams) -> C64 {
    let (b, rho) = (params.b, params.rho);
    let s2 = alpha.sin().powi(2);
    let cot = alpha.cos() / alpha.sin();
    let num = (a - b) * (a.conj() - b) + 1.5 * rho * s2;
    num / ((a + b) * (a.conj() + b)) * cot
}

/// Integrator tolerance for a series chopped at `tol`: tighter, so the
/// retained coefficients are not integrator noise that grid stencils would
/// amplify.
fn ode_tol(tol: f64) -> f64 {
    (tol * 1e-2).max(1e-15)
}

fn validate_range(lo: f64, hi: f64) -> Result<(), ProfileError> {
    if !(lo > 0.0 && hi < std::f64::consts::PI && lo < hi) {
        return Err(ProfileError::InvalidRange(lo, hi));
    }
    Ok(())
}

fn kahler_events(lo: f64, hi: f64, guard: f64) -> Vec<GuardEvent> {
    // sin^2 = 2/3 at alpha_s and pi - alpha_s
    let s = (2.0f64 / 3.0).sqrt().asin();
    let mut out = Vec::new();
    for c in [s, std::f64::consts::PI - s] {
        // |sin^2 - 2/3| <= guard  <=>  |alpha - c| <~ guard / |sin 2c|
        let w = guard / (2.0 * c).sin().abs();
        let (a, b) = ((c - w).max(lo), (c + w).min(hi));
        if a <= b {
            out.push(GuardEvent {
                kind: GuardKind::KahlerSingular,
                alpha_lo: a,
                alpha_hi: b,
            });
        }
    }
    out
}

/// Fit samples taken at `lobatto_nodes(lo, hi, n)`, refining `n` by
/// subsampling until the series resolves to `cutoff`.
fn fit_adaptive(lo: f64, hi: f64, values: &[C64], cutoff: f64) -> Option<ChebC> {
    let n_max = values.len() - 1;
    let mut n = 16.min(n_max);
    loop {
        let stride = n_max / n;
        let sub: Vec<C64> = values.iter().step_by(stride).copied().collect();
        let fit = ChebC::fit(lo, hi, &sub).chop(cutoff);
        let len = fit.re.len().max(fit.im.len());
        if len + 4 < n {
            return Some(fit);
        }
        if n == n_max {
            return None;
        }
        n *= 2;
    }
}

fn fit_adaptive_real(lo: f64, hi: f64, values: &[f64], cutoff: f64) -> Option<Cheb> {
    let cv: Vec<C64> = values.iter().map(|&v| C64::new(v, 0.0)).collect();
    fit_adaptive(lo, hi, &cv, cutoff).map(|c| c.re)
}

impl ProfileSolution {
    /// Integrate the profile ODE over `alpha_range` from `(alpha0, a0)`.
    pub fn solve(
        params: ModelParams,
        alpha0: f64,
        a0: C64,
        alpha_range: (f64, f64),
        opts: &ProfileOptions,
    ) -> Result<ProfileSolution, ProfileError> {
        params.validate()?;
        let (lo, hi) = alpha_range;
        validate_range(lo, hi)?;
        if !(lo..=hi).contains(&alpha0) {
            return Err(ProfileError::Alpha0Outside { alpha0, lo, hi });
        }
        let b = params.b;
        if (a0 + b).norm() <= opts.pole_guard {
            return Err(ProfileError::NearPole((a0 + b).norm()));
        }
        let ode_opts = OdeOptions::with_tol(ode_tol(opts.tol));
        let guard = opts.pole_guard;
        let rhs = |t: f64, y: &[f64], d: &mut [f64]| {
            let a = C64::new(y[0], y[1]);
            if (a + b).norm() <= guard {
                return Err(format!("|a + b| = {:e} at alpha = {t}", (a + b).norm()));
            }
            let v = profile_rhs(t, a, &params);
            d[0] = v.re;
            d[1] = v.im;
            Ok(())
        };

        let mut n = 256.min(opts.max_nodes);
        loop {
            let nodes = lobatto_nodes(lo, hi, n);
            let mut values = vec![C64::new(0.0, 0.0); n + 1];
            let mut reached = (alpha0, alpha0);
            let mut trip = None;
            for (end, up) in [(hi, true), (lo, false)] {
                let leg = ode::integrate(rhs, alpha0, &[a0.re, a0.im], end, &nodes, &ode_opts);
                let sol = match leg {
                    Ok(s) => s,
                    Err((OdeError::Rhs { reason, .. }, partial)) => {
                        trip = Some(reason);
                        *partial
                    }
                    Err((e, _)) => return Err(e.into()),
                };
                if up {
                    reached.1 = sol.t_end;
                } else {
                    reached.0 = sol.t_end;
                }
                for (t, y) in &sol.stations {
                    if let Some(j) = nodes.iter().position(|x| x == t) {
                        values[j] = C64::new(y[0], y[1]);
                    }
                }
            }
            if let Some(reason) = trip {
                return Err(ProfileError::GuardTripped {
                    reason,
                    valid_lo: reached.0,
                    valid_hi: reached.1,
                });
            }
            if let Some(j) = nodes.iter().position(|&x| x == alpha0) {
                values[j] = a0;
            }
            match fit_adaptive(lo, hi, &values, ode_tol(opts.tol)) {
                Some(a) => {
                    let mut guard_events = kahler_events(lo, hi, opts.sing_guard);
                    if a0.im == 0.0 {
                        guard_events.push(GuardEvent {
                            kind: GuardKind::RealInitialValue,
                            alpha_lo: lo,
                            alpha_hi: hi,
                        });
                    }
                    return Ok(ProfileSolution {
                        params,
                        alpha0,
                        a0,
                        alpha_range,
                        tol: opts.tol,
                        guard_events,
                        a,
                        potential: None,
                        opts: *opts,
                    });
                }
                None if 2 * n <= opts.max_nodes => n *= 2,
                None => return Err(ProfileError::Unresolved("a(alpha)", n)),
            }
        }
    }

    /// Profile from a closed-form `a(alpha)` that solves the ODE.
    pub fn from_closed_form<G: Fn(f64) -> C64>(
        params: ModelParams,
        alpha0: f64,
        alpha_range: (f64, f64),
        a_of: G,
        opts: &ProfileOptions,
    ) -> Result<ProfileSolution, ProfileError> {
        params.validate()?;
        let (lo, hi) = alpha_range;
        validate_range(lo, hi)?;
        if !(lo..=hi).contains(&alpha0) {
            return Err(ProfileError::Alpha0Outside { alpha0, lo, hi });
        }
        let mut n = 64;
        let a = loop {
            let values: Vec<C64> = lobatto_nodes(lo, hi, n).into_iter().map(&a_of).collect();
            if let Some(a) = fit_adaptive(lo, hi, &values, 1e-15) {
                break a;
            }
            if 2 * n > opts.max_nodes {
                return Err(ProfileError::Unresolved("a(alpha)", n));
            }
            n *= 2;
        };
        Ok(ProfileSolution {
            params,
            alpha0,
            a0: a_of(alpha0),
            alpha_range,
            tol: opts.tol,
            guard_events: kahler_events(lo, hi, opts.sing_guard),
            a,
            potential: None,
            opts: *opts,
        })
    }

    fn check(&self, alpha: f64) -> Result<(), ProfileError> {
        let (lo, hi) = self.alpha_range;
        // tolerate roundoff at the ends
        let slack = 1e-12 * (hi - lo);
        if alpha < lo - slack || alpha > hi + slack || alpha.is_nan() {
            return Err(ProfileError::OutOfRange { alpha, lo, hi });
        }
        Ok(())
    }

    pub fn a(&self, alpha: f64) -> Result<C64, ProfileError> {
        self.check(alpha)?;
        Ok(self.a.eval(alpha))
    }

    /// `da/dalpha` from the ODE right-hand side at `(alpha, a(alpha))`.
    pub fn da(&self, alpha: f64) -> Result<C64, ProfileError> {
        Ok(profile_rhs(alpha, self.a(alpha)?, &self.params))
    }

    pub fn f(&self, alpha: f64) -> Result<f64, ProfileError> {
        let v = f_complex(alpha, self.a(alpha)?, &self.params);
        if v.im.abs() > 1e-12 * v.norm().max(1.0) {
            return Err(ProfileError::ComplexF(v.im.abs() / v.norm().max(1.0), alpha));
        }
        Ok(v.re)
    }

    pub fn is_masked(&self, alpha: f64) -> bool {
        self.guard_events
            .iter()
            .any(|e| e.kind == GuardKind::KahlerSingular && (e.alpha_lo..=e.alpha_hi).contains(&alpha))
    }

    /// Integrate `g' = -F g`, `K' = g` from the normalization at `alpha0`.
    pub fn build_potential(&mut self, norm: Normalization) -> Result<(), ProfileError> {
        if !(norm.kprime0 > 0.0 && norm.kprime0.is_finite()) || !norm.k0.is_finite() {
            return Err(ProfileError::NonpositiveSlope(norm.kprime0));
        }
        let (lo, hi) = self.alpha_range;
        let ode_opts = OdeOptions::with_tol(ode_tol(self.opts.tol));
        let this = &*self;
        let rhs = |t: f64, y: &[f64], d: &mut [f64]| {
            let f = this.f(t).map_err(|e| e.to_string())?;
            d[0] = -f * y[0];
            d[1] = y[0];
            Ok(())
        };
        let mut n = 128.min(self.opts.max_nodes);
        let (g, k) = loop {
            let nodes = lobatto_nodes(lo, hi, n);
            let mut gv = vec![0.0; n + 1];
            let mut kv = vec![0.0; n + 1];
            for end in [hi, lo] {
                let sol = ode::integrate(rhs, self.alpha0, &[norm.kprime0, norm.k0], end, &nodes, &ode_opts)
                    .map_err(|(e, _)| ProfileError::Step(e))?;
                for (t, y) in &sol.stations {
                    if let Some(j) = nodes.iter().position(|x| x == t) {
                        gv[j] = y[0];
                        kv[j] = y[1];
                    }
                }
            }
            if let Some(j) = nodes.iter().position(|&x| x == self.alpha0) {
                gv[j] = norm.kprime0;
                kv[j] = norm.k0;
            }
            let g = fit_adaptive_real(lo, hi, &gv, ode_tol(self.opts.tol));
            let k = fit_adaptive_real(lo, hi, &kv, ode_tol(self.opts.tol));
            match (g, k) {
                (Some(g), Some(k)) => break (g, k),
                _ if 2 * n <= self.opts.max_nodes => n *= 2,
                _ => return Err(ProfileError::Unresolved("K(alpha)", n)),
            }
        };
        let m = 4096;
        let mut table = Vec::with_capacity(m + 1);
        for i in 0..=m {
            let al = lo + (hi - lo) * i as f64 / m as f64;
            if g.eval(al) <= 0.0 {
                return Err(ProfileError::NonpositiveSlope(g.eval(al)));
            }
            table.push((k.eval(al), al));
        }
        if table.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(ProfileError::NonpositiveSlope(0.0));
        }
        let dg = g.derivative();
        self.potential = Some(Potential {
            normalization: norm,
            g,
            dg,
            k,
            table,
        });
        Ok(())
    }

    pub fn potential(&self) -> Result<&Potential, ProfileError> {
        self.potential.as_ref().ok_or(ProfileError::NoPotential)
    }

    /// `psi = K^{-1}`.
    pub fn psi(&self, t: f64) -> Result<f64, ProfileError> {
        let p = self.potential()?;
        let (klo, khi) = p.range();
        let slack = 1e-12 * (khi - klo);
        if !(t >= klo - slack && t <= khi + slack) {
            return Err(ProfileError::OutOfPotentialRange { t, lo: klo, hi: khi });
        }
        let t = t.clamp(klo, khi);
        let i = p.table.partition_point(|e| e.0 < t).clamp(1, p.table.len() - 1);
        let ((k0, a0), (k1, a1)) = (p.table[i - 1], p.table[i]);
        // Hermite guess from the secant, then Newton on the series
        let mut al = a0 + (a1 - a0) * (t - k0) / (k1 - k0);
        let (lo, hi) = self.alpha_range;
        for _ in 0..8 {
            let step = (p.k(al) - t) / p.k_prime(al);
            al = (al - step).clamp(lo, hi);
            if step.abs() <= 1e-16 * al.abs().max(1.0) {
                break;
            }
        }
        Ok(al)
    }

    /// `psi'(t) = 1 / K'(psi(t))`.
    pub fn psi_prime(&self, t: f64) -> Result<f64, ProfileError> {
        let al = self.psi(t)?;
        Ok(1.0 / self.potential()?.k_prime(al))
    }

    /// `psi''(t) = -K''(psi) / K'(psi)^3`.
    pub fn psi_second(&self, t: f64) -> Result<f64, ProfileError> {
        let al = self.psi(t)?;
        let p = self.potential()?;
        Ok(-p.k_second(al) / p.k_prime(al).powi(3))
    }

    /// Rows `(alpha, a, F, K)` at `n` equispaced angles; `K` is NaN when no
    /// potential has been built.
    pub fn table(&self, n: usize) -> Result<Vec<(f64, C64, f64, f64)>, ProfileError> {
        let (lo, hi) = self.alpha_range;
        let n = n.max(2);
        (0..n)
            .map(|i| {
                let al = lo + (hi - lo) * i as f64 / (n - 1) as f64;
                let k = self.potential.as_ref().map_or(f64::NAN, |p| p.k(al));
                Ok((al, self.a(al)?, self.f(al)?, k))
            })
            .collect()
    }

    /// Sup-norm of `a' - rhs` scaled by `1 + |rhs|`, from the derivative of
    /// the fitted series, on `n` equispaced angles.
    pub fn ode_self_residual(&self, n: usize) -> f64 {
        let da = self.a.derivative();
        let (lo, hi) = self.alpha_range;
        (0..n)
            .map(|i| {
                let al = lo + (hi - lo) * i as f64 / (n - 1) as f64;
                let rhs = profile_rhs(al, self.a.eval(al), &self.params);
                (da.eval(al) - rhs).norm() / (1.0 + rhs.norm())
            })
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn params() -> ModelParams {
        ModelParams::new(-3.0, 1.0)
    }

    #[test]
    fn rhs_vanishes_at_half_pi() {
        assert!(profile_rhs(FRAC_PI_2, C64::new(0.3, 0.4), &ModelParams::new(-3.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn f_vanishes_at_half_pi() {
        assert!(f_complex(FRAC_PI_2, C64::new(0.3, 0.4), &params()).norm() < 1e-15);
    }

    #[test]
    fn real_axis_invariant() {
        let p = ProfileSolution::solve(
            params(),
            0.6,
            C64::new(0.3, 0.0),
            (0.4, 1.2),
            &ProfileOptions::with_tol(1e-10),
        )
        .unwrap();
        for i in 0..=100 {
            let al = 0.4 + 0.008 * i as f64;
            assert!(p.a(al).unwrap().im.abs() <= 1e-9);
        }
        assert!(p.guard_events.iter().any(|e| e.kind == GuardKind::RealInitialValue));
    }

    #[test]
    fn rejects_bad_ranges() {
        let o = ProfileOptions::default();
        let a0 = C64::new(0.3, 0.4);
        assert!(matches!(
            ProfileSolution::solve(params(), 0.6, a0, (0.0, 1.0), &o),
            Err(ProfileError::InvalidRange(..))
        ));
        assert!(matches!(
            ProfileSolution::solve(params(), 1.5, a0, (0.4, 1.2), &o),
            Err(ProfileError::Alpha0Outside { .. })
        ));
        assert!(matches!(
            ProfileSolution::solve(params(), 0.6, C64::new(-1.0, 0.0), (0.4, 1.2), &o),
            Err(ProfileError::NearPole(_))
        ));
    }

    #[test]
    fn pole_trip_reports_valid_span() {
        // a real and decreasing toward -b for alpha > pi/2 when a0 + b is small
        let o = ProfileOptions {
            pole_guard: 1e-3,
            ..ProfileOptions::with_tol(1e-9)
        };
        let r = ProfileSolution::solve(params(), 1.0, C64::new(-0.9, 0.0), (0.5, 3.0), &o);
        match r {
            Err(ProfileError::GuardTripped { valid_lo, valid_hi, .. }) => {
                assert!(valid_hi < 3.0 && valid_hi > 1.0);
                assert!(valid_lo <= 1.0);
            }
            other => panic!("expected a guard trip, got {other:?}"),
        }
    }

    #[test]
    fn masked_band_around_kahler_singular_angle() {
        let p = ProfileSolution::solve(
            params(),
            0.6,
            C64::new(0.3, 0.4),
            (0.4, 1.2),
            &ProfileOptions::default(),
        )
        .unwrap();
        let s = (2.0f64 / 3.0).sqrt().asin();
        assert!(p.is_masked(s));
        assert!(!p.is_masked(s + 1e-3));
    }

    #[test]
    fn psi_requires_potential() {
        let p = ProfileSolution::solve(
            params(),
            0.6,
            C64::new(0.3, 0.4),
            (0.4, 1.2),
            &ProfileOptions::default(),
        )
        .unwrap();
        assert_eq!(p.psi(0.0).unwrap_err(), ProfileError::NoPotential);
    }
}
