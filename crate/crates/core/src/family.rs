//! The explicit associated family with `b = 1`, `rho = -3`:
//!
//! ```text
//! a(t)  = (-4 + (9 + 4c1) s^2 - 9 c1 s^4 + i r) / (4(-1 + c1 s^2) - i r)
//! r     = sqrt(2 (8 - 9 s^2)(-1 + c1 s^2)),  s = sin t
//! xi(t) = 2^{5/2} int cot t / sqrt((8 - 9 s^2)(-1 + c1 s^2)) dt + c2
//! c(t)  = sqrt(c1 / (2(-9 + 8 c1))) (8 - 9 s^2) e^{i xi(t)}
//! ```
//!
//! `a(t)` solves the profile ODE, so the family is also a special case of the
//! generic construction. The angle can be taken as `alpha = psi(f)` with the
//! potential built from this `a` ([`AlphaMode::Potential`]), or literally as
//! `alpha = f` ([`AlphaMode::Literal`]).

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::construct::{
    build_alpha, build_lambda, gauss_curvature, harmonic_pairs, ConstructError, SurfaceFields, SurfaceOrigin,
    RANGE_SLACK,
};
use crate::grid::{Field, GridDomain, GridError, HarmonicInput};
use crate::params::ModelParams;
use crate::profile::{Normalization, ProfileError, ProfileOptions, ProfileSolution};
use crate::quad::{self, QuadError};
use crate::C64;

pub const FAMILY_PARAMS: ModelParams = ModelParams::new(-3.0, 1.0);

/// Relative distance kept from the radicand zeros.
pub const INTERVAL_GUARD: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FamilyError {
    #[error("c1 = {0} lies in [0, 9/8]; the family needs c1 < 0 or c1 > 9/8")]
    InadmissibleC1(f64),
    #[error("t = {t} is outside the open interval ({lo}, {hi})")]
    OutOfInterval { t: f64, lo: f64, hi: f64 },
    #[error("angle window [{0}, {1}] is not inside the valid interval")]
    BadWindow(f64, f64),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error(transparent)]
    Construct(#[from] ConstructError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilyParams {
    pub c1: f64,
    pub c2: f64,
}

impl FamilyParams {
    pub fn new(c1: f64, c2: f64) -> Result<Self, FamilyError> {
        if !c1.is_finite() || (0.0..=9.0 / 8.0).contains(&c1) {
            return Err(FamilyError::InadmissibleC1(c1));
        }
        Ok(FamilyParams { c1, c2 })
    }

    /// `sqrt(c1 / (2(-9 + 8 c1)))`, real for every admissible `c1`.
    pub fn amplitude(&self) -> f64 {
        let r = self.c1 / (2.0 * (-9.0 + 8.0 * self.c1));
        assert!(r > 0.0, "amplitude radicand {r} for c1 = {}", self.c1);
        r.sqrt()
    }
}

/// Open `t`-interval in `(0, pi/2]` on which both radicand factors have the
/// same sign.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilyInterval {
    pub t_lo: f64,
    pub t_hi: f64,
    pub sin2_lo: f64,
    pub sin2_hi: f64,
}

impl FamilyInterval {
    pub fn contains(&self, t: f64) -> bool {
        let s2 = t.sin().powi(2);
        let g = INTERVAL_GUARD;
        t > 0.0
            && t <= FRAC_PI_2
            && s2 > self.sin2_lo * (1.0 + g)
            && (s2 < self.sin2_hi * (1.0 - g) || (self.sin2_hi == 1.0 && s2 <= 1.0))
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.t_lo + self.t_hi)
    }

    /// The interval shrunk by `frac` of its length at each end.
    pub fn inner(&self, frac: f64) -> (f64, f64) {
        let w = self.t_hi - self.t_lo;
        (self.t_lo + frac * w, self.t_hi - frac * w)
    }
}

pub fn valid_interval(c1: f64) -> Result<FamilyInterval, FamilyError> {
    FamilyParams::new(c1, 0.0)?;
    let (s_lo, s_hi): (f64, f64) = if c1 > 0.0 {
        (1.0 / c1, 8.0 / 9.0)
    } else {
        (8.0 / 9.0, 1.0)
    };
    Ok(FamilyInterval {
        t_lo: s_lo.sqrt().asin(),
        t_hi: s_hi.sqrt().asin(),
        sin2_lo: s_lo,
        sin2_hi: s_hi,
    })
}

/// Default angle window: the interval shrunk by 15% at each end, minus a
/// 0.05 neighbourhood of `sin^2 t = 2/3` (where `t1` has a pole), keeping the
/// longer side.
pub fn default_window(c1: f64) -> Result<(f64, f64), FamilyError> {
    let (lo, hi) = valid_interval(c1)?.inner(0.15);
    let pole = (2.0f64 / 3.0).sqrt().asin();
    if pole <= lo - 0.05 || pole >= hi + 0.05 {
        return Ok((lo, hi));
    }
    let below = (lo, pole - 0.05);
    let above = (pole + 0.05, hi);
    let w = if above.1 - above.0 >= below.1 - below.0 {
        above
    } else {
        below
    };
    if w.1 <= w.0 {
        return Err(FamilyError::BadWindow(lo, hi));
    }
    Ok(w)
}

/// `(8 - 9 s^2)(-1 + c1 s^2)`
pub fn radicand(t: f64, c1: f64) -> f64 {
    let s2 = t.sin().powi(2);
    (8.0 - 9.0 * s2) * (-1.0 + c1 * s2)
}

pub fn a_family(t: f64, c1: f64) -> C64 {
    let s2 = t.sin().powi(2);
    let r = (2.0 * radicand(t, c1)).sqrt();
    let num = C64::new(-4.0 + (9.0 + 4.0 * c1) * s2 - 9.0 * c1 * s2 * s2, r);
    let den = C64::new(4.0 * (-1.0 + c1 * s2), -r);
    num / den
}

/// `d a / dt` by differentiating the closed form.
pub fn a_family_derivative(t: f64, c1: f64) -> C64 {
    let (s, co) = (t.sin(), t.cos());
    let s2 = s * s;
    let ds2 = 2.0 * s * co;
    let rad = radicand(t, c1);
    let drad = (-9.0 * (-1.0 + c1 * s2) + c1 * (8.0 - 9.0 * s2)) * ds2;
    let r = (2.0 * rad).sqrt();
    let dr = drad / r;
    let num = C64::new(-4.0 + (9.0 + 4.0 * c1) * s2 - 9.0 * c1 * s2 * s2, r);
    let dnum = C64::new(((9.0 + 4.0 * c1) - 18.0 * c1 * s2) * ds2, dr);
    let den = C64::new(4.0 * (-1.0 + c1 * s2), -r);
    let dden = C64::new(4.0 * c1 * ds2, -dr);
    (dnum * den - num * dden) / (den * den)
}

fn xi_integrand(t: f64, c1: f64) -> f64 {
    2f64.powf(2.5) * (t.cos() / t.sin()) / radicand(t, c1).sqrt()
}

/// `xi(t)` anchored to `c2` at the interval midpoint.
pub fn xi(t: f64, params: &FamilyParams, quad_tol: f64) -> Result<f64, FamilyError> {
    let iv = valid_interval(params.c1)?;
    if !iv.contains(t) {
        return Err(FamilyError::OutOfInterval {
            t,
            lo: iv.t_lo,
            hi: iv.t_hi,
        });
    }
    let t_ref = iv.midpoint();
    let c1 = params.c1;
    // s = end -/+ u^2 removes the inverse square root at the radicand zero
    let v = if t >= t_ref {
        let e = iv.t_hi;
        let (u0, u1) = ((e - t).sqrt(), (e - t_ref).sqrt());
        quad::integrate(|u| 2.0 * u * xi_integrand(e - u * u, c1), u0, u1, quad_tol, 500)?
    } else {
        let e = iv.t_lo;
        let (u0, u1) = ((t - e).sqrt(), (t_ref - e).sqrt());
        -quad::integrate(|u| 2.0 * u * xi_integrand(e + u * u, c1), u0, u1, quad_tol, 500)?
    };
    Ok(v + params.c2)
}

pub fn c_family(t: f64, xi: f64, params: &FamilyParams) -> C64 {
    let s2 = t.sin().powi(2);
    C64::from_polar(params.amplitude() * (8.0 - 9.0 * s2), xi)
}

/// `(a(t), xi(t), c(t))`.
pub fn family_state(t: f64, params: &FamilyParams, quad_tol: f64) -> Result<(C64, f64, C64), FamilyError> {
    let x = xi(t, params, quad_tol)?;
    Ok((a_family(t, params.c1), x, c_family(t, x, params)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaMode {
    /// `alpha = psi(f)`, with `psi` the inverse potential built from `a(t)`.
    #[default]
    Potential,
    /// `alpha = f`.
    Literal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FamilySurfaceInput {
    pub params: FamilyParams,
    pub harmonic: HarmonicInput,
    pub grid: GridDomain,
    pub mode: AlphaMode,
    /// Angles the surface may take; inside the valid interval.
    pub window: (f64, f64),
    pub quad_tol: f64,
    pub sing_guard: f64,
}

impl FamilySurfaceInput {
    fn check_window(&self) -> Result<FamilyInterval, FamilyError> {
        let iv = valid_interval(self.params.c1)?;
        let (lo, hi) = self.window;
        if !(lo < hi && iv.contains(lo) && iv.contains(hi)) {
            return Err(FamilyError::BadWindow(lo, hi));
        }
        Ok(iv)
    }

    /// Potential built from the closed-form `a` over the window, normalized
    /// at the window midpoint.
    pub fn potential_profile(&self) -> Result<ProfileSolution, FamilyError> {
        self.check_window()?;
        let c1 = self.params.c1;
        let opts = ProfileOptions {
            sing_guard: self.sing_guard,
            ..ProfileOptions::with_tol(1e-13)
        };
        let mid = 0.5 * (self.window.0 + self.window.1);
        let mut p = ProfileSolution::from_closed_form(FAMILY_PARAMS, mid, self.window, |t| a_family(t, c1), &opts)?;
        p.build_potential(Normalization::default())?;
        Ok(p)
    }

    /// Affine rescale of `harmonic` so that the surface angle sweeps the
    /// whole window.
    pub fn fit_harmonic(&self, profile: Option<&ProfileSolution>) -> Result<HarmonicInput, FamilyError> {
        let (lo, hi) = match (self.mode, profile) {
            (AlphaMode::Potential, Some(p)) => p.potential()?.range(),
            (AlphaMode::Potential, None) => self.potential_profile()?.potential()?.range(),
            (AlphaMode::Literal, _) => self.window,
        };
        Ok(self.harmonic.rescaled_into(&self.grid, lo, hi)?)
    }
}

pub fn family_surface(input: &FamilySurfaceInput) -> Result<SurfaceFields, FamilyError> {
    input.grid.validate()?;
    input.check_window()?;
    let grid = &input.grid;
    let f = &input.harmonic;
    let fp = input.params;
    let c1 = fp.c1;
    let profile = input.potential_profile()?;

    let (alpha, lambda) = match input.mode {
        AlphaMode::Potential => {
            let alpha = build_alpha(f, grid, &profile)?;
            let lambda = build_lambda(&alpha, f, grid, &profile)?;
            // the closed-form a replaces the series inside lambda
            let lambda = Field::from_fn(grid, |i, j| {
                let al = alpha.at(i, j);
                let series_a = profile.a(al).unwrap_or(C64::new(f64::NAN, f64::NAN));
                lambda.at(i, j) * (series_a + 1.0) / (a_family(al, c1) + 1.0)
            });
            (alpha, lambda)
        }
        AlphaMode::Literal => {
            f.check_on(grid)?;
            let (f_lo, f_hi) = f.range_on(grid);
            let (lo, hi) = input.window;
            let slack = RANGE_SLACK * (hi - lo);
            if f_lo < lo - slack || f_hi > hi + slack {
                return Err(ConstructError::RangeMismatch { f_lo, f_hi, lo, hi }.into());
            }
            let alpha = Field::from_fn(grid, |i, j| f.f(grid.z(i, j)));
            let lambda = Field::from_fn(grid, |i, j| {
                let z = grid.z(i, j);
                f.f_z(z) / (a_family(f.f(z), c1) + 1.0)
            });
            (alpha, lambda)
        }
    };
    let a = alpha.map(|al| a_family(al, c1));
    let nu = Field::try_from_fn(grid, |i, j| xi(alpha.at(i, j), &fp, input.quad_tol))?;
    let c = alpha.zip(&nu, |al, x| c_family(al, x, &fp));
    let (k_formula, k_metric) = gauss_curvature(grid, &alpha, &a, &lambda, &FAMILY_PARAMS);
    let mask = alpha.map(|al| profile.is_masked(al));
    Ok(SurfaceFields {
        grid: *grid,
        params: FAMILY_PARAMS,
        origin: SurfaceOrigin::Family {
            c1,
            c2: fp.c2,
            mode: input.mode,
            alpha_min: input.window.0,
            alpha_max: input.window.1,
            harmonic: harmonic_pairs(f),
        },
        alpha,
        a,
        lambda,
        nu,
        c,
        k_formula,
        k_metric,
        mask,
        guard_events: profile.guard_events.clone(),
        path_discrepancy: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::profile_rhs;
    use std::f64::consts::FRAC_PI_3;

    #[test]
    fn interval_for_c1_two() {
        let iv = valid_interval(2.0).unwrap();
        assert!((iv.t_lo - 0.5f64.sqrt().asin()).abs() < 1e-15);
        assert!((iv.t_hi - (8.0f64 / 9.0).sqrt().asin()).abs() < 1e-15);
        assert_eq!((iv.sin2_lo, iv.sin2_hi), (0.5, 8.0 / 9.0));
    }

    #[test]
    fn interval_for_negative_c1() {
        let iv = valid_interval(-1.0).unwrap();
        assert_eq!((iv.sin2_lo, iv.sin2_hi), (8.0 / 9.0, 1.0));
        assert!(iv.contains(FRAC_PI_2));
        assert!(radicand(1.4, -1.0) > 0.0);
    }

    #[test]
    fn default_window_avoids_t1_pole() {
        let (lo, hi) = default_window(2.0).unwrap();
        let pole = (2.0f64 / 3.0).sqrt().asin();
        assert!(lo > pole && hi < valid_interval(2.0).unwrap().t_hi);
        let (lo, hi) = default_window(-1.0).unwrap();
        assert!(lo > pole && lo < hi);
    }

    #[test]
    fn excluded_strip() {
        for c1 in [0.0, 1.0, 9.0 / 8.0] {
            assert_eq!(valid_interval(c1).unwrap_err(), FamilyError::InadmissibleC1(c1));
        }
    }

    #[test]
    fn a_at_third_pi() {
        let a = a_family(FRAC_PI_3, 2.0);
        assert!((a - C64::new(-0.7619047619047619, 0.13309928437498747)).norm() < 1e-15);
    }

    #[test]
    fn closed_form_solves_profile_ode() {
        for c1 in [2.0, 4.0, -1.0] {
            let iv = valid_interval(c1).unwrap();
            let (lo, hi) = iv.inner(0.02);
            for k in 0..=50 {
                let t = lo + (hi - lo) * k as f64 / 50.0;
                let d = a_family_derivative(t, c1);
                let rhs = profile_rhs(t, a_family(t, c1), &FAMILY_PARAMS);
                assert!((d - rhs).norm() <= 1e-10 * (1.0 + rhs.norm()), "c1={c1} t={t}");
            }
        }
    }

    #[test]
    fn ricci_identity_along_family() {
        let p = FamilyParams::new(2.0, 0.3).unwrap();
        let iv = valid_interval(2.0).unwrap();
        let (lo, hi) = iv.inner(0.01);
        for k in 0..100 {
            let t = lo + (hi - lo) * k as f64 / 99.0;
            let (a, _, c) = family_state(t, &p, 1e-12).unwrap();
            let want = 3.0 - 4.5 * t.sin().powi(2);
            let got = c.norm_sqr() - a.norm_sqr();
            assert!((got - want).abs() <= 1e-10 * want.abs().max(c.norm_sqr()));
        }
    }

    #[test]
    fn c2_only_shifts_phase() {
        let p0 = FamilyParams::new(2.0, 0.0).unwrap();
        let p1 = FamilyParams::new(2.0, 0.7).unwrap();
        let t = 1.05;
        let (a0, x0, c0) = family_state(t, &p0, 1e-12).unwrap();
        let (a1, x1, c1) = family_state(t, &p1, 1e-12).unwrap();
        assert_eq!(a0, a1);
        assert!((c0.norm() - c1.norm()).abs() < 1e-15);
        assert!((x1 - x0 - 0.7).abs() < 1e-15);
    }

    #[test]
    fn xi_derivative_matches_integrand() {
        let p = FamilyParams::new(2.0, 0.0).unwrap();
        for t in [0.8, 1.0, 1.2] {
            let e = 1e-5;
            let d = (xi(t + e, &p, 1e-13).unwrap() - xi(t - e, &p, 1e-13).unwrap()) / (2.0 * e);
            assert!((d - xi_integrand(t, 2.0)).abs() < 1e-6 * xi_integrand(t, 2.0).abs().max(1.0));
        }
    }

    #[test]
    fn amplitude_real_at_strip_edges() {
        for c1 in [-1e-9, -5.0, 9.0 / 8.0 + 1e-9, 40.0] {
            let r = c1 / (2.0 * (-9.0 + 8.0 * c1));
            assert!(r > 0.0);
            assert!(FamilyParams::new(c1, 0.0).unwrap().amplitude().is_finite());
        }
    }

    #[test]
    fn out_of_interval() {
        let p = FamilyParams::new(2.0, 0.0).unwrap();
        assert!(matches!(xi(0.3, &p, 1e-10), Err(FamilyError::OutOfInterval { .. })));
    }
}
