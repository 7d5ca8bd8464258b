//! The harmonic-function construction: from `(rho, b)`, a harmonic `f` and
//! five real constants to grid fields `alpha, a, lambda, nu, c`.
//!
//! * `alpha = psi(f)`
//! * `a = a(alpha)` from the profile ODE
//! * `lambda = psi'(f) f_z / (a + b)`, so `phi = lambda dz`
//! * `nu` with `d nu = Im(W dz)`, `W = omega1 lambda / D`
//! * `c = sqrt(D) e^{i nu}`, `D = |a|^2 + rho/2 (-2 + 3 sin^2 alpha)`

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Field, GridDomain, GridError, HarmonicInput};
use crate::params::{ModelParams, ParamsError};
use crate::profile::{profile_rhs, GuardEvent, Normalization, ProfileError, ProfileOptions, ProfileSolution};
use crate::verify::{wirtinger, Wirtinger};
use crate::C64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConstructError {
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error("f ranges over [{f_lo}, {f_hi}] but the admissible range is [{lo}, {hi}]; rescale f affinely")]
    RangeMismatch { f_lo: f64, f_hi: f64, lo: f64, hi: f64 },
    #[error("|a|^2 + rho/2 (-2 + 3 sin^2 alpha) = {value:e} <= 0 at {count} nodes, first at ({x}, {y})")]
    NonpositiveDenominator { count: usize, x: f64, y: f64, value: f64 },
    #[error("a + b vanishes at ({x}, {y})")]
    PoleOfLambda { x: f64, y: f64 },
    #[error(
        "path integrals of omega disagree by {discrepancy:e} at ({x}, {y}), above {threshold:e}: omega is not closed"
    )]
    PathInconsistency {
        discrepancy: f64,
        threshold: f64,
        x: f64,
        y: f64,
    },
    #[error("base node ({0}, {1}) is outside the grid")]
    BaseNode(usize, usize),
}

/// How the surface was produced; two resolutions are only comparable when
/// these agree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SurfaceOrigin {
    Generic {
        alpha0: f64,
        a0_re: f64,
        a0_im: f64,
        alpha_min: f64,
        alpha_max: f64,
        normalization: Normalization,
        nu0: f64,
        harmonic: Vec<[f64; 2]>,
    },
    Family {
        c1: f64,
        c2: f64,
        mode: crate::family::AlphaMode,
        alpha_min: f64,
        alpha_max: f64,
        harmonic: Vec<[f64; 2]>,
    },
    /// Loaded from disk without provenance.
    External,
}

#[derive(Debug, Clone)]
pub struct SurfaceFields {
    pub grid: GridDomain,
    pub params: ModelParams,
    pub origin: SurfaceOrigin,
    pub alpha: Field<f64>,
    pub a: Field<C64>,
    pub lambda: Field<C64>,
    pub nu: Field<f64>,
    pub c: Field<C64>,
    pub k_formula: Field<f64>,
    pub k_metric: Field<f64>,
    /// Nodes inside a guard band; excluded from residual statistics.
    pub mask: Field<bool>,
    pub guard_events: Vec<GuardEvent>,
    /// Largest two-path disagreement of the `nu` integration.
    pub path_discrepancy: f64,
}

impl SurfaceFields {
    pub fn masked_count(&self) -> usize {
        self.mask.data.iter().filter(|&&m| m).count()
    }
}

/// `|a|^2 + rho/2 (-2 + 3 sin^2 alpha)`
pub fn ricci_denominator(alpha: f64, a: C64, params: &ModelParams) -> f64 {
    a.norm_sqr() + params.ricci_offset(alpha)
}

/// `omega1` with `t1` expanded so that the `sin^2 alpha = 2/3` poles cancel:
///
/// ```text
/// omega1 = 2 D (a - b) cot - rho/2 (-4b + 12b s^2 + 4a + 3a s^2) cot - abar (a + b) a'
/// ```
pub fn omega1(alpha: f64, a: C64, params: &ModelParams) -> C64 {
    let (rho, b) = (params.rho, params.b);
    let s2 = alpha.sin().powi(2);
    let cot = alpha.cos() / alpha.sin();
    let d = ricci_denominator(alpha, a, params);
    let da = profile_rhs(alpha, a, params);
    2.0 * d * (a - b) * cot
        - 0.5 * rho * (-4.0 * b + 12.0 * b * s2 + 4.0 * a + 3.0 * a * s2) * cot
        - a.conj() * (a + b) * da
}

/// Relative overshoot of `f` past the potential range that is tolerated, so an
/// affine fit onto the exact range survives rounding.
pub const RANGE_SLACK: f64 = 1e-12;

/// Nodewise `alpha = psi(f)`.
pub fn build_alpha(
    f: &HarmonicInput,
    grid: &GridDomain,
    profile: &ProfileSolution,
) -> Result<Field<f64>, ConstructError> {
    f.check_on(grid)?;
    let (klo, khi) = profile.potential()?.range();
    let (f_lo, f_hi) = f.range_on(grid);
    let slack = RANGE_SLACK * (khi - klo);
    if f_lo < klo - slack || f_hi > khi + slack {
        return Err(ConstructError::RangeMismatch {
            f_lo,
            f_hi,
            lo: klo,
            hi: khi,
        });
    }
    Ok(Field::try_from_fn(grid, |i, j| profile.psi(f.f(grid.z(i, j))))?)
}

/// Nodewise `lambda = psi'(f) f_z / (a(alpha) + b)`.
pub fn build_lambda(
    alpha: &Field<f64>,
    f: &HarmonicInput,
    grid: &GridDomain,
    profile: &ProfileSolution,
) -> Result<Field<C64>, ConstructError> {
    let b = profile.params.b;
    let k = profile.potential()?;
    Field::try_from_fn(grid, |i, j| {
        let z = grid.z(i, j);
        let al = alpha.at(i, j);
        let a = profile.a(al)?;
        if (a + b).norm() == 0.0 {
            return Err(ConstructError::PoleOfLambda { x: z.re, y: z.im });
        }
        // psi'(f) = 1 / K'(alpha)
        Ok(f.f_z(z) / (k.k_prime(al) * (a + b)))
    })
}

fn check_denominator(
    grid: &GridDomain,
    alpha: &Field<f64>,
    a: &Field<C64>,
    params: &ModelParams,
) -> Result<Field<f64>, ConstructError> {
    let d = alpha.zip(a, |al, a| ricci_denominator(al, a, params));
    let bad: Vec<usize> = (0..d.data.len()).filter(|&k| d.data[k] <= 0.0).collect();
    if let Some(&k) = bad.first() {
        return Err(ConstructError::NonpositiveDenominator {
            count: bad.len(),
            x: grid.x(k % grid.nx),
            y: grid.y(k / grid.nx),
            value: d.data[k],
        });
    }
    Ok(d)
}

/// `W = omega1 lambda / D` so that `omega = Im(W dz)`.
pub fn omega_w(
    grid: &GridDomain,
    alpha: &Field<f64>,
    a: &Field<C64>,
    lambda: &Field<C64>,
    params: &ModelParams,
) -> Result<Field<C64>, ConstructError> {
    let d = check_denominator(grid, alpha, a, params)?;
    Ok(Field::from_fn(grid, |i, j| {
        omega1(alpha.at(i, j), a.at(i, j), params) * lambda.at(i, j) / d.at(i, j)
    }))
}

/// Cumulative integral of equispaced samples from index `from`, fourth order
/// per interval.
fn cumulative(values: &[f64], h: f64, from: usize) -> Vec<f64> {
    let n = values.len();
    let step = |k: usize| -> f64 {
        // integral over [k, k+1]
        let f = values;
        if k >= 1 && k + 2 < n {
            h / 24.0 * (-f[k - 1] + 13.0 * f[k] + 13.0 * f[k + 1] - f[k + 2])
        } else if k == 0 {
            h / 24.0 * (9.0 * f[0] + 19.0 * f[1] - 5.0 * f[2] + f[3])
        } else {
            h / 24.0 * (f[k - 2] - 5.0 * f[k - 1] + 19.0 * f[k] + 9.0 * f[k + 1])
        }
    };
    let mut out = vec![0.0; n];
    for k in from..n - 1 {
        out[k + 1] = out[k] + step(k);
    }
    for k in (0..from).rev() {
        out[k] = out[k + 1] - step(k);
    }
    out
}

/// `nu` with `nu_x = Im W`, `nu_y = Re W`, `nu(base) = nu0`, integrated
/// row-then-column. Returns the field and the largest disagreement with the
/// column-then-row integral.
pub fn integrate_nu(
    w: &Field<C64>,
    grid: &GridDomain,
    base: (usize, usize),
    nu0: f64,
    threshold: f64,
) -> Result<(Field<f64>, f64), ConstructError> {
    let (nx, ny) = (grid.nx, grid.ny);
    let (i0, j0) = base;
    if i0 >= nx || j0 >= ny {
        return Err(ConstructError::BaseNode(i0, j0));
    }
    let (hx, hy) = (grid.hx(), grid.hy());
    let row = |j: usize| -> Vec<f64> { (0..nx).map(|i| w.at(i, j).im).collect() };
    let col = |i: usize| -> Vec<f64> { (0..ny).map(|j| w.at(i, j).re).collect() };

    let (path_a, path_b) = rayon::join(
        || {
            let base_row = cumulative(&row(j0), hx, i0);
            let mut out = Field::filled(nx, ny, 0.0);
            for (i, start) in base_row.iter().enumerate() {
                let c = cumulative(&col(i), hy, j0);
                for (j, v) in c.iter().enumerate() {
                    out.set(i, j, nu0 + start + v);
                }
            }
            out
        },
        || {
            let base_col = cumulative(&col(i0), hy, j0);
            let mut out = Field::filled(nx, ny, 0.0);
            for (j, start) in base_col.iter().enumerate() {
                let r = cumulative(&row(j), hx, i0);
                for (i, v) in r.iter().enumerate() {
                    out.set(i, j, nu0 + start + v);
                }
            }
            out
        },
    );
    let mut worst = (0.0, 0);
    for k in 0..path_a.data.len() {
        let d = (path_a.data[k] - path_b.data[k]).abs();
        if d > worst.0 || d.is_nan() {
            worst = (d, k);
        }
    }
    if worst.0.is_nan() || worst.0 > threshold {
        return Err(ConstructError::PathInconsistency {
            discrepancy: worst.0,
            threshold,
            x: grid.x(worst.1 % nx),
            y: grid.y(worst.1 / nx),
        });
    }
    Ok((path_a, worst.0))
}

/// `c = sqrt(D) e^{i nu}`.
pub fn build_c(
    grid: &GridDomain,
    alpha: &Field<f64>,
    a: &Field<C64>,
    nu: &Field<f64>,
    params: &ModelParams,
) -> Result<Field<C64>, ConstructError> {
    let d = check_denominator(grid, alpha, a, params)?;
    Ok(d.zip(nu, |d, nu| C64::from_polar(d.sqrt(), nu)))
}

/// `K = -4(|a|^2 - b^2) + 6 rho cos^2 alpha`
pub fn gauss_formula(alpha: f64, a: C64, params: &ModelParams) -> f64 {
    -4.0 * (a.norm_sqr() - params.b * params.b) + 6.0 * params.rho * alpha.cos().powi(2)
}

/// `(K from the Gauss equation, K from the metric |lambda|^2 |dz|^2)`; the
/// metric value is NaN on the boundary ring.
pub fn gauss_curvature(
    grid: &GridDomain,
    alpha: &Field<f64>,
    a: &Field<C64>,
    lambda: &Field<C64>,
    params: &ModelParams,
) -> (Field<f64>, Field<f64>) {
    let formula = alpha.zip(a, |al, a| gauss_formula(al, a, params));
    (formula, metric_curvature(grid, lambda))
}

/// `-(4 / |lambda|^2) d^2 log|lambda| / dz dzbar` by central differences.
pub fn metric_curvature(grid: &GridDomain, lambda: &Field<C64>) -> Field<f64> {
    let log_abs = lambda.map(|l| C64::new(l.norm().ln(), 0.0));
    let lap = wirtinger(&log_abs, grid, Wirtinger::DzDzbar);
    lap.zip(lambda, |l, lam| -4.0 * l.re / lam.norm_sqr())
}

/// Inputs of the generic construction.
#[derive(Debug, Clone, PartialEq)]
pub struct GenericInput {
    pub params: ModelParams,
    pub alpha0: f64,
    pub a0: C64,
    pub alpha_range: (f64, f64),
    pub tol: f64,
    pub normalization: Normalization,
    pub harmonic: HarmonicInput,
    pub grid: GridDomain,
    pub nu0: f64,
    pub sing_guard: f64,
}

impl GenericInput {
    /// Node nearest the centre of the grid.
    pub fn base_node(&self) -> (usize, usize) {
        (self.grid.nx / 2, self.grid.ny / 2)
    }

    pub fn path_threshold(&self) -> f64 {
        10.0 * self.grid.hx().max(self.grid.hy()).powi(2)
    }
}

impl GenericInput {
    /// Affine rescale of the harmonic input onto the full potential range.
    pub fn fit_harmonic(&mut self, profile: &ProfileSolution) -> Result<(), ConstructError> {
        let (lo, hi) = profile.potential()?.range();
        self.harmonic = self.harmonic.rescaled_into(&self.grid, lo, hi)?;
        Ok(())
    }
}

pub fn harmonic_pairs(h: &HarmonicInput) -> Vec<[f64; 2]> {
    h.coeffs.iter().map(|c| [c.re, c.im]).collect()
}

/// Profile with its potential, as used by [`construct`].
pub fn generic_profile(input: &GenericInput) -> Result<ProfileSolution, ConstructError> {
    input.params.validate_nonflat()?;
    let opts = ProfileOptions {
        tol: input.tol,
        sing_guard: input.sing_guard,
        ..Default::default()
    };
    let mut profile = ProfileSolution::solve(input.params, input.alpha0, input.a0, input.alpha_range, &opts)?;
    profile.build_potential(input.normalization)?;
    Ok(profile)
}

/// Nodes whose angle lies in a guard band of the profile.
pub fn guard_mask(alpha: &Field<f64>, profile: &ProfileSolution) -> Field<bool> {
    alpha.map(|al| profile.is_masked(al))
}

/// Run the full construction.
pub fn construct(input: &GenericInput) -> Result<SurfaceFields, ConstructError> {
    input.grid.validate()?;
    let profile = generic_profile(input)?;
    construct_with_profile(input, &profile)
}

pub fn construct_with_profile(
    input: &GenericInput,
    profile: &ProfileSolution,
) -> Result<SurfaceFields, ConstructError> {
    let grid = &input.grid;
    let params = &input.params;
    let f = &input.harmonic;
    let alpha = build_alpha(f, grid, profile)?;
    let a = Field::try_from_fn(grid, |i, j| profile.a(alpha.at(i, j)))?;
    let lambda = build_lambda(&alpha, f, grid, profile)?;
    let w = omega_w(grid, &alpha, &a, &lambda, params)?;
    let (nu, path_discrepancy) = integrate_nu(&w, grid, input.base_node(), input.nu0, input.path_threshold())?;
    let c = build_c(grid, &alpha, &a, &nu, params)?;
    let (k_formula, k_metric) = gauss_curvature(grid, &alpha, &a, &lambda, params);
    let mask = guard_mask(&alpha, profile);
    Ok(SurfaceFields {
        grid: *grid,
        params: *params,
        origin: SurfaceOrigin::Generic {
            alpha0: input.alpha0,
            a0_re: input.a0.re,
            a0_im: input.a0.im,
            alpha_min: input.alpha_range.0,
            alpha_max: input.alpha_range.1,
            normalization: input.normalization,
            nu0: input.nu0,
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
        path_discrepancy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> GridDomain {
        GridDomain::new(0.0, 1.0, 0.0, 2.0, 21, 41).unwrap()
    }

    #[test]
    fn constant_w_integrates_to_x() {
        let g = grid();
        let w = Field::filled(g.nx, g.ny, C64::new(0.0, 1.0));
        let (nu, disc) = integrate_nu(&w, &g, (3, 7), 0.25, 1e-12).unwrap();
        assert!(disc < 1e-14);
        for j in 0..g.ny {
            for i in 0..g.nx {
                assert!((nu.at(i, j) - (g.x(i) - g.x(3) + 0.25)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn zero_w_gives_constant() {
        let g = grid();
        let w = Field::filled(g.nx, g.ny, C64::new(0.0, 0.0));
        let (nu, _) = integrate_nu(&w, &g, (0, 0), -1.5, 1e-12).unwrap();
        assert!(nu.data.iter().all(|&v| v == -1.5));
    }

    #[test]
    fn exact_form_integrates_to_fourth_order() {
        // nu = sin(x) cosh(y) + x y^2: nu_x = cos x cosh y + y^2, nu_y = sin x sinh y + 2xy
        let g = grid();
        let w = Field::from_fn(&g, |i, j| {
            let (x, y) = (g.x(i), g.y(j));
            C64::new(x.sin() * y.sinh() + 2.0 * x * y, x.cos() * y.cosh() + y * y)
        });
        let (nu, disc) = integrate_nu(&w, &g, (10, 20), 0.0, 1e-6).unwrap();
        let exact = |x: f64, y: f64| x.sin() * y.cosh() + x * y * y;
        let e0 = exact(g.x(10), g.y(20));
        let mut err: f64 = 0.0;
        for j in 0..g.ny {
            for i in 0..g.nx {
                err = err.max((nu.at(i, j) - (exact(g.x(i), g.y(j)) - e0)).abs());
            }
        }
        assert!(err < 1e-6, "{err}");
        assert!(disc < 1e-6);
    }

    #[test]
    fn non_closed_form_is_rejected() {
        // omega = x dy is not closed
        let g = grid();
        let w = Field::from_fn(&g, |i, _| C64::new(g.x(i), 0.0));
        let r = integrate_nu(&w, &g, (0, 0), 0.0, 1e-3);
        assert!(matches!(r, Err(ConstructError::PathInconsistency { .. })));
    }

    #[test]
    fn c_amplitude_and_phase() {
        let g = grid();
        let params = ModelParams::new(-3.0, 1.0);
        // D = |a|^2 + rho/2(-2 + 3) = |a|^2 - 1.5 = 4 when |a|^2 = 5.5
        let alpha = Field::filled(g.nx, g.ny, std::f64::consts::FRAC_PI_2);
        let a = Field::filled(g.nx, g.ny, C64::new(5.5f64.sqrt(), 0.0));
        let nu = Field::filled(g.nx, g.ny, 0.0);
        let c = build_c(&g, &alpha, &a, &nu, &params).unwrap();
        assert!((c.at(2, 3) - C64::new(2.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn nonpositive_denominator_reported() {
        let g = grid();
        let params = ModelParams::new(-3.0, 1.0);
        let alpha = Field::filled(g.nx, g.ny, std::f64::consts::FRAC_PI_2);
        let a = Field::filled(g.nx, g.ny, C64::new(0.5, 0.0));
        let nu = Field::filled(g.nx, g.ny, 0.0);
        assert!(matches!(
            build_c(&g, &alpha, &a, &nu, &params),
            Err(ConstructError::NonpositiveDenominator { .. })
        ));
    }

    #[test]
    fn gauss_formula_special_values() {
        let p = ModelParams::new(-3.0, 1.0);
        let a = C64::from_polar(1.0, 0.7);
        assert!((gauss_formula(0.4, a, &p) - 6.0 * -3.0 * 0.4f64.cos().powi(2)).abs() < 1e-13);
        assert!(gauss_formula(std::f64::consts::FRAC_PI_2, a, &p).abs() < 1e-13);
    }
}
