//! Python bindings. Errors surface as `pmc.PmcError(message, kind, exit_code)`.

use std::path::PathBuf;

use pmc_core::coeffs::{eval_t, Branch, CoeffId, CoeffOptions, Reconciliation, T9Mode};
use pmc_core::config::RunConfig;
use pmc_core::construct::{construct_with_profile, generic_profile, SurfaceFields};
use pmc_core::family::{self, AlphaMode, FamilyParams, FamilySurfaceInput};
use pmc_core::grid::{Field, GridDomain, HarmonicInput};
use pmc_core::io::{self as pio, Meta, ProfileSummary};
use pmc_core::jets::{EvalPoint, MAX_ORDER};
use pmc_core::profile::{Normalization, ProfileOptions, ProfileSolution};
use pmc_core::verify::{verify_suite, ResidualReport};
use pmc_core::{Error, ModelParams, C64};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use serde::de::DeserializeOwned;

create_exception!(pmc, PmcError, PyException);

/// Derivative multi-index `(n_alpha, n_a, n_abar)`.
type Multi = (usize, usize, usize);

fn err(e: impl Into<Error>) -> PyErr {
    let e = e.into();
    PmcError::new_err((e.to_string(), e.kind(), e.exit_code().code()))
}

fn parse_enum<T: DeserializeOwned>(what: &str, s: &str) -> PyResult<T> {
    serde_json::from_value(serde_json::Value::String(s.to_owned()))
        .map_err(|_| PyValueError::new_err(format!("unknown {what} `{s}`")))
}

fn rows<T: Copy + Send + Sync>(f: &Field<T>) -> Vec<Vec<T>> {
    f.data.chunks(f.nx).map(<[T]>::to_vec).collect()
}

/// Coefficient `t_i` and its derivatives up to `order`, keyed by
/// `(n_alpha, n_a, n_abar)`.
#[pyfunction]
#[pyo3(signature = (i, alpha, a, rho=-3.0, b=1.0, order=1, t9_mode="as_printed", branch="plus", reconciliation="assume"))]
#[allow(clippy::too_many_arguments)]
fn tcoef(
    i: u8,
    alpha: f64,
    a: C64,
    rho: f64,
    b: f64,
    order: usize,
    t9_mode: &str,
    branch: &str,
    reconciliation: &str,
) -> PyResult<Vec<(Multi, C64)>> {
    let params = ModelParams::new(rho, b);
    params.validate().map_err(err)?;
    let opts = CoeffOptions {
        t9_mode: parse_enum::<T9Mode>("t9_mode", t9_mode)?,
        reconciliation: parse_enum::<Reconciliation>("reconciliation", reconciliation)?,
        max_order: MAX_ORDER,
        ..Default::default()
    };
    let branch = match branch {
        "plus" => Branch::Plus,
        "minus" => Branch::Minus,
        _ => return Err(PyValueError::new_err(format!("unknown branch `{branch}`"))),
    };
    let id = CoeffId::new(i).map_err(err)?.with_branch(branch);
    let jet = eval_t(id, &EvalPoint::conjugate_pair(alpha, a, params), order, &opts).map_err(err)?;
    Ok(jet
        .iter()
        .map(|(m, _)| ((m[0], m[1], m[2]), jet.derivative(m)))
        .collect())
}

#[pyfunction]
fn a_family(t: f64, c1: f64) -> C64 {
    family::a_family(t, c1)
}

/// Endpoints of the angle interval on which the family is defined.
#[pyfunction]
fn valid_interval(c1: f64) -> PyResult<(f64, f64)> {
    let iv = family::valid_interval(c1).map_err(err)?;
    Ok((iv.t_lo, iv.t_hi))
}

/// `(a, xi, c)` of the family at angle `t`.
#[pyfunction]
#[pyo3(signature = (t, c1, c2=0.0, quad_tol=1e-13))]
fn family_state(t: f64, c1: f64, c2: f64, quad_tol: f64) -> PyResult<(C64, f64, C64)> {
    let p = FamilyParams::new(c1, c2).map_err(err)?;
    family::family_state(t, &p, quad_tol).map_err(err)
}

/// Solution of the profile ODE with its potential.
#[pyclass(module = "pmc", frozen)]
struct Profile(ProfileSolution);

#[pymethods]
impl Profile {
    #[new]
    #[pyo3(signature = (rho, b, alpha0, a0, alpha_min, alpha_max, tol=1e-12, k0=0.0, kprime0=1.0))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        rho: f64,
        b: f64,
        alpha0: f64,
        a0: C64,
        alpha_min: f64,
        alpha_max: f64,
        tol: f64,
        k0: f64,
        kprime0: f64,
    ) -> PyResult<Self> {
        let params = ModelParams::new(rho, b);
        params.validate_nonflat().map_err(err)?;
        let opts = ProfileOptions::with_tol(tol);
        let mut p = ProfileSolution::solve(params, alpha0, a0, (alpha_min, alpha_max), &opts).map_err(err)?;
        p.build_potential(Normalization { k0, kprime0 }).map_err(err)?;
        Ok(Profile(p))
    }

    fn a(&self, alpha: f64) -> PyResult<C64> {
        self.0.a(alpha).map_err(err)
    }

    fn f(&self, alpha: f64) -> PyResult<f64> {
        self.0.f(alpha).map_err(err)
    }

    fn k(&self, alpha: f64) -> PyResult<f64> {
        Ok(self.0.potential().map_err(err)?.k(alpha))
    }

    /// Inverse of the potential.
    fn psi(&self, t: f64) -> PyResult<f64> {
        self.0.psi(t).map_err(err)
    }

    fn potential_range(&self) -> PyResult<(f64, f64)> {
        Ok(self.0.potential().map_err(err)?.range())
    }

    fn ode_residual(&self) -> f64 {
        self.0.ode_self_residual(401)
    }
}

/// Fields of a constructed surface on a grid; arrays are indexed `[j][i]`.
#[pyclass(module = "pmc", frozen)]
struct Surface {
    fields: SurfaceFields,
    meta: Meta,
}

#[pymethods]
impl Surface {
    #[staticmethod]
    fn load(dir: PathBuf) -> PyResult<Self> {
        let (fields, meta) = pio::read_surface(&dir).map_err(err)?;
        Ok(Surface { fields, meta })
    }

    fn save(&self, dir: PathBuf) -> PyResult<()> {
        pio::write_surface(&dir, &self.fields, &self.meta).map_err(err)
    }

    #[getter]
    fn shape(&self) -> (usize, usize) {
        (self.fields.grid.nx, self.fields.grid.ny)
    }

    #[getter]
    fn masked_nodes(&self) -> usize {
        self.fields.masked_count()
    }

    #[getter]
    fn path_discrepancy(&self) -> f64 {
        self.fields.path_discrepancy
    }

    fn x(&self) -> Vec<f64> {
        (0..self.fields.grid.nx).map(|i| self.fields.grid.x(i)).collect()
    }

    fn y(&self) -> Vec<f64> {
        (0..self.fields.grid.ny).map(|j| self.fields.grid.y(j)).collect()
    }

    fn alpha(&self) -> Vec<Vec<f64>> {
        rows(&self.fields.alpha)
    }

    fn a(&self) -> Vec<Vec<C64>> {
        rows(&self.fields.a)
    }

    fn lam(&self) -> Vec<Vec<C64>> {
        rows(&self.fields.lambda)
    }

    fn nu(&self) -> Vec<Vec<f64>> {
        rows(&self.fields.nu)
    }

    fn c(&self) -> Vec<Vec<C64>> {
        rows(&self.fields.c)
    }

    fn mask(&self) -> Vec<Vec<bool>> {
        rows(&self.fields.mask)
    }

    /// Residual report as a JSON string, optionally against a refined surface.
    #[pyo3(signature = (fine=None, t9_mode=None))]
    fn verify(&self, fine: Option<&Surface>, t9_mode: Option<&str>) -> PyResult<Report> {
        let mut opts = match &self.meta.config {
            Some(cfg) => cfg.verify_options(),
            None => Default::default(),
        };
        if let Some(m) = t9_mode {
            opts.coeffs.t9_mode = parse_enum("t9_mode", m)?;
        }
        let report = verify_suite(&self.fields, fine.map(|f| &f.fields), &opts).map_err(err)?;
        Ok(Report(report))
    }
}

#[pyclass(module = "pmc", frozen)]
struct Report(ResidualReport);

#[pymethods]
impl Report {
    #[getter]
    fn passed(&self) -> bool {
        self.0.passed
    }

    fn failures(&self) -> Vec<String> {
        self.0.failures().iter().map(|id| id.name().to_owned()).collect()
    }

    fn table(&self) -> String {
        self.0.table()
    }

    fn json(&self) -> String {
        serde_json::to_string(&self.0).expect("report serializes")
    }
}

/// Generic construction from a JSON run configuration.
#[pyfunction]
fn construct(config_json: &str) -> PyResult<Surface> {
    let cfg = RunConfig::from_json(config_json).map_err(err)?;
    let mut input = cfg.generic_input().map_err(err)?;
    let profile = generic_profile(&input).map_err(err)?;
    if cfg.harmonic.rescale {
        input.fit_harmonic(&profile).map_err(err)?;
    }
    let fields = construct_with_profile(&input, &profile).map_err(err)?;
    let meta = Meta::new(&fields, Some(cfg), Some(ProfileSummary::of(&profile)));
    Ok(Surface { fields, meta })
}

/// Surface of the explicit family with `f = Re z` fitted onto the window.
#[pyfunction]
#[pyo3(signature = (c1, c2=0.0, nx=161, ny=161, window=None, domain=(0.0, 1.0, 0.0, 1.0), mode="potential", quad_tol=1e-13))]
#[allow(clippy::too_many_arguments)]
fn family_surface(
    c1: f64,
    c2: f64,
    nx: usize,
    ny: usize,
    window: Option<(f64, f64)>,
    domain: (f64, f64, f64, f64),
    mode: &str,
    quad_tol: f64,
) -> PyResult<Surface> {
    let params = FamilyParams::new(c1, c2).map_err(err)?;
    let window = match window {
        Some(w) => w,
        None => family::default_window(c1).map_err(err)?,
    };
    let (x0, x1, y0, y1) = domain;
    let grid = GridDomain::new(x0, x1, y0, y1, nx, ny).map_err(err)?;
    let mut input = FamilySurfaceInput {
        params,
        harmonic: HarmonicInput::re_z(),
        grid,
        mode: parse_enum::<AlphaMode>("mode", mode)?,
        window,
        quad_tol,
        sing_guard: ProfileOptions::default().sing_guard,
    };
    let profile = input.potential_profile().map_err(err)?;
    input.harmonic = input.fit_harmonic(Some(&profile)).map_err(err)?;
    let fields = family::family_surface(&input).map_err(err)?;
    let meta = Meta::new(&fields, None, Some(ProfileSummary::of(&profile)));
    Ok(Surface { fields, meta })
}

#[pymodule]
fn pmc(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("PmcError", m.py().get_type::<PmcError>())?;
    m.add_class::<Profile>()?;
    m.add_class::<Surface>()?;
    m.add_class::<Report>()?;
    m.add_function(wrap_pyfunction!(tcoef, m)?)?;
    m.add_function(wrap_pyfunction!(a_family, m)?)?;
    m.add_function(wrap_pyfunction!(valid_interval, m)?)?;
    m.add_function(wrap_pyfunction!(family_state, m)?)?;
    m.add_function(wrap_pyfunction!(construct, m)?)?;
    m.add_function(wrap_pyfunction!(family_surface, m)?)?;
    Ok(())
}
