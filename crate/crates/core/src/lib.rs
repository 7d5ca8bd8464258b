//! Construction and numerical verification of surfaces with parallel mean
//! curvature vector in nonflat complex 2-dimensional space forms.
//!
//! The crate is organized bottom-up:
//!
//! * [`jets`]: truncated Taylor arithmetic in `(alpha, a, abar)`,
//! * [`coeffs`]: the coefficient functions `t1 .. t13`,
//! * [`profile`]: the ODE for `a(alpha)`, the coefficient `F`, the potential
//!   `K` and its inverse `psi`,
//! * [`construct`]: the harmonic-function pipeline producing grid fields,
//! * [`family`]: the explicit associated family with `b = 1`, `rho = -3`,
//! * [`verify`]: Wirtinger stencils and the residual suite,
//! * [`config`] and [`io`]: run configuration and on-disk formats.

pub mod cheb;
pub mod coeffs;
pub mod config;
pub mod construct;
pub mod error;
pub mod family;
pub mod grid;
pub mod io;
pub mod jets;
pub mod ode;
pub mod params;
pub mod profile;
pub mod quad;
pub mod verify;

pub use num_complex::Complex64 as C64;

pub use error::{Error, ExitCode};
pub use params::ModelParams;
