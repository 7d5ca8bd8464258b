//! Rectangular grids, node fields and harmonic inputs `f = Re g`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::C64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid needs at least 9 nodes per direction, got {0}x{1}")]
    TooSmall(usize, usize),
    #[error("degenerate rectangle [{0}, {1}] x [{2}, {3}]")]
    Degenerate(f64, f64, f64, f64),
    #[error("harmonic input has no coefficients")]
    EmptyHarmonic,
    #[error("f is constant on the grid")]
    ConstantHarmonic,
    #[error("f_z vanishes at ({x}, {y})")]
    CriticalPoint { x: f64, y: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridDomain {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridDomain {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64, nx: usize, ny: usize) -> Result<Self, GridError> {
        let g = GridDomain { x0, x1, y0, y1, nx, ny };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<(), GridError> {
        if self.nx < 9 || self.ny < 9 {
            return Err(GridError::TooSmall(self.nx, self.ny));
        }
        let finite = [self.x0, self.x1, self.y0, self.y1].iter().all(|v| v.is_finite());
        if !finite || self.x1 <= self.x0 || self.y1 <= self.y0 {
            return Err(GridError::Degenerate(self.x0, self.x1, self.y0, self.y1));
        }
        Ok(())
    }

    pub fn hx(&self) -> f64 {
        (self.x1 - self.x0) / (self.nx - 1) as f64
    }

    pub fn hy(&self) -> f64 {
        (self.y1 - self.y0) / (self.ny - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        if i == self.nx - 1 {
            self.x1
        } else {
            self.x0 + i as f64 * self.hx()
        }
    }

    pub fn y(&self, j: usize) -> f64 {
        if j == self.ny - 1 {
            self.y1
        } else {
            self.y0 + j as f64 * self.hy()
        }
    }

    pub fn z(&self, i: usize, j: usize) -> C64 {
        C64::new(self.x(i), self.y(j))
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Same rectangle with the spacing halved; every node of `self` is a node
    /// of the result.
    pub fn refined(&self) -> GridDomain {
        GridDomain {
            nx: 2 * self.nx - 1,
            ny: 2 * self.ny - 1,
            ..*self
        }
    }

    pub fn with_resolution(&self, nx: usize, ny: usize) -> GridDomain {
        GridDomain { nx, ny, ..*self }
    }

    /// Whether `fine` is `self.refined()` up to roundoff in the corners.
    pub fn is_refined_by(&self, fine: &GridDomain) -> bool {
        let tol = 1e-12 * (self.x1 - self.x0).abs().max(self.y1 - self.y0).max(1.0);
        fine.nx == 2 * self.nx - 1
            && fine.ny == 2 * self.ny - 1
            && (fine.x0 - self.x0).abs() <= tol
            && (fine.x1 - self.x1).abs() <= tol
            && (fine.y0 - self.y0).abs() <= tol
            && (fine.y1 - self.y1).abs() <= tol
    }
}

/// Row-major node values, `data[j * nx + i]` at `(x_i, y_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Field<T> {
    pub nx: usize,
    pub ny: usize,
    pub data: Vec<T>,
}

impl<T: Copy + Send + Sync> Field<T> {
    pub fn from_fn(grid: &GridDomain, f: impl Fn(usize, usize) -> T + Sync) -> Self {
        use rayon::prelude::*;
        let (nx, ny) = (grid.nx, grid.ny);
        let data = (0..ny)
            .into_par_iter()
            .flat_map_iter(|j| (0..nx).map(move |i| (i, j)).collect::<Vec<_>>())
            .map(|(i, j)| f(i, j))
            .collect();
        Field { nx, ny, data }
    }

    pub fn try_from_fn<E: Send>(grid: &GridDomain, f: impl Fn(usize, usize) -> Result<T, E> + Sync) -> Result<Self, E> {
        use rayon::prelude::*;
        let (nx, ny) = (grid.nx, grid.ny);
        let data = (0..nx * ny)
            .into_par_iter()
            .map(|k| f(k % nx, k / nx))
            .collect::<Result<Vec<T>, E>>()?;
        Ok(Field { nx, ny, data })
    }

    pub fn filled(nx: usize, ny: usize, v: T) -> Self {
        Field {
            nx,
            ny,
            data: vec![v; nx * ny],
        }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> T {
        self.data[j * self.nx + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[j * self.nx + i] = v;
    }

    pub fn map<U: Copy + Send + Sync>(&self, f: impl Fn(T) -> U + Sync) -> Field<U> {
        use rayon::prelude::*;
        Field {
            nx: self.nx,
            ny: self.ny,
            data: self.data.par_iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip<U: Copy + Send + Sync, V: Copy + Send + Sync>(
        &self,
        other: &Field<U>,
        f: impl Fn(T, U) -> V + Sync,
    ) -> Field<V> {
        use rayon::prelude::*;
        assert_eq!((self.nx, self.ny), (other.nx, other.ny));
        Field {
            nx: self.nx,
            ny: self.ny,
            data: self
                .data
                .par_iter()
                .zip(other.data.par_iter())
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }
}

/// `f = Re g` with `g(z) = sum_k gamma_k z^k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonicInput {
    pub coeffs: Vec<C64>,
}

impl HarmonicInput {
    pub fn new(coeffs: Vec<C64>) -> Result<Self, GridError> {
        if coeffs.is_empty() {
            return Err(GridError::EmptyHarmonic);
        }
        Ok(HarmonicInput { coeffs })
    }

    /// `f = Re z`
    pub fn re_z() -> Self {
        HarmonicInput {
            coeffs: vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)],
        }
    }

    pub fn g(&self, z: C64) -> C64 {
        self.coeffs.iter().rev().fold(C64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    pub fn g_prime(&self, z: C64) -> C64 {
        self.coeffs
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(C64::new(0.0, 0.0), |acc, (k, &c)| acc * z + c * k as f64)
    }

    pub fn f(&self, z: C64) -> f64 {
        self.g(z).re
    }

    /// `f_z = g'(z) / 2`
    pub fn f_z(&self, z: C64) -> C64 {
        0.5 * self.g_prime(z)
    }

    /// `scale * f + shift`, still harmonic.
    pub fn affine(&self, scale: f64, shift: f64) -> HarmonicInput {
        let mut coeffs: Vec<C64> = self.coeffs.iter().map(|c| c * scale).collect();
        coeffs[0] += shift;
        HarmonicInput { coeffs }
    }

    /// Extremes of `f` over the grid nodes.
    pub fn range_on(&self, grid: &GridDomain) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let v = self.f(grid.z(i, j));
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        (lo, hi)
    }

    /// Affine recombination mapping the grid range of `f` onto `[lo, hi]`.
    pub fn rescaled_into(&self, grid: &GridDomain, lo: f64, hi: f64) -> Result<HarmonicInput, GridError> {
        let (flo, fhi) = self.range_on(grid);
        if fhi - flo <= 1e-14 * flo.abs().max(1.0) {
            return Err(GridError::ConstantHarmonic);
        }
        let s = (hi - lo) / (fhi - flo);
        Ok(self.affine(s, lo - s * flo))
    }

    /// Rejects constant `f` and nodes with `f_z = 0`.
    pub fn check_on(&self, grid: &GridDomain) -> Result<(), GridError> {
        if self.coeffs.len() < 2 || self.coeffs[1..].iter().all(|c| c.norm() == 0.0) {
            return Err(GridError::ConstantHarmonic);
        }
        let scale = self.coeffs[1..].iter().map(|c| c.norm()).fold(0.0, f64::max);
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                if self.f_z(grid.z(i, j)).norm() <= 1e-12 * scale {
                    return Err(GridError::CriticalPoint {
                        x: grid.x(i),
                        y: grid.y(j),
                    });
                }
            }
        }
        Ok(())
    }
}
