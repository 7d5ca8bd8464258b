//! On-disk formats: `fields.csv` + `meta.json` per surface, and profile tables.
//!
//! Floats are written with 17 significant digits in scientific notation, rows
//! in grid order (`y` outer, `x` inner), so identical runs give identical
//! bytes.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::RunConfig;
use crate::construct::{SurfaceFields, SurfaceOrigin};
use crate::grid::{Field, GridDomain};
use crate::params::ModelParams;
use crate::profile::{GuardEvent, ProfileError, ProfileSolution};
use crate::C64;

pub const FIELDS_FILE: &str = "fields.csv";
pub const META_FILE: &str = "meta.json";

pub const COLUMNS: [&str; 13] = [
    "x",
    "y",
    "alpha",
    "a_re",
    "a_im",
    "lambda_re",
    "lambda_im",
    "nu",
    "c_re",
    "c_im",
    "K_formula",
    "K_metric",
    "mask",
];

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Fs { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{path}: missing column `{column}`")]
    MissingColumn { path: PathBuf, column: String },
    #[error("{path}: row {row}: {reason}")]
    BadRow { path: PathBuf, row: usize, reason: String },
    #[error("{path}: expected {expected} rows for the grid in meta.json, found {found}")]
    RowCount {
        path: PathBuf,
        expected: usize,
        found: usize,
    },
    #[error(transparent)]
    Profile(#[from] ProfileError),
}

/// Summary of the one-dimensional layer behind a surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSummary {
    pub alpha0: f64,
    pub a0: [f64; 2],
    pub alpha_range: [f64; 2],
    pub potential_range: Option<[f64; 2]>,
    /// Relative sup-norm residual of the fitted `a` against the ODE.
    pub ode_residual: f64,
}

impl ProfileSummary {
    pub fn of(p: &ProfileSolution) -> Self {
        ProfileSummary {
            alpha0: p.alpha0,
            a0: [p.a0.re, p.a0.im],
            alpha_range: [p.alpha_range.0, p.alpha_range.1],
            potential_range: p.potential().ok().map(|k| {
                let (lo, hi) = k.range();
                [lo, hi]
            }),
            ode_residual: p.ode_self_residual(401),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub grid: GridDomain,
    pub params: ModelParams,
    pub origin: SurfaceOrigin,
    /// The configuration that produced the run, when it came from one.
    pub config: Option<RunConfig>,
    pub profile: Option<ProfileSummary>,
    pub guard_events: Vec<GuardEvent>,
    pub path_discrepancy: f64,
    pub masked_nodes: usize,
}

impl Meta {
    pub fn new(s: &SurfaceFields, config: Option<RunConfig>, profile: Option<ProfileSummary>) -> Self {
        Meta {
            grid: s.grid,
            params: s.params,
            origin: s.origin.clone(),
            config,
            profile,
            guard_events: s.guard_events.clone(),
            path_discrepancy: s.path_discrepancy,
            masked_nodes: s.masked_count(),
        }
    }
}

fn fs_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Fs {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> IoError + '_ {
    move |source| IoError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{v:.16e}")
    }
}

pub fn write_fields_csv(s: &SurfaceFields, path: &Path) -> Result<(), IoError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(COLUMNS).map_err(csv_err(path))?;
    let g = &s.grid;
    for j in 0..g.ny {
        for i in 0..g.nx {
            let (a, l, c) = (s.a.at(i, j), s.lambda.at(i, j), s.c.at(i, j));
            let row = [
                g.x(i),
                g.y(j),
                s.alpha.at(i, j),
                a.re,
                a.im,
                l.re,
                l.im,
                s.nu.at(i, j),
                c.re,
                c.im,
                s.k_formula.at(i, j),
                s.k_metric.at(i, j),
            ];
            let mut rec: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
            rec.push(if s.mask.at(i, j) { "1" } else { "0" }.into());
            w.write_record(&rec).map_err(csv_err(path))?;
        }
    }
    w.flush().map_err(fs_err(path))
}

/// Write `fields.csv` and `meta.json` into `dir`, creating it if needed.
pub fn write_surface(dir: &Path, s: &SurfaceFields, meta: &Meta) -> Result<(), IoError> {
    fs::create_dir_all(dir).map_err(fs_err(dir))?;
    write_fields_csv(s, &dir.join(FIELDS_FILE))?;
    write_json(&dir.join(META_FILE), meta)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| IoError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    fs::write(path, text).map_err(fs_err(path))
}

pub fn read_meta(dir: &Path) -> Result<Meta, IoError> {
    let path = dir.join(META_FILE);
    let text = fs::read_to_string(&path).map_err(fs_err(&path))?;
    serde_json::from_str(&text).map_err(|source| IoError::Json { path, source })
}

fn parse_f64(s: &str) -> Option<f64> {
    match s.trim() {
        "NaN" | "nan" => Some(f64::NAN),
        t => t.parse().ok(),
    }
}

/// Rebuild a surface from `dir/fields.csv` and `dir/meta.json`.
pub fn read_surface(dir: &Path) -> Result<(SurfaceFields, Meta), IoError> {
    let meta = read_meta(dir)?;
    let path = dir.join(FIELDS_FILE);
    let mut r = csv::Reader::from_path(&path).map_err(csv_err(&path))?;
    let headers = r.headers().map_err(csv_err(&path))?.clone();
    let mut idx = [0usize; 13];
    for (k, name) in COLUMNS.iter().enumerate() {
        idx[k] = headers
            .iter()
            .position(|h| h.trim() == *name)
            .ok_or_else(|| IoError::MissingColumn {
                path: path.clone(),
                column: name.to_string(),
            })?;
    }
    let g = meta.grid;
    let n = g.nx * g.ny;
    let mut cols: Vec<Vec<f64>> = (0..COLUMNS.len()).map(|_| Vec::with_capacity(n)).collect();
    let mut rows = 0;
    for (row, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err(&path))?;
        for (k, &c) in idx.iter().enumerate() {
            let cell = rec.get(c).unwrap_or("");
            let v = parse_f64(cell).ok_or_else(|| IoError::BadRow {
                path: path.clone(),
                row: row + 1,
                reason: format!("`{cell}` in column {} is not a number", COLUMNS[k]),
            })?;
            cols[k].push(v);
        }
        rows += 1;
    }
    if rows != n {
        return Err(IoError::RowCount {
            path,
            expected: n,
            found: rows,
        });
    }
    for (k, (&x, &y)) in cols[0].iter().zip(&cols[1]).enumerate() {
        let (i, j) = (k % g.nx, k / g.nx);
        let (dx, dy) = ((x - g.x(i)).abs(), (y - g.y(j)).abs());
        if dx > 1e-9 * g.hx() || dy > 1e-9 * g.hy() {
            return Err(IoError::BadRow {
                path,
                row: k + 1,
                reason: format!("coordinates do not match node ({i}, {j}) of the grid"),
            });
        }
    }
    let real = |k: usize| Field {
        nx: g.nx,
        ny: g.ny,
        data: cols[k].clone(),
    };
    let complex = |re: usize, im: usize| Field {
        nx: g.nx,
        ny: g.ny,
        data: cols[re].iter().zip(&cols[im]).map(|(&r, &i)| C64::new(r, i)).collect(),
    };
    let s = SurfaceFields {
        grid: g,
        params: meta.params,
        origin: meta.origin.clone(),
        alpha: real(2),
        a: complex(3, 4),
        lambda: complex(5, 6),
        nu: real(7),
        c: complex(8, 9),
        k_formula: real(10),
        k_metric: real(11),
        mask: Field {
            nx: g.nx,
            ny: g.ny,
            data: cols[12].iter().map(|&m| m != 0.0).collect(),
        },
        guard_events: meta.guard_events.clone(),
        path_discrepancy: meta.path_discrepancy,
    };
    Ok((s, meta))
}

/// `alpha, a_re, a_im, F, K` on `n` equispaced angles.
pub fn write_profile_csv(p: &ProfileSolution, n: usize, path: &Path) -> Result<(), IoError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(["alpha", "a_re", "a_im", "F", "K"])
        .map_err(csv_err(path))?;
    for (al, a, f, k) in p.table(n)? {
        w.write_record([al, a.re, a.im, f, k].map(fmt_f64))
            .map_err(csv_err(path))?;
    }
    w.flush().map_err(fs_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construct::{construct, GenericInput};
    use crate::family::a_family;
    use crate::grid::HarmonicInput;
    use crate::profile::Normalization;

    fn surface() -> SurfaceFields {
        let grid = GridDomain::new(0.0, 0.2, 0.0, 0.2, 11, 11).unwrap();
        let input = GenericInput {
            params: ModelParams::new(-3.0, 1.0),
            alpha0: 0.6,
            a0: a_family(0.6, 4.0),
            alpha_range: (0.55, 0.9),
            tol: 1e-12,
            normalization: Normalization::default(),
            harmonic: HarmonicInput::re_z().affine(0.5, 0.0),
            grid,
            nu0: 0.25,
            sing_guard: 1e-6,
        };
        construct(&input).unwrap()
    }

    #[test]
    fn fields_round_trip_bitwise() {
        let s = surface();
        let dir = tempfile::tempdir().unwrap();
        write_surface(dir.path(), &s, &Meta::new(&s, None, None)).unwrap();
        let (t, meta) = read_surface(dir.path()).unwrap();
        assert_eq!(meta.grid, s.grid);
        assert_eq!(t.alpha.data, s.alpha.data);
        assert_eq!(t.c.data, s.c.data);
        assert_eq!(t.lambda.data, s.lambda.data);
        for (x, y) in t.k_metric.data.iter().zip(&s.k_metric.data) {
            assert!(x == y || (x.is_nan() && y.is_nan()));
        }
    }

    #[test]
    fn deterministic_bytes() {
        let s = surface();
        let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        write_fields_csv(&s, &d1.path().join("f.csv")).unwrap();
        write_fields_csv(&surface(), &d2.path().join("f.csv")).unwrap();
        assert_eq!(
            fs::read(d1.path().join("f.csv")).unwrap(),
            fs::read(d2.path().join("f.csv")).unwrap()
        );
    }

    #[test]
    fn missing_column_reported() {
        let s = surface();
        let dir = tempfile::tempdir().unwrap();
        write_surface(dir.path(), &s, &Meta::new(&s, None, None)).unwrap();
        let p = dir.path().join(FIELDS_FILE);
        let text = fs::read_to_string(&p).unwrap().replacen("c_re", "cre", 1);
        fs::write(&p, text).unwrap();
        assert!(matches!(read_surface(dir.path()), Err(IoError::MissingColumn { column, .. }) if column == "c_re"));
    }

    #[test]
    fn seventeen_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(parse_f64(&fmt_f64(std::f64::consts::PI)), Some(std::f64::consts::PI));
    }
}
