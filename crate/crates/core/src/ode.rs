//! Dormand–Prince 5(4) with continuous output and forced output stations.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepFailure { t: f64, h: f64 },
    #[error("exceeded {0} steps")]
    TooManySteps(usize),
    #[error("right-hand side rejected the state at t = {t}: {reason}")]
    Rhs { t: f64, reason: String },
    #[error("non-finite state at t = {0}")]
    NonFinite(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    pub h_init: Option<f64>,
}

impl OdeOptions {
    pub fn with_tol(tol: f64) -> Self {
        OdeOptions {
            rtol: tol,
            atol: tol,
            ..Default::default()
        }
    }
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rtol: 1e-10,
            atol: 1e-10,
            max_steps: 200_000,
            h_init: None,
        }
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// One accepted step with its continuous-output coefficients.
#[derive(Debug, Clone)]
struct Segment {
    t0: f64,
    h: f64,
    r: [Vec<f64>; 5],
}

impl Segment {
    fn eval(&self, t: f64, out: &mut [f64]) {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.r[0][i] + th * (self.r[1][i] + th1 * (self.r[2][i] + th * (self.r[3][i] + th1 * self.r[4][i])));
        }
    }
}

/// Result of one integration leg.
#[derive(Debug, Clone)]
pub struct OdeSolution {
    /// Forced output stations that were reached, in integration order.
    pub stations: Vec<(f64, Vec<f64>)>,
    pub t_end: f64,
    pub y_end: Vec<f64>,
    pub steps: usize,
    pub rejected: usize,
    segments: Vec<Segment>,
}

impl OdeSolution {
    /// Continuous output at `t` inside the integrated span.
    pub fn eval(&self, t: f64) -> Option<Vec<f64>> {
        let seg = self.segments.iter().find(|s| {
            let (a, b) = (s.t0, s.t0 + s.h);
            (a.min(b)..=a.max(b)).contains(&t)
        })?;
        let mut out = vec![0.0; self.y_end.len()];
        seg.eval(t, &mut out);
        Some(out)
    }
}

/// Integrate `y' = f(t, y)` from `t0` to `t1` (either direction). Every time in
/// `stations` lying between them is hit exactly by a step end and recorded.
/// `f` may refuse a state by returning `Err`, which aborts the leg; the
/// partial solution up to the last accepted step is returned with the error.
pub fn integrate<F>(
    mut f: F,
    t0: f64,
    y0: &[f64],
    t1: f64,
    stations: &[f64],
    opts: &OdeOptions,
) -> Result<OdeSolution, (OdeError, Box<OdeSolution>)>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<(), String>,
{
    let n = y0.len();
    let dir = if t1 >= t0 { 1.0 } else { -1.0 };
    let mut stops: Vec<f64> = stations
        .iter()
        .copied()
        .filter(|&s| (s - t0) * dir > 0.0 && (t1 - s) * dir >= 0.0)
        .collect();
    stops.sort_by(|a, b| (a * dir).partial_cmp(&(b * dir)).unwrap());
    stops.dedup();
    if stops.last().is_none_or(|&s| s != t1) {
        stops.push(t1);
    }
    let station_set: Vec<f64> = stations.to_vec();

    let mut sol = OdeSolution {
        stations: Vec::new(),
        t_end: t0,
        y_end: y0.to_vec(),
        steps: 0,
        rejected: 0,
        segments: Vec::new(),
    };
    if station_set.contains(&t0) {
        sol.stations.push((t0, y0.to_vec()));
    }
    if t0 == t1 {
        return Ok(sol);
    }

    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    let mut tmp = vec![0.0; n];
    let call = |f: &mut F, t: f64, y: &[f64], out: &mut [f64], sol: &OdeSolution| {
        f(t, y, out).map_err(|reason| (OdeError::Rhs { t, reason }, Box::new(sol.clone())))
    };
    call(&mut f, t, &y, &mut k[0], &sol)?;

    let span = (t1 - t0).abs();
    let mut h = match opts.h_init {
        Some(h) => h.abs(),
        None => {
            // ratio of state to slope in the error norm (Hairer, Norsett, Wanner II.4)
            let norm = |v: &[f64]| {
                (v.iter()
                    .zip(&y)
                    .map(|(vi, yi)| (vi / (opts.atol + opts.rtol * yi.abs())).powi(2))
                    .sum::<f64>()
                    / n as f64)
                    .sqrt()
            };
            let (d0, d1) = (norm(&y), norm(&k[0]));
            let guess = if d0 < 1e-5 || d1 < 1e-5 {
                1e-6 * span
            } else {
                0.01 * d0 / d1
            };
            guess.min(0.1 * span).max(1e-10 * span)
        }
    };
    let h_min = 1e-14 * span.max(t0.abs());
    let mut stop_idx = 0;
    let mut fac_old: f64 = 1e-4;
    let mut y_new = vec![0.0; n];
    let mut err_vec = vec![0.0; n];

    while stop_idx < stops.len() {
        if sol.steps + sol.rejected >= opts.max_steps {
            return Err((OdeError::TooManySteps(opts.max_steps), Box::new(sol)));
        }
        let target = stops[stop_idx];
        let remaining = (target - t).abs();
        let mut landing = false;
        if h >= remaining * (1.0 - 1e-12) {
            h = remaining;
            landing = true;
        } else if h > 0.5 * remaining {
            // split evenly instead of leaving a sliver
            h = 0.5 * remaining;
        }
        let hs = h * dir;

        for i in 0..n {
            tmp[i] = y[i] + hs * A21 * k[0][i];
        }
        call(&mut f, t + C2 * hs, &tmp, &mut k[1], &sol)?;
        for i in 0..n {
            tmp[i] = y[i] + hs * (A31 * k[0][i] + A32 * k[1][i]);
        }
        call(&mut f, t + C3 * hs, &tmp, &mut k[2], &sol)?;
        for i in 0..n {
            tmp[i] = y[i] + hs * (A41 * k[0][i] + A42 * k[1][i] + A43 * k[2][i]);
        }
        call(&mut f, t + C4 * hs, &tmp, &mut k[3], &sol)?;
        for i in 0..n {
            tmp[i] = y[i] + hs * (A51 * k[0][i] + A52 * k[1][i] + A53 * k[2][i] + A54 * k[3][i]);
        }
        call(&mut f, t + C5 * hs, &tmp, &mut k[4], &sol)?;
        for i in 0..n {
            tmp[i] = y[i] + hs * (A61 * k[0][i] + A62 * k[1][i] + A63 * k[2][i] + A64 * k[3][i] + A65 * k[4][i]);
        }
        call(&mut f, t + hs, &tmp, &mut k[5], &sol)?;
        for i in 0..n {
            y_new[i] = y[i] + hs * (A71 * k[0][i] + A73 * k[2][i] + A74 * k[3][i] + A75 * k[4][i] + A76 * k[5][i]);
        }
        let t_new = if landing { target } else { t + hs };
        call(&mut f, t_new, &y_new, &mut k[6], &sol)?;

        let mut err = 0.0;
        for i in 0..n {
            err_vec[i] = hs * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i] + E7 * k[6][i]);
            let sc = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
            err += (err_vec[i] / sc).powi(2);
        }
        let err = (err / n as f64).sqrt();
        if !err.is_finite() || y_new.iter().any(|v| !v.is_finite()) {
            h *= 0.2;
            sol.rejected += 1;
            if h < h_min {
                return Err((OdeError::NonFinite(t), Box::new(sol)));
            }
            continue;
        }

        if err <= 1.0 {
            // continuous output coefficients
            let mut r: [Vec<f64>; 5] = Default::default();
            for v in r.iter_mut() {
                v.resize(n, 0.0);
            }
            for i in 0..n {
                let dy = y_new[i] - y[i];
                let bspl = hs * k[0][i] - dy;
                r[0][i] = y[i];
                r[1][i] = dy;
                r[2][i] = bspl;
                r[3][i] = dy - hs * k[6][i] - bspl;
                r[4][i] =
                    hs * (D1 * k[0][i] + D3 * k[2][i] + D4 * k[3][i] + D5 * k[4][i] + D6 * k[5][i] + D7 * k[6][i]);
            }
            sol.segments.push(Segment { t0: t, h: hs, r });
            sol.steps += 1;
            t = t_new;
            y.copy_from_slice(&y_new);
            k.swap(0, 6);
            if landing {
                if station_set.contains(&t) {
                    sol.stations.push((t, y.clone()));
                }
                stop_idx += 1;
            }
            sol.t_end = t;
            sol.y_end.copy_from_slice(&y);
            // PI controller (Hairer's beta = 0.04)
            let fac = (err.max(1e-10).powf(0.2 - 0.04 * 0.75) * fac_old.powf(-0.04) / 0.9).clamp(0.1, 5.0);
            fac_old = err.max(1e-4);
            h /= fac;
        } else {
            let fac = (err.powf(0.2) / 0.9).min(10.0);
            h /= fac;
            sol.rejected += 1;
            if h < h_min {
                return Err((OdeError::StepFailure { t, h }, Box::new(sol)));
            }
        }
    }
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let opts = OdeOptions::with_tol(1e-12);
        let sol = integrate(
            |_, y, d| {
                d[0] = -y[0];
                Ok(())
            },
            0.0,
            &[1.0],
            2.0,
            &[0.5, 1.0],
            &opts,
        )
        .unwrap();
        assert!((sol.y_end[0] - (-2.0f64).exp()).abs() < 1e-11);
        assert_eq!(sol.stations.len(), 2);
        assert_eq!(sol.stations[0].0, 0.5);
        assert!((sol.stations[1].1[0] - (-1.0f64).exp()).abs() < 1e-11);
        let mid = sol.eval(1.37).unwrap();
        assert!((mid[0] - (-1.37f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn backward_oscillator() {
        let opts = OdeOptions::with_tol(1e-11);
        let sol = integrate(
            |_, y, d| {
                d[0] = y[1];
                d[1] = -y[0];
                Ok(())
            },
            1.0,
            &[1.0f64.sin(), 1.0f64.cos()],
            -2.0,
            &[0.0, -1.0],
            &opts,
        )
        .unwrap();
        assert!((sol.y_end[0] - (-2.0f64).sin()).abs() < 1e-9);
        assert_eq!(sol.stations[0].0, 0.0);
        assert!(sol.stations[0].1[0].abs() < 1e-10);
    }

    #[test]
    fn rhs_refusal_is_reported_with_partial_solution() {
        let opts = OdeOptions::with_tol(1e-9);
        let (err, partial) = integrate(
            |t, _, d| {
                if t > 0.5 {
                    return Err("past the wall".into());
                }
                d[0] = 1.0;
                Ok(())
            },
            0.0,
            &[0.0],
            1.0,
            &[],
            &opts,
        )
        .unwrap_err();
        assert!(matches!(err, OdeError::Rhs { .. }));
        assert!(partial.t_end <= 0.5);
    }
}
