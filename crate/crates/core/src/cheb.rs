//! Chebyshev series on an interval: fitting from Chebyshev–Lobatto samples,
//! Clenshaw evaluation, differentiation and integration.

use std::f64::consts::PI;

use crate::C64;

/// `x_j = mid + half * cos(pi j / n)`, `j = 0..=n`, in decreasing order.
pub fn lobatto_nodes(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
    (0..=n)
        .map(|j| {
            if j == 0 {
                hi
            } else if j == n {
                lo
            } else {
                mid + half * (PI * j as f64 / n as f64).cos()
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cheb {
    lo: f64,
    hi: f64,
    coeffs: Vec<f64>,
}

impl Cheb {
    pub fn from_coeffs(lo: f64, hi: f64, coeffs: Vec<f64>) -> Self {
        Cheb { lo, hi, coeffs }
    }

    /// Interpolant through values at `lobatto_nodes(lo, hi, n)`, `n = values.len() - 1`.
    pub fn fit(lo: f64, hi: f64, values: &[f64]) -> Self {
        let n = values.len() - 1;
        assert!(n >= 1, "need at least two samples");
        let nf = n as f64;
        let mut coeffs = vec![0.0; n + 1];
        for (k, ck) in coeffs.iter_mut().enumerate() {
            let mut s = 0.0;
            for (j, &v) in values.iter().enumerate() {
                let w = if j == 0 || j == n { 0.5 } else { 1.0 };
                // cos(pi j k / n) with the argument reduced mod 2n for accuracy
                let m = (j * k) % (2 * n);
                s += w * v * (PI * m as f64 / nf).cos();
            }
            *ck = 2.0 * s / nf;
        }
        coeffs[0] *= 0.5;
        coeffs[n] *= 0.5;
        Cheb { lo, hi, coeffs }
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Drop trailing coefficients below `cutoff * max|c_k|`.
    pub fn chop(mut self, cutoff: f64) -> Self {
        let scale = self.coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        let keep = self
            .coeffs
            .iter()
            .rposition(|c| c.abs() > cutoff * scale)
            .map_or(1, |k| k + 1);
        self.coeffs.truncate(keep);
        self
    }

    fn to_unit(&self, x: f64) -> f64 {
        (2.0 * x - self.lo - self.hi) / (self.hi - self.lo)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let u = self.to_unit(x);
        let (mut b1, mut b2) = (0.0, 0.0);
        for &c in self.coeffs.iter().skip(1).rev() {
            let b0 = c + 2.0 * u * b1 - b2;
            b2 = b1;
            b1 = b0;
        }
        self.coeffs.first().copied().unwrap_or(0.0) + u * b1 - b2
    }

    pub fn derivative(&self) -> Cheb {
        let n = self.coeffs.len();
        if n <= 1 {
            return Cheb::from_coeffs(self.lo, self.hi, vec![0.0]);
        }
        let mut d = vec![0.0; n + 1];
        for k in (0..n - 1).rev() {
            d[k] = d[k + 2] + 2.0 * (k + 1) as f64 * self.coeffs[k + 1];
        }
        d[0] *= 0.5;
        d.truncate(n - 1);
        let scale = 2.0 / (self.hi - self.lo);
        d.iter_mut().for_each(|c| *c *= scale);
        Cheb::from_coeffs(self.lo, self.hi, d)
    }

    /// Antiderivative vanishing at `x0`.
    pub fn integral(&self, x0: f64) -> Cheb {
        let n = self.coeffs.len();
        let c = |k: usize| self.coeffs.get(k).copied().unwrap_or(0.0);
        let mut out = vec![0.0; n + 1];
        for (k, slot) in out.iter_mut().enumerate().skip(1) {
            *slot = if k == 1 {
                c(0) - 0.5 * c(2)
            } else {
                (c(k - 1) - c(k + 1)) / (2.0 * k as f64)
            };
        }
        let half = 0.5 * (self.hi - self.lo);
        out.iter_mut().for_each(|v| *v *= half);
        let mut res = Cheb::from_coeffs(self.lo, self.hi, out);
        res.coeffs[0] = -res.eval(x0);
        res
    }
}

/// Complex-valued series as a pair of real ones.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebC {
    pub re: Cheb,
    pub im: Cheb,
}

impl ChebC {
    pub fn fit(lo: f64, hi: f64, values: &[C64]) -> Self {
        let re: Vec<f64> = values.iter().map(|v| v.re).collect();
        let im: Vec<f64> = values.iter().map(|v| v.im).collect();
        ChebC {
            re: Cheb::fit(lo, hi, &re),
            im: Cheb::fit(lo, hi, &im),
        }
    }

    pub fn chop(self, cutoff: f64) -> Self {
        // a shared scale so a tiny imaginary part is not blown up to full length
        let scale = self
            .re
            .coeffs
            .iter()
            .chain(self.im.coeffs.iter())
            .fold(0.0f64, |m, c| m.max(c.abs()));
        let chop_abs = |mut c: Cheb| {
            let keep = c
                .coeffs
                .iter()
                .rposition(|v| v.abs() > cutoff * scale)
                .map_or(1, |k| k + 1);
            c.coeffs.truncate(keep);
            c
        };
        ChebC {
            re: chop_abs(self.re),
            im: chop_abs(self.im),
        }
    }

    pub fn eval(&self, x: f64) -> C64 {
        C64::new(self.re.eval(x), self.im.eval(x))
    }

    pub fn derivative(&self) -> ChebC {
        ChebC {
            re: self.re.derivative(),
            im: self.im.derivative(),
        }
    }
}
