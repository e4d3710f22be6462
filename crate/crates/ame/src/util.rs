//! Small shared numerics: monotone cubic interpolation and bracketed roots.

use crate::error::{Error, Result};

/// Fritsch-Carlson slopes for a monotone piecewise-cubic interpolant.
pub fn monotone_slopes(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = xs.len();
    assert!(n >= 2 && ys.len() == n);
    let mut d = vec![0.0; n - 1];
    for i in 0..n - 1 {
        d[i] = (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]);
    }
    let mut m = vec![0.0; n];
    m[0] = d[0];
    m[n - 1] = d[n - 2];
    for i in 1..n - 1 {
        if d[i - 1] * d[i] <= 0.0 {
            m[i] = 0.0;
        } else {
            // weighted harmonic mean keeps the interpolant monotone
            let w1 = 2.0 * (xs[i + 1] - xs[i]) + (xs[i] - xs[i - 1]);
            let w2 = (xs[i + 1] - xs[i]) + 2.0 * (xs[i] - xs[i - 1]);
            m[i] = (w1 + w2) / (w1 / d[i - 1] + w2 / d[i]);
        }
    }
    // clamp endpoints
    for i in [0, n - 1] {
        let dd = if i == 0 { d[0] } else { d[n - 2] };
        if m[i] * dd <= 0.0 {
            m[i] = 0.0;
        } else if m[i].abs() > 3.0 * dd.abs() {
            m[i] = 3.0 * dd;
        }
    }
    m
}

/// Cubic Hermite segment evaluation.
pub fn hermite_eval(x0: f64, x1: f64, y0: f64, y1: f64, m0: f64, m1: f64, x: f64) -> f64 {
    let h = x1 - x0;
    let t = (x - x0) / h;
    let t2 = t * t;
    let t3 = t2 * t;
    y0 * (2.0 * t3 - 3.0 * t2 + 1.0)
        + m0 * h * (t3 - 2.0 * t2 + t)
        + y1 * (-2.0 * t3 + 3.0 * t2)
        + m1 * h * (t3 - t2)
}

/// Monotone cubic interpolant over fixed knots (Fritsch-Carlson).
#[derive(Debug, Clone)]
pub struct MonotoneCubic {
    xs: Vec<f64>,
    ys: Vec<f64>,
    ms: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() < 2 || xs.len() != ys.len() {
            return Err(Error::InvalidSchedule(
                "interpolation table needs at least two rows".into(),
            ));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidSchedule(
                "interpolation abscissae must be strictly increasing".into(),
            ));
        }
        let ms = monotone_slopes(&xs, &ys);
        Ok(Self { xs, ys, ms })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1];
        }
        let k = match self
            .xs
            .binary_search_by(|v| v.partial_cmp(&x).unwrap())
        {
            Ok(i) => return self.ys[i],
            Err(i) => i - 1,
        };
        hermite_eval(
            self.xs[k],
            self.xs[k + 1],
            self.ys[k],
            self.ys[k + 1],
            self.ms[k],
            self.ms[k + 1],
            x,
        )
    }
}

/// Bisection on a bracketing interval; f(lo) and f(hi) must differ in sign.
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, what: &str) -> Result<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo * fhi > 0.0 {
        return Err(Error::NoRoot(what.to_string()));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 || (hi - lo).abs() <= 1e-15 * mid.abs().max(1.0) {
            return Ok(mid);
        }
        if flo * fm < 0.0 {
            hi = mid;
        } else {
            lo = mid;
            flo = fm;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monotone_cubic_preserves_monotonicity() {
        let xs = vec![0.0, 0.3, 0.5, 0.8, 1.0];
        let ys = vec![0.0, 0.1, 2.0, 2.05, 3.0];
        let mc = MonotoneCubic::new(xs.clone(), ys.clone()).unwrap();
        let mut prev = -1.0;
        for i in 0..=400 {
            let x = i as f64 / 400.0;
            let y = mc.eval(x);
            assert!(y >= prev - 1e-12, "not monotone at x={x}");
            prev = y;
        }
        for (x, y) in xs.iter().zip(ys.iter()) {
            assert!((mc.eval(*x) - y).abs() < 1e-12);
        }
    }

    #[test]
    fn bisect_finds_sqrt2() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, "sqrt2").unwrap();
        assert!((r - std::f64::consts::SQRT_2).abs() < 1e-12);
    }
}
