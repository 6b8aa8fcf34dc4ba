//! Slow, independent reference implementations used to check the kernels.
#![allow(dead_code)]

use std::f64::consts::PI;

/// `ln Γ(z)` for `z > 0` by upward recurrence and Stirling's series.
pub fn ln_gamma(z: f64) -> f64 {
    let mut shift = 0.0;
    let mut x = z;
    while x < 30.0 {
        shift -= x.ln();
        x += 1.0;
    }
    let x2 = x * x;
    let series = 1.0 / (12.0 * x) - 1.0 / (360.0 * x * x2) + 1.0 / (1260.0 * x * x2 * x2)
        - 1.0 / (1680.0 * x * x2 * x2 * x2);
    shift + (x - 0.5) * x.ln() - x + 0.5 * (2.0 * PI).ln() + series
}

/// `erf(x)` from its Maclaurin series; accurate for `|x| <= 4`.
pub fn erf(x: f64) -> f64 {
    let mut term = x;
    let mut sum = x;
    let x2 = x * x;
    let mut k = 0.0;
    loop {
        k += 1.0;
        term *= -x2 / k;
        let add = term / (2.0 * k + 1.0);
        sum += add;
        if add.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    2.0 / PI.sqrt() * sum
}

pub fn norm_cdf(x: f64) -> f64 {
    0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2))
}

/// Lower regularized incomplete gamma by its power series only.
pub fn gamma_p(a: f64, x: f64) -> f64 {
    let mut term = 1.0 / a;
    let mut sum = term;
    let mut k = 0.0;
    loop {
        k += 1.0;
        term *= x / (a + k);
        sum += term;
        if term <= 1e-17 * sum {
            break;
        }
    }
    (a * x.ln() - x - ln_gamma(a) + sum.ln()).exp()
}

pub fn chisq_cdf(x: f64, df: f64) -> f64 {
    gamma_p(0.5 * df, 0.5 * x)
}

/// Student-t CDF by composite Simpson integration of the density on `[0, t]`.
pub fn t_cdf(t: f64, df: f64) -> f64 {
    let c = (ln_gamma(0.5 * (df + 1.0)) - ln_gamma(0.5 * df) - 0.5 * (df * PI).ln()).exp();
    let f = |x: f64| c * (1.0 + x * x / df).powf(-0.5 * (df + 1.0));
    let steps = 4000;
    let h = t / steps as f64;
    let mut s = f(0.0) + f(t);
    for i in 1..steps {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
    }
    0.5 + s * h / 3.0
}

/// Root of an increasing function on `[lo, hi]` by plain bisection.
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn inv_norm(p: f64) -> f64 {
    bisect(|x| norm_cdf(x) - p, -8.0, 8.0, 1e-13)
}

pub fn inv_chisq(p: f64, df: f64) -> f64 {
    bisect(|x| chisq_cdf(x, df) - p, 0.0, 20.0 * df + 100.0, 1e-12)
}

pub fn t_quantile(p: f64, df: f64) -> f64 {
    bisect(|x| t_cdf(x, df) - p, 0.0, 50.0, 1e-12)
}

pub fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let ss = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>();
    (m, (ss / (n - 1.0)).sqrt())
}
