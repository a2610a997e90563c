//! Independent reference implementations used as test oracles.
//!
//! Nothing here calls into the library. The normal cdf uses the Taylor
//! series near the origin and Laplace's continued fraction in the tails;
//! integrals use double-exponential trapezoid sums in log space.

#![allow(dead_code)]

use std::f64::consts::PI;

pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

pub fn ln_phi(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

/// `log Φ(x)`.
pub fn ln_ncdf(x: f64) -> f64 {
    if x == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if x == f64::INFINITY {
        return 0.0;
    }
    if x < -3.0 {
        let z = -x;
        let mut t = z;
        for k in (1..=400).rev() {
            t = z + k as f64 / t;
        }
        ln_phi(x) - t.ln()
    } else if x <= 3.0 {
        let mut term = x;
        let mut sum = x;
        let mut n = 0.0;
        while term.abs() > 1e-18 * sum.abs().max(1e-300) {
            n += 1.0;
            term *= x * x / (2.0 * n + 1.0);
            sum += term;
        }
        (0.5 + ln_phi(x).exp() * sum).ln()
    } else {
        (-ln_ncdf(-x).exp()).ln_1p()
    }
}

pub fn log_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        hi
    } else {
        hi + (lo - hi).exp().ln_1p()
    }
}

fn log_sum(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Trapezoid sum in log space of `g(x(t)) + log x'(t)` over `t ∈ [-T, T]`,
/// halving the step until two levels agree.
fn de_trapezoid<M: Fn(f64) -> (f64, f64), G: Fn(f64) -> f64>(g: &G, map: &M, tmax: f64, tol: f64) -> f64 {
    let eval = |h: f64| {
        let n = (tmax / h).ceil() as i64;
        let terms: Vec<f64> = (-n..=n)
            .map(|k| {
                let (x, ljac) = map(k as f64 * h);
                if ljac == f64::NEG_INFINITY || !x.is_finite() {
                    f64::NEG_INFINITY
                } else {
                    let v = g(x);
                    if v.is_nan() { f64::NEG_INFINITY } else { v + ljac }
                }
            })
            .collect();
        log_sum(&terms) + h.ln()
    };
    let mut h = 0.125;
    let mut prev = eval(h);
    loop {
        h *= 0.5;
        let cur = eval(h);
        if (cur - prev).abs() <= tol * cur.abs().max(1.0) || h < 1e-5 {
            return cur;
        }
        prev = cur;
    }
}

/// `log ∫_{-∞}^{b} exp(g(x)) dx` by the exp-sinh substitution `x = b - e^{π/2 sinh t}`.
pub fn log_integral_lower(g: impl Fn(f64) -> f64, b: f64) -> f64 {
    let map = |t: f64| {
        let s = 0.5 * PI * t.sinh();
        (b - s.exp(), s + (0.5 * PI * t.cosh()).ln())
    };
    de_trapezoid(&g, &map, 4.5, 1e-13)
}

/// `log ∫_{-∞}^{∞} exp(g(x)) dx` by the sinh-sinh substitution around `center`.
pub fn log_integral_full(g: impl Fn(f64) -> f64, center: f64) -> f64 {
    let lower = log_integral_lower(&g, center);
    let upper = log_integral_lower(|x| g(2.0 * center - x), center);
    log_add(lower, upper)
}

/// `log ∫_a^b exp(g(x)) dx` by tanh-sinh.
pub fn log_integral_finite(g: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    let map = |t: f64| {
        let u = 0.5 * PI * t.sinh();
        let ch = u.cosh();
        let x = c + r * u.tanh();
        let ljac = r.ln() + (0.5 * PI * t.cosh()).ln() - 2.0 * ch.ln();
        (x, ljac)
    };
    de_trapezoid(&g, &map, 3.5, 1e-14)
}

/// `log F(x; λ)` of the skew-normal.
pub fn sn_log_cdf(x: f64, lambda: f64) -> f64 {
    if x <= 0.0 {
        log_integral_lower(|t| std::f64::consts::LN_2 + ln_phi(t) + ln_ncdf(lambda * t), x)
    } else {
        (-sn_log_cdf(-x, -lambda).exp()).ln_1p()
    }
}

/// Skew-normal quantile by plain bisection.
pub fn sn_quantile(log_u: f64, lambda: f64) -> f64 {
    let (mut lo, mut hi) = (-1.0, 1.0);
    while sn_log_cdf(lo, lambda) > log_u {
        lo *= 2.0;
    }
    while sn_log_cdf(hi, lambda) < log_u {
        hi *= 2.0;
    }
    while hi - lo > 1e-15 * hi.abs().max(lo.abs()).max(1.0) {
        let mid = 0.5 * (lo + hi);
        if sn_log_cdf(mid, lambda) < log_u {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Owen's T by tanh-sinh quadrature of its defining integrand.
pub fn owen_t(h: f64, a: f64) -> f64 {
    if a == 0.0 {
        return 0.0;
    }
    let s = a.signum();
    let l = log_integral_finite(|x| -0.5 * h * h * (1.0 + x * x) - (1.0 + x * x).ln() - (2.0 * PI).ln(), 0.0, a.abs());
    s * l.exp()
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
