//! Normal and skew-normal primitives that stay usable at extreme arguments.
//!
//! Everything is computed on the log scale. The skew-normal SN(λ) has
//! density `2 φ(x) Φ(λx)` and distribution function `F(x; λ)`.

use std::f64::consts::{LN_2, PI, SQRT_2};
use std::ops::{Add, Div, Mul, Neg, Sub};

use serde::Serialize;

use crate::error::{ensure_finite, Error, Result};
use crate::quad::log_integrate;

/// `log √(2π)`.
pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Below this point `log Φ` switches from the erfc kernel to the Mills series.
pub const MILLS_SWITCH: f64 = -8.0;

/// Magnitudes of λ below this are treated as zero when selecting quantile
/// expansion coefficients.
pub const LAMBDA_EPS: f64 = 1e-12;

const QUANTILE_MAX_ITER: usize = 200;
const QUANTILE_REL_TOL: f64 = 1e-14;
const SN_QUAD_TOL: f64 = 1e-14;

/// A signed quantity held as `sign · exp(log_v)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LogValue {
    pub log_v: f64,
    pub sign: i8,
}

impl LogValue {
    pub const ZERO: LogValue = LogValue { log_v: f64::NEG_INFINITY, sign: 0 };
    pub const ONE: LogValue = LogValue { log_v: 0.0, sign: 1 };

    /// Positive value `exp(log_v)`.
    pub fn from_log(log_v: f64) -> Self {
        if log_v == f64::NEG_INFINITY {
            Self::ZERO
        } else {
            LogValue { log_v, sign: 1 }
        }
    }

    pub fn from_signed_log(sign: i8, log_v: f64) -> Self {
        if sign == 0 || log_v == f64::NEG_INFINITY {
            Self::ZERO
        } else {
            LogValue { log_v, sign: sign.signum() }
        }
    }

    pub fn from_value(v: f64) -> Self {
        if v == 0.0 {
            Self::ZERO
        } else {
            LogValue { log_v: v.abs().ln(), sign: if v > 0.0 { 1 } else { -1 } }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.sign == 0
    }

    /// The represented value; underflows to ±0 when `log_v` is very negative.
    pub fn value(&self) -> f64 {
        match self.sign {
            0 => 0.0,
            s => f64::from(s) * self.log_v.exp(),
        }
    }

    /// Natural log of a positive value.
    pub fn ln(&self) -> Result<f64> {
        if self.sign > 0 {
            Ok(self.log_v)
        } else {
            Err(Error::Numerical(format!("log of non-positive value (sign {})", self.sign)))
        }
    }

    pub fn abs(self) -> Self {
        if self.sign == 0 {
            self
        } else {
            LogValue { log_v: self.log_v, sign: 1 }
        }
    }
}

impl Neg for LogValue {
    type Output = LogValue;
    fn neg(self) -> LogValue {
        LogValue { log_v: self.log_v, sign: -self.sign }
    }
}

impl Mul for LogValue {
    type Output = LogValue;
    fn mul(self, o: LogValue) -> LogValue {
        LogValue::from_signed_log(self.sign * o.sign, self.log_v + o.log_v)
    }
}

impl Div for LogValue {
    type Output = LogValue;
    fn div(self, o: LogValue) -> LogValue {
        assert!(o.sign != 0, "division by a zero LogValue");
        LogValue::from_signed_log(self.sign * o.sign, self.log_v - o.log_v)
    }
}

impl Add for LogValue {
    type Output = LogValue;
    fn add(self, o: LogValue) -> LogValue {
        if self.sign == 0 {
            return o;
        }
        if o.sign == 0 {
            return self;
        }
        let (big, small) = if self.log_v >= o.log_v { (self, o) } else { (o, self) };
        let r = (small.log_v - big.log_v).exp();
        if big.sign == small.sign {
            LogValue::from_signed_log(big.sign, big.log_v + r.ln_1p())
        } else if r == 1.0 {
            LogValue::ZERO
        } else {
            LogValue::from_signed_log(big.sign, big.log_v + (-r).ln_1p())
        }
    }
}

impl Sub for LogValue {
    type Output = LogValue;
    fn sub(self, o: LogValue) -> LogValue {
        self + (-o)
    }
}

/// `log(e^a + e^b)`.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        hi
    } else {
        hi + (lo - hi).exp().ln_1p()
    }
}

/// Sign of λ with the zero band used for coefficient selection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LambdaSign {
    Neg,
    Zero,
    Pos,
}

impl LambdaSign {
    pub fn of(lambda: f64) -> Self {
        if lambda.abs() < LAMBDA_EPS {
            LambdaSign::Zero
        } else if lambda > 0.0 {
            LambdaSign::Pos
        } else {
            LambdaSign::Neg
        }
    }
}

/// Coefficients of the three-term tail expansion of the SN(λ) quantile.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QuantileCoefficients {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
}

/// Expansion coefficients selected by the sign of λ.
pub fn quantile_coefficients(sign: LambdaSign, lambda: f64) -> QuantileCoefficients {
    match sign {
        LambdaSign::Pos => QuantileCoefficients {
            k1: 1.0 / (1.0 + lambda * lambda).sqrt(),
            k2: 0.5,
            k3: 0.5 * (2.0 * PI * lambda).ln(),
        },
        LambdaSign::Neg => QuantileCoefficients { k1: 1.0, k2: 0.25, k3: 0.25 * PI.ln() },
        LambdaSign::Zero => QuantileCoefficients { k1: 1.0, k2: 0.25, k3: 0.25 * (4.0 * PI).ln() },
    }
}

pub(crate) fn ln_phi(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

/// `log φ(x)` for the standard normal density.
pub fn log_norm_pdf(x: f64) -> Result<f64> {
    ensure_finite("x", x)?;
    Ok(ln_phi(x))
}

/// `log Φ(x)` from the complementary error function.
pub fn log_norm_cdf_erfc(x: f64) -> f64 {
    if x < 0.0 {
        (0.5 * libm::erfc(-x / SQRT_2)).ln()
    } else {
        (-0.5 * libm::erfc(x / SQRT_2)).ln_1p()
    }
}

/// `log Φ(x)` from the asymptotic Mills-ratio series
/// `Φ(x) = φ(x)/|x| · Σ (-1)^n (2n-1)!! / x^{2n}`, truncated at its
/// smallest term. Intended for `x ≤ -7`.
pub fn log_norm_cdf_mills(x: f64) -> f64 {
    let y = 1.0 / (x * x);
    let mut term = 1.0;
    let mut sum = 1.0;
    for n in 1..200 {
        let next = -term * (2 * n - 1) as f64 * y;
        if next.abs() >= term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() < 1e-17 * sum {
            break;
        }
    }
    ln_phi(x) - (-x).ln() + sum.ln()
}

pub(crate) fn ln_ncdf(x: f64) -> f64 {
    if x.is_nan() {
        f64::NAN
    } else if x == f64::INFINITY {
        0.0
    } else if x == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else if x >= MILLS_SWITCH {
        log_norm_cdf_erfc(x)
    } else {
        log_norm_cdf_mills(x)
    }
}

/// `log Φ(x)` for the standard normal distribution function.
pub fn log_norm_cdf(x: f64) -> Result<f64> {
    ensure_finite("x", x)?;
    Ok(ln_ncdf(x))
}

fn owen_t_core(h: f64, a: f64) -> Result<f64> {
    // 0 ≤ a ≤ 1, so the integrand is log-concave on [0, a].
    let h2 = h * h;
    let ln_2pi = (2.0 * PI).ln();
    let l = log_integrate(
        |x| {
            let s = 1.0 + x * x;
            -0.5 * h2 * s - s.ln() - ln_2pi
        },
        0.0,
        a,
        1e-14,
    )?;
    Ok(l.exp())
}

/// Owen's T function `T(h, a) = (1/2π) ∫_0^a exp(-h²(1+x²)/2)/(1+x²) dx`.
pub fn owen_t(h: f64, a: f64) -> Result<f64> {
    ensure_finite("h", h)?;
    ensure_finite("a", a)?;
    if a == 0.0 {
        return Ok(0.0);
    }
    let sign = a.signum();
    let (h, a) = (h.abs(), a.abs());
    if h == 0.0 {
        return Ok(sign * a.atan() / (2.0 * PI));
    }
    let t = if a <= 1.0 {
        owen_t_core(h, a)?
    } else {
        // T(h,a) = ½Φ(h) + ½Φ(ah) - Φ(h)Φ(ah) - T(ah, 1/a), rewritten in
        // upper tails to avoid cancellation of the leading ones.
        let p = ln_ncdf(-h).exp();
        let q = ln_ncdf(-a * h).exp();
        0.5 * (p + q) - p * q - owen_t_core(a * h, 1.0 / a)?
    };
    Ok(sign * t)
}

/// `log f(x; λ) = log 2 + log φ(x) + log Φ(λx)`.
pub fn sn_log_pdf(x: f64, lambda: f64) -> f64 {
    LN_2 + ln_phi(x) + ln_ncdf(lambda * x)
}

/// `log F(x; λ)` for `x ≤ 0`.
fn sn_log_cdf_lower(x: f64, lambda: f64) -> Result<f64> {
    if lambda < 0.0 && x >= MILLS_SWITCH {
        // F = Φ(x) + 2T(x, |λ|): both terms positive, no cancellation.
        let f = ln_ncdf(x).exp() + 2.0 * owen_t(x, -lambda)?;
        return Ok(f.ln());
    }
    log_integrate(|t| sn_log_pdf(t, lambda), f64::NEG_INFINITY, x, SN_QUAD_TOL)
}

/// `log F(x; λ)` of the skew-normal SN(λ).
///
/// Moderate arguments with λ < 0 use `Φ(x) - 2T(x, λ)`; the left tail and
/// all arguments with λ > 0 (where that difference cancels) integrate the
/// log-density directly. For `x > 0` the complement `F(-x; -λ)` is evaluated
/// instead so that `log F` keeps full precision near zero.
pub fn sn_log_cdf(x: f64, lambda: f64) -> Result<f64> {
    ensure_finite("x", x)?;
    ensure_finite("lambda", lambda)?;
    if lambda == 0.0 {
        return Ok(ln_ncdf(x));
    }
    if x <= 0.0 {
        sn_log_cdf_lower(x, lambda)
    } else {
        let upper = sn_log_cdf_lower(-x, -lambda)?;
        Ok((-upper.exp()).ln_1p())
    }
}

/// Three-term tail expansion of the SN(λ) quantile at `log u`.
pub fn sn_quantile_expansion(log_u: f64, lambda: f64) -> Result<f64> {
    ensure_finite("lambda", lambda)?;
    if !(log_u < -1.0) {
        return Err(Error::Domain(format!("expansion requires log_u < -1, got {log_u}")));
    }
    let k = quantile_coefficients(LambdaSign::of(lambda), lambda);
    Ok(expansion_with(log_u, &k))
}

pub(crate) fn expansion_with(log_u: f64, k: &QuantileCoefficients) -> f64 {
    let ll = (-log_u).ln();
    -k.k1 * (-2.0 * log_u).sqrt() * (1.0 + k.k2 * ll / log_u + k.k3 / log_u)
}

/// The SN(λ) quantile at probability `exp(log_u)`.
///
/// Brackets the root around the tail expansion (or zero for `log_u ≥ -1`)
/// and refines with Newton steps on `log F`, falling back to bisection
/// whenever a step leaves the bracket.
pub fn sn_quantile(log_u: f64, lambda: f64) -> Result<f64> {
    ensure_finite("lambda", lambda)?;
    if !(log_u < 0.0) || !log_u.is_finite() {
        return Err(Error::Domain(format!("quantile requires finite log_u < 0, got {log_u}")));
    }
    let resid = |x: f64| -> Result<(f64, f64)> {
        let lf = sn_log_cdf(x, lambda)?;
        Ok((lf - log_u, lf))
    };
    let x0 = if log_u < -1.0 { sn_quantile_expansion(log_u, lambda)? } else { 0.0 };
    let (mut lo, mut hi) = (x0 - 2.0, x0 + 2.0);
    let mut width = 2.0;
    let mut expansions = 0;
    while resid(lo)?.0 > 0.0 {
        lo -= width;
        width *= 2.0;
        expansions += 1;
        if expansions > 60 {
            return Err(Error::Convergence(format!("cannot bracket quantile below {lo} (log_u {log_u}, λ {lambda})")));
        }
    }
    width = 2.0;
    while resid(hi)?.0 < 0.0 {
        hi += width;
        width *= 2.0;
        expansions += 1;
        if expansions > 120 {
            return Err(Error::Convergence(format!("cannot bracket quantile above {hi} (log_u {log_u}, λ {lambda})")));
        }
    }
    let mut x = x0.clamp(lo, hi);
    for _ in 0..QUANTILE_MAX_ITER {
        let (r, lf) = resid(x)?;
        if r == 0.0 {
            return Ok(x);
        }
        if r < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let slope = (sn_log_pdf(x, lambda) - lf).exp();
        let mut next = x - r / slope;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        let tol = QUANTILE_REL_TOL * next.abs().max(1.0);
        if (next - x).abs() <= tol || hi - lo <= tol {
            return Ok(next);
        }
        x = next;
    }
    Err(Error::Convergence(format!(
        "quantile did not converge in {QUANTILE_MAX_ITER} iterations (log_u {log_u}, λ {lambda}, bracket [{lo}, {hi}])"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_value_signed_arithmetic() {
        let a = LogValue::from_value(3.0);
        let b = LogValue::from_value(-5.0);
        assert!(((a + b).value() + 2.0).abs() < 1e-15);
        assert!(((a - b).value() - 8.0).abs() < 1e-14);
        assert!(((a * b).value() + 15.0).abs() < 1e-13);
        assert!((a - a).is_zero());
        let tiny = LogValue::from_log(-5000.0);
        let sum = tiny + tiny;
        assert!((sum.log_v - (-5000.0 + LN_2)).abs() < 1e-12);
    }

    #[test]
    fn quantile_at_median_of_normal() {
        assert_eq!(sn_quantile(0.5f64.ln(), 0.0).unwrap(), 0.0);
    }
}
