//! Asymptotics of `I(a, b, c) = ∫_{-∞}^{a} Φ(x) φ(cx + b) dx` as `a → -∞`
//! with `b/a → k`, and the two reparameterizations of the conditional
//! probability that lead to it.

use std::f64::consts::{LN_2, PI};

use serde::Serialize;

use crate::classify::{DerivedQuantities, Level, LimitTag, Parameters};
use crate::error::{ensure_finite, Error, Result};
use crate::quad::{log_integrate, DEFAULT_REL_TOL};
use crate::sn_special::{ln_ncdf, ln_phi, LogValue, LN_SQRT_2PI};

/// Limit of `v = (a(1+c²) + cb)/√(1+c²)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    VToNegInf,
    VToZero,
    VToPosInf,
}

impl Regime {
    /// Regime implied by the sign of `β1` (`1`, `0`, `-1`).
    pub fn from_beta_sign(s: i8) -> Self {
        match s {
            1 => Regime::VToNegInf,
            0 => Regime::VToZero,
            _ => Regime::VToPosInf,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Theorem1Input {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// Limit of `b/a`.
    pub k: f64,
    pub regime: Regime,
}

impl Theorem1Input {
    pub fn v(&self) -> f64 {
        let q = 1.0 + self.c * self.c;
        (self.a * q + self.c * self.b) / q.sqrt()
    }

    fn check(&self) -> Result<()> {
        for (n, x) in [("a", self.a), ("b", self.b), ("c", self.c), ("k", self.k)] {
            ensure_finite(n, x)?;
        }
        if !(self.a < -2.0) {
            return Err(Error::Precondition(format!("the three-regime expansion needs a < -2, got {}", self.a)));
        }
        let q = 1.0 + self.c * self.c;
        let v = self.v();
        match self.regime {
            Regime::VToNegInf if v >= 0.0 => {
                Err(Error::Contract(format!("regime v -> -inf but v = {v} at a = {}", self.a)))
            }
            Regime::VToZero if v.abs() > self.a.abs().sqrt() => {
                Err(Error::Contract(format!("regime v -> 0 but v = {v} at a = {}", self.a)))
            }
            Regime::VToPosInf if q + self.c * self.k > 1e-12 * q => Err(Error::Contract(format!(
                "regime v -> +inf needs 1 + c² + ck <= 0, got {}",
                q + self.c * self.k
            ))),
            Regime::VToPosInf if v <= 0.0 => {
                Err(Error::Contract(format!("regime v -> +inf but v = {v} at a = {}", self.a)))
            }
            _ => Ok(()),
        }
    }
}

/// Leading asymptotic of `I(a, b, c)` in the declared regime.
pub fn theorem1_asym(inp: &Theorem1Input) -> Result<LogValue> {
    inp.check()?;
    Ok(theorem1_formula(inp))
}

/// The branch formula of the declared regime, without checking that the
/// inputs are consistent with it.
pub fn theorem1_formula(inp: &Theorem1Input) -> LogValue {
    let Theorem1Input { a, b, c, k, regime } = *inp;
    let q = 1.0 + c * c;
    let e = -b * b / (2.0 * q);
    let v = inp.v();
    let l = match regime {
        Regime::VToNegInf => e - 0.5 * v * v - (2.0 * PI).ln() - 0.5 * q.ln() - (-a).ln() - v.abs().ln(),
        Regime::VToZero => 0.5 * q.ln() + e - LN_2 - LN_SQRT_2PI - (-a).ln() - (c * k).abs().ln(),
        Regime::VToPosInf => 0.5 * q.ln() + e - LN_SQRT_2PI - (-a).ln() - (c * k).abs().ln(),
    };
    LogValue::from_log(l)
}

/// The `v → 0` branch written with `|ck| = 1 + c²` substituted.
pub fn theorem1_zero_alternate(inp: &Theorem1Input) -> Result<LogValue> {
    let mut i = *inp;
    i.regime = Regime::VToZero;
    i.check()?;
    let q = 1.0 + i.c * i.c;
    Ok(LogValue::from_log(-i.b * i.b / (2.0 * q) - LN_2 - LN_SQRT_2PI - 0.5 * q.ln() - (-i.a).ln()))
}

/// `log I(a, b, c)` by quadrature; `a` may be `+∞` when `c ≠ 0`.
pub fn exact_integral(a: f64, b: f64, c: f64) -> Result<LogValue> {
    ensure_finite("b", b)?;
    ensure_finite("c", c)?;
    if a.is_nan() || a == f64::NEG_INFINITY {
        return Err(Error::Domain(format!("upper limit must be finite or +inf, got {a}")));
    }
    if a == f64::INFINITY && c == 0.0 {
        return Err(Error::Domain("integral diverges for c = 0 and a = +inf".into()));
    }
    let l = log_integrate(|x| ln_ncdf(x) + ln_phi(c * x + b), f64::NEG_INFINITY, a, DEFAULT_REL_TOL)
        .map_err(|e| Error::Numerical(format!("I(a={a}, b={b}, c={c}): {e}")))?;
    Ok(LogValue::from_log(l))
}

/// `log ∫_{-∞}^{a} φ(x)/|x| · φ(cx + b) dx`, the integral obtained by
/// replacing `Φ(x)` with its leading Mills form. Needs `a < -1`.
pub fn mills_reduced_integral(a: f64, b: f64, c: f64) -> Result<LogValue> {
    ensure_finite("a", a)?;
    ensure_finite("b", b)?;
    ensure_finite("c", c)?;
    if !(a < -1.0) {
        return Err(Error::Domain(format!("mills-reduced integral needs a < -1, got {a}")));
    }
    let l = log_integrate(|x| ln_phi(x) - (-x).ln() + ln_phi(c * x + b), f64::NEG_INFINITY, a, DEFAULT_REL_TOL)
        .map_err(|e| Error::Numerical(format!("mills-reduced I(a={a}, b={b}, c={c}): {e}")))?;
    Ok(LogValue::from_log(l))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Sandwich {
    pub lower: LogValue,
    pub upper: LogValue,
}

/// Lower and upper bounds on [`mills_reduced_integral`]; the upper bound
/// also bounds [`exact_integral`] because `Φ(x) ≤ φ(x)/|x|` for `x < 0`.
pub fn sandwich_bounds(a: f64, b: f64, c: f64) -> Result<Sandwich> {
    ensure_finite("a", a)?;
    ensure_finite("b", b)?;
    ensure_finite("c", c)?;
    if !(a < 0.0) {
        return Err(Error::Domain(format!("bounds need a < 0, got {a}")));
    }
    let q = 1.0 + c * c;
    let v = (a * q + c * b) / q.sqrt();
    let delta = 1.0 / (a * q.sqrt());
    let pre = -b * b / (2.0 * q) - (2.0 * PI).ln() - 0.5 * q.ln() - (-a).ln() + LN_SQRT_2PI;
    let w = v + delta;
    Ok(Sandwich {
        lower: LogValue::from_log(pre + 0.5 * w * w - 0.5 * v * v + ln_ncdf(w)),
        upper: LogValue::from_log(pre + ln_ncdf(v)),
    })
}

/// Route-1 pieces of the conditional probability:
/// `P = boundary - integral`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Route1 {
    /// `Φ(A1/s) Φ(B) / Φ(λ2 F2)`.
    pub boundary: LogValue,
    /// `α1 s I(A1/s, (α2+ρα1)F2, α1 s) / Φ(λ2 F2)`, signed like `α1`.
    pub integral: LogValue,
}

impl Route1 {
    pub fn total(&self) -> LogValue {
        self.boundary - self.integral
    }
}

fn require_a_to_neg_inf(d: &DerivedQuantities) -> Result<()> {
    if d.a_class.tag != LimitTag::ToNegInfinity {
        return Err(Error::Precondition(format!(
            "route 1 needs A1 -> -inf (gamma1 - rho = {})",
            d.a_class.rate
        )));
    }
    Ok(())
}

/// Asymptotic Route-1 terms at `u_log`.
pub fn route1_terms(u_log: f64, p: &Parameters, d: &DerivedQuantities) -> Result<Route1> {
    require_a_to_neg_inf(d)?;
    route1_terms_at(&Level::at(p, u_log)?, p, d)
}

/// [`route1_terms`] at precomputed quantiles.
pub fn route1_terms_at(lv: &Level, p: &Parameters, d: &DerivedQuantities) -> Result<Route1> {
    require_a_to_neg_inf(d)?;
    if p.alpha1 == 0.0 {
        return Err(Error::Precondition("route 1 terms need alpha1 != 0".into()));
    }
    let s = p.s();
    let a1 = lv.a(1, p.rho);
    let b = lv.b(p);
    let f2 = lv.f2;
    let ln_den = ln_ncdf(d.lambda2 * f2);
    let ea = -a1 * a1 / (2.0 * s * s);
    let boundary = match d.b_class.tag {
        LimitTag::ToNegInfinity => {
            s.ln() + ea - 0.5 * b * b - (2.0 * PI).ln() - (-a1).ln() - b.abs().ln() - ln_den
        }
        LimitTag::ToZero => s.ln() + ea - LN_2 - LN_SQRT_2PI - (-a1).ln() - ln_den,
        LimitTag::ToPosInfinity => s.ln() + ea - LN_SQRT_2PI - (-a1).ln() - ln_den,
    };
    let al = p.alpha1.abs().ln();
    let el = -0.5 * d.lambda2 * d.lambda2 * f2 * f2;
    let integral = match d.beta_sign(1) {
        1 => {
            al + s.ln() + ea - 0.5 * b * b
                - (2.0 * PI).ln()
                - ln_den
                - f2.abs().ln()
                - (-a1).ln()
                - d.beta1.ln()
        }
        0 => {
            al + 2.0 * s.ln() + el
                - LN_2
                - LN_SQRT_2PI
                - ln_den
                - (-a1).ln()
                - 0.5 * (1.0 + p.alpha1 * p.alpha1 * s * s).ln()
        }
        _ => al + el - LN_SQRT_2PI - ln_den - (p.alpha1 * d.lambda2 * f2).abs().ln(),
    };
    let sign = if p.alpha1 > 0.0 { 1 } else { -1 };
    Ok(Route1 { boundary: LogValue::from_log(boundary), integral: LogValue::from_signed_log(sign, integral) })
}

/// Route-1 terms evaluated exactly at precomputed quantiles.
pub fn route1_exact_at(lv: &Level, p: &Parameters, d: &DerivedQuantities) -> Result<Route1> {
    let s = p.s();
    let a = lv.a(1, p.rho) / s;
    let ln_den = ln_ncdf(d.lambda2 * lv.f2);
    let boundary = LogValue::from_log(ln_ncdf(a) + ln_ncdf(lv.b(p)) - ln_den);
    if p.alpha1 == 0.0 {
        return Ok(Route1 { boundary, integral: LogValue::ZERO });
    }
    let i = exact_integral(a, (p.alpha2 + p.rho * p.alpha1) * lv.f2, p.alpha1 * s)?;
    let scale = LogValue::from_value(p.alpha1 * s) / LogValue::from_log(ln_den);
    Ok(Route1 { boundary, integral: scale * i })
}

pub fn route1_exact(u_log: f64, p: &Parameters, d: &DerivedQuantities) -> Result<Route1> {
    route1_exact_at(&Level::at(p, u_log)?, p, d)
}

fn require_route2(p: &Parameters, d: &DerivedQuantities) -> Result<()> {
    if !(p.alpha1 > 0.0) {
        return Err(Error::Precondition(format!("route 2 needs alpha1 > 0, got {}", p.alpha1)));
    }
    if d.b_class.tag != LimitTag::ToNegInfinity {
        return Err(Error::Precondition(format!(
            "route 2 needs B -> -inf (alpha1 gamma1 + alpha2 = {})",
            d.b_class.rate
        )));
    }
    Ok(())
}

/// Asymptotic Route-2 value of the conditional probability at `u_log`.
pub fn route2_term(u_log: f64, p: &Parameters, d: &DerivedQuantities) -> Result<LogValue> {
    require_route2(p, d)?;
    route2_term_at(&Level::at(p, u_log)?, p, d)
}

pub fn route2_term_at(lv: &Level, p: &Parameters, d: &DerivedQuantities) -> Result<LogValue> {
    require_route2(p, d)?;
    if !(d.beta1 > 0.0) {
        return Err(Error::Contract(format!("B -> -inf requires beta1 > 0, got {}", d.beta1)));
    }
    let beta_u = lv.beta(1, p);
    if !(beta_u > 0.0) {
        return Err(Error::Contract(format!("beta1(u) = {beta_u} is not positive at u_log = {}", lv.u_log)));
    }
    let s = p.s();
    let a1 = lv.a(1, p.rho);
    let b = lv.b(p);
    let l = -a1 * a1 / (2.0 * s * s) - 0.5 * b * b
        - (2.0 * PI).ln()
        - s.ln()
        - ln_ncdf(d.lambda2 * lv.f2)
        - b.abs().ln()
        - lv.f2.abs().ln()
        - beta_u.ln();
    Ok(LogValue::from_log(l))
}

/// Route-2 integral evaluated exactly; needs `α1 > 0` only.
pub fn route2_exact_at(lv: &Level, p: &Parameters, d: &DerivedQuantities) -> Result<LogValue> {
    if !(p.alpha1 > 0.0) {
        return Err(Error::Precondition(format!("route 2 needs alpha1 > 0, got {}", p.alpha1)));
    }
    let m = p.alpha1 * p.s();
    let i = exact_integral(lv.b(p), -(p.alpha2 + p.rho * p.alpha1) * lv.f2 / m, 1.0 / m)?;
    Ok(LogValue::from_log(i.log_v - m.ln() - ln_ncdf(d.lambda2 * lv.f2)))
}

pub fn route2_exact(u_log: f64, p: &Parameters, d: &DerivedQuantities) -> Result<LogValue> {
    route2_exact_at(&Level::at(p, u_log)?, p, d)
}
