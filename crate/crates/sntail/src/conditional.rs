//! The two summands of `dC(u,u)/du`:
//! `P(Z_i ≤ F_i^{-1}(u) | Z_{3-i} = F_{3-i}^{-1}(u))`.
//!
//! Index 2 is always handled by interchanging the coordinates and reusing
//! the index-1 formulas.

use std::f64::consts::{LN_2, PI};

use serde::Serialize;

use crate::classify::{derive_with, DerivedQuantities, Level, LimitTag, Parameters};
use crate::error::{Error, Result};
use crate::quad::{log_integrate, DEFAULT_REL_TOL};
use crate::sn_special::{ln_ncdf, ln_phi, log_add_exp, LogValue, LN_SQRT_2PI};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CondQuery {
    pub u_log: f64,
    /// Index of the coordinate bounded above; the other one is conditioned on.
    pub which: usize,
    pub params: Parameters,
}

impl CondQuery {
    pub fn new(u_log: f64, which: usize, params: Parameters) -> Result<Self> {
        if !(u_log < 0.0) || !u_log.is_finite() {
            return Err(Error::Domain(format!("u_log must be finite and negative, got {u_log}")));
        }
        if which != 1 && which != 2 {
            return Err(Error::Domain(format!("which must be 1 or 2, got {which}")));
        }
        Ok(CondQuery { u_log, which, params })
    }

    /// Parameters oriented so that the query concerns coordinate 1.
    pub fn oriented(&self) -> Parameters {
        if self.which == 1 {
            self.params
        } else {
            self.params.swapped()
        }
    }
}

/// Exact conditional probability for coordinate 1 at precomputed quantiles.
pub fn cond_prob_exact_at(lv: &Level, p: &Parameters) -> Result<LogValue> {
    let s = p.s();
    let upper = lv.a(1, p.rho) / s;
    if p.alpha1 == 0.0 {
        return Ok(LogValue::from_log(ln_ncdf(upper)));
    }
    let m = p.alpha1 * s;
    let shift = (p.alpha2 + p.rho * p.alpha1) * lv.f2;
    let l = log_integrate(|x| ln_phi(x) + ln_ncdf(m * x + shift), f64::NEG_INFINITY, upper, DEFAULT_REL_TOL)
        .map_err(|e| Error::Numerical(format!("conditional probability at u_log = {}: {e}", lv.u_log)))?;
    Ok(LogValue::from_log(l - ln_ncdf(p.lambda2() * lv.f2)))
}

/// Exact conditional probability by quadrature (closed form when the
/// bounded coordinate has zero skewness weight).
pub fn cond_prob_exact(q: &CondQuery) -> Result<LogValue> {
    let p = q.oriented();
    cond_prob_exact_at(&Level::at(&p, q.u_log)?, &p)
}

/// Leading asymptotic of the conditional probability for coordinate 1.
pub fn cond_prob_asym_at(lv: &Level, p: &Parameters, d: &DerivedQuantities) -> Result<LogValue> {
    if p.alpha1 == 0.0 {
        return Err(Error::Precondition("asymptotic branches need a nonzero skewness weight".into()));
    }
    let s = p.s();
    let a1 = lv.a(1, p.rho);
    let b = lv.b(p);
    let ln_den = ln_ncdf(d.lambda2 * lv.f2);
    let ea = -a1 * a1 / (2.0 * s * s);
    let l = match d.b_class.tag {
        LimitTag::ToNegInfinity => {
            if d.beta_sign(1) != 1 {
                return Err(Error::Contract(format!("B -> -inf requires beta1 > 0, got {}", d.beta1)));
            }
            ea - 0.5 * b * b - (2.0 * PI).ln() - s.ln() - d.beta1.ln() - lv.f2.abs().ln() - ln_den - b.abs().ln()
        }
        LimitTag::ToZero => s.ln() + ea - LN_2 - LN_SQRT_2PI - a1.abs().ln() - ln_den,
        LimitTag::ToPosInfinity => s.ln() + ea - LN_SQRT_2PI - a1.abs().ln() - ln_den,
    };
    Ok(LogValue::from_log(l))
}

/// Leading asymptotic of the conditional probability; `d` belongs to
/// `q.params` and is re-derived for the interchanged coordinates if needed.
pub fn cond_prob_asym(q: &CondQuery, d: &DerivedQuantities) -> Result<LogValue> {
    let p = q.oriented();
    let d = if q.which == 1 { *d } else { derive_with(&p, d.boundary.swapped())? };
    cond_prob_asym_at(&Level::at(&p, q.u_log)?, &p, &d)
}

/// `dC(u,u)/du` and its two summands, all exact.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Dcdu {
    pub total: f64,
    pub summand1: f64,
    pub summand2: f64,
}

pub fn log_dcdu_exact(u_log: f64, p: &Parameters) -> Result<Dcdu> {
    let lv = Level::at(p, u_log)?;
    let s1 = cond_prob_exact_at(&lv, p)?.log_v;
    let s2 = cond_prob_exact_at(&lv.swapped(), &p.swapped())?.log_v;
    Ok(Dcdu { total: log_add_exp(s1, s2), summand1: s1, summand2: s2 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weight_closed_form() {
        let p = Parameters::new(0.0, 0.5, 0.2).unwrap();
        let q = CondQuery::new(-30.0, 1, p).unwrap();
        let lv = Level::at(&p, -30.0).unwrap();
        let want = ln_ncdf((lv.f1 - 0.2 * lv.f2) / p.s());
        assert_eq!(cond_prob_exact(&q).unwrap().log_v, want);
    }

    #[test]
    fn rejects_bad_query() {
        let p = Parameters::new(1.0, 1.0, 0.0).unwrap();
        assert!(CondQuery::new(0.0, 1, p).is_err());
        assert!(CondQuery::new(-1.0, 3, p).is_err());
    }
}
