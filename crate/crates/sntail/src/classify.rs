//! Derived scalars of SN₂(α, R) and classification of the lower-tail regime.

use std::fmt;

use serde::Serialize;

use crate::error::{ensure_finite, Error, Result};
use crate::sn_special::{quantile_coefficients, sn_quantile, LambdaSign, QuantileCoefficients};

/// Tolerance used to decide that a classifier quantity is zero.
pub const ZERO_EPS: f64 = 1e-12;

/// Skewness vector and correlation of a bivariate skew-normal.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Parameters {
    pub alpha1: f64,
    pub alpha2: f64,
    pub rho: f64,
}

impl Parameters {
    pub fn new(alpha1: f64, alpha2: f64, rho: f64) -> Result<Self> {
        ensure_finite("alpha1", alpha1)?;
        ensure_finite("alpha2", alpha2)?;
        ensure_finite("rho", rho)?;
        if rho.abs() >= 1.0 {
            return Err(Error::Domain(format!("rho must lie in (-1, 1), got {rho}")));
        }
        Ok(Parameters { alpha1, alpha2, rho })
    }

    /// The same distribution with the coordinates interchanged.
    pub fn swapped(&self) -> Self {
        Parameters { alpha1: self.alpha2, alpha2: self.alpha1, rho: self.rho }
    }

    /// `√(1-ρ²)`.
    pub fn s(&self) -> f64 {
        (1.0 - self.rho * self.rho).sqrt()
    }

    /// Marginal skewness of the first coordinate.
    pub fn lambda1(&self) -> f64 {
        marginal_lambda(self.alpha1, self.alpha2, self.rho)
    }

    pub fn lambda2(&self) -> f64 {
        marginal_lambda(self.alpha2, self.alpha1, self.rho)
    }

    pub fn is_normal(&self) -> bool {
        self.alpha1 == 0.0 && self.alpha2 == 0.0
    }
}

fn marginal_lambda(a_own: f64, a_other: f64, rho: f64) -> f64 {
    (a_own + rho * a_other) / (1.0 + a_other * a_other * (1.0 - rho * rho)).sqrt()
}

/// Quantities the caller declares to sit exactly on a classification boundary.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Boundary {
    pub lambda1: bool,
    pub lambda2: bool,
    pub beta1: bool,
    pub beta2: bool,
    /// `α1 + α2/√(1+λ2²) = 0`, equivalently `B(u) → 0`.
    pub discriminant: bool,
}

impl Boundary {
    pub fn swapped(&self) -> Self {
        Boundary {
            lambda1: self.lambda2,
            lambda2: self.lambda1,
            beta1: self.beta2,
            beta2: self.beta1,
            discriminant: self.discriminant,
        }
    }

    pub fn any(&self) -> bool {
        self.lambda1 || self.lambda2 || self.beta1 || self.beta2 || self.discriminant
    }
}

/// Limit of `A_1(u)` or `B(u)` as `u → 0⁺`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitTag {
    ToNegInfinity,
    ToZero,
    ToPosInfinity,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LimitClass {
    pub tag: LimitTag,
    /// Limit of the quantity divided by `F_2^{-1}(u)`; positive means `→ -∞`.
    pub rate: f64,
}

impl LimitClass {
    fn of(rate: f64, forced_zero: bool) -> Self {
        let tag = if forced_zero || rate.abs() < ZERO_EPS {
            LimitTag::ToZero
        } else if rate > 0.0 {
            LimitTag::ToNegInfinity
        } else {
            LimitTag::ToPosInfinity
        };
        LimitClass { tag, rate }
    }
}

/// Sign with the zero band, `-1`, `0` or `1`.
fn sign_eps(x: f64, forced_zero: bool) -> i8 {
    if forced_zero || x.abs() < ZERO_EPS {
        0
    } else if x > 0.0 {
        1
    } else {
        -1
    }
}

/// Limit `γ_i` of `F_i^{-1}/F_{3-i}^{-1}` and its correction coefficients.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RatioCoefficients {
    pub gamma: f64,
    pub c1: f64,
    pub c2: f64,
}

/// Ratio expansion for `F_i^{-1}/F_j^{-1}` given the two skewness signs.
pub fn ratio_coefficients(si: LambdaSign, li: f64, sj: LambdaSign, lj: f64) -> Result<RatioCoefficients> {
    use LambdaSign::*;
    let ln2 = std::f64::consts::LN_2;
    let sqrt_pi = std::f64::consts::PI.sqrt();
    let r = |gamma, c1, c2| Ok(RatioCoefficients { gamma, c1, c2 });
    match (si, sj) {
        (Pos, Pos) => r(((1.0 + lj * lj) / (1.0 + li * li)).sqrt(), 0.0, 0.5 * (li / lj).ln()),
        (Neg, Pos) => r((1.0 + lj * lj).sqrt(), -0.25, -0.5 * (2.0 * lj * sqrt_pi).ln()),
        (Pos, Neg) => r(1.0 / (1.0 + li * li).sqrt(), 0.25, 0.5 * (2.0 * li * sqrt_pi).ln()),
        (Zero, Pos) => r((1.0 + lj * lj).sqrt(), -0.25, -0.5 * (lj * sqrt_pi).ln()),
        (Pos, Zero) => r(1.0 / (1.0 + li * li).sqrt(), 0.25, 0.5 * (li * sqrt_pi).ln()),
        (Neg, Neg) => r(1.0, 0.0, 0.0),
        (Neg, Zero) => r(1.0, 0.0, -0.5 * ln2),
        (Zero, Neg) => r(1.0, 0.0, 0.5 * ln2),
        (Zero, Zero) => Err(Error::Unsupported(
            "both marginal skewnesses are zero (bivariate normal)".into(),
        )),
    }
}

/// Everything derived from `(α1, α2, ρ)` that the asymptotics depend on.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DerivedQuantities {
    pub lambda1: f64,
    pub lambda2: f64,
    pub sign1: LambdaSign,
    pub sign2: LambdaSign,
    pub k1: QuantileCoefficients,
    pub k2: QuantileCoefficients,
    pub gamma1: f64,
    pub gamma2: f64,
    pub c11: f64,
    pub c12: f64,
    pub c21: f64,
    pub c22: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub a_class: LimitClass,
    pub b_class: LimitClass,
    pub boundary: Boundary,
}

impl DerivedQuantities {
    /// Sign of `β_i` with the zero band and boundary flags applied.
    pub fn beta_sign(&self, i: usize) -> i8 {
        match i {
            1 => sign_eps(self.beta1, self.boundary.beta1),
            _ => sign_eps(self.beta2, self.boundary.beta2),
        }
    }

    /// `α1 + α2/√(1+λ2²)`; its sign separates sub-cases a, b, c.
    pub fn discriminant(&self, p: &Parameters) -> f64 {
        p.alpha1 + p.alpha2 / (1.0 + self.lambda2 * self.lambda2).sqrt()
    }
}

pub fn derive(p: &Parameters) -> Result<DerivedQuantities> {
    derive_with(p, Boundary::default())
}

/// [`derive`] with explicit boundary declarations.
pub fn derive_with(p: &Parameters, boundary: Boundary) -> Result<DerivedQuantities> {
    let p = Parameters::new(p.alpha1, p.alpha2, p.rho)?;
    if p.is_normal() {
        return Err(Error::Unsupported("alpha1 = alpha2 = 0 (bivariate normal)".into()));
    }
    let (l1, l2) = (p.lambda1(), p.lambda2());
    let sign = |l: f64, forced: bool| if forced { LambdaSign::Zero } else { LambdaSign::of(l) };
    let (s1, s2) = (sign(l1, boundary.lambda1), sign(l2, boundary.lambda2));
    let r1 = ratio_coefficients(s1, l1, s2, l2)?;
    let r2 = ratio_coefficients(s2, l2, s1, l1)?;
    let rho = p.rho;
    let one_m = 1.0 - rho * rho;
    let beta = |g: f64, ai: f64, aj: f64| (g - rho) / one_m + ai * (ai * g + aj);
    Ok(DerivedQuantities {
        lambda1: l1,
        lambda2: l2,
        sign1: s1,
        sign2: s2,
        k1: quantile_coefficients(s1, l1),
        k2: quantile_coefficients(s2, l2),
        gamma1: r1.gamma,
        gamma2: r2.gamma,
        c11: r1.c1,
        c12: r1.c2,
        c21: r2.c1,
        c22: r2.c2,
        beta1: beta(r1.gamma, p.alpha1, p.alpha2),
        beta2: beta(r2.gamma, p.alpha2, p.alpha1),
        a_class: LimitClass::of(r1.gamma - rho, false),
        b_class: LimitClass::of(p.alpha1 * r1.gamma + p.alpha2, boundary.discriminant),
        boundary,
    })
}

/// Limit classes of `A_1(u)` and `B(u)`, checked against the sign lemma.
pub fn limit_classes(d: &DerivedQuantities, p: &Parameters) -> Result<(LimitClass, LimitClass)> {
    if p.alpha1 == 0.0 {
        return Err(Error::Precondition("limit classes need alpha1 != 0; use the closed form".into()));
    }
    let (a, b) = (d.a_class, d.b_class);
    if a.tag != LimitTag::ToNegInfinity && b.tag != LimitTag::ToNegInfinity {
        return Err(Error::Internal(format!(
            "neither A1 nor B tends to -inf (rates {}, {}) for {p:?}",
            a.rate, b.rate
        )));
    }
    if a.rate <= 0.0 && !(p.alpha1 > 0.0 && b.rate > 0.0) {
        return Err(Error::Internal(format!(
            "gamma1 - rho = {} <= 0 without alpha1 > 0 and B -> -inf for {p:?}",
            a.rate
        )));
    }
    Ok((a, b))
}

/// Exact quantiles and the derived quantities at one probability level.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Level {
    pub u_log: f64,
    pub f1: f64,
    pub f2: f64,
}

impl Level {
    pub fn at(p: &Parameters, u_log: f64) -> Result<Self> {
        Ok(Level { u_log, f1: sn_quantile(u_log, p.lambda1())?, f2: sn_quantile(u_log, p.lambda2())? })
    }

    pub fn swapped(&self) -> Self {
        Level { u_log: self.u_log, f1: self.f2, f2: self.f1 }
    }

    /// `A_i(u) = F_i^{-1} - ρ F_{3-i}^{-1}`.
    pub fn a(&self, i: usize, rho: f64) -> f64 {
        match i {
            1 => self.f1 - rho * self.f2,
            _ => self.f2 - rho * self.f1,
        }
    }

    /// `B(u) = α1 F_1^{-1} + α2 F_2^{-1}`.
    pub fn b(&self, p: &Parameters) -> f64 {
        p.alpha1 * self.f1 + p.alpha2 * self.f2
    }

    /// `β_i(u)`.
    pub fn beta(&self, i: usize, p: &Parameters) -> f64 {
        let one_m = 1.0 - p.rho * p.rho;
        let (ratio, ai) = match i {
            1 => (self.f1 / self.f2, p.alpha1),
            _ => (self.f2 / self.f1, p.alpha2),
        };
        ratio * (ai * ai + 1.0 / one_m) + p.alpha1 * p.alpha2 - p.rho / one_m
    }
}

/// `β_i(u)` evaluated with exact quantiles.
pub fn beta_u(u_log: f64, i: usize, p: &Parameters) -> Result<f64> {
    if !(u_log < 0.0) {
        return Err(Error::Domain(format!("u_log must be negative, got {u_log}")));
    }
    if i != 1 && i != 2 {
        return Err(Error::Domain(format!("index must be 1 or 2, got {i}")));
    }
    Ok(Level::at(p, u_log)?.beta(i, p))
}

/// Sub-case of the summation theorem.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Thm3Case {
    #[serde(rename = "1")]
    C1,
    #[serde(rename = "2")]
    C2,
    #[serde(rename = "3a")]
    C3a,
    #[serde(rename = "3b")]
    C3b,
    #[serde(rename = "3c")]
    C3c,
    #[serde(rename = "4a")]
    C4a,
    #[serde(rename = "4b")]
    C4b,
    #[serde(rename = "4c")]
    C4c,
    #[serde(rename = "5")]
    C5,
}

impl fmt::Display for Thm3Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Thm3Case::C1 => "1",
            Thm3Case::C2 => "2",
            Thm3Case::C3a => "3a",
            Thm3Case::C3b => "3b",
            Thm3Case::C3c => "3c",
            Thm3Case::C4a => "4a",
            Thm3Case::C4b => "4b",
            Thm3Case::C4c => "4c",
            Thm3Case::C5 => "5",
        };
        f.write_str(s)
    }
}

/// The four groups obtained by merging zero skewness into its neighbours.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    PosPos,
    NonposPos,
    PosNonpos,
    NonposNonpos,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct CaseTag {
    /// Sign pattern of (λ1, λ2), numbered 1..=8.
    pub octant: u8,
    pub group: Group,
    pub case: Thm3Case,
    /// The case applies after interchanging the coordinates.
    pub swapped: bool,
}

impl CaseTag {
    pub fn label(&self) -> String {
        if self.swapped {
            format!("swapped-{}", self.case)
        } else {
            self.case.to_string()
        }
    }
}

impl fmt::Display for CaseTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

fn octant(s1: LambdaSign, s2: LambdaSign) -> Option<u8> {
    use LambdaSign::*;
    Some(match (s1, s2) {
        (Pos, Pos) => 1,
        (Neg, Pos) => 2,
        (Pos, Neg) => 3,
        (Zero, Pos) => 4,
        (Pos, Zero) => 5,
        (Neg, Neg) => 6,
        (Neg, Zero) => 7,
        (Zero, Neg) => 8,
        (Zero, Zero) => return None,
    })
}

/// Regime of the summation theorem for these parameters.
pub fn thm3_case(d: &DerivedQuantities, p: &Parameters) -> Result<CaseTag> {
    if p.is_normal() {
        return Err(Error::Unsupported("alpha1 = alpha2 = 0 is outside the supported range".into()));
    }
    let oct = octant(d.sign1, d.sign2)
        .ok_or_else(|| Error::Unsupported("both marginal skewnesses are zero".into()))?;
    let group = match oct {
        1 => Group::PosPos,
        2 | 4 => Group::NonposPos,
        3 | 5 => Group::PosNonpos,
        _ => Group::NonposNonpos,
    };
    // B is symmetric in the indices, so its limit class also decides the
    // mirrored sub-cases.
    let sub = |a, b, c| match d.b_class.tag {
        LimitTag::ToNegInfinity => a,
        LimitTag::ToZero => b,
        LimitTag::ToPosInfinity => c,
    };
    use Thm3Case::*;
    let (case, swapped) = match oct {
        1 => (C5, false),
        2 => (sub(C3a, C3b, C3c), false),
        3 => (sub(C3a, C3b, C3c), true),
        4 => (sub(C4a, C4b, C4c), false),
        5 => (sub(C4a, C4b, C4c), true),
        6 => (C1, false),
        7 => (C2, true),
        _ => (C2, false),
    };
    Ok(CaseTag { octant: oct, group, case, swapped })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_skew_independent_margins() {
        let p = Parameters::new(1.0, 1.0, 0.0).unwrap();
        let d = derive(&p).unwrap();
        assert!((d.lambda1 - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert_eq!(d.gamma1, 1.0);
        assert!((d.beta1 - 3.0).abs() < 1e-15);
        assert!((d.beta2 - 3.0).abs() < 1e-15);
        assert_eq!(thm3_case(&d, &p).unwrap().label(), "5");
    }

    #[test]
    fn rejects_bad_rho() {
        assert!(Parameters::new(1.0, 1.0, 1.0).is_err());
        assert!(Parameters::new(1.0, f64::NAN, 0.0).is_err());
    }

    #[test]
    fn swapped_labels() {
        let p = Parameters::new(2.0, -1.5, 0.5).unwrap();
        let d = derive(&p).unwrap();
        let t = thm3_case(&d, &p).unwrap();
        assert_eq!(t.octant, 3);
        assert!(t.swapped);
        let q = p.swapped();
        let tq = thm3_case(&derive(&q).unwrap(), &q).unwrap();
        assert_eq!((tq.octant, tq.case, tq.swapped), (2, t.case, false));
    }
}
