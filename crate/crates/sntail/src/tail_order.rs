//! Regularly varying forms `τ1 u^θ (-log u)^τ2` and the assembly of
//! `dC(u,u)/du` and `λ_L(u)` from them.

use std::f64::consts::{LN_2, PI};
use std::ops::{Div, Mul};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::classify::{derive_with, thm3_case, Boundary, CaseTag, DerivedQuantities, LimitTag, Parameters, Thm3Case};
use crate::conditional::log_dcdu_exact;
use crate::error::{Error, Result};
use crate::sn_special::{log_add_exp, LambdaSign, LN_SQRT_2PI};

/// Relative tolerance for treating two exponents as equal when summing.
pub const TIE_TOL: f64 = 1e-10;

/// `τ1 u^θ (-log u)^τ2`, stored as `(θ, log τ1, τ2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RvForm {
    pub theta: f64,
    pub log_tau1: f64,
    pub tau2: f64,
}

impl RvForm {
    pub const ONE: RvForm = RvForm { theta: 0.0, log_tau1: 0.0, tau2: 0.0 };

    /// A constant `exp(log_c)`.
    pub fn constant(log_c: f64) -> Self {
        RvForm { theta: 0.0, log_tau1: log_c, tau2: 0.0 }
    }

    /// Log of the form at `log u = u_log`.
    pub fn eval(&self, u_log: f64) -> f64 {
        self.log_tau1 + self.theta * u_log + self.tau2 * (-u_log).ln()
    }

    pub fn inv(self) -> Self {
        RvForm { theta: -self.theta, log_tau1: -self.log_tau1, tau2: -self.tau2 }
    }

    pub fn tau1(&self) -> f64 {
        self.log_tau1.exp()
    }
}

impl Mul for RvForm {
    type Output = RvForm;
    fn mul(self, o: RvForm) -> RvForm {
        RvForm { theta: self.theta + o.theta, log_tau1: self.log_tau1 + o.log_tau1, tau2: self.tau2 + o.tau2 }
    }
}

impl Div for RvForm {
    type Output = RvForm;
    fn div(self, o: RvForm) -> RvForm {
        self * o.inv()
    }
}

/// RV form of `exp(-(G1 F1^{-1}(u) - G2 F2^{-1}(u))²/2)`.
pub fn rv_form(g1: f64, g2: f64, d: &DerivedQuantities) -> RvForm {
    let k = &d.k2;
    let dd = g1 * d.gamma1 - g2;
    let k1sq = k.k1 * k.k1;
    RvForm {
        theta: k1sq * dd * dd,
        tau2: 2.0 * (k1sq * k.k2 * dd * dd + k1sq * d.c11 * g1 * d.gamma1 * dd),
        log_tau1: 2.0 * (k1sq * k.k3 * dd * dd + k1sq * d.c12 * g1 * d.gamma1 * dd),
    }
}

/// RV form of `|X(u)|` when `X(u) ~ coef · F2^{-1}(u)`.
pub fn amplitude(coef: f64, d: &DerivedQuantities) -> RvForm {
    RvForm { theta: 0.0, log_tau1: (d.k2.k1 * coef).abs().ln() + 0.5 * LN_2, tau2: 0.5 }
}

/// The algebraic factors the summand formulas divide by.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Amplitudes {
    /// `|A1(u)|`.
    pub a1: RvForm,
    /// `|B(u)|`.
    pub b: RvForm,
    /// `|F2^{-1}(u)|`.
    pub f2: RvForm,
    /// `Φ(λ2 F2^{-1}(u))`.
    pub phi_lambda2: RvForm,
}

pub fn amplitude_prefactors(p: &Parameters, d: &DerivedQuantities) -> Amplitudes {
    let f2 = amplitude(1.0, d);
    let phi_lambda2 = match d.sign2 {
        LambdaSign::Neg => RvForm::ONE,
        LambdaSign::Zero => RvForm::constant(-LN_2),
        LambdaSign::Pos => {
            rv_form(0.0, -d.lambda2, d) / (RvForm::constant(LN_SQRT_2PI + d.lambda2.ln()) * f2)
        }
    };
    Amplitudes {
        a1: amplitude(d.gamma1 - p.rho, d),
        b: amplitude(p.alpha1 * d.gamma1 + p.alpha2, d),
        f2,
        phi_lambda2,
    }
}

/// Which asymptotic form produced a summand.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SummandBranch {
    /// `B → -∞`.
    BToNegInf,
    /// `B → 0`.
    BToZero,
    /// `B → +∞`.
    BToPosInf,
    /// Zero skewness weight on the bounded coordinate: `Φ(A/s)` exactly.
    ClosedForm,
}

/// RV form of the index-1 conditional probability.
pub fn summand_rv_oriented(p: &Parameters, d: &DerivedQuantities) -> Result<(RvForm, SummandBranch)> {
    let s = p.s();
    let amp = amplitude_prefactors(p, d);
    let ea = rv_form(1.0 / s, p.rho / s, d);
    if d.a_class.tag != LimitTag::ToNegInfinity && !(p.alpha1 > 0.0 && d.b_class.tag == LimitTag::ToNegInfinity) {
        return Err(Error::Internal(format!("no asymptotic route for {p:?} (A1 rate {})", d.a_class.rate)));
    }
    if p.alpha1 == 0.0 {
        let f = RvForm::constant(s.ln() - LN_SQRT_2PI) * ea / amp.a1;
        return Ok((f, SummandBranch::ClosedForm));
    }
    Ok(match d.b_class.tag {
        LimitTag::ToNegInfinity => {
            if d.beta_sign(1) != 1 {
                return Err(Error::Contract(format!("B -> -inf requires beta1 > 0, got {}", d.beta1)));
            }
            let eb = rv_form(p.alpha1, -p.alpha2, d);
            let c = RvForm::constant(-(2.0 * PI).ln() - s.ln() - d.beta1.ln());
            (c * ea * eb / (amp.f2 * amp.phi_lambda2 * amp.b), SummandBranch::BToNegInf)
        }
        LimitTag::ToZero => {
            let c = RvForm::constant(s.ln() - LN_2 - LN_SQRT_2PI);
            (c * ea / (amp.a1 * amp.phi_lambda2), SummandBranch::BToZero)
        }
        LimitTag::ToPosInfinity => {
            let c = RvForm::constant(s.ln() - LN_SQRT_2PI);
            (c * ea / (amp.a1 * amp.phi_lambda2), SummandBranch::BToPosInf)
        }
    })
}

/// RV form of `P(Z_i ≤ F_i^{-1}(u) | Z_{3-i} = F_{3-i}^{-1}(u))`.
pub fn summand_rv(i: usize, p: &Parameters, boundary: Boundary) -> Result<(RvForm, SummandBranch)> {
    let (p, b) = match i {
        1 => (*p, boundary),
        2 => (p.swapped(), boundary.swapped()),
        _ => return Err(Error::Domain(format!("summand index must be 1 or 2, got {i}"))),
    };
    let d = derive_with(&p, b)?;
    summand_rv_oriented(&p, &d)
}

fn close(x: f64, y: f64) -> bool {
    (x - y).abs() <= TIE_TOL * x.abs().max(y.abs()).max(1.0)
}

/// Asymptotic sum of two RV forms: the smaller `θ` dominates, then the
/// larger `τ2`; on a full tie the constants add.
pub fn rv_sum(x: RvForm, y: RvForm) -> RvForm {
    if !close(x.theta, y.theta) {
        return if x.theta < y.theta { x } else { y };
    }
    if !close(x.tau2, y.tau2) {
        return if x.tau2 > y.tau2 { x } else { y };
    }
    RvForm {
        theta: 0.5 * (x.theta + y.theta),
        log_tau1: log_add_exp(x.log_tau1, y.log_tau1),
        tau2: 0.5 * (x.tau2 + y.tau2),
    }
}

/// RV form of `dC(u,u)/du` with both summands.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DcopulaRv {
    pub total: RvForm,
    pub summand1: RvForm,
    pub summand2: RvForm,
    pub branch1: SummandBranch,
    pub branch2: SummandBranch,
}

pub fn dcopula_rv_with(p: &Parameters, boundary: Boundary) -> Result<DcopulaRv> {
    let (s1, b1) = summand_rv(1, p, boundary)?;
    let (s2, b2) = summand_rv(2, p, boundary)?;
    Ok(DcopulaRv { total: rv_sum(s1, s2), summand1: s1, summand2: s2, branch1: b1, branch2: b2 })
}

/// RV form of `dC(u,u)/du`.
pub fn dcopula_rv(p: &Parameters) -> Result<RvForm> {
    Ok(dcopula_rv_with(p, Boundary::default())?.total)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailOrderResult {
    pub kappa: f64,
    pub dcdu: RvForm,
    #[serde(rename = "lambdaL")]
    pub lambda_l: RvForm,
    /// `None` outside the classified range (the bivariate normal).
    pub case: Option<CaseTag>,
    pub extrapolated: bool,
    pub warnings: Vec<String>,
}

/// The λ1, λ2 < 0 result evaluated at α = 0.
fn normal_extrapolation(rho: f64) -> RvForm {
    RvForm {
        theta: (1.0 - rho) / (1.0 + rho),
        log_tau1: 0.5 * ((1.0 + rho) / (1.0 - rho)).ln() - rho / (1.0 + rho) * PI.ln(),
        tau2: -rho / (1.0 + rho),
    }
}

pub fn tail_dependence_asym(p: &Parameters) -> Result<TailOrderResult> {
    tail_dependence_asym_with(p, Boundary::default())
}

/// `κ`, the RV form of `dC/du` and of `λ_L(u)`, via the de Haan step
/// `λ_L(u) ~ u^θ L(u)/(θ+1)`.
pub fn tail_dependence_asym_with(p: &Parameters, boundary: Boundary) -> Result<TailOrderResult> {
    let p = Parameters::new(p.alpha1, p.alpha2, p.rho)?;
    let (dcdu, case, extrapolated, mut warnings) = if p.is_normal() {
        let w = "alpha = 0 is outside the analysed range: theta and tau2 follow by continuity from the \
                 lambda1, lambda2 < 0 case, the constant is extrapolated"
            .to_string();
        (normal_extrapolation(p.rho), None, true, vec![w])
    } else {
        let d = derive_with(&p, boundary)?;
        let case = thm3_case(&d, &p)?;
        (dcopula_rv_with(&p, boundary)?.total, Some(case), false, Vec::new())
    };
    if !(dcdu.theta > 0.0) {
        return Err(Error::Internal(format!("tail exponent theta = {} is not positive for {p:?}", dcdu.theta)));
    }
    if !p.is_normal() {
        warnings.extend(boundary_warnings(&p, boundary)?);
    }
    let lambda_l = RvForm { log_tau1: dcdu.log_tau1 - (dcdu.theta + 1.0).ln(), ..dcdu };
    Ok(TailOrderResult { kappa: dcdu.theta + 1.0, dcdu, lambda_l, case, extrapolated, warnings })
}

/// Warnings for classifier inputs within `10 ε` of a boundary that were not
/// declared as sitting on it.
pub fn boundary_warnings(p: &Parameters, boundary: Boundary) -> Result<Vec<String>> {
    use crate::classify::ZERO_EPS;
    let d = derive_with(p, boundary)?;
    let mut w = Vec::new();
    let mut near = |name: &str, x: f64, declared: bool| {
        if !declared && x.abs() < 10.0 * ZERO_EPS {
            w.push(format!("{name} = {x:e} is within 10 eps of zero"));
        }
    };
    near("lambda1", d.lambda1, boundary.lambda1);
    near("lambda2", d.lambda2, boundary.lambda2);
    near("beta1", d.beta1, boundary.beta1);
    near("beta2", d.beta2, boundary.beta2);
    near("gamma1 - rho", d.a_class.rate, false);
    near("alpha1 gamma1 + alpha2", d.b_class.rate, boundary.discriminant);
    Ok(w)
}

/// Least-squares fit of `log dC/du` against `(u_log, log(-u_log), 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FitResult {
    pub theta_hat: f64,
    pub tau2_hat: f64,
    pub log_tau1_hat: f64,
    /// Root mean square residual on the log scale.
    pub resid: f64,
}

/// Fit an RV form to samples `(u_log, log value)`.
pub fn fit_rv_samples(u_logs: &[f64], values: &[f64]) -> Result<FitResult> {
    if u_logs.len() != values.len() {
        return Err(Error::Domain("grid and values differ in length".into()));
    }
    if u_logs.len() < 4 {
        return Err(Error::Domain(format!("need at least 4 grid points, got {}", u_logs.len())));
    }
    if let Some(x) = u_logs.iter().find(|&&x| !(x <= -20.0)) {
        return Err(Error::Domain(format!("grid points must be <= -20, got {x}")));
    }
    let n = u_logs.len();
    let x = DMatrix::from_fn(n, 3, |r, c| match c {
        0 => u_logs[r],
        1 => (-u_logs[r]).ln(),
        _ => 1.0,
    });
    let y = DVector::from_column_slice(values);
    let svd = x.clone().svd(true, true);
    let (smax, smin) = (svd.singular_values.max(), svd.singular_values.min());
    if !(smin > 1e-10 * smax) {
        return Err(Error::Numerical(format!("singular design: singular values {smax:e} .. {smin:e}")));
    }
    let beta = svd.solve(&y, 0.0).map_err(|e| Error::Numerical(e.to_string()))?;
    let r = &y - &x * &beta;
    Ok(FitResult {
        theta_hat: beta[0],
        tau2_hat: beta[1],
        log_tau1_hat: beta[2],
        resid: (r.norm_squared() / n as f64).sqrt(),
    })
}

/// Fit the exact `log dC/du` over a grid; rows are evaluated in parallel.
pub fn empirical_exponent_fit(p: &Parameters, grid: &[f64]) -> Result<FitResult> {
    if grid.len() < 4 {
        return Err(Error::Domain(format!("need at least 4 grid points, got {}", grid.len())));
    }
    if let Some(x) = grid.iter().find(|&&x| !(x <= -20.0)) {
        return Err(Error::Domain(format!("grid points must be <= -20, got {x}")));
    }
    let vals: Vec<f64> = grid
        .par_iter()
        .map(|&u| log_dcdu_exact(u, p).map(|r| r.total))
        .collect::<Result<_>>()?;
    fit_rv_samples(grid, &vals)
}

/// `(θ, log τ1, τ2)` exactly as printed in the summation theorem, where the
/// printed expression is well formed.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PrintedForm {
    pub case: String,
    pub theta: Option<f64>,
    pub log_tau1: Option<f64>,
    pub tau2: Option<f64>,
    pub note: Option<String>,
}

/// Printed values of the summation theorem for these parameters. Swapped
/// cases are evaluated on the interchanged parameters.
pub fn printed_closed_form(p: &Parameters, boundary: Boundary) -> Result<PrintedForm> {
    let d0 = derive_with(p, boundary)?;
    let tag = thm3_case(&d0, p)?;
    let (p, boundary) = if tag.swapped { (p.swapped(), boundary.swapped()) } else { (*p, boundary) };
    let d = derive_with(&p, boundary)?;
    let rho = p.rho;
    let s2 = 1.0 - rho * rho;
    let (l1, l2) = (d.lambda1, d.lambda2);
    let r1 = (1.0 + l1 * l1).sqrt();
    let r2 = (1.0 + l2 * l2).sqrt();
    let q = 1.0 / r2 - rho;
    let dd = p.alpha1 + p.alpha2 / r2;
    let lpi = PI.ln();
    let t12 = (1.0 - rho) / (1.0 + rho);
    let log_c1 = 0.5 * ((1.0 + rho) / (1.0 - rho)).ln() - rho / (1.0 + rho) * lpi;
    let malformed = |what: &str| Some(format!("printed constant for case {what} is malformed; not evaluated"));
    let (theta, tau2, log_tau1, note) = match tag.case {
        Thm3Case::C1 => (t12, -rho / (1.0 + rho), Some(log_c1), None),
        Thm3Case::C2 => (t12, -rho / (1.0 + rho), Some(log_c1 + LN_2 / (1.0 + rho)), None),
        Thm3Case::C3a | Thm3Case::C4a => {
            let theta = q * q / s2 + dd * dd;
            let tau2 = q * q / (2.0 * s2) + q / (2.0 * s2 * r2) + dd * dd - 0.5 * p.alpha1 * dd - 1.0;
            if tag.case == Thm3Case::C3a {
                let e_two = dd * dd - p.alpha1 * dd + q / (2.0 * s2 * r2);
                let e_pi = dd * dd - 0.5 * p.alpha1 * dd + q / (4.0 * s2 * r2) + q * q / (2.0 * s2) - 1.0;
                let inner = log_add_exp(
                    -d.beta2.abs().ln(),
                    q / (2.0 * s2 * r2) * (2.0 * l2 * PI.sqrt()).ln() - d.beta1.abs().ln(),
                );
                let lt = e_two * (2.0 * l2).ln() - (4.0 * s2.sqrt() * dd.abs()).ln() + e_pi * lpi + inner;
                (theta, tau2, Some(lt), None)
            } else {
                (theta, tau2, None, malformed("4a"))
            }
        }
        Thm3Case::C3b | Thm3Case::C3c => {
            let theta = q * q / s2;
            let tau2 = q * q / (2.0 * s2) + q / (2.0 * s2 * r2) - 0.5;
            (theta, tau2, None, malformed(&tag.case.to_string()))
        }
        Thm3Case::C4b | Thm3Case::C4c => {
            let theta = q * q / s2;
            let tau2 = q * q / (2.0 * s2) + q / (2.0 * s2 * r2) - 0.5;
            let lead = if tag.case == Thm3Case::C4b { (2.0 * PI.sqrt()).ln() } else { 0.5 * lpi };
            let lt = 0.5 * s2.ln() - lead
                + q / (s2 * r2) * (l2 * PI.sqrt()).ln()
                + q * q / s2 * (2.0 * PI.sqrt()).ln()
                + (1.0 / (r2 - rho) + 1.0 / q.abs()).ln();
            (theta, tau2, Some(lt), None)
        }
        Thm3Case::C5 => {
            let e = p.alpha1 / r1 + p.alpha2 / r2;
            let theta = (1.0 / r2 - rho / r1).powi(2) / s2 + e * e - l1 * l1 / (1.0 + l1 * l1);
            let p1 = (1.0 / r1 - rho / r2) / (s2 * r1) + p.alpha1 / r1 * e;
            let p2 = (1.0 / r2 - rho / r1) / (s2 * r2) + p.alpha2 / r2 * e;
            let lt = (1.0 / d.beta1 + 1.0 / d.beta2).ln() + (theta - 0.5) * (2.0 * PI).ln()
                - (2.0 * s2).sqrt().ln()
                - e.abs().ln()
                + p1 * l1.ln()
                + p2 * l2.ln();
            (theta, theta - 0.5, Some(lt), None)
        }
    };
    Ok(PrintedForm { case: tag.label(), theta: Some(theta), log_tau1, tau2: Some(tau2), note })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_prefers_smaller_theta_then_larger_tau2() {
        let a = RvForm { theta: 1.0, log_tau1: 0.0, tau2: 0.0 };
        let b = RvForm { theta: 1.5, log_tau1: 5.0, tau2: 3.0 };
        assert_eq!(rv_sum(a, b), a);
        let c = RvForm { theta: 1.0, log_tau1: 2.0, tau2: 0.5 };
        assert_eq!(rv_sum(a, c), c);
        let t = rv_sum(a, a);
        assert!((t.log_tau1 - LN_2).abs() < 1e-15);
    }

    #[test]
    fn fit_rejects_short_or_shallow_grid() {
        assert!(fit_rv_samples(&[-40.0, -80.0, -120.0], &[1.0, 2.0, 3.0]).is_err());
        assert!(fit_rv_samples(&[-10.0, -80.0, -120.0, -160.0], &[1.0; 4]).is_err());
        assert!(matches!(fit_rv_samples(&[-40.0; 5], &[1.0; 5]), Err(Error::Numerical(_))));
    }
}
