//! Lower-tail asymptotics of the bivariate skew-normal copula.
//!
//! For `Z ~ SN₂(α, R)` the diagonal copula derivative `dC(u,u)/du` and the
//! ratio `λ_L(u) = C(u,u)/u` behave like `τ1 u^θ (-log u)^τ2` as `u → 0⁺`.
//! The crate classifies the regime of `(α1, α2, ρ)`, composes `(θ, τ1, τ2)`
//! and checks the result against exact log-domain evaluation.

pub mod classify;
pub mod cli;
pub mod conditional;
pub mod error;
pub mod integral_asym;
pub mod quad;
pub mod sn_special;
pub mod tail_order;

pub use classify::{derive, derive_with, thm3_case, Boundary, CaseTag, DerivedQuantities, Parameters};
pub use error::{Error, Result};
pub use sn_special::LogValue;
pub use tail_order::{dcopula_rv, tail_dependence_asym, RvForm, TailOrderResult};
