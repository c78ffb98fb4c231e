//! Short-maturity at-the-money call-price asymptotics for the exponential
//! CGMY model, computed directly from the characteristic exponent.
//!
//! Layers, bottom up: [`special_fn`] (gamma, complex powers), [`model`]
//! (parameters and exponent variants), [`quadrature`] (adaptive
//! Gauss–Kronrod on half-lines), [`pricer`] (prices and remainder
//! integrals), [`expansion`] (closed-form coefficients and the exponent
//! lattice), [`harness`] (table and heatmap reproduction) and [`cli`].

// Gauss–Kronrod constants keep their published digits; negated comparisons
// are used deliberately so that NaN fails validation.
#![allow(clippy::excessive_precision, clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod expansion;
pub mod harness;
pub mod model;
pub mod pricer;
pub mod quadrature;
pub mod special_fn;

pub use error::{Error, Result};
pub use model::{CgmyModel, CgmyParams, DerivedParams};
pub use quadrature::{QuadratureConfig, QuadratureResult};
