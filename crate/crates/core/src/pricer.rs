//! Normalized call prices from the contour-shifted Fourier representation,
//! the remainder integrals left after subtracting the first two expansion
//! orders, and the two Laplace-type check integrals.
//!
//! Every integrand takes its real part analytically. Integrals run over
//! `[0, inf)` with breakpoints at `1`, `w*` and `10 w*`, where
//! `w* = (sigma_Y t)^(-1/Y)` is where the small-`t` mass concentrates.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expansion;
use crate::model::CgmyModel;
use crate::quadrature::{integrate, QuadratureConfig, QuadratureResult};

/// Map exponent used for the head and tail panels of the pricing integrals
/// when the caller leaves the grading at its default of 1.
pub const DEFAULT_GRADING: f64 = 10.0;

/// Below this modulus [`f_stable`] uses its Taylor polynomial.
pub const TAYLOR_RADIUS: f64 = 1e-2;

/// Maturity and log-moneyness `k = log(S0/K)` of a call.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceRequest {
    pub t: f64,
    #[serde(default)]
    pub k: f64,
}

impl PriceRequest {
    pub fn new(t: f64, k: f64) -> Result<Self> {
        check_maturity(t)?;
        if !k.is_finite() {
            return Err(Error::invalid("k", format!("k must be finite, got {k}")));
        }
        Ok(PriceRequest { t, k })
    }
}

pub(crate) fn check_maturity(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("t", format!("t must be positive, got {t}")))
    }
}

/// Quadrature settings for an integral whose mass sits near `w*`:
/// caller breakpoints plus `{1, w*, 10 w*}`, and graded end maps unless
/// the caller chose their own.
pub fn integral_config(model: &CgmyModel, t: f64, cfg: &QuadratureConfig) -> QuadratureConfig {
    let scale = model.laplace_scale(t);
    let mut points = cfg.breakpoints.clone();
    points.extend([1.0, scale, 10.0 * scale]);
    let mut out = cfg.with_breakpoints(points);
    if out.head_grading == 1.0 {
        out.head_grading = DEFAULT_GRADING;
    }
    if out.tail_grading == 1.0 {
        out.tail_grading = DEFAULT_GRADING;
    }
    out
}

/// `expm1(x) - x`.
fn expm1_minus_x(x: f64) -> f64 {
    if x.abs() < 0.5 {
        // x^2/2! + x^3/3! + ... through x^16
        let mut term = x * x / 2.0;
        let mut sum = term;
        for n in 3..=16 {
            term *= x / n as f64;
            sum += term;
        }
        sum
    } else {
        x.exp_m1() - x
    }
}

/// `x - sin(x)`.
fn x_minus_sin(x: f64) -> f64 {
    if x.abs() < 0.5 {
        let x2 = x * x;
        let mut term = x * x2 / 6.0;
        let mut sum = term;
        for n in (4..=16).step_by(2) {
            term *= -x2 / (n as f64 * (n + 1) as f64);
            sum += term;
        }
        sum
    } else {
        x - x.sin()
    }
}

/// `f(z) = 1 - e^z + z` without cancellation for small `|z|`.
pub fn f_stable(z: Complex64) -> Complex64 {
    if z.norm() <= TAYLOR_RADIUS {
        // -(z^2/2 + z^3/6 + z^4/24 + z^5/120 + z^6/720)
        let poly =
            z * z * (0.5 + z * (1.0 / 6.0 + z * (1.0 / 24.0 + z * (1.0 / 120.0 + z / 720.0))));
        return -poly;
    }
    let (a, b) = (z.re, z.im);
    let half = (0.5 * b).sin();
    let re = 2.0 * a.exp() * half * half - expm1_minus_x(a);
    let im = x_minus_sin(b) - a.exp_m1() * b.sin();
    Complex64::new(re, im)
}

/// Normalized ATM call price `c(t, 0)`.
pub fn price_atm(model: &CgmyModel, t: f64, cfg: &QuadratureConfig) -> Result<QuadratureResult> {
    check_maturity(t)?;
    let qc = integral_config(model, t, cfg);
    let integrand = |u: f64| {
        let z = model.psi_shifted(u) * t;
        // -Re expm1(z)
        let half = (0.5 * z.im).sin();
        let numerator = 2.0 * half * half - z.re.exp_m1() * z.im.cos();
        numerator / (u * u + 0.25)
    };
    Ok(integrate(integrand, 0.0, f64::INFINITY, &qc)?.scaled(1.0 / PI))
}

/// Normalized call price `c(t, k)` at log-moneyness `k = log(S0/K)`.
///
/// Written as `1 - e^(-k/2) + e^(-k/2) I / pi` with a non-negative
/// integrand `I`, so the intrinsic part is exact.
pub fn price(
    model: &CgmyModel,
    t: f64,
    k: f64,
    cfg: &QuadratureConfig,
) -> Result<QuadratureResult> {
    let req = PriceRequest::new(t, k)?;
    if k == 0.0 {
        return price_atm(model, t, cfg);
    }
    let qc = integral_config(model, req.t, cfg);
    let integrand = |u: f64| {
        let z = model.psi_shifted(u) * req.t;
        let phase = z.im + req.k * u;
        let half = (0.5 * phase).sin();
        let numerator = 2.0 * half * half - z.re.exp_m1() * phase.cos();
        numerator / (u * u + 0.25)
    };
    let raw = integrate(integrand, 0.0, f64::INFINITY, &qc)?;
    let discount = (-0.5 * req.k).exp();
    let scaled = raw.scaled(discount / PI);
    Ok(QuadratureResult {
        value: -(-0.5 * req.k).exp_m1() + scaled.value,
        ..scaled
    })
}

/// `R3(t) = c(t, 0) - d1 t^(1/Y) - d2 t`, computed as one integral.
///
/// With `f(x) = 1 - e^x + x`, the integrand
/// `Re[f(t psi0)/(w^2 + 1/4) - f(t theta0)/w^2]` is expanded around the
/// stable exponent so that no `O(w^Y)` terms are subtracted numerically.
pub fn remainder_r3(model: &CgmyModel, t: f64, cfg: &QuadratureConfig) -> Result<QuadratureResult> {
    check_maturity(t)?;
    let qc = integral_config(model, t, cfg);
    let integrand = |w: f64| {
        let x = t * model.theta0(w);
        let y = model.delta(w) * t;
        let fx = f_stable(Complex64::new(x, 0.0)).re;
        let e0 = x.exp();
        // f(x + y) - f(x) = e^x f(y) - y expm1(x)
        let mut shifted = -y.re * x.exp_m1();
        if e0 > 0.0 {
            shifted += e0 * f_stable(y).re;
        }
        let w2 = w * w;
        let lorentz = w2 + 0.25;
        shifted / lorentz - fx / (4.0 * w2 * lorentz)
    };
    Ok(integrate(integrand, 0.0, f64::INFINITY, &qc)?.scaled(1.0 / PI))
}

/// `R4(t) = R3(t) - a21 t^(2 - 1/Y)`.
pub fn remainder_r4(model: &CgmyModel, t: f64, cfg: &QuadratureConfig) -> Result<QuadratureResult> {
    let r3 = remainder_r3(model, t, cfg)?;
    let y = model.y();
    let a21 = expansion::a21(model)?;
    Ok(QuadratureResult {
        value: r3.value - a21 * t.powf(2.0 - 1.0 / y),
        ..r3
    })
}

/// `R5(t) = R4(t) - a41 t^(4 - 3/Y)`.
pub fn remainder_r5(model: &CgmyModel, t: f64, cfg: &QuadratureConfig) -> Result<QuadratureResult> {
    let r4 = remainder_r4(model, t, cfg)?;
    let y = model.y();
    let a41 = expansion::a41(model)?;
    Ok(QuadratureResult {
        value: r4.value - a41 * t.powf(4.0 - 3.0 / y),
        ..r4
    })
}

/// Drift-squared check integral
/// `(b^2 t^2 / 2 pi) int_0^inf w^2 exp(-sigma_Y t w^Y) / (w^2 + 1/4) dw`.
pub fn laplace_check_a21(
    model: &CgmyModel,
    t: f64,
    cfg: &QuadratureConfig,
) -> Result<QuadratureResult> {
    check_maturity(t)?;
    let qc = integral_config(model, t, cfg);
    let d = model.derived();
    let (lambda, y) = (d.sigma_y * t, model.y());
    let integrand = |w: f64| {
        let w2 = w * w;
        w2 * (-lambda * w.powf(y)).exp() / (w2 + 0.25)
    };
    let factor = d.tilde_b * d.tilde_b * t * t / (2.0 * PI);
    Ok(integrate(integrand, 0.0, f64::INFINITY, &qc)?.scaled(factor))
}

/// First-binomial check integral
/// `(Re beta1 / pi) t int_0^inf w^(Y-1) (1 - exp(-sigma_Y t w^Y)) / (w^2 + 1/4) dw`.
pub fn laplace_check_a12(
    model: &CgmyModel,
    t: f64,
    cfg: &QuadratureConfig,
) -> Result<QuadratureResult> {
    check_maturity(t)?;
    let qc = integral_config(model, t, cfg);
    let d = model.derived();
    let (lambda, y) = (d.sigma_y * t, model.y());
    let integrand = |w: f64| {
        let wy = w.powf(y);
        -(wy / w) * (-lambda * wy).exp_m1() / (w * w + 0.25)
    };
    let factor = d.beta1.re * t / PI;
    Ok(integrate(integrand, 0.0, f64::INFINITY, &qc)?.scaled(factor))
}

/// Converts a non-converged result into [`Error::NotConverged`].
pub fn require_converged(quantity: &'static str, r: QuadratureResult) -> Result<QuadratureResult> {
    if r.converged {
        Ok(r)
    } else {
        Err(Error::NotConverged {
            quantity,
            value: r.value,
            error_estimate: r.error_estimate,
            evaluations: r.evaluations,
        })
    }
}
