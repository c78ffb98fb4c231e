//! CGMY parameters, derived constants and the characteristic-exponent variants
//! used by the pricing integrals.
//!
//! Notation: `psi` is the Lévy exponent `Psi(u)` on the strip
//! `-1 <= Im u <= 0`, `psi_shifted(v) = Psi(v - i/2)` is its value on the
//! pricing contour, `theta0` is the limiting symmetric stable exponent and
//! `delta = psi_shifted - theta0` collects the tempering corrections.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special_fn::{gamma, pow_nonzero};

/// Model parameters `(C, G, M, Y)` of an exponential CGMY model.
///
/// Validated at construction: `C > 0`, `G >= 0`, `M > 1`, `1 < Y < 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams")]
pub struct CgmyParams {
    #[serde(rename = "C")]
    c: f64,
    #[serde(rename = "G")]
    g: f64,
    #[serde(rename = "M")]
    m: f64,
    #[serde(rename = "Y")]
    y: f64,
}

#[derive(Deserialize)]
struct RawParams {
    #[serde(rename = "C")]
    c: f64,
    #[serde(rename = "G")]
    g: f64,
    #[serde(rename = "M")]
    m: f64,
    #[serde(rename = "Y")]
    y: f64,
}

impl TryFrom<RawParams> for CgmyParams {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        CgmyParams::new(raw.c, raw.g, raw.m, raw.y)
    }
}

impl CgmyParams {
    pub fn new(c: f64, g: f64, m: f64, y: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::invalid("C", format!("C must be positive, got {c}")));
        }
        if !(g.is_finite() && g >= 0.0) {
            return Err(Error::invalid(
                "G",
                format!("G must be non-negative, got {g}"),
            ));
        }
        if !(m.is_finite() && m > 1.0) {
            return Err(Error::invalid(
                "M",
                format!("M must exceed 1 for a finite exponential moment, got {m}"),
            ));
        }
        if !(y.is_finite() && y > 1.0 && y < 2.0) {
            return Err(Error::invalid(
                "Y",
                format!("Y must lie in the open interval (1, 2), got {y}"),
            ));
        }
        Ok(CgmyParams { c, g, m, y })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn g(&self) -> f64 {
        self.g
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    /// Short label such as `C=1,G=3,M=5,Y=1.7`.
    pub fn label(&self) -> String {
        format!("C={},G={},M={},Y={}", self.c, self.g, self.m, self.y)
    }
}

/// Constants derived once from [`CgmyParams`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedParams {
    /// `C * Gamma(-Y)`, the common prefactor of every power term.
    pub c_gamma: f64,
    /// Martingale drift.
    pub tilde_b: f64,
    /// Constant part of the contour-shifted exponent.
    pub kappa: f64,
    /// Scale of the limiting symmetric stable exponent, `2 C Gamma(-Y) |cos(pi Y / 2)|`.
    pub sigma_y: f64,
    /// `M - 1/2`
    pub m_shift: f64,
    /// `G + 1/2`
    pub g_shift: f64,
    /// Coefficient of `w^(Y-1)` in the large-`w` expansion of `delta`.
    pub beta1: Complex64,
    /// Coefficient of `w^(Y-2)` in the same expansion.
    pub beta2: Complex64,
}

pub fn derive(p: &CgmyParams) -> Result<DerivedParams> {
    let (c, g, m, y) = (p.c, p.g, p.m, p.y);
    let c_gamma = c * gamma(-y)?;
    let tilde_b = -c_gamma * ((m - 1.0).powf(y) + (g + 1.0).powf(y) - m.powf(y) - g.powf(y));
    let kappa = 0.5 * tilde_b - c_gamma * (m.powf(y) + g.powf(y));
    let sigma_y = 2.0 * c_gamma * (FRAC_PI_2 * y).cos().abs();
    let m_shift = m - 0.5;
    let g_shift = g + 0.5;

    let phi = (y - 1.0) * FRAC_PI_2;
    let beta1 = c_gamma
        * y
        * Complex64::new(
            (m_shift + g_shift) * phi.cos(),
            (g_shift - m_shift) * phi.sin(),
        );

    let half_turn = Complex64::from_polar(1.0, FRAC_PI_2 * y);
    let beta2 = -c_gamma * y * (y - 1.0) / 2.0
        * (m_shift * m_shift * half_turn.conj() + g_shift * g_shift * half_turn);

    Ok(DerivedParams {
        c_gamma,
        tilde_b,
        kappa,
        sigma_y,
        m_shift,
        g_shift,
        beta1,
        beta2,
    })
}

/// Parameters together with their derived constants. Immutable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgmyModel {
    params: CgmyParams,
    derived: DerivedParams,
}

impl CgmyModel {
    pub fn new(params: CgmyParams) -> Result<Self> {
        let derived = derive(&params)?;
        Ok(CgmyModel { params, derived })
    }

    pub fn from_values(c: f64, g: f64, m: f64, y: f64) -> Result<Self> {
        Self::new(CgmyParams::new(c, g, m, y)?)
    }

    pub fn params(&self) -> &CgmyParams {
        &self.params
    }

    pub fn derived(&self) -> &DerivedParams {
        &self.derived
    }

    pub fn y(&self) -> f64 {
        self.params.y
    }

    /// Laplace concentration scale `(sigma_Y t)^(-1/Y)`.
    pub fn laplace_scale(&self, t: f64) -> f64 {
        (self.derived.sigma_y * t).powf(-1.0 / self.params.y)
    }

    /// Characteristic exponent on the strip `-1 <= Im u <= 0`.
    pub fn psi(&self, u: Complex64) -> Result<Complex64> {
        if !(u.im >= -1.0 && u.im <= 0.0) || !u.re.is_finite() {
            return Err(Error::Domain(format!(
                "psi requires -1 <= Im(u) <= 0, got u = {u}"
            )));
        }
        let p = &self.params;
        let d = &self.derived;
        let i = Complex64::i();
        let right = Complex64::new(p.m, 0.0) - i * u;
        let left = Complex64::new(p.g, 0.0) + i * u;
        let power = |z: Complex64| {
            if z.re == 0.0 && z.im == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                pow_nonzero(z, p.y)
            }
        };
        let tempered = power(right) + power(left) - p.m.powf(p.y) - p.g.powf(p.y);
        Ok(i * u * d.tilde_b + d.c_gamma * tempered)
    }

    /// `Psi(v - i/2)`.
    pub fn psi_shifted(&self, v: f64) -> Complex64 {
        let d = &self.derived;
        let y = self.params.y;
        let right = pow_nonzero(Complex64::new(d.m_shift, -v), y);
        let left = pow_nonzero(Complex64::new(d.g_shift, v), y);
        Complex64::new(d.kappa, v * d.tilde_b) + d.c_gamma * (right + left)
    }

    /// Real part of [`Self::psi_shifted`] from the modulus/arctangent form.
    pub fn re_psi_shifted(&self, v: f64) -> f64 {
        self.re_theta(1.0, v)
    }

    /// Rescaled exponent `theta(t, v) = t Psi(v t^(-1/Y) - i/2)`.
    pub fn theta(&self, t: f64, v: f64) -> Complex64 {
        let d = &self.derived;
        let y = self.params.y;
        let root = t.powf(1.0 / y);
        let right = pow_nonzero(Complex64::new(d.m_shift * root, -v), y);
        let left = pow_nonzero(Complex64::new(d.g_shift * root, v), y);
        Complex64::new(d.kappa * t, v * d.tilde_b * t.powf(1.0 - 1.0 / y))
            + d.c_gamma * (right + left)
    }

    /// Real part of `theta(t, v)` in real arithmetic.
    pub fn re_theta(&self, t: f64, v: f64) -> f64 {
        let d = &self.derived;
        let y = self.params.y;
        let root = t.powf(1.0 / y);
        let a = d.m_shift * root;
        let b = d.g_shift * root;
        let right = (a * a + v * v).powf(0.5 * y) * (y * (-v / a).atan()).cos();
        let left = (b * b + v * v).powf(0.5 * y) * (y * (v / b).atan()).cos();
        d.kappa * t + d.c_gamma * (right + left)
    }

    /// Limiting stable exponent `-sigma_Y |u|^Y`.
    pub fn theta0(&self, u: f64) -> f64 {
        -self.derived.sigma_y * u.abs().powf(self.params.y)
    }

    /// `delta(w) = psi_shifted(w) - theta0(w)` for `w > 0`, evaluated
    /// without the cancellation of the two `O(w^Y)` terms.
    pub fn delta(&self, w: f64) -> Complex64 {
        if w < 1.0 {
            return self.psi_shifted(w) - self.theta0(w);
        }
        let d = &self.derived;
        let bracket = self.binomial_gap(d.m_shift, -1.0, w) + self.binomial_gap(d.g_shift, 1.0, w);
        Complex64::new(d.kappa, w * d.tilde_b) + d.c_gamma * bracket
    }

    /// Real part of [`Self::delta`].
    pub fn re_delta(&self, w: f64) -> f64 {
        if w < 1.0 {
            return self.re_psi_shifted(w) - self.theta0(w);
        }
        let d = &self.derived;
        let bracket =
            self.re_binomial_gap(d.m_shift, -1.0, w) + self.re_binomial_gap(d.g_shift, 1.0, w);
        d.kappa + d.c_gamma * bracket
    }

    /// `(B + i s w)^Y - (i s w)^Y` for `s = +-1`, `w > 0`, written as
    /// `(i s w)^Y * expm1(Y log(1 - i s B / w))`.
    fn binomial_gap(&self, shift: f64, side: f64, w: f64) -> Complex64 {
        let (ratio_re, ratio_im, lead_phase) = self.gap_parts(shift, side, w);
        let lead = Complex64::from_polar(w.powf(self.params.y), lead_phase);
        lead * Complex64::new(ratio_re, ratio_im)
    }

    fn re_binomial_gap(&self, shift: f64, side: f64, w: f64) -> f64 {
        let (ratio_re, ratio_im, lead_phase) = self.gap_parts(shift, side, w);
        let (s, c) = lead_phase.sin_cos();
        w.powf(self.params.y) * (c * ratio_re - s * ratio_im)
    }

    /// Real and imaginary parts of `expm1(Y log(1 - i s B / w))` and the
    /// phase of `(i s w)^Y`.
    fn gap_parts(&self, shift: f64, side: f64, w: f64) -> (f64, f64, f64) {
        let y = self.params.y;
        let r = shift / w;
        let log_mod = 0.5 * y * (r * r).ln_1p();
        let angle = -side * y * r.atan();
        let half = (0.5 * angle).sin();
        let re = log_mod.exp_m1() * angle.cos() - 2.0 * half * half;
        let im = log_mod.exp() * angle.sin();
        (re, im, side * FRAC_PI_2 * y)
    }

    /// Large-`w` approximation `i b w + beta1 w^(Y-1) + kappa` of `delta`.
    pub fn delta_leading(&self, w: f64) -> Complex64 {
        let d = &self.derived;
        Complex64::new(d.kappa, d.tilde_b * w) + d.beta1 * w.powf(self.params.y - 1.0)
    }
}
