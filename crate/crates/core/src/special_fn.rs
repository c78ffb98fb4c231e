//! Real gamma function and principal-branch complex powers.
//!
//! The gamma kernel is a Lanczos approximation (g = 607/128, 15 terms) on
//! `x >= 1/2`, extended to `0 < x < 1/2` by the recurrence and to the
//! negative axis by reflection.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Arguments closer than this to a non-positive integer are rejected.
pub const POLE_GUARD: f64 = 1e-9;

/// Largest argument whose gamma value is finite in f64.
const MAX_ARG: f64 = 171.624_376_956_302_7;

const LANCZOS_G: f64 = 607.0 / 128.0;

const LANCZOS_COEF: [f64; 15] = [
    0.999_999_999_999_997_1,
    57.156_235_665_862_92,
    -59.597_960_355_475_49,
    14.136_097_974_741_746,
    -0.491_913_816_097_620_2,
    0.339_946_499_848_118_9e-4,
    0.465_236_289_270_485_8e-4,
    -0.983_744_753_048_795_6e-4,
    0.158_088_703_224_912_5e-3,
    -0.210_264_441_724_104_9e-3,
    0.217_439_618_115_212_6e-3,
    -0.164_318_106_536_763_9e-3,
    0.844_182_239_838_527_4e-4,
    -0.261_908_384_015_814_1e-4,
    0.368_991_826_595_316_2e-5,
];

const SQRT_TWO_PI: f64 = 2.506_628_274_631_000_5;

/// Euler's gamma function on the real line, excluding the poles at
/// `0, -1, -2, ...`.
pub fn gamma(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("gamma of non-finite argument {x}")));
    }
    let nearest = x.round();
    if nearest <= 0.0 && (x - nearest).abs() < POLE_GUARD {
        return Err(Error::Pole { x });
    }
    if x > MAX_ARG {
        return Err(Error::Overflow { x });
    }
    if x >= 0.5 {
        return gamma_positive(x);
    }
    if x > 0.0 {
        // Gamma(x) = Gamma(x + 1) / x
        let value = gamma_positive(x + 1.0)? / x;
        if !value.is_finite() {
            return Err(Error::Overflow { x });
        }
        return Ok(value);
    }

    // Reflection: Gamma(x) Gamma(1 - x) = pi / sin(pi x).
    let reflected = 1.0 - x;
    let s = sin_pi(x);
    if reflected > MAX_ARG {
        // |Gamma(x)| is far below the smallest normal here.
        return Ok(0.0_f64.copysign(s));
    }
    let value = PI / (s * gamma_positive(reflected)?);
    if !value.is_finite() {
        return Err(Error::Overflow { x });
    }
    Ok(value)
}

/// Lanczos kernel, valid for `x >= 1/2`.
fn gamma_positive(x: f64) -> Result<f64> {
    if x == x.trunc() && x <= 23.0 {
        // exact factorials
        let mut acc = 1.0;
        let mut k = 2.0;
        while k < x {
            acc *= k;
            k += 1.0;
        }
        return Ok(acc);
    }
    let z = x - 1.0;
    let mut series = LANCZOS_COEF[0];
    for (k, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        series += c / (z + k as f64);
    }
    let base = z + LANCZOS_G + 0.5;
    // split the power so large arguments do not overflow early
    let half = base.powf(0.5 * (z + 0.5));
    let value = SQRT_TWO_PI * half * (-base).exp() * half * series;
    if !value.is_finite() {
        return Err(Error::Overflow { x });
    }
    Ok(value)
}

/// `sin(pi x)` with exact argument reduction.
fn sin_pi(x: f64) -> f64 {
    let n = x.round();
    let r = x - n;
    let s = (PI * r).sin();
    if n.rem_euclid(2.0) == 0.0 {
        s
    } else {
        -s
    }
}

/// Principal-branch power `base^exponent = exp(exponent * (ln|base| + i Arg base))`
/// with `Arg` in `(-pi, pi]`.
pub fn complex_pow(base: Complex64, exponent: f64) -> Result<Complex64> {
    if base.re == 0.0 && base.im == 0.0 {
        if exponent > 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        return Err(Error::Domain(format!(
            "zero base with non-positive exponent {exponent}"
        )));
    }
    Ok(pow_nonzero(base, exponent))
}

/// Same as [`complex_pow`] for callers that guarantee a nonzero base.
pub(crate) fn pow_nonzero(base: Complex64, exponent: f64) -> Complex64 {
    if base.im == 0.0 && base.re > 0.0 {
        return Complex64::new(base.re.powf(exponent), 0.0);
    }
    let modulus = base.re.hypot(base.im);
    let mut arg = base.im.atan2(base.re);
    if arg == -PI {
        arg = PI;
    }
    let scale = modulus.powf(exponent);
    let (s, c) = (exponent * arg).sin_cos();
    Complex64::new(scale * c, scale * s)
}
