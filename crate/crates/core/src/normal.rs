//! Standard-normal primitives that stay accurate deep in the tails: pdf, cdf,
//! the scaled complementary error function, hazard (inverse Mills) ratios and
//! truncated-Gaussian moments.
//!
//! Everything here is expressed through `erfcx(x) = exp(x^2) erfc(x)`, which is
//! finite and well-scaled for arbitrarily large `x`. Plain CDF ratios lose all
//! precision once the argument passes ~8 standard deviations, which the clipped
//! channel hits routinely at high SNR.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;

/// Standard normal density.
#[inline]
pub fn pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Log of the standard normal density.
#[inline]
pub fn ln_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

/// Log density of `N(mean, var)` evaluated at `x`.
#[inline]
pub fn ln_pdf_scaled(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * d * d / var - 0.5 * var.ln() - LN_SQRT_2PI
}

/// Standard normal CDF.
#[inline]
pub fn cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Log of the standard normal CDF, stable for arbitrarily negative `x`.
pub fn ln_cdf(x: f64) -> f64 {
    if x > -1.0 {
        cdf(x).ln()
    } else {
        // ln Phi(x) = -x^2/2 + ln(erfcx(-x/sqrt2)/2)
        -0.5 * x * x + (0.5 * erfcx(-x * FRAC_1_SQRT_2)).ln()
    }
}

/// Scaled complementary error function `exp(x^2) erfc(x)`.
///
/// Returns `+inf` once the reflection term `2 exp(x^2)` overflows (x < -26.6);
/// callers only ever divide by it in that regime.
pub fn erfcx(x: f64) -> f64 {
    if x >= 25.0 {
        // Asymptotic series: 1/(x sqrt(pi)) * sum_k (-1)^k (2k-1)!!/(2x^2)^k.
        let ix2 = 1.0 / (2.0 * x * x);
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..=6u32 {
            term *= -((2 * k - 1) as f64) * ix2;
            sum += term;
        }
        sum / (x * PI.sqrt())
    } else if x >= 0.0 {
        (x * x).exp() * libm::erfc(x)
    } else if x > -26.6 {
        2.0 * (x * x).exp() - erfcx(-x)
    } else {
        f64::INFINITY
    }
}

/// Hazard ratio `pdf(x) / (1 - cdf(x))`, stable for large `x`.
#[inline]
pub fn hazard(x: f64) -> f64 {
    if x < -26.0 {
        // Upper tail mass is 1 to machine precision.
        pdf(x)
    } else {
        SQRT_2_OVER_PI / erfcx(x * FRAC_1_SQRT_2)
    }
}

/// Moments of a truncated Gaussian.
#[derive(Clone, Copy, Debug)]
pub struct TruncMoments {
    pub mean: f64,
    pub var: f64,
    /// Log of the un-truncated mass `P(lo <= X <= hi)`.
    pub ln_mass: f64,
}

/// Moments of `X ~ N(mean, var)` conditioned on `lo <= X <= hi`.
///
/// Either bound may be infinite. Intervals carrying essentially no mass
/// (standardized bounds beyond ~38 sigma on the same side) degrade gracefully
/// to a point estimate at the nearest bound.
pub fn truncated_moments(mean: f64, var: f64, lo: f64, hi: f64) -> TruncMoments {
    debug_assert!(var > 0.0 && lo <= hi);
    let s = var.sqrt();
    let alpha = if lo == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else {
        (lo - mean) / s
    };
    let beta = if hi == f64::INFINITY {
        f64::INFINITY
    } else {
        (hi - mean) / s
    };

    if alpha == f64::NEG_INFINITY && beta == f64::INFINITY {
        return TruncMoments {
            mean,
            var,
            ln_mass: 0.0,
        };
    }
    if alpha == f64::NEG_INFINITY {
        // Reflect the one-sided case.
        let m = one_sided_lower(-beta);
        return TruncMoments {
            mean: mean - s * m.0,
            var: var * m.1,
            ln_mass: m.2,
        };
    }
    if beta == f64::INFINITY {
        let m = one_sided_lower(alpha);
        return TruncMoments {
            mean: mean + s * m.0,
            var: var * m.1,
            ln_mass: m.2,
        };
    }

    let (m, v, ln_mass) = two_sided_std(alpha, beta);
    TruncMoments {
        mean: mean + s * m,
        var: (var * v).max(0.0),
        ln_mass,
    }
}

/// Standardized moments of `Z ~ N(0,1) | Z >= a`: returns (mean, var, ln mass).
fn one_sided_lower(a: f64) -> (f64, f64, f64) {
    if a > 8.0 {
        // Laplace continued fraction for the Mills ratio, arranged so that the
        // small quantities K = h - a and the variance survive cancellation:
        //   h = a + K,  K = 1/(a + K2),  K2 = 2/(a + K3), ...
        //   var = K2/(a + K2) - K^2.
        let mut tail = 0.0_f64;
        for j in (2..=40u32).rev() {
            tail = f64::from(j) / (a + tail);
        }
        let k2 = tail; // = 2/(a + K3)
        let k = 1.0 / (a + k2);
        let var = (k2 / (a + k2) - k * k).max(0.0);
        (a + k, var, ln_cdf(-a))
    } else {
        let h = hazard(a);
        let var = (1.0 + a * h - h * h).max(0.0);
        (h, var, ln_cdf(-a))
    }
}

/// Standardized two-sided moments on `[a, b]`: returns (mean, var, ln mass).
fn two_sided_std(a: f64, b: f64) -> (f64, f64, f64) {
    if b - a <= 2e-3 {
        // Narrow interval: direct CDF differences lose all significance, but a
        // second-order expansion of the density around the midpoint is exact to
        // O(width^4).
        let mid = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        let h2 = h * h;
        let mean = mid - mid * h2 / 3.0;
        let var = (h2 / 3.0) * (1.0 - h2 * (3.0 * mid * mid + 2.0) / 15.0);
        let ln_mass = ln_pdf(mid)
            + (2.0 * h).max(f64::MIN_POSITIVE).ln()
            + ((mid * mid - 1.0) * h2 / 6.0).ln_1p();
        return (mean, var.max(0.0), ln_mass);
    }
    if b <= 0.0 {
        // Mirror into the right tail.
        let (m, v, z) = two_sided_std(-b, -a);
        return (-m, v, z);
    }
    if a >= 0.0 {
        // Entire interval in the right tail: scale by exp(a^2/2) throughout.
        // Z = Phic(a) - Phic(b) = 0.5 exp(-a^2/2) * d, d = erfcx(a/s2) - r erfcx(b/s2)
        let r = (-0.5 * (b - a) * (b + a)).exp();
        let d = erfcx(a * FRAC_1_SQRT_2) - r * erfcx(b * FRAC_1_SQRT_2);
        if !(d > 0.0) || d < 1e-14 * erfcx(a * FRAC_1_SQRT_2) {
            // Vanishing interval; all mass concentrates between the bounds.
            let mid = 0.5 * (a + b);
            let w = b - a;
            return (
                mid,
                w * w / 12.0,
                ln_pdf(mid) + w.max(f64::MIN_POSITIVE).ln(),
            );
        }
        let pa = 2.0 * INV_SQRT_2PI / d; // pdf(a)/Z
        let pb = pa * r; // pdf(b)/Z
        let m = pa - pb;
        let v = (1.0 + a * pa - b * pb - m * m).max(0.0);
        let ln_mass = -0.5 * a * a + (0.5 * d).ln();
        return (m, v, ln_mass);
    }
    // Interval straddles zero: the erf difference is a sum of two positive
    // terms here, so it keeps full relative precision however small it is.
    let z = 0.5 * (libm::erf(b * FRAC_1_SQRT_2) - libm::erf(a * FRAC_1_SQRT_2));
    if z <= 0.0 {
        let mid = 0.5 * (a + b);
        let w = (b - a).max(f64::MIN_POSITIVE);
        return (mid, w * w / 12.0, ln_pdf(mid) + w.ln());
    }
    let pa = pdf(a) / z;
    let pb = pdf(b) / z;
    let m = pa - pb;
    let v = (1.0 + a * pa - b * pb - m * m).max(0.0);
    (m, v, z.ln())
}
