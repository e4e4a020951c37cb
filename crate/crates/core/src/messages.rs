//! Scalar Gaussian message algebra: extrinsic (EP) updates, Gaussian products
//! and variance sanitization.
//!
//! A message is a `(mean, variance)` pair; `variance = +inf` encodes an
//! uninformative message. All combination rules work in the natural-parameter
//! domain (precision, precision-weighted mean) so uninformative messages drop
//! out exactly.

use thiserror::Error;

/// Mean/variance pair carried between factor-graph nodes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianMessage {
    pub mean: f64,
    pub variance: f64,
}

impl GaussianMessage {
    pub fn new(mean: f64, variance: f64) -> Self {
        Self { mean, variance }
    }

    /// Message carrying no information: mean 0 by convention, infinite variance.
    pub fn uninformative() -> Self {
        Self {
            mean: 0.0,
            variance: f64::INFINITY,
        }
    }

    pub fn is_uninformative(&self) -> bool {
        self.variance.is_infinite()
    }

    #[inline]
    fn precision(&self) -> f64 {
        if self.variance.is_infinite() {
            0.0
        } else {
            1.0 / self.variance
        }
    }

    /// Precision-weighted mean (natural parameter).
    #[inline]
    fn weighted_mean(&self) -> f64 {
        self.precision() * self.mean
    }

    fn validate(&self, role: &'static str) -> Result<(), MessageError> {
        if !self.mean.is_finite() || self.variance.is_nan() || self.variance <= 0.0 {
            return Err(MessageError::InvalidMessage {
                role,
                mean: self.mean,
                variance: self.variance,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum MessageError {
    #[error("invalid {role} message: mean={mean}, variance={variance}")]
    InvalidMessage {
        role: &'static str,
        mean: f64,
        variance: f64,
    },
}

/// Extrinsic update: removes the input message from the posterior in the
/// precision domain.
///
/// `v_out = [1/v_post - 1/v_in]^-1`, `x_out = v_out [x_post/v_post - x_in/v_in]`.
///
/// The raw output variance may be negative (posterior wider than the input);
/// it must go through [`sanitize_variance`] before being used as a variance
/// again. A posterior exactly as wide as the input yields the uninformative
/// message.
pub fn ep_extrinsic(
    post: GaussianMessage,
    input: GaussianMessage,
) -> Result<GaussianMessage, MessageError> {
    post.validate("posterior")?;
    input.validate("input")?;
    if input.is_uninformative() {
        // Nothing to remove: the posterior passes through bit-exactly.
        return Ok(post);
    }
    let prec = post.precision() - input.precision();
    let h = post.weighted_mean() - input.weighted_mean();
    if prec == 0.0 {
        return Ok(GaussianMessage::uninformative());
    }
    let variance = 1.0 / prec;
    Ok(GaussianMessage {
        mean: variance * h,
        variance,
    })
}

/// Combines two Gaussian messages by pointwise density product.
///
/// Precisions add; the result is never wider than either factor. Two
/// uninformative inputs produce the uninformative message (mean 0 by
/// convention).
pub fn gaussian_product(
    a: GaussianMessage,
    b: GaussianMessage,
) -> Result<GaussianMessage, MessageError> {
    a.validate("left factor")?;
    b.validate("right factor")?;
    // An uninformative factor is the exact identity element.
    if a.is_uninformative() {
        return Ok(if b.is_uninformative() {
            GaussianMessage::uninformative()
        } else {
            b
        });
    }
    if b.is_uninformative() {
        return Ok(a);
    }
    let prec = a.precision() + b.precision();
    if prec == 0.0 {
        return Ok(GaussianMessage::uninformative());
    }
    let variance = 1.0 / prec;
    Ok(GaussianMessage {
        mean: variance * (a.weighted_mean() + b.weighted_mean()),
        variance,
    })
}

/// Clamps a variance into `[floor, cap]`; non-positive or non-finite values
/// are treated as uninformative and mapped to the cap.
///
/// Total function: never panics, always returns a value in `[floor, cap]`.
#[inline]
pub fn sanitize_variance(v: f64, floor: f64, cap: f64) -> f64 {
    debug_assert!(floor > 0.0 && cap >= floor);
    if v.is_finite() && v > 0.0 {
        v.clamp(floor, cap)
    } else {
        cap
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn msg(mean: f64, variance: f64) -> GaussianMessage {
        GaussianMessage::new(mean, variance)
    }

    /// Brute-force product of two Gaussian densities on a fine grid.
    fn grid_product_moments(a: GaussianMessage, b: GaussianMessage) -> (f64, f64) {
        let lo = (a.mean - 14.0 * a.variance.sqrt()).min(b.mean - 14.0 * b.variance.sqrt());
        let hi = (a.mean + 14.0 * a.variance.sqrt()).max(b.mean + 14.0 * b.variance.sqrt());
        let n = 400_001;
        let dx = (hi - lo) / (n - 1) as f64;
        let dens = |m: GaussianMessage, x: f64| {
            let d = x - m.mean;
            (-0.5 * d * d / m.variance).exp()
        };
        let (mut z, mut m1, mut m2) = (0.0, 0.0, 0.0);
        for i in 0..n {
            let x = lo + i as f64 * dx;
            let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
            let f = w * dens(a, x) * dens(b, x);
            z += f;
            m1 += f * x;
        }
        let mean = m1 / z;
        for i in 0..n {
            let x = lo + i as f64 * dx;
            let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
            m2 += w * dens(a, x) * dens(b, x) * (x - mean) * (x - mean);
        }
        (mean, m2 / z)
    }

    #[test]
    fn extrinsic_direct_substitution() {
        let out = ep_extrinsic(msg(1.0, 0.5), msg(0.0, 1.0)).unwrap();
        assert_relative_eq!(out.mean, 2.0, max_relative = 1e-14);
        assert_relative_eq!(out.variance, 1.0, max_relative = 1e-14);
    }

    #[test]
    fn extrinsic_with_uninformative_input_returns_posterior() {
        let out = ep_extrinsic(msg(0.7, 0.37), msg(123.0, f64::INFINITY)).unwrap();
        assert_eq!(out, msg(0.7, 0.37));
    }

    #[test]
    fn extrinsic_inverts_gaussian_product() {
        let constraint = msg(-1.3, 0.8);
        let input = msg(2.0, 3.0);
        let post = gaussian_product(constraint, input).unwrap();
        let out = ep_extrinsic(post, input).unwrap();
        assert_relative_eq!(out.mean, constraint.mean, max_relative = 1e-12);
        assert_relative_eq!(out.variance, constraint.variance, max_relative = 1e-12);
    }

    #[test]
    fn extrinsic_equal_widths_is_uninformative() {
        let out = ep_extrinsic(msg(1.0, 2.0), msg(3.0, 2.0)).unwrap();
        assert!(out.is_uninformative());
        assert_eq!(out.mean, 0.0);
    }

    #[test]
    fn extrinsic_raw_variance_can_be_negative() {
        // Posterior wider than the input: raw precision difference is negative.
        let out = ep_extrinsic(msg(0.0, 2.0), msg(0.0, 1.0)).unwrap();
        assert!(out.variance < 0.0);
        assert_eq!(sanitize_variance(out.variance, 1e-12, 1e6), 1e6);
    }

    #[test]
    fn extrinsic_rejects_non_finite_mean() {
        assert!(ep_extrinsic(msg(f64::NAN, 1.0), msg(0.0, 1.0)).is_err());
        assert!(ep_extrinsic(msg(0.0, 1.0), msg(f64::INFINITY, 1.0)).is_err());
        assert!(ep_extrinsic(msg(0.0, -1.0), msg(0.0, 1.0)).is_err());
    }

    #[test]
    fn product_equal_variance_average() {
        let out = gaussian_product(msg(0.0, 1.0), msg(2.0, 1.0)).unwrap();
        assert_relative_eq!(out.mean, 1.0, max_relative = 1e-14);
        assert_relative_eq!(out.variance, 0.5, max_relative = 1e-14);
    }

    #[test]
    fn product_with_identity_element() {
        let out = gaussian_product(msg(0.9, 0.44), msg(7.0, f64::INFINITY)).unwrap();
        assert_eq!(out, msg(0.9, 0.44));
    }

    #[test]
    fn product_of_two_uninformative_is_flagged() {
        let out = gaussian_product(msg(1.0, f64::INFINITY), msg(-2.0, f64::INFINITY)).unwrap();
        assert!(out.is_uninformative());
        assert_eq!(out.mean, 0.0);
    }

    #[test]
    fn product_matches_grid_oracle() {
        let a = msg(1.0, 0.25);
        let b = msg(3.0, 0.75);
        let out = gaussian_product(a, b).unwrap();
        assert_relative_eq!(out.mean, 1.5, max_relative = 1e-14);
        assert_relative_eq!(out.variance, 0.1875, max_relative = 1e-14);
        let (gm, gv) = grid_product_moments(a, b);
        assert_relative_eq!(out.mean, gm, max_relative = 1e-8);
        assert_relative_eq!(out.variance, gv, max_relative = 1e-6);
    }

    #[test]
    fn sanitize_variance_examples() {
        assert_eq!(sanitize_variance(-0.3, 1e-12, 1e6), 1e6);
        assert_eq!(sanitize_variance(0.5, 1e-12, 1e6), 0.5);
        assert_eq!(sanitize_variance(1e-20, 1e-12, 1e6), 1e-12);
        assert_eq!(sanitize_variance(f64::NAN, 1e-12, 1e6), 1e6);
        assert_eq!(sanitize_variance(f64::INFINITY, 1e-12, 1e6), 1e6);
        assert_eq!(sanitize_variance(0.0, 1e-12, 1e6), 1e6);
    }

    proptest! {
        #[test]
        fn round_trip_recovers_constraint(
            // Variance ratios are capped near 1e3 so the natural-parameter
            // subtraction stays representable at the asserted 1e-12; the
            // identity itself is exact.
            m1 in -50.0..50.0f64, v1 in 0.05..50.0f64,
            m2 in -50.0..50.0f64, v2 in 0.05..50.0f64,
        ) {
            let constraint = msg(m1, v1);
            let input = msg(m2, v2);
            let post = gaussian_product(constraint, input).unwrap();
            let out = ep_extrinsic(post, input).unwrap();
            prop_assume!(out.variance > 0.0);
            prop_assert!((out.variance - v1).abs() <= 1e-12 * v1.max(1.0));
            prop_assert!((out.mean - m1).abs() <= 1e-9 * m1.abs().max(1.0));
        }

        #[test]
        fn product_is_commutative_and_contracting(
            m1 in -50.0..50.0f64, v1 in 1e-3..1e3f64,
            m2 in -50.0..50.0f64, v2 in 1e-3..1e3f64,
        ) {
            let a = msg(m1, v1);
            let b = msg(m2, v2);
            let ab = gaussian_product(a, b).unwrap();
            let ba = gaussian_product(b, a).unwrap();
            prop_assert!((ab.mean - ba.mean).abs() <= 1e-12 * ab.mean.abs().max(1.0));
            prop_assert_eq!(ab.variance, ba.variance);
            prop_assert!(ab.variance <= v1.min(v2));
            // Precision additivity.
            prop_assert!((1.0 / ab.variance - (1.0 / v1 + 1.0 / v2)).abs()
                <= 1e-12 * (1.0 / v1 + 1.0 / v2));
        }

        #[test]
        fn product_is_associative(
            m1 in -10.0..10.0f64, v1 in 1e-3..1e3f64,
            m2 in -10.0..10.0f64, v2 in 1e-3..1e3f64,
            m3 in -10.0..10.0f64, v3 in 1e-3..1e3f64,
        ) {
            let (a, b, c) = (msg(m1, v1), msg(m2, v2), msg(m3, v3));
            let left = gaussian_product(gaussian_product(a, b).unwrap(), c).unwrap();
            let right = gaussian_product(a, gaussian_product(b, c).unwrap()).unwrap();
            prop_assert!((left.mean - right.mean).abs() <= 1e-12 * left.mean.abs().max(1.0));
            prop_assert!((left.variance - right.variance).abs() <= 1e-12 * left.variance);
        }

        #[test]
        fn gaussian_constraint_extrinsic_ignores_input(
            mc in -20.0..20.0f64, vc in 1e-2..1e2f64,
            mi1 in -20.0..20.0f64, vi1 in 1e-2..1e2f64,
            mi2 in -20.0..20.0f64, vi2 in 1e-2..1e2f64,
        ) {
            // For a Gaussian constraint the extrinsic output equals the
            // constraint itself, independent of the input message.
            let c = msg(mc, vc);
            let o1 = ep_extrinsic(gaussian_product(c, msg(mi1, vi1)).unwrap(), msg(mi1, vi1)).unwrap();
            let o2 = ep_extrinsic(gaussian_product(c, msg(mi2, vi2)).unwrap(), msg(mi2, vi2)).unwrap();
            prop_assume!(o1.variance > 0.0 && o2.variance > 0.0);
            prop_assert!((o1.mean - o2.mean).abs() <= 1e-8 * o1.mean.abs().max(1.0));
            prop_assert!((o1.variance - o2.variance).abs() <= 1e-8 * o1.variance);
        }
    }
}
