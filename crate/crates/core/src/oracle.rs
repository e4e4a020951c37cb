//! Brute-force posterior moment calculator.
//!
//! Computes mean and variance of the normalized density
//! `p(x) ∝ f(x) · N(x; m, v)` by adaptive Gauss-Kronrod quadrature, for an
//! arbitrary nonnegative factor `f`. Point-mass components of `f` are handled
//! analytically (a delta is not quadrable). This module exists to validate the
//! closed-form denoisers and the solver wiring; it is deliberately slow and is
//! never called from solver hot paths.

use thiserror::Error;

/// Default tolerance used by the test suite.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Integration window half-width, in standard deviations of the Gaussian.
const WINDOW_SIGMAS: f64 = 12.0;

/// Nonnegative scalar factor with optional point masses and split hints.
pub struct FactorFn<'a> {
    f: Box<dyn Fn(f64) -> f64 + 'a>,
    support: (f64, f64),
    /// `(location, weight)` point masses, integrated in closed form.
    atoms: Vec<(f64, f64)>,
    /// Locations where the continuous part is non-smooth or sharply peaked;
    /// the integrator splits there before refining.
    breakpoints: Vec<f64>,
}

impl<'a> FactorFn<'a> {
    pub fn new(f: impl Fn(f64) -> f64 + 'a) -> Self {
        Self {
            f: Box::new(f),
            support: (f64::NEG_INFINITY, f64::INFINITY),
            atoms: Vec::new(),
            breakpoints: Vec::new(),
        }
    }

    /// Constant factor: the posterior is the Gaussian itself.
    pub fn one() -> Self {
        Self::new(|_| 1.0)
    }

    pub fn with_support(mut self, lo: f64, hi: f64) -> Self {
        self.support = (lo, hi);
        self
    }

    pub fn with_atom(mut self, location: f64, weight: f64) -> Self {
        self.atoms.push((location, weight));
        self
    }

    pub fn with_breakpoints(mut self, points: &[f64]) -> Self {
        self.breakpoints.extend_from_slice(points);
        self
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("gauss_var must be positive, got {0}")]
    InvalidGaussVar(f64),
    #[error("tol must lie in (0, 1e-4], got {0}")]
    InvalidTol(f64),
    #[error("factor vanishes on the integration window; posterior is degenerate")]
    DegeneratePosterior,
    #[error("quadrature failed to reach the requested tolerance")]
    NotConverged,
}

/// Posterior mean and variance of `p(x) ∝ f(x) · N(x; gauss_mean, gauss_var)`.
pub fn quad_moments(
    factor: &FactorFn,
    gauss_mean: f64,
    gauss_var: f64,
    tol: f64,
) -> Result<(f64, f64), OracleError> {
    if !(gauss_var > 0.0) || !gauss_var.is_finite() {
        return Err(OracleError::InvalidGaussVar(gauss_var));
    }
    if !(tol > 0.0 && tol <= 1e-4) {
        return Err(OracleError::InvalidTol(tol));
    }

    let sd = gauss_var.sqrt();
    let lo = (gauss_mean - WINDOW_SIGMAS * sd).max(factor.support.0);
    let hi = (gauss_mean + WINDOW_SIGMAS * sd).min(factor.support.1);

    let gauss = |x: f64| {
        let d = (x - gauss_mean) / sd;
        (-0.5 * d * d).exp()
    };
    let g = |x: f64| (factor.f)(x) * gauss(x);

    // Atom contributions, relative to the same unnormalized density scale.
    let mut atom_z = 0.0;
    let mut atom_m1 = 0.0;
    for &(x0, w) in &factor.atoms {
        if x0 >= factor.support.0 && x0 <= factor.support.1 {
            let c = w * gauss(x0);
            atom_z += c;
            atom_m1 += c * x0;
        }
    }

    let (z_cont, m1_cont) = if lo < hi {
        let segments = initial_segments(lo, hi, &factor.breakpoints);
        let z = adaptive_integral(&g, &segments, tol)?;
        let m1 = adaptive_integral(&|x| (x - gauss_mean) * g(x), &segments, tol)?;
        (z, gauss_mean * z + m1)
    } else {
        (0.0, 0.0)
    };

    let z = z_cont + atom_z;
    if !(z > 1e-290) || !z.is_finite() {
        return Err(OracleError::DegeneratePosterior);
    }
    let mean = (m1_cont + atom_m1) / z;

    // Second pass, centered at the computed mean so the variance is not a
    // difference of large numbers.
    let mut m2 = factor
        .atoms
        .iter()
        .filter(|(x0, _)| *x0 >= factor.support.0 && *x0 <= factor.support.1)
        .map(|&(x0, w)| w * gauss(x0) * (x0 - mean) * (x0 - mean))
        .sum::<f64>();
    if lo < hi {
        let segments = initial_segments(lo, hi, &factor.breakpoints);
        m2 += adaptive_integral(&|x| (x - mean) * (x - mean) * g(x), &segments, tol)?;
    }

    Ok((mean, (m2 / z).max(0.0)))
}

fn initial_segments(lo: f64, hi: f64, breakpoints: &[f64]) -> Vec<(f64, f64)> {
    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&b| b > lo && b < hi)
        .collect();
    // A handful of uniform panels so a single K15 rule never has to represent
    // the whole window.
    for i in 1..8 {
        cuts.push(lo + (hi - lo) * i as f64 / 8.0);
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup();
    let mut segs = Vec::with_capacity(cuts.len() + 1);
    let mut prev = lo;
    for c in cuts {
        segs.push((prev, c));
        prev = c;
    }
    segs.push((prev, hi));
    segs
}

/// Adaptive integration over a set of segments: repeatedly bisects the segment
/// with the largest Gauss/Kronrod discrepancy.
fn adaptive_integral(
    g: &impl Fn(f64) -> f64,
    segments: &[(f64, f64)],
    tol: f64,
) -> Result<f64, OracleError> {
    const MAX_SEGMENTS: usize = 4000;

    struct Seg {
        a: f64,
        b: f64,
        value: f64,
        err: f64,
    }
    let eval = |a: f64, b: f64| {
        let (v, e) = gauss_kronrod_15(g, a, b);
        Seg {
            a,
            b,
            value: v,
            err: e,
        }
    };

    let mut segs: Vec<Seg> = segments.iter().map(|&(a, b)| eval(a, b)).collect();
    loop {
        let total: f64 = segs.iter().map(|s| s.value).sum();
        let total_err: f64 = segs.iter().map(|s| s.err).sum();
        // Scale against the absolute integral so sign cancellations in odd
        // integrands do not demand impossible relative accuracy.
        let scale: f64 = segs
            .iter()
            .map(|s| s.value.abs())
            .sum::<f64>()
            .max(f64::MIN_POSITIVE);
        if total_err <= tol * scale || total_err <= 1e-305 {
            return Ok(total);
        }
        if segs.len() >= MAX_SEGMENTS {
            return Err(OracleError::NotConverged);
        }
        let worst = segs
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.err.partial_cmp(&y.1.err).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        let Seg { a, b, .. } = segs.swap_remove(worst);
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            // Interval is at floating point resolution; keep its estimate.
            segs.push(eval(a, b));
            return Ok(segs.iter().map(|s| s.value).sum());
        }
        segs.push(eval(a, mid));
        segs.push(eval(mid, b));
    }
}

// 15-point Kronrod extension of the 7-point Gauss rule (positive abscissae).
const XGK: [f64; 8] = [
    0.991455371120812639207,
    0.949107912342758524526,
    0.864864423359769072789,
    0.741531185599394439864,
    0.586087235467691130295,
    0.405845151377397166907,
    0.207784955007898467601,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224996,
    0.063092092629978553291,
    0.104790010322250183839,
    0.140653259715525918745,
    0.169004726639267902827,
    0.190350578064785409913,
    0.204432940075298892414,
    0.209482141084727828013,
];
const WG: [f64; 4] = [
    0.129484966168869693271,
    0.279705391489276667901,
    0.381830050505118944950,
    0.417959183673469387755,
];

/// Returns the K15 estimate of the integral over `[a, b]` plus an error
/// estimate from the embedded G7 rule.
fn gauss_kronrod_15(g: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = g(c);
    let mut resk = WGK[7] * fc;
    let mut resg = WG[3] * fc;
    for i in 0..7 {
        let x = h * XGK[i];
        let fsum = g(c - x) + g(c + x);
        resk += WGK[i] * fsum;
        if i % 2 == 1 {
            resg += WG[i / 2] * fsum;
        }
    }
    (resk * h, ((resk - resg) * h).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normal;
    use approx::assert_relative_eq;

    #[test]
    fn identity_factor_returns_the_gaussian() {
        let (m, v) = quad_moments(&FactorFn::one(), -2.3, 1.7, DEFAULT_TOL).unwrap();
        assert_relative_eq!(m, -2.3, epsilon = 1e-10);
        assert_relative_eq!(v, 1.7, max_relative = 1e-10);
    }

    #[test]
    fn gaussian_factor_reduces_to_product_formula() {
        let f = FactorFn::new(|x| normal::pdf(x - 2.0));
        let (m, v) = quad_moments(&f, 0.0, 1.0, DEFAULT_TOL).unwrap();
        assert_relative_eq!(m, 1.0, epsilon = 1e-10);
        assert_relative_eq!(v, 0.5, max_relative = 1e-10);
    }

    #[test]
    fn polynomial_factor_matches_closed_form() {
        // f(x) = x^2 against N(0,1): posterior is x^2 phi(x)/E[x^2],
        // mean 0, variance E[x^4]/E[x^2] = 3.
        let f = FactorFn::new(|x| x * x);
        let (m, v) = quad_moments(&f, 0.0, 1.0, DEFAULT_TOL).unwrap();
        assert_relative_eq!(m, 0.0, epsilon = 1e-10);
        assert_relative_eq!(v, 3.0, max_relative = 1e-9);
    }

    #[test]
    fn hard_support_matches_truncated_moments() {
        let f = FactorFn::one().with_support(0.8, f64::INFINITY);
        let (m, v) = quad_moments(&f, -0.5, 2.0, DEFAULT_TOL).unwrap();
        let t = normal::truncated_moments(-0.5, 2.0, 0.8, f64::INFINITY);
        assert_relative_eq!(m, t.mean, max_relative = 1e-9);
        assert_relative_eq!(v, t.var, max_relative = 1e-8);
    }

    #[test]
    fn analytic_atom_agrees_with_narrow_spike_quadrature() {
        // 0.5 * delta(x) + 0.5 * N(x; 0, 2), Gaussian pseudo-observation (1.0, 0.5).
        let slab = |x: f64| 0.5 * normal::pdf(x / 2.0f64.sqrt()) / 2.0f64.sqrt();
        let analytic = FactorFn::new(slab).with_atom(0.0, 0.5);
        let (ma, va) = quad_moments(&analytic, 1.0, 0.5, DEFAULT_TOL).unwrap();

        let width: f64 = 1e-8;
        let spike = move |x: f64| 0.5 * normal::pdf(x / width) / width + slab(x);
        let narrow = FactorFn::new(spike).with_breakpoints(&[-1e-7, -1e-8, 0.0, 1e-8, 1e-7]);
        let (mq, vq) = quad_moments(&narrow, 1.0, 0.5, 1e-12).unwrap();
        assert_relative_eq!(ma, mq, epsilon = 1e-6);
        assert_relative_eq!(va, vq, epsilon = 1e-6, max_relative = 1e-6);
    }

    #[test]
    fn halving_tol_is_self_consistent() {
        let f = || FactorFn::new(|x: f64| (-(x - 1.0).abs()).exp()).with_breakpoints(&[1.0]);
        let tols = [1e-6, 5e-7, 2.5e-7, 1e-8, 1e-10];
        let mut prev: Option<((f64, f64), f64)> = None;
        for &tol in &tols {
            let out = quad_moments(&f(), 0.3, 2.0, tol).unwrap();
            if let Some(((pm, pv), ptol)) = prev {
                assert!((out.0 - pm).abs() < ptol * 10.0);
                assert!((out.1 - pv).abs() < ptol * 10.0);
            }
            prev = Some((out, tol));
        }
    }

    #[test]
    fn even_factor_zero_mean_is_symmetric() {
        let f = FactorFn::new(|x| 1.0 / (1.0 + x * x));
        let (m, _) = quad_moments(&f, 0.0, 4.0, 1e-10).unwrap();
        assert!(m.abs() < 1e-10);
    }

    #[test]
    fn vanishing_factor_is_degenerate() {
        let f = FactorFn::new(|_| 0.0);
        assert_eq!(
            quad_moments(&f, 0.0, 1.0, DEFAULT_TOL),
            Err(OracleError::DegeneratePosterior)
        );
    }

    #[test]
    fn hopeless_integrand_reports_non_convergence() {
        // Millions of oscillations inside the window exceed the subdivision
        // budget; the integrator must refuse rather than return garbage.
        let f = FactorFn::new(|x: f64| (1e6 * x).sin().abs());
        assert_eq!(
            quad_moments(&f, 0.0, 1.0, 1e-10),
            Err(OracleError::NotConverged)
        );
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        assert!(matches!(
            quad_moments(&FactorFn::one(), 0.0, -1.0, DEFAULT_TOL),
            Err(OracleError::InvalidGaussVar(_))
        ));
        assert!(matches!(
            quad_moments(&FactorFn::one(), 0.0, 1.0, 1e-3),
            Err(OracleError::InvalidTol(_))
        ));
    }
}
