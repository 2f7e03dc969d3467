//! Generalized extreme value distribution: density, CDF, quantiles, sampling,
//! analytic log-likelihood gradients, and maximum-likelihood fitting.
//!
//! The distribution is `G(y) = exp(-(1 + ξ·ȳ)^(-1/ξ))` on `1 + ξ·ȳ > 0`
//! with `ȳ = (y - μ)/σ`; the `ξ = 0` case is the Gumbel limit
//! `G(y) = exp(-exp(-ȳ))`. The shape ξ is the tail index: positive means a
//! heavy (Fréchet) tail, zero an exponential (Gumbel) tail, negative a
//! bounded (Weibull) tail.

mod fit;

pub use fit::{fit_mle, FitOptions, FitResult};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{c, to_f64, Scalar};
use crate::util::{open01, rng_from};

/// Shapes with |ξ| at or below this use the Gumbel limit branch, avoiding
/// catastrophic cancellation in `(1 + ξȳ)^(-1/ξ)`.
pub const XI_EPS: f64 = 1e-8;

/// Convergence threshold on the projected mean-log-likelihood gradient norm.
pub const GRAD_TOL: f64 = 1e-6;

/// Shape clamp for fitting and learned heads. The lower bound keeps the MLE
/// in its regular regime (ξ > -0.5); the upper bound prevents divergence on
/// tiny samples.
pub const XI_MIN: f64 = -0.45;
pub const XI_MAX: f64 = 5.0;

/// Finite stand-in for -inf log density inside optimization loops, so
/// gradient-based fitting never sees NaN. User-facing queries return -inf.
pub const LOG_SENTINEL: f64 = -1e10;

/// Location / scale / shape of one GEV distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GevParams<T> {
    /// Location μ, in outcome units.
    pub mu: T,
    /// Scale σ > 0, in outcome units.
    pub sigma: T,
    /// Shape (tail index) ξ, dimensionless.
    pub xi: T,
}

impl<T: Scalar> GevParams<T> {
    pub fn new(mu: T, sigma: T, xi: T) -> Result<Self> {
        if !mu.is_finite() || !sigma.is_finite() || !xi.is_finite() {
            return Err(Error::invalid(format!(
                "non-finite GEV parameters ({mu}, {sigma}, {xi})"
            )));
        }
        if sigma <= T::zero() {
            return Err(Error::invalid(format!("sigma must be > 0, got {sigma}")));
        }
        Ok(GevParams { mu, sigma, xi })
    }

    fn is_gumbel(&self) -> bool {
        self.xi.abs() <= c(XI_EPS)
    }

    /// True when y lies in the support `{ y : 1 + ξ·(y-μ)/σ > 0 }`
    /// (all reals in the Gumbel branch).
    pub fn support_contains(&self, y: T) -> bool {
        if self.is_gumbel() {
            y.is_finite()
        } else {
            y.is_finite() && T::one() + self.xi * (y - self.mu) / self.sigma > T::zero()
        }
    }

    /// Log density. Returns -inf outside the support; errors on non-finite y.
    pub fn logpdf(&self, y: T) -> Result<T> {
        if !y.is_finite() {
            return Err(Error::invalid(format!("non-finite sample {y}")));
        }
        Ok(logpdf_raw(self.mu, self.sigma, self.xi, y))
    }

    /// Log density with the finite optimization sentinel in place of -inf/NaN.
    pub fn logpdf_sentinel(&self, y: T) -> T {
        let l = logpdf_raw(self.mu, self.sigma, self.xi, y);
        if l.is_finite() && l > c(LOG_SENTINEL) {
            l
        } else {
            c(LOG_SENTINEL)
        }
    }

    /// CDF `G(y)`. 0 below the lower support bound (ξ > 0), 1 above the
    /// upper bound (ξ < 0); errors on non-finite y.
    pub fn cdf(&self, y: T) -> Result<T> {
        if !y.is_finite() {
            return Err(Error::invalid(format!("non-finite sample {y}")));
        }
        let z = (y - self.mu) / self.sigma;
        if self.is_gumbel() {
            return Ok((-(-z).exp()).exp());
        }
        let u = T::one() + self.xi * z;
        if u <= T::zero() {
            // Below the lower endpoint for heavy tails, above the upper
            // endpoint for bounded tails.
            return Ok(if self.xi > T::zero() { T::zero() } else { T::one() });
        }
        Ok((-u.powf(-self.xi.recip())).exp())
    }

    /// Quantile function, the inverse of [`Self::cdf`]. Requires 0 < q < 1.
    pub fn quantile(&self, q: T) -> Result<T> {
        if !(q > T::zero() && q < T::one()) {
            return Err(Error::invalid(format!("quantile level {q} outside (0, 1)")));
        }
        let w = -q.ln(); // -ln q > 0
        if self.is_gumbel() {
            Ok(self.mu - self.sigma * w.ln())
        } else {
            Ok(self.mu + self.sigma * (w.powf(-self.xi) - T::one()) / self.xi)
        }
    }

    /// One inverse-CDF draw.
    pub fn draw_with<R: Rng>(&self, rng: &mut R) -> T {
        let u: T = open01(rng);
        self.quantile(u).expect("open01 in range")
    }

    /// n i.i.d. draws via inverse CDF on uniforms; deterministic given seed.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Vec<T>> {
        if n == 0 {
            return Err(Error::invalid("sample size must be >= 1"));
        }
        let mut rng = rng_from(seed);
        Ok(self.sample_with(n, &mut rng))
    }

    pub fn sample_with<R: Rng>(&self, n: usize, rng: &mut R) -> Vec<T> {
        (0..n).map(|_| self.draw_with(rng)).collect()
    }

    /// Log-likelihood of a sample, with sentinel substitution outside support.
    pub fn loglik_sentinel(&self, samples: &[T]) -> T {
        samples
            .iter()
            .fold(T::zero(), |acc, &y| acc + self.logpdf_sentinel(y))
    }
}

/// Log density at fixed parameters; -inf outside support, no validation.
pub(crate) fn logpdf_raw<T: Scalar>(mu: T, sigma: T, xi: T, y: T) -> T {
    let z = (y - mu) / sigma;
    if xi.abs() <= c(XI_EPS) {
        return -sigma.ln() - z - (-z).exp();
    }
    let u = T::one() + xi * z;
    if u <= T::zero() {
        return T::neg_infinity();
    }
    let inv_xi = xi.recip();
    -sigma.ln() - (T::one() + inv_xi) * u.ln() - u.powf(-inv_xi)
}

/// Analytic gradient of the total log-likelihood in (μ, σ, ξ).
///
/// Matches central finite differences to relative error below 1e-5 on
/// in-support samples; errors with the first offending index otherwise.
pub fn loglik_grad<T: Scalar>(p: &GevParams<T>, samples: &[T]) -> Result<[T; 3]> {
    let mut g = [T::zero(); 3];
    for (i, &y) in samples.iter().enumerate() {
        if !p.support_contains(y) {
            return Err(Error::SupportViolation {
                value: to_f64(y),
                index: i,
            });
        }
        let gi = logpdf_grad_raw(p.mu, p.sigma, p.xi, y);
        for k in 0..3 {
            g[k] = g[k] + gi[k];
        }
    }
    Ok(g)
}

/// Per-sample gradient of the log density in (μ, σ, ξ); assumes y in support.
pub(crate) fn logpdf_grad_raw<T: Scalar>(mu: T, sigma: T, xi: T, y: T) -> [T; 3] {
    let z = (y - mu) / sigma;
    if xi.abs() <= c(XI_EPS) {
        // Gumbel branch. The ξ component is the exact ξ -> 0 limit of the
        // general expression: z²/2 - z - e^{-z}·z²/2.
        let emz = (-z).exp();
        let g_mu = (T::one() - emz) / sigma;
        let g_sigma = (z * (T::one() - emz) - T::one()) / sigma;
        let half_z2 = z * z / c(2.0);
        let g_xi = half_z2 - z - emz * half_z2;
        return [g_mu, g_sigma, g_xi];
    }
    let u = T::one() + xi * z;
    let inv_xi = xi.recip();
    let u_pow = u.powf(-inv_xi); // u^{-1/ξ}
    let ln_u = u.ln();
    // dl/du for l = -ln σ - (1 + 1/ξ) ln u - u^{-1/ξ}
    let dl_du = -(T::one() + inv_xi) / u + inv_xi * u_pow / u;
    let g_mu = dl_du * (-xi / sigma);
    let g_sigma = -sigma.recip() + dl_du * (-xi * z / sigma);
    let g_xi = inv_xi * inv_xi * ln_u - (T::one() + inv_xi) * z / u
        - u_pow * (inv_xi * inv_xi * ln_u - z / (xi * u));
    [g_mu, g_sigma, g_xi]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Central finite difference of a scalar function.
    fn central_diff(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    #[test]
    fn gumbel_logpdf_at_mode() {
        // exp(-(y + e^{-y})) at 0 is e^{-1}.
        let p = GevParams::new(0.0, 1.0, 0.0).unwrap();
        assert_relative_eq!(p.logpdf(0.0).unwrap(), -1.0, max_relative = 1e-12);
    }

    #[test]
    fn logpdf_outside_support_is_neg_inf() {
        // 1 + ξ·ȳ = 1 + 1·(-1.5) = -0.5
        let p = GevParams::new(0.0, 1.0, 1.0).unwrap();
        assert_eq!(p.logpdf(-1.5).unwrap(), f64::NEG_INFINITY);
        assert_eq!(p.logpdf_sentinel(-1.5), LOG_SENTINEL);
    }

    #[test]
    fn logpdf_matches_cdf_derivative() {
        // Oracle: central difference of the CDF, rel tol 1e-6.
        let p = GevParams::new(2.0, 3.0, 0.4).unwrap();
        let y = 5.0;
        let pdf_fd = central_diff(|v| p.cdf(v).unwrap(), y, 1e-6);
        assert_relative_eq!(p.logpdf(y).unwrap(), pdf_fd.ln(), max_relative = 1e-6);
    }

    #[test]
    fn logpdf_rejects_non_finite() {
        let p = GevParams::new(0.0, 1.0, 0.2).unwrap();
        assert!(p.logpdf(f64::NAN).is_err());
        assert!(p.logpdf(f64::INFINITY).is_err());
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(GevParams::new(0.0, 0.0, 0.1).is_err());
        assert!(GevParams::new(0.0, -1.0, 0.1).is_err());
        assert!(GevParams::new(f64::NAN, 1.0, 0.1).is_err());
        assert!(GevParams::new(0.0, 1.0, f64::INFINITY).is_err());
    }

    #[test]
    fn cdf_known_values() {
        let e_inv = (-1.0f64).exp();
        let gumbel = GevParams::new(0.0, 1.0, 0.0).unwrap();
        assert_relative_eq!(gumbel.cdf(0.0).unwrap(), e_inv, max_relative = 1e-12);
        let frechet = GevParams::new(0.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(frechet.cdf(0.0).unwrap(), e_inv, max_relative = 1e-12);
        // Upper endpoint mu + sigma/|xi| = 2 reached.
        let weibull = GevParams::new(0.0, 1.0, -0.5).unwrap();
        assert_eq!(weibull.cdf(2.0).unwrap(), 1.0);
        assert_eq!(weibull.cdf(5.0).unwrap(), 1.0);
        // Below the lower endpoint of a heavy tail.
        assert_eq!(frechet.cdf(-2.0).unwrap(), 0.0);
    }

    #[test]
    fn cdf_monotone_in_y() {
        for xi in [-0.4, -0.1, 0.0, 0.1, 0.5, 1.5] {
            let p = GevParams::new(1.0, 2.0, xi).unwrap();
            let mut prev = -1.0;
            for i in 0..200 {
                let y = -20.0 + 40.0 * i as f64 / 199.0;
                let f = p.cdf(y).unwrap();
                assert!(f >= prev - 1e-15, "xi={xi} y={y}");
                prev = f;
            }
        }
    }

    #[test]
    fn quantile_inverts_cdf() {
        let e_inv = (-1.0f64).exp();
        let gumbel = GevParams::new(0.0, 1.0, 0.0).unwrap();
        assert_relative_eq!(gumbel.quantile(e_inv).unwrap(), 0.0, epsilon = 1e-12);
        let frechet = GevParams::new(0.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(frechet.quantile(e_inv).unwrap(), 0.0, epsilon = 1e-12);

        let p: GevParams<f64> = GevParams::new(5.0, 2.0, 0.3).unwrap();
        let y = p.quantile(0.5).unwrap();
        assert!((p.cdf(y).unwrap() - 0.5).abs() < 1e-10);

        for xi in [-0.4, -0.1, 0.0, 0.1, 0.5, 1.5] {
            let p = GevParams::new(1.0, 2.0, xi).unwrap();
            for i in 1..1000 {
                let q = 0.001 + 0.998 * i as f64 / 999.0;
                let y = p.quantile(q).unwrap();
                assert!(
                    (p.cdf(y).unwrap() - q).abs() < 1e-10,
                    "xi={xi} q={q}"
                );
            }
        }
    }

    #[test]
    fn quantile_rejects_bad_levels() {
        let p = GevParams::new(0.0, 1.0, 0.0).unwrap();
        assert!(p.quantile(0.0).is_err());
        assert!(p.quantile(1.0).is_err());
        assert!(p.quantile(-0.2).is_err());
    }

    #[test]
    fn sampling_mean_matches_euler_mascheroni() {
        // Gumbel(0,1) mean is the Euler-Mascheroni constant.
        let p = GevParams::new(0.0, 1.0, 0.0).unwrap();
        let xs = p.sample(1_000_000, 42).unwrap();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        assert!((mean - 0.5772156649).abs() < 0.005, "mean = {mean}");
    }

    #[test]
    fn sample_rejects_zero_n() {
        let p = GevParams::new(0.0, 1.0, 0.0).unwrap();
        assert!(p.sample(0, 1).is_err());
    }

    #[test]
    fn sample_quantiles_match() {
        let p: GevParams<f64> = GevParams::new(0.0, 1.0, 0.5).unwrap();
        let xs = crate::util::sorted(&p.sample(100_000, 7).unwrap());
        let emp = crate::util::quantile_sorted(&xs, 0.9);
        let th = p.quantile(0.9).unwrap();
        assert!((emp - th).abs() / th.abs() < 0.02, "emp={emp} th={th}");
    }

    #[test]
    fn sampling_determinism() {
        let p = GevParams::new(1.0, 2.0, -0.2).unwrap();
        assert_eq!(p.sample(100, 9).unwrap(), p.sample(100, 9).unwrap());
    }

    #[test]
    fn gumbel_limit_continuity() {
        let near = GevParams::new(0.3, 1.7, 1e-9).unwrap();
        let gumbel = GevParams::new(0.3, 1.7, 0.0).unwrap();
        for i in 0..100 {
            let y = -4.0 + 14.0 * i as f64 / 99.0;
            let a = near.logpdf(y).unwrap();
            let b = gumbel.logpdf(y).unwrap();
            assert!((a - b).abs() < 1e-4, "y={y}: {a} vs {b}");
        }
    }

    #[test]
    fn grad_matches_finite_differences() {
        let p = GevParams::new(0.0, 1.0, 0.3).unwrap();
        let ys = p.sample(100, 3).unwrap();
        let g = loglik_grad(&p, &ys).unwrap();
        let ll = |mu: f64, sigma: f64, xi: f64| -> f64 {
            ys.iter()
                .map(|&y| logpdf_raw(mu, sigma, xi, y))
                .sum::<f64>()
        };
        let h = 1e-6;
        let fd = [
            central_diff(|v| ll(v, 1.0, 0.3), 0.0, h),
            central_diff(|v| ll(0.0, v, 0.3), 1.0, h),
            central_diff(|v| ll(0.0, 1.0, v), 0.3, h),
        ];
        for k in 0..3 {
            let rel = (g[k] - fd[k]).abs() / fd[k].abs().max(1.0);
            assert!(rel < 1e-5, "component {k}: {} vs {}", g[k], fd[k]);
        }
    }

    #[test]
    fn grad_gumbel_branch_single_sample_at_mu() {
        // Single sample y = mu on the ξ = 0 branch, checked against finite
        // differences component-wise.
        let p = GevParams::new(2.0, 1.5, 0.0).unwrap();
        let ys = [2.0];
        let g = loglik_grad(&p, &ys).unwrap();
        let h = 1e-6;
        let fd_mu = central_diff(|v| logpdf_raw(v, 1.5, 0.0, 2.0), 2.0, h);
        let fd_sigma = central_diff(|v| logpdf_raw(2.0, v, 0.0, 2.0), 1.5, h);
        let fd_xi = central_diff(|v| logpdf_raw(2.0, 1.5, v, 2.0), 1e-4, 5e-5);
        assert_relative_eq!(g[0], fd_mu, max_relative = 1e-5);
        assert_relative_eq!(g[1], fd_sigma, max_relative = 1e-5);
        // ξ-component compared against the two-sided difference straddling 0.
        assert!((g[2] - fd_xi).abs() < 1e-3, "{} vs {}", g[2], fd_xi);
    }

    #[test]
    fn grad_rejects_out_of_support() {
        let p = GevParams::new(0.0, 1.0, 1.0).unwrap();
        let err = loglik_grad(&p, &[0.5, -1.5]).unwrap_err();
        match err {
            Error::SupportViolation { index, .. } => assert_eq!(index, 1),
            other => panic!("unexpected error {other:?}"),
        }
    }
}
