//! Named extreme-value families (Gumbel, Fréchet, Weibull) with their
//! closed-form log densities, and the parameter correspondences tying them
//! back to the three-parameter GEV.

use crate::error::{Error, Result};
use crate::gev::GevParams;
use crate::scalar::Scalar;

/// One of the three classical extreme-value families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NamedFamily<T> {
    /// Gumbel(μ, β): density (1/β)·exp(-(z + e^{-z})), z = (y-μ)/β.
    Gumbel { mu: T, beta: T },
    /// Fréchet(α, s, m): support y > m.
    Frechet { alpha: T, scale: T, min: T },
    /// Weibull(λ, k): support y >= 0.
    Weibull { lambda: T, k: T },
}

impl<T: Scalar> NamedFamily<T> {
    pub fn gumbel(mu: T, beta: T) -> Result<Self> {
        if !(beta > T::zero()) || !beta.is_finite() || !mu.is_finite() {
            return Err(Error::invalid(format!("Gumbel needs finite mu, beta > 0; got ({mu}, {beta})")));
        }
        Ok(NamedFamily::Gumbel { mu, beta })
    }

    pub fn frechet(alpha: T, scale: T, min: T) -> Result<Self> {
        if !(alpha > T::zero() && scale > T::zero()) || !min.is_finite() {
            return Err(Error::invalid(format!(
                "Fréchet needs alpha, scale > 0 and finite min; got ({alpha}, {scale}, {min})"
            )));
        }
        Ok(NamedFamily::Frechet { alpha, scale, min })
    }

    pub fn weibull(lambda: T, k: T) -> Result<Self> {
        if !(lambda > T::zero() && k > T::zero()) {
            return Err(Error::invalid(format!("Weibull needs lambda, k > 0; got ({lambda}, {k})")));
        }
        Ok(NamedFamily::Weibull { lambda, k })
    }

    /// Log density; -inf outside the family's support.
    pub fn logpdf(&self, y: T) -> Result<T> {
        if !y.is_finite() {
            return Err(Error::invalid(format!("non-finite sample {y}")));
        }
        Ok(match *self {
            NamedFamily::Gumbel { mu, beta } => {
                let z = (y - mu) / beta;
                -beta.ln() - z - (-z).exp()
            }
            NamedFamily::Frechet { alpha, scale, min } => {
                if y <= min {
                    return Ok(T::neg_infinity());
                }
                let z = (y - min) / scale;
                alpha.ln() - scale.ln() - (T::one() + alpha) * z.ln() - z.powf(-alpha)
            }
            NamedFamily::Weibull { lambda, k } => {
                if y < T::zero() {
                    return Ok(T::neg_infinity());
                }
                let z = y / lambda;
                k.ln() - lambda.ln() + (k - T::one()) * z.ln() - z.powf(k)
            }
        })
    }

    /// The GEV with the same law, where a direct correspondence exists:
    /// Gumbel(μ, β) = GEV(μ, β, 0) and Fréchet(α, s, m) = GEV(m+s, s/α, 1/α).
    /// The Weibull family describes a variable bounded below, so its GEV
    /// counterpart applies to -Y (see tests); here it maps to None.
    pub fn as_gev(&self) -> Option<GevParams<T>> {
        match *self {
            NamedFamily::Gumbel { mu, beta } => Some(GevParams {
                mu,
                sigma: beta,
                xi: T::zero(),
            }),
            NamedFamily::Frechet { alpha, scale, min } => Some(GevParams {
                mu: min + scale,
                sigma: scale / alpha,
                xi: alpha.recip(),
            }),
            NamedFamily::Weibull { .. } => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gumbel_at_mode() {
        let f = NamedFamily::gumbel(0.0, 1.0).unwrap();
        assert_relative_eq!(f.logpdf(0.0).unwrap(), -1.0, max_relative = 1e-12);
    }

    #[test]
    fn weibull_exponential_special_case() {
        // Weibull(1, 1) is Exp(1): log f(2) = -2.
        let f = NamedFamily::weibull(1.0, 1.0).unwrap();
        assert_relative_eq!(f.logpdf(2.0).unwrap(), -2.0, max_relative = 1e-12);
        assert_eq!(f.logpdf(-0.5).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn frechet_known_value_and_normalization() {
        let f = NamedFamily::frechet(2.0, 1.0, 0.0).unwrap();
        // f(1) = 2·e^{-1}.
        assert_relative_eq!(
            f.logpdf(1.0).unwrap(),
            (2.0f64).ln() - 1.0,
            max_relative = 1e-12
        );
        // Quadrature oracle: composite Simpson over (0, large] integrates to 1.
        let mut total = 0.0;
        let segments = [(1e-4, 1.0), (1.0, 10.0), (10.0, 1e3), (1e3, 1e6)];
        for (a, b) in segments {
            total += simpson(|y| f.logpdf(y).unwrap().exp(), a, b, 40_000);
        }
        assert!((total - 1.0).abs() < 1e-6, "integral = {total}");
    }

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let n = n + n % 2;
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(NamedFamily::gumbel(0.0, 0.0).is_err());
        assert!(NamedFamily::frechet(-1.0, 1.0, 0.0).is_err());
        assert!(NamedFamily::weibull(1.0, -2.0).is_err());
    }

    #[test]
    fn gumbel_matches_gev_branch() {
        let f = NamedFamily::gumbel(1.5, 0.7).unwrap();
        let g = f.as_gev().unwrap();
        for y in [-2.0, 0.0, 1.5, 4.0, 9.0] {
            assert_relative_eq!(
                f.logpdf(y).unwrap(),
                g.logpdf(y).unwrap(),
                max_relative = 1e-10
            );
        }
    }

    #[test]
    fn frechet_matches_gev_correspondence() {
        let f = NamedFamily::frechet(2.5, 1.3, 0.4).unwrap();
        let g = f.as_gev().unwrap();
        for y in [0.6, 1.0, 2.0, 5.0, 20.0] {
            assert_relative_eq!(
                f.logpdf(y).unwrap(),
                g.logpdf(y).unwrap(),
                max_relative = 1e-9
            );
        }
    }

    #[test]
    fn weibull_matches_gev_of_negated_variable() {
        // If Y ~ Weibull(λ, k) then -Y ~ GEV(-λ, λ/k, -1/k).
        let (lambda, k) = (1.7, 2.3);
        let f = NamedFamily::weibull(lambda, k).unwrap();
        let g = GevParams::new(-lambda, lambda / k, -1.0 / k).unwrap();
        for y in [0.1, 0.5, 1.0, 2.0, 3.5] {
            assert_relative_eq!(
                f.logpdf(y).unwrap(),
                g.logpdf(-y).unwrap(),
                max_relative = 1e-9
            );
        }
    }
}
