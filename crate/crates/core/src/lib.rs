//! Estimation of extreme treatment effects from observational data.
//!
//! The library quantifies how an intervention changes the *tail* of an
//! outcome distribution, not its mean: outcomes are modeled with the
//! generalized extreme value (GEV) family, and the treatment effect is the
//! difference of tail indices (shape parameters) between the treated and
//! control potential outcomes — marginally (ETE) and conditionally on
//! covariates (CETE).
//!
//! Pieces:
//! - [`gev`]: GEV density/CDF/quantiles/sampling and maximum-likelihood
//!   fitting with analytic gradients; [`named`] has the classical
//!   Gumbel/Fréchet/Weibull forms.
//! - [`sampler`]: the spatial block-maxima surrogate (k-means clusters over
//!   covariates, per-cluster argmax outcome) plus temporal block maxima.
//! - [`model`] / [`nn`] / [`wasserstein`]: conditional shape regression —
//!   s-learner, t-learner, and balanced-representation learners trained by
//!   conditional GEV likelihood.
//! - [`estimators`]: proposed and naive ETE/CETE estimators, the
//!   unconfounded oracle, and error metrics.
//! - [`datagen`]: synthetic and semi-synthetic generators with ground-truth
//!   handles, and CSV ingestion.
//!
//! All numeric code is generic over [`scalar::Scalar`] (`f32` or `f64`);
//! the harness-facing aliases below pin `f64`.

pub mod data;
pub mod io;
pub mod model;
pub mod nn;
pub mod wasserstein;
pub mod error;
pub mod gev;
pub mod named;
pub mod sampler;
pub mod scalar;
pub mod util;

pub use error::{Error, Result};

/// Scalar type used by the experiment harness, the CLI, and all file formats.
pub type Real = f64;

/// GEV parameters over [`Real`].
pub type Gev = gev::GevParams<Real>;
/// Fit outcome over [`Real`].
pub type GevFit = gev::FitResult<Real>;
/// Observation record over [`Real`].
pub type Record = data::CausalRecord<Real>;
/// Dataset over [`Real`].
pub type Dataset = data::CausalDataset<Real>;
/// Max-sampler output over [`Real`].
pub type MaxSample = sampler::MaxSampleResult<Real>;
