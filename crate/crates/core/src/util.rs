//! Small shared numerics: seeding, order statistics, KS distance, OLS slope.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::scalar::{c, Scalar};

/// Mix a base seed with a stream index (splitmix64 finalizer).
///
/// Used wherever per-record or per-replication RNGs are derived from one
/// experiment seed, so parallel generation stays deterministic.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Uniform draw in the open interval (0, 1).
pub fn open01<T: Scalar, R: Rng>(rng: &mut R) -> T {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 && u < 1.0 {
            return c(u);
        }
    }
}

pub fn rng_from(seed: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}

/// Sort a copy ascending (totally ordered; NaN would panic upstream).
pub fn sorted<T: Scalar>(values: &[T]) -> Vec<T> {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("non-NaN"));
    v
}

/// Empirical quantile (linear interpolation) of a sorted slice.
pub fn quantile_sorted<T: Scalar>(sorted: &[T], q: f64) -> T {
    assert!(!sorted.is_empty());
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let w = c::<T>(pos - lo as f64);
    sorted[lo] + w * (sorted[hi] - sorted[lo])
}

/// One-sample Kolmogorov-Smirnov statistic against a reference CDF.
pub fn ks_statistic<T: Scalar>(samples: &[T], cdf: impl Fn(T) -> T) -> T {
    let xs = sorted(samples);
    let n = xs.len() as f64;
    let mut d = T::zero();
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        let lo = c::<T>(i as f64 / n);
        let hi = c::<T>((i + 1) as f64 / n);
        d = d.max((f - lo).abs()).max((hi - f).abs());
    }
    d
}

/// Slope of the ordinary least squares line through (x, y) pairs.
pub fn ols_slope<T: Scalar>(xs: &[T], ys: &[T]) -> T {
    assert_eq!(xs.len(), ys.len());
    let n = c::<T>(xs.len() as f64);
    let mx = xs.iter().fold(T::zero(), |a, &b| a + b) / n;
    let my = ys.iter().fold(T::zero(), |a, &b| a + b) / n;
    let mut sxy = T::zero();
    let mut sxx = T::zero();
    for (&x, &y) in xs.iter().zip(ys) {
        sxy = sxy + (x - mx) * (y - my);
        sxx = sxx + (x - mx) * (x - mx);
    }
    sxy / sxx
}

/// Mean and (population) standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let m = values.iter().sum::<f64>() / n;
    let v = values.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    (m, v.sqrt())
}

/// Median of a slice (copied, sorted).
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("non-NaN"));
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
