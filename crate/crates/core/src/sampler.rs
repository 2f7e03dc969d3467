//! Spatial surrogate for block maxima: k-means over covariates and
//! per-cluster maximum extraction, plus classic temporal block maxima.
//!
//! Individuals with similar covariates stand in for repeated draws of one
//! individual; the per-cluster argmax-y record approximates an m-block
//! maximum at that covariate location.

use rand::Rng;

use crate::data::{CausalDataset, CausalRecord, Treatment};
use crate::error::{Error, Result};
use crate::scalar::{c, to_f64, Scalar};
use crate::util::{derive_seed, rng_from};

/// Cluster assignment and centroids from [`kmeans`].
#[derive(Debug, Clone)]
pub struct KmeansResult<T> {
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<T>>,
}

/// Reduced dataset of per-cluster maxima plus cluster diagnostics.
#[derive(Debug, Clone)]
pub struct MaxSampleResult<T> {
    /// One record per cluster: the member with maximal y (ties broken by
    /// lowest original index), carrying its original (x, t).
    pub records: Vec<CausalRecord<T>>,
    /// K = n div m.
    pub cluster_count: usize,
    /// Requested block size m.
    pub block_size: usize,
    /// Max over all input records of the distance to their cluster's
    /// raw-covariate mean; the ε surrogate, in covariate units.
    pub max_intra_radius: T,
    /// Input record index -> cluster id.
    pub assignments: Vec<usize>,
}

fn sq_dist<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut s = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        let d = x - y;
        s = s + d * d;
    }
    s
}

/// Lloyd's algorithm with k-means++-style seeding.
///
/// Deterministic given the seed: point-to-centroid ties break on the lowest
/// centroid index, and empty clusters are repaired by stealing the farthest
/// point from the largest cluster.
pub fn kmeans<T: Scalar>(
    points: &[Vec<T>],
    k: usize,
    max_iter: usize,
    seed: u64,
) -> Result<KmeansResult<T>> {
    let n = points.len();
    if k == 0 || k > n {
        return Err(Error::invalid(format!("k must be in 1..={n}, got {k}")));
    }
    if max_iter == 0 {
        return Err(Error::invalid("max_iter must be >= 1"));
    }

    let mut rng = rng_from(seed);
    let mut centroids = plus_plus_init(points, k, &mut rng);
    let mut assignments = vec![0usize; n];

    for _ in 0..max_iter {
        let mut changed = 0usize;
        for (i, p) in points.iter().enumerate() {
            let mut best = 0usize;
            let mut best_d = sq_dist(p, &centroids[0]);
            for (j, cen) in centroids.iter().enumerate().skip(1) {
                let d = sq_dist(p, cen);
                if d < best_d {
                    best_d = d;
                    best = j;
                }
            }
            if assignments[i] != best {
                assignments[i] = best;
                changed += 1;
            }
        }
        repair_empty_clusters(points, k, &mut assignments);
        let dim = points[0].len();
        let mut sums = vec![vec![T::zero(); dim]; k];
        let mut counts = vec![0usize; k];
        for (i, p) in points.iter().enumerate() {
            let a = assignments[i];
            counts[a] += 1;
            for (s, &v) in sums[a].iter_mut().zip(p) {
                *s = *s + v;
            }
        }
        for (j, sum) in sums.iter_mut().enumerate() {
            let cnt = T::from(counts[j]).unwrap();
            for s in sum.iter_mut() {
                *s = *s / cnt;
            }
        }
        centroids = sums;
        // Stable, or near-stable on large inputs; either stop is deterministic.
        if changed * 1000 < n {
            break;
        }
    }

    Ok(KmeansResult {
        assignments,
        centroids,
    })
}

fn plus_plus_init<T: Scalar, R: Rng>(points: &[Vec<T>], k: usize, rng: &mut R) -> Vec<Vec<T>> {
    let n = points.len();
    let first = rng.random_range(0..n);
    let mut centroids = vec![points[first].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| to_f64(sq_dist(p, &points[first]))).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total <= 0.0 {
            // All remaining points coincide with a centroid; take the first
            // index not yet chosen to keep determinism.
            (0..n).find(|&i| d2[i] > 0.0).unwrap_or(centroids.len() % n)
        } else {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                target -= w;
                if target <= 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        };
        centroids.push(points[next].clone());
        for (i, p) in points.iter().enumerate() {
            let d = to_f64(sq_dist(p, &points[next]));
            if d < d2[i] {
                d2[i] = d;
            }
        }
    }
    centroids
}

fn repair_empty_clusters<T: Scalar>(points: &[Vec<T>], k: usize, assignments: &mut [usize]) {
    loop {
        let mut counts = vec![0usize; k];
        for &a in assignments.iter() {
            counts[a] += 1;
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return;
        };
        let largest = counts
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
            .map(|(j, _)| j)
            .expect("k >= 1");
        // Farthest member of the largest cluster from that cluster's mean.
        let dim = points[0].len();
        let mut mean = vec![T::zero(); dim];
        let members: Vec<usize> = (0..points.len()).filter(|&i| assignments[i] == largest).collect();
        for &i in &members {
            for (m, &v) in mean.iter_mut().zip(&points[i]) {
                *m = *m + v;
            }
        }
        let cnt = T::from(members.len()).unwrap();
        for m in &mut mean {
            *m = *m / cnt;
        }
        let steal = members
            .iter()
            .copied()
            .max_by(|&a, &b| {
                sq_dist(&points[a], &mean)
                    .partial_cmp(&sq_dist(&points[b], &mean))
                    .unwrap()
                    .then(b.cmp(&a))
            })
            .expect("largest cluster nonempty");
        assignments[steal] = empty;
    }
}

/// Cluster the covariates into K = n div m groups and keep each cluster's
/// maximal-outcome record.
///
/// Clustering runs on per-dimension z-scored covariates; both treatment
/// groups are clustered jointly. `stratify_by_treatment` clusters each arm
/// separately instead (off by default in callers).
pub fn eps_max_sample<T: Scalar>(
    data: &CausalDataset<T>,
    m: usize,
    seed: u64,
    stratify_by_treatment: bool,
) -> Result<MaxSampleResult<T>> {
    let n = data.len();
    if m == 0 || m > n {
        return Err(Error::invalid(format!("block size m must be in 1..={n}, got {m}")));
    }
    if !stratify_by_treatment {
        return max_sample_indices(data, (0..n).collect(), m, seed);
    }

    let mut merged: Option<MaxSampleResult<T>> = None;
    for (arm_no, arm) in [Treatment::Control, Treatment::Treated].into_iter().enumerate() {
        let idx: Vec<usize> = (0..n).filter(|&i| data.records()[i].t == arm).collect();
        if idx.is_empty() {
            continue;
        }
        let m_arm = m.min(idx.len());
        let part = max_sample_indices(data, idx, m_arm, derive_seed(seed, arm_no as u64))?;
        merged = Some(match merged {
            None => part,
            Some(mut acc) => {
                let offset = acc.cluster_count;
                acc.records.extend(part.records);
                acc.cluster_count += part.cluster_count;
                acc.max_intra_radius = acc.max_intra_radius.max(part.max_intra_radius);
                // Assignments stay aligned to the original record order.
                for (i, r) in data.records().iter().enumerate() {
                    if r.t == Treatment::Treated && arm == Treatment::Treated {
                        acc.assignments[i] = part.assignments[i] + offset;
                    }
                }
                acc
            }
        });
    }
    merged.ok_or_else(|| Error::invalid("empty dataset"))
}

fn max_sample_indices<T: Scalar>(
    data: &CausalDataset<T>,
    index: Vec<usize>,
    m: usize,
    seed: u64,
) -> Result<MaxSampleResult<T>> {
    let n = index.len();
    let k = n / m;
    let (mean, sd) = data.covariate_moments();
    let standardized: Vec<Vec<T>> = index
        .iter()
        .map(|&i| {
            data.records()[i]
                .x
                .iter()
                .zip(mean.iter().zip(&sd))
                .map(|(&v, (&mu, &s))| (v - mu) / s)
                .collect()
        })
        .collect();
    let km = kmeans(&standardized, k, 100, seed)?;

    // Per-cluster argmax y; ties break on lowest original index.
    let mut winner: Vec<Option<usize>> = vec![None; k];
    for (local, &orig) in index.iter().enumerate() {
        let cl = km.assignments[local];
        let y = data.records()[orig].y;
        match winner[cl] {
            None => winner[cl] = Some(orig),
            Some(cur) => {
                if y > data.records()[cur].y {
                    winner[cl] = Some(orig);
                }
            }
        }
    }
    let records: Vec<CausalRecord<T>> = winner
        .iter()
        .map(|w| data.records()[w.expect("no empty clusters after repair")].clone())
        .collect();

    // Radius in raw covariate units against the raw-space cluster means
    // (standardization is affine, so the raw mean is the unscaled centroid).
    let dim = data.dim();
    let mut raw_mean = vec![vec![T::zero(); dim]; k];
    let mut counts = vec![0usize; k];
    for (local, &orig) in index.iter().enumerate() {
        let cl = km.assignments[local];
        counts[cl] += 1;
        for (s, &v) in raw_mean[cl].iter_mut().zip(&data.records()[orig].x) {
            *s = *s + v;
        }
    }
    for (j, mean_j) in raw_mean.iter_mut().enumerate() {
        let cnt = T::from(counts[j]).unwrap();
        for s in mean_j.iter_mut() {
            *s = *s / cnt;
        }
    }
    let mut max_r2 = T::zero();
    let mut assignments = vec![usize::MAX; data.len()];
    for (local, &orig) in index.iter().enumerate() {
        let cl = km.assignments[local];
        assignments[orig] = cl;
        max_r2 = max_r2.max(sq_dist(&data.records()[orig].x, &raw_mean[cl]));
    }

    Ok(MaxSampleResult {
        records,
        cluster_count: k,
        block_size: m,
        max_intra_radius: max_r2.sqrt(),
        assignments,
    })
}

/// Maxima of consecutive disjoint blocks; the remainder is dropped.
pub fn block_maxima<T: Scalar>(values: &[T], block: usize) -> Result<Vec<T>> {
    if block == 0 || block > values.len() {
        return Err(Error::invalid(format!(
            "block must be in 1..={}, got {block}",
            values.len()
        )));
    }
    Ok(values
        .chunks_exact(block)
        .map(|chunk| chunk.iter().copied().fold(T::neg_infinity(), T::max))
        .collect())
}

/// Exact CDF of the maximum of m i.i.d. draws from a reference CDF.
pub fn max_law_cdf<T: Scalar>(cdf_one: impl Fn(T) -> T, m: usize) -> impl Fn(T) -> T {
    move |y| cdf_one(y).powf(c(m as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{CausalDataset, CausalRecord, Treatment};
    use crate::gev::{fit_mle, FitOptions, GevParams};
    use crate::util::rng_from;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn dataset_1d(xs: &[f64], ys: &[f64]) -> CausalDataset<f64> {
        let recs = xs
            .iter()
            .zip(ys)
            .map(|(&x, &y)| CausalRecord {
                x: vec![x],
                t: Treatment::Control,
                y,
            })
            .collect();
        CausalDataset::new(recs).unwrap()
    }

    #[test]
    fn kmeans_single_cluster_is_mean() {
        let pts = vec![vec![1.0, 0.0], vec![3.0, 2.0], vec![5.0, 4.0]];
        let r = kmeans(&pts, 1, 50, 0).unwrap();
        assert_eq!(r.centroids[0], vec![3.0, 2.0]);
    }

    #[test]
    fn kmeans_k_equals_n_zero_sse() {
        let pts = vec![vec![0.0], vec![1.0], vec![2.0], vec![5.0]];
        let r = kmeans(&pts, 4, 50, 1).unwrap();
        let mut seen = r.assignments.clone();
        seen.sort_unstable();
        assert_eq!(seen, vec![0, 1, 2, 3]);
        for (i, p) in pts.iter().enumerate() {
            assert_eq!(&r.centroids[r.assignments[i]], p);
        }
    }

    #[test]
    fn kmeans_recovers_two_blobs() {
        // Brute-force oracle: with two well-separated 1-D blobs the only
        // SSE-optimal labelling splits them exactly.
        let mut rng = rng_from(3);
        let mut pts = Vec::new();
        for _ in 0..40 {
            let e: f64 = StandardNormal.sample(&mut rng);
            pts.push(vec![0.0 + 0.1 * e]);
        }
        for _ in 0..40 {
            let e: f64 = StandardNormal.sample(&mut rng);
            pts.push(vec![10.0 + 0.1 * e]);
        }
        let r = kmeans(&pts, 2, 100, 7).unwrap();
        let mut cents: Vec<f64> = r.centroids.iter().map(|c| c[0]).collect();
        cents.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((cents[0] - 0.0).abs() < 0.2, "centroid {}", cents[0]);
        assert!((cents[1] - 10.0).abs() < 0.2, "centroid {}", cents[1]);
        for (i, p) in pts.iter().enumerate() {
            let lab = r.assignments[i];
            let near_zero = p[0] < 5.0;
            let zero_lab = if cents[0] == r.centroids[0][0] { 0 } else { 1 };
            assert_eq!(lab == zero_lab, near_zero);
        }
    }

    #[test]
    fn kmeans_rejects_bad_k() {
        let pts = vec![vec![0.0], vec![1.0]];
        assert!(kmeans(&pts, 0, 10, 0).is_err());
        assert!(kmeans(&pts, 3, 10, 0).is_err());
    }

    #[test]
    fn max_sample_m1_is_permutation() {
        let xs: Vec<f64> = (0..25).map(|i| i as f64).collect();
        let ys: Vec<f64> = (0..25).map(|i| (i * 7 % 13) as f64).collect();
        let d = dataset_1d(&xs, &ys);
        let r = eps_max_sample(&d, 1, 9, false).unwrap();
        assert_eq!(r.records.len(), 25);
        let mut got: Vec<f64> = r.records.iter().map(|rec| rec.y).collect();
        let mut want = ys.clone();
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        want.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(got, want);
        assert_eq!(r.max_intra_radius, 0.0);
    }

    #[test]
    fn max_sample_m_equals_n_is_global_argmax() {
        let xs: Vec<f64> = (0..30).map(|i| (i as f64).sin()).collect();
        let ys: Vec<f64> = (0..30).map(|i| ((i * 11 % 29) as f64) - 5.0).collect();
        let d = dataset_1d(&xs, &ys);
        let r = eps_max_sample(&d, 30, 4, false).unwrap();
        assert_eq!(r.records.len(), 1);
        let best = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(r.records[0].y, best);
    }

    #[test]
    fn max_sample_recovers_per_blob_argmax() {
        // Three well-separated covariate blobs; oracle is brute-force argmax
        // per true blob.
        let mut rng = rng_from(12);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for center in [0.0, 50.0, 100.0] {
            for _ in 0..20 {
                let e: f64 = StandardNormal.sample(&mut rng);
                xs.push(center + 0.3 * e);
                ys.push(center + rng.random::<f64>());
            }
        }
        let d = dataset_1d(&xs, &ys);
        let r = eps_max_sample(&d, 20, 5, false).unwrap();
        assert_eq!(r.records.len(), 3);
        let mut want: Vec<f64> = (0..3)
            .map(|b| {
                ys[b * 20..(b + 1) * 20]
                    .iter()
                    .cloned()
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        let mut got: Vec<f64> = r.records.iter().map(|rec| rec.y).collect();
        want.sort_by(|a, b| a.partial_cmp(b).unwrap());
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(got, want);
    }

    #[test]
    fn max_sample_cardinality_and_determinism() {
        let mut rng = rng_from(77);
        let xs: Vec<f64> = (0..103).map(|_| rng.random::<f64>()).collect();
        let ys: Vec<f64> = (0..103).map(|_| rng.random::<f64>()).collect();
        let d = dataset_1d(&xs, &ys);
        for m in [1usize, 2, 5, 7, 50, 103] {
            let r = eps_max_sample(&d, m, 21, false).unwrap();
            assert_eq!(r.records.len(), 103 / m, "m = {m}");
            assert_eq!(r.cluster_count, 103 / m);
        }
        let a = eps_max_sample(&d, 5, 21, false).unwrap();
        let b = eps_max_sample(&d, 5, 21, false).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.assignments, b.assignments);
        assert!(eps_max_sample(&d, 104, 0, false).is_err());
    }

    #[test]
    fn lipschitz_bound_on_noiseless_linear_outcome() {
        // y = f(x) = 3x, so for each emitted record the gap to the best
        // outcome in its cluster is at most L * (2 * max_intra_radius).
        let n = 400;
        let xs: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x).collect();
        let d = dataset_1d(&xs, &ys);
        let r = eps_max_sample(&d, 10, 3, false).unwrap();
        let bound = 3.0 * 2.0 * r.max_intra_radius;
        for (cl, rec) in r.records.iter().enumerate() {
            let best_in_cluster = (0..n)
                .filter(|&i| r.assignments[i] == cl)
                .map(|i| ys[i])
                .fold(f64::NEG_INFINITY, f64::max);
            assert!(
                (rec.y - best_in_cluster).abs() <= bound + 1e-12,
                "cluster {cl}: {} vs {best_in_cluster}, bound {bound}",
                rec.y
            );
        }
    }

    #[test]
    fn block_maxima_basics() {
        assert_eq!(block_maxima(&[1.0, 2.0, 3.0, 4.0], 2).unwrap(), vec![2.0, 4.0]);
        let v = vec![5.0, 1.0, 9.0];
        assert_eq!(block_maxima(&v, 1).unwrap(), v);
        assert_eq!(block_maxima(&[1.0, 2.0, 3.0, 4.0, 5.0], 2).unwrap(), vec![2.0, 4.0]);
        assert!(block_maxima(&[1.0], 2).is_err());
        assert!(block_maxima::<f64>(&[1.0], 0).is_err());
    }

    #[test]
    fn gaussian_block_maxima_look_gumbel() {
        // 1e4 standard Gaussians in blocks of 100: the fitted shape of the
        // 100 maxima sits near the Gumbel domain (fixed seed; the estimate
        // has sd ~ 0.08 at this sample size).
        let mut rng = rng_from(6);
        let gauss: Vec<f64> = (0..10_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let maxima = block_maxima(&gauss, 100).unwrap();
        let fit = fit_mle(&maxima, FitOptions::default()).unwrap();
        assert!(fit.params.xi.abs() < 0.15, "xi = {}", fit.params.xi);
    }

    #[test]
    fn max_sampler_converges_to_m_block_law() {
        // y(x) ~ GEV(x, 1, 0.3) over x ~ U(0,1): as n grows at fixed m, the
        // emitted outcomes near x0 = 0.5 (window shrinking as n^{-1/3})
        // approach the law of the max of m i.i.d. draws at x0. KS distance
        // decreases across n, averaged over 3 seeds.
        let m = 25usize;
        let x0 = 0.5;
        let law = GevParams::new(x0, 1.0, 0.3).unwrap();
        let max_cdf = max_law_cdf(move |y| law.cdf(y).unwrap(), m);
        let mut mean_ks = Vec::new();
        for n in [1_000usize, 10_000, 100_000] {
            let window = 0.4 * (1_000.0f64 / n as f64).powf(1.0 / 3.0);
            let mut ks_vals = Vec::new();
            for seed in 0..3u64 {
                let mut rng = rng_from(derive_seed(1000 + seed, n as u64));
                let xs: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
                let ys: Vec<f64> = xs
                    .iter()
                    .map(|&x| GevParams::new(x, 1.0, 0.3).unwrap().draw_with(&mut rng))
                    .collect();
                let d = dataset_1d(&xs, &ys);
                let r = eps_max_sample(&d, m, seed, false).unwrap();
                let emitted: Vec<f64> = r
                    .records
                    .iter()
                    .filter(|rec| (rec.x[0] - x0).abs() < window / 2.0)
                    .map(|rec| rec.y)
                    .collect();
                assert!(emitted.len() > 8, "window too empty at n = {n}");
                ks_vals.push(crate::util::ks_statistic(&emitted, &max_cdf));
            }
            mean_ks.push(ks_vals.iter().sum::<f64>() / ks_vals.len() as f64);
        }
        assert!(
            mean_ks[0] > mean_ks[1] && mean_ks[1] > mean_ks[2],
            "KS not decreasing: {mean_ks:?}"
        );
    }
}
