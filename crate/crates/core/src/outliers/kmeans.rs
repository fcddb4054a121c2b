use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Cluster labels (−1 reserved for noise), optional centers, and count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub labels: Vec<i32>,
    pub centers: Vec<Vec<f64>>,
    pub k: usize,
    /// Within-cluster sum of squares after each assignment step.
    pub sse_trace: Vec<f64>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(p: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, center) in centers.iter().enumerate() {
        let d = sq_dist(p, center);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Lloyd's algorithm from k-means++ seeds. Stops at an assignment fixpoint
/// or after `max_iter` update rounds. Empty clusters keep their center.
pub fn kmeans<P: AsRef<[f64]>>(points: &[P], k: usize, seed: u64, max_iter: usize) -> Result<ClusterAssignment> {
    let n = points.len();
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if k > n {
        return Err(Error::invalid(format!("k = {k} exceeds the number of points ({n})")));
    }
    let pts: Vec<&[f64]> = points.iter().map(AsRef::as_ref).collect();
    let dim = pts[0].len();
    let mut rng = rng::rng(seed);

    // k-means++ seeding
    let mut centers: Vec<Vec<f64>> = vec![pts[rng.random_range(0..n)].to_vec()];
    let mut d2: Vec<f64> = pts.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, d) in d2.iter().enumerate() {
                if target < *d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centers.push(pts[next].to_vec());
        for (i, p) in pts.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, centers.last().unwrap()));
        }
    }

    let mut labels = vec![usize::MAX; n];
    let mut sse_trace = Vec::new();
    for _ in 0..max_iter.max(1) {
        let mut changed = false;
        let mut sse = 0.0;
        for (i, p) in pts.iter().enumerate() {
            let (c, d) = nearest(p, &centers);
            sse += d;
            if labels[i] != c {
                labels[i] = c;
                changed = true;
            }
        }
        sse_trace.push(sse);
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (i, p) in pts.iter().enumerate() {
            counts[labels[i]] += 1;
            for (s, v) in sums[labels[i]].iter_mut().zip(p.iter()) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
    }
    Ok(ClusterAssignment {
        labels: labels.into_iter().map(|l| l as i32).collect(),
        centers,
        k,
        sse_trace,
    })
}

/// Default territorial cluster count, `max(2, round(n / 500))`, capped at n.
pub fn default_k(n: usize) -> usize {
    ((n as f64 / 500.0).round() as usize).max(2).min(n.max(1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn single_cluster_is_centroid() {
        let pts = vec![[0.0, 0.0], [2.0, 0.0], [1.0, 3.0]];
        let a = kmeans(&pts, 1, 3, 50).unwrap();
        assert!(a.labels.iter().all(|&l| l == 0));
        assert!((a.centers[0][0] - 1.0).abs() < 1e-12);
        assert!((a.centers[0][1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn planted_partition_recovered() {
        let mut r = rng::rng(11);
        let mut pts = Vec::new();
        let mut truth = Vec::new();
        for (g, cx) in [(0, 0.0), (1, 100.0)] {
            for _ in 0..200 {
                let dx: f64 = StandardNormal.sample(&mut r);
                let dy: f64 = StandardNormal.sample(&mut r);
                pts.push([cx + dx, dy]);
                truth.push(g);
            }
        }
        let a = kmeans(&pts, 2, 5, 100).unwrap();
        let flip = a.labels[0] != 0;
        for (l, t) in a.labels.iter().zip(&truth) {
            let l = if flip { 1 - l } else { *l };
            assert_eq!(l, *t);
        }
        assert_eq!(a, kmeans(&pts, 2, 5, 100).unwrap());
    }

    #[test]
    fn sse_non_increasing() {
        let mut r = rng::rng(2);
        let pts: Vec<[f64; 2]> = (0..500)
            .map(|_| [r.random::<f64>() * 10.0, r.random::<f64>() * 10.0])
            .collect();
        let a = kmeans(&pts, 7, 9, 100).unwrap();
        for w in a.sse_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-9 * w[0]);
        }
    }

    #[test]
    fn k_larger_than_n_fails() {
        assert!(kmeans(&[[0.0, 0.0]], 2, 0, 10).is_err());
    }
}
