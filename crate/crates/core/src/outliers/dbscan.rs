use crate::error::{Error, Result};

pub const NOISE: i32 = -1;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// DBSCAN with Euclidean distance. A point is core when at least `min_pts`
/// points (itself included) lie within `eps`. Clusters are the connected
/// components of core points; a border point joins the cluster of its
/// nearest core neighbor, which makes labels independent of row order up to
/// renaming. Clusters are numbered by their lowest-indexed core point.
pub fn dbscan<P: AsRef<[f64]>>(points: &[P], eps: f64, min_pts: usize) -> Result<Vec<i32>> {
    if !(eps > 0.0) {
        return Err(Error::invalid("eps must be positive"));
    }
    if min_pts == 0 {
        return Err(Error::invalid("min_pts must be at least 1"));
    }
    let pts: Vec<&[f64]> = points.iter().map(AsRef::as_ref).collect();
    let n = pts.len();
    let eps2 = eps * eps;
    let neighbors: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| sq_dist(pts[i], pts[j]) <= eps2).collect())
        .collect();
    let core: Vec<bool> = neighbors.iter().map(|nb| nb.len() >= min_pts).collect();

    let mut labels = vec![NOISE; n];
    let mut next = 0;
    for start in 0..n {
        if !core[start] || labels[start] != NOISE {
            continue;
        }
        labels[start] = next;
        let mut stack = vec![start];
        while let Some(p) = stack.pop() {
            for &q in &neighbors[p] {
                if core[q] && labels[q] == NOISE {
                    labels[q] = next;
                    stack.push(q);
                }
            }
        }
        next += 1;
    }
    for i in 0..n {
        if core[i] {
            continue;
        }
        let mut best: Option<(f64, usize)> = None;
        for &q in &neighbors[i] {
            if !core[q] {
                continue;
            }
            let d = sq_dist(pts[i], pts[q]);
            let better = match best {
                None => true,
                Some((bd, bq)) => d < bd || (d == bd && lex_less(pts[q], pts[bq])),
            };
            if better {
                best = Some((d, q));
            }
        }
        if let Some((_, q)) = best {
            labels[i] = labels[q];
        }
    }
    Ok(labels)
}

fn lex_less(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Less => return true,
            std::cmp::Ordering::Greater => return false,
            _ => {}
        }
    }
    false
}

/// Which core points each point has as eps-neighbors; used by tests.
#[cfg(test)]
pub(crate) fn core_mask<P: AsRef<[f64]>>(points: &[P], eps: f64, min_pts: usize) -> Vec<bool> {
    let pts: Vec<&[f64]> = points.iter().map(AsRef::as_ref).collect();
    pts.iter()
        .map(|p| pts.iter().filter(|q| sq_dist(p, q) <= eps * eps).count() >= min_pts)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;
    use rand::Rng as _;
    use std::collections::HashMap;

    #[test]
    fn blob_and_far_point() {
        let mut r = rng::rng(4);
        let eps = 0.5;
        let mut pts: Vec<[f64; 2]> = (0..20)
            .map(|_| [r.random::<f64>() * 0.3, r.random::<f64>() * 0.3])
            .collect();
        pts.push([100.0 * eps, 0.0]);
        let labels = dbscan(&pts, eps, 4).unwrap();
        assert!(labels[..20].iter().all(|&l| l == 0));
        assert_eq!(labels[20], NOISE);
    }

    #[test]
    fn huge_eps_single_cluster() {
        let pts = [[0.0, 0.0], [5.0, 1.0], [-3.0, 2.0]];
        assert_eq!(dbscan(&pts, 100.0, 1).unwrap(), vec![0, 0, 0]);
    }

    /// Maps labels to a canonical form: clusters renamed by first occurrence.
    fn canonical_partition(labels: &[i32], order: &[usize]) -> Vec<i32> {
        // labels[k] belongs to original point order[k]; return per original point.
        let mut per_point = vec![0; labels.len()];
        for (k, &orig) in order.iter().enumerate() {
            per_point[orig] = labels[k];
        }
        let mut map = HashMap::new();
        per_point
            .iter()
            .map(|&l| {
                if l == NOISE {
                    NOISE
                } else {
                    let next = map.len() as i32;
                    *map.entry(l).or_insert(next)
                }
            })
            .collect()
    }

    proptest! {
        #[test]
        fn permutation_invariant(
            pts in prop::collection::vec((0.0f64..10.0, 0.0f64..10.0), 5..60),
            seed in any::<u64>(),
        ) {
            let pts: Vec<[f64; 2]> = pts.into_iter().map(|(a, b)| [a, b]).collect();
            let base = dbscan(&pts, 1.2, 3).unwrap();
            let id: Vec<usize> = (0..pts.len()).collect();
            let mut order = id.clone();
            let mut r = rng::rng(seed);
            for i in (1..order.len()).rev() {
                order.swap(i, r.random_range(0..=i));
            }
            let shuffled: Vec<[f64; 2]> = order.iter().map(|&i| pts[i]).collect();
            let perm = dbscan(&shuffled, 1.2, 3).unwrap();
            prop_assert_eq!(canonical_partition(&base, &id), canonical_partition(&perm, &order));
        }

        #[test]
        fn duplicate_core_point_keeps_noise(
            pts in prop::collection::vec((0.0f64..10.0, 0.0f64..10.0), 5..60),
            pick in any::<prop::sample::Index>(),
        ) {
            let (eps, min_pts) = (1.2, 3);
            let pts: Vec<[f64; 2]> = pts.into_iter().map(|(a, b)| [a, b]).collect();
            let core = core_mask(&pts, eps, min_pts);
            let cores: Vec<usize> = (0..pts.len()).filter(|&i| core[i]).collect();
            prop_assume!(!cores.is_empty());
            let c = cores[pick.index(cores.len())];
            let mut dup = pts.clone();
            dup.push(pts[c]);
            // A duplicate can promote a non-core neighbor of `c` to core,
            // which legitimately shrinks the noise set; exclude that case.
            let core_after = core_mask(&dup, eps, min_pts);
            prop_assume!((0..pts.len()).all(|i| core[i] == core_after[i]));
            let before = dbscan(&pts, eps, min_pts).unwrap();
            let after = dbscan(&dup, eps, min_pts).unwrap();
            for i in 0..pts.len() {
                prop_assert_eq!(before[i] == NOISE, after[i] == NOISE);
            }
        }
    }
}
