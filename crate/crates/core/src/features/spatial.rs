use rayon::prelude::*;

use super::projection::distance;
use crate::error::{Error, Result};

/// Elementwise `numerator / denominator`.
pub fn ratio_feature(numerator: &[f64], denominator: &[f64]) -> Result<Vec<f64>> {
    if numerator.len() != denominator.len() {
        return Err(Error::LengthMismatch { expected: numerator.len(), got: denominator.len() });
    }
    numerator
        .iter()
        .zip(denominator)
        .enumerate()
        .map(|(i, (a, b))| {
            if *b > 0.0 {
                Ok(a / b)
            } else {
                Err(Error::NonPositive { index: i, value: *b })
            }
        })
        .collect()
}

/// Number of POIs within `radius` meters of each object, boundary included.
pub fn count_within_radius(objects: &[[f64; 2]], pois: &[[f64; 2]], radius: f64) -> Result<Vec<usize>> {
    if !(radius > 0.0) {
        return Err(Error::invalid("radius must be positive"));
    }
    Ok(objects
        .par_iter()
        .map(|o| pois.iter().filter(|p| distance(*o, **p) <= radius).count())
        .collect())
}

/// Straight-line distance from each object to its nearest POI.
pub fn nearest_distance(objects: &[[f64; 2]], pois: &[[f64; 2]]) -> Result<Vec<f64>> {
    if pois.is_empty() {
        return Err(Error::invalid("nearest distance to an empty POI layer"));
    }
    Ok(objects
        .par_iter()
        .map(|o| pois.iter().map(|p| distance(*o, *p)).fold(f64::INFINITY, f64::min))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg;
    use crate::rng;
    use rand::Rng as _;

    #[test]
    fn ratio_examples() {
        assert_eq!(ratio_feature(&[100_000.0], &[50_000.0]).unwrap(), vec![2.0]);
        assert_eq!(ratio_feature(&[6.0, 6.0], &[3.0, 6.0]).unwrap(), vec![2.0, 1.0]);
        assert!(matches!(ratio_feature(&[1.0, 1.0], &[1.0, 0.0]), Err(Error::NonPositive { index: 1, .. })));
    }

    #[test]
    fn ratio_beats_parts_when_target_follows_it() {
        let mut r = rng::rng(17);
        let n = 2000;
        let pop: Vec<f64> = (0..n).map(|_| 1_000.0 + r.random::<f64>() * 99_000.0).collect();
        let dist: Vec<f64> = (0..n).map(|_| 5_000.0 + r.random::<f64>() * 95_000.0).collect();
        let ratio = ratio_feature(&pop, &dist).unwrap();
        let y: Vec<f64> = ratio.iter().map(|v| 3.0 * v + 0.05 * r.random::<f64>()).collect();
        let c = |x: &[f64]| linalg::pearson(x, &y).unwrap().abs();
        assert!(c(&ratio) > c(&pop).max(c(&dist)));
    }

    #[test]
    fn counts() {
        let objs = [[0.0, 0.0]];
        assert_eq!(count_within_radius(&objs, &[], 1000.0).unwrap(), vec![0]);
        assert_eq!(count_within_radius(&objs, &[[1000.0, 0.0]], 1000.0).unwrap(), vec![1]);
        let ring: Vec<[f64; 2]> = (0..10)
            .map(|k| {
                let t = k as f64 * std::f64::consts::TAU / 10.0;
                [999.0 * t.cos(), 999.0 * t.sin()]
            })
            .collect();
        assert_eq!(count_within_radius(&objs, &ring, 1000.0).unwrap(), vec![10]);
    }

    #[test]
    fn nearest() {
        let d = nearest_distance(&[[0.0, 0.0]], &[[3.0, 4.0], [10.0, 0.0]]).unwrap();
        assert_eq!(d, vec![5.0]);
    }
}
