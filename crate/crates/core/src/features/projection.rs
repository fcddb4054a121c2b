/// Mean Earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Arithmetic mean of (lon, lat) pairs; `[0, 0]` for an empty slice.
pub fn centroid(lonlat: &[[f64; 2]]) -> [f64; 2] {
    if lonlat.is_empty() {
        return [0.0, 0.0];
    }
    let n = lonlat.len() as f64;
    let (a, b) = lonlat.iter().fold((0.0, 0.0), |(a, b), p| (a + p[0], b + p[1]));
    [a / n, b / n]
}

/// Local equirectangular projection to meters around `origin` (lon, lat).
pub fn project(lonlat: &[[f64; 2]], origin: [f64; 2]) -> Vec<[f64; 2]> {
    let cos0 = origin[1].to_radians().cos();
    lonlat
        .iter()
        .map(|p| {
            [
                EARTH_RADIUS_M * (p[0] - origin[0]).to_radians() * cos0,
                EARTH_RADIUS_M * (p[1] - origin[1]).to_radians(),
            ]
        })
        .collect()
}

pub fn project_point(lonlat: [f64; 2], origin: [f64; 2]) -> [f64; 2] {
    project(&[lonlat], origin)[0]
}

/// Inverse of [`project_point`].
pub fn unproject_point(xy: [f64; 2], origin: [f64; 2]) -> [f64; 2] {
    let cos0 = origin[1].to_radians().cos();
    [
        origin[0] + (xy[0] / (EARTH_RADIUS_M * cos0)).to_degrees(),
        origin[1] + (xy[1] / EARTH_RADIUS_M).to_degrees(),
    ]
}

pub fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn unproject_inverts_project() {
        let origin = [131.9, 43.1];
        for xy in [[0.0, 0.0], [1234.5, -987.0], [-20_000.0, 15_000.0]] {
            let back = project_point(unproject_point(xy, origin), origin);
            assert!((back[0] - xy[0]).abs() < 1e-6 && (back[1] - xy[1]).abs() < 1e-6);
        }
    }

    fn haversine(a: [f64; 2], b: [f64; 2]) -> f64 {
        let (l1, p1) = (a[0].to_radians(), a[1].to_radians());
        let (l2, p2) = (b[0].to_radians(), b[1].to_radians());
        let h = ((p2 - p1) / 2.0).sin().powi(2) + p1.cos() * p2.cos() * ((l2 - l1) / 2.0).sin().powi(2);
        2.0 * EARTH_RADIUS_M * h.sqrt().asin()
    }

    #[test]
    fn origin_maps_to_zero() {
        let o = [131.9, 43.1];
        assert_eq!(project_point(o, o), [0.0, 0.0]);
    }

    #[test]
    fn hundredth_degree_north() {
        let o = [131.9, 43.1];
        let p = project_point([131.9, 43.11], o);
        assert!((p[1] - 1_111.949_266_445_587).abs() < 1e-6, "{}", p[1]);
        assert!(p[0].abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn matches_haversine_within_50km(
            lat0 in -60.0f64..60.0, lon0 in -170.0f64..170.0,
            dx in -0.2f64..0.2, dy in -0.2f64..0.2, ex in -0.2f64..0.2, ey in -0.2f64..0.2,
        ) {
            let o = [lon0, lat0];
            let a = [lon0 + dx, lat0 + dy];
            let b = [lon0 + ex, lat0 + ey];
            let h = haversine(a, b);
            prop_assume!(h > 1.0 && h <= 50_000.0);
            let d = distance(project_point(a, o), project_point(b, o));
            prop_assert!(((d - h) / h).abs() < 5e-3, "{} vs {}", d, h);
        }

        #[test]
        fn isometry_near_origin(
            lat0 in -60.0f64..60.0, lon0 in -170.0f64..170.0,
            dx in -0.05f64..0.05, dy in -0.05f64..0.05,
        ) {
            let o = [lon0, lat0];
            let a = [lon0 + dx, lat0 + dy];
            let h = haversine(o, a);
            prop_assume!(h > 1.0 && h <= 10_000.0);
            let d = distance(project_point(a, o), [0.0, 0.0]);
            prop_assert!(((d - h) / h).abs() < 1e-3, "{} vs {}", d, h);
        }
    }
}
