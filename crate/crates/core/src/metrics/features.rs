use nalgebra::Matrix3;

use super::SpatialIndex;
use crate::scene::{Point, PointCloud, Vec3};

/// Minimum number of other points a neighbourhood needs before its
/// covariance is trusted.
const MIN_NEIGHBORS: usize = 4;

const SIGMA_QUANTUM: f64 = 1e7;

/// Surface variation `λ0 / (λ0 + λ1 + λ2)` of a point set, `λ0` smallest.
/// Zero for planar sets, 1/3 for isotropic ones.
pub fn surface_variation(points: &[Point]) -> Option<f64> {
    if points.is_empty() {
        return None;
    }
    let n = points.len() as f64;
    let mean: Vec3 = points.iter().map(|p| p.coords).sum::<Vec3>() / n;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p.coords - mean;
        cov += d * d.transpose();
    }
    cov /= n;
    let eig = cov.symmetric_eigen().eigenvalues;
    let l0 = eig.min().max(0.0);
    let total: f64 = eig.iter().map(|l| l.max(0.0)).sum();
    (total > 0.0).then(|| l0 / total)
}

/// Keypoints of `region`: points whose neighbourhood surface variation
/// exceeds `curvature_tau`, thinned by non-maximum suppression so that kept
/// keypoints are pairwise at least `neighborhood` apart.
pub fn detect_features(region: &PointCloud, neighborhood: f64, curvature_tau: f64) -> Vec<Point> {
    if region.is_empty() || !(neighborhood > 0.0) {
        return Vec::new();
    }
    let index = SpatialIndex::build(region);
    let mut candidates: Vec<(f64, usize)> = Vec::new();
    let mut scratch = Vec::new();
    for (i, p) in region.iter().enumerate() {
        let nbrs = index.radius_query(p, neighborhood);
        if nbrs.len() < MIN_NEIGHBORS + 1 {
            continue;
        }
        scratch.clear();
        scratch.extend(nbrs.iter().map(|&j| *index.point(j)));
        if let Some(sigma) = surface_variation(&scratch) {
            if sigma > curvature_tau {
                // Quantized so that rounding noise does not reorder points
                // of equal variation (e.g. along a straight edge).
                candidates.push(((sigma * SIGMA_QUANTUM).round(), i));
            }
        }
    }
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let r2 = neighborhood * neighborhood;
    let mut kept: Vec<Point> = Vec::new();
    for (_, i) in candidates {
        let p = region.points()[i];
        if kept.iter().all(|k| (k - p).norm_squared() >= r2) {
            kept.push(p);
        }
    }
    kept
}

pub fn count_features(region: &PointCloud, neighborhood: f64, curvature_tau: f64) -> usize {
    detect_features(region, neighborhood, curvature_tau).len()
}

#[cfg(test)]
mod tests {
    use nalgebra::{Rotation3, Vector3};

    use super::*;

    fn grid_plane(n: usize, step: f64) -> PointCloud {
        (0..n).flat_map(|i| (0..n).map(move |j| Point::new(i as f64 * step, j as f64 * step, 0.0))).collect()
    }

    /// Three orthogonal square faces of edge `e` meeting at the origin.
    fn cube_corner(e: f64, step: f64) -> PointCloud {
        let n = (e / step).round() as usize;
        let mut pts = Vec::new();
        for i in 0..=n {
            for j in 0..=n {
                let (a, b) = (i as f64 * step, j as f64 * step);
                pts.push(Point::new(a, b, 0.0));
                if j > 0 {
                    pts.push(Point::new(a, 0.0, b));
                }
                if i > 0 && j > 0 {
                    pts.push(Point::new(0.0, a, b));
                }
            }
        }
        PointCloud::new(pts).unwrap()
    }

    #[test]
    fn planar_cloud_has_no_features() {
        let plane = grid_plane(40, 0.004);
        assert_eq!(count_features(&plane, 0.02, 0.04), 0);
        let tilted: PointCloud = plane.iter().map(|p| Rotation3::from_euler_angles(0.3, -0.7, 1.1) * p).collect();
        assert_eq!(count_features(&tilted, 0.02, 0.04), 0);
    }

    #[test]
    fn empty_region() {
        assert_eq!(count_features(&PointCloud::empty(), 0.02, 0.04), 0);
    }

    #[test]
    fn corner_variation_matches_eigen_oracle() {
        // At the apex of a symmetric corner the covariance is invariant under
        // axis permutation, so its eigenvectors are (1,1,1)/√3 and the
        // orthogonal plane. With per-axis variance v and pairwise covariance
        // c, the eigenvalues are v + 2c and v - c (twice).
        let cloud = cube_corner(0.1, 0.002);
        let index = SpatialIndex::build(&cloud);
        let r = 0.02;
        let nbrs: Vec<Point> = index.radius_query(&Point::origin(), r).into_iter().map(|i| *index.point(i)).collect();
        let n = nbrs.len() as f64;
        let mean = nbrs.iter().map(|p| p.coords).sum::<Vec3>() / n;
        let v = nbrs.iter().map(|p| (p.x - mean.x).powi(2)).sum::<f64>() / n;
        let c = nbrs.iter().map(|p| (p.x - mean.x) * (p.y - mean.y)).sum::<f64>() / n;
        let (big, small) = (v + 2.0 * c, v - c);
        let l0 = big.min(small);
        let expect = l0 / (big + 2.0 * small);
        let got = surface_variation(&nbrs).unwrap();
        assert!((got - expect).abs() < 1e-9, "{got} vs {expect}");
        assert!(got > 0.04);
    }

    #[test]
    fn corner_is_detected_near_apex() {
        let cloud = cube_corner(0.1, 0.002);
        let radius = 0.02;
        let feats = detect_features(&cloud, radius, 0.04);
        assert!(!feats.is_empty());
        assert!(feats.iter().any(|p| p.coords.norm() <= radius));
        for (i, a) in feats.iter().enumerate() {
            for b in &feats[i + 1..] {
                assert!((a - b).norm() >= radius);
            }
        }
    }

    #[test]
    fn rigid_motion_changes_count_by_at_most_one() {
        let cloud = cube_corner(0.08, 0.0023);
        let base = count_features(&cloud, 0.02, 0.04);
        for k in 0..4 {
            let rot = Rotation3::from_axis_angle(
                &nalgebra::Unit::new_normalize(Vector3::new(1.0, k as f64, 0.5)),
                0.4 * (k + 1) as f64,
            );
            let moved: PointCloud = cloud.iter().map(|p| rot * p + Vec3::new(0.3, -0.1, 0.2)).collect();
            let c = count_features(&moved, 0.02, 0.04);
            assert!((c as i64 - base as i64).abs() <= 1, "{c} vs {base}");
        }
    }

    #[test]
    fn sparse_points_are_skipped() {
        let cloud = PointCloud::new(vec![
            Point::new(0.0, 0.0, 0.0),
            Point::new(0.01, 0.0, 0.0),
            Point::new(0.0, 0.01, 0.0),
            Point::new(0.0, 0.0, 0.01),
        ])
        .unwrap();
        assert_eq!(count_features(&cloud, 0.05, 0.01), 0);
    }
}
