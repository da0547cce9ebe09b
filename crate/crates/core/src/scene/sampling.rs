use std::collections::HashSet;

use super::{Point, PointCloud, TriangleMesh};
use crate::{Error, Result};

/// Quantum used to merge lattice points shared by neighbouring triangles.
const DEDUP_QUANTUM: f64 = 1e-9;

/// Dense deterministic surface sampling.
///
/// Each triangle is covered by a barycentric lattice with
/// `n = ceil(longest_edge / spacing)` steps per side, so every surface point
/// is within `spacing` of a sample and larger triangles receive more points.
/// Coincident lattice points on shared edges are kept once.
pub fn sample_surface(mesh: &TriangleMesh, spacing: f64) -> Result<PointCloud> {
    if !(spacing > 0.0) || !spacing.is_finite() {
        return Err(Error::invalid(format!("spacing must be > 0, got {spacing}")));
    }
    let mut seen = HashSet::new();
    let mut points = Vec::new();
    for i in 0..mesh.triangles().len() {
        let [a, b, c] = mesh.triangle(i);
        let longest = (b - a).norm().max((c - b).norm()).max((a - c).norm());
        let n = ((longest / spacing).ceil() as usize).max(1);
        let inv = 1.0 / n as f64;
        for p in 0..=n {
            for q in 0..=(n - p) {
                let s = p as f64 * inv;
                let t = q as f64 * inv;
                let pt = Point::from(a.coords + (b - a) * s + (c - a) * t);
                let key = (
                    (pt.x / DEDUP_QUANTUM).round() as i64,
                    (pt.y / DEDUP_QUANTUM).round() as i64,
                    (pt.z / DEDUP_QUANTUM).round() as i64,
                );
                if seen.insert(key) {
                    points.push(pt);
                }
            }
        }
    }
    Ok(PointCloud::from_finite(points))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::Vec3;

    #[test]
    fn cube_faces_are_dense() {
        let e = 0.2;
        let mesh = TriangleMesh::cuboid(Vec3::repeat(e / 2.0));
        let cloud = sample_surface(&mesh, e / 10.0).unwrap();
        for axis in 0..3 {
            for sign in [-1.0, 1.0] {
                let on_face = cloud.iter().filter(|p| (p[axis] - sign * e / 2.0).abs() < 1e-12).count();
                assert!(on_face >= 100, "face {axis}/{sign}: {on_face}");
            }
        }
    }

    #[test]
    fn every_surface_point_has_a_close_sample() {
        let mesh = TriangleMesh::cuboid(Vec3::new(0.1, 0.05, 0.07));
        let spacing = 0.013;
        let cloud = sample_surface(&mesh, spacing).unwrap();
        // Probe random points on each triangle.
        for i in 0..mesh.triangles().len() {
            let [a, b, c] = mesh.triangle(i);
            for k in 0..50 {
                let s = ((k * 37) % 50) as f64 / 50.0;
                let t = ((k * 11) % 50) as f64 / 50.0 * (1.0 - s);
                let p = a + (b - a) * s + (c - a) * t;
                let nearest = cloud.iter().map(|q| (q - p).norm()).fold(f64::INFINITY, f64::min);
                assert!(nearest <= spacing, "tri {i} probe {k}: {nearest}");
            }
        }
    }

    #[test]
    fn coarse_spacing_still_touches_every_triangle() {
        let mesh = TriangleMesh::uv_sphere(0.1, 6, 8);
        let cloud = sample_surface(&mesh, 10.0).unwrap();
        for i in 0..mesh.triangles().len() {
            let tri = mesh.triangle(i);
            assert!(cloud.iter().any(|p| tri.iter().any(|v| (v - p).norm() < 1e-9)));
        }
    }

    #[test]
    fn deterministic() {
        let mesh = TriangleMesh::torus(0.1, 0.03, 12, 8);
        assert_eq!(sample_surface(&mesh, 0.01).unwrap(), sample_surface(&mesh, 0.01).unwrap());
    }

    #[test]
    fn rejects_bad_spacing() {
        let mesh = TriangleMesh::cuboid(Vec3::repeat(0.1));
        assert!(sample_surface(&mesh, 0.0).is_err());
    }
}
