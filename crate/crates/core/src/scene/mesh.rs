use std::f64::consts::PI;

use nalgebra::Rotation3;

use super::{Point, Vec3};
use crate::{Error, Result};

/// Indexed triangle mesh in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Point>,
    triangles: Vec<[u32; 3]>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Point>, triangles: Vec<[u32; 3]>) -> Result<TriangleMesh> {
        let n = vertices.len();
        if let Some(t) = triangles.iter().find(|t| t.iter().any(|&i| i as usize >= n)) {
            return Err(Error::invalid(format!("triangle {t:?} indexes past {n} vertices")));
        }
        if vertices.iter().any(|v| !v.coords.iter().all(|c| c.is_finite())) {
            return Err(Error::invalid("mesh has non-finite vertex coordinates"));
        }
        Ok(TriangleMesh { vertices, triangles })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn triangle(&self, i: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[i];
        [self.vertices[a as usize], self.vertices[b as usize], self.vertices[c as usize]]
    }

    /// Largest absolute vertex coordinate.
    pub fn half_extent(&self) -> f64 {
        self.vertices.iter().flat_map(|v| v.coords.iter().map(|c| c.abs())).fold(0.0, f64::max)
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.triangles.len())
            .map(|i| {
                let [a, b, c] = self.triangle(i);
                0.5 * (b - a).cross(&(c - a)).norm()
            })
            .sum()
    }

    pub fn rotated(&self, rot: &Rotation3<f64>) -> TriangleMesh {
        TriangleMesh { vertices: self.vertices.iter().map(|v| rot * v).collect(), triangles: self.triangles.clone() }
    }

    pub fn translated(&self, offset: Vec3) -> TriangleMesh {
        TriangleMesh { vertices: self.vertices.iter().map(|v| v + offset).collect(), triangles: self.triangles.clone() }
    }

    pub fn scaled(&self, factor: f64) -> TriangleMesh {
        TriangleMesh {
            vertices: self.vertices.iter().map(|v| Point::from(v.coords * factor)).collect(),
            triangles: self.triangles.clone(),
        }
    }

    /// Appends `other` as a separate component.
    pub fn merged(&self, other: &TriangleMesh) -> TriangleMesh {
        let base = self.vertices.len() as u32;
        let mut vertices = self.vertices.clone();
        vertices.extend_from_slice(&other.vertices);
        let mut triangles = self.triangles.clone();
        triangles.extend(other.triangles.iter().map(|t| [t[0] + base, t[1] + base, t[2] + base]));
        TriangleMesh { vertices, triangles }
    }

    /// Closed axis-aligned box centered at the origin, outward winding.
    pub fn cuboid(half: Vec3) -> TriangleMesh {
        let vertices = (0..8)
            .map(|i| {
                Point::new(
                    if i & 1 == 0 { -half.x } else { half.x },
                    if i & 2 == 0 { -half.y } else { half.y },
                    if i & 4 == 0 { -half.z } else { half.z },
                )
            })
            .collect();
        let triangles = vec![
            [0, 2, 1],
            [1, 2, 3], // -z
            [4, 5, 6],
            [5, 7, 6], // +z
            [0, 1, 4],
            [1, 5, 4], // -y
            [2, 6, 3],
            [3, 6, 7], // +y
            [0, 4, 2],
            [2, 4, 6], // -x
            [1, 3, 5],
            [3, 7, 5], // +x
        ];
        TriangleMesh { vertices, triangles }
    }

    /// Latitude-longitude sphere; all vertices lie exactly on the sphere.
    pub fn uv_sphere(radius: f64, rings: usize, segments: usize) -> TriangleMesh {
        let rings = rings.max(2);
        let segments = segments.max(3);
        let profile: Vec<(f64, f64)> = (0..=rings)
            .map(|i| {
                let theta = PI * i as f64 / rings as f64;
                (radius * theta.sin(), radius * theta.cos())
            })
            .collect();
        revolve(&profile, segments)
    }

    /// Torus around the z axis.
    pub fn torus(major: f64, minor: f64, major_segments: usize, minor_segments: usize) -> TriangleMesh {
        let mut vertices = Vec::with_capacity(major_segments * minor_segments);
        for i in 0..major_segments {
            let u = 2.0 * PI * i as f64 / major_segments as f64;
            for j in 0..minor_segments {
                let v = 2.0 * PI * j as f64 / minor_segments as f64;
                let r = major + minor * v.cos();
                vertices.push(Point::new(r * u.cos(), r * u.sin(), minor * v.sin()));
            }
        }
        let mut triangles = Vec::with_capacity(2 * major_segments * minor_segments);
        let idx = |i: usize, j: usize| ((i % major_segments) * minor_segments + j % minor_segments) as u32;
        for i in 0..major_segments {
            for j in 0..minor_segments {
                let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            }
        }
        TriangleMesh { vertices, triangles }
    }

    /// Cylinder of `half_length` along z capped by hemispheres of `radius`.
    pub fn capsule(radius: f64, half_length: f64, cap_rings: usize, segments: usize) -> TriangleMesh {
        let cap_rings = cap_rings.max(1);
        let mut profile = Vec::with_capacity(2 * cap_rings + 2);
        for i in 0..=cap_rings {
            let theta = 0.5 * PI * i as f64 / cap_rings as f64;
            profile.push((radius * theta.sin(), half_length + radius * theta.cos()));
        }
        for i in 0..=cap_rings {
            let theta = 0.5 * PI + 0.5 * PI * i as f64 / cap_rings as f64;
            profile.push((radius * theta.sin(), -half_length + radius * theta.cos()));
        }
        revolve(&profile, segments.max(3))
    }

    /// L-shaped prism: the polygon lies in the xy plane and is extruded
    /// over `-half_height..half_height`.
    pub fn l_prism(width: f64, depth: f64, notch_x: f64, notch_y: f64, half_height: f64) -> TriangleMesh {
        // Polygon counter-clockwise, centered afterwards.
        let poly = [(0.0, 0.0), (width, 0.0), (width, notch_y), (notch_x, notch_y), (notch_x, depth), (0.0, depth)];
        let (cx, cy) = (width / 2.0, depth / 2.0);
        let mut vertices = Vec::with_capacity(12);
        for &z in &[-half_height, half_height] {
            for &(x, y) in &poly {
                vertices.push(Point::new(x - cx, y - cy, z));
            }
        }
        // Fan from vertex 3 (the reflex corner) triangulates the L.
        let cap = [[3u32, 4, 5], [3, 5, 0], [3, 0, 1], [3, 1, 2]];
        let mut triangles = Vec::with_capacity(20);
        for t in cap {
            triangles.push([t[0], t[2], t[1]]);
            triangles.push([t[0] + 6, t[1] + 6, t[2] + 6]);
        }
        for i in 0..6u32 {
            let j = (i + 1) % 6;
            triangles.push([i, j, j + 6]);
            triangles.push([i, j + 6, i + 6]);
        }
        TriangleMesh { vertices, triangles }
    }
}

/// Surface of revolution about z from a (radius, z) profile whose first and
/// last entries sit on the axis.
fn revolve(profile: &[(f64, f64)], segments: usize) -> TriangleMesh {
    let n = profile.len();
    let top = Point::new(0.0, 0.0, profile[0].1);
    let bottom = Point::new(0.0, 0.0, profile[n - 1].1);
    let mut vertices = vec![top];
    for &(r, z) in &profile[1..n - 1] {
        for s in 0..segments {
            let phi = 2.0 * PI * s as f64 / segments as f64;
            vertices.push(Point::new(r * phi.cos(), r * phi.sin(), z));
        }
    }
    vertices.push(bottom);
    let inner = n - 2;
    let ring = |k: usize, s: usize| (1 + k * segments + s % segments) as u32;
    let bottom_idx = (vertices.len() - 1) as u32;
    let mut triangles = Vec::new();
    for s in 0..segments {
        triangles.push([0, ring(0, s), ring(0, s + 1)]);
    }
    for k in 0..inner.saturating_sub(1) {
        for s in 0..segments {
            let (a, b, c, d) = (ring(k, s), ring(k + 1, s), ring(k + 1, s + 1), ring(k, s + 1));
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    for s in 0..segments {
        triangles.push([bottom_idx, ring(inner - 1, s + 1), ring(inner - 1, s)]);
    }
    TriangleMesh { vertices, triangles }
}

#[cfg(test)]
mod tests {
    use std::collections::HashMap;

    use super::*;

    /// Every undirected edge of a closed manifold is shared by exactly two
    /// triangles with opposite orientation.
    fn assert_watertight(mesh: &TriangleMesh) {
        let mut edges: HashMap<(u32, u32), i32> = HashMap::new();
        for t in mesh.triangles() {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *edges.entry((a, b)).or_default() += 1;
            }
        }
        for (&(a, b), &count) in &edges {
            assert_eq!(count, 1, "directed edge ({a},{b}) repeated");
            assert_eq!(edges.get(&(b, a)), Some(&1), "edge ({a},{b}) has no twin");
        }
    }

    /// Signed volume via the divergence theorem; positive for outward winding.
    fn signed_volume(mesh: &TriangleMesh) -> f64 {
        (0..mesh.triangles().len())
            .map(|i| {
                let [a, b, c] = mesh.triangle(i);
                a.coords.dot(&b.coords.cross(&c.coords)) / 6.0
            })
            .sum()
    }

    #[test]
    fn primitives_are_closed_and_outward() {
        let meshes = [
            TriangleMesh::cuboid(Vec3::new(0.1, 0.2, 0.3)),
            TriangleMesh::uv_sphere(1.0, 12, 24),
            TriangleMesh::torus(0.1, 0.03, 24, 12),
            TriangleMesh::capsule(0.05, 0.1, 6, 16),
            TriangleMesh::l_prism(0.2, 0.15, 0.08, 0.06, 0.05),
        ];
        for m in &meshes {
            assert_watertight(m);
            assert!(signed_volume(m) > 0.0);
        }
    }

    #[test]
    fn cuboid_volume() {
        let m = TriangleMesh::cuboid(Vec3::new(0.1, 0.2, 0.3));
        assert!((signed_volume(&m) - 0.048).abs() < 1e-12);
        assert!((m.surface_area() - 2.0 * (0.08 + 0.24 + 0.12)).abs() < 1e-12);
    }

    #[test]
    fn l_prism_volume() {
        let m = TriangleMesh::l_prism(0.2, 0.15, 0.08, 0.06, 0.05);
        let area = 0.2 * 0.06 + 0.08 * 0.09;
        assert!((signed_volume(&m) - area * 0.1).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_indices() {
        let v = vec![Point::origin(); 3];
        assert!(TriangleMesh::new(v.clone(), vec![[0, 1, 3]]).is_err());
        assert!(TriangleMesh::new(v, vec![[0, 1, 2]]).is_ok());
    }
}
