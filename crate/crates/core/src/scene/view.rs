use std::f64::consts::PI;

use nalgebra::{Rotation3, Unit, Vector3};

use super::{Point, Vec3};
use crate::{Error, Result};

/// Tolerance on `|position| == radius` for views of one set.
const RADIUS_TOLERANCE: f64 = 1e-9;

/// A sensor pose: position plus the intrinsic x-y-z rotation angles.
///
/// The camera looks along its own +z axis, so `rotation() * e_z` is the
/// optical axis in the global frame. Views built with
/// [`View::looking_at_origin`] always point that axis at the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct View {
    pub id: usize,
    pub position: Point,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl View {
    /// Orients a sensor at `position` toward the global origin with zero roll.
    pub fn looking_at_origin(id: usize, position: Point) -> View {
        let dir = -position.coords;
        let norm = dir.norm();
        let d = if norm > 0.0 { dir / norm } else { Vec3::z() };
        // R = Rx(alpha) Ry(beta) Rz(gamma) maps e_z to
        // (sin b, -sin a cos b, cos a cos b).
        let beta = d.x.clamp(-1.0, 1.0).asin();
        let alpha = if d.y == 0.0 && d.z == 0.0 { 0.0 } else { (-d.y).atan2(d.z) };
        View { id, position, alpha, beta, gamma: 0.0 }
    }

    /// Camera-to-global rotation.
    pub fn rotation(&self) -> Rotation3<f64> {
        Rotation3::from_axis_angle(&Vector3::x_axis(), self.alpha)
            * Rotation3::from_axis_angle(&Vector3::y_axis(), self.beta)
            * Rotation3::from_axis_angle(&Vector3::z_axis(), self.gamma)
    }

    pub fn optical_axis(&self) -> Vec3 {
        self.rotation() * Vec3::z()
    }

    pub fn camera_to_global(&self, p: &Point) -> Point {
        self.rotation() * p + self.position.coords
    }

    /// Unit direction from the origin to the sensor.
    pub fn direction(&self) -> Unit<Vec3> {
        Unit::new_normalize(self.position.coords)
    }

    pub fn distance_to_origin(&self) -> f64 {
        self.position.coords.norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViewSetKind {
    SearchSpace,
    ClassSet,
}

/// Ordered views on one sphere; ids are `0..len`.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewSet {
    views: Vec<View>,
    radius: f64,
    kind: ViewSetKind,
}

impl ViewSet {
    pub fn new(views: Vec<View>, radius: f64, kind: ViewSetKind) -> Result<ViewSet> {
        if !(radius > 0.0) {
            return Err(Error::invalid(format!("view-set radius must be > 0, got {radius}")));
        }
        for (i, v) in views.iter().enumerate() {
            if v.id != i {
                return Err(Error::invalid(format!("view at position {i} has id {}", v.id)));
            }
            let r = v.distance_to_origin();
            if (r - radius).abs() > RADIUS_TOLERANCE {
                return Err(Error::invalid(format!("view {i} lies at distance {r}, expected {radius}")));
            }
        }
        Ok(ViewSet { views, radius, kind })
    }

    pub fn with_kind(mut self, kind: ViewSetKind) -> ViewSet {
        self.kind = kind;
        self
    }

    pub fn views(&self) -> &[View] {
        &self.views
    }

    pub fn get(&self, id: usize) -> Option<&View> {
        self.views.get(id)
    }

    pub fn len(&self) -> usize {
        self.views.len()
    }

    pub fn is_empty(&self) -> bool {
        self.views.is_empty()
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn kind(&self) -> ViewSetKind {
        self.kind
    }

    pub fn iter(&self) -> std::slice::Iter<'_, View> {
        self.views.iter()
    }
}

/// Places `count` views on a Fibonacci spiral over the sphere (or the
/// upper hemisphere, z >= 0), each looking at the origin.
pub fn generate_view_sphere(count: usize, radius: f64, hemisphere_only: bool) -> Result<ViewSet> {
    if count == 0 {
        return Err(Error::invalid("view count must be >= 1"));
    }
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::invalid(format!("radius must be > 0, got {radius}")));
    }
    let golden_angle = PI * (3.0 - 5f64.sqrt());
    let n = count as f64;
    let views = (0..count)
        .map(|i| {
            let t = i as f64 + 0.5;
            let z = if hemisphere_only { 1.0 - t / n } else { 1.0 - 2.0 * t / n };
            let ring = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden_angle * i as f64;
            let dir = Vec3::new(ring * phi.cos(), ring * phi.sin(), z).normalize();
            View::looking_at_origin(i, Point::from(dir * radius))
        })
        .collect();
    ViewSet::new(views, radius, ViewSetKind::SearchSpace)
}

/// `count` ids spread uniformly over `0..len` (all ids when count >= len).
pub fn strided_subset(len: usize, count: usize) -> Vec<usize> {
    if count >= len {
        return (0..len).collect();
    }
    (0..count).map(|i| i * len / count).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn search_space_cardinality() {
        let vs = generate_view_sphere(1312, 0.4, false).unwrap();
        assert_eq!(vs.len(), 1312);
    }

    #[test]
    fn hemisphere_class_set_is_upper() {
        let vs = generate_view_sphere(14, 0.4, true).unwrap();
        assert_eq!(vs.len(), 14);
        assert!(vs.iter().all(|v| v.position.z >= 0.0));
    }

    #[test]
    fn single_view_points_at_origin() {
        let r = 0.7;
        let vs = generate_view_sphere(1, r, false).unwrap();
        let v = vs.get(0).unwrap();
        let to_origin = -v.position.coords;
        assert!((v.distance_to_origin() - r).abs() < 1e-12);
        assert!((v.optical_axis().dot(&to_origin) - to_origin.norm()).abs() < 1e-12);
    }

    #[test]
    fn every_view_points_at_origin() {
        for &hemi in &[false, true] {
            let vs = generate_view_sphere(200, 0.4, hemi).unwrap();
            for v in vs.iter() {
                let expected = -v.position.coords.normalize();
                assert!((v.optical_axis() - expected).norm() < 1e-12, "view {}", v.id);
                assert!((v.distance_to_origin() - 0.4).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn poles_are_handled() {
        for p in [Vec3::z(), -Vec3::z(), Vec3::x(), -Vec3::x(), Vec3::y()] {
            let v = View::looking_at_origin(0, Point::from(p * 0.5));
            assert!((v.optical_axis() + p).norm() < 1e-12);
        }
    }

    #[test]
    fn invalid_arguments() {
        assert!(generate_view_sphere(0, 0.4, false).is_err());
        assert!(generate_view_sphere(3, 0.0, false).is_err());
        assert!(generate_view_sphere(3, -1.0, true).is_err());
    }

    #[test]
    fn deterministic() {
        assert_eq!(generate_view_sphere(50, 0.4, true).unwrap(), generate_view_sphere(50, 0.4, true).unwrap());
    }

    #[test]
    fn strided_subset_spreads() {
        assert_eq!(strided_subset(14, 20), (0..14).collect::<Vec<_>>());
        assert_eq!(strided_subset(1312, 4), vec![0, 328, 656, 984]);
    }
}
