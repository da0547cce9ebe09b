use super::Point;
use crate::{Error, Result};

/// Unordered points in meters, global frame.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    points: Vec<Point>,
}

impl PointCloud {
    pub fn new(points: Vec<Point>) -> Result<PointCloud> {
        if let Some(p) = points.iter().find(|p| !p.coords.iter().all(|c| c.is_finite())) {
            return Err(Error::invalid(format!("non-finite point {p:?}")));
        }
        Ok(PointCloud { points })
    }

    /// Caller guarantees all coordinates are finite.
    pub(crate) fn from_finite(points: Vec<Point>) -> PointCloud {
        debug_assert!(points.iter().all(|p| p.coords.iter().all(|c| c.is_finite())));
        PointCloud { points }
    }

    pub fn empty() -> PointCloud {
        PointCloud::default()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Point> {
        self.points.iter()
    }

    /// Concatenation `self ∪ other` (duplicates kept).
    pub fn union(&self, other: &PointCloud) -> PointCloud {
        let mut points = Vec::with_capacity(self.len() + other.len());
        points.extend_from_slice(&self.points);
        points.extend_from_slice(&other.points);
        PointCloud { points }
    }

    pub fn into_points(self) -> Vec<Point> {
        self.points
    }
}

impl FromIterator<Point> for PointCloud {
    fn from_iter<I: IntoIterator<Item = Point>>(iter: I) -> Self {
        PointCloud::from_finite(iter.into_iter().collect())
    }
}
