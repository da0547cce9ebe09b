//! Point-cloud comparison primitives: correspondence search, coverage,
//! overlap, voxel downsampling and keypoint counting.

mod features;
mod kdtree;

use std::collections::BTreeMap;

pub use features::{count_features, surface_variation};
pub use kdtree::SpatialIndex;

use crate::scene::{Point, PointCloud, Vec3};
use crate::{Error, Result};

/// Thresholds shared by the oracle and the reconstruction loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricConfig {
    /// Correspondence radius in meters.
    pub gap: f64,
    /// Overlap a candidate must exceed (fraction).
    pub min_overlap: f64,
    /// Keypoint count a candidate must exceed.
    pub min_features: usize,
    /// Downsampling cell edge in meters.
    pub leaf: f64,
    /// Surface-variation threshold of the keypoint detector.
    pub curvature_tau: f64,
    /// Keypoint neighbourhood radius in meters.
    pub feature_radius: f64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        let gap = 0.005;
        MetricConfig {
            gap,
            min_overlap: 0.5,
            min_features: 3,
            leaf: gap,
            curvature_tau: 0.04,
            feature_radius: 4.0 * gap,
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gap > 0.0) {
            return Err(Error::invalid(format!("gap must be > 0, got {}", self.gap)));
        }
        if !(0.0..=1.0).contains(&self.min_overlap) {
            return Err(Error::invalid(format!("overlap threshold must be in [0,1], got {}", self.min_overlap)));
        }
        if !(self.leaf > 0.0) {
            return Err(Error::invalid(format!("leaf must be > 0, got {}", self.leaf)));
        }
        if !(self.curvature_tau > 0.0 && self.curvature_tau <= 1.0 / 3.0) {
            return Err(Error::invalid(format!("curvature_tau must be in (0, 1/3], got {}", self.curvature_tau)));
        }
        if !(self.feature_radius > 0.0) {
            return Err(Error::invalid("feature radius must be > 0"));
        }
        Ok(())
    }
}

/// Which of `targets` have a point of `index` within `radius`.
pub fn covered_mask(index: &SpatialIndex, targets: &PointCloud, radius: f64) -> Vec<bool> {
    targets.iter().map(|p| index.has_neighbor(p, radius)).collect()
}

fn fraction(mask: &[bool]) -> f64 {
    if mask.is_empty() {
        return 0.0;
    }
    mask.iter().filter(|&&b| b).count() as f64 / mask.len() as f64
}

/// Fraction of ground-truth points with a neighbour of `a` within `gap`.
pub fn coverage(a: &PointCloud, w_obj: &PointCloud, gap: f64) -> Result<f64> {
    if w_obj.is_empty() {
        return Err(Error::invalid("coverage needs a nonempty ground-truth cloud"));
    }
    if a.is_empty() {
        return Ok(0.0);
    }
    Ok(fraction(&covered_mask(&SpatialIndex::build(a), w_obj, gap)))
}

/// Fraction of the new perception `z` matched in `p_acu` within `gap`.
pub fn overlap(z: &PointCloud, p_acu: &PointCloud, gap: f64) -> Result<f64> {
    if z.is_empty() {
        return Err(Error::invalid("overlap needs a nonempty perception"));
    }
    if p_acu.is_empty() {
        return Ok(0.0);
    }
    Ok(fraction(&covered_mask(&SpatialIndex::build(p_acu), z, gap)))
}

/// The points of `z` that have a `p_acu` neighbour within `gap`.
pub fn overlap_region(z: &PointCloud, p_acu: &PointCloud, gap: f64) -> Result<PointCloud> {
    if z.is_empty() {
        return Err(Error::invalid("overlap region needs a nonempty perception"));
    }
    Ok(overlap_region_indexed(z, &SpatialIndex::build(p_acu), gap))
}

pub(crate) fn overlap_region_indexed(z: &PointCloud, p_acu: &SpatialIndex, gap: f64) -> PointCloud {
    z.iter().filter(|p| p_acu.has_neighbor(p, gap)).copied().collect()
}

type Cell = (i64, i64, i64);

fn cell_of(p: &Point, leaf: f64) -> Cell {
    ((p.x / leaf).floor() as i64, (p.y / leaf).floor() as i64, (p.z / leaf).floor() as i64)
}

fn centroids(cells: BTreeMap<Cell, (Vec3, usize)>) -> impl Iterator<Item = (Cell, Point)> {
    cells.into_iter().map(|(c, (sum, n))| (c, Point::from(sum / n as f64)))
}

fn bucket<'a>(points: impl Iterator<Item = &'a Point>, leaf: f64) -> BTreeMap<Cell, (Vec3, usize)> {
    let mut cells: BTreeMap<Cell, (Vec3, usize)> = BTreeMap::new();
    for p in points {
        let e = cells.entry(cell_of(p, leaf)).or_insert((Vec3::zeros(), 0));
        e.0 += p.coords;
        e.1 += 1;
    }
    cells
}

/// Voxel-hash downsampling: one centroid per occupied cell of edge `leaf`,
/// ordered by cell index.
pub fn downsize_filter(cloud: &PointCloud, leaf: f64) -> Result<PointCloud> {
    if !(leaf > 0.0) {
        return Err(Error::invalid(format!("leaf must be > 0, got {leaf}")));
    }
    Ok(centroids(bucket(cloud.iter(), leaf)).map(|(_, p)| p).collect())
}

/// Merges a perception into the accumulated cloud at density `leaf`.
///
/// Cells that already hold a representative keep it; cells first reached by
/// `z` receive the centroid of their new points. With an empty `p_acu` this
/// equals [`downsize_filter`] of `z`. Existing points are never moved, so the
/// result is a superset of `p_acu` and coverage cannot shrink.
pub fn integrate_perception(p_acu: &PointCloud, z: &PointCloud, leaf: f64) -> Result<PointCloud> {
    if !(leaf > 0.0) {
        return Err(Error::invalid(format!("leaf must be > 0, got {leaf}")));
    }
    let mut merged: BTreeMap<Cell, Point> = p_acu.iter().map(|p| (cell_of(p, leaf), *p)).collect();
    let fresh = bucket(z.iter().filter(|p| !merged.contains_key(&cell_of(p, leaf))), leaf);
    merged.extend(centroids(fresh));
    Ok(merged.into_values().collect())
}
