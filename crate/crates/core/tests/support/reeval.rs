//! Brute-force reference for the constrained oracle: a uniform hash grid of
//! cell `gap` replaces the k-d tree, and Δ is recounted point by point.

use std::collections::HashMap;

use nbv_core::grid::{OccupancyGrid, VoxelState};
use nbv_core::metrics::{count_features, MetricConfig};
use nbv_core::scene::{PointCloud, ViewSet};

type Key = (i64, i64, i64);

pub struct HashGrid {
    cell: f64,
    buckets: HashMap<Key, Vec<[f64; 3]>>,
}

impl HashGrid {
    pub fn new(cloud: &PointCloud, cell: f64) -> HashGrid {
        let mut buckets: HashMap<Key, Vec<[f64; 3]>> = HashMap::new();
        for p in cloud.iter() {
            let k = key(&[p.x, p.y, p.z], cell);
            buckets.entry(k).or_default().push([p.x, p.y, p.z]);
        }
        HashGrid { cell, buckets }
    }

    pub fn near(&self, p: &[f64; 3], r: f64) -> bool {
        let (cx, cy, cz) = key(p, self.cell);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(b) = self.buckets.get(&(cx + dx, cy + dy, cz + dz)) {
                        for q in b {
                            let d = (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2);
                            if d <= r * r {
                                return true;
                            }
                        }
                    }
                }
            }
        }
        false
    }
}

fn key(p: &[f64; 3], cell: f64) -> Key {
    ((p[0] / cell).floor() as i64, (p[1] / cell).floor() as i64, (p[2] / cell).floor() as i64)
}

fn arr(p: &nbv_core::scene::PointCloud) -> Vec<[f64; 3]> {
    p.iter().map(|p| [p.x, p.y, p.z]).collect()
}

/// Best feasible view id (lowest id on ties), recomputed from scratch.
pub fn exhaustive_nbv(
    p_acu: &PointCloud,
    w_obj: &PointCloud,
    views: &ViewSet,
    clouds: &[&PointCloud],
    visited: &[usize],
    grid: &OccupancyGrid,
    m: &MetricConfig,
) -> Option<(usize, f64)> {
    let acu = HashGrid::new(p_acu, m.gap);
    let truth = arr(w_obj);
    let base: Vec<bool> = truth.iter().map(|p| acu.near(p, m.gap)).collect();
    let base_n = base.iter().filter(|&&b| b).count();
    let mut best: Option<(usize, f64)> = None;
    for v in views.iter() {
        if visited.contains(&v.id) || grid.state_at(&v.position) == VoxelState::Occupied {
            continue;
        }
        let z = clouds[v.id];
        if z.is_empty() {
            continue;
        }
        let region: PointCloud = z.iter().filter(|p| acu.near(&[p.x, p.y, p.z], m.gap)).copied().collect();
        let overlap = region.len() as f64 / z.len() as f64;
        if overlap <= m.min_overlap || count_features(&region, m.feature_radius, m.curvature_tau) <= m.min_features {
            continue;
        }
        let zg = HashGrid::new(z, m.gap);
        let union_n = truth.iter().zip(&base).filter(|(p, &b)| b || zg.near(p, m.gap)).count();
        let delta = union_n as f64 / truth.len() as f64 - base_n as f64 / truth.len() as f64;
        if best.is_none_or(|(_, d)| delta > d) {
            best = Some((v.id, delta));
        }
    }
    best
}
