//! Probabilistic uniform occupancy grid.
//!
//! Voxels store log-odds. A perception is integrated by casting a ray from
//! the sensor to every point: traversed voxels receive the miss increment,
//! the endpoint voxel the hit increment, each voxel at most once per role per
//! perception with hits taking precedence.

use crate::scene::{Point, PointCloud, Vec3};
use crate::{Error, Result};

pub const DEFAULT_EDGE: usize = 32;
/// Grid edge relative to the object's extent.
pub const PLACEMENT_MARGIN: f64 = 1.1;

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn sigmoid(l: f64) -> f64 {
    1.0 / (1.0 + (-l).exp())
}

/// Inverse sensor model and state thresholds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorModel {
    pub p_hit: f64,
    pub p_miss: f64,
    pub p_min: f64,
    pub p_max: f64,
    /// Half-width of the unknown band around 0.5.
    pub epsilon: f64,
}

impl Default for SensorModel {
    fn default() -> Self {
        SensorModel { p_hit: 0.7, p_miss: 0.4, p_min: 0.12, p_max: 0.97, epsilon: 0.01 }
    }
}

impl SensorModel {
    pub fn hit_logodds(&self) -> f64 {
        logit(self.p_hit)
    }

    pub fn miss_logodds(&self) -> f64 {
        logit(self.p_miss)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = 0.0 < self.p_min
            && self.p_min <= self.p_miss
            && self.p_miss < 0.5
            && 0.5 < self.p_hit
            && self.p_hit <= self.p_max
            && self.p_max < 1.0
            && (0.0..0.5).contains(&self.epsilon);
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("inconsistent sensor model {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VoxelState {
    Free,
    Unknown,
    Occupied,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    dims: [usize; 3],
    origin: Point,
    resolution: f64,
    logodds: Vec<f64>,
    model: SensorModel,
}

const MISS: u8 = 1;
const HIT: u8 = 2;

impl OccupancyGrid {
    /// Fresh grid (p = 0.5 everywhere). `origin` is the outer corner of voxel (0,0,0).
    pub fn new(dims: [usize; 3], origin: Point, resolution: f64, model: SensorModel) -> Result<OccupancyGrid> {
        if dims.contains(&0) {
            return Err(Error::invalid(format!("grid dims must be >= 1, got {dims:?}")));
        }
        if !(resolution > 0.0) || !resolution.is_finite() {
            return Err(Error::invalid(format!("resolution must be > 0, got {resolution}")));
        }
        model.validate()?;
        Ok(OccupancyGrid { dims, origin, resolution, logodds: vec![0.0; dims[0] * dims[1] * dims[2]], model })
    }

    /// Cube of `edge`³ voxels centered at the origin whose side is
    /// `2 * half_extent * PLACEMENT_MARGIN`.
    pub fn enclosing(half_extent: f64, edge: usize, model: SensorModel) -> Result<OccupancyGrid> {
        if !(half_extent > 0.0) {
            return Err(Error::invalid(format!("object half-extent must be > 0, got {half_extent}")));
        }
        let side = 2.0 * half_extent * PLACEMENT_MARGIN;
        let h = -0.5 * side;
        OccupancyGrid::new([edge; 3], Point::new(h, h, h), side / edge as f64, model)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn origin(&self) -> Point {
        self.origin
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn model(&self) -> &SensorModel {
        &self.model
    }

    pub fn len(&self) -> usize {
        self.logodds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.logodds.is_empty()
    }

    /// Flat x-major index: `(x * ny + y) * nz + z`.
    pub fn flat_index(&self, idx: [usize; 3]) -> Option<usize> {
        if (0..3).all(|a| idx[a] < self.dims[a]) {
            Some((idx[0] * self.dims[1] + idx[1]) * self.dims[2] + idx[2])
        } else {
            None
        }
    }

    pub fn voxel_of(&self, p: &Point) -> Option<[usize; 3]> {
        let g = (p - self.origin) / self.resolution;
        let mut idx = [0usize; 3];
        for a in 0..3 {
            let f = g[a].floor();
            if !(f >= 0.0 && f < self.dims[a] as f64) {
                return None;
            }
            idx[a] = f as usize;
        }
        Some(idx)
    }

    pub fn logodds_at(&self, idx: [usize; 3]) -> Result<f64> {
        self.flat_index(idx)
            .map(|i| self.logodds[i])
            .ok_or_else(|| Error::invalid(format!("voxel {idx:?} out of bounds {:?}", self.dims)))
    }

    pub fn probability(&self, idx: [usize; 3]) -> Result<f64> {
        self.logodds_at(idx).map(sigmoid)
    }

    pub fn classify(&self, idx: [usize; 3]) -> Result<VoxelState> {
        let p = self.probability(idx)?;
        let eps = self.model.epsilon;
        Ok(if p > 0.5 + eps {
            VoxelState::Occupied
        } else if p < 0.5 - eps {
            VoxelState::Free
        } else {
            VoxelState::Unknown
        })
    }

    /// State of the voxel containing `p`; points outside the grid are free.
    pub fn state_at(&self, p: &Point) -> VoxelState {
        match self.voxel_of(p) {
            Some(idx) => self.classify(idx).unwrap_or(VoxelState::Free),
            None => VoxelState::Free,
        }
    }

    /// Integrates one perception observed from `sensor_origin`.
    ///
    /// Rays are clipped to the grid; points outside it contribute misses
    /// along the clipped segment but no hit.
    pub fn update(&mut self, perception: &PointCloud, sensor_origin: &Point) {
        let mut roles = vec![0u8; self.logodds.len()];
        for p in perception.iter() {
            self.trace(sensor_origin, p, &mut roles);
        }
        let hit = self.model.hit_logodds();
        let miss = self.model.miss_logodds();
        let lo = logit(self.model.p_min);
        let hi = logit(self.model.p_max);
        for (l, &role) in self.logodds.iter_mut().zip(&roles) {
            let delta = if role & HIT != 0 {
                hit
            } else if role & MISS != 0 {
                miss
            } else {
                continue;
            };
            *l = (*l + delta).clamp(lo, hi);
        }
    }

    /// 3D DDA from `from` to `to`, marking traversed voxels MISS and the
    /// endpoint voxel HIT.
    fn trace(&self, from: &Point, to: &Point, roles: &mut [u8]) {
        let start = (from - self.origin) / self.resolution;
        let end = (to - self.origin) / self.resolution;
        let d = end - start;
        let dims = Vec3::new(self.dims[0] as f64, self.dims[1] as f64, self.dims[2] as f64);

        // Clip the parametric segment [0, 1] against the grid box.
        let (mut t0, mut t1) = (0.0f64, 1.0f64);
        for a in 0..3 {
            if d[a] == 0.0 {
                if start[a] < 0.0 || start[a] >= dims[a] {
                    return;
                }
                continue;
            }
            let mut near = (0.0 - start[a]) / d[a];
            let mut far = (dims[a] - start[a]) / d[a];
            if near > far {
                std::mem::swap(&mut near, &mut far);
            }
            t0 = t0.max(near);
            t1 = t1.min(far);
        }
        if t0 > t1 {
            return;
        }

        let end_voxel = self.voxel_of(to);
        let entry = start + d * t0;
        let mut v = [0i64; 3];
        let mut step = [0i64; 3];
        let mut t_max = [f64::INFINITY; 3];
        let mut t_delta = [f64::INFINITY; 3];
        for a in 0..3 {
            v[a] = (entry[a].floor() as i64).clamp(0, self.dims[a] as i64 - 1);
            if d[a] > 0.0 {
                step[a] = 1;
                t_max[a] = ((v[a] + 1) as f64 - start[a]) / d[a];
                t_delta[a] = 1.0 / d[a];
            } else if d[a] < 0.0 {
                step[a] = -1;
                t_max[a] = (v[a] as f64 - start[a]) / d[a];
                t_delta[a] = -1.0 / d[a];
            }
        }
        let end_flat = end_voxel.and_then(|e| self.flat_index(e));
        loop {
            let cur = [v[0] as usize, v[1] as usize, v[2] as usize];
            let flat = (cur[0] * self.dims[1] + cur[1]) * self.dims[2] + cur[2];
            if Some(flat) == end_flat {
                roles[flat] |= HIT;
                return;
            }
            roles[flat] |= MISS;
            let a = if t_max[0] <= t_max[1] && t_max[0] <= t_max[2] {
                0
            } else if t_max[1] <= t_max[2] {
                1
            } else {
                2
            };
            if t_max[a] > t1 {
                break;
            }
            v[a] += step[a];
            if v[a] < 0 || v[a] >= self.dims[a] as i64 {
                break;
            }
            t_max[a] += t_delta[a];
        }
        // Numerical corner cases can leave the walk one voxel short.
        if let Some(e) = end_flat {
            roles[e] |= HIT;
        }
    }

    /// Occupancy probabilities in x-major row-major order.
    pub fn to_tensor(&self) -> Vec<f64> {
        self.logodds.iter().map(|&l| sigmoid(l)).collect()
    }

    /// Probabilities rounded to 32-bit floats, as persisted in datasets.
    pub fn snapshot(&self) -> Vec<f32> {
        self.logodds.iter().map(|&l| sigmoid(l) as f32).collect()
    }

    /// Rebuilds a grid from probabilities laid out as [`to_tensor`](Self::to_tensor).
    pub fn from_tensor(
        dims: [usize; 3],
        origin: Point,
        resolution: f64,
        model: SensorModel,
        probs: &[f64],
    ) -> Result<OccupancyGrid> {
        let mut g = OccupancyGrid::new(dims, origin, resolution, model)?;
        if probs.len() != g.logodds.len() {
            return Err(Error::invalid(format!("tensor has {} values, grid needs {}", probs.len(), g.logodds.len())));
        }
        for (l, &p) in g.logodds.iter_mut().zip(probs) {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid(format!("probability {p} outside [0,1]")));
            }
            *l = logit(p);
        }
        Ok(g)
    }

    /// FNV-1a over the 32-bit snapshot, used to fingerprint episode states.
    pub fn snapshot_hash(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for p in self.snapshot() {
            for b in p.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        h
    }
}
