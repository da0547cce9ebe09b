use std::fmt;
use std::str::FromStr;

use nalgebra::{Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{TriangleMesh, Vec3};
use crate::{Error, Result};

/// Default object half-extent in meters. Sized so the whole object stays
/// inside a 45 degree frustum from a 0.4 m view sphere.
pub const DEFAULT_OBJECT_SCALE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ObjectKind {
    Sphere,
    Box,
    LShape,
    Torus,
    Capsule,
    Composite,
}

impl ObjectKind {
    pub const ALL: [ObjectKind; 6] = [
        ObjectKind::Sphere,
        ObjectKind::Box,
        ObjectKind::LShape,
        ObjectKind::Torus,
        ObjectKind::Capsule,
        ObjectKind::Composite,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ObjectKind::Sphere => "sphere",
            ObjectKind::Box => "box",
            ObjectKind::LShape => "lshape",
            ObjectKind::Torus => "torus",
            ObjectKind::Capsule => "capsule",
            ObjectKind::Composite => "composite",
        }
    }
}

impl fmt::Display for ObjectKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ObjectKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ObjectKind::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown object kind {s:?}")))
    }
}

/// A procedural object reference, written `kind:seed`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectSpec {
    pub kind: ObjectKind,
    pub seed: u64,
    pub scale: f64,
}

impl ObjectSpec {
    pub fn new(kind: ObjectKind, seed: u64) -> ObjectSpec {
        ObjectSpec { kind, seed, scale: DEFAULT_OBJECT_SCALE }
    }

    pub fn mesh(&self) -> Result<TriangleMesh> {
        generate_demo_object(self.kind, self.seed, self.scale)
    }

    /// Parses a comma-separated list such as `box:0,torus:3`.
    pub fn parse_list(s: &str) -> Result<Vec<ObjectSpec>> {
        s.split(',').map(str::trim).filter(|t| !t.is_empty()).map(str::parse).collect()
    }
}

impl fmt::Display for ObjectSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind, self.seed)
    }
}

impl FromStr for ObjectSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, seed) = match s.split_once(':') {
            Some((k, seed)) => {
                (k, seed.parse::<u64>().map_err(|_| Error::invalid(format!("bad object seed in {s:?}")))?)
            }
            None => (s, 0),
        };
        Ok(ObjectSpec::new(kind.parse()?, seed))
    }
}

/// Deterministic closed mesh for `(kind, seed, scale)`, centered at the
/// origin with its largest absolute coordinate equal to `scale`.
pub fn generate_demo_object(kind: ObjectKind, seed: u64, scale: f64) -> Result<TriangleMesh> {
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::invalid(format!("object scale must be > 0, got {scale}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((kind as u64) << 56));
    let unit = match kind {
        ObjectKind::Sphere => return Ok(TriangleMesh::uv_sphere(scale, 24, 48)),
        ObjectKind::Box => TriangleMesh::cuboid(Vec3::new(
            rng.random_range(0.45..1.0),
            rng.random_range(0.45..1.0),
            rng.random_range(0.45..1.0),
        )),
        ObjectKind::LShape => {
            let width = rng.random_range(1.4..2.0);
            let depth = rng.random_range(1.4..2.0);
            TriangleMesh::l_prism(
                width,
                depth,
                width * rng.random_range(0.35..0.6),
                depth * rng.random_range(0.35..0.6),
                rng.random_range(0.3..0.8),
            )
        }
        ObjectKind::Torus => {
            let minor = rng.random_range(0.2..0.4);
            TriangleMesh::torus(1.0 - minor, minor, 40, 20)
        }
        ObjectKind::Capsule => {
            let radius = rng.random_range(0.3..0.55);
            TriangleMesh::capsule(radius, 1.0 - radius, 8, 32)
        }
        ObjectKind::Composite => composite(&mut rng),
    };
    let mesh = unit.rotated(&random_rotation(&mut rng));
    Ok(mesh.scaled(scale / mesh.half_extent()))
}

/// A base block with two smaller parts sitting on top of it.
fn composite(rng: &mut ChaCha8Rng) -> TriangleMesh {
    let base_half = Vec3::new(rng.random_range(0.7..1.0), rng.random_range(0.5..0.9), rng.random_range(0.25..0.4));
    let mut mesh = TriangleMesh::cuboid(base_half);
    let top = base_half.z;
    let tower_half = Vec3::new(rng.random_range(0.15..0.3), rng.random_range(0.15..0.3), rng.random_range(0.3..0.5));
    let tower_at = Vec3::new(
        rng.random_range(-0.6..-0.2) * base_half.x,
        rng.random_range(-0.5..0.5) * base_half.y,
        top + tower_half.z,
    );
    mesh = mesh.merged(&TriangleMesh::cuboid(tower_half).translated(tower_at));
    let ball_radius = rng.random_range(0.2..0.3);
    let ball_at = Vec3::new(
        rng.random_range(0.3..0.6) * base_half.x,
        rng.random_range(-0.4..0.4) * base_half.y,
        top + ball_radius,
    );
    mesh = mesh.merged(&TriangleMesh::uv_sphere(ball_radius, 10, 20).translated(ball_at));
    // Recenter vertically so the object is balanced around the origin.
    let (lo, hi) = mesh.vertices().iter().fold((f64::MAX, f64::MIN), |(lo, hi), v| (lo.min(v.z), hi.max(v.z)));
    mesh.translated(Vec3::new(0.0, 0.0, -0.5 * (lo + hi)))
}

fn random_rotation(rng: &mut ChaCha8Rng) -> Rotation3<f64> {
    let axis = loop {
        let v = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let n: f64 = v.norm();
        if n > 0.1 && n <= 1.0 {
            break nalgebra::Unit::new_normalize(v);
        }
    };
    Rotation3::from_axis_angle(&axis, rng.random_range(0.0..std::f64::consts::TAU))
}
