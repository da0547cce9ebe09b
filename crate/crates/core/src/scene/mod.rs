//! Procedural objects, the view sphere and simulated depth sensing.
//!
//! Everything here is a pure function of its arguments. Perceptions come
//! out already expressed in the global frame, with the object centered at
//! the origin.

mod bvh;
pub(crate) mod camera;
mod cloud;
mod mesh;
mod objects;
mod sampling;
mod view;

pub use bvh::MeshBvh;
pub use camera::{depth_to_cloud, render_depth, CameraModel, DepthImage, NO_HIT};
pub use cloud::PointCloud;
pub use mesh::TriangleMesh;
pub use objects::{generate_demo_object, ObjectKind, ObjectSpec, DEFAULT_OBJECT_SCALE};
pub use sampling::sample_surface;
pub use view::{generate_view_sphere, strided_subset, View, ViewSet, ViewSetKind};

pub type Point = nalgebra::Point3<f64>;
pub type Vec3 = nalgebra::Vector3<f64>;
