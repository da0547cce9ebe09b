use super::{Point, TriangleMesh, Vec3};

const LEAF_SIZE: usize = 4;
const PARALLEL_EPS: f64 = 1e-14;

#[derive(Debug, Clone, Copy)]
struct Aabb {
    min: Vec3,
    max: Vec3,
}

impl Aabb {
    fn empty() -> Aabb {
        Aabb { min: Vec3::repeat(f64::INFINITY), max: Vec3::repeat(f64::NEG_INFINITY) }
    }

    fn grow(&mut self, p: &Vec3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    fn merge(&mut self, o: &Aabb) {
        self.min = self.min.inf(&o.min);
        self.max = self.max.sup(&o.max);
    }

    /// Slab test; returns the entry distance when the box is hit before `t_max`.
    fn hit(&self, origin: &Vec3, inv_dir: &Vec3, t_max: f64) -> Option<f64> {
        let mut t0 = 0.0f64;
        let mut t1 = t_max;
        for a in 0..3 {
            let mut near = (self.min[a] - origin[a]) * inv_dir[a];
            let mut far = (self.max[a] - origin[a]) * inv_dir[a];
            if near > far {
                std::mem::swap(&mut near, &mut far);
            }
            // NaN from 0 * inf means the ray lies in the slab plane; keep it.
            if near > t0 {
                t0 = near;
            }
            if far < t1 {
                t1 = far;
            }
            if t0 > t1 {
                return None;
            }
        }
        Some(t0)
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf { bounds: Aabb, start: usize, end: usize },
    Inner { bounds: Aabb, left: usize, right: usize },
}

impl Node {
    fn bounds(&self) -> &Aabb {
        match self {
            Node::Leaf { bounds, .. } | Node::Inner { bounds, .. } => bounds,
        }
    }
}

/// Bounding volume hierarchy for nearest-hit ray queries on a mesh.
#[derive(Debug, Clone)]
pub struct MeshBvh {
    tris: Vec<[Vec3; 3]>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl MeshBvh {
    pub fn build(mesh: &TriangleMesh) -> MeshBvh {
        let tris: Vec<[Vec3; 3]> = (0..mesh.triangles().len())
            .map(|i| {
                let [a, b, c] = mesh.triangle(i);
                [a.coords, b.coords, c.coords]
            })
            .collect();
        let centroids: Vec<Vec3> = tris.iter().map(|t| (t[0] + t[1] + t[2]) / 3.0).collect();
        let mut order: Vec<usize> = (0..tris.len()).collect();
        let mut nodes = Vec::new();
        if !tris.is_empty() {
            build_node(&tris, &centroids, &mut order, 0, tris.len(), &mut nodes);
        }
        MeshBvh { tris, order, nodes }
    }

    pub fn triangle_count(&self) -> usize {
        self.tris.len()
    }

    /// Nearest hit parameter `t` along `origin + t * dir` with `0 < t < t_max`.
    pub fn nearest_hit(&self, origin: &Point, dir: &Vec3, t_max: f64) -> Option<f64> {
        if self.nodes.is_empty() {
            return None;
        }
        let o = origin.coords;
        let inv = Vec3::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);
        let mut best = t_max;
        let mut found = false;
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n];
            match node.bounds().hit(&o, &inv, best) {
                Some(_) => {}
                None => continue,
            }
            match *node {
                Node::Leaf { start, end, .. } => {
                    for &ti in &self.order[start..end] {
                        if let Some(t) = intersect_triangle(&o, dir, &self.tris[ti]) {
                            if t < best {
                                best = t;
                                found = true;
                            }
                        }
                    }
                }
                Node::Inner { left, right, .. } => {
                    stack.push(right);
                    stack.push(left);
                }
            }
        }
        found.then_some(best)
    }
}

fn build_node(
    tris: &[[Vec3; 3]],
    centroids: &[Vec3],
    order: &mut [usize],
    start: usize,
    end: usize,
    nodes: &mut Vec<Node>,
) -> usize {
    let mut bounds = Aabb::empty();
    let mut cbounds = Aabb::empty();
    for &i in &order[start..end] {
        for v in &tris[i] {
            bounds.grow(v);
        }
        cbounds.grow(&centroids[i]);
    }
    let id = nodes.len();
    if end - start <= LEAF_SIZE {
        nodes.push(Node::Leaf { bounds, start, end });
        return id;
    }
    let extent = cbounds.max - cbounds.min;
    let axis = extent.imax();
    let mid = (start + end) / 2;
    order[start..end].sort_by(|&a, &b| centroids[a][axis].total_cmp(&centroids[b][axis]).then(a.cmp(&b)));
    nodes.push(Node::Leaf { bounds, start, end });
    let left = build_node(tris, centroids, order, start, mid, nodes);
    let right = build_node(tris, centroids, order, mid, end, nodes);
    let mut merged = *nodes[left].bounds();
    merged.merge(nodes[right].bounds());
    nodes[id] = Node::Inner { bounds: merged, left, right };
    id
}

/// Möller–Trumbore; both faces count as hits.
pub(crate) fn intersect_triangle(origin: &Vec3, dir: &Vec3, tri: &[Vec3; 3]) -> Option<f64> {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let p = dir.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < PARALLEL_EPS {
        return None;
    }
    let inv_det = 1.0 / det;
    let s = origin - tri[0];
    let u = s.dot(&p) * inv_det;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = dir.dot(&q) * inv_det;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(&q) * inv_det;
    (t > 0.0).then_some(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force(mesh: &TriangleMesh, o: &Point, d: &Vec3) -> Option<f64> {
        (0..mesh.triangles().len())
            .filter_map(|i| {
                let [a, b, c] = mesh.triangle(i);
                intersect_triangle(&o.coords, d, &[a.coords, b.coords, c.coords])
            })
            .min_by(f64::total_cmp)
    }

    #[test]
    fn matches_brute_force() {
        let mesh = super::super::generate_demo_object(super::super::ObjectKind::Composite, 3, 0.2).unwrap();
        let bvh = MeshBvh::build(&mesh);
        let o = Point::new(0.05, -0.4, 0.3);
        for i in 0..400 {
            let a = i as f64 * 0.37;
            let d = Vec3::new(0.3 * a.cos(), 1.0, -0.7 + 0.4 * a.sin());
            let expect = brute_force(&mesh, &o, &d);
            assert_eq!(bvh.nearest_hit(&o, &d, f64::INFINITY), expect, "ray {i}");
        }
    }

    #[test]
    fn axis_aligned_rays() {
        let mesh = TriangleMesh::cuboid(Vec3::new(0.1, 0.1, 0.1));
        let bvh = MeshBvh::build(&mesh);
        let t = bvh.nearest_hit(&Point::new(0.0, 0.0, 1.0), &-Vec3::z(), 10.0).unwrap();
        assert!((t - 0.9).abs() < 1e-12);
        assert!(bvh.nearest_hit(&Point::new(0.0, 0.0, 1.0), &Vec3::z(), 10.0).is_none());
    }
}
