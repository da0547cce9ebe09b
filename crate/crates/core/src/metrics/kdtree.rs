use crate::scene::{Point, PointCloud};

const LEAF_SIZE: usize = 12;

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

/// Immutable kd-tree over a cloud's points.
///
/// Queries use the inclusive test `|p - q|² <= r²`.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    points: Vec<Point>,
    /// Leaf-ordered indices into `points`.
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl SpatialIndex {
    pub fn build(cloud: &PointCloud) -> SpatialIndex {
        Self::from_points(cloud.points().to_vec())
    }

    pub fn from_points(points: Vec<Point>) -> SpatialIndex {
        let mut order: Vec<usize> = (0..points.len()).collect();
        let mut nodes = Vec::new();
        if !points.is_empty() {
            build(&points, &mut order, 0, points.len(), &mut nodes);
        }
        SpatialIndex { points, order, nodes }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &Point {
        &self.points[i]
    }

    /// Indices of all points within `radius` of `p`, ascending.
    pub fn radius_query(&self, p: &Point, radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        self.visit(p, radius, &mut |i| {
            out.push(i);
            false
        });
        out.sort_unstable();
        out
    }

    /// Whether any point lies within `radius` of `p`.
    pub fn has_neighbor(&self, p: &Point, radius: f64) -> bool {
        let mut found = false;
        self.visit(p, radius, &mut |_| {
            found = true;
            true
        });
        found
    }

    /// Calls `f` for each point in range; `f` returns true to stop early.
    fn visit(&self, p: &Point, radius: f64, f: &mut impl FnMut(usize) -> bool) {
        if self.nodes.is_empty() {
            return;
        }
        let r2 = radius * radius;
        // Pruning slack keeps the exact inclusive test authoritative.
        let reach = radius * (1.0 + 1e-9) + f64::MIN_POSITIVE;
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            match self.nodes[n] {
                Node::Leaf { start, end } => {
                    for &i in &self.order[start..end] {
                        if (self.points[i] - p).norm_squared() <= r2 && f(i) {
                            return;
                        }
                    }
                }
                Node::Split { axis, value, left, right } => {
                    let d = p[axis] - value;
                    if d <= reach {
                        stack.push(left);
                    }
                    if d >= -reach {
                        stack.push(right);
                    }
                }
            }
        }
    }
}

/// Left subtree holds coordinates `<= value`, right subtree `>= value`.
fn build(points: &[Point], order: &mut [usize], start: usize, end: usize, nodes: &mut Vec<Node>) -> usize {
    let id = nodes.len();
    nodes.push(Node::Leaf { start, end });
    if end - start <= LEAF_SIZE {
        return id;
    }
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for &i in &order[start..end] {
        for a in 0..3 {
            lo[a] = lo[a].min(points[i][a]);
            hi[a] = hi[a].max(points[i][a]);
        }
    }
    let axis = (0..3).max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b]))).unwrap_or(0);
    if hi[axis] - lo[axis] == 0.0 {
        // All points coincide.
        return id;
    }
    let mid = (start + end) / 2;
    order[start..end].select_nth_unstable_by(mid - start, |&a, &b| points[a][axis].total_cmp(&points[b][axis]));
    let value = points[order[mid]][axis];
    let left = build(points, order, start, mid, nodes);
    let right = build(points, order, mid, end, nodes);
    nodes[id] = Node::Split { axis, value, left, right };
    id
}
