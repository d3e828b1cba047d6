//! Chamfer distance with a kd-tree nearest-neighbour index.

use crate::geom::Vec3;
use crate::par::Exec;

const LEAF: usize = 8;

#[inline]
pub(crate) fn sq_dist(a: &Vec3, b: &Vec3) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

/// Static 3D kd-tree answering exact nearest-neighbour squared distances.
pub struct KdTree {
    points: Vec<Vec3>,
    root: Node,
}

impl KdTree {
    pub fn new(points: &[Vec3]) -> Self {
        let mut points = points.to_vec();
        let n = points.len();
        let root = build(&mut points, 0, n);
        KdTree { points, root }
    }

    /// Smallest squared distance from `q` to any indexed point (infinite when empty).
    pub fn nearest_sq(&self, q: &Vec3) -> f64 {
        let mut best = f64::INFINITY;
        self.search(&self.root, q, &mut best);
        best
    }

    fn search(&self, node: &Node, q: &Vec3, best: &mut f64) {
        match node {
            Node::Leaf { start, end } => {
                for p in &self.points[*start..*end] {
                    let d = sq_dist(p, q);
                    if d < *best {
                        *best = d;
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[*axis] - value;
                let (near, far) = if diff < 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.search(near, q, best);
                if diff * diff <= *best {
                    self.search(far, q, best);
                }
            }
        }
    }
}

fn build(points: &mut [Vec3], start: usize, end: usize) -> Node {
    let slice = &mut points[start..end];
    if slice.len() <= LEAF {
        return Node::Leaf { start, end };
    }
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in slice.iter() {
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let axis = (0..3)
        .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
        .unwrap_or(0);
    let mid = slice.len() / 2;
    slice.select_nth_unstable_by(mid, |a, b| a[axis].total_cmp(&b[axis]));
    let value = slice[mid][axis];
    // Left holds coordinates <= value, right holds >= value.
    Node::Split {
        axis,
        value,
        left: Box::new(build(points, start, start + mid)),
        right: Box::new(build(points, start + mid, end)),
    }
}

/// Mean over `from` of the squared distance to the nearest point of `to`.
pub fn directed_mean_sq(from: &[Vec3], to: &[Vec3], exec: Exec) -> f64 {
    let tree = KdTree::new(to);
    let mins = exec.map(from, |p| tree.nearest_sq(p));
    mins.iter().sum::<f64>() / from.len() as f64
}

/// Symmetric Chamfer distance on raw point slices; both must be non-empty.
pub fn chamfer_points(a: &[Vec3], b: &[Vec3], exec: Exec) -> f64 {
    directed_mean_sq(a, b, exec) + directed_mean_sq(b, a, exec)
}
