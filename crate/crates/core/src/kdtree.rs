//! Exact 3D k-d tree with median splits.
//!
//! Nearest-neighbor queries return the same answer as a linear scan, including
//! the tie-break: among equidistant points the lowest index wins.

use alloc::vec::Vec;

use crate::Vec3;

const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Vec3>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl KdTree {
    pub fn new(points: &[Vec3]) -> Self {
        let mut tree = KdTree {
            points: points.to_vec(),
            order: (0..points.len()).collect(),
            nodes: Vec::with_capacity(2 * points.len() / LEAF_SIZE + 1),
        };
        if !points.is_empty() {
            tree.build(0, points.len());
        }
        tree
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let slice = &self.order[start..end];
        let (lo, hi) = slice.iter().fold(
            (self.points[slice[0]], self.points[slice[0]]),
            |(lo, hi), &i| (lo.min(self.points[i]), hi.max(self.points[i])),
        );
        let spread = hi - lo;
        let axis = if spread.x >= spread.y && spread.x >= spread.z {
            0
        } else if spread.y >= spread.z {
            1
        } else {
            2
        };
        let mid = (end - start) / 2;
        let points = &self.points;
        self.order[start..end].select_nth_unstable_by(mid, |&a, &b| {
            points[a][axis].total_cmp(&points[b][axis]).then(a.cmp(&b))
        });
        let value = self.points[self.order[start + mid]][axis];
        self.nodes.push(Node::Split { axis, value, left: 0, right: 0 });
        let left = self.build(start, start + mid);
        let right = self.build(start + mid, end);
        self.nodes[id] = Node::Split { axis, value, left, right };
        id
    }

    /// Index and squared distance of the point nearest to `query`.
    ///
    /// Returns `None` only for an empty tree.
    pub fn nearest(&self, query: Vec3) -> Option<(usize, f64)> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = (usize::MAX, f64::INFINITY);
        self.search(0, query, &mut best);
        Some(best)
    }

    fn search(&self, node: usize, q: Vec3, best: &mut (usize, f64)) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let d = q.distance_squared(self.points[i]);
                    if d < best.1 || (d == best.1 && i < best.0) {
                        *best = (i, d);
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, best);
                // Equality still descends: an equidistant point with a lower index may be there.
                if diff * diff <= best.1 {
                    self.search(far, q, best);
                }
            }
        }
    }
}

/// Linear-scan nearest neighbor with the lowest-index tie-break.
pub fn nearest_brute(points: &[Vec3], query: Vec3) -> Option<(usize, f64)> {
    points.iter().enumerate().fold(None, |best, (i, &p)| {
        let d = query.distance_squared(p);
        match best {
            Some((_, bd)) if d >= bd => best,
            _ => Some((i, d)),
        }
    })
}
