//! Point-set distances.
//!
//! Chamfer distance sums *squared* nearest-neighbor distances in both
//! directions; Earth Mover's distance sums *unsquared* distances under the best
//! bijection. Both conventions are kept exactly as defined.

use alloc::vec;
use alloc::vec::Vec;

use crate::geometry::PointCloud;
use crate::kdtree::{nearest_brute, KdTree};
use crate::{Error, Result, Vec3};

/// The two directed halves of a Chamfer distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChamferValue {
    /// `Σ_{p1∈S1} min_{p2} ||p1 − p2||²`
    pub forward: f64,
    /// `Σ_{p2∈S2} min_{p1} ||p1 − p2||²`
    pub backward: f64,
    pub len1: usize,
    pub len2: usize,
}

impl ChamferValue {
    pub fn sum(&self) -> f64 {
        self.forward + self.backward
    }

    /// Each direction averaged over its own point count, then added.
    pub fn mean_per_direction(&self) -> f64 {
        self.forward / self.len1 as f64 + self.backward / self.len2 as f64
    }

    /// The sum divided by the total number of points in both clouds.
    pub fn mean_over_all(&self) -> f64 {
        self.sum() / (self.len1 + self.len2) as f64
    }
}

/// Brute-force Chamfer terms.
pub fn chamfer_terms(s1: &PointCloud, s2: &PointCloud) -> ChamferValue {
    let directed = |a: &[Vec3], b: &[Vec3]| -> f64 {
        a.iter().map(|&p| nearest_brute(b, p).map_or(0.0, |(_, d)| d)).sum()
    };
    ChamferValue {
        forward: directed(s1.points(), s2.points()),
        backward: directed(s2.points(), s1.points()),
        len1: s1.len(),
        len2: s2.len(),
    }
}

/// Chamfer distance by linear scan.
pub fn chamfer(s1: &PointCloud, s2: &PointCloud) -> f64 {
    chamfer_terms(s1, s2).sum()
}

/// Chamfer terms with exact k-d tree nearest-neighbor queries.
pub fn chamfer_fast_terms(s1: &PointCloud, s2: &PointCloud) -> ChamferValue {
    let t1 = KdTree::new(s1.points());
    let t2 = KdTree::new(s2.points());
    let directed = |a: &[Vec3], tree: &KdTree| -> f64 {
        a.iter().map(|&p| tree.nearest(p).map_or(0.0, |(_, d)| d)).sum()
    };
    ChamferValue {
        forward: directed(s1.points(), &t2),
        backward: directed(s2.points(), &t1),
        len1: s1.len(),
        len2: s2.len(),
    }
}

pub fn chamfer_fast(s1: &PointCloud, s2: &PointCloud) -> f64 {
    chamfer_fast_terms(s1, s2).sum()
}

/// Gradient of the Chamfer sum with respect to the points of `s1`, by linear scan.
///
/// Nearest-neighbor ties go to the lowest index.
pub fn chamfer_grad(s1: &PointCloud, s2: &PointCloud) -> Vec<Vec3> {
    let mut grad = vec![Vec3::ZERO; s1.len()];
    for (a, &p) in s1.points().iter().enumerate() {
        let (j, _) = nearest_brute(s2.points(), p).expect("nonempty");
        grad[a] += (p - s2.points()[j]) * 2.0;
    }
    for &q in s2.points() {
        let (i, _) = nearest_brute(s1.points(), q).expect("nonempty");
        grad[i] += (s1.points()[i] - q) * 2.0;
    }
    grad
}

/// A fixed Chamfer target with a prebuilt spatial index, for repeated
/// evaluation against a moving cloud.
#[derive(Debug, Clone)]
pub struct ChamferTarget {
    points: Vec<Vec3>,
    tree: KdTree,
}

impl ChamferTarget {
    pub fn new(target: &PointCloud) -> Self {
        ChamferTarget { points: target.points().to_vec(), tree: KdTree::new(target.points()) }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Chamfer terms between `source` and the target, and the gradient of the
    /// Chamfer sum with respect to the source points.
    pub fn eval_with_grad(&self, source: &[Vec3]) -> Result<(ChamferValue, Vec<Vec3>)> {
        self.eval_weighted(source, 1.0, 1.0)
    }

    /// Like [`ChamferTarget::eval_with_grad`], but the gradient is of
    /// [`ChamferValue::mean_per_direction`].
    pub fn eval_mean_with_grad(&self, source: &[Vec3]) -> Result<(ChamferValue, Vec<Vec3>)> {
        let fw = 1.0 / source.len().max(1) as f64;
        let bw = 1.0 / self.points.len() as f64;
        self.eval_weighted(source, fw, bw)
    }

    /// Gradient of `forward_weight · forward + backward_weight · backward`.
    fn eval_weighted(&self, source: &[Vec3], forward_weight: f64, backward_weight: f64) -> Result<(ChamferValue, Vec<Vec3>)> {
        if source.is_empty() {
            return Err(Error::EmptyCloud);
        }
        let mut grad = vec![Vec3::ZERO; source.len()];
        let mut forward = 0.0;
        for (a, &p) in source.iter().enumerate() {
            let (j, d) = self.tree.nearest(p).expect("nonempty target");
            forward += d;
            grad[a] += (p - self.points[j]) * (2.0 * forward_weight);
        }
        let source_tree = KdTree::new(source);
        let mut backward = 0.0;
        for &q in &self.points {
            let (i, d) = source_tree.nearest(q).expect("nonempty source");
            backward += d;
            grad[i] += (source[i] - q) * (2.0 * backward_weight);
        }
        let value = ChamferValue { forward, backward, len1: source.len(), len2: self.points.len() };
        Ok((value, grad))
    }
}

/// A bijection from the points of one cloud to the points of another, with
/// its total (unsquared) distance.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    mapping: Vec<usize>,
    cost: f64,
}

impl Assignment {
    /// Validates `mapping` as a bijection between `s1` and `s2` and computes its cost.
    pub fn new(mapping: Vec<usize>, s1: &PointCloud, s2: &PointCloud) -> Result<Self> {
        check_bijection(&mapping, s1.len(), s2.len())?;
        let cost = assignment_cost(&mapping, s1.points(), s2.points());
        Ok(Assignment { mapping, cost })
    }

    pub fn identity(n: usize, s1: &PointCloud, s2: &PointCloud) -> Result<Self> {
        Assignment::new((0..n).collect(), s1, s2)
    }

    pub fn mapping(&self) -> &[usize] {
        &self.mapping
    }

    pub fn cost(&self) -> f64 {
        self.cost
    }

    pub fn len(&self) -> usize {
        self.mapping.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mapping.is_empty()
    }
}

fn check_bijection(mapping: &[usize], n1: usize, n2: usize) -> Result<()> {
    if mapping.len() != n1 || n1 != n2 {
        return Err(Error::InvalidAssignment(alloc::format!(
            "mapping of length {} between clouds of sizes {n1} and {n2}",
            mapping.len()
        )));
    }
    let mut used = vec![false; n2];
    for (i, &j) in mapping.iter().enumerate() {
        if j >= n2 {
            return Err(Error::InvalidAssignment(alloc::format!("index {i} maps to {j}, out of range")));
        }
        if core::mem::replace(&mut used[j], true) {
            return Err(Error::InvalidAssignment(alloc::format!("target {j} used more than once")));
        }
    }
    Ok(())
}

fn assignment_cost(mapping: &[usize], a: &[Vec3], b: &[Vec3]) -> f64 {
    mapping.iter().enumerate().map(|(i, &j)| a[i].distance(b[j])).sum()
}

fn require_equal_sizes(s1: &PointCloud, s2: &PointCloud) -> Result<()> {
    if s1.len() != s2.len() {
        return Err(Error::SizeMismatch { what: "earth mover's distance", expected: s1.len(), found: s2.len() });
    }
    Ok(())
}

/// Minimum-cost perfect matching on a dense `n × n` cost matrix (row-major).
///
/// Shortest augmenting paths with row/column potentials, O(n³). Returns the
/// column assigned to each row.
pub fn hungarian(cost: &[f64], n: usize) -> Vec<usize> {
    assert_eq!(cost.len(), n * n, "cost matrix must be n × n");
    // 1-based bookkeeping; column 0 is the virtual start of each augmenting path.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut min_to = vec![0.0; n + 1];
    let mut used = vec![false; n + 1];
    for row in 1..=n {
        row_of[0] = row;
        let mut col0 = 0;
        min_to.iter_mut().for_each(|m| *m = f64::INFINITY);
        used.iter_mut().for_each(|b| *b = false);
        loop {
            used[col0] = true;
            let r = row_of[col0];
            let mut delta = f64::INFINITY;
            let mut next = 0;
            for col in 1..=n {
                if used[col] {
                    continue;
                }
                let reduced = cost[(r - 1) * n + (col - 1)] - u[r] - v[col];
                if reduced < min_to[col] {
                    min_to[col] = reduced;
                    way[col] = col0;
                }
                if min_to[col] < delta {
                    delta = min_to[col];
                    next = col;
                }
            }
            for col in 0..=n {
                if used[col] {
                    u[row_of[col]] += delta;
                    v[col] -= delta;
                } else {
                    min_to[col] -= delta;
                }
            }
            col0 = next;
            if row_of[col0] == 0 {
                break;
            }
        }
        loop {
            let prev = way[col0];
            row_of[col0] = row_of[prev];
            col0 = prev;
            if col0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for col in 1..=n {
        if row_of[col] != 0 {
            assignment[row_of[col] - 1] = col - 1;
        }
    }
    assignment
}

/// Exact Earth Mover's distance between equal-size clouds via the Hungarian algorithm.
pub fn emd_exact(s1: &PointCloud, s2: &PointCloud) -> Result<Assignment> {
    require_equal_sizes(s1, s2)?;
    let n = s1.len();
    let mut cost = Vec::with_capacity(n * n);
    for &p in s1.points() {
        cost.extend(s2.points().iter().map(|&q| p.distance(q)));
    }
    Assignment::new(hungarian(&cost, n), s1, s2)
}

/// Largest input accepted by [`emd_bruteforce`].
pub const BRUTEFORCE_MAX: usize = 8;

/// Exhaustive minimum over every permutation; a test oracle for `n ≤ 8`.
pub fn emd_bruteforce(s1: &PointCloud, s2: &PointCloud) -> Result<Assignment> {
    require_equal_sizes(s1, s2)?;
    let n = s1.len();
    if n > BRUTEFORCE_MAX {
        return Err(Error::TooLarge { n, max: BRUTEFORCE_MAX });
    }
    let (a, b) = (s1.points(), s2.points());
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = perm.clone();
    let mut best_cost = assignment_cost(&perm, a, b);
    // Heap's algorithm, iterative form.
    let mut c = vec![0usize; n];
    let mut i = 1;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            let cost = assignment_cost(&perm, a, b);
            if cost < best_cost {
                best_cost = cost;
                best.copy_from_slice(&perm);
            }
            c[i] += 1;
            i = 1;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    Assignment::new(best, s1, s2)
}

/// EMD objective under a frozen correspondence, and its gradient with respect
/// to the points of `s1`: the unit vector from each point's partner to the
/// point, or zero where they coincide.
pub fn emd_fixed_correspondence(
    s1: &PointCloud,
    s2: &PointCloud,
    assignment: &Assignment,
) -> Result<(f64, Vec<Vec3>)> {
    check_bijection(&assignment.mapping, s1.len(), s2.len())?;
    Ok(fixed_correspondence_terms(s1.points(), s2.points(), &assignment.mapping))
}

pub(crate) fn fixed_correspondence_terms(a: &[Vec3], b: &[Vec3], mapping: &[usize]) -> (f64, Vec<Vec3>) {
    let mut cost = 0.0;
    let grad = mapping
        .iter()
        .enumerate()
        .map(|(i, &j)| {
            let diff = a[i] - b[j];
            let d = diff.norm();
            cost += d;
            if d > 0.0 {
                diff * (1.0 / d)
            } else {
                Vec3::ZERO
            }
        })
        .collect();
    (cost, grad)
}
