//! Free-form deformation with a trivariate Bernstein (Bézier) control lattice.
//!
//! A point with normalized lattice coordinates `(u, v, w)` moves by
//!
//! ```text
//! p' = p + Σ_ijk Δ_ijk · B_l,i(u) B_m,j(v) B_n,k(w)
//! ```
//!
//! which equals the weighted sum of displaced control points because a uniform
//! Bézier net reproduces the identity map. The per-point weights are also the
//! Jacobian of `p'` with respect to the offsets, so the gradient of a loss with
//! respect to `Δ` is the weight-transposed point gradient.

use alloc::vec;
use alloc::vec::Vec;

use crate::geometry::PointCloud;
use crate::{math, Aabb, Error, Result, Vec3};

/// Control points per axis minus one; 3 gives a 4×4×4 lattice.
pub const DEFAULT_DEGREE: usize = 3;

/// Fraction of the template bounds added on every side of the lattice domain.
pub const DEFAULT_DOMAIN_PADDING: f64 = 0.05;

/// `C(n, k)` as a float; exact for every degree the lattice can use.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// Bernstein basis polynomial `B_{degree,index}(x) = C(degree, index) (1-x)^(degree-index) x^index`.
pub fn bernstein(degree: usize, index: usize, x: f64) -> Result<f64> {
    if index > degree {
        return Err(Error::InvalidArgument(alloc::format!(
            "bernstein index {index} exceeds degree {degree}"
        )));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::InvalidArgument(alloc::format!("bernstein argument {x} outside [0, 1]")));
    }
    Ok(bernstein_unchecked(degree, index, x))
}

#[inline]
fn bernstein_unchecked(degree: usize, index: usize, x: f64) -> f64 {
    binomial(degree, index) * math::powi(1.0 - x, degree - index) * math::powi(x, index)
}

/// Fills `out[0..=degree]` with every basis value at `x`.
fn bernstein_all(degree: usize, x: f64, out: &mut [f64]) {
    for (i, slot) in out.iter_mut().enumerate().take(degree + 1) {
        *slot = bernstein_unchecked(degree, i, x);
    }
}

/// A uniform control grid of `(l+1)(m+1)(n+1)` points spanning `domain`.
///
/// Control points are indexed `(i * (m+1) + j) * (n+1) + k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlLattice {
    degrees: [usize; 3],
    domain: Aabb,
}

impl ControlLattice {
    pub fn new(degrees: [usize; 3], domain: Aabb) -> Result<Self> {
        if degrees.iter().any(|&d| d < 1) {
            return Err(Error::InvalidArgument("lattice degrees must be at least 1".into()));
        }
        if degrees.iter().any(|&d| d > 30) {
            return Err(Error::InvalidArgument("lattice degrees above 30 are not supported".into()));
        }
        if !domain.is_finite() || (0..3).any(|a| !(domain.size()[a] > 0.0)) {
            return Err(Error::InvalidArgument("lattice domain must have positive extent".into()));
        }
        let lattice = ControlLattice { degrees, domain };
        let residual = lattice.linear_precision_residual();
        if residual > 1e-9 * domain.diagonal() {
            return Err(Error::InvalidArgument(alloc::format!(
                "lattice fails to reproduce the identity map (residual {residual})"
            )));
        }
        Ok(lattice)
    }

    /// Lattice over `pc`'s bounds padded by `padding` of the extent on each side.
    pub fn around(pc: &PointCloud, degrees: [usize; 3], padding: f64) -> Result<Self> {
        ControlLattice::new(degrees, pc.bounds().padded(padding))
    }

    /// The default 4×4×4 lattice around a template with 5% padding.
    pub fn default_for(pc: &PointCloud) -> Result<Self> {
        ControlLattice::around(pc, [DEFAULT_DEGREE; 3], DEFAULT_DOMAIN_PADDING)
    }

    pub fn degrees(&self) -> [usize; 3] {
        self.degrees
    }

    pub fn domain(&self) -> Aabb {
        self.domain
    }

    pub fn control_count(&self) -> usize {
        self.degrees.iter().map(|d| d + 1).product()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        let [_, m, n] = self.degrees;
        (i * (m + 1) + j) * (n + 1) + k
    }

    #[inline]
    pub fn ijk(&self, index: usize) -> [usize; 3] {
        let [_, m, n] = self.degrees;
        let k = index % (n + 1);
        let j = (index / (n + 1)) % (m + 1);
        let i = index / ((n + 1) * (m + 1));
        [i, j, k]
    }

    /// Rest position `min + (i/l, j/m, k/n) ⊙ size` of a control point.
    pub fn rest_position(&self, index: usize) -> Vec3 {
        let [i, j, k] = self.ijk(index);
        let [l, m, n] = self.degrees;
        let t = Vec3::new(i as f64 / l as f64, j as f64 / m as f64, k as f64 / n as f64);
        self.domain.min + t.mul_elem(self.domain.size())
    }

    pub fn rest_positions(&self) -> Vec<Vec3> {
        (0..self.control_count()).map(|c| self.rest_position(c)).collect()
    }

    /// Normalized `(u, v, w)` of `p`, clamped to the unit cube, and whether clamping happened.
    pub fn normalized(&self, p: Vec3) -> (Vec3, bool) {
        let size = self.domain.size();
        let mut uvw = Vec3::ZERO;
        let mut clamped = false;
        for axis in 0..3 {
            let t = (p[axis] - self.domain.min[axis]) / size[axis];
            uvw[axis] = if t < 0.0 {
                clamped = true;
                0.0
            } else if t > 1.0 {
                clamped = true;
                1.0
            } else {
                t
            };
        }
        (uvw, clamped)
    }

    /// Weights of every control point at normalized coordinates `uvw`.
    fn weight_row(&self, uvw: Vec3, out: &mut [f64]) {
        let [l, m, n] = self.degrees;
        let mut bu = [0.0; 31];
        let mut bv = [0.0; 31];
        let mut bw = [0.0; 31];
        bernstein_all(l, uvw.x, &mut bu);
        bernstein_all(m, uvw.y, &mut bv);
        bernstein_all(n, uvw.z, &mut bw);
        let mut c = 0;
        for &wu in &bu[..=l] {
            for &wv in &bv[..=m] {
                let wuv = wu * wv;
                for &ww in &bw[..=n] {
                    out[c] = wuv * ww;
                    c += 1;
                }
            }
        }
    }

    /// Largest distance between a probe point and the weighted sum of rest
    /// positions at that point.
    pub fn linear_precision_residual(&self) -> f64 {
        const PROBES: [f64; 5] = [0.0, 0.21, 0.5, 0.77, 1.0];
        let rest = self.rest_positions();
        let mut row = vec![0.0; self.control_count()];
        let mut worst: f64 = 0.0;
        for &u in &PROBES {
            for &v in &PROBES {
                for &w in &PROBES {
                    let uvw = Vec3::new(u, v, w);
                    self.weight_row(uvw, &mut row);
                    let p = self.domain.min + uvw.mul_elem(self.domain.size());
                    let image = rest
                        .iter()
                        .zip(&row)
                        .fold(Vec3::ZERO, |acc, (&r, &wt)| acc + r * wt);
                    worst = worst.max(image.distance(p));
                }
            }
        }
        worst
    }
}

/// One offset per control point of a lattice with the given degrees.
#[derive(Debug, Clone, PartialEq)]
pub struct DeformationField {
    degrees: [usize; 3],
    offsets: Vec<Vec3>,
}

impl DeformationField {
    pub fn zeros(lattice: &ControlLattice) -> Self {
        DeformationField { degrees: lattice.degrees, offsets: vec![Vec3::ZERO; lattice.control_count()] }
    }

    pub fn constant(lattice: &ControlLattice, offset: Vec3) -> Self {
        DeformationField { degrees: lattice.degrees, offsets: vec![offset; lattice.control_count()] }
    }

    pub fn from_offsets(degrees: [usize; 3], offsets: Vec<Vec3>) -> Result<Self> {
        let expected: usize = degrees.iter().map(|d| d + 1).product();
        if offsets.len() != expected {
            return Err(Error::SizeMismatch {
                what: "deformation field offsets",
                expected,
                found: offsets.len(),
            });
        }
        if !offsets.iter().all(|o| o.is_finite()) {
            return Err(Error::NonFinite("deformation field"));
        }
        Ok(DeformationField { degrees, offsets })
    }

    pub fn degrees(&self) -> [usize; 3] {
        self.degrees
    }

    pub fn offsets(&self) -> &[Vec3] {
        &self.offsets
    }

    pub fn offsets_mut(&mut self) -> &mut [Vec3] {
        &mut self.offsets
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn scaled(&self, s: f64) -> DeformationField {
        DeformationField { degrees: self.degrees, offsets: self.offsets.iter().map(|&o| o * s).collect() }
    }

    /// `self * a + other * b`; both fields must share degrees.
    pub fn combine(&self, a: f64, other: &DeformationField, b: f64) -> Result<DeformationField> {
        if self.degrees != other.degrees {
            return Err(Error::SizeMismatch {
                what: "deformation field degrees",
                expected: self.offsets.len(),
                found: other.offsets.len(),
            });
        }
        let offsets = self.offsets.iter().zip(&other.offsets).map(|(&x, &y)| x * a + y * b).collect();
        Ok(DeformationField { degrees: self.degrees, offsets })
    }

    /// Fails unless the field has one offset per control point of `lattice`.
    pub fn check(&self, lattice: &ControlLattice) -> Result<()> {
        if self.degrees != lattice.degrees || self.offsets.len() != lattice.control_count() {
            return Err(Error::SizeMismatch {
                what: "deformation field vs lattice",
                expected: lattice.control_count(),
                found: self.offsets.len(),
            });
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.offsets.iter().map(|o| o.max_abs()).fold(0.0, f64::max)
    }
}

/// Dense per-point rows of control-point weights, plus the normalized
/// coordinates they were evaluated at.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightTensor {
    controls: usize,
    weights: Vec<f64>,
    coords: Vec<Vec3>,
    clamped: usize,
}

impl WeightTensor {
    pub fn point_count(&self) -> usize {
        self.coords.len()
    }

    pub fn control_count(&self) -> usize {
        self.controls
    }

    #[inline]
    pub fn row(&self, point: usize) -> &[f64] {
        &self.weights[point * self.controls..(point + 1) * self.controls]
    }

    pub fn coords(&self) -> &[Vec3] {
        &self.coords
    }

    /// Number of points whose coordinates were clamped into the lattice domain.
    pub fn clamped_count(&self) -> usize {
        self.clamped
    }

    /// Per-point displacement `Σ_c w_{a,c} Δ_c`.
    pub fn displacements(&self, field: &DeformationField) -> Result<Vec<Vec3>> {
        if field.offsets.len() != self.controls {
            return Err(Error::SizeMismatch {
                what: "deformation field vs weights",
                expected: self.controls,
                found: field.offsets.len(),
            });
        }
        Ok((0..self.point_count())
            .map(|a| {
                self.row(a)
                    .iter()
                    .zip(&field.offsets)
                    .fold(Vec3::ZERO, |acc, (&w, &o)| acc + o * w)
            })
            .collect())
    }
}

/// Evaluates the Bernstein weights of every point. Points outside the lattice
/// domain are clamped onto it and counted.
pub fn compute_weights(lattice: &ControlLattice, pc: &PointCloud) -> WeightTensor {
    let controls = lattice.control_count();
    let mut weights = vec![0.0; controls * pc.len()];
    let mut coords = Vec::with_capacity(pc.len());
    let mut clamped = 0;
    for (a, &p) in pc.points().iter().enumerate() {
        let (uvw, was_clamped) = lattice.normalized(p);
        clamped += usize::from(was_clamped);
        lattice.weight_row(uvw, &mut weights[a * controls..(a + 1) * controls]);
        coords.push(uvw);
    }
    WeightTensor { controls, weights, coords, clamped }
}

/// Moves each point by the weighted control offsets: `p' = p + Σ Δ_c w_c`.
pub fn deform_with_weights(
    weights: &WeightTensor,
    field: &DeformationField,
    pc: &PointCloud,
) -> Result<PointCloud> {
    if weights.point_count() != pc.len() {
        return Err(Error::SizeMismatch {
            what: "weights vs point cloud",
            expected: weights.point_count(),
            found: pc.len(),
        });
    }
    let disp = weights.displacements(field)?;
    PointCloud::new(pc.points().iter().zip(disp).map(|(&p, d)| p + d).collect())
}

pub fn deform(lattice: &ControlLattice, field: &DeformationField, pc: &PointCloud) -> Result<PointCloud> {
    field.check(lattice)?;
    deform_with_weights(&compute_weights(lattice, pc), field, pc)
}

/// The literal control-point form `Σ (p_c + Δ_c) w_c`. Inside the domain it
/// agrees with [`deform`]; outside, it maps points onto the clamped boundary.
pub fn deform_via_control_points(
    lattice: &ControlLattice,
    field: &DeformationField,
    pc: &PointCloud,
) -> Result<PointCloud> {
    field.check(lattice)?;
    let rest = lattice.rest_positions();
    let weights = compute_weights(lattice, pc);
    let points = (0..pc.len())
        .map(|a| {
            weights
                .row(a)
                .iter()
                .zip(rest.iter().zip(&field.offsets))
                .fold(Vec3::ZERO, |acc, (&w, (&r, &o))| acc + (r + o) * w)
        })
        .collect();
    PointCloud::new(points)
}

/// Chain rule through the deformation: `∂L/∂Δ_c = Σ_a w_{a,c} ∂L/∂p'_a`.
///
/// Sums run over points in index order for every control point, so results are
/// bitwise reproducible.
pub fn backprop_offsets(weights: &WeightTensor, grad_points: &[Vec3]) -> Result<Vec<Vec3>> {
    if grad_points.len() != weights.point_count() {
        return Err(Error::SizeMismatch {
            what: "point gradients vs weights",
            expected: weights.point_count(),
            found: grad_points.len(),
        });
    }
    let mut grad = vec![Vec3::ZERO; weights.controls];
    for (a, &g) in grad_points.iter().enumerate() {
        for (acc, &w) in grad.iter_mut().zip(weights.row(a)) {
            *acc += g * w;
        }
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{resample, seeded_rng};
    use rand::Rng;

    fn unit_lattice(d: usize) -> ControlLattice {
        ControlLattice::new([d; 3], Aabb::new(Vec3::ZERO, Vec3::splat(1.0))).unwrap()
    }

    fn random_cloud(n: usize, seed: u64, lo: f64, hi: f64) -> PointCloud {
        let mut rng = seeded_rng(seed);
        PointCloud::new(
            (0..n)
                .map(|_| {
                    Vec3::new(
                        rng.random_range(lo..hi),
                        rng.random_range(lo..hi),
                        rng.random_range(lo..hi),
                    )
                })
                .collect(),
        )
        .unwrap()
    }

    fn random_field(lattice: &ControlLattice, seed: u64, amp: f64) -> DeformationField {
        let mut rng = seeded_rng(seed);
        let offsets = (0..lattice.control_count())
            .map(|_| {
                Vec3::new(
                    rng.random_range(-amp..amp),
                    rng.random_range(-amp..amp),
                    rng.random_range(-amp..amp),
                )
            })
            .collect();
        DeformationField::from_offsets(lattice.degrees(), offsets).unwrap()
    }

    #[test]
    fn bernstein_values() {
        assert_eq!(bernstein(3, 0, 0.0).unwrap(), 1.0);
        assert!((bernstein(3, 1, 0.5).unwrap() - 0.375).abs() < 1e-15);
        let sum: f64 = (0..=3).map(|m| bernstein(3, m, 0.7).unwrap()).sum();
        assert!((sum - 1.0).abs() < 1e-15);
        assert!(bernstein(3, 4, 0.5).is_err());
        assert!(bernstein(3, 1, 1.5).is_err());
        assert_eq!(binomial(6, 3), 20.0);
    }

    #[test]
    fn lattice_rest_positions_are_uniform() {
        let dom = Aabb::new(Vec3::new(-1.0, 0.0, 2.0), Vec3::new(1.0, 3.0, 6.0));
        let lat = ControlLattice::new([2, 3, 4], dom).unwrap();
        assert_eq!(lat.control_count(), 3 * 4 * 5);
        for c in 0..lat.control_count() {
            let [i, j, k] = lat.ijk(c);
            assert_eq!(lat.index(i, j, k), c);
            let expect = Vec3::new(-1.0 + i as f64, j as f64, 2.0 + k as f64);
            assert!(lat.rest_position(c).distance(expect) < 1e-12);
        }
        assert!(ControlLattice::new([0, 1, 1], dom).is_err());
        assert!(ControlLattice::new([1, 1, 1], Aabb::new(Vec3::ZERO, Vec3::new(1.0, 0.0, 1.0))).is_err());
    }

    #[test]
    fn weights_at_corner_and_center() {
        let lat = unit_lattice(3);
        let pc = PointCloud::new(vec![Vec3::ZERO]).unwrap();
        let w = compute_weights(&lat, &pc);
        assert_eq!(w.row(0)[0], 1.0);
        assert!(w.row(0)[1..].iter().all(|&x| x == 0.0));

        let lat1 = unit_lattice(1);
        let pc = PointCloud::new(vec![Vec3::splat(0.5)]).unwrap();
        let w = compute_weights(&lat1, &pc);
        assert!(w.row(0).iter().all(|&x| (x - 0.125).abs() < 1e-15));
    }

    #[test]
    fn weights_partition_unity_and_clamp() {
        let lat = unit_lattice(3);
        let pc = random_cloud(200, 1, -0.3, 1.3);
        let w = compute_weights(&lat, &pc);
        assert!(w.clamped_count() > 0);
        for a in 0..pc.len() {
            let row = w.row(a);
            assert!(row.iter().all(|&x| (0.0..=1.0).contains(&x)));
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        let inside = random_cloud(50, 2, 0.0, 1.0);
        assert_eq!(compute_weights(&lat, &inside).clamped_count(), 0);
    }

    #[test]
    fn deform_examples() {
        let lat = unit_lattice(3);
        let pc = random_cloud(100, 3, 0.0, 1.0);
        let id = deform(&lat, &DeformationField::zeros(&lat), &pc).unwrap();
        assert_eq!(id, pc);

        let t = Vec3::new(0.1, 0.0, 0.0);
        let moved = deform(&lat, &DeformationField::constant(&lat, t), &pc).unwrap();
        for (a, b) in moved.points().iter().zip(pc.points()) {
            assert!((*a - *b - t).max_abs() < 1e-9);
        }

        let f = random_field(&lat, 4, 0.2);
        let d1 = deform(&lat, &f, &pc).unwrap();
        let d2 = deform(&lat, &f.scaled(2.0), &pc).unwrap();
        for ((a, b), p) in d1.points().iter().zip(d2.points()).zip(pc.points()) {
            assert!(((*b - *p) - (*a - *p) * 2.0).max_abs() < 1e-12);
        }

        let wrong = DeformationField::zeros(&unit_lattice(2));
        assert!(matches!(deform(&lat, &wrong, &pc), Err(Error::SizeMismatch { .. })));
    }

    #[test]
    fn identity_plus_offsets_matches_control_point_form() {
        let dom = Aabb::new(Vec3::new(-0.5, 0.2, -1.0), Vec3::new(0.7, 1.4, 0.3));
        for degree in 1..=5 {
            let lat = ControlLattice::new([degree, degree.max(2) - 1, 3], dom).unwrap();
            let field = random_field(&lat, degree as u64, 0.3);
            let pc = PointCloud::new(
                random_cloud(64, 10 + degree as u64, 0.0, 1.0)
                    .points()
                    .iter()
                    .map(|t| dom.min + t.mul_elem(dom.size()))
                    .collect(),
            )
            .unwrap();
            let a = deform(&lat, &field, &pc).unwrap();
            let b = deform_via_control_points(&lat, &field, &pc).unwrap();
            for (x, y) in a.points().iter().zip(b.points()) {
                assert!(x.distance(*y) < 1e-12, "degree {degree}");
            }
        }
    }

    #[test]
    fn backprop_examples() {
        let lat = unit_lattice(3);
        let pc = random_cloud(20, 5, 0.0, 1.0);
        let w = compute_weights(&lat, &pc);
        let g = backprop_offsets(&w, &vec![Vec3::ZERO; 20]).unwrap();
        assert!(g.iter().all(|v| *v == Vec3::ZERO));

        let corner = PointCloud::new(vec![Vec3::ZERO]).unwrap();
        let wc = compute_weights(&lat, &corner);
        let g = backprop_offsets(&wc, &[Vec3::new(1.0, 0.0, 0.0)]).unwrap();
        assert_eq!(g[0], Vec3::new(1.0, 0.0, 0.0));
        assert!(g[1..].iter().all(|v| *v == Vec3::ZERO));

        assert!(backprop_offsets(&w, &[Vec3::ZERO]).is_err());
    }

    /// Central differences of L = Σ_a c_a · p'_a against the analytic gradient.
    #[test]
    fn backprop_matches_finite_differences() {
        let h = 1e-5;
        for trial in 0..100u64 {
            let lat = unit_lattice(1 + (trial as usize % 3));
            let pc = random_cloud(20, 100 + trial, 0.0, 1.0);
            let mut rng = seeded_rng(500 + trial);
            let coeffs: Vec<Vec3> = (0..20)
                .map(|_| Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            let field = random_field(&lat, 900 + trial, 0.1);
            let loss = |f: &DeformationField| -> f64 {
                let out = deform(&lat, f, &pc).unwrap();
                out.points().iter().zip(&coeffs).map(|(p, c)| p.dot(*c)).sum()
            };
            let analytic = backprop_offsets(&compute_weights(&lat, &pc), &coeffs).unwrap();
            for c in 0..lat.control_count() {
                for axis in 0..3 {
                    let mut plus = field.clone();
                    plus.offsets_mut()[c][axis] += h;
                    let mut minus = field.clone();
                    minus.offsets_mut()[c][axis] -= h;
                    let numeric = (loss(&plus) - loss(&minus)) / (2.0 * h);
                    let a = analytic[c][axis];
                    let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-3);
                    assert!(rel < 1e-6, "trial {trial} control {c} axis {axis}: {a} vs {numeric}");
                }
            }
        }
    }

    #[test]
    fn same_field_applies_consistently_to_any_density() {
        let lat = unit_lattice(3);
        let dense = random_cloud(16384, 8, 0.05, 0.95);
        let sparse = resample(&dense, 1024, 3).unwrap();
        let field = random_field(&lat, 12, 0.15);
        let dd = deform(&lat, &field, &dense).unwrap();
        let ds = deform(&lat, &field, &sparse).unwrap();
        let directed = |from: &PointCloud, to: &PointCloud| -> f64 {
            from.points()
                .iter()
                .map(|p| to.points().iter().map(|q| p.distance(*q)).fold(f64::INFINITY, f64::min))
                .fold(0.0, f64::max)
        };
        let before = directed(&sparse, &dense);
        let after = directed(&ds, &dd);
        assert!(after <= before + 1e-9, "{after} vs {before}");
    }
}
