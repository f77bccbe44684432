//! Deformation penalties: L1 on point displacements and L2 on differences
//! between axis-adjacent control-point offsets.

use alloc::vec;
use alloc::vec::Vec;

use crate::ffd::{ControlLattice, DeformationField};
use crate::geometry::PointCloud;
use crate::{Error, Result, Vec3};

/// Default weight of the lattice smoothness term.
pub const DEFAULT_LAMBDA_SMOOTH: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularizerWeights {
    pub lambda_smooth: f64,
    pub lambda_l1: f64,
}

impl RegularizerWeights {
    pub fn new(lambda_smooth: f64, lambda_l1: f64) -> Result<Self> {
        for (name, v) in [("lambda_smooth", lambda_smooth), ("lambda_l1", lambda_l1)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidArgument(alloc::format!("{name} must be a finite value ≥ 0")));
            }
        }
        Ok(RegularizerWeights { lambda_smooth, lambda_l1 })
    }
}

impl Default for RegularizerWeights {
    fn default() -> Self {
        RegularizerWeights { lambda_smooth: DEFAULT_LAMBDA_SMOOTH, lambda_l1: 0.0 }
    }
}

#[inline]
fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `Σ_a Σ_axis |deformed − original|` and its subgradient on `deformed`
/// (zero where a component did not move).
pub fn offset_l1(original: &PointCloud, deformed: &PointCloud) -> Result<(f64, Vec<Vec3>)> {
    offset_l1_points(original.points(), deformed.points())
}

pub(crate) fn offset_l1_points(original: &[Vec3], deformed: &[Vec3]) -> Result<(f64, Vec<Vec3>)> {
    if original.len() != deformed.len() {
        return Err(Error::SizeMismatch { what: "offset L1", expected: original.len(), found: deformed.len() });
    }
    let mut total = 0.0;
    let grad = original
        .iter()
        .zip(deformed)
        .map(|(&o, &d)| {
            let diff = d - o;
            total += diff.abs_sum();
            Vec3::new(sign(diff.x), sign(diff.y), sign(diff.z))
        })
        .collect();
    Ok((total, grad))
}

/// Every unordered pair of control points adjacent along one lattice axis.
pub fn lattice_edges(lattice: &ControlLattice) -> Vec<(usize, usize)> {
    let [l, m, n] = lattice.degrees();
    let mut edges = Vec::with_capacity(3 * lattice.control_count());
    for i in 0..=l {
        for j in 0..=m {
            for k in 0..=n {
                let a = lattice.index(i, j, k);
                if i < l {
                    edges.push((a, lattice.index(i + 1, j, k)));
                }
                if j < m {
                    edges.push((a, lattice.index(i, j + 1, k)));
                }
                if k < n {
                    edges.push((a, lattice.index(i, j, k + 1)));
                }
            }
        }
    }
    edges
}

/// `Σ_edges ||Δ_a − Δ_b||²` over the 6-neighborhood, with its gradient per offset.
pub fn lattice_smoothness(field: &DeformationField, lattice: &ControlLattice) -> Result<(f64, Vec<Vec3>)> {
    field.check(lattice)?;
    let offsets = field.offsets();
    let mut grad = vec![Vec3::ZERO; offsets.len()];
    let mut total = 0.0;
    for (a, b) in lattice_edges(lattice) {
        let diff = offsets[a] - offsets[b];
        total += diff.norm_squared();
        grad[a] += diff * 2.0;
        grad[b] -= diff * 2.0;
    }
    Ok((total, grad))
}

/// Mean of `||Δ_a − Δ_b||` over lattice edges; a roughness summary of a field.
pub fn mean_neighbor_difference(field: &DeformationField, lattice: &ControlLattice) -> Result<f64> {
    field.check(lattice)?;
    let edges = lattice_edges(lattice);
    let offsets = field.offsets();
    let sum: f64 = edges.iter().map(|&(a, b)| (offsets[a] - offsets[b]).norm()).sum();
    Ok(sum / edges.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::seeded_rng;
    use crate::Aabb;
    use proptest::prelude::*;
    use rand::Rng;

    fn lattice(d: [usize; 3]) -> ControlLattice {
        ControlLattice::new(d, Aabb::new(Vec3::ZERO, Vec3::splat(1.0))).unwrap()
    }

    fn random_field(lat: &ControlLattice, seed: u64) -> DeformationField {
        let mut rng = seeded_rng(seed);
        let offsets = (0..lat.control_count())
            .map(|_| Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        DeformationField::from_offsets(lat.degrees(), offsets).unwrap()
    }

    #[test]
    fn weights_validation() {
        assert!(RegularizerWeights::new(-0.1, 0.0).is_err());
        assert!(RegularizerWeights::new(0.0, f64::NAN).is_err());
        assert_eq!(RegularizerWeights::default().lambda_smooth, 0.05);
    }

    #[test]
    fn offset_l1_examples() {
        let pc = PointCloud::new(vec![Vec3::ZERO, Vec3::new(1.0, 1.0, 1.0)]).unwrap();
        let (v, g) = offset_l1(&pc, &pc).unwrap();
        assert_eq!(v, 0.0);
        assert!(g.iter().all(|x| *x == Vec3::ZERO));

        let moved = PointCloud::new(vec![Vec3::new(0.1, -0.2, 0.0), Vec3::new(1.0, 1.0, 1.0)]).unwrap();
        let (v, g) = offset_l1(&pc, &moved).unwrap();
        assert!((v - 0.3).abs() < 1e-15);
        assert_eq!(g[0], Vec3::new(1.0, -1.0, 0.0));
        assert_eq!(g[1], Vec3::ZERO);

        let doubled = PointCloud::new(vec![Vec3::new(0.2, -0.4, 0.0), Vec3::new(1.0, 1.0, 1.0)]).unwrap();
        assert!((offset_l1(&pc, &doubled).unwrap().0 - 2.0 * v).abs() < 1e-15);

        let short = PointCloud::new(vec![Vec3::ZERO]).unwrap();
        assert!(offset_l1(&pc, &short).is_err());
    }

    #[test]
    fn smoothness_examples() {
        let lat = lattice([3, 3, 3]);
        let (v, g) = lattice_smoothness(&DeformationField::constant(&lat, Vec3::new(0.3, -1.0, 2.0)), &lat).unwrap();
        assert_eq!(v, 0.0);
        assert!(g.iter().all(|x| *x == Vec3::ZERO));

        // 2×2×2 lattice: 12 edges, the corner touches 3 of them.
        let lat1 = lattice([1, 1, 1]);
        assert_eq!(lattice_edges(&lat1).len(), 12);
        let mut f = DeformationField::zeros(&lat1);
        f.offsets_mut()[0] = Vec3::new(1.0, 0.0, 0.0);
        let oracle: f64 = lattice_edges(&lat1)
            .iter()
            .map(|&(a, b)| (f.offsets()[a] - f.offsets()[b]).norm_squared())
            .sum();
        let (v, _) = lattice_smoothness(&f, &lat1).unwrap();
        assert_eq!(v, 3.0);
        assert_eq!(v, oracle);

        assert_eq!(lattice_edges(&lat).len(), 144);
        assert!(lattice_smoothness(&DeformationField::zeros(&lat1), &lat).is_err());
    }

    #[test]
    fn smoothness_gradient_matches_finite_differences() {
        let h = 1e-6;
        for seed in 0..20 {
            let lat = lattice([1 + seed as usize % 3, 2, 1 + seed as usize % 2]);
            let field = random_field(&lat, seed);
            let (_, g) = lattice_smoothness(&field, &lat).unwrap();
            for c in 0..lat.control_count() {
                for axis in 0..3 {
                    let mut plus = field.clone();
                    plus.offsets_mut()[c][axis] += h;
                    let mut minus = field.clone();
                    minus.offsets_mut()[c][axis] -= h;
                    let numeric = (lattice_smoothness(&plus, &lat).unwrap().0
                        - lattice_smoothness(&minus, &lat).unwrap().0)
                        / (2.0 * h);
                    let rel = (g[c][axis] - numeric).abs() / g[c][axis].abs().max(1.0);
                    assert!(rel < 1e-7, "{} vs {numeric}", g[c][axis]);
                }
            }
        }
    }

    #[test]
    fn l1_gradient_matches_finite_differences_away_from_kinks() {
        let h = 1e-6;
        let mut rng = seeded_rng(3);
        let original: Vec<Vec3> =
            (0..30).map(|_| Vec3::new(rng.random(), rng.random(), rng.random())).collect();
        let deformed: Vec<Vec3> = original
            .iter()
            .map(|&p| {
                let mut d = Vec3::ZERO;
                for axis in 0..3 {
                    let mag = rng.random_range(1e-3..0.1);
                    d[axis] = if rng.random::<bool>() { mag } else { -mag };
                }
                p + d
            })
            .collect();
        let (_, g) = offset_l1_points(&original, &deformed).unwrap();
        for a in 0..deformed.len() {
            for axis in 0..3 {
                let mut plus = deformed.clone();
                plus[a][axis] += h;
                let mut minus = deformed.clone();
                minus[a][axis] -= h;
                let numeric = (offset_l1_points(&original, &plus).unwrap().0
                    - offset_l1_points(&original, &minus).unwrap().0)
                    / (2.0 * h);
                assert!((g[a][axis] - numeric).abs() < 1e-6);
            }
        }
    }

    proptest! {
        #[test]
        fn smoothness_is_translation_invariant(seed in 0u64..500, tx in -3.0f64..3.0, ty in -3.0f64..3.0) {
            let lat = lattice([3, 2, 2]);
            let field = random_field(&lat, seed);
            let shifted = field.combine(1.0, &DeformationField::constant(&lat, Vec3::new(tx, ty, 0.5)), 1.0).unwrap();
            let a = lattice_smoothness(&field, &lat).unwrap().0;
            let b = lattice_smoothness(&shifted, &lat).unwrap().0;
            prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
            prop_assert!(a > 0.0);
        }
    }
}
