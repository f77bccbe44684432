//! Synthetic shapes and deformation benchmarks.
//!
//! Primitive meshes stand in for CAD templates; targets are templates pushed
//! through a random low-frequency lattice deformation plus Gaussian noise, so
//! the ground-truth field is known.

use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::ffd::{deform, ControlLattice, DeformationField};
use crate::geometry::{normalize_for_eval, sample_surface, seeded_rng, PointCloud, TriangleMesh};
use crate::{math, Error, Result, Vec3};

/// Axis-aligned box centered at the origin.
pub fn box_mesh(half: Vec3) -> TriangleMesh {
    let mut v = Vec::with_capacity(8);
    for k in 0..2 {
        for j in 0..2 {
            for i in 0..2 {
                let s = |b: usize| if b == 0 { -1.0 } else { 1.0 };
                v.push(Vec3::new(s(i) * half.x, s(j) * half.y, s(k) * half.z));
            }
        }
    }
    let quads: [[usize; 4]; 6] = [
        [0, 2, 3, 1],
        [4, 5, 7, 6],
        [0, 1, 5, 4],
        [2, 6, 7, 3],
        [0, 4, 6, 2],
        [1, 3, 7, 5],
    ];
    let polys: Vec<Vec<usize>> = quads.iter().map(|q| q.to_vec()).collect();
    TriangleMesh::from_polygons(v, &polys).expect("box topology is valid")
}

/// Latitude/longitude ellipsoid with the given radii.
pub fn ellipsoid(radii: Vec3, rings: usize, segments: usize) -> TriangleMesh {
    let rings = rings.max(2);
    let segments = segments.max(3);
    let mut v = Vec::new();
    v.push(Vec3::new(0.0, radii.y, 0.0));
    for r in 1..rings {
        let theta = PI * r as f64 / rings as f64;
        for s in 0..segments {
            let phi = TAU * s as f64 / segments as f64;
            v.push(Vec3::new(
                radii.x * math::sin(theta) * math::cos(phi),
                radii.y * math::cos(theta),
                radii.z * math::sin(theta) * math::sin(phi),
            ));
        }
    }
    v.push(Vec3::new(0.0, -radii.y, 0.0));
    let south = v.len() - 1;
    let ring = |r: usize, s: usize| 1 + (r - 1) * segments + s % segments;
    let mut faces = Vec::new();
    for s in 0..segments {
        faces.push([0, ring(1, s + 1), ring(1, s)]);
        faces.push([south, ring(rings - 1, s), ring(rings - 1, s + 1)]);
    }
    for r in 1..rings - 1 {
        for s in 0..segments {
            faces.push([ring(r, s), ring(r, s + 1), ring(r + 1, s + 1)]);
            faces.push([ring(r, s), ring(r + 1, s + 1), ring(r + 1, s)]);
        }
    }
    TriangleMesh::new(v, faces).expect("ellipsoid topology is valid")
}

/// Capped cylinder along y, with independent top and bottom radii (a cone
/// when `top_radius` is zero).
pub fn frustum(bottom_radius: f64, top_radius: f64, height: f64, segments: usize) -> TriangleMesh {
    let segments = segments.max(3);
    let mut v = Vec::new();
    let h = height * 0.5;
    for s in 0..segments {
        let phi = TAU * s as f64 / segments as f64;
        v.push(Vec3::new(bottom_radius * math::cos(phi), -h, bottom_radius * math::sin(phi)));
    }
    let apex = top_radius <= 0.0;
    if apex {
        v.push(Vec3::new(0.0, h, 0.0));
    } else {
        for s in 0..segments {
            let phi = TAU * s as f64 / segments as f64;
            v.push(Vec3::new(top_radius * math::cos(phi), h, top_radius * math::sin(phi)));
        }
    }
    let bottom_center = v.len();
    v.push(Vec3::new(0.0, -h, 0.0));
    let mut faces = Vec::new();
    for s in 0..segments {
        let (a, b) = (s, (s + 1) % segments);
        faces.push([bottom_center, a, b]);
        if apex {
            faces.push([a, segments, b]);
        } else {
            let (c, d) = (segments + s, segments + (s + 1) % segments);
            faces.push([a, c, d]);
            faces.push([a, d, b]);
        }
    }
    if !apex {
        let top_center = v.len();
        v.push(Vec3::new(0.0, h, 0.0));
        for s in 0..segments {
            faces.push([top_center, segments + (s + 1) % segments, segments + s]);
        }
    }
    TriangleMesh::new(v, faces).expect("frustum topology is valid")
}

/// Primitive families used by the benchmarks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Primitive {
    Box,
    Ellipsoid,
    Cylinder,
    Cone,
}

impl Primitive {
    pub const ALL: [Primitive; 4] = [Primitive::Box, Primitive::Ellipsoid, Primitive::Cylinder, Primitive::Cone];

    /// A mesh of this family with proportions drawn from `rng`.
    pub fn random_mesh<R: Rng>(self, rng: &mut R) -> TriangleMesh {
        let mut dim = || rng.random_range(0.5..1.0);
        match self {
            Primitive::Box => box_mesh(Vec3::new(dim(), dim(), dim())),
            Primitive::Ellipsoid => ellipsoid(Vec3::new(dim(), dim(), dim()), 16, 24),
            Primitive::Cylinder => {
                let r = dim();
                frustum(r, r, 2.0 * dim(), 32)
            }
            Primitive::Cone => frustum(dim(), 0.0, 2.0 * dim(), 32),
        }
    }
}

/// A random low-frequency field: each offset component is a sum of two cosine
/// modes over the normalized lattice coordinates, scaled to `amplitude`.
pub fn random_smooth_field<R: Rng>(lattice: &ControlLattice, amplitude: f64, rng: &mut R) -> DeformationField {
    let [l, m, n] = lattice.degrees();
    let mut modes = [[(Vec3::ZERO, 0.0, 0.0); 2]; 3];
    for axis_modes in modes.iter_mut() {
        for mode in axis_modes.iter_mut() {
            let freq = Vec3::new(rng.random_range(0.0..PI), rng.random_range(0.0..PI), rng.random_range(0.0..PI));
            *mode = (freq, rng.random_range(0.0..TAU), rng.random_range(-1.0..1.0));
        }
    }
    let offsets = (0..lattice.control_count())
        .map(|c| {
            let [i, j, k] = lattice.ijk(c);
            let t = Vec3::new(i as f64 / l as f64, j as f64 / m as f64, k as f64 / n as f64);
            let mut o = Vec3::ZERO;
            for axis in 0..3 {
                o[axis] = modes[axis]
                    .iter()
                    .map(|&(f, phase, w)| w * math::cos(f.dot(t) + phase))
                    .sum::<f64>()
                    * 0.5
                    * amplitude;
            }
            o
        })
        .collect();
    DeformationField::from_offsets(lattice.degrees(), offsets).expect("field matches lattice")
}

/// Adds isotropic Gaussian noise with standard deviation `sigma` to every point.
pub fn add_gaussian_noise(pc: &PointCloud, sigma: f64, seed: u64) -> Result<PointCloud> {
    let normal = Normal::new(0.0, sigma).map_err(|_| Error::InvalidArgument("noise sigma must be ≥ 0".into()))?;
    let mut rng = seeded_rng(seed);
    pc.map(|p| p + Vec3::new(normal.sample(&mut rng), normal.sample(&mut rng), normal.sample(&mut rng)))
}

/// One template/target fitting instance with its ground truth.
#[derive(Debug, Clone)]
pub struct BenchmarkPair {
    pub mesh: TriangleMesh,
    pub template: PointCloud,
    pub target: PointCloud,
    pub lattice: ControlLattice,
    pub true_field: DeformationField,
}

/// Parameters of [`benchmark_pair`].
#[derive(Debug, Clone, Copy)]
pub struct BenchmarkSpec {
    pub points: usize,
    /// Peak offset of the random field, in normalized units.
    pub amplitude: f64,
    /// Noise standard deviation, in normalized units (radius 1).
    pub noise: f64,
}

impl Default for BenchmarkSpec {
    fn default() -> Self {
        BenchmarkSpec { points: 1024, amplitude: 0.15, noise: 0.01 }
    }
}

/// Builds the `index`-th instance of a seeded benchmark family: a primitive
/// sampled and normalized as the template, and the template deformed by a
/// random smooth field plus noise as the target.
pub fn benchmark_pair(spec: &BenchmarkSpec, seed: u64, index: u64) -> Result<BenchmarkPair> {
    let base = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(index.wrapping_mul(4));
    let mut rng = seeded_rng(base);
    let primitive = Primitive::ALL[(index % Primitive::ALL.len() as u64) as usize];
    let mesh = primitive.random_mesh(&mut rng);
    let raw = sample_surface(&mesh, spec.points, base + 1)?;
    let (template, transform) = normalize_for_eval(&raw)?;
    let lattice = ControlLattice::default_for(&template)?;
    let true_field = random_smooth_field(&lattice, spec.amplitude, &mut rng);
    let target = add_gaussian_noise(&deform(&lattice, &true_field, &template)?, spec.noise, base + 3)?;
    let mesh = TriangleMesh::new(
        mesh.vertices().iter().map(|&v| transform.apply_point(v)).collect(),
        mesh.faces().to_vec(),
    )?;
    Ok(BenchmarkPair { mesh, template, target, lattice, true_field })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn primitives_are_closed_and_have_expected_area() {
        let b = box_mesh(Vec3::new(1.0, 2.0, 3.0));
        assert!((b.surface_area() - 2.0 * (4.0 * 2.0 + 4.0 * 6.0 + 2.0 * 6.0) * 2.0 / 2.0).abs() < 1e-9);
        let s = ellipsoid(Vec3::splat(1.0), 64, 128);
        assert!((s.surface_area() - 4.0 * PI).abs() < 0.01 * 4.0 * PI);
        let c = frustum(1.0, 1.0, 2.0, 256);
        assert!((c.surface_area() - (2.0 * PI * 2.0 + 2.0 * PI)).abs() < 0.01 * 6.0 * PI);
        let cone = frustum(1.0, 0.0, 1.0, 256);
        let slant = (2.0f64).sqrt();
        assert!((cone.surface_area() - (PI * slant + PI)).abs() < 0.01 * 5.0);
    }

    #[test]
    fn smooth_field_is_bounded() {
        let pc = PointCloud::new(alloc::vec![Vec3::ZERO, Vec3::splat(1.0)]).unwrap();
        let lat = ControlLattice::default_for(&pc).unwrap();
        let mut rng = seeded_rng(1);
        let f = random_smooth_field(&lat, 0.2, &mut rng);
        assert!(f.max_abs() <= 0.2 + 1e-12);
        assert!(f.max_abs() > 0.0);
    }

    #[test]
    fn benchmark_pairs_are_deterministic() {
        let spec = BenchmarkSpec { points: 128, ..Default::default() };
        let a = benchmark_pair(&spec, 3, 5).unwrap();
        let b = benchmark_pair(&spec, 3, 5).unwrap();
        assert_eq!(a.template, b.template);
        assert_eq!(a.target, b.target);
        assert_eq!(a.template.len(), 128);
        assert_eq!(a.target.len(), 128);
        let max_norm = a.template.points().iter().map(|p| p.norm()).fold(0.0, f64::max);
        assert!((max_norm - 1.0).abs() < 1e-9);
    }
}
