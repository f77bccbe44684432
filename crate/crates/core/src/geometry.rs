//! Shape ingestion and preparation: point clouds, triangle meshes, surface
//! sampling, evaluation normalization, resampling and voxelization.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{math, Aabb, Error, Result, Vec3};

/// Distances in the evaluation frame are reported in units where the working
/// grid edge measures this many units.
pub const UNITS_PER_GRID_EDGE: f64 = 10.0;

/// Converts a model-space distance into evaluation units given the edge length
/// of the working grid in model units.
pub fn to_grid_units(distance: f64, grid_edge: f64) -> f64 {
    distance * UNITS_PER_GRID_EDGE / grid_edge
}

/// Padding applied to a cloud's bounds when no voxelization extent is given.
pub const DEFAULT_VOXEL_PADDING: f64 = 0.02;

/// Seeded generator shared by every sampling routine in the crate.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// An ordered, nonempty list of finite 3D points.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Vec3>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyCloud);
        }
        if !points.iter().all(|p| p.is_finite()) {
            return Err(Error::NonFinite("point cloud"));
        }
        Ok(PointCloud { points })
    }

    #[inline]
    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn into_points(self) -> Vec<Vec3> {
        self.points
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// Always false; kept for the `len`/`is_empty` pairing.
    #[inline]
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn bounds(&self) -> Aabb {
        Aabb::from_points(&self.points).expect("point cloud is nonempty")
    }

    pub fn centroid(&self) -> Vec3 {
        let sum = self.points.iter().fold(Vec3::ZERO, |acc, &p| acc + p);
        sum * (1.0 / self.points.len() as f64)
    }

    pub fn map(&self, mut f: impl FnMut(Vec3) -> Vec3) -> Result<PointCloud> {
        PointCloud::new(self.points.iter().map(|&p| f(p)).collect())
    }

    pub fn translated(&self, t: Vec3) -> PointCloud {
        PointCloud { points: self.points.iter().map(|&p| p + t).collect() }
    }

    /// Scales every point about `center`.
    pub fn scaled_about(&self, center: Vec3, factor: f64) -> PointCloud {
        PointCloud { points: self.points.iter().map(|&p| center + (p - center) * factor).collect() }
    }
}

/// Vertices plus triangles given as vertex-index triples.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Vec3>,
    faces: Vec<[usize; 3]>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        if !vertices.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("mesh vertices"));
        }
        for (fi, face) in faces.iter().enumerate() {
            for &idx in face {
                if idx >= vertices.len() {
                    return Err(Error::FaceIndexOutOfRange {
                        face: fi,
                        index: idx,
                        count: vertices.len(),
                    });
                }
            }
            if face[0] == face[1] || face[1] == face[2] || face[0] == face[2] {
                return Err(Error::DegenerateFace { face: fi });
            }
        }
        Ok(TriangleMesh { vertices, faces })
    }

    /// Builds a mesh from polygons of three or more vertices, splitting each
    /// polygon into a triangle fan around its first vertex.
    pub fn from_polygons(vertices: Vec<Vec3>, polygons: &[Vec<usize>]) -> Result<Self> {
        let mut faces = Vec::with_capacity(polygons.len());
        for (pi, poly) in polygons.iter().enumerate() {
            if poly.len() < 3 {
                return Err(Error::InvalidArgument(alloc::format!(
                    "polygon {pi} has {} vertices, need at least 3",
                    poly.len()
                )));
            }
            for w in 1..poly.len() - 1 {
                faces.push([poly[0], poly[w], poly[w + 1]]);
            }
        }
        TriangleMesh::new(vertices, faces)
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn triangle(&self, face: usize) -> [Vec3; 3] {
        let [a, b, c] = self.faces[face];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn triangle_area(&self, face: usize) -> f64 {
        let [a, b, c] = self.triangle(face);
        0.5 * (b - a).cross(c - a).norm()
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.triangle_area(f)).sum()
    }

    pub fn bounds(&self) -> Option<Aabb> {
        Aabb::from_points(&self.vertices)
    }
}

/// Draws `n` points uniformly over the mesh surface.
///
/// A triangle is chosen with probability proportional to its area, then a point
/// is drawn uniformly inside it with the square-root barycentric mapping.
pub fn sample_surface(mesh: &TriangleMesh, n: usize, seed: u64) -> Result<PointCloud> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample count must be positive".into()));
    }
    let mut cumulative = Vec::with_capacity(mesh.faces.len());
    let mut total = 0.0;
    for f in 0..mesh.faces.len() {
        total += mesh.triangle_area(f);
        cumulative.push(total);
    }
    if !(total > 0.0) {
        return Err(Error::DegenerateMesh);
    }
    let last = mesh.faces.len() - 1;
    let mut rng = seeded_rng(seed);
    let mut points = Vec::with_capacity(n);
    for _ in 0..n {
        let r = rng.random::<f64>() * total;
        let face = cumulative.partition_point(|&c| c <= r).min(last);
        let [a, b, c] = mesh.triangle(face);
        let s = math::sqrt(rng.random::<f64>());
        let t = rng.random::<f64>();
        points.push(a * (1.0 - s) + b * (s * (1.0 - t)) + c * (s * t));
    }
    PointCloud::new(points)
}

/// Uniform scale and translation mapping a cloud into the evaluation frame:
/// `out = (p + translation) * scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizationTransform {
    pub scale: f64,
    pub translation: Vec3,
}

impl NormalizationTransform {
    pub fn new(scale: f64, translation: Vec3) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::InvalidArgument("normalization scale must be positive".into()));
        }
        if !translation.is_finite() {
            return Err(Error::NonFinite("normalization translation"));
        }
        Ok(NormalizationTransform { scale, translation })
    }

    #[inline]
    pub fn apply_point(&self, p: Vec3) -> Vec3 {
        (p + self.translation) * self.scale
    }

    #[inline]
    pub fn invert_point(&self, p: Vec3) -> Vec3 {
        p * (1.0 / self.scale) - self.translation
    }

    pub fn apply(&self, pc: &PointCloud) -> PointCloud {
        PointCloud { points: pc.points.iter().map(|&p| self.apply_point(p)).collect() }
    }

    pub fn invert(&self, pc: &PointCloud) -> PointCloud {
        PointCloud { points: pc.points.iter().map(|&p| self.invert_point(p)).collect() }
    }
}

/// Places the cloud on the ground plane `y = 0`, centers its centroid in x and z,
/// and scales it so the farthest point from the origin has norm 1.
pub fn normalize_for_eval(pc: &PointCloud) -> Result<(PointCloud, NormalizationTransform)> {
    let centroid = pc.centroid();
    let min_y = pc.points.iter().map(|p| p.y).fold(f64::INFINITY, f64::min);
    let translation = Vec3::new(-centroid.x, -min_y, -centroid.z);
    let max_norm = pc
        .points
        .iter()
        .map(|&p| (p + translation).norm())
        .fold(0.0, f64::max);
    if !(max_norm > 0.0) {
        return Err(Error::DegenerateCloud);
    }
    let transform = NormalizationTransform::new(1.0 / max_norm, translation)?;
    Ok((transform.apply(pc), transform))
}

/// Draws exactly `n` points from the cloud: without replacement when
/// `n <= len`, uniformly with replacement otherwise.
pub fn resample(pc: &PointCloud, n: usize, seed: u64) -> Result<PointCloud> {
    if n == 0 {
        return Err(Error::InvalidArgument("resample count must be positive".into()));
    }
    let mut rng = seeded_rng(seed);
    let count = pc.len();
    let points = if n <= count {
        // Partial Fisher-Yates: the first n slots end up a uniform n-subset.
        let mut idx: Vec<usize> = (0..count).collect();
        for i in 0..n {
            let j = rng.random_range(i..count);
            idx.swap(i, j);
        }
        idx[..n].iter().map(|&i| pc.points[i]).collect()
    } else {
        (0..n).map(|_| pc.points[rng.random_range(0..count)]).collect()
    };
    PointCloud::new(points)
}

/// Occupancy grid of `resolution³` cells over `extent`, stored x-fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    resolution: usize,
    occupancy: Vec<bool>,
    extent: Aabb,
}

impl VoxelGrid {
    pub fn new(resolution: usize, occupancy: Vec<bool>, extent: Aabb) -> Result<Self> {
        if resolution == 0 {
            return Err(Error::InvalidArgument("voxel resolution must be at least 1".into()));
        }
        let cells = resolution * resolution * resolution;
        if occupancy.len() != cells {
            return Err(Error::SizeMismatch {
                what: "voxel occupancy",
                expected: cells,
                found: occupancy.len(),
            });
        }
        Ok(VoxelGrid { resolution, occupancy, extent })
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn extent(&self) -> Aabb {
        self.extent
    }

    pub fn occupancy(&self) -> &[bool] {
        &self.occupancy
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.resolution * (j + self.resolution * k)
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> bool {
        self.occupancy[self.index(i, j, k)]
    }

    pub fn occupied_count(&self) -> usize {
        self.occupancy.iter().filter(|&&o| o).count()
    }
}

/// The default voxelization extent: the cloud's bounds padded by 2% per side.
pub fn default_voxel_extent(pc: &PointCloud) -> Aabb {
    pc.bounds().padded(DEFAULT_VOXEL_PADDING)
}

/// Marks every cell whose half-open sub-box contains at least one point.
/// Points outside `extent` land in the nearest boundary cell.
pub fn voxelize(pc: &PointCloud, resolution: usize, extent: Aabb) -> Result<VoxelGrid> {
    if resolution == 0 {
        return Err(Error::InvalidArgument("voxel resolution must be at least 1".into()));
    }
    if !extent.is_finite() || !(extent.volume() > 0.0) {
        return Err(Error::InvalidArgument("voxel extent must have positive volume".into()));
    }
    let size = extent.size();
    let r = resolution as f64;
    let cell = |p: Vec3, axis: usize| -> usize {
        let t = (p[axis] - extent.min[axis]) / size[axis] * r;
        let c = math::floor(t);
        if c < 0.0 {
            0
        } else {
            (c as usize).min(resolution - 1)
        }
    };
    let mut occupancy = vec![false; resolution * resolution * resolution];
    for &p in pc.points() {
        let (i, j, k) = (cell(p, 0), cell(p, 1), cell(p, 2));
        occupancy[i + resolution * (j + resolution * k)] = true;
    }
    VoxelGrid::new(resolution, occupancy, extent)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cloud(pts: &[[f64; 3]]) -> PointCloud {
        PointCloud::new(pts.iter().map(|&a| Vec3::from(a)).collect()).unwrap()
    }

    fn unit_right_triangle() -> TriangleMesh {
        TriangleMesh::new(
            vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)],
            vec![[0, 1, 2]],
        )
        .unwrap()
    }

    fn cube_corners() -> PointCloud {
        let mut pts = Vec::new();
        for k in 0..2 {
            for j in 0..2 {
                for i in 0..2 {
                    pts.push([i as f64, j as f64, k as f64]);
                }
            }
        }
        cloud(&pts)
    }

    /// Closest distance from `p` to triangle `abc` (Ericson, region tests).
    fn point_triangle_distance(p: Vec3, a: Vec3, b: Vec3, c: Vec3) -> f64 {
        let ab = b - a;
        let ac = c - a;
        let ap = p - a;
        let d1 = ab.dot(ap);
        let d2 = ac.dot(ap);
        if d1 <= 0.0 && d2 <= 0.0 {
            return p.distance(a);
        }
        let bp = p - b;
        let d3 = ab.dot(bp);
        let d4 = ac.dot(bp);
        if d3 >= 0.0 && d4 <= d3 {
            return p.distance(b);
        }
        let vc = d1 * d4 - d3 * d2;
        if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
            let v = d1 / (d1 - d3);
            return p.distance(a + ab * v);
        }
        let cp = p - c;
        let d5 = ab.dot(cp);
        let d6 = ac.dot(cp);
        if d6 >= 0.0 && d5 <= d6 {
            return p.distance(c);
        }
        let vb = d5 * d2 - d1 * d6;
        if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
            let w = d2 / (d2 - d6);
            return p.distance(a + ac * w);
        }
        let va = d3 * d6 - d5 * d4;
        if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
            let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
            return p.distance(b + (c - b) * w);
        }
        let denom = 1.0 / (va + vb + vc);
        let v = vb * denom;
        let w = vc * denom;
        p.distance(a + ab * v + ac * w)
    }

    #[test]
    fn rejects_empty_and_non_finite_clouds() {
        assert_eq!(PointCloud::new(vec![]), Err(Error::EmptyCloud));
        assert!(matches!(
            PointCloud::new(vec![Vec3::new(f64::NAN, 0.0, 0.0)]),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn mesh_validation() {
        let v = vec![Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)];
        assert!(matches!(
            TriangleMesh::new(v.clone(), vec![[0, 1, 9]]),
            Err(Error::FaceIndexOutOfRange { face: 0, index: 9, count: 3 })
        ));
        assert!(matches!(
            TriangleMesh::new(v.clone(), vec![[0, 1, 1]]),
            Err(Error::DegenerateFace { face: 0 })
        ));
        let quad = TriangleMesh::from_polygons(
            vec![Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0), Vec3::new(1.0, 1.0, 0.0), Vec3::new(0.0, 1.0, 0.0)],
            &[vec![0, 1, 2, 3]],
        )
        .unwrap();
        assert_eq!(quad.faces(), &[[0, 1, 2], [0, 2, 3]]);
        assert!((quad.surface_area() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn samples_lie_in_triangle_plane() {
        let mesh = unit_right_triangle();
        let pc = sample_surface(&mesh, 1000, 7).unwrap();
        assert_eq!(pc.len(), 1000);
        for p in pc.points() {
            assert!(p.z.abs() <= 1e-9);
            assert!(p.x >= -1e-12 && p.y >= -1e-12 && p.x + p.y <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn samples_lie_on_surface_of_tetrahedron() {
        let mesh = TriangleMesh::new(
            vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(2.0, 0.1, 0.0),
                Vec3::new(0.3, 1.5, 0.2),
                Vec3::new(0.4, 0.5, 1.7),
            ],
            vec![[0, 1, 2], [0, 1, 3], [1, 2, 3], [0, 2, 3]],
        )
        .unwrap();
        let diag = mesh.bounds().unwrap().diagonal();
        for seed in 0..5 {
            let pc = sample_surface(&mesh, 500, seed).unwrap();
            for &p in pc.points() {
                let d = (0..mesh.faces().len())
                    .map(|f| {
                        let [a, b, c] = mesh.triangle(f);
                        point_triangle_distance(p, a, b, c)
                    })
                    .fold(f64::INFINITY, f64::min);
                assert!(d <= 1e-9 * diag, "distance {d}");
            }
        }
    }

    #[test]
    fn sampling_is_area_weighted() {
        // Two disjoint triangles with areas 1 and 3.
        let mesh = TriangleMesh::new(
            vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(2.0, 0.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
                Vec3::new(10.0, 0.0, 0.0),
                Vec3::new(13.0, 0.0, 0.0),
                Vec3::new(10.0, 2.0, 0.0),
            ],
            vec![[0, 1, 2], [3, 4, 5]],
        )
        .unwrap();
        assert!((mesh.triangle_area(0) - 1.0).abs() < 1e-12);
        assert!((mesh.triangle_area(1) - 3.0).abs() < 1e-12);
        let n = 100_000;
        // Binomial(n, 1/4): mean 25000, sigma sqrt(n p (1-p)).
        let sigma = (n as f64 * 0.25 * 0.75).sqrt();
        for seed in [0, 1, 42] {
            let pc = sample_surface(&mesh, n, seed).unwrap();
            let small = pc.points().iter().filter(|p| p.x < 5.0).count() as f64;
            assert!((small - 25_000.0).abs() <= 3.0 * sigma, "seed {seed}: {small}");
        }
    }

    #[test]
    fn sampling_is_deterministic_and_rejects_degenerate_meshes() {
        let mesh = unit_right_triangle();
        assert_eq!(sample_surface(&mesh, 64, 3).unwrap(), sample_surface(&mesh, 64, 3).unwrap());
        assert_ne!(sample_surface(&mesh, 64, 3).unwrap(), sample_surface(&mesh, 64, 4).unwrap());
        let flat = TriangleMesh::new(
            vec![Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0), Vec3::new(2.0, 0.0, 0.0)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        assert_eq!(sample_surface(&flat, 10, 0), Err(Error::DegenerateMesh));
    }

    #[test]
    fn normalization_cases() {
        let dup = cloud(&[[0.0, 0.0, 0.0], [0.0, 0.0, 0.0]]);
        assert_eq!(normalize_for_eval(&dup).unwrap_err(), Error::DegenerateCloud);

        let (out, t) = normalize_for_eval(&cube_corners()).unwrap();
        let max_norm = out.points().iter().map(|p| p.norm()).fold(0.0, f64::max);
        assert!((max_norm - 1.0).abs() < 1e-9);
        let min_y = out.points().iter().map(|p| p.y).fold(f64::INFINITY, f64::min);
        assert!(min_y.abs() < 1e-12);
        assert!(out.centroid().x.abs() < 1e-12 && out.centroid().z.abs() < 1e-12);
        assert!(t.scale > 0.0);

        let (again, t2) = normalize_for_eval(&out).unwrap();
        assert!((t2.scale - 1.0).abs() < 1e-9);
        assert!(t2.translation.max_abs() < 1e-12);
        for (a, b) in again.points().iter().zip(out.points()) {
            assert!(a.distance(*b) < 1e-12);
        }
    }

    #[test]
    fn resample_cases() {
        let big = sample_surface(&unit_right_triangle(), 2048, 1).unwrap();
        let sub = resample(&big, 1024, 5).unwrap();
        assert_eq!(sub.len(), 1024);
        let mut seen: Vec<[u64; 3]> =
            sub.points().iter().map(|p| [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()]).collect();
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), 1024, "subsample must be distinct");
        assert!(sub.points().iter().all(|p| big.points().contains(p)));

        let small = sample_surface(&unit_right_triangle(), 100, 2).unwrap();
        let up = resample(&small, 1024, 5).unwrap();
        assert_eq!(up.len(), 1024);
        assert!(up.points().iter().all(|p| small.points().contains(p)));

        let perm = resample(&small, 100, 9).unwrap();
        let key = |pc: &PointCloud| {
            let mut v: Vec<[u64; 3]> =
                pc.points().iter().map(|p| [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()]).collect();
            v.sort();
            v
        };
        assert_eq!(key(&perm), key(&small));
        assert_eq!(resample(&small, 50, 1).unwrap(), resample(&small, 50, 1).unwrap());
    }

    #[test]
    fn voxelize_cases() {
        let cube = Aabb::new(Vec3::ZERO, Vec3::splat(1.0));
        let center = cloud(&[[0.5, 0.5, 0.5]]);
        assert_eq!(voxelize(&center, 2, cube).unwrap().occupied_count(), 1);

        // Enumeration oracle: each corner maps to the cell given by its clamped index.
        let grid = voxelize(&cube_corners(), 2, cube).unwrap();
        let mut expected = [false; 8];
        for p in cube_corners().points() {
            let idx = |v: f64| if v >= 1.0 { 1 } else { 0 };
            expected[idx(p.x) + 2 * (idx(p.y) + 2 * idx(p.z))] = true;
        }
        assert_eq!(grid.occupancy(), &expected[..]);
        assert_eq!(grid.occupied_count(), 8);

        let outside = cloud(&[[-5.0, 0.2, 7.0]]);
        let g = voxelize(&outside, 4, cube).unwrap();
        assert!(g.get(0, 0, 3));

        assert!(voxelize(&center, 0, cube).is_err());
        assert!(voxelize(&center, 2, Aabb::new(Vec3::ZERO, Vec3::new(1.0, 0.0, 1.0))).is_err());
    }

    proptest! {
        #[test]
        fn normalization_round_trips(pts in proptest::collection::vec(
            (-50.0f64..50.0, -50.0f64..50.0, -50.0f64..50.0), 2..40)
        ) {
            let pc = PointCloud::new(pts.iter().map(|&(x, y, z)| Vec3::new(x, y, z)).collect()).unwrap();
            if let Ok((out, t)) = normalize_for_eval(&pc) {
                let back = t.invert(&out);
                let scale = pc.points().iter().map(|p| p.norm()).fold(1e-300, f64::max);
                for (a, b) in back.points().iter().zip(pc.points()) {
                    prop_assert!(a.distance(*b) <= 1e-9 * scale);
                }
            }
        }

        #[test]
        fn voxelize_is_monotone(
            pts in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0), 1..30),
            extra in proptest::collection::vec((-0.5f64..1.5, -0.5f64..1.5, -0.5f64..1.5), 1..10),
            r in 1usize..6,
        ) {
            let cube = Aabb::new(Vec3::ZERO, Vec3::splat(1.0));
            let base: Vec<Vec3> = pts.iter().map(|&(x, y, z)| Vec3::new(x, y, z)).collect();
            let mut more = base.clone();
            more.extend(extra.iter().map(|&(x, y, z)| Vec3::new(x, y, z)));
            let a = voxelize(&PointCloud::new(base).unwrap(), r, cube).unwrap();
            let b = voxelize(&PointCloud::new(more).unwrap(), r, cube).unwrap();
            prop_assert!(a.occupied_count() >= 1);
            for (x, y) in a.occupancy().iter().zip(b.occupancy()) {
                prop_assert!(!*x || *y);
            }
        }
    }
}
