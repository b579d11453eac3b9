//! Meshes, placement, voxelization and the ground-truth visible surface.

pub mod cache;
mod ground_truth;
pub mod mesh_io;
pub mod shapes;
mod voxelize;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::Bvh;
use crate::voxel_grid::{GridError, GridFrame};
use crate::{Point, Vec3};

pub use ground_truth::{gt_lookat, prune_invisible, GroundTruth, Reachability};
pub use mesh_io::load_mesh;
pub use voxelize::{triangle_box_overlap, voxelize};

/// The five ground offsets used by the benchmark protocol, meters.
pub const OBJECT_CENTERS: [[f64; 2]; 5] = [
    [0.0, 0.0],
    [4.0, 4.0],
    [4.0, -4.0],
    [-4.0, 4.0],
    [-4.0, -4.0],
];

pub const DEFAULT_SURFACE_POINTS: usize = 100_000;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {msg}")]
    Parse { path: String, msg: String },
    #[error("mesh has no triangles")]
    NoTriangles,
    #[error("mesh has a non-finite vertex")]
    NonFinite,
    #[error("triangle {triangle} references vertex {index} of {count}")]
    IndexOutOfRange {
        triangle: usize,
        index: u32,
        count: usize,
    },
    #[error("mesh bounding box is degenerate")]
    DegenerateAabb,
    #[error("mesh vertex {0:?} lies outside the grid volume")]
    OutsideFrame([f64; 3]),
    #[error("mesh has zero surface area")]
    ZeroArea,
    #[error("invalid scene config: {0}")]
    Config(String),
    #[error("every ground-truth face has been seen")]
    AllFacesSeen,
    #[error("ground truth has no surface points")]
    NoSurfacePoints,
    #[error("bad cache file: {0}")]
    Cache(String),
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TriangleMesh {
    pub vertices: Vec<Point>,
    pub triangles: Vec<[u32; 3]>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Point>, triangles: Vec<[u32; 3]>) -> Result<Self, SceneError> {
        if triangles.is_empty() {
            return Err(SceneError::NoTriangles);
        }
        if !vertices.iter().all(|v| v.coords.iter().all(|c| c.is_finite())) {
            return Err(SceneError::NonFinite);
        }
        for (t, tri) in triangles.iter().enumerate() {
            for &index in tri {
                if index as usize >= vertices.len() {
                    return Err(SceneError::IndexOutOfRange {
                        triangle: t,
                        index,
                        count: vertices.len(),
                    });
                }
            }
        }
        Ok(TriangleMesh {
            vertices,
            triangles,
        })
    }

    pub fn triangle(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    /// Unnormalized normal `(b − a) × (c − a)`.
    pub fn triangle_normal(&self, t: usize) -> Vec3 {
        let [a, b, c] = self.triangle(t);
        (b - a).cross(&(c - a))
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        0.5 * self.triangle_normal(t).norm()
    }

    pub fn aabb(&self) -> (Point, Point) {
        let mut lo = Point::from(Vec3::repeat(f64::INFINITY));
        let mut hi = Point::from(Vec3::repeat(f64::NEG_INFINITY));
        for v in &self.vertices {
            for a in 0..3 {
                lo[a] = lo[a].min(v[a]);
                hi[a] = hi[a].max(v[a]);
            }
        }
        (lo, hi)
    }

    pub fn translated(&self, offset: Vec3) -> TriangleMesh {
        TriangleMesh {
            vertices: self.vertices.iter().map(|v| v + offset).collect(),
            triangles: self.triangles.clone(),
        }
    }

    /// Appends another mesh, re-indexing its triangles.
    pub fn merge(&mut self, other: &TriangleMesh) {
        let base = self.vertices.len() as u32;
        self.vertices.extend_from_slice(&other.vertices);
        self.triangles
            .extend(other.triangles.iter().map(|t| [t[0] + base, t[1] + base, t[2] + base]));
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }
}

/// Object placement inside the scene volume.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    /// Longest bounding-box edge after scaling, meters.
    pub target_extent: f64,
    pub scene_size: f64,
    /// Ground-plane center of the object's bounding box, meters.
    pub object_center: [f64; 2],
    /// Height of the object's bounding-box base, meters.
    pub ground_height: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            target_extent: 8.0,
            scene_size: 20.0,
            object_center: [0.0, 0.0],
            ground_height: 1.0,
        }
    }
}

impl SceneConfig {
    pub fn with_center(mut self, center: [f64; 2]) -> Self {
        self.object_center = center;
        self
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        let half = self.scene_size / 2.0;
        if !(self.target_extent > 0.0 && self.target_extent < self.scene_size) {
            return Err(SceneError::Config(format!(
                "target extent {} vs scene size {}",
                self.target_extent, self.scene_size
            )));
        }
        for c in self.object_center {
            if c.abs() + self.target_extent / 2.0 > half {
                return Err(SceneError::Config(format!("object center {c} leaves the scene")));
            }
        }
        if self.ground_height < 0.0 || self.ground_height + self.target_extent > self.scene_size {
            return Err(SceneError::Config(format!("ground height {}", self.ground_height)));
        }
        Ok(())
    }
}

/// Uniformly rescales `mesh` so its longest bounding-box edge equals
/// `target_extent`, then puts the box base on the ground centered at the
/// configured offset.
pub fn normalize_and_place(mesh: &TriangleMesh, cfg: &SceneConfig) -> Result<TriangleMesh, SceneError> {
    cfg.validate()?;
    let (lo, hi) = mesh.aabb();
    let ext = hi - lo;
    let longest = ext.max();
    if !(longest > 0.0) {
        return Err(SceneError::DegenerateAabb);
    }
    let s = cfg.target_extent / longest;
    let c = Point::from((lo.coords + hi.coords) / 2.0);
    let target = Vec3::new(
        cfg.object_center[0],
        cfg.object_center[1],
        cfg.ground_height + s * ext.z / 2.0,
    );
    let vertices = mesh
        .vertices
        .iter()
        .map(|v| Point::from((v - c) * s + target))
        .collect();
    TriangleMesh::new(vertices, mesh.triangles.clone())
}

/// Area-uniform surface samples: pick a triangle by inverting the cumulative
/// area, then a uniform barycentric point inside it.
pub fn sample_surface_points(mesh: &TriangleMesh, n: usize, seed: u64) -> Result<Vec<Point>, SceneError> {
    sample_surface_with_triangles(mesh, n, seed).map(|v| v.into_iter().map(|(p, _)| p).collect())
}

pub(crate) fn sample_surface_with_triangles(
    mesh: &TriangleMesh,
    n: usize,
    seed: u64,
) -> Result<Vec<(Point, usize)>, SceneError> {
    let mut cdf = Vec::with_capacity(mesh.triangles.len());
    let mut acc = 0.0;
    for t in 0..mesh.triangles.len() {
        acc += mesh.triangle_area(t);
        cdf.push(acc);
    }
    if !(acc > 0.0) {
        return Err(SceneError::ZeroArea);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let target = rng.gen::<f64>() * acc;
        let t = cdf.partition_point(|c| *c <= target).min(cdf.len() - 1);
        let (r1, r2): (f64, f64) = (rng.gen(), rng.gen());
        let s = r1.sqrt();
        let (wa, wb, wc) = (1.0 - s, s * (1.0 - r2), s * r2);
        let [a, b, c] = mesh.triangle(t);
        out.push((Point::from(a.coords * wa + b.coords * wb + c.coords * wc), t));
    }
    Ok(out)
}

/// A prepared scene: placed mesh, its ray-casting structure and ground truth.
#[derive(Clone, Debug)]
pub struct Scene {
    pub id: String,
    pub object_center: [f64; 2],
    pub mesh: TriangleMesh,
    pub bvh: Bvh,
    pub gt: GroundTruth,
}

impl Scene {
    /// Runs the preparation pipeline: place, voxelize, prune, sample.
    pub fn prepare(
        id: impl Into<String>,
        raw: &TriangleMesh,
        cfg: &SceneConfig,
        frame: GridFrame,
        surface_points: usize,
        seed: u64,
    ) -> Result<Scene, SceneError> {
        let mesh = normalize_and_place(raw, cfg)?;
        let gt = GroundTruth::build(&mesh, frame, surface_points, seed)?;
        Ok(Scene::from_parts(id, cfg.object_center, mesh, gt))
    }

    pub fn from_parts(
        id: impl Into<String>,
        object_center: [f64; 2],
        mesh: TriangleMesh,
        gt: GroundTruth,
    ) -> Scene {
        let bvh = Bvh::build(&mesh);
        Scene {
            id: id.into(),
            object_center,
            mesh,
            bvh,
            gt,
        }
    }

    /// Center of the placed mesh's bounding box.
    pub fn object_aabb_center(&self) -> Point {
        let (lo, hi) = self.mesh.aabb();
        Point::from((lo.coords + hi.coords) / 2.0)
    }

    /// Half the bounding-box diagonal.
    pub fn object_radius(&self) -> f64 {
        let (lo, hi) = self.mesh.aabb();
        (hi - lo).norm() / 2.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_cube_is_scaled_and_placed() {
        let cfg = SceneConfig::default().with_center([4.0, -4.0]);
        let m = normalize_and_place(&shapes::unit_cube(), &cfg).unwrap();
        let (lo, hi) = m.aabb();
        assert_eq!(hi - lo, Vec3::repeat(8.0));
        assert_eq!(lo, Point::new(0.0, -8.0, 1.0));
    }

    #[test]
    fn placement_is_idempotent() {
        let cfg = SceneConfig::default().with_center([-4.0, 4.0]);
        let once = normalize_and_place(&shapes::icosphere(2), &cfg).unwrap();
        let twice = normalize_and_place(&once, &cfg).unwrap();
        for (a, b) in once.vertices.iter().zip(&twice.vertices) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn scaling_is_uniform() {
        let boxm = shapes::box_mesh(Point::origin(), Point::new(1.0, 1.0, 4.0));
        let m = normalize_and_place(&boxm, &SceneConfig::default()).unwrap();
        let (lo, hi) = m.aabb();
        assert_eq!(hi - lo, Vec3::new(2.0, 2.0, 8.0));
    }

    #[test]
    fn degenerate_aabb_is_rejected() {
        let m = TriangleMesh::new(vec![Point::origin(); 3], vec![[0, 1, 2]]).unwrap();
        assert!(matches!(
            normalize_and_place(&m, &SceneConfig::default()),
            Err(SceneError::DegenerateAabb)
        ));
    }

    #[test]
    fn config_validation() {
        assert!(SceneConfig::default().with_center([7.0, 0.0]).validate().is_err());
        assert!(SceneConfig::default().with_center([6.0, -6.0]).validate().is_ok());
        let mut c = SceneConfig::default();
        c.target_extent = 25.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn mesh_validation() {
        assert!(matches!(TriangleMesh::new(vec![], vec![]), Err(SceneError::NoTriangles)));
        assert!(matches!(
            TriangleMesh::new(vec![Point::origin(); 2], vec![[0, 1, 2]]),
            Err(SceneError::IndexOutOfRange { .. })
        ));
        assert!(matches!(
            TriangleMesh::new(vec![Point::new(f64::NAN, 0.0, 0.0); 3], vec![[0, 1, 2]]),
            Err(SceneError::NonFinite)
        ));
    }

    #[test]
    fn single_triangle_sample_is_inside() {
        let m = TriangleMesh::new(
            vec![Point::new(0.0, 0.0, 0.0), Point::new(2.0, 0.0, 0.0), Point::new(0.0, 3.0, 0.0)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let p = sample_surface_points(&m, 1, 9).unwrap()[0];
        // barycentric coordinates of p
        let (b, c) = (p.x / 2.0, p.y / 3.0);
        let a = 1.0 - b - c;
        assert!(a >= 0.0 && b >= 0.0 && c >= 0.0);
        assert!((a + b + c - 1.0).abs() < 1e-12);
        assert_eq!(p.z, 0.0);
    }

    #[test]
    fn area_weighting_matches_binomial() {
        // triangles with area 9 : 1
        let m = TriangleMesh::new(
            vec![
                Point::new(0.0, 0.0, 0.0),
                Point::new(3.0, 0.0, 0.0),
                Point::new(0.0, 6.0, 0.0),
                Point::new(10.0, 0.0, 0.0),
                Point::new(11.0, 0.0, 0.0),
                Point::new(10.0, 2.0, 0.0),
            ],
            vec![[0, 1, 2], [3, 4, 5]],
        )
        .unwrap();
        let n = 100_000;
        let pts = sample_surface_points(&m, n, 1).unwrap();
        let first = pts.iter().filter(|p| p.x < 5.0).count() as f64;
        let (mean, sd) = (0.9 * n as f64, (n as f64 * 0.9 * 0.1).sqrt());
        assert!((first - mean).abs() < 3.0 * sd, "{first} vs {mean} ± {sd}");
    }

    #[test]
    fn sampling_is_deterministic() {
        let m = shapes::torus(1.0, 0.3, 16, 8);
        assert_eq!(
            sample_surface_points(&m, 500, 3).unwrap(),
            sample_surface_points(&m, 500, 3).unwrap()
        );
        assert_ne!(
            sample_surface_points(&m, 500, 3).unwrap(),
            sample_surface_points(&m, 500, 4).unwrap()
        );
    }

    #[test]
    fn zero_area_is_error() {
        let m = TriangleMesh::new(vec![Point::origin(); 3], vec![[0, 1, 2]]).unwrap();
        assert!(matches!(sample_surface_points(&m, 3, 0), Err(SceneError::ZeroArea)));
    }
}
