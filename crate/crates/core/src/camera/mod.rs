//! Pinhole camera: poses, images, BVH ray casting and depth unprojection.
//!
//! Depth values are Euclidean hit distances along each pixel ray (not z-depth),
//! so a pixel unprojects to `position + depth · ray_direction`.

mod bvh;
pub mod dump;
mod render;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::{Point, Vec3};

pub use bvh::{Bvh, Hit};
pub use render::{render, render_depth, render_gray};

#[derive(Debug, Error, PartialEq)]
pub enum CameraError {
    #[error("invalid intrinsics: {0}")]
    Intrinsics(String),
    #[error("camera position coincides with the look-at point")]
    ZeroForward,
    #[error("pitch {0} outside [-pi/2, pi/2]")]
    Pitch(f64),
    #[error("non-finite pose component")]
    NonFinite,
}

/// Image size and vertical field of view. The principal point is the image
/// center and pixels are square.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub width: usize,
    pub height: usize,
    /// Radians.
    pub vertical_fov: f64,
}

impl Intrinsics {
    pub fn new(width: usize, height: usize, vertical_fov: f64) -> Result<Self, CameraError> {
        if width == 0 || height == 0 {
            return Err(CameraError::Intrinsics(format!("{width}x{height}")));
        }
        if !(vertical_fov > 0.0 && vertical_fov < PI) {
            return Err(CameraError::Intrinsics(format!("fov {vertical_fov}")));
        }
        Ok(Intrinsics {
            width,
            height,
            vertical_fov,
        })
    }

    /// Unit ray through the center of pixel `(u, v)`; `v` counts rows from the top.
    #[inline]
    pub fn ray_direction(&self, basis: &CameraBasis, u: usize, v: usize) -> Vec3 {
        let tan_half = (0.5 * self.vertical_fov).tan();
        let aspect = self.width as f64 / self.height as f64;
        let x = (2.0 * (u as f64 + 0.5) / self.width as f64 - 1.0) * tan_half * aspect;
        let y = (1.0 - 2.0 * (v as f64 + 0.5) / self.height as f64) * tan_half;
        (basis.forward + basis.right * x + basis.up * y).normalize()
    }
}

/// Orthonormal camera frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CameraBasis {
    pub forward: Vec3,
    pub right: Vec3,
    pub up: Vec3,
}

/// 5-DoF camera pose; roll is always zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: Point,
    /// Radians about world +z, in `(-π, π]`.
    pub yaw: f64,
    /// Radians, positive looks up, in `[-π/2, π/2]`.
    pub pitch: f64,
}

fn normalize_yaw(yaw: f64) -> f64 {
    let mut y = yaw.rem_euclid(2.0 * PI);
    if y > PI {
        y -= 2.0 * PI;
    }
    if y <= -PI {
        y += 2.0 * PI;
    }
    y
}

impl Pose {
    pub fn new(position: Point, yaw: f64, pitch: f64) -> Result<Pose, CameraError> {
        if !(position.coords.iter().all(|c| c.is_finite()) && yaw.is_finite() && pitch.is_finite()) {
            return Err(CameraError::NonFinite);
        }
        if !(-PI / 2.0..=PI / 2.0).contains(&pitch) {
            return Err(CameraError::Pitch(pitch));
        }
        Ok(Pose {
            position,
            yaw: normalize_yaw(yaw),
            pitch,
        })
    }

    /// Orientation looking from `position` toward `lookat`.
    pub fn from_lookat(position: Point, lookat: Point) -> Result<Pose, CameraError> {
        let d = lookat - position;
        let n = d.norm();
        if !n.is_finite() {
            return Err(CameraError::NonFinite);
        }
        if n == 0.0 {
            return Err(CameraError::ZeroForward);
        }
        let f = d / n;
        let yaw = f.y.atan2(f.x);
        let pitch = f.z.clamp(-1.0, 1.0).asin();
        Pose::new(position, yaw, pitch)
    }

    pub fn forward(&self) -> Vec3 {
        let (sp, cp) = self.pitch.sin_cos();
        let (sy, cy) = self.yaw.sin_cos();
        Vec3::new(cp * cy, cp * sy, sp)
    }

    pub fn basis(&self) -> CameraBasis {
        let forward = self.forward();
        let (sy, cy) = self.yaw.sin_cos();
        let right = Vec3::new(sy, -cy, 0.0);
        let up = right.cross(&forward);
        CameraBasis { forward, right, up }
    }
}

/// Per-pixel hit distance in meters; misses are stored as `+∞`.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthImage {
    width: usize,
    height: usize,
    max_range: f64,
    data: Vec<f64>,
}

impl DepthImage {
    pub fn new(width: usize, height: usize, max_range: f64, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), width * height);
        DepthImage {
            width,
            height,
            max_range,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn max_range(&self) -> f64 {
        self.max_range
    }

    /// Row-major raw values (`+∞` for misses).
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, u: usize, v: usize) -> Option<f64> {
        let d = self.data[v * self.width + u];
        d.is_finite().then_some(d)
    }

    pub fn hit_count(&self) -> usize {
        self.data.iter().filter(|d| d.is_finite()).count()
    }
}

/// Luminance in `[0, 1]`; background is 0.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Self {
        assert_eq!(data.len(), width * height);
        GrayImage {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, u: usize, v: usize) -> f32 {
        self.data[v * self.width + u]
    }

    /// Row-major 8-bit quantization.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.data
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect()
    }
}

/// World points for every finite depth pixel.
pub fn unproject(depth: &DepthImage, pose: &Pose, intrinsics: &Intrinsics) -> Vec<Point> {
    let basis = pose.basis();
    let mut out = Vec::with_capacity(depth.hit_count());
    for v in 0..depth.height() {
        for u in 0..depth.width() {
            if let Some(t) = depth.get(u, v) {
                out.push(pose.position + intrinsics.ray_direction(&basis, u, v) * t);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn lookat_along_x_is_zero_angles() {
        let p = Pose::from_lookat(Point::origin(), Point::new(1.0, 0.0, 0.0)).unwrap();
        assert_eq!((p.yaw, p.pitch), (0.0, 0.0));
    }

    #[test]
    fn lookat_straight_up() {
        let p = Pose::from_lookat(Point::origin(), Point::new(0.0, 0.0, 1.0)).unwrap();
        assert!((p.pitch - PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn lookat_coincident_is_error() {
        let p = Point::new(1.0, 2.0, 3.0);
        assert_eq!(Pose::from_lookat(p, p), Err(CameraError::ZeroForward));
    }

    #[test]
    fn yaw_is_normalized() {
        let p = Pose::new(Point::origin(), -PI, 0.0).unwrap();
        assert_eq!(p.yaw, PI);
        let p = Pose::new(Point::origin(), 3.0 * PI + 0.25, 0.0).unwrap();
        assert!((p.yaw - (-PI + 0.25)).abs() < 1e-12);
        assert!(Pose::new(Point::origin(), 0.0, 2.0).is_err());
    }

    #[test]
    fn forward_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let a = Point::new(rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0), rng.gen_range(0.0..20.0));
            let b = Point::new(rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0), rng.gen_range(0.0..20.0));
            let pose = Pose::from_lookat(a, b).unwrap();
            let expect = (b - a).normalize();
            assert!((pose.forward() - expect).norm() < 1e-9);
        }
    }

    #[test]
    fn basis_is_orthonormal() {
        let pose = Pose::new(Point::origin(), 0.7, -0.4).unwrap();
        let b = pose.basis();
        assert!((b.forward.norm() - 1.0).abs() < 1e-12);
        assert!((b.up.norm() - 1.0).abs() < 1e-12);
        assert!(b.forward.dot(&b.right).abs() < 1e-12);
        assert!(b.up.dot(&b.right).abs() < 1e-12);
        assert!(b.up.z > 0.0);
    }

    #[test]
    fn center_pixel_is_forward_for_odd_sizes() {
        let intr = Intrinsics::new(5, 5, 1.0).unwrap();
        let pose = Pose::new(Point::origin(), 0.3, 0.2).unwrap();
        let d = intr.ray_direction(&pose.basis(), 2, 2);
        assert!((d - pose.forward()).norm() < 1e-15);
    }

    #[test]
    fn unproject_center_pixel() {
        let intr = Intrinsics::new(3, 3, 1.0).unwrap();
        let pose = Pose::new(Point::new(1.0, 2.0, 3.0), 0.0, 0.0).unwrap();
        let mut data = vec![f64::INFINITY; 9];
        data[4] = 7.5;
        let pts = unproject(&DepthImage::new(3, 3, 100.0, data), &pose, &intr);
        assert_eq!(pts, vec![Point::new(8.5, 2.0, 3.0)]);
    }

    #[test]
    fn unproject_all_miss_is_empty() {
        let intr = Intrinsics::new(4, 4, 1.0).unwrap();
        let pose = Pose::new(Point::origin(), 0.0, 0.0).unwrap();
        let d = DepthImage::new(4, 4, 10.0, vec![f64::INFINITY; 16]);
        assert!(unproject(&d, &pose, &intr).is_empty());
    }

    #[test]
    fn intrinsics_validation() {
        assert!(Intrinsics::new(0, 3, 1.0).is_err());
        assert!(Intrinsics::new(3, 3, PI).is_err());
        assert!(Intrinsics::new(3, 3, 0.0).is_err());
    }
}
