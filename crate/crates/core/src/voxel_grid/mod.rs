//! Cumulative voxel belief with per-voxel six-face visibility.
//!
//! The grid is a dense `g³` array over a cubic volume. Each voxel carries a
//! [`VoxelState`] and a [`FaceMask`] recording which of its six axis-aligned
//! outward faces have been observed. Linear storage is x-fastest:
//! `linear = i + g·(j + g·k)`.

mod dda;
mod io;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::{DepthImage, Intrinsics, Pose};
use crate::scene::GroundTruth;
use crate::{Point, Vec3};

pub use dda::VoxelTraversal;
pub use io::{GridDump, GRID_HEADER_LEN};

/// Relative nudge (in voxel units) used to resolve points that sit exactly on
/// a voxel boundary. A surface point belongs to the voxel behind it as seen
/// from the observer.
pub(crate) const BOUNDARY_NUDGE: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("face index {0} out of range 0..6")]
    FaceIndex(usize),
    #[error("no free voxel between floor {floor} m and height cap {cap} m")]
    NoFreeVoxel { cap: f64, floor: f64 },
    #[error("ground truth has no visible faces")]
    DegenerateGroundTruth,
    #[error("grid frames differ")]
    FrameMismatch,
    #[error("invalid grid frame: {0}")]
    InvalidFrame(String),
    #[error("malformed grid snapshot: {0}")]
    Malformed(String),
}

/// One of the six axis-aligned outward faces of a voxel.
///
/// The order `+x, −x, +y, −y, +z, −z` is also the bit order of [`FaceMask`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Face {
    PosX,
    NegX,
    PosY,
    NegY,
    PosZ,
    NegZ,
}

impl Face {
    pub const ALL: [Face; 6] = [
        Face::PosX,
        Face::NegX,
        Face::PosY,
        Face::NegY,
        Face::PosZ,
        Face::NegZ,
    ];

    pub fn from_index(index: usize) -> Result<Face, GridError> {
        Face::ALL
            .get(index)
            .copied()
            .ok_or(GridError::FaceIndex(index))
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn axis(self) -> usize {
        self.index() / 2
    }

    /// +1 for positive faces, −1 for negative ones.
    pub fn sign(self) -> i64 {
        if self.index() % 2 == 0 {
            1
        } else {
            -1
        }
    }

    pub fn normal(self) -> Vec3 {
        let mut n = Vec3::zeros();
        n[self.axis()] = self.sign() as f64;
        n
    }

    pub fn opposite(self) -> Face {
        Face::ALL[self.index() ^ 1]
    }
}

/// Six "seen" bits, one per [`Face`].
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FaceMask(u8);

impl FaceMask {
    pub const EMPTY: FaceMask = FaceMask(0);
    pub const FULL: FaceMask = FaceMask(0b11_1111);

    pub fn from_bits(bits: u8) -> Result<FaceMask, GridError> {
        if bits & !Self::FULL.0 != 0 {
            return Err(GridError::Malformed(format!("face mask {bits:#010b}")));
        }
        Ok(FaceMask(bits))
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn contains(self, face: Face) -> bool {
        self.0 & (1 << face.index()) != 0
    }

    pub fn get(self, index: usize) -> Result<bool, GridError> {
        Ok(self.contains(Face::from_index(index)?))
    }

    pub fn with(self, face: Face) -> FaceMask {
        FaceMask(self.0 | (1 << face.index()))
    }

    pub fn union(self, other: FaceMask) -> FaceMask {
        FaceMask(self.0 | other.0)
    }

    pub fn intersection(self, other: FaceMask) -> FaceMask {
        FaceMask(self.0 & other.0)
    }

    pub fn difference(self, other: FaceMask) -> FaceMask {
        FaceMask(self.0 & !other.0)
    }

    pub fn count(self) -> u32 {
        self.0.count_ones()
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn faces(self) -> impl Iterator<Item = Face> {
        Face::ALL.into_iter().filter(move |f| self.contains(*f))
    }

    /// Faces whose outward normal has a strictly positive dot product with
    /// `direction` (the voxel→camera vector; its length is irrelevant).
    pub fn facing(direction: &Vec3) -> FaceMask {
        let mut bits = 0u8;
        for axis in 0..3 {
            let c = direction[axis];
            if c > 0.0 {
                bits |= 1 << (2 * axis);
            } else if c < 0.0 {
                bits |= 1 << (2 * axis + 1);
            }
        }
        FaceMask(bits)
    }
}

impl fmt::Debug for FaceMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        const NAMES: [&str; 6] = ["+x", "-x", "+y", "-y", "+z", "-z"];
        let names: Vec<&str> = self.faces().map(|face| NAMES[face.index()]).collect();
        write!(f, "FaceMask{{{}}}", names.join(","))
    }
}

/// Voxel belief state. Stored as one byte in snapshots.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum VoxelState {
    #[default]
    Unknown = 0,
    Free = 1,
    Occupied = 2,
}

impl VoxelState {
    pub fn from_byte(b: u8) -> Result<VoxelState, GridError> {
        match b {
            0 => Ok(VoxelState::Unknown),
            1 => Ok(VoxelState::Free),
            2 => Ok(VoxelState::Occupied),
            other => Err(GridError::Malformed(format!("voxel state byte {other}"))),
        }
    }
}

/// Integer voxel coordinate. Ordering is lexicographic `(i, j, k)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VoxelIndex {
    pub i: usize,
    pub j: usize,
    pub k: usize,
}

impl VoxelIndex {
    pub fn new(i: usize, j: usize, k: usize) -> Self {
        VoxelIndex { i, j, k }
    }

    pub fn get(&self, axis: usize) -> usize {
        match axis {
            0 => self.i,
            1 => self.j,
            _ => self.k,
        }
    }
}

/// Placement and resolution of a cubic voxel volume.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridFrame {
    pub resolution: usize,
    pub origin: Point,
    pub voxel_size: f64,
}

impl GridFrame {
    pub fn new(resolution: usize, origin: Point, voxel_size: f64) -> Result<Self, GridError> {
        if resolution == 0 || resolution > 1024 {
            return Err(GridError::InvalidFrame(format!("resolution {resolution}")));
        }
        if !(voxel_size.is_finite() && voxel_size > 0.0) {
            return Err(GridError::InvalidFrame(format!("voxel size {voxel_size}")));
        }
        if !origin.coords.iter().all(|c| c.is_finite()) {
            return Err(GridError::InvalidFrame("non-finite origin".into()));
        }
        Ok(GridFrame {
            resolution,
            origin,
            voxel_size,
        })
    }

    /// Frame covering `[-size/2, size/2]² × [0, size]`, the scene volume
    /// used by the environment.
    pub fn scene_volume(resolution: usize, scene_size: f64) -> Result<Self, GridError> {
        let half = scene_size / 2.0;
        GridFrame::new(
            resolution,
            Point::new(-half, -half, 0.0),
            scene_size / resolution as f64,
        )
    }

    pub fn voxel_count(&self) -> usize {
        self.resolution.pow(3)
    }

    pub fn extent(&self) -> f64 {
        self.resolution as f64 * self.voxel_size
    }

    pub fn max_corner(&self) -> Point {
        self.origin + Vec3::repeat(self.extent())
    }

    pub fn linear(&self, idx: VoxelIndex) -> usize {
        let g = self.resolution;
        idx.i + g * (idx.j + g * idx.k)
    }

    pub fn unlinear(&self, linear: usize) -> VoxelIndex {
        let g = self.resolution;
        VoxelIndex::new(linear % g, (linear / g) % g, linear / (g * g))
    }

    pub fn indices(&self) -> impl Iterator<Item = VoxelIndex> + '_ {
        (0..self.voxel_count()).map(move |l| self.unlinear(l))
    }

    pub fn center(&self, idx: VoxelIndex) -> Point {
        let s = self.voxel_size;
        self.origin
            + Vec3::new(
                (idx.i as f64 + 0.5) * s,
                (idx.j as f64 + 0.5) * s,
                (idx.k as f64 + 0.5) * s,
            )
    }

    /// Normalized center coordinates in `(0, 1)³`.
    pub fn pos_enc(&self, idx: VoxelIndex) -> [f64; 3] {
        let g = self.resolution as f64;
        [
            (idx.i as f64 + 0.5) / g,
            (idx.j as f64 + 0.5) / g,
            (idx.k as f64 + 0.5) / g,
        ]
    }

    /// Voxel containing `p`. Points on the max faces of the volume are out of
    /// bounds (half-open cells).
    pub fn world_to_voxel(&self, p: &Point) -> Option<VoxelIndex> {
        let g = self.resolution as f64;
        let mut out = [0usize; 3];
        for axis in 0..3 {
            let f = (p[axis] - self.origin[axis]) / self.voxel_size;
            if !(f >= 0.0 && f < g) {
                return None;
            }
            out[axis] = (f.floor() as usize).min(self.resolution - 1);
        }
        Some(VoxelIndex::new(out[0], out[1], out[2]))
    }

    /// Like [`world_to_voxel`](Self::world_to_voxel) but clamps out-of-range
    /// coordinates onto the nearest boundary cell.
    pub fn clamped_voxel(&self, p: &Point) -> VoxelIndex {
        let mut out = [0usize; 3];
        for axis in 0..3 {
            let f = ((p[axis] - self.origin[axis]) / self.voxel_size).floor();
            out[axis] = if f.is_nan() || f < 0.0 {
                0
            } else {
                (f as usize).min(self.resolution - 1)
            };
        }
        VoxelIndex::new(out[0], out[1], out[2])
    }

    /// Bins a surface point observed from `viewer`. A point exactly on a cell
    /// boundary goes to the cell on the far side from the viewer.
    pub fn surface_voxel(&self, p: &Point, viewer: &Point) -> Option<VoxelIndex> {
        let d = p - viewer;
        let n = d.norm();
        if n > 0.0 {
            self.world_to_voxel(&(p + d * (BOUNDARY_NUDGE * self.voxel_size / n)))
        } else {
            self.world_to_voxel(p)
        }
    }

    /// Neighbour across `face`, or `None` at the grid boundary.
    pub fn neighbor(&self, idx: VoxelIndex, face: Face) -> Option<VoxelIndex> {
        let mut c = [idx.i, idx.j, idx.k];
        let axis = face.axis();
        if face.sign() > 0 {
            if c[axis] + 1 >= self.resolution {
                return None;
            }
            c[axis] += 1;
        } else {
            if c[axis] == 0 {
                return None;
            }
            c[axis] -= 1;
        }
        Some(VoxelIndex::new(c[0], c[1], c[2]))
    }

    pub fn contains_point(&self, p: &Point) -> bool {
        (0..3).all(|a| {
            p[a] >= self.origin[a] && p[a] <= self.origin[a] + self.extent()
        })
    }
}

/// Outcome of [`VoxelGrid::integrate_observation`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct IntegrateReport {
    pub newly_seen_faces: usize,
    pub newly_occupied: usize,
    pub observed_voxels: usize,
    pub points_out_of_bounds: usize,
    /// Voxels whose center coincides with the camera; their face update was skipped.
    pub skipped_coincident: Vec<VoxelIndex>,
}

/// The cumulative scene belief: occupancy state plus face visibility.
#[derive(Clone, Debug, PartialEq)]
pub struct VoxelGrid {
    frame: GridFrame,
    state: Vec<VoxelState>,
    faces: Vec<FaceMask>,
}

impl VoxelGrid {
    pub fn new(frame: GridFrame) -> Self {
        let n = frame.voxel_count();
        VoxelGrid {
            frame,
            state: vec![VoxelState::Unknown; n],
            faces: vec![FaceMask::EMPTY; n],
        }
    }

    pub fn frame(&self) -> &GridFrame {
        &self.frame
    }

    pub fn resolution(&self) -> usize {
        self.frame.resolution
    }

    pub fn state(&self, idx: VoxelIndex) -> VoxelState {
        self.state[self.frame.linear(idx)]
    }

    pub fn faces(&self, idx: VoxelIndex) -> FaceMask {
        self.faces[self.frame.linear(idx)]
    }

    pub fn states(&self) -> &[VoxelState] {
        &self.state
    }

    pub fn face_masks(&self) -> &[FaceMask] {
        &self.faces
    }

    /// Sets a voxel state, keeping occupancy sticky: an occupied voxel never
    /// goes back to free or unknown.
    pub fn set_state(&mut self, idx: VoxelIndex, state: VoxelState) {
        let l = self.frame.linear(idx);
        if self.state[l] != VoxelState::Occupied {
            self.state[l] = state;
        }
    }

    /// ORs `mask` into the voxel's faces and marks it occupied. Returns the
    /// number of bits that flipped.
    pub fn mark_faces(&mut self, idx: VoxelIndex, mask: FaceMask) -> u32 {
        let l = self.frame.linear(idx);
        self.state[l] = VoxelState::Occupied;
        let before = self.faces[l];
        self.faces[l] = before.union(mask);
        mask.difference(before).count()
    }

    pub fn is_free(&self, idx: VoxelIndex) -> bool {
        self.state(idx) == VoxelState::Free
    }

    pub fn count_state(&self, s: VoxelState) -> usize {
        self.state.iter().filter(|v| **v == s).count()
    }

    pub fn total_seen_faces(&self) -> u64 {
        self.faces.iter().map(|m| m.count() as u64).sum()
    }

    /// Fuses unprojected depth points observed from `cam_pos`.
    ///
    /// Every voxel holding a point becomes occupied, and face `j` is marked
    /// iff `(cam_pos − center) · n_j > 0`.
    pub fn integrate_observation(&mut self, points: &[Point], cam_pos: &Point) -> IntegrateReport {
        let mut report = IntegrateReport::default();
        let mut touched = vec![false; self.frame.voxel_count()];
        for p in points {
            let Some(idx) = self.frame.surface_voxel(p, cam_pos) else {
                report.points_out_of_bounds += 1;
                continue;
            };
            let l = self.frame.linear(idx);
            if touched[l] {
                continue;
            }
            touched[l] = true;
            report.observed_voxels += 1;
            if self.state[l] != VoxelState::Occupied {
                report.newly_occupied += 1;
            }
            let d = cam_pos - self.frame.center(idx);
            if d.norm() == 0.0 {
                self.state[l] = VoxelState::Occupied;
                report.skipped_coincident.push(idx);
                continue;
            }
            report.newly_seen_faces += self.mark_faces(idx, FaceMask::facing(&d)) as usize;
        }
        report
    }

    /// Counts the faces a hypothetical observation would newly reveal without
    /// touching the grid.
    pub fn preview_new_faces(&self, points: &[Point], cam_pos: &Point) -> usize {
        let mut touched = vec![false; self.frame.voxel_count()];
        let mut gain = 0usize;
        for p in points {
            let Some(idx) = self.frame.surface_voxel(p, cam_pos) else {
                continue;
            };
            let l = self.frame.linear(idx);
            if std::mem::replace(&mut touched[l], true) {
                continue;
            }
            let d = cam_pos - self.frame.center(idx);
            if d.norm() == 0.0 {
                continue;
            }
            gain += FaceMask::facing(&d).difference(self.faces[l]).count() as usize;
        }
        gain
    }

    /// Marks voxels traversed by each pixel ray as free, stopping before the
    /// voxel that holds the hit point. Misses carve up to the grid boundary
    /// (or `max_range`). Occupied voxels are left alone, and the camera's own
    /// voxel is marked free.
    pub fn carve_free_space(&mut self, depth: &DepthImage, pose: &Pose, intrinsics: &Intrinsics) {
        let basis = pose.basis();
        for v in 0..depth.height() {
            for u in 0..depth.width() {
                let dir = intrinsics.ray_direction(&basis, u, v);
                match depth.get(u, v) {
                    Some(t) => self.carve_ray(&pose.position, &dir, t, true),
                    None => self.carve_ray(&pose.position, &dir, depth.max_range(), false),
                }
            }
        }
        if let Some(idx) = self.frame.world_to_voxel(&pose.position) {
            self.set_state(idx, VoxelState::Free);
        }
    }

    /// Carves along one ray. With `hit`, the voxel containing
    /// `origin + t_stop·dir` is excluded and treated as the surface.
    pub fn carve_ray(&mut self, origin: &Point, dir: &Vec3, t_stop: f64, hit: bool) {
        let hit_voxel = if hit {
            self.frame.surface_voxel(&(origin + dir * t_stop), origin)
        } else {
            None
        };
        let Some(walk) = VoxelTraversal::new(&self.frame, origin, dir, t_stop) else {
            return;
        };
        for (idx, t_enter) in walk {
            if t_enter >= t_stop || Some(idx) == hit_voxel {
                break;
            }
            let l = self.frame.linear(idx);
            if self.state[l] == VoxelState::Unknown {
                self.state[l] = VoxelState::Free;
            }
        }
    }

    /// Fraction of ground-truth visible faces that are marked seen.
    pub fn face_coverage(&self, gt: &GroundTruth) -> Result<f64, GridError> {
        if gt.frame() != &self.frame {
            return Err(GridError::FrameMismatch);
        }
        let total = gt.visible_face_count();
        if total == 0 {
            return Err(GridError::DegenerateGroundTruth);
        }
        let seen: u64 = self
            .faces
            .iter()
            .zip(gt.visible_faces())
            .map(|(s, v)| s.intersection(*v).count() as u64)
            .sum();
        Ok(seen as f64 / total as f64)
    }

    fn qualifies(&self, idx: VoxelIndex, cap: f64, floor: f64) -> bool {
        if !self.is_free(idx) {
            return false;
        }
        let z = self.frame.center(idx).z;
        z <= cap && z >= floor
    }

    /// Projects `p` onto the nearest collision-free location: a free voxel
    /// whose center lies within `[floor_clearance, height_cap]`.
    ///
    /// If `p` already sits inside such a voxel (and itself respects the
    /// height band) it is returned unchanged, otherwise the closest qualifying
    /// voxel center is returned, ties broken by lexicographic index.
    pub fn nearest_collision_free(
        &self,
        p: &Point,
        height_cap: f64,
        floor_clearance: f64,
    ) -> Result<Point, GridError> {
        if let Some(idx) = self.frame.world_to_voxel(p) {
            if self.qualifies(idx, height_cap, floor_clearance)
                && p.z <= height_cap
                && p.z >= floor_clearance
            {
                return Ok(*p);
            }
        }

        // Expand Chebyshev shells around the (clamped) home voxel. Every voxel
        // in shell r is at least r·s − e away from p, where e is p's largest
        // per-axis offset from the home center.
        let g = self.frame.resolution as i64;
        let s = self.frame.voxel_size;
        let home = self.frame.clamped_voxel(p);
        let hc = self.frame.center(home);
        let e = (0..3).map(|a| (p[a] - hc[a]).abs()).fold(0.0, f64::max);
        let h = [home.i as i64, home.j as i64, home.k as i64];

        let mut best: Option<(f64, VoxelIndex)> = None;
        for r in 0..g {
            if let Some((bd, _)) = best {
                if r as f64 * s - e > bd {
                    break;
                }
            }
            let lo = |a: usize| (h[a] - r).max(0);
            let hi = |a: usize| (h[a] + r).min(g - 1);
            for i in lo(0)..=hi(0) {
                for j in lo(1)..=hi(1) {
                    let ks: Vec<i64> = if (i - h[0]).abs() == r || (j - h[1]).abs() == r {
                        (lo(2)..=hi(2)).collect()
                    } else {
                        [h[2] - r, h[2] + r]
                            .into_iter()
                            .filter(|k| (0..g).contains(k))
                            .collect()
                    };
                    for k in ks {
                        let idx = VoxelIndex::new(i as usize, j as usize, k as usize);
                        if !self.qualifies(idx, height_cap, floor_clearance) {
                            continue;
                        }
                        let d = (self.frame.center(idx) - p).norm();
                        if best.map_or(true, |(bd, bi)| (d, idx) < (bd, bi)) {
                            best = Some((d, idx));
                        }
                    }
                }
            }
        }

        best.map(|(_, idx)| self.frame.center(idx))
            .ok_or(GridError::NoFreeVoxel {
                cap: height_cap,
                floor: floor_clearance,
            })
    }

    /// Dense channel tensor in voxel-major order, 10 channels per voxel:
    /// occupancy (1 occupied, 0.5 unknown, 0 free), three positional
    /// encodings, then the six face bits.
    pub fn to_channels(&self) -> Vec<f32> {
        let mut out = Vec::with_capacity(self.frame.voxel_count() * 10);
        for (l, (st, mask)) in self.state.iter().zip(&self.faces).enumerate() {
            out.push(match st {
                VoxelState::Occupied => 1.0,
                VoxelState::Unknown => 0.5,
                VoxelState::Free => 0.0,
            });
            let pe = self.frame.pos_enc(self.frame.unlinear(l));
            out.extend(pe.iter().map(|v| *v as f32));
            out.extend(Face::ALL.iter().map(|f| if mask.contains(*f) { 1.0 } else { 0.0 }));
        }
        out
    }
}
