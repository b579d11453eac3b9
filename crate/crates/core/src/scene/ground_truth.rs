use std::collections::VecDeque;

use super::{sample_surface_with_triangles, voxelize, SceneError, TriangleMesh};
use crate::voxel_grid::{Face, FaceMask, GridFrame, VoxelIndex, BOUNDARY_NUDGE};
use crate::Point;

/// Result of flood-filling exterior free space.
#[derive(Clone, Debug, PartialEq)]
pub struct Reachability {
    /// Non-occupied voxels connected (6-neighbourhood) to the grid boundary.
    pub reachable: Vec<bool>,
    /// Faces of occupied voxels whose neighbour is reachable or outside the grid.
    pub visible: Vec<FaceMask>,
}

/// BFS from every non-occupied boundary voxel, then labels each occupied
/// voxel's faces by the reachability of the neighbour across them.
pub fn prune_invisible(occupied: &[bool], frame: &GridFrame) -> Reachability {
    let g = frame.resolution;
    let n = frame.voxel_count();
    assert_eq!(occupied.len(), n);
    let mut reachable = vec![false; n];
    let mut queue = VecDeque::new();
    for l in 0..n {
        let idx = frame.unlinear(l);
        let on_boundary = [idx.i, idx.j, idx.k].iter().any(|&c| c == 0 || c == g - 1);
        if on_boundary && !occupied[l] {
            reachable[l] = true;
            queue.push_back(idx);
        }
    }
    while let Some(idx) = queue.pop_front() {
        for face in Face::ALL {
            if let Some(nb) = frame.neighbor(idx, face) {
                let l = frame.linear(nb);
                if !occupied[l] && !reachable[l] {
                    reachable[l] = true;
                    queue.push_back(nb);
                }
            }
        }
    }

    let visible = (0..n)
        .map(|l| {
            if !occupied[l] {
                return FaceMask::EMPTY;
            }
            let idx = frame.unlinear(l);
            Face::ALL.iter().fold(FaceMask::EMPTY, |m, &f| match frame.neighbor(idx, f) {
                None => m.with(f),
                Some(nb) if reachable[frame.linear(nb)] => m.with(f),
                Some(_) => m,
            })
        })
        .collect();
    Reachability { reachable, visible }
}

/// The externally visible surface of a placed mesh at grid resolution.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    frame: GridFrame,
    occupied: Vec<bool>,
    reachable: Vec<bool>,
    visible: Vec<FaceMask>,
    visible_total: u64,
    surface_points: Vec<Point>,
}

impl GroundTruth {
    /// Voxelizes, prunes, and samples `n_samples` surface points, keeping
    /// those that land in voxels with at least one visible face.
    pub fn build(
        mesh: &TriangleMesh,
        frame: GridFrame,
        n_samples: usize,
        seed: u64,
    ) -> Result<GroundTruth, SceneError> {
        let occupied = voxelize(mesh, &frame)?;
        let reach = prune_invisible(&occupied, &frame);
        let nudge = 2.0 * BOUNDARY_NUDGE * frame.voxel_size;
        let points = sample_surface_with_triangles(mesh, n_samples, seed)?
            .into_iter()
            .filter(|(p, t)| {
                let n = mesh.triangle_normal(*t);
                let q = p - n * (nudge / n.norm());
                frame
                    .world_to_voxel(&q)
                    .is_some_and(|idx| !reach.visible[frame.linear(idx)].is_empty())
            })
            .map(|(p, _)| p)
            .collect();
        GroundTruth::from_parts(frame, occupied, points)
    }

    /// Rebuilds the derived masks from a stored occupancy set.
    pub fn from_parts(
        frame: GridFrame,
        occupied: Vec<bool>,
        surface_points: Vec<Point>,
    ) -> Result<GroundTruth, SceneError> {
        if occupied.len() != frame.voxel_count() {
            return Err(SceneError::Cache("occupancy size mismatch".into()));
        }
        if surface_points.is_empty() {
            return Err(SceneError::NoSurfacePoints);
        }
        let Reachability { reachable, visible } = prune_invisible(&occupied, &frame);
        let visible_total = visible.iter().map(|m| m.count() as u64).sum();
        Ok(GroundTruth {
            frame,
            occupied,
            reachable,
            visible,
            visible_total,
            surface_points,
        })
    }

    pub fn frame(&self) -> &GridFrame {
        &self.frame
    }

    pub fn is_occupied(&self, idx: VoxelIndex) -> bool {
        self.occupied[self.frame.linear(idx)]
    }

    pub fn occupied_mask(&self) -> &[bool] {
        &self.occupied
    }

    pub fn occupied_count(&self) -> usize {
        self.occupied.iter().filter(|o| **o).count()
    }

    /// Exterior free space (BFS-reachable from the boundary).
    pub fn is_reachable(&self, idx: VoxelIndex) -> bool {
        self.reachable[self.frame.linear(idx)]
    }

    pub fn visible_faces(&self) -> &[FaceMask] {
        &self.visible
    }

    pub fn visible(&self, idx: VoxelIndex) -> FaceMask {
        self.visible[self.frame.linear(idx)]
    }

    pub fn visible_face_count(&self) -> u64 {
        self.visible_total
    }

    /// Voxels that carry at least one visible face.
    pub fn surface_voxels(&self) -> impl Iterator<Item = VoxelIndex> + '_ {
        self.visible
            .iter()
            .enumerate()
            .filter(|(_, m)| !m.is_empty())
            .map(|(l, _)| self.frame.unlinear(l))
    }

    pub fn surface_points(&self) -> &[Point] {
        &self.surface_points
    }
}

/// Face-count-weighted centroid of voxels that still have unseen visible faces.
pub fn gt_lookat(gt: &GroundTruth, seen: &[FaceMask]) -> Result<Point, SceneError> {
    let frame = gt.frame();
    let mut acc = Point::origin().coords;
    let mut weight = 0u64;
    for (l, (vis, s)) in gt.visible_faces().iter().zip(seen).enumerate() {
        let w = vis.difference(*s).count() as u64;
        if w > 0 {
            acc += frame.center(frame.unlinear(l)).coords * w as f64;
            weight += w;
        }
    }
    if weight == 0 {
        return Err(SceneError::AllFacesSeen);
    }
    Ok(Point::from(acc / weight as f64))
}
