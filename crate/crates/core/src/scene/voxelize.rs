//! Conservative triangle-mesh voxelization.
//!
//! A voxel is occupied when a triangle overlaps its cube (separating-axis
//! test). Geometry lying exactly on a cell boundary is attributed to the cell
//! behind the triangle's front face: each triangle is nudged a hair against
//! its normal and tested against a hair-shrunk cube. Away from boundaries the
//! nudge is far below float noise at scene scale.

use super::{SceneError, TriangleMesh};
use crate::voxel_grid::{GridFrame, VoxelIndex, BOUNDARY_NUDGE};
use crate::{Point, Vec3};

/// Separating-axis triangle/box overlap with closed inequalities.
pub fn triangle_box_overlap(center: &Point, half: &Vec3, tri: &[Point; 3]) -> bool {
    let v = [tri[0] - center, tri[1] - center, tri[2] - center];
    let e = [v[1] - v[0], v[2] - v[1], v[0] - v[2]];

    // 9 edge × axis cross products
    for edge in &e {
        for a in 0..3 {
            let mut axis = Vec3::zeros();
            axis[a] = 1.0;
            let ax = axis.cross(edge);
            if ax.norm_squared() == 0.0 {
                continue;
            }
            let p: Vec<f64> = v.iter().map(|x| x.dot(&ax)).collect();
            let (mn, mx) = p.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| {
                (a.min(*x), b.max(*x))
            });
            let r = half.x * ax.x.abs() + half.y * ax.y.abs() + half.z * ax.z.abs();
            if mn > r || mx < -r {
                return false;
            }
        }
    }

    // box face normals
    for a in 0..3 {
        let mn = v[0][a].min(v[1][a]).min(v[2][a]);
        let mx = v[0][a].max(v[1][a]).max(v[2][a]);
        if mn > half[a] || mx < -half[a] {
            return false;
        }
    }

    // triangle plane
    let n = e[0].cross(&e[1]);
    if n.norm_squared() > 0.0 {
        let d = n.dot(&v[0]);
        let r = half.x * n.x.abs() + half.y * n.y.abs() + half.z * n.z.abs();
        if d.abs() > r {
            return false;
        }
    }
    true
}

/// Dense occupancy mask (x-fastest) of voxels touched by the mesh.
pub fn voxelize(mesh: &TriangleMesh, frame: &GridFrame) -> Result<Vec<bool>, SceneError> {
    for v in &mesh.vertices {
        if !frame.contains_point(v) {
            return Err(SceneError::OutsideFrame([v.x, v.y, v.z]));
        }
    }
    let s = frame.voxel_size;
    let g = frame.resolution;
    let nudge = 2.0 * BOUNDARY_NUDGE * s;
    let half = Vec3::repeat(0.5 * s * (1.0 - 2.0 * BOUNDARY_NUDGE));
    let mut occ = vec![false; frame.voxel_count()];

    for t in 0..mesh.triangles.len() {
        let n = mesh.triangle_normal(t);
        let len = n.norm();
        if len == 0.0 {
            continue;
        }
        let shift = -n * (nudge / len);
        let tri = mesh.triangle(t).map(|p| p + shift);
        let mut lo = [0usize; 3];
        let mut hi = [0usize; 3];
        for a in 0..3 {
            let mn = tri.iter().map(|p| p[a]).fold(f64::INFINITY, f64::min);
            let mx = tri.iter().map(|p| p[a]).fold(f64::NEG_INFINITY, f64::max);
            let f = |x: f64| ((x - frame.origin[a]) / s).floor().clamp(0.0, (g - 1) as f64) as usize;
            lo[a] = f(mn);
            hi[a] = f(mx);
        }
        for k in lo[2]..=hi[2] {
            for j in lo[1]..=hi[1] {
                for i in lo[0]..=hi[0] {
                    let idx = VoxelIndex::new(i, j, k);
                    let l = frame.linear(idx);
                    if occ[l] {
                        continue;
                    }
                    if triangle_box_overlap(&frame.center(idx), &half, &tri) {
                        occ[l] = true;
                    }
                }
            }
        }
    }
    Ok(occ)
}
