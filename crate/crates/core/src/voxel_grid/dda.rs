use super::{GridFrame, VoxelIndex};
use crate::{Point, Vec3};

/// Amanatides–Woo walk over the cells a ray crosses inside a grid.
///
/// Yields `(voxel, t_enter)` in order of increasing entry parameter, where
/// `t_enter` is clamped to the start of the clipped segment.
pub struct VoxelTraversal {
    cell: [i64; 3],
    step: [i64; 3],
    t_max: [f64; 3],
    t_delta: [f64; 3],
    t_enter: f64,
    t_end: f64,
    g: i64,
    done: bool,
}

impl VoxelTraversal {
    /// Returns `None` if the segment `origin + t·dir, t ∈ [0, t_limit]` misses
    /// the grid volume.
    pub fn new(frame: &GridFrame, origin: &Point, dir: &Vec3, t_limit: f64) -> Option<Self> {
        let lo = frame.origin;
        let hi = frame.max_corner();
        let mut t0 = 0.0f64;
        let mut t1 = t_limit;
        for a in 0..3 {
            if dir[a] == 0.0 {
                if origin[a] < lo[a] || origin[a] > hi[a] {
                    return None;
                }
                continue;
            }
            let inv = 1.0 / dir[a];
            let (mut ta, mut tb) = ((lo[a] - origin[a]) * inv, (hi[a] - origin[a]) * inv);
            if ta > tb {
                std::mem::swap(&mut ta, &mut tb);
            }
            t0 = t0.max(ta);
            t1 = t1.min(tb);
        }
        if !(t0 <= t1) {
            return None;
        }

        let s = frame.voxel_size;
        let g = frame.resolution as i64;
        let start = origin + dir * t0;
        let mut cell = [0i64; 3];
        let mut step = [0i64; 3];
        let mut t_max = [f64::INFINITY; 3];
        let mut t_delta = [f64::INFINITY; 3];
        for a in 0..3 {
            let f = ((start[a] - lo[a]) / s).floor() as i64;
            cell[a] = f.clamp(0, g - 1);
            if dir[a] > 0.0 {
                step[a] = 1;
                let boundary = lo[a] + (cell[a] + 1) as f64 * s;
                t_max[a] = (boundary - origin[a]) / dir[a];
                t_delta[a] = s / dir[a];
            } else if dir[a] < 0.0 {
                step[a] = -1;
                let boundary = lo[a] + cell[a] as f64 * s;
                t_max[a] = (boundary - origin[a]) / dir[a];
                t_delta[a] = -s / dir[a];
            }
        }
        Some(VoxelTraversal {
            cell,
            step,
            t_max,
            t_delta,
            t_enter: t0,
            t_end: t1,
            g,
            done: false,
        })
    }
}

impl Iterator for VoxelTraversal {
    type Item = (VoxelIndex, f64);

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let c = self.cell;
        if c.iter().any(|&v| v < 0 || v >= self.g) || self.t_enter > self.t_end {
            self.done = true;
            return None;
        }
        let out = (
            VoxelIndex::new(c[0] as usize, c[1] as usize, c[2] as usize),
            self.t_enter,
        );
        let a = if self.t_max[0] < self.t_max[1] {
            if self.t_max[0] < self.t_max[2] {
                0
            } else {
                2
            }
        } else if self.t_max[1] < self.t_max[2] {
            1
        } else {
            2
        };
        if self.t_max[a].is_infinite() {
            self.done = true;
        } else {
            self.t_enter = self.t_max[a];
            self.cell[a] += self.step[a];
            self.t_max[a] += self.t_delta[a];
        }
        Some(out)
    }
}
