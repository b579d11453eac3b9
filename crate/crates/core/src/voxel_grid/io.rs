//! Grid snapshots.
//!
//! Binary layout, all little-endian:
//!
//! | offset | size | field                          |
//! |--------|------|--------------------------------|
//! | 0      | 4    | `g` (u32)                      |
//! | 4      | 24   | origin x, y, z (f64)           |
//! | 28     | 8    | voxel size (f64)               |
//! | 36     | g³   | state bytes (0 unknown, 1 free, 2 occupied) |
//! | 36+g³  | g³   | face-mask bytes (bit j = face j) |
//!
//! Voxels are stored x-fastest.

use serde::{Deserialize, Serialize};

use super::{FaceMask, GridError, GridFrame, VoxelGrid, VoxelIndex, VoxelState};
use crate::Point;

pub const GRID_HEADER_LEN: usize = 4 + 24 + 8;

impl GridFrame {
    pub(crate) fn write_header(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&(self.resolution as u32).to_le_bytes());
        for a in 0..3 {
            out.extend_from_slice(&self.origin[a].to_le_bytes());
        }
        out.extend_from_slice(&self.voxel_size.to_le_bytes());
    }

    pub(crate) fn read_header(bytes: &[u8]) -> Result<GridFrame, GridError> {
        if bytes.len() < GRID_HEADER_LEN {
            return Err(GridError::Malformed("truncated header".into()));
        }
        let g = u32::from_le_bytes(bytes[0..4].try_into().unwrap()) as usize;
        let f = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        GridFrame::new(g, Point::new(f(4), f(12), f(20)), f(28))
    }
}

impl VoxelGrid {
    pub fn to_bytes(&self) -> Vec<u8> {
        let n = self.frame.voxel_count();
        let mut out = Vec::with_capacity(GRID_HEADER_LEN + 2 * n);
        self.frame.write_header(&mut out);
        out.extend(self.state.iter().map(|s| *s as u8));
        out.extend(self.faces.iter().map(|m| m.bits()));
        out
    }

    /// Parses a snapshot, returning the grid and the number of bytes consumed.
    pub fn from_bytes_prefix(bytes: &[u8]) -> Result<(VoxelGrid, usize), GridError> {
        let frame = GridFrame::read_header(bytes)?;
        let n = frame.voxel_count();
        let end = GRID_HEADER_LEN + 2 * n;
        if bytes.len() < end {
            return Err(GridError::Malformed(format!(
                "expected {end} bytes, got {}",
                bytes.len()
            )));
        }
        let body = &bytes[GRID_HEADER_LEN..end];
        let state = body[..n]
            .iter()
            .map(|b| VoxelState::from_byte(*b))
            .collect::<Result<Vec<_>, _>>()?;
        let faces = body[n..]
            .iter()
            .map(|b| FaceMask::from_bits(*b))
            .collect::<Result<Vec<_>, _>>()?;
        for (s, f) in state.iter().zip(&faces) {
            if !f.is_empty() && *s != VoxelState::Occupied {
                return Err(GridError::Malformed("face bits on a non-occupied voxel".into()));
            }
        }
        Ok((VoxelGrid { frame, state, faces }, end))
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<VoxelGrid, GridError> {
        let (grid, used) = Self::from_bytes_prefix(bytes)?;
        if used != bytes.len() {
            return Err(GridError::Malformed(format!(
                "{} trailing bytes",
                bytes.len() - used
            )));
        }
        Ok(grid)
    }

    pub fn debug_dump(&self) -> GridDump {
        let mut occupied = Vec::new();
        let mut free = 0;
        for (l, (s, m)) in self.state.iter().zip(&self.faces).enumerate() {
            match s {
                VoxelState::Occupied => {
                    occupied.push(DumpVoxel {
                        index: self.frame.unlinear(l),
                        faces: m.bits(),
                    });
                }
                VoxelState::Free => free += 1,
                VoxelState::Unknown => {}
            }
        }
        GridDump {
            resolution: self.frame.resolution,
            origin: [self.frame.origin.x, self.frame.origin.y, self.frame.origin.z],
            voxel_size: self.frame.voxel_size,
            free_voxels: free,
            occupied,
        }
    }
}

/// Human-readable grid summary for debugging.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct GridDump {
    pub resolution: usize,
    pub origin: [f64; 3],
    pub voxel_size: f64,
    pub free_voxels: usize,
    pub occupied: Vec<DumpVoxel>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct DumpVoxel {
    pub index: VoxelIndex,
    pub faces: u8,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::voxel_grid::Face;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let frame = GridFrame::scene_volume(20, 20.0).unwrap();
        let bytes = VoxelGrid::new(frame).to_bytes();
        assert_eq!(bytes.len(), 36 + 2 * 8000);
        assert_eq!(&bytes[0..4], &[20, 0, 0, 0]);
        assert_eq!(&bytes[4..12], &(-10.0f64).to_le_bytes());
        assert_eq!(&bytes[28..36], &1.0f64.to_le_bytes());
    }

    #[test]
    fn rejects_faces_on_free_voxels() {
        let frame = GridFrame::scene_volume(2, 2.0).unwrap();
        let mut bytes = VoxelGrid::new(frame).to_bytes();
        bytes[36] = 1;
        bytes[36 + 8] = 1;
        assert!(VoxelGrid::from_bytes(&bytes).is_err());
        assert!(VoxelGrid::from_bytes(&bytes[..40]).is_err());
    }

    #[test]
    fn dump_lists_occupied() {
        let mut g = VoxelGrid::new(GridFrame::scene_volume(4, 4.0).unwrap());
        g.mark_faces(VoxelIndex::new(1, 2, 3), FaceMask::EMPTY.with(Face::PosZ));
        let d = g.debug_dump();
        assert_eq!(d.occupied.len(), 1);
        assert_eq!(d.occupied[0].faces, 0b01_0000);
        let json = serde_json::to_string(&d).unwrap();
        assert_eq!(serde_json::from_str::<GridDump>(&json).unwrap(), d);
    }

    proptest! {
        #[test]
        fn snapshot_round_trip(cells in prop::collection::vec((0u8..3, 0u8..64), 27), x in -50.0f64..50.0, s in 0.01f64..5.0) {
            let frame = GridFrame::new(3, Point::new(x, -x, 0.5 * x), s).unwrap();
            let mut g = VoxelGrid::new(frame);
            for (l, (st, m)) in cells.iter().enumerate() {
                let idx = frame.unlinear(l);
                match st {
                    0 => {}
                    1 => g.set_state(idx, VoxelState::Free),
                    _ => { g.mark_faces(idx, FaceMask::from_bits(*m).unwrap()); }
                }
            }
            let back = VoxelGrid::from_bytes(&g.to_bytes()).unwrap();
            prop_assert_eq!(back, g);
        }
    }
}
