//! Ground-truth cache files written by `prep`.
//!
//! Little-endian layout:
//!
//! ```text
//! magic     8 bytes  "NBVGT\0\0\0"
//! version   u32
//! voxelize  u8       1 = conservative triangle/box overlap
//! grid      voxel-grid snapshot: occupied voxels with their visible faces
//! points    u64 count, then count × (f64 x, f64 y, f64 z)
//! vertices  u64 count, then count × (f64 x, f64 y, f64 z)
//! triangles u64 count, then count × (u32 a, u32 b, u32 c)
//! id        u32 length, UTF-8 bytes
//! center    f64 x, f64 y
//! ```

use std::fs;
use std::path::Path;

use super::{GroundTruth, Scene, SceneError, TriangleMesh};
use crate::voxel_grid::{VoxelGrid, VoxelState};
use crate::Point;

pub const MAGIC: &[u8; 8] = b"NBVGT\0\0\0";
pub const VERSION: u32 = 1;
pub const MODE_CONSERVATIVE: u8 = 1;

pub fn encode(scene: &Scene) -> Vec<u8> {
    let gt = &scene.gt;
    let mut grid = VoxelGrid::new(*gt.frame());
    for (l, occ) in gt.occupied_mask().iter().enumerate() {
        if *occ {
            let idx = gt.frame().unlinear(l);
            grid.set_state(idx, VoxelState::Occupied);
            grid.mark_faces(idx, gt.visible_faces()[l]);
        }
    }
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(MODE_CONSERVATIVE);
    out.extend_from_slice(&grid.to_bytes());
    put_points(&mut out, gt.surface_points());
    put_points(&mut out, &scene.mesh.vertices);
    out.extend_from_slice(&(scene.mesh.triangles.len() as u64).to_le_bytes());
    for t in &scene.mesh.triangles {
        for i in t {
            out.extend_from_slice(&i.to_le_bytes());
        }
    }
    out.extend_from_slice(&(scene.id.len() as u32).to_le_bytes());
    out.extend_from_slice(scene.id.as_bytes());
    for c in scene.object_center {
        out.extend_from_slice(&c.to_le_bytes());
    }
    out
}

fn put_points(out: &mut Vec<u8>, pts: &[Point]) {
    out.extend_from_slice(&(pts.len() as u64).to_le_bytes());
    for p in pts {
        for a in 0..3 {
            out.extend_from_slice(&p[a].to_le_bytes());
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], SceneError> {
        let end = self.at.checked_add(n).filter(|e| *e <= self.bytes.len());
        let end = end.ok_or_else(|| SceneError::Cache("truncated".into()))?;
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, SceneError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, SceneError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, SceneError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn count(&mut self, item: usize) -> Result<usize, SceneError> {
        let n = self.u64()? as usize;
        if n.checked_mul(item).map_or(true, |b| b > self.bytes.len() - self.at) {
            return Err(SceneError::Cache("count exceeds file size".into()));
        }
        Ok(n)
    }

    fn points(&mut self) -> Result<Vec<Point>, SceneError> {
        let n = self.count(24)?;
        (0..n)
            .map(|_| Ok(Point::new(self.f64()?, self.f64()?, self.f64()?)))
            .collect()
    }
}

pub fn decode(bytes: &[u8]) -> Result<Scene, SceneError> {
    let mut r = Reader { bytes, at: 0 };
    if r.take(8)? != MAGIC {
        return Err(SceneError::Cache("bad magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(SceneError::Cache(format!("unsupported version {version}")));
    }
    let mode = r.take(1)?[0];
    if mode != MODE_CONSERVATIVE {
        return Err(SceneError::Cache(format!("unknown voxelization mode {mode}")));
    }
    let (grid, used) = VoxelGrid::from_bytes_prefix(&bytes[r.at..])?;
    r.at += used;
    let surface = r.points()?;
    let vertices = r.points()?;
    let nt = r.count(12)?;
    let triangles = (0..nt)
        .map(|_| Ok([r.u32()?, r.u32()?, r.u32()?]))
        .collect::<Result<Vec<_>, SceneError>>()?;
    let id_len = r.u32()? as usize;
    let id = std::str::from_utf8(r.take(id_len)?)
        .map_err(|_| SceneError::Cache("id is not UTF-8".into()))?
        .to_string();
    let center = [r.f64()?, r.f64()?];
    if r.at != bytes.len() {
        return Err(SceneError::Cache("trailing bytes".into()));
    }

    let occupied = grid.states().iter().map(|s| *s == VoxelState::Occupied).collect();
    let gt = GroundTruth::from_parts(*grid.frame(), occupied, surface)?;
    if gt.visible_faces() != grid.face_masks() {
        return Err(SceneError::Cache("stored faces disagree with occupancy".into()));
    }
    let mesh = TriangleMesh::new(vertices, triangles)?;
    Ok(Scene::from_parts(id, center, mesh, gt))
}

pub fn save(path: impl AsRef<Path>, scene: &Scene) -> Result<(), SceneError> {
    let path = path.as_ref();
    fs::write(path, encode(scene)).map_err(|source| SceneError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load(path: impl AsRef<Path>) -> Result<Scene, SceneError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| SceneError::Io {
        path: path.display().to_string(),
        source,
    })?;
    decode(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{shapes, SceneConfig};
    use crate::voxel_grid::GridFrame;

    fn scene() -> Scene {
        let frame = GridFrame::scene_volume(20, 20.0).unwrap();
        Scene::prepare("cube", &shapes::unit_cube(), &SceneConfig::default(), frame, 2000, 5).unwrap()
    }

    #[test]
    fn round_trip() {
        let s = scene();
        let bytes = encode(&s);
        let back = decode(&bytes).unwrap();
        assert_eq!(back.gt, s.gt);
        assert_eq!(back.mesh, s.mesh);
        assert_eq!(back.id, "cube");
        assert_eq!(encode(&back), bytes);
    }

    #[test]
    fn corrupt_inputs_fail() {
        let bytes = encode(&scene());
        assert!(decode(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode(&bad).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(decode(&extra).is_err());
    }
}
