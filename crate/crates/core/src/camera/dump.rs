//! Debug image and point-cloud writers.

use std::io::{self, Write};

use super::{DepthImage, GrayImage};
use crate::Point;

/// Binary 8-bit PGM (P5).
pub fn write_pgm<W: Write>(mut out: W, img: &GrayImage) -> io::Result<()> {
    write!(out, "P5\n{} {}\n255\n", img.width(), img.height())?;
    out.write_all(&img.to_bytes())
}

/// Single-channel little-endian PFM. PFM stores rows bottom to top; misses
/// stay `+inf`.
pub fn write_pfm<W: Write>(mut out: W, depth: &DepthImage) -> io::Result<()> {
    write!(out, "Pf\n{} {}\n-1.0\n", depth.width(), depth.height())?;
    for v in (0..depth.height()).rev() {
        for u in 0..depth.width() {
            let d = depth.data()[v * depth.width() + u] as f32;
            out.write_all(&d.to_le_bytes())?;
        }
    }
    Ok(())
}

/// Binary little-endian PLY with `double` x/y/z vertices.
pub fn write_ply_points<W: Write>(mut out: W, points: &[Point]) -> io::Result<()> {
    write!(
        out,
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\nend_header\n",
        points.len()
    )?;
    let mut buf = Vec::with_capacity(points.len() * 24);
    for p in points {
        for a in 0..3 {
            buf.extend_from_slice(&p[a].to_le_bytes());
        }
    }
    out.write_all(&buf)
}
