use rayon::prelude::*;

use super::{Bvh, DepthImage, GrayImage, Intrinsics, Pose};

/// Casts one ray per pixel and returns depth and headlight-shaded luminance.
///
/// Rows are rendered in parallel; each pixel is a pure function of its
/// coordinates, so the output does not depend on the thread count.
pub fn render(bvh: &Bvh, pose: &Pose, intrinsics: &Intrinsics, max_range: f64) -> (DepthImage, GrayImage) {
    let (w, h) = (intrinsics.width, intrinsics.height);
    let basis = pose.basis();
    let mut depth = vec![f64::INFINITY; w * h];
    let mut gray = vec![0f32; w * h];
    depth
        .par_chunks_mut(w)
        .zip(gray.par_chunks_mut(w))
        .enumerate()
        .for_each(|(v, (drow, grow))| {
            for u in 0..w {
                let dir = intrinsics.ray_direction(&basis, u, v);
                if let Some(hit) = bvh.intersect(&pose.position, &dir, max_range) {
                    drow[u] = hit.t;
                    // two-sided: |n · dir| equals n̂·v̂ with n̂ flipped toward the camera
                    let lum = bvh.normal(hit.triangle).dot(&dir).abs();
                    grow[u] = lum.clamp(0.0, 1.0) as f32;
                }
            }
        });
    (
        DepthImage::new(w, h, max_range, depth),
        GrayImage::new(w, h, gray),
    )
}

pub fn render_depth(bvh: &Bvh, pose: &Pose, intrinsics: &Intrinsics, max_range: f64) -> DepthImage {
    render(bvh, pose, intrinsics, max_range).0
}

pub fn render_gray(bvh: &Bvh, pose: &Pose, intrinsics: &Intrinsics, max_range: f64) -> GrayImage {
    render(bvh, pose, intrinsics, max_range).1
}
