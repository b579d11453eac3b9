#![allow(dead_code)]

use std::sync::Arc;

use nbv_core::bench::scene_id;
use nbv_core::env::{EnvConfig, Environment, StepResult};
use nbv_core::scene::{Scene, SceneConfig, TriangleMesh};
use nbv_core::voxel_grid::{VoxelGrid, VoxelIndex};
use nbv_core::{Point, Vec3};

/// Möller–Trumbore over every triangle; nearest positive hit distance.
pub fn brute_ray(mesh: &TriangleMesh, o: &Point, d: &Vec3) -> Option<f64> {
    let mut best: Option<f64> = None;
    for t in 0..mesh.triangles.len() {
        let [a, b, c] = mesh.triangle(t);
        let e1 = b - a;
        let e2 = c - a;
        let p = d.cross(&e2);
        let det = e1.dot(&p);
        if det.abs() < 1e-14 {
            continue;
        }
        let inv = 1.0 / det;
        let s = o - a;
        let u = s.dot(&p) * inv;
        if !(0.0..=1.0).contains(&u) {
            continue;
        }
        let q = s.cross(&e1);
        let v = d.dot(&q) * inv;
        if v < 0.0 || u + v > 1.0 {
            continue;
        }
        let dist = e2.dot(&q) * inv;
        if dist > 1e-12 && best.map_or(true, |b| dist < b) {
            best = Some(dist);
        }
    }
    best
}

/// Closest point on triangle `abc` to `p` (Voronoi-region walk).
pub fn closest_on_triangle(p: &Point, a: &Point, b: &Point, c: &Point) -> Point {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return a + ab * (d1 / (d1 - d3));
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return a + ac * (d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = 1.0 / (va + vb + vc);
    a + ab * (vb * denom) + ac * (vc * denom)
}

pub fn distance_to_mesh(mesh: &TriangleMesh, p: &Point) -> f64 {
    (0..mesh.triangles.len())
        .map(|t| {
            let [a, b, c] = mesh.triangle(t);
            (closest_on_triangle(p, &a, &b, &c) - p).norm()
        })
        .fold(f64::INFINITY, f64::min)
}

pub fn brute_nn(q: &Point, cloud: &[Point]) -> f64 {
    cloud.iter().map(|p| (p - q).norm()).fold(f64::INFINITY, f64::min)
}

pub fn brute_cr(recon: &[Point], gt: &[Point], tau: f64) -> f64 {
    gt.iter().filter(|g| brute_nn(g, recon) <= tau).count() as f64 / gt.len() as f64
}

pub fn brute_cd(a: &[Point], b: &[Point]) -> f64 {
    let ab = a.iter().map(|p| brute_nn(p, b)).sum::<f64>() / a.len() as f64;
    let ba = b.iter().map(|p| brute_nn(p, a)).sum::<f64>() / b.len() as f64;
    0.5 * ab + 0.5 * ba
}

/// Exhaustive scan for the collision-free projection: `p` itself when it sits
/// in a qualifying voxel inside the height band, otherwise the nearest
/// qualifying center with ties to the lexicographically smallest index.
pub fn exhaustive_nearest_free(grid: &VoxelGrid, p: &Point, cap: f64, floor: f64) -> Option<Point> {
    let f = grid.frame();
    let ok = |v: VoxelIndex| {
        let z = f.center(v).z;
        grid.is_free(v) && z <= cap && z >= floor
    };
    if let Some(v) = f.world_to_voxel(p) {
        if ok(v) && p.z <= cap && p.z >= floor {
            return Some(*p);
        }
    }
    let mut best: Option<(f64, VoxelIndex)> = None;
    for i in 0..f.resolution {
        for j in 0..f.resolution {
            for k in 0..f.resolution {
                let v = VoxelIndex::new(i, j, k);
                if !ok(v) {
                    continue;
                }
                let d = (f.center(v) - p).norm();
                if best.map_or(true, |(bd, _)| d < bd) {
                    best = Some((d, v));
                }
            }
        }
    }
    best.map(|(_, v)| f.center(v))
}

pub fn scene(name: &str, mesh: &TriangleMesh, center: [f64; 2], cfg: &EnvConfig, points: usize) -> Arc<Scene> {
    let frame = cfg.frame().unwrap();
    let placement = SceneConfig::default().with_center(center);
    Arc::new(Scene::prepare(scene_id(name, center), mesh, &placement, frame, points, 1).unwrap())
}

pub fn small_env(mesh: &TriangleMesh, side: usize) -> Environment {
    let cfg = EnvConfig {
        width: side,
        height: side,
        stop_at_target: false,
        ..EnvConfig::default()
    };
    let s = scene("test", mesh, [0.0, 0.0], &cfg, 5000);
    Environment::new(s, cfg).unwrap()
}

/// Per-step invariant violations: new face bits must face the capture
/// position, coverage must not shrink and the capture position must be a
/// fixed point of the projection on the grid it was chosen from.
pub fn step_violations(before: &VoxelGrid, prev_coverage: f64, r: &StepResult, floor: f64) -> Vec<String> {
    let mut out = Vec::new();
    let f = *before.frame();
    let cam = r.obs.pose.position;
    for l in 0..f.voxel_count() {
        let added = r.obs.grid.face_masks()[l].difference(before.face_masks()[l]);
        if added.is_empty() {
            continue;
        }
        let c = f.center(f.unlinear(l));
        for face in added.faces() {
            if face.normal().dot(&(cam - c)) <= 0.0 {
                out.push(format!("step {}: face {face:?} of voxel {l} marked from {cam}", r.info.step));
            }
        }
    }
    if r.face_coverage < prev_coverage {
        out.push(format!("step {}: coverage decreased", r.info.step));
    }
    match before.nearest_collision_free(&r.info.a_prime, r.info.height_cap, floor) {
        Ok(p) if p == r.info.a_prime => {}
        other => out.push(format!("step {}: a' {} not a fixed point ({other:?})", r.info.step, r.info.a_prime)),
    }
    out
}
