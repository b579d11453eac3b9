mod common;

use common::{brute_ray, distance_to_mesh};
use nbv_core::camera::{render_depth, unproject, Bvh, Intrinsics, Pose};
use nbv_core::scene::{normalize_and_place, prune_invisible, shapes, voxelize, GroundTruth, SceneConfig, TriangleMesh};
use nbv_core::voxel_grid::{Face, GridFrame, VoxelIndex};
use nbv_core::Point;

fn placed(mesh: &TriangleMesh) -> TriangleMesh {
    normalize_and_place(mesh, &SceneConfig::default()).unwrap()
}

fn test_meshes() -> Vec<(&'static str, TriangleMesh)> {
    vec![
        ("icosphere", placed(&shapes::icosphere(2))),
        ("torus", placed(&shapes::torus(1.0, 0.35, 24, 12))),
        ("gable_house", placed(&shapes::gable_house())),
    ]
}

fn poses() -> Vec<Pose> {
    let target = Point::new(0.0, 0.0, 5.0);
    [
        Point::new(9.0, 0.5, 6.0),
        Point::new(-6.0, 7.0, 9.5),
        Point::new(0.3, -8.5, 1.2),
        Point::new(2.0, 2.0, 19.0),
    ]
    .iter()
    .map(|p| Pose::from_lookat(*p, target).unwrap())
    .collect()
}

#[test]
fn render_matches_brute_force_intersection() {
    let intr = Intrinsics::new(64, 64, std::f64::consts::FRAC_PI_3).unwrap();
    for (name, mesh) in test_meshes() {
        let bvh = Bvh::build(&mesh);
        for pose in poses() {
            let depth = render_depth(&bvh, &pose, &intr, 100.0);
            let basis = pose.basis();
            for v in 0..64 {
                for u in 0..64 {
                    let dir = intr.ray_direction(&basis, u, v);
                    let want = brute_ray(&mesh, &pose.position, &dir);
                    let got = depth.get(u, v);
                    match (want, got) {
                        (Some(w), Some(g)) => {
                            assert!((w - g).abs() <= 1e-6 * w, "{name} ({u},{v}): {g} vs {w}")
                        }
                        (None, None) => {}
                        _ => panic!("{name} ({u},{v}): hit mismatch {got:?} vs {want:?}"),
                    }
                }
            }
        }
    }
}

#[test]
fn unprojected_points_lie_on_the_mesh() {
    let intr = Intrinsics::new(48, 48, std::f64::consts::FRAC_PI_3).unwrap();
    for (name, mesh) in test_meshes() {
        let bvh = Bvh::build(&mesh);
        for pose in poses() {
            let depth = render_depth(&bvh, &pose, &intr, 100.0);
            let pts = unproject(&depth, &pose, &intr);
            assert_eq!(pts.len(), depth.hit_count());
            for p in pts.iter().step_by(7) {
                let d = distance_to_mesh(&mesh, p);
                assert!(d <= 1e-4, "{name}: point {p} is {d} m off the surface");
            }
        }
    }
}

fn frame() -> GridFrame {
    GridFrame::scene_volume(20, 20.0).unwrap()
}

#[test]
fn voxelized_solid_cubes_expose_six_s_squared_faces() {
    let f = frame();
    for s in [2usize, 5, 10] {
        // axis-aligned box spanning exactly s voxels per side
        let lo = Point::new(-3.0, -4.0, 2.0);
        let hi = lo + nbv_core::Vec3::repeat(s as f64);
        let mesh = shapes::box_mesh(lo, hi);
        let occ = voxelize(&mesh, &f).unwrap();
        // the voxelizer marks the surface shell; the enclosed core stays empty
        let core = s.saturating_sub(2).pow(3);
        assert_eq!(occ.iter().filter(|o| **o).count(), s * s * s - core);
        let gt = GroundTruth::build(&mesh, f, 1000, 0).unwrap();
        assert_eq!(gt.visible_face_count(), 6 * (s * s) as u64, "s = {s}");
    }
}

#[test]
fn sealed_cavity_faces_are_never_visible() {
    let f = frame();
    let mut occ = vec![false; f.voxel_count()];
    let (lo, hi) = (5usize, 12usize);
    let inside = |v: VoxelIndex| [v.i, v.j, v.k].iter().all(|c| (lo + 1..hi).contains(c));
    let shell = |v: VoxelIndex| [v.i, v.j, v.k].iter().all(|c| (lo..=hi).contains(c)) && !inside(v);
    for v in f.indices() {
        if shell(v) {
            occ[f.linear(v)] = true;
        }
    }
    let r = prune_invisible(&occ, &f);
    let side = (hi - lo + 1) as u64;
    let total: u64 = r.visible.iter().map(|m| m.count() as u64).sum();
    assert_eq!(total, 6 * side * side);
    for v in f.indices() {
        if inside(v) {
            assert!(!r.reachable[f.linear(v)]);
        }
        if !shell(v) {
            continue;
        }
        let m = r.visible[f.linear(v)];
        for face in Face::ALL {
            if let Some(n) = f.neighbor(v, face) {
                if inside(n) {
                    assert!(!m.contains(face), "{v:?} exposes {face:?} into the cavity");
                }
            }
        }
    }
}

#[test]
fn visible_faces_only_open_onto_reachable_space() {
    let f = frame();
    for (_, mesh) in test_meshes() {
        let gt = GroundTruth::build(&mesh, f, 1000, 0).unwrap();
        for v in gt.surface_voxels() {
            for face in gt.visible(v).faces() {
                match f.neighbor(v, face) {
                    Some(n) => assert!(gt.is_reachable(n) && !gt.is_occupied(n)),
                    None => {}
                }
            }
        }
    }
}
