//! Procedural test meshes, including the six-mesh benchmark suite.

use std::collections::HashMap;
use std::f64::consts::PI;

use super::TriangleMesh;
use crate::{Point, Vec3};

/// Closed convex polyhedron from polygon faces. Each polygon is fan-split and
/// its triangles are wound to face away from the vertex centroid.
fn convex(vertices: Vec<Point>, faces: &[&[u32]]) -> TriangleMesh {
    let c = vertices.iter().fold(Vec3::zeros(), |a, v| a + v.coords) / vertices.len() as f64;
    let mut triangles = Vec::new();
    for f in faces {
        let fc = f.iter().fold(Vec3::zeros(), |a, &i| a + vertices[i as usize].coords) / f.len() as f64;
        for w in 1..f.len() - 1 {
            let t = [f[0], f[w], f[w + 1]];
            let [a, b, d] = t.map(|i| vertices[i as usize]);
            let n = (b - a).cross(&(d - a));
            triangles.push(if n.dot(&(fc - c)) >= 0.0 { t } else { [t[0], t[2], t[1]] });
        }
    }
    TriangleMesh { vertices, triangles }
}

fn flipped(mut m: TriangleMesh) -> TriangleMesh {
    for t in &mut m.triangles {
        t.swap(1, 2);
    }
    m
}

/// Axis-aligned box with outward winding.
pub fn box_mesh(min: Point, max: Point) -> TriangleMesh {
    let v = (0..8)
        .map(|b| {
            Point::new(
                if b & 1 == 0 { min.x } else { max.x },
                if b & 2 == 0 { min.y } else { max.y },
                if b & 4 == 0 { min.z } else { max.z },
            )
        })
        .collect();
    convex(
        v,
        &[
            &[1, 3, 7, 5],
            &[0, 4, 6, 2],
            &[2, 6, 7, 3],
            &[0, 1, 5, 4],
            &[4, 5, 7, 6],
            &[0, 2, 3, 1],
        ],
    )
}

/// The cube `[0,1]³`.
pub fn unit_cube() -> TriangleMesh {
    box_mesh(Point::origin(), Point::new(1.0, 1.0, 1.0))
}

/// Unit-radius icosphere: an icosahedron with `subdivisions` rounds of
/// midpoint splitting, vertices pushed back to the sphere.
pub fn icosphere(subdivisions: u32) -> TriangleMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<Point> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Point::from(Vec3::new(x, y, z).normalize()))
    .collect();
    let mut triangles: Vec<[u32; 3]> = vec![
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut mid: HashMap<(u32, u32), u32> = HashMap::new();
        let mut split = |a: u32, b: u32, vertices: &mut Vec<Point>| {
            *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                let m = (vertices[a as usize].coords + vertices[b as usize].coords).normalize();
                vertices.push(Point::from(m));
                (vertices.len() - 1) as u32
            })
        };
        triangles = triangles
            .iter()
            .flat_map(|&[a, b, c]| {
                let ab = split(a, b, &mut vertices);
                let bc = split(b, c, &mut vertices);
                let ca = split(c, a, &mut vertices);
                [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
            })
            .collect();
    }
    TriangleMesh { vertices, triangles }
}

/// Torus around the z axis with tube radius `minor` centred on a circle of
/// radius `major`.
pub fn torus(major: f64, minor: f64, seg_major: u32, seg_minor: u32) -> TriangleMesh {
    let mut vertices = Vec::with_capacity((seg_major * seg_minor) as usize);
    for i in 0..seg_major {
        let u = 2.0 * PI * i as f64 / seg_major as f64;
        for j in 0..seg_minor {
            let v = 2.0 * PI * j as f64 / seg_minor as f64;
            let r = major + minor * v.cos();
            vertices.push(Point::new(r * u.cos(), r * u.sin(), minor * v.sin()));
        }
    }
    let id = |i: u32, j: u32| (i % seg_major) * seg_minor + (j % seg_minor);
    let mut triangles = Vec::new();
    for i in 0..seg_major {
        for j in 0..seg_minor {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    TriangleMesh { vertices, triangles }
}

/// An L-shaped prism: a 3×1 bar with a 1×2 upright on one end, 1 deep.
pub fn l_shape() -> TriangleMesh {
    let mut m = box_mesh(Point::origin(), Point::new(3.0, 1.0, 1.0));
    m.merge(&box_mesh(Point::new(0.0, 0.0, 1.0), Point::new(1.0, 1.0, 3.0)));
    m
}

/// Gable-roofed house: a box shell under a prism roof that overhangs the
/// walls on every side, leaving soffits visible only from below.
pub fn gable_house() -> TriangleMesh {
    let (w, d, h, o, top) = (4.0, 3.0, 2.5, 0.4, 4.0);
    let mut m = box_mesh(Point::origin(), Point::new(w, d, h));
    let roof = convex(
        vec![
            Point::new(-o, -o, h),
            Point::new(w + o, -o, h),
            Point::new(w + o, d + o, h),
            Point::new(-o, d + o, h),
            Point::new(-o, d / 2.0, top),
            Point::new(w + o, d / 2.0, top),
        ],
        &[&[0, 1, 2, 3], &[0, 1, 5, 4], &[3, 2, 5, 4], &[0, 4, 3], &[1, 2, 5]],
    );
    m.merge(&roof);
    m
}

/// Hollow house: thick walls around a sealed inner room, a hip roof with
/// overhang, and a chimney through the roof slope.
pub fn hip_house() -> TriangleMesh {
    let (w, d, h, o, top) = (4.0, 4.0, 2.5, 0.4, 4.0);
    let mut m = box_mesh(Point::origin(), Point::new(w, d, h));
    m.merge(&flipped(box_mesh(Point::new(0.8, 0.8, 0.5), Point::new(w - 0.8, d - 0.8, h - 0.5))));
    let inset = 1.2;
    let roof = convex(
        vec![
            Point::new(-o, -o, h),
            Point::new(w + o, -o, h),
            Point::new(w + o, d + o, h),
            Point::new(-o, d + o, h),
            Point::new(inset, d / 2.0, top),
            Point::new(w - inset, d / 2.0, top),
        ],
        &[&[0, 1, 2, 3], &[0, 1, 5, 4], &[3, 2, 5, 4], &[0, 4, 3], &[1, 2, 5]],
    );
    m.merge(&roof);
    m.merge(&box_mesh(Point::new(2.8, 0.6, h + 0.2), Point::new(3.4, 1.2, top + 0.6)));
    m
}

/// The benchmark suite as `(id, mesh)` pairs.
pub fn suite() -> Vec<(&'static str, TriangleMesh)> {
    vec![
        ("cube", unit_cube()),
        ("icosphere", icosphere(3)),
        ("l_shape", l_shape()),
        ("torus", torus(1.0, 0.35, 48, 24)),
        ("gable_house", gable_house()),
        ("hip_house", hip_house()),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Signed volume; positive for closed outward-wound meshes.
    fn volume(m: &TriangleMesh) -> f64 {
        (0..m.triangles.len())
            .map(|t| {
                let [a, b, c] = m.triangle(t);
                a.coords.dot(&b.coords.cross(&c.coords)) / 6.0
            })
            .sum()
    }

    #[test]
    fn box_is_closed_and_outward() {
        let m = box_mesh(Point::new(1.0, 2.0, 3.0), Point::new(2.0, 4.0, 6.0));
        assert_eq!(m.triangles.len(), 12);
        assert!((volume(&m) - 6.0).abs() < 1e-12);
        assert!((m.surface_area() - 22.0).abs() < 1e-12);
    }

    #[test]
    fn icosphere_counts_and_radius() {
        let m = icosphere(2);
        assert_eq!(m.triangles.len(), 20 * 16);
        assert_eq!(m.vertices.len(), 162);
        assert!(m.vertices.iter().all(|v| (v.coords.norm() - 1.0).abs() < 1e-12));
        let v = volume(&m);
        assert!(v > 0.0 && v < 4.0 / 3.0 * PI);
    }

    #[test]
    fn torus_volume_approaches_analytic() {
        let m = torus(1.0, 0.3, 96, 48);
        let exact = 2.0 * PI * PI * 1.0 * 0.09;
        assert!((volume(&m) - exact).abs() / exact < 0.01);
    }

    #[test]
    fn hollow_house_volume_excludes_room() {
        let solid = volume(&gable_house());
        assert!(solid > 0.0);
        let v = volume(&hip_house());
        let walls = 4.0 * 4.0 * 2.5 - 2.4 * 2.4 * 1.5;
        assert!(v > walls);
    }

    #[test]
    fn suite_has_six_valid_meshes() {
        let s = suite();
        assert_eq!(s.len(), 6);
        for (_, m) in s {
            assert!(TriangleMesh::new(m.vertices.clone(), m.triangles.clone()).is_ok());
            assert!(volume(&m) > 0.0);
        }
    }
}
