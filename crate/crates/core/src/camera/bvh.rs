//! Bounding volume hierarchy over a triangle mesh.
//!
//! Binned SAH split on the widest centroid axis, falling back to a median
//! split when SAH finds no useful partition. Leaves hold at most
//! [`MAX_LEAF`] triangles.

use crate::scene::TriangleMesh;
use crate::{Point, Vec3};

const MAX_LEAF: usize = 4;
const BINS: usize = 12;
const T_MIN: f64 = 1e-9;

#[derive(Clone, Copy, Debug)]
struct Aabb {
    min: [f64; 3],
    max: [f64; 3],
}

impl Aabb {
    const EMPTY: Aabb = Aabb {
        min: [f64::INFINITY; 3],
        max: [f64::NEG_INFINITY; 3],
    };

    fn grow(&mut self, p: &[f64; 3]) {
        for a in 0..3 {
            self.min[a] = self.min[a].min(p[a]);
            self.max[a] = self.max[a].max(p[a]);
        }
    }

    fn merge(&mut self, o: &Aabb) {
        self.grow(&o.min);
        self.grow(&o.max);
    }

    fn area(&self) -> f64 {
        let d = [
            self.max[0] - self.min[0],
            self.max[1] - self.min[1],
            self.max[2] - self.min[2],
        ];
        if d.iter().any(|v| *v < 0.0) {
            return 0.0;
        }
        2.0 * (d[0] * d[1] + d[1] * d[2] + d[2] * d[0])
    }

    /// Slab test; returns the entry distance if the box is hit before `t_max`.
    #[inline]
    fn hit(&self, o: &[f64; 3], inv: &[f64; 3], t_max: f64) -> Option<f64> {
        let mut t0 = 0.0f64;
        let mut t1 = t_max;
        for a in 0..3 {
            let ta = (self.min[a] - o[a]) * inv[a];
            let tb = (self.max[a] - o[a]) * inv[a];
            let (lo, hi) = if ta <= tb { (ta, tb) } else { (tb, ta) };
            // NaN (0 * inf) leaves the bound untouched
            if lo > t0 {
                t0 = lo;
            }
            if hi < t1 {
                t1 = hi;
            }
        }
        (t0 <= t1).then_some(t0)
    }
}

#[derive(Clone, Copy, Debug)]
struct Node {
    bounds: Aabb,
    /// Leaf: first primitive slot. Interior: index of the left child (right = left + 1).
    start: u32,
    count: u32,
}

#[derive(Clone, Copy, Debug)]
struct Tri {
    v0: Vec3,
    e1: Vec3,
    e2: Vec3,
}

/// A ray–triangle hit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hit {
    pub t: f64,
    /// Index into the source mesh's triangle list.
    pub triangle: usize,
}

/// Immutable acceleration structure; safe to share across threads.
#[derive(Clone, Debug)]
pub struct Bvh {
    nodes: Vec<Node>,
    tris: Vec<Tri>,
    /// BVH slot → mesh triangle index.
    order: Vec<u32>,
    normals: Vec<Vec3>,
}

impl Bvh {
    pub fn build(mesh: &TriangleMesh) -> Bvh {
        let n = mesh.triangles.len();
        let corners: Vec<[Point; 3]> = (0..n).map(|t| mesh.triangle(t)).collect();
        let centroids: Vec<[f64; 3]> = corners
            .iter()
            .map(|c| {
                let m = (c[0].coords + c[1].coords + c[2].coords) / 3.0;
                [m.x, m.y, m.z]
            })
            .collect();
        let boxes: Vec<Aabb> = corners
            .iter()
            .map(|c| {
                let mut b = Aabb::EMPTY;
                for p in c {
                    b.grow(&[p.x, p.y, p.z]);
                }
                b
            })
            .collect();
        let normals = corners
            .iter()
            .map(|c| {
                let n = (c[1] - c[0]).cross(&(c[2] - c[0]));
                let len = n.norm();
                if len > 0.0 {
                    n / len
                } else {
                    Vec3::zeros()
                }
            })
            .collect();

        let mut order: Vec<u32> = (0..n as u32).collect();
        let mut nodes = Vec::with_capacity(2 * n.max(1));
        nodes.push(Node {
            bounds: Aabb::EMPTY,
            start: 0,
            count: n as u32,
        });
        let mut stack = vec![0usize];
        while let Some(ni) = stack.pop() {
            let (start, count) = (nodes[ni].start as usize, nodes[ni].count as usize);
            let slots = &mut order[start..start + count];
            let mut bounds = Aabb::EMPTY;
            let mut cbounds = Aabb::EMPTY;
            for &t in slots.iter() {
                bounds.merge(&boxes[t as usize]);
                cbounds.grow(&centroids[t as usize]);
            }
            nodes[ni].bounds = bounds;
            if count <= MAX_LEAF {
                continue;
            }
            let mid = split(slots, &centroids, &boxes, &cbounds);
            let left = nodes.len();
            nodes.push(Node {
                bounds: Aabb::EMPTY,
                start: start as u32,
                count: mid as u32,
            });
            nodes.push(Node {
                bounds: Aabb::EMPTY,
                start: (start + mid) as u32,
                count: (count - mid) as u32,
            });
            nodes[ni].start = left as u32;
            nodes[ni].count = 0;
            stack.push(left + 1);
            stack.push(left);
        }

        let tris = order
            .iter()
            .map(|&t| {
                let c = corners[t as usize];
                Tri {
                    v0: c[0].coords,
                    e1: c[1] - c[0],
                    e2: c[2] - c[0],
                }
            })
            .collect();
        Bvh {
            nodes,
            tris,
            order,
            normals,
        }
    }

    pub fn triangle_count(&self) -> usize {
        self.tris.len()
    }

    /// Unit geometric normal of a mesh triangle (zero for degenerate ones).
    pub fn normal(&self, triangle: usize) -> Vec3 {
        self.normals[triangle]
    }

    /// Nearest hit with `t ∈ (0, t_max]`; equal distances resolve to the lowest
    /// mesh triangle index.
    pub fn intersect(&self, origin: &Point, dir: &Vec3, t_max: f64) -> Option<Hit> {
        if self.tris.is_empty() {
            return None;
        }
        let o = [origin.x, origin.y, origin.z];
        let inv = [1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z];
        let mut best_t = t_max;
        let mut best: Option<usize> = None;
        if self.nodes[0].bounds.hit(&o, &inv, best_t).is_none() {
            return None;
        }
        let mut stack: Vec<u32> = Vec::with_capacity(64);
        stack.push(0);
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni as usize];
            if node.count > 0 {
                let s = node.start as usize;
                for slot in s..s + node.count as usize {
                    if let Some(t) = intersect_tri(&self.tris[slot], &origin.coords, dir) {
                        if t < best_t
                            || (t == best_t
                                && best.map_or(true, |b| self.order[slot] < self.order[b]))
                        {
                            best_t = t;
                            best = Some(slot);
                        }
                    }
                }
                continue;
            }
            let l = node.start;
            let hl = self.nodes[l as usize].bounds.hit(&o, &inv, best_t);
            let hr = self.nodes[l as usize + 1].bounds.hit(&o, &inv, best_t);
            match (hl, hr) {
                (Some(a), Some(b)) => {
                    if a <= b {
                        stack.push(l + 1);
                        stack.push(l);
                    } else {
                        stack.push(l);
                        stack.push(l + 1);
                    }
                }
                (Some(_), None) => stack.push(l),
                (None, Some(_)) => stack.push(l + 1),
                (None, None) => {}
            }
        }
        best.map(|slot| Hit {
            t: best_t,
            triangle: self.order[slot] as usize,
        })
    }
}

/// Möller–Trumbore, two-sided.
#[inline]
fn intersect_tri(tri: &Tri, o: &Vec3, d: &Vec3) -> Option<f64> {
    let p = d.cross(&tri.e2);
    let det = tri.e1.dot(&p);
    if det == 0.0 {
        return None;
    }
    let inv = 1.0 / det;
    let s = o - tri.v0;
    let u = s.dot(&p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(&tri.e1);
    let v = d.dot(&q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = tri.e2.dot(&q) * inv;
    (t > T_MIN).then_some(t)
}

/// Partitions `slots` in place and returns the size of the left half.
fn split(slots: &mut [u32], centroids: &[[f64; 3]], boxes: &[Aabb], cb: &Aabb) -> usize {
    let count = slots.len();
    let extent = [
        cb.max[0] - cb.min[0],
        cb.max[1] - cb.min[1],
        cb.max[2] - cb.min[2],
    ];
    let axis = (0..3)
        .max_by(|a, b| extent[*a].total_cmp(&extent[*b]))
        .unwrap();
    let median = |slots: &mut [u32]| {
        let mid = count / 2;
        slots.select_nth_unstable_by(mid, |a, b| {
            centroids[*a as usize][axis]
                .total_cmp(&centroids[*b as usize][axis])
                .then(a.cmp(b))
        });
        mid
    };
    if extent[axis] <= 0.0 {
        return median(slots);
    }

    let bin_of = |t: u32| {
        let f = (centroids[t as usize][axis] - cb.min[axis]) / extent[axis];
        ((f * BINS as f64) as usize).min(BINS - 1)
    };
    let mut bin_box = [Aabb::EMPTY; BINS];
    let mut bin_count = [0usize; BINS];
    for &t in slots.iter() {
        let b = bin_of(t);
        bin_count[b] += 1;
        bin_box[b].merge(&boxes[t as usize]);
    }
    let mut right_area = [0.0; BINS];
    let mut acc = Aabb::EMPTY;
    let mut acc_n = 0;
    let mut right_n = [0usize; BINS];
    for b in (1..BINS).rev() {
        acc.merge(&bin_box[b]);
        acc_n += bin_count[b];
        right_area[b] = acc.area();
        right_n[b] = acc_n;
    }
    let mut best = (f64::INFINITY, 0usize);
    let mut left = Aabb::EMPTY;
    let mut left_n = 0;
    for b in 0..BINS - 1 {
        left.merge(&bin_box[b]);
        left_n += bin_count[b];
        if left_n == 0 || right_n[b + 1] == 0 {
            continue;
        }
        let cost = left.area() * left_n as f64 + right_area[b + 1] * right_n[b + 1] as f64;
        if cost < best.0 {
            best = (cost, b);
        }
    }
    if !best.0.is_finite() {
        return median(slots);
    }
    let mut i = 0;
    for j in 0..count {
        if bin_of(slots[j]) <= best.1 {
            slots.swap(i, j);
            i += 1;
        }
    }
    if i == 0 || i == count {
        median(slots)
    } else {
        i
    }
}
