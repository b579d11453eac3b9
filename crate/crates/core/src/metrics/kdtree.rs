use crate::Point;

const LEAF: usize = 8;

#[derive(Clone, Debug)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

/// Static 3-d tree over a point set, answering nearest-neighbour and
/// fixed-radius queries with Euclidean distance.
#[derive(Clone, Debug)]
pub struct KdTree {
    points: Vec<Point>,
    ids: Vec<usize>,
    nodes: Vec<Node>,
}

fn dist(a: &Point, b: &Point) -> f64 {
    let (dx, dy, dz) = (a.x - b.x, a.y - b.y, a.z - b.z);
    (dx * dx + dy * dy + dz * dz).sqrt()
}

impl KdTree {
    pub fn build(points: &[Point]) -> KdTree {
        let mut tree = KdTree {
            points: points.to_vec(),
            ids: (0..points.len()).collect(),
            nodes: Vec::new(),
        };
        if !points.is_empty() {
            tree.build_range(0, points.len());
        }
        tree
    }

    fn build_range(&mut self, start: usize, end: usize) -> usize {
        let slot = self.nodes.len();
        self.nodes.push(Node::Leaf { start, end });
        if end - start <= LEAF {
            return slot;
        }
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in &self.points[start..end] {
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        let axis = (0..3)
            .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
            .unwrap();
        if hi[axis] == lo[axis] {
            return slot;
        }
        let mid = (start + end) / 2;
        let mut pairs: Vec<(Point, usize)> = self.points[start..end]
            .iter()
            .copied()
            .zip(self.ids[start..end].iter().copied())
            .collect();
        pairs.select_nth_unstable_by(mid - start, |x, y| x.0[axis].total_cmp(&y.0[axis]));
        for (o, (p, id)) in pairs.into_iter().enumerate() {
            self.points[start + o] = p;
            self.ids[start + o] = id;
        }
        let value = self.points[mid][axis];
        let left = self.build_range(start, mid);
        let right = self.build_range(mid, end);
        self.nodes[slot] = Node::Split { axis, value, left, right };
        slot
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index (into the input slice) and distance of the nearest point.
    pub fn nearest(&self, q: &Point) -> Option<(usize, f64)> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = (usize::MAX, f64::INFINITY);
        self.nearest_in(0, q, &mut best);
        Some(best)
    }

    fn nearest_in(&self, node: usize, q: &Point, best: &mut (usize, f64)) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for s in start..end {
                    let d = dist(&self.points[s], q);
                    if d < best.1 || (d == best.1 && self.ids[s] < best.0) {
                        *best = (self.ids[s], d);
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.nearest_in(near, q, best);
                if diff.abs() <= best.1 {
                    self.nearest_in(far, q, best);
                }
            }
        }
    }

    /// Calls `f` with the input index of every point within `radius` of `q`
    /// (inclusive).
    pub fn within(&self, q: &Point, radius: f64, mut f: impl FnMut(usize)) {
        if !self.points.is_empty() {
            self.within_in(0, q, radius, &mut f);
        }
    }

    fn within_in(&self, node: usize, q: &Point, r: f64, f: &mut impl FnMut(usize)) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for s in start..end {
                    if dist(&self.points[s], q) <= r {
                        f(self.ids[s]);
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = q[axis] - value;
                if diff <= r {
                    self.within_in(left, q, r, f);
                }
                if -diff <= r {
                    self.within_in(right, q, r, f);
                }
            }
        }
    }
}
