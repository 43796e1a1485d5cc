//! Static kd-tree for exact k-nearest-neighbour queries.

/// Neighbour candidate ordered by squared distance, then by point index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub dist_sq: f64,
    pub index: u32,
}

impl Neighbor {
    fn before(&self, other: &Neighbor) -> bool {
        self.dist_sq < other.dist_sq || (self.dist_sq == other.dist_sq && self.index < other.index)
    }
}

const LEAF: usize = 8;

#[derive(Debug, Clone, Copy)]
enum Node {
    Leaf { start: u32, end: u32 },
    Split { axis: u8, value: f64, left: u32, right: u32 },
}

#[derive(Debug, Clone)]
pub struct KdTree<'a> {
    points: &'a [[f32; 3]],
    order: Vec<u32>,
    nodes: Vec<Node>,
}

fn coord(p: &[f32; 3], axis: usize) -> f64 {
    p[axis] as f64
}

pub fn dist_sq(a: &[f32; 3], b: &[f32; 3]) -> f64 {
    let dx = a[0] as f64 - b[0] as f64;
    let dy = a[1] as f64 - b[1] as f64;
    let dz = a[2] as f64 - b[2] as f64;
    dx * dx + dy * dy + dz * dz
}

impl<'a> KdTree<'a> {
    pub fn build(points: &'a [[f32; 3]]) -> Self {
        let mut tree = KdTree {
            points,
            order: (0..points.len() as u32).collect(),
            nodes: Vec::new(),
        };
        if !points.is_empty() {
            tree.build_node(0, points.len());
        }
        tree
    }

    fn build_node(&mut self, start: usize, end: usize) -> u32 {
        let id = self.nodes.len() as u32;
        if end - start <= LEAF {
            self.nodes.push(Node::Leaf {
                start: start as u32,
                end: end as u32,
            });
            return id;
        }
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &i in &self.order[start..end] {
            for a in 0..3 {
                let v = coord(&self.points[i as usize], a);
                lo[a] = lo[a].min(v);
                hi[a] = hi[a].max(v);
            }
        }
        let axis = (0..3)
            .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
            .unwrap();
        if hi[axis] - lo[axis] <= 0.0 {
            // all points coincide
            self.nodes.push(Node::Leaf {
                start: start as u32,
                end: end as u32,
            });
            return id;
        }
        let mid = (start + end) / 2;
        let points = self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            coord(&points[a as usize], axis)
                .total_cmp(&coord(&points[b as usize], axis))
                .then(a.cmp(&b))
        });
        let value = coord(&points[self.order[mid] as usize], axis);
        self.nodes.push(Node::Leaf { start: 0, end: 0 });
        let left = self.build_node(start, mid);
        let right = self.build_node(mid, end);
        self.nodes[id as usize] = Node::Split {
            axis: axis as u8,
            value,
            left,
            right,
        };
        id
    }

    /// The `k` nearest points to point `query`, excluding `query` itself,
    /// sorted by (distance, index).
    pub fn nearest_excluding(&self, query: usize, k: usize) -> Vec<Neighbor> {
        let mut best = Vec::with_capacity(k + 1);
        if k == 0 || self.nodes.is_empty() {
            return best;
        }
        let q = &self.points[query];
        self.search(0, q, query as u32, k, &mut best);
        best
    }

    fn search(&self, node: u32, q: &[f32; 3], skip: u32, k: usize, best: &mut Vec<Neighbor>) {
        match self.nodes[node as usize] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start as usize..end as usize] {
                    if i == skip {
                        continue;
                    }
                    let cand = Neighbor {
                        dist_sq: dist_sq(q, &self.points[i as usize]),
                        index: i,
                    };
                    if best.len() == k && !cand.before(&best[k - 1]) {
                        continue;
                    }
                    let pos = best.partition_point(|n| n.before(&cand));
                    best.insert(pos, cand);
                    best.truncate(k);
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = coord(q, axis as usize) - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, skip, k, best);
                // points equal to the split value can sit on either side, so ties must be visited
                if best.len() < k || diff * diff <= best[k - 1].dist_sq {
                    self.search(far, q, skip, k, best);
                }
            }
        }
    }
}
