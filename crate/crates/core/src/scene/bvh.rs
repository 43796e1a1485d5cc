//! Median-split bounding-volume hierarchy over a triangle mesh.

use crate::geometry::{Ray, Vec3};

use super::mesh::{Hit, TriangleMesh};

const LEAF_SIZE: usize = 4;

#[derive(Debug, Clone, Copy)]
struct Aabb {
    lo: Vec3,
    hi: Vec3,
}

impl Aabb {
    fn empty() -> Self {
        Self {
            lo: Vec3::repeat(f64::INFINITY),
            hi: Vec3::repeat(f64::NEG_INFINITY),
        }
    }

    fn grow(&mut self, p: &Vec3) {
        self.lo = self.lo.inf(p);
        self.hi = self.hi.sup(p);
    }

    /// Entry distance of the ray into the box if it is hit before `t_max`.
    fn hit(&self, origin: &Vec3, inv_dir: &Vec3, t_max: f64) -> Option<f64> {
        let mut t0 = 0.0f64;
        let mut t1 = t_max;
        for axis in 0..3 {
            let a = (self.lo[axis] - origin[axis]) * inv_dir[axis];
            let b = (self.hi[axis] - origin[axis]) * inv_dir[axis];
            let (near, far) = if a <= b { (a, b) } else { (b, a) };
            // NaN (0·∞) keeps the previous bound
            if near > t0 {
                t0 = near;
            }
            if far < t1 {
                t1 = far;
            }
        }
        (t0 <= t1).then_some(t0)
    }
}

#[derive(Debug, Clone, Copy)]
struct Node {
    bounds: Aabb,
    /// Leaf: first entry in `order`; interior: index of the left child (right is left + 1).
    start: u32,
    /// Number of triangles for a leaf, zero for an interior node.
    count: u32,
}

/// Immutable acceleration structure; queries return exactly what a brute-force
/// scan over all triangles would (nearest distance, ties to the lower index).
#[derive(Debug, Clone)]
pub struct Bvh {
    nodes: Vec<Node>,
    order: Vec<u32>,
}

impl Bvh {
    pub fn build(mesh: &TriangleMesh) -> Self {
        let n = mesh.triangles.len();
        let centroids: Vec<Vec3> = (0..n)
            .map(|t| {
                let [a, b, c] = mesh.triangle_vertices(t);
                (a + b + c) / 3.0
            })
            .collect();
        let mut bvh = Bvh {
            nodes: Vec::with_capacity(2 * n / LEAF_SIZE + 1),
            order: (0..n as u32).collect(),
        };
        if n == 0 {
            return bvh;
        }
        bvh.nodes.push(Node {
            bounds: Aabb::empty(),
            start: 0,
            count: 0,
        });
        bvh.subdivide(mesh, &centroids, 0, 0, n);
        bvh
    }

    fn subdivide(&mut self, mesh: &TriangleMesh, centroids: &[Vec3], node: usize, start: usize, end: usize) {
        let mut bounds = Aabb::empty();
        let mut cbounds = Aabb::empty();
        for &t in &self.order[start..end] {
            for v in mesh.triangle_vertices(t as usize) {
                bounds.grow(&v);
            }
            cbounds.grow(&centroids[t as usize]);
        }
        self.nodes[node].bounds = bounds;
        let extent = cbounds.hi - cbounds.lo;
        if end - start <= LEAF_SIZE || extent.max() <= 0.0 {
            self.nodes[node].start = start as u32;
            self.nodes[node].count = (end - start) as u32;
            return;
        }
        let axis = extent.imax();
        let mid = (start + end) / 2;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            centroids[a as usize][axis]
                .total_cmp(&centroids[b as usize][axis])
                .then(a.cmp(&b))
        });
        let left = self.nodes.len();
        let empty = Node {
            bounds: Aabb::empty(),
            start: 0,
            count: 0,
        };
        self.nodes.push(empty);
        self.nodes.push(empty);
        self.nodes[node].start = left as u32;
        self.nodes[node].count = 0;
        self.subdivide(mesh, centroids, left, start, mid);
        self.subdivide(mesh, centroids, left + 1, mid, end);
    }

    pub fn intersect(&self, ray: &Ray, mesh: &TriangleMesh) -> Option<Hit> {
        if self.nodes.is_empty() {
            return None;
        }
        let inv_dir = ray.direction.map(|d| 1.0 / d);
        let mut best: Option<Hit> = None;
        let mut best_t = f64::INFINITY;
        let mut stack = Vec::with_capacity(64);
        stack.push(0usize);
        while let Some(index) = stack.pop() {
            let node = &self.nodes[index];
            if node.bounds.hit(&ray.origin, &inv_dir, best_t).is_none() {
                continue;
            }
            if node.count > 0 {
                let s = node.start as usize;
                for &t in &self.order[s..s + node.count as usize] {
                    if let Some(hit) = mesh.intersect_triangle(ray, t as usize) {
                        let better = match &best {
                            None => true,
                            Some(b) => {
                                hit.distance < b.distance
                                    || (hit.distance == b.distance && hit.triangle < b.triangle)
                            }
                        };
                        if better {
                            best_t = hit.distance;
                            best = Some(hit);
                        }
                    }
                }
            } else {
                let left = node.start as usize;
                let near_left = self.nodes[left].bounds.hit(&ray.origin, &inv_dir, best_t);
                let near_right = self.nodes[left + 1].bounds.hit(&ray.origin, &inv_dir, best_t);
                match (near_left, near_right) {
                    (Some(a), Some(b)) => {
                        // visit the nearer child first
                        if a <= b {
                            stack.push(left + 1);
                            stack.push(left);
                        } else {
                            stack.push(left);
                            stack.push(left + 1);
                        }
                    }
                    (Some(_), None) => stack.push(left),
                    (None, Some(_)) => stack.push(left + 1),
                    (None, None) => {}
                }
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_force(ray: &Ray, mesh: &TriangleMesh) -> Option<Hit> {
        let mut best: Option<Hit> = None;
        for t in 0..mesh.triangles.len() {
            if let Some(h) = mesh.intersect_triangle(ray, t) {
                if best.map_or(true, |b| h.distance < b.distance) {
                    best = Some(h);
                }
            }
        }
        best
    }

    fn random_soup(rng: &mut ChaCha8Rng, n: usize) -> TriangleMesh {
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        for t in 0..n {
            let c = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            for _ in 0..3 {
                vertices.push(c + Vec3::new(rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2)));
            }
            let b = 3 * t as u32;
            triangles.push([b, b + 1, b + 2]);
        }
        TriangleMesh::new(vertices, triangles, None).unwrap()
    }

    #[test]
    fn agrees_with_brute_force_on_random_rays() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mesh = random_soup(&mut rng, 500);
        let bvh = Bvh::build(&mesh);
        let mut hits = 0;
        for _ in 0..1000 {
            let origin = Vec3::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
            let aim = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let ray = Ray::new(origin, aim - origin);
            let fast = bvh.intersect(&ray, &mesh);
            let slow = brute_force(&ray, &mesh);
            match (fast, slow) {
                (Some(a), Some(b)) => {
                    hits += 1;
                    assert_eq!(a.triangle, b.triangle);
                    assert!((a.distance - b.distance).abs() < 1e-9);
                }
                (None, None) => {}
                other => panic!("bvh and brute force disagree: {other:?}"),
            }
        }
        assert!(hits > 200, "too few hits ({hits}) to be a meaningful check");
    }

    #[test]
    fn axis_aligned_rays_with_zero_components() {
        let mesh = TriangleMesh::new(
            vec![Vec3::new(-1.0, -1.0, 0.0), Vec3::new(1.0, -1.0, 0.0), Vec3::new(0.0, 1.0, 0.0)],
            vec![[0, 1, 2]],
            None,
        )
        .unwrap();
        let bvh = Bvh::build(&mesh);
        let ray = Ray::new(Vec3::new(0.0, 0.0, 5.0), Vec3::new(0.0, 0.0, -1.0));
        let hit = bvh.intersect(&ray, &mesh).unwrap();
        assert!((hit.distance - 5.0).abs() < 1e-12);
    }

    #[test]
    fn empty_mesh_never_hits() {
        let mesh = TriangleMesh::new(vec![], vec![], None).unwrap();
        let bvh = Bvh::build(&mesh);
        assert!(bvh.intersect(&Ray::new(Vec3::zeros(), Vec3::x()), &mesh).is_none());
    }
}
