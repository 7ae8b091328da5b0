//! Axis-aligned bounding volume hierarchy over a triangle mesh.

use crate::scene::{Mesh, Vec3};

const LEAF_SIZE: usize = 4;
const EDGE_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug)]
struct Node {
    lo: Vec3,
    hi: Vec3,
    /// Leaf: first index into `order`. Interior: index of the right child
    /// (the left child directly follows its parent).
    offset: u32,
    /// Triangles in a leaf, zero for interior nodes.
    count: u32,
}

#[derive(Clone, Copy, Debug)]
struct Tri {
    v0: Vec3,
    e1: Vec3,
    e2: Vec3,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub triangle: usize,
    /// Barycentric weights of the second and third corners.
    pub u: f64,
    pub v: f64,
}

pub struct Bvh {
    nodes: Vec<Node>,
    order: Vec<u32>,
    tris: Vec<Tri>,
}

impl Bvh {
    pub fn build(mesh: &Mesh) -> Bvh {
        let tris: Vec<Tri> = (0..mesh.triangle_count())
            .map(|i| {
                let [a, b, c] = mesh.corners(i);
                Tri {
                    v0: a,
                    e1: b - a,
                    e2: c - a,
                }
            })
            .collect();
        let centroids: Vec<Vec3> = (0..tris.len())
            .map(|i| {
                let t = &tris[i];
                t.v0 + (t.e1 + t.e2) / 3.0
            })
            .collect();
        let mut order: Vec<u32> = (0..tris.len() as u32).collect();
        let mut bvh = Bvh {
            nodes: Vec::with_capacity(2 * tris.len() / LEAF_SIZE + 1),
            order: Vec::new(),
            tris,
        };
        bvh.build_node(&mut order, 0, &centroids);
        bvh.order = order;
        bvh
    }

    fn build_node(&mut self, items: &mut [u32], start: usize, centroids: &[Vec3]) -> usize {
        let (mut lo, mut hi) = (Vec3::repeat(f64::INFINITY), Vec3::repeat(f64::NEG_INFINITY));
        let (mut clo, mut chi) = (lo, hi);
        for &i in items.iter() {
            let t = &self.tris[i as usize];
            for p in [t.v0, t.v0 + t.e1, t.v0 + t.e2] {
                lo = lo.inf(&p);
                hi = hi.sup(&p);
            }
            let c = centroids[i as usize];
            clo = clo.inf(&c);
            chi = chi.sup(&c);
        }
        let index = self.nodes.len();
        self.nodes.push(Node {
            lo,
            hi,
            offset: start as u32,
            count: items.len() as u32,
        });
        let spread = chi - clo;
        let axis = spread.imax();
        if items.len() <= LEAF_SIZE || spread[axis] <= 0.0 {
            return index;
        }
        let mid = items.len() / 2;
        items.select_nth_unstable_by(mid, |&a, &b| {
            centroids[a as usize][axis]
                .total_cmp(&centroids[b as usize][axis])
                .then(a.cmp(&b))
        });
        let (left, right) = items.split_at_mut(mid);
        self.build_node(left, start, centroids);
        let right_index = self.build_node(right, start + mid, centroids);
        self.nodes[index].offset = right_index as u32;
        self.nodes[index].count = 0;
        index
    }

    pub fn triangle_count(&self) -> usize {
        self.tris.len()
    }

    /// Nearest intersection with parameter in `(t_min, t_max)`.
    pub fn closest_hit(&self, origin: &Vec3, dir: &Vec3, t_min: f64, t_max: f64) -> Option<Hit> {
        let mut best: Option<Hit> = None;
        let mut t_far = t_max;
        self.traverse(origin, dir, t_min, |tri, this_far| {
            if let Some(h) = intersect(&self.tris[tri], origin, dir, t_min, *this_far) {
                *this_far = h.t;
                best = Some(Hit { triangle: tri, ..h });
            }
            false
        }, &mut t_far);
        best
    }

    /// True when any triangle intersects within `(t_min, t_max)`.
    pub fn any_hit(&self, origin: &Vec3, dir: &Vec3, t_min: f64, t_max: f64) -> bool {
        let mut found = false;
        let mut t_far = t_max;
        self.traverse(origin, dir, t_min, |tri, this_far| {
            found = intersect(&self.tris[tri], origin, dir, t_min, *this_far).is_some();
            found
        }, &mut t_far);
        found
    }

    /// Visits leaf triangles whose boxes the ray enters before `t_far`;
    /// the visitor may shrink `t_far` and returns true to stop early.
    fn traverse(&self, origin: &Vec3, dir: &Vec3, t_min: f64, mut visit: impl FnMut(usize, &mut f64) -> bool, t_far: &mut f64) {
        if self.nodes.is_empty() {
            return;
        }
        let inv = Vec3::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);
        let mut stack = [0u32; 64];
        let mut top = 1;
        while top > 0 {
            top -= 1;
            let node = &self.nodes[stack[top] as usize];
            if slab(node, origin, &inv, t_min, *t_far).is_none() {
                continue;
            }
            if node.count > 0 {
                let start = node.offset as usize;
                for &tri in &self.order[start..start + node.count as usize] {
                    if visit(tri as usize, t_far) {
                        return;
                    }
                }
                continue;
            }
            let left = stack[top] + 1;
            let right = node.offset;
            let dl = slab(&self.nodes[left as usize], origin, &inv, t_min, *t_far);
            let dr = slab(&self.nodes[right as usize], origin, &inv, t_min, *t_far);
            match (dl, dr) {
                (Some(a), Some(b)) => {
                    // push the farther child first so the nearer pops next
                    let (near, far) = if a <= b { (left, right) } else { (right, left) };
                    stack[top] = far;
                    stack[top + 1] = near;
                    top += 2;
                }
                (Some(_), None) => {
                    stack[top] = left;
                    top += 1;
                }
                (None, Some(_)) => {
                    stack[top] = right;
                    top += 1;
                }
                (None, None) => {}
            }
        }
    }
}

/// Entry parameter of the ray into the node box, if it overlaps `(t_min, t_max)`.
#[inline]
fn slab(node: &Node, origin: &Vec3, inv: &Vec3, t_min: f64, t_max: f64) -> Option<f64> {
    let mut t0 = t_min;
    let mut t1 = t_max;
    for a in 0..3 {
        let mut near = (node.lo[a] - origin[a]) * inv[a];
        let mut far = (node.hi[a] - origin[a]) * inv[a];
        if near > far {
            std::mem::swap(&mut near, &mut far);
        }
        // NaN (0·∞ on a box face) leaves the bounds untouched
        if near > t0 {
            t0 = near;
        }
        if far < t1 {
            t1 = far;
        }
    }
    (t0 <= t1 * (1.0 + 1e-12)).then_some(t0)
}

/// Möller–Trumbore with a small tolerance on the barycentric bounds so
/// rays through shared edges never slip between two faces.
#[inline]
fn intersect(tri: &Tri, origin: &Vec3, dir: &Vec3, t_min: f64, t_max: f64) -> Option<Hit> {
    let p = dir.cross(&tri.e2);
    let det = tri.e1.dot(&p);
    if det.abs() < 1e-300 {
        return None;
    }
    let inv = 1.0 / det;
    let s = origin - tri.v0;
    let u = s.dot(&p) * inv;
    if !(-EDGE_EPS..=1.0 + EDGE_EPS).contains(&u) {
        return None;
    }
    let q = s.cross(&tri.e1);
    let v = dir.dot(&q) * inv;
    if v < -EDGE_EPS || u + v > 1.0 + EDGE_EPS {
        return None;
    }
    let t = tri.e2.dot(&q) * inv;
    (t > t_min && t < t_max).then_some(Hit {
        t,
        triangle: usize::MAX,
        u,
        v,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::primitives;
    use rand::{RngExt, SeedableRng};

    fn brute_force(mesh: &Mesh, o: &Vec3, d: &Vec3) -> Option<(f64, usize)> {
        let mut best: Option<(f64, usize)> = None;
        for i in 0..mesh.triangle_count() {
            let [a, b, c] = mesh.corners(i);
            let tri = Tri {
                v0: a,
                e1: b - a,
                e2: c - a,
            };
            if let Some(h) = intersect(&tri, o, d, 0.0, f64::INFINITY) {
                if best.is_none_or(|(t, _)| h.t < t) {
                    best = Some((h.t, i));
                }
            }
        }
        best
    }

    #[test]
    fn matches_brute_force_on_random_rays() {
        let mesh = primitives::icosphere(Vec3::new(0.0, 0.0, 0.0), 1.0, 3);
        let bvh = Bvh::build(&mesh);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..500 {
            let o = Vec3::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), -4.0);
            let target = Vec3::new(rng.random_range(-1.2..1.2), rng.random_range(-1.2..1.2), 0.0);
            let d = target - o;
            let got = bvh.closest_hit(&o, &d, 0.0, f64::INFINITY);
            let want = brute_force(&mesh, &o, &d);
            match (got, want) {
                (None, None) => {}
                (Some(h), Some((t, _))) => assert!((h.t - t).abs() < 1e-12),
                other => panic!("mismatch {other:?}"),
            }
            assert_eq!(bvh.any_hit(&o, &d, 0.0, f64::INFINITY), want.is_some());
        }
    }

    #[test]
    fn sphere_front_hit_distance() {
        let mesh = primitives::icosphere(Vec3::new(0.0, 0.0, 5.0), 1.0, 2);
        let bvh = Bvh::build(&mesh);
        // icosahedron vertex (0, 1, φ)/|·| lies off-axis; an axis ray meets a face
        let h = bvh.closest_hit(&Vec3::zeros(), &Vec3::z(), 0.0, f64::INFINITY).unwrap();
        assert!(h.t > 3.9 && h.t <= 4.0 + 1e-12);
        assert!(bvh.closest_hit(&Vec3::zeros(), &Vec3::z(), 0.0, 3.0).is_none());
        assert!(!bvh.any_hit(&Vec3::zeros(), &-Vec3::z(), 0.0, f64::INFINITY));
    }
}
