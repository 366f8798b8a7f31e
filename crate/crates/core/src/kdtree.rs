//! Exact nearest-neighbor queries over 3D points.
//!
//! Squared distances are computed as `dx*dx + dy*dy + dz*dz` and subtrees are
//! pruned only when their splitting-plane distance strictly exceeds the best
//! candidate, so results equal a linear scan bit for bit.

use crate::Vec3;

#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Vec3>,
    // Permutation of point indices; node ranges are laid out recursively with
    // the splitting point at the midpoint.
    order: Vec<usize>,
}

#[inline]
pub fn squared_distance(a: &Vec3, b: &Vec3) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    let dz = a.z - b.z;
    dx * dx + dy * dy + dz * dz
}

impl KdTree {
    pub fn new(points: &[Vec3]) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        build(points, &mut order, 0);
        Self {
            points: points.to_vec(),
            order,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Smallest squared distance from `q` to any stored point, or `None` if
    /// the tree is empty.
    pub fn nearest_squared(&self, q: &Vec3) -> Option<f64> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = f64::INFINITY;
        self.search(q, &self.order, 0, &mut best);
        Some(best)
    }

    fn search(&self, q: &Vec3, range: &[usize], depth: usize, best: &mut f64) {
        if range.is_empty() {
            return;
        }
        let mid = range.len() / 2;
        let p = &self.points[range[mid]];
        let d = squared_distance(q, p);
        if d < *best {
            *best = d;
        }
        let axis = depth % 3;
        let diff = q[axis] - p[axis];
        let (near, far) = if diff < 0.0 {
            (&range[..mid], &range[mid + 1..])
        } else {
            (&range[mid + 1..], &range[..mid])
        };
        self.search(q, near, depth + 1, best);
        if diff * diff <= *best {
            self.search(q, far, depth + 1, best);
        }
    }
}

fn build(points: &[Vec3], range: &mut [usize], depth: usize) {
    if range.len() <= 1 {
        return;
    }
    let axis = depth % 3;
    let mid = range.len() / 2;
    range.select_nth_unstable_by(mid, |&a, &b| points[a][axis].total_cmp(&points[b][axis]));
    let (left, rest) = range.split_at_mut(mid);
    build(points, left, depth + 1);
    build(points, &mut rest[1..], depth + 1);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_cases() {
        let pts = vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0)];
        let t = KdTree::new(&pts);
        assert_eq!(t.nearest_squared(&Vec3::new(0.9, 0.0, 0.0)), Some(squared_distance(&pts[1], &Vec3::new(0.9, 0.0, 0.0))));
        assert_eq!(t.nearest_squared(&Vec3::new(0.0, 2.0, 0.0)), Some(4.0));
        assert_eq!(KdTree::new(&[]).nearest_squared(&Vec3::zeros()), None);
    }

    #[test]
    fn duplicates_and_ties() {
        let pts = vec![Vec3::new(1.0, 1.0, 1.0); 9];
        let t = KdTree::new(&pts);
        assert_eq!(t.nearest_squared(&Vec3::new(1.0, 1.0, 1.0)), Some(0.0));
    }
}
