use super::{GeomError, Real, Vec3};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Immutable balanced k-d tree over 3D points for nearest-neighbor queries.
///
/// Build once, query many times; returned indices refer to the order the
/// points were passed in.
pub struct SpatialIndex<T> {
    points: Vec<Vec3<T>>,
    // Tree layout over point indices: every subtree occupies a contiguous
    // range with its median splitting node in the middle, axis = depth % 3.
    order: Vec<u32>,
}

impl<T: Real> SpatialIndex<T> {
    /// Builds the index. Rejects points with non-finite components.
    pub fn build(points: Vec<Vec3<T>>) -> Result<Self, GeomError> {
        if points.iter().any(|p| !p.is_finite()) {
            return Err(GeomError::NonFinitePoint);
        }
        let mut order: Vec<u32> = (0..points.len() as u32).collect();
        build_recursive(&points, &mut order, 0);
        Ok(SpatialIndex { points, order })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, index: usize) -> Vec3<T> {
        self.points[index]
    }

    pub fn points(&self) -> &[Vec3<T>] {
        &self.points
    }

    /// Index of and distance to the closest point.
    pub fn nearest(&self, query: Vec3<T>) -> Result<(usize, T), GeomError> {
        if self.is_empty() {
            return Err(GeomError::EmptyIndex);
        }
        let mut best = (usize::MAX, T::infinity());
        self.nearest_recursive(query, 0..self.order.len(), 0, &mut best);
        Ok((best.0, best.1.sqrt()))
    }

    /// The `k` closest points as `(index, distance)`, ascending by distance.
    pub fn k_nearest(&self, query: Vec3<T>, k: usize) -> Vec<(usize, T)> {
        if k == 0 || self.is_empty() {
            return Vec::new();
        }
        let mut heap: BinaryHeap<HeapEntry<T>> = BinaryHeap::with_capacity(k + 1);
        self.k_nearest_recursive(query, 0..self.order.len(), 0, k, &mut heap);
        let mut out: Vec<(usize, T)> = heap
            .into_sorted_vec()
            .into_iter()
            .map(|e| (e.index, e.dist_sq.sqrt()))
            .collect();
        // into_sorted_vec is ascending by Ord, which is ascending distance.
        out.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        out
    }

    fn nearest_recursive(
        &self,
        query: Vec3<T>,
        range: std::ops::Range<usize>,
        depth: usize,
        best: &mut (usize, T),
    ) {
        if range.is_empty() {
            return;
        }
        let mid = range.start + range.len() / 2;
        let idx = self.order[mid] as usize;
        let d2 = (self.points[idx] - query).norm_squared();
        if d2 < best.1 {
            *best = (idx, d2);
        }
        let axis = depth % 3;
        let delta = query.component(axis) - self.points[idx].component(axis);
        let (near, far) = if delta < T::zero() {
            (range.start..mid, mid + 1..range.end)
        } else {
            (mid + 1..range.end, range.start..mid)
        };
        self.nearest_recursive(query, near, depth + 1, best);
        if delta * delta < best.1 {
            self.nearest_recursive(query, far, depth + 1, best);
        }
    }

    fn k_nearest_recursive(
        &self,
        query: Vec3<T>,
        range: std::ops::Range<usize>,
        depth: usize,
        k: usize,
        heap: &mut BinaryHeap<HeapEntry<T>>,
    ) {
        if range.is_empty() {
            return;
        }
        let mid = range.start + range.len() / 2;
        let idx = self.order[mid] as usize;
        let d2 = (self.points[idx] - query).norm_squared();
        if heap.len() < k {
            heap.push(HeapEntry { dist_sq: d2, index: idx });
        } else if d2 < heap.peek().unwrap().dist_sq {
            heap.pop();
            heap.push(HeapEntry { dist_sq: d2, index: idx });
        }
        let axis = depth % 3;
        let delta = query.component(axis) - self.points[idx].component(axis);
        let (near, far) = if delta < T::zero() {
            (range.start..mid, mid + 1..range.end)
        } else {
            (mid + 1..range.end, range.start..mid)
        };
        self.k_nearest_recursive(query, near, depth + 1, k, heap);
        let worst = if heap.len() < k { T::infinity() } else { heap.peek().unwrap().dist_sq };
        if delta * delta < worst {
            self.k_nearest_recursive(query, far, depth + 1, k, heap);
        }
    }
}

fn build_recursive<T: Real>(points: &[Vec3<T>], order: &mut [u32], depth: usize) {
    if order.len() <= 1 {
        return;
    }
    let axis = depth % 3;
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        points[a as usize]
            .component(axis)
            .partial_cmp(&points[b as usize].component(axis))
            .unwrap_or(Ordering::Equal)
    });
    let (left, rest) = order.split_at_mut(mid);
    build_recursive(points, left, depth + 1);
    build_recursive(points, &mut rest[1..], depth + 1);
}

struct HeapEntry<T> {
    dist_sq: T,
    index: usize,
}

impl<T: Real> PartialEq for HeapEntry<T> {
    fn eq(&self, o: &Self) -> bool {
        self.dist_sq == o.dist_sq && self.index == o.index
    }
}
impl<T: Real> Eq for HeapEntry<T> {}
impl<T: Real> PartialOrd for HeapEntry<T> {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl<T: Real> Ord for HeapEntry<T> {
    fn cmp(&self, o: &Self) -> Ordering {
        // Finite by construction (build rejects non-finite points).
        self.dist_sq
            .partial_cmp(&o.dist_sq)
            .unwrap()
            .then(self.index.cmp(&o.index))
    }
}
