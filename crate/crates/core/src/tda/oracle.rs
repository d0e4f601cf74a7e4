use super::barcode::{Bar, Barcode};
use super::embed::PointCloud;
use super::rips::{distance_matrix, resolve_radius, Radius};
use crate::error::Result;
use crate::scalar::Scalar;

/// Union-find with path compression and union by rank.
#[derive(Debug, Clone)]
pub struct DisjointSet {
    parent: Vec<usize>,
    rank: Vec<u8>,
    components: usize,
}

impl DisjointSet {
    pub fn new(n: usize) -> Self {
        DisjointSet { parent: (0..n).collect(), rank: vec![0; n], components: n }
    }

    pub fn find(&mut self, mut node: usize) -> usize {
        let mut root = node;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        while self.parent[node] != root {
            let next = self.parent[node];
            self.parent[node] = root;
            node = next;
        }
        root
    }

    /// Merges the sets of `a` and `b`; `false` if already joined.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.rank[ra] < self.rank[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        if self.rank[ra] == self.rank[rb] {
            self.rank[ra] = self.rank[ra].saturating_add(1);
        }
        self.components -= 1;
        true
    }

    pub fn components(&self) -> usize {
        self.components
    }
}

/// Dimension-0 barcode from Kruskal's algorithm: each merging edge of
/// length `w` ends one bar at `w`; every surviving component keeps an
/// infinite bar.
pub fn h0_oracle<F: Scalar>(cloud: &PointCloud<F>, radius: Radius<F>) -> Result<Barcode<F>> {
    let max_radius = resolve_radius(cloud, radius)?;
    let m = cloud.len();
    let dist = distance_matrix(cloud);
    let mut edges: Vec<(F, usize, usize)> = Vec::new();
    for i in 0..m {
        for j in i + 1..m {
            let w = dist[i * m + j];
            if w <= max_radius {
                edges.push((w, i, j));
            }
        }
    }
    edges.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let mut sets = DisjointSet::new(m);
    let mut bars = Vec::with_capacity(m);
    for (w, i, j) in edges {
        if sets.union(i, j) && w > F::zero() {
            bars.push(Bar { birth: F::zero(), death: w });
        }
    }
    bars.extend((0..sets.components()).map(|_| Bar { birth: F::zero(), death: F::infinity() }));
    Ok(Barcode::new(bars, Vec::new()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_points_leave_one_bar() {
        let c = PointCloud::new(vec![vec![1.0, 1.0]; 5]).unwrap();
        let bc = h0_oracle(&c, Radius::Diameter).unwrap();
        assert_eq!(bc.h0(), &[Bar { birth: 0.0, death: f64::INFINITY }]);
    }

    #[test]
    fn separated_clusters_stay_apart() {
        let c = PointCloud::<f64>::new(vec![vec![0.0], vec![0.5], vec![10.0], vec![10.4]]).unwrap();
        let bc = h0_oracle(&c, Radius::Fixed(1.0)).unwrap();
        assert_eq!(bc.h0().iter().filter(|b| b.death.is_infinite()).count(), 2);
        assert_eq!(bc.h0().len(), 4);
    }

    #[test]
    fn union_find_counts_components() {
        let mut ds = DisjointSet::new(4);
        assert!(ds.union(0, 1));
        assert!(!ds.union(1, 0));
        assert!(ds.union(2, 3));
        assert_eq!(ds.components(), 2);
        assert_eq!(ds.find(0), ds.find(1));
        assert_ne!(ds.find(0), ds.find(3));
    }
}
