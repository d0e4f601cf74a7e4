use serde::{Deserialize, Serialize};

use super::embed::PointCloud;
use crate::error::{Error, Result};
use crate::scalar::{sq_euclidean, Scalar};

/// Filtration cutoff for edges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Radius<F> {
    /// The cloud's Euclidean diameter, so every pair gets an edge.
    Diameter,
    Fixed(F),
}

/// A simplex of dimension ≤ 2 with its filtration value.
#[derive(Debug, Clone, PartialEq)]
pub struct Simplex<F> {
    /// Sorted ascending.
    pub vertices: Vec<usize>,
    pub value: F,
}

impl<F> Simplex<F> {
    pub fn dim(&self) -> usize {
        self.vertices.len() - 1
    }
}

/// Vietoris–Rips complex in filtration order: by value, then dimension,
/// then lexicographic vertex set. Faces always precede cofaces.
#[derive(Debug, Clone, PartialEq)]
pub struct FilteredComplex<F> {
    pub simplices: Vec<Simplex<F>>,
    pub num_vertices: usize,
    pub max_radius: F,
}

impl<F: Scalar> FilteredComplex<F> {
    pub fn len(&self) -> usize {
        self.simplices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.simplices.is_empty()
    }

    pub fn count_dim(&self, dim: usize) -> usize {
        self.simplices.iter().filter(|s| s.dim() == dim).count()
    }
}

/// Pairwise Euclidean distances, row-major `m × m`.
pub fn distance_matrix<F: Scalar>(cloud: &PointCloud<F>) -> Vec<F> {
    let m = cloud.len();
    let pts = cloud.points();
    let mut d = vec![F::zero(); m * m];
    for i in 0..m {
        for j in i + 1..m {
            let v = sq_euclidean(&pts[i], &pts[j]).sqrt();
            d[i * m + j] = v;
            d[j * m + i] = v;
        }
    }
    d
}

pub fn diameter<F: Scalar>(cloud: &PointCloud<F>) -> F {
    distance_matrix(cloud).into_iter().fold(F::zero(), F::max)
}

pub(crate) fn resolve_radius<F: Scalar>(cloud: &PointCloud<F>, radius: Radius<F>) -> Result<F> {
    match radius {
        Radius::Diameter => Ok(diameter(cloud)),
        Radius::Fixed(r) if r > F::zero() && r.is_finite() => Ok(r),
        Radius::Fixed(r) => Err(Error::Range { what: "max radius", detail: format!("{r} must be positive") }),
    }
}

/// Flag complex up to triangles: vertices at 0, an edge at its length when
/// within `max_radius`, a triangle at its longest edge when all three
/// edges exist.
pub fn rips_filtration<F: Scalar>(cloud: &PointCloud<F>, radius: Radius<F>) -> Result<FilteredComplex<F>> {
    let max_radius = resolve_radius(cloud, radius)?;
    let m = cloud.len();
    let dist = distance_matrix(cloud);
    let edge = |i: usize, j: usize| -> Option<F> {
        let v = dist[i * m + j];
        (v <= max_radius).then_some(v)
    };

    let mut simplices: Vec<Simplex<F>> = (0..m).map(|v| Simplex { vertices: vec![v], value: F::zero() }).collect();
    for i in 0..m {
        for j in i + 1..m {
            let Some(ij) = edge(i, j) else { continue };
            simplices.push(Simplex { vertices: vec![i, j], value: ij });
            for k in j + 1..m {
                if let (Some(ik), Some(jk)) = (edge(i, k), edge(j, k)) {
                    simplices.push(Simplex { vertices: vec![i, j, k], value: ij.max(ik).max(jk) });
                }
            }
        }
    }
    simplices.sort_by(|a, b| {
        a.value
            .partial_cmp(&b.value)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.vertices.len().cmp(&b.vertices.len()))
            .then_with(|| a.vertices.cmp(&b.vertices))
    });
    Ok(FilteredComplex { simplices, num_vertices: m, max_radius })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud(points: &[&[f64]]) -> PointCloud<f64> {
        PointCloud::new(points.iter().map(|p| p.to_vec()).collect()).unwrap()
    }

    #[test]
    fn equilateral_triangle() {
        let h = 3f64.sqrt() / 2.0;
        let c = cloud(&[&[0.0, 0.0], &[1.0, 0.0], &[0.5, h]]);
        let fc = rips_filtration(&c, Radius::Fixed(1.5)).unwrap();
        assert_eq!((fc.count_dim(0), fc.count_dim(1), fc.count_dim(2)), (3, 3, 1));
        assert!(fc.simplices[..3].iter().all(|s| s.value == 0.0));
        assert!(fc.simplices[3..].iter().all(|s| (s.value - 1.0).abs() < 1e-12));
        assert_eq!(fc.simplices.last().unwrap().dim(), 2);
    }

    #[test]
    fn cutoff_drops_long_edges() {
        let c = cloud(&[&[0.0], &[5.0]]);
        let fc = rips_filtration(&c, Radius::Fixed(3.0)).unwrap();
        assert_eq!(fc.len(), 2);
        assert_eq!(fc.count_dim(1), 0);
        assert!(rips_filtration(&c, Radius::Fixed(0.0)).is_err());
    }

    #[test]
    fn unit_square_counts() {
        let c = cloud(&[&[0.0, 0.0], &[1.0, 0.0], &[1.0, 1.0], &[0.0, 1.0]]);
        let fc = rips_filtration(&c, Radius::Diameter).unwrap();
        let at =
            |dim: usize, v: f64| fc.simplices.iter().filter(|s| s.dim() == dim && (s.value - v).abs() < 1e-12).count();
        assert_eq!(fc.count_dim(0), 4);
        assert_eq!(at(1, 1.0), 4);
        assert_eq!(at(1, 2f64.sqrt()), 2);
        assert_eq!(at(2, 2f64.sqrt()), 4);
        assert_eq!(fc.len(), 14);
    }

    #[test]
    fn faces_precede_cofaces() {
        let c = cloud(&[&[0.0, 0.0], &[1.0, 0.2], &[0.3, 1.1], &[2.0, 2.0], &[1.5, 0.5]]);
        let fc = rips_filtration(&c, Radius::Diameter).unwrap();
        for (j, s) in fc.simplices.iter().enumerate() {
            if s.dim() == 0 {
                continue;
            }
            for skip in 0..s.vertices.len() {
                let face: Vec<usize> =
                    s.vertices.iter().enumerate().filter(|&(i, _)| i != skip).map(|(_, &v)| v).collect();
                let pos = fc.simplices.iter().position(|t| t.vertices == face).unwrap();
                assert!(pos < j);
            }
        }
    }
}
