use std::collections::HashMap;

use super::barcode::{Bar, Barcode};
use super::rips::FilteredComplex;
use crate::scalar::Scalar;

/// Z/2 boundary matrix in filtration order. Column `j` holds the sorted
/// row indices of the faces of simplex `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundaryMatrix {
    pub columns: Vec<Vec<usize>>,
    pub dims: Vec<usize>,
}

impl BoundaryMatrix {
    pub fn from_complex<F: Scalar>(complex: &FilteredComplex<F>) -> Self {
        let index: HashMap<&[usize], usize> =
            complex.simplices.iter().enumerate().map(|(i, s)| (s.vertices.as_slice(), i)).collect();
        let mut columns = Vec::with_capacity(complex.len());
        let mut dims = Vec::with_capacity(complex.len());
        for s in &complex.simplices {
            let mut col: Vec<usize> = Vec::with_capacity(s.vertices.len());
            if s.vertices.len() > 1 {
                let mut face = Vec::with_capacity(s.vertices.len() - 1);
                for skip in 0..s.vertices.len() {
                    face.clear();
                    face.extend(s.vertices.iter().enumerate().filter(|&(i, _)| i != skip).map(|(_, &v)| v));
                    col.push(index[face.as_slice()]);
                }
                col.sort_unstable();
            }
            columns.push(col);
            dims.push(s.dim());
        }
        BoundaryMatrix { columns, dims }
    }

    /// Standard left-to-right column reduction. Returns the reduced
    /// columns and `low[j]`, the pivot row of each non-zero column.
    pub fn reduce(&self) -> (Vec<Vec<usize>>, Vec<Option<usize>>) {
        let n = self.columns.len();
        let mut reduced: Vec<Vec<usize>> = Vec::with_capacity(n);
        let mut pivot_owner: Vec<Option<usize>> = vec![None; n];
        let mut low: Vec<Option<usize>> = vec![None; n];
        let mut scratch = Vec::new();
        for (j, column) in self.columns.iter().enumerate() {
            let mut col = column.clone();
            while let Some(&l) = col.last() {
                let Some(k) = pivot_owner[l] else { break };
                symmetric_difference(&col, &reduced[k], &mut scratch);
                std::mem::swap(&mut col, &mut scratch);
            }
            if let Some(&l) = col.last() {
                pivot_owner[l] = Some(j);
                low[j] = Some(l);
            }
            reduced.push(col);
        }
        (reduced, low)
    }
}

fn symmetric_difference(a: &[usize], b: &[usize], out: &mut Vec<usize>) {
    out.clear();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
}

/// Dimension-0 and dimension-1 barcode of a filtered complex.
///
/// A column with pivot row `i` kills the class born at simplex `i`; a
/// zero column that never becomes a pivot row gives an infinite bar.
/// Pairs with equal birth and death are dropped.
pub fn persistence<F: Scalar>(complex: &FilteredComplex<F>) -> Barcode<F> {
    let matrix = BoundaryMatrix::from_complex(complex);
    let (_, low) = matrix.reduce();
    let n = complex.len();
    let mut killed = vec![false; n];
    let mut bars: [Vec<Bar<F>>; 2] = [Vec::new(), Vec::new()];
    for (j, l) in low.iter().enumerate() {
        if let Some(i) = *l {
            killed[i] = true;
            let dim = matrix.dims[i];
            let (birth, death) = (complex.simplices[i].value, complex.simplices[j].value);
            if dim <= 1 && death > birth {
                bars[dim].push(Bar { birth, death });
            }
        }
    }
    for i in 0..n {
        let dim = matrix.dims[i];
        if dim <= 1 && low[i].is_none() && !killed[i] {
            bars[dim].push(Bar { birth: complex.simplices[i].value, death: F::infinity() });
        }
    }
    let [h0, h1] = bars;
    Barcode::new(h0, h1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tda::{rips_filtration, PointCloud, Radius};

    fn cloud(points: &[&[f64]]) -> PointCloud<f64> {
        PointCloud::new(points.iter().map(|p| p.to_vec()).collect()).unwrap()
    }

    #[test]
    fn single_point() {
        let bc = persistence(&rips_filtration(&cloud(&[&[3.0, 4.0]]), Radius::Diameter).unwrap());
        assert_eq!(bc.h0(), &[Bar { birth: 0.0, death: f64::INFINITY }]);
        assert!(bc.h1().is_empty());
    }

    #[test]
    fn collinear_points_die_at_gaps() {
        let bc = persistence(&rips_filtration(&cloud(&[&[0.0], &[1.0], &[3.0]]), Radius::Diameter).unwrap());
        let deaths: Vec<f64> = bc.h0().iter().map(|b| b.death).collect();
        assert_eq!(deaths, vec![1.0, 2.0, f64::INFINITY]);
        assert!(bc.h1().is_empty());
    }

    #[test]
    fn unit_square_loop() {
        let c = cloud(&[&[0.0, 0.0], &[1.0, 0.0], &[1.0, 1.0], &[0.0, 1.0]]);
        let bc = persistence(&rips_filtration(&c, Radius::Diameter).unwrap());
        assert_eq!(bc.h1().len(), 1);
        let bar = bc.h1()[0];
        assert!((bar.birth - 1.0).abs() <= 1e-9);
        assert!((bar.death - 2f64.sqrt()).abs() <= 1e-9);
        assert_eq!(bc.h0().len(), 4);
    }

    #[test]
    fn boundary_columns_point_backwards() {
        let c = cloud(&[&[0.0, 0.0], &[1.0, 0.0], &[1.0, 1.0], &[0.0, 1.0]]);
        let bm = BoundaryMatrix::from_complex(&rips_filtration(&c, Radius::Diameter).unwrap());
        for (j, col) in bm.columns.iter().enumerate() {
            assert!(col.iter().all(|&i| i < j));
            assert_eq!(col.len(), if bm.dims[j] == 0 { 0 } else { bm.dims[j] + 1 });
        }
    }

    #[test]
    fn open_loop_beyond_radius_is_infinite() {
        // Square with radius between side and diagonal: the loop never fills.
        let c = cloud(&[&[0.0, 0.0], &[1.0, 0.0], &[1.0, 1.0], &[0.0, 1.0]]);
        let bc = persistence(&rips_filtration(&c, Radius::Fixed(1.2)).unwrap());
        assert_eq!(bc.h1(), &[Bar { birth: 1.0, death: f64::INFINITY }]);
    }
}
