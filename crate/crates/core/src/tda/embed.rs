use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Points in `R^d`, all of the same dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCloud<F> {
    points: Vec<Vec<F>>,
}

impl<F: Scalar> PointCloud<F> {
    pub fn new(points: Vec<Vec<F>>) -> Result<Self> {
        let Some(first) = points.first() else {
            return Err(Error::Shape("point cloud needs at least one point".into()));
        };
        let dim = first.len();
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::Shape("points of differing dimension".into()));
        }
        Ok(PointCloud { points })
    }

    pub fn points(&self) -> &[Vec<F>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    /// Drops repeated points, keeping first occurrences in order.
    ///
    /// Coincident points only add zero-length dimension-0 bars, so the
    /// barcode after discarding those is unchanged.
    pub fn dedup(&self) -> Self {
        let mut out: Vec<Vec<F>> = Vec::with_capacity(self.points.len());
        for p in &self.points {
            if !out.iter().any(|q| q == p) {
                out.push(p.clone());
            }
        }
        PointCloud { points: out }
    }

    /// Every coordinate multiplied by `factor`.
    pub fn scaled(&self, factor: F) -> Self {
        PointCloud { points: self.points.iter().map(|p| p.iter().map(|&v| v * factor).collect()).collect() }
    }
}

/// Sliding-window embedding: point `i` is `(s[i], s[i+τ], …, s[i+(d-1)τ])`.
pub fn delay_embed<F: Scalar>(series: &[F], dim: usize, delay: usize) -> Result<PointCloud<F>> {
    if dim < 2 {
        return Err(Error::Range { what: "embedding dimension", detail: format!("{dim} is below 2") });
    }
    if delay < 1 {
        return Err(Error::Range { what: "embedding delay", detail: "must be at least 1".into() });
    }
    let span = (dim - 1) * delay;
    if series.len() < span + 1 {
        return Err(Error::Shape(format!(
            "series of length {} is too short for d={dim}, tau={delay}: minimum length is {}",
            series.len(),
            span + 1
        )));
    }
    let points = (0..series.len() - span).map(|i| (0..dim).map(|j| series[i + j * delay]).collect()).collect();
    PointCloud::new(points)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embeds_consecutive_windows() {
        let c = delay_embed(&[1.0, 2.0, 3.0, 4.0], 2, 1).unwrap();
        assert_eq!(c.points(), &[vec![1.0, 2.0], vec![2.0, 3.0], vec![3.0, 4.0]]);
    }

    #[test]
    fn single_point_boundary() {
        let c = delay_embed(&[1.0, 2.0, 3.0, 4.0, 5.0], 3, 2).unwrap();
        assert_eq!(c.points(), &[vec![1.0, 3.0, 5.0]]);
    }

    #[test]
    fn constant_series_gives_identical_points() {
        let c = delay_embed(&[7.0; 6], 3, 1).unwrap();
        assert_eq!(c.len(), 4);
        assert!(c.points().iter().all(|p| p == &vec![7.0; 3]));
        assert_eq!(c.dedup().len(), 1);
    }

    #[test]
    fn too_short_names_minimum() {
        let err = delay_embed(&[1.0, 2.0, 3.0], 3, 2).unwrap_err();
        assert!(err.to_string().contains("minimum length is 5"), "{err}");
        assert!(delay_embed(&[1.0, 2.0], 1, 1).is_err());
        assert!(delay_embed(&[1.0, 2.0], 2, 0).is_err());
    }
}
