use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Root mean square error `sqrt(Σ (p_t − a_t)² / T)`.
pub fn rmse<F: Scalar>(predicted: &[F], actual: &[F]) -> Result<F> {
    if predicted.len() != actual.len() {
        return Err(Error::Shape(format!("rmse over {} predictions and {} actuals", predicted.len(), actual.len())));
    }
    if predicted.is_empty() {
        return Err(Error::Shape("rmse over zero observations".into()));
    }
    let sse: F = predicted.iter().zip(actual).map(|(&p, &a)| (p - a) * (p - a)).sum();
    Ok((sse / F::from_usize_lossy(predicted.len())).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(rmse(&[1.0, 2.0], &[3.0, 4.0]).unwrap(), 2.0);
        let got = rmse(&[0.0; 4], &[1.0, 1.0, 1.0, 3.0]).unwrap();
        assert!((got - 3f64.sqrt()).abs() <= 1e-12);
    }

    #[test]
    fn errors() {
        assert!(rmse::<f64>(&[], &[]).is_err());
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
    }

    proptest! {
        #[test]
        fn symmetric_and_shift_invariant(
            pairs in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 1..40),
            shift in -1e3f64..1e3,
        ) {
            let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let ab = rmse(&a, &b).unwrap();
            prop_assert_eq!(ab, rmse(&b, &a).unwrap());
            let a2: Vec<f64> = a.iter().map(|v| v + shift).collect();
            let b2: Vec<f64> = b.iter().map(|v| v + shift).collect();
            prop_assert!((rmse(&a2, &b2).unwrap() - ab).abs() <= 1e-9 * (1.0 + ab));
        }
    }
}
