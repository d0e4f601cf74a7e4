use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::features::FeatureTable;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Random train/test row indices; `round(ratio · n)` rows go to train.
/// Both halves are returned in ascending order.
pub fn split_indices(n: usize, ratio: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if n < 2 {
        return Err(Error::Range { what: "row count", detail: format!("cannot split {n} rows") });
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Range { what: "split ratio", detail: format!("{ratio} not in (0, 1)") });
    }
    let n_train = ((ratio * n as f64).round() as usize).clamp(1, n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut train = order[..n_train].to_vec();
    let mut test = order[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Customer-level train/test partition of a feature table.
pub fn split<F: Scalar>(table: &FeatureTable<F>, ratio: f64, seed: u64) -> Result<(FeatureTable<F>, FeatureTable<F>)> {
    let (train, test) = split_indices(table.len(), ratio, seed)?;
    Ok((table.select(&train), table.select(&test)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ten_rows_split_seven_three() {
        let (train, test) = split_indices(10, 0.7, 5).unwrap();
        assert_eq!((train.len(), test.len()), (7, 3));
        assert_eq!(split_indices(10, 0.7, 5).unwrap(), (train, test));
        assert!(split_indices(1, 0.7, 5).is_err());
    }

    proptest! {
        #[test]
        fn partition_is_exact(n in 2usize..300, seed in any::<u64>()) {
            let (train, test) = split_indices(n, 0.7, seed).unwrap();
            let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            prop_assert_eq!(train.len(), ((0.7 * n as f64).round() as usize).clamp(1, n - 1));
        }
    }
}
