//! Scalar abstraction shared by the numeric kernels.
//!
//! Every clustering, homology and boosting routine is written against
//! [`Scalar`] so the same code runs in `f32` or `f64`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar usable by the numeric kernels: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` literal or intermediate into `Self`.
    #[inline]
    fn lit(v: f64) -> Self {
        // f32/f64 conversion from f64 never fails; it saturates to inf.
        Self::from_f64(v).unwrap_or_else(Self::nan)
    }

    #[inline]
    fn from_usize_lossy(v: usize) -> Self {
        Self::lit(v as f64)
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Population mean; zero for an empty slice.
pub(crate) fn mean<F: Scalar>(xs: &[F]) -> F {
    if xs.is_empty() {
        return F::zero();
    }
    xs.iter().copied().sum::<F>() / F::from_usize_lossy(xs.len())
}

/// Population standard deviation around `mu`.
pub(crate) fn pop_std<F: Scalar>(xs: &[F], mu: F) -> F {
    if xs.is_empty() {
        return F::zero();
    }
    let var = xs.iter().map(|&x| (x - mu) * (x - mu)).sum::<F>() / F::from_usize_lossy(xs.len());
    var.sqrt()
}

pub(crate) fn sq_euclidean<F: Scalar>(a: &[F], b: &[F]) -> F {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum()
}
