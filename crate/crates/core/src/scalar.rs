//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point type the solvers are generic over (`f32` or `f64`).
///
/// Tolerances scale with the precision of the type: an `f32` instance cannot
/// resolve `1e-12`, so each implementation carries its own defaults.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Atoms closer than this are merged into one.
    fn merge_tol() -> Self;

    /// Default primal / dual tolerance for the simplex solver.
    fn default_tol() -> Self;

    /// Smallest admissible simplex pivot, relative to the largest entry of the
    /// entering column.
    fn pivot_tol() -> Self;

    /// Lossy conversion from an `f64` literal.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }

    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize fits in a float")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    fn merge_tol() -> Self {
        1e-12
    }

    fn default_tol() -> Self {
        1e-9
    }

    fn pivot_tol() -> Self {
        1e-9
    }
}

impl Scalar for f32 {
    fn merge_tol() -> Self {
        1e-6
    }

    fn default_tol() -> Self {
        1e-4
    }

    fn pivot_tol() -> Self {
        1e-5
    }
}

/// Sum with Neumaier compensation; moment rows can mix large and small terms.
pub(crate) fn compensated_sum<T: Scalar>(values: impl IntoIterator<Item = T>) -> T {
    let mut sum = T::zero();
    let mut carry = T::zero();
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            carry = carry + ((sum - t) + v);
        } else {
            carry = carry + ((v - t) + sum);
        }
        sum = t;
    }
    sum + carry
}
