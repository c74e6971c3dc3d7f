use std::fmt::Debug;

use num_traits::Float;

/// Anything that can live in an [`NdArray`](crate::NdArray).
pub trait Element: Clone + Debug + PartialEq + Send + Sync + 'static {}

impl<T: Clone + Debug + PartialEq + Send + Sync + 'static> Element for T {}

/// Floating-point element type the parallel operators are generic over.
///
/// Implemented for `f32` and `f64`.
pub trait Real: Float + Element + Default {
    fn from_f64(v: f64) -> Self;
}

impl Real for f32 {
    fn from_f64(v: f64) -> Self {
        v as f32
    }
}

impl Real for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
}
