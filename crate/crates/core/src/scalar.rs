//! Scalar abstraction: everything numeric is generic over `Real`.

/// Real scalar usable by the whole crate: `f32` or `f64`.
pub trait Real:
    nalgebra::RealField
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + Copy
    + Default
    + std::iter::Sum
{
}

impl<T> Real for T where
    T: nalgebra::RealField
        + num_traits::FromPrimitive
        + num_traits::ToPrimitive
        + Copy
        + Default
        + std::iter::Sum
{
}

/// Converts an `f64` constant into the working scalar type.
#[inline]
pub fn real<S: Real>(x: f64) -> S {
    S::from_f64(x).expect("finite f64 constant must convert")
}

/// Converts a scalar back to `f64` (for reports and serialization).
#[inline]
pub fn to_f64<S: Real>(x: S) -> f64 {
    x.to_f64().expect("real scalar converts to f64")
}

/// Converts a usize count into the working scalar type.
#[inline]
pub fn from_count<S: Real>(n: usize) -> S {
    S::from_usize(n).expect("count must convert")
}
