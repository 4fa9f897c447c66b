//! Scalar abstraction.
//!
//! Every numerical routine in this crate is generic over the real floating
//! type through [`Real`]; `f32` and `f64` both qualify. Complex quantities are
//! `num_complex::Complex<T>` throughout, which is the scalar type nalgebra
//! uses for its complex linear algebra.

use num_complex::Complex;

/// Real scalar type the library is generic over.
pub trait Real:
    Copy
    + Send
    + Sync
    + std::fmt::Debug
    + std::fmt::Display
    + nalgebra::RealField
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Complex scalar over `T`.
pub type C<T> = Complex<T>;

/// Dynamically sized complex matrix.
pub type CMat<T> = nalgebra::DMatrix<Complex<T>>;
/// Dynamically sized complex column vector.
pub type CVec<T> = nalgebra::DVector<Complex<T>>;
/// Dynamically sized real matrix.
pub type RMat<T> = nalgebra::DMatrix<T>;
/// Dynamically sized real column vector.
pub type RVec<T> = nalgebra::DVector<T>;
/// 2-D point/offset in the panel plane.
pub type Vec2<T> = nalgebra::Vector2<T>;

/// Convert an `f64` constant into `T`.
#[inline]
pub fn real<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 does not fit in scalar type")
}

/// Complex number from `f64` parts.
#[inline]
pub fn cplx<T: Real>(re: f64, im: f64) -> C<T> {
    Complex::new(real(re), real(im))
}

/// The imaginary unit.
#[inline]
pub fn junit<T: Real>() -> C<T> {
    Complex::new(T::zero(), T::one())
}

/// `exp(j * phase)` for a real phase.
#[inline]
pub fn cis<T: Real>(phase: T) -> C<T> {
    Complex::new(phase.cos(), phase.sin())
}
