use nalgebra::{ComplexField, DVector};
use num_complex::Complex64;

/// Scalar field of a problem instance: `f64` or [`Complex64`].
pub trait Field: ComplexField<RealField = f64> + Copy {
    const COMPLEX: bool;

    /// Builds a scalar from real and imaginary parts; the imaginary part is
    /// dropped for real fields.
    fn from_parts(re: f64, im: f64) -> Self;

    fn parts(self) -> (f64, f64);
}

impl Field for f64 {
    const COMPLEX: bool = false;

    fn from_parts(re: f64, _im: f64) -> Self {
        re
    }

    fn parts(self) -> (f64, f64) {
        (self, 0.0)
    }
}

impl Field for Complex64 {
    const COMPLEX: bool = true;

    fn from_parts(re: f64, im: f64) -> Self {
        Complex64::new(re, im)
    }

    fn parts(self) -> (f64, f64) {
        (self.re, self.im)
    }
}

/// Isometric real embedding: identity for real vectors, interleaved
/// `(re, im)` pairs for complex ones. Euclidean distances are preserved.
pub fn embed<T: Field>(v: &DVector<T>) -> DVector<f64> {
    if T::COMPLEX {
        DVector::from_iterator(
            2 * v.len(),
            v.iter().flat_map(|z| {
                let (re, im) = z.parts();
                [re, im]
            }),
        )
    } else {
        v.map(|z| z.parts().0)
    }
}

pub(crate) fn all_finite<T: Field>(v: &DVector<T>) -> bool {
    v.iter().all(|z| z.is_finite())
}
