//! Dense operator arithmetic on the truncated state space.
//!
//! `expm` is the scaling-and-squaring Padé method of Higham (2005); the
//! growth certificate for `e^{tA}` uses the Euclidean logarithmic norm.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;

/// Square dense matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearOperator<T: Field> {
    matrix: DMatrix<T>,
}

impl<T: Field> LinearOperator<T> {
    pub fn new(matrix: DMatrix<T>) -> Result<Self> {
        if matrix.nrows() == 0 || matrix.nrows() != matrix.ncols() {
            return Err(Error::invalid(format!(
                "operator must be square and non-empty, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if !matrix.iter().all(|z| z.is_finite()) {
            return Err(Error::invalid("operator has non-finite entries"));
        }
        Ok(Self { matrix })
    }

    /// Builds an operator from row-major nested rows.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let n = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::invalid(format!(
                "row of length {} in a {n}-row matrix",
                bad.len()
            )));
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            matrix: DMatrix::identity(dim, dim),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            matrix: DMatrix::zeros(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<T> {
        self.matrix
    }

    pub fn apply(&self, v: &DVector<T>) -> DVector<T> {
        &self.matrix * v
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            matrix: self.matrix.map(|z| z * T::from_real(s)),
        }
    }

    pub fn compose(&self, other: &Self) -> Self {
        Self {
            matrix: &self.matrix * &other.matrix,
        }
    }

    pub(crate) fn check_vector(&self, v: &DVector<T>) -> Result<()> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: v.len(),
            });
        }
        if !crate::field::all_finite(v) {
            return Err(Error::invalid("state vector has non-finite entries"));
        }
        Ok(())
    }
}

/// Certificate `‖e^{tA}‖ ≤ M e^{ωt}` for all `t ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SemigroupBounds {
    pub m: f64,
    pub omega: f64,
}

impl SemigroupBounds {
    pub fn growth(&self, t: f64) -> f64 {
        self.m * (self.omega * t).exp()
    }

    /// `sup_{0 ≤ s ≤ t} M e^{ωs}`.
    pub fn max_growth(&self, t: f64) -> f64 {
        self.m * (self.omega * t).max(0.0).exp()
    }
}

const THETA_3: f64 = 1.495585217958292e-2;
const THETA_5: f64 = 2.53939833006323e-1;
const THETA_7: f64 = 9.504178996162932e-1;
const THETA_9: f64 = 2.097847961257068e0;
const THETA_13: f64 = 5.371920351148152e0;

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const B9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

fn norm1<T: Field>(m: &DMatrix<T>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|z| z.modulus()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn scale<T: Field>(m: &DMatrix<T>, s: f64) -> DMatrix<T> {
    m.map(|z| z * T::from_real(s))
}

/// `U`, `V` of the `[m/m]` Padé approximant for `m ∈ {3, 5, 7, 9}`.
fn pade_low<T: Field>(a: &DMatrix<T>, b: &[f64]) -> (DMatrix<T>, DMatrix<T>) {
    let n = a.nrows();
    let a2 = a * a;
    let mut powers = vec![DMatrix::<T>::identity(n, n), a2.clone()];
    while powers.len() < b.len() / 2 {
        let next = powers.last().unwrap() * &a2;
        powers.push(next);
    }
    let mut u = DMatrix::<T>::zeros(n, n);
    let mut v = DMatrix::<T>::zeros(n, n);
    for (k, p) in powers.iter().enumerate() {
        u += scale(p, b[2 * k + 1]);
        v += scale(p, b[2 * k]);
    }
    (a * u, v)
}

fn pade_13<T: Field>(a: &DMatrix<T>) -> (DMatrix<T>, DMatrix<T>) {
    let n = a.nrows();
    let b = &B13;
    let id = DMatrix::<T>::identity(n, n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let inner_u = scale(&a6, b[13]) + scale(&a4, b[11]) + scale(&a2, b[9]);
    let u =
        &a6 * inner_u + scale(&a6, b[7]) + scale(&a4, b[5]) + scale(&a2, b[3]) + scale(&id, b[1]);
    let inner_v = scale(&a6, b[12]) + scale(&a4, b[10]) + scale(&a2, b[8]);
    let v =
        &a6 * inner_v + scale(&a6, b[6]) + scale(&a4, b[4]) + scale(&a2, b[2]) + scale(&id, b[0]);
    (a * u, v)
}

/// `e^{tA}` by scaling and squaring with a degree-adaptive Padé kernel.
pub fn expm<T: Field>(a: &LinearOperator<T>, t: f64) -> Result<LinearOperator<T>> {
    if !t.is_finite() {
        return Err(Error::invalid(format!("expm time must be finite, got {t}")));
    }
    let ta = scale(&a.matrix, t);
    let n = ta.nrows();
    let norm = norm1(&ta);
    if !norm.is_finite() {
        return Err(Error::invalid("expm argument has non-finite norm"));
    }

    let (u, v, squarings) = if norm <= THETA_3 {
        let (u, v) = pade_low(&ta, &B3);
        (u, v, 0)
    } else if norm <= THETA_5 {
        let (u, v) = pade_low(&ta, &B5);
        (u, v, 0)
    } else if norm <= THETA_7 {
        let (u, v) = pade_low(&ta, &B7);
        (u, v, 0)
    } else if norm <= THETA_9 {
        let (u, v) = pade_low(&ta, &B9);
        (u, v, 0)
    } else {
        let s = (norm / THETA_13).log2().ceil().max(0.0) as i32;
        let scaled = scale(&ta, 0.5f64.powi(s));
        let (u, v) = pade_13(&scaled);
        (u, v, s)
    };

    let p = &v + &u;
    let q = &v - &u;
    let mut r = q
        .lu()
        .solve(&p)
        .ok_or_else(|| Error::invalid("singular Padé denominator in expm"))?;
    for _ in 0..squarings {
        r = &r * &r;
    }
    debug_assert_eq!(r.nrows(), n);
    LinearOperator::new(r)
}

/// Spectral norm (largest singular value).
pub fn operator_norm<T: Field>(a: &LinearOperator<T>) -> f64 {
    a.matrix.clone().singular_values().max()
}

/// `(M, ω) = (1, μ₂(A))` where `μ₂(A)` is the top eigenvalue of the Hermitian
/// part `(A + A*)/2`. Valid for every `t ≥ 0`, and ω may be negative.
pub fn semigroup_bounds<T: Field>(a: &LinearOperator<T>) -> SemigroupBounds {
    let hermitian_part = (&a.matrix + a.matrix.adjoint()).map(|z| z * T::from_real(0.5));
    let omega = hermitian_part.symmetric_eigenvalues().max();
    SemigroupBounds { m: 1.0, omega }
}
