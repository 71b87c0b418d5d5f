//! Reference solvers for the mild solution, independent of the Dyson code path.
//!
//! * [`propagate_oracle`] integrates `ψ' = (A + u B) ψ` directly with RK4.
//! * [`picard_solution`] iterates the Duhamel map
//!   `ψ ↦ e^{tA}ψ₀ + ∫₀ᵗ e^{(t-s)A} B ψ(s) u(s) ds` with composite trapezoid
//!   quadrature.

use nalgebra::{DMatrix, DVector};

use crate::controls::{PiecewiseConstantControl, Segment};
use crate::error::{Error, Result};
use crate::field::{all_finite, Field};
use crate::linops::{expm, LinearOperator};

fn check<T: Field>(
    a: &LinearOperator<T>,
    b: &LinearOperator<T>,
    psi0: &DVector<T>,
    t: f64,
) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    a.check_vector(psi0)?;
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::invalid(format!(
            "time must be finite and >= 0, got {t}"
        )));
    }
    Ok(())
}

fn control_pieces(u: &PiecewiseConstantControl, t: f64) -> Vec<Segment> {
    u.segments(t, &[])
}

/// RK4 on `ψ' = (A + u(s) B) ψ` with `steps` uniform sub-steps per control
/// piece (and on the trailing zero-control stretch).
pub fn propagate_oracle<T: Field>(
    a: &LinearOperator<T>,
    b: &LinearOperator<T>,
    psi0: &DVector<T>,
    u: &PiecewiseConstantControl,
    t: f64,
    steps: usize,
) -> Result<DVector<T>> {
    check(a, b, psi0, t)?;
    if steps == 0 {
        return Err(Error::invalid("steps must be >= 1"));
    }
    let mut psi = psi0.clone();
    for seg in control_pieces(u, t) {
        let gen: DMatrix<T> = a.matrix() + b.matrix().map(|z| z * T::from_real(seg.value));
        let h = seg.len() / steps as f64;
        let (half, full, sixth) = (
            T::from_real(h / 2.0),
            T::from_real(h),
            T::from_real(h / 6.0),
        );
        for _ in 0..steps {
            let k1 = &gen * &psi;
            let k2 = &gen * (&psi + &k1 * half);
            let k3 = &gen * (&psi + &k2 * half);
            let k4 = &gen * (&psi + &k3 * full);
            psi += (k1 + (k2 + k3) * T::from_real(2.0) + k4) * sixth;
        }
        if !all_finite(&psi) {
            return Err(Error::NumericalOverflow { order: 0 });
        }
    }
    Ok(psi)
}

/// `iterations` Picard sweeps of the Duhamel map starting from `s ↦ e^{sA}ψ₀`.
///
/// Each control piece on `[0, t]` is split into `grid` equal intervals, so
/// `u` is constant between neighbouring nodes and the trapezoid rule sees a
/// smooth integrand. The running integral is advanced with the exact step
/// propagator `e^{hA}`, which makes the scheme identical to composite
/// trapezoid quadrature of every `∫₀^{s_i}`. With `k` iterations the result
/// is the discretised Dyson partial sum `Σ_{p ≤ k} W_p(t, u) ψ₀`.
pub fn picard_solution<T: Field>(
    a: &LinearOperator<T>,
    b: &LinearOperator<T>,
    psi0: &DVector<T>,
    u: &PiecewiseConstantControl,
    t: f64,
    iterations: usize,
    grid: usize,
) -> Result<DVector<T>> {
    check(a, b, psi0, t)?;
    if iterations == 0 {
        return Err(Error::invalid("iterations must be >= 1"));
    }
    if grid == 0 {
        return Err(Error::invalid("grid must be >= 1"));
    }
    let pieces = control_pieces(u, t);
    if pieces.is_empty() {
        return Ok(psi0.clone());
    }

    // Per interval: (piece index); per piece: (step propagator, h, u).
    let mut steps: Vec<(DMatrix<T>, f64, T)> = Vec::with_capacity(pieces.len());
    for seg in &pieces {
        let h = seg.len() / grid as f64;
        steps.push((expm(a, h)?.into_matrix(), h, T::from_real(seg.value)));
    }
    let interval_piece: Vec<usize> = (0..pieces.len())
        .flat_map(|k| std::iter::repeat_n(k, grid))
        .collect();

    // Free evolution e^{s_i A} ψ₀ on the nodes.
    let mut free = Vec::with_capacity(interval_piece.len() + 1);
    free.push(psi0.clone());
    for &k in &interval_piece {
        let next = &steps[k].0 * free.last().unwrap();
        free.push(next);
    }

    let bm = b.matrix();
    let mut current = free.clone();
    for _ in 0..iterations {
        let mut next = Vec::with_capacity(current.len());
        let mut integral = DVector::<T>::zeros(psi0.len());
        next.push(free[0].clone());
        for (i, &k) in interval_piece.iter().enumerate() {
            let (prop, h, ctrl) = &steps[k];
            let half_h = T::from_real(h / 2.0);
            let left = bm * &current[i] * (*ctrl * half_h);
            let right = bm * &current[i + 1] * (*ctrl * half_h);
            integral = prop * (integral + left) + right;
            next.push(&free[i + 1] + &integral);
        }
        if !next.iter().all(all_finite) {
            return Err(Error::NumericalOverflow { order: 0 });
        }
        current = next;
    }
    Ok(current.pop().unwrap())
}
