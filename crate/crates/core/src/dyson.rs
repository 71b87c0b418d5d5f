//! Dyson operator hierarchy and the certified truncated-series propagator.
//!
//! The terms `w_p(t) = W_p(t, u) ψ₀` satisfy the triangular ODE system
//!
//! ```text
//!     w₀' = A w₀,                 w₀(0) = ψ₀
//!     w_p' = A w_p + u(t) B w_{p-1},  w_p(0) = 0   (p ≥ 1)
//! ```
//!
//! which is the differentiated form of the iterated Duhamel integrals. All
//! orders are advanced together with classical RK4 on a grid aligned to the
//! control breakpoints, so `u` is constant inside every step.
//!
//! Truncation error is certified by `‖W_p(t)‖ ≤ M e^{ωt} (‖B‖ ∫|u|)^p / p!`.
//! Time-discretisation error is only estimated, from one grid doubling.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::controls::PiecewiseConstantControl;
use crate::error::{Error, Result};
use crate::field::Field;
use crate::linops::{expm, operator_norm, semigroup_bounds, LinearOperator, SemigroupBounds};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DysonConfig {
    /// Grid points per constant piece, endpoints included (so `n - 1` steps).
    pub grid_points_per_piece: usize,
    /// Hard cap on the truncation order.
    pub max_order: usize,
}

impl Default for DysonConfig {
    fn default() -> Self {
        Self {
            grid_points_per_piece: 64,
            max_order: 64,
        }
    }
}

impl DysonConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_points_per_piece < 2 {
            return Err(Error::invalid("grid_points_per_piece must be >= 2"));
        }
        if self.max_order < 1 {
            return Err(Error::invalid("max_order must be >= 1"));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        self.grid_points_per_piece - 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropagationResult<T: Field> {
    pub state: DVector<T>,
    /// Number of summed terms: the state is `Σ_{p < truncation_order} w_p`.
    pub truncation_order: usize,
    /// Certified bound on the norm of the discarded tail.
    pub series_error_bound: f64,
    /// Norm change of the state when the grid is doubled.
    pub quadrature_error_estimate: f64,
    pub elapsed: Duration,
}

/// Advances all hierarchy orders `0..=p_max` and records them at each of
/// `times` (ascending, non-negative). Returns `[time][order]`.
pub(crate) fn hierarchy_sweep<T: Field>(
    a: &DMatrix<T>,
    b: &DMatrix<T>,
    psi0: &DVector<T>,
    u: &PiecewiseConstantControl,
    times: &[f64],
    p_max: usize,
    steps_per_segment: usize,
) -> Result<Vec<Vec<DVector<T>>>> {
    let dim = psi0.len();
    let orders = p_max + 1;
    let t_end = times.last().copied().unwrap_or(0.0);

    let mut w: Vec<DVector<T>> = (0..orders).map(|_| DVector::zeros(dim)).collect();
    w[0].copy_from(psi0);

    let mut k: [Vec<DVector<T>>; 4] = std::array::from_fn(|_| w.clone());
    let mut stage = w.clone();

    let mut out = Vec::with_capacity(times.len());
    let mut next_time = 0;
    let record = |w: &Vec<DVector<T>>, now: f64, next: &mut usize, out: &mut Vec<_>| {
        while *next < times.len() && times[*next] <= now {
            out.push(w.clone());
            *next += 1;
        }
    };
    record(&w, 0.0, &mut next_time, &mut out);

    let deriv = |src: &[DVector<T>], ctrl: T, dst: &mut [DVector<T>]| {
        for p in 0..src.len() {
            dst[p].gemv(T::one(), a, &src[p], T::zero());
            if p > 0 {
                dst[p].gemv(ctrl, b, &src[p - 1], T::one());
            }
        }
    };

    for seg in u.segments(t_end, times) {
        if seg.value == 0.0 {
            // Orders decouple; each evolves under the exact semigroup.
            let prop = expm(&LinearOperator::new(a.clone())?, seg.len())?.into_matrix();
            for wp in w.iter_mut() {
                *wp = &prop * &*wp;
            }
            record(&w, seg.end, &mut next_time, &mut out);
            continue;
        }
        let h = seg.len() / steps_per_segment as f64;
        let ctrl = T::from_real(seg.value);
        let half = T::from_real(h / 2.0);
        let full = T::from_real(h);
        let sixth = T::from_real(h / 6.0);
        let two = T::from_real(2.0);

        for _ in 0..steps_per_segment {
            let [k1, k2, k3, k4] = &mut k;
            deriv(&w, ctrl, k1);
            for p in 0..orders {
                stage[p].copy_from(&w[p]);
                stage[p].axpy(half, &k1[p], T::one());
            }
            deriv(&stage, ctrl, k2);
            for p in 0..orders {
                stage[p].copy_from(&w[p]);
                stage[p].axpy(half, &k2[p], T::one());
            }
            deriv(&stage, ctrl, k3);
            for p in 0..orders {
                stage[p].copy_from(&w[p]);
                stage[p].axpy(full, &k3[p], T::one());
            }
            deriv(&stage, ctrl, k4);
            for p in 0..orders {
                k2[p].axpy(T::one(), &k3[p], T::one());
                k1[p].axpy(two, &k2[p], T::one());
                k1[p].axpy(T::one(), &k4[p], T::one());
                w[p].axpy(sixth, &k1[p], T::one());
            }
        }
        if let Some(order) = w.iter().position(|v| !crate::field::all_finite(v)) {
            return Err(Error::NumericalOverflow { order });
        }
        record(&w, seg.end, &mut next_time, &mut out);
    }
    debug_assert_eq!(out.len(), times.len());
    Ok(out)
}

fn check_problem<T: Field>(
    a: &LinearOperator<T>,
    b: &LinearOperator<T>,
    psi0: &DVector<T>,
) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    a.check_vector(psi0)
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::invalid(format!(
            "time must be finite and >= 0, got {t}"
        )));
    }
    Ok(())
}

/// `[W_0(t,u)ψ₀, …, W_{p_max}(t,u)ψ₀]`.
pub fn w_terms<T: Field>(
    a: &LinearOperator<T>,
    b: &LinearOperator<T>,
    psi0: &DVector<T>,
    u: &PiecewiseConstantControl,
    t: f64,
    p_max: usize,
    cfg: &DysonConfig,
) -> Result<Vec<DVector<T>>> {
    check_problem(a, b, psi0)?;
    check_time(t)?;
    cfg.validate()?;
    let mut at = hierarchy_sweep(a.matrix(), b.matrix(), psi0, u, &[t], p_max, cfg.steps())?;
    Ok(at.pop().unwrap())
}

pub(crate) fn ln_factorial(p: usize) -> f64 {
    (2..=p).map(|k| (k as f64).ln()).sum()
}

/// `x^p / p!`, log-domain beyond `p = 20`.
fn power_over_factorial(x: f64, p: usize) -> f64 {
    if p == 0 {
        return 1.0;
    }
    if x == 0.0 {
        return 0.0;
    }
    if p <= 20 {
        (1..=p).fold(1.0, |acc, k| acc * x / k as f64)
    } else {
        (p as f64 * x.ln() - ln_factorial(p)).exp()
    }
}

/// `M e^{ωt} (‖B‖ ∫|u|)^p / p!`, the bound on `‖W_p(t, u)‖`.
pub fn tail_bound(p: usize, t: f64, u_l1: f64, bounds: &SemigroupBounds, b_norm: f64) -> f64 {
    bounds.growth(t) * power_over_factorial(b_norm * u_l1, p)
}

/// `Σ_{p ≥ n} x^p / p!` for `x ≥ 0`, summed upward over positive terms.
pub fn series_tail(x: f64, n: usize) -> f64 {
    if x == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let mut term = power_over_factorial(x, n);
    if !term.is_finite() {
        return f64::INFINITY;
    }
    let mut sum = 0.0;
    let mut p = n;
    loop {
        sum += term;
        p += 1;
        term *= x / p as f64;
        if !sum.is_finite() {
            return f64::INFINITY;
        }
        if term == 0.0 || (p as f64 > x && term <= sum * 1e-18) {
            return sum;
        }
    }
}

/// Smallest `N ≤ max_order` whose certified tail
/// `‖ψ₀‖ M e^{ωt} Σ_{p≥N} (‖B‖ ∫|u|)^p / p!` fits in `eps / 2`.
pub fn choose_truncation(
    eps: f64,
    t: f64,
    u_l1: f64,
    psi0_norm: f64,
    bounds: &SemigroupBounds,
    b_norm: f64,
    max_order: usize,
) -> Result<usize> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::invalid(format!("eps must be positive, got {eps}")));
    }
    let target = eps / 2.0;
    let x = b_norm * u_l1;
    let scale = psi0_norm * bounds.growth(t);
    let certified = |n: usize| {
        let tail = series_tail(x, n);
        if scale == 0.0 {
            0.0
        } else {
            scale * tail
        }
    };
    (0..=max_order)
        .find(|&n| certified(n) <= target)
        .ok_or(Error::CertificateUnreachable {
            max_order,
            achievable: certified(max_order),
            target,
        })
}

/// Gronwall bound on `‖ψ(t)‖`. The exponent uses `M max(1, e^{ωt})`, which
/// is the classical `M e^{ωt}` whenever `ω ≥ 0` and stays valid for `ω < 0`.
pub fn apriori_bound(
    t: f64,
    u_l1: f64,
    psi0_norm: f64,
    bounds: &SemigroupBounds,
    b_norm: f64,
) -> f64 {
    let growth = bounds.growth(t);
    let feedback = bounds.m * (bounds.omega * t).exp().max(1.0);
    growth * psi0_norm * (feedback * b_norm * u_l1).exp()
}

/// Propagator bound to one `(A, B)` pair, caching `‖B‖` and `(M, ω)`.
#[derive(Debug, Clone)]
pub struct DysonPropagator<'a, T: Field> {
    a: &'a LinearOperator<T>,
    b: &'a LinearOperator<T>,
    bounds: SemigroupBounds,
    b_norm: f64,
    cfg: DysonConfig,
}

impl<'a, T: Field> DysonPropagator<'a, T> {
    pub fn new(
        a: &'a LinearOperator<T>,
        b: &'a LinearOperator<T>,
        cfg: DysonConfig,
    ) -> Result<Self> {
        if a.dim() != b.dim() {
            return Err(Error::DimensionMismatch {
                expected: a.dim(),
                got: b.dim(),
            });
        }
        cfg.validate()?;
        Ok(Self {
            a,
            b,
            bounds: semigroup_bounds(a),
            b_norm: operator_norm(b),
            cfg,
        })
    }

    pub fn bounds(&self) -> SemigroupBounds {
        self.bounds
    }

    pub fn b_norm(&self) -> f64 {
        self.b_norm
    }

    pub fn config(&self) -> &DysonConfig {
        &self.cfg
    }

    pub fn apriori(&self, psi0: &DVector<T>, u: &PiecewiseConstantControl, t: f64) -> f64 {
        apriori_bound(
            t,
            u.l1_norm_until(t),
            psi0.norm(),
            &self.bounds,
            self.b_norm,
        )
    }

    pub fn propagate(
        &self,
        psi0: &DVector<T>,
        u: &PiecewiseConstantControl,
        t: f64,
        eps: f64,
    ) -> Result<PropagationResult<T>> {
        let started = Instant::now();
        self.a.check_vector(psi0)?;
        check_time(t)?;
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(Error::invalid(format!("eps must be positive, got {eps}")));
        }
        if t == 0.0 {
            return Ok(PropagationResult {
                state: psi0.clone(),
                truncation_order: 1,
                series_error_bound: 0.0,
                quadrature_error_estimate: 0.0,
                elapsed: started.elapsed(),
            });
        }

        let u_l1 = u.l1_norm_until(t);
        let psi0_norm = psi0.norm();
        let n = choose_truncation(
            eps,
            t,
            u_l1,
            psi0_norm,
            &self.bounds,
            self.b_norm,
            self.cfg.max_order,
        )?
        // N = 0 would certify the zero state; keep at least the free evolution.
        .max(1);

        let sum_at = |steps: usize| -> Result<DVector<T>> {
            let terms = hierarchy_sweep(
                self.a.matrix(),
                self.b.matrix(),
                psi0,
                u,
                &[t],
                n - 1,
                steps,
            )?
            .pop()
            .unwrap();
            Ok(terms
                .iter()
                .fold(DVector::zeros(psi0.len()), |acc, w| acc + w))
        };
        let state = sum_at(self.cfg.steps())?;
        let refined = sum_at(2 * self.cfg.steps())?;

        let x = self.b_norm * u_l1;
        let series_error_bound = if psi0_norm == 0.0 {
            0.0
        } else {
            psi0_norm * self.bounds.growth(t) * series_tail(x, n)
        };
        Ok(PropagationResult {
            quadrature_error_estimate: (&state - &refined).norm(),
            state,
            truncation_order: n,
            series_error_bound,
            elapsed: started.elapsed(),
        })
    }
}

/// `Υ^u_{t,0} ψ₀ ≈ Σ_{p<N} W_p(t, u) ψ₀` with the tail certified below `eps / 2`.
pub fn propagate_dyson<T: Field>(
    a: &LinearOperator<T>,
    b: &LinearOperator<T>,
    psi0: &DVector<T>,
    u: &PiecewiseConstantControl,
    t: f64,
    eps: f64,
    cfg: &DysonConfig,
) -> Result<PropagationResult<T>> {
    check_problem(a, b, psi0)?;
    DysonPropagator::new(a, b, *cfg)?.propagate(psi0, u, t, eps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linops::expm;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::E;

    fn real(rows: &[&[f64]]) -> LinearOperator<f64> {
        LinearOperator::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn vec2(x: f64, y: f64) -> DVector<f64> {
        DVector::from_vec(vec![x, y])
    }

    fn unit_bounds() -> SemigroupBounds {
        SemigroupBounds { m: 1.0, omega: 0.0 }
    }

    #[test]
    fn zero_control_kills_higher_orders() {
        let a = real(&[&[0.3, -1.0], &[1.0, -0.2]]);
        let b = real(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let psi0 = vec2(1.0, 2.0);
        let w = w_terms(
            &a,
            &b,
            &psi0,
            &PiecewiseConstantControl::zero(),
            1.5,
            4,
            &DysonConfig::default(),
        )
        .unwrap();
        let exact = expm(&a, 1.5).unwrap().apply(&psi0);
        assert!((&w[0] - &exact).norm() < 1e-9);
        assert!(w[1..].iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn commuting_identity_coupling_gives_inverse_factorials() {
        let a = LinearOperator::<f64>::zeros(2);
        let b = LinearOperator::<f64>::identity(2);
        let psi0 = vec2(0.7, -1.3);
        let u = PiecewiseConstantControl::constant(1.0, 1.0).unwrap();
        let w = w_terms(&a, &b, &psi0, &u, 1.0, 8, &DysonConfig::default()).unwrap();
        let mut fact = 1.0;
        for (p, wp) in w.iter().enumerate() {
            if p > 0 {
                fact *= p as f64;
            }
            assert!((wp - &psi0 / fact).norm() < 1e-9, "order {p}");
        }
    }

    #[test]
    fn nilpotent_pair_matches_nested_quadrature() {
        // Frozen from a 10⁴-point nested midpoint quadrature of the iterated
        // Duhamel integrals: w₁(1) = (1/2, 1), w₂(1) = (1/24, 1/6).
        let a = real(&[&[0.0, 1.0], &[0.0, 0.0]]);
        let b = real(&[&[0.0, 0.0], &[1.0, 0.0]]);
        let u = PiecewiseConstantControl::constant(1.0, 1.0).unwrap();
        let w = w_terms(&a, &b, &vec2(1.0, 0.0), &u, 1.0, 2, &DysonConfig::default()).unwrap();
        assert!((&w[1] - vec2(0.5, 1.0)).norm() < 1e-12);
        assert!((&w[2] - vec2(1.0 / 24.0, 1.0 / 6.0)).norm() < 1e-12);
    }

    #[test]
    fn w_terms_rejects_mismatched_dimensions() {
        let a = LinearOperator::<f64>::identity(2);
        let b = LinearOperator::<f64>::identity(3);
        let u = PiecewiseConstantControl::zero();
        let cfg = DysonConfig::default();
        assert!(matches!(
            w_terms(&a, &b, &vec2(1.0, 0.0), &u, 1.0, 2, &cfg),
            Err(Error::DimensionMismatch { .. })
        ));
        let b = LinearOperator::<f64>::identity(2);
        let psi = DVector::from_vec(vec![1.0, 0.0, 0.0]);
        assert!(matches!(
            w_terms(&a, &b, &psi, &u, 1.0, 2, &cfg),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn overflow_names_an_order() {
        let a = real(&[&[1e90]]);
        let b = real(&[&[1.0]]);
        let u = PiecewiseConstantControl::constant(1.0, 1.0).unwrap();
        let cfg = DysonConfig {
            grid_points_per_piece: 2,
            max_order: 4,
        };
        let err = w_terms(&a, &b, &DVector::from_vec(vec![1.0]), &u, 1.0, 2, &cfg).unwrap_err();
        assert!(matches!(err, Error::NumericalOverflow { .. }), "{err:?}");
    }

    #[test]
    fn tail_bound_examples() {
        assert_eq!(tail_bound(0, 3.0, 5.0, &unit_bounds(), 2.0), 1.0);
        assert_abs_diff_eq!(
            tail_bound(3, 0.0, 1.0, &unit_bounds(), 1.0),
            1.0 / 6.0,
            epsilon = 1e-16
        );
        // 2 e / 10! recomputed by hand: 1.4981712017521192e-6.
        let b = SemigroupBounds { m: 2.0, omega: 0.5 };
        let v = tail_bound(10, 2.0, 1.0, &b, 1.0);
        assert!((v - 1.4981712017521192e-6).abs() < 1e-18);
    }

    #[test]
    fn tail_bound_log_domain_matches_direct_product() {
        for p in [21usize, 30, 60, 150] {
            let x: f64 = 3.7;
            let direct = (1..=p).fold(1.0, |acc, k| acc * x / k as f64);
            let v = tail_bound(p, 0.0, x, &unit_bounds(), 1.0);
            assert!((v - direct).abs() <= 1e-12 * direct, "p = {p}");
        }
    }

    #[test]
    fn series_tail_matches_exponential_remainder() {
        for &x in &[0.1, 1.0, 2.5, 7.0] {
            for n in 0..12 {
                let partial: f64 = (0..n).map(|p| power_over_factorial(x, p)).sum();
                let remainder = x.exp() - partial;
                let tail = series_tail(x, n);
                assert!(
                    (tail - remainder).abs() <= 1e-13 * x.exp(),
                    "x = {x}, n = {n}: {tail} vs {remainder}"
                );
            }
        }
        assert_eq!(series_tail(0.0, 0), 1.0);
        assert_eq!(series_tail(0.0, 3), 0.0);
    }

    #[test]
    fn choose_truncation_against_partial_sums_of_e() {
        let partial = |n: usize| {
            (0..n)
                .map(|p| 1.0 / (1..=p).product::<usize>() as f64)
                .sum::<f64>()
        };
        let tail = |n: usize| E - partial(n);
        assert!(tail(6) > 5e-4 && tail(7) <= 5e-4);
        let n = choose_truncation(1e-3, 0.0, 1.0, 1.0, &unit_bounds(), 1.0, 50).unwrap();
        assert_eq!(n, 7);
    }

    #[test]
    fn choose_truncation_edge_cases() {
        let b = SemigroupBounds { m: 1.0, omega: 0.3 };
        let whole = 2.0 * b.growth(2.0) * (1.5f64 * 2.0).exp() * 3.0;
        assert_eq!(
            choose_truncation(whole, 2.0, 2.0, 3.0, &b, 1.5, 10).unwrap(),
            0
        );
        for eps in [1e-12, 1e-3, 1.0] {
            assert_eq!(
                choose_truncation(eps, 1.0, 0.0, 1.0, &b, 1.5, 10).unwrap(),
                1
            );
        }
        let err = choose_truncation(1e-12, 1.0, 10.0, 1.0, &b, 1.0, 5).unwrap_err();
        match err {
            Error::CertificateUnreachable {
                max_order,
                achievable,
                ..
            } => {
                assert_eq!(max_order, 5);
                assert!(achievable > 1.0);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(choose_truncation(0.0, 1.0, 1.0, 1.0, &b, 1.0, 5).is_err());
    }

    #[test]
    fn apriori_bound_examples() {
        let b = SemigroupBounds { m: 1.0, omega: 0.4 };
        assert_abs_diff_eq!(
            apriori_bound(2.0, 0.0, 3.0, &b, 7.0),
            3.0 * 0.8f64.exp(),
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(
            apriori_bound(123.0, 1.0, 1.0, &unit_bounds(), 1.0),
            E,
            epsilon = 1e-15
        );
    }

    #[test]
    fn apriori_bound_holds_for_contractive_generators() {
        // A = -I, B = I, u ≡ 1: ψ(t) = ψ₀ exactly, while ω = -1.
        let a = real(&[&[-1.0, 0.0], &[0.0, -1.0]]);
        let b = LinearOperator::<f64>::identity(2);
        let u = PiecewiseConstantControl::constant(1.0, 1.0).unwrap();
        let psi0 = vec2(1.0, 0.0);
        let p = DysonPropagator::new(&a, &b, DysonConfig::default()).unwrap();
        let r = p.propagate(&psi0, &u, 1.0, 1e-10).unwrap();
        assert!((r.state.norm() - 1.0).abs() < 1e-9);
        assert!(r.state.norm() <= p.apriori(&psi0, &u, 1.0));
    }

    #[test]
    fn propagate_zero_control_is_free_evolution() {
        let a = real(&[&[0.1, -2.0], &[2.0, 0.1]]);
        let b = real(&[&[1.0, 0.5], &[0.5, -1.0]]);
        let psi0 = vec2(1.0, 1.0);
        let r = propagate_dyson(
            &a,
            &b,
            &psi0,
            &PiecewiseConstantControl::zero(),
            1.0,
            1e-8,
            &DysonConfig::default(),
        )
        .unwrap();
        let exact = expm(&a, 1.0).unwrap().apply(&psi0);
        assert_eq!(r.truncation_order, 1);
        assert_eq!(r.series_error_bound, 0.0);
        assert!((&r.state - &exact).norm() < 1e-8);
    }

    #[test]
    fn propagate_commuting_examples() {
        let cfg = DysonConfig::default();
        let r = propagate_dyson(
            &LinearOperator::<f64>::zeros(2),
            &LinearOperator::identity(2),
            &vec2(1.0, 0.0),
            &PiecewiseConstantControl::constant(1.0, 1.0).unwrap(),
            1.0,
            1e-8,
            &cfg,
        )
        .unwrap();
        assert!((r.state[0] - E).abs() < 1e-8);
        assert_eq!(r.state[1], 0.0);
        assert!(r.series_error_bound <= 5e-9);

        // Rotation with identity coupling: e^{∫u} R(2) ψ₀ = e (cos 2, sin 2).
        let r = propagate_dyson(
            &real(&[&[0.0, -1.0], &[1.0, 0.0]]),
            &LinearOperator::identity(2),
            &vec2(1.0, 0.0),
            &PiecewiseConstantControl::constant(0.5, 2.0).unwrap(),
            2.0,
            1e-8,
            &cfg,
        )
        .unwrap();
        assert!((r.state[0] - (-1.1312043837568135)).abs() < 1e-7);
        assert!((r.state[1] - 2.4717266720048188).abs() < 1e-7);
    }

    #[test]
    fn propagate_at_time_zero_returns_initial_state() {
        let a = real(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let b = LinearOperator::identity(2);
        let psi0 = vec2(0.3, 0.4);
        let u = PiecewiseConstantControl::constant(9.0, 1.0).unwrap();
        let r = propagate_dyson(&a, &b, &psi0, &u, 0.0, 1e-6, &DysonConfig::default()).unwrap();
        assert_eq!(r.state, psi0);
        assert_eq!(r.series_error_bound, 0.0);
        assert_eq!(r.quadrature_error_estimate, 0.0);
    }

    #[test]
    fn propagate_reports_unreachable_certificate() {
        let a = LinearOperator::<f64>::zeros(1);
        let b = LinearOperator::<f64>::identity(1);
        let u = PiecewiseConstantControl::constant(40.0, 1.0).unwrap();
        let cfg = DysonConfig {
            grid_points_per_piece: 8,
            max_order: 10,
        };
        let err = propagate_dyson(&a, &b, &DVector::from_vec(vec![1.0]), &u, 1.0, 1e-6, &cfg)
            .unwrap_err();
        assert!(matches!(err, Error::CertificateUnreachable { .. }));
    }

    #[test]
    fn series_error_bound_is_rederivable() {
        let a = real(&[&[0.0, 1.0], &[-1.0, 0.2]]);
        let b = real(&[&[0.5, 1.0], &[0.0, -0.5]]);
        let psi0 = vec2(2.0, -1.0);
        let u = PiecewiseConstantControl::new(vec![0.0, 0.4, 1.0], vec![1.5, -0.7]).unwrap();
        let p = DysonPropagator::new(&a, &b, DysonConfig::default()).unwrap();
        let r = p.propagate(&psi0, &u, 0.8, 1e-6).unwrap();
        let u_l1 = u.l1_norm_until(0.8);
        let resummed: f64 = (r.truncation_order..r.truncation_order + 60)
            .map(|q| tail_bound(q, 0.8, u_l1, &p.bounds(), p.b_norm()))
            .sum::<f64>()
            * psi0.norm();
        assert!((resummed - r.series_error_bound).abs() <= 1e-12 * resummed.max(1e-300));
        assert!(r.series_error_bound <= 0.5e-6);
    }

    proptest! {
        #[test]
        fn tail_bound_decays_factorially(
            p in 0usize..60,
            t in 0.0f64..3.0,
            u_l1 in 0.01f64..5.0,
            b_norm in 0.01f64..3.0,
            omega in -1.0f64..1.0,
        ) {
            let bounds = SemigroupBounds { m: 1.0, omega };
            let now = tail_bound(p, t, u_l1, &bounds, b_norm);
            let next = tail_bound(p + 1, t, u_l1, &bounds, b_norm);
            let ratio = next / now;
            let want = b_norm * u_l1 / (p + 1) as f64;
            prop_assert!((ratio - want).abs() <= 1e-10 * want);
        }

        #[test]
        fn propagation_is_linear_in_initial_state(
            entries in prop::collection::vec(-1.0f64..1.0, 8),
            x in prop::collection::vec(-1.0f64..1.0, 4),
            alpha in -2.0f64..2.0,
            beta in -2.0f64..2.0,
            values in prop::collection::vec(-1.5f64..1.5, 1..4),
        ) {
            let a = real(&[&[entries[0], entries[1]], &[entries[2], entries[3]]]);
            let b = real(&[&[entries[4], entries[5]], &[entries[6], entries[7]]]);
            let psi = vec2(x[0], x[1]);
            let phi = vec2(x[2], x[3]);
            let u = PiecewiseConstantControl::uniform(1.0, values).unwrap();
            let cfg = DysonConfig { grid_points_per_piece: 16, max_order: 64 };
            let p = DysonPropagator::new(&a, &b, cfg).unwrap();
            // Same truncation order for all three runs: fix it through eps at
            // the norm of the largest initial state.
            let combo = &psi * alpha + &phi * beta;
            let order_for = |v: &DVector<f64>| {
                choose_truncation(1e-9, 1.0, u.l1_norm(), v.norm(), &p.bounds(), p.b_norm(), 64).unwrap()
            };
            let n = order_for(&psi).max(order_for(&phi)).max(order_for(&combo)).max(1);
            let sum = |v: &DVector<f64>| -> DVector<f64> {
                hierarchy_sweep(a.matrix(), b.matrix(), v, &u, &[1.0], n - 1, 15)
                    .unwrap()
                    .pop()
                    .unwrap()
                    .iter()
                    .fold(DVector::zeros(2), |acc, w| acc + w)
            };
            let lhs = sum(&combo);
            let rhs = sum(&psi) * alpha + sum(&phi) * beta;
            prop_assert!((&lhs - &rhs).norm() <= 1e-9 * (1.0 + lhs.norm()));
        }
    }
}
