use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::minkowski::minkowski_sum_net;
use super::net::{greedy_eps_net, CenterIndex, EpsNet};
use crate::controls::{control_family, PiecewiseConstantControl};
use crate::dyson::{choose_truncation, hierarchy_sweep, DysonConfig, DysonPropagator};
use crate::error::{Error, Result};
use crate::field::{embed, Field};
use crate::linops::LinearOperator;

/// `n` uniformly spaced times on `[0, horizon]`, endpoints included
/// (`[horizon]` when `n == 1`).
pub fn time_grid(horizon: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![horizon],
        _ => (0..n)
            .map(|i| horizon * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Hierarchy terms `w_0 … w_{p_max}` for every (time, control) pair, embedded
/// in real coordinates. Output is `[order][sample]` with samples in
/// time-major, then control-index order. Controls are swept in parallel and
/// merged in input order, so the result does not depend on the thread count.
pub(crate) fn sample_layers<T: Field>(
    a: &LinearOperator<T>,
    b: &LinearOperator<T>,
    psi0: &DVector<T>,
    times: &[f64],
    controls: &[PiecewiseConstantControl],
    p_max: usize,
    cfg: &DysonConfig,
) -> Result<Vec<Vec<DVector<f64>>>> {
    let per_control: Vec<Vec<Vec<DVector<T>>>> = controls
        .par_iter()
        .map(|u| hierarchy_sweep(a.matrix(), b.matrix(), psi0, u, times, p_max, cfg.steps()))
        .collect::<Result<_>>()?;
    let mut layers: Vec<Vec<DVector<f64>>> = (0..=p_max)
        .map(|_| Vec::with_capacity(times.len() * controls.len()))
        .collect();
    for ti in 0..times.len() {
        for sweep in &per_control {
            for (j, layer) in layers.iter_mut().enumerate() {
                layer.push(embed(&sweep[ti][j]));
            }
        }
    }
    Ok(layers)
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

/// Samples of `𝒲_j^{T,K} = { W_j(t, u) ψ₀ : t ≤ T, ‖u‖₁ ≤ K }` over a uniform
/// grid of `n_times` times and the given controls (time-major order).
#[allow(clippy::too_many_arguments)]
pub fn sample_w_set<T: Field>(
    a: &LinearOperator<T>,
    b: &LinearOperator<T>,
    psi0: &DVector<T>,
    j: usize,
    horizon: f64,
    l1_budget: f64,
    n_times: usize,
    controls: &[PiecewiseConstantControl],
    cfg: &DysonConfig,
) -> Result<Vec<DVector<T>>> {
    check_problem(a, b, psi0)?;
    cfg.validate()?;
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::invalid(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    if let Some(u) = controls.iter().find(|u| u.l1_norm() > l1_budget) {
        return Err(Error::invalid(format!(
            "control with L1 norm {} exceeds the budget {l1_budget}",
            u.l1_norm()
        )));
    }
    let times = time_grid(horizon, n_times);
    let per_control: Vec<Vec<Vec<DVector<T>>>> = controls
        .par_iter()
        .map(|u| hierarchy_sweep(a.matrix(), b.matrix(), psi0, u, &times, j, cfg.steps()))
        .collect::<Result<_>>()?;
    Ok((0..times.len())
        .flat_map(|ti| per_control.iter().map(move |s| s[ti][j].clone()))
        .collect())
}

/// Knobs of the attainable-net pipeline for one `(T, K)` cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetParams {
    /// Time horizon `T`.
    pub horizon: f64,
    /// L¹ budget `K` of the controls.
    pub l1_budget: f64,
    /// Target cover radius.
    pub eps: f64,
    pub family_size: usize,
    pub seed: u64,
    /// Sampled times on `[0, T]`, endpoints included.
    pub n_times: usize,
    /// Pieces of every sampled control.
    pub n_pieces: usize,
    /// Cap on Minkowski product sizes before re-netting.
    pub budget: usize,
}

impl NetParams {
    pub fn new(horizon: f64, l1_budget: f64, eps: f64) -> Self {
        Self {
            horizon,
            l1_budget,
            eps,
            family_size: 200,
            seed: 0,
            n_times: 11,
            n_pieces: 4,
            budget: 200_000,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0) || !self.eps.is_finite() {
            return Err(Error::invalid(format!(
                "eps must be positive, got {}",
                self.eps
            )));
        }
        if self.n_times == 0 {
            return Err(Error::invalid("n_times must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct AttainableNet {
    /// Cover of the sampled attainable points; radius ≤ eps.
    pub net: EpsNet,
    /// `N_ε`: layers `0..=N_ε` were netted, the rest is the certified tail.
    pub truncation_order: usize,
    /// Radius of each layer net.
    pub layer_radius: f64,
    pub layer_sizes: Vec<usize>,
    /// Radius of the Minkowski-sum net before the tail allowance.
    pub sum_radius: f64,
    /// In-sample attainable points `Σ_{j ≤ N_ε} w_j(t_i, u_k)` (embedded).
    pub samples: Vec<DVector<f64>>,
    pub in_sample_coverage: bool,
    pub max_in_sample_distance: f64,
}

/// Net of the attainable set `{Υ^u_{t,0} ψ₀ : t ≤ T, ‖u‖₁ ≤ K}` sampled on a
/// seeded control family.
///
/// 1. `N_ε` makes the certified tail `Σ_{p > N_ε} W_p ψ₀` at most `ε/2`,
///    uniformly over `t ≤ T` and `‖u‖₁ ≤ K`.
/// 2. Each layer `𝒲_j`, `j ≤ N_ε`, gets a greedy net of radius `ε / (2(N_ε+1))`
///    (halved when the product of layer sizes exceeds `budget`, which leaves
///    room for re-netting).
/// 3. The layer nets are Minkowski-summed; the result covers every sampled
///    `Σ_j w_j` within `ε/2`, and the tail allowance brings the radius to `ε`.
/// 4. Coverage of every in-sample attainable point is checked exactly.
pub fn attainable_net<T: Field>(
    a: &LinearOperator<T>,
    b: &LinearOperator<T>,
    psi0: &DVector<T>,
    params: &NetParams,
    cfg: &DysonConfig,
) -> Result<AttainableNet> {
    check_problem(a, b, psi0)?;
    params.validate()?;
    let prop = DysonPropagator::new(a, b, *cfg)?;
    let bounds = prop.bounds();
    let worst_t = if bounds.omega >= 0.0 {
        params.horizon
    } else {
        0.0
    };
    let order = choose_truncation(
        params.eps,
        worst_t,
        params.l1_budget,
        psi0.norm(),
        &bounds,
        prop.b_norm(),
        cfg.max_order,
    )?;

    let controls = control_family(
        params.horizon,
        params.l1_budget,
        params.n_pieces,
        params.family_size,
        params.seed,
    )?;
    let times = time_grid(params.horizon, params.n_times);
    let layers = sample_layers(a, b, psi0, &times, &controls, order, cfg)?;

    let samples: Vec<DVector<f64>> = (0..layers[0].len())
        .map(|i| {
            layers
                .iter()
                .fold(DVector::zeros(layers[0][i].len()), |acc, l| acc + &l[i])
        })
        .collect();

    let build = |radius: f64| -> Result<Vec<EpsNet>> {
        layers.iter().map(|l| greedy_eps_net(l, radius)).collect()
    };
    let mut layer_radius = params.eps / (2.0 * (order + 1) as f64);
    let mut nets = build(layer_radius)?;
    let product = nets
        .iter()
        .fold(1usize, |acc, n| acc.saturating_mul(n.len().max(1)));
    if product > params.budget {
        layer_radius /= 2.0;
        nets = build(layer_radius)?;
    }
    let layer_sizes = nets.iter().map(EpsNet::len).collect();

    let sum = minkowski_sum_net(&nets, params.budget)?;
    let radius = sum.radius + params.eps / 2.0;

    let index = CenterIndex::from_points(radius, &sum.centers);
    let mut covered = true;
    let mut max_distance: f64 = 0.0;
    for s in &samples {
        match index.nearest_within(s, radius) {
            Some((_, d)) => max_distance = max_distance.max(d),
            None => {
                covered = false;
                max_distance = f64::INFINITY;
            }
        }
    }

    Ok(AttainableNet {
        net: EpsNet {
            centers: sum.centers,
            radius,
            source_count: samples.len(),
        },
        truncation_order: order,
        layer_radius,
        layer_sizes,
        sum_radius: sum.radius,
        samples,
        in_sample_coverage: covered,
        max_in_sample_distance: max_distance,
    })
}

/// Attainable points `Σ_{p ≤ order} w_p(t_i, u_k)` (embedded, time-major) for
/// arbitrary controls, e.g. to test a net out of sample.
pub fn sample_attainable<T: Field>(
    a: &LinearOperator<T>,
    b: &LinearOperator<T>,
    psi0: &DVector<T>,
    times: &[f64],
    controls: &[PiecewiseConstantControl],
    order: usize,
    cfg: &DysonConfig,
) -> Result<Vec<DVector<f64>>> {
    check_problem(a, b, psi0)?;
    cfg.validate()?;
    let layers = sample_layers(a, b, psi0, times, controls, order, cfg)?;
    Ok((0..layers[0].len())
        .map(|i| {
            layers
                .iter()
                .fold(DVector::zeros(layers[0][i].len()), |acc, l| acc + &l[i])
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObstructionEntry {
    pub index: usize,
    /// `max(0, min_c ‖target - c‖ - radius)`.
    pub distance: f64,
}

/// Distance from each target to the union of the net's balls.
pub fn obstruction_report(net: &EpsNet, targets: &[DVector<f64>]) -> Result<Vec<ObstructionEntry>> {
    let Some(dim) = net.dim() else {
        return Err(Error::invalid("obstruction report needs a non-empty net"));
    };
    targets
        .iter()
        .enumerate()
        .map(|(index, t)| {
            if t.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: t.len(),
                });
            }
            let (_, d) = net.nearest(t).unwrap();
            Ok(ObstructionEntry {
                index,
                distance: (d - net.radius).max(0.0),
            })
        })
        .collect()
}
