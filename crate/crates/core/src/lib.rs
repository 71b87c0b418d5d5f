//! Certified propagation of bilinear control systems
//!
//! ```text
//!     dψ/dt = A ψ + u(t) B ψ,    ψ(0) = ψ₀
//! ```
//!
//! on finite-dimensional real or complex state spaces, via the Dyson operator
//! hierarchy `W_p(t, u)` with a factorial truncation certificate, together with
//! epsilon-net tooling that builds finite covers of (sampled) attainable sets.
//!
//! Module map:
//! * [`linops`] dense operators, matrix exponential, semigroup growth bounds
//! * [`controls`] piecewise-constant L¹ controls and seeded control families
//! * [`dyson`] the `W_p` hierarchy, tail bounds and the certified propagator
//! * [`oracle`] independent reference solvers (direct RK4, Picard on Duhamel)
//! * [`reach`] epsilon-nets, partitions of unity, Minkowski sums, attainable nets

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod controls;
pub mod dyson;
mod error;
mod field;
pub mod linops;
pub mod oracle;
pub mod reach;

pub use controls::{control_family, PiecewiseConstantControl, Segment};
pub use dyson::{
    apriori_bound, choose_truncation, propagate_dyson, series_tail, tail_bound, w_terms,
    DysonConfig, DysonPropagator, PropagationResult,
};
pub use error::{Error, Result};
pub use field::{embed, Field};
pub use linops::{expm, operator_norm, semigroup_bounds, LinearOperator, SemigroupBounds};
pub use oracle::{picard_solution, propagate_oracle};
pub use reach::{
    attainable_net, covering_numbers, greedy_eps_net, minkowski_sum_net, obstruction_report,
    sample_w_set, AttainableNet, EpsNet, NetParams, ObstructionEntry, PartitionOfUnity,
};

pub use nalgebra::{DMatrix, DVector};
pub use num_complex::Complex64;
