//! Epsilon-nets, partitions of unity and attainable-set covers.
//!
//! All distances are Euclidean on the real embedding of the state space
//! (see [`crate::embed`]), so real and complex problems share one code path.

mod attainable;
mod minkowski;
mod net;
mod pou;

pub use attainable::{
    attainable_net, obstruction_report, sample_attainable, sample_w_set, time_grid, AttainableNet,
    NetParams, ObstructionEntry,
};
pub use minkowski::minkowski_sum_net;
pub use net::{covering_numbers, farthest_point_net, greedy_eps_net, EpsNet};
pub use pou::{hat, partition_weights, PartitionOfUnity};
