use nalgebra::DVector;

use super::net::{EpsNet, NetBuilder};
use crate::error::{Error, Result};

/// Net of the Minkowski sum `Y₁ + … + Y_n` from nets of the summands.
///
/// Nets are folded left to right. While the running product of center counts
/// stays within `budget`, centers are all sums `c₁ + … + c_k` and radii add.
/// When adding net `k` would exceed `budget`, the partial sums are streamed
/// through a greedy re-net at radius `r_k`; that step contributes `2 r_k` to
/// the radius (the net's own radius plus the re-netting slack), so the result
/// always stays within twice the sum of the input radii.
pub fn minkowski_sum_net(nets: &[EpsNet], budget: usize) -> Result<EpsNet> {
    let Some((first, rest)) = nets.split_first() else {
        return Err(Error::invalid("minkowski_sum_net needs at least one net"));
    };
    let dims: Vec<usize> = nets.iter().filter_map(|n| n.dim()).collect();
    if let Some(&d) = dims.first() {
        if let Some(&bad) = dims.iter().find(|&&x| x != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: bad,
            });
        }
    }
    if let Some(bad) = nets
        .iter()
        .find(|n| !(n.radius >= 0.0) || !n.radius.is_finite())
    {
        return Err(Error::invalid(format!(
            "net radius {} is invalid",
            bad.radius
        )));
    }

    let mut centers = first.centers.clone();
    let mut radius = first.radius;
    let mut source_count = first.len();
    for net in rest {
        source_count = source_count.saturating_mul(net.len());
        let product = centers.len().saturating_mul(net.len());
        if product <= budget.max(1) || net.radius == 0.0 {
            centers = centers
                .iter()
                .flat_map(|a| net.centers.iter().map(move |b| a + b))
                .collect();
            radius += net.radius;
        } else {
            let sample = sample_sums(&centers, &net.centers, 2048);
            let mut builder = NetBuilder::new(net.radius, &sample);
            for a in &centers {
                for b in &net.centers {
                    builder.offer(a + b);
                }
            }
            centers = builder.finish().centers;
            radius += 2.0 * net.radius;
        }
    }
    Ok(EpsNet {
        centers,
        radius,
        source_count,
    })
}

fn sample_sums(left: &[DVector<f64>], right: &[DVector<f64>], n: usize) -> Vec<DVector<f64>> {
    if left.is_empty() || right.is_empty() {
        return Vec::new();
    }
    let total = left.len() * right.len();
    let stride = (total / n).max(1);
    (0..total)
        .step_by(stride)
        .map(|k| &left[k / right.len()] + &right[(k * 7919) % right.len()])
        .collect()
}
