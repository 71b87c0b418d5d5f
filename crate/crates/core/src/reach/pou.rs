use nalgebra::DVector;

use super::net::distance;
use crate::error::{Error, Result};

/// Hat-function partition of unity subordinate to the balls `B(x_j, 2δ)`.
///
/// The raw profile of center `j` is `1` on `‖x - x_j‖ < δ`, `2 - ‖x - x_j‖/δ`
/// on `[δ, 2δ)` and `0` beyond. Weights are raw profiles divided by their sum,
/// which is at least `1` wherever some `δ`-ball contains `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionOfUnity {
    centers: Vec<DVector<f64>>,
    delta: f64,
}

pub fn hat(d: f64, delta: f64) -> f64 {
    if d < delta {
        1.0
    } else if d < 2.0 * delta {
        2.0 - d / delta
    } else {
        0.0
    }
}

impl PartitionOfUnity {
    pub fn new(centers: Vec<DVector<f64>>, delta: f64) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::invalid(format!(
                "delta must be positive, got {delta}"
            )));
        }
        if let Some(first) = centers.first() {
            if let Some(bad) = centers.iter().find(|c| c.len() != first.len()) {
                return Err(Error::DimensionMismatch {
                    expected: first.len(),
                    got: bad.len(),
                });
            }
        }
        Ok(Self { centers, delta })
    }

    pub fn centers(&self) -> &[DVector<f64>] {
        &self.centers
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Normalised weights at `x`; errors unless some `δ`-ball contains `x`.
    pub fn weights(&self, x: &DVector<f64>) -> Result<Vec<f64>> {
        if let Some(c) = self.centers.first() {
            if c.len() != x.len() {
                return Err(Error::DimensionMismatch {
                    expected: c.len(),
                    got: x.len(),
                });
            }
        }
        let raw: Vec<f64> = self
            .centers
            .iter()
            .map(|c| hat(distance(c, x), self.delta))
            .collect();
        if !raw.contains(&1.0) {
            return Err(Error::UncoveredPoint { delta: self.delta });
        }
        let total: f64 = raw.iter().sum();
        Ok(raw.into_iter().map(|r| r / total).collect())
    }

    /// `Σ_j φ_j(x) x_j`, within `2δ` of `x`.
    pub fn reconstruct(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let w = self.weights(x)?;
        Ok(self
            .centers
            .iter()
            .zip(w)
            .filter(|(_, w)| *w > 0.0)
            .fold(DVector::zeros(x.len()), |acc, (c, w)| acc + c * w))
    }
}

pub fn partition_weights(pou: &PartitionOfUnity, x: &DVector<f64>) -> Result<Vec<f64>> {
    pou.weights(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p1(x: f64) -> DVector<f64> {
        DVector::from_vec(vec![x])
    }

    #[test]
    fn midpoint_splits_evenly() {
        let pou = PartitionOfUnity::new(vec![p1(0.0), p1(1.0)], 0.6).unwrap();
        assert_eq!(pou.weights(&p1(0.5)).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn isolated_center_takes_all_weight() {
        let pou = PartitionOfUnity::new(vec![p1(0.0), p1(3.0), p1(-5.0)], 1.0).unwrap();
        assert_eq!(pou.weights(&p1(3.0)).unwrap(), vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn ramp_profile() {
        assert_eq!(hat(0.5, 1.0), 1.0);
        assert_eq!(hat(1.0, 1.0), 1.0);
        assert_eq!(hat(1.5, 1.0), 0.5);
        assert_eq!(hat(2.0, 1.0), 0.0);
        let pou = PartitionOfUnity::new(vec![p1(0.0), p1(1.0)], 0.6).unwrap();
        // d = 0.3 and 0.7: raw (1, 2 - 0.7/0.6).
        let w = pou.weights(&p1(0.3)).unwrap();
        let second = 2.0 - 0.7 / 0.6;
        assert!((w[0] - 1.0 / (1.0 + second)).abs() < 1e-15);
    }

    #[test]
    fn uncovered_point_is_an_error() {
        let pou = PartitionOfUnity::new(vec![p1(0.0)], 0.5).unwrap();
        // Inside 2δ but outside δ: raw sum is positive but the cover hypothesis fails.
        assert!(matches!(
            pou.weights(&p1(0.7)),
            Err(Error::UncoveredPoint { .. })
        ));
        assert!(matches!(
            pou.weights(&p1(5.0)),
            Err(Error::UncoveredPoint { .. })
        ));
        let empty = PartitionOfUnity::new(vec![], 0.5).unwrap();
        assert!(empty.weights(&p1(0.0)).is_err());
    }

    #[test]
    fn rejects_bad_delta_and_dimensions() {
        assert!(PartitionOfUnity::new(vec![p1(0.0)], 0.0).is_err());
        assert!(PartitionOfUnity::new(vec![p1(0.0), DVector::zeros(2)], 1.0).is_err());
        let pou = PartitionOfUnity::new(vec![p1(0.0)], 1.0).unwrap();
        assert!(pou.weights(&DVector::zeros(2)).is_err());
    }
}
