//! Piecewise-constant L¹ controls.
//!
//! A control is a list of breakpoints `0 = b₀ < b₁ < … < b_n` and one value
//! per interval. Intervals are half-open, `[b_i, b_{i+1})`, and the control
//! vanishes from `b_n` on.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawControl", into = "RawControl")]
pub struct PiecewiseConstantControl {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawControl {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl TryFrom<RawControl> for PiecewiseConstantControl {
    type Error = Error;

    fn try_from(raw: RawControl) -> Result<Self> {
        Self::new(raw.breakpoints, raw.values)
    }
}

impl From<PiecewiseConstantControl> for RawControl {
    fn from(u: PiecewiseConstantControl) -> Self {
        RawControl {
            breakpoints: u.breakpoints,
            values: u.values,
        }
    }
}

/// Maximal interval of the time grid on which a control is constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub value: f64,
}

impl Segment {
    pub fn len(&self) -> f64 {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

impl PiecewiseConstantControl {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        match breakpoints.first() {
            None => return Err(Error::invalid("control needs at least the breakpoint 0")),
            Some(&b0) if b0 != 0.0 => {
                return Err(Error::invalid(format!(
                    "first breakpoint must be 0, got {b0}"
                )))
            }
            _ => {}
        }
        if breakpoints.iter().any(|b| !b.is_finite()) {
            return Err(Error::invalid("breakpoints must be finite"));
        }
        if breakpoints.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("breakpoints must be strictly increasing"));
        }
        if values.len() + 1 != breakpoints.len() {
            return Err(Error::invalid(format!(
                "{} breakpoints need {} values, got {}",
                breakpoints.len(),
                breakpoints.len() - 1,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("control values must be finite"));
        }
        Ok(Self {
            breakpoints,
            values,
        })
    }

    pub fn zero() -> Self {
        Self {
            breakpoints: vec![0.0],
            values: vec![],
        }
    }

    /// Constant `value` on `[0, duration)`.
    pub fn constant(value: f64, duration: f64) -> Result<Self> {
        Self::new(vec![0.0, duration], vec![value])
    }

    /// `n_pieces` equal pieces on `[0, horizon)`.
    pub fn uniform(horizon: f64, values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        if n == 0 {
            return Ok(Self::zero());
        }
        let breakpoints = (0..=n).map(|i| horizon * i as f64 / n as f64).collect();
        Self::new(breakpoints, values)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// End of the support (last breakpoint).
    pub fn horizon(&self) -> f64 {
        *self.breakpoints.last().unwrap()
    }

    pub fn pieces(&self) -> impl Iterator<Item = Segment> + '_ {
        self.breakpoints
            .windows(2)
            .zip(&self.values)
            .map(|(w, &value)| Segment {
                start: w[0],
                end: w[1],
                value,
            })
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::invalid(format!(
                "control evaluated at negative or NaN time {t}"
            )));
        }
        // Index of the last breakpoint ≤ t.
        let i = self.breakpoints.partition_point(|&b| b <= t);
        Ok(self.values.get(i - 1).copied().unwrap_or(0.0))
    }

    pub fn l1_norm(&self) -> f64 {
        self.pieces().map(|s| s.value.abs() * s.len()).sum()
    }

    /// `∫₀^t |u|`.
    pub fn l1_norm_until(&self, t: f64) -> f64 {
        self.pieces()
            .filter(|s| s.start < t)
            .map(|s| s.value.abs() * (s.end.min(t) - s.start))
            .sum()
    }

    /// `∫₀^∞ u`.
    pub fn integral(&self) -> f64 {
        self.pieces().map(|s| s.value * s.len()).sum()
    }

    /// `∫₀^t u`.
    pub fn integral_until(&self, t: f64) -> f64 {
        self.pieces()
            .filter(|s| s.start < t)
            .map(|s| s.value * (s.end.min(t) - s.start))
            .sum()
    }

    /// The control `s ↦ u(s + offset)`.
    pub fn shifted(&self, offset: f64) -> Result<Self> {
        if !(offset >= 0.0) || !offset.is_finite() {
            return Err(Error::invalid(format!("invalid shift {offset}")));
        }
        if offset >= self.horizon() {
            return Ok(Self::zero());
        }
        let mut breakpoints = vec![0.0];
        let mut values = Vec::new();
        for seg in self.pieces().filter(|s| s.end > offset) {
            values.push(seg.value);
            breakpoints.push(seg.end - offset);
        }
        Self::new(breakpoints, values)
    }

    /// Splits `[0, t_end]` into segments on which the control is constant.
    /// Knots are `0`, every breakpoint and every extra cut inside `(0, t_end)`,
    /// and `t_end`. Returns an empty list for `t_end == 0`.
    pub fn segments(&self, t_end: f64, cuts: &[f64]) -> Vec<Segment> {
        let mut knots: Vec<f64> = std::iter::once(0.0)
            .chain(
                self.breakpoints
                    .iter()
                    .chain(cuts)
                    .copied()
                    .filter(|&b| b > 0.0 && b < t_end),
            )
            .chain(std::iter::once(t_end))
            .collect();
        knots.sort_by(f64::total_cmp);
        knots.dedup();
        knots
            .windows(2)
            .filter(|w| w[1] > w[0])
            .map(|w| Segment {
                start: w[0],
                end: w[1],
                value: self.eval(w[0]).unwrap_or(0.0),
            })
            .collect()
    }
}

/// Seeded family of `count` controls on `[0, horizon)` with `n_pieces`
/// uniform pieces and L¹ norm at most `budget`.
///
/// Member 0 is the zero control and member 1 (when `count ≥ 2`) sits on the
/// boundary `‖u‖₁ = budget`. Every other member draws piece values uniformly
/// in `[-1, 1]` and is rescaled to norm `s · budget` with `s ~ U[0, 1]`.
pub fn control_family(
    horizon: f64,
    budget: f64,
    n_pieces: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<PiecewiseConstantControl>> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::invalid(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    if !(budget >= 0.0) || !budget.is_finite() {
        return Err(Error::invalid(format!(
            "L1 budget must be >= 0, got {budget}"
        )));
    }
    if n_pieces == 0 || count == 0 {
        return Err(Error::invalid("n_pieces and count must be at least 1"));
    }

    let width = horizon / n_pieces as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut family = Vec::with_capacity(count);
    for k in 0..count {
        let raw: Vec<f64> = (0..n_pieces)
            .map(|_| rng.random_range(-1.0..=1.0))
            .collect();
        let fraction: f64 = rng.random_range(0.0..=1.0);
        let target = match k {
            0 => 0.0,
            1 => budget,
            _ => fraction * budget,
        };
        let raw_norm: f64 = raw.iter().map(|v| v.abs()).sum::<f64>() * width;
        let values = if target == 0.0 || raw_norm == 0.0 {
            vec![0.0; n_pieces]
        } else {
            let s = target / raw_norm;
            let mut values: Vec<f64> = raw.iter().map(|v| v * s).collect();
            // Rounding can push the norm a few ulps past the budget.
            let norm: f64 = values.iter().map(|v| v.abs()).sum::<f64>() * width;
            if norm > budget {
                let shrink = budget / norm;
                values.iter_mut().for_each(|v| *v *= shrink);
            }
            values
        };
        family.push(PiecewiseConstantControl::uniform(horizon, values)?);
    }
    Ok(family)
}
