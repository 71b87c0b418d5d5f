use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Finite set of centers whose `radius`-balls cover `source_count` points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsNet {
    pub centers: Vec<DVector<f64>>,
    pub radius: f64,
    pub source_count: usize,
}

impl EpsNet {
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.centers.first().map(|c| c.len())
    }

    /// Index and distance of the closest center.
    pub fn nearest(&self, x: &DVector<f64>) -> Option<(usize, f64)> {
        self.centers
            .iter()
            .map(|c| distance(c, x))
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }

    /// Brute-force check that every point is within `radius` of a center.
    pub fn covers(&self, points: &[DVector<f64>]) -> bool {
        self.coverage_fraction(points, self.radius) == 1.0
    }

    /// Fraction of `points` within `radius` of some center.
    pub fn coverage_fraction(&self, points: &[DVector<f64>], radius: f64) -> f64 {
        if points.is_empty() {
            return 1.0;
        }
        if self.is_empty() {
            return 0.0;
        }
        let index = CenterIndex::from_points(radius, &self.centers);
        let hit = points
            .iter()
            .filter(|p| index.nearest_within(p, radius).is_some())
            .count();
        hit as f64 / points.len() as f64
    }

    /// Smallest pairwise center distance (`∞` with fewer than two centers).
    pub fn min_separation(&self) -> f64 {
        let mut best = f64::INFINITY;
        for (i, a) in self.centers.iter().enumerate() {
            for b in &self.centers[i + 1..] {
                best = best.min(distance(a, b));
            }
        }
        best
    }
}

pub(crate) fn distance(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

const KEY_DIMS: usize = 4;
type CellKey = [i64; KEY_DIMS];

/// Cell list over a projection onto at most four orthonormal directions.
///
/// Projection is 1-Lipschitz, so a stored point within `cell` of a query has
/// every projected coordinate within `cell`, hence sits in one of the `3^k`
/// neighbouring cells. Membership queries are exact.
pub(crate) struct CenterIndex {
    cell: f64,
    directions: Vec<DVector<f64>>,
    cells: HashMap<CellKey, Vec<usize>>,
    points: Vec<DVector<f64>>,
    offsets: Vec<CellKey>,
}

impl CenterIndex {
    pub fn new(cell: f64, sample: &[DVector<f64>]) -> Self {
        let directions = projection_directions(sample);
        let k = directions.len();
        let mut offsets = vec![[0i64; KEY_DIMS]];
        for d in 0..k {
            offsets = offsets
                .into_iter()
                .flat_map(|o| {
                    [-1i64, 0, 1].map(|delta| {
                        let mut next = o;
                        next[d] = delta;
                        next
                    })
                })
                .collect();
        }
        Self {
            cell,
            directions,
            cells: HashMap::new(),
            points: Vec::new(),
            offsets,
        }
    }

    pub fn from_points(cell: f64, points: &[DVector<f64>]) -> Self {
        let mut index = Self::new(cell, points);
        for p in points {
            index.insert(p.clone());
        }
        index
    }

    fn key(&self, p: &DVector<f64>) -> CellKey {
        let mut key = [0i64; KEY_DIMS];
        for (slot, dir) in key.iter_mut().zip(&self.directions) {
            // Saturating float-to-int cast.
            *slot = (dir.dot(p) / self.cell).floor() as i64;
        }
        key
    }

    pub fn insert(&mut self, p: DVector<f64>) -> usize {
        let id = self.points.len();
        let key = self.key(&p);
        self.cells.entry(key).or_default().push(id);
        self.points.push(p);
        id
    }

    /// Closest stored point among those within `r ≤ cell` of `p`.
    pub fn nearest_within(&self, p: &DVector<f64>, r: f64) -> Option<(usize, f64)> {
        debug_assert!(r <= self.cell * (1.0 + 1e-12));
        let key = self.key(p);
        let mut best: Option<(usize, f64)> = None;
        for off in &self.offsets {
            let mut probe = key;
            for d in 0..KEY_DIMS {
                probe[d] = probe[d].saturating_add(off[d]);
            }
            let Some(ids) = self.cells.get(&probe) else {
                continue;
            };
            for &id in ids {
                let d = distance(&self.points[id], p);
                if d <= r && best.is_none_or(|(_, bd)| d < bd) {
                    best = Some((id, d));
                }
            }
        }
        best
    }

    pub fn into_points(self) -> Vec<DVector<f64>> {
        self.points
    }
}

/// Up to four orthonormal directions capturing most of the sample's spread:
/// principal axes for moderate dimension, top-variance coordinates beyond.
fn projection_directions(sample: &[DVector<f64>]) -> Vec<DVector<f64>> {
    let Some(first) = sample.first() else {
        return Vec::new();
    };
    let dim = first.len();
    let k = dim.min(KEY_DIMS);
    let unit = |i: usize| DVector::from_fn(dim, |r, _| if r == i { 1.0 } else { 0.0 });
    if dim <= KEY_DIMS {
        return (0..dim).map(unit).collect();
    }

    let stride = (sample.len() / 1024).max(1);
    let picked: Vec<&DVector<f64>> = sample.iter().step_by(stride).collect();
    let n = picked.len() as f64;
    let mean = picked.iter().fold(DVector::zeros(dim), |acc, p| acc + *p) / n;

    if dim <= 256 {
        let mut cov = DMatrix::<f64>::zeros(dim, dim);
        for p in &picked {
            let c = *p - &mean;
            cov.ger(1.0, &c, &c, 1.0);
        }
        let eig = cov.symmetric_eigen();
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
        order
            .into_iter()
            .take(k)
            .map(|i| eig.eigenvectors.column(i).into_owned())
            .collect()
    } else {
        let var = picked
            .iter()
            .fold(DVector::zeros(dim), |acc: DVector<f64>, p| {
                let c = *p - &mean;
                acc + c.component_mul(&c)
            });
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&i, &j| var[j].total_cmp(&var[i]));
        order.into_iter().take(k).map(unit).collect()
    }
}

/// Streaming greedy admission: a point becomes a center iff it is farther
/// than `radius` from every center admitted before it.
pub(crate) struct NetBuilder {
    radius: f64,
    index: CenterIndex,
    offered: usize,
}

impl NetBuilder {
    pub fn new(radius: f64, sample: &[DVector<f64>]) -> Self {
        Self {
            radius,
            index: CenterIndex::new(radius, sample),
            offered: 0,
        }
    }

    pub fn offer(&mut self, p: DVector<f64>) -> bool {
        self.offered += 1;
        if self.index.nearest_within(&p, self.radius).is_some() {
            return false;
        }
        self.index.insert(p);
        true
    }

    pub fn finish(self) -> EpsNet {
        EpsNet {
            radius: self.radius,
            source_count: self.offered,
            centers: self.index.into_points(),
        }
    }
}

fn check_points(points: &[DVector<f64>]) -> Result<()> {
    if let Some(first) = points.first() {
        let dim = first.len();
        for p in points {
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: p.len(),
                });
            }
            if !p.iter().all(|x| x.is_finite()) {
                return Err(Error::invalid("point cloud has non-finite coordinates"));
            }
        }
    }
    Ok(())
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::invalid(format!(
            "net radius must be positive, got {eps}"
        )));
    }
    Ok(())
}

/// Greedy `eps`-net of `points` in scan order.
pub fn greedy_eps_net(points: &[DVector<f64>], eps: f64) -> Result<EpsNet> {
    check_eps(eps)?;
    check_points(points)?;
    let mut builder = NetBuilder::new(eps, points);
    for p in points {
        builder.offer(p.clone());
    }
    Ok(builder.finish())
}

/// Farthest-point traversal. Returns the visiting order and, for each visited
/// center after the first, its distance to the earlier centers (non-increasing).
/// Stops once every point is within `stop` of the chosen centers.
fn farthest_point_order(points: &[DVector<f64>], stop: f64) -> (Vec<usize>, Vec<f64>) {
    if points.is_empty() {
        return (Vec::new(), Vec::new());
    }
    let mut order = vec![0];
    let mut insertion = Vec::new();
    let mut gap: Vec<f64> = points.iter().map(|p| distance(p, &points[0])).collect();
    loop {
        let (far, &d) = gap
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
            .unwrap();
        if d <= stop {
            break;
        }
        order.push(far);
        insertion.push(d);
        for (g, p) in gap.iter_mut().zip(points) {
            *g = g.min(distance(p, &points[far]));
        }
    }
    (order, insertion)
}

/// Covering numbers along an `eps` ladder, from one farthest-point traversal:
/// the count for `eps` is the length of the shortest prefix of the traversal
/// that covers every point within `eps`. Non-increasing in `eps`.
pub fn covering_numbers(points: &[DVector<f64>], eps_ladder: &[f64]) -> Result<Vec<usize>> {
    check_points(points)?;
    for &e in eps_ladder {
        check_eps(e)?;
    }
    if points.is_empty() {
        return Ok(vec![0; eps_ladder.len()]);
    }
    let smallest = eps_ladder.iter().copied().fold(f64::INFINITY, f64::min);
    let (_, insertion) = farthest_point_order(points, smallest);
    Ok(eps_ladder
        .iter()
        .map(|&e| 1 + insertion.iter().filter(|&&r| r > e).count())
        .collect())
}

/// `eps`-net made of a farthest-point traversal prefix.
pub fn farthest_point_net(points: &[DVector<f64>], eps: f64) -> Result<EpsNet> {
    check_eps(eps)?;
    check_points(points)?;
    let (order, _) = farthest_point_order(points, eps);
    Ok(EpsNet {
        centers: order.into_iter().map(|i| points[i].clone()).collect(),
        radius: eps,
        source_count: points.len(),
    })
}
