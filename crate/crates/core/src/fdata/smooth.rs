//! Local-linear smoothing of raw discrete observations onto a target grid.

use nalgebra::DMatrix;

use super::FunctionalSeries;
use crate::basis::Grid;
use crate::error::{Error, Result};
use crate::par::{map_indexed, Execution};

/// Bandwidth choice for [`smooth_raw`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    Fixed(f64),
    /// Leave-one-out cross-validation over a log-spaced candidate set.
    Auto,
}

/// Smoothed series together with the bandwidth that produced it.
#[derive(Debug, Clone)]
pub struct SmoothOutput {
    pub series: FunctionalSeries,
    pub bandwidth: f64,
}

const CANDIDATES: usize = 25;
/// Rows used for cross-validation on large datasets (evenly spaced).
const CV_ROWS: usize = 24;

fn epanechnikov(z: f64) -> f64 {
    if z.abs() < 1.0 {
        0.75 * (1.0 - z * z)
    } else {
        0.0
    }
}

/// Equivalent-kernel weights of the local-linear estimator at one point.
#[derive(Debug, Clone)]
struct LocalWeights {
    start: usize,
    weights: Vec<f64>,
}

impl LocalWeights {
    fn apply(&self, row: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(&row[self.start..])
            .map(|(w, y)| w * y)
            .sum()
    }

    fn weight_at(&self, idx: usize) -> f64 {
        if idx < self.start || idx >= self.start + self.weights.len() {
            0.0
        } else {
            self.weights[idx - self.start]
        }
    }
}

/// Weights `l_i(t)` with `Σ_i l_i(t) y_i` the local-linear fit at `t`.
fn local_weights(raw: &[f64], t: f64, h: f64) -> Result<LocalWeights> {
    let lo = raw.partition_point(|&u| u <= t - h);
    let hi = raw.partition_point(|&u| u < t + h);
    let mut kern = Vec::with_capacity(hi.saturating_sub(lo));
    let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
    let mut support = 0;
    for &u in &raw[lo..hi] {
        let k = epanechnikov((u - t) / h);
        if k > 0.0 {
            support += 1;
        }
        let d = u - t;
        s0 += k;
        s1 += k * d;
        s2 += k * d * d;
        kern.push(k);
    }
    let det = s0 * s2 - s1 * s1;
    if support < 2 || det <= 1e-14 * s0 * s2.max(f64::MIN_POSITIVE) {
        return Err(Error::DegenerateWindow { point: t });
    }
    let weights = kern
        .iter()
        .zip(&raw[lo..hi])
        .map(|(k, &u)| k * (s2 - (u - t) * s1) / det)
        .collect();
    Ok(LocalWeights { start: lo, weights })
}

/// Smooths each row of `raw` (observed at `raw_grid`) onto `target`.
///
/// An automatic bandwidth is chosen once for the whole dataset by minimizing
/// the summed leave-one-out error over (a subsample of) the rows.
pub fn smooth_raw(
    raw: &DMatrix<f64>,
    raw_grid: &[f64],
    target: &Grid,
    bandwidth: Bandwidth,
    mode: Execution,
) -> Result<SmoothOutput> {
    if raw_grid.len() < 5 {
        return Err(Error::InvalidParameter(format!(
            "smoothing needs at least 5 raw points, got {}",
            raw_grid.len()
        )));
    }
    if raw.ncols() != raw_grid.len() {
        return Err(Error::LengthMismatch {
            expected: raw_grid.len(),
            got: raw.ncols(),
        });
    }
    if raw_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidGrid("raw grid must be strictly increasing".into()));
    }
    let h = match bandwidth {
        Bandwidth::Fixed(h) if h > 0.0 && h.is_finite() => h,
        Bandwidth::Fixed(h) => {
            return Err(Error::InvalidParameter(format!("bandwidth must be positive, got {h}")))
        }
        Bandwidth::Auto => select_bandwidth(raw, raw_grid, mode)?,
    };
    let weights: Vec<LocalWeights> = target
        .points()
        .iter()
        .map(|&t| local_weights(raw_grid, t, h))
        .collect::<Result<_>>()?;
    let rows: Vec<Vec<f64>> = map_indexed(mode, raw.nrows(), |i| {
        let row: Vec<f64> = raw.row(i).iter().copied().collect();
        weights.iter().map(|w| w.apply(&row)).collect()
    });
    let m = target.len();
    let curves = DMatrix::from_fn(rows.len(), m, |i, j| rows[i][j]);
    Ok(SmoothOutput {
        series: FunctionalSeries::new(curves, target.clone())?,
        bandwidth: h,
    })
}

/// Log-spaced bandwidth candidates between a few raw spacings and half the range.
fn candidates(raw_grid: &[f64]) -> Vec<f64> {
    let range = raw_grid[raw_grid.len() - 1] - raw_grid[0];
    let max_gap = raw_grid
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(0.0, f64::max);
    let lo = (2.5 * max_gap).max(range * 1e-4);
    let hi = (0.5 * range).max(lo * 1.01);
    let ratio = (hi / lo).ln();
    (0..CANDIDATES)
        .map(|c| lo * (ratio * c as f64 / (CANDIDATES - 1) as f64).exp())
        .collect()
}

fn select_bandwidth(raw: &DMatrix<f64>, raw_grid: &[f64], mode: Execution) -> Result<f64> {
    let n = raw.nrows();
    let rows: Vec<Vec<f64>> = if n <= CV_ROWS {
        (0..n).map(|i| raw.row(i).iter().copied().collect()).collect()
    } else {
        (0..CV_ROWS)
            .map(|c| c * (n - 1) / (CV_ROWS - 1))
            .map(|i| raw.row(i).iter().copied().collect())
            .collect()
    };
    let cands = candidates(raw_grid);
    let scores = map_indexed(mode, cands.len(), |c| loo_score(&rows, raw_grid, cands[c]));
    let best = scores
        .iter()
        .enumerate()
        .filter_map(|(c, s)| s.map(|s| (c, s)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or(Error::DegenerateWindow { point: raw_grid[0] })?;
    Ok(cands[best.0])
}

/// Summed squared leave-one-out prediction error, or `None` if some point
/// cannot be predicted without itself. Uses the exact deleted-residual
/// identity `(y_i - ŷ_i) / (1 - l_i(u_i))` of local weighted least squares.
fn loo_score(rows: &[Vec<f64>], raw_grid: &[f64], h: f64) -> Option<f64> {
    let mut total = 0.0;
    let weights: Vec<LocalWeights> = raw_grid
        .iter()
        .map(|&u| local_weights(raw_grid, u, h).ok())
        .collect::<Option<_>>()?;
    for (i, w) in weights.iter().enumerate() {
        let lii = w.weight_at(i);
        if 1.0 - lii < 1e-8 {
            return None;
        }
        for row in rows {
            let resid = (row[i] - w.apply(row)) / (1.0 - lii);
            total += resid * resid;
        }
    }
    Some(total)
}
