//! Functional time series: centering, score decomposition in a fixed basis,
//! CPV truncation, reconstruction, and ingestion of raw observations.

pub mod io;
mod smooth;

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};

pub use smooth::{smooth_raw, Bandwidth, SmoothOutput};

use crate::basis::{BasisSet, Grid};
use crate::error::{Error, Result};

/// Default number of raw coefficients computed before truncation.
pub const DEFAULT_RAW_COUNT: usize = 50;
/// Default relative threshold below which a scale `f̂_k` is treated as zero.
pub const DEFAULT_ZERO_TOL: f64 = 1e-8;

/// `n` curves sampled on a common grid; row `i` is `Y_{i+1}`, observed at
/// rescaled time `(i+1)/n`.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalSeries {
    curves: DMatrix<f64>,
    grid: Grid,
    centered: bool,
}

impl FunctionalSeries {
    pub fn new(curves: DMatrix<f64>, grid: Grid) -> Result<Self> {
        if curves.nrows() < 2 {
            return Err(Error::TooFewCurves {
                needed: 2,
                got: curves.nrows(),
            });
        }
        if curves.ncols() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                got: curves.ncols(),
            });
        }
        if curves.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("curves contain non-finite values".into()));
        }
        Ok(Self {
            curves,
            grid,
            centered: false,
        })
    }

    pub fn curves(&self) -> &DMatrix<f64> {
        &self.curves
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    pub fn len(&self) -> usize {
        self.curves.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.curves.nrows() == 0
    }

    /// Rescaled time `i / n` of curve `i` (1-based `i`).
    pub fn rescaled_time(&self, i: usize) -> f64 {
        i as f64 / self.len() as f64
    }

    /// The last curve, as grid samples.
    pub fn last_curve(&self) -> Vec<f64> {
        self.curves.row(self.len() - 1).iter().copied().collect()
    }
}

/// Subtracts the pointwise sample-mean curve; returns the centered series and the mean.
pub fn center(series: &FunctionalSeries) -> (FunctionalSeries, Vec<f64>) {
    let n = series.len() as f64;
    let mean: Vec<f64> = series
        .curves
        .column_iter()
        .map(|col| col.iter().sum::<f64>() / n)
        .collect();
    let curves = subtract_mean(&series.curves, &mean);
    (
        FunctionalSeries {
            curves,
            grid: series.grid.clone(),
            centered: true,
        },
        mean,
    )
}

/// `curves` with `mean` subtracted from every row.
pub fn subtract_mean(curves: &DMatrix<f64>, mean: &[f64]) -> DMatrix<f64> {
    let mut out = curves.clone();
    for (j, m) in mean.iter().enumerate() {
        out.column_mut(j).add_scalar_mut(-m);
    }
    out
}

/// Quadrature coefficients `⟨Y_i, α_k⟩` of every row on the first `count` functions.
pub fn raw_coefficients(curves: &DMatrix<f64>, basis: &BasisSet, count: usize) -> DMatrix<f64> {
    let weighted = basis.weighted_values().rows(0, count).into_owned();
    curves * weighted.transpose()
}

/// Basis coefficients, their average scales, and the truncated scaled scores.
#[derive(Debug, Clone)]
pub struct ScoreDecomposition {
    /// `n × K`: `r_{i,k} = ⟨Y_i, α_k⟩`.
    pub raw_scores: DMatrix<f64>,
    /// `f̂_k = sqrt((1/n) Σ_i r_{i,k}²)`, length K.
    pub scales: Vec<f64>,
    /// `n × p_eff`: `x_{i,k} = r_{i,k} / f̂_k` for the kept components.
    pub scaled_scores: DMatrix<f64>,
    /// Requested truncation (0 until [`finalize_scores`] runs).
    pub p: usize,
    /// 0-based component indices k < p whose scales were kept, ascending.
    pub kept: Vec<usize>,
    /// 0-based indices k < p dropped for a near-zero scale.
    pub dropped: Vec<usize>,
    pub basis: Arc<BasisSet>,
}

impl ScoreDecomposition {
    /// Number of components in the score matrix after dropping degenerate ones.
    pub fn effective_p(&self) -> usize {
        self.kept.len()
    }

    /// `f̂_k²` for every raw component.
    pub fn scales_squared(&self) -> Vec<f64> {
        self.scales.iter().map(|f| f * f).collect()
    }

    /// Scales of the kept components, in score order.
    pub fn kept_scales(&self) -> Vec<f64> {
        self.kept.iter().map(|&k| self.scales[k]).collect()
    }

    /// Curve samples `Σ_j x_j f̂_{k_j} α_{k_j}(u)` over the kept components.
    pub fn reconstruct(&self, scores: &[f64]) -> Result<Vec<f64>> {
        if scores.len() != self.kept.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} scores for {} kept components",
                scores.len(),
                self.kept.len()
            )));
        }
        let values = self.basis.values();
        let mut out = vec![0.0; values.ncols()];
        for (x, &k) in scores.iter().zip(&self.kept) {
            let weight = x * self.scales[k];
            for (o, v) in out.iter_mut().zip(values.row(k).iter()) {
                *o += weight * v;
            }
        }
        Ok(out)
    }

    /// Raw coefficients of the kept components implied by scaled scores.
    pub fn coefficients(&self, scores: &[f64]) -> Result<Vec<f64>> {
        if scores.len() != self.kept.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} scores for {} kept components",
                scores.len(),
                self.kept.len()
            )));
        }
        let mut coef = vec![0.0; self.scales.len()];
        for (x, &k) in scores.iter().zip(&self.kept) {
            coef[k] = x * self.scales[k];
        }
        Ok(coef)
    }

    /// Scaled scores of new (already centered) curves under the stored scales.
    pub fn project(&self, curves: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if curves.ncols() != self.basis.grid().len() {
            return Err(Error::LengthMismatch {
                expected: self.basis.grid().len(),
                got: curves.ncols(),
            });
        }
        let raw = raw_coefficients(curves, &self.basis, self.scales.len());
        Ok(DMatrix::from_fn(raw.nrows(), self.kept.len(), |i, j| {
            let k = self.kept[j];
            raw[(i, k)] / self.scales[k]
        }))
    }
}

/// Raw coefficients of a centered series on the first `count` basis functions.
pub fn decompose(
    series: &FunctionalSeries,
    basis: Arc<BasisSet>,
    count: usize,
) -> Result<ScoreDecomposition> {
    if !series.centered {
        return Err(Error::InvalidParameter(
            "decompose expects a centered series".into(),
        ));
    }
    if count == 0 || count > basis.count() {
        return Err(Error::DimensionMismatch(format!(
            "requested {count} components from a basis of {}",
            basis.count()
        )));
    }
    if series.grid.len() != basis.grid().len() {
        return Err(Error::LengthMismatch {
            expected: basis.grid().len(),
            got: series.grid.len(),
        });
    }
    let raw_scores = raw_coefficients(&series.curves, &basis, count);
    let n = raw_scores.nrows() as f64;
    let scales = raw_scores
        .column_iter()
        .map(|col| (col.iter().map(|r| r * r).sum::<f64>() / n).sqrt())
        .collect();
    Ok(ScoreDecomposition {
        scaled_scores: DMatrix::zeros(raw_scores.nrows(), 0),
        raw_scores,
        scales,
        p: 0,
        kept: Vec::new(),
        dropped: Vec::new(),
        basis,
    })
}

/// How CPV weighs components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CpvMode {
    /// `f̂_k²` in basis order.
    #[default]
    BasisOrder,
    /// Eigenvalues of the empirical `K × K` score covariance, descending.
    Eigen,
}

/// Smallest `p` whose cumulative share of `variances` reaches `threshold`.
pub fn choose_p_cpv(variances: &[f64], threshold: f64) -> Result<usize> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "CPV threshold must lie in (0, 1], got {threshold}"
        )));
    }
    let total: f64 = variances.iter().map(|v| v.max(0.0)).sum();
    if total <= 0.0 {
        return Err(Error::AllZeroVariance);
    }
    let mut acc = 0.0;
    for (k, v) in variances.iter().enumerate() {
        acc += v.max(0.0);
        if acc / total >= threshold - 1e-12 {
            return Ok(k + 1);
        }
    }
    Ok(variances.len())
}

/// CPV truncation of a decomposition under the chosen weighting.
pub fn choose_p(dec: &ScoreDecomposition, threshold: f64, mode: CpvMode) -> Result<usize> {
    match mode {
        CpvMode::BasisOrder => choose_p_cpv(&dec.scales_squared(), threshold),
        CpvMode::Eigen => {
            let n = dec.raw_scores.nrows() as f64;
            let cov = dec.raw_scores.transpose() * &dec.raw_scores / n;
            let mut eig: Vec<f64> = SymmetricEigen::new(cov).eigenvalues.iter().copied().collect();
            eig.sort_by(|a, b| b.total_cmp(a));
            choose_p_cpv(&eig, threshold)
        }
    }
}

/// Cumulative variance share after each component.
pub fn cpv_curve(variances: &[f64]) -> Vec<f64> {
    let total: f64 = variances.iter().sum();
    let mut acc = 0.0;
    variances
        .iter()
        .map(|v| {
            acc += v;
            acc / total
        })
        .collect()
}

/// Divides the first `p` raw score columns by their scales, dropping components
/// whose scale is at most `zero_tol · max f̂`.
pub fn finalize_scores(
    mut dec: ScoreDecomposition,
    p: usize,
    zero_tol: f64,
) -> Result<ScoreDecomposition> {
    let count = dec.scales.len();
    if p == 0 || p > count {
        return Err(Error::DimensionMismatch(format!(
            "truncation {p} outside 1..={count}"
        )));
    }
    let max_scale = dec.scales.iter().copied().fold(0.0, f64::max);
    let cutoff = zero_tol * max_scale;
    let (kept, dropped): (Vec<usize>, Vec<usize>) =
        (0..p).partition(|&k| dec.scales[k] > cutoff && dec.scales[k] > 0.0);
    if kept.is_empty() {
        return Err(Error::AllZeroVariance);
    }
    let n = dec.raw_scores.nrows();
    dec.scaled_scores = DMatrix::from_fn(n, kept.len(), |i, j| {
        let k = kept[j];
        dec.raw_scores[(i, k)] / dec.scales[k]
    });
    dec.p = p;
    dec.kept = kept;
    dec.dropped = dropped;
    Ok(dec)
}

/// `Σ_k x_k f̂_k α_k(u_j)` using the first `scores.len()` basis functions.
pub fn reconstruct(scores: &[f64], scales: &[f64], basis: &BasisSet) -> Result<Vec<f64>> {
    if scores.len() != scales.len() || scores.len() > basis.count() {
        return Err(Error::DimensionMismatch(format!(
            "{} scores, {} scales, {} basis functions",
            scores.len(),
            scales.len(),
            basis.count()
        )));
    }
    let values = basis.values();
    let mut out = vec![0.0; values.ncols()];
    for (k, (x, f)) in scores.iter().zip(scales).enumerate() {
        let weight = x * f;
        for (o, v) in out.iter_mut().zip(values.row(k).iter()) {
            *o += weight * v;
        }
    }
    Ok(out)
}
