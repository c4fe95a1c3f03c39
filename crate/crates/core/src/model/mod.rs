//! The full forecasting pipeline: center, decompose, truncate by CPV, select
//! `(b, c)` by AIC, fit, and forecast the next curve.

mod format;
pub mod hexfloat;

use std::sync::Arc;

use nalgebra::DMatrix;

pub use format::{read_model, write_model};

use crate::basis::{build_basis, BasisSet, BasisSpec, Grid};
use crate::error::{Error, Result};
use crate::fdata::{
    center, choose_p, cpv_curve, decompose, finalize_scores, raw_coefficients, subtract_mean,
    CpvMode, FunctionalSeries, ScoreDecomposition, DEFAULT_RAW_COUNT, DEFAULT_ZERO_TOL,
};
use crate::par::Execution;
use crate::tvvar::{
    coef_decay_profile, default_max_lag, forecast_scores, local_acf, select_bc, updc_min_eig,
    Candidate, SieveVarFit, TimeFamily, UpdcReport,
};

pub const DEFAULT_CPV_THRESHOLD: f64 = 0.95;
pub const DEFAULT_B_MAX: usize = 5;
pub const DEFAULT_C_MAX: usize = 3;

/// Tunables of the double-sieve fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SieveConfig {
    /// Spatial basis; its `count` is the number of raw coefficients `K`.
    pub spatial: BasisSpec,
    pub cpv_threshold: f64,
    pub cpv_mode: CpvMode,
    pub zero_tol: f64,
    pub time_family: TimeFamily,
    pub b_max: usize,
    pub c_max: usize,
    pub execution: Execution,
}

impl Default for SieveConfig {
    fn default() -> Self {
        Self {
            spatial: BasisSpec::legendre(DEFAULT_RAW_COUNT),
            cpv_threshold: DEFAULT_CPV_THRESHOLD,
            cpv_mode: CpvMode::default(),
            zero_tol: DEFAULT_ZERO_TOL,
            time_family: TimeFamily::default(),
            b_max: DEFAULT_B_MAX,
            c_max: DEFAULT_C_MAX,
            execution: Execution::default(),
        }
    }
}

impl SieveConfig {
    pub fn validate(&self) -> Result<()> {
        self.spatial.validate()?;
        if !(self.cpv_threshold > 0.0 && self.cpv_threshold <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "CPV threshold must lie in (0, 1], got {}",
                self.cpv_threshold
            )));
        }
        if !(self.zero_tol >= 0.0 && self.zero_tol < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "zero_tol must lie in [0, 1), got {}",
                self.zero_tol
            )));
        }
        if self.b_max == 0 || self.c_max == 0 {
            return Err(Error::InvalidParameter("b_max and c_max must be >= 1".into()));
        }
        Ok(())
    }
}

/// A fitted double-sieve model.
#[derive(Debug, Clone)]
pub struct FittedModel {
    /// Number of curves the model was fitted on.
    pub n: usize,
    /// Pointwise sample mean on the basis grid.
    pub mean: Vec<f64>,
    /// Scales, truncation and basis. Score matrices are empty after [`read_model`].
    pub dec: ScoreDecomposition,
    pub fit: SieveVarFit,
    /// AIC table of the `(b, c)` search; empty after [`read_model`].
    pub table: Vec<Candidate>,
    pub config: SieveConfig,
}

/// Runs the pipeline on `series` (uncentered curves on the basis grid).
pub fn fit_model(series: &FunctionalSeries, config: &SieveConfig) -> Result<FittedModel> {
    config.validate()?;
    let basis = Arc::new(build_basis(config.spatial, series.grid())?);
    fit_model_with_basis(series, basis, config)
}

/// [`fit_model`] with a prebuilt spatial basis on the series grid.
pub fn fit_model_with_basis(
    series: &FunctionalSeries,
    basis: Arc<BasisSet>,
    config: &SieveConfig,
) -> Result<FittedModel> {
    config.validate()?;
    let (centered, mean) = center(series);
    let dec = decompose(&centered, basis, config.spatial.count)?;
    let p = choose_p(&dec, config.cpv_threshold, config.cpv_mode)?;
    let dec = finalize_scores(dec, p, config.zero_tol)?;
    log::debug!(
        "CPV kept p = {p} ({} usable of {} raw components)",
        dec.effective_p(),
        config.spatial.count
    );
    let sel = select_bc(
        &dec.scaled_scores,
        config.time_family,
        config.b_max,
        config.c_max,
        config.execution,
    )?;
    log::debug!("AIC selected b = {}, c = {}", sel.b, sel.c);
    Ok(FittedModel {
        n: series.len(),
        mean,
        dec,
        fit: sel.fit,
        table: sel.table,
        config: *config,
    })
}

impl FittedModel {
    pub fn grid(&self) -> &Grid {
        self.dec.basis.grid()
    }

    pub fn basis(&self) -> &BasisSet {
        &self.dec.basis
    }

    pub fn b(&self) -> usize {
        self.fit.layout.b
    }

    pub fn c(&self) -> usize {
        self.fit.layout.c
    }

    pub fn p(&self) -> usize {
        self.fit.layout.p
    }

    /// Scaled scores of uncentered curves on the model grid.
    pub fn scores_of(&self, curves: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if curves.ncols() != self.mean.len() {
            return Err(Error::LengthMismatch {
                expected: self.mean.len(),
                got: curves.ncols(),
            });
        }
        self.dec.project(&subtract_mean(curves, &self.mean))
    }

    /// Forecast of the scaled scores following `history` (uncentered curves).
    pub fn forecast_scores_from(&self, curves: &DMatrix<f64>) -> Result<Vec<f64>> {
        let x = self.scores_of(curves)?;
        forecast_scores(&self.fit, &x)
    }

    /// One-step curve forecast on the model grid from the last `b` rows of `curves`.
    pub fn forecast_curve_from(&self, curves: &DMatrix<f64>) -> Result<Vec<f64>> {
        let x = self.forecast_scores_from(curves)?;
        self.curve_from_scores(&x)
    }

    /// One-step forecast after the fitted sample, using the stored scores.
    pub fn forecast_curve(&self) -> Result<Vec<f64>> {
        if self.dec.scaled_scores.nrows() == 0 {
            return Err(Error::EmptySeries);
        }
        let x = forecast_scores(&self.fit, &self.dec.scaled_scores)?;
        self.curve_from_scores(&x)
    }

    /// `mean + Σ_j x_j f_{k_j} α_{k_j}` on the model grid.
    pub fn curve_from_scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        let centered = self.dec.reconstruct(x)?;
        Ok(centered.iter().zip(&self.mean).map(|(c, m)| c + m).collect())
    }

    /// Basis coefficients of the forecast, mean included, for `history` curves.
    pub fn forecast_coefficients_from(&self, curves: &DMatrix<f64>) -> Result<Vec<f64>> {
        let x = self.forecast_scores_from(curves)?;
        let mut coef = self.dec.coefficients(&x)?;
        for (c, m) in coef.iter_mut().zip(self.mean_coefficients()) {
            *c += m;
        }
        Ok(coef)
    }

    /// Basis coefficients of the stored mean curve.
    pub fn mean_coefficients(&self) -> Vec<f64> {
        let mean = DMatrix::from_row_slice(1, self.mean.len(), &self.mean);
        raw_coefficients(&mean, &self.dec.basis, self.dec.scales.len())
            .iter()
            .copied()
            .collect()
    }
}

/// Diagnostics printed alongside a fit.
#[derive(Debug, Clone)]
pub struct FitReport {
    pub p: usize,
    pub effective_p: usize,
    pub dropped: Vec<usize>,
    pub b: usize,
    pub c: usize,
    pub cpv: Vec<f64>,
    pub condition_number: f64,
    pub aic: Option<f64>,
    pub decay: Vec<f64>,
    pub updc: Option<UpdcReport>,
}

/// Rescaled times at which the spectral positivity check is evaluated.
pub const UPDC_TIMES: [f64; 3] = [0.25, 0.5, 0.75];
/// Half-width of the local windows of the spectral check.
pub const UPDC_HALF_WIDTH: f64 = 0.25;
/// Frequencies on `[0, π]` used by the spectral check.
pub const UPDC_FREQUENCIES: usize = 33;

pub fn report(model: &FittedModel) -> FitReport {
    let x = &model.dec.scaled_scores;
    let updc = if x.nrows() == 0 {
        None
    } else {
        let acfs: Result<Vec<_>> = UPDC_TIMES
            .iter()
            .map(|&t| {
                let probe = local_acf(x, t, UPDC_HALF_WIDTH, 1)?;
                local_acf(x, t, UPDC_HALF_WIDTH, default_max_lag(probe.window_len))
            })
            .collect();
        let omegas: Vec<f64> = (0..UPDC_FREQUENCIES)
            .map(|i| std::f64::consts::PI * i as f64 / (UPDC_FREQUENCIES - 1) as f64)
            .collect();
        acfs.and_then(|a| updc_min_eig(&a, &omegas)).ok()
    };
    FitReport {
        p: model.dec.p,
        effective_p: model.dec.effective_p(),
        dropped: model.dec.dropped.clone(),
        b: model.b(),
        c: model.c(),
        cpv: cpv_curve(&model.dec.scales_squared()),
        condition_number: model.fit.condition_number,
        aic: model.fit.aic,
        decay: coef_decay_profile(&model.fit),
        updc,
    }
}
