//! Time-varying VAR(b) on scaled scores via a second sieve over rescaled time.
//!
//! The coefficient functions are expanded as `Φ_j(t) = Σ_{k≤c} φ_{jk} v_k(t)`,
//! which turns the model into one multivariate linear regression
//! `x_i = βᵀ y_i + ε_i` with `y_i` stacking `v_k(i/n) x_{i-j}` in block order
//! `s = (j-1)c + k`.

mod diagnostics;

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

pub use diagnostics::{default_max_lag, local_acf, updc_min_eig, LocalAcf, UpdcReport};

use crate::basis::{fourier_eval, legendre_eval};
use crate::error::{Error, Result};
use crate::fdata::ScoreDecomposition;
use crate::par::{map_indexed, Execution};

/// Condition-number ceiling on `YᵀY` above which a design is treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

/// Family of the temporal basis `v_1 ≡ 1, v_2, ...` on rescaled time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum TimeFamily {
    #[default]
    Legendre,
    Fourier,
}

impl TimeFamily {
    pub fn name(self) -> &'static str {
        match self {
            TimeFamily::Legendre => "legendre",
            TimeFamily::Fourier => "fourier",
        }
    }
}

impl fmt::Display for TimeFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TimeFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "legendre" => Ok(TimeFamily::Legendre),
            "fourier" => Ok(TimeFamily::Fourier),
            other => Err(Error::Parse(format!("unknown time basis '{other}'"))),
        }
    }
}

/// Orthonormal functions `v_1..v_c` on [0, 1] with `v_1 ≡ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeBasis {
    pub family: TimeFamily,
    pub count: usize,
}

impl TimeBasis {
    pub fn new(family: TimeFamily, count: usize) -> Self {
        Self { family, count }
    }

    /// `v_{k+1}(t)` for 0-based `k`.
    pub fn eval(&self, k: usize, t: f64) -> f64 {
        match self.family {
            TimeFamily::Legendre => legendre_eval(k, t),
            TimeFamily::Fourier => fourier_eval(k, t),
        }
    }

    pub fn values(&self, t: f64) -> Vec<f64> {
        (0..self.count).map(|k| self.eval(k, t)).collect()
    }
}

/// Orders and block index maps of the stacked regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DesignLayout {
    pub b: usize,
    pub c: usize,
    pub p: usize,
    pub n: usize,
}

impl DesignLayout {
    pub fn new(b: usize, c: usize, p: usize, n: usize) -> Result<Self> {
        if b == 0 || c == 0 || p == 0 {
            return Err(Error::InvalidParameter(format!(
                "b, c, p must be positive (got {b}, {c}, {p})"
            )));
        }
        Ok(Self { b, c, p, n })
    }

    /// Number of blocks `b·c`.
    pub fn blocks(&self) -> usize {
        self.b * self.c
    }

    /// Regressor count `b·c·p`.
    pub fn columns(&self) -> usize {
        self.b * self.c * self.p
    }

    /// Lag `j_s = ⌊(s-1)/c⌋ + 1` of 1-based block `s`.
    pub fn lag_of(&self, s: usize) -> usize {
        (s - 1) / self.c + 1
    }

    /// Temporal index `k_s = s - ⌊(s-1)/c⌋·c` of 1-based block `s`.
    pub fn time_index_of(&self, s: usize) -> usize {
        s - ((s - 1) / self.c) * self.c
    }

    /// Block `s` holding lag `j` and temporal function `k` (both 1-based).
    pub fn block_of(&self, j: usize, k: usize) -> usize {
        (j - 1) * self.c + k
    }
}

/// Stacked regressors `Y` (rows `i = b+1..n`) and targets `x_{b+1..n}`.
pub fn build_design(
    x: &DMatrix<f64>,
    layout: &DesignLayout,
    tbasis: &TimeBasis,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = x.nrows();
    let p = x.ncols();
    if p != layout.p {
        return Err(Error::DimensionMismatch(format!(
            "scores have {p} columns, layout expects {}",
            layout.p
        )));
    }
    if tbasis.count < layout.c {
        return Err(Error::DimensionMismatch(format!(
            "time basis has {} functions, layout needs {}",
            tbasis.count, layout.c
        )));
    }
    let b = layout.b;
    if n <= b + 1 {
        return Err(Error::TooFewRows { needed: b + 2, got: n });
    }
    if n <= b + layout.columns() {
        log::warn!(
            "design has {} rows for {} regressors; estimates will be unstable",
            n - b,
            layout.columns()
        );
    }
    let rows = n - b;
    let mut design = DMatrix::<f64>::zeros(rows, layout.columns());
    let nf = layout.n as f64;
    for r in 0..rows {
        let i = r + b + 1; // 1-based time index
        let v = tbasis.values(i as f64 / nf);
        for s in 1..=layout.blocks() {
            let j = layout.lag_of(s);
            let k = layout.time_index_of(s);
            let lagged = x.row(i - j - 1);
            let col0 = (s - 1) * p;
            for q in 0..p {
                design[(r, col0 + q)] = v[k - 1] * lagged[q];
            }
        }
    }
    let targets = x.rows(b, rows).into_owned();
    Ok((design, targets))
}

/// Least-squares fit of the stacked regression.
#[derive(Debug, Clone)]
pub struct SieveVarFit {
    pub layout: DesignLayout,
    pub time_basis: TimeBasis,
    /// `bcp × p`; rows `(s-1)p..sp` hold `φ_{j_s k_s}ᵀ`.
    pub beta_hat: DMatrix<f64>,
    /// `(n-b) × p`.
    pub residuals: DMatrix<f64>,
    /// MLE residual covariance (divisor `n - b`).
    pub sigma_hat: DMatrix<f64>,
    /// Condition number of `YᵀY`.
    pub condition_number: f64,
    /// `‖Yᵀ(x - Yβ̂)‖_max / ‖Yᵀx‖_max`.
    pub normal_residual: f64,
    pub log_lik: Option<f64>,
    pub aic: Option<f64>,
}

/// Solves the stacked regression by Householder QR with a condition guard.
pub fn fit_ls(
    design: &DMatrix<f64>,
    targets: &DMatrix<f64>,
    layout: DesignLayout,
    time_basis: TimeBasis,
) -> Result<SieveVarFit> {
    let (rows, cols) = design.shape();
    if targets.nrows() != rows || targets.ncols() != layout.p || cols != layout.columns() {
        return Err(Error::DimensionMismatch(format!(
            "design {rows}×{cols}, targets {}×{}, layout columns {}",
            targets.nrows(),
            targets.ncols(),
            layout.columns()
        )));
    }
    if rows < cols {
        return Err(Error::SingularDesign {
            condition: f64::INFINITY,
        });
    }
    let qr = design.clone().qr();
    let r = qr.r();
    let sv = r.singular_values();
    let smax = sv.max();
    let smin = sv.min();
    let condition = if smin > 0.0 {
        (smax / smin).powi(2)
    } else {
        f64::INFINITY
    };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::SingularDesign { condition });
    }
    let mut qtx = targets.clone();
    qr.q_tr_mul(&mut qtx);
    let rhs = qtx.rows(0, cols).into_owned();
    let beta_hat = r
        .solve_upper_triangular(&rhs)
        .ok_or(Error::SingularDesign { condition })?;
    let residuals = targets - design * &beta_hat;
    let sigma_hat = residuals.transpose() * &residuals / rows as f64;
    let normal_residual = relative_normal_residual(design, targets, &residuals);
    let mut fit = SieveVarFit {
        layout,
        time_basis,
        beta_hat,
        residuals,
        sigma_hat,
        condition_number: condition,
        normal_residual,
        log_lik: None,
        aic: None,
    };
    if let Ok(ll) = pseudo_log_likelihood(&fit.residuals, &fit.sigma_hat) {
        fit.log_lik = Some(ll);
        fit.aic = Some(aic(&layout, ll));
    }
    Ok(fit)
}

/// `‖Yᵀ e‖_max / ‖Yᵀ x‖_max`, zero when both vanish.
pub fn relative_normal_residual(
    design: &DMatrix<f64>,
    targets: &DMatrix<f64>,
    residuals: &DMatrix<f64>,
) -> f64 {
    let num = (design.transpose() * residuals).amax();
    let den = (design.transpose() * targets).amax();
    if den == 0.0 {
        if num == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        num / den
    }
}

/// `2·b·c·p² − 2·log L`.
pub fn aic(layout: &DesignLayout, log_lik: f64) -> f64 {
    2.0 * (layout.b * layout.c * layout.p * layout.p) as f64 - 2.0 * log_lik
}

/// Gaussian profile log-likelihood at the MLE covariance:
/// `−(N/2)(p log 2π + log det Σ̂ + p)` with `N` residual rows.
pub fn pseudo_log_likelihood(residuals: &DMatrix<f64>, sigma_hat: &DMatrix<f64>) -> Result<f64> {
    let rows = residuals.nrows() as f64;
    let p = sigma_hat.nrows();
    let logdet = log_det_pd(sigma_hat)?;
    Ok(-0.5 * rows * (p as f64 * (2.0 * std::f64::consts::PI).ln() + logdet + p as f64))
}

/// Log-determinant via Cholesky, with one jitter of `1e-10·tr(Σ)/p` on failure.
fn log_det_pd(sigma: &DMatrix<f64>) -> Result<f64> {
    let p = sigma.nrows();
    let chol_logdet = |m: DMatrix<f64>| {
        m.cholesky().and_then(|c| {
            let l = c.l();
            let diag: Vec<f64> = (0..p).map(|i| l[(i, i)]).collect();
            if diag.iter().all(|d| *d > 0.0 && d.is_finite()) {
                Some(2.0 * diag.iter().map(|d| d.ln()).sum::<f64>())
            } else {
                None
            }
        })
    };
    if let Some(ld) = chol_logdet(sigma.clone()) {
        return Ok(ld);
    }
    let jitter = 1e-10 * sigma.trace() / p as f64;
    if jitter > 0.0 {
        let jittered = sigma + DMatrix::<f64>::identity(p, p) * jitter;
        if let Some(ld) = chol_logdet(jittered) {
            return Ok(ld);
        }
    }
    Err(Error::NonPdCovariance)
}

/// Builds the design for `(b, c)` and fits it.
pub fn fit_tvvar(x: &DMatrix<f64>, b: usize, time_basis: TimeBasis) -> Result<SieveVarFit> {
    let layout = DesignLayout::new(b, time_basis.count, x.ncols(), x.nrows())?;
    let (design, targets) = build_design(x, &layout, &time_basis)?;
    fit_ls(&design, &targets, layout, time_basis)
}

/// One row of the AIC table.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub b: usize,
    pub c: usize,
    pub aic: Option<f64>,
    /// Why the pair was skipped, if it was.
    pub skipped: Option<String>,
}

/// Outcome of the `(b, c)` search.
#[derive(Debug, Clone)]
pub struct Selection {
    pub b: usize,
    pub c: usize,
    pub fit: SieveVarFit,
    /// Every candidate, ordered by `(b, c)`.
    pub table: Vec<Candidate>,
}

/// Fits every `(b, c) ∈ [1, b_max] × [1, c_max]` and returns the AIC minimizer;
/// ties go to the smaller `b·c`, then the smaller `b`.
pub fn select_bc(
    x: &DMatrix<f64>,
    family: TimeFamily,
    b_max: usize,
    c_max: usize,
    mode: Execution,
) -> Result<Selection> {
    if b_max == 0 || c_max == 0 {
        return Err(Error::InvalidParameter("b_max and c_max must be >= 1".into()));
    }
    let pairs: Vec<(usize, usize)> = (1..=b_max)
        .flat_map(|b| (1..=c_max).map(move |c| (b, c)))
        .collect();
    let fits = map_indexed(mode, pairs.len(), |i| {
        let (b, c) = pairs[i];
        fit_tvvar(x, b, TimeBasis::new(family, c))
    });
    let mut table = Vec::with_capacity(pairs.len());
    let mut best: Option<(usize, f64)> = None;
    for (i, (&(b, c), fit)) in pairs.iter().zip(&fits).enumerate() {
        match fit {
            Ok(f) => match f.aic {
                Some(a) => {
                    table.push(Candidate {
                        b,
                        c,
                        aic: Some(a),
                        skipped: None,
                    });
                    let better = match best {
                        None => true,
                        Some((bi, ba)) => {
                            let (bb, bc) = pairs[bi];
                            a < ba || (a == ba && (b * c, b) < (bb * bc, bb))
                        }
                    };
                    if better {
                        best = Some((i, a));
                    }
                }
                None => table.push(Candidate {
                    b,
                    c,
                    aic: None,
                    skipped: Some(Error::NonPdCovariance.to_string()),
                }),
            },
            Err(e) => table.push(Candidate {
                b,
                c,
                aic: None,
                skipped: Some(e.to_string()),
            }),
        }
    }
    let (idx, _) = best.ok_or(Error::NoFeasiblePair)?;
    let (b, c) = pairs[idx];
    let fit = fits.into_iter().nth(idx).expect("index in range")?;
    Ok(Selection { b, c, fit, table })
}

impl SieveVarFit {
    /// `φ̂_{jk}` (p × p) for 1-based lag `j` and temporal index `k`.
    pub fn phi_block(&self, j: usize, k: usize) -> DMatrix<f64> {
        let p = self.layout.p;
        let s = self.layout.block_of(j, k);
        self.beta_hat.rows((s - 1) * p, p).transpose()
    }
}

/// `Φ̂_j(t) = Σ_{k≤c} φ̂_{jk} v_k(t)`.
pub fn phi_at(fit: &SieveVarFit, j: usize, t: f64) -> Result<DMatrix<f64>> {
    let layout = &fit.layout;
    if j == 0 || j > layout.b {
        return Err(Error::LagOutOfRange { lag: j, max: layout.b });
    }
    let v = fit.time_basis.values(t);
    let mut out = DMatrix::<f64>::zeros(layout.p, layout.p);
    for k in 1..=layout.c {
        out += fit.phi_block(j, k) * v[k - 1];
    }
    Ok(out)
}

/// `x̂_{n+1} = Σ_j Φ̂_j(1) x_{n+1-j}` from the last `b` rows of `history`.
pub fn forecast_scores(fit: &SieveVarFit, history: &DMatrix<f64>) -> Result<Vec<f64>> {
    let b = fit.layout.b;
    let p = fit.layout.p;
    if history.nrows() < b {
        return Err(Error::HistoryTooShort {
            needed: b,
            got: history.nrows(),
        });
    }
    if history.ncols() != p {
        return Err(Error::DimensionMismatch(format!(
            "history has {} columns, model has p = {p}",
            history.ncols()
        )));
    }
    let last = history.nrows();
    let mut out = DVector::<f64>::zeros(p);
    for j in 1..=b {
        let x = history.row(last - j).transpose();
        out += phi_at(fit, j, 1.0)? * x;
    }
    Ok(out.iter().copied().collect())
}

/// Curve forecast `α_fᵀ(u) Σ_j Φ̂_j(1) x_{n+1-j}` on the basis grid.
pub fn forecast_curve(
    fit: &SieveVarFit,
    dec: &ScoreDecomposition,
    history: &DMatrix<f64>,
) -> Result<Vec<f64>> {
    if dec.effective_p() != fit.layout.p {
        return Err(Error::DimensionMismatch(format!(
            "decomposition keeps {} components, model has p = {}",
            dec.effective_p(),
            fit.layout.p
        )));
    }
    let x = forecast_scores(fit, history)?;
    dec.reconstruct(&x)
}

/// Estimated functional AR kernel `ψ̂_j(t, u, v) = Σ_{k,l} [diag(f) Φ̂_j(t) diag(1/f)]_{kl} α_k(u) α_l(v)`.
pub fn kernel_at(
    fit: &SieveVarFit,
    dec: &ScoreDecomposition,
    j: usize,
    t: f64,
    u: f64,
    v: f64,
) -> Result<f64> {
    if dec.effective_p() != fit.layout.p {
        return Err(Error::DimensionMismatch(format!(
            "decomposition keeps {} components, model has p = {}",
            dec.effective_p(),
            fit.layout.p
        )));
    }
    let phi = phi_at(fit, j, t)?;
    let f = dec.kept_scales();
    let au: Vec<f64> = dec.kept.iter().map(|&k| dec.basis.eval(k, u)).collect();
    let av: Vec<f64> = dec.kept.iter().map(|&k| dec.basis.eval(k, v)).collect();
    let mut acc = 0.0;
    for k in 0..f.len() {
        for l in 0..f.len() {
            acc += f[k] * phi[(k, l)] / f[l] * au[k] * av[l];
        }
    }
    Ok(acc)
}

/// Spectral norms `‖Φ̂_j(1)‖` for `j = 1..b`.
pub fn coef_decay_profile(fit: &SieveVarFit) -> Vec<f64> {
    (1..=fit.layout.b)
        .map(|j| {
            phi_at(fit, j, 1.0)
                .map(|m| m.singular_values().max())
                .unwrap_or(0.0)
        })
        .collect()
}

/// Ordinary stationary VAR(b) least squares on the lag matrix, solved through
/// an SVD pseudo-inverse. Kept independent of the stacked sieve design.
#[derive(Debug, Clone)]
pub struct StationaryVar {
    /// `Φ_1..Φ_b`, each `p × p`.
    pub coefs: Vec<DMatrix<f64>>,
    pub residuals: DMatrix<f64>,
    pub sigma_hat: DMatrix<f64>,
    pub log_lik: Option<f64>,
    pub aic: Option<f64>,
}

pub fn fit_stationary_var(x: &DMatrix<f64>, b: usize) -> Result<StationaryVar> {
    let (n, p) = x.shape();
    if b == 0 {
        return Err(Error::InvalidParameter("VAR order must be >= 1".into()));
    }
    if n <= b + 1 {
        return Err(Error::TooFewRows { needed: b + 2, got: n });
    }
    let rows = n - b;
    let lags = DMatrix::from_fn(rows, b * p, |r, col| {
        let j = col / p + 1;
        x[(r + b - j, col % p)]
    });
    let targets = x.rows(b, rows).into_owned();
    let svd = lags.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = if smin > 0.0 {
        (smax / smin).powi(2)
    } else {
        f64::INFINITY
    };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::SingularDesign { condition });
    }
    let coef_stack = svd
        .solve(&targets, 0.0)
        .map_err(|_| Error::SingularDesign { condition })?;
    let coefs = (0..b)
        .map(|j| coef_stack.rows(j * p, p).transpose())
        .collect();
    let residuals = &targets - &lags * &coef_stack;
    let sigma_hat = residuals.transpose() * &residuals / rows as f64;
    let log_lik = pseudo_log_likelihood(&residuals, &sigma_hat).ok();
    let aic = log_lik.map(|ll| 2.0 * (b * p * p) as f64 - 2.0 * ll);
    Ok(StationaryVar {
        coefs,
        residuals,
        sigma_hat,
        log_lik,
        aic,
    })
}

impl StationaryVar {
    pub fn order(&self) -> usize {
        self.coefs.len()
    }

    pub fn forecast(&self, history: &DMatrix<f64>) -> Result<Vec<f64>> {
        let b = self.order();
        if history.nrows() < b {
            return Err(Error::HistoryTooShort {
                needed: b,
                got: history.nrows(),
            });
        }
        let p = self.coefs[0].nrows();
        let last = history.nrows();
        let mut out = DVector::<f64>::zeros(p);
        for (j, phi) in self.coefs.iter().enumerate() {
            out += phi * history.row(last - j - 1).transpose();
        }
        Ok(out.iter().copied().collect())
    }
}

/// Stationary VAR with the order chosen by AIC over `1..=b_max`.
pub fn select_stationary_var(x: &DMatrix<f64>, b_max: usize) -> Result<StationaryVar> {
    let mut best: Option<StationaryVar> = None;
    for b in 1..=b_max {
        let Ok(fit) = fit_stationary_var(x, b) else {
            continue;
        };
        let Some(a) = fit.aic else { continue };
        if best.as_ref().is_none_or(|cur| a < cur.aic.unwrap_or(f64::INFINITY)) {
            best = Some(fit);
        }
    }
    best.ok_or(Error::NoFeasiblePair)
}

#[cfg(test)]
mod tests;
