//! Monte Carlo comparison of the sieve forecast against simple baselines.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::basis::{build_basis, BasisSet, BasisSpec};
use crate::dgp::{rep_rng, simulate_with_rng, DgpSpec};
use crate::error::{Error, Result};
use crate::fdata::FunctionalSeries;
use crate::model::{fit_model_with_basis, FittedModel, SieveConfig};
use crate::par::{map_indexed, Execution};
use crate::tvvar::{forecast_scores, select_bc, select_stationary_var};

/// Default number of equally spaced points used for scoring.
pub const DEFAULT_EVAL_POINTS: usize = 101;
/// Largest tolerated share of failed replications.
pub const MAX_FAILURE_SHARE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Sieve,
    Naive,
    StatVar,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Sieve => "sieve",
            Method::Naive => "naive",
            Method::StatVar => "stat_var",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sieve" => Ok(Method::Sieve),
            "naive" => Ok(Method::Naive),
            "stat_var" | "statvar" | "var" => Ok(Method::StatVar),
            other => Err(Error::Parse(format!("unknown method '{other}'"))),
        }
    }
}

/// `(1/N) Σ_s (pred_s − truth_s)²`.
pub fn mse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch {
            expected: truth.len(),
            got: pred.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::EmptySeries);
    }
    let sum: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t).powi(2)).sum();
    Ok(sum / truth.len() as f64)
}

/// Relative difference in percent: `|a − b| / min(a, b) · 100`.
pub fn rd(mse_sieve: f64, mse_opt: f64) -> Result<f64> {
    if !(mse_sieve > 0.0 && mse_opt > 0.0) {
        return Err(Error::NonPositiveMse);
    }
    Ok((mse_sieve - mse_opt).abs() / mse_sieve.min(mse_opt) * 100.0)
}

/// Relative ratio `(opt − true) / (sieve − true)`.
pub fn rr(mse_opt: f64, mse_sieve: f64, mse_true: f64) -> Result<f64> {
    let den = mse_sieve - mse_true;
    if !(den > 0.0) {
        return Err(Error::DegenerateDenominator(den));
    }
    Ok((mse_opt - mse_true) / den)
}

/// The last row of a non-empty series.
pub fn naive_forecast(series: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = series.nrows();
    if n == 0 {
        return Err(Error::EmptySeries);
    }
    Ok(series.row(n - 1).iter().copied().collect())
}

/// One benchmark setting.
#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub dgp: DgpSpec,
    pub methods: Vec<Method>,
    pub reps: usize,
    /// Number of equally spaced scoring points on [0, 1].
    pub eval_points: usize,
    pub sieve: SieveConfig,
    pub seed: u64,
    /// Oracle MSE used for RR, when known.
    pub mse_true: Option<f64>,
    pub execution: Execution,
}

impl BenchConfig {
    /// All methods, the case's own basis family for the sieve, 101 scoring points.
    pub fn new(dgp: DgpSpec, reps: usize, seed: u64) -> Self {
        let sieve = SieveConfig {
            spatial: default_sieve_basis(&dgp),
            ..SieveConfig::default()
        };
        Self {
            dgp,
            methods: vec![Method::Sieve, Method::Naive, Method::StatVar],
            reps,
            eval_points: DEFAULT_EVAL_POINTS,
            sieve,
            seed,
            mse_true: None,
            execution: Execution::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.dgp.validate()?;
        self.sieve.validate()?;
        if self.reps == 0 {
            return Err(Error::InvalidParameter("reps must be >= 1".into()));
        }
        if self.eval_points < 21 {
            return Err(Error::InvalidParameter(format!(
                "need at least 21 scoring points, got {}",
                self.eval_points
            )));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidParameter("no methods selected".into()));
        }
        Ok(())
    }
}

/// Spatial basis matched to the rendering family of the case: 50 Legendre
/// polynomials, or the 8 D-9 father functions used to render wavelet cases.
pub fn default_sieve_basis(dgp: &DgpSpec) -> BasisSpec {
    if dgp.case.uses_wavelets() {
        dgp.rendering_basis()
    } else {
        BasisSpec::legendre(crate::fdata::DEFAULT_RAW_COUNT.max(dgp.dim()))
    }
}

/// Mean MSE of one method.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub method: Method,
    pub mean: f64,
    pub stderr: f64,
    pub count: usize,
    pub failures: usize,
}

/// One method's outcome in one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct RepRecord {
    pub rep: usize,
    pub method: Method,
    pub mse: Option<f64>,
    /// `(p, b, c)` of the sieve fit; `c = 1` for the stationary VAR.
    pub orders: Option<(usize, usize, usize)>,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct BenchResult {
    pub case: String,
    pub n: usize,
    pub reps: usize,
    pub summaries: Vec<MethodSummary>,
    pub mse_true: Option<f64>,
    /// Sieve against the best baseline present.
    pub rd: Option<f64>,
    pub rr: Option<f64>,
    /// Largest coefficient gap between the stationary VAR and the `c = 1` sieve
    /// on the first replication, when both are computed.
    pub baseline_gap: Option<f64>,
    pub records: Vec<RepRecord>,
}

impl BenchResult {
    pub fn summary(&self, method: Method) -> Option<&MethodSummary> {
        self.summaries.iter().find(|s| s.method == method)
    }

    /// Lowest mean MSE among the non-sieve methods.
    pub fn best_baseline(&self) -> Option<&MethodSummary> {
        self.summaries
            .iter()
            .filter(|s| s.method != Method::Sieve && s.count > 0)
            .min_by(|a, b| a.mean.total_cmp(&b.mean))
    }

    /// Per-method MSEs of one replication, `None` where the method failed.
    pub fn rep_mse(&self, rep: usize, method: Method) -> Option<f64> {
        self.records
            .iter()
            .find(|r| r.rep == rep && r.method == method)
            .and_then(|r| r.mse)
    }
}

/// Shared per-run state: bases and scoring matrices.
struct Scorer {
    render: BasisSet,
    fit_basis: Arc<BasisSet>,
    /// `K_render × N` rendering basis at the scoring points.
    render_eval: DMatrix<f64>,
    /// `K_fit × N` sieve basis at the scoring points.
    fit_eval: DMatrix<f64>,
}

impl Scorer {
    fn new(cfg: &BenchConfig) -> Result<Self> {
        let grid = cfg.dgp.rendering_grid();
        let render = build_basis(cfg.dgp.rendering_basis(), &grid)?;
        let fit_basis = if cfg.sieve.spatial == *render.spec() {
            Arc::new(render.clone())
        } else {
            Arc::new(build_basis(cfg.sieve.spatial, &grid)?)
        };
        let m = cfg.eval_points;
        let points: Vec<f64> = (0..m).map(|s| s as f64 / (m - 1) as f64).collect();
        Ok(Self {
            render_eval: render.eval_matrix(&points),
            fit_eval: fit_basis.eval_matrix(&points),
            render,
            fit_basis,
        })
    }

    /// Values at the scoring points of `Σ_k coef_k α_k` over the first `coef.len()` functions.
    fn values(eval: &DMatrix<f64>, coef: &[f64]) -> Vec<f64> {
        (0..eval.ncols())
            .map(|s| coef.iter().enumerate().map(|(k, c)| c * eval[(k, s)]).sum())
            .collect()
    }
}

struct RepOutput {
    records: Vec<RepRecord>,
    baseline_gap: Option<f64>,
}

fn sieve_coefficients(model: &FittedModel, x: &[f64]) -> Result<Vec<f64>> {
    let mut coef = model.dec.coefficients(x)?;
    for (c, m) in coef.iter_mut().zip(model.mean_coefficients()) {
        *c += m;
    }
    Ok(coef)
}

fn run_rep(cfg: &BenchConfig, scorer: &Scorer, rep: usize, sieve: &SieveConfig) -> Result<RepOutput> {
    let mut rng = rep_rng(cfg.seed, rep as u64);
    let sim = simulate_with_rng(&cfg.dgp, &mut rng)?;
    let n = cfg.dgp.n;
    let truth = Scorer::values(&scorer.render_eval, &sim.target());
    let history = sim.scores.rows(0, n).into_owned();
    let needs_fit = cfg.methods.iter().any(|m| *m != Method::Naive);
    let model = if needs_fit {
        let curves = sim.render(&scorer.render)?.rows(0, n).into_owned();
        let series = FunctionalSeries::new(curves, scorer.render.grid().clone())?;
        Some(fit_model_with_basis(&series, scorer.fit_basis.clone(), sieve))
    } else {
        None
    };
    let mut records = Vec::new();
    let mut baseline_gap = None;
    let mut record = |method: Method, outcome: Result<(Vec<f64>, Option<(usize, usize, usize)>)>| {
        let (mse_val, orders, error) = match outcome.and_then(|(pred, o)| Ok((mse(&pred, &truth)?, o))) {
            Ok((v, o)) => (Some(v), o, None),
            Err(e) => (None, None, Some(e.to_string())),
        };
        records.push(RepRecord {
            rep,
            method,
            mse: mse_val,
            orders,
            error,
        });
    };
    for &method in &cfg.methods {
        match method {
            Method::Naive => {
                let outcome = naive_forecast(&history).map(|last| (Scorer::values(&scorer.render_eval, &last), None));
                record(method, outcome);
            }
            Method::Sieve => {
                let outcome = match &model {
                    Some(Ok(m)) => forecast_scores(&m.fit, &m.dec.scaled_scores)
                        .and_then(|x| sieve_coefficients(m, &x))
                        .map(|coef| (Scorer::values(&scorer.fit_eval, &coef), Some((m.p(), m.b(), m.c())))),
                    Some(Err(e)) => Err(e.clone()),
                    None => unreachable!("sieve requires a fit"),
                };
                record(method, outcome);
            }
            Method::StatVar => {
                let outcome = match &model {
                    Some(Ok(m)) => {
                        let x = &m.dec.scaled_scores;
                        select_stationary_var(x, sieve.b_max).and_then(|var| {
                            if rep == 0 {
                                baseline_gap = stat_var_gap(x, &var, sieve).ok();
                            }
                            let hist_x = var.forecast(x)?;
                            let coef = sieve_coefficients(m, &hist_x)?;
                            Ok((Scorer::values(&scorer.fit_eval, &coef), Some((m.p(), var.order(), 1))))
                        })
                    }
                    Some(Err(e)) => Err(e.clone()),
                    None => unreachable!("stat_var requires a fit"),
                };
                record(method, outcome);
            }
        }
    }
    Ok(RepOutput {
        records,
        baseline_gap,
    })
}

/// Max entrywise gap between the stationary VAR and the sieve restricted to `c = 1`.
fn stat_var_gap(
    x: &DMatrix<f64>,
    var: &crate::tvvar::StationaryVar,
    sieve: &SieveConfig,
) -> Result<f64> {
    let sel = select_bc(x, sieve.time_family, sieve.b_max, 1, Execution::Sequential)?;
    if sel.b != var.order() {
        return Ok(f64::INFINITY);
    }
    let mut gap: f64 = 0.0;
    for (j, coef) in var.coefs.iter().enumerate() {
        let phi = crate::tvvar::phi_at(&sel.fit, j + 1, 1.0)?;
        gap = gap.max((phi - coef).amax());
    }
    Ok(gap)
}

/// Runs `cfg.reps` replications and aggregates per-method MSEs.
pub fn run_monte_carlo(cfg: &BenchConfig) -> Result<BenchResult> {
    cfg.validate()?;
    let scorer = Scorer::new(cfg)?;
    let mut sieve = cfg.sieve;
    if cfg.execution.is_parallel() {
        sieve.execution = Execution::Sequential;
    }
    let outputs = map_indexed(cfg.execution, cfg.reps, |rep| run_rep(cfg, &scorer, rep, &sieve));
    let mut records = Vec::new();
    let mut baseline_gap = None;
    let mut sim_failures = 0;
    for (rep, out) in outputs.into_iter().enumerate() {
        match out {
            Ok(o) => {
                if rep == 0 {
                    baseline_gap = o.baseline_gap;
                }
                records.extend(o.records);
            }
            Err(e) => {
                log::warn!("replication {rep}: simulation failed: {e}");
                sim_failures += 1;
                for &method in &cfg.methods {
                    records.push(RepRecord {
                        rep,
                        method,
                        mse: None,
                        orders: None,
                        error: Some(e.to_string()),
                    });
                }
            }
        }
    }
    if sim_failures > 0 {
        log::warn!("{sim_failures} of {} simulations failed", cfg.reps);
    }
    let mut methods = cfg.methods.clone();
    methods.sort();
    methods.dedup();
    let mut summaries = Vec::new();
    for method in methods {
        let values: Vec<f64> = records
            .iter()
            .filter(|r| r.method == method)
            .filter_map(|r| r.mse)
            .collect();
        let failures = cfg.reps - values.len();
        for r in records.iter().filter(|r| r.method == method && r.mse.is_none()) {
            log::warn!("replication {} ({method}) dropped: {}", r.rep, r.error.as_deref().unwrap_or("?"));
        }
        if failures as f64 > MAX_FAILURE_SHARE * cfg.reps as f64 {
            return Err(Error::TooManyFailures {
                failed: failures,
                total: cfg.reps,
            });
        }
        let count = values.len();
        let mean = values.iter().sum::<f64>() / count as f64;
        let stderr = if count > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1) as f64;
            (var / count as f64).sqrt()
        } else {
            0.0
        };
        summaries.push(MethodSummary {
            method,
            mean,
            stderr,
            count,
            failures,
        });
    }
    let mut result = BenchResult {
        case: cfg.dgp.case.name().to_string(),
        n: cfg.dgp.n,
        reps: cfg.reps,
        summaries,
        mse_true: cfg.mse_true,
        rd: None,
        rr: None,
        baseline_gap,
        records,
    };
    let pair = result
        .summary(Method::Sieve)
        .zip(result.best_baseline())
        .map(|(s, o)| (s.mean, o.mean));
    if let Some((sieve_mse, opt_mse)) = pair {
        result.rd = rd(sieve_mse, opt_mse).ok();
        if let Some(t) = cfg.mse_true {
            result.rr = match rr(opt_mse, sieve_mse, t) {
                Ok(v) => Some(v),
                Err(e) => {
                    log::warn!("RR not reported: {e}");
                    None
                }
            };
        }
    }
    Ok(result)
}

fn opt_field(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row per method: `case,n,reps,method,mse,stderr,count,failures,rd,rr`.
/// `rd` and `rr` are filled on the sieve row only.
pub fn write_results_csv<W: Write>(mut w: W, result: &BenchResult) -> std::io::Result<()> {
    writeln!(w, "case,n,reps,method,mse,stderr,count,failures,rd,rr")?;
    for s in &result.summaries {
        let (rd, rr) = if s.method == Method::Sieve {
            (opt_field(result.rd), opt_field(result.rr))
        } else {
            (String::new(), String::new())
        };
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            result.case, result.n, result.reps, s.method, s.mean, s.stderr, s.count, s.failures, rd, rr
        )?;
    }
    w.flush()
}

/// Long format: `rep,method,mse,p,b,c,error`.
pub fn write_reps_csv<W: Write>(mut w: W, result: &BenchResult) -> std::io::Result<()> {
    writeln!(w, "rep,method,mse,p,b,c,error")?;
    for r in &result.records {
        let (p, b, c) = match r.orders {
            Some((p, b, c)) => (p.to_string(), b.to_string(), c.to_string()),
            None => Default::default(),
        };
        let err = r.error.as_deref().unwrap_or("").replace([',', '\n'], ";");
        writeln!(w, "{},{},{},{p},{b},{c},{err}", r.rep, r.method, opt_field(r.mse))?;
    }
    w.flush()
}
