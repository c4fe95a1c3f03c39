use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;

use dsieve::basis::{BasisSpec, Family, Grid, WaveletForm};
use dsieve::bench::{run_monte_carlo, write_reps_csv, write_results_csv, BenchConfig, Method};
use dsieve::dgp::{self, analytic_oracle_mse, DgpSpec};
use dsieve::fdata::io::{read_curves, write_curves, CurveTable};
use dsieve::fdata::{smooth_raw, Bandwidth, FunctionalSeries};
use dsieve::model::{fit_model, read_model, report, write_model, FitReport, FittedModel, SieveConfig};
use dsieve::par::Execution;
use dsieve::Error;

use crate::config::merge_config;
use crate::{
    parse_cpv_mode, BenchArgs, FitArgs, ForecastArgs, SieveArgs, SimulateArgs, SmoothArgs, EXIT_NUMERIC,
    EXIT_USAGE,
};

const DEFAULT_WAVELET_ORDER: usize = 9;
const DEFAULT_WAVELET_COUNT: usize = 8;
const DEFAULT_BENCH_REPS: usize = 200;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
    pub hint: Option<String>,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
            hint: None,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        use Error::*;
        let code = match e {
            Parse(_) | InvalidParameter(_) | LengthMismatch { .. } | DimensionMismatch(_) | EmptySeries
            | TooFewCurves { .. } | TooFewRows { .. } | HistoryTooShort { .. } | InvalidGrid(_)
            | InvalidBasis(_) => EXIT_USAGE,
            _ => EXIT_NUMERIC,
        };
        let hint = match e {
            SingularDesign { .. } | NoFeasiblePair => {
                Some("lower --b-max or --c-max, or lower --cpv to keep fewer components".to_string())
            }
            GramDefect { .. } => Some("the grid is too coarse for this basis; use more grid points or a smaller --k".into()),
            DegenerateWindow { .. } => Some("increase --bandwidth".into()),
            TooFewRows { .. } => Some("supply more curves or lower --b-max".into()),
            _ => None,
        };
        Self {
            code,
            message: e.to_string(),
            hint,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::usage(format!("cannot create {}: {e}", path.display())))
}

fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::usage(format!("cannot open {}: {e}", path.display())))
}

fn io_error(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::usage(format!("cannot write {}: {e}", path.display()))
}

fn load_curves(path: &Path) -> CliResult<CurveTable> {
    read_curves(open(path)?).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

pub fn simulate(args: &SimulateArgs) -> CliResult<()> {
    let spec = DgpSpec {
        a: args.a,
        dim_k: args.dim_k,
        a1_band: args.a1_band,
        ..DgpSpec::new(args.case, args.n, args.seed)
    };
    spec.validate()?;
    let sim = dgp::simulate(&spec)?;
    let basis = dsieve::basis::build_basis(spec.rendering_basis(), &spec.rendering_grid())?;
    let curves = sim.render(&basis)?;
    write_curves(create(&args.out)?, basis.grid().points(), &curves)?;
    if let Some(path) = &args.truth {
        let mut w = create(path)?;
        let mut text = String::from("row");
        for k in 1..=sim.dim() {
            let _ = write!(text, ",r_{k}");
        }
        text.push('\n');
        for (i, row) in sim.scores.row_iter().enumerate() {
            let _ = write!(text, "{}", i + 1);
            for v in row.iter() {
                let _ = write!(text, ",{v}");
            }
            text.push('\n');
        }
        text.push_str("oracle");
        for v in &sim.oracle_mean {
            let _ = write!(text, ",{v}");
        }
        text.push('\n');
        w.write_all(text.as_bytes()).map_err(io_error(path))?;
        w.flush().map_err(io_error(path))?;
    }
    log::info!("wrote {} curves of {}", curves.nrows(), spec.case);
    Ok(())
}

/// Spatial basis from the flags, with the family's own default size.
fn spatial_spec(s: &SieveArgs, fallback: BasisSpec) -> BasisSpec {
    let family = s.basis.unwrap_or(fallback.family);
    let same_family = family == fallback.family;
    match family {
        Family::Legendre | Family::Fourier => {
            let k = s.k.unwrap_or(if same_family {
                fallback.count
            } else {
                dsieve::fdata::DEFAULT_RAW_COUNT
            });
            if family == Family::Legendre {
                BasisSpec::legendre(k)
            } else {
                BasisSpec::fourier(k)
            }
        }
        Family::Daubechies => {
            let k = s.k.unwrap_or(if same_family { fallback.count } else { DEFAULT_WAVELET_COUNT });
            let order = s.wavelet_order.unwrap_or(if same_family {
                fallback.wavelet_order
            } else {
                DEFAULT_WAVELET_ORDER
            });
            let form = s.wavelet_form.unwrap_or(if same_family {
                fallback.wavelet_form
            } else {
                WaveletForm::Father
            });
            match form {
                WaveletForm::Father => BasisSpec::daubechies_father(order, k),
                WaveletForm::Mixed => {
                    BasisSpec::daubechies_mixed(order, k, s.coarse_level.unwrap_or(fallback.coarse_level))
                }
            }
        }
    }
}

fn sieve_config(s: &SieveArgs, base: SieveConfig) -> CliResult<SieveConfig> {
    let cpv_mode = match &s.cpv_mode {
        Some(m) => parse_cpv_mode(m).map_err(CliError::usage)?,
        None => base.cpv_mode,
    };
    let cfg = SieveConfig {
        spatial: spatial_spec(s, base.spatial),
        cpv_threshold: s.cpv.unwrap_or(base.cpv_threshold),
        cpv_mode,
        time_family: s.time_basis.unwrap_or(base.time_family),
        b_max: s.b_max.unwrap_or(base.b_max),
        c_max: s.c_max.unwrap_or(base.c_max),
        ..base
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn format_report(model: &FittedModel, rep: &FitReport) -> String {
    let mut s = String::new();
    let dropped = if rep.dropped.is_empty() {
        "none".to_string()
    } else {
        rep.dropped.iter().map(|k| (k + 1).to_string()).collect::<Vec<_>>().join(",")
    };
    let _ = writeln!(s, "curves              n = {}, grid points = {}", model.n, model.mean.len());
    let _ = writeln!(
        s,
        "spatial basis       {} (K = {})",
        model.basis().spec().family,
        model.basis().count()
    );
    let _ = writeln!(
        s,
        "truncation          p = {} (usable {}, dropped: {dropped}), CPV = {:.4}",
        rep.p,
        rep.effective_p,
        rep.cpv[rep.p - 1]
    );
    let _ = writeln!(s, "selected orders     b = {}, c = {}", rep.b, rep.c);
    let _ = writeln!(s, "condition number    {:.4e}", rep.condition_number);
    match rep.aic {
        Some(a) => {
            let _ = writeln!(s, "AIC                 {a:.4}");
        }
        None => s.push_str("AIC                 undefined (zero residuals)\n"),
    }
    s.push_str("AIC table\n     b    c              AIC\n");
    for cand in &model.table {
        let cell = match (&cand.aic, &cand.skipped) {
            (Some(a), _) => format!("{a:16.4}"),
            (None, Some(why)) => format!("  skipped: {why}"),
            (None, None) => format!("{:>16}", "undefined"),
        };
        let mark = if cand.b == rep.b && cand.c == rep.c { "  *" } else { "" };
        let _ = writeln!(s, "  {:4} {:4} {cell}{mark}", cand.b, cand.c);
    }
    match &rep.updc {
        Some(u) => {
            let _ = writeln!(
                s,
                "UPDC                min eigenvalue {:.4e} at t = {:.2}, omega = {:.4}",
                u.min_eig, u.t, u.omega
            );
        }
        None => s.push_str("UPDC                unavailable\n"),
    }
    s.push_str("coefficient decay   ");
    let decay: Vec<String> = rep
        .decay
        .iter()
        .enumerate()
        .map(|(j, v)| format!("|Phi_{}(1)| = {v:.4}", j + 1))
        .collect();
    s.push_str(&decay.join(", "));
    s.push('\n');
    s
}

pub fn fit(args: &FitArgs) -> CliResult<()> {
    let table = load_curves(&args.curves)?;
    let grid = Grid::from_points(table.points)?;
    let series = FunctionalSeries::new(table.curves, grid)?;
    let mut cfg = sieve_config(&args.sieve, SieveConfig::default())?;
    if args.sequential {
        cfg.execution = Execution::Sequential;
    }
    let model = fit_model(&series, &cfg)?;
    let mut w = create(&args.model)?;
    write_model(&mut w, &model)?;
    let text = format_report(&model, &report(&model));
    print!("{text}");
    if let Some(path) = &args.report {
        std::fs::write(path, &text).map_err(io_error(path))?;
    }
    Ok(())
}

pub fn forecast(args: &ForecastArgs) -> CliResult<()> {
    let model = read_model(open(&args.model)?)?;
    let table = load_curves(&args.curves)?;
    let points = model.grid().points();
    if table.points.len() != points.len() || table.points.iter().zip(points).any(|(a, b)| a != b) {
        return Err(CliError::usage(format!(
            "{}: grid differs from the model grid ({} points)",
            args.curves.display(),
            points.len()
        )));
    }
    let curve = model.forecast_curve_from(&table.curves)?;
    let out = DMatrix::from_row_slice(1, curve.len(), &curve);
    write_curves(create(&args.out)?, points, &out)?;
    Ok(())
}

fn parse_methods(s: &str) -> CliResult<Vec<Method>> {
    let methods: Vec<Method> = s
        .split(',')
        .map(str::trim)
        .filter(|m| !m.is_empty())
        .map(|m| m.parse::<Method>())
        .collect::<Result<_, _>>()?;
    if methods.is_empty() {
        return Err(CliError::usage("no methods given"));
    }
    Ok(methods)
}

pub fn bench_config(args: &BenchArgs) -> CliResult<(BenchConfig, std::path::PathBuf, Option<std::path::PathBuf>)> {
    let mut a = args.clone();
    if let Some(path) = &args.config {
        merge_config(&mut a, path)?;
    }
    let case = a.case.ok_or_else(|| CliError::usage("bench needs --case (or `case` in the config file)"))?;
    let n = a.n.ok_or_else(|| CliError::usage("bench needs --n (or `n` in the config file)"))?;
    let mut dgp = DgpSpec::new(case, n, 0);
    if let Some(v) = a.a {
        dgp.a = v;
    }
    if let Some(v) = a.dim_k {
        dgp.dim_k = v;
    }
    if let Some(v) = a.a1_band {
        dgp.a1_band = v;
    }
    let mut cfg = BenchConfig::new(dgp, a.reps.unwrap_or(DEFAULT_BENCH_REPS), a.seed.unwrap_or(0));
    cfg.sieve = sieve_config(&a.sieve, cfg.sieve)?;
    if let Some(m) = &a.methods {
        cfg.methods = parse_methods(m)?;
    }
    if let Some(v) = a.eval_points {
        cfg.eval_points = v;
    }
    cfg.mse_true = match a.mse_true.as_deref() {
        None | Some("none") => None,
        Some("analytic") => Some(analytic_oracle_mse(&cfg.dgp).ok_or_else(|| {
            CliError::usage(format!("no closed-form oracle MSE for {case}; pass a number"))
        })?),
        Some(v) => Some(
            v.parse::<f64>()
                .map_err(|_| CliError::usage(format!("mse_true must be a number or 'analytic', got '{v}'")))?,
        ),
    };
    if a.sequential {
        cfg.execution = Execution::Sequential;
        cfg.sieve.execution = Execution::Sequential;
    }
    cfg.validate()?;
    let out = a.out.unwrap_or_else(|| "results.csv".into());
    Ok((cfg, out, a.reps_out))
}

pub fn bench(args: &BenchArgs) -> CliResult<()> {
    let (cfg, out, reps_out) = bench_config(args)?;
    let result = run_monte_carlo(&cfg)?;
    write_results_csv(create(&out)?, &result).map_err(io_error(&out))?;
    if let Some(path) = &reps_out {
        write_reps_csv(create(path)?, &result).map_err(io_error(path))?;
    }
    println!("{} n = {} reps = {}", result.case, result.n, result.reps);
    for s in &result.summaries {
        println!(
            "  {:<9} MSE {:.4} ± {:.4} ({} ok, {} failed)",
            s.method.name(),
            s.mean,
            s.stderr,
            s.count,
            s.failures
        );
    }
    if let Some(rd) = result.rd {
        println!("  RD {rd:.2}%");
    }
    if let Some(rr) = result.rr {
        println!("  RR {rr:.2}");
    }
    Ok(())
}

pub fn smooth(args: &SmoothArgs) -> CliResult<()> {
    let mut table = load_curves(&args.raw)?;
    if args.log {
        if table.curves.iter().any(|v| *v <= 0.0) {
            return Err(CliError::usage("--log needs strictly positive raw values"));
        }
        table.curves.apply(|v| *v = v.ln());
    }
    let mut points = table.points;
    if args.rescale {
        let (lo, hi) = (points[0], points[points.len() - 1]);
        if !(hi > lo) {
            return Err(CliError::usage("observation points must be increasing to rescale"));
        }
        for u in &mut points {
            *u = (*u - lo) / (hi - lo);
        }
    }
    let bandwidth = match args.bandwidth.as_str() {
        "auto" => Bandwidth::Auto,
        v => Bandwidth::Fixed(
            v.parse()
                .map_err(|_| CliError::usage(format!("bandwidth must be a number or 'auto', got '{v}'")))?,
        ),
    };
    let target = if args.grid_size % 2 == 1 {
        Grid::simpson(args.grid_size)?
    } else {
        Grid::uniform(args.grid_size)?
    };
    let out = smooth_raw(&table.curves, &points, &target, bandwidth, Execution::default())?;
    write_curves(create(&args.out)?, target.points(), out.series.curves())?;
    eprintln!("bandwidth {:.6}", out.bandwidth);
    Ok(())
}
