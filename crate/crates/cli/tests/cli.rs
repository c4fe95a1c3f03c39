use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dsieve::basis::build_basis;
use dsieve::bench::{run_monte_carlo, BenchConfig, Method};
use dsieve::dgp::{DgpCase, DgpSpec};
use dsieve::fdata::io::read_curves;
use dsieve::fdata::FunctionalSeries;
use dsieve::model::{fit_model, read_model, write_model, SieveConfig};
use dsieve::par::Execution;
use dsieve::tvvar::phi_at;
use nalgebra::DMatrix;
use tempfile::TempDir;

fn dsieve(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dsieve"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = dsieve(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn path(dir: &TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn simulate(dir: &TempDir, case: &str, n: usize, seed: u64, name: &str) -> PathBuf {
    let out = path(dir, name);
    ok(&[
        "simulate",
        "--case",
        case,
        "--n",
        &n.to_string(),
        "--seed",
        &seed.to_string(),
        "--out",
        s(&out),
    ]);
    out
}

/// Keeps the header and the first `n` curves of a simulated file.
fn training_file(dir: &TempDir, full: &Path, n: usize, name: &str) -> PathBuf {
    let text = fs::read_to_string(full).unwrap();
    let lines: Vec<&str> = text.lines().take(n + 1).collect();
    let out = path(dir, name);
    fs::write(&out, lines.join("\n") + "\n").unwrap();
    out
}

fn load(p: &Path) -> (Vec<f64>, DMatrix<f64>) {
    let t = read_curves(BufReader::new(fs::File::open(p).unwrap())).unwrap();
    (t.points, t.curves)
}

fn series_of(p: &Path) -> FunctionalSeries {
    let (points, curves) = load(p);
    FunctionalSeries::new(curves, dsieve::basis::Grid::from_points(points).unwrap()).unwrap()
}

#[test]
fn simulate_writes_header_plus_n_plus_one_curves() {
    let dir = TempDir::new().unwrap();
    let out = path(&dir, "c.csv");
    ok(&["simulate", "--case", "ma1_ls", "--a", "0.5", "--n", "400", "--seed", "7", "--out", s(&out)]);
    let (points, curves) = load(&out);
    assert_eq!(curves.nrows(), 401);
    assert_eq!(curves.ncols(), points.len());
    assert_eq!(fs::read_to_string(&out).unwrap().lines().count(), 402);
}

#[test]
fn simulate_is_byte_identical_across_runs() {
    let dir = TempDir::new().unwrap();
    let args = |o: &Path, t: &Path| {
        ok(&[
            "simulate", "--case", "tvtar", "--n", "150", "--seed", "11", "--out", s(o), "--truth", s(t),
        ]);
    };
    let (c1, t1, c2, t2) = (path(&dir, "c1"), path(&dir, "t1"), path(&dir, "c2"), path(&dir, "t2"));
    args(&c1, &t1);
    args(&c2, &t2);
    assert_eq!(fs::read(&c1).unwrap(), fs::read(&c2).unwrap());
    assert_eq!(fs::read(&t1).unwrap(), fs::read(&t2).unwrap());
    let truth = fs::read_to_string(&t1).unwrap();
    assert_eq!(truth.lines().count(), 1 + 151 + 1);
    assert!(truth.lines().last().unwrap().starts_with("oracle,"));
}

#[test]
fn unknown_case_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let out = dsieve(&["simulate", "--case", "arma99", "--n", "10", "--out", s(&path(&dir, "x"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ma1_ls"));
}

#[test]
fn empty_csv_is_an_input_error() {
    let dir = TempDir::new().unwrap();
    let empty = path(&dir, "empty.csv");
    fs::write(&empty, "").unwrap();
    let out = dsieve(&["fit", "--curves", s(&empty), "--model", s(&path(&dir, "m"))]);
    assert_eq!(out.status.code(), Some(2));
    let missing = dsieve(&["fit", "--curves", s(&path(&dir, "nope.csv")), "--model", s(&path(&dir, "m"))]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn singular_design_exits_one_with_a_hint() {
    let dir = TempDir::new().unwrap();
    let csv = path(&dir, "flat.csv");
    let mut text = String::from("0,0.25,0.5,0.75,1\n");
    for _ in 0..30 {
        text.push_str("1,1,1,1,1\n");
    }
    fs::write(&csv, text).unwrap();
    let out = dsieve(&["fit", "--curves", s(&csv), "--model", s(&path(&dir, "m")), "--k", "3"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("hint:"));
}

#[test]
fn fit_on_ma1_stat_keeps_three_components() {
    let dir = TempDir::new().unwrap();
    let full = simulate(&dir, "ma1_stat", 400, 3, "full.csv");
    let train = training_file(&dir, &full, 400, "train.csv");
    let model = path(&dir, "m.txt");
    let report = path(&dir, "report.txt");
    let out = ok(&["fit", "--curves", s(&train), "--model", s(&model), "--report", s(&report)]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text, fs::read_to_string(&report).unwrap());
    let p: usize = text
        .split("p = ")
        .nth(1)
        .and_then(|r| r.split_whitespace().next())
        .unwrap()
        .parse()
        .unwrap();
    assert!(p >= 3, "{text}");
    for needle in ["selected orders", "AIC table", "condition number", "UPDC", "coefficient decay"] {
        assert!(text.contains(needle), "missing {needle}");
    }
}

#[test]
fn reloaded_model_matches_library_fit() {
    let dir = TempDir::new().unwrap();
    let full = simulate(&dir, "tvarma", 300, 5, "full.csv");
    let train = training_file(&dir, &full, 300, "train.csv");
    let model_path = path(&dir, "m.txt");
    ok(&["fit", "--curves", s(&train), "--model", s(&model_path), "--sequential"]);
    let reloaded = read_model(BufReader::new(fs::File::open(&model_path).unwrap())).unwrap();
    let direct = fit_model(&series_of(&train), &SieveConfig::default()).unwrap();
    assert_eq!((reloaded.b(), reloaded.c(), reloaded.p()), (direct.b(), direct.c(), direct.p()));
    for i in 0..=20 {
        let t = i as f64 / 20.0;
        for j in 1..=direct.b() {
            let a = phi_at(&reloaded.fit, j, t).unwrap();
            let b = phi_at(&direct.fit, j, t).unwrap();
            assert!(a.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }
}

#[test]
fn cli_forecast_equals_library_forecast_bitwise() {
    let dir = TempDir::new().unwrap();
    let full = simulate(&dir, "tvtar", 250, 9, "full.csv");
    let train = training_file(&dir, &full, 250, "train.csv");
    let model = path(&dir, "m.txt");
    let fc = path(&dir, "f.csv");
    ok(&["fit", "--curves", s(&train), "--model", s(&model), "--basis", "daubechies"]);
    ok(&["forecast", "--model", s(&model), "--curves", s(&train), "--out", s(&fc)]);
    let cfg = SieveConfig {
        spatial: dsieve::basis::BasisSpec::daubechies_father(9, 8),
        ..SieveConfig::default()
    };
    let direct = fit_model(&series_of(&train), &cfg).unwrap().forecast_curve().unwrap();
    let (_, got) = load(&fc);
    assert_eq!(got.nrows(), 1);
    assert!(got.iter().zip(&direct).all(|(a, b)| a.to_bits() == b.to_bits()));
}

#[test]
fn zero_coefficients_forecast_the_mean() {
    let dir = TempDir::new().unwrap();
    let full = simulate(&dir, "ar2_stat", 200, 1, "full.csv");
    let train = training_file(&dir, &full, 200, "train.csv");
    let mut model = fit_model(&series_of(&train), &SieveConfig::default()).unwrap();
    model.fit.beta_hat.fill(0.0);
    let model_path = path(&dir, "zero.txt");
    write_model(fs::File::create(&model_path).unwrap(), &model).unwrap();
    let fc = path(&dir, "f.csv");
    ok(&["forecast", "--model", s(&model_path), "--curves", s(&train), "--out", s(&fc)]);
    let (_, got) = load(&fc);
    for (g, m) in got.iter().zip(&model.mean) {
        assert!((g - m).abs() <= 1e-12 * m.abs().max(1.0));
    }
}

#[test]
fn forecast_rejects_a_foreign_grid() {
    let dir = TempDir::new().unwrap();
    let full = simulate(&dir, "ar2_stat", 120, 2, "full.csv");
    let model = path(&dir, "m.txt");
    ok(&["fit", "--curves", s(&full), "--model", s(&model)]);
    let other = path(&dir, "other.csv");
    fs::write(&other, "0,0.5,1\n1,2,3\n").unwrap();
    let out = dsieve(&["forecast", "--model", s(&model), "--curves", s(&other), "--out", s(&path(&dir, "f"))]);
    assert_eq!(out.status.code(), Some(2));
}

/// Projects curves on the basis grid onto the sieve basis and evaluates at 101 equispaced points.
fn on_scoring_points(curve: &[f64], points: &[f64]) -> Vec<f64> {
    let grid = dsieve::basis::Grid::from_points(points.to_vec()).unwrap();
    let basis = build_basis(dsieve::basis::BasisSpec::legendre(50), &grid).unwrap();
    let row = DMatrix::from_row_slice(1, curve.len(), curve);
    let coef = row * basis.weighted_values().transpose();
    let eval_pts: Vec<f64> = (0..101).map(|i| i as f64 / 100.0).collect();
    let ev = basis.eval_matrix(&eval_pts);
    (0..101).map(|s| (0..50).map(|k| coef[(0, k)] * ev[(k, s)]).sum()).collect()
}

#[test]
fn held_out_scoring_matches_bench_rep_mse() {
    let dir = TempDir::new().unwrap();
    let (n, seed) = (200, 21);
    let full = simulate(&dir, "ma1_ls", n, seed, "full.csv");
    let train = training_file(&dir, &full, n, "train.csv");
    let model = path(&dir, "m.txt");
    let fc = path(&dir, "f.csv");
    ok(&["fit", "--curves", s(&train), "--model", s(&model)]);
    ok(&["forecast", "--model", s(&model), "--curves", s(&train), "--out", s(&fc)]);
    let (points, all) = load(&full);
    let truth: Vec<f64> = all.row(n).iter().copied().collect();
    let (_, pred) = load(&fc);
    let pred: Vec<f64> = pred.iter().copied().collect();
    let (t, p) = (on_scoring_points(&truth, &points), on_scoring_points(&pred, &points));
    let cli_mse = t.iter().zip(&p).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / 101.0;

    let mut cfg = BenchConfig::new(DgpSpec::new(DgpCase::Ma1Ls, n, 0), 1, seed);
    cfg.methods = vec![Method::Sieve];
    cfg.execution = Execution::Sequential;
    let bench_mse = run_monte_carlo(&cfg).unwrap().rep_mse(0, Method::Sieve).unwrap();
    assert!(
        (cli_mse - bench_mse).abs() <= 1e-9 * bench_mse.max(1.0),
        "cli {cli_mse} vs bench {bench_mse}"
    );
}

#[test]
fn bench_reads_config_and_flags_override() {
    let dir = TempDir::new().unwrap();
    let conf = path(&dir, "bench.conf");
    let results = path(&dir, "results.csv");
    let reps = path(&dir, "reps.csv");
    fs::write(
        &conf,
        format!(
            "# small run\ncase = tvarma\nn = 120\nreps = 50\nseed = 4\nmethods = sieve,naive\nout = {}\n",
            s(&results)
        ),
    )
    .unwrap();
    ok(&["bench", "--config", s(&conf), "--reps", "6", "--reps-out", s(&reps), "--sequential"]);
    let text = fs::read_to_string(&results).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().all(|l| l.starts_with("case") || l.contains(",120,6,")));
    assert_eq!(fs::read_to_string(&reps).unwrap().lines().count(), 1 + 6 * 2);
}

#[test]
fn bench_rejects_unknown_config_keys() {
    let dir = TempDir::new().unwrap();
    let conf = path(&dir, "bad.conf");
    fs::write(&conf, "case = tvarma\nn = 100\ncolour = blue\n").unwrap();
    let out = dsieve(&["bench", "--config", s(&conf)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));
    let no_case = dsieve(&["bench", "--n", "100"]);
    assert_eq!(no_case.status.code(), Some(2));
}

#[test]
fn smooth_recovers_a_grid_and_checks_log_input() {
    let dir = TempDir::new().unwrap();
    let raw = path(&dir, "raw.csv");
    let m = 48;
    let mut text = (0..m).map(|j| (j + 1).to_string()).collect::<Vec<_>>().join(",") + "\n";
    for i in 0..5 {
        let row: Vec<String> = (0..m)
            .map(|j| {
                let u = j as f64 / (m - 1) as f64;
                (2.0 + (6.0 * u + i as f64).sin() + 0.01 * ((j * 7 + i) % 5) as f64).to_string()
            })
            .collect();
        text += &(row.join(",") + "\n");
    }
    fs::write(&raw, &text).unwrap();
    let out = path(&dir, "smooth.csv");
    ok(&["smooth", "--raw", s(&raw), "--out", s(&out), "--rescale", "--log", "--grid-size", "51"]);
    let (points, curves) = load(&out);
    assert_eq!(points.len(), 51);
    assert_eq!(curves.shape(), (5, 51));
    let expected = (2.0f64 + 1.0f64.sin()).ln();
    assert!((curves[(1, 0)] - expected).abs() < 0.05, "{}", curves[(1, 0)]);

    let bad = path(&dir, "neg.csv");
    fs::write(&bad, text.replacen("\n2", "\n-2", 1)).unwrap();
    let err = dsieve(&["smooth", "--raw", s(&bad), "--out", s(&out), "--rescale", "--log"]);
    assert_eq!(err.status.code(), Some(2));
}

#[test]
fn help_documents_defaults() {
    let out = ok(&["bench", "--help"]);
    let text = String::from_utf8(out.stdout).unwrap();
    for needle in ["default: 200", "default: 0.95", "default: 5", "default: 3", "default: 101"] {
        assert!(text.contains(needle), "missing {needle}");
    }
}
