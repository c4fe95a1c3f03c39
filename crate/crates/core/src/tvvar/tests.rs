use super::*;
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn white_noise(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(&mut rng))
}

fn legendre(c: usize) -> TimeBasis {
    TimeBasis::new(TimeFamily::Legendre, c)
}

struct ExactFixture {
    x: DMatrix<f64>,
    b: usize,
    c: usize,
    blocks: Vec<Vec<DMatrix<f64>>>,
    time_basis: TimeBasis,
}

// Noise-free scaled rotation x_i = (1 + 0.03 v_2(i/n)) R x_{i-1}.
fn exact_tvvar_path(n: usize) -> ExactFixture {
    let (s, c) = 0.7f64.sin_cos();
    let rot = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
    let blocks = vec![vec![rot.clone(), &rot * 0.03]];
    let time_basis = legendre(2);
    let mut x = DMatrix::zeros(n, 2);
    x[(0, 0)] = 1.0;
    x[(0, 1)] = 0.5;
    for i in 1..n {
        let t = (i + 1) as f64 / n as f64;
        let phi = &blocks[0][0] * time_basis.eval(0, t) + &blocks[0][1] * time_basis.eval(1, t);
        let next = phi * x.row(i - 1).transpose();
        x.set_row(i, &next.transpose());
    }
    ExactFixture {
        x,
        b: 1,
        c: 2,
        blocks,
        time_basis,
    }
}

#[test]
fn layout_index_maps_are_a_bijection() {
    let layout = DesignLayout::new(3, 4, 2, 100).unwrap();
    let mut seen = std::collections::HashSet::new();
    for s in 1..=layout.blocks() {
        let (j, k) = (layout.lag_of(s), layout.time_index_of(s));
        assert!((1..=3).contains(&j) && (1..=4).contains(&k));
        assert_eq!(layout.block_of(j, k), s);
        assert!(seen.insert((j, k)));
    }
    assert_eq!(seen.len(), 12);
}

#[test]
fn design_reduces_to_lag_matrix_for_b1_c1() {
    let x = white_noise(10, 2, 1);
    let layout = DesignLayout::new(1, 1, 2, 10).unwrap();
    let (y, targets) = build_design(&x, &layout, &legendre(1)).unwrap();
    assert_eq!(y, x.rows(0, 9).into_owned());
    assert_eq!(targets, x.rows(1, 9).into_owned());
}

#[test]
fn design_unrolls_block_order() {
    // b = 2, c = 2, p = 1, n = 4: one row for i = 3
    let x = DMatrix::from_column_slice(4, 1, &[0.7, -1.3, 2.1, 0.4]);
    let layout = DesignLayout::new(2, 2, 1, 4).unwrap();
    let tb = legendre(2);
    let (y, targets) = build_design(&x, &layout, &tb).unwrap();
    assert_eq!(y.shape(), (2, 4));
    let t = 0.75;
    let (v1, v2) = (tb.eval(0, t), tb.eval(1, t));
    let (x1, x2) = (x[(0, 0)], x[(1, 0)]);
    let expected = [v1 * x2, v2 * x2, v1 * x1, v2 * x1];
    for (col, e) in expected.iter().enumerate() {
        assert_eq!(y[(0, col)], *e);
    }
    assert_eq!(targets[(0, 0)], x[(2, 0)]);
}

#[test]
fn zero_scores_give_zero_design() {
    let x = DMatrix::zeros(20, 3);
    let layout = DesignLayout::new(2, 3, 3, 20).unwrap();
    let (y, _) = build_design(&x, &layout, &legendre(3)).unwrap();
    assert!(y.iter().all(|v| *v == 0.0));
}

#[test]
fn too_few_rows() {
    let x = DMatrix::zeros(3, 1);
    let layout = DesignLayout::new(2, 1, 1, 3).unwrap();
    assert!(matches!(
        build_design(&x, &layout, &legendre(1)),
        Err(Error::TooFewRows { .. })
    ));
}

#[test]
fn exact_recovery_of_in_span_coefficients() {
    let ExactFixture {
        x,
        b,
        c,
        blocks,
        time_basis,
    } = exact_tvvar_path(240);
    let fit = fit_tvvar(&x, b, time_basis).unwrap();
    assert!(fit.condition_number <= 1e10, "cond {}", fit.condition_number);
    assert!(fit.normal_residual <= 1e-8);
    for j in 1..=b {
        for k in 1..=c {
            let err = (fit.phi_block(j, k) - &blocks[j - 1][k - 1]).amax();
            assert!(err <= 1e-8, "block ({j},{k}) error {err}");
        }
    }
    for step in 0..=20 {
        let t = step as f64 / 20.0;
        let truth = &blocks[0][0] * time_basis.eval(0, t) + &blocks[0][1] * time_basis.eval(1, t);
        assert!((phi_at(&fit, 1, t).unwrap() - truth).amax() <= 1e-8);
    }
}

#[test]
fn zero_targets_fit_to_zero() {
    let x = white_noise(50, 2, 3);
    let layout = DesignLayout::new(1, 2, 2, 50).unwrap();
    let (y, targets) = build_design(&x, &layout, &legendre(2)).unwrap();
    let zeros = DMatrix::zeros(targets.nrows(), targets.ncols());
    let fit = fit_ls(&y, &zeros, layout, legendre(2)).unwrap();
    assert!(fit.beta_hat.iter().all(|v| *v == 0.0));
    assert!(fit.residuals.iter().all(|v| *v == 0.0));
    assert_eq!(fit.normal_residual, 0.0);
    assert!(fit.aic.is_none());
}

#[test]
fn singular_design_is_reported() {
    let mut x = white_noise(40, 2, 4);
    for i in 0..40 {
        x[(i, 1)] = 2.0 * x[(i, 0)];
    }
    let err = fit_tvvar(&x, 1, legendre(1)).unwrap_err();
    assert!(matches!(err, Error::SingularDesign { .. }));
}

#[test]
fn log_likelihood_closed_forms() {
    let ln2pi = (2.0 * std::f64::consts::PI).ln();
    let resid = DMatrix::from_fn(100, 1, |i, _| if i % 2 == 0 { 1.0 } else { -1.0 });
    let sigma = resid.transpose() * &resid / 100.0;
    let ll = pseudo_log_likelihood(&resid, &sigma).unwrap();
    assert!((ll + 50.0 * (ln2pi + 1.0)).abs() < 1e-10);
    assert!((ll + 141.8939).abs() < 1e-4);

    let scaled = &resid * 2.0;
    let sigma2 = scaled.transpose() * &scaled / 100.0;
    let ll2 = pseudo_log_likelihood(&scaled, &sigma2).unwrap();
    assert!((ll - ll2 - 100.0 * 2f64.ln()).abs() < 1e-10);

    let r10 = DMatrix::from_fn(10, 2, |i, q| if (i + q) % 2 == 0 { 1.0 } else { -1.0 });
    let ll3 = pseudo_log_likelihood(&r10, &DMatrix::identity(2, 2)).unwrap();
    assert!((ll3 + 5.0 * (2.0 * ln2pi + 2.0)).abs() < 1e-10);
    assert!((ll3 + 28.3788).abs() < 1e-4);
}

#[test]
fn non_pd_covariance_after_jitter() {
    let r = DMatrix::zeros(5, 2);
    let sigma = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
    assert_eq!(
        pseudo_log_likelihood(&r, &sigma).unwrap_err(),
        Error::NonPdCovariance
    );
}

#[test]
fn aic_identity_and_selection_matches_table() {
    let x = white_noise(2000, 2, 5);
    let sel = select_bc(&x, TimeFamily::Legendre, 3, 3, Execution::Sequential).unwrap();
    assert_eq!(sel.table.len(), 9);
    let best = sel
        .table
        .iter()
        .filter_map(|c| c.aic.map(|a| (c.b, c.c, a)))
        .min_by(|a, b| {
            a.2.total_cmp(&b.2)
                .then((a.0 * a.1).cmp(&(b.0 * b.1)))
                .then(a.0.cmp(&b.0))
        })
        .unwrap();
    assert_eq!((sel.b, sel.c), (best.0, best.1));
    let fit = &sel.fit;
    let ll = fit.log_lik.unwrap();
    assert_eq!(fit.aic.unwrap(), 2.0 * (sel.b * sel.c * 4) as f64 - 2.0 * ll);
    assert!(fit.normal_residual <= 1e-8);
}

#[test]
fn selection_is_deterministic_across_modes() {
    let x = white_noise(300, 2, 6);
    let a = select_bc(&x, TimeFamily::Legendre, 3, 2, Execution::Sequential).unwrap();
    let b = select_bc(&x, TimeFamily::Legendre, 3, 2, Execution::Parallel).unwrap();
    assert_eq!((a.b, a.c), (b.b, b.c));
    assert_eq!(a.fit.beta_hat, b.fit.beta_hat);
}

#[test]
fn infeasible_pairs_are_skipped_with_reason() {
    let x = white_noise(12, 2, 7);
    let sel = select_bc(&x, TimeFamily::Legendre, 6, 2, Execution::Sequential).unwrap();
    assert!(sel.table.iter().any(|c| c.skipped.is_some()));
    let tiny = white_noise(2, 1, 8);
    assert_eq!(
        select_bc(&tiny, TimeFamily::Legendre, 2, 2, Execution::Sequential).unwrap_err(),
        Error::NoFeasiblePair
    );
}

#[test]
fn phi_at_constant_basis_is_time_invariant() {
    let x = white_noise(200, 2, 9);
    let fit = fit_tvvar(&x, 2, legendre(1)).unwrap();
    let a = phi_at(&fit, 1, 0.1).unwrap();
    let b = phi_at(&fit, 1, 0.9).unwrap();
    assert_eq!(a, b);
    assert!(matches!(phi_at(&fit, 3, 0.5), Err(Error::LagOutOfRange { .. })));
    assert!(matches!(phi_at(&fit, 0, 0.5), Err(Error::LagOutOfRange { .. })));
}

fn fit_with_beta(beta: DMatrix<f64>, b: usize, c: usize, p: usize) -> SieveVarFit {
    let layout = DesignLayout::new(b, c, p, 100).unwrap();
    SieveVarFit {
        layout,
        time_basis: legendre(c),
        residuals: DMatrix::zeros(1, p),
        sigma_hat: DMatrix::identity(p, p),
        beta_hat: beta,
        condition_number: 1.0,
        normal_residual: 0.0,
        log_lik: None,
        aic: None,
    }
}

#[test]
fn zero_beta_gives_zero_everything() {
    let fit = fit_with_beta(DMatrix::zeros(2 * 2 * 3, 3), 2, 2, 3);
    assert!(phi_at(&fit, 2, 0.3).unwrap().iter().all(|v| *v == 0.0));
    let hist = white_noise(5, 3, 10);
    assert_eq!(forecast_scores(&fit, &hist).unwrap(), vec![0.0; 3]);
    assert_eq!(coef_decay_profile(&fit), vec![0.0, 0.0]);
}

#[test]
fn identity_var1_forecast_is_last_observation() {
    let fit = fit_with_beta(DMatrix::identity(2, 2), 1, 1, 2);
    let hist = white_noise(6, 2, 11);
    let f = forecast_scores(&fit, &hist).unwrap();
    assert_eq!(f, vec![hist[(5, 0)], hist[(5, 1)]]);
    assert_eq!(coef_decay_profile(&fit).len(), 1);
    assert!(matches!(
        forecast_scores(&fit, &DMatrix::zeros(0, 2)),
        Err(Error::HistoryTooShort { .. })
    ));
}

#[test]
fn forecast_is_linear_in_history() {
    let x = white_noise(300, 2, 12);
    let fit = fit_tvvar(&x, 2, legendre(2)).unwrap();
    let hist = x.rows(290, 10).into_owned();
    let f = forecast_scores(&fit, &hist).unwrap();
    let f3 = forecast_scores(&fit, &(&hist * -3.0)).unwrap();
    for (a, b) in f.iter().zip(&f3) {
        assert!((b + 3.0 * a).abs() < 1e-12);
    }
}

#[test]
fn phi_at_lies_in_time_span() {
    let x = white_noise(400, 2, 13);
    let c = 3;
    let fit = fit_tvvar(&x, 1, legendre(c)).unwrap();
    let ts = [0.1, 0.5, 0.8];
    let v = DMatrix::from_fn(c, c, |r, k| fit.time_basis.eval(k, ts[r]));
    let lu = v.lu();
    for a in 0..2 {
        for b in 0..2 {
            let rhs = nalgebra::DVector::from_iterator(
                c,
                ts.iter().map(|&t| phi_at(&fit, 1, t).unwrap()[(a, b)]),
            );
            let coefs = lu.solve(&rhs).unwrap();
            for k in 0..c {
                assert!((coefs[k] - fit.phi_block(1, k + 1)[(a, b)]).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn c1_fit_matches_stationary_var() {
    let x = white_noise(500, 3, 14);
    for b in 1..=3 {
        let sieve = fit_tvvar(&x, b, legendre(1)).unwrap();
        let var = fit_stationary_var(&x, b).unwrap();
        for j in 1..=b {
            let diff = (phi_at(&sieve, j, 1.0).unwrap() - &var.coefs[j - 1]).amax();
            assert!(diff <= 1e-10, "lag {j}: {diff}");
        }
        let hist = x.rows(480, 20).into_owned();
        let a = forecast_scores(&sieve, &hist).unwrap();
        let c = var.forecast(&hist).unwrap();
        for (u, v) in a.iter().zip(&c) {
            assert!((u - v).abs() < 1e-10);
        }
    }
}

#[test]
fn local_acf_symmetry_and_degenerate_input() {
    let x = white_noise(500, 2, 15);
    let acf = local_acf(&x, 0.5, 0.2, 3).unwrap();
    for j in 1..=3i64 {
        assert_eq!(acf.gamma(-j).unwrap(), acf.gamma(j).unwrap().transpose());
    }
    let constant = DMatrix::from_element(200, 2, 1.5);
    let acf = local_acf(&constant, 0.5, 0.3, 4).unwrap();
    for j in 0..=4 {
        assert!(acf.gamma(j).unwrap().iter().all(|v| *v == 0.0));
    }
    assert!(matches!(
        local_acf(&x, 0.5, 0.005, 3),
        Err(Error::WindowTooSmall { .. })
    ));
}

#[test]
fn local_acf_of_white_noise() {
    let x = white_noise(20_000, 2, 16);
    let acf = local_acf(&x, 0.5, 0.25, 2).unwrap();
    let bound = 3.0 / (acf.window_len as f64).sqrt();
    let g0 = acf.gamma(0).unwrap();
    let g1 = acf.gamma(1).unwrap();
    for a in 0..2 {
        for b in 0..2 {
            let target = if a == b { 1.0 } else { 0.0 };
            assert!((g0[(a, b)] - target).abs() < bound);
            assert!(g1[(a, b)].abs() < bound);
        }
    }
}

fn omega_grid() -> Vec<f64> {
    (0..=64).map(|i| std::f64::consts::PI * i as f64 / 64.0).collect()
}

#[test]
fn updc_white_noise_spectrum() {
    let x = white_noise(200_000, 2, 17);
    let probe = local_acf(&x, 0.5, 0.5, 1).unwrap();
    let acf = local_acf(&x, 0.5, 0.5, default_max_lag(probe.window_len)).unwrap();
    let rep = updc_min_eig(&[acf], &omega_grid()).unwrap();
    let target = 1.0 / (2.0 * std::f64::consts::PI);
    assert!((rep.min_eig - target).abs() < 0.1 * target, "min eig {}", rep.min_eig);
}

#[test]
fn updc_detects_ma1_unit_root() {
    let e = white_noise(20_001, 1, 18);
    let x = DMatrix::from_fn(20_000, 1, |i, _| e[(i + 1, 0)] + e[(i, 0)]);
    let probe = local_acf(&x, 0.5, 0.05, 1).unwrap();
    let acf = local_acf(&x, 0.5, 0.05, default_max_lag(probe.window_len)).unwrap();
    let rep = updc_min_eig(&[acf], &omega_grid()).unwrap();
    assert!(rep.min_eig <= 0.05, "min eig {}", rep.min_eig);
    assert!((rep.omega - std::f64::consts::PI).abs() < 0.2);
}

#[test]
fn updc_scales_quadratically() {
    let x = white_noise(5000, 2, 19);
    let a = local_acf(&x, 0.5, 0.3, 5).unwrap();
    let b = local_acf(&(&x * 2.0), 0.5, 0.3, 5).unwrap();
    let om = omega_grid();
    let ra = updc_min_eig(&[a], &om).unwrap();
    let rb = updc_min_eig(&[b], &om).unwrap();
    assert!((rb.min_eig - 4.0 * ra.min_eig).abs() < 1e-12);
}

#[test]
fn white_noise_coefficients_are_small() {
    let mut hits = 0;
    let reps = 200;
    for rep in 0..reps {
        let x = white_noise(4000, 2, 1000 + rep);
        let fit = fit_tvvar(&x, 2, legendre(1)).unwrap();
        assert!(fit.normal_residual <= 1e-8);
        let max_norm = coef_decay_profile(&fit).into_iter().fold(0.0, f64::max);
        if max_norm <= 0.15 {
            hits += 1;
        }
    }
    assert!(hits as f64 >= 0.95 * reps as f64, "{hits}/{reps}");
}

#[test]
fn decay_profile_decreases_for_var1() {
    let phi = DMatrix::from_row_slice(2, 2, &[0.6, 0.2, -0.1, 0.5]);
    let mut first = Vec::new();
    let mut last = Vec::new();
    for rep in 0..100 {
        let e = white_noise(2100, 2, 5000 + rep);
        let mut x = DMatrix::zeros(2100, 2);
        for i in 1..2100 {
            let next = &phi * x.row(i - 1).transpose() + e.row(i).transpose();
            x.set_row(i, &next.transpose());
        }
        let x = x.rows(100, 2000).into_owned();
        let fit = fit_tvvar(&x, 4, legendre(1)).unwrap();
        let prof = coef_decay_profile(&fit);
        first.push(prof[0]);
        last.push(prof[3]);
    }
    let median = |v: &mut Vec<f64>| {
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    };
    assert!(median(&mut last) < median(&mut first));
}
