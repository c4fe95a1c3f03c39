use std::sync::Arc;

use dsieve::basis::{build_basis, legendre_p, BasisSpec, Grid};
use dsieve::bench::{rd, rr};
use dsieve::dgp::{simulate, DgpCase, DgpSpec};
use dsieve::fdata::{
    center, cpv_curve, decompose, finalize_scores, smooth_raw, Bandwidth, FunctionalSeries,
};
use dsieve::par::Execution;
use dsieve::tvvar::{
    aic, build_design, fit_stationary_var, fit_tvvar, forecast_scores, relative_normal_residual,
    select_bc, DesignLayout, TimeBasis, TimeFamily,
};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn noise(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(&mut rng))
}

fn legendre_set(k: usize) -> Arc<dsieve::basis::BasisSet> {
    Arc::new(build_basis(BasisSpec::legendre(k), &Grid::gauss_legendre(32).unwrap()).unwrap())
}

/// Curves `Σ_k c_{ik} α_k` for the coefficient matrix `c` (rows = curves).
fn span_curves(coef: &DMatrix<f64>, basis: &dsieve::basis::BasisSet) -> DMatrix<f64> {
    coef * basis.values().rows(0, coef.ncols())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn legendre_recurrence(k in 1usize..30, x in -1.0f64..1.0) {
        let kf = k as f64;
        let lhs = (kf + 1.0) * legendre_p(k + 1, x);
        let rhs = (2.0 * kf + 1.0) * x * legendre_p(k, x) - kf * legendre_p(k - 1, x);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
    }

    #[test]
    fn cpv_is_monotone_and_ends_at_one(v in proptest::collection::vec(0.0f64..10.0, 1..30)) {
        prop_assume!(v.iter().sum::<f64>() > 0.0);
        let c = cpv_curve(&v);
        prop_assert!(c.windows(2).all(|w| w[1] >= w[0]));
        prop_assert!((c[c.len() - 1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn scaled_scores_have_unit_mean_square(seed in any::<u64>(), n in 5usize..40) {
        let basis = legendre_set(4);
        let coef = noise(n, 4, seed);
        let series = FunctionalSeries::new(span_curves(&coef, &basis), basis.grid().clone()).unwrap();
        let (centered, _) = center(&series);
        let dec = finalize_scores(decompose(&centered, basis, 4).unwrap(), 4, 1e-8).unwrap();
        for col in dec.scaled_scores.column_iter() {
            let ms = col.iter().map(|v| v * v).sum::<f64>() / n as f64;
            prop_assert!((ms - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn span_round_trip_and_truncation_error(seed in any::<u64>(), p in 1usize..6) {
        let k = 6;
        let basis = legendre_set(k);
        let n = 12;
        let coef = noise(n, k, seed);
        let series = FunctionalSeries::new(span_curves(&coef, &basis), basis.grid().clone()).unwrap();
        let (centered, _) = center(&series);
        let dec = decompose(&centered, basis.clone(), k).unwrap();
        let full = finalize_scores(dec.clone(), k, 1e-8).unwrap();
        for i in 0..n {
            let x: Vec<f64> = full.scaled_scores.row(i).iter().copied().collect();
            let back = full.reconstruct(&x).unwrap();
            for (a, b) in back.iter().zip(centered.curves().row(i).iter()) {
                prop_assert!((a - b).abs() < 1e-8);
            }
        }
        let trunc = finalize_scores(dec.clone(), p, 1e-8).unwrap();
        let grid = basis.grid();
        let mut lhs = 0.0;
        let mut rhs = 0.0;
        for i in 0..n {
            let x: Vec<f64> = trunc.scaled_scores.row(i).iter().copied().collect();
            let approx = trunc.reconstruct(&x).unwrap();
            let diff: Vec<f64> = centered.curves().row(i).iter().zip(&approx).map(|(a, b)| (a - b).powi(2)).collect();
            lhs += grid.integrate(&diff).unwrap();
            rhs += (p..k).map(|kk| dec.raw_scores[(i, kk)].powi(2)).sum::<f64>();
        }
        prop_assert!((lhs - rhs).abs() < 1e-8 * (1.0 + rhs));
    }

    #[test]
    fn smoother_reproduces_lines(a in -5.0f64..5.0, b in -5.0f64..5.0, h in 0.08f64..0.5) {
        let raw_grid: Vec<f64> = (0..40).map(|j| j as f64 / 39.0).collect();
        let raw = DMatrix::from_fn(2, 40, |i, j| a + (i as f64 + 1.0) * b * raw_grid[j]);
        let target = Grid::simpson(21).unwrap();
        let out = smooth_raw(&raw, &raw_grid, &target, Bandwidth::Fixed(h), Execution::Sequential).unwrap();
        for (j, &u) in target.points().iter().enumerate() {
            for i in 0..2 {
                let want = a + (i as f64 + 1.0) * b * u;
                prop_assert!((out.series.curves()[(i, j)] - want).abs() < 1e-10 * (1.0 + want.abs()));
            }
        }
    }

    #[test]
    fn normal_equations_and_aic_identity(seed in any::<u64>(), b in 1usize..4, c in 1usize..4, p in 1usize..4) {
        let x = noise(120, p, seed);
        let tb = TimeBasis::new(TimeFamily::Legendre, c);
        let fit = fit_tvvar(&x, b, tb).unwrap();
        let layout = DesignLayout::new(b, c, p, 120).unwrap();
        let (design, targets) = build_design(&x, &layout, &tb).unwrap();
        let res = &targets - &design * &fit.beta_hat;
        prop_assert!(relative_normal_residual(&design, &targets, &res) <= 1e-8);
        prop_assert!(fit.normal_residual <= 1e-8);
        let ll = fit.log_lik.unwrap();
        prop_assert_eq!(fit.aic.unwrap(), aic(&layout, ll));
    }

    #[test]
    fn selection_is_argmin_of_its_table(seed in any::<u64>()) {
        let x = noise(150, 2, seed);
        let sel = select_bc(&x, TimeFamily::Legendre, 3, 3, Execution::Sequential).unwrap();
        let best = sel.table.iter().filter_map(|c| c.aic.map(|a| (a, c.b * c.c, c.b))).fold(None, |acc: Option<(f64, usize, usize)>, t| {
            match acc {
                Some(cur) if (cur.0, cur.1, cur.2) <= (t.0, t.1, t.2) => Some(cur),
                _ => Some(t),
            }
        }).unwrap();
        prop_assert_eq!((sel.b * sel.c, sel.b), (best.1, best.2));
    }

    #[test]
    fn forecast_is_linear_in_history(seed in any::<u64>(), scale in -3.0f64..3.0) {
        let x = noise(100, 2, seed);
        let fit = fit_tvvar(&x, 2, TimeBasis::new(TimeFamily::Legendre, 2)).unwrap();
        let base = forecast_scores(&fit, &x).unwrap();
        let scaled = forecast_scores(&fit, &(&x * scale)).unwrap();
        for (s, v) in scaled.iter().zip(&base) {
            prop_assert!((s - scale * v).abs() <= 1e-12 * (1.0 + v.abs()));
        }
    }

    #[test]
    fn single_time_function_is_a_stationary_var(seed in any::<u64>(), b in 1usize..4) {
        let x = noise(200, 2, seed);
        let tv = fit_tvvar(&x, b, TimeBasis::new(TimeFamily::Legendre, 1)).unwrap();
        let var = fit_stationary_var(&x, b).unwrap();
        for j in 1..=b {
            let gap = (tv.phi_block(j, 1) - &var.coefs[j - 1]).amax();
            prop_assert!(gap <= 1e-10);
        }
    }

    #[test]
    fn metric_identities(x in 0.01f64..10.0, t in 0.0f64..0.009) {
        prop_assert_eq!(rd(x, x).unwrap(), 0.0);
        prop_assert!((rr(x, x, t).unwrap() - 1.0).abs() < 1e-12);
        prop_assert!((rd(x, 2.0 * x).unwrap() - 100.0).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn simulation_is_a_function_of_the_seed(seed in any::<u64>(), case in 0usize..7) {
        let spec = DgpSpec::new(DgpCase::ALL[case], 60, seed).with_dim_k(8);
        let a = simulate(&spec).unwrap();
        let b = simulate(&spec).unwrap();
        prop_assert_eq!(a.scores, b.scores);
        prop_assert_eq!(a.oracle_mean, b.oracle_mean);
    }
}
