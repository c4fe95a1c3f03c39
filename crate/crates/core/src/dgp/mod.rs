//! Score-level simulation models for Monte Carlo forecasting experiments.
//!
//! Each case drives the basis coefficients `r_i` of the curves
//! `Y_i(u) = Σ_k r_{i,k} α_k(u)`. Every step is written as
//! `r_i = m_i + ε_i` (or `Σ_i^{1/2} ε_i` for the BEKK case), where `m_i` is the
//! conditional mean given the past, so the oracle one-step forecast is
//! available alongside the path.
//!
//! Seeding: a path uses `ChaCha8Rng::seed_from_u64(seed)` on stream 0.
//! Monte Carlo replication `rep` uses the same seed on stream `rep`, see
//! [`rep_rng`].

mod innovations;

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use innovations::{sample_innovations, BaseLaw, InnovationLaw, Modulation};

use crate::basis::{BasisSet, BasisSpec, Grid};
use crate::error::{Error, Result};
use crate::par::{map_indexed, Execution};

/// Component truncation for the infinite-dimensional MA cases.
pub const DEFAULT_DIM_K: usize = 50;
/// Recursive models start from zero and discard this many steps.
pub const DEFAULT_BURN_IN: usize = 200;
/// Any score beyond this magnitude aborts the path.
pub const EXPLOSION_BOUND: f64 = 1e8;
/// Gauss-Legendre nodes used to render Legendre-based cases.
pub const LEGENDRE_RENDER_NODES: usize = 128;
/// Simpson points used to render wavelet-based cases.
pub const WAVELET_RENDER_POINTS: usize = 1025;
/// Number of periodized D-9 father functions used to render wavelet cases.
pub const WAVELET_RENDER_COUNT: usize = 8;

/// The seven simulation models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DgpCase {
    Ma1Stat,
    Ar2Stat,
    BlStat,
    BekkStat,
    Ma1Ls,
    TvArma,
    TvTar,
}

impl DgpCase {
    pub const ALL: [DgpCase; 7] = [
        DgpCase::Ma1Stat,
        DgpCase::Ar2Stat,
        DgpCase::BlStat,
        DgpCase::BekkStat,
        DgpCase::Ma1Ls,
        DgpCase::TvArma,
        DgpCase::TvTar,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DgpCase::Ma1Stat => "ma1_stat",
            DgpCase::Ar2Stat => "ar2_stat",
            DgpCase::BlStat => "bl_stat",
            DgpCase::BekkStat => "bekk_stat",
            DgpCase::Ma1Ls => "ma1_ls",
            DgpCase::TvArma => "tvarma",
            DgpCase::TvTar => "tvtar",
        }
    }

    /// Whether the score vector is the truncated infinite MA(1) of dimension `dim_k`.
    pub fn is_moving_average(self) -> bool {
        matches!(self, DgpCase::Ma1Stat | DgpCase::Ma1Ls)
    }

    pub fn is_stationary(self) -> bool {
        matches!(
            self,
            DgpCase::Ma1Stat | DgpCase::Ar2Stat | DgpCase::BlStat | DgpCase::BekkStat
        )
    }

    /// Wavelet-rendered cases; the rest use normalized Legendre polynomials.
    pub fn uses_wavelets(self) -> bool {
        matches!(self, DgpCase::BekkStat | DgpCase::TvTar)
    }
}

impl fmt::Display for DgpCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DgpCase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DgpCase::ALL
            .iter()
            .copied()
            .find(|c| c.name() == s.to_ascii_lowercase())
            .ok_or_else(|| {
                let names: Vec<_> = DgpCase::ALL.iter().map(|c| c.name()).collect();
                Error::Parse(format!(
                    "unknown case '{s}' (expected one of {})",
                    names.join(", ")
                ))
            })
    }
}

/// Which off-diagonal entries of the MA loading `A_1` carry `a/3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum A1Band {
    /// Only the first sub- and super-diagonal (tridiagonal `A_1`).
    #[default]
    Adjacent,
    /// Every off-diagonal entry.
    Dense,
}

impl FromStr for A1Band {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "adjacent" | "tridiagonal" => Ok(A1Band::Adjacent),
            "dense" => Ok(A1Band::Dense),
            other => Err(Error::Parse(format!("unknown A1 band '{other}'"))),
        }
    }
}

/// A fully specified simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct DgpSpec {
    pub case: DgpCase,
    /// Dependence parameter of the MA cases.
    pub a: f64,
    /// Number of observed curves; the path has `n + 1` rows.
    pub n: usize,
    /// Component truncation for the MA cases (ignored by the bivariate cases).
    pub dim_k: usize,
    pub a1_band: A1Band,
    pub burn_in: usize,
    /// Multiplies every innovation; 0 gives a deterministic (all-zero) path.
    pub noise_scale: f64,
    pub seed: u64,
}

impl DgpSpec {
    pub fn new(case: DgpCase, n: usize, seed: u64) -> Self {
        Self {
            case,
            a: 0.5,
            n,
            dim_k: DEFAULT_DIM_K,
            a1_band: A1Band::default(),
            burn_in: DEFAULT_BURN_IN,
            noise_scale: 1.0,
            seed,
        }
    }

    pub fn with_a(mut self, a: f64) -> Self {
        self.a = a;
        self
    }

    pub fn with_dim_k(mut self, dim_k: usize) -> Self {
        self.dim_k = dim_k;
        self
    }

    /// Score dimension `K`.
    pub fn dim(&self) -> usize {
        if self.case.is_moving_average() {
            self.dim_k
        } else {
            2
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidParameter(format!(
                "need n >= 2, got {}",
                self.n
            )));
        }
        if self.case.is_moving_average() && self.dim_k < 4 {
            return Err(Error::InvalidParameter(format!(
                "MA cases need dim_k >= 4, got {}",
                self.dim_k
            )));
        }
        if !self.a.is_finite() || !self.noise_scale.is_finite() || self.noise_scale < 0.0 {
            return Err(Error::InvalidParameter(
                "a and noise_scale must be finite, noise_scale >= 0".into(),
            ));
        }
        Ok(())
    }

    /// Innovation law of the case.
    pub fn innovation_law(&self) -> InnovationLaw {
        let sigma2 = DMatrix::from_row_slice(2, 2, &[1.0, 0.4, 0.4, 1.0]);
        let law = match self.case {
            DgpCase::Ma1Stat | DgpCase::Ma1Ls => {
                let k = self.dim_k;
                let sigma1 = DMatrix::from_fn(k, k, |r, c| if r == c { 1.0 } else { 0.4 });
                let loadings = (1..=k)
                    .map(|j| match j {
                        1 => 1.0,
                        2 => 0.8,
                        3 => -0.5,
                        _ => (j as f64).powi(-2),
                    })
                    .collect();
                InnovationLaw::new(BaseLaw::Normal(sigma1), loadings, Modulation::None)
            }
            DgpCase::Ar2Stat => InnovationLaw::new(
                BaseLaw::StudentT { df: 6.0, scale: sigma2 },
                vec![1.0, 0.5],
                Modulation::None,
            ),
            DgpCase::TvArma => InnovationLaw::new(
                BaseLaw::StudentT { df: 6.0, scale: sigma2 },
                vec![1.0, 0.8],
                Modulation::SineBump,
            ),
            DgpCase::BekkStat | DgpCase::TvTar => {
                InnovationLaw::new(BaseLaw::Normal(sigma2), vec![1.0, 0.8], Modulation::None)
            }
            DgpCase::BlStat => InnovationLaw::new(
                BaseLaw::Normal(DMatrix::from_diagonal_element(2, 2, 0.2)),
                vec![1.0, 0.8],
                Modulation::None,
            ),
        };
        law.expect("case laws are positive definite")
            .scaled(self.noise_scale)
    }

    /// Basis used to turn scores into curves.
    pub fn rendering_basis(&self) -> BasisSpec {
        if self.case.uses_wavelets() {
            BasisSpec::daubechies_father(9, WAVELET_RENDER_COUNT)
        } else {
            BasisSpec::legendre(self.dim())
        }
    }

    /// Quadrature grid matched to [`rendering_basis`](Self::rendering_basis).
    pub fn rendering_grid(&self) -> Grid {
        if self.case.uses_wavelets() {
            Grid::simpson(WAVELET_RENDER_POINTS).expect("odd point count")
        } else {
            Grid::gauss_legendre(LEGENDRE_RENDER_NODES).expect("positive node count")
        }
    }
}

/// RNG of Monte Carlo replication `rep` under a master seed.
pub fn rep_rng(seed: u64, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    rng
}

/// A simulated score path with its one-step oracle.
#[derive(Debug, Clone)]
pub struct SimOutput {
    pub case: DgpCase,
    /// `(n+1) × K`; the last row is the held-out `r_{n+1}`.
    pub scores: DMatrix<f64>,
    /// `(n+1) × K` innovations `ε_1..ε_{n+1}` after the per-case transformation.
    pub innovations: DMatrix<f64>,
    /// `E[r_{n+1} | past]` under the true model.
    pub oracle_mean: Vec<f64>,
}

impl SimOutput {
    pub fn n(&self) -> usize {
        self.scores.nrows() - 1
    }

    pub fn dim(&self) -> usize {
        self.scores.ncols()
    }

    /// The held-out score vector `r_{n+1}`.
    pub fn target(&self) -> Vec<f64> {
        self.scores.row(self.n()).iter().copied().collect()
    }

    /// `r_{n+1} − oracle_mean`.
    pub fn oracle_residual(&self) -> Vec<f64> {
        self.target()
            .iter()
            .zip(&self.oracle_mean)
            .map(|(r, m)| r - m)
            .collect()
    }

    /// Curves `Σ_k r_{i,k} α_k` on the basis grid for every row of the path.
    pub fn render(&self, basis: &BasisSet) -> Result<DMatrix<f64>> {
        render_scores(&self.scores, basis)
    }
}

/// `scores · V` using the first `scores.ncols()` basis functions.
pub fn render_scores(scores: &DMatrix<f64>, basis: &BasisSet) -> Result<DMatrix<f64>> {
    let k = scores.ncols();
    if k > basis.count() {
        return Err(Error::DimensionMismatch(format!(
            "{k} score components but the basis has {}",
            basis.count()
        )));
    }
    Ok(scores * basis.values().rows(0, k))
}

/// Simulates `spec` from its own seed.
pub fn simulate(spec: &DgpSpec) -> Result<SimOutput> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    simulate_with_rng(spec, &mut rng)
}

/// Draws the innovations for a path (burn-in first, at frozen time `1/n`) and runs it.
pub fn simulate_with_rng(spec: &DgpSpec, rng: &mut ChaCha8Rng) -> Result<SimOutput> {
    spec.validate()?;
    let law = spec.innovation_law();
    let burn = law.draw_rows(rng, spec.burn_in, |_| 1.0 / spec.n as f64);
    let eps = law.draw_rows(rng, spec.n + 1, |r| (r + 1) as f64 / spec.n as f64);
    run_path(spec, &burn, &eps)
}

/// Runs the recursion on given innovations: `burn` rows at frozen time `1/n`,
/// then `eps` rows `ε_1..ε_{n+1}` at times `i/n`.
pub fn run_path(spec: &DgpSpec, burn: &DMatrix<f64>, eps: &DMatrix<f64>) -> Result<SimOutput> {
    spec.validate()?;
    let k = spec.dim();
    let n = spec.n;
    if eps.nrows() != n + 1 || eps.ncols() != k || (burn.nrows() > 0 && burn.ncols() != k) {
        return Err(Error::DimensionMismatch(format!(
            "innovations {}×{} (burn-in {}×{}) for n = {n}, K = {k}",
            eps.nrows(),
            eps.ncols(),
            burn.nrows(),
            burn.ncols()
        )));
    }
    let model = Model::new(spec);
    let mut state = State::zeros(k);
    let t0 = 1.0 / n as f64;
    for r in 0..burn.nrows() {
        let e = burn.row(r).transpose();
        let (_, next) = model.step(&state, &e, t0)?;
        state.push(next, e);
    }
    let mut scores = DMatrix::zeros(n + 1, k);
    let mut oracle_mean = DVector::zeros(k);
    for r in 0..=n {
        let t = (r + 1) as f64 / n as f64;
        let e = eps.row(r).transpose();
        let (mean, next) = model.step(&state, &e, t)?;
        if next.iter().any(|v| !(v.abs() <= EXPLOSION_BOUND)) {
            return Err(Error::ExplosivePath { step: r + 1 });
        }
        scores.set_row(r, &next.transpose());
        if r == n {
            oracle_mean = mean;
        }
        state.push(next, e);
    }
    Ok(SimOutput {
        case: spec.case,
        scores,
        innovations: eps.clone(),
        oracle_mean: oracle_mean.iter().copied().collect(),
    })
}

struct State {
    r1: DVector<f64>,
    r2: DVector<f64>,
    e1: DVector<f64>,
}

impl State {
    fn zeros(k: usize) -> Self {
        Self {
            r1: DVector::zeros(k),
            r2: DVector::zeros(k),
            e1: DVector::zeros(k),
        }
    }

    fn push(&mut self, r: DVector<f64>, e: DVector<f64>) {
        self.r2 = std::mem::replace(&mut self.r1, r);
        self.e1 = e;
    }
}

fn m2(values: [f64; 4]) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &values)
}

enum Model {
    Ma { a: f64, band: A1Band, time_varying: bool },
    Ar2 { phi1: DMatrix<f64>, phi2: DMatrix<f64> },
    Bilinear { a: DMatrix<f64>, b: DMatrix<f64> },
    Bekk { c: DMatrix<f64>, d: DMatrix<f64> },
    TvArma { phi: DMatrix<f64>, theta: DMatrix<f64> },
    TvTar { psi1: DMatrix<f64>, psi2: DMatrix<f64> },
}

impl Model {
    fn new(spec: &DgpSpec) -> Self {
        match spec.case {
            DgpCase::Ma1Stat | DgpCase::Ma1Ls => Model::Ma {
                a: spec.a,
                band: spec.a1_band,
                time_varying: spec.case == DgpCase::Ma1Ls,
            },
            DgpCase::Ar2Stat => Model::Ar2 {
                phi1: m2([0.5, 0.2, -0.2, -0.5]),
                phi2: m2([-0.3, -0.7, -0.1, 0.3]),
            },
            DgpCase::BlStat => Model::Bilinear {
                a: m2([-0.3, 0.3, 0.4, 0.5]),
                b: DMatrix::from_row_slice(2, 4, &[0.4, -0.5, 0.4, -0.5, 0.3, 0.4, 0.3, 0.4]),
            },
            DgpCase::BekkStat => Model::Bekk {
                c: m2([0.5, 0.2, 0.2, 0.4]),
                d: m2([0.4, 0.0, 0.0, 0.3]),
            },
            DgpCase::TvArma => Model::TvArma {
                phi: m2([0.2, 0.0, 0.0, 0.5]),
                theta: m2([0.4, 0.5, -0.6, 0.7]),
            },
            DgpCase::TvTar => Model::TvTar {
                psi1: m2([0.5, 0.2, -0.2, 0.5]),
                psi2: m2([-0.3, -0.7, -0.1, 0.3]),
            },
        }
    }

    /// Conditional mean and new score at rescaled time `t` given innovation `e`.
    fn step(&self, s: &State, e: &DVector<f64>, t: f64) -> Result<(DVector<f64>, DVector<f64>)> {
        let mean = match self {
            Model::Ma { a, band, time_varying } => {
                let scale = if *time_varying { a * (2.0 * t - 1.0) } else { *a };
                apply_a1(&s.e1, scale, *band)
            }
            Model::Ar2 { phi1, phi2 } => phi1 * &s.r1 + phi2 * &s.r2,
            Model::Bilinear { a, b } => {
                let (r, e1) = (&s.r1, &s.e1);
                // column-major vec(r e1ᵀ)
                let v = DVector::from_column_slice(&[r[0] * e1[0], r[1] * e1[0], r[0] * e1[1], r[1] * e1[1]]);
                a * r + b * v
            }
            Model::Bekk { c, d } => {
                let cr = c * &s.r1;
                let sigma = d + &cr * cr.transpose();
                let root = psd_sqrt(&sigma)?;
                return Ok((DVector::zeros(2), root * e));
            }
            Model::TvArma { phi, theta } => {
                let ar = 0.5 + 2.0 * (t - 0.5).powi(2);
                let ma = (2.0 * std::f64::consts::PI * t).cos();
                phi * &s.r1 * ar + theta * &s.e1 * ma
            }
            Model::TvTar { psi1, psi2 } => {
                let pi_t = std::f64::consts::PI * t;
                if s.r1[0] >= 0.0 {
                    psi1 * &s.r1 * pi_t.sin()
                } else {
                    psi2 * &s.r1 * -pi_t.cos()
                }
            }
        };
        let next = &mean + e;
        Ok((mean, next))
    }
}

/// `A v` for `A = scale · A_1`, with `A_1` holding 1 on the diagonal and 1/3 on
/// the off-diagonal band.
fn apply_a1(v: &DVector<f64>, scale: f64, band: A1Band) -> DVector<f64> {
    let k = v.len();
    let third = scale / 3.0;
    match band {
        A1Band::Adjacent => DVector::from_fn(k, |i, _| {
            let mut acc = scale * v[i];
            if i > 0 {
                acc += third * v[i - 1];
            }
            if i + 1 < k {
                acc += third * v[i + 1];
            }
            acc
        }),
        A1Band::Dense => {
            let total: f64 = v.sum();
            DVector::from_fn(k, |i, _| scale * v[i] + third * (total - v[i]))
        }
    }
}

/// The `K × K` matrix `a · A_1`.
pub fn a1_matrix(k: usize, a: f64, band: A1Band) -> DMatrix<f64> {
    DMatrix::from_fn(k, k, |r, c| {
        if r == c {
            a
        } else if band == A1Band::Dense || r.abs_diff(c) == 1 {
            a / 3.0
        } else {
            0.0
        }
    })
}

/// Symmetric square root of a positive semi-definite matrix.
pub fn psd_sqrt(sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(sigma.clone());
    let floor = -1e-12 * sigma.trace().abs().max(1.0);
    if eig.eigenvalues.iter().any(|l| *l < floor || !l.is_finite()) {
        return Err(Error::NonPdCovariance);
    }
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let v = &eig.eigenvectors;
    Ok(v * DMatrix::from_diagonal(&roots) * v.transpose())
}

/// Monte Carlo estimate of `E‖r_{n+1} − oracle_mean‖²`, the curve-level MSE of
/// the oracle forecast under an orthonormal basis.
pub fn oracle_mse(spec: &DgpSpec, reps: usize, seed: u64) -> Result<f64> {
    oracle_mse_with(spec, reps, seed, Execution::default())
}

/// [`oracle_mse`] with an explicit execution mode.
///
/// Outside the BEKK case the oracle residual is exactly the final innovation
/// `ε_{n+1}`, so only that draw is simulated. BEKK runs full paths.
pub fn oracle_mse_with(spec: &DgpSpec, reps: usize, seed: u64, mode: Execution) -> Result<f64> {
    spec.validate()?;
    if reps < 1000 {
        return Err(Error::InvalidParameter(format!(
            "oracle MSE needs at least 1000 reps, got {reps}"
        )));
    }
    let law = spec.innovation_law();
    let t_next = (spec.n + 1) as f64 / spec.n as f64;
    let sq = map_indexed(mode, reps, |rep| -> Result<f64> {
        let mut rng = rep_rng(seed, rep as u64);
        if spec.case == DgpCase::BekkStat {
            let out = simulate_with_rng(spec, &mut rng)?;
            Ok(out.oracle_residual().iter().map(|v| v * v).sum())
        } else {
            Ok(law.draw(&mut rng, t_next).iter().map(|v| v * v).sum())
        }
    });
    let mut total = 0.0;
    for s in sq {
        total += s?;
    }
    Ok(total / reps as f64)
}

/// `trace Cov(ε_{n+1})`, the closed-form oracle MSE for additive-noise cases.
pub fn analytic_oracle_mse(spec: &DgpSpec) -> Option<f64> {
    if spec.case == DgpCase::BekkStat {
        return None;
    }
    let t_next = (spec.n + 1) as f64 / spec.n as f64;
    Some(spec.innovation_law().covariance_at(t_next).trace())
}
