//! Innovation laws: Gaussian or multivariate t draws, then a fixed per-component
//! loading and an optional time modulation.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Law of the untransformed draw `e_i`.
#[derive(Debug, Clone, PartialEq)]
pub enum BaseLaw {
    /// `N(0, Σ)`.
    Normal(DMatrix<f64>),
    /// Centered multivariate t: `N(0, scale) / sqrt(χ²_df / df)`, covariance
    /// `df / (df - 2) · scale`.
    StudentT { df: f64, scale: DMatrix<f64> },
}

impl BaseLaw {
    fn matrix(&self) -> &DMatrix<f64> {
        match self {
            BaseLaw::Normal(s) | BaseLaw::StudentT { scale: s, .. } => s,
        }
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        match self {
            BaseLaw::Normal(s) => s.clone(),
            BaseLaw::StudentT { df, scale } => scale * (df / (df - 2.0)),
        }
    }
}

/// Time-dependent common factor on all components.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Modulation {
    None,
    /// `0.4 + 0.5 sin(2πt)`.
    SineBump,
}

impl Modulation {
    pub fn factor(self, t: f64) -> f64 {
        match self {
            Modulation::None => 1.0,
            Modulation::SineBump => 0.4 + 0.5 * (2.0 * std::f64::consts::PI * t).sin(),
        }
    }
}

/// `ε_{i,k} = s · m(t) · loading_k · e_{i,k}`.
#[derive(Debug, Clone)]
pub struct InnovationLaw {
    pub base: BaseLaw,
    pub loadings: Vec<f64>,
    pub modulation: Modulation,
    pub scale: f64,
    chol: DMatrix<f64>,
    chi: Option<ChiSquared<f64>>,
}

impl InnovationLaw {
    pub fn new(base: BaseLaw, loadings: Vec<f64>, modulation: Modulation) -> Result<Self> {
        let m = base.matrix();
        if m.nrows() != loadings.len() || !m.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "{}×{} covariance with {} loadings",
                m.nrows(),
                m.ncols(),
                loadings.len()
            )));
        }
        let chol = m.clone().cholesky().ok_or(Error::NonPdCovariance)?.l();
        let chi = match &base {
            BaseLaw::Normal(_) => None,
            BaseLaw::StudentT { df, .. } => Some(
                ChiSquared::new(*df)
                    .map_err(|e| Error::InvalidParameter(format!("t degrees of freedom: {e}")))?,
            ),
        };
        Ok(Self {
            base,
            loadings,
            modulation,
            scale: 1.0,
            chol,
            chi,
        })
    }

    pub fn scaled(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    pub fn dim(&self) -> usize {
        self.loadings.len()
    }

    /// One transformed draw at rescaled time `t`.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R, t: f64) -> DVector<f64> {
        let k = self.dim();
        let z = DVector::from_fn(k, |_, _| StandardNormal.sample(&mut *rng));
        let mut e = &self.chol * z;
        if let (Some(chi), BaseLaw::StudentT { df, .. }) = (&self.chi, &self.base) {
            let w: f64 = chi.sample(rng);
            e /= (w / df).sqrt();
        }
        let common = self.scale * self.modulation.factor(t);
        for (v, l) in e.iter_mut().zip(&self.loadings) {
            *v *= common * l;
        }
        e
    }

    /// `count` draws, row `r` at time `time_of(r)`.
    pub fn draw_rows<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        count: usize,
        time_of: impl Fn(usize) -> f64,
    ) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(count, self.dim());
        for r in 0..count {
            let e = self.draw(rng, time_of(r));
            out.set_row(r, &e.transpose());
        }
        out
    }

    /// `Cov(ε)` at rescaled time `t`.
    pub fn covariance_at(&self, t: f64) -> DMatrix<f64> {
        let common = self.scale * self.modulation.factor(t);
        let d = DVector::from_iterator(self.dim(), self.loadings.iter().map(|l| common * l));
        let cov = self.base.covariance();
        DMatrix::from_fn(self.dim(), self.dim(), |a, b| d[a] * cov[(a, b)] * d[b])
    }
}

/// `count × K` innovations from `seed`; row `i` (1-based) is drawn at time `i / count`.
pub fn sample_innovations(law: &InnovationLaw, count: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    law.draw_rows(&mut rng, count, |r| (r + 1) as f64 / count as f64)
}
