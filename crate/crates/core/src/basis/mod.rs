//! Orthonormal basis families on [0, 1] and quadrature on discretized curves.
//!
//! Three families are provided: normalized Legendre polynomials, the real
//! Fourier basis, and periodized Daubechies wavelets. The wavelet family comes
//! in two forms: the father-only form `{φ_{J k}, 0 ≤ k < 2^J}` and the mixed
//! form `{φ_{J0 k}} ∪ {ψ_{j k}, J0 ≤ j < J}`. Both contain `2^J` functions.

mod grid;
mod legendre;
mod wavelet;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DMatrix;

pub use grid::{inner_product, Grid, Quadrature};
pub use legendre::{legendre_eval, legendre_p};
pub use wavelet::{daubechies_filter, ScalingFunction};

use crate::error::{Error, Result};

/// Default cascade refinement level (4096 dyadic points per unit).
pub const DEFAULT_CASCADE_DEPTH: u32 = 12;

/// Gram-defect tolerance for Legendre and Fourier families.
pub const POLY_GRAM_TOL: f64 = 1e-8;
/// Gram-defect tolerance for cascade-evaluated wavelets.
pub const WAVELET_GRAM_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Legendre,
    Fourier,
    Daubechies,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Legendre => "legendre",
            Family::Fourier => "fourier",
            Family::Daubechies => "daubechies",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "legendre" => Ok(Family::Legendre),
            "fourier" => Ok(Family::Fourier),
            "daubechies" | "wavelet" | "d9" => Ok(Family::Daubechies),
            other => Err(Error::Parse(format!("unknown basis family '{other}'"))),
        }
    }
}

/// Which periodized wavelet family to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WaveletForm {
    /// Coarse scaling functions plus wavelets at finer levels.
    Mixed,
    /// Scaling functions at the finest level only.
    Father,
}

impl WaveletForm {
    pub fn name(self) -> &'static str {
        match self {
            WaveletForm::Mixed => "mixed",
            WaveletForm::Father => "father",
        }
    }
}

impl FromStr for WaveletForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mixed" => Ok(WaveletForm::Mixed),
            "father" => Ok(WaveletForm::Father),
            other => Err(Error::Parse(format!("unknown wavelet form '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BasisSpec {
    pub family: Family,
    pub count: usize,
    /// Daubechies order N (only read for the wavelet family).
    pub wavelet_order: usize,
    pub wavelet_form: WaveletForm,
    pub cascade_depth: u32,
    /// Coarsest level J0 of the mixed wavelet form.
    pub coarse_level: u32,
}

impl BasisSpec {
    pub fn legendre(count: usize) -> Self {
        Self {
            family: Family::Legendre,
            count,
            wavelet_order: 9,
            wavelet_form: WaveletForm::Father,
            cascade_depth: DEFAULT_CASCADE_DEPTH,
            coarse_level: 0,
        }
    }

    pub fn fourier(count: usize) -> Self {
        Self {
            family: Family::Fourier,
            ..Self::legendre(count)
        }
    }

    /// Periodized father family of D-`order` with `count = 2^J` functions.
    pub fn daubechies_father(order: usize, count: usize) -> Self {
        Self {
            family: Family::Daubechies,
            wavelet_order: order,
            wavelet_form: WaveletForm::Father,
            ..Self::legendre(count)
        }
    }

    /// Mixed family: `2^{J0}` scaling functions plus wavelets up to level `J - 1`.
    pub fn daubechies_mixed(order: usize, count: usize, coarse_level: u32) -> Self {
        Self {
            family: Family::Daubechies,
            wavelet_order: order,
            wavelet_form: WaveletForm::Mixed,
            coarse_level,
            ..Self::legendre(count)
        }
    }

    pub fn with_cascade_depth(mut self, depth: u32) -> Self {
        self.cascade_depth = depth;
        self
    }

    /// Gram-defect tolerance applied by [`build_basis`].
    pub fn gram_tolerance(&self) -> f64 {
        match self.family {
            Family::Legendre | Family::Fourier => POLY_GRAM_TOL,
            Family::Daubechies => WAVELET_GRAM_TOL,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::InvalidBasis("count must be positive".into()));
        }
        match self.family {
            Family::Legendre => Ok(()),
            Family::Fourier => {
                if self.count % 2 == 0 {
                    Err(Error::InvalidBasis(format!(
                        "Fourier count must be odd, got {}",
                        self.count
                    )))
                } else {
                    Ok(())
                }
            }
            Family::Daubechies => {
                daubechies_filter(self.wavelet_order)?;
                if !self.count.is_power_of_two() {
                    return Err(Error::InvalidBasis(format!(
                        "wavelet count must be a power of two, got {}",
                        self.count
                    )));
                }
                if self.wavelet_form == WaveletForm::Mixed
                    && (1usize << self.coarse_level) > self.count
                {
                    return Err(Error::InvalidBasis(format!(
                        "coarse level {} exceeds finest level of {} functions",
                        self.coarse_level, self.count
                    )));
                }
                Ok(())
            }
        }
    }

    fn finest_level(&self) -> u32 {
        self.count.trailing_zeros()
    }
}

/// Evaluator for one basis family at arbitrary points of [0, 1].
#[derive(Debug, Clone)]
enum Evaluator {
    Legendre,
    Fourier,
    Wavelet(Arc<ScalingFunction>),
}

/// One orthonormal family sampled on a grid.
#[derive(Debug, Clone)]
pub struct BasisSet {
    spec: BasisSpec,
    grid: Grid,
    /// `count × m`: row k holds α_k on the grid.
    values: DMatrix<f64>,
    gram_defect: f64,
    evaluator: Evaluator,
}

/// Builds and validates a basis on `grid`, failing with [`Error::GramDefect`]
/// when the quadrature Gram matrix is not close enough to the identity.
pub fn build_basis(spec: BasisSpec, grid: &Grid) -> Result<BasisSet> {
    let set = BasisSet::unchecked(spec, grid)?;
    let tolerance = spec.gram_tolerance();
    if set.gram_defect > tolerance {
        return Err(Error::GramDefect {
            defect: set.gram_defect,
            tolerance,
        });
    }
    Ok(set)
}

impl BasisSet {
    /// Builds the basis and records its Gram defect without enforcing a tolerance.
    pub fn unchecked(spec: BasisSpec, grid: &Grid) -> Result<Self> {
        spec.validate()?;
        let evaluator = match spec.family {
            Family::Legendre => Evaluator::Legendre,
            Family::Fourier => Evaluator::Fourier,
            Family::Daubechies => Evaluator::Wavelet(Arc::new(ScalingFunction::cascade(
                spec.wavelet_order,
                spec.cascade_depth,
            )?)),
        };
        let m = grid.len();
        let mut values = DMatrix::<f64>::zeros(spec.count, m);
        for k in 0..spec.count {
            for (j, &u) in grid.points().iter().enumerate() {
                values[(k, j)] = eval_with(&spec, &evaluator, k, u);
            }
        }
        let mut set = Self {
            spec,
            grid: grid.clone(),
            values,
            gram_defect: 0.0,
            evaluator,
        };
        set.gram_defect = set.compute_gram_defect();
        Ok(set)
    }

    pub fn spec(&self) -> &BasisSpec {
        &self.spec
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn count(&self) -> usize {
        self.spec.count
    }

    /// `count × m` matrix of basis values on the grid.
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// Samples of α_k on the grid.
    pub fn row(&self, k: usize) -> Vec<f64> {
        self.values.row(k).iter().copied().collect()
    }

    pub fn gram_defect(&self) -> f64 {
        self.gram_defect
    }

    /// Quadrature Gram matrix `V · diag(w) · Vᵀ`.
    pub fn gram(&self) -> DMatrix<f64> {
        let weighted = self.weighted_values();
        &self.values * weighted.transpose()
    }

    /// `V · diag(w)`: row k holds `α_k(u_j) w_j`, so `Y · (V diag(w))ᵀ` gives
    /// all quadrature inner products at once.
    pub fn weighted_values(&self) -> DMatrix<f64> {
        let mut out = self.values.clone();
        for (j, w) in self.grid.weights().iter().enumerate() {
            out.column_mut(j).scale_mut(*w);
        }
        out
    }

    /// α_k at an arbitrary point u ∈ [0, 1] (0-based k).
    pub fn eval(&self, k: usize, u: f64) -> f64 {
        eval_with(&self.spec, &self.evaluator, k, u)
    }

    /// Values of all functions at the given points: `count × points.len()`.
    pub fn eval_matrix(&self, points: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.count(), points.len(), |k, j| self.eval(k, points[j]))
    }

    fn compute_gram_defect(&self) -> f64 {
        let g = self.gram();
        let mut defect: f64 = 0.0;
        for i in 0..g.nrows() {
            for j in 0..g.ncols() {
                let target = if i == j { 1.0 } else { 0.0 };
                defect = defect.max((g[(i, j)] - target).abs());
            }
        }
        defect
    }
}

fn eval_with(spec: &BasisSpec, evaluator: &Evaluator, k: usize, u: f64) -> f64 {
    match evaluator {
        Evaluator::Legendre => legendre_eval(k, u),
        Evaluator::Fourier => fourier_eval(k, u),
        Evaluator::Wavelet(sf) => match spec.wavelet_form {
            WaveletForm::Father => sf.periodic_phi(spec.finest_level(), k, u),
            WaveletForm::Mixed => {
                let coarse = 1usize << spec.coarse_level;
                if k < coarse {
                    sf.periodic_phi(spec.coarse_level, k, u)
                } else {
                    // ψ_{j, l} for j >= J0 occupy indices 2^j..2^{j+1}
                    let level = usize::BITS - 1 - k.leading_zeros();
                    let shift = k - (1usize << level);
                    sf.periodic_psi(level, shift, u)
                }
            }
        },
    }
}

/// Real Fourier basis: 1, √2 cos(2πu), √2 sin(2πu), √2 cos(4πu), ...
pub fn fourier_eval(k: usize, u: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let freq = k.div_ceil(2) as f64;
    let arg = 2.0 * std::f64::consts::PI * freq * u;
    if k % 2 == 1 {
        std::f64::consts::SQRT_2 * arg.cos()
    } else {
        std::f64::consts::SQRT_2 * arg.sin()
    }
}
