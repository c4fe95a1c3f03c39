//! Discretization of [0, 1] with quadrature weights.

use crate::error::{Error, Result};

/// Quadrature rule attached to a [`Grid`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quadrature {
    /// Composite Simpson on a uniform grid with an odd number of points.
    Simpson,
    /// Composite trapezoid on arbitrary ascending points.
    Trapezoid,
    /// Gauss-Legendre nodes mapped to [0, 1].
    GaussLegendre,
}

/// Ascending points in [0, 1] with quadrature weights for the unit-interval measure.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    points: Vec<f64>,
    weights: Vec<f64>,
    rule: Quadrature,
}

const UNIFORM_TOL: f64 = 1e-9;

impl Grid {
    /// Uniform composite-Simpson grid on [0, 1]; `m` must be odd and at least 3.
    pub fn simpson(m: usize) -> Result<Self> {
        if m < 3 || m % 2 == 0 {
            return Err(Error::InvalidGrid(format!(
                "Simpson rule needs an odd number of points >= 3, got {m}"
            )));
        }
        let h = 1.0 / (m - 1) as f64;
        let points = uniform_points(m);
        let weights = (0..m)
            .map(|j| {
                let c = if j == 0 || j == m - 1 {
                    1.0
                } else if j % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                c * h / 3.0
            })
            .collect();
        Ok(Self {
            points,
            weights,
            rule: Quadrature::Simpson,
        })
    }

    /// Uniform grid on [0, 1]: Simpson weights for odd `m`, trapezoid otherwise.
    pub fn uniform(m: usize) -> Result<Self> {
        if m % 2 == 1 && m >= 3 {
            Self::simpson(m)
        } else {
            Self::trapezoid(uniform_points(m))
        }
    }

    /// Composite trapezoid weights on arbitrary ascending points.
    pub fn trapezoid(points: Vec<f64>) -> Result<Self> {
        validate_points(&points)?;
        let m = points.len();
        let mut weights = vec![0.0; m];
        for j in 0..m - 1 {
            let half = 0.5 * (points[j + 1] - points[j]);
            weights[j] += half;
            weights[j + 1] += half;
        }
        Ok(Self {
            points,
            weights,
            rule: Quadrature::Trapezoid,
        })
    }

    /// `m`-point Gauss-Legendre rule on [0, 1]; exact for polynomials of degree < 2m.
    pub fn gauss_legendre(m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidGrid(format!(
                "Gauss-Legendre rule needs at least 2 points, got {m}"
            )));
        }
        let (nodes, w) = gauss_legendre_nodes(m);
        let points = nodes.iter().map(|x| 0.5 * (x + 1.0)).collect();
        let weights = w.iter().map(|w| 0.5 * w).collect();
        Ok(Self {
            points,
            weights,
            rule: Quadrature::GaussLegendre,
        })
    }

    /// Rebuilds a grid from its points alone (e.g. a CSV header): Gauss-Legendre
    /// nodes and uniform odd grids get their exact rules, anything else trapezoid.
    pub fn from_points(points: Vec<f64>) -> Result<Self> {
        validate_points(&points)?;
        let m = points.len();
        if m >= 2 {
            let gl = Self::gauss_legendre(m)?;
            if max_abs_diff(&gl.points, &points) < 1e-12 {
                return Ok(gl);
            }
        }
        if m >= 3 && m % 2 == 1 && max_abs_diff(&uniform_points(m), &points) < UNIFORM_TOL {
            return Self::simpson(m);
        }
        Self::trapezoid(points)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn rule(&self) -> Quadrature {
        self.rule
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Quadrature approximation of the integral of `f` over the grid.
    pub fn integrate(&self, f: &[f64]) -> Result<f64> {
        check_len(self.len(), f.len())?;
        Ok(self.weights.iter().zip(f).map(|(w, v)| w * v).sum())
    }
}

/// Quadrature approximation of `∫ f(u) g(u) du`.
pub fn inner_product(f: &[f64], g: &[f64], grid: &Grid) -> Result<f64> {
    check_len(f.len(), g.len())?;
    check_len(grid.len(), f.len())?;
    Ok(grid
        .weights
        .iter()
        .zip(f.iter().zip(g))
        .map(|(w, (a, b))| w * a * b)
        .sum())
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::LengthMismatch { expected, got });
    }
    Ok(())
}

fn uniform_points(m: usize) -> Vec<f64> {
    if m == 1 {
        return vec![0.0];
    }
    let last = (m - 1) as f64;
    (0..m).map(|j| j as f64 / last).collect()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn validate_points(points: &[f64]) -> Result<()> {
    if points.len() < 2 {
        return Err(Error::InvalidGrid("need at least 2 points".into()));
    }
    if points.iter().any(|p| !p.is_finite()) {
        return Err(Error::InvalidGrid("non-finite grid point".into()));
    }
    if points[0] < 0.0 || points[points.len() - 1] > 1.0 {
        return Err(Error::InvalidGrid("points must lie in [0, 1]".into()));
    }
    if points.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidGrid("points must be strictly increasing".into()));
    }
    Ok(())
}

/// Gauss-Legendre nodes and weights on [-1, 1], ascending, by Newton iteration
/// on `P_m` from Chebyshev-type initial guesses.
fn gauss_legendre_nodes(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    let mf = m as f64;
    for i in 0..m.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (mf + 0.5)).cos();
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(m, x);
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(m, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[m - 1 - i] = x;
        weights[i] = w;
        weights[m - 1 - i] = w;
    }
    if m % 2 == 1 {
        nodes[m / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(m: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 1..m {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0) * x * p1 - kf * p0) / (kf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    let d = m as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}
