//! Local autocovariances and the local spectral-density positivity check.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Windowed autocovariances `Γ̂(t, j) = Cov(x_{i+j}, x_i)` for `j = 0..=max_lag`
/// around rescaled time `t`.
#[derive(Debug, Clone)]
pub struct LocalAcf {
    pub t: f64,
    pub half_width: f64,
    pub max_lag: usize,
    pub window_len: usize,
    lags: Vec<DMatrix<f64>>,
}

impl LocalAcf {
    /// `Γ̂(t, j)` for any integer lag with `|j| ≤ max_lag`; negative lags are transposes.
    pub fn gamma(&self, j: i64) -> Option<DMatrix<f64>> {
        let idx = j.unsigned_abs() as usize;
        let g = self.lags.get(idx)?;
        Some(if j < 0 { g.transpose() } else { g.clone() })
    }

    pub fn dim(&self) -> usize {
        self.lags[0].nrows()
    }
}

/// Default lag truncation `⌊m^{1/3}⌋` for a window of `m` points.
pub fn default_max_lag(window_len: usize) -> usize {
    ((window_len as f64).cbrt().floor() as usize).max(1)
}

/// Sample autocovariances of the rows of `x` whose rescaled time `i/n`
/// (1-based `i`) lies within `half_width` of `t`, centered at the window mean.
pub fn local_acf(x: &DMatrix<f64>, t: f64, half_width: f64, max_lag: usize) -> Result<LocalAcf> {
    let (n, p) = x.shape();
    let nf = n as f64;
    let idx: Vec<usize> = (0..n)
        .filter(|&r| ((r + 1) as f64 / nf - t).abs() <= half_width)
        .collect();
    let m = idx.len();
    if m < max_lag + 10 {
        return Err(Error::WindowTooSmall {
            needed: max_lag + 10,
            got: m,
        });
    }
    let start = idx[0];
    let window = x.rows(start, m);
    let mean: Vec<f64> = (0..p).map(|q| window.column(q).sum() / m as f64).collect();
    let centered = DMatrix::from_fn(m, p, |r, q| window[(r, q)] - mean[q]);
    let lags = (0..=max_lag)
        .map(|j| {
            let mut g = DMatrix::<f64>::zeros(p, p);
            for r in 0..m - j {
                let lead = centered.row(r + j);
                let base = centered.row(r);
                for a in 0..p {
                    for b in 0..p {
                        g[(a, b)] += lead[a] * base[b];
                    }
                }
            }
            g / m as f64
        })
        .collect();
    Ok(LocalAcf {
        t,
        half_width,
        max_lag,
        window_len: m,
        lags,
    })
}

/// Smallest eigenvalue of the lag-window spectral estimate over all `(t, ω)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdcReport {
    pub min_eig: f64,
    pub t: f64,
    pub omega: f64,
}

/// Bartlett-window estimate `f̂(t, ω) = (1/2π) Σ_{|h|≤L} (1 - |h|/L) e^{-ihω} Γ̂(t, h)`
/// at every `(acf, ω)` pair, returning where its smallest eigenvalue is attained.
pub fn updc_min_eig(acfs: &[LocalAcf], omegas: &[f64]) -> Result<UpdcReport> {
    if acfs.is_empty() || omegas.is_empty() {
        return Err(Error::InvalidParameter(
            "need at least one local ACF and one frequency".into(),
        ));
    }
    let mut best = UpdcReport {
        min_eig: f64::INFINITY,
        t: f64::NAN,
        omega: f64::NAN,
    };
    for acf in acfs {
        if acf.max_lag < 1 {
            return Err(Error::InvalidParameter("lag coverage must be >= 1".into()));
        }
        for &omega in omegas {
            let e = min_eig_at(acf, omega);
            if e < best.min_eig {
                best = UpdcReport {
                    min_eig: e,
                    t: acf.t,
                    omega,
                };
            }
        }
    }
    Ok(best)
}

fn min_eig_at(acf: &LocalAcf, omega: f64) -> f64 {
    let p = acf.dim();
    let l = acf.max_lag as f64;
    // f = (A + iB) / 2π with A symmetric, B antisymmetric
    let mut re = acf.lags[0].clone();
    let mut im = DMatrix::<f64>::zeros(p, p);
    for h in 1..=acf.max_lag {
        let w = 1.0 - h as f64 / l;
        if w <= 0.0 {
            continue;
        }
        let g = &acf.lags[h];
        let gt = g.transpose();
        let (s, c) = (h as f64 * omega).sin_cos();
        re += (g + &gt) * (w * c);
        im += (&gt - g) * (w * s);
    }
    let re = (&re + re.transpose()) * 0.5;
    let im = (&im - im.transpose()) * 0.5;
    // real symmetric embedding [[A, -B], [B, A]] has the Hermitian spectrum, doubled
    let mut emb = DMatrix::<f64>::zeros(2 * p, 2 * p);
    for a in 0..p {
        for b in 0..p {
            emb[(a, b)] = re[(a, b)];
            emb[(a + p, b + p)] = re[(a, b)];
            emb[(a, b + p)] = -im[(a, b)];
            emb[(a + p, b)] = im[(a, b)];
        }
    }
    let eig = SymmetricEigen::new(emb).eigenvalues;
    eig.min() / (2.0 * std::f64::consts::PI)
}
