//! Daubechies scaling functions by the cascade algorithm, and the
//! periodized wavelet families built from them on [0, 1].

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Lowpass filter taps `h_0..h_{2N-1}` of the Daubechies D-N wavelet,
/// normalized so that `Σ h_k = √2`. Available for `N` in `2..=10`.
pub fn daubechies_filter(order: usize) -> Result<&'static [f64]> {
    Ok(match order {
        2 => &DB2,
        3 => &DB3,
        4 => &DB4,
        5 => &DB5,
        6 => &DB6,
        7 => &DB7,
        8 => &DB8,
        9 => &DB9,
        10 => &DB10,
        _ => {
            return Err(Error::InvalidBasis(format!(
                "Daubechies order {order} not tabulated (supported: 2..=10)"
            )))
        }
    })
}

/// Scaling function `φ` and mother wavelet `ψ` of one Daubechies order,
/// tabulated on the dyadic grid `k / 2^depth` over the support `[0, 2N-1]`.
#[derive(Debug, Clone)]
pub struct ScalingFunction {
    filter: Vec<f64>,
    depth: u32,
    /// φ at `k / 2^depth`, `k = 0..=(2N-1)·2^depth`.
    values: Vec<f64>,
}

impl ScalingFunction {
    /// Runs the cascade algorithm: integer-point values from the eigenvector of
    /// the two-scale matrix, then dyadic refinement down to `2^-depth`.
    pub fn cascade(order: usize, depth: u32) -> Result<Self> {
        if depth > 20 {
            return Err(Error::InvalidBasis(format!("cascade depth {depth} too large")));
        }
        let filter = daubechies_filter(order)?.to_vec();
        let support = filter.len() - 1;
        let integer_values = integer_point_values(&filter)?;

        let scale = 1usize << depth;
        let mut values = vec![0.0; support * scale + 1];
        for (k, v) in integer_values.iter().enumerate() {
            values[k * scale] = *v;
        }
        let root2 = std::f64::consts::SQRT_2;
        for level in 1..=depth {
            let step = 1usize << (depth - level);
            // odd multiples of 2^-level
            let mut idx = step;
            while idx < support * scale {
                let mut acc = 0.0;
                for (j, h) in filter.iter().enumerate() {
                    // φ(2x - j) with x = idx / 2^depth
                    let arg = 2 * idx as isize - (j * scale) as isize;
                    if arg >= 0 && (arg as usize) < values.len() {
                        acc += h * values[arg as usize];
                    }
                }
                values[idx] = root2 * acc;
                idx += 2 * step;
            }
        }
        Ok(Self {
            filter,
            depth,
            values,
        })
    }

    pub fn order(&self) -> usize {
        self.filter.len() / 2
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    /// Right end of the support, `2N - 1`.
    pub fn support(&self) -> f64 {
        (self.filter.len() - 1) as f64
    }

    /// Tabulated samples of φ on the dyadic grid.
    pub fn samples(&self) -> &[f64] {
        &self.values
    }

    /// φ(x) by linear interpolation between dyadic samples; zero off the support.
    pub fn phi(&self, x: f64) -> f64 {
        let support = self.support();
        if !(0.0..=support).contains(&x) {
            return 0.0;
        }
        let pos = x * (1u64 << self.depth) as f64;
        let i = pos.floor() as usize;
        if i + 1 >= self.values.len() {
            return self.values[self.values.len() - 1];
        }
        let frac = pos - i as f64;
        self.values[i] * (1.0 - frac) + self.values[i + 1] * frac
    }

    /// ψ(x) = √2 Σ_k g_k φ(2x - k), with `g_k = (-1)^k h_{2N-1-k}`.
    pub fn psi(&self, x: f64) -> f64 {
        let len = self.filter.len();
        let root2 = std::f64::consts::SQRT_2;
        let mut acc = 0.0;
        for k in 0..len {
            let g = if k % 2 == 0 { 1.0 } else { -1.0 } * self.filter[len - 1 - k];
            acc += g * self.phi(2.0 * x - k as f64);
        }
        root2 * acc
    }

    /// Periodized scaling function `2^{j/2} Σ_l φ(2^j x + 2^j l - k)` on [0, 1].
    pub fn periodic_phi(&self, level: u32, k: usize, x: f64) -> f64 {
        self.periodize(level, k, x, |y| self.phi(y))
    }

    /// Periodized wavelet `2^{j/2} Σ_l ψ(2^j x + 2^j l - k)` on [0, 1].
    pub fn periodic_psi(&self, level: u32, k: usize, x: f64) -> f64 {
        self.periodize(level, k, x, |y| self.psi(y))
    }

    fn periodize(&self, level: u32, k: usize, x: f64, f: impl Fn(f64) -> f64) -> f64 {
        let period = (1u64 << level) as f64;
        let base = period * x - k as f64;
        let support = self.support();
        // arguments base + period·l must land in [0, support]
        let l_min = (-base / period).ceil() as i64 - 1;
        let l_max = ((support - base) / period).floor() as i64 + 1;
        let mut acc = 0.0;
        for l in l_min..=l_max {
            acc += f(base + period * l as f64);
        }
        period.sqrt() * acc
    }
}

/// φ(0), φ(1), ..., φ(2N-1): the eigenvector of `M_{km} = √2 h_{2k-m}` at
/// eigenvalue 1, normalized to unit sum.
fn integer_point_values(filter: &[f64]) -> Result<Vec<f64>> {
    let support = filter.len() - 1;
    // interior unknowns φ(1..support-1); φ(0) = φ(support) = 0 for N >= 2
    let m = support - 1;
    let root2 = std::f64::consts::SQRT_2;
    let mut a = DMatrix::<f64>::zeros(m + 1, m);
    for row in 0..m {
        let k = row + 1;
        for col in 0..m {
            let j = col + 1;
            let idx = 2 * k as isize - j as isize;
            if idx >= 0 && (idx as usize) < filter.len() {
                a[(row, col)] = root2 * filter[idx as usize];
            }
        }
        a[(row, row)] -= 1.0;
    }
    for col in 0..m {
        a[(m, col)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(m + 1);
    rhs[m] = 1.0;
    let svd = a.svd(true, true);
    let sol = svd
        .solve(&rhs, 1e-14)
        .map_err(|e| Error::InvalidBasis(format!("cascade eigenproblem failed: {e}")))?;
    let mut out = vec![0.0; support + 1];
    for (i, v) in sol.iter().enumerate() {
        out[i + 1] = *v;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_filter_conditions(h: &[f64]) {
        let even: f64 = h.iter().step_by(2).sum();
        let odd: f64 = h.iter().skip(1).step_by(2).sum();
        let target = std::f64::consts::FRAC_1_SQRT_2;
        assert!((even - target).abs() < 1e-12, "even sum {even}");
        assert!((odd - target).abs() < 1e-12, "odd sum {odd}");
        let n = h.len() / 2;
        for l in 0..n {
            let s: f64 = (2 * l..h.len()).map(|k| h[k] * h[k - 2 * l]).sum();
            let expected = if l == 0 { 1.0 } else { 0.0 };
            assert!((s - expected).abs() < 1e-12, "shift {l}: {s}");
        }
    }

    #[test]
    fn tabulated_filters_satisfy_orthogonality_conditions() {
        for order in 2..=10 {
            check_filter_conditions(daubechies_filter(order).unwrap());
        }
    }

    #[test]
    fn unknown_order_rejected() {
        assert!(daubechies_filter(1).is_err());
        assert!(daubechies_filter(11).is_err());
    }

    #[test]
    fn cascade_partition_of_unity_and_unit_integral() {
        let sf = ScalingFunction::cascade(9, 10).unwrap();
        // Σ_m φ(x - m) = 1 at every dyadic x
        for i in 0..64 {
            let x = i as f64 / 64.0;
            let s: f64 = (0..18).map(|m| sf.phi(x + m as f64)).sum();
            assert!((s - 1.0).abs() < 1e-10, "x={x} sum={s}");
        }
        let h = 1.0 / 1024.0;
        let integral: f64 = sf.samples().iter().sum::<f64>() * h;
        assert!((integral - 1.0).abs() < 1e-9);
    }

    #[test]
    fn d2_integer_values_match_closed_form() {
        // D-2: φ(1) = (1+√3)/2, φ(2) = (1-√3)/2
        let sf = ScalingFunction::cascade(2, 4).unwrap();
        let s3 = 3f64.sqrt();
        assert!((sf.phi(1.0) - (1.0 + s3) / 2.0).abs() < 1e-12);
        assert!((sf.phi(2.0) - (1.0 - s3) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn psi_has_zero_mean() {
        let sf = ScalingFunction::cascade(9, 10).unwrap();
        let h = 1.0 / 1024.0;
        let total: f64 = (0..=17 * 1024).map(|i| sf.psi(i as f64 * h)).sum::<f64>() * h;
        assert!(total.abs() < 1e-6, "∫ψ = {total}");
    }
}

#[allow(clippy::excessive_precision)]
const DB2: [f64; 4] = [
    0.48296291314453416,
    0.8365163037378079,
    0.2241438680420134,
    -0.12940952255126037,
];
#[allow(clippy::excessive_precision)]
const DB3: [f64; 6] = [
    0.33267055295008263,
    0.8068915093110925,
    0.45987750211849154,
    -0.13501102001025458,
    -0.08544127388202666,
    0.03522629188570953,
];
#[allow(clippy::excessive_precision)]
const DB4: [f64; 8] = [
    0.2303778133088965,
    0.7148465705529157,
    0.6308807679298589,
    -0.027983769416859854,
    -0.18703481171909309,
    0.030841381835560764,
    0.0328830116668852,
    -0.010597401785069032,
];
#[allow(clippy::excessive_precision)]
const DB5: [f64; 10] = [
    0.16010239797419293,
    0.6038292697971896,
    0.7243085284377729,
    0.13842814590132074,
    -0.24229488706638203,
    -0.032244869584638375,
    0.07757149384004572,
    -0.006241490212798274,
    -0.012580751999081999,
    0.0033357252854737712,
];
#[allow(clippy::excessive_precision)]
const DB6: [f64; 12] = [
    0.11154074335010947,
    0.49462389039845306,
    0.7511339080210954,
    0.31525035170919763,
    -0.22626469396543983,
    -0.12976686756726194,
    0.09750160558732304,
    0.027522865530305727,
    -0.03158203931748603,
    0.0005538422011614961,
    0.004777257510945511,
    -0.0010773010853084796,
];
#[allow(clippy::excessive_precision)]
const DB7: [f64; 14] = [
    0.07785205408500918,
    0.3965393194819173,
    0.7291320908462351,
    0.4697822874051931,
    -0.14390600392856498,
    -0.22403618499387498,
    0.07130921926683026,
    0.08061260915108308,
    -0.03802993693501441,
    -0.01657454163066688,
    0.01255099855609984,
    0.0004295779729213665,
    -0.0018016407040474908,
    0.00035371379997452024,
];
#[allow(clippy::excessive_precision)]
const DB8: [f64; 16] = [
    0.05441584224310401,
    0.31287159091429995,
    0.6756307362972898,
    0.5853546836542067,
    -0.015829105256349306,
    -0.2840155429615469,
    0.0004724845739132828,
    0.12874742662047847,
    -0.017369301001807547,
    -0.044088253930794755,
    0.013981027917398282,
    0.008746094047405777,
    -0.004870352993451574,
    -0.00039174037337694705,
    0.0006754494064505693,
    -0.00011747678412476953,
];
#[allow(clippy::excessive_precision)]
const DB9: [f64; 18] = [
    0.038077947363878345,
    0.24383467461259034,
    0.6048231236901112,
    0.6572880780513005,
    0.13319738582500756,
    -0.2932737832791749,
    -0.09684078322297646,
    0.14854074933810638,
    0.03072568147933338,
    -0.06763282906132997,
    0.00025094711483145197,
    0.022361662123679096,
    -0.004723204757751397,
    -0.00428150368246343,
    0.0018476468830562265,
    0.00023038576352319597,
    -0.0002519631889427101,
    3.93473203162716e-05,
];
#[allow(clippy::excessive_precision)]
const DB10: [f64; 20] = [
    0.026670057900555554,
    0.1881768000776915,
    0.5272011889317256,
    0.6884590394536035,
    0.2811723436605775,
    -0.24984642432731538,
    -0.19594627437737705,
    0.12736934033579325,
    0.09305736460357235,
    -0.07139414716639708,
    -0.029457536821875813,
    0.033212674059341,
    0.0036065535669561697,
    -0.010733175483330575,
    0.001395351747052901,
    0.001992405295185056,
    -0.0006858566949597116,
    -0.00011646685512928545,
    9.358867032006959e-05,
    -1.3264202894521244e-05,
];
