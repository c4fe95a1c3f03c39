//! Normalized (shifted) Legendre polynomials on [0, 1].

/// Legendre polynomial `P_k(x)` on [-1, 1] by the three-term recurrence
/// `(k+1) P_{k+1} = (2k+1) x P_k - k P_{k-1}`.
pub fn legendre_p(k: usize, x: f64) -> f64 {
    match k {
        0 => 1.0,
        1 => x,
        _ => {
            let mut p0 = 1.0;
            let mut p1 = x;
            for j in 1..k {
                let jf = j as f64;
                let p2 = ((2.0 * jf + 1.0) * x * p1 - jf * p0) / (jf + 1.0);
                p0 = p1;
                p1 = p2;
            }
            p1
        }
    }
}

/// Orthonormal Legendre function `α_k(u) = √(2k+1) P_k(2u - 1)`, with `α_0 ≡ 1`.
pub fn legendre_eval(k: usize, u: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    ((2 * k + 1) as f64).sqrt() * legendre_p(k, 2.0 * u - 1.0)
}
