//! Spherical Bessel function `j_1` and its derivatives at complex argument.

use num_complex::Complex64;

use crate::scaled::ScaledComplex;

/// Below this modulus the Maclaurin series is used instead of the closed form.
const SERIES_RADIUS: f64 = 0.5;
const SERIES_TERMS: usize = 14;

/// `sin t` and `cos t` as scaled values; safe for any `|Im t|`.
pub fn sin_cos_scaled(t: Complex64) -> (ScaledComplex, ScaledComplex) {
    let (s, c, log) = sin_cos_mantissas(t);
    (ScaledComplex::from_log(s, log), ScaledComplex::from_log(c, log))
}

/// `sin t = S e^L`, `cos t = C e^L` with `L = |Im t|`.
fn sin_cos_mantissas(t: Complex64) -> (Complex64, Complex64, f64) {
    let (a, b) = (t.re, t.im);
    let e = (-2.0 * b.abs()).exp();
    let ch = 0.5 * (1.0 + e);
    let sh = 0.5 * (1.0 - e) * b.signum();
    let (sa, ca) = a.sin_cos();
    (
        Complex64::new(sa * ch, ca * sh),
        Complex64::new(ca * ch, -sa * sh),
        b.abs(),
    )
}

/// `(j1, j1', j1'')` at `t`.
pub fn j1_all(t: Complex64) -> [ScaledComplex; 3] {
    if t.norm() < SERIES_RADIUS {
        let [a, b, c] = j1_series(t);
        return [a.into(), b.into(), c.into()];
    }
    let (s, c, log) = sin_cos_mantissas(t);
    let inv = 1.0 / t;
    let inv2 = inv * inv;
    let j = s * inv2 - c * inv;
    let dj = 2.0 * c * inv2 + (inv - 2.0 * inv2 * inv) * s;
    let ddj = -2.0 * inv * dj - (1.0 - 2.0 * inv2) * j;
    [
        ScaledComplex::from_log(j, log),
        ScaledComplex::from_log(dj, log),
        ScaledComplex::from_log(ddj, log),
    ]
}

/// `(j1(t), j1'(t))`.
pub fn bessel_j1(t: Complex64) -> (ScaledComplex, ScaledComplex) {
    let [j, dj, _] = j1_all(t);
    (j, dj)
}

/// Maclaurin series `j1(t) = t sum_m (-t^2/2)^m / (m! (2m+3)!!)` and its termwise derivatives.
pub fn j1_series(t: Complex64) -> [Complex64; 3] {
    let t2 = t * t;
    let mut coeff = 1.0 / 3.0; // (-1/2)^m / (m! (2m+3)!!)
    let mut pow = Complex64::new(1.0, 0.0); // t^{2m}
    let mut j = Complex64::new(0.0, 0.0);
    let mut dj = Complex64::new(0.0, 0.0);
    let mut ddj = Complex64::new(0.0, 0.0);
    for m in 0..SERIES_TERMS {
        let mf = m as f64;
        // d/dt t^{2m+1} = (2m+1) t^{2m};  d2/dt2 = (2m+1)(2m) t^{2m-1}
        j += coeff * pow * t;
        dj += coeff * (2.0 * mf + 1.0) * pow;
        if m > 0 {
            ddj += coeff * (2.0 * mf + 1.0) * (2.0 * mf) * pow / t;
        }
        pow *= t2;
        coeff *= -0.5 / ((mf + 1.0) * (2.0 * mf + 5.0));
    }
    [j, dj, ddj]
}
