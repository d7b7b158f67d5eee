//! Complex numbers carried as a normalized mantissa times a power of two.
//!
//! Entire functions of exponential type overflow `f64` quickly away from the
//! real axis (`|D(iy)|` grows like `exp((1+B) y)`). A [`ScaledComplex`] keeps
//! `|mantissa|` in `[1, 2)` and moves the magnitude into an integer binary
//! exponent, so products and sums of such values never overflow and phases
//! stay exact.

use std::f64::consts::LN_2;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_complex::Complex64;

/// Beyond this exponent gap the smaller summand is below half an ulp.
const ADD_EXP_CUTOFF: i64 = 60;

/// `x * 2^e` without intermediate overflow for any representable result.
pub fn ldexp(x: f64, e: i64) -> f64 {
    let mut x = x;
    let mut e = e;
    while e > 1000 {
        x *= pow2(1000);
        e -= 1000;
        if !x.is_finite() {
            return x;
        }
    }
    while e < -1000 {
        x *= pow2(-1000);
        e += 1000;
        if x == 0.0 {
            return x;
        }
    }
    x * pow2(e)
}

fn pow2(e: i64) -> f64 {
    debug_assert!((-1022..=1023).contains(&e));
    f64::from_bits(((e + 1023) as u64) << 52)
}

fn cldexp(z: Complex64, e: i64) -> Complex64 {
    Complex64::new(ldexp(z.re, e), ldexp(z.im, e))
}

/// A complex value `mantissa * 2^exp2` with `|mantissa|` in `[1, 2)`, or exactly zero.
#[derive(Clone, Copy, PartialEq)]
pub struct ScaledComplex {
    mantissa: Complex64,
    exp2: i64,
}

impl ScaledComplex {
    pub const ZERO: ScaledComplex = ScaledComplex {
        mantissa: Complex64::new(0.0, 0.0),
        exp2: 0,
    };

    pub const ONE: ScaledComplex = ScaledComplex {
        mantissa: Complex64::new(1.0, 0.0),
        exp2: 0,
    };

    /// Builds `mantissa * 2^exp2` and renormalizes. Non-finite mantissas are kept as-is.
    pub fn new(mantissa: Complex64, exp2: i64) -> Self {
        if mantissa.re == 0.0 && mantissa.im == 0.0 {
            return Self::ZERO;
        }
        if !(mantissa.re.is_finite() && mantissa.im.is_finite()) {
            return Self { mantissa, exp2 };
        }
        // Bring the larger component near 1 first so the modulus cannot overflow.
        let big = mantissa.re.abs().max(mantissa.im.abs());
        let (_, e_big) = frexp(big);
        let mut m = cldexp(mantissa, -e_big);
        let mut e = exp2 + e_big;
        let a = m.norm();
        let mut shift = a.log2().floor() as i64;
        m = cldexp(m, -shift);
        e += shift;
        // log2 can be off by one next to a power of two.
        loop {
            let a = m.norm();
            shift = if a >= 2.0 {
                1
            } else if a < 1.0 {
                -1
            } else {
                0
            };
            if shift == 0 {
                break;
            }
            m = cldexp(m, -shift);
            e += shift;
        }
        Self { mantissa: m, exp2: e }
    }

    pub fn from_complex(z: Complex64) -> Self {
        Self::new(z, 0)
    }

    pub fn from_real(x: f64) -> Self {
        Self::new(Complex64::new(x, 0.0), 0)
    }

    /// `m * exp(log)` for a real natural-log scale `log`.
    pub fn from_log(m: Complex64, log: f64) -> Self {
        let q = (log / LN_2).round();
        let rem = log - q * LN_2;
        Self::new(m * rem.exp(), q as i64)
    }

    /// `exp(z)` for any complex `z`.
    pub fn exp(z: Complex64) -> Self {
        Self::from_log(Complex64::new(z.im.cos(), z.im.sin()), z.re)
    }

    pub fn mantissa(&self) -> Complex64 {
        self.mantissa
    }

    pub fn exp2(&self) -> i64 {
        self.exp2
    }

    /// Natural-log exponent of the scale factor: value = mantissa * exp(logscale).
    pub fn logscale(&self) -> f64 {
        self.exp2 as f64 * LN_2
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa.re == 0.0 && self.mantissa.im == 0.0
    }

    pub fn is_finite(&self) -> bool {
        self.mantissa.re.is_finite() && self.mantissa.im.is_finite()
    }

    /// Plain complex value; overflows to infinity or underflows to zero outside `f64` range.
    pub fn to_complex(&self) -> Complex64 {
        cldexp(self.mantissa, self.exp2)
    }

    /// `ln |value|`, `-inf` for zero.
    pub fn ln_abs(&self) -> f64 {
        if self.is_zero() {
            f64::NEG_INFINITY
        } else {
            self.logscale() + self.mantissa.norm().ln()
        }
    }

    pub fn arg(&self) -> f64 {
        self.mantissa.arg()
    }

    pub fn conj(&self) -> Self {
        Self {
            mantissa: self.mantissa.conj(),
            exp2: self.exp2,
        }
    }

    /// `self / other` as a plain complex number (finite whenever the ratio is representable).
    pub fn ratio(&self, other: &Self) -> Complex64 {
        cldexp(self.mantissa / other.mantissa, self.exp2 - other.exp2)
    }

    /// `|self| / 2^e` as a plain real; used to compare magnitudes against a reference exponent.
    pub fn abs_rel_exp2(&self, e: i64) -> f64 {
        if self.is_zero() {
            0.0
        } else {
            ldexp(self.mantissa.norm(), self.exp2 - e)
        }
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self::new(self.mantissa * c, self.exp2)
    }

    pub fn mul_pow2(&self, e: i64) -> Self {
        if self.is_zero() {
            *self
        } else {
            Self {
                mantissa: self.mantissa,
                exp2: self.exp2 + e,
            }
        }
    }

    /// Larger of two magnitudes, as `ln`.
    pub fn max_ln_abs(values: &[ScaledComplex]) -> f64 {
        values
            .iter()
            .map(ScaledComplex::ln_abs)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Sum of several values, aligned to the largest exponent before adding mantissas.
    pub fn sum(values: &[ScaledComplex]) -> Self {
        let emax = values
            .iter()
            .filter(|v| !v.is_zero())
            .map(|v| v.exp2)
            .max();
        let Some(emax) = emax else {
            return Self::ZERO;
        };
        let mut acc = Complex64::new(0.0, 0.0);
        for v in values.iter().filter(|v| !v.is_zero()) {
            let d = v.exp2 - emax;
            if d >= -ADD_EXP_CUTOFF {
                acc += cldexp(v.mantissa, d);
            }
        }
        Self::new(acc, emax)
    }
}

/// `frexp` for positive finite `x`: returns `(m, e)` with `x = m * 2^e`, `m` in `[0.5, 1)`.
fn frexp(x: f64) -> (f64, i64) {
    if x == 0.0 || !x.is_finite() {
        return (x, 0);
    }
    let bits = x.to_bits();
    let raw = ((bits >> 52) & 0x7ff) as i64;
    if raw == 0 {
        // subnormal
        let (m, e) = frexp(x * pow2(64));
        return (m, e - 64);
    }
    let e = raw - 1022;
    let m = f64::from_bits((bits & !(0x7ff_u64 << 52)) | (1022_u64 << 52));
    (m, e)
}

impl Default for ScaledComplex {
    fn default() -> Self {
        Self::ZERO
    }
}

impl fmt::Debug for ScaledComplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({} + {}i)*2^{}",
            self.mantissa.re, self.mantissa.im, self.exp2
        )
    }
}

impl fmt::Display for ScaledComplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({} + {}i)e{:+.6}",
            self.mantissa.re,
            self.mantissa.im,
            self.logscale()
        )
    }
}

impl From<Complex64> for ScaledComplex {
    fn from(z: Complex64) -> Self {
        Self::from_complex(z)
    }
}

impl From<f64> for ScaledComplex {
    fn from(x: f64) -> Self {
        Self::from_real(x)
    }
}

impl Mul for ScaledComplex {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        if self.is_zero() || rhs.is_zero() {
            return Self::ZERO;
        }
        Self::new(self.mantissa * rhs.mantissa, self.exp2 + rhs.exp2)
    }
}

impl Mul<Complex64> for ScaledComplex {
    type Output = Self;
    fn mul(self, rhs: Complex64) -> Self {
        self.scale(rhs)
    }
}

impl Mul<f64> for ScaledComplex {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        self.scale(Complex64::new(rhs, 0.0))
    }
}

impl Div for ScaledComplex {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        if self.is_zero() {
            return Self::ZERO;
        }
        Self::new(self.mantissa / rhs.mantissa, self.exp2 - rhs.exp2)
    }
}

impl Add for ScaledComplex {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::sum(&[self, rhs])
    }
}

impl Sub for ScaledComplex {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::sum(&[self, -rhs])
    }
}

impl Neg for ScaledComplex {
    type Output = Self;
    fn neg(self) -> Self {
        Self {
            mantissa: -self.mantissa,
            exp2: self.exp2,
        }
    }
}
