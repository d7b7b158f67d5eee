//! The regular solution of `y'' + (k^2 n(r) - 2/r^2) y = 0` and of its
//! Liouville form `z'' + (k^2 - p(xi)) z = 0`, evaluated at the outer boundary.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{IteError, Result};
use crate::ode::{integrate_linear, StepControl};
use crate::profile::RefractionProfile;
use crate::scaled::ScaledComplex;

const SERIES_TERMS: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Largest accepted `|k|`.
    pub k_max: f64,
    pub max_steps: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            rtol: 1e-12,
            atol: 1e-14,
            k_max: 1e4,
            max_steps: 5_000_000,
        }
    }
}

impl SolverOptions {
    pub fn check(&self) -> Result<()> {
        if !(self.rtol > 0.0 && self.atol > 0.0 && self.k_max > 0.0) {
            return Err(IteError::DomainError(
                "solver tolerances and k_max must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RadialSolution {
    pub k: Complex64,
    pub y1: ScaledComplex,
    pub dy1: ScaledComplex,
    pub dk_y1: Option<ScaledComplex>,
    pub dk_dy1: Option<ScaledComplex>,
    pub steps: usize,
    /// Set when `k = 0` and the k-independent limit solution was used.
    pub limit_branch: bool,
}

/// Launch radius for the series start.
pub fn launch_radius(k: Complex64) -> f64 {
    (1e-3f64).min(0.1 / (1.0 + k.norm()))
}

/// Frobenius coefficients `y = sum a_m r^{m+2}` and `dy/dk = sum b_m r^{m+2}` for
/// `n(r) = sum c_j r^j`.
fn frobenius(c: &[f64], k: Complex64, terms: usize) -> (Vec<Complex64>, Vec<Complex64>) {
    let k2 = k * k;
    let zero = Complex64::new(0.0, 0.0);
    let mut a = vec![zero; terms];
    let mut b = vec![zero; terms];
    a[0] = k / 3.0;
    b[0] = Complex64::new(1.0 / 3.0, 0.0);
    for m in 2..terms {
        let mut sa = zero;
        let mut sb = zero;
        for (j, &cj) in c.iter().enumerate().take(m - 1) {
            sa += cj * a[m - 2 - j];
            sb += cj * b[m - 2 - j];
        }
        let d = (m * (m + 3)) as f64;
        a[m] = -k2 * sa / d;
        b[m] = -(2.0 * k * sa + k2 * sb) / d;
    }
    (a, b)
}

fn eval_series(coef: &[Complex64], r: f64) -> (Complex64, Complex64) {
    let mut v = Complex64::new(0.0, 0.0);
    let mut dv = Complex64::new(0.0, 0.0);
    for (m, &am) in coef.iter().enumerate().rev() {
        let p = (m + 2) as f64;
        v = v * r + am;
        dv = dv * r + p * am;
    }
    // v = sum a_m r^m, dv = sum (m+2) a_m r^m
    (v * r * r, dv * r)
}

/// Series values `(y(r0), y'(r0))` of the regular solution with `y(r)/r -> j1(kr)`.
pub fn series_init(profile: &RefractionProfile, k: Complex64, r0: f64) -> (Complex64, Complex64) {
    let (a, _) = frobenius(profile.series(), k, SERIES_TERMS);
    eval_series(&a, r0)
}

fn control(k: Complex64, sqrt_n_max: f64, start: f64, opts: &SolverOptions) -> StepControl {
    let h_max = (0.05f64).min(0.5 / (1.0 + k.norm() * sqrt_n_max));
    StepControl {
        rtol: opts.rtol,
        atol: opts.atol,
        h_max,
        h_init: h_max.min(start),
        max_steps: opts.max_steps,
    }
}

fn check_k(k: Complex64, opts: &SolverOptions) -> Result<()> {
    if !(k.re.is_finite() && k.im.is_finite()) {
        return Err(IteError::DomainError(format!("non-finite k = {k}")));
    }
    if k.norm() > opts.k_max {
        return Err(IteError::DomainError(format!(
            "|k| = {} exceeds k_max = {}",
            k.norm(),
            opts.k_max
        )));
    }
    Ok(())
}

/// `y(1;k)`, `y'(1;k)` and optionally their k-derivatives.
pub fn solve_y(
    profile: &RefractionProfile,
    k: Complex64,
    want_dk: bool,
    opts: &SolverOptions,
) -> Result<RadialSolution> {
    opts.check()?;
    check_k(k, opts)?;
    let zero = ScaledComplex::default();
    if k == Complex64::new(0.0, 0.0) {
        // y vanishes identically; dy/dk solves y'' = 2y/r^2, i.e. r^2/3
        return Ok(RadialSolution {
            k,
            y1: zero,
            dy1: zero,
            dk_y1: want_dk.then(|| ScaledComplex::from_real(1.0 / 3.0)),
            dk_dy1: want_dk.then(|| ScaledComplex::from_real(2.0 / 3.0)),
            steps: 0,
            limit_branch: true,
        });
    }
    let r0 = launch_radius(k);
    let (a, b) = frobenius(profile.series(), k, SERIES_TERMS);
    let (y0, dy0) = eval_series(&a, r0);
    let ctl = control(k, profile.sqrt_n_max(), r0, opts);
    let k2 = k * k;
    let n_of = |r: f64| profile.n_inside(r);

    if !want_dk {
        let f = |r: f64, s: &[Complex64; 2]| {
            let w = k2 * n_of(r) - 2.0 / (r * r);
            [s[1], -w * s[0]]
        };
        let out = integrate_linear(f, r0, 1.0, [y0, dy0], 0, &ctl)?;
        return Ok(RadialSolution {
            k,
            y1: out.component(0),
            dy1: out.component(1),
            dk_y1: None,
            dk_dy1: None,
            steps: out.steps,
            limit_branch: false,
        });
    }
    let (u0, du0) = eval_series(&b, r0);
    let two_k = 2.0 * k;
    let f = |r: f64, s: &[Complex64; 4]| {
        let n = n_of(r);
        let w = k2 * n - 2.0 / (r * r);
        [s[1], -w * s[0], s[3], -w * s[2] - two_k * n * s[0]]
    };
    let out = integrate_linear(f, r0, 1.0, [y0, dy0, u0, du0], 0, &ctl)?;
    Ok(RadialSolution {
        k,
        y1: out.component(0),
        dy1: out.component(1),
        dk_y1: Some(out.component(2)),
        dk_dy1: Some(out.component(3)),
        steps: out.steps,
        limit_branch: false,
    })
}

/// `(z(B;k), z'(B;k))` for `z'' + (k^2 - p(xi)) z = 0`, `z ~ norm * k xi^2 / 3` at the origin.
///
/// `p` must behave like `2/xi^2` near zero.
pub fn solve_z<P>(
    p: P,
    b: f64,
    k: Complex64,
    norm: f64,
    opts: &SolverOptions,
) -> Result<(ScaledComplex, ScaledComplex)>
where
    P: Fn(f64) -> f64,
{
    opts.check()?;
    check_k(k, opts)?;
    if !(b > 0.0) {
        return Err(IteError::DomainError(format!("B must be positive, got {b}")));
    }
    if k == Complex64::new(0.0, 0.0) {
        return Ok((ScaledComplex::default(), ScaledComplex::default()));
    }
    let x0 = launch_radius(k).min(1e-3 * b);
    let q0 = p(x0) - 2.0 / (x0 * x0);
    let kk = k * k - q0;
    let zero = Complex64::new(0.0, 0.0);
    let mut a = vec![zero; SERIES_TERMS];
    a[0] = k / 3.0 * norm;
    for m in (2..SERIES_TERMS).step_by(2) {
        a[m] = -kk * a[m - 2] / ((m * (m + 3)) as f64);
    }
    let (z0, dz0) = eval_series(&a, x0);
    let ctl = control(k, 1.0, x0, opts);
    let ctl = StepControl {
        h_max: ctl.h_max * b.min(1.0),
        ..ctl
    };
    let k2 = k * k;
    let f = |x: f64, s: &[Complex64; 2]| [s[1], (p(x) - k2) * s[0]];
    let out = integrate_linear(f, x0, b, [z0, dz0], 0, &ctl)?;
    Ok((out.component(0), out.component(1)))
}

/// Two leading large-`k` terms of `z(xi;k)` and `z'(xi;k)` under the unit normalization `z ~ xi^2`.
pub fn asymptotic_z(k: Complex64, xi: f64) -> (ScaledComplex, ScaledComplex) {
    let (s, c) = crate::bessel::sin_cos_scaled(k * xi);
    let k2 = k * k;
    let k3 = k2 * k;
    let z = ScaledComplex::sum(&[s.scale(3.0 / (k3 * xi)), c.scale(-3.0 / k2)]);
    let dz = ScaledComplex::sum(&[
        c.scale(3.0 / (k2 * xi)),
        s.scale(-3.0 / (k3 * xi * xi)),
        s.scale(3.0 / k),
    ]);
    (z, dz)
}
