//! The determinant `D(k) = -k y(1) j1'(k) + y'(1) j1(k) - y(1) j1(k)` and the
//! null pair of the boundary system at its zeros.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bessel::j1_all;
use crate::error::{IteError, Result};
use crate::exec::{self, Execution};
use crate::profile::RefractionProfile;
use crate::radial::{solve_y, RadialSolution, SolverOptions};
use crate::scaled::ScaledComplex;

/// Default acceptance threshold for `|D| / termscale` at an eigenvalue.
pub const EIGEN_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone, Copy)]
pub struct DeterminantValue {
    pub k: Complex64,
    pub value: ScaledComplex,
    /// `ln |D(k)|`, `-inf` for an exact zero.
    pub logabs: f64,
    /// `ln` of the largest of the three assembled terms.
    pub log_termscale: f64,
    /// `dD/dk` when requested.
    pub dk: Option<ScaledComplex>,
}

impl DeterminantValue {
    /// `|D| / termscale`; zero when every term vanishes.
    pub fn relative(&self) -> f64 {
        if self.log_termscale == f64::NEG_INFINITY {
            return 0.0;
        }
        (self.logabs - self.log_termscale).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NullPair {
    pub a: Complex64,
    pub b: Complex64,
    pub residual: f64,
}

fn assemble(sol: &RadialSolution, k: Complex64) -> DeterminantValue {
    let [j, dj, ddj] = j1_all(k);
    let y = sol.y1;
    let dy = sol.dy1;
    let terms = [(y * dj).scale(-k), dy * j, -(y * j)];
    let value = ScaledComplex::sum(&terms);
    let dk = match (sol.dk_y1, sol.dk_dy1) {
        (Some(u), Some(du)) => Some(ScaledComplex::sum(&[
            -(y * dj),
            (u * dj).scale(-k),
            (y * ddj).scale(-k),
            du * j,
            dy * dj,
            -(u * j),
            -(y * dj),
        ])),
        _ => None,
    };
    DeterminantValue {
        k,
        value,
        logabs: value.ln_abs(),
        log_termscale: ScaledComplex::max_ln_abs(&terms),
        dk,
    }
}

/// `D(k)`.
pub fn eval_d(profile: &RefractionProfile, k: Complex64, opts: &SolverOptions) -> Result<DeterminantValue> {
    let sol = solve_y(profile, k, false, opts)?;
    Ok(assemble(&sol, k))
}

/// `D(k)` together with `dD/dk`.
pub fn eval_d_dk(profile: &RefractionProfile, k: Complex64, opts: &SolverOptions) -> Result<DeterminantValue> {
    let sol = solve_y(profile, k, true, opts)?;
    Ok(assemble(&sol, k))
}

/// `D` at many points; results in input order.
pub fn eval_d_many(
    profile: &RefractionProfile,
    ks: &[Complex64],
    opts: &SolverOptions,
    exec: Execution,
) -> Result<Vec<DeterminantValue>> {
    exec::try_map(exec, ks, |&k| eval_d(profile, k, opts))
}

/// `k^4 D(k) / 3`.
pub fn eval_script_d(profile: &RefractionProfile, k: Complex64, opts: &SolverOptions) -> Result<DeterminantValue> {
    if k == Complex64::new(0.0, 0.0) {
        return Err(IteError::DomainError("k^4 D(k)/3 is evaluated away from k = 0".into()));
    }
    let d = eval_d(profile, k, opts)?;
    let f = ScaledComplex::from_complex(k * k) * ScaledComplex::from_complex(k * k / 3.0);
    let value = d.value * f;
    let shift = f.ln_abs();
    Ok(DeterminantValue {
        k,
        value,
        logabs: value.ln_abs(),
        log_termscale: d.log_termscale + shift,
        dk: None,
    })
}

/// Unit-norm kernel vector `(a, b)` of `b y(1) - a j1(k) = 0`, `b y'(1) - a (k j1(k))' = 0`.
///
/// The phase is fixed so that `a` is real and non-negative.
pub fn null_pair(
    profile: &RefractionProfile,
    k: Complex64,
    threshold: f64,
    opts: &SolverOptions,
) -> Result<NullPair> {
    let sol = solve_y(profile, k, false, opts)?;
    let d = assemble(&sol, k);
    let ratio = d.relative();
    if !(ratio <= threshold) {
        return Err(IteError::NotAnEigenvalue { ratio, threshold });
    }
    let [j, dj, _] = j1_all(k);
    // w(r) = r j1(kr): w(1) = j1, w'(1) = j1 + k j1'
    let w = j;
    let dw = ScaledComplex::sum(&[j, dj.scale(k)]);
    let rows = [[-w, sol.y1], [-dw, sol.dy1]];

    let candidate = |p: ScaledComplex, q: ScaledComplex| -> Option<(Complex64, Complex64)> {
        // kernel of the row (-q, p) is (p, q)
        let e = p.exp2().max(q.exp2());
        let (a, b) = (p.mul_pow2(-e).to_complex(), q.mul_pow2(-e).to_complex());
        let n = (a.norm_sqr() + b.norm_sqr()).sqrt();
        (n > 0.0 && n.is_finite()).then(|| (a / n, b / n))
    };
    let residual = |a: Complex64, b: Complex64| -> f64 {
        rows.iter()
            .map(|row| {
                let e = row[0].exp2().max(row[1].exp2());
                let r0 = row[0].mul_pow2(-e).to_complex();
                let r1 = row[1].mul_pow2(-e).to_complex();
                let norm = (r0.norm_sqr() + r1.norm_sqr()).sqrt();
                if norm == 0.0 {
                    0.0
                } else {
                    (r0 * a + r1 * b).norm() / norm
                }
            })
            .fold(0.0, f64::max)
    };
    let mut best: Option<NullPair> = None;
    for (p, q) in [(sol.y1, w), (sol.dy1, dw)] {
        if let Some((a, b)) = candidate(p, q) {
            let res = residual(a, b);
            if best.is_none_or(|bp| res < bp.residual) {
                best = Some(NullPair { a, b, residual: res });
            }
        }
    }
    let mut pair = best.ok_or_else(|| {
        IteError::DomainError("boundary system vanishes identically at this k".into())
    })?;
    let anchor = if pair.a.norm() > 0.0 { pair.a } else { pair.b };
    let phase = Complex64::from_polar(1.0, -anchor.arg());
    pair.a *= phase;
    pair.b *= phase;
    pair.a.im = 0.0;
    if pair.a.re == 0.0 {
        pair.b.im = 0.0;
    }
    Ok(pair)
}
