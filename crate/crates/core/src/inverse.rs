//! Spectral data for the inverse problem: recovering `B`, comparing spectra,
//! and the Sturm-Liouville shooting route to the real eigenvalues.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cartwright::{check_coverage, density_fit, DensityEstimate, Wedge};
use crate::error::{IteError, Result};
use crate::exec::{self, Execution};
use crate::profile::RefractionProfile;
use crate::radial::{solve_y, solve_z, SolverOptions};
use crate::scaled::ScaledComplex;
use crate::zeros::ZeroSet;

/// Default relative pairing tolerance, applied as `pair_tol * (1 + |k|)`.
pub const PAIR_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Eigenvalue {
    pub re: f64,
    pub im: f64,
}

impl Eigenvalue {
    pub fn k(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

impl From<Complex64> for Eigenvalue {
    fn from(k: Complex64) -> Self {
        Eigenvalue { re: k.re, im: k.im }
    }
}

/// Eigenvalues in a wedge up to a radius, sorted by modulus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub wedge: Wedge,
    pub r_max: f64,
    pub eigenvalues: Vec<Eigenvalue>,
}

impl Spectrum {
    pub fn new(wedge: Wedge, r_max: f64, eigenvalues: Vec<Complex64>) -> Result<Self> {
        let mut s = Spectrum {
            wedge,
            r_max,
            eigenvalues: eigenvalues.into_iter().map(Eigenvalue::from).collect(),
        };
        s.normalize()?;
        Ok(s)
    }

    fn normalize(&mut self) -> Result<()> {
        self.wedge.check()?;
        if !(self.r_max > 0.0 && self.r_max.is_finite()) {
            return Err(IteError::DomainError(format!("r_max = {} must be positive", self.r_max)));
        }
        let slack = 1e-9 * (1.0 + self.r_max);
        for e in &self.eigenvalues {
            let k = e.k();
            if !(k.re.is_finite() && k.im.is_finite()) || k.norm() > self.r_max + slack || !self.wedge.contains(k) {
                return Err(IteError::DomainError(format!(
                    "eigenvalue {} + {}i lies outside the wedge or beyond r_max",
                    k.re, k.im
                )));
            }
        }
        self.eigenvalues.sort_by(|a, b| {
            a.k()
                .norm()
                .total_cmp(&b.k().norm())
                .then(a.re.total_cmp(&b.re))
                .then(a.im.total_cmp(&b.im))
        });
        Ok(())
    }

    /// Largest radius up to which the wedge lies in the zero set's region.
    pub fn covered_radius(zeros: &ZeroSet, wedge: &Wedge) -> f64 {
        let g = &zeros.region;
        let mut hi = [g.re_min, g.re_max, g.im_min, g.im_max]
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            * 2.0;
        let mut lo = 0.0;
        if check_coverage(g, wedge, hi).is_ok() {
            return hi;
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if check_coverage(g, wedge, mid).is_ok() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    /// Zeros of the set lying in the wedge with `|k| <= r_max`, repeated by multiplicity.
    pub fn from_zero_set(zeros: &ZeroSet, wedge: Wedge, r_max: f64) -> Result<Self> {
        check_coverage(&zeros.region, &wedge, r_max)?;
        let mut ks = Vec::new();
        for z in &zeros.zeros {
            let k = z.k();
            if k.norm() <= r_max && wedge.contains(k) {
                ks.extend(std::iter::repeat_n(k, z.mult as usize));
            }
        }
        Spectrum::new(wedge, r_max, ks)
    }

    pub fn points(&self) -> Vec<Complex64> {
        self.eigenvalues.iter().map(Eigenvalue::k).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spectrum serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let mut sp: Spectrum = serde_json::from_str(s).map_err(|e| {
            IteError::ParseError(format!("spectrum, line {} column {}: {e}", e.line(), e.column()))
        })?;
        sp.normalize()?;
        Ok(sp)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BRecovery {
    #[serde(rename = "B_hat")]
    pub b_hat: f64,
    /// Error bound on `b_hat` carried over from the density fit.
    pub fit_error: f64,
    pub eigenvalues_in_window: usize,
    pub density: DensityEstimate,
}

/// `B = pi * delta - 1` from the density of the spectrum over the window.
pub fn recover_b(spectrum: &Spectrum, fit_window: (f64, f64)) -> Result<BRecovery> {
    let (lo, hi) = fit_window;
    if !(lo >= 0.0 && hi > lo) {
        return Err(IteError::DomainError(format!("bad fit window [{lo}, {hi}]")));
    }
    if hi > spectrum.r_max * (1.0 + 1e-12) {
        return Err(IteError::RegionTooSmall(format!(
            "fit window ends at {hi} beyond r_max = {}",
            spectrum.r_max
        )));
    }
    let moduli: Vec<f64> = spectrum.eigenvalues.iter().map(|e| e.k().norm()).collect();
    let inside = moduli.iter().filter(|&&m| m >= lo && m <= hi).count();
    if inside < 20 {
        return Err(IteError::InsufficientData(format!(
            "{inside} eigenvalues in [{lo}, {hi}], at least 20 needed"
        )));
    }
    let density = density_fit(&moduli, &spectrum.wedge, fit_window);
    Ok(BRecovery {
        b_hat: PI * density.delta_hat - 1.0,
        fit_error: PI * density.slope_error,
        eigenvalues_in_window: inside,
        density,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Conclusion {
    ConsistentWithEqual,
    Distinguished,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniquenessVerdict {
    #[serde(rename = "same_B")]
    pub same_b: bool,
    #[serde(rename = "B1_hat")]
    pub b1_hat: Option<f64>,
    #[serde(rename = "B2_hat")]
    pub b2_hat: Option<f64>,
    #[serde(rename = "B_fit_error")]
    pub b_fit_error: Option<f64>,
    pub matched_pairs: usize,
    pub unmatched: usize,
    pub max_pair_distance: f64,
    pub conclusion: Conclusion,
    /// Human-readable reason for a `Distinguished` verdict.
    pub witness: Option<String>,
}

fn b_estimate(s: &Spectrum) -> Option<BRecovery> {
    recover_b(s, (0.25 * s.r_max, s.r_max)).ok()
}

/// Greedy nearest-neighbour matching of two spectra plus a density comparison.
pub fn compare_spectra(s1: &Spectrum, s2: &Spectrum, pair_tol: f64) -> UniquenessVerdict {
    let r_c = s1.r_max.min(s2.r_max);
    let tol = |k: Complex64| pair_tol * (1.0 + k.norm());
    let a: Vec<Complex64> = s1.points().into_iter().filter(|k| k.norm() <= r_c).collect();
    let b: Vec<Complex64> = s2.points().into_iter().filter(|k| k.norm() <= r_c).collect();

    let mut cand: Vec<(f64, usize, usize)> = Vec::new();
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            let d = (x - y).norm();
            if d <= 10.0 * tol(*x) {
                cand.push((d, i, j));
            }
        }
    }
    cand.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.cmp(&q.1)).then(p.2.cmp(&q.2)));
    let mut used_a = vec![false; a.len()];
    let mut used_b = vec![false; b.len()];
    let mut matched = 0;
    let mut max_d: f64 = 0.0;
    let mut loose = 0;
    for (d, i, j) in cand {
        if used_a[i] || used_b[j] {
            continue;
        }
        used_a[i] = true;
        used_b[j] = true;
        if d <= tol(a[i]) {
            matched += 1;
        } else {
            loose += 1;
        }
        max_d = max_d.max(d);
    }
    // eigenvalues near the common radius may have partners just beyond it
    let edge = |k: &Complex64| k.norm() > r_c - 10.0 * tol(*k);
    let witnesses: Vec<Complex64> = a
        .iter()
        .zip(&used_a)
        .chain(b.iter().zip(&used_b))
        .filter(|(k, used)| !**used && !edge(k))
        .map(|(k, _)| *k)
        .collect();

    let e1 = b_estimate(s1);
    let e2 = b_estimate(s2);
    let (same_b, b_err, b_gap) = match (&e1, &e2) {
        (Some(x), Some(y)) => {
            let err = x.fit_error.hypot(y.fit_error);
            let gap = (x.b_hat - y.b_hat).abs();
            (gap <= err, Some(err), Some(gap))
        }
        _ => (true, None, None),
    };

    let mut witness = None;
    let conclusion = if let Some(k) = witnesses.first() {
        witness = Some(format!(
            "{} unmatched eigenvalues beyond 10 pair_tol, first at {} + {}i",
            witnesses.len(),
            k.re,
            k.im
        ));
        Conclusion::Distinguished
    } else if !same_b {
        witness = Some(format!(
            "B estimates differ by {} beyond the combined fit error {}",
            b_gap.unwrap_or(f64::NAN),
            b_err.unwrap_or(f64::NAN)
        ));
        Conclusion::Distinguished
    } else if loose == 0 && a.len() == b.len() && matched == a.len() {
        Conclusion::ConsistentWithEqual
    } else {
        Conclusion::Inconclusive
    };
    UniquenessVerdict {
        same_b,
        b1_hat: e1.as_ref().map(|e| e.b_hat),
        b2_hat: e2.as_ref().map(|e| e.b_hat),
        b_fit_error: b_err,
        matched_pairs: matched,
        unmatched: witnesses.len(),
        max_pair_distance: max_d,
        conclusion,
        witness,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FCheck {
    pub k: Complex64,
    /// `F(k)` divided by the scale.
    pub relative: Complex64,
    /// Natural log of `max(|y1(1;k)|, |y2(1;k)|)`.
    pub log_scale: f64,
}

impl FCheck {
    pub fn value(&self) -> ScaledComplex {
        ScaledComplex::from_log(self.relative, self.log_scale)
    }
}

/// `F(k) = y1(1;k) - y2(1;k)` for two profiles, with its local scale.
pub fn crosscheck_f(
    p1: &RefractionProfile,
    p2: &RefractionProfile,
    ks: &[Complex64],
    opts: &SolverOptions,
    exec: Execution,
) -> Result<Vec<FCheck>> {
    exec::try_map(exec, ks, |&k| {
        let y1 = solve_y(p1, k, false, opts)?.y1;
        let y2 = solve_y(p2, k, false, opts)?.y1;
        let scale = y1.ln_abs().max(y2.ln_abs());
        let f = y1 - y2;
        let relative = if scale.is_finite() {
            f.ratio(&ScaledComplex::from_log(Complex64::new(1.0, 0.0), scale))
        } else {
            Complex64::new(0.0, 0.0)
        };
        Ok(FCheck {
            k,
            relative,
            log_scale: if scale.is_finite() { scale } else { f64::NEG_INFINITY },
        })
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SlMode {
    /// `z(0) = z(B) = 0`.
    Dirichlet,
    /// `z(0) = 0`, `z'(B) = 0`.
    DirichletNeumann,
}

/// Real `k` in `(0, k_max]` for which the shooting solution of
/// `-z'' + p z = k^2 z` satisfies the boundary condition at `B`.
///
/// `p` must behave like `2/xi^2` at the origin.
pub fn sl_eigenvalues<P>(
    p: P,
    b: f64,
    mode: SlMode,
    k_max: f64,
    opts: &SolverOptions,
    exec: Execution,
) -> Result<Vec<f64>>
where
    P: Fn(f64) -> f64 + Sync,
{
    if !(b > 0.0) {
        return Err(IteError::DomainError(format!("B must be positive, got {b}")));
    }
    let sign = |k: f64| -> Result<f64> {
        let (z, dz) = solve_z(&p, b, Complex64::new(k, 0.0), 1.0, opts)?;
        let v = match mode {
            SlMode::Dirichlet => z,
            SlMode::DirichletNeumann => dz,
        };
        Ok(if v.is_zero() { 0.0 } else { v.mantissa().re.signum() })
    };
    let h = 0.2 * PI / b;
    let k_lo = 1e-3_f64.min(0.5 * k_max);
    let n = ((k_max - k_lo) / h).ceil().max(1.0) as usize;
    let grid: Vec<f64> = (0..=n).map(|i| k_lo + (k_max - k_lo) * i as f64 / n as f64).collect();
    let signs = exec::try_map(exec, &grid, |&k| sign(k))?;
    let brackets: Vec<(f64, f64, f64)> = grid
        .windows(2)
        .zip(signs.windows(2))
        .filter(|(_, s)| s[0] * s[1] < 0.0 || s[1] == 0.0)
        .map(|(g, s)| (g[0], g[1], s[0]))
        .collect();
    exec::try_map(exec, &brackets, |&(a, c, sa)| polish(&p, b, mode, a, c, sa, opts))
}

fn shooting_value<P: Fn(f64) -> f64>(
    p: &P,
    b: f64,
    mode: SlMode,
    k: f64,
    opts: &SolverOptions,
) -> Result<ScaledComplex> {
    let (z, dz) = solve_z(p, b, Complex64::new(k, 0.0), 1.0, opts)?;
    Ok(match mode {
        SlMode::Dirichlet => z,
        SlMode::DirichletNeumann => dz,
    })
}

/// Illinois regula falsi on a sign-change bracket, to `1e-13 (1 + k)`.
fn polish<P: Fn(f64) -> f64>(
    p: &P,
    b: f64,
    mode: SlMode,
    mut a: f64,
    mut c: f64,
    sa: f64,
    opts: &SolverOptions,
) -> Result<f64> {
    let reference = shooting_value(p, b, mode, a, opts)?;
    let val = |k: f64| -> Result<f64> {
        let v = shooting_value(p, b, mode, k, opts)?;
        Ok(v.ratio(&reference).re * sa.signum())
    };
    let mut fa = val(a)?;
    let mut fc = val(c)?;
    if fc == 0.0 {
        return Ok(c);
    }
    let mut side = 0i32;
    for _ in 0..200 {
        if (c - a).abs() <= 1e-13 * (1.0 + c.abs()) {
            break;
        }
        let mut m = (a * fc - c * fa) / (fc - fa);
        if !(m > a.min(c) && m < a.max(c)) {
            m = 0.5 * (a + c);
        }
        let fm = val(m)?;
        if fm == 0.0 {
            return Ok(m);
        }
        if (fm > 0.0) == (fa > 0.0) {
            a = m;
            fa = fm;
            if side == -1 {
                fc *= 0.5;
            }
            side = -1;
        } else {
            c = m;
            fc = fm;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        }
    }
    Ok(0.5 * (a + c))
}

/// `true` when `mu_1 < lambda_1 < mu_2 < lambda_2 < ...` for Neumann-type `mu` and Dirichlet `lambda`.
pub fn strictly_interlace(dirichlet: &[f64], neumann: &[f64]) -> bool {
    let n = dirichlet.len().min(neumann.len());
    if n == 0 {
        return false;
    }
    for i in 0..n {
        if !(neumann[i] < dirichlet[i]) {
            return false;
        }
        if i + 1 < neumann.len() && !(dirichlet[i] < neumann[i + 1]) {
            return false;
        }
    }
    true
}

/// Real zeros of `y(1;k)` on `(0, k_max]`; by `z = n^{1/4} y` these are the zeros of `z(B;k)`.
pub fn radial_dirichlet_zeros(
    profile: &RefractionProfile,
    k_max: f64,
    opts: &SolverOptions,
    exec: Execution,
) -> Result<Vec<f64>> {
    let h = 0.2 * PI / profile.sqrt_n_max();
    let k_lo = 1e-3_f64.min(0.5 * k_max);
    let n = ((k_max - k_lo) / h).ceil().max(1.0) as usize;
    let grid: Vec<f64> = (0..=n).map(|i| k_lo + (k_max - k_lo) * i as f64 / n as f64).collect();
    let y = |k: f64| -> Result<ScaledComplex> { Ok(solve_y(profile, Complex64::new(k, 0.0), false, opts)?.y1) };
    let vals = exec::try_map(exec, &grid, |&k| y(k))?;
    let brackets: Vec<(f64, f64)> = grid
        .windows(2)
        .zip(vals.windows(2))
        .filter(|(_, v)| v[0].mantissa().re * v[1].mantissa().re < 0.0)
        .map(|(g, _)| (g[0], g[1]))
        .collect();
    exec::try_map(exec, &brackets, |&(mut a, mut c)| {
        let fa0 = y(a)?;
        let positive = fa0.mantissa().re > 0.0;
        while (c - a).abs() > 1e-14 * (1.0 + c) {
            let m = 0.5 * (a + c);
            if m <= a || m >= c {
                break;
            }
            let fm = y(m)?;
            if fm.is_zero() {
                return Ok(m);
            }
            if (fm.mantissa().re > 0.0) == positive {
                a = m;
            } else {
                c = m;
            }
        }
        Ok(0.5 * (a + c))
    })
}
