//! Counting functions, wedge densities and the growth indicator of `D`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::determinant::eval_d;
use crate::error::{IteError, Result};
use crate::exec::{self, Execution};
use crate::profile::RefractionProfile;
use crate::radial::SolverOptions;
use crate::zeros::{check_degenerate, BoxRegion, ZeroOptions, ZeroSet};

/// Sectors with `|k|` below this radius are not required to lie in the zero set's region.
pub const INNER_RADIUS: f64 = 0.5;

/// Half-width of the excluded band around the real axis for indicator fits.
pub const GUARD_BAND: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WedgeLabel {
    Sigma1,
    Sigma2,
    OffAxisUpper,
    OffAxisLower,
    Custom,
}

/// Angular sector `theta_min <= arg k <= theta_max`, measured counter-clockwise.
///
/// `theta_max` may exceed `pi` (up to `theta_min + 2 pi`) so that sectors
/// around the negative real axis are representable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wedge {
    pub theta_min: f64,
    pub theta_max: f64,
    #[serde(default = "custom")]
    pub label: WedgeLabel,
}

fn custom() -> WedgeLabel {
    WedgeLabel::Custom
}

impl Wedge {
    pub fn new(theta_min: f64, theta_max: f64, label: WedgeLabel) -> Result<Self> {
        let w = Wedge {
            theta_min,
            theta_max,
            label,
        };
        w.check()?;
        Ok(w)
    }

    pub fn check(&self) -> Result<()> {
        let ok = self.theta_min > -PI
            && self.theta_min <= PI
            && self.theta_max > self.theta_min
            && self.theta_max <= self.theta_min + 2.0 * PI;
        if !ok {
            return Err(IteError::DomainError(format!(
                "invalid wedge [{}, {}]",
                self.theta_min, self.theta_max
            )));
        }
        Ok(())
    }

    pub fn sigma1(eps: f64) -> Self {
        Wedge {
            theta_min: -eps,
            theta_max: eps,
            label: WedgeLabel::Sigma1,
        }
    }

    pub fn sigma2(eps: f64) -> Self {
        Wedge {
            theta_min: PI - eps,
            theta_max: PI + eps,
            label: WedgeLabel::Sigma2,
        }
    }

    pub fn off_axis_upper(eps: f64) -> Self {
        Wedge {
            theta_min: eps,
            theta_max: PI - eps,
            label: WedgeLabel::OffAxisUpper,
        }
    }

    pub fn off_axis_lower(eps: f64) -> Self {
        Wedge {
            theta_min: -PI + eps,
            theta_max: -eps,
            label: WedgeLabel::OffAxisLower,
        }
    }

    pub fn opening(&self) -> f64 {
        self.theta_max - self.theta_min
    }

    pub fn contains_angle(&self, theta: f64) -> bool {
        let d = (theta - self.theta_min).rem_euclid(2.0 * PI);
        d <= self.opening() || (self.opening() >= 2.0 * PI - 1e-15)
    }

    pub fn contains(&self, k: Complex64) -> bool {
        k != Complex64::new(0.0, 0.0) && self.contains_angle(k.arg())
    }
}

/// `Err(RegionTooSmall)` unless the annular sector `INNER_RADIUS <= |k| <= r` lies in the region.
pub fn check_coverage(region: &BoxRegion, wedge: &Wedge, r: f64) -> Result<()> {
    if r <= INNER_RADIUS {
        return Ok(());
    }
    let slack = 1e-9 * (1.0 + r);
    let n = 512;
    let mut angles: Vec<f64> = (0..=n)
        .map(|i| wedge.theta_min + wedge.opening() * i as f64 / n as f64)
        .collect();
    // the extreme points of an arc lie at multiples of pi/2
    for q in -4..=4 {
        let a = q as f64 * 0.5 * PI;
        if a >= wedge.theta_min && a <= wedge.theta_max {
            angles.push(a);
        }
    }
    for a in angles {
        for rad in [INNER_RADIUS, r] {
            let k = Complex64::from_polar(rad, a);
            if !region.contains(k, slack) {
                return Err(IteError::RegionTooSmall(format!(
                    "point {:.4} + {:.4}i of the sector [{:.4}, {:.4}] up to r = {r} is outside the region",
                    k.re, k.im, wedge.theta_min, wedge.theta_max
                )));
            }
        }
    }
    Ok(())
}

/// Multiplicity-weighted number of zeros with `0 < |k| <= r` and argument in the wedge.
pub fn counting_function(zeros: &ZeroSet, wedge: &Wedge, r: f64) -> Result<i64> {
    wedge.check()?;
    check_coverage(&zeros.region, wedge, r)?;
    Ok(count_unchecked(zeros, wedge, r))
}

fn count_unchecked(zeros: &ZeroSet, wedge: &Wedge, r: f64) -> i64 {
    zeros
        .zeros
        .iter()
        .filter(|z| {
            let k = z.k();
            k.norm() <= r && wedge.contains(k)
        })
        .map(|z| z.mult as i64)
        .sum()
}

/// Ordinary least squares `y = a + b x`; returns `(b, a, residuals)`.
pub fn ols(x: &[f64], y: &[f64]) -> (f64, f64, Vec<f64>) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let icpt = my - slope * mx;
    let res = x.iter().zip(y).map(|(a, b)| b - icpt - slope * a).collect();
    (slope, icpt, res)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    pub wedge: Wedge,
    pub delta_hat: f64,
    pub fit_window: (f64, f64),
    pub intercept: f64,
    /// Root-mean-square residual of the fit.
    pub residual: f64,
    pub max_abs_residual: f64,
    /// Bound on the slope error implied by the residual band, `3 max|res| / width`.
    pub slope_error: f64,
    pub counts: Vec<(f64, i64)>,
}

/// Least-squares slope of `N(r)` against `r` on a uniform grid over the window.
///
/// Fails with `InsufficientData` when the zero set holds fewer than ten zeros
/// (with multiplicity).
pub fn wedge_density(zeros: &ZeroSet, wedge: &Wedge, fit_window: (f64, f64)) -> Result<DensityEstimate> {
    wedge.check()?;
    let (lo, hi) = fit_window;
    if !(lo >= 0.0 && hi > lo) {
        return Err(IteError::DomainError(format!("bad fit window [{lo}, {hi}]")));
    }
    if zeros.total_multiplicity() < 10 {
        return Err(IteError::InsufficientData(format!(
            "{} zeros in the set, at least 10 needed",
            zeros.total_multiplicity()
        )));
    }
    check_coverage(&zeros.region, wedge, hi)?;
    let mut moduli: Vec<f64> = Vec::new();
    for z in &zeros.zeros {
        if wedge.contains(z.k()) {
            moduli.extend(std::iter::repeat_n(z.k().norm(), z.mult as usize));
        }
    }
    Ok(density_fit(&moduli, wedge, fit_window))
}

/// Fit of the counting function of the given moduli, without coverage checks.
pub fn density_fit(moduli: &[f64], wedge: &Wedge, fit_window: (f64, f64)) -> DensityEstimate {
    let (lo, hi) = fit_window;
    let mut sorted = moduli.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = 301;
    let rs: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    let counts: Vec<(f64, i64)> = rs
        .iter()
        .map(|&r| (r, sorted.partition_point(|&m| m <= r) as i64))
        .collect();
    let ys: Vec<f64> = counts.iter().map(|c| c.1 as f64).collect();
    let (slope, icpt, res) = ols(&rs, &ys);
    let rms = (res.iter().map(|r| r * r).sum::<f64>() / res.len() as f64).sqrt();
    let maxr = res.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    DensityEstimate {
        wedge: *wedge,
        delta_hat: slope.max(0.0),
        fit_window,
        intercept: icpt,
        residual: rms,
        max_abs_residual: maxr,
        slope_error: 3.0 * maxr / (hi - lo),
        counts,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorEstimate {
    pub theta: f64,
    pub h_hat: f64,
    /// `(r, ln|D(r e^{i theta})| / r)`.
    pub samples: Vec<(f64, f64)>,
    /// Radii used by the slope fit.
    pub fit_window: (f64, f64),
    pub residual: f64,
}

/// Growth rate of `ln|D(r e^{i theta})|`.
///
/// `h_hat` is the least-squares slope of `ln|D|` against `r` over the upper half
/// of the samples; it approximates the limsup defining the indicator.
pub fn indicator_estimate(
    profile: &RefractionProfile,
    theta: f64,
    r_samples: &[f64],
    opts: &SolverOptions,
    exec: Execution,
) -> Result<IndicatorEstimate> {
    let t = theta.rem_euclid(2.0 * PI);
    let dist = t.min((t - PI).abs()).min(2.0 * PI - t);
    if dist < GUARD_BAND {
        return Err(IteError::DomainError(format!(
            "theta = {theta} lies within {GUARD_BAND} rad of the real axis"
        )));
    }
    if r_samples.len() < 4 || r_samples.windows(2).any(|w| !(w[1] > w[0])) || r_samples[0] <= 0.0 {
        return Err(IteError::DomainError(
            "r_samples must be positive, increasing, and at least four".into(),
        ));
    }
    let dir = Complex64::from_polar(1.0, theta);
    let logs = exec::try_map(exec, r_samples, |&r| {
        eval_d(profile, dir * r, opts).map(|d| d.logabs)
    })?;
    if logs.iter().any(|l| !l.is_finite()) {
        return Err(IteError::DomainError("D vanished on the sampling ray".into()));
    }
    let samples: Vec<(f64, f64)> = r_samples.iter().zip(&logs).map(|(r, l)| (*r, l / r)).collect();
    let start = r_samples.len() / 2;
    let (slope, _, res) = ols(&r_samples[start..], &logs[start..]);
    let rms = (res.iter().map(|r| r * r).sum::<f64>() / res.len() as f64).sqrt();
    Ok(IndicatorEstimate {
        theta,
        h_hat: slope,
        samples,
        fit_window: (r_samples[start], r_samples[r_samples.len() - 1]),
        residual: rms,
    })
}

/// Uniform radii `r_max/2 ..= r_max` used by default for indicator fits.
pub fn default_radii(r_max: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 * r_max + 0.5 * r_max * i as f64 / (n - 1) as f64)
        .collect()
}

/// `h(pi/2) + h(-pi/2)`, the width of the indicator diagram.
pub fn indicator_width(profile: &RefractionProfile, r_max: f64, opts: &ZeroOptions) -> Result<f64> {
    let probe = BoxRegion::new(0.5, r_max.max(1.0), -3.0, 3.0)?;
    check_degenerate(profile, &probe, opts)?;
    let radii = default_radii(r_max, 41);
    let up = indicator_estimate(profile, 0.5 * PI, &radii, &opts.solver, opts.exec)?;
    let down = indicator_estimate(profile, -0.5 * PI, &radii, &opts.solver, opts.exec)?;
    Ok(up.h_hat + down.h_hat)
}

/// Multiplicity-weighted `sum 1/k` over the zeros with `0 < |k| < r`.
///
/// The region must contain the real segment `[-r, r]`.
pub fn reciprocal_sum(zeros: &ZeroSet, r: f64) -> Result<Complex64> {
    let g = &zeros.region;
    if !(g.re_min <= -r && g.re_max >= r && g.im_min < 0.0 && g.im_max > 0.0) {
        return Err(IteError::RegionTooSmall(format!(
            "region does not contain the segment [-{r}, {r}]"
        )));
    }
    let mut pts: Vec<(Complex64, u32)> = zeros
        .zeros
        .iter()
        .filter(|z| {
            let n = z.k().norm();
            n > 0.0 && n < r
        })
        .map(|z| (z.k(), z.mult))
        .collect();
    // sum images in the order (|re|, |im|, re, im) so that exact pairs cancel first
    pts.sort_by(|a, b| {
        (a.0.re.abs(), a.0.im.abs(), a.0.re, a.0.im)
            .partial_cmp(&(b.0.re.abs(), b.0.im.abs(), b.0.re, b.0.im))
            .expect("finite zeros")
    });
    Ok(pts.iter().fold(Complex64::new(0.0, 0.0), |acc, (k, m)| acc + *m as f64 / k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zeros::{find_zeros, SearchDiagnostics, Zero};

    fn set(points: &[(f64, f64)], region: BoxRegion) -> ZeroSet {
        ZeroSet {
            profile_hash: String::new(),
            region,
            zeros: points
                .iter()
                .map(|&(re, im)| Zero {
                    re,
                    im,
                    mult: 1,
                    residual: 0.0,
                })
                .collect(),
            total_winding: points.len() as i64,
            diagnostics: SearchDiagnostics::default(),
        }
    }

    #[test]
    fn wedge_membership() {
        let s2 = Wedge::sigma2(0.1);
        assert!(s2.contains(Complex64::new(-5.0, 0.0)));
        assert!(s2.contains(Complex64::new(-5.0, -0.2)));
        assert!(!s2.contains(Complex64::new(5.0, 0.0)));
        let s1 = Wedge::sigma1(0.1);
        assert!(s1.contains(Complex64::new(5.0, -0.2)));
        assert!(!s1.contains(Complex64::new(0.0, 0.0)));
        assert!(Wedge::new(0.5, 0.2, WedgeLabel::Custom).is_err());
    }

    #[test]
    fn empty_set_counts_zero() {
        let region = BoxRegion::new(0.0, 20.0, -3.0, 3.0).unwrap();
        let z = set(&[], region);
        assert_eq!(counting_function(&z, &Wedge::sigma1(0.1), 10.0).unwrap(), 0);
    }

    #[test]
    fn coverage_is_enforced() {
        let region = BoxRegion::new(0.0, 20.0, -1.0, 1.0).unwrap();
        let z = set(&[], region);
        assert!(counting_function(&z, &Wedge::sigma1(0.1), 9.0).is_ok());
        assert!(matches!(
            counting_function(&z, &Wedge::sigma1(0.1), 15.0),
            Err(IteError::RegionTooSmall(_))
        ));
        assert!(matches!(
            counting_function(&z, &Wedge::sigma1(0.1), 25.0),
            Err(IteError::RegionTooSmall(_))
        ));
    }

    #[test]
    fn arithmetic_progression_density() {
        let b = 2.0;
        let step = PI / (1.0 + b);
        let pts: Vec<(f64, f64)> = (1..=220).map(|j| (j as f64 * step, 0.0)).collect();
        let region = BoxRegion::new(0.0, 240.0, -30.0, 30.0).unwrap();
        let z = set(&pts, region);
        let d = wedge_density(&z, &Wedge::sigma1(0.1), (50.0, 200.0)).unwrap();
        assert!((d.delta_hat - (1.0 + b) / PI).abs() <= d.slope_error.max(1e-3));
        assert!((d.delta_hat * PI - 3.0).abs() < 0.01);
        assert!(d.counts.windows(2).all(|w| w[0].1 <= w[1].1));
    }

    #[test]
    fn too_few_zeros_is_insufficient() {
        let region = BoxRegion::new(0.0, 240.0, -30.0, 30.0).unwrap();
        let z = set(&[(1.0, 0.0), (2.0, 0.0)], region);
        assert!(matches!(
            wedge_density(&z, &Wedge::sigma1(0.1), (50.0, 200.0)),
            Err(IteError::InsufficientData(_))
        ));
    }

    #[test]
    fn reciprocal_sum_of_symmetric_set_vanishes() {
        let region = BoxRegion::new(-30.0, 30.0, -3.0, 3.0).unwrap();
        let mut pts = Vec::new();
        for (x, y) in [(1.3, 0.0), (4.5, 0.65), (7.1, 0.0), (12.25, 0.6)] {
            pts.extend([(x, y), (-x, y), (x, -y), (-x, -y)]);
        }
        pts.dedup();
        let z = set(&pts, region);
        for r in [10.0, 20.0, 30.0] {
            assert_eq!(reciprocal_sum(&z, r).unwrap(), Complex64::new(0.0, 0.0));
        }
        let small = set(&pts, BoxRegion::new(0.0, 30.0, -3.0, 3.0).unwrap());
        assert!(reciprocal_sum(&small, 10.0).is_err());
    }

    #[test]
    fn constant_four_counts_match_real_zeros_up_to_ten() {
        let p = RefractionProfile::constant(4.0).unwrap();
        let region = BoxRegion::new(0.02, 11.0, -1.5, 1.5).unwrap();
        let zs = find_zeros(&p, &region, &ZeroOptions::default()).unwrap();
        let real = crate::zeros::real_axis_zeros(&p, 10.0, &ZeroOptions::default()).unwrap();
        // the near-axis complex pairs beyond |k| = 6.5 fall in the wedge as well
        let n = counting_function(&zs, &Wedge::sigma1(0.1), 6.0).unwrap();
        let r6 = real.zeros.iter().filter(|&&x| x <= 6.0).count() as i64;
        assert_eq!(n, r6);
        let mut prev = 0;
        for i in 1..=20 {
            let c = counting_function(&zs, &Wedge::sigma1(0.1), 0.5 * i as f64).unwrap();
            assert!(c >= prev);
            prev = c;
        }
    }

    #[test]
    fn reciprocal_sum_of_computed_zeros() {
        let p = RefractionProfile::constant(4.0).unwrap();
        let region = BoxRegion::new(-30.0, 30.0, -3.0, 3.0).unwrap();
        let zs = find_zeros(&p, &region, &ZeroOptions::default()).unwrap();
        for r in [10.0, 20.0, 30.0] {
            assert!(reciprocal_sum(&zs, r).unwrap().norm() <= 1e-8);
        }
    }

    #[test]
    fn indicator_guard_band_and_symmetry() {
        let p = RefractionProfile::constant(4.0).unwrap();
        let opts = SolverOptions::default();
        assert!(indicator_estimate(&p, 0.01, &default_radii(40.0, 8), &opts, Execution::Parallel).is_err());
        let r = default_radii(60.0, 12);
        let a = indicator_estimate(&p, 0.7, &r, &opts, Execution::Parallel).unwrap();
        let b = indicator_estimate(&p, PI - 0.7, &r, &opts, Execution::Parallel).unwrap();
        let c = indicator_estimate(&p, -0.7, &r, &opts, Execution::Parallel).unwrap();
        assert!((a.h_hat - b.h_hat).abs() < 1e-6);
        assert!((a.h_hat - c.h_hat).abs() < 1e-6);
        assert!((a.h_hat - 3.0 * 0.7f64.sin()).abs() < 0.06 * 3.0 * 0.7f64.sin());
    }

    #[test]
    fn width_of_degenerate_profile_is_refused() {
        let p = RefractionProfile::constant(1.0 + 1e-9).unwrap();
        assert!(matches!(
            indicator_width(&p, 50.0, &ZeroOptions::default()),
            Err(IteError::DegenerateProfile { .. })
        ));
    }
}
