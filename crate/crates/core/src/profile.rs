//! Radial refraction index `n(r)` and its Liouville transform.
//!
//! Every supported profile is a polynomial in `r` on `[0, 1]`, so `n`, `n'`,
//! `n''` are exact and the power series needed to launch the radial ODE at
//! the origin is just the coefficient list. Outside the ball `n = 1`.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{IteError, Result};
use crate::quadrature;

/// Number of grid points used for the positivity and smoothness checks.
const CHECK_GRID: usize = 4001;
/// Boundary mismatch above which a C² warning is raised.
const SMOOTHNESS_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum ProfileKind {
    #[serde(rename = "constant")]
    Constant { value: f64 },
    /// `n(r) = sum_j coeffs[j] r^j`
    #[serde(rename = "poly")]
    Polynomial { coeffs: Vec<f64> },
    /// `n(r) = 1 + c (1 - r^2)^3`
    #[serde(rename = "smooth_bump")]
    SmoothBump { c: f64 },
}

impl ProfileKind {
    /// Power-series coefficients of `n` about `r = 0`.
    fn series(&self) -> Vec<f64> {
        match self {
            ProfileKind::Constant { value } => vec![*value],
            ProfileKind::Polynomial { coeffs } => coeffs.clone(),
            ProfileKind::SmoothBump { c } => {
                vec![1.0 + c, 0.0, -3.0 * c, 0.0, 3.0 * c, 0.0, -c]
            }
        }
    }

    fn eval_inside(&self, r: f64) -> (f64, f64, f64) {
        match self {
            ProfileKind::Constant { value } => (*value, 0.0, 0.0),
            ProfileKind::Polynomial { coeffs } => horner3(coeffs, r),
            ProfileKind::SmoothBump { c } => {
                let u = 1.0 - r * r;
                (
                    1.0 + c * u * u * u,
                    -6.0 * c * r * u * u,
                    -6.0 * c * u * u + 24.0 * c * r * r * u,
                )
            }
        }
    }
}

/// `(p, p', p'')` for a polynomial with ascending coefficients.
fn horner3(coeffs: &[f64], x: f64) -> (f64, f64, f64) {
    let mut p = 0.0;
    let mut dp = 0.0;
    let mut ddp = 0.0;
    for &c in coeffs.iter().rev() {
        ddp = ddp * x + 2.0 * dp;
        dp = dp * x + p;
        p = p * x + c;
    }
    (p, dp, ddp)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub valid: bool,
    pub min_n: f64,
    pub max_n: f64,
    /// `|n(1-) - 1|`, `|n'(1-)|`, `|n''(1-)|`
    pub boundary_jump: [f64; 3],
    pub smoothness_warning: bool,
}

/// Checks positivity on a dense grid and reports C² matching at `r = 1`.
pub fn validate(kind: &ProfileKind) -> Result<ValidationReport> {
    match kind {
        ProfileKind::Constant { value } if !value.is_finite() => {
            return Err(IteError::InvalidProfile("non-finite constant".into()))
        }
        ProfileKind::Polynomial { coeffs } if coeffs.is_empty() => {
            return Err(IteError::InvalidProfile("empty coefficient list".into()))
        }
        ProfileKind::Polynomial { coeffs } if coeffs.iter().any(|c| !c.is_finite()) => {
            return Err(IteError::InvalidProfile("non-finite coefficient".into()))
        }
        ProfileKind::SmoothBump { c } if !c.is_finite() => {
            return Err(IteError::InvalidProfile("non-finite bump amplitude".into()))
        }
        _ => {}
    }
    let mut min_n = f64::INFINITY;
    let mut max_n = f64::NEG_INFINITY;
    let mut min_at = 0.0;
    for i in 0..CHECK_GRID {
        let r = i as f64 / (CHECK_GRID - 1) as f64;
        let (n, _, _) = kind.eval_inside(r);
        if n < min_n {
            min_n = n;
            min_at = r;
        }
        max_n = max_n.max(n);
    }
    if !(min_n > 0.0) {
        return Err(IteError::InvalidProfile(format!(
            "n(r) = {min_n} <= 0 at r = {min_at}"
        )));
    }
    let (n1, dn1, ddn1) = kind.eval_inside(1.0);
    let boundary_jump = [(n1 - 1.0).abs(), dn1.abs(), ddn1.abs()];
    Ok(ValidationReport {
        valid: true,
        min_n,
        max_n,
        boundary_jump,
        smoothness_warning: boundary_jump.iter().any(|&j| j > SMOOTHNESS_FLOOR),
    })
}

/// A validated refraction index. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct RefractionProfile {
    kind: ProfileKind,
    series: Vec<f64>,
    sqrt_n_max: f64,
    report: ValidationReport,
}

impl RefractionProfile {
    pub fn new(kind: ProfileKind) -> Result<Self> {
        let report = validate(&kind)?;
        let series = kind.series();
        Ok(Self {
            sqrt_n_max: report.max_n.sqrt(),
            kind,
            series,
            report,
        })
    }

    pub fn constant(value: f64) -> Result<Self> {
        Self::new(ProfileKind::Constant { value })
    }

    pub fn polynomial(coeffs: Vec<f64>) -> Result<Self> {
        Self::new(ProfileKind::Polynomial { coeffs })
    }

    pub fn smooth_bump(c: f64) -> Result<Self> {
        Self::new(ProfileKind::SmoothBump { c })
    }

    pub fn kind(&self) -> &ProfileKind {
        &self.kind
    }

    pub fn report(&self) -> &ValidationReport {
        &self.report
    }

    /// Power-series coefficients of `n` about the origin.
    pub fn series(&self) -> &[f64] {
        &self.series
    }

    /// `sup sqrt(n)` over `[0, 1]` (grid estimate).
    pub fn sqrt_n_max(&self) -> f64 {
        self.sqrt_n_max
    }

    /// `(n, n', n'')` at `r >= 0`; identically `(1, 0, 0)` for `r >= 1`.
    pub fn evaluate(&self, r: f64) -> (f64, f64, f64) {
        if r >= 1.0 {
            (1.0, 0.0, 0.0)
        } else {
            self.kind.eval_inside(r)
        }
    }

    /// Interior values on the closed interval `[0, 1]`, including the one-sided limit at `r = 1`.
    pub fn inside(&self, r: f64) -> (f64, f64, f64) {
        self.kind.eval_inside(r.min(1.0))
    }

    pub fn n_inside(&self, r: f64) -> f64 {
        self.inside(r).0
    }

    /// Content hash of the canonical JSON form (hex SHA-256).
    pub fn content_hash(&self) -> String {
        let canonical = serde_json::to_string(&self.kind).expect("profile serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.kind).expect("profile serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let kind: ProfileKind =
            serde_json::from_str(s).map_err(|e| IteError::ParseError(format!("profile: {e}")))?;
        Self::new(kind)
    }

    pub fn liouville(&self, quad_tol: f64) -> Result<LiouvilleMap> {
        compute_liouville(self, quad_tol)
    }
}

/// Tabulated Liouville map `xi(r) = int_0^r sqrt(n)` and its inverse.
#[derive(Debug, Clone)]
pub struct LiouvilleMap {
    profile: RefractionProfile,
    b: f64,
    nodes_r: Vec<f64>,
    nodes_xi: Vec<f64>,
    /// Fritsch–Carlson-limited slopes `dr/dxi` at the nodes.
    slopes: Vec<f64>,
}

/// Builds the Liouville map by adaptive quadrature of `sqrt(n)` on `[0, 1]`.
pub fn compute_liouville(profile: &RefractionProfile, quad_tol: f64) -> Result<LiouvilleMap> {
    if !(quad_tol > 0.0) {
        return Err(IteError::DomainError(format!(
            "quadrature tolerance must be positive, got {quad_tol}"
        )));
    }
    let f = |r: f64| profile.n_inside(r).sqrt();
    let panels = quadrature::adaptive(&f, 0.0, 1.0, quad_tol, 32, 4096)?;
    let mut nodes_r = Vec::with_capacity(panels.len() + 1);
    let mut nodes_xi = Vec::with_capacity(panels.len() + 1);
    nodes_r.push(0.0);
    nodes_xi.push(0.0);
    let mut acc = 0.0;
    for p in &panels {
        acc += p.value;
        nodes_r.push(p.b);
        nodes_xi.push(acc);
    }
    let b = acc;
    let slopes = monotone_slopes(&nodes_xi, &nodes_r, |r| 1.0 / profile.n_inside(r).sqrt());
    Ok(LiouvilleMap {
        profile: profile.clone(),
        b,
        nodes_r,
        nodes_xi,
        slopes,
    })
}

/// Hermite slopes from exact derivatives, limited so each cubic piece stays monotone.
fn monotone_slopes(x: &[f64], y: &[f64], dydx: impl Fn(f64) -> f64) -> Vec<f64> {
    let mut d: Vec<f64> = y.iter().map(|&yi| dydx(yi)).collect();
    for i in 0..x.len() - 1 {
        let delta = (y[i + 1] - y[i]) / (x[i + 1] - x[i]);
        let a = d[i] / delta;
        let b = d[i + 1] / delta;
        let s = a * a + b * b;
        if s > 9.0 {
            let t = 3.0 / s.sqrt();
            d[i] = t * a * delta;
            d[i + 1] = t * b * delta;
        }
    }
    d
}

impl LiouvilleMap {
    /// Optical radius `B = int_0^1 sqrt(n)`.
    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn profile(&self) -> &RefractionProfile {
        &self.profile
    }

    pub fn nodes(&self) -> (&[f64], &[f64]) {
        (&self.nodes_r, &self.nodes_xi)
    }

    fn segment_of(nodes: &[f64], x: f64) -> usize {
        match nodes.binary_search_by(|v| v.total_cmp(&x)) {
            Ok(i) => i.min(nodes.len() - 2),
            Err(i) => i.saturating_sub(1).min(nodes.len() - 2),
        }
    }

    /// `xi(r)` for `r` in `[0, 1]`: tabulated value plus one Kronrod panel.
    pub fn xi_of_r(&self, r: f64) -> f64 {
        let r = r.clamp(0.0, 1.0);
        let j = Self::segment_of(&self.nodes_r, r);
        let lo = self.nodes_r[j];
        if r == lo {
            return self.nodes_xi[j];
        }
        let f = |s: f64| self.profile.n_inside(s).sqrt();
        self.nodes_xi[j] + quadrature::gk15(&f, lo, r).0
    }

    /// Inverse map `r(xi)` for `xi` in `[0, B]`: monotone cubic guess, then Newton polish.
    pub fn r_of_xi(&self, xi: f64) -> f64 {
        let xi = xi.clamp(0.0, self.b);
        let j = Self::segment_of(&self.nodes_xi, xi);
        let (x0, x1) = (self.nodes_xi[j], self.nodes_xi[j + 1]);
        let (y0, y1) = (self.nodes_r[j], self.nodes_r[j + 1]);
        let h = x1 - x0;
        let t = (xi - x0) / h;
        let (t2, t3) = (t * t, t * t * t);
        let mut r = (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * h * self.slopes[j]
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * h * self.slopes[j + 1];
        let f = |s: f64| self.profile.n_inside(s).sqrt();
        for _ in 0..4 {
            let g = self.nodes_xi[j] + quadrature::gk15(&f, y0, r).0 - xi;
            let step = g / f(r);
            r = (r - step).clamp(y0, y1);
            if step.abs() <= 1e-16 * r.max(1e-300) {
                break;
            }
        }
        r
    }

    /// `(p, q)` at `xi` in `(0, B]`, with `q = p - 2/xi^2`.
    pub fn potential(&self, xi: f64) -> Result<(f64, f64)> {
        if !(xi > 0.0 && xi <= self.b) {
            return Err(IteError::DomainError(format!(
                "xi = {xi} outside (0, {}]",
                self.b
            )));
        }
        let r = self.r_of_xi(xi);
        let p = self.p_at_r(r);
        Ok((p, p - 2.0 / (xi * xi)))
    }

    /// `p` as a function of `r`; the callable form used by the shooting solvers.
    pub fn p_at_r(&self, r: f64) -> f64 {
        let (n, dn, ddn) = self.profile.inside(r);
        ddn / (4.0 * n * n) - 5.0 / 16.0 * dn * dn / (n * n * n) + 2.0 / (r * r * n)
    }

    /// `p(xi)` without domain checks (callers integrate strictly inside `(0, B]`).
    pub fn p_of_xi(&self, xi: f64) -> f64 {
        self.p_at_r(self.r_of_xi(xi))
    }

    /// `(sup |q|, int |q|)` on `(0, B]` from a midpoint grid. Both are reported because
    /// the norm in the large-`k` remainder bound is not pinned down.
    pub fn q_norms(&self, samples: usize) -> (f64, f64) {
        let samples = samples.max(2);
        let h = self.b / samples as f64;
        let mut sup: f64 = 0.0;
        let mut l1 = 0.0;
        for i in 0..samples {
            let xi = (i as f64 + 0.5) * h;
            let q = self.p_of_xi(xi) - 2.0 / (xi * xi);
            sup = sup.max(q.abs());
            l1 += q.abs() * h;
        }
        (sup, l1)
    }

    /// Leading coefficient `n(0)^{-3/4}` that makes `z = n^{1/4} y` hold for the
    /// unit-normalized radial solution.
    pub fn z_normalization(&self) -> f64 {
        self.profile.n_inside(0.0).powf(-0.75)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
        let h = (b - a) / m as f64;
        let mut s = f(a) + f(b);
        for i in 1..m {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn evaluate_examples() {
        let c4 = RefractionProfile::constant(4.0).unwrap();
        assert_eq!(c4.evaluate(0.5), (4.0, 0.0, 0.0));
        assert_eq!(c4.evaluate(1.0), (1.0, 0.0, 0.0));
        assert_eq!(c4.evaluate(7.0), (1.0, 0.0, 0.0));
        let bump = RefractionProfile::smooth_bump(3.0).unwrap();
        assert_eq!(bump.evaluate(1.0), (1.0, 0.0, 0.0));
        let (n, dn, ddn) = bump.evaluate(0.0);
        assert_eq!((n, dn), (4.0, 0.0));
        // d^2/dr^2 [1 + 3(1 - r^2)^3] = 3 * (-6(1-r^2)^2 + 24 r^2 (1-r^2)) -> -18 at 0
        assert_relative_eq!(ddn, -18.0, epsilon = 1e-14);
    }

    #[test]
    fn interior_limit_at_boundary() {
        let bump = RefractionProfile::smooth_bump(3.0).unwrap();
        let (n, dn, ddn) = bump.inside(1.0);
        assert_eq!((n, dn, ddn), (1.0, 0.0, 0.0));
        let c4 = RefractionProfile::constant(4.0).unwrap();
        assert_eq!(c4.inside(1.0).0, 4.0);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let kinds = [
            ProfileKind::SmoothBump { c: 3.0 },
            ProfileKind::Polynomial {
                coeffs: vec![2.0, 0.3, -0.5, 0.1],
            },
        ];
        for kind in kinds {
            let p = RefractionProfile::new(kind).unwrap();
            let h = 1e-4;
            for i in 1..20 {
                let r = i as f64 / 20.0;
                let (_, dn, ddn) = p.inside(r);
                let fd1 = (p.inside(r + h).0 - p.inside(r - h).0) / (2.0 * h);
                let fd2 = (p.inside(r + h).1 - p.inside(r - h).1) / (2.0 * h);
                assert!((fd1 - dn).abs() < 2e-5, "n' at {r}");
                assert!((fd2 - ddn).abs() < 2e-5, "n'' at {r}");
            }
        }
    }

    #[test]
    fn polynomial_series_matches_evaluation() {
        let bump = RefractionProfile::smooth_bump(3.0).unwrap();
        for i in 0..=10 {
            let r = i as f64 / 10.0;
            let (n, _, _) = horner3(bump.series(), r);
            assert!((n - bump.inside(r).0).abs() < 1e-13);
        }
    }

    #[test]
    fn validation_examples() {
        let c4 = validate(&ProfileKind::Constant { value: 4.0 }).unwrap();
        assert!(c4.valid && c4.smoothness_warning);
        let bump = validate(&ProfileKind::SmoothBump { c: 3.0 }).unwrap();
        assert!(bump.valid && !bump.smoothness_warning);
        // linear profile with n(0.7) = -0.1
        let bad = ProfileKind::Polynomial {
            coeffs: vec![1.0, -1.1 / 0.7],
        };
        assert!(matches!(validate(&bad), Err(IteError::InvalidProfile(_))));
        assert!(RefractionProfile::new(bad).is_err());
        assert!(RefractionProfile::constant(0.0).is_err());
        assert!(RefractionProfile::polynomial(vec![]).is_err());
    }

    #[test]
    fn liouville_constant_profiles() {
        let m4 = RefractionProfile::constant(4.0).unwrap().liouville(1e-12).unwrap();
        assert_relative_eq!(m4.b(), 2.0, epsilon = 1e-14);
        let m1 = RefractionProfile::constant(1.0).unwrap().liouville(1e-12).unwrap();
        assert_relative_eq!(m1.b(), 1.0, epsilon = 1e-14);
        for i in 0..=20 {
            let r = i as f64 / 20.0;
            assert!((m1.xi_of_r(r) - r).abs() < 1e-15);
            assert!((m1.r_of_xi(r) - r).abs() < 1e-15);
        }
    }

    #[test]
    fn liouville_bump_matches_simpson_oracle() {
        let bump = RefractionProfile::smooth_bump(3.0).unwrap();
        let map = bump.liouville(1e-12).unwrap();
        let f = |r: f64| (1.0 + 3.0 * (1.0 - r * r).powi(3)).sqrt();
        let oracle = simpson(f, 0.0, 1.0, 20_000);
        assert!((map.b() - oracle).abs() < 1e-10, "{} vs {}", map.b(), oracle);
    }

    #[test]
    fn liouville_map_invariants() {
        let bump = RefractionProfile::smooth_bump(3.0).unwrap();
        let map = bump.liouville(1e-12).unwrap();
        assert_eq!(map.xi_of_r(0.0), 0.0);
        assert_relative_eq!(map.xi_of_r(1.0), map.b(), epsilon = 1e-14);
        let (_, xs) = map.nodes();
        assert!(xs.windows(2).all(|w| w[1] > w[0]));
        for i in 0..=200 {
            let r = i as f64 / 200.0;
            assert!((map.r_of_xi(map.xi_of_r(r)) - r).abs() < 1e-13, "r = {r}");
        }
        // slope of the map is sqrt(n)
        let h = 1e-5;
        for i in 1..50 {
            let r = i as f64 / 50.0;
            let slope = (map.xi_of_r(r + h) - map.xi_of_r(r - h)) / (2.0 * h);
            assert!((slope - bump.inside(r).0.sqrt()).abs() < 1e-8);
        }
    }

    #[test]
    fn potential_examples() {
        let m4 = RefractionProfile::constant(4.0).unwrap().liouville(1e-12).unwrap();
        let (p, q) = m4.potential(1.0).unwrap();
        assert_relative_eq!(p, 2.0, epsilon = 1e-13);
        assert!(q.abs() < 1e-13);
        let m1 = RefractionProfile::constant(1.0).unwrap().liouville(1e-12).unwrap();
        let (p, q) = m1.potential(0.5).unwrap();
        assert_relative_eq!(p, 8.0, epsilon = 1e-13);
        assert!(q.abs() < 1e-12);
        assert!(matches!(m1.potential(0.0), Err(IteError::DomainError(_))));
        assert!(matches!(m1.potential(1.5), Err(IteError::DomainError(_))));
    }

    #[test]
    fn q_vanishes_for_constant_profiles() {
        for n0 in [0.5, 2.0, 4.0, 9.0] {
            let map = RefractionProfile::constant(n0).unwrap().liouville(1e-12).unwrap();
            for i in 1..=40 {
                let xi = map.b() * i as f64 / 40.0;
                let (p, q) = map.potential(xi).unwrap();
                assert!(q.abs() <= 1e-13 * p, "n0={n0} xi={xi} q={q}");
            }
        }
    }

    #[test]
    fn potential_bump_matches_symbolic_oracle() {
        let bump = RefractionProfile::smooth_bump(3.0).unwrap();
        let map = bump.liouville(1e-12).unwrap();
        let xi = map.b() / 2.0;
        // independent inversion of xi(r) = xi by bisection on a Simpson integral
        let f = |r: f64| (1.0 + 3.0 * (1.0 - r * r).powi(3)).sqrt();
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if simpson(f, 0.0, mid, 4000) < xi {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let r = 0.5 * (lo + hi);
        let u = 1.0 - r * r;
        let n = 1.0 + 3.0 * u.powi(3);
        let dn = -18.0 * r * u * u;
        let ddn = -18.0 * u * u + 72.0 * r * r * u;
        let p_oracle = ddn / (4.0 * n * n) - 5.0 / 16.0 * dn * dn / n.powi(3) + 2.0 / (r * r * n);
        let (p, q) = map.potential(xi).unwrap();
        assert!((p - p_oracle).abs() < 1e-9 * p_oracle.abs());
        assert!(q.is_finite() && q.abs() < 100.0);
    }

    #[test]
    fn optical_radius_is_monotone_in_the_profile() {
        let mut last = 0.0;
        for n0 in [0.25, 1.0, 2.0, 4.0, 4.41, 9.0] {
            let b = RefractionProfile::constant(n0).unwrap().liouville(1e-12).unwrap().b();
            assert!(b > last);
            assert_relative_eq!(b, f64::sqrt(n0), epsilon = 1e-13);
            last = b;
        }
    }

    #[test]
    fn json_format() {
        let p = RefractionProfile::from_json(r#"{"kind":"constant","value":4.0}"#).unwrap();
        assert_eq!(p.kind(), &ProfileKind::Constant { value: 4.0 });
        let p = RefractionProfile::from_json(r#"{"kind":"poly","coeffs":[2.0,0.0,-0.5]}"#).unwrap();
        assert_eq!(p.series(), &[2.0, 0.0, -0.5]);
        let p = RefractionProfile::from_json(r#"{"kind":"smooth_bump","c":3.0}"#).unwrap();
        assert_eq!(p.to_json(), r#"{"kind":"smooth_bump","c":3.0}"#);
        assert!(matches!(
            RefractionProfile::from_json(r#"{"kind":"spline"}"#),
            Err(IteError::ParseError(_))
        ));
        let a = RefractionProfile::constant(4.0).unwrap();
        let b = RefractionProfile::constant(4.0).unwrap();
        let c = RefractionProfile::constant(4.41).unwrap();
        assert_eq!(a.content_hash(), b.content_hash());
        assert_ne!(a.content_hash(), c.content_hash());
        assert_eq!(a.content_hash().len(), 64);
    }
}
