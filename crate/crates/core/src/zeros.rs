//! Zeros of `D(k)` in rectangles: argument-principle counting with recursive
//! subdivision, Newton polishing, and a real-axis scan.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Mutex;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::determinant::{eval_d, eval_d_dk, DeterminantValue};
use crate::error::{IteError, Result};
use crate::exec::{self, Execution};
use crate::profile::RefractionProfile;
use crate::radial::SolverOptions;
use crate::scaled::ScaledComplex;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxRegion {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl BoxRegion {
    pub fn new(re_min: f64, re_max: f64, im_min: f64, im_max: f64) -> Result<Self> {
        let b = BoxRegion {
            re_min,
            re_max,
            im_min,
            im_max,
        };
        b.check()?;
        Ok(b)
    }

    pub fn check(&self) -> Result<()> {
        let finite = [self.re_min, self.re_max, self.im_min, self.im_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.re_min >= self.re_max || self.im_min >= self.im_max {
            return Err(IteError::DomainError(format!("degenerate box {self:?}")));
        }
        Ok(())
    }

    /// Square of half-width `h` centred at `k`.
    pub fn around(k: Complex64, h: f64) -> Self {
        BoxRegion {
            re_min: k.re - h,
            re_max: k.re + h,
            im_min: k.im - h,
            im_max: k.im + h,
        }
    }

    pub fn width(&self) -> f64 {
        self.re_max - self.re_min
    }

    pub fn height(&self) -> f64 {
        self.im_max - self.im_min
    }

    pub fn size(&self) -> f64 {
        self.width().max(self.height())
    }

    pub fn centre(&self) -> Complex64 {
        Complex64::new(
            0.5 * (self.re_min + self.re_max),
            0.5 * (self.im_min + self.im_max),
        )
    }

    /// Closed containment with an absolute slack.
    pub fn contains(&self, k: Complex64, slack: f64) -> bool {
        k.re >= self.re_min - slack
            && k.re <= self.re_max + slack
            && k.im >= self.im_min - slack
            && k.im <= self.im_max + slack
    }

    pub fn corners(&self) -> [Complex64; 4] {
        [
            Complex64::new(self.re_min, self.im_min),
            Complex64::new(self.re_max, self.im_min),
            Complex64::new(self.re_max, self.im_max),
            Complex64::new(self.re_min, self.im_max),
        ]
    }

    /// Scales the box about its centre.
    pub fn dilate(&self, factor: f64) -> Self {
        let c = self.centre();
        let hw = 0.5 * self.width() * factor;
        let hh = 0.5 * self.height() * factor;
        BoxRegion {
            re_min: c.re - hw,
            re_max: c.re + hw,
            im_min: c.im - hh,
            im_max: c.im + hh,
        }
    }

    /// Four children cut at fractions `fx` of the width and `fy` of the height.
    pub fn quad_split(&self, fx: f64, fy: f64) -> [BoxRegion; 4] {
        let xm = self.re_min + fx * self.width();
        let ym = self.im_min + fy * self.height();
        [
            BoxRegion { re_max: xm, im_max: ym, ..*self },
            BoxRegion { re_min: xm, im_max: ym, ..*self },
            BoxRegion { re_min: xm, im_min: ym, ..*self },
            BoxRegion { re_max: xm, im_min: ym, ..*self },
        ]
    }

    /// Grid of tiles with aspect ratio at most 2, cut off-centre.
    pub fn tiles(&self, offset: f64) -> Vec<BoxRegion> {
        let (w, h) = (self.width(), self.height());
        let nx = if w > 2.0 * h { (w / h).ceil() as usize } else { 1 };
        let ny = if h > 2.0 * w { (h / w).ceil() as usize } else { 1 };
        let cut = |lo: f64, len: f64, n: usize, i: usize| -> f64 {
            if i == 0 {
                lo
            } else {
                lo + len * (i as f64 + offset * (0.5 - frac(GOLDEN * i as f64))) / n as f64
            }
        };
        let xs: Vec<f64> = (0..=nx)
            .map(|i| if i == nx { self.re_max } else { cut(self.re_min, w, nx, i) })
            .collect();
        let ys: Vec<f64> = (0..=ny)
            .map(|i| if i == ny { self.im_max } else { cut(self.im_min, h, ny, i) })
            .collect();
        let mut out = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                out.push(BoxRegion {
                    re_min: xs[i],
                    re_max: xs[i + 1],
                    im_min: ys[j],
                    im_max: ys[j + 1],
                });
            }
        }
        out
    }
}

const GOLDEN: f64 = 0.618_033_988_749_894_8;

fn frac(x: f64) -> f64 {
    x - x.floor()
}

/// Off-centre cut fractions tried in turn when a cut line meets a zero.
const SPLITS: [(f64, f64); 6] = [
    (0.512_345, 0.478_123),
    (0.463_271, 0.537_913),
    (0.541_829, 0.449_617),
    (0.437_516, 0.521_389),
    (0.558_203, 0.556_749),
    (0.426_877, 0.431_152),
];

/// A function value on the contour with the log of its local scale.
#[derive(Debug, Clone, Copy)]
pub struct Sample {
    pub value: ScaledComplex,
    pub log_scale: f64,
}

impl Sample {
    fn below(&self, log_floor: f64) -> bool {
        self.value.is_zero()
            || !self.value.is_finite()
            || self.value.ln_abs() < self.log_scale + log_floor
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContourOptions {
    /// Minimum number of samples per edge.
    pub samples: usize,
    /// Target spacing of the initial samples (absolute).
    pub spacing: f64,
    pub max_depth: u32,
    /// Relative floor below which a contour sample counts as a zero.
    pub floor: f64,
}

impl Default for ContourOptions {
    fn default() -> Self {
        ContourOptions {
            samples: 8,
            spacing: f64::INFINITY,
            max_depth: 24,
            floor: 1e-11,
        }
    }
}

/// Points on the segment `[a, b)`, computed from a canonical endpoint so that
/// the reversed segment yields bitwise identical points.
fn edge_points(a: Complex64, b: Complex64, n: usize) -> Vec<Complex64> {
    let forward = (a.re, a.im) <= (b.re, b.im);
    let (p, q) = if forward { (a, b) } else { (b, a) };
    let at = |i: usize| -> Complex64 {
        if i == 0 {
            p
        } else if i == n {
            q
        } else {
            let t = i as f64 / n as f64;
            Complex64::new(p.re + (q.re - p.re) * t, p.im + (q.im - p.im) * t)
        }
    };
    if forward {
        (0..n).map(at).collect()
    } else {
        (1..=n).rev().map(at).collect()
    }
}

#[derive(Clone, Copy)]
struct Node {
    k: Complex64,
    depth: u32,
}

fn contour_nodes(b: &BoxRegion, opts: &ContourOptions) -> Vec<Node> {
    let c = b.corners();
    let mut nodes = Vec::new();
    for e in 0..4 {
        let (p, q) = (c[e], c[(e + 1) % 4]);
        let len = (q - p).norm();
        // D always vanishes to high order at the origin; resolve its phase on nearby edges
        let near = len / (0.1 * segment_distance(p, q, Complex64::new(0.0, 0.0)).max(1e-300));
        let n = opts
            .samples
            .max((len / opts.spacing).ceil().min(1e7) as usize)
            .max(near.ceil().min(1e5) as usize)
            .max(1);
        nodes.extend(edge_points(p, q, n).into_iter().map(|k| Node { k, depth: 0 }));
    }
    nodes
}

fn segment_distance(p: Complex64, q: Complex64, x: Complex64) -> f64 {
    let d = q - p;
    let t = ((x - p).re * d.re + (x - p).im * d.im) / d.norm_sqr();
    (p + d * t.clamp(0.0, 1.0) - x).norm()
}

fn key(k: Complex64) -> (u64, u64) {
    // canonicalize signed zeros
    ((k.re + 0.0).to_bits(), (k.im + 0.0).to_bits())
}

/// Memoizing batch evaluator shared by all contours of one search.
struct Cache<F> {
    f: F,
    map: Mutex<HashMap<(u64, u64), Sample>>,
}

impl<F> Cache<F>
where
    F: Fn(&[Complex64]) -> Result<Vec<Sample>>,
{
    fn new(f: F) -> Self {
        Cache {
            f,
            map: Mutex::new(HashMap::new()),
        }
    }

    fn fill(&self, ks: &[Complex64]) -> Result<()> {
        let mut todo: Vec<Complex64> = {
            let map = self.map.lock().expect("cache lock");
            ks.iter().copied().filter(|k| !map.contains_key(&key(*k))).collect()
        };
        todo.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).expect("finite"));
        todo.dedup_by(|a, b| key(*a) == key(*b));
        if todo.is_empty() {
            return Ok(());
        }
        let vals = (self.f)(&todo)?;
        let mut map = self.map.lock().expect("cache lock");
        for (k, v) in todo.into_iter().zip(vals) {
            map.insert(key(k), v);
        }
        Ok(())
    }

    fn get(&self, k: Complex64) -> Sample {
        *self.map.lock().expect("cache lock").get(&key(k)).expect("sample cached")
    }

    fn len(&self) -> usize {
        self.map.lock().expect("cache lock").len()
    }
}

/// Windings of several boxes, refining all contours in shared rounds.
fn windings_batch<F>(cache: &Cache<F>, boxes: &[BoxRegion], opts: &ContourOptions) -> Result<Vec<Result<i64>>>
where
    F: Fn(&[Complex64]) -> Result<Vec<Sample>>,
{
    let log_floor = opts.floor.ln();
    let mut contours: Vec<Vec<Node>> = boxes.iter().map(|b| contour_nodes(b, opts)).collect();
    let mut status: Vec<Option<Result<i64>>> = vec![None; boxes.len()];
    let all: Vec<Complex64> = contours.iter().flatten().map(|n| n.k).collect();
    cache.fill(&all)?;
    loop {
        let mut pending = Vec::new();
        for (ci, nodes) in contours.iter_mut().enumerate() {
            if status[ci].is_some() {
                continue;
            }
            let vals: Vec<Sample> = nodes.iter().map(|n| cache.get(n.k)).collect();
            if let Some(i) = vals.iter().position(|s| s.below(log_floor)) {
                let k = nodes[i].k;
                status[ci] = Some(Err(IteError::BoundaryZero { re: k.re, im: k.im }));
                continue;
            }
            let m = nodes.len();
            let mut refined = Vec::with_capacity(m);
            let mut total = 0.0;
            let mut split = false;
            let mut stuck: Option<Complex64> = None;
            for i in 0..m {
                let j = (i + 1) % m;
                let d = vals[j].value.ratio(&vals[i].value).arg();
                refined.push(nodes[i]);
                if d.abs() >= 0.5 * PI {
                    let depth = nodes[i].depth.max(nodes[j].depth);
                    if depth >= opts.max_depth {
                        stuck = Some(nodes[i].k);
                        break;
                    }
                    let mid = 0.5 * (nodes[i].k + nodes[j].k);
                    refined.push(Node { k: mid, depth: depth + 1 });
                    pending.push(mid);
                    split = true;
                } else {
                    total += d;
                }
            }
            if let Some(k) = stuck {
                status[ci] = Some(Err(IteError::BoundaryZero { re: k.re, im: k.im }));
            } else if split {
                *nodes = refined;
            } else {
                let w = total / (2.0 * PI);
                let r = w.round();
                status[ci] = Some(if (w - r).abs() < 0.25 {
                    Ok(r as i64)
                } else {
                    let k = nodes[0].k;
                    Err(IteError::BoundaryZero { re: k.re, im: k.im })
                });
            }
        }
        if pending.is_empty() {
            break;
        }
        cache.fill(&pending)?;
    }
    Ok(status.into_iter().map(|s| s.expect("all contours resolved")).collect())
}

/// Winding number of `f` around the boundary of `region`, using `samples0`
/// initial samples per edge and an absolute floor of `1e-300`.
pub fn winding_number<F>(f: F, region: &BoxRegion, samples0: usize) -> Result<i64>
where
    F: Fn(Complex64) -> Complex64,
{
    region.check()?;
    let cache = Cache::new(|ks: &[Complex64]| {
        Ok(ks
            .iter()
            .map(|&k| Sample {
                value: ScaledComplex::from_complex(f(k)),
                log_scale: 0.0,
            })
            .collect())
    });
    let opts = ContourOptions {
        samples: samples0.max(1),
        floor: 1e-300,
        ..Default::default()
    };
    windings_batch(&cache, &[*region], &opts)?.remove(0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeroOptions {
    /// Newton stopping tolerance on `|dk|`.
    pub refine_tol: f64,
    pub max_newton: usize,
    pub contour: ContourOptions,
    /// Smallest box edge before a persistent winding > 1 is reported.
    pub min_box: f64,
    /// Box size below which a winding > 1 is treated as one multiple zero.
    pub cluster_size: f64,
    pub max_dilations: u32,
    /// `|D| / termscale` below which the determinant is considered identically zero.
    pub degenerate_floor: f64,
    /// Accepted `|D| / termscale` at a refined zero.
    pub residual_max: f64,
    pub symmetry_completion: bool,
    pub solver: SolverOptions,
    pub exec: Execution,
}

impl Default for ZeroOptions {
    fn default() -> Self {
        ZeroOptions {
            refine_tol: 1e-10,
            max_newton: 50,
            contour: ContourOptions::default(),
            min_box: 1e-9,
            cluster_size: 0.05,
            max_dilations: 8,
            degenerate_floor: 1e-6,
            residual_max: 1e-8,
            symmetry_completion: true,
            solver: SolverOptions::default(),
            exec: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Zero {
    pub re: f64,
    pub im: f64,
    pub mult: u32,
    /// `|D(k)| / termscale` at the refined point.
    #[serde(default)]
    pub residual: f64,
}

impl Zero {
    pub fn k(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchDiagnostics {
    pub evaluations: usize,
    pub boxes: usize,
    pub dilations: u32,
    pub split_retries: usize,
    pub unconfirmed: usize,
    pub max_residual: f64,
    /// Sum of multiplicities equals the region winding.
    pub conserved: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroSet {
    pub profile_hash: String,
    pub region: BoxRegion,
    pub zeros: Vec<Zero>,
    #[serde(default)]
    pub total_winding: i64,
    #[serde(default)]
    pub diagnostics: SearchDiagnostics,
}

impl ZeroSet {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("zero set serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let z: ZeroSet = serde_json::from_str(s).map_err(|e| {
            IteError::ParseError(format!("zero set, line {} column {}: {e}", e.line(), e.column()))
        })?;
        z.region.check()?;
        Ok(z)
    }

    pub fn total_multiplicity(&self) -> i64 {
        self.zeros.iter().map(|z| z.mult as i64).sum()
    }

    pub fn points(&self) -> Vec<Complex64> {
        self.zeros.iter().map(Zero::k).collect()
    }
}

fn sample_d(profile: &RefractionProfile, ks: &[Complex64], opts: &ZeroOptions) -> Result<Vec<Sample>> {
    exec::try_map(opts.exec, ks, |&k| {
        eval_d(profile, k, &opts.solver).map(|d| Sample {
            value: d.value,
            log_scale: d.log_termscale,
        })
    })
}

/// Halton points in the box.
fn halton(region: &BoxRegion, n: usize) -> Vec<Complex64> {
    let radical = |mut i: usize, base: usize| -> f64 {
        let mut f = 1.0;
        let mut r = 0.0;
        while i > 0 {
            f /= base as f64;
            r += f * (i % base) as f64;
            i /= base;
        }
        r
    };
    (1..=n)
        .map(|i| {
            Complex64::new(
                region.re_min + region.width() * radical(i, 2),
                region.im_min + region.height() * radical(i, 3),
            )
        })
        .collect()
}

/// Raises `DegenerateProfile` when `D` is negligible against its term scale at 16 points of the region.
pub fn check_degenerate(profile: &RefractionProfile, region: &BoxRegion, opts: &ZeroOptions) -> Result<()> {
    let pts = halton(region, 16);
    let vals = exec::try_map(opts.exec, &pts, |&k| eval_d(profile, k, &opts.solver))?;
    let degenerate = vals
        .iter()
        .all(|d| d.relative() <= opts.degenerate_floor);
    if degenerate {
        return Err(IteError::DegenerateProfile {
            floor: opts.degenerate_floor,
        });
    }
    Ok(())
}

fn muller<F>(f: &F, k0: Complex64, tol: f64, max_iter: usize, max_drift: f64) -> Result<Complex64>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    let h = 1e-3 * (1.0 + k0.norm());
    let (mut x0, mut x1, mut x2) = (k0 - h, k0 + h, k0);
    let (mut f0, mut f1, mut f2) = (f(x0)?, f(x1)?, f(x2)?);
    for _ in 0..max_iter {
        if f2 == Complex64::new(0.0, 0.0) {
            return Ok(x2);
        }
        let h1 = x1 - x0;
        let h2 = x2 - x1;
        let d1 = (f1 - f0) / h1;
        let d2 = (f2 - f1) / h2;
        let a = (d2 - d1) / (h2 + h1);
        let b = a * h2 + d2;
        let disc = (b * b - 4.0 * a * f2).sqrt();
        let den = if (b + disc).norm() > (b - disc).norm() { b + disc } else { b - disc };
        let dx = if den.norm() == 0.0 { Complex64::new(h, 0.0) } else { -2.0 * f2 / den };
        let x3 = x2 + dx;
        if !(x3.re.is_finite() && x3.im.is_finite()) || (x3 - k0).norm() > max_drift {
            break;
        }
        if dx.norm() < tol {
            return Ok(x3);
        }
        x0 = x1;
        f0 = f1;
        x1 = x2;
        f1 = f2;
        x2 = x3;
        f2 = f(x3)?;
    }
    Err(IteError::NoConvergence {
        iterations: max_iter,
        re: k0.re,
        im: k0.im,
    })
}

/// Newton iteration `k <- k - m D/D'`; Muller on derivative breakdown.
fn newton(
    profile: &RefractionProfile,
    k0: Complex64,
    mult: u32,
    tol: f64,
    max_iter: usize,
    max_drift: f64,
    opts: &SolverOptions,
) -> Result<(Complex64, DeterminantValue)> {
    let fail = || IteError::NoConvergence {
        iterations: max_iter,
        re: k0.re,
        im: k0.im,
    };
    let mut k = k0;
    for _ in 0..max_iter {
        let d = eval_d_dk(profile, k, opts)?;
        if d.value.is_zero() {
            return Ok((k, d));
        }
        let dk = d.dk.expect("derivative requested");
        let step = d.value.ratio(&dk) * mult as f64;
        if dk.is_zero() || !(step.re.is_finite() && step.im.is_finite()) {
            // Muller works on a rescaled D to keep values representable
            let e = d.value.exp2();
            let g = |x: Complex64| -> Result<Complex64> {
                Ok(eval_d(profile, x, opts)?.value.mul_pow2(-e).to_complex())
            };
            let km = muller(&g, k, tol, max_iter, max_drift).map_err(|_| fail())?;
            let dm = eval_d(profile, km, opts)?;
            return Ok((km, dm));
        }
        k -= step;
        if (k - k0).norm() > max_drift {
            return Err(fail());
        }
        if step.norm() < tol {
            let d = eval_d(profile, k, opts)?;
            return Ok((k, d));
        }
    }
    Err(fail())
}

/// Real-restricted Newton for zeros that sit on the real axis.
fn snap_real(profile: &RefractionProfile, x0: f64, tol: f64, opts: &SolverOptions) -> Result<Option<f64>> {
    let mut x = x0;
    for _ in 0..12 {
        let d = eval_d_dk(profile, Complex64::new(x, 0.0), opts)?;
        if d.value.is_zero() {
            return Ok(Some(x));
        }
        let step = d.value.ratio(&d.dk.expect("derivative requested")).re;
        if !step.is_finite() {
            return Ok(None);
        }
        x -= step;
        if (x - x0).abs() > 1e3 * tol.max(1e-12) * (1.0 + x0.abs()) {
            return Ok(None);
        }
        if step.abs() < tol {
            return Ok(Some(x));
        }
    }
    Ok(None)
}

/// Polishes a zero from the seed `k0` by Newton's method.
///
/// Returns the refined point and the winding of a confirmation box of
/// half-width `10 tol` around it (the multiplicity as seen by the argument
/// principle). Fails with `NoConvergence` after 50 iterations or when the
/// iterate leaves the unit disc around `k0`.
pub fn refine_zero(
    profile: &RefractionProfile,
    k0: Complex64,
    tol: f64,
    opts: &SolverOptions,
) -> Result<(Complex64, u32)> {
    if !(tol > 0.0) {
        return Err(IteError::DomainError("tolerance must be positive".into()));
    }
    let (k, _) = newton(profile, k0, 1, tol, 50, 1.0, opts)?;
    let zopts = ZeroOptions {
        solver: *opts,
        ..Default::default()
    };
    let cache = Cache::new(|ks: &[Complex64]| sample_d(profile, ks, &zopts));
    let w = windings_batch(&cache, &[BoxRegion::around(k, 10.0 * tol)], &zopts.contour)?.remove(0)?;
    Ok((k, w.max(0) as u32))
}

struct Cell {
    region: BoxRegion,
    winding: i64,
    depth: u32,
}

enum Action {
    Found(Complex64, u32, f64),
    Split,
}

/// All zeros of `D` in `region`, counted with multiplicity.
pub fn find_zeros(profile: &RefractionProfile, region: &BoxRegion, opts: &ZeroOptions) -> Result<ZeroSet> {
    region.check()?;
    check_degenerate(profile, region, opts)?;
    let b = profile.liouville(1e-12)?.b();
    let mut contour = opts.contour;
    contour.spacing = contour.spacing.min(PI / (4.0 * (1.0 + b)));
    let cache = Cache::new(|ks: &[Complex64]| sample_d(profile, ks, opts));

    let mut diag = SearchDiagnostics::default();
    let mut region_used = *region;
    let mut tiles_w: Option<(Vec<BoxRegion>, Vec<i64>)> = None;
    'dilate: for dil in 0..=opts.max_dilations {
        region_used = region.dilate((1.0 + 2f64.powi(-5)).powi(dil as i32));
        // the outer contour decides whether dilation is needed; tiling offsets
        // only move interior cuts
        for attempt in 0..SPLITS.len() {
            let tiles = region_used.tiles(0.1 + 0.05 * attempt as f64);
            let ws = windings_batch(&cache, &tiles, &contour)?;
            if ws.iter().all(|w| w.is_ok()) {
                tiles_w = Some((tiles, ws.into_iter().map(|w| w.expect("ok")).collect()));
                diag.dilations = dil;
                break 'dilate;
            }
            let outer = windings_batch(&cache, &[region_used], &contour)?.remove(0);
            if outer.is_err() {
                continue 'dilate;
            }
            diag.split_retries += 1;
        }
    }
    let (tiles, ws) = tiles_w.ok_or_else(|| {
        let c = region.centre();
        IteError::BoundaryZero { re: c.re, im: c.im }
    })?;
    let total_winding: i64 = ws.iter().sum();

    let mut active: Vec<Cell> = tiles
        .into_iter()
        .zip(ws)
        .filter(|(_, w)| *w > 0)
        .map(|(region, winding)| Cell {
            region,
            winding,
            depth: 0,
        })
        .collect();
    let mut found: Vec<Zero> = Vec::new();
    let tol = opts.refine_tol;

    while !active.is_empty() {
        diag.boxes += active.len();
        let actions: Vec<Result<Action>> = exec::map(opts.exec, &active, |cell| {
            let small = cell.region.size() < opts.cluster_size;
            if cell.winding == 1 || small {
                let m = cell.winding as u32;
                let drift = 2.0 * cell.region.size();
                match newton(profile, cell.region.centre(), m, tol, opts.max_newton, drift, &opts.solver) {
                    Ok((k, d)) if cell.region.contains(k, 1e-12 * (1.0 + k.norm())) => {
                        let res = d.relative();
                        if res <= opts.residual_max {
                            return Ok(Action::Found(k, m, res));
                        }
                    }
                    Ok(_) | Err(IteError::NoConvergence { .. }) => {}
                    Err(e) => return Err(e),
                }
            }
            if cell.region.size() < opts.min_box.max(1e-15 * (1.0 + cell.region.centre().norm())) {
                let r = cell.region;
                return Err(IteError::Unresolved {
                    winding: cell.winding,
                    re_min: r.re_min,
                    re_max: r.re_max,
                    im_min: r.im_min,
                    im_max: r.im_max,
                });
            }
            Ok(Action::Split)
        });

        let mut to_split = Vec::new();
        for (cell, action) in active.into_iter().zip(actions) {
            match action? {
                Action::Found(k, m, res) => found.push(Zero {
                    re: k.re,
                    im: k.im,
                    mult: m,
                    residual: res,
                }),
                Action::Split => to_split.push(cell),
            }
        }

        let mut next = Vec::new();
        let mut attempt = vec![0usize; to_split.len()];
        let mut pending: Vec<usize> = (0..to_split.len()).collect();
        while !pending.is_empty() {
            let mut children = Vec::with_capacity(4 * pending.len());
            for &i in &pending {
                let (fx, fy) = SPLITS[attempt[i]];
                children.extend(to_split[i].region.quad_split(fx, fy));
            }
            let ws = windings_batch(&cache, &children, &contour)?;
            let mut retry = Vec::new();
            for (slot, &i) in pending.iter().enumerate() {
                let cell = &to_split[i];
                let kids = &children[4 * slot..4 * slot + 4];
                let kw = &ws[4 * slot..4 * slot + 4];
                let ok = kw.iter().all(|w| w.is_ok())
                    && kw.iter().map(|w| *w.as_ref().expect("ok")).sum::<i64>() == cell.winding;
                if ok {
                    for (r, w) in kids.iter().zip(kw) {
                        let w = *w.as_ref().expect("ok");
                        if w > 0 {
                            next.push(Cell {
                                region: *r,
                                winding: w,
                                depth: cell.depth + 1,
                            });
                        }
                    }
                } else if attempt[i] + 1 < SPLITS.len() {
                    attempt[i] += 1;
                    diag.split_retries += 1;
                    retry.push(i);
                } else {
                    let r = cell.region;
                    return Err(IteError::Unresolved {
                        winding: cell.winding,
                        re_min: r.re_min,
                        re_max: r.re_max,
                        im_min: r.im_min,
                        im_max: r.im_max,
                    });
                }
            }
            pending = retry;
        }
        active = next;
    }

    // snap zeros on the real axis onto it
    let snapped: Vec<Result<Zero>> = exec::map(opts.exec, &found, |z| {
        let mut z = *z;
        if z.im != 0.0 && z.mult == 1 && z.im.abs() <= 1e-8 * (1.0 + z.re.abs()) {
            if let Some(x) = snap_real(profile, z.re, tol, &opts.solver)? {
                z.re = x;
                z.im = 0.0;
            }
        }
        Ok(z)
    });
    let mut found: Vec<Zero> = snapped.into_iter().collect::<Result<_>>()?;

    if opts.symmetry_completion {
        found = complete_symmetry(found, &region_used);
    }
    found.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).expect("finite zeros"));

    // confirmation boxes
    let boxes: Vec<BoxRegion> = found
        .iter()
        .map(|z| {
            let h = if z.mult > 1 {
                (10.0 * tol).max(1e-3 * (1.0 + z.k().norm()))
            } else {
                10.0 * tol
            };
            BoxRegion::around(z.k(), h)
        })
        .collect();
    let conf = windings_batch(&cache, &boxes, &opts.contour)?;
    diag.unconfirmed = found
        .iter()
        .zip(&conf)
        .filter(|(z, w)| match w {
            Ok(w) => *w < 1 || (z.mult > 1 && *w != z.mult as i64),
            Err(_) => true,
        })
        .count();
    diag.max_residual = found.iter().map(|z| z.residual).fold(0.0, f64::max);
    diag.evaluations = cache.len();
    let set = ZeroSet {
        profile_hash: profile.content_hash(),
        region: region_used,
        zeros: found,
        total_winding,
        diagnostics: diag,
    };
    let mut set = set;
    set.diagnostics.conserved = set.total_multiplicity() == total_winding;
    Ok(set)
}

/// Makes the set exactly invariant under `k -> conj k` and `k -> -k` within
/// the region, merging images that are numerically the same zero.
fn complete_symmetry(found: Vec<Zero>, region: &BoxRegion) -> Vec<Zero> {
    let radius = |k: Complex64| 1e-7 * (1.0 + k.norm());
    // representatives in the closed first quadrant, best residual first
    let mut reps: Vec<Zero> = Vec::new();
    let mut order: Vec<Zero> = found;
    order.sort_by(|a, b| a.residual.total_cmp(&b.residual));
    for z in order {
        let mut c = Complex64::new(z.re.abs(), z.im.abs());
        // images closer than the merge radius are one zero on a symmetry axis
        if c.re <= radius(c) {
            c.re = 0.0;
        }
        if c.im <= radius(c) {
            c.im = 0.0;
        }
        if let Some(r) = reps.iter_mut().find(|r| (r.k() - c).norm() <= radius(c)) {
            r.mult = r.mult.max(z.mult);
            continue;
        }
        reps.push(Zero {
            re: c.re,
            im: c.im,
            ..z
        });
    }
    let slack = |k: Complex64| 1e-12 * (1.0 + k.norm());
    let mut out: Vec<Zero> = Vec::new();
    for r in reps {
        let images = [
            Complex64::new(r.re, r.im),
            Complex64::new(r.re, -r.im),
            Complex64::new(-r.re, r.im),
            Complex64::new(-r.re, -r.im),
        ];
        for img in images {
            let img = Complex64::new(img.re + 0.0, img.im + 0.0);
            if !region.contains(img, slack(img)) {
                continue;
            }
            if out.iter().any(|o| o.k() == img) {
                continue;
            }
            out.push(Zero {
                re: img.re,
                im: img.im,
                ..r
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealAxisZeros {
    pub zeros: Vec<f64>,
    pub strip: BoxRegion,
    pub strip_winding: i64,
}

impl RealAxisZeros {
    /// `StripMismatch` when the sign-change count disagrees with the strip winding.
    pub fn check(&self) -> Result<()> {
        if self.zeros.len() as i64 != self.strip_winding {
            return Err(IteError::StripMismatch {
                bisection: self.zeros.len(),
                winding: self.strip_winding,
            });
        }
        Ok(())
    }

    /// The zeros together with their mirror images on the negative axis.
    pub fn symmetric(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.zeros.iter().map(|x| -x).chain(self.zeros.iter().copied()).collect();
        v.sort_by(f64::total_cmp);
        v
    }
}

/// Positive real zeros of `D` up to `k_max`, by sign changes on a grid finer
/// than `pi / (2 (1 + B))`, bisection, and a real Newton polish.
pub fn real_axis_zeros(profile: &RefractionProfile, k_max: f64, opts: &ZeroOptions) -> Result<RealAxisZeros> {
    if !(k_max > 0.0) {
        return Err(IteError::DomainError("k_max must be positive".into()));
    }
    check_degenerate(profile, &BoxRegion::new(0.0, k_max, -0.1, 0.1)?, opts)?;
    let b = profile.liouville(1e-12)?.b();
    let step = 0.9 * PI / (2.0 * (1.0 + b));
    let k_lo = 1e-3f64.min(0.5 * k_max);
    let n = ((k_max - k_lo) / step).ceil() as usize + 1;
    let grid: Vec<f64> = (0..=n).map(|i| k_lo + (k_max - k_lo) * i as f64 / n as f64).collect();
    let sign = |x: f64| -> Result<f64> {
        let d = eval_d(profile, Complex64::new(x, 0.0), &opts.solver)?;
        Ok(d.value.mantissa().re)
    };
    let vals = exec::try_map(opts.exec, &grid, |&x| sign(x))?;
    let brackets: Vec<(f64, f64, f64)> = grid
        .windows(2)
        .zip(vals.windows(2))
        .filter(|(_, v)| v[0] * v[1] < 0.0 || v[1] == 0.0)
        .map(|(g, v)| (g[0], g[1], v[0]))
        .collect();
    let tol = opts.refine_tol;
    let roots = exec::try_map(opts.exec, &brackets, |&(lo0, hi0, flo)| -> Result<f64> {
        let (mut lo, mut hi, flo) = (lo0, hi0, flo);
        while hi - lo > 1e-5 * (1.0 + lo.abs()) {
            let mid = 0.5 * (lo + hi);
            let fm = sign(mid)?;
            if fm == 0.0 {
                return Ok(mid);
            }
            if fm * flo < 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let x0 = 0.5 * (lo + hi);
        match snap_real(profile, x0, tol, &opts.solver)? {
            Some(x) if x >= lo0 && x <= hi0 => Ok(x),
            _ => {
                // fall back to plain bisection
                while hi - lo > tol {
                    let mid = 0.5 * (lo + hi);
                    if sign(mid)? * flo < 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                Ok(0.5 * (lo + hi))
            }
        }
    })?;
    let mut strip = BoxRegion::new(k_lo, k_max, -0.1, 0.1)?;
    let mut contour = opts.contour;
    contour.spacing = contour.spacing.min(PI / (4.0 * (1.0 + b)));
    let cache = Cache::new(|ks: &[Complex64]| sample_d(profile, ks, opts));
    let mut strip_winding = None;
    for attempt in 0..=opts.max_dilations {
        // dilate only the right end so the origin stays outside
        let ext = (k_max - k_lo) * 2f64.powi(-5) * attempt as f64 * 0.01;
        let s = BoxRegion::new(k_lo, k_max + ext, -0.1, 0.1)?;
        let tiles = s.tiles(0.1 + 0.05 * (attempt % 4) as f64);
        let ws = windings_batch(&cache, &tiles, &contour)?;
        if ws.iter().all(|w| w.is_ok()) {
            strip = s;
            strip_winding = Some(ws.into_iter().map(|w| w.expect("ok")).sum());
            break;
        }
    }
    let strip_winding = strip_winding.ok_or(IteError::BoundaryZero { re: k_max, im: 0.0 })?;
    let mut zeros = roots;
    zeros.retain(|&x| x <= strip.re_max);
    Ok(RealAxisZeros {
        zeros,
        strip,
        strip_winding,
    })
}
