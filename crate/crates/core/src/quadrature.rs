//! Adaptive Gauss–Kronrod (7/15) quadrature on a finite interval.

use crate::error::{IteError, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

/// Gauss weights for the nodes `XGK[1], XGK[3], XGK[5], XGK[7]`.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One 15-point Kronrod panel: `(kronrod, |kronrod - gauss|)`.
pub fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Panel {
    pub a: f64,
    pub b: f64,
    pub value: f64,
    pub error: f64,
}

/// Adaptive bisection of the worst panel until the summed error estimate is below `tol`.
///
/// Starts from `initial` equal panels. Returns the panels sorted by left endpoint.
pub fn adaptive<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    tol: f64,
    initial: usize,
    budget: usize,
) -> Result<Vec<Panel>> {
    let initial = initial.max(1);
    let mut panels: Vec<Panel> = (0..initial)
        .map(|i| {
            let lo = a + (b - a) * i as f64 / initial as f64;
            let hi = if i + 1 == initial {
                b
            } else {
                a + (b - a) * (i + 1) as f64 / initial as f64
            };
            let (value, error) = gk15(f, lo, hi);
            Panel {
                a: lo,
                b: hi,
                value,
                error,
            }
        })
        .collect();

    loop {
        let total: f64 = panels.iter().map(|p| p.error).sum();
        if total <= tol {
            break;
        }
        if panels.len() >= budget {
            return Err(IteError::QuadratureFailure {
                tol,
                budget,
                estimate: total,
            });
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .expect("non-empty");
        let p = panels.swap_remove(worst);
        let mid = 0.5 * (p.a + p.b);
        let (v1, e1) = gk15(f, p.a, mid);
        let (v2, e2) = gk15(f, mid, p.b);
        panels.push(Panel {
            a: p.a,
            b: mid,
            value: v1,
            error: e1,
        });
        panels.push(Panel {
            a: mid,
            b: p.b,
            value: v2,
            error: e2,
        });
    }
    panels.sort_by(|x, y| x.a.total_cmp(&y.a));
    Ok(panels)
}
