//! Dormand–Prince 8(5,3) for linear homogeneous complex systems with a shared
//! binary log-scale.
//!
//! Because the right-hand side is linear in the state, the whole state vector
//! can be divided by a power of two after every accepted step without changing
//! the trajectory. The running exponent is returned alongside the mantissas,
//! which lets solutions that grow like `exp(|Im k| r)` be integrated for any
//! `|k|` without overflow.

use num_complex::Complex64;

use crate::error::{IteError, Result};
use crate::scaled::{ldexp, ScaledComplex};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    pub h_max: f64,
    pub h_init: f64,
    pub max_steps: usize,
}

/// Final state `mantissas * 2^exp2` and the number of accepted steps.
#[derive(Debug, Clone, Copy)]
pub struct ScaledState<const N: usize> {
    pub mantissas: [Complex64; N],
    pub exp2: i64,
    pub steps: usize,
    pub rejected: usize,
}

impl<const N: usize> ScaledState<N> {
    pub fn component(&self, i: usize) -> ScaledComplex {
        ScaledComplex::new(self.mantissas[i], self.exp2)
    }
}

type State<const N: usize> = [Complex64; N];

#[inline]
fn axpy<const N: usize>(y: &State<N>, h: f64, terms: &[(f64, &State<N>)]) -> State<N> {
    let mut out = *y;
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        for (c, k) in terms {
            acc += *c * k[i];
        }
        *o += h * acc;
    }
    out
}

#[inline]
fn comb<const N: usize>(terms: &[(f64, &State<N>)]) -> State<N> {
    let mut out = [Complex64::new(0.0, 0.0); N];
    for (i, o) in out.iter_mut().enumerate() {
        for (c, k) in terms {
            *o += *c * k[i];
        }
    }
    out
}

fn inf_norm<const N: usize>(y: &State<N>) -> f64 {
    y.iter()
        .map(|z| z.re.abs().max(z.im.abs()))
        .fold(0.0, f64::max)
}

/// Divides `y` (and the FSAL derivative) by a power of two so that the largest
/// component magnitude lies in `[0.5, 1)`; returns the exponent removed.
fn renormalize<const N: usize>(y: &mut State<N>, dy: &mut State<N>) -> i64 {
    let m = inf_norm(y);
    if m == 0.0 || !m.is_finite() {
        return 0;
    }
    let e = m.log2().floor() as i64 + 1;
    if e == 0 {
        return 0;
    }
    for z in y.iter_mut().chain(dy.iter_mut()) {
        *z = Complex64::new(ldexp(z.re, -e), ldexp(z.im, -e));
    }
    e
}

/// Integrates `y' = f(x, y)` from `x0` to `x1 > x0`.
///
/// `f` must be linear and homogeneous in `y`; the state is rescaled by powers of two
/// during the integration and the accumulated exponent is returned.
pub fn integrate_linear<const N: usize, F>(
    f: F,
    x0: f64,
    x1: f64,
    y0: State<N>,
    exp2_0: i64,
    ctl: &StepControl,
) -> Result<ScaledState<N>>
where
    F: Fn(f64, &State<N>) -> State<N>,
{
    let mut x = x0;
    let mut y = y0;
    let mut exp2 = exp2_0;
    let mut k1 = f(x, &y);
    exp2 += renormalize(&mut y, &mut k1);
    if inf_norm(&y) == 0.0 {
        return Ok(ScaledState {
            mantissas: y,
            exp2: 0,
            steps: 0,
            rejected: 0,
        });
    }
    let mut h = ctl.h_init.min(ctl.h_max).min(x1 - x0);
    let mut steps = 0usize;
    let mut rejected = 0usize;
    let mut facold: f64 = 1e-4;
    let n = (2 * N) as f64;

    while x < x1 {
        if steps + rejected >= ctl.max_steps {
            return Err(IteError::StepUnderflow { r: x, h });
        }
        let last = x + h >= x1;
        if last {
            h = x1 - x;
        }
        if h <= 1e-15 * x.abs().max(1.0) {
            return Err(IteError::StepUnderflow { r: x, h });
        }

        let k2 = f(x + C2 * h, &axpy(&y, h, &[(A21, &k1)]));
        let k3 = f(x + C3 * h, &axpy(&y, h, &[(A31, &k1), (A32, &k2)]));
        let k4 = f(x + C4 * h, &axpy(&y, h, &[(A41, &k1), (A43, &k3)]));
        let k5 = f(
            x + C5 * h,
            &axpy(&y, h, &[(A51, &k1), (A53, &k3), (A54, &k4)]),
        );
        let k6 = f(
            x + C6 * h,
            &axpy(&y, h, &[(A61, &k1), (A64, &k4), (A65, &k5)]),
        );
        let k7 = f(
            x + C7 * h,
            &axpy(&y, h, &[(A71, &k1), (A74, &k4), (A75, &k5), (A76, &k6)]),
        );
        let k8 = f(
            x + C8 * h,
            &axpy(
                &y,
                h,
                &[(A81, &k1), (A84, &k4), (A85, &k5), (A86, &k6), (A87, &k7)],
            ),
        );
        let k9 = f(
            x + C9 * h,
            &axpy(
                &y,
                h,
                &[
                    (A91, &k1),
                    (A94, &k4),
                    (A95, &k5),
                    (A96, &k6),
                    (A97, &k7),
                    (A98, &k8),
                ],
            ),
        );
        let k10 = f(
            x + C10 * h,
            &axpy(
                &y,
                h,
                &[
                    (A101, &k1),
                    (A104, &k4),
                    (A105, &k5),
                    (A106, &k6),
                    (A107, &k7),
                    (A108, &k8),
                    (A109, &k9),
                ],
            ),
        );
        let k11 = f(
            x + C11 * h,
            &axpy(
                &y,
                h,
                &[
                    (A111, &k1),
                    (A114, &k4),
                    (A115, &k5),
                    (A116, &k6),
                    (A117, &k7),
                    (A118, &k8),
                    (A119, &k9),
                    (A1110, &k10),
                ],
            ),
        );
        let xph = x + h;
        let k12 = f(
            xph,
            &axpy(
                &y,
                h,
                &[
                    (A121, &k1),
                    (A124, &k4),
                    (A125, &k5),
                    (A126, &k6),
                    (A127, &k7),
                    (A128, &k8),
                    (A129, &k9),
                    (A1210, &k10),
                    (A1211, &k11),
                ],
            ),
        );
        let incr = comb(&[
            (B1, &k1),
            (B6, &k6),
            (B7, &k7),
            (B8, &k8),
            (B9, &k9),
            (B10, &k10),
            (B11, &k11),
            (B12, &k12),
        ]);
        let y_new = axpy(&y, h, &[(1.0, &incr)]);
        let k_new = f(xph, &y_new);

        // error estimate (5th and 3rd order embedded solutions)
        let mut err = 0.0;
        let mut err2 = 0.0;
        for i in 0..N {
            let e3 = incr[i] - BHH1 * k1[i] - BHH2 * k9[i] - BHH3 * k12[i];
            let e5 = ER1 * k1[i]
                + ER6 * k6[i]
                + ER7 * k7[i]
                + ER8 * k8[i]
                + ER9 * k9[i]
                + ER10 * k10[i]
                + ER11 * k11[i]
                + ER12 * k12[i];
            let sk_re = ctl.atol + ctl.rtol * y[i].re.abs().max(y_new[i].re.abs());
            let sk_im = ctl.atol + ctl.rtol * y[i].im.abs().max(y_new[i].im.abs());
            err2 += (e3.re / sk_re).powi(2) + (e3.im / sk_im).powi(2);
            err += (e5.re / sk_re).powi(2) + (e5.im / sk_im).powi(2);
        }
        let mut deno = err + 0.01 * err2;
        if deno <= 0.0 {
            deno = 1.0;
        }
        let err = h.abs() * err * (1.0 / (n * deno)).sqrt();
        if !err.is_finite() {
            h *= 0.25;
            rejected += 1;
            continue;
        }

        let fac11 = err.powf(0.125);
        if err <= 1.0 {
            facold = err.max(1e-4);
            let fac = (fac11 / 0.9).clamp(1.0 / 6.0, 3.0);
            x = if last { x1 } else { xph };
            y = y_new;
            k1 = k_new;
            exp2 += renormalize(&mut y, &mut k1);
            steps += 1;
            h = (h / fac).min(ctl.h_max);
        } else {
            let fac = (fac11 / 0.9).min(3.0);
            h /= fac.max(1.0);
            rejected += 1;
        }
    }
    let _ = facold;
    Ok(ScaledState {
        mantissas: y,
        exp2,
        steps,
        rejected,
    })
}

const C2: f64 = 0.526_001_519_587_677_318_785_587_544_488e-1;
const C3: f64 = 0.789_002_279_381_515_978_178_381_316_732e-1;
const C4: f64 = 0.118_350_341_907_227_396_726_757_197_510;
const C5: f64 = 0.281_649_658_092_772_603_273_242_802_490;
const C6: f64 = 0.333_333_333_333_333_333_333_333_333_333;
const C7: f64 = 0.25;
const C8: f64 = 0.307_692_307_692_307_692_307_692_307_692;
const C9: f64 = 0.651_282_051_282_051_282_051_282_051_282;
const C10: f64 = 0.6;
const C11: f64 = 0.857_142_857_142_857_142_857_142_857_142;

const B1: f64 = 5.429_373_411_656_876_223_805_357_663_63e-2;
const B6: f64 = 4.450_312_892_752_408_881_441_139_505_66;
const B7: f64 = 1.891_517_899_314_500_383_042_815_990_44;
const B8: f64 = -5.801_203_960_010_584_781_467_211_422_7;
const B9: f64 = 3.111_643_669_578_198_944_089_160_623_7e-1;
const B10: f64 = -1.521_609_496_625_160_785_561_788_068_05e-1;
const B11: f64 = 2.013_654_008_040_303_483_747_765_375_01e-1;
const B12: f64 = 4.471_061_572_777_259_051_768_855_690_43e-2;

const BHH1: f64 = 0.244_094_488_188_976_377_952_755_905_512;
const BHH2: f64 = 0.733_846_688_281_611_857_341_361_741_547;
const BHH3: f64 = 0.220_588_235_294_117_647_058_823_529_412e-1;

const ER1: f64 = 0.131_200_449_941_948_807_325_010_299_6e-1;
const ER6: f64 = -0.122_515_644_637_620_444_072_056_975_3e1;
const ER7: f64 = -0.495_758_949_657_250_191_521_407_995_2;
const ER8: f64 = 0.166_437_718_245_498_653_696_153_041_5e1;
const ER9: f64 = -0.350_328_848_749_973_681_688_648_729_0;
const ER10: f64 = 0.334_179_118_713_017_479_029_731_884_1;
const ER11: f64 = 0.819_232_064_851_157_124_657_074_261_3e-1;
const ER12: f64 = -0.223_553_078_638_862_952_588_442_784_5e-1;

const A21: f64 = 5.260_015_195_876_773_187_855_875_444_88e-2;
const A31: f64 = 1.972_505_698_453_789_945_445_953_291_83e-2;
const A32: f64 = 5.917_517_095_361_369_836_337_859_875_49e-2;
const A41: f64 = 2.958_758_547_680_684_918_168_929_937_75e-2;
const A43: f64 = 8.876_275_643_042_054_754_506_789_813_24e-2;
const A51: f64 = 2.413_651_341_592_666_855_023_697_986_65e-1;
const A53: f64 = -8.845_494_793_282_860_853_448_649_627_17e-1;
const A54: f64 = 9.248_340_032_617_920_031_157_379_665_43e-1;
const A61: f64 = 3.703_703_703_703_703_703_703_703_703_7e-2;
const A64: f64 = 1.708_286_087_294_738_712_796_044_821_73e-1;
const A65: f64 = 1.254_676_875_668_224_250_166_918_141_23e-1;
const A71: f64 = 3.710_937_5e-2;
const A74: f64 = 1.702_522_110_195_440_393_149_780_602_72e-1;
const A75: f64 = 6.021_653_898_045_596_068_502_193_972_83e-2;
const A76: f64 = -1.757_812_5e-2;
const A81: f64 = 3.709_200_011_850_479_271_087_793_198_36e-2;
const A84: f64 = 1.703_839_257_122_399_938_102_140_547_05e-1;
const A85: f64 = 1.072_620_304_463_732_846_518_091_991_68e-1;
const A86: f64 = -1.531_943_774_862_440_175_279_361_582_36e-2;
const A87: f64 = 8.273_789_163_814_022_887_584_737_660_02e-3;
const A91: f64 = 6.241_109_587_160_757_171_144_295_778_12e-1;
const A94: f64 = -3.360_892_629_446_941_294_068_571_098_25;
const A95: f64 = -8.682_193_468_417_260_068_181_898_914_53e-1;
const A96: f64 = 2.759_209_969_944_670_830_494_156_007_97e1;
const A97: f64 = 2.015_406_755_047_789_340_861_867_889_79e1;
const A98: f64 = -4.348_988_418_106_995_884_773_662_551_44e1;
const A101: f64 = 4.776_625_364_382_643_658_904_339_085_27e-1;
const A104: f64 = -2.488_114_619_971_667_641_926_425_864_68;
const A105: f64 = -5.902_908_268_368_429_963_714_464_757_43e-1;
const A106: f64 = 2.123_005_144_818_119_423_472_889_498_97e1;
const A107: f64 = 1.527_923_363_288_242_358_325_969_229_38e1;
const A108: f64 = -3.328_821_096_898_486_291_944_532_655_87e1;
const A109: f64 = -2.033_120_170_850_862_613_582_229_285_93e-2;
const A111: f64 = -9.371_424_300_859_873_257_170_402_165_8e-1;
const A114: f64 = 5.186_372_428_844_063_708_300_238_532_09;
const A115: f64 = 1.091_437_348_996_729_578_185_002_546_54;
const A116: f64 = -8.149_787_010_746_926_125_139_972_673_57;
const A117: f64 = -1.852_006_565_999_695_986_415_661_807_01e1;
const A118: f64 = 2.273_948_709_935_050_428_189_700_567_34e1;
const A119: f64 = 2.493_605_552_679_652_389_870_893_967_62;
const A1110: f64 = -3.046_764_471_898_219_500_382_366_902_2;
const A121: f64 = 2.273_310_147_516_538_207_923_597_684_49;
const A124: f64 = -1.053_449_546_673_725_019_840_666_898_79e1;
const A125: f64 = -2.000_872_058_224_862_499_096_757_184_44;
const A126: f64 = -1.795_893_186_311_879_891_727_659_505_34e1;
const A127: f64 = 2.794_888_452_941_996_005_084_998_088_37e1;
const A128: f64 = -2.858_998_277_135_023_694_740_655_086_74;
const A129: f64 = -8.872_856_933_530_629_544_335_492_892_58;
const A1210: f64 = 1.236_056_717_579_430_306_472_662_015_28e1;
const A1211: f64 = 6.433_927_460_157_635_303_559_704_840_46e-1;
