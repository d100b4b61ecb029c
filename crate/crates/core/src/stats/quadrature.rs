//! Globally adaptive Gauss–Kronrod (10/21) quadrature on finite intervals.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    /// Target bound on the absolute error of the whole integral.
    pub abs_tol: f64,
    /// Maximum number of interval bisections.
    pub max_subdivisions: usize,
    /// Upper integration limit substituted for ∞ when integrating to infinity.
    pub truncation_t: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-9,
            max_subdivisions: 4000,
            truncation_t: 1e150,
        }
    }
}

impl QuadratureConfig {
    pub fn new(abs_tol: f64, max_subdivisions: usize, truncation_t: f64) -> Result<Self> {
        let cfg = Self {
            abs_tol,
            max_subdivisions,
            truncation_t,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.abs_tol.is_finite()) {
            return Err(Error::Domain(format!("abs_tol must be positive, got {}", self.abs_tol)));
        }
        if !(self.truncation_t > 0.0 && self.truncation_t.is_finite()) {
            return Err(Error::Domain(format!(
                "truncation_t must be positive, got {}",
                self.truncation_t
            )));
        }
        if self.max_subdivisions == 0 {
            return Err(Error::Domain("max_subdivisions must be at least 1".into()));
        }
        Ok(())
    }
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    /// Sum of per-interval |Kronrod − Gauss| estimates.
    pub abs_error: f64,
    pub subdivisions: usize,
    /// False when `max_subdivisions` ran out before `abs_error ≤ abs_tol`.
    pub converged: bool,
}

#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

#[derive(Debug, Clone, Copy)]
struct Panel {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.lo.total_cmp(&self.lo))
    }
}

fn eval<F: Fn(f64) -> f64>(f: &F, x: f64) -> Result<f64> {
    let v = f(x);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFiniteIntegrand { abscissa: x })
    }
}

fn gauss_kronrod_21<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> Result<Panel> {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = eval(f, center)?;
    let mut kronrod = WGK[10] * fc;
    let mut gauss = 0.0;
    for j in 0..5 {
        let k = 2 * j + 1;
        let dx = half * XGK[k];
        let pair = eval(f, center - dx)? + eval(f, center + dx)?;
        gauss += WG[j] * pair;
        kronrod += WGK[k] * pair;
    }
    for j in 0..5 {
        let k = 2 * j;
        let dx = half * XGK[k];
        kronrod += WGK[k] * (eval(f, center - dx)? + eval(f, center + dx)?);
    }
    Ok(Panel {
        lo,
        hi,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    })
}

/// Integrates `f` over `[lo, hi]` to absolute tolerance `cfg.abs_tol`.
pub fn adaptive_quadrature<F>(f: F, lo: f64, hi: f64, cfg: &QuadratureConfig) -> Result<Quadrature>
where
    F: Fn(f64) -> f64,
{
    adaptive_quadrature_panels(f, &[lo, hi], cfg)
}

/// Like [`adaptive_quadrature`] but seeded with the panels between consecutive
/// `breakpoints`; the tolerance applies to the sum over all panels.
pub fn adaptive_quadrature_panels<F>(
    f: F,
    breakpoints: &[f64],
    cfg: &QuadratureConfig,
) -> Result<Quadrature>
where
    F: Fn(f64) -> f64,
{
    cfg.validate()?;
    if breakpoints.len() < 2 {
        return Err(Error::Domain("need at least two breakpoints".into()));
    }
    if breakpoints.iter().any(|x| !x.is_finite()) || breakpoints.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Domain("breakpoints must be finite and nondecreasing".into()));
    }
    let mut heap = BinaryHeap::new();
    for w in breakpoints.windows(2) {
        if w[1] > w[0] {
            heap.push(gauss_kronrod_21(&f, w[0], w[1])?);
        }
    }
    let mut subdivisions = 0;
    loop {
        let (value, error) = heap
            .iter()
            .fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.error));
        if error <= cfg.abs_tol || subdivisions >= cfg.max_subdivisions {
            return Ok(Quadrature {
                value,
                abs_error: error,
                subdivisions,
                converged: error <= cfg.abs_tol,
            });
        }
        let worst = heap.pop().expect("heap holds at least one panel");
        let mid = 0.5 * (worst.lo + worst.hi);
        if mid <= worst.lo || mid >= worst.hi {
            // interval cannot be split further in floating point
            heap.push(Panel { error: 0.0, ..worst });
            let (value, error) = heap
                .iter()
                .fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.error));
            return Ok(Quadrature {
                value,
                abs_error: error + worst.error,
                subdivisions,
                converged: error + worst.error <= cfg.abs_tol,
            });
        }
        heap.push(gauss_kronrod_21(&f, worst.lo, mid)?);
        heap.push(gauss_kronrod_21(&f, mid, worst.hi)?);
        subdivisions += 1;
    }
}
