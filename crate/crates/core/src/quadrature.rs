//! Adaptive Gauss-Kronrod and fixed Gauss-Legendre quadrature.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::OnceLock;

use crate::error::{Error, Result};

// 15-point Kronrod abscissae on [-1, 1] and the embedded 7-point Gauss
// weights (standard QUADPACK constants).
const XGK15: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_838_258_730,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];
const WG7: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];
const WGK15: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

fn gk15<F>(f: &mut F, a: f64, b: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center)?;
    let mut kronrod = fc * WGK15[7];
    let mut gauss = fc * WG7[3];
    for j in 0..7 {
        let x = half * XGK15[j];
        let f1 = f(center - x)?;
        let f2 = f(center + x)?;
        let fsum = f1 + f2;
        kronrod += WGK15[j] * fsum;
        if j % 2 == 1 {
            gauss += WG7[j / 2] * fsum;
        }
    }
    let value = kronrod * half;
    let err = ((kronrod - gauss) * half).abs();
    Ok((value, err))
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err
            .partial_cmp(&other.err)
            .unwrap_or(Ordering::Equal)
            // deterministic tie-break on the left endpoint
            .then_with(|| self.a.partial_cmp(&other.a).unwrap_or(Ordering::Equal))
    }
}

/// Adaptive Gauss-Kronrod 15 over `[a, b]` to a mixed relative/absolute
/// error target. Worst segments are bisected first.
pub fn adaptive_gk15<F>(
    f: &mut F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
    max_segments: usize,
) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    if a == b {
        return Ok(0.0);
    }
    let (value, err) = gk15(f, a, b)?;
    let mut heap = BinaryHeap::new();
    let mut total_value = value;
    let mut total_err = err;
    heap.push(Segment { a, b, value, err });

    while total_err > abs_tol.max(rel_tol * total_value.abs()) {
        if heap.len() >= max_segments {
            return Err(Error::QuadratureNonConvergence {
                requested: abs_tol.max(rel_tol * total_value.abs()),
                achieved: total_err,
            });
        }
        let worst = heap.pop().expect("heap holds at least one segment");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval at machine resolution, accept what we have
            heap.push(worst);
            break;
        }
        let (v1, e1) = gk15(f, worst.a, mid)?;
        let (v2, e2) = gk15(f, mid, worst.b)?;
        total_value += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.err;
        heap.push(Segment {
            a: worst.a,
            b: mid,
            value: v1,
            err: e1,
        });
        heap.push(Segment {
            a: mid,
            b: worst.b,
            value: v2,
            err: e2,
        });
    }
    Ok(total_value)
}

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1],
/// computed by Newton iteration on the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev-based initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Evaluate P_n and its derivative at x.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// 32-point Gauss-Legendre rule mapped to [0, 1], cached.
pub fn gauss_legendre_01() -> &'static (Vec<f64>, Vec<f64>) {
    static CACHE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    CACHE.get_or_init(|| {
        let (nodes, weights) = gauss_legendre(32);
        let nodes = nodes.iter().map(|x| 0.5 * (x + 1.0)).collect();
        let weights = weights.iter().map(|w| 0.5 * w).collect();
        (nodes, weights)
    })
}
