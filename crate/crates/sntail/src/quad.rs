//! Adaptive Gauss-Kronrod quadrature carried out in log space.
//!
//! Integrands are supplied as their natural logarithm `g`, so integrals whose
//! value is far below the smallest double (e^-100000 and beyond) are computed
//! without underflow. Each segment stores its sum relative to its own shift
//! and segments are combined with log-sum-exp.
//!
//! The integrand `exp(g)` must be log-concave on the integration range. That
//! holds for every integrand in this crate (products of normal densities and
//! normal distribution functions) and guarantees a single mode, which is used
//! as the anchor for the partition.

use crate::error::{Error, Result};

// Nodes and weights of the 21-point Kronrod extension of the 10-point
// Gauss-Legendre rule on [-1, 1]; XGK[1], XGK[3], .. are the Gauss nodes.
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
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_067_520_582,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// Default relative tolerance on the integral (1e-12 on the log scale).
pub const DEFAULT_REL_TOL: f64 = 1e-12;

/// Segments are discarded once their log-integrand has dropped this far
/// below the mode; the neglected mass is then below e^-60 of the total.
const TAIL_DROP: f64 = 60.0;
const MAX_SEGMENTS: usize = 4000;

#[derive(Clone, Copy, Debug)]
struct Segment {
    a: f64,
    b: f64,
    shift: f64,
    sum: f64,
    err: f64,
}

fn gk21<G: Fn(f64) -> f64>(g: &G, a: f64, b: f64) -> Segment {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut vals = [0.0; 21];
    vals[0] = g(c);
    for j in 0..10 {
        let dx = h * XGK[j];
        vals[1 + 2 * j] = g(c - dx);
        vals[2 + 2 * j] = g(c + dx);
    }
    let shift = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if shift == f64::NEG_INFINITY {
        return Segment { a, b, shift, sum: 0.0, err: 0.0 };
    }
    let e = |v: f64| (v - shift).exp();
    let mut kron = WGK[10] * e(vals[0]);
    let mut gauss = 0.0;
    for j in 0..10 {
        let pair = e(vals[1 + 2 * j]) + e(vals[2 + 2 * j]);
        kron += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Segment { a, b, shift, sum: kron * h, err: ((kron - gauss) * h).abs() }
}

fn log_sum(segs: &[Segment]) -> (f64, f64) {
    let top = segs
        .iter()
        .filter(|s| s.sum > 0.0)
        .map(|s| s.shift + s.sum.ln())
        .fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return (top, 0.0);
    }
    let mut total = 0.0;
    let mut err = 0.0;
    for s in segs {
        if s.shift > f64::NEG_INFINITY {
            let w = (s.shift - top).exp();
            total += w * s.sum;
            err += w * s.err;
        }
    }
    (top + total.ln(), err / total)
}

fn golden_max<G: Fn(f64) -> f64>(g: &G, mut lo: f64, mut hi: f64) -> f64 {
    const R: f64 = 0.618_033_988_749_894_9;
    let mut x1 = hi - R * (hi - lo);
    let mut x2 = lo + R * (hi - lo);
    let mut g1 = g(x1);
    let mut g2 = g(x2);
    for _ in 0..200 {
        if hi - lo <= 1e-13 * hi.abs().max(lo.abs()).max(1.0) {
            break;
        }
        if g1 < g2 {
            lo = x1;
            x1 = x2;
            g1 = g2;
            x2 = lo + R * (hi - lo);
            g2 = g(x2);
        } else {
            hi = x2;
            x2 = x1;
            g2 = g1;
            x1 = hi - R * (hi - lo);
            g1 = g(x1);
        }
    }
    0.5 * (lo + hi)
}

/// Location of the maximum of a concave `g` on `[lo, hi]` (either bound may
/// be infinite).
pub fn locate_mode<G: Fn(f64) -> f64>(g: &G, lo: f64, hi: f64) -> f64 {
    let probe = |x: f64| 1e-7 * x.abs().max(1.0);
    if hi.is_finite() {
        let x = hi - probe(hi);
        if x <= lo || g(hi) >= g(x) {
            return hi;
        }
    }
    if lo.is_finite() {
        let x = lo + probe(lo);
        if x >= hi || g(lo) >= g(x) {
            return lo;
        }
    }
    let (x0, dir) = if hi.is_finite() {
        (hi, -1.0)
    } else if lo.is_finite() {
        (lo, 1.0)
    } else {
        let h = probe(0.0);
        (0.0, if g(h) > g(-h) { 1.0 } else { -1.0 })
    };
    let clamp = |x: f64| x.max(lo).min(hi);
    let mut prev2 = clamp(x0 - dir * probe(x0));
    let mut prev = x0;
    let mut g_prev = g(prev);
    let mut step = 10.0 * probe(x0);
    for _ in 0..1100 {
        let x = clamp(x0 + dir * step);
        let gx = g(x);
        if gx < g_prev || x == lo || x == hi {
            let (a, b) = if prev2 < x { (prev2, x) } else { (x, prev2) };
            return golden_max(g, a, b);
        }
        prev2 = prev;
        prev = x;
        g_prev = gx;
        step *= 2.0;
    }
    prev
}

/// Breakpoints from the mode outwards in direction `dir` (+1 or -1), with
/// geometrically growing spacing, stopping once `g` has dropped by
/// `TAIL_DROP` or the finite bound is reached.
fn breakpoints<G: Fn(f64) -> f64>(g: &G, mode: f64, top: f64, bound: f64, dir: f64) -> Vec<f64> {
    let mut pts = vec![mode];
    if mode == bound {
        return pts;
    }
    let drop = |t: f64| {
        let x = mode + dir * t;
        if dir * (x - bound) >= 0.0 {
            f64::INFINITY
        } else {
            top - g(x)
        }
    };
    // Length over which g falls by about one unit.
    let mut t = 1.0;
    if drop(t) > 1.0 {
        while t > 1e-300 && drop(t) > 1.0 {
            t *= 0.5;
        }
    } else {
        while t < 1e300 && drop(t) < 1.0 {
            t *= 2.0;
        }
    }
    let mut t = t / 4.0;
    loop {
        let x = mode + dir * t;
        if dir * (x - bound) >= 0.0 {
            pts.push(bound);
            break;
        }
        pts.push(x);
        if top - g(x) > TAIL_DROP || pts.len() > 2000 {
            break;
        }
        t *= 2.0;
    }
    pts
}

/// Natural log of `∫_lo^hi exp(g(x)) dx` for log-concave `exp(g)`.
///
/// Returns `-inf` for an empty range or an identically zero integrand.
pub fn log_integrate<G: Fn(f64) -> f64>(g: G, lo: f64, hi: f64, rel_tol: f64) -> Result<f64> {
    if lo.is_nan() || hi.is_nan() {
        return Err(Error::Quadrature("NaN integration bound".into()));
    }
    if lo >= hi {
        return Ok(f64::NEG_INFINITY);
    }
    let mode = locate_mode(&g, lo, hi);
    let top = g(mode);
    if top.is_nan() || top == f64::INFINITY {
        return Err(Error::Quadrature(format!("integrand not finite at mode {mode}: {top}")));
    }
    if top == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    let mut pts = breakpoints(&g, mode, top, lo, -1.0);
    pts.reverse();
    pts.pop();
    pts.extend(breakpoints(&g, mode, top, hi, 1.0));

    // Rounding in g itself is amplified by exp: an absolute error of ulp(g)
    // in the log becomes a relative error of the same size in the value.
    let tol = rel_tol.max(64.0 * f64::EPSILON * (top.abs() + 1.0));
    let mut segs: Vec<Segment> = pts.windows(2).map(|w| gk21(&g, w[0], w[1])).collect();
    loop {
        let (log_total, rel_err) = log_sum(&segs);
        if log_total.is_nan() {
            return Err(Error::Quadrature(format!(
                "NaN accumulated on [{lo}, {hi}] with mode {mode}"
            )));
        }
        if rel_err <= tol || log_total == f64::NEG_INFINITY {
            return Ok(log_total);
        }
        if segs.len() >= MAX_SEGMENTS {
            return Err(Error::Quadrature(format!(
                "no convergence on [{lo}, {hi}]: relative error {rel_err:.3e} after {} segments",
                segs.len()
            )));
        }
        let (worst, _) = segs
            .iter()
            .enumerate()
            .map(|(i, s)| (i, if s.err > 0.0 { s.shift + s.err.ln() } else { f64::NEG_INFINITY }))
            .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
        let s = segs[worst];
        let mid = 0.5 * (s.a + s.b);
        if mid <= s.a || mid >= s.b {
            return Err(Error::Quadrature(format!(
                "segment [{}, {}] cannot be bisected further (relative error {rel_err:.3e})",
                s.a, s.b
            )));
        }
        segs[worst] = gk21(&g, s.a, mid);
        segs.push(gk21(&g, mid, s.b));
    }
}
