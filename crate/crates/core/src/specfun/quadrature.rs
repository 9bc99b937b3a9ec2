//! Adaptive Gauss–Kronrod integration of functions given by their logarithm.
//!
//! The interval is first mapped onto the real line with a monotone change of
//! variable, which turns algebraic endpoint behaviour such as `x^(a-1)` near
//! `lo` into exponential decay. The peak of the transformed log-integrand is
//! located, the domain is truncated where the integrand falls below
//! `exp(-TAIL_DROP)` of the peak, and only `exp(F - F_max)` is ever
//! exponentiated. Endpoints are never sampled.

use serde::{Deserialize, Serialize};

use super::logvalue::{log_sigmoid, LogValue};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            abs_tol: 1e-12,
            rel_tol: 1e-10,
            max_subdivisions: 200,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) || self.max_subdivisions == 0 {
            return Err(Error::Domain(format!("invalid quadrature spec {self:?}")));
        }
        Ok(())
    }
}

/// A point of the original integration variable, together with its distances
/// to both ends computed without cancellation.
#[derive(Clone, Copy, Debug)]
pub struct Abscissa {
    pub x: f64,
    /// `x - lo` (`+inf` when `lo = -inf`).
    pub from_lo: f64,
    /// `hi - x` (`+inf` when `hi = +inf`).
    pub to_hi: f64,
    /// `ln(x - lo)`, finite even where `from_lo` under- or overflows.
    pub ln_from_lo: f64,
    /// `ln(hi - x)`.
    pub ln_to_hi: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct LogIntegral {
    pub value: LogValue,
    /// Estimated relative error of the value.
    pub rel_error: f64,
    pub evaluations: usize,
    pub subdivisions: usize,
}

// Points where the log-integrand is below the peak by more than this are
// treated as zero (exp(-46) ~ 1e-20).
const TAIL_DROP: f64 = 46.0;
// Transformed coordinates are confined to this range. Distances to the ends
// are carried in log form, so the bound only matters for integrands with
// extremely heavy tails.
const V_LIMIT: f64 = 1e5;

/// Monotone map from the real line onto the integration interval.
#[derive(Clone, Copy, Debug)]
pub(crate) enum Transform {
    /// `x = lo + (hi - lo) * sigmoid(v)`.
    Logit { lo: f64, hi: f64 },
    /// `x = lo + exp(v)`.
    Lower { lo: f64 },
    /// `x = hi - exp(-v)`.
    Upper { hi: f64 },
    Identity,
}

impl Transform {
    pub(crate) fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo >= hi {
            return Err(Error::Domain(format!("empty integration interval ({lo}, {hi})")));
        }
        Ok(match (lo.is_finite(), hi.is_finite()) {
            (true, true) => Transform::Logit { lo, hi },
            (true, false) => Transform::Lower { lo },
            (false, true) => Transform::Upper { hi },
            (false, false) => Transform::Identity,
        })
    }

    /// Abscissa at `v` and `log |dx/dv|`.
    pub(crate) fn at(&self, v: f64) -> (Abscissa, f64) {
        match *self {
            Transform::Logit { lo, hi } => {
                let width = hi - lo;
                let ls = log_sigmoid(v);
                let lc = log_sigmoid(-v);
                let from_lo = width * ls.exp();
                let to_hi = width * lc.exp();
                let x = if v < 0.0 { lo + from_lo } else { hi - to_hi };
                let lw = width.ln();
                (
                    Abscissa {
                        x,
                        from_lo,
                        to_hi,
                        ln_from_lo: lw + ls,
                        ln_to_hi: lw + lc,
                    },
                    lw + ls + lc,
                )
            }
            Transform::Lower { lo } => {
                let d = v.exp();
                (
                    Abscissa {
                        x: lo + d,
                        from_lo: d,
                        to_hi: f64::INFINITY,
                        ln_from_lo: v,
                        ln_to_hi: f64::INFINITY,
                    },
                    v,
                )
            }
            Transform::Upper { hi } => {
                let d = (-v).exp();
                (
                    Abscissa {
                        x: hi - d,
                        from_lo: f64::INFINITY,
                        to_hi: d,
                        ln_from_lo: f64::INFINITY,
                        ln_to_hi: -v,
                    },
                    -v,
                )
            }
            Transform::Identity => (
                Abscissa {
                    x: v,
                    from_lo: f64::INFINITY,
                    to_hi: f64::INFINITY,
                    ln_from_lo: f64::INFINITY,
                    ln_to_hi: f64::INFINITY,
                },
                0.0,
            ),
        }
    }

    pub(crate) fn limit(&self) -> f64 {
        match self {
            Transform::Identity => 1e150,
            _ => V_LIMIT,
        }
    }
}

/// The log-integrand composed with a transform; NaN is read as `-inf`.
pub(crate) struct Profile<'a, F> {
    pub(crate) f: &'a F,
    pub(crate) transform: Transform,
    pub(crate) evaluations: std::cell::Cell<usize>,
}

impl<'a, F: Fn(&Abscissa) -> f64> Profile<'a, F> {
    pub(crate) fn new(f: &'a F, transform: Transform) -> Self {
        Profile {
            f,
            transform,
            evaluations: std::cell::Cell::new(0),
        }
    }

    pub(crate) fn eval(&self, v: f64) -> f64 {
        self.evaluations.set(self.evaluations.get() + 1);
        let (a, lj) = self.transform.at(v);
        let y = (self.f)(&a) + lj;
        if y.is_nan() {
            f64::NEG_INFINITY
        } else {
            y
        }
    }
}

/// Location and height of the maximum of a profile.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Peak {
    pub(crate) v: f64,
    pub(crate) height: f64,
}

pub(crate) fn find_peak<F: Fn(&Abscissa) -> f64>(p: &Profile<'_, F>) -> Option<Peak> {
    let limit = p.transform.limit();
    let h = 0.5;
    let grid: Vec<f64> = (-32..=32).map(|i| i as f64 * h).collect();
    let vals: Vec<f64> = grid.iter().map(|&v| p.eval(v)).collect();
    let (mut best, mut best_val) = (0usize, f64::NEG_INFINITY);
    for (i, &y) in vals.iter().enumerate() {
        if y > best_val {
            best = i;
            best_val = y;
        }
    }

    // Bracket [l, r] around an interior point m with F(m) >= F(l), F(r).
    let (mut l, mut m, mut r);
    let mut fm;
    if best_val == f64::NEG_INFINITY {
        // Nothing finite near the origin: sweep outward on a coarse scale.
        let mut step = 16.0;
        let mut found = None;
        while step < limit {
            for v in [-step, step] {
                let y = p.eval(v);
                if y > f64::NEG_INFINITY {
                    found = Some((v, y));
                    break;
                }
            }
            if found.is_some() {
                break;
            }
            step *= 1.5;
        }
        let (v, y) = found?;
        return refine_from(p, v, y, limit);
    } else if best == 0 || best == grid.len() - 1 {
        return refine_from(p, grid[best], best_val, limit);
    } else {
        l = grid[best - 1];
        m = grid[best];
        r = grid[best + 1];
        fm = best_val;
    }
    golden(p, &mut l, &mut m, &mut r, &mut fm);
    Some(Peak { v: m, height: fm })
}

// Walk outward from a grid-edge maximum until the profile turns down.
fn refine_from<F: Fn(&Abscissa) -> f64>(
    p: &Profile<'_, F>,
    v0: f64,
    y0: f64,
    limit: f64,
) -> Option<Peak> {
    // Pick the uphill direction.
    let probe = 0.5;
    let up = p.eval(v0 + probe);
    let down = p.eval(v0 - probe);
    let dir = if up >= down { 1.0 } else { -1.0 };
    let (mut prev, mut cur, mut fcur) = (v0 - dir * probe, v0, y0);
    let mut step = probe;
    loop {
        step = (step * 1.6).min(256.0);
        let next = cur + dir * step;
        if next.abs() > limit {
            return Some(Peak { v: cur, height: fcur });
        }
        let fnext = p.eval(next);
        if fnext < fcur {
            let (mut l, mut m, mut r) = if dir > 0.0 {
                (prev, cur, next)
            } else {
                (next, cur, prev)
            };
            let mut fm = fcur;
            golden(p, &mut l, &mut m, &mut r, &mut fm);
            return Some(Peak { v: m, height: fm });
        }
        prev = cur;
        cur = next;
        fcur = fnext;
    }
}

fn golden<F: Fn(&Abscissa) -> f64>(
    p: &Profile<'_, F>,
    l: &mut f64,
    m: &mut f64,
    r: &mut f64,
    fm: &mut f64,
) {
    const INV_PHI: f64 = 0.381_966_011_250_105_1;
    for _ in 0..60 {
        if *r - *l < 1e-7 * (1.0 + m.abs()) {
            break;
        }
        let left_wider = *m - *l > *r - *m;
        let x = if left_wider {
            *m - INV_PHI * (*m - *l)
        } else {
            *m + INV_PHI * (*r - *m)
        };
        let fx = p.eval(x);
        if fx > *fm {
            if left_wider {
                *r = *m;
            } else {
                *l = *m;
            }
            *m = x;
            *fm = fx;
        } else if left_wider {
            *l = x;
        } else {
            *r = x;
        }
    }
}

/// Truncation points on each side of the peak.
pub(crate) fn tails<F: Fn(&Abscissa) -> f64>(p: &Profile<'_, F>, peak: Peak) -> (f64, f64) {
    let limit = p.transform.limit();
    let floor = peak.height - TAIL_DROP;
    let walk = |dir: f64| {
        let mut step = 0.25;
        let mut v = peak.v;
        loop {
            let next = v + dir * step;
            if next.abs() >= limit {
                return dir * limit;
            }
            if p.eval(next) < floor {
                return next;
            }
            v = next;
            step = (step * 1.5).min(256.0);
        }
    };
    (walk(-1.0), walk(1.0))
}

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

const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

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

#[derive(Clone, Copy, Debug)]
struct Segment {
    a: f64,
    b: f64,
    result: f64,
    error: f64,
}

// 21-point Kronrod rule with the QUADPACK error heuristic.
fn gk21(g: &impl Fn(f64) -> f64, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = g(center);
    let mut res_k = fc * WGK[10];
    let mut res_g = 0.0;
    let mut res_abs = res_k.abs();
    let mut f1 = [0.0; 10];
    let mut f2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let y1 = g(center - dx);
        let y2 = g(center + dx);
        f1[j] = y1;
        f2[j] = y2;
        res_k += WGK[j] * (y1 + y2);
        res_abs += WGK[j] * (y1.abs() + y2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (y1 + y2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((f1[j] - mean).abs() + (f2[j] - mean).abs());
    }
    let result = res_k * half;
    let res_abs = res_abs * half.abs();
    let res_asc = res_asc * half.abs();
    let mut err = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    Segment {
        a,
        b,
        result,
        error: err,
    }
}

/// `log ∫_lo^hi exp(log_f(x)) dx`.
///
/// `hi` may be `+inf` and `lo` may be `-inf`. On non-convergence the error
/// carries the best log estimate and its relative error bound.
pub fn integrate_log<F>(log_f: F, lo: f64, hi: f64, spec: &QuadratureSpec) -> Result<LogIntegral>
where
    F: Fn(&Abscissa) -> f64,
{
    spec.validate()?;
    let transform = Transform::new(lo, hi)?;
    let profile = Profile::new(&log_f, transform);
    let Some(peak) = find_peak(&profile) else {
        return Ok(LogIntegral {
            value: LogValue::ZERO,
            rel_error: 0.0,
            evaluations: profile.evaluations.get(),
            subdivisions: 0,
        });
    };
    if peak.height == f64::INFINITY {
        return Err(Error::Domain("log-integrand is +inf".into()));
    }
    let (l, r) = tails(&profile, peak);
    let shifted = |v: f64| (profile.eval(v) - peak.height).exp();

    let mut segments: Vec<Segment> = Vec::with_capacity(spec.max_subdivisions + 8);
    for (a, b) in [(l, peak.v), (peak.v, r)] {
        if b - a <= 0.0 {
            continue;
        }
        let pieces = 4;
        let w = (b - a) / pieces as f64;
        for i in 0..pieces {
            let sa = a + w * i as f64;
            let sb = if i + 1 == pieces { b } else { sa + w };
            segments.push(gk21(&shifted, sa, sb));
        }
    }

    let mut subdivisions = 0;
    loop {
        let total: f64 = segments.iter().map(|s| s.result).sum();
        let err: f64 = segments.iter().map(|s| s.error).sum();
        let tol = spec.abs_tol.max(spec.rel_tol * total.abs());
        if err <= tol || total == 0.0 {
            return Ok(LogIntegral {
                value: LogValue::positive(total.ln() + peak.height),
                rel_error: if total > 0.0 { err / total } else { 0.0 },
                evaluations: profile.evaluations.get(),
                subdivisions,
            });
        }
        if subdivisions >= spec.max_subdivisions {
            return Err(Error::Quadrature {
                log_estimate: total.ln() + peak.height,
                rel_error: err / total,
            });
        }
        let (idx, _) = segments
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .expect("segments are nonempty");
        let s = segments.swap_remove(idx);
        let mid = 0.5 * (s.a + s.b);
        if !(mid > s.a && mid < s.b) {
            // Interval can no longer be split in floating point.
            return Err(Error::Quadrature {
                log_estimate: total.ln() + peak.height,
                rel_error: err / total,
            });
        }
        segments.push(gk21(&shifted, s.a, mid));
        segments.push(gk21(&shifted, mid, s.b));
        subdivisions += 1;
    }
}

/// Laplace approximation of `log ∫ exp(log_f)` in the transformed coordinate.
pub fn laplace_log<F>(log_f: F, lo: f64, hi: f64) -> Result<f64>
where
    F: Fn(&Abscissa) -> f64,
{
    let transform = Transform::new(lo, hi)?;
    let profile = Profile::new(&log_f, transform);
    let peak = find_peak(&profile).ok_or_else(|| Error::Domain("integrand vanishes".into()))?;
    let h = 1e-3_f64.max(1e-4 * peak.v.abs());
    let curv = (profile.eval(peak.v + h) - 2.0 * peak.height + profile.eval(peak.v - h)) / (h * h);
    if !(curv < 0.0) || !curv.is_finite() {
        return Err(Error::Domain("no interior maximum for Laplace approximation".into()));
    }
    Ok(peak.height + 0.5 * (2.0 * std::f64::consts::PI / -curv).ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::gamma::log_beta_unchecked;

    #[test]
    fn standard_normal_normalizes() {
        let lf = |a: &Abscissa| -0.5 * a.x * a.x - 0.5 * (2.0 * std::f64::consts::PI).ln();
        let r = integrate_log(lf, f64::NEG_INFINITY, f64::INFINITY, &QuadratureSpec::default()).unwrap();
        assert!(r.value.ln().abs() < 1e-10, "{:?}", r);
    }

    #[test]
    fn beta_density_normalizes() {
        let lb = log_beta_unchecked(2.0, 3.0);
        let lf = |a: &Abscissa| a.ln_from_lo + 2.0 * a.ln_to_hi - lb;
        let r = integrate_log(lf, 0.0, 1.0, &QuadratureSpec::default()).unwrap();
        assert!(r.value.ln().abs() < 1e-10);
    }

    #[test]
    fn endpoint_singularities_are_handled() {
        // Beta(0.5, 0.3): both endpoints singular.
        let (a, b) = (0.5, 0.3);
        let lb = log_beta_unchecked(a, b);
        let lf = |x: &Abscissa| (a - 1.0) * x.ln_from_lo + (b - 1.0) * x.ln_to_hi - lb;
        let r = integrate_log(lf, 0.0, 1.0, &QuadratureSpec::default()).unwrap();
        assert!(r.value.ln().abs() < 1e-10);
    }

    #[test]
    fn shifted_intervals_and_half_lines() {
        // ∫_2^∞ e^{-(x-2)} dx = 1 ; ∫_{-∞}^{3} e^{x-3} dx = 1
        let r = integrate_log(|a| -a.from_lo, 2.0, f64::INFINITY, &QuadratureSpec::default()).unwrap();
        assert!(r.value.ln().abs() < 1e-10);
        let r = integrate_log(|a| -a.to_hi, f64::NEG_INFINITY, 3.0, &QuadratureSpec::default()).unwrap();
        assert!(r.value.ln().abs() < 1e-10);
        // Uniform on a wide interval.
        let r = integrate_log(|_| 0.0, -5.0, 1e4, &QuadratureSpec::default()).unwrap();
        assert!((r.value.ln() - (1e4f64 + 5.0).ln()).abs() < 1e-10);
    }

    #[test]
    fn huge_log_scale_does_not_overflow() {
        let lf = |a: &Abscissa| 5000.0 - 0.5 * (a.x - 1e3).powi(2);
        let r = integrate_log(lf, f64::NEG_INFINITY, f64::INFINITY, &QuadratureSpec::default()).unwrap();
        let want = 5000.0 + 0.5 * (2.0 * std::f64::consts::PI).ln();
        assert!((r.value.ln() - want).abs() < 1e-10 * want);
    }

    #[test]
    fn zero_integrand() {
        let r = integrate_log(|_| f64::NEG_INFINITY, 0.0, 1.0, &QuadratureSpec::default()).unwrap();
        assert!(r.value.is_zero());
    }

    #[test]
    fn non_convergence_reports_estimate() {
        let spec = QuadratureSpec {
            abs_tol: 1e-300,
            rel_tol: 1e-300,
            max_subdivisions: 1,
        };
        let lf = |a: &Abscissa| (a.x * 40.0).sin().abs().ln();
        match integrate_log(lf, 0.0, 10.0, &spec) {
            Err(Error::Quadrature { log_estimate, .. }) => assert!(log_estimate.is_finite()),
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn laplace_is_exact_for_gaussian_profile() {
        let lf = |a: &Abscissa| -0.5 * (a.x - 3.0).powi(2) / 4.0;
        let got = laplace_log(lf, f64::NEG_INFINITY, f64::INFINITY).unwrap();
        let want = 0.5 * (2.0 * std::f64::consts::PI * 4.0).ln();
        assert!((got - want).abs() < 1e-6);
    }

    #[test]
    fn invalid_interval() {
        assert!(integrate_log(|_| 0.0, 1.0, 1.0, &QuadratureSpec::default()).is_err());
    }
}
