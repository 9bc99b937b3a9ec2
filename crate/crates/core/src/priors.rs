//! Hyper-prior families for `g` and prior summaries of the shrinkage factor.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::specfun::gamma::{log_beta_unchecked, log_gamma_unchecked};
use crate::specfun::logvalue::softplus;
use crate::specfun::{gauss_2f1, LogValue};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Pep,
    Epp,
    Intrinsic,
    HyperG,
    HyperGN,
    Robust,
    Benchmark,
    MaruyamaGeorge,
    ZellnerSiow,
    FixedG,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Pep => "pep",
            Family::Epp => "epp",
            Family::Intrinsic => "intrinsic",
            Family::HyperG => "hyper-g",
            Family::HyperGN => "hyper-gn",
            Family::Robust => "robust",
            Family::Benchmark => "benchmark",
            Family::MaruyamaGeorge => "mg",
            Family::ZellnerSiow => "zellner-siow",
            Family::FixedG => "g-prior",
        }
    }

    /// Families whose mixing law has `p = 1` and `q = s = δ`.
    pub fn is_pep_shaped(self) -> bool {
        matches!(self, Family::Pep | Family::Epp | Family::Intrinsic)
    }
}

/// Size `n*` of the imaginary training sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrainingSize {
    /// `n* = n`.
    Full,
    /// `n* = k1 + 1`, resolved per model.
    Minimal,
    Fixed(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub family: Family,
    /// Power parameter; `None` means `n` (PEP). EPP always uses 1 and
    /// Intrinsic uses `n / (k1 + 1)`.
    pub delta: Option<f64>,
    pub n_star: TrainingSize,
    pub d0: f64,
    pub d1: f64,
    pub a_h: f64,
    pub a_r: f64,
    pub b_r: f64,
    /// `ρ₁ᵣ`; `None` means `1 / (k0 + k1)`.
    pub rho_r: Option<f64>,
    pub c_b: f64,
    /// Maruyama–George `(a_mg, b_mg)`; `None` uses the recommended values.
    pub a_mg: Option<f64>,
    pub b_mg: Option<f64>,
    /// `None` means `g = n`.
    pub g_fixed: Option<f64>,
    /// Sample size the hyper-parameters are built from; `None` uses the
    /// data's `n`. Fixing it keeps the prior unchanged when data are added,
    /// as predictive densities require.
    #[serde(default)]
    pub prior_n: Option<usize>,
}

impl PriorSpec {
    pub fn new(family: Family) -> Self {
        let n_star = match family {
            Family::Epp | Family::Intrinsic => TrainingSize::Minimal,
            _ => TrainingSize::Full,
        };
        PriorSpec {
            family,
            delta: None,
            n_star,
            d0: 0.0,
            d1: 0.0,
            a_h: 3.0,
            a_r: 0.5,
            b_r: 1.0,
            rho_r: None,
            c_b: 0.01,
            a_mg: None,
            b_mg: None,
            g_fixed: None,
            prior_n: None,
        }
    }

    pub fn pep() -> Self {
        Self::new(Family::Pep)
    }

    pub fn epp() -> Self {
        Self::new(Family::Epp)
    }

    pub fn intrinsic() -> Self {
        Self::new(Family::Intrinsic)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.d0 >= 0.0 && self.d1 >= 0.0) {
            return bad(format!("d0, d1 must be nonnegative, got {}, {}", self.d0, self.d1));
        }
        if let Some(d) = self.delta {
            if !(d > 0.0 && d.is_finite()) {
                return bad(format!("delta must be positive, got {d}"));
            }
        }
        if self.prior_n == Some(0) {
            return bad("prior sample size must be positive".into());
        }
        if let Some(g) = self.g_fixed {
            if !(g > 0.0 && g.is_finite()) {
                return bad(format!("fixed g must be positive, got {g}"));
            }
        }
        match self.family {
            Family::HyperG | Family::HyperGN if !(self.a_h > 2.0) => {
                bad(format!("hyper-g requires a_h > 2, got {}", self.a_h))
            }
            Family::Robust if !(self.a_r > 0.0 && self.b_r > 0.0) => {
                bad("robust prior requires a_r, b_r > 0".into())
            }
            Family::Benchmark if !(self.c_b > 0.0) => bad("benchmark prior requires c_b > 0".into()),
            _ => Ok(()),
        }
    }

    /// Power parameter for a model with `k1` columns.
    pub fn delta_for(&self, n: usize, k1: usize) -> f64 {
        match self.family {
            Family::Epp => 1.0,
            Family::Intrinsic => n as f64 / (k1 as f64 + 1.0),
            _ => self.delta.unwrap_or(n as f64),
        }
    }

    pub fn n_star_for(&self, n: usize, k1: usize) -> usize {
        match self.n_star {
            TrainingSize::Full => n,
            TrainingSize::Minimal => k1 + 1,
            TrainingSize::Fixed(m) => m,
        }
    }
}

/// Shifted generalized beta prime law on `g >= s`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SgbpParams {
    pub a: f64,
    pub b: f64,
    pub p: f64,
    pub q: f64,
    pub s: f64,
}

impl SgbpParams {
    pub fn new(a: f64, b: f64, p: f64, q: f64, s: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && p > 0.0 && q > 0.0 && s >= 0.0)
            || ![a, b, p, q, s].iter().all(|v| v.is_finite())
        {
            return Err(Error::Domain(format!(
                "invalid SGBP parameters a={a}, b={b}, p={p}, q={q}, s={s}"
            )));
        }
        Ok(SgbpParams { a, b, p, q, s })
    }

    pub fn is_pep_shaped(&self) -> bool {
        self.p == 1.0 && self.q == self.s
    }

    /// Log density at `g`, given `g - s` separately for precision near `s`.
    pub fn log_density_offset(&self, g_minus_s: f64) -> f64 {
        if !(g_minus_s > 0.0) {
            return f64::NEG_INFINITY;
        }
        self.log_density_ln_offset(g_minus_s.ln())
    }

    /// Log density in terms of `ln(g - s)`, usable far beyond `f64` range.
    pub fn log_density_ln_offset(&self, ln_g_minus_s: f64) -> f64 {
        if ln_g_minus_s == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        let lz = ln_g_minus_s - self.q.ln();
        let log1p_zp = if self.p == 1.0 && lz < 700.0 {
            lz.exp().ln_1p()
        } else {
            softplus(self.p * lz)
        };
        self.p.ln() + (self.b * self.p - 1.0) * lz
            - (self.a + self.b) * log1p_zp
            - self.q.ln()
            - log_beta_unchecked(self.a, self.b)
    }

    pub fn log_density(&self, g: f64) -> LogValue {
        LogValue::positive(self.log_density_offset(g - self.s))
    }

    /// `P(G <= g)` expressed through the Beta variable `t = 1/(1 + z^p)`,
    /// returned as `(t, 1 - t)`; `P(G <= g) = P(T >= t)`.
    pub fn beta_coordinate(&self, g: f64) -> (f64, f64) {
        if g <= self.s {
            return (1.0, 0.0);
        }
        let zp = ((g - self.s) / self.q).powf(self.p);
        (1.0 / (1.0 + zp), zp / (1.0 + zp))
    }

    /// Draw via `t ~ Beta(a, b)`, `g = s + q ((1 - t)/t)^(1/p)`, with the
    /// Beta formed from two gammas so `(1 - t)/t = Y/X` stays exact.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let x = Gamma::new(self.a, 1.0).expect("a > 0").sample(rng);
        let y = Gamma::new(self.b, 1.0).expect("b > 0").sample(rng);
        self.s + self.q * (y / x).powf(1.0 / self.p)
    }
}

/// The hyper-prior of `g` under one model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum HyperPrior {
    Sgbp(SgbpParams),
    /// Inverse gamma with shape 1/2 and scale `n/2`.
    ZellnerSiow { n: f64 },
    Fixed(f64),
}

impl HyperPrior {
    pub fn lower_bound(&self) -> f64 {
        match self {
            HyperPrior::Sgbp(s) => s.s,
            HyperPrior::ZellnerSiow { .. } => 0.0,
            HyperPrior::Fixed(g) => *g,
        }
    }

    /// Log density given `ln(g - lower_bound)`; `-inf` outside the support.
    pub fn log_density_ln_offset(&self, ln_offset: f64) -> Result<f64> {
        match self {
            HyperPrior::Sgbp(s) => Ok(s.log_density_ln_offset(ln_offset)),
            HyperPrior::ZellnerSiow { n } => {
                if ln_offset == f64::NEG_INFINITY {
                    return Ok(f64::NEG_INFINITY);
                }
                let scale = 0.5 * n;
                Ok(0.5 * scale.ln() - log_gamma_unchecked(0.5) - 1.5 * ln_offset
                    - scale * (-ln_offset).exp())
            }
            HyperPrior::Fixed(_) => Err(Error::DegenerateFamily("g-prior")),
        }
    }

    pub fn log_density(&self, g: f64) -> Result<f64> {
        let d = g - self.lower_bound();
        if !(d > 0.0) {
            return match self {
                HyperPrior::Fixed(_) => Err(Error::DegenerateFamily("g-prior")),
                _ => Ok(f64::NEG_INFINITY),
            };
        }
        self.log_density_ln_offset(d.ln())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            HyperPrior::Sgbp(s) => s.sample(rng),
            HyperPrior::ZellnerSiow { n } => {
                0.5 * n / Gamma::new(0.5, 1.0).expect("shape > 0").sample(rng)
            }
            HyperPrior::Fixed(g) => *g,
        }
    }
}

/// SGBP parameters of the mixing law of `g` for a model with `k1` columns
/// (`k0` of them in the reference model) and `p_total` candidates.
pub fn mixing_params(
    spec: &PriorSpec,
    k0: usize,
    k1: usize,
    n: usize,
    p_total: usize,
) -> Result<SgbpParams> {
    spec.validate()?;
    let n = spec.prior_n.unwrap_or(n);
    let nf = n as f64;
    let (k0f, k1f) = (k0 as f64, k1 as f64);
    match spec.family {
        Family::Pep | Family::Epp | Family::Intrinsic => {
            let n_star = spec.n_star_for(n, k1);
            if n_star < k1 + 1 {
                return Err(Error::Config(format!(
                    "training size n* = {n_star} is below k1 + 1 = {}",
                    k1 + 1
                )));
            }
            let ns = n_star as f64;
            let a = (ns + spec.d0 - k1f) / 2.0;
            let b = (ns + spec.d1 - spec.d0 - k1f) / 2.0;
            let delta = spec.delta_for(n, k1);
            SgbpParams::new(a, b, 1.0, delta, delta)
        }
        Family::HyperG => SgbpParams::new(spec.a_h / 2.0 - 1.0, 1.0, 1.0, 1.0, 0.0),
        Family::HyperGN => SgbpParams::new(spec.a_h / 2.0 - 1.0, 1.0, 1.0, nf, 0.0),
        Family::Robust => {
            let rho = spec.rho_r.unwrap_or(1.0 / (k0f + k1f));
            let q = (spec.b_r + nf) * rho;
            if q < spec.b_r {
                return Err(Error::Domain(format!(
                    "robust prior has negative shift (q = {q} < b_r = {})",
                    spec.b_r
                )));
            }
            SgbpParams::new(spec.a_r, 1.0, 1.0, q, q - spec.b_r)
        }
        Family::Benchmark => {
            let pt = p_total as f64;
            SgbpParams::new(spec.c_b, spec.c_b * nf.max(pt * pt), 1.0, 1.0, 0.0)
        }
        Family::MaruyamaGeorge => {
            let q_mg = (k1 - k0) as f64;
            if !(q_mg < nf - 1.0) {
                return Err(Error::Domain(format!(
                    "Maruyama–George prior needs q_mg < n - 1, got q_mg = {q_mg}, n = {n}"
                )));
            }
            let a = spec.a_mg.map_or(0.25, |v| v + 1.0);
            let b = spec.b_mg.map_or((nf - q_mg - 5.0) / 2.0 + 0.75, |v| v + 1.0);
            SgbpParams::new(a, b, 1.0, 1.0, 0.0)
        }
        Family::ZellnerSiow => Err(Error::Domain(
            "Zellner–Siow mixing is inverse gamma, not SGBP".into(),
        )),
        Family::FixedG => Err(Error::DegenerateFamily("g-prior")),
    }
}

pub fn hyper_prior(
    spec: &PriorSpec,
    k0: usize,
    k1: usize,
    n: usize,
    p_total: usize,
) -> Result<HyperPrior> {
    let n = spec.prior_n.unwrap_or(n);
    match spec.family {
        Family::FixedG => {
            spec.validate()?;
            Ok(HyperPrior::Fixed(spec.g_fixed.unwrap_or(n as f64)))
        }
        Family::ZellnerSiow => Ok(HyperPrior::ZellnerSiow { n: n as f64 }),
        _ => mixing_params(spec, k0, k1, n, p_total).map(HyperPrior::Sgbp),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShrinkagePriorSummary {
    pub mean_w: f64,
    pub var_w: f64,
    pub mean_w_approx: f64,
    pub sd_w_approx: f64,
}

/// Exact prior mean and variance of `w = g/(g+1) = δ/(δ+t)`, `t ~ Beta(a, b)`.
pub fn prior_w_moments(params: &SgbpParams) -> Result<ShrinkagePriorSummary> {
    if !params.is_pep_shaped() {
        return Err(Error::Domain(
            "prior moments of w need p = 1 and q = s".into(),
        ));
    }
    let (a, b, delta) = (params.a, params.b, params.q);
    let z = -1.0 / delta;
    let m1 = gauss_2f1(1.0, a, a + b, z)?.value();
    let m2 = gauss_2f1(2.0, a, a + b, z)?.value();
    let (mean_w_approx, sd_w_approx) = taylor_w_approx(a, b, delta);
    Ok(ShrinkagePriorSummary {
        mean_w: m1,
        var_w: (m2 - m1 * m1).max(0.0),
        mean_w_approx,
        sd_w_approx,
    })
}

/// Second-order delta-method mean and first-order s.d. of `w(t) = δ/(δ+t)`.
pub fn taylor_w_approx(a: f64, b: f64, delta: f64) -> (f64, f64) {
    let mu = a / (a + b);
    let var_t = a * b / ((a + b).powi(2) * (a + b + 1.0));
    let d = delta + mu;
    let w = delta / d;
    let w1 = -delta / (d * d);
    let w2 = 2.0 * delta / (d * d * d);
    (w + 0.5 * w2 * var_t, w1.abs() * var_t.sqrt())
}

/// `E(1/t)` for `t ~ Beta(a, b)`.
pub fn inverse_t_moment(a: f64, b: f64) -> Result<f64> {
    if !(a > 1.0) || !(b > 0.0) {
        return Err(Error::Domain(format!(
            "E(1/t) exists only for a > 1 (got a = {a}, b = {b})"
        )));
    }
    Ok((a + b - 1.0) / (a - 1.0))
}
