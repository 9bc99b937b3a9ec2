//! Full conditionals and marginal posteriors of `(β0, βe, σ², g, w)` under a
//! fixed model.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{ols_stats, Design, ModelMatrices, OlsStats};
use crate::error::{Error, Result};
use crate::evidence::{log_evidence, log_f1_tilde, log_ml_given_g};
use crate::modelspace::ModelId;
use crate::priors::{hyper_prior, mixing_params, HyperPrior, PriorSpec};
use crate::specfun::gamma::log_beta_unchecked;
use crate::specfun::{integrate_log, Abscissa, GridSampler, LogValue, QuadratureSpec, GRID_POINTS};

/// Which form of the `σ²` and `u` conditionals to use.
///
/// `Derived` is the conjugate completion of the mixture representation:
/// the `βe` penalty in the `σ²` rate carries `1/g` and the CH law of `u` has
/// second parameter `a + ke/2`. `Printed` reproduces the typeset forms (rate
/// built from the residual sum at the MLE plus an unscaled penalty, and
/// `a + ke/2 + 2`) so the two can be compared.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConditionalVariant {
    #[default]
    Derived,
    Printed,
}

/// A fixed model's matrices together with its least-squares statistics.
#[derive(Clone, Debug)]
pub struct ModelContext {
    pub mm: ModelMatrices,
    pub stats: OlsStats,
}

impl ModelContext {
    pub fn new(design: &Design, m: &ModelId) -> Result<Self> {
        Ok(ModelContext {
            mm: ModelMatrices::new(design, m)?,
            stats: ols_stats(design, m)?,
        })
    }

    fn beta_hat(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.stats.beta_hat)
    }
}

fn chol(m: DMatrix<f64>, what: &str) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(m).ok_or_else(|| Error::Domain(format!("{what} is not positive definite")))
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let t = m.transpose();
    *m += t;
    *m *= 0.5;
}

#[derive(Clone, Debug)]
pub struct ConditionalBetaE {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub shrink_w: f64,
}

/// `βe | β0, σ², g`: mean `W_e β̃_e`, covariance `W_e (XeᵀXe)⁻¹ σ²` with
/// `β̃_e = (XeᵀXe)⁻¹ Xeᵀ(y − X0 β0)`.
pub fn cond_beta_e(
    ctx: &ModelContext,
    beta0: &DVector<f64>,
    sigma2: f64,
    g: f64,
) -> Result<ConditionalBetaE> {
    check_positive(sigma2, g)?;
    let mm = &ctx.mm;
    let w = g / (g + 1.0);
    let xtx = mm.xe.transpose() * &mm.xe;
    let rhs = mm.xe.transpose() * (&mm.y - &mm.x0 * beta0);
    // (XeᵀXe + Ve⁻¹/g) is W_e⁻¹ XeᵀXe scaled by 1/w.
    let prec = &xtx + &mm.ve_inv / g;
    let c = chol(prec, "conditional precision of βe")?;
    let mean = c.solve(&rhs);
    let mut cov = c.inverse() * sigma2;
    symmetrize(&mut cov);
    Ok(ConditionalBetaE {
        mean,
        cov,
        shrink_w: w,
    })
}

/// `β0 | βe, σ²`: mean `β̂0 − (X0ᵀX0)⁻¹ X0ᵀ Xe βe`, covariance `(X0ᵀX0)⁻¹ σ²`.
pub fn cond_beta_0(
    ctx: &ModelContext,
    beta_e: &DVector<f64>,
    sigma2: f64,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    check_positive(sigma2, 1.0)?;
    let mm = &ctx.mm;
    let c = chol(mm.x0.transpose() * &mm.x0, "X0ᵀX0")?;
    let mean = c.solve(&(mm.x0.transpose() * (&mm.y - &mm.xe * beta_e)));
    let mut cov = c.inverse() * sigma2;
    symmetrize(&mut cov);
    Ok((mean, cov))
}

/// Inverse-gamma `(shape, rate)` of `σ² | β0, βe, g`.
pub fn cond_sigma2(
    ctx: &ModelContext,
    beta0: &DVector<f64>,
    beta_e: &DVector<f64>,
    g: f64,
    d0: f64,
    variant: ConditionalVariant,
) -> Result<(f64, f64)> {
    check_positive(1.0, g)?;
    let mm = &ctx.mm;
    let n = mm.y.len() as f64;
    let ke = mm.ke() as f64;
    let quad = (beta_e.transpose() * &mm.ve_inv * beta_e)[(0, 0)];
    let shape = 0.5 * (n + ke + d0);
    let rate = match variant {
        ConditionalVariant::Derived => {
            let s = (&mm.y - &mm.x0 * beta0 - &mm.xe * beta_e).norm_squared();
            0.5 * (s + quad / g)
        }
        ConditionalVariant::Printed => 0.5 * (ctx.stats.rss + quad),
    };
    Ok((shape, rate))
}

/// Confluent hypergeometric law on `u ∈ (0, 1)` with density proportional to
/// `u^(p-1) (1-u)^(q-1) exp(-s u)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChParams {
    pub p: f64,
    pub q: f64,
    pub s: f64,
}

impl ChParams {
    /// Unnormalized log density given `ln u` and `ln(1 - u)`.
    pub fn log_kernel(&self, u: f64, ln_u: f64, ln_1mu: f64) -> f64 {
        (self.p - 1.0) * ln_u + (self.q - 1.0) * ln_1mu - self.s * u
    }

    pub fn log_normalizer(&self) -> Result<f64> {
        let r = integrate_log(
            |a: &Abscissa| self.log_kernel(a.x, a.ln_from_lo, a.ln_to_hi),
            0.0,
            1.0,
            &QuadratureSpec::default(),
        )?;
        Ok(r.value.ln())
    }

    pub fn log_density(&self, u: f64) -> Result<LogValue> {
        if !(u > 0.0 && u < 1.0) {
            return Ok(LogValue::ZERO);
        }
        Ok(LogValue::positive(
            self.log_kernel(u, u.ln(), (-u).ln_1p()) - self.log_normalizer()?,
        ))
    }

    /// Draw `(u, 1 - u)`.
    ///
    /// For `s <= 0` the tilt expands as `Σ |s|^k u^k / k!`, so the law is a
    /// Poisson-like mixture of `Beta(p + k, q)` and is sampled exactly.
    /// Otherwise, or when the mixture is too wide, a grid inverse CDF is used.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(f64, f64)> {
        if self.s <= 0.0 {
            if let Some(k) = self.mixture_component(rng) {
                let x: f64 = Gamma::new(self.p + k as f64, 1.0)
                    .map_err(|e| Error::Domain(e.to_string()))?
                    .sample(rng);
                let y: f64 = Gamma::new(self.q, 1.0)
                    .map_err(|e| Error::Domain(e.to_string()))?
                    .sample(rng);
                let t = x + y;
                if t > 0.0 && x > 0.0 && y > 0.0 {
                    return Ok((x / t, y / t));
                }
            }
        }
        self.sample_grid(rng)
    }

    fn mixture_component<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<usize> {
        const MAX_TERMS: usize = 200_000;
        if self.s == 0.0 {
            return Some(0);
        }
        let ln_s = (-self.s).ln();
        // Log weights relative to k = 0, built from successive ratios.
        let mut logs = Vec::with_capacity(64);
        let mut cur = 0.0f64;
        let mut best = 0.0f64;
        logs.push(0.0);
        for k in 0..MAX_TERMS {
            let kf = k as f64;
            let step = ln_s + (self.p + kf).ln() - (kf + 1.0).ln() - (self.p + self.q + kf).ln();
            cur += step;
            best = best.max(cur);
            logs.push(cur);
            if step < 0.0 && cur < best - 40.0 {
                let w: Vec<f64> = logs.iter().map(|l| (l - best).exp()).collect();
                let total: f64 = w.iter().sum();
                let mut target = crate::rng::uniform(rng) * total;
                for (i, wi) in w.iter().enumerate() {
                    target -= wi;
                    if target <= 0.0 {
                        return Some(i);
                    }
                }
                return Some(w.len() - 1);
            }
        }
        None
    }

    /// Grid inverse-CDF draw, returned as `(u, 1 - u)`.
    pub fn sample_grid<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(f64, f64)> {
        let gs = GridSampler::new(
            |a: &Abscissa| self.log_kernel(a.x, a.ln_from_lo, a.ln_to_hi),
            0.0,
            1.0,
            GRID_POINTS,
        )?;
        let a = gs.sample(rng);
        Ok((a.x, a.to_hi))
    }
}

/// `u = 1 − δ/g` given `βe, σ²` for the PEP-shaped families.
pub fn cond_u_ch(
    ctx: &ModelContext,
    beta_e: &DVector<f64>,
    sigma2: f64,
    spec: &PriorSpec,
    variant: ConditionalVariant,
) -> Result<ChParams> {
    if !spec.family.is_pep_shaped() {
        return Err(Error::Config(format!(
            "the CH conditional exists only for PEP-shaped priors, not {}",
            spec.family.name()
        )));
    }
    check_positive(sigma2, 1.0)?;
    let st = &ctx.stats;
    let params = mixing_params(spec, st.k0, st.k1, st.n, st.p_total)?;
    let ke = st.ke() as f64;
    let quad = (beta_e.transpose() * &ctx.mm.ve_inv * beta_e)[(0, 0)];
    let extra = match variant {
        ConditionalVariant::Derived => 0.0,
        ConditionalVariant::Printed => 2.0,
    };
    Ok(ChParams {
        p: params.b,
        q: params.a + 0.5 * ke + extra,
        s: -quad / (2.0 * params.q * sigma2),
    })
}

/// `(β0, βe) | σ², g` jointly: mean `W1 β̂1`, covariance `W1 (X1ᵀX1)⁻¹ σ²`.
pub fn cond_beta_joint(
    ctx: &ModelContext,
    sigma2: f64,
    g: f64,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    check_positive(sigma2, g)?;
    let mm = &ctx.mm;
    let k0 = mm.k0();
    let ke = mm.ke();
    let mut prec = mm.x1tx1.clone();
    // T1 has a zero β0 block and Ve⁻¹ in the βe block.
    let mut block = prec.view_mut((k0, k0), (ke, ke));
    block += &mm.ve_inv / g;
    let c = chol(prec, "conditional precision of β1")?;
    let xtx_bhat = &mm.x1tx1 * ctx.beta_hat();
    let mean = c.solve(&xtx_bhat);
    let mut cov = c.inverse() * sigma2;
    symmetrize(&mut cov);
    Ok((mean, cov))
}

fn check_positive(sigma2: f64, g: f64) -> Result<()> {
    if !(sigma2 > 0.0 && g > 0.0) || !sigma2.is_finite() || !g.is_finite() {
        return Err(Error::Domain(format!(
            "conditionals need sigma2 > 0 and g > 0, got {sigma2}, {g}"
        )));
    }
    Ok(())
}

/// Log of the unnormalized marginal posterior of `g` given `ln(g - lower)`.
fn log_unnorm_g(stats: &OlsStats, spec: &PriorSpec, hp: &HyperPrior, g: f64, ln_off: f64) -> f64 {
    let prior = hp.log_density_ln_offset(ln_off).unwrap_or(f64::NEG_INFINITY);
    if prior == f64::NEG_INFINITY {
        return prior;
    }
    prior + log_ml_given_g(stats, g, spec.d0)
}

/// Log density of `g | y, M`.
pub fn marginal_posterior_g(stats: &OlsStats, spec: &PriorSpec, g: f64) -> Result<LogValue> {
    let hp = hyper_prior(spec, stats.k0, stats.k1, stats.n, stats.p_total)?;
    if let HyperPrior::Fixed(_) = hp {
        return Err(Error::DegenerateFamily("g-prior"));
    }
    let off = g - hp.lower_bound();
    if !(off > 0.0) {
        return Ok(LogValue::ZERO);
    }
    let ev = log_evidence(stats, spec)?;
    Ok(LogValue::positive(
        log_unnorm_g(stats, spec, &hp, g, off.ln()) - ev.log_bf_vs_ref,
    ))
}

/// Log density of `w = g/(g+1) | y, M`; zero outside `[s/(s+1), 1)`.
pub fn posterior_w_density(stats: &OlsStats, spec: &PriorSpec, w: f64) -> Result<LogValue> {
    if !(w > 0.0 && w < 1.0) {
        return Ok(LogValue::ZERO);
    }
    let g = w / (1.0 - w);
    let lg = marginal_posterior_g(stats, spec, g)?;
    if lg.is_zero() {
        return Ok(lg);
    }
    Ok(LogValue::positive(lg.ln() - 2.0 * (1.0 - w).ln()))
}

/// `E(g^κ | y, M)` in closed form for the PEP-shaped families, by quadrature
/// otherwise.
pub fn posterior_g_moments(stats: &OlsStats, spec: &PriorSpec, kappa: u32) -> Result<f64> {
    if kappa == 0 {
        return Ok(1.0);
    }
    if !spec.family.is_pep_shaped() {
        return posterior_moment_quadrature(stats, spec, |g| g.powi(kappa as i32));
    }
    let params = mixing_params(spec, stats.k0, stats.k1, stats.n, stats.p_total)?;
    let (a, b, delta) = (params.a, params.b, params.q);
    let k = f64::from(kappa);
    let ke = stats.ke() as f64;
    if !(0.5 * ke + a > k) {
        return Err(Error::Domain(format!(
            "posterior moment of order {kappa} of g does not exist (ke/2 + a = {})",
            0.5 * ke + a
        )));
    }
    if stats.k1 == stats.k0 {
        // Posterior equals the prior: E(g^κ) = δ^κ E(t^-κ), t ~ Beta(a, b).
        return Ok((k * delta.ln() + log_beta_unchecked(a - k, b) - log_beta_unchecked(a, b)).exp());
    }
    let quad = QuadratureSpec::default();
    let (f_k, _, _) = log_f1_tilde(stats, a, b, delta, spec.d0, 0.0, k, &quad)?;
    let (f_0, _, _) = log_f1_tilde(stats, a, b, delta, spec.d0, 0.0, 0.0, &quad)?;
    Ok((k * delta.ln() + log_beta_unchecked(b, 0.5 * ke + a - k)
        - log_beta_unchecked(b, 0.5 * ke + a)
        + f_k
        - f_0)
        .exp())
}

/// `E(w^κ | y, M)`.
pub fn posterior_w_moments(stats: &OlsStats, spec: &PriorSpec, kappa: u32) -> Result<f64> {
    if kappa == 0 {
        return Ok(1.0);
    }
    if !spec.family.is_pep_shaped() {
        return posterior_moment_quadrature(stats, spec, |g| (g / (g + 1.0)).powi(kappa as i32));
    }
    let params = mixing_params(spec, stats.k0, stats.k1, stats.n, stats.p_total)?;
    let (a, b, delta) = (params.a, params.b, params.q);
    let k = f64::from(kappa);
    let quad = QuadratureSpec::default();
    if stats.k1 == stats.k0 {
        // Prior moment: E[(1 + t/δ)^-κ] = 2F1(κ, a; a+b; -1/δ).
        return crate::specfun::gauss_2f1(k, a, a + b, -1.0 / delta).map(|v| v.value());
    }
    let (f_k, _, _) = log_f1_tilde(stats, a, b, delta, spec.d0, k, 0.0, &quad)?;
    let (f_0, _, _) = log_f1_tilde(stats, a, b, delta, spec.d0, 0.0, 0.0, &quad)?;
    Ok((k * (delta.ln() - delta.ln_1p()) + f_k - f_0).exp())
}

/// `∫ h(g) π(g | y, M) dg` by quadrature; `h` must be positive.
pub fn posterior_moment_quadrature<H: Fn(f64) -> f64>(
    stats: &OlsStats,
    spec: &PriorSpec,
    h: H,
) -> Result<f64> {
    let hp = hyper_prior(spec, stats.k0, stats.k1, stats.n, stats.p_total)?;
    if let HyperPrior::Fixed(g) = hp {
        return Ok(h(g));
    }
    let quad = QuadratureSpec::default();
    let lo = hp.lower_bound();
    let num = integrate_log(
        |x: &Abscissa| log_unnorm_g(stats, spec, &hp, x.x, x.ln_from_lo) + h(x.x).ln(),
        lo,
        f64::INFINITY,
        &quad,
    )?;
    let den = integrate_log(
        |x: &Abscissa| log_unnorm_g(stats, spec, &hp, x.x, x.ln_from_lo),
        lo,
        f64::INFINITY,
        &quad,
    )?;
    Ok((num.value.ln() - den.value.ln()).exp())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GPosteriorSummary {
    pub mean_g: f64,
    pub var_g: f64,
    pub mean_w: f64,
    pub var_w: f64,
    /// Largest integer κ with `E(g^κ | y)` finite (`u32::MAX` when unbounded).
    pub moment_exists_up_to: u32,
}

pub fn g_posterior_summary(stats: &OlsStats, spec: &PriorSpec) -> Result<GPosteriorSummary> {
    let hp = hyper_prior(spec, stats.k0, stats.k1, stats.n, stats.p_total)?;
    let ke = stats.ke() as f64;
    // The posterior tail of g behaves like g^-(ke/2 + a + 1).
    let tail = match hp {
        HyperPrior::Sgbp(p) => Some(0.5 * ke + p.a),
        HyperPrior::ZellnerSiow { .. } => Some(0.5 * ke + 0.5),
        HyperPrior::Fixed(_) => None,
    };
    let exists = tail.map_or(u32::MAX, |t| (t.ceil() - 1.0).max(0.0) as u32);
    let (mean_g, var_g) = if exists >= 2 {
        let m1 = posterior_g_moments(stats, spec, 1)?;
        let m2 = posterior_g_moments(stats, spec, 2)?;
        (m1, (m2 - m1 * m1).max(0.0))
    } else if exists == 1 {
        (posterior_g_moments(stats, spec, 1)?, f64::INFINITY)
    } else {
        (f64::INFINITY, f64::INFINITY)
    };
    let mw1 = posterior_w_moments(stats, spec, 1)?;
    let mw2 = posterior_w_moments(stats, spec, 2)?;
    Ok(GPosteriorSummary {
        mean_g,
        var_g,
        mean_w: mw1,
        var_w: (mw2 - mw1 * mw1).max(0.0),
        moment_exists_up_to: exists,
    })
}

/// Prior moments of `g` and `w` for a model with `k1` columns, by quadrature
/// over the mixing law. Moments of `g` that do not exist are infinite.
pub fn g_prior_summary(
    spec: &PriorSpec,
    k0: usize,
    k1: usize,
    n: usize,
    p_total: usize,
) -> Result<GPosteriorSummary> {
    let hp = hyper_prior(spec, k0, k1, n, p_total)?;
    let tail = match hp {
        HyperPrior::Sgbp(p) => p.a * p.p,
        HyperPrior::ZellnerSiow { .. } => 0.5,
        HyperPrior::Fixed(g) => {
            let w = g / (1.0 + g);
            return Ok(GPosteriorSummary {
                mean_g: g,
                var_g: 0.0,
                mean_w: w,
                var_w: 0.0,
                moment_exists_up_to: u32::MAX,
            });
        }
    };
    let exists = (tail.ceil() - 1.0).max(0.0) as u32;
    let quad = QuadratureSpec::default();
    let lo = hp.lower_bound();
    let moment = |log_h: &dyn Fn(f64) -> f64| -> Result<f64> {
        integrate_log(
            |x: &Abscissa| {
                hp.log_density_ln_offset(x.ln_from_lo).unwrap_or(f64::NEG_INFINITY) + log_h(x.x)
            },
            lo,
            f64::INFINITY,
            &quad,
        )
        .map(|r| r.value.value())
    };
    let g1 = if exists >= 1 { moment(&|g| g.ln())? } else { f64::INFINITY };
    let g2 = if exists >= 2 { moment(&|g| 2.0 * g.ln())? } else { f64::INFINITY };
    let w1 = moment(&|g| -(1.0 / g).ln_1p())?;
    let w2 = moment(&|g| -2.0 * (1.0 / g).ln_1p())?;
    Ok(GPosteriorSummary {
        mean_g: g1,
        var_g: if exists >= 2 { (g2 - g1 * g1).max(0.0) } else { f64::INFINITY },
        mean_w: w1,
        var_w: (w2 - w1 * w1).max(0.0),
        moment_exists_up_to: exists,
    })
}

/// Inverse-CDF sampler for `g | y, M` on a grid in `ln(g − lower)`.
#[derive(Clone, Debug)]
pub struct GPosteriorSampler {
    grid: GridSampler,
    lower: f64,
}

impl GPosteriorSampler {
    pub fn new(stats: &OlsStats, spec: &PriorSpec) -> Result<Self> {
        let hp = hyper_prior(spec, stats.k0, stats.k1, stats.n, stats.p_total)?;
        if let HyperPrior::Fixed(_) = hp {
            return Err(Error::DegenerateFamily("g-prior"));
        }
        let lower = hp.lower_bound();
        let grid = GridSampler::new(
            |x: &Abscissa| log_unnorm_g(stats, spec, &hp, x.x, x.ln_from_lo),
            lower,
            f64::INFINITY,
            GRID_POINTS,
        )?;
        Ok(GPosteriorSampler { grid, lower })
    }

    pub fn lower_bound(&self) -> f64 {
        self.lower
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let a = self.grid.sample(rng);
        // Keep draws strictly inside the support even after rounding.
        if a.x > self.lower {
            a.x
        } else {
            self.lower + a.from_lo.max(f64::MIN_POSITIVE)
        }
    }
}

pub(crate) fn sample_mvn<R: Rng + ?Sized>(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let l = chol(cov.clone(), "covariance")?.unpack();
    let z = DVector::from_fn(mean.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
    Ok(mean + l * z)
}

pub(crate) fn sample_inv_gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> Result<f64> {
    if !(shape > 0.0 && rate > 0.0) {
        return Err(Error::Domain(format!(
            "inverse gamma needs positive shape and rate, got {shape}, {rate}"
        )));
    }
    let x: f64 = Gamma::new(shape, 1.0)
        .map_err(|e| Error::Domain(e.to_string()))?
        .sample(rng);
    Ok(rate / x)
}

/// One kept draw of the fixed-model Gibbs sampler.
#[derive(Clone, Debug)]
pub struct GibbsDraw {
    pub beta: DVector<f64>,
    pub sigma2: f64,
    pub g: f64,
}

/// Gibbs sampler over `(β1, σ², g)` for one model, alternating the joint
/// `β1` conditional, the `σ²` conditional and the CH conditional of `u`.
pub fn fixed_model_gibbs<R: Rng + ?Sized>(
    ctx: &ModelContext,
    spec: &PriorSpec,
    variant: ConditionalVariant,
    iterations: usize,
    burnin: usize,
    rng: &mut R,
) -> Result<Vec<GibbsDraw>> {
    let st = &ctx.stats;
    let params = mixing_params(spec, st.k0, st.k1, st.n, st.p_total)?;
    if !spec.family.is_pep_shaped() {
        return Err(Error::Config("fixed-model Gibbs needs a PEP-shaped prior".into()));
    }
    let delta = params.q;
    let k0 = ctx.mm.k0();
    let ke = ctx.mm.ke();
    let mut sigma2 = st.rss / (st.n - st.k1) as f64;
    let mut g = 2.0 * delta;
    let mut out = Vec::with_capacity(iterations.saturating_sub(burnin));
    for it in 0..iterations {
        let (m, c) = cond_beta_joint(ctx, sigma2, g)?;
        let beta = sample_mvn(&m, &c, rng)?;
        let beta0 = beta.rows(0, k0).clone_owned();
        let beta_e = beta.rows(k0, ke).clone_owned();
        let (shape, rate) = cond_sigma2(ctx, &beta0, &beta_e, g, spec.d0, variant)?;
        sigma2 = sample_inv_gamma(shape, rate, rng)?;
        if ke > 0 {
            let ch = cond_u_ch(ctx, &beta_e, sigma2, spec, variant)?;
            let (_, one_minus_u) = ch.sample(rng)?;
            g = delta / one_minus_u;
        } else {
            g = params.sample(rng);
        }
        if it >= burnin {
            out.push(GibbsDraw { beta, sigma2, g });
        }
    }
    Ok(out)
}

/// Monte-Carlo standard error of a mean by non-overlapping batch means.
pub fn batch_means_se(xs: &[f64], batches: usize) -> f64 {
    let b = batches.max(2).min(xs.len());
    let size = xs.len() / b;
    if size == 0 {
        return f64::NAN;
    }
    let means: Vec<f64> = (0..b)
        .map(|i| xs[i * size..(i + 1) * size].iter().sum::<f64>() / size as f64)
        .collect();
    let m = means.iter().sum::<f64>() / b as f64;
    let var = means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (b - 1) as f64;
    (var / b as f64).sqrt()
}
