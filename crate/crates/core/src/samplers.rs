//! Model-search MCMC: MC3 on the marginal likelihoods, MC3 conditional on
//! `g`, and Gibbs variable selection over the full parameter vector.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{ols_stats, Design};
use crate::error::{Error, Result};
use crate::evidence::{log_ml_given_g, EvidenceCache};
use crate::modelspace::{fmt_f64, log_model_prior, ModelId, ModelPrior, PosteriorTable};
use crate::posterior::{
    cond_beta_joint, cond_sigma2, cond_u_ch, sample_inv_gamma, sample_mvn, ConditionalVariant,
    GPosteriorSampler, ModelContext,
};
use crate::priors::{hyper_prior, HyperPrior, PriorSpec};
use crate::rng::{standard_normal, stream, uniform, Stream};
use crate::specfun::{Abscissa, GridSampler, GRID_POINTS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Mc3,
    Mc3GivenG,
    GibbsVs,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Mc3 => "mc3",
            Algorithm::Mc3GivenG => "mc3-given-g",
            Algorithm::GibbsVs => "gibbs-vs",
        }
    }

    fn code(self) -> u8 {
        match self {
            Algorithm::Mc3 => 1,
            Algorithm::Mc3GivenG => 2,
            Algorithm::GibbsVs => 3,
        }
    }

    fn from_code(c: u8) -> Result<Self> {
        match c {
            1 => Ok(Algorithm::Mc3),
            2 => Ok(Algorithm::Mc3GivenG),
            3 => Ok(Algorithm::GibbsVs),
            _ => Err(Error::TraceFormat(format!("unknown algorithm code {c}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScanOrder {
    /// Covariates `1..p` in order every iteration.
    #[default]
    Systematic,
    /// `p` covariates drawn uniformly with replacement.
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub algorithm: Algorithm,
    pub iterations: usize,
    pub burnin: usize,
    pub thin: usize,
    pub seed: u64,
    pub scan: ScanOrder,
    /// When false the chain stays on the starting model.
    pub model_search: bool,
    /// Starting model; the full model when absent.
    pub start: Option<ModelId>,
    /// Scale applied to the pseudoprior standard errors (Gibbs only).
    pub pseudoprior_inflate: f64,
    pub variant: ConditionalVariant,
}

impl SamplerConfig {
    pub fn new(algorithm: Algorithm, iterations: usize, burnin: usize, seed: u64) -> Self {
        SamplerConfig {
            algorithm,
            iterations,
            burnin,
            thin: 1,
            seed,
            scan: ScanOrder::Systematic,
            model_search: true,
            start: None,
            pseudoprior_inflate: 1.0,
            variant: ConditionalVariant::Derived,
        }
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        if self.iterations <= self.burnin {
            return Err(Error::Config(format!(
                "iterations ({}) must exceed burn-in ({})",
                self.iterations, self.burnin
            )));
        }
        if self.thin == 0 {
            return Err(Error::Config("thin must be at least 1".into()));
        }
        if !(self.pseudoprior_inflate > 0.0 && self.pseudoprior_inflate.is_finite()) {
            return Err(Error::Config("pseudoprior inflation must be positive".into()));
        }
        if let Some(m) = &self.start {
            if m.p() != p {
                return Err(Error::Config(format!(
                    "starting model has {} covariates, data has {p}",
                    m.p()
                )));
            }
        }
        Ok(())
    }

    /// Number of states a run keeps.
    pub fn kept(&self) -> usize {
        (self.iterations - self.burnin) / self.thin
    }

    fn keeps(&self, t: usize) -> bool {
        t >= self.burnin && (t - self.burnin + 1) % self.thin == 0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainState {
    pub gamma: ModelId,
    /// `[β0; β_1..β_p]`, every slot filled (pseudoprior draws for excluded
    /// covariates). Only Gibbs chains carry it.
    pub beta: Option<Vec<f64>>,
    pub sigma2: Option<f64>,
    pub g: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainDiagnostics {
    pub proposed: u64,
    pub accepted: u64,
    /// BVS steps skipped because the ratio could not be evaluated.
    pub failed_steps: u64,
    /// Proposals rejected because `g` fell outside the proposed model's support.
    pub support_rejections: u64,
    /// Parameter updates retried after a numerical failure.
    pub jitter_retries: u64,
}

impl ChainDiagnostics {
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            return f64::NAN;
        }
        self.accepted as f64 / self.proposed as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainTrace {
    pub algorithm: Algorithm,
    pub p: usize,
    pub k0: usize,
    /// Zero-based iteration number of each kept state.
    pub iterations: Vec<u64>,
    pub states: Vec<ChainState>,
    /// Log Bayes factor against the reference of each kept state's model.
    pub log_evidence: Vec<f64>,
    pub diagnostics: ChainDiagnostics,
}

impl ChainTrace {
    fn new(algorithm: Algorithm, p: usize, k0: usize, capacity: usize) -> Self {
        ChainTrace {
            algorithm,
            p,
            k0,
            iterations: Vec::with_capacity(capacity),
            states: Vec::with_capacity(capacity),
            log_evidence: Vec::with_capacity(capacity),
            diagnostics: ChainDiagnostics::default(),
        }
    }

    fn push(&mut self, t: usize, state: ChainState, log_ev: f64) {
        self.iterations.push(t as u64);
        self.states.push(state);
        self.log_evidence.push(log_ev);
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn has_beta(&self) -> bool {
        !self.states.is_empty() && self.states.iter().all(|s| s.beta.is_some())
    }

    pub fn has_sigma2(&self) -> bool {
        !self.states.is_empty() && self.states.iter().all(|s| s.sigma2.is_some())
    }

    pub fn has_g(&self) -> bool {
        !self.states.is_empty() && self.states.iter().all(|s| s.g.is_some())
    }

    /// Every `step`-th kept state.
    pub fn thinned(&self, step: usize) -> ChainTrace {
        let step = step.max(1);
        let mut out = ChainTrace::new(self.algorithm, self.p, self.k0, self.len() / step + 1);
        for i in (0..self.len()).step_by(step) {
            out.push(
                self.iterations[i] as usize,
                self.states[i].clone(),
                self.log_evidence[i],
            );
        }
        out.diagnostics = self.diagnostics.clone();
        out
    }
}

/// One Metropolis flip of `γ_j`.
///
/// `log_ratio(current, proposed)` returns `log A_j`; the proposal is accepted
/// with probability `min(1, A_j)`. A failing ratio leaves the state unchanged
/// and is counted.
pub fn bvs_step<R, F>(
    gamma: &mut ModelId,
    j: usize,
    log_ratio: F,
    rng: &mut R,
    diag: &mut ChainDiagnostics,
) -> bool
where
    R: Rng + ?Sized,
    F: FnOnce(&ModelId, &ModelId) -> Result<f64>,
{
    let proposal = gamma.toggled(j);
    diag.proposed += 1;
    let la = match log_ratio(gamma, &proposal) {
        Ok(v) if !v.is_nan() => v,
        _ => {
            diag.failed_steps += 1;
            return false;
        }
    };
    if la >= 0.0 || uniform(rng).ln() < la {
        *gamma = proposal;
        diag.accepted += 1;
        true
    } else {
        false
    }
}

fn scan<R: Rng + ?Sized>(order: ScanOrder, p: usize, rng: &mut R) -> Vec<usize> {
    match order {
        ScanOrder::Systematic => (0..p).collect(),
        ScanOrder::Random => (0..p)
            .map(|_| ((uniform(rng) * p as f64) as usize).min(p - 1))
            .collect(),
    }
}

fn start_model(design: &Design, cfg: &SamplerConfig) -> ModelId {
    cfg.start.clone().unwrap_or_else(|| ModelId::full(design.p()))
}

/// Run the configured algorithm.
pub fn run(
    design: &Design,
    spec: &PriorSpec,
    prior: ModelPrior,
    cfg: &SamplerConfig,
) -> Result<ChainTrace> {
    match cfg.algorithm {
        Algorithm::Mc3 => run_mc3(design, spec, prior, cfg),
        Algorithm::Mc3GivenG => run_mc3_given_g(design, spec, prior, cfg),
        Algorithm::GibbsVs => run_gibbs_vs(design, spec, prior, cfg),
    }
}

/// Independent chains with seeds `seed, seed + 1, ...`, run concurrently.
pub fn run_chains(
    design: &Design,
    spec: &PriorSpec,
    prior: ModelPrior,
    cfg: &SamplerConfig,
    chains: usize,
) -> Result<Vec<ChainTrace>> {
    (0..chains)
        .into_par_iter()
        .map(|c| {
            let mut cfg = cfg.clone();
            cfg.seed = cfg.seed.wrapping_add(c as u64);
            run(design, spec, prior, &cfg)
        })
        .collect()
}

/// MC3 over the marginal likelihoods.
pub fn run_mc3(
    design: &Design,
    spec: &PriorSpec,
    prior: ModelPrior,
    cfg: &SamplerConfig,
) -> Result<ChainTrace> {
    let p = design.p();
    cfg.validate(p)?;
    spec.validate()?;
    let cache = EvidenceCache::new(design, spec.clone());
    let mut rng = stream(cfg.seed);
    let mut gamma = start_model(design, cfg);
    let mut cur_bf = cache.log_bf(&gamma)?;
    let mut cur = cur_bf + log_model_prior(prior, &gamma);
    let mut trace = ChainTrace::new(Algorithm::Mc3, p, design.k0(), cfg.kept());
    for t in 0..cfg.iterations {
        if cfg.model_search {
            for j in scan(cfg.scan, p, &mut rng) {
                let mut prop = (0.0, 0.0);
                let accepted = bvs_step(
                    &mut gamma,
                    j,
                    |_, m| {
                        let bf = cache.log_bf(m)?;
                        prop = (bf, bf + log_model_prior(prior, m));
                        Ok(prop.1 - cur)
                    },
                    &mut rng,
                    &mut trace.diagnostics,
                );
                if accepted {
                    (cur_bf, cur) = prop;
                }
            }
        }
        if cfg.keeps(t) {
            let state = ChainState {
                gamma: gamma.clone(),
                beta: None,
                sigma2: None,
                g: None,
            };
            trace.push(t, state, cur_bf);
        }
    }
    Ok(trace)
}

/// Per-model quantities the `g`-conditional chain reuses.
struct GModel {
    stats: crate::data::OlsStats,
    hyper: HyperPrior,
    log_bf: f64,
    sampler: Option<GPosteriorSampler>,
}

fn g_model<'c>(
    cache: &EvidenceCache<'_>,
    models: &'c mut HashMap<ModelId, GModel>,
    m: &ModelId,
    need_sampler: bool,
) -> Result<&'c mut GModel> {
    if !models.contains_key(m) {
        let (stats, ev) = cache.get(m)?;
        let spec = cache.spec();
        let hyper = hyper_prior(spec, stats.k0, stats.k1, stats.n, stats.p_total)?;
        models.insert(
            m.clone(),
            GModel {
                stats,
                hyper,
                log_bf: ev.log_bf_vs_ref,
                sampler: None,
            },
        );
    }
    let gm = models.get_mut(m).expect("inserted above");
    if need_sampler && gm.sampler.is_none() && !matches!(gm.hyper, HyperPrior::Fixed(_)) {
        gm.sampler = Some(GPosteriorSampler::new(&gm.stats, cache.spec())?);
    }
    Ok(gm)
}

/// Log of `f(y | g, M) π_M(g)` relative to the reference, `-inf` when `g` is
/// outside the model's support.
fn log_joint_given_g(gm: &GModel, g: f64, d0: f64) -> Result<f64> {
    let prior = match gm.hyper {
        HyperPrior::Fixed(_) => 0.0,
        h => h.log_density(g)?,
    };
    if prior == f64::NEG_INFINITY {
        return Ok(prior);
    }
    Ok(prior + log_ml_given_g(&gm.stats, g, d0))
}

/// MC3 conditional on `g`: each iteration draws `g | y, M` for the current
/// model, then flips each `γ_j` using likelihoods and hyper-priors at that `g`.
pub fn run_mc3_given_g(
    design: &Design,
    spec: &PriorSpec,
    prior: ModelPrior,
    cfg: &SamplerConfig,
) -> Result<ChainTrace> {
    let p = design.p();
    cfg.validate(p)?;
    spec.validate()?;
    let cache = EvidenceCache::new(design, spec.clone());
    let mut models: HashMap<ModelId, GModel> = HashMap::new();
    let mut rng = stream(cfg.seed);
    let mut gamma = start_model(design, cfg);
    let mut trace = ChainTrace::new(Algorithm::Mc3GivenG, p, design.k0(), cfg.kept());
    for t in 0..cfg.iterations {
        let gm = g_model(&cache, &mut models, &gamma, true)?;
        let g = match (&gm.sampler, gm.hyper) {
            (_, HyperPrior::Fixed(g)) => g,
            (Some(s), _) => s.sample(&mut rng),
            (None, _) => unreachable!("sampler built for non-degenerate priors"),
        };
        if cfg.model_search {
            let mut cur = log_joint_given_g(gm, g, spec.d0)? + log_model_prior(prior, &gamma);
            for j in scan(cfg.scan, p, &mut rng) {
                let mut prop = 0.0;
                let mut outside = false;
                let accepted = bvs_step(
                    &mut gamma,
                    j,
                    |_, m| {
                        let gp = g_model(&cache, &mut models, m, false)?;
                        let lj = log_joint_given_g(gp, g, spec.d0)?;
                        outside = lj == f64::NEG_INFINITY;
                        prop = lj + log_model_prior(prior, m);
                        Ok(prop - cur)
                    },
                    &mut rng,
                    &mut trace.diagnostics,
                );
                if outside {
                    trace.diagnostics.support_rejections += 1;
                }
                if accepted {
                    cur = prop;
                }
            }
        }
        if cfg.keeps(t) {
            let log_bf = g_model(&cache, &mut models, &gamma, false)?.log_bf;
            let state = ChainState {
                gamma: gamma.clone(),
                beta: None,
                sigma2: None,
                g: Some(g),
            };
            trace.push(t, state, log_bf);
        }
    }
    Ok(trace)
}

/// Independent normal pseudopriors for coefficients of excluded covariates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pseudoprior {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl Pseudoprior {
    /// Centred at the full-model least-squares estimate with its standard
    /// error times `inflate`. Falls back to one-covariate fits when the full
    /// model cannot be estimated.
    pub fn from_design(design: &Design, inflate: f64) -> Self {
        let p = design.p();
        let n = design.n();
        let k0 = design.k0();
        if let Ok(st) = ols_stats(design, &ModelId::full(p)) {
            if n > st.k1 {
                let x1 = design.x1(&ModelId::full(p));
                if let Some(c) = (x1.transpose() * &x1).cholesky() {
                    let inv = c.inverse();
                    let s2 = st.rss / (n - st.k1) as f64;
                    let mean = st.beta_hat[k0..].to_vec();
                    let sd = (0..p)
                        .map(|j| (s2 * inv[(k0 + j, k0 + j)]).sqrt() * inflate)
                        .collect::<Vec<_>>();
                    if sd.iter().all(|s| *s > 0.0 && s.is_finite()) {
                        return Pseudoprior { mean, sd };
                    }
                }
            }
        }
        let s2 = design.rss0 / (n.saturating_sub(k0 + 1).max(1)) as f64;
        let mut mean = Vec::with_capacity(p);
        let mut sd = Vec::with_capacity(p);
        for j in 0..p {
            let gjj = design.gram_resid[(j, j)].max(f64::MIN_POSITIVE);
            mean.push(design.xty_resid[j] / gjj);
            sd.push((s2 / gjj).sqrt().max(1e-12) * inflate);
        }
        Pseudoprior { mean, sd }
    }

    fn log_density(&self, j: usize, b: f64) -> f64 {
        let z = (b - self.mean[j]) / self.sd[j];
        -0.5 * z * z - self.sd[j].ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
    }
}

/// Gibbs variable selection.
///
/// Given `γ` the parameters are refreshed from their full conditionals: `β1`
/// jointly, then `σ²`, then `g` (through the CH law of `u = 1 − δ/g` for the
/// PEP-shaped families, by a grid draw otherwise). Coefficients of excluded
/// covariates are drawn from the pseudoprior. Each `γ_j` is then flipped with
/// the ratio of likelihood × coefficient prior × pseudoprior × hyper-prior ×
/// model prior at the current parameters.
pub fn run_gibbs_vs(
    design: &Design,
    spec: &PriorSpec,
    prior: ModelPrior,
    cfg: &SamplerConfig,
) -> Result<ChainTrace> {
    let p = design.p();
    let n = design.n();
    let k0 = design.k0();
    cfg.validate(p)?;
    spec.validate()?;
    let cache = EvidenceCache::new(design, spec.clone());
    let pseudo = Pseudoprior::from_design(design, cfg.pseudoprior_inflate);
    let mut contexts: HashMap<ModelId, ModelContext> = HashMap::new();
    let mut rng = stream(cfg.seed);

    let mut gamma = start_model(design, cfg);
    let mut beta = vec![0.0; k0 + p];
    let mut sigma2 = design.y.norm_squared() / n as f64;
    if !(sigma2 > 0.0) {
        sigma2 = 1.0;
    }
    let mut g = {
        let st = cache.get(&gamma)?.0;
        let lower = hyper_prior(spec, st.k0, st.k1, st.n, st.p_total)?.lower_bound();
        match hyper_prior(spec, st.k0, st.k1, st.n, st.p_total)? {
            HyperPrior::Fixed(g) => g,
            _ if (n as f64) > lower => n as f64,
            _ => 1.5 * lower.max(1.0 / 1.5),
        }
    };

    let mut trace = ChainTrace::new(Algorithm::GibbsVs, p, k0, cfg.kept());
    for t in 0..cfg.iterations {
        if !contexts.contains_key(&gamma) {
            contexts.insert(gamma.clone(), ModelContext::new(design, &gamma)?);
        }
        let ctx = &contexts[&gamma];
        let update = gibbs_parameters(ctx, spec, cfg.variant, &gamma, &mut beta, sigma2, g, &mut rng)
            .or_else(|_| {
                trace.diagnostics.jitter_retries += 1;
                sigma2 *= 1.0 + 1e-8;
                gibbs_parameters(ctx, spec, cfg.variant, &gamma, &mut beta, sigma2, g, &mut rng)
            });
        let (s2, gg) = match update {
            Ok(v) => v,
            Err(e) => {
                return Err(Error::Domain(format!(
                    "Gibbs update failed at iteration {t} in model {gamma}: {e}"
                )))
            }
        };
        sigma2 = s2;
        g = gg.unwrap_or(g);
        for j in 0..p {
            if !gamma.contains(j) {
                beta[k0 + j] = pseudo.mean[j] + pseudo.sd[j] * standard_normal(&mut rng);
            }
        }

        if cfg.model_search {
            let mut cur = gvs_log_target(design, spec, prior, &pseudo, &gamma, &beta, sigma2, g)?;
            for j in scan(cfg.scan, p, &mut rng) {
                let mut prop = 0.0;
                let mut outside = false;
                let accepted = bvs_step(
                    &mut gamma,
                    j,
                    |_, m| {
                        prop = gvs_log_target(design, spec, prior, &pseudo, m, &beta, sigma2, g)?;
                        outside = prop == f64::NEG_INFINITY;
                        Ok(prop - cur)
                    },
                    &mut rng,
                    &mut trace.diagnostics,
                );
                if outside {
                    trace.diagnostics.support_rejections += 1;
                }
                if accepted {
                    cur = prop;
                }
            }
        }

        if cfg.keeps(t) {
            let log_bf = cache.log_bf(&gamma)?;
            let state = ChainState {
                gamma: gamma.clone(),
                beta: Some(beta.clone()),
                sigma2: Some(sigma2),
                g: Some(g),
            };
            trace.push(t, state, log_bf);
        }
    }
    Ok(trace)
}

/// Refresh `β1`, `σ²` and `g` for model `gamma`, in that order. Returns the new `σ²` and the
/// new `g` (`None` when `g` is fixed).
#[allow(clippy::too_many_arguments)]
fn gibbs_parameters(
    ctx: &ModelContext,
    spec: &PriorSpec,
    variant: ConditionalVariant,
    gamma: &ModelId,
    beta: &mut [f64],
    sigma2: f64,
    g: f64,
    rng: &mut Stream,
) -> Result<(f64, Option<f64>)> {
    let st = &ctx.stats;
    let k0 = st.k0;
    let ke = st.ke();
    let hyper = hyper_prior(spec, st.k0, st.k1, st.n, st.p_total)?;
    let g = if let HyperPrior::Fixed(fixed) = hyper { fixed } else { g };
    let (m, c) = cond_beta_joint(ctx, sigma2, g)?;
    let b1 = sample_mvn(&m, &c, rng)?;
    let b0 = b1.rows(0, k0).clone_owned();
    let be = b1.rows(k0, ke).clone_owned();
    let (shape, rate) = cond_sigma2(ctx, &b0, &be, g, spec.d0, variant)?;
    let s2 = sample_inv_gamma(shape, rate, rng)?;
    let new_g = match hyper {
        HyperPrior::Fixed(_) => None,
        HyperPrior::Sgbp(params) if spec.family.is_pep_shaped() => {
            if ke == 0 {
                Some(hyper.sample(rng))
            } else {
                let ch = cond_u_ch(ctx, &be, s2, spec, variant)?;
                let (_, one_minus_u) = ch.sample(rng)?;
                Some(params.q / one_minus_u)
            }
        }
        _ => Some(sample_g_given_beta(&hyper, ctx, &be, s2, rng)?),
    };
    for (i, v) in b0.iter().enumerate() {
        beta[i] = *v;
    }
    for (i, j) in gamma.indices().into_iter().enumerate() {
        beta[k0 + j] = be[i];
    }
    Ok((s2, new_g))
}

/// `g | βe, σ²` for hyper-priors without a closed conditional.
fn sample_g_given_beta(
    hyper: &HyperPrior,
    ctx: &ModelContext,
    be: &DVector<f64>,
    sigma2: f64,
    rng: &mut Stream,
) -> Result<f64> {
    let ke = ctx.stats.ke() as f64;
    if ke == 0.0 {
        return Ok(hyper.sample(rng));
    }
    let quad = (be.transpose() * &ctx.mm.ve_inv * be)[(0, 0)];
    let lower = hyper.lower_bound();
    let gs = GridSampler::new(
        |a: &Abscissa| {
            let lp = hyper.log_density_ln_offset(a.ln_from_lo).unwrap_or(f64::NEG_INFINITY);
            lp - 0.5 * ke * a.x.ln() - quad / (2.0 * a.x * sigma2)
        },
        lower,
        f64::INFINITY,
        GRID_POINTS,
    )?;
    let a = gs.sample(rng);
    Ok(if a.x > lower { a.x } else { lower + a.from_lo })
}

/// Log joint density of `(γ, β, σ², g)` up to terms shared by every model.
#[allow(clippy::too_many_arguments)]
fn gvs_log_target(
    design: &Design,
    spec: &PriorSpec,
    prior: ModelPrior,
    pseudo: &Pseudoprior,
    gamma: &ModelId,
    beta: &[f64],
    sigma2: f64,
    g: f64,
) -> Result<f64> {
    let k0 = design.k0();
    let idx = gamma.indices();
    let ke = idx.len();
    let n = design.n();
    let k1 = k0 + ke;
    let hyper = hyper_prior(spec, k0, k1, n, design.p())?;
    let log_hyper = match hyper {
        HyperPrior::Fixed(_) => 0.0,
        h => h.log_density(g)?,
    };
    if log_hyper == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    let mut resid = design.y.clone();
    resid -= &design.x0 * DVector::from_column_slice(&beta[..k0]);
    for &j in &idx {
        resid.axpy(-beta[k0 + j], &design.xc.column(j), 1.0);
    }
    let log_lik = -0.5 * resid.norm_squared() / sigma2;

    let mut log_coef = 0.0;
    if ke > 0 {
        let vinv = DMatrix::from_fn(ke, ke, |a, b| design.gram_resid[(idx[a], idx[b])]);
        let Some(ch) = vinv.clone().cholesky() else {
            return Ok(f64::NEG_INFINITY);
        };
        let log_det: f64 = ch.l().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
        let be = DVector::from_fn(ke, |a, _| beta[k0 + idx[a]]);
        let quad = (be.transpose() * &vinv * &be)[(0, 0)];
        let scale = g * sigma2;
        log_coef = -0.5 * ke as f64 * (2.0 * std::f64::consts::PI * scale).ln() + 0.5 * log_det
            - 0.5 * quad / scale;
    }
    let log_pseudo: f64 = (0..design.p())
        .filter(|j| !gamma.contains(*j))
        .map(|j| pseudo.log_density(j, beta[k0 + j]))
        .sum();
    Ok(log_lik + log_coef + log_pseudo + log_hyper + log_model_prior(prior, gamma))
}

/// Monte-Carlo marginals of a trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub inclusion_probs: Vec<f64>,
    pub dim_posterior: Vec<f64>,
    /// 100-bin histogram density of `log g` over the observed range.
    pub log_g_histogram: Option<Histogram>,
    /// Models by visit count, most visited first, ties in `γ` order.
    pub visit_counts: Vec<(ModelId, usize)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub density: Vec<f64>,
}

pub const LOG_G_BINS: usize = 100;

pub fn trace_summaries(trace: &ChainTrace) -> Result<TraceSummary> {
    if trace.is_empty() {
        return Err(Error::Config("empty trace".into()));
    }
    let p = trace.p;
    let n = trace.len() as f64;
    let mut inclusion_probs = vec![0.0; p];
    let mut dim_posterior = vec![0.0; p + 1];
    let mut counts: HashMap<&ModelId, usize> = HashMap::new();
    for s in &trace.states {
        for j in s.gamma.indices() {
            inclusion_probs[j] += 1.0;
        }
        dim_posterior[s.gamma.size()] += 1.0;
        *counts.entry(&s.gamma).or_insert(0) += 1;
    }
    inclusion_probs.iter_mut().for_each(|q| *q /= n);
    dim_posterior.iter_mut().for_each(|q| *q /= n);
    let mut visit_counts: Vec<(ModelId, usize)> =
        counts.into_iter().map(|(m, c)| (m.clone(), c)).collect();
    visit_counts.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

    let log_g_histogram = if trace.has_g() {
        let lg: Vec<f64> = trace.states.iter().map(|s| s.g.unwrap_or(f64::NAN).ln()).collect();
        let lo = lg.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = lg.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut density = vec![0.0; LOG_G_BINS];
        if hi > lo {
            let w = (hi - lo) / LOG_G_BINS as f64;
            for v in &lg {
                let b = (((v - lo) / w) as usize).min(LOG_G_BINS - 1);
                density[b] += 1.0 / (n * w);
            }
        } else {
            density[0] = 1.0;
        }
        Some(Histogram { lo, hi, density })
    } else {
        None
    };
    Ok(TraceSummary {
        inclusion_probs,
        dim_posterior,
        log_g_histogram,
        visit_counts,
    })
}

/// Visit frequencies of a trace as a map.
pub fn visit_frequencies(trace: &ChainTrace) -> HashMap<ModelId, f64> {
    let n = trace.len() as f64;
    let mut out = HashMap::new();
    for s in &trace.states {
        *out.entry(s.gamma.clone()).or_insert(0.0) += 1.0 / n;
    }
    out
}

/// Total-variation distance between two distributions over models.
pub fn total_variation(a: &HashMap<ModelId, f64>, b: &HashMap<ModelId, f64>) -> f64 {
    let mut s = 0.0;
    for (m, pa) in a {
        s += (pa - b.get(m).copied().unwrap_or(0.0)).abs();
    }
    for (m, pb) in b {
        if !a.contains_key(m) {
            s += pb.abs();
        }
    }
    0.5 * s
}

pub fn table_distribution(table: &PosteriorTable) -> HashMap<ModelId, f64> {
    table
        .entries
        .iter()
        .map(|e| (e.model.clone(), e.posterior_prob))
        .collect()
}

/// CSV export: iteration, gamma, sigma2, g, log evidence, then `beta_*`
/// columns when present. Missing values are left empty.
pub fn write_trace_csv<W: Write>(trace: &ChainTrace, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let with_beta = trace.has_beta();
    let mut header = vec![
        "iteration".to_string(),
        "gamma".into(),
        "sigma2".into(),
        "g".into(),
        "log_evidence".into(),
    ];
    if with_beta {
        header.extend((0..trace.k0).map(|i| format!("beta0_{i}")));
        header.extend((0..trace.p).map(|j| format!("beta_{}", j + 1)));
    }
    w.write_record(&header)?;
    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    for (i, s) in trace.states.iter().enumerate() {
        let mut row = vec![
            trace.iterations[i].to_string(),
            s.gamma.to_bitstring(),
            opt(s.sigma2),
            opt(s.g),
            fmt_f64(trace.log_evidence[i]),
        ];
        if with_beta {
            row.extend(s.beta.as_ref().expect("checked").iter().map(|b| fmt_f64(*b)));
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

const MAGIC: &[u8; 5] = b"PEPT1";
const HAS_BETA: u8 = 1;
const HAS_SIGMA2: u8 = 2;
const HAS_G: u8 = 4;

/// Binary export. Layout (little endian): magic `PEPT1`, flags byte,
/// algorithm byte, `p`, `k0`, record count as `u64`; then per record the
/// iteration (`u64`), the gamma words (`u64` each), log evidence, and when
/// flagged `σ²`, `g` and the `k0 + p` coefficients as `f64`.
pub fn write_trace_binary<W: Write>(trace: &ChainTrace, mut out: W) -> Result<()> {
    let io = |e: std::io::Error| Error::TraceFormat(e.to_string());
    let mut flags = 0u8;
    if trace.has_beta() {
        flags |= HAS_BETA;
    }
    if trace.has_sigma2() {
        flags |= HAS_SIGMA2;
    }
    if trace.has_g() {
        flags |= HAS_G;
    }
    let mut buf = Vec::with_capacity(64 + trace.len() * 8 * (4 + trace.k0 + trace.p));
    buf.extend_from_slice(MAGIC);
    buf.push(flags);
    buf.push(trace.algorithm.code());
    for v in [trace.p as u64, trace.k0 as u64, trace.len() as u64] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for (i, s) in trace.states.iter().enumerate() {
        buf.extend_from_slice(&trace.iterations[i].to_le_bytes());
        for w in s.gamma.words() {
            buf.extend_from_slice(&w.to_le_bytes());
        }
        buf.extend_from_slice(&trace.log_evidence[i].to_le_bytes());
        if flags & HAS_SIGMA2 != 0 {
            buf.extend_from_slice(&s.sigma2.expect("flagged").to_le_bytes());
        }
        if flags & HAS_G != 0 {
            buf.extend_from_slice(&s.g.expect("flagged").to_le_bytes());
        }
        if flags & HAS_BETA != 0 {
            for b in s.beta.as_ref().expect("flagged") {
                buf.extend_from_slice(&b.to_le_bytes());
            }
        }
    }
    out.write_all(&buf).map_err(io)?;
    out.flush().map_err(io)
}

pub fn read_trace_binary<R: Read>(mut input: R) -> Result<ChainTrace> {
    let mut bytes = Vec::new();
    input
        .read_to_end(&mut bytes)
        .map_err(|e| Error::TraceFormat(e.to_string()))?;
    let mut cur = Cursor { bytes: &bytes, pos: 0 };
    if cur.take(5)? != MAGIC {
        return Err(Error::TraceFormat("missing PEPT1 header".into()));
    }
    let flags = cur.take(1)?[0];
    let algorithm = Algorithm::from_code(cur.take(1)?[0])?;
    let p = cur.u64()? as usize;
    let k0 = cur.u64()? as usize;
    let count = cur.u64()? as usize;
    let words = ModelId::empty(p).words().len();
    let mut trace = ChainTrace::new(algorithm, p, k0, count.min(1 << 24));
    for _ in 0..count {
        let it = cur.u64()?;
        let ws: Vec<u64> = (0..words).map(|_| cur.u64()).collect::<Result<_>>()?;
        let gamma = ModelId::from_words(p, &ws)?;
        let log_ev = cur.f64()?;
        let sigma2 = if flags & HAS_SIGMA2 != 0 { Some(cur.f64()?) } else { None };
        let g = if flags & HAS_G != 0 { Some(cur.f64()?) } else { None };
        let beta = if flags & HAS_BETA != 0 {
            Some((0..k0 + p).map(|_| cur.f64()).collect::<Result<Vec<_>>>()?)
        } else {
            None
        };
        trace.push(it as usize, ChainState { gamma, beta, sigma2, g }, log_ev);
    }
    if cur.pos != bytes.len() {
        return Err(Error::TraceFormat("trailing bytes after last record".into()));
    }
    Ok(trace)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, k: usize) -> Result<&'a [u8]> {
        if self.pos + k > self.bytes.len() {
            return Err(Error::TraceFormat("truncated trace".into()));
        }
        let s = &self.bytes[self.pos..self.pos + k];
        self.pos += k;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn save_trace(trace: &ChainTrace, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let f = std::fs::File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let w = std::io::BufWriter::new(f);
    if path.extension().is_some_and(|e| e == "csv") {
        write_trace_csv(trace, w)
    } else {
        write_trace_binary(trace, w)
    }
}
