//! Marginal likelihoods relative to the reference model.

use std::collections::HashMap;
use std::sync::RwLock;

use serde::{Deserialize, Serialize};

use crate::data::{ols_stats, Design, OlsStats};
use crate::error::{Error, Result};
use crate::modelspace::ModelId;
use crate::priors::{hyper_prior, mixing_params, Family, HyperPrior, PriorSpec};
use crate::specfun::gamma::log_beta_unchecked;
use crate::specfun::{
    appell_f1_with, integrate_log, laplace_log, IntegralMethod, QuadratureSpec, UnitArg,
};

/// Smallest `R10` used by the closed form; an exact fit diverges.
pub const R10_FLOOR: f64 = 1e-300;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvidenceMethod {
    ClosedFormF1,
    ConditionalFixedG,
    Quadrature,
    Laplace,
}

impl EvidenceMethod {
    pub fn name(self) -> &'static str {
        match self {
            EvidenceMethod::ClosedFormF1 => "closed_form_f1",
            EvidenceMethod::ConditionalFixedG => "conditional_fixed_g",
            EvidenceMethod::Quadrature => "quadrature",
            EvidenceMethod::Laplace => "laplace",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvidenceResult {
    /// `log f(y | M) - log f(y | M0)`.
    pub log_bf_vs_ref: f64,
    pub method: EvidenceMethod,
    /// Relative error estimate of the integral involved (0 when exact, NaN
    /// for Laplace).
    pub rel_error: f64,
    /// Set when the model fits exactly (`rss = 0`) and the Bayes factor is
    /// evaluated at `R10_FLOOR` in place of its infinite limit.
    pub diverged: bool,
}

impl EvidenceResult {
    fn reference() -> Self {
        EvidenceResult {
            log_bf_vs_ref: 0.0,
            method: EvidenceMethod::ClosedFormF1,
            rel_error: 0.0,
            diverged: false,
        }
    }
}

/// `log[f(y | g, M1) / f(y | M0)]`.
pub fn log_ml_given_g(stats: &OlsStats, g: f64, d0: f64) -> f64 {
    if stats.k1 == stats.k0 {
        return 0.0;
    }
    let nf = stats.n as f64;
    let r10 = stats.r10.max(R10_FLOOR);
    0.5 * (nf + d0 - stats.k1 as f64) * g.ln_1p()
        - 0.5 * (nf + d0 - stats.k0 as f64) * (g * r10).ln_1p()
}

/// Same as [`log_ml_given_g`] with `1 + g` supplied directly, for callers
/// that know `g` only through an offset from a large lower bound.
fn log_ml_given_g_parts(stats: &OlsStats, log1p_g: f64, log1p_gr: f64, d0: f64) -> f64 {
    let nf = stats.n as f64;
    0.5 * (nf + d0 - stats.k1 as f64) * log1p_g - 0.5 * (nf + d0 - stats.k0 as f64) * log1p_gr
}

fn check_dims(stats: &OlsStats, d0: f64) -> Result<()> {
    if stats.k1 < stats.k0 || stats.k1 >= stats.n {
        return Err(Error::Domain(format!(
            "model dimensions k0 = {}, k1 = {}, n = {} are invalid",
            stats.k0, stats.k1, stats.n
        )));
    }
    if !(stats.n as f64 + d0 - stats.k0 as f64 > 0.0) {
        return Err(Error::Domain("n + d0 - k0 must be positive".into()));
    }
    Ok(())
}

/// The Appell F1 value `F1(b, (n+d0-k0)/2, -(n+d0-k1)/2 + b2_shift,
/// ke/2 + a + b - c_shift; 1/(1+δR10), 1/(1+δ))` in log scale, shared by
/// the evidence and the posterior moments of `g` and `w`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn log_f1_tilde(
    stats: &OlsStats,
    a: f64,
    b: f64,
    delta: f64,
    d0: f64,
    b2_shift: f64,
    c_shift: f64,
    quad: &QuadratureSpec,
) -> Result<(f64, IntegralMethod, f64)> {
    let nf = stats.n as f64;
    let ke = stats.ke() as f64;
    let r10 = stats.r10.max(R10_FLOOR);
    let x = UnitArg::reciprocal_one_plus(delta * r10);
    let y = UnitArg::reciprocal_one_plus(delta);
    let e = appell_f1_with(
        b,
        0.5 * (nf + d0 - stats.k0 as f64),
        -0.5 * (nf + d0 - stats.k1 as f64) + b2_shift,
        0.5 * ke + a + b - c_shift,
        x,
        y,
        quad,
    )?;
    Ok((e.value.ln(), e.method, e.rel_error))
}

/// Closed-form log Bayes factor against the reference model for the
/// PEP-shaped families.
pub fn log_ml_pep_closed(stats: &OlsStats, spec: &PriorSpec) -> Result<EvidenceResult> {
    log_ml_pep_closed_with(stats, spec, &QuadratureSpec::default())
}

pub fn log_ml_pep_closed_with(
    stats: &OlsStats,
    spec: &PriorSpec,
    quad: &QuadratureSpec,
) -> Result<EvidenceResult> {
    if !spec.family.is_pep_shaped() {
        return Err(Error::Config(format!(
            "closed-form evidence is available only for PEP, EPP and intrinsic priors, not {}",
            spec.family.name()
        )));
    }
    check_dims(stats, spec.d0)?;
    if stats.k1 == stats.k0 {
        return Ok(EvidenceResult::reference());
    }
    let params = mixing_params(spec, stats.k0, stats.k1, stats.n, stats.p_total)?;
    let (a, b, delta) = (params.a, params.b, params.q);
    let nf = stats.n as f64;
    let ke = stats.ke() as f64;
    let d0 = spec.d0;
    let r10 = stats.r10.max(R10_FLOOR);
    let (log_f1, method, rel_error) = log_f1_tilde(stats, a, b, delta, d0, 0.0, 0.0, quad)?;
    let value = log_beta_unchecked(0.5 * ke + a, b) - log_beta_unchecked(a, b)
        + 0.5 * (nf + d0 - stats.k1 as f64) * delta.ln_1p()
        - 0.5 * (nf + d0 - stats.k0 as f64) * (delta * r10).ln_1p()
        + log_f1;
    Ok(EvidenceResult {
        log_bf_vs_ref: value,
        method: match method {
            IntegralMethod::Quadrature => EvidenceMethod::ClosedFormF1,
            IntegralMethod::Laplace => EvidenceMethod::Laplace,
        },
        rel_error,
        diverged: stats.rss == 0.0,
    })
}

/// `log ∫ f(y | g, M)/f(y | M0) π(g) dg` by adaptive quadrature over the
/// support of the hyper-prior.
pub fn log_ml_quadrature(stats: &OlsStats, spec: &PriorSpec) -> Result<EvidenceResult> {
    log_ml_quadrature_with(stats, spec, &QuadratureSpec::default())
}

pub fn log_ml_quadrature_with(
    stats: &OlsStats,
    spec: &PriorSpec,
    quad: &QuadratureSpec,
) -> Result<EvidenceResult> {
    check_dims(stats, spec.d0)?;
    let hp = hyper_prior(spec, stats.k0, stats.k1, stats.n, stats.p_total)?;
    if let HyperPrior::Fixed(_) = hp {
        return Err(Error::DegenerateFamily("g-prior"));
    }
    if stats.k1 == stats.k0 {
        return Ok(EvidenceResult {
            method: EvidenceMethod::Quadrature,
            ..EvidenceResult::reference()
        });
    }
    let d0 = spec.d0;
    let r10 = stats.r10.max(R10_FLOOR);
    let lo = hp.lower_bound();
    let log_f = |x: &crate::specfun::Abscissa| {
        let g = x.x;
        let prior = hp
            .log_density_ln_offset(x.ln_from_lo)
            .unwrap_or(f64::NEG_INFINITY);
        prior + log_ml_given_g_parts(stats, g.ln_1p(), (g * r10).ln_1p(), d0)
    };
    let (value, method, rel_error) = match integrate_log(log_f, lo, f64::INFINITY, quad) {
        Ok(r) => (r.value.ln(), EvidenceMethod::Quadrature, r.rel_error),
        Err(Error::Quadrature { .. }) => (
            laplace_log(log_f, lo, f64::INFINITY)?,
            EvidenceMethod::Laplace,
            f64::NAN,
        ),
        Err(e) => return Err(e),
    };
    Ok(EvidenceResult {
        log_bf_vs_ref: value,
        method,
        rel_error,
        diverged: stats.rss == 0.0,
    })
}

/// Evidence by the default route of the family: closed form for the
/// PEP-shaped families, the conditional form at the fixed `g` for the
/// g-prior, quadrature otherwise.
pub fn log_evidence(stats: &OlsStats, spec: &PriorSpec) -> Result<EvidenceResult> {
    match spec.family {
        Family::FixedG => {
            check_dims(stats, spec.d0)?;
            let g = spec.g_fixed.unwrap_or(spec.prior_n.unwrap_or(stats.n) as f64);
            Ok(EvidenceResult {
                log_bf_vs_ref: log_ml_given_g(stats, g, spec.d0),
                method: EvidenceMethod::ConditionalFixedG,
                rel_error: 0.0,
                diverged: stats.rss == 0.0 && stats.k1 > stats.k0,
            })
        }
        f if f.is_pep_shaped() => log_ml_pep_closed(stats, spec),
        _ => log_ml_quadrature(stats, spec),
    }
}

/// `log BF(M1 : M2)`.
pub fn log_bayes_factor(s1: &OlsStats, s2: &OlsStats, spec: &PriorSpec) -> Result<f64> {
    if s1.n != s2.n
        || s1.k0 != s2.k0
        || s1.rss0.to_bits() != s2.rss0.to_bits()
        || s1.tss.to_bits() != s2.tss.to_bits()
    {
        return Err(Error::ReferenceMismatch);
    }
    Ok(log_evidence(s1, spec)?.log_bf_vs_ref - log_evidence(s2, spec)?.log_bf_vs_ref)
}

/// Per-model evidence memoized by `ModelId`, safe to share between threads.
pub struct EvidenceCache<'a> {
    design: &'a Design,
    spec: PriorSpec,
    map: RwLock<HashMap<ModelId, (OlsStats, EvidenceResult)>>,
}

impl<'a> EvidenceCache<'a> {
    pub fn new(design: &'a Design, spec: PriorSpec) -> Self {
        EvidenceCache {
            design,
            spec,
            map: RwLock::new(HashMap::new()),
        }
    }

    pub fn design(&self) -> &'a Design {
        self.design
    }

    pub fn spec(&self) -> &PriorSpec {
        &self.spec
    }

    pub fn get(&self, m: &ModelId) -> Result<(OlsStats, EvidenceResult)> {
        if let Some(hit) = self.map.read().expect("cache lock").get(m) {
            return Ok(hit.clone());
        }
        let stats = ols_stats(self.design, m)?;
        let ev = log_evidence(&stats, &self.spec)?;
        self.map
            .write()
            .expect("cache lock")
            .insert(m.clone(), (stats.clone(), ev));
        Ok((stats, ev))
    }

    pub fn log_bf(&self, m: &ModelId) -> Result<f64> {
        self.get(m).map(|(_, e)| e.log_bf_vs_ref)
    }

    pub fn len(&self) -> usize {
        self.map.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of cached models per evidence method.
    pub fn method_counts(&self) -> HashMap<EvidenceMethod, usize> {
        let mut out = HashMap::new();
        for (_, e) in self.map.read().expect("cache lock").values() {
            *out.entry(e.method).or_insert(0) += 1;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats(n: usize, k0: usize, k1: usize, r10: f64) -> OlsStats {
        OlsStats {
            beta_hat: vec![0.0; k1],
            rss: r10 * 10.0,
            rss0: 10.0,
            tss: 10.0,
            r2: 1.0 - r10,
            r10,
            n,
            k0,
            k1,
            p_total: 10,
        }
    }

    #[test]
    fn conditional_form_identities() {
        let s = stats(30, 1, 1, 1.0);
        assert_eq!(log_ml_given_g(&s, 30.0, 0.0), 0.0);
        let s = stats(30, 1, 4, 1.0);
        let g = 12.0;
        assert!((log_ml_given_g(&s, g, 0.0) + 1.5 * f64::ln_1p(g)).abs() < 1e-12);
    }

    #[test]
    fn reference_model_is_exactly_zero() {
        let s = stats(30, 1, 1, 1.0);
        assert_eq!(log_ml_pep_closed(&s, &PriorSpec::pep()).unwrap().log_bf_vs_ref, 0.0);
    }

    #[test]
    fn closed_form_matches_quadrature() {
        for &(n, k1, r10) in &[(40, 3, 0.6), (100, 8, 0.2), (20, 2, 0.95), (60, 5, 1e-3)] {
            let s = stats(n, 1, k1, r10);
            for spec in [PriorSpec::pep(), PriorSpec::epp(), PriorSpec::intrinsic()] {
                let c = log_ml_pep_closed(&s, &spec).unwrap();
                let q = log_ml_quadrature(&s, &spec).unwrap();
                assert_eq!(c.method, EvidenceMethod::ClosedFormF1);
                let tol = 1e-6 * c.log_bf_vs_ref.abs() + 1e-8;
                assert!(
                    (c.log_bf_vs_ref - q.log_bf_vs_ref).abs() <= tol,
                    "{:?} n={n} k1={k1} r10={r10}: {} vs {}",
                    spec.family,
                    c.log_bf_vs_ref,
                    q.log_bf_vs_ref
                );
            }
        }
    }

    #[test]
    fn quadrature_lies_between_conditional_extremes() {
        let s = stats(40, 1, 3, 0.7);
        let q = log_ml_quadrature(&s, &PriorSpec::new(Family::HyperG)).unwrap();
        let vals: Vec<f64> = (-200..400)
            .map(|i| log_ml_given_g(&s, 10f64.powf(i as f64 / 40.0), 0.0))
            .collect();
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(q.log_bf_vs_ref < hi && q.log_bf_vs_ref > lo.min(0.0) - 1e-9);
    }

    #[test]
    fn fixed_g_routes() {
        let s = stats(40, 1, 3, 0.7);
        let spec = PriorSpec::new(Family::FixedG);
        assert!(matches!(
            log_ml_quadrature(&s, &spec),
            Err(Error::DegenerateFamily(_))
        ));
        let e = log_evidence(&s, &spec).unwrap();
        assert_eq!(e.method, EvidenceMethod::ConditionalFixedG);
        assert_eq!(e.log_bf_vs_ref, log_ml_given_g(&s, 40.0, 0.0));
    }

    #[test]
    fn exact_fit_is_finite_and_flagged() {
        let mut s = stats(30, 1, 3, 0.0);
        s.rss = 0.0;
        let e = log_ml_pep_closed(&s, &PriorSpec::pep()).unwrap();
        assert!(e.log_bf_vs_ref.is_finite(), "{e:?}");
        assert!(e.diverged);
        // At R10 = floor the divergence is only through log(1/R10).
        let q = log_ml_quadrature(&s, &PriorSpec::pep()).unwrap();
        assert!((e.log_bf_vs_ref - q.log_bf_vs_ref).abs() < 1e-6 * e.log_bf_vs_ref.abs());
    }

    #[test]
    fn information_consistency() {
        let mut prev = f64::NEG_INFINITY;
        for i in 1..12 {
            let s = stats(30, 1, 3, 10f64.powi(-i));
            let v = log_ml_pep_closed(&s, &PriorSpec::pep()).unwrap().log_bf_vs_ref;
            assert!(v > prev);
            prev = v;
        }
    }
}
