//! Model identifiers, model-space priors and exact enumeration.

use std::cmp::Ordering;
use std::fmt;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{ols_stats, Design};
use crate::error::{Error, Result};
use crate::evidence::{log_evidence, EvidenceMethod, EvidenceResult};
use crate::priors::PriorSpec;
use crate::specfun::{log_binomial, log_sum_exp};

/// Inclusion indicators over the `p` candidate covariates.
///
/// Reference-model columns are implicit and never appear here. Bit `j` of
/// word `j / 64` holds `γ_j` (zero-based).
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelId {
    p: usize,
    words: Vec<u64>,
}

impl ModelId {
    pub fn empty(p: usize) -> Self {
        ModelId {
            p,
            words: vec![0; p.div_ceil(64).max(1)],
        }
    }

    pub fn full(p: usize) -> Self {
        let mut m = Self::empty(p);
        for j in 0..p {
            m.set(j, true);
        }
        m
    }

    pub fn from_indices(p: usize, included: &[usize]) -> Self {
        let mut m = Self::empty(p);
        for &j in included {
            assert!(j < p, "covariate index {j} out of range for p = {p}");
            m.set(j, true);
        }
        m
    }

    /// Model number `index` in canonical order: bit `j` of `index` is `γ_j`.
    pub fn from_index(p: usize, index: u64) -> Self {
        assert!(p <= 64 || index >> 63 == 0);
        let mut m = Self::empty(p);
        m.words[0] = if p >= 64 { index } else { index & ((1u64 << p) - 1) };
        m
    }

    /// Parse a string of `0`/`1` characters, `γ_1` first.
    pub fn from_bitstring(s: &str) -> Result<Self> {
        let mut m = Self::empty(s.len());
        for (j, c) in s.chars().enumerate() {
            match c {
                '0' => {}
                '1' => m.set(j, true),
                _ => return Err(Error::Config(format!("invalid model bitstring `{s}`"))),
            }
        }
        Ok(m)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn contains(&self, j: usize) -> bool {
        debug_assert!(j < self.p);
        self.words[j / 64] >> (j % 64) & 1 == 1
    }

    pub fn set(&mut self, j: usize, on: bool) {
        assert!(j < self.p);
        let bit = 1u64 << (j % 64);
        if on {
            self.words[j / 64] |= bit;
        } else {
            self.words[j / 64] &= !bit;
        }
    }

    pub fn toggled(&self, j: usize) -> Self {
        let mut m = self.clone();
        m.set(j, !self.contains(j));
        m
    }

    pub fn size(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn indices(&self) -> Vec<usize> {
        (0..self.p).filter(|&j| self.contains(j)).collect()
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn from_words(p: usize, words: &[u64]) -> Result<Self> {
        let mut m = Self::empty(p);
        if words.len() != m.words.len() {
            return Err(Error::TraceFormat(format!(
                "expected {} gamma words, found {}",
                m.words.len(),
                words.len()
            )));
        }
        m.words.copy_from_slice(words);
        let spare = m.words.len() * 64 - p;
        if spare > 0 && spare < 64 && m.words[m.words.len() - 1] >> (64 - spare) != 0 {
            return Err(Error::TraceFormat("gamma bits set beyond p".into()));
        }
        Ok(m)
    }

    pub fn to_bitstring(&self) -> String {
        (0..self.p)
            .map(|j| if self.contains(j) { '1' } else { '0' })
            .collect()
    }

    /// Relabel covariates: covariate `j` of `self` becomes `perm[j]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.p);
        let mut m = Self::empty(self.p);
        for j in self.indices() {
            m.set(perm[j], true);
        }
        m
    }
}

impl Ord for ModelId {
    /// Lexicographic in `(γ_1, ..., γ_p)`.
    fn cmp(&self, other: &Self) -> Ordering {
        self.p.cmp(&other.p).then_with(|| {
            for j in 0..self.p {
                match self.contains(j).cmp(&other.contains(j)) {
                    Ordering::Equal => continue,
                    o => return o,
                }
            }
            Ordering::Equal
        })
    }
}

impl PartialOrd for ModelId {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ModelId({})", self.to_bitstring())
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_bitstring())
    }
}

/// Prior over the model space.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelPrior {
    /// Every model has probability `2^-p`.
    #[default]
    Uniform,
    /// Uniform over sizes `0..=p`, then uniform within a size.
    UniformOnDimension,
}

impl ModelPrior {
    pub fn name(self) -> &'static str {
        match self {
            ModelPrior::Uniform => "uniform",
            ModelPrior::UniformOnDimension => "uniform-dim",
        }
    }
}

pub fn log_model_prior(prior: ModelPrior, m: &ModelId) -> f64 {
    let p = m.p();
    match prior {
        ModelPrior::Uniform => -(p as f64) * std::f64::consts::LN_2,
        ModelPrior::UniformOnDimension => -((p + 1) as f64).ln() - ln_choose(p, m.size()),
    }
}

fn ln_choose(n: usize, k: usize) -> f64 {
    if n > 50 {
        return log_binomial(n, k);
    }
    // Exact in u64 for n <= 50.
    let k = k.min(n - k);
    let mut c: u64 = 1;
    for i in 0..k as u64 {
        c = c * (n as u64 - i) / (i + 1);
    }
    (c as f64).ln()
}

/// Largest `p` enumerated without an explicit override.
pub const DEFAULT_ENUMERATION_GUARD: usize = 25;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TableEntry {
    pub model: ModelId,
    pub log_evidence: f64,
    pub log_prior: f64,
    pub log_posterior_unnorm: f64,
    pub posterior_prob: f64,
    pub method: EvidenceMethod,
    pub diverged: bool,
}

/// A model whose evidence could not be computed; it is left out of the table.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FailedModel {
    pub model: ModelId,
    pub reason: String,
}

/// Exact posterior over an enumerated model space.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PosteriorTable {
    pub p: usize,
    pub prior: ModelPrior,
    /// In canonical index order.
    pub entries: Vec<TableEntry>,
    pub inclusion_probs: Vec<f64>,
    /// Posterior of the model size, indices `0..=p`.
    pub dim_posterior: Vec<f64>,
    /// `log Σ exp(log_posterior_unnorm)`.
    pub log_normalizer: f64,
    pub failed: Vec<FailedModel>,
}

impl PosteriorTable {
    /// Normalize per-model evidence (log Bayes factors against the reference)
    /// under a model prior.
    pub fn from_evidence(
        p: usize,
        prior: ModelPrior,
        results: Vec<(ModelId, Result<EvidenceResult>)>,
    ) -> Result<Self> {
        let mut entries = Vec::with_capacity(results.len());
        let mut failed = Vec::new();
        for (model, r) in results {
            if model.p() != p {
                return Err(Error::Config(format!(
                    "model {model} has {} covariates, table has {p}",
                    model.p()
                )));
            }
            match r {
                Ok(ev) => {
                    let log_prior = log_model_prior(prior, &model);
                    entries.push(TableEntry {
                        log_evidence: ev.log_bf_vs_ref,
                        log_prior,
                        log_posterior_unnorm: ev.log_bf_vs_ref + log_prior,
                        posterior_prob: 0.0,
                        method: ev.method,
                        diverged: ev.diverged,
                        model,
                    });
                }
                Err(e) => failed.push(FailedModel {
                    model,
                    reason: e.to_string(),
                }),
            }
        }
        if entries.is_empty() {
            return Err(Error::Config("no model has a computable evidence".into()));
        }
        let logs: Vec<f64> = entries.iter().map(|e| e.log_posterior_unnorm).collect();
        let log_normalizer = log_sum_exp(&logs);
        if !log_normalizer.is_finite() {
            return Err(Error::Domain(format!(
                "posterior normalizer is not finite ({log_normalizer})"
            )));
        }
        let mut inclusion_probs = vec![0.0; p];
        let mut dim_posterior = vec![0.0; p + 1];
        for e in &mut entries {
            e.posterior_prob = (e.log_posterior_unnorm - log_normalizer).exp();
            for j in e.model.indices() {
                inclusion_probs[j] += e.posterior_prob;
            }
            dim_posterior[e.model.size()] += e.posterior_prob;
        }
        for q in &mut inclusion_probs {
            *q = q.clamp(0.0, 1.0);
        }
        Ok(PosteriorTable {
            p,
            prior,
            entries,
            inclusion_probs,
            dim_posterior,
            log_normalizer,
            failed,
        })
    }

    /// The same evidence under another model prior.
    pub fn reweighted(&self, prior: ModelPrior) -> Result<PosteriorTable> {
        let results = self
            .entries
            .iter()
            .map(|e| {
                let ev = EvidenceResult {
                    log_bf_vs_ref: e.log_evidence,
                    method: e.method,
                    rel_error: 0.0,
                    diverged: e.diverged,
                };
                (e.model.clone(), Ok(ev))
            })
            .collect();
        let mut t = PosteriorTable::from_evidence(self.p, prior, results)?;
        t.failed = self.failed.clone();
        Ok(t)
    }

    pub fn prob(&self, m: &ModelId) -> f64 {
        self.entries
            .iter()
            .find(|e| &e.model == m)
            .map_or(0.0, |e| e.posterior_prob)
    }

    pub fn mean_dimension(&self) -> f64 {
        self.dim_posterior
            .iter()
            .enumerate()
            .map(|(k, q)| k as f64 * q)
            .sum()
    }

    /// Evidence-method counts over the table's entries.
    pub fn method_counts(&self) -> Vec<(EvidenceMethod, usize)> {
        let mut out: Vec<(EvidenceMethod, usize)> = Vec::new();
        for e in &self.entries {
            match out.iter_mut().find(|(m, _)| *m == e.method) {
                Some((_, c)) => *c += 1,
                None => out.push((e.method, 1)),
            }
        }
        out
    }

    /// One row per model: bitstring, log evidence, log prior, posterior.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["model", "size", "log_evidence", "log_prior", "posterior_prob", "method"])?;
        for e in &self.entries {
            w.write_record([
                e.model.to_bitstring(),
                e.model.size().to_string(),
                fmt_f64(e.log_evidence),
                fmt_f64(e.log_prior),
                fmt_f64(e.posterior_prob),
                e.method.name().to_string(),
            ])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = std::fs::File::create(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    pub fn to_json(&self) -> Result<serde_json::Value> {
        Ok(serde_json::to_value(self)?)
    }
}

/// Float formatting used by every text artifact: 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Evaluate every model in canonical index order.
pub fn enumerate(design: &Design, spec: &PriorSpec, prior: ModelPrior) -> Result<PosteriorTable> {
    enumerate_with_guard(design, spec, prior, DEFAULT_ENUMERATION_GUARD)
}

pub fn enumerate_with_guard(
    design: &Design,
    spec: &PriorSpec,
    prior: ModelPrior,
    guard: usize,
) -> Result<PosteriorTable> {
    let p = design.p();
    if p > guard || p >= 64 {
        return Err(Error::EnumerationGuard { p, guard });
    }
    spec.validate()?;
    let results: Vec<(ModelId, Result<EvidenceResult>)> = (0..1u64 << p)
        .into_par_iter()
        .map(|i| {
            let m = ModelId::from_index(p, i);
            let r = ols_stats(design, &m).and_then(|st| log_evidence(&st, spec));
            (m, r)
        })
        .collect();
    PosteriorTable::from_evidence(p, prior, results)
}

/// Highest-probability model; ties go to the smaller model, then to the
/// lexicographically smaller `γ`.
pub fn map_model(table: &PosteriorTable) -> Result<ModelId> {
    table
        .entries
        .iter()
        .min_by(|a, b| {
            b.posterior_prob
                .total_cmp(&a.posterior_prob)
                .then_with(|| a.model.size().cmp(&b.model.size()))
                .then_with(|| a.model.cmp(&b.model))
        })
        .map(|e| e.model.clone())
        .ok_or_else(|| Error::Config("empty posterior table".into()))
}
