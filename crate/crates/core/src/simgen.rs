//! Seeded generators for the two simulation scenarios and a replicate study
//! driver.
//!
//! Draws come from [`crate::rng`]: ChaCha20 seeded with `seed_from_u64`,
//! uniforms from the top 53 bits and normals by inverse CDF. Covariates are
//! filled row by row, then the response noise for rows `1..n`, so a dataset
//! is a pure function of `(scenario, n, p, seed)`.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{centre, Dataset, Design};
use crate::error::{Error, Result};
use crate::modelspace::{enumerate, fmt_f64, ModelPrior, PosteriorTable};
use crate::priors::PriorSpec;
use crate::rng::{standard_normal, stream, Stream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    /// Independent standard normal covariates.
    Independent,
    /// Covariates 11 to 15 depend on covariates 1 to 5.
    Correlated,
}

impl Scenario {
    pub fn from_number(k: u32) -> Result<Self> {
        match k {
            1 => Ok(Scenario::Independent),
            2 => Ok(Scenario::Correlated),
            _ => Err(Error::Config(format!("scenario must be 1 or 2, got {k}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub n: usize,
    pub p: usize,
    pub replicates: usize,
    pub seed: u64,
}

impl ScenarioConfig {
    /// `n = 50`, `p = 15` and 20 replicates.
    pub fn desk(scenario: Scenario, seed: u64) -> Self {
        ScenarioConfig {
            scenario,
            n: 50,
            p: 15,
            replicates: 20,
            seed,
        }
    }

    /// Seed of replicate `r`.
    pub fn replicate_seed(&self, r: usize) -> u64 {
        self.seed ^ r as u64
    }
}

/// Intercept and nonzero coefficients `(column, value)` of the response.
pub const INTERCEPT: f64 = 4.0;
pub const EFFECTS: [(usize, f64); 5] = [(0, 2.0), (4, -1.0), (6, 1.5), (10, 1.0), (12, 0.5)];
pub const NOISE_SD: f64 = 2.5;
/// Weights of covariates 1 to 5 in each dependent covariate.
pub const DEPENDENCE: [f64; 5] = [0.3, 0.5, 0.7, 0.9, 1.1];

fn names(p: usize) -> Vec<String> {
    (1..=p).map(|j| format!("X{j}")).collect()
}

fn response(x: &DMatrix<f64>, rng: &mut Stream) -> DVector<f64> {
    let n = x.nrows();
    let mut y = DVector::from_element(n, INTERCEPT);
    for &(j, b) in &EFFECTS {
        y.axpy(b, &x.column(j), 1.0);
    }
    for i in 0..n {
        y[i] += NOISE_SD * standard_normal(rng);
    }
    y
}

pub fn gen_scenario1(n: usize, p: usize, rng: &mut Stream) -> Result<Dataset> {
    if p < 13 {
        return Err(Error::Config(format!("scenario 1 needs p >= 13, got {p}")));
    }
    let mut x = DMatrix::zeros(n, p);
    for i in 0..n {
        for j in 0..p {
            x[(i, j)] = standard_normal(rng);
        }
    }
    let y = response(&x, rng);
    let mut ds = Dataset::new(y, x, names(p))?;
    ds.response_name = "y".into();
    Ok(ds)
}

pub fn gen_scenario2(n: usize, p: usize, rng: &mut Stream) -> Result<Dataset> {
    if p != 15 {
        return Err(Error::Config(format!("scenario 2 has p = 15, got {p}")));
    }
    let mut x = DMatrix::zeros(n, p);
    for i in 0..n {
        for j in 0..10 {
            x[(i, j)] = standard_normal(rng);
        }
        for j in 10..15 {
            let mean: f64 = DEPENDENCE.iter().enumerate().map(|(k, c)| c * x[(i, k)]).sum();
            x[(i, j)] = mean + standard_normal(rng);
        }
    }
    let y = response(&x, rng);
    let mut ds = Dataset::new(y, x, names(p))?;
    ds.response_name = "y".into();
    Ok(ds)
}

/// Replicate `r` of a configuration.
pub fn generate(cfg: &ScenarioConfig, r: usize) -> Result<Dataset> {
    let mut rng = stream(cfg.replicate_seed(r));
    match cfg.scenario {
        Scenario::Independent => gen_scenario1(cfg.n, cfg.p, &mut rng),
        Scenario::Correlated => gen_scenario2(cfg.n, cfg.p, &mut rng),
    }
}

/// A prior on `g` and on the model space, compared in a study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyMethod {
    pub name: String,
    pub spec: PriorSpec,
    pub prior: ModelPrior,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub replicate: usize,
    pub method: String,
    pub inclusion_probs: Vec<f64>,
    pub mean_dimension: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyFailure {
    pub replicate: usize,
    pub method: String,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub covariates: Vec<String>,
    /// Replicate-major, methods in the order given.
    pub rows: Vec<StudyRow>,
    pub failures: Vec<StudyFailure>,
}

impl StudyResult {
    /// Inclusion probabilities of one covariate for one method, over replicates.
    pub fn inclusion_column(&self, method: &str, j: usize) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.method == method)
            .map(|r| r.inclusion_probs[j])
            .collect()
    }

    pub fn mean_dimensions(&self, method: &str) -> Vec<(usize, f64)> {
        self.rows
            .iter()
            .filter(|r| r.method == method)
            .map(|r| (r.replicate, r.mean_dimension))
            .collect()
    }

    /// Long format: `replicate,method,covariate,inclusion_prob`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["replicate", "method", "covariate", "inclusion_prob"])?;
        for r in &self.rows {
            for (j, q) in r.inclusion_probs.iter().enumerate() {
                w.write_record([
                    r.replicate.to_string(),
                    r.method.clone(),
                    self.covariates[j].clone(),
                    fmt_f64(*q),
                ])?;
            }
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// Enumerate every replicate under every method.
pub fn run_study(cfg: &ScenarioConfig, methods: &[StudyMethod]) -> Result<StudyResult> {
    if cfg.replicates == 0 || methods.is_empty() {
        return Err(Error::Config("a study needs replicates and methods".into()));
    }
    let per_rep: Vec<Result<(Vec<StudyRow>, Vec<StudyFailure>)>> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| {
            let ds = centre(&generate(cfg, r)?);
            let design = Design::intercept_only(&ds)?;
            let mut rows = Vec::new();
            let mut failures = Vec::new();
            // Methods sharing a g-prior share one evidence pass.
            let mut done: Vec<(&PriorSpec, PosteriorTable)> = Vec::new();
            for m in methods {
                let table = match done.iter().find(|(s, _)| **s == m.spec) {
                    Some((_, t)) => t.reweighted(m.prior),
                    None => enumerate(&design, &m.spec, m.prior),
                };
                match table {
                    Ok(t) => {
                        rows.push(StudyRow {
                            replicate: r,
                            method: m.name.clone(),
                            mean_dimension: t.mean_dimension(),
                            inclusion_probs: t.inclusion_probs.clone(),
                        });
                        done.push((&m.spec, t));
                    }
                    Err(e) => failures.push(StudyFailure {
                        replicate: r,
                        method: m.name.clone(),
                        reason: e.to_string(),
                    }),
                }
            }
            Ok((rows, failures))
        })
        .collect();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for r in per_rep {
        let (a, b) = r?;
        rows.extend(a);
        failures.extend(b);
    }
    Ok(StudyResult {
        covariates: names(cfg.p),
        rows,
        failures,
    })
}
