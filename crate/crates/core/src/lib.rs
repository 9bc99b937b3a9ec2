//! Bayesian variable selection for normal linear regression under the
//! power-expected-posterior prior and other mixtures of g-priors.
//!
//! Evidence comes in closed form through the Appell `F1` function for the
//! PEP-shaped families and by adaptive quadrature over `g` otherwise. Small
//! model spaces are enumerated exactly; larger ones are searched by MC3, MC3
//! conditional on `g`, or Gibbs variable selection.

pub mod bma;
pub mod data;
pub mod error;
pub mod evidence;
pub mod modelspace;
pub mod posterior;
pub mod priors;
pub mod rng;
pub mod samplers;
pub mod simgen;
pub mod specfun;

pub use bma::{bma_lps, bma_lps_with_folds, bma_predict_closed, bma_predict_mcmc, bma_r2, bma_rmse, CvConfig, LpsEngine};
pub use data::{centre, load_csv, write_csv, write_csv_to, Dataset, Design, OlsStats, Reference};
pub use error::{Error, Result};
pub use evidence::{log_bayes_factor, log_evidence, EvidenceCache, EvidenceMethod, EvidenceResult};
pub use modelspace::{enumerate, map_model, ModelId, ModelPrior, PosteriorTable};
pub use posterior::{ConditionalVariant, GPosteriorSummary};
pub use priors::{Family, HyperPrior, PriorSpec, SgbpParams, TrainingSize};
pub use samplers::{Algorithm, ChainState, ChainTrace, SamplerConfig};
pub use simgen::{Scenario, ScenarioConfig};
