mod common;

use pep_select::posterior::{batch_means_se, posterior_g_moments, posterior_w_moments};
use pep_select::samplers::{
    read_trace_binary, run, run_chains, table_distribution, total_variation, trace_summaries,
    visit_frequencies, write_trace_binary,
};
use pep_select::{
    enumerate, Algorithm, Design, Family, ModelId, ModelPrior, PriorSpec, SamplerConfig,
};

fn tv_to_table(d: &Design, spec: &PriorSpec, prior: ModelPrior, cfg: &SamplerConfig) -> f64 {
    let t = enumerate(d, spec, prior).unwrap();
    let tr = run(d, spec, prior, cfg).unwrap();
    total_variation(&visit_frequencies(&tr), &table_distribution(&t))
}

#[test]
fn every_algorithm_matches_enumeration() {
    let d = common::sampler_design();
    let spec = PriorSpec::pep();
    let mut traces = Vec::new();
    for alg in [Algorithm::Mc3, Algorithm::Mc3GivenG, Algorithm::GibbsVs] {
        let cfg = SamplerConfig::new(alg, 100_000, 10_000, 11);
        let tv = tv_to_table(&d, &spec, ModelPrior::Uniform, &cfg);
        assert!(tv < 0.02, "{alg:?}: TV {tv}");
        traces.push(visit_frequencies(&run(&d, &spec, ModelPrior::Uniform, &cfg).unwrap()));
    }
    for i in 0..3 {
        for j in i + 1..3 {
            assert!(total_variation(&traces[i], &traces[j]) < 0.03);
        }
    }
}

#[test]
fn model_prior_reweights_visits() {
    let d = common::sampler_design();
    let spec = PriorSpec::pep();
    let table = enumerate(&d, &spec, ModelPrior::Uniform)
        .unwrap()
        .reweighted(ModelPrior::UniformOnDimension)
        .unwrap();
    for alg in [Algorithm::Mc3, Algorithm::Mc3GivenG] {
        let cfg = SamplerConfig::new(alg, 100_000, 10_000, 12);
        let tr = run(&d, &spec, ModelPrior::UniformOnDimension, &cfg).unwrap();
        let tv = total_variation(&visit_frequencies(&tr), &table_distribution(&table));
        assert!(tv < 0.02, "{alg:?}: TV {tv}");
    }
}

#[test]
fn other_families_match_enumeration() {
    let d = common::sampler_design();
    for fam in [Family::Intrinsic, Family::HyperG, Family::Robust] {
        let spec = PriorSpec::new(fam);
        let cfg = SamplerConfig::new(Algorithm::Mc3GivenG, 60_000, 5_000, 13);
        let tv = tv_to_table(&d, &spec, ModelPrior::Uniform, &cfg);
        assert!(tv < 0.03, "{fam:?}: TV {tv}");
    }
}

#[test]
fn pseudoprior_does_not_move_the_target() {
    let d = common::sampler_design();
    let spec = PriorSpec::pep();
    let mut a = SamplerConfig::new(Algorithm::GibbsVs, 100_000, 10_000, 14);
    let mut b = a.clone();
    a.pseudoprior_inflate = 1.0;
    b.pseudoprior_inflate = 3.0;
    b.seed = 15;
    let fa = visit_frequencies(&run(&d, &spec, ModelPrior::Uniform, &a).unwrap());
    let fb = visit_frequencies(&run(&d, &spec, ModelPrior::Uniform, &b).unwrap());
    let tv = total_variation(&fa, &fb);
    assert!(tv < 0.02, "TV {tv}");
}

fn fixed(alg: Algorithm, m: &ModelId, seed: u64) -> SamplerConfig {
    let mut cfg = SamplerConfig::new(alg, 60_000, 5_000, seed);
    cfg.model_search = false;
    cfg.start = Some(m.clone());
    cfg
}

fn z_score(draws: &[f64], want: f64) -> f64 {
    let mean = draws.iter().sum::<f64>() / draws.len() as f64;
    (mean - want) / batch_means_se(draws, 50)
}

#[test]
fn fixed_model_g_draws_match_closed_form_moments() {
    let d = common::sampler_design();
    let spec = PriorSpec::pep();
    let m = ModelId::from_indices(4, &[0, 2]);
    let st = pep_select::data::ols_stats(&d, &m).unwrap();

    let tr = run(&d, &spec, ModelPrior::Uniform, &fixed(Algorithm::Mc3GivenG, &m, 21)).unwrap();
    assert!(tr.states.iter().all(|s| s.gamma == m));
    let g: Vec<f64> = tr.states.iter().map(|s| s.g.unwrap()).collect();
    let z = z_score(&g, posterior_g_moments(&st, &spec, 1).unwrap());
    assert!(z.abs() < 3.0, "MC3 given g: z = {z}");

    let tr = run(&d, &spec, ModelPrior::Uniform, &fixed(Algorithm::GibbsVs, &m, 22)).unwrap();
    let w: Vec<f64> = tr.states.iter().map(|s| s.g.unwrap() / (1.0 + s.g.unwrap())).collect();
    let z = z_score(&w, posterior_w_moments(&st, &spec, 1).unwrap());
    assert!(z.abs() < 3.0, "Gibbs: z = {z}");
}

#[test]
fn summaries_agree_with_exact_marginals() {
    let d = common::sampler_design();
    let spec = PriorSpec::epp();
    let t = enumerate(&d, &spec, ModelPrior::Uniform).unwrap();
    let tr = run(&d, &spec, ModelPrior::Uniform, &SamplerConfig::new(Algorithm::Mc3, 100_000, 10_000, 5))
        .unwrap();
    let s = trace_summaries(&tr).unwrap();
    for j in 0..4 {
        assert!((s.inclusion_probs[j] - t.inclusion_probs[j]).abs() < 0.02);
    }
    for (a, b) in s.dim_posterior.iter().zip(&t.dim_posterior) {
        assert!((a - b).abs() < 0.02);
    }
}

#[test]
fn acceptance_rates_are_proper() {
    let d = common::sampler_design();
    for alg in [Algorithm::Mc3, Algorithm::Mc3GivenG, Algorithm::GibbsVs] {
        let tr = run(&d, &PriorSpec::pep(), ModelPrior::Uniform, &SamplerConfig::new(alg, 5_000, 500, 3))
            .unwrap();
        let r = tr.diagnostics.acceptance_rate();
        assert!(r > 0.0 && r < 1.0, "{alg:?}: {r}");
    }
}

#[test]
fn chains_are_reproducible_and_distinct() {
    let d = common::sampler_design();
    let mut cfg = SamplerConfig::new(Algorithm::GibbsVs, 2_000, 200, 40);
    cfg.thin = 3;
    let a = run_chains(&d, &PriorSpec::pep(), ModelPrior::Uniform, &cfg, 3).unwrap();
    let b = run_chains(&d, &PriorSpec::pep(), ModelPrior::Uniform, &cfg, 3).unwrap();
    assert_eq!(a, b);
    assert_ne!(a[0].states, a[1].states);
    assert_eq!(a[0].len(), cfg.kept());
    let mut buf = Vec::new();
    write_trace_binary(&a[2], &mut buf).unwrap();
    let back = read_trace_binary(buf.as_slice()).unwrap();
    let mut again = Vec::new();
    write_trace_binary(&back, &mut again).unwrap();
    assert_eq!(buf, again);
}
