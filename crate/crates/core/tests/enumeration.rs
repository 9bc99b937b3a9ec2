mod common;

use pep_select::data::ols_stats;
use pep_select::modelspace::log_model_prior;
use pep_select::rng::stream;
use pep_select::simgen::gen_scenario1;
use pep_select::specfun::log_sum_exp;
use pep_select::{centre, enumerate, log_evidence, map_model, Design, ModelId, ModelPrior, PriorSpec};

#[test]
fn pure_noise_favours_the_null_model() {
    let spec = PriorSpec::pep();
    let null = ModelId::empty(3);
    let hits = (0..100u64)
        .filter(|&s| {
            let d = common::design(9000 + s, 50, 3, &[], 1.0);
            let t = enumerate(&d, &spec, ModelPrior::Uniform).unwrap();
            map_model(&t).unwrap() == null
        })
        .count();
    assert!(hits >= 90, "null model is MAP in {hits} of 100 replicates");
}

#[test]
fn map_contains_the_strongest_covariate() {
    // Scenario 1 at its smallest width, so 20 replicates stay quick.
    let spec = PriorSpec::pep();
    let hits = (0..20u64)
        .filter(|&s| {
            let ds = centre(&gen_scenario1(50, 13, &mut stream(s)).unwrap());
            let d = Design::intercept_only(&ds).unwrap();
            let t = enumerate(&d, &spec, ModelPrior::Uniform).unwrap();
            map_model(&t).unwrap().contains(0)
        })
        .count();
    assert!(hits >= 19, "X1 in the MAP model in {hits} of 20 replicates");
}

#[test]
fn table_matches_independent_traversal() {
    let ds = centre(&gen_scenario1(50, 13, &mut stream(3)).unwrap());
    let ds = ds.select_columns(&[0, 1, 4, 6, 12]).unwrap();
    let d = Design::intercept_only(&ds).unwrap();
    for (spec, prior) in [
        (PriorSpec::pep(), ModelPrior::Uniform),
        (PriorSpec::intrinsic(), ModelPrior::UniformOnDimension),
    ] {
        let t = enumerate(&d, &spec, prior).unwrap();
        // Walk the space by recursive inclusion/exclusion instead of by index.
        let mut visited = Vec::new();
        fn walk(m: ModelId, j: usize, out: &mut Vec<ModelId>) {
            if j == m.p() {
                out.push(m);
                return;
            }
            walk(m.toggled(j), j + 1, out);
            walk(m, j + 1, out);
        }
        walk(ModelId::empty(5), 0, &mut visited);
        assert_eq!(visited.len(), 32);
        let logs: Vec<f64> = visited
            .iter()
            .map(|m| {
                let st = ols_stats(&d, m).unwrap();
                log_evidence(&st, &spec).unwrap().log_bf_vs_ref + log_model_prior(prior, m)
            })
            .collect();
        let z = log_sum_exp(&logs);
        let mut mine: Vec<(ModelId, f64)> =
            visited.into_iter().zip(logs.iter().map(|l| (l - z).exp())).collect();
        for (m, q) in &mine {
            let e = t.entries.iter().find(|e| &e.model == m).unwrap();
            assert_eq!(e.log_evidence + e.log_prior, e.log_posterior_unnorm);
            assert!((e.posterior_prob - q).abs() < 1e-14);
        }
        let mut theirs: Vec<(ModelId, f64)> =
            t.entries.iter().map(|e| (e.model.clone(), e.posterior_prob)).collect();
        let rank = |v: &mut Vec<(ModelId, f64)>| {
            v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            v.iter().map(|(m, _)| m.clone()).collect::<Vec<_>>()
        };
        assert_eq!(rank(&mut mine), rank(&mut theirs));
    }
}

#[test]
fn single_covariate_space() {
    let d = common::design(12, 30, 1, &[0.8], 1.0);
    let t = enumerate(&d, &PriorSpec::pep(), ModelPrior::Uniform).unwrap();
    assert_eq!(t.entries.len(), 2);
    assert_eq!(t.entries[0].model, ModelId::empty(1));
    assert_eq!(t.entries[0].log_evidence, 0.0);
    assert!((t.prob(&ModelId::full(1)) - t.inclusion_probs[0]).abs() < 1e-15);
    assert!(t.inclusion_probs[0] > 0.5);
}

#[test]
fn table_serializes_one_row_per_model() {
    let d = common::design(13, 30, 3, &[0.8], 1.0);
    let t = enumerate(&d, &PriorSpec::epp(), ModelPrior::UniformOnDimension).unwrap();
    let mut buf = Vec::new();
    t.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), 1 + 8);
    let json = t.to_json().unwrap();
    assert_eq!(json["entries"].as_array().unwrap().len(), 8);
}
