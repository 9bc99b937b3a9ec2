use std::collections::HashMap;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use nalgebra::DMatrix;
use serde_json::json;

use pep_select::data::ols_stats;
use pep_select::posterior::{g_posterior_summary, g_prior_summary};
use pep_select::rng::stream;
use pep_select::samplers::{run, trace_summaries, write_trace_binary, write_trace_csv, ScanOrder};
use pep_select::simgen::{generate, run_study, StudyMethod, StudyResult};
use pep_select::{
    bma_lps, bma_predict_closed, bma_predict_mcmc, bma_r2, bma_rmse, centre, enumerate, load_csv,
    log_evidence, write_csv_to, Algorithm, CvConfig, Dataset, Design, Family, GPosteriorSummary,
    HyperPrior, LpsEngine, ModelId, ModelPrior, PriorSpec, SamplerConfig, Scenario, ScenarioConfig,
};

use crate::args::{
    Command, Common, Engine, Format, GibbsArgs, PredictArgs, RunConfig, SamplerArgs, ScanArg,
    ShrinkageArgs, SimulateArgs, TraceFormat,
};
use crate::output::{cell, num, Artifacts};

/// Models listed in sampler summaries.
const TOP_MODELS: usize = 20;

/// Checks that need no data; failures are usage errors.
pub fn validate(cfg: &RunConfig) -> std::result::Result<(), String> {
    let c = &cfg.common;
    if c.out.is_none() {
        return Err("--out is required".into());
    }
    if !matches!(cfg.command, Command::Simulate(_)) && c.data.is_none() {
        return Err(format!("`{}` needs --data", cfg.command.name()));
    }
    if c.prior != crate::args::PriorArg::GPrior && c.g.is_some() {
        return Err("--g only applies to --prior g-prior".into());
    }
    if c.threads == Some(0) {
        return Err("--threads must be at least 1".into());
    }
    c.prior_spec().validate().map_err(|e| e.to_string())?;
    let sampler = |alg| sampler_config(c, alg).validate(usize::MAX).map_err(|e| e.to_string());
    match &cfg.command {
        Command::Mc3(_) => sampler(Algorithm::Mc3)?,
        Command::Mc3g(_) => sampler(Algorithm::Mc3GivenG)?,
        Command::Gibbs(g) => {
            sampler(Algorithm::GibbsVs)?;
            if !(g.inflate > 0.0 && g.inflate.is_finite()) {
                return Err(format!("--inflate must be positive, got {}", g.inflate));
            }
        }
        Command::Predict(a) if a.engine == Engine::Gibbs => sampler(Algorithm::GibbsVs)?,
        Command::Lps(a) => {
            if a.folds < 2 {
                return Err(format!("--folds must be at least 2, got {}", a.folds));
            }
            if a.engine == Engine::Gibbs {
                sampler(Algorithm::GibbsVs)?;
            }
        }
        Command::Simulate(s) => {
            if s.n < 2 || s.replicates == 0 {
                return Err("--n must be at least 2 and --replicates at least 1".into());
            }
            match s.scenario {
                1 if s.p < 13 => return Err(format!("scenario 1 needs --p >= 13, got {}", s.p)),
                2 if s.p != 15 => return Err(format!("scenario 2 has --p 15, got {}", s.p)),
                _ => {}
            }
        }
        _ => {}
    }
    Ok(())
}

pub fn execute(cfg: &RunConfig) -> Result<Artifacts> {
    let mut out = Artifacts::default();
    let c = &cfg.common;
    match &cfg.command {
        Command::Enumerate => cmd_enumerate(c, &mut out)?,
        Command::Mc3(a) => cmd_sampler(c, Algorithm::Mc3, a, 1.0, &mut out)?,
        Command::Mc3g(a) => cmd_sampler(c, Algorithm::Mc3GivenG, a, 1.0, &mut out)?,
        Command::Gibbs(GibbsArgs { sampler, inflate }) => {
            cmd_sampler(c, Algorithm::GibbsVs, sampler, *inflate, &mut out)?
        }
        Command::Predict(a) => cmd_predict(c, a, &mut out)?,
        Command::Lps(a) => cmd_lps(c, a.folds, a.engine, &mut out)?,
        Command::Simulate(a) => cmd_simulate(c, a, &mut out)?,
        Command::Shrinkage(a) => cmd_shrinkage(c, a, &mut out)?,
        Command::Rerun(_) => unreachable!("resolved before execution"),
    }
    Ok(out)
}

fn sampler_config(c: &Common, alg: Algorithm) -> SamplerConfig {
    let mut cfg = SamplerConfig::new(alg, c.iters, c.burnin, c.seed);
    cfg.thin = c.thin;
    cfg
}

fn load(c: &Common) -> Result<Dataset> {
    let path = c.data.as_ref().expect("validated");
    load_csv(path, &c.response).with_context(|| format!("loading {}", path.display()))
}

fn design_of(ds: &Dataset) -> Result<(Dataset, Design)> {
    let ds = centre(ds);
    let d = Design::intercept_only(&ds)?;
    Ok((ds, d))
}

fn note_constant_columns(ds: &Dataset, out: &mut Artifacts) {
    for &j in &ds.constant_columns {
        out.notice(format!("covariate `{}` is constant", ds.names[j]));
    }
}

fn note_fixed_g(spec: &PriorSpec, n: usize, out: &mut Artifacts) {
    if spec.family == Family::FixedG {
        let g = spec.g_fixed.unwrap_or(n as f64);
        out.notice(format!("g-prior has no hyper-step for g; g held fixed at {g}"));
    }
}

fn inclusion_rows(names: &[String], probs: &[f64]) -> Vec<Vec<String>> {
    names.iter().zip(probs).map(|(n, q)| vec![n.clone(), cell(*q)]).collect()
}

fn dimension_rows(probs: &[f64]) -> Vec<Vec<String>> {
    probs.iter().enumerate().map(|(k, q)| vec![k.to_string(), cell(*q)]).collect()
}

fn cmd_enumerate(c: &Common, out: &mut Artifacts) -> Result<()> {
    let (ds, d) = design_of(&load(c)?)?;
    note_constant_columns(&ds, out);
    let table = enumerate(&d, &c.prior_spec(), c.model_prior())?;
    for f in &table.failed {
        out.notice(format!("model {} dropped: {}", f.model.to_bitstring(), f.reason));
    }
    out.count_methods(table.method_counts());
    match c.format {
        Format::Json => out.add_json(
            "table.json",
            &json!({ "covariates": ds.names, "table": table }),
        )?,
        Format::Csv => {
            let mut buf = Vec::new();
            table.write_csv(&mut buf)?;
            out.add("table.csv", buf);
            out.add_csv("inclusion.csv", &["covariate", "inclusion_prob"], inclusion_rows(&ds.names, &table.inclusion_probs))?;
            out.add_csv("dimension.csv", &["size", "posterior_prob"], dimension_rows(&table.dim_posterior))?;
        }
    }
    Ok(())
}

fn cmd_sampler(
    c: &Common,
    alg: Algorithm,
    a: &SamplerArgs,
    inflate: f64,
    out: &mut Artifacts,
) -> Result<()> {
    let (ds, d) = design_of(&load(c)?)?;
    note_constant_columns(&ds, out);
    let spec = c.prior_spec();
    if alg != Algorithm::Mc3 {
        note_fixed_g(&spec, ds.n(), out);
    }
    let mut cfg = sampler_config(c, alg);
    cfg.pseudoprior_inflate = inflate;
    cfg.scan = match a.scan {
        ScanArg::Systematic => ScanOrder::Systematic,
        ScanArg::Random => ScanOrder::Random,
    };
    let trace = run(&d, &spec, c.model_prior(), &cfg)?;
    let s = trace_summaries(&trace)?;

    // Evidence methods over the distinct visited models.
    let mut methods: HashMap<_, usize> = HashMap::new();
    for (m, _) in &s.visit_counts {
        let ev = log_evidence(&ols_stats(&d, m)?, &spec)?;
        *methods.entry(ev.method).or_insert(0) += 1;
    }
    let mut methods: Vec<_> = methods.into_iter().collect();
    methods.sort_by_key(|(m, _)| m.name());
    out.count_methods(methods);

    let kept = trace.len() as f64;
    let top: Vec<_> = s.visit_counts.iter().take(TOP_MODELS).collect();
    let fit = if alg == Algorithm::GibbsVs {
        let r2 = bma_r2(&trace, &d.y)?.mean;
        let rmse = bma_rmse(&trace, &d.y, &d.xc, &mut stream(c.seed ^ 0x5eed))?.mean;
        Some((r2, rmse))
    } else {
        None
    };
    match c.format {
        Format::Json => {
            let top: Vec<_> = top
                .iter()
                .map(|(m, k)| {
                    json!({
                        "model": m.to_bitstring(),
                        "size": m.size(),
                        "visits": k,
                        "frequency": *k as f64 / kept,
                    })
                })
                .collect();
            out.add_json(
                "summary.json",
                &json!({
                    "algorithm": alg.name(),
                    "covariates": ds.names,
                    "kept": trace.len(),
                    "diagnostics": trace.diagnostics,
                    "acceptance_rate": num(trace.diagnostics.acceptance_rate()),
                    "distinct_models": s.visit_counts.len(),
                    "inclusion_probs": s.inclusion_probs,
                    "dim_posterior": s.dim_posterior,
                    "top_models": top,
                    "log_g_histogram": s.log_g_histogram,
                    "bma_r2": fit.map(|f| f.0),
                    "bma_rmse": fit.map(|f| f.1),
                }),
            )?;
        }
        Format::Csv => {
            out.add_csv("inclusion.csv", &["covariate", "inclusion_prob"], inclusion_rows(&ds.names, &s.inclusion_probs))?;
            out.add_csv("dimension.csv", &["size", "posterior_prob"], dimension_rows(&s.dim_posterior))?;
            let rows = top
                .iter()
                .map(|(m, k)| vec![m.to_bitstring(), m.size().to_string(), k.to_string(), cell(*k as f64 / kept)])
                .collect();
            out.add_csv("models.csv", &["model", "size", "visits", "frequency"], rows)?;
            let dg = &trace.diagnostics;
            let mut rows = vec![
                vec!["kept".into(), trace.len().to_string()],
                vec!["proposed".into(), dg.proposed.to_string()],
                vec!["accepted".into(), dg.accepted.to_string()],
                vec!["acceptance_rate".into(), cell(dg.acceptance_rate())],
                vec!["failed_steps".into(), dg.failed_steps.to_string()],
                vec!["support_rejections".into(), dg.support_rejections.to_string()],
                vec!["jitter_retries".into(), dg.jitter_retries.to_string()],
            ];
            if let Some((r2, rmse)) = fit {
                rows.push(vec!["bma_r2".into(), cell(r2)]);
                rows.push(vec!["bma_rmse".into(), cell(rmse)]);
            }
            out.add_csv("diagnostics.csv", &["quantity", "value"], rows)?;
        }
    }
    match a.trace {
        Some(TraceFormat::Binary) => {
            let mut buf = Vec::new();
            write_trace_binary(&trace, &mut buf)?;
            out.add("trace.bin", buf);
        }
        Some(TraceFormat::Csv) => {
            let mut buf = Vec::new();
            write_trace_csv(&trace, &mut buf)?;
            out.add("trace.csv", buf);
        }
        None => {}
    }
    Ok(())
}

/// New covariate rows, columns matched to the training names by header.
fn load_new(path: &Path, names: &[String]) -> Result<DMatrix<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("loading {}", path.display()))?;
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let cols: Vec<usize> = names
        .iter()
        .map(|n| {
            headers
                .iter()
                .position(|h| h == n)
                .ok_or_else(|| anyhow!("{}: column `{n}` not found", path.display()))
        })
        .collect::<Result<_>>()?;
    let mut vals = Vec::new();
    let mut rows = 0;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        for (&j, name) in cols.iter().zip(names) {
            let raw = rec.get(j).unwrap_or("");
            let v: f64 = raw
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| anyhow!("{}: row {}, column `{name}`: bad value `{raw}`", path.display(), i + 1))?;
            vals.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        bail!("{} has no rows", path.display());
    }
    Ok(DMatrix::from_row_slice(rows, names.len(), &vals))
}

fn cmd_predict(c: &Common, a: &PredictArgs, out: &mut Artifacts) -> Result<()> {
    let (ds, d) = design_of(&load(c)?)?;
    note_constant_columns(&ds, out);
    let spec = c.prior_spec();
    let x_new = ds.centre_new(&load_new(&a.new, &ds.names)?)?;
    let pred = match a.engine {
        Engine::Enumerate => {
            let table = enumerate(&d, &spec, c.model_prior())?;
            out.count_methods(table.method_counts());
            bma_predict_closed(&table, &d, &spec, &x_new)?
        }
        Engine::Gibbs => {
            note_fixed_g(&spec, ds.n(), out);
            let trace = run(&d, &spec, c.model_prior(), &sampler_config(c, Algorithm::GibbsVs))?;
            bma_predict_mcmc(&trace, &x_new)?
        }
    };
    match c.format {
        Format::Json => out.add_json("predictions.json", &json!({ "prediction": pred.as_slice() }))?,
        Format::Csv => {
            let rows = pred.iter().enumerate().map(|(i, v)| vec![(i + 1).to_string(), cell(*v)]).collect();
            out.add_csv("predictions.csv", &["row", "prediction"], rows)?;
        }
    }
    Ok(())
}

fn cmd_lps(c: &Common, folds: usize, engine: Engine, out: &mut Artifacts) -> Result<()> {
    let ds = load(c)?;
    note_constant_columns(&ds, out);
    let spec = c.prior_spec();
    let engine = match engine {
        Engine::Enumerate => LpsEngine::Enumeration,
        Engine::Gibbs => {
            note_fixed_g(&spec, ds.n(), out);
            LpsEngine::Gibbs(sampler_config(c, Algorithm::GibbsVs))
        }
    };
    let r = bma_lps(&ds, &spec, c.model_prior(), &CvConfig::new(folds, c.seed), &engine)?;
    for (k, e) in r.fold_errors.iter().enumerate() {
        if let Some(e) = e {
            out.notice(format!("fold {k} failed: {e}"));
        }
    }
    match c.format {
        Format::Json => out.add_json(
            "lps.json",
            &json!({
                "mean": num(r.mean),
                "sd": num(r.sd),
                "fold_scores": r.fold_scores,
                "fold_assignment": r.fold_assignment,
            }),
        )?,
        Format::Csv => {
            let rows = r
                .fold_scores
                .iter()
                .enumerate()
                .map(|(k, s)| {
                    let size = r.fold_assignment.iter().filter(|&&f| f == k).count();
                    vec![k.to_string(), size.to_string(), s.map(cell).unwrap_or_default()]
                })
                .collect();
            out.add_csv("lps_folds.csv", &["fold", "size", "score"], rows)?;
            out.add_csv("lps.csv", &["mean", "sd"], vec![vec![cell(r.mean), cell(r.sd)]])?;
        }
    }
    Ok(())
}

/// The four configurations compared by `simulate --study`.
pub fn study_methods() -> Vec<StudyMethod> {
    let mut v = Vec::new();
    for (label, spec) in [("pep", PriorSpec::pep()), ("intrinsic", PriorSpec::intrinsic())] {
        for prior in [ModelPrior::Uniform, ModelPrior::UniformOnDimension] {
            v.push(StudyMethod {
                name: format!("{label}/{}", prior.name()),
                spec: spec.clone(),
                prior,
            });
        }
    }
    v
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn study_summary(r: &StudyResult, methods: &[StudyMethod]) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for m in methods {
        for (j, name) in r.covariates.iter().enumerate() {
            let col = r.inclusion_column(&m.name, j);
            if !col.is_empty() {
                rows.push(vec![m.name.clone(), name.clone(), cell(median(col))]);
            }
        }
        let dims: Vec<f64> = r.mean_dimensions(&m.name).into_iter().map(|(_, d)| d).collect();
        if !dims.is_empty() {
            rows.push(vec![m.name.clone(), "dimension".into(), cell(median(dims))]);
        }
    }
    rows
}

fn cmd_simulate(c: &Common, a: &SimulateArgs, out: &mut Artifacts) -> Result<()> {
    let cfg = ScenarioConfig {
        scenario: Scenario::from_number(a.scenario)?,
        n: a.n,
        p: a.p,
        replicates: a.replicates,
        seed: c.seed,
    };
    let width = a.replicates.to_string().len().max(3);
    for r in 0..a.replicates {
        let ds = generate(&cfg, r)?;
        let mut buf = Vec::new();
        write_csv_to(&ds, &mut buf)?;
        out.add(format!("replicate_{r:0width$}.csv"), buf);
    }
    if a.study {
        let methods = study_methods();
        let res = run_study(&cfg, &methods)?;
        for f in &res.failures {
            out.notice(format!("replicate {} under {} failed: {}", f.replicate, f.method, f.reason));
        }
        let mut buf = Vec::new();
        res.write_csv(&mut buf)?;
        out.add("study.csv", buf);
        let rows = study_summary(&res, &methods);
        match c.format {
            Format::Json => {
                let v: Vec<_> = rows
                    .iter()
                    .map(|r| json!({ "method": r[0], "quantity": r[1], "median": r[2].parse::<f64>().ok() }))
                    .collect();
                out.add_json("study_summary.json", &v)?;
            }
            Format::Csv => out.add_csv("study_summary.csv", &["method", "quantity", "median"], rows)?,
        }
    }
    Ok(())
}

/// A model given as a bitstring of width `p` or as comma-separated names.
pub fn parse_model(s: &str, names: &[String]) -> Result<ModelId> {
    let s = s.trim();
    if s.len() == names.len() && s.chars().all(|c| c == '0' || c == '1') {
        return Ok(ModelId::from_bitstring(s)?);
    }
    if s.is_empty() {
        return Ok(ModelId::empty(names.len()));
    }
    let idx = s
        .split(',')
        .map(|t| {
            let t = t.trim();
            names
                .iter()
                .position(|n| n == t)
                .ok_or_else(|| anyhow!("unknown covariate `{t}` in --model"))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ModelId::from_indices(names.len(), &idx))
}

fn summary_json(s: &GPosteriorSummary) -> serde_json::Value {
    json!({
        "mean_w": num(s.mean_w),
        "var_w": num(s.var_w),
        "mean_g": num(s.mean_g),
        "var_g": num(s.var_g),
        "moment_exists_up_to": if s.moment_exists_up_to == u32::MAX { None } else { Some(s.moment_exists_up_to) },
    })
}

fn cmd_shrinkage(c: &Common, a: &ShrinkageArgs, out: &mut Artifacts) -> Result<()> {
    let (ds, d) = design_of(&load(c)?)?;
    let spec = c.prior_spec();
    let m = parse_model(&a.model, &ds.names)?;
    if m.size() == 0 {
        bail!("the null model has no g");
    }
    let st = ols_stats(&d, &m)?;
    let prior = g_prior_summary(&spec, st.k0, st.k1, st.n, st.p_total)?;
    let post = g_posterior_summary(&st, &spec)?;
    if let HyperPrior::Fixed(g) = pep_select::priors::hyper_prior(&spec, st.k0, st.k1, st.n, st.p_total)? {
        out.notice(format!("g is fixed at {g}; its moments are degenerate"));
    }
    let names: Vec<&String> = m.indices().into_iter().map(|j| &ds.names[j]).collect();
    match c.format {
        Format::Json => out.add_json(
            "shrinkage.json",
            &json!({
                "model": m.to_bitstring(),
                "covariates": names,
                "prior": summary_json(&prior),
                "posterior": summary_json(&post),
            }),
        )?,
        Format::Csv => {
            let rows = [
                ("mean_w", prior.mean_w, post.mean_w),
                ("var_w", prior.var_w, post.var_w),
                ("mean_g", prior.mean_g, post.mean_g),
                ("var_g", prior.var_g, post.var_g),
            ]
            .into_iter()
            .map(|(q, a, b)| vec![q.to_string(), cell(a), cell(b)])
            .collect();
            out.add_csv("shrinkage.csv", &["quantity", "prior", "posterior"], rows)?;
        }
    }
    Ok(())
}
