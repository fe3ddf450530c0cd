use std::path::Path;

use serde_json::{json, Value};

use sclqg_core::cascade::{
    cascade_statistics, run_cascade, CascadeConfig, OffspringLaw, SignMode, DEFAULT_NODE_CAP,
};

use super::{at_least, batch, positive, Context, Status};
use crate::cli::CascadeArgs;
use crate::error::{CliError, Result};
use crate::formats::{read_offspring_table, write_cascade_run};
use crate::output::real;

fn parse_law(spec: &str, a: &CascadeArgs, ctx: &Context) -> Result<OffspringLaw> {
    let cfg = &ctx.config;
    let law = match spec {
        "identity" => OffspringLaw::identity(),
        "dirichlet" => OffspringLaw::DirichletSplit {
            parts: cfg.pick(a.parts, "parts", 2)?,
            concentration: cfg.pick(a.concentration, "concentration", 1.0)?,
            fraction: cfg.pick(a.fraction, "fraction", 1.0)?,
        },
        "stable" => OffspringLaw::stable_default(),
        other => match other.strip_prefix("empirical:") {
            Some(path) => OffspringLaw::Empirical {
                table: read_offspring_table(Path::new(path))?,
            },
            None => {
                return Err(CliError::validation(format!(
                    "`law` must be identity, dirichlet, stable or empirical:<file>, got `{other}`"
                )));
            }
        },
    };
    law.validate()
        .map_err(|e| CliError::validation(format!("`law`: {e}")))?;
    Ok(law)
}

pub fn cascade(a: &CascadeArgs, ctx: &Context) -> Result<Status> {
    let cfg = &ctx.config;
    cfg.check_keys(&[
        "law",
        "max_gen",
        "runs",
        "l0",
        "delta",
        "node_cap",
        "keep_runs",
        "parts",
        "concentration",
        "fraction",
    ])?;
    let params = cfg.params(a.params.c_l, a.params.q)?;
    let spec: String = cfg.pick(a.law.clone(), "law", "identity".to_string())?;
    let law = parse_law(&spec, a, ctx)?;
    let max_gen = cfg.pick(a.max_gen, "max_gen", 6)?;
    let runs = at_least("runs", cfg.pick(a.runs, "runs", 1000)?, 1)?;
    let l0 = positive("l0", cfg.pick(a.l0, "l0", 1.0)?)?;
    let delta = cfg
        .pick_opt(a.delta, "delta")?
        .map(|d| positive("delta", d))
        .transpose()?;
    let node_cap = at_least(
        "node_cap",
        cfg.pick(a.node_cap, "node_cap", DEFAULT_NODE_CAP)?,
        1,
    )?;
    let keep = cfg.pick(a.keep_runs, "keep_runs", runs)?.min(runs);
    let config = CascadeConfig {
        law: law.clone(),
        max_gen,
        delta,
        node_cap,
        signs: SignMode::Fair,
    };
    let streams = ctx.streams("cascade");
    let results = batch(runs, |i| {
        Ok(run_cascade(l0, params, &config, &streams.child("run", i))?)
    })?;

    let mut run = ctx.run("cascade")?;
    run.set("c_l", params.c_l());
    run.set("law", &spec);
    if let OffspringLaw::DirichletSplit {
        parts,
        concentration,
        fraction,
    } = law
    {
        if spec == "dirichlet" {
            run.set("parts", parts);
            run.set("concentration", concentration);
            run.set("fraction", fraction);
        }
    }
    run.set("max_gen", max_gen);
    run.set("runs", runs);
    run.set("l0", l0);
    run.set("delta", delta);
    run.set("node_cap", node_cap);
    run.set("keep_runs", keep);
    if law.is_proxy() {
        run.label(format!(
            "offspring law `{}` is a proxy for the unknown critical law",
            law.name()
        ));
    }
    let runs_dir = run.dir().join("runs");
    std::fs::create_dir_all(&runs_dir).map_err(|e| CliError::io(&runs_dir, e))?;
    for (i, r) in results.iter().take(keep).enumerate() {
        write_cascade_run(&mut run, &format!("runs/run_{i:05}.csv"), r)?;
    }
    let truncated = results.iter().filter(|r| r.truncated).count();
    // With every run truncated the aggregates fall back to the partial runs.
    let report = cascade_statistics(&results, truncated == runs)?;
    let cosh = params.gap_exponent().map(f64::cosh);
    let mut f = run.csv(
        "generations.csv",
        &[
            "generation",
            "survival",
            "survival_se",
            "total_length",
            "total_length_se",
            "max_length",
            "max_length_se",
            "predicted_total_length",
        ],
    )?;
    let mut gens = Vec::new();
    for g in &report.generations {
        let pred = cosh
            .filter(|_| law.name() == "identity")
            .map(|c| c.powi(g.generation as i32));
        f.row([
            g.generation.to_string(),
            real(g.survival),
            real(g.survival_se),
            real(g.total_length),
            real(g.total_length_se),
            real(g.max_length),
            real(g.max_length_se),
            pred.map(real).unwrap_or_default(),
        ])?;
        gens.push(json!({
            "generation": g.generation,
            "survival": g.survival,
            "survival_se": g.survival_se,
            "total_length": g.total_length,
            "total_length_se": g.total_length_se,
            "max_length": g.max_length,
            "max_length_se": g.max_length_se,
            "predicted_total_length": pred,
        }));
    }
    f.finish()?;
    let summary = json!({
        "c_l": params.c_l(),
        "law": law.name(),
        "runs": runs,
        "runs_used": report.runs_used,
        "truncated_runs": truncated,
        "extinct_fraction": report.extinct_fraction,
        "nodes": results.iter().map(|r| r.nodes.len()).sum::<usize>(),
        "generations": Value::Array(gens),
    });
    run.finish(
        &summary,
        if truncated > 0 {
            Status::Truncated
        } else {
            Status::Ok
        },
    )
}
