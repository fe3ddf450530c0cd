use serde_json::{json, Value};

use sclqg_core::disk::DiskConfig;
use sclqg_core::loops::{
    markov_report, nonindependence_report, recover_signs, CouplingConfig, CouplingMode,
    CouplingSampler, LoopSource, MarkovConfig, MarkovExperiment, NonIndependenceConfig,
    NonIndependenceExperiment, MARKOV_STATISTICS,
};
use sclqg_core::params::Regime;

use super::{at_least, batch, default_epsilon, positive, Context, Status};
use crate::cli::{CoupleArgs, Experiment, LoopSourceArg, MarkovTestArgs};
use crate::error::{CliError, Result};
use crate::formats::{domain_json, loop_tree_json, write_field};
use crate::output::real;

pub fn couple(a: &CoupleArgs, ctx: &Context) -> Result<Status> {
    let cfg = &ctx.config;
    cfg.check_keys(&[
        "depth",
        "loop_source",
        "n",
        "boundary_length",
        "epsilon",
        "samples",
        "max_children",
    ])?;
    let params = cfg.params(a.params.c_l, a.params.q)?;
    if params.regime() != Regime::Supercritical {
        return Err(CliError::validation(format!(
            "`c_l` = {} must be below 25 for the coupling",
            params.c_l()
        )));
    }
    let depth = at_least("depth", cfg.pick(a.depth, "depth", 2)?, 1)?;
    let source_arg = cfg.pick(a.loop_source, "loop_source", LoopSourceArg::Fixed)?;
    let n = at_least("n", cfg.pick(a.n, "n", 65)?, 9)?;
    let length = positive(
        "boundary_length",
        cfg.pick(a.boundary_length, "boundary_length", 1.0)?,
    )?;
    let epsilon = positive(
        "epsilon",
        cfg.pick(a.epsilon, "epsilon", default_epsilon(n))?,
    )?;
    let samples = at_least("samples", cfg.pick(a.samples, "samples", 1)?, 1)?;
    let max_children = at_least(
        "max_children",
        cfg.pick(a.max_children, "max_children", 3)?,
        1,
    )?;
    let source = match source_arg {
        LoopSourceArg::Fixed => LoopSource::nested_circles(depth),
        LoopSourceArg::Circles => LoopSource::RandomCircles { max_children },
        LoopSourceArg::Gff => LoopSource::Gff,
    };
    let disk = DiskConfig {
        epsilon,
        ..DiskConfig::for_disk(n)
    };
    let sampler = CouplingSampler::new(
        params,
        CouplingConfig {
            disk,
            depth,
            source,
        },
    )?;
    let streams = ctx.streams("couple");
    let coupled = batch(samples, |i| {
        Ok(sampler.sample(length, &streams.child("sample", i))?)
    })?;

    let mut run = ctx.run("couple")?;
    run.set("c_l", params.c_l());
    run.set("depth", depth);
    run.set("loop_source", source_arg);
    run.set("n", n);
    run.set("boundary_length", length);
    run.set("epsilon", epsilon);
    run.set("samples", samples);
    run.set("max_children", max_children);
    if source_arg != LoopSourceArg::Fixed {
        run.label("loop geometry comes from a proxy source, not an exact CLE4 sample");
    }
    let d = sampler.domain().clone();
    run.json("domain.json", &domain_json(&d))?;
    let gap = params.gap_exponent().expect("supercritical");
    let (mut loops, mut pruned, mut recovered, mut checked) = (0usize, 0usize, 0usize, 0usize);
    let mut max_err = 0.0f64;
    let mut per_sample = Vec::with_capacity(samples);
    for (i, c) in coupled.iter().enumerate() {
        write_field(&mut run, &format!("field_{i:04}.csv"), &d, c.phi.values())?;
        run.json(&format!("loops_{i:04}.json"), &loop_tree_json(&c.tree))?;
        let got = recover_signs(c).ok();
        let ok = got.as_ref().map(|g| {
            g.iter()
                .zip(&c.tree.nodes)
                .filter(|(s, n)| **s == n.sign)
                .count()
        });
        let mut err = 0.0f64;
        for node in &c.tree.nodes {
            let want = (f64::from(node.sign) * gap).exp();
            err = err.max((node.inner_length / node.outer_length / want - 1.0).abs());
        }
        loops += c.tree.len();
        pruned += c.tree.pruned;
        if let Some(k) = ok {
            recovered += k;
            checked += c.tree.len();
        }
        max_err = max_err.max(err);
        per_sample.push(json!({
            "loops": c.tree.len(),
            "pruned": c.tree.pruned,
            "depth": c.tree.depth(),
            "ratio_max_rel_error": err,
            "signs_recovered": ok,
        }));
    }
    let synthesis = coupled
        .first()
        .is_some_and(|c| c.mode == CouplingMode::Synthesis);
    let summary = json!({
        "c_l": params.c_l(),
        "mode": if synthesis { "synthesis" } else { "extraction" },
        "expected_ratio": gap.exp(),
        "loops": loops,
        "pruned": pruned,
        "ratio_max_rel_error": max_err,
        "sign_recovery_fraction": if checked > 0 { Value::from(recovered as f64 / checked as f64) } else { Value::Null },
        "samples": per_sample,
    });
    run.finish(&summary, Status::Ok)
}

pub fn markov_test(a: &MarkovTestArgs, ctx: &Context) -> Result<Status> {
    let cfg = &ctx.config;
    cfg.check_keys(&["experiment", "runs", "n", "inner_n", "radius"])?;
    let experiment = cfg.pick(a.experiment, "experiment", Experiment::Markov)?;
    let params = cfg.params_or(a.params.c_l, a.params.q, 25.0)?;
    let runs = at_least("runs", cfg.pick(a.runs, "runs", 1000)?, 20)?;
    let n = at_least("n", cfg.pick(a.n, "n", 129)?, 9)?;
    let radius = positive("radius", cfg.pick(a.radius, "radius", 0.5)?)?;
    let disk = DiskConfig {
        epsilon: default_epsilon(n),
        ..DiskConfig::for_disk(n)
    };
    let streams = ctx.streams("markov-test");
    let mut run = ctx.run("markov-test")?;
    run.set("experiment", experiment);
    run.set("c_l", params.c_l());
    run.set("runs", runs);
    run.set("n", n);
    run.set("radius", radius);
    let summary = match experiment {
        Experiment::Markov => {
            let inner_n = at_least(
                "inner_n",
                cfg.pick(a.inner_n, "inner_n", (n - 1) / 2 + 1)?,
                9,
            )?;
            run.set("inner_n", inner_n);
            let config = MarkovConfig {
                outer: disk,
                inner_n,
                radius,
                ..MarkovConfig::default()
            };
            let exp = MarkovExperiment::new(params, config)?;
            let samples = batch(runs, |i| Ok(exp.run(&streams.child("run", i))?))?;
            let mut header = vec!["run".to_string(), "length".to_string(), "sign".to_string()];
            for side in ["restricted", "fresh"] {
                header.extend(
                    MARKOV_STATISTICS
                        .iter()
                        .map(|(name, _, _)| format!("{side}_{name}")),
                );
            }
            let header: Vec<&str> = header.iter().map(String::as_str).collect();
            let mut f = run.csv("markov_samples.csv", &header)?;
            for (i, s) in samples.iter().enumerate() {
                let mut row = vec![i.to_string(), real(s.length), s.sign.to_string()];
                row.extend(s.restricted.iter().chain(&s.fresh).map(|&x| real(x)));
                f.row(row)?;
            }
            f.finish()?;
            let r = markov_report(&samples)?;
            let stats: Vec<Value> = r
                .statistics
                .iter()
                .map(|s| {
                    json!({
                        "name": s.name,
                        "ks_statistic": s.ks_statistic,
                        "p_value": s.p_value,
                        "control_p_value": s.control_p_value,
                    })
                })
                .collect();
            json!({
                "experiment": "markov",
                "c_l": params.c_l(),
                "runs": r.runs,
                "statistics": stats,
                "passing": r.passing,
                "control_detects": r.control_detects,
            })
        }
        Experiment::Nonindependence => {
            let config = NonIndependenceConfig {
                disk,
                radius,
                ..NonIndependenceConfig::default()
            };
            let distances = config.distances.clone();
            let exp = NonIndependenceExperiment::new(params, config)?;
            let samples = batch(runs, |i| Ok(exp.run(&streams.child("run", i))?))?;
            let mut f = run.csv(
                "harmonic_samples.csv",
                &["run", "sign", "distance", "angle", "value"],
            )?;
            for (i, s) in samples.iter().enumerate() {
                for (di, vals) in s.values.iter().enumerate() {
                    for (j, &v) in vals.iter().enumerate() {
                        f.row([
                            i.to_string(),
                            s.sign.to_string(),
                            real(distances[di]),
                            j.to_string(),
                            real(v),
                        ])?;
                    }
                }
            }
            f.finish()?;
            let r = nonindependence_report(params, &distances, &samples)?;
            let scales: Vec<Value> = r
                .scales
                .iter()
                .map(|s| {
                    json!({
                        "distance": s.distance,
                        "log_inverse_distance": s.log_inverse_distance,
                        "raw_variance": s.raw_variance,
                        "within_sign_variance": s.within_sign_variance,
                        "normalized": s.normalized,
                    })
                })
                .collect();
            json!({
                "experiment": "nonindependence",
                "c_l": r.c_l,
                "target": r.target,
                "runs": r.runs,
                "scales": scales,
                "slope": r.slope,
                "slope_ratio": r.slope_ratio,
                "ratio_at_smallest": r.ratio_at_smallest,
            })
        }
    };
    run.finish(&summary, Status::Ok)
}
