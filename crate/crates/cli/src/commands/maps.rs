use serde_json::{json, Value};

use sclqg_core::maps::{
    enumerate_decorated_maps, gasket_decompose, reassemble, survival_experiment, EnumerationCaps,
    HoleProxy, PerimeterLaws, RingAnchor, RingMode, RingProxy, StructuralSampler, SurvivalConfig,
    WeightTable,
};
use sclqg_core::stats::total_variation;

use super::{at_least, batch, Context, Status};
use crate::cli::{AnchorArg, MapsEnumerateArgs, MapsSampleArgs, ModeArg, RingArg, SurvivalArgs};
use crate::error::{CliError, Result};
use crate::formats::{map_json, write_cascade_run};
use crate::output::real;

/// Largest k + max_faces for which `maps sample` enumerates the oracle law.
const ORACLE_REACH: usize = 14;

const RING_LAW_NOTE: &str =
    "the ring law is the exact conditional law of the truncated Boltzmann model, known only at small sizes";

fn anchor(a: AnchorArg) -> RingAnchor {
    match a {
        AnchorArg::Outer => RingAnchor::Outer,
        AnchorArg::CriticalInner => RingAnchor::CriticalInner,
    }
}

fn finite(key: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::validation(format!("`{key}` must be finite")))
    }
}

pub fn enumerate(a: &MapsEnumerateArgs, ctx: &Context) -> Result<Status> {
    let cfg = &ctx.config;
    cfg.check_keys(&["k", "max_faces", "max_dump", "beta"])?;
    let k = cfg.pick(a.k, "k", 3)?;
    let max_faces = cfg.pick(a.max_faces, "max_faces", 6)?;
    let beta = finite("beta", cfg.pick(a.beta, "beta", 1.5)?)?;
    let max_dump = cfg.pick(a.max_dump, "max_dump", 5000)?;
    let e = enumerate_decorated_maps(k, max_faces, beta, &EnumerationCaps::default())?;
    let mut run = ctx.run("maps enumerate")?;
    run.set("k", k);
    run.set("max_faces", max_faces);
    run.set("beta", beta);
    run.set("max_dump", max_dump);
    let probs = e.probabilities();
    let mut f = run.csv(
        "maps.csv",
        &["index", "triangles", "loops", "weight", "probability"],
    )?;
    for (i, m) in e.maps.iter().enumerate() {
        f.row([
            i.to_string(),
            m.triangles.to_string(),
            m.loops.to_string(),
            real(e.weight(i)),
            real(probs[i]),
        ])?;
    }
    f.finish()?;
    if e.len() <= max_dump {
        let maps: Vec<Value> = e.maps.iter().map(|m| map_json(&m.map)).collect();
        run.json("maps.json", &maps)?;
    } else {
        run.label(format!(
            "maps.json skipped: {} maps exceed max_dump",
            e.len()
        ));
    }
    let mut round_trip_failures = 0usize;
    for m in &e.maps {
        let ok = gasket_decompose(&m.map)
            .and_then(|d| reassemble(&d.gasket, &d.fillings))
            .is_ok_and(|back| back.canonical_code() == m.code);
        round_trip_failures += usize::from(!ok);
    }
    let table1 = WeightTable::new(1, k + max_faces)?;
    let table2 = WeightTable::new(2, k + max_faces)?;
    let (c1, c2) = (e.weighted_counts(1), e.weighted_counts(2));
    let (t1, t2) = (table1.counts(k, max_faces)?, table2.counts(k, max_faces)?);
    let strs = |v: &[u128]| v.iter().map(u128::to_string).collect::<Vec<_>>();
    let summary = json!({
        "k": k,
        "max_faces": max_faces,
        "beta": beta,
        "maps": e.len(),
        "duplicates": e.duplicates,
        "partition_sum": e.partition_sum(),
        "counts_by_faces": strs(&c1),
        "loop_weighted_counts_by_faces": strs(&c2),
        "recursion_counts_by_faces": strs(&t1),
        "recursion_loop_weighted_counts_by_faces": strs(&t2),
        "enumerators_agree": c1 == t1 && c2 == t2,
        "round_trip_failures": round_trip_failures,
    });
    run.finish(&summary, Status::Ok)
}

pub fn sample(a: &MapsSampleArgs, ctx: &Context) -> Result<Status> {
    let cfg = &ctx.config;
    cfg.check_keys(&[
        "mode",
        "s",
        "anchor",
        "k",
        "max_faces",
        "samples",
        "dump",
        "beta",
    ])?;
    let mode_arg = cfg.pick(a.mode, "mode", ModeArg::Original)?;
    let s = cfg.pick(a.s, "s", 1.0)?;
    let anchor_arg = cfg.pick(a.anchor, "anchor", AnchorArg::CriticalInner)?;
    let k = at_least("k", cfg.pick(a.k, "k", 3)?, 1)?;
    let max_faces = cfg.pick(a.max_faces, "max_faces", 8)?;
    let beta = finite("beta", cfg.pick(a.beta, "beta", 1.5)?)?;
    let samples = at_least("samples", cfg.pick(a.samples, "samples", 10_000)?, 1)?;
    let dump = cfg.pick(a.dump, "dump", 10)?.min(samples);
    let mode = match mode_arg {
        ModeArg::Original => RingMode::Original,
        ModeArg::Modified => RingMode::Modified {
            s,
            anchor: anchor(anchor_arg),
        },
    };
    mode.validate()
        .map_err(|e| CliError::validation(format!("`s`: {e}")))?;
    let sampler = StructuralSampler::new(k, max_faces, beta, mode)?;
    let streams = ctx.streams("maps sample");
    let drawn = batch(samples, |i| {
        Ok(sampler.sample(&mut streams.child("sample", i).stream("map"))?)
    })?;
    let oracle = if k + max_faces <= ORACLE_REACH {
        Some(enumerate_decorated_maps(
            k,
            max_faces,
            beta,
            &EnumerationCaps::default(),
        )?)
    } else {
        None
    };

    let mut run = ctx.run("maps sample")?;
    run.set("mode", mode_arg);
    if mode_arg == ModeArg::Modified {
        run.set("s", s);
        run.set("anchor", anchor_arg);
    }
    run.set("k", k);
    run.set("max_faces", max_faces);
    run.set("beta", beta);
    run.set("samples", samples);
    run.set("dump", dump);
    run.label(RING_LAW_NOTE);
    let dir = run.dir().join("samples");
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let mut f = run.csv(
        "samples.csv",
        &["sample", "triangles", "loops", "depth", "map_index"],
    )?;
    let mut hits = oracle.as_ref().map(|e| vec![0usize; e.len()]);
    let mut outside = 0usize;
    for (i, d) in drawn.iter().enumerate() {
        let idx = oracle
            .as_ref()
            .and_then(|e| e.index_of(&d.map.canonical_code()));
        if let (Some(h), Some(j)) = (hits.as_mut(), idx) {
            h[j] += 1;
        } else if oracle.is_some() {
            outside += 1;
        }
        f.row([
            i.to_string(),
            d.map.triangle_count().to_string(),
            d.map.loop_count().to_string(),
            d.cascade
                .nodes
                .iter()
                .map(|n| n.generation)
                .max()
                .unwrap_or(0)
                .to_string(),
            idx.map(|j| j.to_string()).unwrap_or_default(),
        ])?;
    }
    f.finish()?;
    for (i, d) in drawn.iter().take(dump).enumerate() {
        run.json(&format!("samples/map_{i:04}.json"), &map_json(&d.map))?;
        write_cascade_run(&mut run, &format!("samples/cascade_{i:04}.csv"), &d.cascade)?;
    }
    let tv = match (&oracle, &hits) {
        (Some(e), Some(h)) => {
            let emp: Vec<f64> = h.iter().map(|&c| c as f64 / samples as f64).collect();
            Some(total_variation(&emp, &e.probabilities()))
        }
        _ => None,
    };
    let mean = |f: &dyn Fn(&sclqg_core::maps::StructuralSample) -> usize| {
        drawn.iter().map(|d| f(d) as f64).sum::<f64>() / samples as f64
    };
    let summary = json!({
        "mode": mode.name(),
        "k": k,
        "max_faces": max_faces,
        "beta": beta,
        "samples": samples,
        "mean_triangles": mean(&|d| d.map.triangle_count()),
        "mean_loops": mean(&|d| d.map.loop_count()),
        "oracle_maps": oracle.as_ref().map(|e| e.len()),
        "samples_outside_oracle": oracle.as_ref().map(|_| outside),
        "tv_to_boltzmann": tv,
    });
    run.finish(&summary, Status::Ok)
}

pub fn survival(a: &SurvivalArgs, ctx: &Context) -> Result<Status> {
    let cfg = &ctx.config;
    cfg.check_keys(&[
        "perimeters",
        "s_values",
        "runs",
        "max_gen",
        "node_cap",
        "anchor",
        "mean_holes",
        "max_fraction",
        "tail",
        "ring",
    ])?;
    let d = SurvivalConfig::default();
    let dh = HoleProxy::default();
    let perimeters: Vec<usize> =
        cfg.pick(a.perimeters.clone(), "perimeters", d.perimeters.clone())?;
    let s_values: Vec<f64> = cfg.pick(a.s_values.clone(), "s_values", d.s_values.clone())?;
    if let Some(bad) = s_values.iter().find(|&&s| !(s.is_finite() && s >= 1.0)) {
        return Err(CliError::validation(format!(
            "`s_values` must be finite and at least 1, got {bad}"
        )));
    }
    let anchor_arg = cfg.pick(a.anchor, "anchor", AnchorArg::Outer)?;
    let ring_arg = cfg.pick(a.ring, "ring", RingArg::Identity)?;
    let holes = HoleProxy {
        mean_holes: cfg.pick(a.mean_holes, "mean_holes", dh.mean_holes)?,
        max_fraction: cfg.pick(a.max_fraction, "max_fraction", dh.max_fraction)?,
        tail: cfg.pick(a.tail, "tail", dh.tail)?,
    };
    let ring = match ring_arg {
        RingArg::Identity => RingProxy::Identity,
        RingArg::Zero => RingProxy::Zero,
        RingArg::Jitter => RingProxy::Jitter,
    };
    let config = SurvivalConfig {
        perimeters,
        s_values,
        runs: at_least("runs", cfg.pick(a.runs, "runs", d.runs)?, 1)?,
        max_gen: cfg.pick(a.max_gen, "max_gen", d.max_gen)?,
        node_cap: at_least("node_cap", cfg.pick(a.node_cap, "node_cap", d.node_cap)?, 1)?,
        laws: PerimeterLaws { holes, ring },
        anchor: anchor(anchor_arg),
    };
    let report = survival_experiment(&config, &ctx.streams("survival")).map_err(|e| match e {
        sclqg_core::Error::InvalidArgument(m) => CliError::validation(m),
        other => other.into(),
    })?;
    let mut run = ctx.run("survival")?;
    run.set("perimeters", &config.perimeters);
    run.set("s_values", &config.s_values);
    run.set("runs", config.runs);
    run.set("max_gen", config.max_gen);
    run.set("node_cap", config.node_cap);
    run.set("anchor", anchor_arg);
    run.set("mean_holes", holes.mean_holes);
    run.set("max_fraction", holes.max_fraction);
    run.set("tail", holes.tail);
    run.set("ring", ring_arg);
    run.label("hole and ring laws are proxies; survival is a diagnostic, not a test of a proven statement");
    let mut f = run.csv(
        "survival.csv",
        &[
            "perimeter",
            "s",
            "runs",
            "survived",
            "truncated",
            "survival",
            "se",
        ],
    )?;
    for p in &report.points {
        f.row([
            p.perimeter.to_string(),
            real(p.s),
            p.runs.to_string(),
            p.survived.to_string(),
            p.truncated.to_string(),
            real(p.survival),
            real(p.se),
        ])?;
    }
    f.finish()?;
    let truncated: usize = report.points.iter().map(|p| p.truncated).sum();
    let points: Vec<Value> = report
        .points
        .iter()
        .map(|p| {
            json!({
                "perimeter": p.perimeter,
                "s": p.s,
                "runs": p.runs,
                "survived": p.survived,
                "truncated": p.truncated,
                "survival": p.survival,
                "se": p.se,
            })
        })
        .collect();
    let summary = json!({
        "hole_mean_ratio": holes.mean_ratio(),
        "points": points,
        "s_monotone_fraction": report.s_monotone_fraction,
        "k_monotone_fraction": report.k_monotone_fraction,
        "truncated_runs": truncated,
    });
    // Capped runs are part of the survival definition, not a failed run.
    run.finish(&summary, Status::Ok)
}
