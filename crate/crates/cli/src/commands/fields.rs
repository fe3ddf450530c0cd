use std::sync::Arc;

use serde_json::json;

use sclqg_core::disk::{
    random_orthogonal, rotate_field_vector, DiskConfig, DiskField, DiskSampler, LiouvilleSampler,
};
use sclqg_core::gff::{BoundaryCondition, GffSampler};
use sclqg_core::gmc::BoundaryMeasurer;
use sclqg_core::lattice::LatticeDomain;
use sclqg_core::params::Regime;
use sclqg_core::stats::{mean, variance};
use sclqg_core::ParamSet;

use super::{at_least, default_epsilon, positive, Context, Status};
use crate::cli::{Boundary, MeasureBoundaryArgs, RotateArgs, SampleDiskArgs, SampleGffArgs};
use crate::error::{CliError, Result};
use crate::formats::{domain_json, read_field_csv, write_field, write_measure};
use crate::output::Run;

pub fn sample_gff(a: &SampleGffArgs, ctx: &Context) -> Result<Status> {
    let cfg = &ctx.config;
    cfg.check_keys(&["n", "boundary"])?;
    let n = at_least("n", cfg.pick(a.n, "n", 17)?, 3)?;
    let boundary = cfg.pick(a.boundary, "boundary", Boundary::Zero)?;
    let d = Arc::new(LatticeDomain::disk_grid(n)?);
    let bc = match boundary {
        Boundary::Zero => BoundaryCondition::Zero,
        Boundary::Free => BoundaryCondition::Free,
    };
    let sampler = GffSampler::new(d.clone(), bc)?;
    let field = sampler.sample(&mut ctx.streams("sample-gff").stream("gff"));
    let mut run = ctx.run("sample-gff")?;
    run.set("n", n);
    run.set("boundary", boundary);
    write_field(&mut run, "field.csv", &d, &field.values)?;
    run.json("domain.json", &domain_json(&d))?;
    let summary = json!({
        "vertices": d.len(),
        "mean": mean(&field.values),
        "variance": variance(&field.values),
        "min": field.values.iter().copied().fold(f64::INFINITY, f64::min),
        "max": field.values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    });
    run.finish(&summary, Status::Ok)
}

struct DiskSettings {
    params: ParamSet,
    length: f64,
    n: usize,
    epsilon: f64,
}

fn disk_settings(
    ctx: &Context,
    params: (Option<f64>, Option<f64>),
    length: Option<f64>,
    n: Option<usize>,
    epsilon: Option<f64>,
) -> Result<DiskSettings> {
    let cfg = &ctx.config;
    let params = cfg.params_or(params.0, params.1, 25.0)?;
    let length = positive("boundary_length", cfg.pick(length, "boundary_length", 1.0)?)?;
    let n = at_least("n", cfg.pick(n, "n", 65)?, 9)?;
    let epsilon = positive("epsilon", cfg.pick(epsilon, "epsilon", default_epsilon(n))?)?;
    Ok(DiskSettings {
        params,
        length,
        n,
        epsilon,
    })
}

fn record(run: &mut Run, s: &DiskSettings) {
    run.set("c_l", s.params.c_l());
    run.set("boundary_length", s.length);
    run.set("n", s.n);
    run.set("epsilon", s.epsilon);
}

fn sample_disk_field(
    s: &DiskSettings,
    ctx: &Context,
    command: &str,
) -> Result<(DiskSampler, DiskField)> {
    let sampler = DiskSampler::new(DiskConfig {
        epsilon: s.epsilon,
        ..DiskConfig::for_disk(s.n)
    })?;
    let mut rng = ctx.streams(command).stream("disk");
    let field = match s.params.regime() {
        Regime::Critical => sampler.sample_critical(s.length, &mut rng)?.disk,
        Regime::Supercritical => sampler.sample_supercritical(s.length, s.params, &mut rng)?,
        Regime::Subcritical => {
            return Err(CliError::validation(format!(
                "`c_l` = {} is subcritical",
                s.params.c_l()
            )));
        }
    };
    Ok((sampler, field))
}

pub fn sample_disk(a: &SampleDiskArgs, ctx: &Context) -> Result<Status> {
    ctx.config
        .check_keys(&["boundary_length", "n", "epsilon", "dump_parts"])?;
    let s = disk_settings(
        ctx,
        (a.params.c_l, a.params.q),
        a.boundary_length,
        a.n,
        a.epsilon,
    )?;
    let dump = a.dump_parts || ctx.config.get::<bool>("dump_parts")?.unwrap_or(false);
    let (sampler, field) = sample_disk_field(&s, ctx, "sample-disk")?;
    let d = sampler.disk_domain().clone();
    let measure = BoundaryMeasurer::new(d.clone(), s.epsilon)?.measure(&field)?;
    let mut run = ctx.run("sample-disk")?;
    record(&mut run, &s);
    run.set("dump_parts", dump);
    write_field(&mut run, "field.csv", &d, field.values())?;
    run.json("domain.json", &domain_json(&d))?;
    if dump {
        if let Some(c) = &field.constituents {
            write_field(&mut run, "critical.csv", &d, &c.critical.values)?;
            write_field(&mut run, "zero_boundary.csv", &d, &c.zero_boundary.values)?;
        } else {
            write_field(&mut run, "critical.csv", &d, field.values())?;
        }
    }
    run.label(
        "disk-side boundary length is a prelimit estimate; normalization is done on the strip",
    );
    let summary = json!({
        "c_l": s.params.c_l(),
        "q": s.params.q(),
        "kind": format!("{:?}", field.kind),
        "boundary_length_target": s.length,
        "boundary_length_measured": measure.total,
        "clipped_vertices": field.clipped_count(),
        "mean": mean(field.values()),
    });
    run.finish(&summary, Status::Ok)
}

pub fn measure_boundary(a: &MeasureBoundaryArgs, ctx: &Context) -> Result<Status> {
    let cfg = &ctx.config;
    cfg.check_keys(&["field", "n", "epsilon", "arcs", "boundary_length"])?;
    let s = disk_settings(
        ctx,
        (a.params.c_l, a.params.q),
        a.boundary_length,
        a.n,
        a.epsilon,
    )?;
    let arcs = cfg.pick_opt(a.arcs, "arcs")?;
    let field_path = cfg.pick_opt(a.field.clone(), "field")?;
    let mut run = ctx.run("measure-boundary")?;
    let (d, values) = match &field_path {
        Some(p) => {
            let values = read_field_csv(p)?;
            let d = Arc::new(LatticeDomain::disk_grid(s.n)?);
            if values.len() != d.len() {
                return Err(CliError::validation(format!(
                    "`n` = {} gives {} vertices but the field has {}",
                    s.n,
                    d.len(),
                    values.len()
                )));
            }
            run.set("field", p.display().to_string());
            (d, values)
        }
        None => {
            let (sampler, field) = sample_disk_field(&s, ctx, "measure-boundary")?;
            let d = sampler.disk_domain().clone();
            let crit = field
                .critical_part()
                .map(|c| c.values.clone())
                .unwrap_or_else(|| field.values().to_vec());
            write_field(&mut run, "field.csv", &d, field.values())?;
            run.set("c_l", s.params.c_l());
            run.set("boundary_length", s.length);
            (d, crit)
        }
    };
    let measurer = match arcs {
        Some(m) => BoundaryMeasurer::with_arcs(d, s.epsilon, m)?,
        None => BoundaryMeasurer::new(d, s.epsilon)?,
    };
    run.set("n", s.n);
    run.set("epsilon", s.epsilon);
    run.set("arcs", measurer.arcs());
    let m = measurer.measure_values(&values);
    write_measure(&mut run, "measure.csv", &m)?;
    let summary = json!({ "cells": m.len(), "epsilon": m.epsilon, "total": m.total });
    run.finish(&summary, Status::Ok)
}

pub fn rotate(a: &RotateArgs, ctx: &Context) -> Result<Status> {
    let cfg = &ctx.config;
    cfg.check_keys(&["charges", "matrix", "n", "window"])?;
    let charges: Vec<f64> = cfg.pick(a.charges.clone(), "charges", vec![1.0, 1.5])?;
    if charges.is_empty() || charges.iter().any(|&q| !(q.is_finite() && q >= 0.0)) {
        return Err(CliError::validation(
            "`charges` must be a nonempty list of nonnegative numbers",
        ));
    }
    let m = charges.len();
    let n = at_least("n", cfg.pick(a.n, "n", 33)?, 5)?;
    let window: Vec<f64> = cfg.pick(a.window.clone(), "window", vec![-1.0, 1.0])?;
    if window.len() != 2 {
        return Err(CliError::validation("`window` must hold two numbers a,b"));
    }
    let streams = ctx.streams("rotate");
    let matrix: Vec<Vec<f64>> = match cfg.pick_opt(a.matrix.clone(), "matrix")? {
        Some(flat) if flat.len() == m * m => flat.chunks(m).map(<[f64]>::to_vec).collect(),
        Some(flat) => {
            return Err(CliError::validation(format!(
                "`matrix` has {} entries, expected {}",
                flat.len(),
                m * m
            )));
        }
        None => random_orthogonal(m, &mut streams.stream("matrix")),
    };
    let d = Arc::new(LatticeDomain::disk_grid(n)?);
    let ls = LiouvilleSampler::new(d.clone())?;
    let fields = charges
        .iter()
        .enumerate()
        .map(|(i, &q)| {
            ls.sample(
                q,
                (window[0], window[1]),
                &mut streams.stream(&format!("field-{i}")),
            )
        })
        .collect::<sclqg_core::Result<Vec<_>>>()?;
    let r = rotate_field_vector(&fields, &matrix).map_err(|e| match e {
        sclqg_core::Error::InvalidArgument(m) => CliError::validation(format!("`matrix`: {m}")),
        other => other.into(),
    })?;
    let mut run = ctx.run("rotate")?;
    run.set("charges", &charges);
    run.set("matrix", &matrix);
    run.set("n", n);
    run.set("window", &window);
    for (i, f) in fields.iter().enumerate() {
        write_field(&mut run, &format!("field_{i}.csv"), &d, f.values())?;
    }
    for (i, f) in r.fields.iter().enumerate() {
        write_field(&mut run, &format!("rotated_{i}.csv"), &d, f.values())?;
    }
    run.json("domain.json", &domain_json(&d))?;
    let c: Vec<f64> = charges.iter().map(|q| 1.0 + 6.0 * q * q).collect();
    let (sum, sum_hat) = (c.iter().sum::<f64>(), r.central_charges.iter().sum::<f64>());
    if !r.nonnegative {
        run.label("some rotated charge is negative; only the central-charge sum identity applies");
    }
    let summary = json!({
        "matrix": matrix,
        "charges": charges,
        "central_charges": c,
        "rotated_charges": r.charges,
        "rotated_central_charges": r.central_charges,
        "central_charge_sum": sum,
        "rotated_central_charge_sum": sum_hat,
        "sum_abs_error": (sum - sum_hat).abs(),
        "nonnegative": r.nonnegative,
    });
    run.finish(&summary, Status::Ok)
}
