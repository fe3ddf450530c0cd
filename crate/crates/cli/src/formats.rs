//! The CSV and JSON schemas shared with the plotting scripts, and readers for
//! the two input files (field CSVs and empirical offspring tables).

use std::path::Path;

use serde_json::{json, Value};

use sclqg_core::cascade::CascadeRun;
use sclqg_core::gmc::{BoundaryMeasure, Cell};
use sclqg_core::lattice::LatticeDomain;
use sclqg_core::loops::LoopTree;
use sclqg_core::maps::{DecoratedMap, FaceKind};

use crate::error::{CliError, Result};
use crate::output::{real, Run};

pub const FIELD_HEADER: [&str; 4] = ["vertex_id", "x", "y", "value"];
pub const MEASURE_HEADER: [&str; 4] = ["cell_index", "theta_start", "theta_end", "mass"];
pub const CASCADE_HEADER: [&str; 8] = [
    "node_id",
    "parent_id",
    "generation",
    "sign",
    "critical_length",
    "inner_length",
    "sign_sum",
    "frozen",
];

pub fn write_field(
    run: &mut Run,
    name: &str,
    domain: &LatticeDomain,
    values: &[f64],
) -> Result<()> {
    let mut f = run.csv(name, &FIELD_HEADER)?;
    for (v, &x) in values.iter().enumerate() {
        let [px, py] = domain.position(v);
        f.row([v.to_string(), real(px), real(py), real(x)])?;
    }
    f.finish()
}

pub fn domain_json(domain: &LatticeDomain) -> Value {
    let vertices: Vec<[f64; 2]> = (0..domain.len()).map(|v| domain.position(v)).collect();
    let edges: Vec<[usize; 2]> = domain.edges().into_iter().map(|(a, b)| [a, b]).collect();
    json!({
        "kind": format!("{:?}", domain.kind()),
        "resolution": domain.resolution(),
        "spacing": domain.h(),
        "vertices": vertices,
        "edges": edges,
        "boundary": domain.boundary_flags(),
    })
}

pub fn write_measure(run: &mut Run, name: &str, m: &BoundaryMeasure) -> Result<()> {
    let mut f = run.csv(name, &MEASURE_HEADER)?;
    for (i, (cell, &mass)) in m.cells.iter().zip(&m.masses).enumerate() {
        let (a, b) = match *cell {
            Cell::Arc {
                theta_start,
                theta_end,
            } => (real(theta_start), real(theta_end)),
            Cell::Edge { .. } => (String::new(), String::new()),
        };
        f.row([i.to_string(), a, b, real(mass)])?;
    }
    f.finish()
}

pub fn loop_tree_json(tree: &LoopTree) -> Value {
    let nodes: Vec<Value> = tree
        .nodes
        .iter()
        .map(|n| {
            json!({
                "id": n.id,
                "parent": n.parent,
                "generation": n.generation,
                "sign": n.sign,
                "critical_length": n.critical_length,
                "inner_length": n.inner_length,
                "outer_length": n.outer_length,
                "polygon": n.polygon,
            })
        })
        .collect();
    json!({ "nodes": nodes, "pruned": tree.pruned })
}

pub fn write_cascade_run(run: &mut Run, name: &str, c: &CascadeRun) -> Result<()> {
    let mut f = run.csv(name, &CASCADE_HEADER)?;
    for n in &c.nodes {
        f.row([
            n.id.to_string(),
            n.parent.map(|p| p.to_string()).unwrap_or_default(),
            n.generation.to_string(),
            n.sign.to_string(),
            real(n.critical_length),
            real(n.inner_length),
            n.sign_sum.to_string(),
            u8::from(n.frozen).to_string(),
        ])?;
    }
    f.finish()
}

fn kind_name(k: FaceKind) -> &'static str {
    match k {
        FaceKind::Boundary => "boundary",
        FaceKind::Triangle => "triangle",
        FaceKind::Hole => "hole",
    }
}

pub fn map_json(m: &DecoratedMap) -> Value {
    let hm = &m.map;
    let root = (!hm.is_vertex()).then_some(hm.root);
    json!({
        "perimeter": m.perimeter(),
        "triangles": m.triangle_count(),
        "root": root,
        "next": hm.next,
        "twin": hm.twin,
        "face": hm.face,
        "face_kind": hm.face_kind.iter().map(|&k| kind_name(k)).collect::<Vec<_>>(),
        "crossed": m.crossed,
        "loops": m.loops(),
        "loop_membership": m.loop_membership(),
    })
}

/// Values of a field CSV, checked to list vertices 0, 1, ... in order.
pub fn read_field_csv(path: &Path) -> Result<Vec<f64>> {
    let bad = |message: String| CliError::Format {
        path: path.to_path_buf(),
        message,
    };
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => bad(format!("{other:?}")),
    })?;
    let header = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    if header.iter().collect::<Vec<_>>() != FIELD_HEADER {
        return Err(bad(format!("expected header {}", FIELD_HEADER.join(","))));
    }
    let mut values = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let id: usize = rec[0]
            .parse()
            .map_err(|_| bad(format!("row {}: bad vertex_id", i + 1)))?;
        if id != i {
            return Err(bad(format!("row {}: vertex_id {id} out of order", i + 1)));
        }
        let v: f64 = rec[3]
            .parse()
            .map_err(|_| bad(format!("row {}: bad value", i + 1)))?;
        values.push(v);
    }
    Ok(values)
}

/// An empirical offspring table: one line per draw holding the children's
/// length ratios separated by commas. A blank line is a draw without
/// children; `#` starts a comment.
pub fn parse_offspring_table(text: &str) -> std::result::Result<Vec<Vec<f64>>, String> {
    let mut table = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        if raw.trim_start().starts_with('#') {
            continue;
        }
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            table.push(Vec::new());
            continue;
        }
        let row = line
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|_| format!("line {}: bad ratio `{}`", i + 1, t.trim()))
            })
            .collect::<std::result::Result<Vec<f64>, String>>()?;
        table.push(row);
    }
    Ok(table)
}

pub fn read_offspring_table(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_offspring_table(&text).map_err(|message| CliError::Format {
        path: path.to_path_buf(),
        message,
    })
}
