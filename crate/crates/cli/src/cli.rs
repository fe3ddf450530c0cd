use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Simulations of CLE4-decorated supercritical LQG disks, their
/// boundary-length cascades and loop-decorated planar maps.
#[derive(Debug, Parser)]
#[command(name = "sclqg", version)]
pub struct Cli {
    /// Master seed; every experiment derives named substreams from it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// JSON config; keys mirror the long flags with underscores.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads for batches of runs.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, Args)]
pub struct ParamArgs {
    /// Liouville central charge in (1, 25].
    #[arg(long = "c-l", allow_hyphen_values = true)]
    pub c_l: Option<f64>,
    /// Background charge Q in (0, 2]; exclusive with --c-l.
    #[arg(long, allow_hyphen_values = true)]
    pub q: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a lattice GFF on the disk grid.
    SampleGff(SampleGffArgs),
    /// Sample a critical or supercritical disk of given boundary length.
    SampleDisk(SampleDiskArgs),
    /// Critical boundary measure of a field CSV or of a fresh disk.
    MeasureBoundary(MeasureBoundaryArgs),
    /// Sample a disk coupled to a nested signed loop tree.
    Couple(CoupleArgs),
    /// Markov-property or non-independence statistics over many runs.
    MarkovTest(MarkovTestArgs),
    /// Boundary-length cascades.
    Cascade(CascadeArgs),
    /// Loop-decorated planar maps.
    #[command(subcommand)]
    Maps(MapsCommand),
    /// Survival of the perimeter cascade against the ring parameter s.
    Survival(SurvivalArgs),
    /// Rotate a vector of Liouville fields by an orthogonal matrix.
    Rotate(RotateArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::SampleGff(_) => "sample-gff",
            Command::SampleDisk(_) => "sample-disk",
            Command::MeasureBoundary(_) => "measure-boundary",
            Command::Couple(_) => "couple",
            Command::MarkovTest(_) => "markov-test",
            Command::Cascade(_) => "cascade",
            Command::Maps(MapsCommand::Enumerate(_)) => "maps enumerate",
            Command::Maps(MapsCommand::Sample(_)) => "maps sample",
            Command::Survival(_) => "survival",
            Command::Rotate(_) => "rotate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    Zero,
    Free,
}

#[derive(Debug, Args)]
pub struct SampleGffArgs {
    /// Vertices per side of the disk grid.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, value_enum)]
    pub boundary: Option<Boundary>,
}

#[derive(Debug, Args)]
pub struct SampleDiskArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long)]
    pub boundary_length: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Mollification scale of boundary lengths.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Also write the critical and zero-boundary constituents.
    #[arg(long)]
    pub dump_parts: bool,
}

#[derive(Debug, Args)]
pub struct MeasureBoundaryArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    /// Field CSV holding critical values; without it a fresh disk is sampled.
    #[arg(long)]
    pub field: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Number of arcs (a positive multiple of 4).
    #[arg(long)]
    pub arcs: Option<usize>,
    #[arg(long)]
    pub boundary_length: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LoopSourceArg {
    /// Level loops extracted from an auxiliary GFF.
    Gff,
    /// Random disjoint circles.
    Circles,
    /// Fixed nested circles.
    Fixed,
}

#[derive(Debug, Args)]
pub struct CoupleArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long, value_enum)]
    pub loop_source: Option<LoopSourceArg>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub boundary_length: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Number of coupled samples.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Children per loop for the random-circles source.
    #[arg(long)]
    pub max_children: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Markov,
    Nonindependence,
}

#[derive(Debug, Args)]
pub struct MarkovTestArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long, value_enum)]
    pub experiment: Option<Experiment>,
    #[arg(long)]
    pub runs: Option<usize>,
    /// Grid of the coupled disk.
    #[arg(long)]
    pub n: Option<usize>,
    /// Grid of the restricted and fresh disks (Markov only).
    #[arg(long)]
    pub inner_n: Option<usize>,
    /// Radius of the circle loop.
    #[arg(long)]
    pub radius: Option<f64>,
}

#[derive(Debug, Args)]
pub struct CascadeArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    /// identity, dirichlet, stable or empirical:<file>.
    #[arg(long)]
    pub law: Option<String>,
    #[arg(long)]
    pub max_gen: Option<usize>,
    #[arg(long)]
    pub runs: Option<usize>,
    /// Root length L0.
    #[arg(long)]
    pub l0: Option<f64>,
    /// Freezing threshold; default 1e-6 L0.
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub node_cap: Option<usize>,
    /// Runs written as node CSVs; default all.
    #[arg(long)]
    pub keep_runs: Option<usize>,
    /// Dirichlet law: number of children.
    #[arg(long)]
    pub parts: Option<usize>,
    #[arg(long)]
    pub concentration: Option<f64>,
    /// Dirichlet law: share of the parent length passed on.
    #[arg(long)]
    pub fraction: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum MapsCommand {
    /// Enumerate all maps of one perimeter up to a number of triangles.
    Enumerate(MapsEnumerateArgs),
    /// Draw maps with the recursive gasket sampler.
    Sample(MapsSampleArgs),
}

#[derive(Debug, Args)]
pub struct MapsEnumerateArgs {
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub max_faces: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<f64>,
    /// Largest enumeration written to maps.json.
    #[arg(long)]
    pub max_dump: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeArg {
    Original,
    Modified,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnchorArg {
    /// Scale the hole perimeter.
    Outer,
    /// Scale the inner perimeter drawn from the original ring law.
    CriticalInner,
}

#[derive(Debug, Args)]
pub struct MapsSampleArgs {
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long)]
    pub s: Option<f64>,
    #[arg(long, value_enum)]
    pub anchor: Option<AnchorArg>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub max_faces: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub samples: Option<usize>,
    /// Samples written as map JSON and perimeter-cascade CSV.
    #[arg(long)]
    pub dump: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RingArg {
    Identity,
    Zero,
    Jitter,
}

#[derive(Debug, Args)]
pub struct SurvivalArgs {
    /// Comma-separated root perimeters.
    #[arg(long, value_delimiter = ',')]
    pub perimeters: Option<Vec<usize>>,
    /// Comma-separated values of s >= 1.
    #[arg(long, value_delimiter = ',')]
    pub s_values: Option<Vec<f64>>,
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long)]
    pub max_gen: Option<usize>,
    #[arg(long)]
    pub node_cap: Option<usize>,
    #[arg(long, value_enum)]
    pub anchor: Option<AnchorArg>,
    #[arg(long)]
    pub mean_holes: Option<f64>,
    #[arg(long)]
    pub max_fraction: Option<f64>,
    #[arg(long)]
    pub tail: Option<f64>,
    #[arg(long, value_enum)]
    pub ring: Option<RingArg>,
}

#[derive(Debug, Args)]
pub struct RotateArgs {
    /// Comma-separated background charges Q_i >= 0.
    #[arg(long, value_delimiter = ',')]
    pub charges: Option<Vec<f64>>,
    /// Row-major orthogonal matrix, comma separated; random when absent.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub matrix: Option<Vec<f64>>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Window (a,b) for the additive constant.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub window: Option<Vec<f64>>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn parses_nested_and_lists() {
        let c = Cli::try_parse_from([
            "sclqg", "maps", "sample", "--mode", "modified", "--s", "2", "--seed", "4",
        ])
        .unwrap();
        assert_eq!(c.seed, Some(4));
        assert_eq!(c.command.name(), "maps sample");
        let c = Cli::try_parse_from([
            "sclqg",
            "rotate",
            "--matrix",
            "0,1,-1,0",
            "--charges",
            "1,1.5",
        ])
        .unwrap();
        let Command::Rotate(r) = c.command else {
            panic!()
        };
        assert_eq!(r.matrix.unwrap(), vec![0.0, 1.0, -1.0, 0.0]);
    }
}
