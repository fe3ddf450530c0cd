//! Run directories: data files, `summary.json` and `manifest.json`.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const ARTIFACT: &str = "sclqg";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// A real in the CSV dialect: 17 significant digits.
pub fn real(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

/// A CSV file being written under a run directory.
pub struct CsvFile {
    path: PathBuf,
    writer: csv::Writer<BufWriter<File>>,
}

impl CsvFile {
    pub fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer
            .write_record(fields)
            .map_err(|e| csv_error(&self.path, e))
    }

    pub fn finish(mut self) -> Result<()> {
        self.writer.flush().map_err(|e| CliError::io(&self.path, e))
    }
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => CliError::Format {
            path: path.to_path_buf(),
            message: format!("{other:?}"),
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    /// A cap was hit; the outputs written so far are kept.
    Truncated,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::Truncated => crate::error::EXIT_TRUNCATED,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::Truncated => "truncated",
        }
    }
}

/// One command invocation writing into `dir`.
pub struct Run {
    dir: PathBuf,
    command: String,
    seed: u64,
    settings: Map<String, Value>,
    labels: Vec<String>,
    outputs: Vec<String>,
    start: Instant,
}

impl Run {
    pub fn create(dir: &Path, command: &str, seed: u64) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            command: command.to_string(),
            seed,
            settings: Map::new(),
            labels: Vec::new(),
            outputs: Vec::new(),
            start: Instant::now(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Records one effective setting in the manifest config.
    pub fn set(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(Value::Null);
        self.settings.insert(key.to_string(), v);
    }

    /// A note carried in the manifest, for proxies and known limitations.
    pub fn label(&mut self, text: impl Into<String>) {
        let t = text.into();
        if !self.labels.contains(&t) {
            self.labels.push(t);
        }
    }

    fn register(&mut self, name: &str) -> PathBuf {
        if !self.outputs.iter().any(|o| o == name) {
            self.outputs.push(name.to_string());
        }
        self.dir.join(name)
    }

    pub fn csv(&mut self, name: &str, header: &[&str]) -> Result<CsvFile> {
        let path = self.register(name);
        let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
        let writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(BufWriter::new(file));
        let mut out = CsvFile { path, writer };
        out.row(header)?;
        Ok(out)
    }

    pub fn json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let path = self.register(name);
        write_json(&path, value)
    }

    /// Writes `summary.json` and `manifest.json` and returns the status.
    pub fn finish(mut self, summary: &Value, status: Status) -> Result<Status> {
        let path = self.register("summary.json");
        write_json(&path, summary)?;
        let config = Value::Object(self.settings.clone());
        let hash = Sha256::digest(serde_json::to_vec(&config).expect("serializable"));
        let hash: String = hash.iter().map(|b| format!("{b:02x}")).collect();
        let manifest = serde_json::json!({
            "artifact": ARTIFACT,
            "version": VERSION,
            "command": self.command,
            "seed": self.seed,
            "rng_algorithm": sclqg_core::rng::RNG_ALGORITHM,
            "config": config,
            "config_hash": hash,
            "wall_time_seconds": self.start.elapsed().as_secs_f64(),
            "status": status.name(),
            "outputs": self.outputs,
            "labels": self.labels,
        });
        write_json(&self.dir.join("manifest.json"), &manifest)?;
        Ok(status)
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    bytes.push(b'\n');
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reals_have_seventeen_digits() {
        assert_eq!(real(0.1), "1.0000000000000001e-1");
        assert_eq!(real(-2.0), "-2.0000000000000000e0");
        assert_eq!(real(f64::NAN), "NaN");
        let x = 1.0 / 3.0;
        assert_eq!(real(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn run_writes_manifest_and_csv() {
        let dir = tempfile::tempdir().unwrap();
        let mut run = Run::create(dir.path(), "test", 7).unwrap();
        run.set("n", 3);
        run.label("proxy");
        let mut f = run.csv("a.csv", &["x", "y"]).unwrap();
        f.row([real(1.5), "2".to_string()]).unwrap();
        f.finish().unwrap();
        run.finish(&serde_json::json!({"k": 1}), Status::Truncated)
            .unwrap();
        let csv = std::fs::read_to_string(dir.path().join("a.csv")).unwrap();
        assert_eq!(csv, "x,y\n1.5000000000000000e0,2\n");
        let m: Value =
            serde_json::from_slice(&std::fs::read(dir.path().join("manifest.json")).unwrap())
                .unwrap();
        assert_eq!(m["status"], "truncated");
        assert_eq!(m["seed"], 7);
        assert_eq!(m["config"]["n"], 3);
        assert_eq!(m["config_hash"].as_str().unwrap().len(), 64);
        assert_eq!(m["outputs"], serde_json::json!(["a.csv", "summary.json"]));
    }
}
