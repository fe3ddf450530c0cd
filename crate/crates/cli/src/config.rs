//! The JSON run config: a flat object whose keys mirror the long flags
//! (`boundary_length` for `--boundary-length`). Flags win over the file.

use std::path::Path;

use sclqg_core::ParamSet;
use serde::de::DeserializeOwned;
use serde_json::{Map, Value};

use crate::error::{CliError, Result};

/// Keys accepted by every command.
pub const GLOBAL_KEYS: [&str; 4] = ["seed", "c_l", "q", "threads"];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    values: Map<String, Value>,
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Validation(m) => CliError::Format {
                path: path.to_path_buf(),
                message: m,
            },
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        match serde_json::from_str::<Value>(text) {
            Ok(Value::Object(values)) => Ok(Self { values }),
            Ok(_) => Err(CliError::validation("config must be a JSON object")),
            Err(e) => Err(CliError::validation(format!(
                "config is not valid JSON: {e}"
            ))),
        }
    }

    pub fn from_map(values: Map<String, Value>) -> Self {
        Self { values }
    }

    /// Rejects keys outside `allowed` and the global keys.
    pub fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        let mut bad: Vec<&str> = self
            .values
            .keys()
            .map(String::as_str)
            .filter(|k| !allowed.contains(k) && !GLOBAL_KEYS.contains(k))
            .collect();
        bad.sort_unstable();
        if bad.is_empty() {
            Ok(())
        } else {
            Err(CliError::validation(format!(
                "unknown config key(s) for this command: {}",
                bad.join(", ")
            )))
        }
    }

    pub fn get<T: DeserializeOwned>(&self, key: &str) -> Result<Option<T>> {
        match self.values.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => serde_json::from_value(v.clone())
                .map(Some)
                .map_err(|e| CliError::validation(format!("bad value for `{key}`: {e}"))),
        }
    }

    /// The flag value, else the config value, else `default`.
    pub fn pick<T: DeserializeOwned>(&self, flag: Option<T>, key: &str, default: T) -> Result<T> {
        match flag {
            Some(v) => Ok(v),
            None => Ok(self.get(key)?.unwrap_or(default)),
        }
    }

    pub fn pick_opt<T: DeserializeOwned>(&self, flag: Option<T>, key: &str) -> Result<Option<T>> {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.get(key),
        }
    }

    /// Liouville parameters from exactly one of `c_l` and `q`.
    pub fn params(&self, c_l: Option<f64>, q: Option<f64>) -> Result<ParamSet> {
        let c_l = self.pick_opt(c_l, "c_l")?;
        let q = self.pick_opt(q, "q")?;
        match (c_l, q) {
            (Some(_), Some(_)) => Err(CliError::validation(
                "`c_l` and `q` are mutually exclusive; set only one",
            )),
            (None, None) => Err(CliError::validation("missing parameter: set `c_l` or `q`")),
            (Some(c), None) => ParamSet::from_central_charge(c)
                .map_err(|e| CliError::validation(format!("`c_l`: {e}"))),
            (None, Some(q)) => ParamSet::from_background_charge(q)
                .map_err(|e| CliError::validation(format!("`q`: {e}"))),
        }
    }

    /// Like `params`, falling back to `c_l = default` when neither is set.
    pub fn params_or(&self, c_l: Option<f64>, q: Option<f64>, default: f64) -> Result<ParamSet> {
        if self.pick_opt(c_l, "c_l")?.is_none() && self.pick_opt(q, "q")?.is_none() {
            return self.params(Some(default), None);
        }
        self.params(c_l, q)
    }
}
