//! Parameter resolution: config-file section, then command-line overrides.

use std::path::Path;

use serde::de::DeserializeOwned;
use toml::{Table, Value};

use crate::CliError;

/// Every `group action` pair the front end knows.
pub const EXPERIMENTS: &[(&str, &[&str])] = &[
    ("mp-am", &["exact", "bvp"]),
    ("mp-ad", &["simulate", "growth"]),
    ("stability", &["roots", "scan", "boundary"]),
    ("tensors", &["sphere", "mesh"]),
    ("quadrature", &["weights", "converge"]),
    ("collision", &["simulate", "profiles"]),
    ("piston", &["exact", "simulate", "converge"]),
];

const GLOBAL_FLAGS: &[&str] = &["config", "out", "format", "workers", "seed"];

/// Loads a config file and checks that it only names known experiments.
pub fn load(path: &Path) -> Result<Table, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let table: Table = text.parse().map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    for (group, body) in &table {
        let Some((_, actions)) = EXPERIMENTS.iter().find(|(g, _)| g == group) else {
            return Err(CliError::Config(format!("unknown config section [{group}]")));
        };
        let Value::Table(body) = body else {
            return Err(CliError::Config(format!("[{group}] must be a table of experiments")));
        };
        for (action, section) in body {
            if !actions.contains(&action.as_str()) {
                return Err(CliError::Config(format!("unknown config section [{group}.{action}]")));
            }
            if !section.is_table() {
                return Err(CliError::Config(format!("[{group}.{action}] must be a table")));
            }
        }
    }
    Ok(table)
}

fn parse_value(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

/// Parses trailing `--key value` / `--key=value` pairs. Values are read as
/// TOML (`3`, `1e-4`, `[0.1, 1.0]`, `true`) and fall back to plain strings.
pub fn parse_overrides(args: &[String]) -> Result<Vec<(String, Value)>, CliError> {
    let mut out = Vec::new();
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        let Some(body) = arg.strip_prefix("--") else {
            return Err(CliError::Config(format!("expected `--key value`, found `{arg}`")));
        };
        let (key, raw) = match body.split_once('=') {
            Some((k, v)) => (k, v.to_string()),
            None => (body, it.next().ok_or_else(|| CliError::Config(format!("missing value for --{body}")))?.clone()),
        };
        let key = key.replace('-', "_");
        if GLOBAL_FLAGS.contains(&key.as_str()) {
            return Err(CliError::Config(format!("--{key} must come before the experiment parameters")));
        }
        out.push((key, parse_value(&raw)));
    }
    Ok(out)
}

/// Resolved parameter set for one experiment.
pub struct Resolver<'a> {
    pub group: &'a str,
    pub action: &'a str,
    pub file: Option<&'a Table>,
    pub overrides: Vec<(String, Value)>,
}

impl Resolver<'_> {
    /// Merges file and flags and deserializes, rejecting unknown keys.
    pub fn resolve<P: DeserializeOwned>(&self) -> Result<P, CliError> {
        let mut t = self
            .file
            .and_then(|f| f.get(self.group))
            .and_then(|g| g.get(self.action))
            .and_then(Value::as_table)
            .cloned()
            .unwrap_or_default();
        for (k, v) in &self.overrides {
            t.insert(k.clone(), v.clone());
        }
        Value::Table(t)
            .try_into()
            .map_err(|e| CliError::Config(format!("[{}.{}] {}", self.group, self.action, e.to_string().trim())))
    }
}
