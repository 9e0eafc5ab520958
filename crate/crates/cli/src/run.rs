//! Output directory handling and the run manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};
use sps_core::format::round9;
use sps_core::Execution;

use crate::error::CliError;

pub struct RunContext {
    pub out_dir: PathBuf,
    pub exec: Execution,
    pub seed: u64,
    inputs: BTreeMap<String, String>,
    outputs: BTreeMap<String, String>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    seed: u64,
    config: Value,
    inputs: &'a BTreeMap<String, String>,
    outputs: &'a BTreeMap<String, String>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl RunContext {
    pub fn new(out_dir: PathBuf, exec: Execution, seed: u64) -> Result<Self, CliError> {
        std::fs::create_dir_all(&out_dir)?;
        Ok(Self { out_dir, exec, seed, inputs: BTreeMap::new(), outputs: BTreeMap::new() })
    }

    /// Reads an input file and records its digest under its absolute path.
    pub fn read_input(&mut self, path: &Path) -> Result<String, CliError> {
        let bytes = std::fs::read(path)
            .map_err(|e| CliError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
        self.inputs.insert(path.display().to_string(), sha256_hex(&bytes));
        String::from_utf8(bytes).map_err(|_| CliError::Config(format!("{} is not UTF-8", path.display())))
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        std::fs::write(self.out_dir.join(name), bytes)?;
        self.outputs.insert(name.to_string(), sha256_hex(bytes));
        Ok(())
    }

    /// Pretty JSON with every float rounded to nine significant digits.
    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let v = rounded(serde_json::to_value(value).map_err(|e| CliError::Config(e.to_string()))?);
        let mut text = serde_json::to_string_pretty(&v).map_err(|e| CliError::Config(e.to_string()))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// Writes `manifest.json`. The worker count is left out on purpose: it
    /// must not change any output.
    pub fn finish<C: Serialize>(self, command: &str, config: &C) -> Result<(), CliError> {
        let manifest = Manifest {
            command,
            version: env!("CARGO_PKG_VERSION"),
            seed: self.seed,
            config: serde_json::to_value(config).map_err(|e| CliError::Config(e.to_string()))?,
            inputs: &self.inputs,
            outputs: &self.outputs,
        };
        let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Config(e.to_string()))?;
        text.push('\n');
        std::fs::write(self.out_dir.join("manifest.json"), text)?;
        Ok(())
    }
}

pub fn rounded(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            serde_json::Number::from_f64(round9(n.as_f64().unwrap_or(0.0))).map(Value::Number).unwrap_or(Value::Null)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(rounded).collect()),
        Value::Object(m) => Value::Object(m.into_iter().map(|(k, v)| (k, rounded(v))).collect()),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_reaches_nested_floats() {
        let v = rounded(serde_json::json!({"a": [1.0 / 3.0, 2], "b": {"c": 0.1 + 0.2}}));
        assert_eq!(v, serde_json::json!({"a": [0.333333333, 2], "b": {"c": 0.3}}));
    }

    #[test]
    fn digests_are_recorded() {
        let dir = tempfile::tempdir().unwrap();
        let mut ctx = RunContext::new(dir.path().to_path_buf(), Execution::Sequential, 1).unwrap();
        ctx.write("x.txt", b"abc").unwrap();
        ctx.finish("budget", &serde_json::json!({})).unwrap();
        let m: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
        assert_eq!(
            m["outputs"]["x.txt"],
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
