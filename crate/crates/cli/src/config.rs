//! Run configuration: one TOML section per command, environment overrides and
//! replay from a previously written manifest.
//!
//! ```toml
//! [metrics]
//! g = 4.3
//! gamma = 0.30
//!
//! [stack]
//! file = "top_mirror.stack"
//! ```
//!
//! `SPS_<SECTION>__<KEY>=value` overrides a key; the value is read as a TOML
//! literal and falls back to a plain string. Relative paths resolve against
//! the directory of the config file.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::CliError;

pub const ENV_PREFIX: &str = "SPS_";

/// A command's parameter table.
pub trait Section: DeserializeOwned + Serialize {
    /// Section name in the config file.
    const NAME: &'static str;
    /// Keys without a default.
    const REQUIRED: &'static [&'static str];
}

/// Config tables as read from disk, before a command picks its section.
#[derive(Debug, Clone)]
pub struct Source {
    pub sections: Map<String, Value>,
    /// Directory that relative paths are resolved against.
    pub base_dir: PathBuf,
    /// Set when replaying a manifest.
    pub replay: Option<Replay>,
}

#[derive(Debug, Clone)]
pub struct Replay {
    pub command: String,
    pub seed: u64,
}

pub const SECTIONS: [&str; 7] = ["metrics", "drive", "stack", "mode_fit", "hom", "budget", "calibrate"];

impl Source {
    pub fn empty() -> Self {
        Self { sections: Map::new(), base_dir: PathBuf::from("."), replay: None }
    }

    /// Reads a TOML config, or a JSON manifest from an earlier run.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
        let is_json = path.extension().is_some_and(|e| e == "json");
        if is_json {
            return Self::from_manifest(&text, base_dir);
        }
        let table: toml::Table =
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {}", path.display(), e.message())))?;
        let sections = match serde_json::to_value(table) {
            Ok(Value::Object(m)) => m,
            _ => return Err(CliError::Config("config root must be a table".into())),
        };
        for (k, v) in &sections {
            if !SECTIONS.contains(&k.as_str()) {
                return Err(CliError::Config(format!("unknown section [{k}]")));
            }
            if !v.is_object() {
                return Err(CliError::Config(format!("[{k}] must be a table")));
            }
        }
        Ok(Self { sections, base_dir, replay: None })
    }

    fn from_manifest(text: &str, base_dir: PathBuf) -> Result<Self, CliError> {
        let v: Value = serde_json::from_str(text).map_err(|e| CliError::Config(format!("manifest: {e}")))?;
        let field = |k: &str| v.get(k).ok_or_else(|| CliError::Config(format!("manifest lacks `{k}`")));
        let command = field("command")?
            .as_str()
            .ok_or_else(|| CliError::Config("manifest `command` is not a string".into()))?
            .to_string();
        let seed = field("seed")?
            .as_u64()
            .ok_or_else(|| CliError::Config("manifest `seed` is not an integer".into()))?;
        let config = field("config")?.clone();
        let mut sections = Map::new();
        sections.insert(section_name(&command), config);
        Ok(Self { sections, base_dir, replay: Some(Replay { command, seed }) })
    }

    /// Applies `SPS_<SECTION>__<KEY>` variables from `vars`.
    pub fn apply_env<I: IntoIterator<Item = (String, String)>>(&mut self, vars: I) -> Result<(), CliError> {
        for (name, raw) in vars {
            let Some(rest) = name.strip_prefix(ENV_PREFIX) else { continue };
            let Some((section, key)) = rest.split_once("__") else { continue };
            let (section, key) = (section.to_ascii_lowercase(), key.to_ascii_lowercase());
            if !SECTIONS.contains(&section.as_str()) {
                return Err(CliError::Config(format!("{name}: unknown section `{section}`")));
            }
            let value = parse_literal(&raw);
            let table = self
                .sections
                .entry(section)
                .or_insert_with(|| Value::Object(Map::new()))
                .as_object_mut()
                .expect("sections are tables");
            table.insert(key, value);
        }
        Ok(())
    }

    /// Typed section; missing required keys are listed together.
    pub fn section<S: Section>(&self) -> Result<S, CliError> {
        let table = self.sections.get(S::NAME).cloned().unwrap_or_else(|| Value::Object(Map::new()));
        let obj = table.as_object().ok_or_else(|| CliError::Config(format!("[{}] must be a table", S::NAME)))?;
        let missing: Vec<&str> = S::REQUIRED.iter().copied().filter(|k| !obj.contains_key(*k)).collect();
        if !missing.is_empty() {
            return Err(CliError::Config(format!("[{}] missing keys: {}", S::NAME, missing.join(", "))));
        }
        serde_json::from_value(table).map_err(|e| CliError::Config(format!("[{}] {e}", S::NAME)))
    }

    pub fn resolve_path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}

/// `mode-fit` → `mode_fit`.
pub fn section_name(command: &str) -> String {
    command.replace('-', "_")
}

fn parse_literal(raw: &str) -> Value {
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").and_then(|v| serde_json::to_value(v).ok()).unwrap_or(Value::String(raw.into())),
        Err(_) => Value::String(raw.to_string()),
    }
}
