//! Config files: a flat JSON object or `key = value` lines. Values fill in
//! options that were not given on the command line.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::Failure;

#[derive(Debug, Default, Clone)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

fn normalize(key: &str) -> String {
    key.trim().trim_start_matches("--").replace('-', "_")
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::validation(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, Failure> {
        let mut values = BTreeMap::new();
        if text.trim_start().starts_with('{') {
            let obj: serde_json::Map<String, serde_json::Value> = serde_json::from_str(text)
                .map_err(|e| Failure::validation(format!("config is not a JSON object: {e}")))?;
            for (k, v) in obj {
                let v = match v {
                    serde_json::Value::String(s) => s,
                    serde_json::Value::Number(_) | serde_json::Value::Bool(_) => v.to_string(),
                    other => {
                        return Err(Failure::validation(format!(
                            "config key {k:?} must be a string, number or bool, got {other}"
                        )))
                    }
                };
                values.insert(normalize(&k), v);
            }
        } else {
            for (i, line) in text.lines().enumerate() {
                let line = line.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let (k, v) = line.split_once('=').ok_or_else(|| {
                    Failure::validation(format!("config line {} is not key=value: {line:?}", i + 1))
                })?;
                values.insert(normalize(k), v.trim().to_string());
            }
        }
        Ok(ConfigFile { values })
    }

    /// The command-line value if given, else the config value, else `None`.
    pub fn pick<T>(&self, cli: Option<T>, key: &str) -> Result<Option<T>, Failure>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        if cli.is_some() {
            return Ok(cli);
        }
        match self.values.get(&normalize(key)) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|e| Failure::validation(format!("config value for {key}: {e}"))),
        }
    }

    pub fn or<T>(&self, cli: Option<T>, key: &str, default: T) -> Result<T, Failure>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        Ok(self.pick(cli, key)?.unwrap_or(default))
    }

    pub fn require<T>(&self, cli: Option<T>, key: &str) -> Result<T, Failure>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        self.pick(cli, key)?
            .ok_or_else(|| Failure::validation(format!("missing required option --{}", key.replace('_', "-"))))
    }
}
