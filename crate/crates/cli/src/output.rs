//! The run directory: every artifact is written atomically and listed in
//! `manifest.json`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use qcdist::field::{sidecar_paths, write_atomic};
use qcdist::GridField;
use serde::Serialize;
use serde_json::Value;

use crate::Failure;

#[derive(Serialize)]
struct Entry {
    path: String,
    kind: &'static str,
    bytes: u64,
}

pub struct RunDir {
    root: PathBuf,
    entries: Vec<Entry>,
}

impl RunDir {
    pub fn create(root: &Path) -> Result<Self, Failure> {
        std::fs::create_dir_all(root)
            .map_err(|e| Failure::validation(format!("cannot create output directory {}: {e}", root.display())))?;
        Ok(RunDir {
            root: root.to_path_buf(),
            entries: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn record(&mut self, name: String, kind: &'static str) {
        let bytes = std::fs::metadata(self.root.join(&name)).map(|m| m.len()).unwrap_or(0);
        self.entries.retain(|e| e.path != name);
        self.entries.push(Entry { path: name, kind, bytes });
    }

    pub fn write_bytes(&mut self, name: &str, kind: &'static str, bytes: &[u8]) -> Result<(), Failure> {
        write_atomic(&self.path(name), bytes)?;
        self.record(name.to_string(), kind);
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, kind: &'static str, value: &T) -> Result<(), Failure> {
        let mut text = serde_json::to_string_pretty(value).map_err(qcdist::Error::from)?;
        text.push('\n');
        self.write_bytes(name, kind, text.as_bytes())
    }

    /// Writes `name.json` and `name.bin`.
    pub fn write_field(&mut self, name: &str, field: &GridField) -> Result<(), Failure> {
        let path = self.path(&format!("{name}.json"));
        field.write(&path)?;
        let (json, bin) = sidecar_paths(&path);
        for p in [json, bin] {
            let file = p.file_name().unwrap().to_string_lossy().into_owned();
            self.record(file, "field");
        }
        Ok(())
    }

    pub fn finish(mut self, subcommand: &str, config: &BTreeMap<String, Value>, extra: Value) -> Result<Value, Failure> {
        self.entries.sort_by(|a, b| a.path.cmp(&b.path));
        let manifest = serde_json::json!({
            "tool": "qcdist",
            "version": env!("CARGO_PKG_VERSION"),
            "subcommand": subcommand,
            "config": config,
            "outputs": self.entries,
            "result": extra,
        });
        self.write_json("manifest.json", "manifest", &manifest)?;
        Ok(serde_json::json!({
            "status": "ok",
            "subcommand": subcommand,
            "out": self.root.display().to_string(),
            "outputs": self.entries.iter().map(|e| e.path.clone()).collect::<Vec<_>>(),
            "result": manifest["result"].clone(),
        }))
    }
}
