use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

/// Written next to every output as `<out>.manifest.json`.
#[derive(Debug, Serialize)]
pub struct PipelineManifest {
    pub command: String,
    pub version: String,
    pub seed: Option<u64>,
    pub config: Value,
    pub inputs: BTreeMap<String, PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub lexicon_hash: Option<String>,
    pub argv: Vec<String>,
}

impl PipelineManifest {
    pub fn new(command: &str, argv: &[String]) -> Self {
        PipelineManifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: None,
            config: Value::Null,
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
            lexicon_hash: None,
            argv: argv.to_vec(),
        }
    }

    pub fn input(&mut self, role: &str, path: &Path) {
        self.inputs.insert(role.to_string(), path.to_path_buf());
    }

    pub fn output(&mut self, path: impl Into<PathBuf>) {
        self.outputs.push(path.into());
    }

    pub fn write(&self, out: &Path) -> std::io::Result<PathBuf> {
        let path = manifest_path(out);
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        fs::write(&path, text)?;
        Ok(path)
    }
}

pub fn manifest_path(out: &Path) -> PathBuf {
    sibling(out, ".manifest.json")
}

/// `out` with `suffix` appended to its file name.
pub fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let mut s = out.as_os_str().to_os_string();
    s.push(suffix);
    PathBuf::from(s)
}
