use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

/// One per run, success or not.
#[derive(Debug, Default, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub tool_version: String,
    pub seed: Option<u64>,
    pub config: Option<String>,
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    pub started_at: String,
    pub elapsed_ms: f64,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub timings_ms: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summary: Option<serde_json::Value>,
    pub exit_code: i32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error_kind: Option<String>,
}

impl RunManifest {
    pub fn input(&mut self, name: &str, path: &Path) {
        self.inputs.insert(name.to_string(), path.display().to_string());
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    /// Writes to `path`, or to stderr when there is nowhere better.
    pub fn emit(&self, path: Option<&PathBuf>) {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes") + "\n";
        if let Some(path) = path {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                let _ = fs::create_dir_all(dir);
            }
            match fs::write(path, &text) {
                Ok(()) => return,
                Err(e) => eprintln!("cannot write manifest {}: {e}", path.display()),
            }
        }
        eprint!("{text}");
    }
}

/// `--manifest` as given on a command line clap refused to parse.
pub fn scan_manifest_flag(argv: &[String]) -> Option<PathBuf> {
    let mut it = argv.iter();
    while let Some(a) = it.next() {
        if a == "--manifest" {
            return it.next().map(PathBuf::from);
        }
        if let Some(v) = a.strip_prefix("--manifest=") {
            return Some(PathBuf::from(v));
        }
    }
    None
}
