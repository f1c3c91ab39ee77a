use std::collections::BTreeMap;
use std::fs;
use std::path::{Component, Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use uq_core::{Result, UqError};

/// Everything a run produced. Timings are the only field that varies
/// between identical invocations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub rng_contract: String,
    pub dry_run: bool,
    pub settings: Value,
    pub results: Value,
    /// Files written, relative to the output directory.
    pub artifacts: Vec<String>,
    /// Wall-clock milliseconds per stage.
    pub timings: BTreeMap<String, f64>,
}

/// Output directory; hands out paths that cannot escape it.
pub struct OutDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutDir {
    pub fn new(root: PathBuf) -> Self {
        Self {
            root,
            written: Vec::new(),
        }
    }

    /// Resolve `name` below the root. Absolute paths and `..` are rejected.
    pub fn resolve(&self, name: &str) -> Result<PathBuf> {
        let rel = Path::new(name);
        let plain = rel.components().all(|c| matches!(c, Component::Normal(_) | Component::CurDir));
        if name.is_empty() || !plain || rel.components().all(|c| c == Component::CurDir) {
            return Err(UqError::Config(vec![format!(
                "output path {name:?} must be a relative path inside --out-dir without '..'"
            )]));
        }
        Ok(self.root.join(rel))
    }

    /// Resolve `name` and create its parent directories.
    pub fn prepare(&mut self, name: &str) -> Result<PathBuf> {
        let path = self.resolve(name)?;
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|source| UqError::Io {
                path: parent.to_path_buf(),
                source,
            })?;
        }
        self.written.push(name.to_string());
        Ok(path)
    }

    pub fn write(&mut self, name: &str, text: &str) -> Result<()> {
        let path = self.prepare(name)?;
        fs::write(&path, text).map_err(|source| UqError::Io { path, source })
    }

    pub fn artifacts(&self) -> Vec<String> {
        self.written.clone()
    }
}

/// Named wall-clock laps.
pub struct Stopwatch {
    last: Instant,
    laps: BTreeMap<String, f64>,
}

impl Stopwatch {
    pub fn start() -> Self {
        Self {
            last: Instant::now(),
            laps: BTreeMap::new(),
        }
    }

    pub fn lap(&mut self, name: &str) {
        let now = Instant::now();
        let ms = (now - self.last).as_secs_f64() * 1e3;
        *self.laps.entry(name.to_string()).or_default() += ms;
        self.last = now;
    }

    pub fn into_laps(self) -> BTreeMap<String, f64> {
        self.laps
    }
}

/// Machine-readable failure record.
pub fn error_json(kind: &str, message: &str, path: Option<&Path>) -> Value {
    let mut err = serde_json::json!({ "kind": kind, "message": message });
    if let Some(p) = path {
        err["path"] = Value::String(p.display().to_string());
    }
    serde_json::json!({ "error": err })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn confinement() {
        let out = OutDir::new(PathBuf::from("/tmp/o"));
        assert_eq!(out.resolve("a/b.csv").unwrap(), PathBuf::from("/tmp/o/a/b.csv"));
        for bad in ["", ".", "../x", "a/../../x", "/etc/passwd", "a/.."] {
            assert!(out.resolve(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn report_round_trip() {
        let r = PipelineReport {
            command: "quantile".into(),
            version: "0".into(),
            seed: 3,
            rng_contract: "x".into(),
            dry_run: false,
            settings: serde_json::json!({"alpha": 0.95}),
            results: serde_json::json!({"value": 1.25}),
            artifacts: vec!["a.csv".into()],
            timings: BTreeMap::from([("total".into(), 1.5)]),
        };
        let text = serde_json::to_string(&r).unwrap();
        assert_eq!(serde_json::from_str::<PipelineReport>(&text).unwrap(), r);
    }
}
