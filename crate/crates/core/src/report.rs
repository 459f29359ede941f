//! Verification reports and catalog loading shared by the catalog checkers.

use std::path::PathBuf;

use serde::Serialize;
use serde_json::Value;

pub const SCHEMA_VERSION: u32 = 1;

/// Environment variable naming a directory that overrides the built-in data files.
pub const DATA_DIR_ENV: &str = "HYPSYM_DATA_DIR";

const BUILTIN: [(&str, &str); 3] = [
    ("classes.json", include_str!("../data/classes.json")),
    ("conditions.json", include_str!("../data/conditions.json")),
    ("claws.json", include_str!("../data/claws.json")),
];

#[derive(Debug, thiserror::Error)]
pub enum CatalogError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed catalog {file}: {message}")]
    Format { file: String, message: String },
}

/// Load a data file, preferring `$HYPSYM_DATA_DIR/<name>` when the variable is set.
pub fn load_catalog(name: &str) -> Result<Value, CatalogError> {
    let text = match std::env::var_os(DATA_DIR_ENV) {
        Some(dir) => {
            let path = PathBuf::from(dir).join(name);
            std::fs::read_to_string(&path).map_err(|source| CatalogError::Io { path, source })?
        }
        None => BUILTIN
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, t)| t.to_string())
            .ok_or_else(|| CatalogError::Format {
                file: name.into(),
                message: "no such built-in file".into(),
            })?,
    };
    serde_json::from_str(&text).map_err(|e| CatalogError::Format {
        file: name.into(),
        message: e.to_string(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Undecided,
    /// A printed form that is expected to fail, and does.
    ExpectedFail,
}

impl Status {
    pub fn ok(self) -> bool {
        matches!(self, Status::Pass | Status::ExpectedFail)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EntryReport {
    pub table: String,
    pub label: String,
    pub status: Status,
    /// Rendered residual; `"0"` on success.
    pub residual: String,
    pub millis: f64,
    #[serde(skip_serializing_if = "String::is_empty")]
    pub notes: String,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Report {
    pub entries: Vec<EntryReport>,
}

impl Report {
    pub fn all_ok(&self) -> bool {
        self.entries.iter().all(|e| e.status.ok())
    }

    pub fn passed(&self) -> usize {
        self.entries.iter().filter(|e| e.status.ok()).count()
    }

    pub fn to_json(&self) -> Value {
        serde_json::json!({
            "schema_version": SCHEMA_VERSION,
            "entries": self.entries,
            "passed": self.passed(),
            "total": self.entries.len(),
        })
    }
}

pub(crate) fn field<'a>(v: &'a Value, key: &str, file: &str) -> Result<&'a str, CatalogError> {
    v[key].as_str().ok_or_else(|| CatalogError::Format {
        file: file.into(),
        message: format!("missing string field {key}"),
    })
}
