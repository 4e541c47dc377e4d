//! Writes `<out>/<experiment>/<channel>.{csv,json,svg}` and the manifest.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct Column {
    pub name: String,
    pub unit: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ArtifactEntry {
    pub file: String,
    pub description: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub columns: Vec<Column>,
}

pub struct Artifacts {
    dir: PathBuf,
    entries: Vec<ArtifactEntry>,
}

fn valid_channel(channel: &str) -> bool {
    !channel.is_empty() && channel.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

impl Artifacts {
    /// Creates `<out>/<experiment>`.
    pub fn create(out: &Path, experiment: &str) -> Result<Self, CliError> {
        let dir = out.join(experiment);
        std::fs::create_dir_all(&dir)
            .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self { dir, entries: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn entries(&self) -> &[ArtifactEntry] {
        &self.entries
    }

    fn write(&mut self, channel: &str, ext: &str, body: &[u8], description: &str, columns: Vec<Column>) -> Result<(), CliError> {
        if !valid_channel(channel) {
            return Err(CliError::Runtime(format!("invalid artifact channel `{channel}`")));
        }
        let file = format!("{channel}.{ext}");
        let path = self.dir.join(&file);
        std::fs::write(&path, body).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
        log::info!("wrote {}", path.display());
        self.entries.push(ArtifactEntry {
            file,
            description: description.to_string(),
            columns,
        });
        Ok(())
    }

    /// Writes a CSV whose header must list exactly the documented columns.
    pub fn csv(&mut self, channel: &str, description: &str, body: &str, units: &[(&str, &str)]) -> Result<(), CliError> {
        let header = body.lines().next().unwrap_or("");
        let names: Vec<&str> = header.split(',').collect();
        let documented: Vec<&str> = units.iter().map(|u| u.0).collect();
        if names != documented {
            return Err(CliError::Runtime(format!(
                "{channel}.csv header {names:?} does not match its units {documented:?}"
            )));
        }
        let columns = units
            .iter()
            .map(|(n, u)| Column { name: n.to_string(), unit: u.to_string() })
            .collect();
        self.write(channel, "csv", body.as_bytes(), description, columns)
    }

    /// CSV with per-column units computed from the header.
    pub fn csv_with(&mut self, channel: &str, description: &str, body: &str, unit: impl Fn(&str) -> String) -> Result<(), CliError> {
        let header = body.lines().next().unwrap_or("").to_string();
        let owned: Vec<(String, String)> = header.split(',').map(|n| (n.to_string(), unit(n))).collect();
        let units: Vec<(&str, &str)> = owned.iter().map(|(n, u)| (n.as_str(), u.as_str())).collect();
        self.csv(channel, description, body, &units)
    }

    pub fn json<T: Serialize>(&mut self, channel: &str, description: &str, value: &T) -> Result<(), CliError> {
        let mut body = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
        body.push('\n');
        self.write(channel, "json", body.as_bytes(), description, Vec::new())
    }

    pub fn svg(&mut self, channel: &str, description: &str, body: &str) -> Result<(), CliError> {
        self.write(channel, "svg", body.as_bytes(), description, Vec::new())
    }

    /// Writes `manifest.json`. Only `wall_time_s` varies between identical runs.
    pub fn finish(self, config: Value, seed: u64, wall_time_s: f64) -> Result<PathBuf, CliError> {
        let manifest = json!({
            "tool": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
            "seed": seed,
            "config": config,
            "artifacts": self.entries,
            "wall_time_s": wall_time_s,
        });
        let mut body = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Runtime(e.to_string()))?;
        body.push('\n');
        let path = self.dir.join("manifest.json");
        std::fs::write(&path, body).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
        Ok(path)
    }
}

/// Joins rows of display-formatted cells into CSV.
pub fn csv_table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    out
}

/// Display form of an optional value; missing values are empty cells.
pub fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}
