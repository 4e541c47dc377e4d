//! Experiment configuration: a TOML file with a top-level `experiment`,
//! optional `seed` and `output`, and one block named after the experiment.
//!
//! ```toml
//! experiment = "hopper-sweep"
//! seed = 0
//!
//! [hopper-sweep]
//! pressures = [2.5e5, 3.0e5]
//!
//! [hopper-sweep.sweep]
//! dwell_cycles = 24
//! ```

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use toml::{Table, Value};

use crate::experiments::EXPERIMENTS;
use crate::CliError;

const TOP_LEVEL: &[&str] = &["experiment", "seed", "output"];
pub const DEFAULT_OUTPUT: &str = "out";

/// A parsed file with overrides applied, not yet bound to a schema.
#[derive(Debug, Clone)]
pub struct RawConfig {
    pub experiment: String,
    pub seed: u64,
    pub output: PathBuf,
    pub block: Value,
}

fn config_error(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// Parses `key=value`, reading the value as TOML and falling back to a bare
/// string.
pub fn parse_override(raw: &str) -> Result<(Vec<String>, Value), CliError> {
    let (key, value) = raw
        .split_once('=')
        .ok_or_else(|| config_error(format!("override `{raw}` is not of the form key=value")))?;
    let path: Vec<String> = key.trim().split('.').map(|s| s.trim().to_string()).collect();
    if path.iter().any(|s| s.is_empty()) {
        return Err(config_error(format!("override key `{key}` has an empty segment")));
    }
    let value = value.trim();
    let parsed = match format!("v = {value}").parse::<Table>() {
        Ok(mut t) => t.remove("v").unwrap_or(Value::String(value.to_string())),
        Err(_) => Value::String(value.to_string()),
    };
    Ok((path, parsed))
}

pub fn apply_override(table: &mut Table, path: &[String], value: Value) -> Result<(), CliError> {
    let (last, parents) = path.split_last().expect("override path is never empty");
    let mut node = table;
    for (i, seg) in parents.iter().enumerate() {
        let entry = node.entry(seg.clone()).or_insert_with(|| Value::Table(Table::new()));
        node = match entry {
            Value::Table(t) => t,
            _ => {
                return Err(config_error(format!(
                    "override `{}`: `{}` is not a block",
                    path.join("."),
                    parents[..=i].join(".")
                )))
            }
        };
    }
    node.insert(last.clone(), value);
    Ok(())
}

/// Reads and validates the top level of a configuration.
///
/// `experiment` names the experiment when no file is given; with a file the
/// two must agree.
pub fn load(
    path: Option<&Path>,
    experiment: Option<&str>,
    overrides: &[String],
) -> Result<RawConfig, CliError> {
    let mut table = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| config_error(format!("cannot read config {}: {e}", p.display())))?;
            text.parse::<Table>()
                .map_err(|e| config_error(format!("{}: {e}", p.display())))?
        }
        None => {
            let name = experiment.ok_or_else(|| config_error("give an experiment name or --config"))?;
            let mut t = Table::new();
            t.insert("experiment".into(), Value::String(name.into()));
            t.insert(name.into(), Value::Table(Table::new()));
            t
        }
    };
    for o in overrides {
        let (p, v) = parse_override(o)?;
        apply_override(&mut table, &p, v)?;
    }

    let name = match table.remove("experiment") {
        Some(Value::String(s)) => s,
        Some(_) => return Err(config_error("key `experiment` must be a string")),
        None => return Err(config_error("missing required key `experiment`")),
    };
    if !EXPERIMENTS.iter().any(|e| e.name == name) {
        let known: Vec<&str> = EXPERIMENTS.iter().map(|e| e.name).collect();
        return Err(config_error(format!(
            "key `experiment`: unknown experiment `{name}` (expected one of {})",
            known.join(", ")
        )));
    }
    if let Some(cli) = experiment {
        if cli != name {
            return Err(config_error(format!(
                "key `experiment`: config runs `{name}` but `{cli}` was requested"
            )));
        }
    }
    let seed = match table.remove("seed") {
        None => 0,
        Some(Value::Integer(s)) if s >= 0 => s as u64,
        Some(_) => return Err(config_error("key `seed` must be a non-negative integer")),
    };
    let output = match table.remove("output") {
        None => PathBuf::from(DEFAULT_OUTPUT),
        Some(Value::String(s)) => PathBuf::from(s),
        Some(_) => return Err(config_error("key `output` must be a string")),
    };
    let block = table
        .remove(&name)
        .ok_or_else(|| config_error(format!("missing required block [{name}]")))?;
    if !block.is_table() {
        return Err(config_error(format!("key `{name}` must be a block")));
    }
    if let Some(extra) = table.keys().next() {
        let hint = if EXPERIMENTS.iter().any(|e| e.name == extra) {
            format!(" (block for another experiment; this config runs `{name}`)")
        } else {
            format!(" (expected {} or [{name}])", TOP_LEVEL.join(", "))
        };
        return Err(config_error(format!("unknown key `{extra}`{hint}")));
    }
    Ok(RawConfig {
        experiment: name,
        seed,
        output,
        block,
    })
}

/// Binds a block to its schema; errors carry the dotted path of the key.
pub fn bind<T: DeserializeOwned>(name: &str, block: Value) -> Result<T, CliError> {
    serde_path_to_error::deserialize(block).map_err(|e| {
        let path = e.path().to_string();
        let at = if path == "." { format!("[{name}]") } else { format!("[{name}] key `{path}`") };
        let msg = e.inner().to_string();
        config_error(format!("{at}: {}", msg.lines().next().unwrap_or_default().trim()))
    })
}

/// Lays `over` onto `base`: tables merge key by key, everything else is
/// replaced. A table whose `kind` tag differs replaces the base outright.
pub fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Table(b), Value::Table(o)) => {
            if o.get("kind").is_some_and(|k| b.get("kind") != Some(k)) {
                *b = o;
                return;
            }
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_parse_as_toml_values() {
        let (p, v) = parse_override("hopper-sweep.sweep.dwell_cycles=12").unwrap();
        assert_eq!(p, ["hopper-sweep", "sweep", "dwell_cycles"]);
        assert_eq!(v, Value::Integer(12));
        assert_eq!(parse_override("a=[1.5, 2]").unwrap().1, Value::Array(vec![Value::Float(1.5), Value::Integer(2)]));
        assert_eq!(parse_override("a=hello").unwrap().1, Value::String("hello".into()));
        assert!(parse_override("novalue").is_err());
        assert!(parse_override("a..b=1").is_err());
    }

    #[test]
    fn merge_keeps_unset_defaults() {
        let mut base: Value = toml::from_str("a = 1\n[p]\nx = 1\ny = 2\n[e]\nkind = \"one\"\nm = 1\n").unwrap();
        let over: Value = toml::from_str("[p]\ny = 5\n[e]\nkind = \"two\"\nq = 3\n").unwrap();
        merge(&mut base, over);
        let want: Value = toml::from_str("a = 1\n[p]\nx = 1\ny = 5\n[e]\nkind = \"two\"\nq = 3\n").unwrap();
        assert_eq!(base, want);
    }

    #[test]
    fn override_through_a_scalar_is_refused() {
        let mut t: Table = "x = 1".parse().unwrap();
        let (p, v) = parse_override("x.y=2").unwrap();
        let err = apply_override(&mut t, &p, v).unwrap_err();
        assert!(err.to_string().contains("`x`"));
    }

    #[test]
    fn top_level_is_strict() {
        let dir = tempfile::tempdir().unwrap();
        let write = |body: &str| {
            let p = dir.path().join("c.toml");
            std::fs::write(&p, body).unwrap();
            p
        };
        let p = write("experiment = \"modes\"\n[modes]\n");
        let c = load(Some(&p), None, &[]).unwrap();
        assert_eq!((c.seed, c.output.as_path()), (0, Path::new(DEFAULT_OUTPUT)));

        let p = write("experiment = \"modes\"\n");
        assert!(load(Some(&p), None, &[]).unwrap_err().to_string().contains("[modes]"));
        let p = write("experiment = \"modes\"\ncolour = 1\n[modes]\n");
        assert!(load(Some(&p), None, &[]).unwrap_err().to_string().contains("`colour`"));
        let p = write("experiment = \"swim\"\n[swim]\n");
        assert!(load(Some(&p), None, &[]).unwrap_err().to_string().contains("`swim`"));
        let p = write("experiment = \"modes\"\nseed = -1\n[modes]\n");
        assert!(load(Some(&p), None, &[]).unwrap_err().to_string().contains("`seed`"));
    }
}
