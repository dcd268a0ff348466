//! Scenario-file driven runs and parameter sweeps.

use std::path::Path;

use lsppair_core::metrics::loss_at_scale;

use crate::error::CliError;
use crate::scenario_file::{load_str, LoadedScenario, ScenarioFile};
use crate::table::{ResultRow, ResultTable, NO_SWEEP};

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunOverrides {
    pub master_seed: Option<u64>,
    pub replications: Option<u64>,
}

impl RunOverrides {
    fn apply(&self, loaded: &mut LoadedScenario) -> Result<(), CliError> {
        if let Some(seed) = self.master_seed {
            loaded.master_seed = seed;
        }
        if let Some(reps) = self.replications {
            if reps == 0 {
                return Err(CliError::Validation("--replications must be at least 1".into()));
            }
            loaded.replications = reps;
        }
        Ok(())
    }
}

pub fn read_source(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn rows_for(loaded: &LoadedScenario, param: &str, value: &str) -> Result<Vec<ResultRow>, CliError> {
    loaded
        .scenarios
        .iter()
        .map(|s| {
            let est = loss_at_scale(s, s.policy, 1.0, loaded.replications, loaded.master_seed)?;
            Ok(ResultRow::loss(param, value, s.policy, &est))
        })
        .collect()
}

/// Runs every policy listed in a scenario document; one row per policy.
pub fn run_scenario_source(source: &str, origin: &str, ov: &RunOverrides) -> Result<ResultTable, CliError> {
    let mut loaded = load_str(source, origin)?;
    ov.apply(&mut loaded)?;
    Ok(ResultTable::new(rows_for(&loaded, NO_SWEEP, "")?))
}

pub fn run_scenario(path: &Path, ov: &RunOverrides) -> Result<ResultTable, CliError> {
    let source = read_source(path)?;
    run_scenario_source(&source, &path.display().to_string(), ov)
}

/// Interprets a command-line value as the most specific TOML scalar.
pub fn parse_scalar(raw: &str) -> toml::Value {
    let raw = raw.trim();
    if let Ok(i) = raw.parse::<i64>() {
        toml::Value::Integer(i)
    } else if let Ok(f) = raw.parse::<f64>() {
        toml::Value::Float(f)
    } else if let Ok(b) = raw.parse::<bool>() {
        toml::Value::Boolean(b)
    } else {
        toml::Value::String(raw.to_string())
    }
}

/// Sets the value at a dotted path (`traffic.mean_interarrival`,
/// `topology.0.max_up`), creating missing tables along the way.
pub fn set_path(doc: &mut toml::Value, path: &str, value: toml::Value) -> Result<(), CliError> {
    let bad = |why: &str| CliError::Validation(format!("--param {path}: {why}"));
    let segments: Vec<&str> = path.split('.').collect();
    if segments.iter().any(|s| s.is_empty()) {
        return Err(bad("empty path segment"));
    }
    let mut node = doc;
    for (i, seg) in segments.iter().enumerate() {
        let last = i + 1 == segments.len();
        node = match node {
            toml::Value::Table(t) => {
                if last {
                    t.insert(seg.to_string(), value);
                    return Ok(());
                }
                t.entry(seg.to_string())
                    .or_insert_with(|| toml::Value::Table(toml::map::Map::new()))
            }
            toml::Value::Array(a) => {
                let idx: usize = seg.parse().map_err(|_| bad("expected an array index"))?;
                let len = a.len();
                let slot = a
                    .get_mut(idx)
                    .ok_or_else(|| bad(&format!("index {idx} out of range (len {len})")))?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => return Err(bad(&format!("'{}' is not a table or array", segments[..i].join(".")))),
        };
    }
    unreachable!("loop returns on the last segment")
}

/// One row per (value, policy) with `param` set to each value in turn.
pub fn sweep_source(
    source: &str,
    origin: &str,
    param: &str,
    values: &[String],
    ov: &RunOverrides,
) -> Result<ResultTable, CliError> {
    // validates the unmodified document first so errors point at its lines
    load_str(source, origin)?;
    let base: toml::Value = toml::from_str(source).map_err(|e| CliError::Validation(e.to_string()))?;
    let mut rows = Vec::new();
    for raw in values {
        let mut doc = base.clone();
        set_path(&mut doc, param, parse_scalar(raw))?;
        let point_origin = format!("{origin} [{param}={raw}]");
        let mut loaded = ScenarioFile::from_value(doc, &point_origin)?.into_loaded(&point_origin, source)?;
        ov.apply(&mut loaded)?;
        rows.extend(rows_for(&loaded, param, raw.trim())?);
    }
    Ok(ResultTable::new(rows))
}

pub fn sweep(path: &Path, param: &str, values: &[String], ov: &RunOverrides) -> Result<ResultTable, CliError> {
    let source = read_source(path)?;
    sweep_source(&source, &path.display().to_string(), param, values, ov)
}
