//! Scenario files.
//!
//! A scenario is a TOML document whose tables mirror [`Scenario`]. The
//! optional top-level `include` key (a string or a list) names other TOML
//! files, resolved relative to the including file, that are merged in order
//! underneath it. `@reference` names the built-in calibrated fixture; a document
//! without `include` starts from it implicitly. Tables merge key by key,
//! everything else is replaced.

use std::path::{Path, PathBuf};

use tesla_servo_core::sim::{PositioningSpec, Scenario};
use toml::{Table, Value};

use crate::error::{HarnessError, Result};

/// Name of the built-in fixture in `include` lists.
pub const REFERENCE_FIXTURE: &str = "@reference";

const MAX_INCLUDE_DEPTH: usize = 16;

/// The calibrated fixture as a TOML table.
pub fn reference_fixture_table() -> Result<Table> {
    let s = Scenario::reference_fixture(32.0)?;
    Table::try_from(&s).map_err(|e| HarnessError::parse(REFERENCE_FIXTURE, e))
}

fn merge(base: &mut Table, over: Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn includes_of(doc: &mut Table, path: &Path) -> Result<Vec<String>> {
    match doc.remove("include") {
        None => Ok(vec![REFERENCE_FIXTURE.to_owned()]),
        Some(Value::String(s)) => Ok(vec![s]),
        Some(Value::Array(items)) => items
            .into_iter()
            .map(|v| match v {
                Value::String(s) => Ok(s),
                other => Err(HarnessError::parse(
                    path,
                    format!("include entries must be strings, got {other}"),
                )),
            })
            .collect(),
        Some(other) => Err(HarnessError::parse(
            path,
            format!("include must be a string or list, got {other}"),
        )),
    }
}

fn resolve(path: &Path, depth: usize) -> Result<Table> {
    if depth > MAX_INCLUDE_DEPTH {
        return Err(HarnessError::parse(path, "include nesting too deep"));
    }
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let mut doc: Table = text.parse().map_err(|e| HarnessError::parse(path, e))?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut merged = Table::new();
    for inc in includes_of(&mut doc, path)? {
        let table = if inc == REFERENCE_FIXTURE {
            reference_fixture_table()?
        } else {
            resolve(&dir.join(&inc), depth + 1)?
        };
        merge(&mut merged, table);
    }
    merge(&mut merged, doc);
    Ok(merged)
}

/// Reads `path` with all includes merged.
pub fn load_document(path: &Path) -> Result<Table> {
    if path.as_os_str() == REFERENCE_FIXTURE {
        return reference_fixture_table();
    }
    resolve(path, 0)
}

/// Parses a merged document into a validated [`Scenario`].
pub fn scenario_from_table(table: Table, origin: &Path) -> Result<Scenario> {
    let s: Scenario = Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| HarnessError::parse(origin, e))?;
    s.validate()?;
    Ok(s)
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    scenario_from_table(load_document(path)?, path)
}

/// The `[positioning]` table of a scenario document, if any.
pub fn positioning_spec(table: &Table, origin: &Path) -> Result<Option<PositioningSpec>> {
    table
        .get("positioning")
        .cloned()
        .map(|v| {
            v.try_into()
                .map_err(|e: toml::de::Error| HarnessError::parse(origin, e))
        })
        .transpose()
}

/// Renders a scenario as a standalone TOML document.
pub fn scenario_to_string(s: &Scenario) -> Result<String> {
    toml::to_string(s).map_err(|e| HarnessError::parse(PathBuf::from(&s.label), e))
}
