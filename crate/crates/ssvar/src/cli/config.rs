//! Run configuration: one TOML file with a table per concern, plus
//! `section.key=value` overrides applied on top.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::sweep::SweepConfig;
use crate::error::{Error, Result};
use crate::model::HyperParams;
use crate::simulate::SimConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub m_bar: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self { m_bar: 30 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GcConfig {
    pub m_bar: usize,
    /// Window length in samples; `None` uses the whole series.
    pub window: Option<usize>,
    pub stride: usize,
    pub confidence: f64,
}

impl Default for GcConfig {
    fn default() -> Self {
        Self {
            m_bar: 30,
            window: None,
            stride: 100,
            confidence: 0.95,
        }
    }
}

/// ```toml
/// [simulation]   # SimConfig
/// [params]       # HyperParams
/// [fit]          # m_bar
/// [gc]           # m_bar, window, stride, confidence
/// [sweep]        # grid_points, max_var, seeds, seed_offset, tv_weight
/// ```
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub simulation: SimConfig,
    pub params: HyperParams,
    pub fit: FitConfig,
    pub gc: GcConfig,
    pub sweep: SweepConfig,
}

impl RunConfig {
    /// Reads `path` (if any) and applies `overrides` of the form
    /// `section.key=value`, where `value` is a TOML literal; bare words are
    /// taken as strings.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)?;
                text.parse::<toml::Table>()
                    .map_err(|e| Error::Parse(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for item in overrides {
            apply_override(&mut table, item)?;
        }
        let config: Self = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::Parse(format!("config: {}", e.message())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.simulation.validate()?;
        self.params.validate()?;
        self.sweep.validate()?;
        if self.fit.m_bar == 0 || self.gc.m_bar == 0 {
            return Err(Error::Parameter("m_bar must be at least 1".into()));
        }
        if !(self.gc.confidence > 0.0 && self.gc.confidence < 1.0) {
            return Err(Error::Parameter(format!(
                "confidence must lie in (0, 1), got {}",
                self.gc.confidence
            )));
        }
        if self.gc.stride == 0 {
            return Err(Error::Parameter("stride must be at least 1".into()));
        }
        Ok(())
    }
}

fn apply_override(table: &mut toml::Table, item: &str) -> Result<()> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| Error::Parse(format!("override `{item}` is not key=value")))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(Error::Parse(format!("bad override key `{key}`")));
    }
    let value = parse_literal(raw.trim());
    let (last, parents) = path.split_last().expect("non-empty split");
    let mut cur = table;
    for p in parents {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::Parse(format!("`{p}` in `{key}` is not a table")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

fn parse_literal(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}
