use std::path::Path;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Evolution {
    Continuous,
    Strobo,
}

/// Field prepared before the adiabatic crossing.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum InputField {
    Vacuum,
    /// `(|0> + |1>) / sqrt 2`
    Superposition,
    /// Coherent state with `|alpha|^2 = alpha2`.
    Coherent,
}

/// Flat key/value parameters shared by every subcommand.
///
/// Unset keys fall back to per-command defaults; a key that the command does
/// not read is a validation error.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_t: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_points: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_extent: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_points: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub evolution: Option<Evolution>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta_points: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub couplings: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<InputField>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_e: Option<f64>,
}

macro_rules! overlay {
    ($base:ident, $top:ident, $($f:ident),*) => {
        $( if $top.$f.is_some() { $base.$f = $top.$f; } )*
    };
}

impl ExperimentConfig {
    /// Reads a config file. A sidecar written by a previous run is accepted
    /// as well, in which case its `config` object is used.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let value: Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let inner = match value {
            Value::Object(mut map) if map.contains_key("command") && map.contains_key("config") => {
                map.remove("config").unwrap_or_default()
            }
            other => other,
        };
        serde_json::from_value(inner)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Values set in `top` replace those in `self`.
    pub fn overlay(mut self, top: ExperimentConfig) -> Self {
        overlay!(
            self, top, alpha2, eta, mu, gamma_t, t_max, t_points, steps, dim, grid_extent,
            grid_points, evolution, levels, weight, eta_points, couplings, input, gamma, gamma_e
        );
        self
    }

    pub fn keys(&self) -> Vec<String> {
        match serde_json::to_value(self) {
            Ok(Value::Object(map)) => map.keys().cloned().collect(),
            _ => Vec::new(),
        }
    }

    pub fn reject_unused(&self, command: &str, used: &[&str]) -> Result<(), CliError> {
        for key in self.keys() {
            if !used.contains(&key.as_str()) {
                return Err(CliError::Config(format!("`{key}` is not a parameter of {command}")));
            }
        }
        Ok(())
    }
}

pub(crate) fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![lo];
    }
    let step = (hi - lo) / (points - 1) as f64;
    (0..points).map(|i| lo + step * i as f64).collect()
}

pub(crate) fn invalid(name: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("invalid `{name}`: {reason}"))
}

pub(crate) fn check_unit(name: &str, values: &[f64]) -> Result<(), CliError> {
    if values.is_empty() {
        return Err(invalid(name, "list is empty"));
    }
    match values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        Some(v) => Err(invalid(name, format!("{v} is outside [0, 1]"))),
        None => Ok(()),
    }
}

pub(crate) fn check_positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(name, format!("must be positive, got {v}")))
    }
}

pub(crate) fn check_times(name: &str, values: &[f64]) -> Result<(), CliError> {
    if values.is_empty() {
        return Err(invalid(name, "list is empty"));
    }
    match values.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
        Some(v) => Err(invalid(name, format!("{v} is not a non-negative time"))),
        None => Ok(()),
    }
}
