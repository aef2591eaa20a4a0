//! Run configuration for `simulate`: a single JSON document, with
//! command-line flags overriding file keys.

use std::path::Path;

use serde::{Deserialize, Serialize};

use rabinovich_core::field::{Mode, PerturbationSpec, ScalarField};
use rabinovich_core::integrator::IntegratorConfig;
use rabinovich_core::linalg::Vec3;

use crate::CliError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

fn one() -> f64 {
    1.0
}

fn default_rtol() -> f64 {
    1e-10
}

fn default_atol() -> f64 {
    1e-12
}

/// The `simulate` schema. Unknown keys are rejected.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub beta: f64,
    pub mode: Mode,
    #[serde(default)]
    pub h: Option<f64>,
    #[serde(default)]
    pub c: Option<f64>,
    #[serde(default = "one")]
    pub gain_a: f64,
    #[serde(default = "one")]
    pub gain_b: f64,
    #[serde(default)]
    pub u0: Option<[f64; 3]>,
    #[serde(default)]
    pub auto_seed: bool,
    pub t_end: f64,
    #[serde(default = "default_rtol")]
    pub rtol: f64,
    #[serde(default = "default_atol")]
    pub atol: f64,
    #[serde(default)]
    pub output: Option<String>,
    #[serde(default)]
    pub format: OutputFormat,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !self.beta.is_finite() {
            return Err(CliError::Config("beta must be finite".into()));
        }
        if self.t_end.is_nan() || self.t_end < 0.0 {
            return Err(CliError::Config("t_end must be nonnegative".into()));
        }
        if !(self.gain_a.is_finite() && self.gain_a > 0.0)
            || !(self.gain_b.is_finite() && self.gain_b > 0.0)
        {
            return Err(CliError::Config("gains must be strictly positive".into()));
        }
        if self.u0.is_none() && !self.auto_seed {
            return Err(CliError::Config(
                "either u0 or auto_seed is required".into(),
            ));
        }
        if self.mode.needs_energy_level() && self.h.is_none() {
            return Err(CliError::Config(format!(
                "mode {:?} requires a target energy level h",
                self.mode
            )));
        }
        if self.mode.needs_casimir_level() && self.c.is_none() {
            return Err(CliError::Config(format!(
                "mode {:?} requires a target casimir level c",
                self.mode
            )));
        }
        if self.auto_seed && (self.h.is_none() || self.c.is_none()) {
            return Err(CliError::Config(
                "auto_seed needs both h and c to pick a fiber".into(),
            ));
        }
        Ok(())
    }

    pub fn perturbation(&self) -> PerturbationSpec {
        PerturbationSpec {
            mode: self.mode,
            h: self.h,
            c: self.c,
            gain_a: ScalarField::constant(self.gain_a),
            gain_b: ScalarField::constant(self.gain_b),
        }
    }

    pub fn integrator(&self) -> IntegratorConfig {
        IntegratorConfig::with_tolerances(self.rtol, self.atol)
    }

    pub fn u0_vec(&self) -> Option<Vec3> {
        self.u0.map(Vec3::from_array)
    }
}

pub fn parse_mode(s: &str) -> Result<Mode, CliError> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| CliError::Config(format!("unknown mode '{s}'")))
}

pub fn parse_u0(s: &str) -> Result<[f64; 3], CliError> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(CliError::Config(format!("u0 must be 'x,y,z', got '{s}'")));
    }
    let mut out = [0.0; 3];
    for (slot, part) in out.iter_mut().zip(&parts) {
        *slot = part
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("bad coordinate '{part}' in u0")))?;
    }
    Ok(out)
}
