//! Scenario documents: one JSON file bundling the inputs of a run.

use std::path::Path;

use novlab_core::complex::ComplexDoc;
use novlab_core::bifurcation::ScriptDoc;
use novlab_core::groupoid::GroupoidDoc;
use novlab_core::{ElementaryParams, MorseModelConfig};
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    #[default]
    Text,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub groupoid: Option<GroupoidDoc>,
    pub complex: Option<ComplexDoc>,
    pub script: Option<ScriptDoc>,
    pub sim: Option<SimDoc>,
    #[serde(rename = "L")]
    pub length: Option<f64>,
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    Square(usize),
    Axes([usize; 2]),
}

impl GridSpec {
    pub fn s(self) -> usize {
        match self {
            GridSpec::Square(n) | GridSpec::Axes([n, _]) => n,
        }
    }

    pub fn t(self) -> usize {
        match self {
            GridSpec::Square(n) | GridSpec::Axes([_, n]) => n,
        }
    }
}

/// Stable-disc trace for `sim incidence`: either an explicit direction
/// on `Σ⁻` or a latitude relative to the recovered equator.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeDoc {
    pub b: Option<Vec<f64>>,
    pub latitude: Option<f64>,
    #[serde(default = "unit_radius")]
    pub radius: f64,
}

fn unit_radius() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
pub struct SimDoc {
    #[serde(flatten)]
    pub model: MorseModelConfig,
    #[serde(flatten)]
    pub params: ElementaryParams,
    pub s_range: Option<[f64; 2]>,
    pub t_range: Option<[f64; 2]>,
    pub grid: Option<GridSpec>,
    pub k_max: Option<usize>,
    #[serde(rename = "L")]
    pub length: Option<f64>,
    pub probe: Option<ProbeDoc>,
    /// Loop and base path used by `sim incidence` when the scenario has a
    /// groupoid.
    pub g: Option<String>,
    pub gamma: Option<String>,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|CliError::Input(m)| CliError::Input(format!("{}: {m}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Input(format!("scenario: {e}")))
    }

    pub fn groupoid(&self) -> Result<&GroupoidDoc, CliError> {
        self.groupoid.as_ref().ok_or_else(|| CliError::Input("scenario has no `groupoid`".into()))
    }

    pub fn sim(&self) -> Result<&SimDoc, CliError> {
        self.sim.as_ref().ok_or_else(|| CliError::Input("scenario has no `sim` config".into()))
    }
}
