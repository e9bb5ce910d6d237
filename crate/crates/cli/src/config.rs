//! JSON run configurations.

use std::fs;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::de::DeserializeOwned;
use serde::Deserialize;
use tenmon_core::data::{default_phase_windows, Statistic};
use tenmon_core::gnarx::GnarxOrder;
use tenmon_core::simulate::ScenarioSpec;
use tenmon_core::{Error, Result};

/// Parses JSON, naming the offending field in errors.
pub fn parse_json<T: DeserializeOwned>(text: &str, what: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        if path == "." {
            Error::Config(format!("{what}: {}", e.inner()))
        } else {
            Error::Config(format!("{what}: field `{path}`: {}", e.inner()))
        }
    })
}

/// Reads a config file; relative paths inside it resolve against its
/// directory.
pub fn load<T: DeserializeOwned>(path: &Path) -> Result<(T, PathBuf)> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((parse_json(&text, &path.display().to_string())?, base))
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StandardGrid {
    pub iterations: usize,
    pub seed: u64,
    #[serde(default)]
    pub mc_reps: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    #[serde(default)]
    pub scenarios: Vec<ScenarioSpec>,
    #[serde(default)]
    pub standard_grid: Option<StandardGrid>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

impl SimulateConfig {
    /// A file holding either a run config (`scenarios` / `standard_grid`) or a
    /// single scenario spec.
    pub fn load(path: &Path) -> Result<(Self, PathBuf)> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let what = path.display().to_string();
        let value: serde_json::Value = parse_json(&text, &what)?;
        let is_run_config = ["scenarios", "standard_grid", "out_dir"]
            .iter()
            .any(|k| value.get(k).is_some());
        let config = if is_run_config {
            parse_json(&text, &what)?
        } else {
            SimulateConfig {
                scenarios: vec![parse_json(&text, &what)?],
                standard_grid: None,
                out_dir: None,
            }
        };
        if config.scenarios.is_empty() && config.standard_grid.is_none() {
            return Err(Error::Config(format!(
                "{what}: no `scenarios` and no `standard_grid`"
            )));
        }
        Ok((config, base))
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Window {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl Window {
    fn range(&self) -> RangeInclusive<NaiveDate> {
        self.start..=self.end
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub flows: PathBuf,
    pub generation: PathBuf,
    #[serde(default = "default_statistic")]
    pub statistic: Statistic,
    #[serde(default)]
    pub phase1: Option<Window>,
    #[serde(default)]
    pub phase2: Option<Window>,
}

fn default_statistic() -> Statistic {
    Statistic::M1
}

impl DataConfig {
    pub fn windows(&self) -> (RangeInclusive<NaiveDate>, RangeInclusive<NaiveDate>) {
        let (d1, d2) = default_phase_windows();
        (
            self.phase1.as_ref().map_or(d1, Window::range),
            self.phase2.as_ref().map_or(d2, Window::range),
        )
    }
}

fn default_order() -> GnarxOrder {
    GnarxOrder::first_order(2)
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub data: DataConfig,
    #[serde(default = "default_order")]
    pub order: GnarxOrder,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MonitorChart {
    pub alpha: f64,
    pub nu: f64,
    pub mc_reps: usize,
    pub seed: u64,
}

impl Default for MonitorChart {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            nu: 0.0,
            mc_reps: 5000,
            seed: 0,
        }
    }
}

fn default_w() -> f64 {
    0.2
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonitorConfig {
    pub data: DataConfig,
    #[serde(default = "default_order")]
    pub order: GnarxOrder,
    /// Fit report to reuse; the model is refit on Phase I when absent.
    #[serde(default)]
    pub fit: Option<PathBuf>,
    #[serde(default)]
    pub chart: MonitorChart,
    #[serde(default = "default_w")]
    pub threshold_w: f64,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, tag = "model", rename_all = "snake_case")]
pub enum GraphConfig {
    ErdosRenyi {
        n_nodes: usize,
        n_edges: usize,
        #[serde(default)]
        seed: u64,
        #[serde(default)]
        line_graph: bool,
        #[serde(default)]
        out_dir: Option<PathBuf>,
    },
    Sbm {
        cluster_sizes: Vec<usize>,
        p_within: f64,
        p_between: f64,
        #[serde(default)]
        seed: u64,
        #[serde(default)]
        line_graph: bool,
        #[serde(default)]
        out_dir: Option<PathBuf>,
    },
    /// Line graph of the country network found in a flow export.
    Pairs {
        flows: PathBuf,
        #[serde(default)]
        out_dir: Option<PathBuf>,
    },
}

impl GraphConfig {
    pub fn out_dir(&self) -> Option<&PathBuf> {
        match self {
            GraphConfig::ErdosRenyi { out_dir, .. }
            | GraphConfig::Sbm { out_dir, .. }
            | GraphConfig::Pairs { out_dir, .. } => out_dir.as_ref(),
        }
    }
}

/// `path` if absolute, otherwise relative to `base`.
pub fn resolve(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}
