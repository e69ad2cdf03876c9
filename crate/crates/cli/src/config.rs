//! Experiment configuration: a TOML file, per-kind defaults and command-line
//! overrides, merged into one resolved [`ExperimentConfig`].

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::ValueEnum;
use necsim_core::entropy::PathMode;
use necsim_core::property::{EmissionFit, EmissionWeighting};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Simulate,
    Stationary,
    Entropy,
    Npc,
    Ctmc,
    #[value(name = "reproduce-table1")]
    #[serde(rename = "reproduce-table1")]
    ReproduceTable1,
    #[value(name = "reproduce-table2")]
    #[serde(rename = "reproduce-table2")]
    ReproduceTable2,
    #[value(name = "reproduce-table3")]
    #[serde(rename = "reproduce-table3")]
    ReproduceTable3,
    #[value(name = "reproduce-table4")]
    #[serde(rename = "reproduce-table4")]
    ReproduceTable4,
    #[value(name = "reproduce-fig2")]
    #[serde(rename = "reproduce-fig2")]
    ReproduceFig2,
    #[value(name = "reproduce-fig3")]
    #[serde(rename = "reproduce-fig3")]
    ReproduceFig3,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::Stationary => "stationary",
            ExperimentKind::Entropy => "entropy",
            ExperimentKind::Npc => "npc",
            ExperimentKind::Ctmc => "ctmc",
            ExperimentKind::ReproduceTable1 => "reproduce-table1",
            ExperimentKind::ReproduceTable2 => "reproduce-table2",
            ExperimentKind::ReproduceTable3 => "reproduce-table3",
            ExperimentKind::ReproduceTable4 => "reproduce-table4",
            ExperimentKind::ReproduceFig2 => "reproduce-fig2",
            ExperimentKind::ReproduceFig3 => "reproduce-fig3",
        }
    }

    pub fn all() -> &'static [ExperimentKind] {
        <Self as ValueEnum>::value_variants()
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        Self::all().iter().copied().find(|k| k.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Self::all().iter().map(|k| k.name()).collect();
            CliError::Config(format!("unknown experiment kind {s:?}; expected one of {}", names.join(", ")))
        })
    }
}

/// Model section of a config file. Leaving out `t`, `r` and `s` draws them
/// at random from the run seed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub n_max: Option<usize>,
    pub q: Option<f64>,
    pub t: Option<Vec<f64>>,
    pub r: Option<Vec<f64>>,
    pub s: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CtmcSection {
    /// Step length of the discrete chain, in seconds.
    pub tau: Option<f64>,
    /// Exit rate per node count. Defaults to `(1 - s_i) / tau`.
    pub lambda: Option<Vec<f64>>,
    pub horizon: Option<f64>,
    /// Target mean dwell per node count; recalibrates `s` when given.
    pub dwell: Option<Vec<f64>>,
}

/// Contents of a TOML config file; every key is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub kind: Option<ExperimentKind>,
    pub seed: Option<u64>,
    pub length: Option<usize>,
    pub burn_in: Option<f64>,
    pub out: Option<PathBuf>,
    pub mode: Option<PathMode>,
    pub property: Option<String>,
    pub chains: Option<usize>,
    pub draws: Option<usize>,
    pub epsilon: Option<f64>,
    pub weighting: Option<EmissionWeighting>,
    pub fit: Option<EmissionFit>,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub ctmc: CtmcSection,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

/// Values given on the command line; each one replaces the file's.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub length: Option<usize>,
    pub out: Option<PathBuf>,
    pub n_max: Option<usize>,
    pub q: Option<f64>,
    pub mode: Option<PathMode>,
}

/// A fully resolved experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub length: usize,
    pub burn_in: f64,
    pub out: PathBuf,
    pub mode: PathMode,
    pub property: String,
    pub chains: usize,
    pub draws: usize,
    pub epsilon: f64,
    pub weighting: EmissionWeighting,
    pub fit: EmissionFit,
    pub model: ModelSection,
    pub ctmc: CtmcSection,
}

/// Defaults of one experiment kind.
struct Preset {
    n_max: usize,
    q: f64,
    length: usize,
    chains: usize,
    draws: usize,
    property: &'static str,
}

fn preset(kind: ExperimentKind) -> Preset {
    let base = Preset {
        n_max: 5,
        q: 0.7,
        length: 100_000,
        chains: 1,
        draws: 1,
        property: "node-count",
    };
    match kind {
        ExperimentKind::Simulate | ExperimentKind::Stationary | ExperimentKind::Npc => base,
        ExperimentKind::Ctmc => Preset { n_max: 3, ..base },
        ExperimentKind::Entropy => Preset { length: 200_000, chains: 5, ..base },
        ExperimentKind::ReproduceTable1 => base,
        ExperimentKind::ReproduceTable2 => Preset { n_max: 8, ..base },
        ExperimentKind::ReproduceTable3 => Preset { n_max: 3, length: 1_000_000, ..base },
        ExperimentKind::ReproduceTable4 => Preset { length: 200_000, chains: 5, ..base },
        ExperimentKind::ReproduceFig2 => Preset { length: 5_000, chains: 4, ..base },
        ExperimentKind::ReproduceFig3 => Preset {
            n_max: 3,
            q: 0.8,
            chains: 4,
            property: "triangle-count",
            ..base
        },
    }
}

impl ExperimentConfig {
    /// Merges, in increasing priority: the kind's defaults, the config
    /// file, the command line. `kind` from the command line wins over the
    /// file's.
    pub fn resolve(kind: Option<ExperimentKind>, file: ConfigFile, overrides: Overrides) -> Result<Self> {
        let kind = kind
            .or(file.kind)
            .ok_or_else(|| CliError::Config("no experiment kind given on the command line or in the config".into()))?;
        let p = preset(kind);
        let mut model = file.model;
        model.n_max = overrides.n_max.or(model.n_max).or(Some(p.n_max));
        model.q = overrides.q.or(model.q).or(Some(p.q));
        let config = Self {
            kind,
            seed: overrides.seed.or(file.seed).unwrap_or(0),
            length: overrides.length.or(file.length).unwrap_or(p.length),
            burn_in: file.burn_in.unwrap_or(0.1),
            out: overrides.out.or(file.out).unwrap_or_else(|| PathBuf::from("out")),
            mode: overrides.mode.or(file.mode).unwrap_or(PathMode::LabeledPath),
            property: file.property.unwrap_or_else(|| p.property.to_string()),
            chains: file.chains.unwrap_or(p.chains),
            draws: file.draws.unwrap_or(p.draws),
            epsilon: file.epsilon.unwrap_or(0.05),
            weighting: file.weighting.unwrap_or_default(),
            fit: file.fit.unwrap_or_default(),
            model,
            ctmc: file.ctmc,
        };
        config.validate()?;
        Ok(config)
    }

    /// Defaults of `kind` with the given seed and output directory.
    pub fn for_kind(kind: ExperimentKind, seed: u64, out: impl Into<PathBuf>) -> Result<Self> {
        Self::resolve(
            Some(kind),
            ConfigFile::default(),
            Overrides {
                seed: Some(seed),
                out: Some(out.into()),
                ..Overrides::default()
            },
        )
    }

    pub fn n_max(&self) -> usize {
        self.model.n_max.expect("filled by resolve")
    }

    pub fn q(&self) -> f64 {
        self.model.q.expect("filled by resolve")
    }

    pub fn validate(&self) -> Result<()> {
        if self.length == 0 {
            return Err(CliError::Config("length must be at least 1".into()));
        }
        if !(0.0..=0.5).contains(&self.burn_in) {
            return Err(CliError::Config(format!("burn_in = {} must lie in [0, 0.5]", self.burn_in)));
        }
        if self.chains == 0 || self.draws == 0 {
            return Err(CliError::Config("chains and draws must be at least 1".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(CliError::Config(format!("epsilon = {} must be positive", self.epsilon)));
        }
        let explicit = [&self.model.t, &self.model.r, &self.model.s];
        let given = explicit.iter().filter(|v| v.is_some()).count();
        if given != 0 && given != 3 {
            return Err(CliError::Config(
                "give all of model.t, model.r and model.s, or none of them for random parameters".into(),
            ));
        }
        if given == 3 && self.draws > 1 {
            return Err(CliError::Config("draws > 1 needs random parameters; remove model.t, r and s".into()));
        }
        Ok(())
    }
}
