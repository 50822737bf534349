//! Flat TOML config mirroring the search settings. Command-line flags take
//! precedence over the file.

use std::path::Path;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use treespace::{Objective, PcaConfig};

use crate::error::{CliError, CliResult};
use crate::files::read_text;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectiveArg {
    Par,
    Perp,
}

impl ObjectiveArg {
    pub fn objective(self) -> Objective {
        match self {
            ObjectiveArg::Par => Objective::Parallel,
            ObjectiveArg::Perp => Objective::Perpendicular,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Greedy,
    Anneal,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Greedy => "greedy",
            Algorithm::Anneal => "anneal",
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub objective: Option<ObjectiveArg>,
    pub algorithm: Option<Algorithm>,
    pub weight_cap: Option<f64>,
    pub weight_tol: Option<f64>,
    pub golden_tol: Option<f64>,
    pub iterations: Option<usize>,
    pub tau0: Option<f64>,
    pub decay: Option<f64>,
    pub birth_floor: Option<f64>,
    pub seed: Option<u64>,
    pub normalize: Option<bool>,
}

impl FileConfig {
    pub fn load(path: &Path) -> CliResult<FileConfig> {
        toml::from_str(&read_text(path)?)
            .map_err(|e| CliError::Config(format!("{}: {}", path.display(), e.message())))
    }

    /// Fills a search config from the file's entries.
    pub fn apply(&self, config: &mut PcaConfig) {
        if let Some(o) = self.objective {
            config.objective = o.objective();
        }
        if self.weight_cap.is_some() {
            config.weight_cap = self.weight_cap;
        }
        if let Some(v) = self.weight_tol {
            config.weight_tol = v;
        }
        if let Some(v) = self.golden_tol {
            config.golden_tol = v;
        }
        let a = &mut config.annealing;
        if let Some(v) = self.iterations {
            a.iterations = v;
        }
        if let Some(v) = self.tau0 {
            a.tau0 = v;
        }
        if let Some(v) = self.decay {
            a.decay = v;
        }
        if let Some(v) = self.birth_floor {
            a.birth_floor = v;
        }
        if let Some(v) = self.seed {
            config.seed = v;
        }
        if let Some(v) = self.normalize {
            config.normalize = v;
        }
    }
}

pub fn objective_name(o: Objective) -> &'static str {
    match o {
        Objective::Parallel => "par",
        Objective::Perpendicular => "perp",
    }
}
