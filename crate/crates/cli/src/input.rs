//! Parameter and belief loading. Precedence: flags, then config file, then defaults.

use std::fs;
use std::path::Path;

use beliefq_core::{BeliefDistribution, BeliefSpec, SystemParams};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const DEFAULT_R: f64 = 5.0;
pub const DEFAULT_C: f64 = 5.0;
pub const DEFAULT_MU: f64 = 5.0;
pub const DEFAULT_LAMBDA: f64 = 4.2;

/// Partially specified parameters, as read from a config file or from flags.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamOverrides {
    #[serde(rename = "R", default)]
    pub r: Option<f64>,
    #[serde(rename = "C", default)]
    pub c: Option<f64>,
    #[serde(default)]
    pub mu: Option<f64>,
    #[serde(default)]
    pub s2: Option<f64>,
    #[serde(default)]
    pub lambda: Option<f64>,
}

impl ParamOverrides {
    /// Fields set in `self` win over those in `base`.
    pub fn over(self, base: ParamOverrides) -> ParamOverrides {
        ParamOverrides {
            r: self.r.or(base.r),
            c: self.c.or(base.c),
            mu: self.mu.or(base.mu),
            s2: self.s2.or(base.s2),
            lambda: self.lambda.or(base.lambda),
        }
    }

    pub fn resolve(self) -> CliResult<SystemParams> {
        let mu = self.mu.unwrap_or(DEFAULT_MU);
        let s2 = self.s2.unwrap_or(2.0 / (mu * mu));
        Ok(SystemParams::new(
            self.r.unwrap_or(DEFAULT_R),
            self.c.unwrap_or(DEFAULT_C),
            mu,
            s2,
            self.lambda.unwrap_or(DEFAULT_LAMBDA),
        )?)
    }
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Belief source chosen on the command line. Without one, customers are assumed to believe the
/// true rate exactly.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum BeliefSource {
    File(std::path::PathBuf),
    Uniform(f64, f64),
    Point(f64),
    #[default]
    TrueRate,
}

pub fn load_belief(source: &BeliefSource, params: &SystemParams) -> CliResult<BeliefDistribution> {
    Ok(match source {
        BeliefSource::File(path) => {
            let spec: BeliefSpec = read_json(path)?;
            BeliefDistribution::try_from(spec)?
        }
        BeliefSource::Uniform(a, b) => BeliefDistribution::uniform(*a, *b)?,
        BeliefSource::Point(x) => BeliefDistribution::point_mass(*x)?,
        BeliefSource::TrueRate => BeliefDistribution::point_mass(params.lambda())?,
    })
}
