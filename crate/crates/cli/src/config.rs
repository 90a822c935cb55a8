//! JSON run configuration. Command-line flags override every field.

use std::path::{Path, PathBuf};

use benchtrend::{Method, MonthIndex, Suite};
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub systems: Option<PathBuf>,
    pub micros: Option<PathBuf>,
    pub lineage: Option<PathBuf>,
    pub target_suite: Option<Suite>,
    pub method: Option<Method>,
    /// Inclusive `[from, to]` as `YYYY-MM` strings.
    pub trend_window: Option<(MonthIndex, MonthIndex)>,
    pub quantiles: Option<Vec<f64>>,
    pub region: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
    }

    /// Referenced input paths must exist; the output directory is created on demand.
    pub fn validate(&self) -> Result<(), CliError> {
        for path in [&self.systems, &self.micros, &self.lineage, &self.region].into_iter().flatten() {
            if !path.exists() {
                return Err(CliError::Data(format!("{}: no such file", path.display())));
            }
        }
        if let Some((lo, hi)) = self.trend_window {
            if lo > hi {
                return Err(CliError::Data(format!("trend window {lo}..{hi} is reversed")));
            }
        }
        if let Some(qs) = &self.quantiles {
            if qs.is_empty() || qs.iter().any(|q| !(*q > 0.0 && *q < 1.0)) {
                return Err(CliError::Data("quantiles must be a nonempty list in (0, 1)".into()));
            }
        }
        Ok(())
    }
}
