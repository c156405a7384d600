use std::path::PathBuf;

use modcma_core::tuner::{SpaceExtension, DEFAULT_TUNER_BUDGET, EVALS_PER_DIM};
use modcma_core::FunctionId;
use serde::Deserialize;

use crate::exit::CliError;

fn default_dim() -> usize {
    5
}
fn default_iid() -> u64 {
    1
}
fn default_tuner_budget() -> u64 {
    DEFAULT_TUNER_BUDGET
}
fn default_repetitions() -> usize {
    4
}

/// One pass of the tuning roadmap for a list of functions.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentManifest {
    pub name: String,
    #[serde(default)]
    pub extension: SpaceExtension,
    pub functions: Vec<String>,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "default_iid")]
    pub iid: u64,
    /// Algorithm runs per tuner repetition.
    #[serde(default = "default_tuner_budget")]
    pub tuner_budget: u64,
    /// Evaluations per algorithm run; `10 000·dim` when absent.
    #[serde(default)]
    pub eval_budget: Option<u64>,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default)]
    pub seed: u64,
    pub out: PathBuf,
}

impl ExperimentManifest {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let m: ExperimentManifest =
            serde_json::from_str(text).map_err(|e| CliError::invalid(format!("manifest: {e}")))?;
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.function_ids()?;
        if self.functions.is_empty() {
            return Err(CliError::invalid("manifest lists no functions"));
        }
        if self.tuner_budget == 0 || self.eval_budget == Some(0) || self.repetitions == 0 {
            return Err(CliError::invalid("budgets and repetitions must be positive"));
        }
        Ok(())
    }

    pub fn function_ids(&self) -> Result<Vec<FunctionId>, CliError> {
        self.functions.iter().map(|f| f.parse::<FunctionId>().map_err(CliError::from)).collect()
    }

    pub fn eval_budget(&self) -> u64 {
        self.eval_budget.unwrap_or(EVALS_PER_DIM * self.dim as u64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_tuning_setup() {
        let m = ExperimentManifest::parse(r#"{"name":"b","functions":["sphere"],"out":"o"}"#).unwrap();
        assert_eq!((m.dim, m.iid, m.tuner_budget, m.repetitions), (5, 1, 1000, 4));
        assert_eq!(m.eval_budget(), 50_000);
        assert_eq!(m.extension, SpaceExtension::None);
    }

    #[test]
    fn bad_manifests_are_rejected() {
        let unknown = ExperimentManifest::parse(r#"{"name":"b","functions":["nope"],"out":"o"}"#);
        assert_eq!(unknown.unwrap_err().code, 3);
        let extra = ExperimentManifest::parse(r#"{"name":"b","functions":["sphere"],"out":"o","x":1}"#);
        assert_eq!(extra.unwrap_err().code, 2);
    }
}
