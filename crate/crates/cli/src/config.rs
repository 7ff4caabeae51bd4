//! Loading experiment configs and computing their digests.

use std::path::Path;

use advice_core::harness::ExperimentConfig;
use advice_core::{AdviceStrategy, TeacherQuality};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::CliError;

/// Command-line values that replace the corresponding config keys.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub episodes: Option<usize>,
    pub budget: Option<u64>,
    pub teacher: Option<TeacherQuality>,
    pub strategy: Option<AdviceStrategy>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(v) = self.seed {
            cfg.experiment.seed = v;
        }
        if let Some(v) = self.trials {
            cfg.experiment.trials = v;
        }
        if let Some(v) = self.episodes {
            cfg.experiment.episodes = v;
        }
        if let Some(v) = self.budget {
            cfg.teacher.budget = v;
        }
        if let Some(v) = self.teacher {
            cfg.teacher.quality = v;
        }
        if let Some(v) = self.strategy {
            cfg.teacher.strategy = v;
        }
    }
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, CliError> {
    toml::from_str(text).map_err(|e| CliError::Config(e.to_string().trim_end().to_string()))
}

/// Reads, overrides and validates a config file.
pub fn load(path: &Path, overrides: &Overrides) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut cfg = parse_config(&text)?;
    overrides.apply(&mut cfg);
    cfg.validate()
        .map_err(|e| CliError::Config(e.to_string()))?;
    Ok(cfg)
}

/// Hex SHA-256 of the value's canonical JSON: object keys sorted, defaults
/// filled in, floats in shortest round-trip form.
pub fn digest_of<T: Serialize>(value: &T) -> String {
    let mut v = serde_json::to_value(value).expect("config serializes to JSON");
    v.sort_all_objects();
    hex::encode(Sha256::digest(v.to_string().as_bytes()))
}

/// Digests of a group config: the full digest, and the base digest that
/// ignores the teacher section and the group name. Groups of one comparison
/// share a base digest.
pub fn digests(cfg: &ExperimentConfig) -> (String, String) {
    let full = digest_of(cfg);
    let mut v = serde_json::to_value(cfg).expect("config serializes to JSON");
    let obj = v.as_object_mut().expect("config is an object");
    obj.remove("teacher");
    if let Some(Value::Object(run)) = obj.get_mut("experiment") {
        run.remove("name");
    }
    (full, digest_of(&v))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[domain]
kind = "linear_chain"

[learner]
kind = "q_tabular"
gamma = 0.8
schedule = "constant"
alpha = 0.9

[policy]
kind = "epsilon_greedy"
epsilon = 0.1

[teacher]
quality = "optimal"
budget = 1000

[experiment]
trials = 5
episodes = 300
seed = 7
"#;

    #[test]
    fn defaults_and_formatting_do_not_change_the_digest() {
        let a = parse_config(MINIMAL).unwrap();
        let explicit = MINIMAL
            .replace(
                "kind = \"linear_chain\"",
                "kind = \"linear_chain\"\nlength = 50",
            )
            .replace("gamma = 0.8", "gamma = 0.80")
            .replace("budget = 1000", "strategy = \"mistake\"\nbudget = 1000");
        let b = parse_config(&explicit).unwrap();
        assert_eq!(digests(&a), digests(&b));
    }

    #[test]
    fn base_digest_ignores_only_the_teacher() {
        let a = parse_config(MINIMAL).unwrap();
        let mut b = a.clone();
        b.teacher.quality = TeacherQuality::Poor;
        b.experiment.name = Some("poor teacher".into());
        assert_ne!(digests(&a).0, digests(&b).0);
        assert_eq!(digests(&a).1, digests(&b).1);
        let mut c = a.clone();
        c.experiment.seed = 8;
        assert_ne!(digests(&a).1, digests(&c).1);
    }

    #[test]
    fn unknown_keys_are_rejected_by_name() {
        let err = parse_config(&MINIMAL.replace("epsilon = 0.1", "epsilon = 0.1\nepsilom = 2"))
            .unwrap_err();
        assert!(err.to_string().contains("epsilom"), "{err}");
    }

    #[test]
    fn overrides_replace_config_values() {
        let mut cfg = parse_config(MINIMAL).unwrap();
        Overrides {
            seed: Some(11),
            trials: Some(2),
            budget: Some(0),
            teacher: Some(TeacherQuality::None),
            strategy: Some(AdviceStrategy::EarlyAdvising),
            ..Overrides::default()
        }
        .apply(&mut cfg);
        assert_eq!(cfg.experiment.seed, 11);
        assert_eq!(cfg.experiment.trials, 2);
        assert_eq!(cfg.experiment.episodes, 300);
        assert_eq!(cfg.teacher.budget, 0);
        assert_eq!(cfg.teacher.quality, TeacherQuality::None);
        assert_eq!(cfg.teacher.strategy, AdviceStrategy::EarlyAdvising);
    }
}
