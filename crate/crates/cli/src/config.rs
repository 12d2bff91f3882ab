//! Scenario configuration: a named profile, optionally overridden by a TOML
//! file whose keys mirror `ScenarioConfig`.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use clap::ValueEnum;
use formation_gatekeeper::sim::ScenarioConfig;
use serde::Serialize;
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Paper,
    Small,
}

impl Profile {
    pub fn base(self) -> ScenarioConfig {
        match self {
            Profile::Paper => ScenarioConfig::paper(),
            Profile::Small => ScenarioConfig::small(),
        }
    }
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// The profile's configuration with every key of the file at `path` laid
/// over it. Nested tables merge key by key; unknown keys are an error.
pub fn load(profile: Profile, path: Option<&Path>) -> Result<ScenarioConfig> {
    let base = profile.base();
    let Some(path) = path else {
        return Ok(base);
    };
    let text =
        fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let file: toml::Table =
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
    let mut doc = serde_json::to_value(&base)?;
    merge(&mut doc, serde_json::to_value(file)?);
    let config: ScenarioConfig = serde_json::from_value(doc)
        .with_context(|| format!("invalid config {}", path.display()))?;
    config
        .check()
        .with_context(|| format!("invalid config {}", path.display()))?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load_str(profile: Profile, text: &str) -> Result<ScenarioConfig> {
        let dir = tempfile::tempdir()?;
        let p = dir.path().join("c.toml");
        fs::write(&p, text)?;
        load(profile, Some(&p))
    }

    #[test]
    fn nested_override_keeps_siblings() {
        let c = load_str(Profile::Small, "delta = 2.0\n[gatekeeper]\nhorizon = 8.0\n").unwrap();
        assert_eq!(c.delta, 2.0);
        assert_eq!(c.gatekeeper.horizon, 8.0);
        assert_eq!(
            c.gatekeeper.switch_time_step,
            ScenarioConfig::small().gatekeeper.switch_time_step
        );
        assert_eq!(c.n_obstacles, 10);
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(load_str(Profile::Paper, "n_obstacle = 3\n").is_err());
    }

    #[test]
    fn offsets_replace_whole_list() {
        let c = load_str(Profile::Paper, "offsets = [[-3.0, 5.0, 0.0]]\n").unwrap();
        assert_eq!(c.offsets.len(), 1);
    }
}
