//! Scenario files shipped with the crate.

use super::config::ScenarioConfig;
use crate::error::{NpnsError, Result};

pub const PRESETS: &[(&str, &str)] = &[
    ("blocking-relax", include_str!("../../scenarios/blocking-relax.toml")),
    (
        "uniform-selective-channel",
        include_str!("../../scenarios/uniform-selective-channel.toml"),
    ),
    (
        "general-selective-patterned",
        include_str!("../../scenarios/general-selective-patterned.toml"),
    ),
];

pub fn preset_names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|p| p.0)
}

pub fn preset(name: &str) -> Result<ScenarioConfig> {
    let (_, text) = PRESETS.iter().find(|p| p.0 == name).ok_or_else(|| {
        NpnsError::Config(format!(
            "unknown preset {name:?}; available: {}",
            preset_names().collect::<Vec<_>>().join(", ")
        ))
    })?;
    ScenarioConfig::from_toml(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for name in preset_names() {
            let cfg = preset(name).unwrap();
            assert_eq!(cfg.name.as_deref(), Some(name));
            let model = cfg.model().unwrap();
            cfg.initial_state(&model).unwrap();
        }
        assert!(preset("nope").is_err());
    }
}
