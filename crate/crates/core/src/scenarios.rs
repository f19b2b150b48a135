//! Bundled experiment configs, one per worked example.

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};

macro_rules! bundled {
    ($($name:literal),* $(,)?) => {
        &[$(($name, include_str!(concat!("../scenarios/", $name, ".json")))),*]
    };
}

/// `(name, json)` pairs.
pub const BUNDLED: &[(&str, &str)] = bundled!(
    "example1_ball",
    "example1prime_retracted",
    "example2_mann",
    "example3_resolvent",
    "example4_cyclic",
    "example5_gamma",
    "example6_vi",
    "example7_equilibrium",
    "mkc_variant",
);

pub fn names() -> impl Iterator<Item = &'static str> {
    BUNDLED.iter().map(|(n, _)| *n)
}

pub fn json(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, j)| *j)
}

pub fn load(name: &str) -> Result<ExperimentConfig> {
    let text = json(name).ok_or_else(|| Error::Config(format!("no bundled scenario named {name:?}")))?;
    ExperimentConfig::from_json(text)
}
