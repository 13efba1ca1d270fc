pub mod build;
pub mod evaluate;
pub mod generate;
pub mod localize;
pub mod theory;

use radiomap_core::pipeline::BuildConfig;
use radiomap_core::synth::SynthSpec;
use radiomap_core::theory::TheoryParams;
use serde::Serialize;

use crate::error::{CliError, CliResult};

pub fn print_json<T: Serialize>(value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::input(e.to_string()))?;
    println!("{text}");
    Ok(())
}

/// Defaults of every configurable command, as printed by `--print-config`.
#[derive(Debug, Serialize)]
pub struct DefaultConfigs {
    pub generate: SynthSpec,
    pub build: BuildConfig,
    pub evaluate: evaluate::EvaluateConfig,
    pub theory: TheoryParams,
}

pub fn default_configs() -> DefaultConfigs {
    DefaultConfigs {
        generate: SynthSpec::default(),
        build: BuildConfig::default(),
        evaluate: evaluate::EvaluateConfig::default(),
        theory: TheoryParams::default(),
    }
}
