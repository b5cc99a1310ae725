//! Named experiments, one per kernel decay class.

use crate::config::Config;
use crate::error::{Error, Result};
use crate::kernel::{KernelFamily, KernelParams};

/// Decay behaviour the experiment is meant to exhibit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Exponential,
    Polynomial,
    Stretched,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::Exponential => "exponential",
            Regime::Polynomial => "polynomial",
            Regime::Stretched => "stretched",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPreset {
    pub name: &'static str,
    pub config: Config,
    pub expected_regime: Regime,
}

pub const PRESET_NAMES: [&str; 3] = ["expo", "poly", "stretched"];

/// L = 2π, N = 128, a0 = 1, a1 = 0, k = 0, u₀ = 0.04·poly33 with zero
/// history, nonlinear, T = 50; only the kernel differs.
pub fn preset(name: &str) -> Result<ExperimentPreset> {
    let (family, kernel, regime) = match name {
        "expo" => (
            KernelFamily::Exponential,
            KernelParams { d1: 1.0, q1: 1.0, ..Default::default() },
            Regime::Exponential,
        ),
        "poly" => (
            KernelFamily::Polynomial,
            KernelParams { d1: 1.0, q1: 2.0, ..Default::default() },
            Regime::Polynomial,
        ),
        "stretched" => (
            KernelFamily::StretchedExponential,
            KernelParams { d1: 1.0, q1: 1.0, p1: 0.5, c0: None },
            Regime::Stretched,
        ),
        _ => {
            return Err(Error::DomainError(format!(
                "unknown preset '{name}' (expected one of {})",
                PRESET_NAMES.join(", ")
            )))
        }
    };
    let config = Config {
        kernel_family: family,
        kernel,
        label: name.to_string(),
        ..Config::default()
    };
    config.validate()?;
    Ok(ExperimentPreset {
        name: PRESET_NAMES.iter().copied().find(|&n| n == name).unwrap(),
        config,
        expected_regime: regime,
    })
}

pub fn all_presets() -> Vec<ExperimentPreset> {
    PRESET_NAMES.iter().map(|n| preset(n).expect("built-in preset")).collect()
}
