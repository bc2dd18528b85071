use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use tsunami_detect::bayes::{CovariancePolicy, DEFAULT_SCALE};
use tsunami_detect::dtw::DtwConfig;
use tsunami_detect::harness::SweepConfig;
use tsunami_detect::pod::ModeRule;
use tsunami_detect::synth::GenConfig;

/// Settings for `decompose` and `detect`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectConfig {
    pub mode_rule: ModeRule,
    pub likelihood_scale: f64,
    pub covariance_policy: CovariancePolicy,
    pub target_gauge: Option<usize>,
    pub dtw: DtwConfig,
}

impl Default for DetectConfig {
    fn default() -> Self {
        DetectConfig {
            mode_rule: ModeRule::default(),
            likelihood_scale: DEFAULT_SCALE,
            covariance_policy: CovariancePolicy::default(),
            target_gauge: None,
            dtw: DtwConfig::default(),
        }
    }
}

/// Everything a run can be configured with; echoed as `config.toml` beside its outputs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub gen: GenConfig,
    pub sweep: SweepConfig,
    pub detect: DetectConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, Box<dyn std::error::Error + Send + Sync>> {
        let text = fs::read_to_string(path)
            .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()).into())
    }

    pub fn echo(&self, dir: &Path) -> Result<(), Box<dyn std::error::Error + Send + Sync>> {
        fs::write(dir.join("config.toml"), toml::to_string_pretty(self)?)?;
        Ok(())
    }
}

pub fn parse_mode_rule(s: &str) -> Result<ModeRule, String> {
    let (kind, value) = s
        .split_once(':')
        .ok_or_else(|| format!("expected threshold:<θ> or fixed:<r>, got {s:?}"))?;
    match kind {
        "threshold" => value
            .parse::<f64>()
            .ok()
            .filter(|t| *t > 0.0 && *t <= 1.0)
            .map(ModeRule::Threshold)
            .ok_or_else(|| format!("threshold must be in (0, 1], got {value:?}")),
        "fixed" => value
            .parse::<usize>()
            .ok()
            .filter(|r| *r > 0)
            .map(ModeRule::Fixed)
            .ok_or_else(|| format!("mode count must be a positive integer, got {value:?}")),
        _ => Err(format!("unknown mode rule {kind:?}")),
    }
}
