//! Main configuration file (TOML). Every field has a documented default, so
//! an empty file is a valid config.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::alerting::{AlertError, SinkConfig, Transport};
use crate::tuner::TunerConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Sink(#[from] AlertError),
}

fn default_window_len() -> f64 {
    60.0
}
fn default_slot_len() -> u32 {
    1800
}
fn default_capacity() -> f64 {
    1e7
}
fn default_cooldown() -> f64 {
    300.0
}
fn default_epsilon() -> f64 {
    1.0
}
fn default_profile_path() -> PathBuf {
    PathBuf::from("profile.txt")
}
fn default_log_path() -> PathBuf {
    PathBuf::from("alerts.log")
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TunerSection {
    #[serde(default = "TunerSection::default_eta")]
    pub eta: f64,
    #[serde(default = "TunerSection::default_disp")]
    pub max_total_disp: f64,
    #[serde(default = "TunerSection::default_margin")]
    pub keep_order_margin: f64,
}

impl TunerSection {
    fn default_eta() -> f64 {
        TunerConfig::default().eta
    }
    fn default_disp() -> f64 {
        TunerConfig::default().max_total_disp
    }
    fn default_margin() -> f64 {
        TunerConfig::default().keep_order_margin
    }
}

impl Default for TunerSection {
    fn default() -> Self {
        let d = TunerConfig::default();
        Self { eta: d.eta, max_total_disp: d.max_total_disp, keep_order_margin: d.keep_order_margin }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields)]
pub struct SinksSection {
    #[serde(default = "default_log_path")]
    pub log_path: PathBuf,
    /// Descriptor: `cmd:<shell command>` or `http://host/path`.
    pub email: Option<String>,
    pub sms: Option<String>,
}

#[derive(Debug, Clone, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields)]
pub struct RulebaseSection {
    pub ip_count: Option<PathBuf>,
    pub ipx_count: Option<PathBuf>,
    pub utilization: Option<PathBuf>,
    pub bytes_per_sec: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default = "default_window_len")]
    pub window_len: f64,
    #[serde(default = "default_slot_len")]
    pub slot_len: u32,
    #[serde(default)]
    pub utc_offset: f64,
    #[serde(default = "default_capacity")]
    pub link_capacity_bps: f64,
    #[serde(default = "default_cooldown")]
    pub cooldown: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Stratify baseline slots by day of week.
    #[serde(default)]
    pub weekly: bool,
    #[serde(default = "default_profile_path")]
    pub profile_path: PathBuf,
    #[serde(default)]
    pub tuner: TunerSection,
    #[serde(default)]
    pub sinks: SinksSection,
    #[serde(default)]
    pub rulebases: RulebaseSection,
}

impl Default for Config {
    fn default() -> Self {
        toml::from_str("").expect("empty config is valid")
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let cfg: Config = toml::from_str(&fs::read_to_string(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.window_len.is_nan() || self.window_len <= 0.0 {
            return Err(ConfigError::Invalid("window_len must be positive".into()));
        }
        if self.slot_len == 0 || !86_400u32.is_multiple_of(self.slot_len) {
            return Err(ConfigError::Invalid(format!(
                "slot_len {} must divide 86400",
                self.slot_len
            )));
        }
        if self.link_capacity_bps.is_nan() || self.link_capacity_bps <= 0.0 {
            return Err(ConfigError::Invalid("link_capacity_bps must be positive".into()));
        }
        if self.cooldown < 0.0 {
            return Err(ConfigError::Invalid("cooldown must be >= 0".into()));
        }
        self.tuner_config()
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.sink_config()?;
        Ok(())
    }

    pub fn tuner_config(&self) -> TunerConfig {
        TunerConfig {
            eta: self.tuner.eta,
            max_total_disp: self.tuner.max_total_disp,
            keep_order_margin: self.tuner.keep_order_margin,
        }
    }

    pub fn sink_config(&self) -> Result<SinkConfig, ConfigError> {
        let parse = |d: &Option<String>| -> Result<Option<Transport>, ConfigError> {
            d.as_deref().map(Transport::parse).transpose().map_err(Into::into)
        };
        Ok(SinkConfig {
            log_path: self.sinks.log_path.clone(),
            email: parse(&self.sinks.email)?,
            sms: parse(&self.sinks.sms)?,
        })
    }

    pub fn rulebase_path(&self, kind: crate::rulebook::ModuleKind) -> Option<&PathBuf> {
        use crate::rulebook::ModuleKind::*;
        match kind {
            IpCount => self.rulebases.ip_count.as_ref(),
            IpxCount => self.rulebases.ipx_count.as_ref(),
            Utilization => self.rulebases.utilization.as_ref(),
            BytesPerSec => self.rulebases.bytes_per_sec.as_ref(),
        }
    }
}
