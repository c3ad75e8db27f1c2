use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ModelError;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    /// Satellite and weather encoders fused before attention.
    #[default]
    #[serde(rename = "wstatt")]
    Wstatt,
    /// Satellite branch only.
    #[serde(rename = "statt_ablation", alias = "statt")]
    StattAblation,
}

impl FromStr for Mode {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "wstatt" => Ok(Mode::Wstatt),
            "statt" | "statt_ablation" => Ok(Mode::StattAblation),
            other => Err(ModelError::Config(format!("unknown mode {other:?} (expected wstatt or statt)"))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Wstatt => "wstatt",
            Mode::StattAblation => "statt_ablation",
        })
    }
}

fn default_widths() -> Vec<usize> {
    vec![32, 64, 128]
}
fn default_hidden() -> usize {
    128
}
fn default_weather_hidden() -> usize {
    32
}
fn default_mode() -> Mode {
    Mode::Wstatt
}
fn default_step() -> u32 {
    15
}
fn default_patch() -> usize {
    64
}

/// Network shape. The attention layer is a single linear map from the
/// fused channels to one logit, so it has no width of its own.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub sat_channels: usize,
    pub weather_channels: usize,
    /// Output classes including Unknown.
    pub classes: usize,
    #[serde(default = "default_widths")]
    pub conv_widths: Vec<usize>,
    /// Satellite BiLSTM hidden size per direction.
    #[serde(default = "default_hidden")]
    pub lstm_hidden: usize,
    /// Weather BiLSTM hidden size per direction.
    #[serde(default = "default_weather_hidden")]
    pub weather_hidden: usize,
    #[serde(default = "default_mode")]
    pub mode: Mode,
    #[serde(default = "default_step")]
    pub sat_step_days: u32,
    #[serde(default = "default_patch")]
    pub patch_px: usize,
}

impl ModelConfig {
    /// Default widths and hidden sizes for the given input/output sizes.
    pub fn new(sat_channels: usize, weather_channels: usize, classes: usize, mode: Mode) -> Self {
        ModelConfig {
            sat_channels,
            weather_channels,
            classes,
            conv_widths: default_widths(),
            lstm_hidden: default_hidden(),
            weather_hidden: default_weather_hidden(),
            mode,
            sat_step_days: default_step(),
            patch_px: default_patch(),
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::Config(m));
        if self.conv_widths.is_empty() || self.conv_widths.contains(&0) {
            return bad(format!("conv_widths must be non-empty and positive, got {:?}", self.conv_widths));
        }
        if self.classes < 2 {
            return bad(format!("need at least 2 classes, got {}", self.classes));
        }
        if self.sat_channels == 0 || self.lstm_hidden == 0 || self.sat_step_days == 0 {
            return bad("sat_channels, lstm_hidden and sat_step_days must be positive".into());
        }
        if self.mode == Mode::Wstatt && (self.weather_channels == 0 || self.weather_hidden == 0) {
            return bad("wstatt mode needs positive weather_channels and weather_hidden".into());
        }
        let div = 1usize << self.levels();
        if self.patch_px == 0 || self.patch_px % div != 0 {
            return bad(format!("patch_px {} must be a positive multiple of 2^{} = {div}", self.patch_px, self.levels()));
        }
        Ok(())
    }

    pub fn levels(&self) -> usize {
        self.conv_widths.len()
    }

    /// Channels of the encoder input at level `l` (also the skip width).
    pub fn skip_channels(&self, l: usize) -> usize {
        if l == 0 {
            self.sat_channels
        } else {
            self.conv_widths[l - 1]
        }
    }

    /// Channels entering attention: `2·Dh` plus `2·Dh_wx` in wstatt mode.
    pub fn fused_channels(&self) -> usize {
        2 * self.lstm_hidden
            + match self.mode {
                Mode::Wstatt => 2 * self.weather_hidden,
                Mode::StattAblation => 0,
            }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_fused_width() {
        let c = ModelConfig::new(10, 7, 6, Mode::Wstatt);
        assert_eq!(c.fused_channels(), 320);
        assert_eq!(ModelConfig { mode: Mode::StattAblation, ..c }.fused_channels(), 256);
    }

    #[test]
    fn patch_must_divide() {
        let mut c = ModelConfig::new(10, 7, 6, Mode::Wstatt);
        c.patch_px = 60;
        assert!(c.validate().is_err());
        c.patch_px = 64;
        c.validate().unwrap();
    }

    #[test]
    fn unknown_keys_rejected() {
        let j = r#"{"sat_channels":10,"weather_channels":7,"classes":6,"lstm_hiden":3}"#;
        assert!(serde_json::from_str::<ModelConfig>(j).is_err());
        let j = r#"{"sat_channels":10,"weather_channels":7,"classes":6,"mode":"statt"}"#;
        assert_eq!(serde_json::from_str::<ModelConfig>(j).unwrap().mode, Mode::StattAblation);
    }
}
