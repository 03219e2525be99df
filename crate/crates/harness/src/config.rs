//! Experiment configuration: defaults, TOML file loading, and validation.
//!
//! Every knob that affects an experiment's output lives here, so a run is
//! reproducible from the config file and nothing else. CLI flags override
//! individual fields after the file is loaded.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::HarnessError;

/// Which study a run belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    TrackingAccuracy,
    ServoAccuracy,
    NccStability,
}

impl ExperimentKind {
    pub fn label(self) -> &'static str {
        match self {
            ExperimentKind::TrackingAccuracy => "tracking",
            ExperimentKind::ServoAccuracy => "servo",
            ExperimentKind::NccStability => "ncc",
        }
    }
}

/// Scripted tissue motion magnitude and period.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileSelection {
    /// No motion; baseline runs.
    Static,
    /// 3 mm peak to peak over a 3 s period.
    #[value(alias = "1")]
    Profile1,
    /// 3 mm peak to peak over a 5 s period.
    #[value(alias = "2")]
    Profile2,
    /// 5 mm peak to peak over a 5 s period.
    #[value(alias = "3")]
    Profile3,
}

impl ProfileSelection {
    pub fn label(self) -> &'static str {
        match self {
            ProfileSelection::Static => "static",
            ProfileSelection::Profile1 => "profile1",
            ProfileSelection::Profile2 => "profile2",
            ProfileSelection::Profile3 => "profile3",
        }
    }
}

/// Direction of the scripted motion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum MotionAxis {
    X,
    Y,
    Z,
    /// Random smooth motion with the profile's RMS magnitude on all axes.
    FreeForm,
}

impl MotionAxis {
    pub fn label(self) -> &'static str {
        match self {
            MotionAxis::X => "x",
            MotionAxis::Y => "y",
            MotionAxis::Z => "z",
            MotionAxis::FreeForm => "freeform",
        }
    }
}

/// Complete description of one experiment run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub profile: ProfileSelection,
    pub axis: MotionAxis,
    /// Simulated run length in seconds.
    pub duration_s: f64,
    /// Master seed; tracker, depth noise, and free-form motion streams are
    /// derived from it.
    pub seed: u64,
    /// Depth noise applied to every rendered point cloud (mm).
    pub noise_sigma_mm: f64,
    /// Seed of the phantom geometry itself (kept apart from `seed` so the
    /// same tissue can be re-scanned under different noise draws).
    pub phantom_seed: u64,
    /// Robot plant first-order time constant (s).
    pub plant_time_constant_s: f64,
    /// Robot plant command transport delay (s).
    pub plant_latency_s: f64,
    /// Age beyond which live transforms and estimates are rejected (s).
    pub stale_timeout_s: f64,
    /// Directory the CSV and JSON reports are written into.
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            kind: ExperimentKind::TrackingAccuracy,
            profile: ProfileSelection::Profile1,
            axis: MotionAxis::X,
            duration_s: 30.0,
            seed: 7,
            noise_sigma_mm: 0.3,
            phantom_seed: 2024,
            plant_time_constant_s: 0.08,
            plant_latency_s: 0.04,
            stale_timeout_s: 0.5,
            out_dir: PathBuf::from("runs"),
        }
    }
}

impl ExperimentConfig {
    /// Reads a TOML config file. Missing keys fall back to defaults;
    /// unknown keys are rejected so typos do not silently revert a knob.
    pub fn from_toml_file(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            HarnessError::Io(format!("reading config {}: {e}", path.display()))
        })?;
        let config: ExperimentConfig = toml::from_str(&text).map_err(|e| {
            HarnessError::Config(format!("parsing config {}: {e}", path.display()))
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return Err(HarnessError::Config(format!(
                "duration_s must be positive and finite, got {}",
                self.duration_s
            )));
        }
        if !(self.noise_sigma_mm >= 0.0 && self.noise_sigma_mm.is_finite()) {
            return Err(HarnessError::Config(format!(
                "noise_sigma_mm must be non-negative, got {}",
                self.noise_sigma_mm
            )));
        }
        if !(self.plant_time_constant_s >= 0.0 && self.plant_time_constant_s.is_finite()) {
            return Err(HarnessError::Config(format!(
                "plant_time_constant_s must be non-negative, got {}",
                self.plant_time_constant_s
            )));
        }
        if !(self.plant_latency_s >= 0.0 && self.plant_latency_s.is_finite()) {
            return Err(HarnessError::Config(format!(
                "plant_latency_s must be non-negative, got {}",
                self.plant_latency_s
            )));
        }
        if !(self.stale_timeout_s > 0.0 && self.stale_timeout_s.is_finite()) {
            return Err(HarnessError::Config(format!(
                "stale_timeout_s must be positive, got {}",
                self.stale_timeout_s
            )));
        }
        Ok(())
    }

    /// File stem shared by all reports of this run, e.g. `profile1_x`.
    pub fn trial_label(&self) -> String {
        match self.profile {
            ProfileSelection::Static => "static".to_string(),
            _ => format!("{}_{}", self.profile.label(), self.axis.label()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_pass_validation() {
        ExperimentConfig::default().validate().unwrap();
    }

    #[test]
    fn toml_round_trip_preserves_every_field() {
        let config = ExperimentConfig {
            kind: ExperimentKind::NccStability,
            profile: ProfileSelection::Profile3,
            axis: MotionAxis::FreeForm,
            duration_s: 12.5,
            seed: 99,
            ..ExperimentConfig::default()
        };
        let text = toml::to_string(&config).unwrap();
        let back: ExperimentConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, config);
    }

    #[test]
    fn partial_toml_fills_in_defaults() {
        let config: ExperimentConfig =
            toml::from_str("profile = \"profile2\"\nduration_s = 5.0\n").unwrap();
        assert_eq!(config.profile, ProfileSelection::Profile2);
        assert_eq!(config.duration_s, 5.0);
        assert_eq!(config.seed, ExperimentConfig::default().seed);
        assert_eq!(config.noise_sigma_mm, 0.3);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = toml::from_str::<ExperimentConfig>("duration = 5.0\n");
        assert!(err.is_err());
    }

    #[test]
    fn invalid_values_fail_validation() {
        let config = ExperimentConfig { duration_s: 0.0, ..ExperimentConfig::default() };
        assert!(config.validate().is_err());
        let config =
            ExperimentConfig { noise_sigma_mm: -0.1, ..ExperimentConfig::default() };
        assert!(config.validate().is_err());
        let config =
            ExperimentConfig { stale_timeout_s: 0.0, ..ExperimentConfig::default() };
        assert!(config.validate().is_err());
    }

    #[test]
    fn trial_labels_are_filename_safe() {
        let mut config = ExperimentConfig::default();
        assert_eq!(config.trial_label(), "profile1_x");
        config.profile = ProfileSelection::Static;
        assert_eq!(config.trial_label(), "static");
        config.profile = ProfileSelection::Profile3;
        config.axis = MotionAxis::FreeForm;
        assert_eq!(config.trial_label(), "profile3_freeform");
    }
}
