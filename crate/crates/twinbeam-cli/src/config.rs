//! Scenario configuration: a TOML file with nested sections, every field
//! optional with defaults anchored to the reference measurement (20 ns
//! period at 5 GS/s, 250 pulses per 25 k-sample record, 1000 repetitions,
//! 80 MHz detector bandwidth, 12-bit digitizer).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use twinbeam::calibration::SnlCalibrationConfig;
use twinbeam::detector::DetectorModel;
use twinbeam::error::{Error, Result};
use twinbeam::model::{DetectionChain, FopaParams, GainPowerMap};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DaqConfig {
    /// Pulse pairs per acquisition record.
    pub pulses_per_record: usize,
    /// Records per run.
    pub records: usize,
}

impl Default for DaqConfig {
    fn default() -> Self {
        Self {
            pulses_per_record: 250,
            records: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MeasureConfig {
    /// Amplifier gains to sweep.
    pub gains: Vec<f64>,
    /// Add attenuation to the brighter channel so the mean recorded
    /// intensity difference vanishes, as in the reference procedure.
    pub auto_balance: bool,
    pub histogram_bins: usize,
}

impl Default for MeasureConfig {
    fn default() -> Self {
        Self {
            gains: vec![20.0, 30.0, 40.0, 50.0, 64.0, 80.0],
            auto_balance: true,
            histogram_bins: 80,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FrequencyConfig {
    /// Center of the analysis band.
    pub center_hz: f64,
    pub bandwidth_hz: f64,
    /// Channel efficiencies of the slower, high-efficiency detector used
    /// for the frequency-domain comparison.
    pub eta_signal: f64,
    pub eta_idler: f64,
}

impl Default for FrequencyConfig {
    fn default() -> Self {
        Self {
            center_hz: 2.5e6,
            bandwidth_hz: 1e6,
            eta_signal: 0.91,
            eta_idler: 0.89,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub master_seed: u64,
    /// Rayon worker threads; 0 keeps the library default.
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            master_seed: 1550,
            workers: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub fopa: FopaParams,
    pub detection: DetectionChain,
    pub detector: DetectorModel,
    pub daq: DaqConfig,
    pub calibration: SnlCalibrationConfig,
    pub measure: MeasureConfig,
    pub frequency: FrequencyConfig,
    pub gain_map: GainPowerMap,
    pub run: RunConfig,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: ScenarioConfig =
            toml::from_str(text).map_err(|e| Error::Configuration(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self> {
        let text = fs::read_to_string(&path).map_err(|e| {
            Error::Io(std::io::Error::new(
                e.kind(),
                format!("cannot read config {}: {e}", path.as_ref().display()),
            ))
        })?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.fopa.validate()?;
        self.detection.validate()?;
        self.detector.validate()?;
        if self.daq.pulses_per_record < 3 {
            return Err(Error::Configuration(
                "daq.pulses_per_record must be >= 3".into(),
            ));
        }
        if self.daq.records == 0 {
            return Err(Error::Configuration("daq.records must be >= 1".into()));
        }
        if self.measure.histogram_bins == 0 {
            return Err(Error::Configuration(
                "measure.histogram_bins must be >= 1".into(),
            ));
        }
        Ok(())
    }

    /// Canonical serialized form of the resolved configuration.
    pub fn canonical_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Short hash of the resolved configuration, embedded in every output.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_toml().as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_mirror_reference_geometry() {
        let config = ScenarioConfig::default();
        assert_eq!(config.daq.pulses_per_record, 250);
        assert_eq!(config.daq.records, 1000);
        assert_eq!(config.detector.pulse_period_s, 20e-9);
        assert_eq!(config.detector.sample_rate_hz, 5e9);
        assert_eq!(config.detector.bandwidth_hz, 80e6);
        assert_eq!(config.detector.adc_bits, 12);
        assert_eq!(
            config.daq.pulses_per_record * config.detector.period_samples(),
            25_000
        );
        config.validate().unwrap();
    }

    #[test]
    fn partial_toml_fills_defaults() {
        let config = ScenarioConfig::from_toml(
            "[fopa]\ngain = 32.0\n\n[run]\nmaster_seed = 7\n",
        )
        .unwrap();
        assert_eq!(config.fopa.gain, 32.0);
        assert_eq!(config.run.master_seed, 7);
        assert_eq!(config.daq.records, 1000);
    }

    #[test]
    fn bad_toml_is_a_configuration_error() {
        assert!(matches!(
            ScenarioConfig::from_toml("[fopa]\ngain = \"not a number\""),
            Err(Error::Configuration(_))
        ));
        assert!(matches!(
            ScenarioConfig::from_toml("[fopa]\ngain = 0.2"),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn hash_tracks_content() {
        let a = ScenarioConfig::default();
        let mut b = ScenarioConfig::default();
        assert_eq!(a.hash(), b.hash());
        b.fopa.gain = 32.0;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn config_round_trips_through_toml() {
        let config = ScenarioConfig::default();
        let text = config.canonical_toml();
        let back = ScenarioConfig::from_toml(&text).unwrap();
        assert_eq!(back, config);
    }
}
