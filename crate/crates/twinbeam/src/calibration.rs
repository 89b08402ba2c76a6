//! Shot-noise-limit calibration: sweep the optical power on the balanced
//! detector, pool the variance of the windowed pulse integrals at each power,
//! fit variance versus power to a line and evaluate the shot-noise variance
//! at arbitrary power from the fit. The fitted intercept is the electronic
//! noise floor.

use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::daq::analyze_trace;
use crate::detector::{synthesize_calibration_trace, DetectorModel};
use crate::error::{Error, Result};
use crate::model::DetectionChain;
use crate::seed::{derive_seed, SeedDomain};

/// Canonical unit of the calibration power axis.
pub const POWER_UNIT: &str = "photons_per_pulse_per_pd";

/// Sweep configuration for a shot-noise calibration run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SnlCalibrationConfig {
    /// Mean detected photons per pulse per diode, one entry per sweep point.
    pub powers: Vec<f64>,
    /// Records synthesized and pooled per power.
    pub reps_per_power: usize,
    /// Pulses per record.
    pub pulses_per_record: usize,
    /// Fractional RMS of the common classical power fluctuation of the
    /// calibration light (rejected by the detector CMRR).
    pub classical_noise_frac: f64,
}

impl Default for SnlCalibrationConfig {
    fn default() -> Self {
        // 0 to twice the nominal operating power of ~1.07e4 detected
        // photons per pulse per diode.
        let operating = 10_710.0;
        Self {
            powers: (0..9).map(|i| operating * i as f64 / 4.0).collect(),
            reps_per_power: 20,
            pulses_per_record: 250,
            classical_noise_frac: 0.1,
        }
    }
}

/// Ordinary least-squares line fit of pooled variance versus power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationFit {
    /// V^2 sample^2 per photon.
    pub slope: f64,
    /// Electronic-noise floor, V^2 sample^2.
    pub intercept: f64,
    pub r_squared: f64,
    pub slope_stderr: f64,
    pub intercept_stderr: f64,
    /// (power, pooled variance) sweep points.
    pub points: Vec<(f64, f64)>,
    /// Unit of the power axis.
    pub power_unit: String,
}

impl CalibrationFit {
    pub fn max_power(&self) -> f64 {
        self.points.iter().map(|p| p.0).fold(0.0, f64::max)
    }

    fn t_critical(&self, confidence: f64) -> f64 {
        let dof = (self.points.len() as f64 - 2.0).max(1.0);
        let dist = StudentsT::new(0.0, 1.0, dof).expect("valid t distribution");
        dist.inverse_cdf(0.5 + confidence / 2.0)
    }

    /// 95% confidence interval of the fitted intercept.
    pub fn intercept_ci95(&self) -> (f64, f64) {
        let half = self.t_critical(0.95) * self.intercept_stderr;
        (self.intercept - half, self.intercept + half)
    }

    /// 95% confidence interval of the fitted slope.
    pub fn slope_ci95(&self) -> (f64, f64) {
        let half = self.t_critical(0.95) * self.slope_stderr;
        (self.slope - half, self.slope + half)
    }
}

/// Shot-noise variance predicted by a calibration fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnlPrediction {
    pub variance: f64,
    /// Set when the requested power lies beyond twice the calibrated range.
    pub extrapolated: bool,
}

/// Ordinary least squares of y on x with goodness of fit and standard errors.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<CalibrationFit> {
    if x.len() != y.len() {
        return Err(Error::Parameter("x and y lengths differ".into()));
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::Calibration(format!(
            "need at least two points for a line fit, got {n}"
        )));
    }
    let nf = n as f64;
    let mean_x = x.iter().sum::<f64>() / nf;
    let mean_y = y.iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (xi, yi) in x.iter().zip(y) {
        sxx += (xi - mean_x) * (xi - mean_x);
        sxy += (xi - mean_x) * (yi - mean_y);
        syy += (yi - mean_y) * (yi - mean_y);
    }
    if sxx == 0.0 {
        return Err(Error::Calibration(
            "all powers identical; cannot fit a line".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(xi, yi)| {
            let r = yi - (slope * xi + intercept);
            r * r
        })
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    let residual_var = if n > 2 { ss_res / (nf - 2.0) } else { 0.0 };
    let slope_stderr = (residual_var / sxx).sqrt();
    let intercept_stderr = (residual_var * (1.0 / nf + mean_x * mean_x / sxx)).sqrt();
    Ok(CalibrationFit {
        slope,
        intercept,
        r_squared,
        slope_stderr,
        intercept_stderr,
        points: x.iter().copied().zip(y.iter().copied()).collect(),
        power_unit: POWER_UNIT.to_string(),
    })
}

/// Run a full shot-noise calibration sweep.
///
/// For every power the configured number of records is synthesized, pushed
/// through the pulse pipeline, and all pulse integrals are pooled into one
/// unbiased variance; the (power, variance) points are then fitted by
/// ordinary least squares.
pub fn run_snl_calibration(
    config: &SnlCalibrationConfig,
    model: &DetectorModel,
    chain: &DetectionChain,
    master_seed: u64,
) -> Result<CalibrationFit> {
    let mut distinct = config.powers.clone();
    distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::Calibration(format!(
            "need at least 3 distinct powers, got {}",
            distinct.len()
        )));
    }
    if config.reps_per_power == 0 {
        return Err(Error::Parameter("reps_per_power must be >= 1".into()));
    }
    if config.pulses_per_record < 3 {
        return Err(Error::Parameter(
            "pulses_per_record must be >= 3 to keep interior pulses".into(),
        ));
    }

    let mut variances = Vec::with_capacity(config.powers.len());
    for (i, &power) in config.powers.iter().enumerate() {
        let mut pooled = Vec::new();
        for rep in 0..config.reps_per_power {
            let seed = derive_seed(
                master_seed,
                SeedDomain::Calibration,
                ((i as u64) << 32) | rep as u64,
            );
            let trace = synthesize_calibration_trace(
                power,
                config.classical_noise_frac,
                model,
                chain,
                config.pulses_per_record,
                seed,
            )?;
            pooled.extend(analyze_trace(&trace)?.integrals);
        }
        let n = pooled.len() as f64;
        let mean = pooled.iter().sum::<f64>() / n;
        let var = pooled.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (n - 1.0);
        variances.push(var);
    }
    let fit = linear_fit(&config.powers, &variances)?;
    if fit.slope <= 0.0 {
        return Err(Error::Calibration(format!(
            "fitted shot-noise slope {} is not positive; sweep is unusable",
            fit.slope
        )));
    }
    Ok(fit)
}

/// Evaluate the fitted shot-noise variance at the given power (same unit as
/// the fit's power axis).
pub fn snl_at_power(fit: &CalibrationFit, power: f64) -> Result<SnlPrediction> {
    if !(power.is_finite() && power >= 0.0) {
        return Err(Error::Parameter(format!("power must be >= 0, got {power}")));
    }
    Ok(SnlPrediction {
        variance: fit.slope * power + fit.intercept,
        extrapolated: power > 2.0 * fit.max_power(),
    })
}

const RECORD_VERSION: u32 = 1;

/// Persisted calibration record (versioned structured text).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRecord {
    pub version: u32,
    /// Unix timestamp of the run; excluded from reproducibility comparisons.
    pub created_unix_s: u64,
    pub master_seed: u64,
    pub config: SnlCalibrationConfig,
    pub fit: CalibrationFit,
}

impl CalibrationRecord {
    pub fn new(config: SnlCalibrationConfig, fit: CalibrationFit, master_seed: u64) -> Self {
        let created_unix_s = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Self {
            version: RECORD_VERSION,
            created_unix_s,
            master_seed,
            config,
            fit,
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let record: CalibrationRecord =
            toml::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        if record.version != RECORD_VERSION {
            return Err(Error::Format(format!(
                "unsupported calibration record version {}, expected {RECORD_VERSION}",
                record.version
            )));
        }
        Ok(record)
    }

    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        fs::write(path, self.to_toml()?)?;
        Ok(())
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line_is_recovered_exactly() {
        let x = vec![0.0, 1.0, 2.0, 3.0, 4.0];
        let y = x.clone(); // slope 1, intercept 0
        let fit = linear_fit(&x, &y).unwrap();
        assert_eq!(fit.slope, 1.0);
        assert_eq!(fit.intercept, 0.0);
        assert_eq!(fit.r_squared, 1.0);
        assert_eq!(fit.slope_stderr, 0.0);
    }

    #[test]
    fn degenerate_powers_fail() {
        let err = linear_fit(&[2.0, 2.0, 2.0], &[1.0, 1.1, 0.9]).unwrap_err();
        assert!(matches!(err, Error::Calibration(_)));
    }

    #[test]
    fn snl_prediction_is_affine() {
        let fit = linear_fit(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]).unwrap();
        assert_eq!(snl_at_power(&fit, 0.0).unwrap().variance, 1.0);
        assert_eq!(snl_at_power(&fit, 3.0).unwrap().variance, 7.0);
        assert!(!snl_at_power(&fit, 3.0).unwrap().extrapolated);
        assert!(snl_at_power(&fit, 4.1).unwrap().extrapolated);
        assert!(snl_at_power(&fit, -1.0).is_err());
    }

    #[test]
    fn sweep_needs_three_distinct_powers() {
        let config = SnlCalibrationConfig {
            powers: vec![5.0, 5.0],
            ..Default::default()
        };
        let err = run_snl_calibration(
            &config,
            &DetectorModel::default(),
            &DetectionChain::default(),
            1,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Calibration(_)));
    }

    #[test]
    fn record_round_trips_through_toml() {
        let fit = linear_fit(&[0.0, 1.0, 2.0, 3.0], &[0.5, 1.4, 2.6, 3.5]).unwrap();
        let record = CalibrationRecord::new(SnlCalibrationConfig::default(), fit, 42);
        let text = record.to_toml().unwrap();
        let back = CalibrationRecord::from_toml(&text).unwrap();
        assert_eq!(back, record);
    }

    #[test]
    fn record_rejects_unknown_version() {
        let fit = linear_fit(&[0.0, 1.0, 2.0], &[0.0, 1.0, 2.0]).unwrap();
        let mut record = CalibrationRecord::new(SnlCalibrationConfig::default(), fit, 42);
        record.version = 99;
        let text = toml::to_string_pretty(&record).unwrap();
        assert!(matches!(
            CalibrationRecord::from_toml(&text),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn intercept_ci_covers_known_intercept() {
        // Noisy synthetic line with known parameters.
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x
            .iter()
            .enumerate()
            .map(|(i, xi)| 2.0 * xi + 5.0 + if i % 2 == 0 { 0.3 } else { -0.3 })
            .collect();
        let fit = linear_fit(&x, &y).unwrap();
        let (lo, hi) = fit.intercept_ci95();
        assert!(lo < 5.0 && 5.0 < hi, "CI [{lo}, {hi}] misses 5.0");
    }
}
