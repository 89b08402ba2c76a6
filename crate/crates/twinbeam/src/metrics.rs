//! Squeezing metrics: noise-ratio estimation with electronic-noise
//! subtraction, dB conversion, detection-loss correction and the
//! frequency-domain band-integrated estimate.


use crate::error::{Error, Result};
use crate::psd::ensemble_psd;
use crate::trace::VoltageTrace;

/// Ratio expressed in decibels.
pub fn db(ratio: f64) -> f64 {
    10.0 * ratio.log10()
}

/// Outcome of a squeezing measurement on windowed pulse integrals.
///
/// The electronic-noise variance is subtracted from both the measured
/// intensity-difference variance and the shot-noise reference:
/// `ratio = (var_id - var_en) / (var_snl - var_en)`. When the measured
/// variance does not exceed the electronic floor no ratio is emitted and the
/// result carries the `unphysical_subtraction` flag instead.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SqueezingResult {
    /// Variance of the intensity-difference pulse integrals (V^2 sample^2).
    pub var_id: f64,
    /// Shot-noise-limit variance at the same total detected power.
    pub var_snl: f64,
    /// Electronic-noise variance of the detection system.
    pub var_en: f64,
    /// Noise ratio; `None` when the subtraction is unphysical.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio_db: Option<f64>,
    /// Loss-corrected ratio, present after [`SqueezingResult::with_loss_correction`].
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corrected: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corrected_db: Option<f64>,
    /// Mean detection efficiency used for the correction.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta_bar: Option<f64>,
    pub unphysical_subtraction: bool,
    pub unphysical_correction: bool,
}

/// Electronic-noise-subtracted squeezing ratio.
///
/// Errors when the shot-noise reference does not exceed the electronic
/// floor (the calibration is unusable); flags the result instead when only
/// the measured variance fails to.
pub fn compute_rt(var_id: f64, var_snl: f64, var_en: f64) -> Result<SqueezingResult> {
    for (name, v) in [("var_id", var_id), ("var_snl", var_snl), ("var_en", var_en)] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::Parameter(format!("{name} must be finite and >= 0, got {v}")));
        }
    }
    if var_snl <= var_en {
        return Err(Error::Calibration(format!(
            "shot-noise variance {var_snl} does not exceed the electronic floor {var_en}"
        )));
    }
    let mut result = SqueezingResult {
        var_id,
        var_snl,
        var_en,
        ratio: None,
        ratio_db: None,
        corrected: None,
        corrected_db: None,
        eta_bar: None,
        unphysical_subtraction: false,
        unphysical_correction: false,
    };
    if var_id <= var_en {
        result.unphysical_subtraction = true;
        return Ok(result);
    }
    let ratio = (var_id - var_en) / (var_snl - var_en);
    result.ratio = Some(ratio);
    result.ratio_db = Some(db(ratio));
    Ok(result)
}

/// Outcome of inverting the detection-loss channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossCorrection {
    Corrected { ratio: f64, ratio_db: f64 },
    /// The measured ratio sits below the vacuum floor `1 - eta`; no finite
    /// source ratio reproduces it.
    Unphysical,
}

/// Infer the source noise ratio from a measured one by inverting the loss
/// channel of mean efficiency `eta_bar`:
/// `corrected = (ratio - (1 - eta_bar)) / eta_bar`.
pub fn loss_correct(ratio: f64, eta_bar: f64) -> Result<LossCorrection> {
    if !(eta_bar.is_finite() && eta_bar > 0.0 && eta_bar <= 1.0) {
        return Err(Error::Parameter(format!(
            "eta_bar must lie in (0, 1], got {eta_bar}"
        )));
    }
    if !(ratio.is_finite() && ratio > 0.0) {
        return Err(Error::Parameter(format!("ratio must be > 0, got {ratio}")));
    }
    let corrected = (ratio - (1.0 - eta_bar)) / eta_bar;
    if corrected <= 0.0 {
        return Ok(LossCorrection::Unphysical);
    }
    Ok(LossCorrection::Corrected {
        ratio: corrected,
        ratio_db: db(corrected),
    })
}

impl SqueezingResult {
    /// Attach the loss-corrected ratio for the given mean efficiency.
    pub fn with_loss_correction(mut self, eta_bar: f64) -> Result<Self> {
        self.eta_bar = Some(eta_bar);
        let Some(ratio) = self.ratio else {
            return Ok(self);
        };
        match loss_correct(ratio, eta_bar)? {
            LossCorrection::Corrected { ratio, ratio_db } => {
                self.corrected = Some(ratio);
                self.corrected_db = Some(ratio_db);
            }
            LossCorrection::Unphysical => {
                self.unphysical_correction = true;
            }
        }
        Ok(self)
    }
}

/// Frequency-domain noise ratio around `center_hz`.
///
/// Integrates the ensemble PSD of each group over the analysis band and
/// forms `(P_signal - P_electronic) / (P_snl - P_electronic)`, the spectral
/// analog of the windowed-integral ratio. The returned value can be <= 0
/// when the signal ensemble sits below the electronic floor in the band.
pub fn freq_domain_ratio(
    signal: &[VoltageTrace],
    snl: &[VoltageTrace],
    electronic: &[VoltageTrace],
    center_hz: f64,
    bandwidth_hz: f64,
) -> Result<f64> {
    if !(center_hz.is_finite() && bandwidth_hz.is_finite() && bandwidth_hz > 0.0) {
        return Err(Error::Parameter("invalid analysis band".into()));
    }
    let lo = center_hz - bandwidth_hz / 2.0;
    let hi = center_hz + bandwidth_hz / 2.0;
    if lo <= 0.0 {
        return Err(Error::Parameter(format!(
            "band [{lo}, {hi}] must exclude DC"
        )));
    }
    let p_signal = ensemble_psd(signal)?.band_power(lo, hi)?;
    let p_snl = ensemble_psd(snl)?.band_power(lo, hi)?;
    let p_elec = ensemble_psd(electronic)?.band_power(lo, hi)?;
    let denom = p_snl - p_elec;
    if denom <= 0.0 {
        return Err(Error::Calibration(
            "shot-noise band power does not exceed the electronic floor".into(),
        ));
    }
    Ok((p_signal - p_elec) / denom)
}
