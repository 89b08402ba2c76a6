//! Balanced-detector front end: response kernel, trace synthesis, band-limited
//! electronic noise, common-mode leakage and ADC quantization.
//!
//! A record is built as the clean pulse train
//! `v(t) = sum_n kappa * I_d[n] * k(t - t_n)` with `t_n` on the repetition
//! grid, plus additive Gaussian noise filtered to the detector bandwidth,
//! then quantized to the configured ADC resolution. Kernels are stored
//! peak-aligned so each pulse's extremum lands exactly on its grid position.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::DetectionChain;
use crate::trace::VoltageTrace;

/// Electrical reference gains: kernel area is normalized to -1 at these
/// values, so `volts_per_photon` carries the absolute calibration and the
/// kernel scales linearly when the electronics are changed.
pub const REF_TRANSIMPEDANCE_OHMS: f64 = 2000.0;
pub const REF_AMP_GAIN: f64 = 21.0;

/// Relative magnitude below which kernel tails are truncated.
const KERNEL_TRUNCATION: f64 = 1e-6;

/// Analog response shape of the balanced detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelShape {
    /// Critically damped second-order low-pass; the default.
    SecondOrderLowpass,
    /// Gaussian impulse response of matching -3 dB bandwidth.
    Gaussian,
    /// Caller-provided samples at the trace sample rate.
    UserSampled(Vec<f64>),
}

/// Detector and digitizer configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorModel {
    /// -3 dB analog bandwidth in Hz.
    pub bandwidth_hz: f64,
    pub kernel_shape: KernelShape,
    /// RMS of the band-limited additive voltage noise per trace sample (V).
    pub electronic_noise_rms_v: f64,
    /// Common-mode rejection in dB of amplitude suppression; `inf` disables
    /// the leakage entirely.
    pub cmrr_db: f64,
    pub transimpedance_v_per_a: f64,
    pub amp_gain_v_per_v: f64,
    /// ADC resolution in bits (8 to 16).
    pub adc_bits: u8,
    /// ADC full-scale range: samples are clamped to +-adc_full_scale_v.
    pub adc_full_scale_v: f64,
    pub sample_rate_hz: f64,
    /// Pulse repetition period; must be an integer number of samples.
    pub pulse_period_s: f64,
    /// Position of the first pulse peak in the record; defaults to half a
    /// period so the first integration window stays in-record.
    pub first_pulse_offset_s: f64,
}

impl Default for DetectorModel {
    fn default() -> Self {
        let mut model = Self {
            bandwidth_hz: 80e6,
            kernel_shape: KernelShape::SecondOrderLowpass,
            electronic_noise_rms_v: 0.0,
            cmrr_db: 50.0,
            transimpedance_v_per_a: REF_TRANSIMPEDANCE_OHMS,
            amp_gain_v_per_v: REF_AMP_GAIN,
            adc_bits: 12,
            adc_full_scale_v: 0.2,
            sample_rate_hz: 5e9,
            pulse_period_s: 20e-9,
            first_pulse_offset_s: 10e-9,
        };
        // Default noise level reproduces an integrated electronic-noise
        // variance of 3.86e-4 V^2 per pulse window.
        model.electronic_noise_rms_v = noise_rms_for_window_variance(3.86e-4, &model)
            .expect("default detector model is valid");
        model
    }
}

impl DetectorModel {
    pub fn validate(&self) -> Result<()> {
        let finite = self.bandwidth_hz.is_finite()
            && self.electronic_noise_rms_v.is_finite()
            && self.transimpedance_v_per_a.is_finite()
            && self.amp_gain_v_per_v.is_finite()
            && self.adc_full_scale_v.is_finite()
            && self.sample_rate_hz.is_finite()
            && self.pulse_period_s.is_finite()
            && self.first_pulse_offset_s.is_finite();
        if !finite {
            return Err(Error::Configuration(
                "detector parameters must be finite (cmrr_db may be inf)".into(),
            ));
        }
        if self.bandwidth_hz <= 0.0 || self.sample_rate_hz <= 0.0 {
            return Err(Error::Configuration("bandwidth and sample rate must be > 0".into()));
        }
        if self.sample_rate_hz <= 2.0 * self.bandwidth_hz {
            return Err(Error::Configuration(format!(
                "sample rate {} must exceed twice the bandwidth {}",
                self.sample_rate_hz, self.bandwidth_hz
            )));
        }
        let period = self.pulse_period_s * self.sample_rate_hz;
        if (period - period.round()).abs() > 1e-6 * period.max(1.0) {
            return Err(Error::Configuration(format!(
                "pulse period must be an integer number of samples, got {period}"
            )));
        }
        if period.round() < 4.0 {
            return Err(Error::Configuration(
                "pulse period must span at least 4 samples".into(),
            ));
        }
        if !(8..=16).contains(&self.adc_bits) {
            return Err(Error::Configuration(format!(
                "adc_bits must lie in [8, 16], got {}",
                self.adc_bits
            )));
        }
        if self.cmrr_db.is_nan() || self.cmrr_db < 0.0 {
            return Err(Error::Configuration("cmrr_db must be >= 0".into()));
        }
        if self.adc_full_scale_v <= 0.0 {
            return Err(Error::Configuration("adc_full_scale_v must be > 0".into()));
        }
        if self.transimpedance_v_per_a <= 0.0 || self.amp_gain_v_per_v <= 0.0 {
            return Err(Error::Configuration("electrical gains must be > 0".into()));
        }
        if self.electronic_noise_rms_v < 0.0 {
            return Err(Error::Configuration("electronic_noise_rms_v must be >= 0".into()));
        }
        if self.first_pulse_offset_s < 0.0 || self.first_pulse_offset_s > self.pulse_period_s {
            return Err(Error::Configuration(
                "first pulse offset must lie within one period".into(),
            ));
        }
        Ok(())
    }

    pub fn period_samples(&self) -> usize {
        (self.pulse_period_s * self.sample_rate_hz).round() as usize
    }

    pub fn first_pulse_offset_samples(&self) -> usize {
        (self.first_pulse_offset_s * self.sample_rate_hz).round() as usize
    }

    /// ADC code width in volts.
    pub fn lsb_v(&self) -> f64 {
        2.0 * self.adc_full_scale_v / (1u64 << self.adc_bits) as f64
    }

    /// Amplitude suppression factor applied to common-mode fluctuations.
    pub fn common_mode_leak(&self) -> f64 {
        10f64.powf(-self.cmrr_db / 20.0)
    }

    fn gain_scale(&self) -> f64 {
        (self.transimpedance_v_per_a / REF_TRANSIMPEDANCE_OHMS)
            * (self.amp_gain_v_per_v / REF_AMP_GAIN)
    }
}

/// Sampled detector impulse response, stored peak-aligned: `samples[peak_index]`
/// is the (negative) extremum that lands on the pulse grid position.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseKernel {
    pub samples: Vec<f64>,
    pub peak_index: usize,
}

impl ResponseKernel {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Net area (volt-samples per photon unit); negative by convention.
    pub fn area(&self) -> f64 {
        self.samples.iter().sum()
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s * s).sum()
    }

    pub fn peak_value(&self) -> f64 {
        self.samples[self.peak_index]
    }

    /// Magnitude of the discrete-time frequency response at `freq_hz`.
    pub fn magnitude_at(&self, freq_hz: f64, sample_rate_hz: f64) -> f64 {
        let w = 2.0 * std::f64::consts::PI * freq_hz / sample_rate_hz;
        let mut re = 0.0;
        let mut im = 0.0;
        for (j, &s) in self.samples.iter().enumerate() {
            let phase = w * j as f64;
            re += s * phase.cos();
            im -= s * phase.sin();
        }
        (re * re + im * im).sqrt()
    }

    /// Frequency where the magnitude response has dropped 3 dB below DC,
    /// located by bisection (the shapes used here are monotone low-pass).
    pub fn minus_3db_hz(&self, sample_rate_hz: f64) -> Option<f64> {
        let dc = self.magnitude_at(0.0, sample_rate_hz);
        if dc <= 0.0 {
            return None;
        }
        let target = dc / 2f64.sqrt();
        let mut lo = 0.0;
        let mut hi = sample_rate_hz / 2.0;
        if self.magnitude_at(hi, sample_rate_hz) > target {
            return None;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.magnitude_at(mid, sample_rate_hz) > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(0.5 * (lo + hi))
    }
}

/// Build the sampled response kernel of a detector model.
///
/// Generated kernels have negative polarity and unit absolute area at the
/// reference electrical gains; tails below 1e-6 of the peak are truncated.
pub fn response_kernel(model: &DetectorModel) -> Result<ResponseKernel> {
    model.validate()?;
    let ts = 1.0 / model.sample_rate_hz;
    let shape: Vec<f64> = match &model.kernel_shape {
        KernelShape::SecondOrderLowpass => {
            // Critically damped: h(t) = w^2 t e^{-wt}; |H(f)| drops 3 dB at
            // w * sqrt(sqrt(2) - 1) / (2 pi).
            let w = 2.0 * std::f64::consts::PI * model.bandwidth_hz
                / (2f64.sqrt() - 1.0).sqrt();
            let peak = (1.0 / w / ts).max(1.0);
            let mut out = Vec::new();
            let mut j = 1usize;
            loop {
                let t = j as f64 * ts;
                let h = w * w * t * (-w * t).exp() * ts;
                out.push(h);
                // Past the peak, stop once the tail is negligible.
                if j as f64 > peak && h < KERNEL_TRUNCATION * w * (-1f64).exp() * ts {
                    break;
                }
                if j > 1_000_000 {
                    return Err(Error::Configuration(
                        "kernel support too long for the configured bandwidth".into(),
                    ));
                }
                j += 1;
            }
            out
        }
        KernelShape::Gaussian => {
            let tau = (2f64.ln()).sqrt() / (2.0 * std::f64::consts::PI * model.bandwidth_hz);
            let half = ((tau / ts) * (2.0 * (1.0 / KERNEL_TRUNCATION).ln()).sqrt()).ceil() as i64;
            (-half..=half)
                .map(|j| {
                    let t = j as f64 * ts;
                    (-t * t / (2.0 * tau * tau)).exp()
                })
                .collect()
        }
        KernelShape::UserSampled(samples) => {
            if samples.is_empty() {
                return Err(Error::Configuration("user kernel must not be empty".into()));
            }
            if samples.iter().any(|s| !s.is_finite()) {
                return Err(Error::Configuration("user kernel samples must be finite".into()));
            }
            samples.clone()
        }
    };

    // Trim tails below the truncation threshold.
    let peak_abs = shape.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    if peak_abs == 0.0 {
        return Err(Error::Configuration("kernel shape is identically zero".into()));
    }
    let keep = |s: &f64| s.abs() >= KERNEL_TRUNCATION * peak_abs;
    let start = shape.iter().position(keep).unwrap();
    let end = shape.iter().rposition(keep).unwrap();
    let trimmed = &shape[start..=end];

    let area: f64 = trimmed.iter().sum();
    if area.abs() < 1e-12 * peak_abs * trimmed.len() as f64 {
        return Err(Error::Configuration("kernel must have nonzero net area".into()));
    }
    // Negative polarity, unit area magnitude, scaled by the electrical gains.
    let norm = -model.gain_scale() / area;
    let samples: Vec<f64> = trimmed.iter().map(|s| s * norm).collect();

    let peak_index = samples
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| a.partial_cmp(b).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    Ok(ResponseKernel { samples, peak_index })
}

/// Clean (noise-free, unquantized) trace for the given per-pulse intensity
/// differences: each pulse adds `volts_per_photon * diff * kernel` with the
/// kernel peak on the grid position.
pub fn synthesize_clean(
    diffs: &[f64],
    chain: &DetectionChain,
    model: &DetectorModel,
) -> Result<Vec<f64>> {
    chain.validate()?;
    let kernel = response_kernel(model)?;
    let period = model.period_samples();
    let offset = model.first_pulse_offset_samples();
    let len = diffs.len() * period;
    let mut trace = vec![0.0f64; len];
    for (n, &diff) in diffs.iter().enumerate() {
        if diff == 0.0 {
            continue;
        }
        let amp = chain.volts_per_photon * diff;
        let center = (offset + n * period) as isize;
        for (j, &k) in kernel.samples.iter().enumerate() {
            let idx = center + j as isize - kernel.peak_index as isize;
            if idx >= 0 && (idx as usize) < len {
                trace[idx as usize] += amp * k;
            }
        }
    }
    Ok(trace)
}

/// Band-limited Gaussian noise: white samples filtered by the unit-energy
/// detector kernel, so the per-sample RMS of the output equals `rms`.
fn band_limited_noise(rms: f64, len: usize, kernel: &ResponseKernel, rng: &mut ChaCha12Rng) -> Vec<f64> {
    if rms == 0.0 || len == 0 {
        return vec![0.0; len];
    }
    let energy = kernel.energy().sqrt();
    let taps: Vec<f64> = kernel.samples.iter().map(|s| s / energy).collect();
    let l = taps.len();
    let white: Vec<f64> = (0..len + l - 1)
        .map(|_| rms * rng.sample::<f64, _>(StandardNormal))
        .collect();
    (0..len)
        .map(|i| {
            let mut acc = 0.0;
            for (j, &t) in taps.iter().enumerate() {
                acc += t * white[i + l - 1 - j];
            }
            acc
        })
        .collect()
}

fn quantize_into_trace(
    mut clean: Vec<f64>,
    model: &DetectorModel,
) -> VoltageTrace {
    let fs = model.adc_full_scale_v;
    let lsb = model.lsb_v();
    let mut saturated = 0usize;
    for v in clean.iter_mut() {
        if v.abs() > fs {
            saturated += 1;
        }
        let q = (*v / lsb).round() * lsb;
        *v = q.clamp(-fs, fs);
    }
    VoltageTrace {
        samples: clean,
        sample_rate_hz: model.sample_rate_hz,
        pulse_period_s: model.pulse_period_s,
        first_pulse_offset_s: model.first_pulse_offset_s,
        saturated_count: saturated,
    }
}

fn synthesize_with_rng(
    diffs: &[f64],
    chain: &DetectionChain,
    model: &DetectorModel,
    rng: &mut ChaCha12Rng,
) -> Result<VoltageTrace> {
    let mut clean = synthesize_clean(diffs, chain, model)?;
    if model.electronic_noise_rms_v > 0.0 {
        let kernel = response_kernel(model)?;
        let noise = band_limited_noise(model.electronic_noise_rms_v, clean.len(), &kernel, rng);
        for (c, n) in clean.iter_mut().zip(noise) {
            *c += n;
        }
    }
    Ok(quantize_into_trace(clean, model))
}

/// Synthesize a full detector record from per-pulse intensity differences:
/// clean pulse train, additive band-limited electronic noise, quantization.
/// Deterministic for a fixed seed.
pub fn synthesize_trace(
    diffs: &[f64],
    chain: &DetectionChain,
    model: &DetectorModel,
    seed: u64,
) -> Result<VoltageTrace> {
    if diffs.is_empty() {
        return Err(Error::Parameter("need at least one pulse".into()));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    synthesize_with_rng(diffs, chain, model, &mut rng)
}

/// Electronic-noise-only record (no light on the diodes).
pub fn synthesize_electronic_trace(
    model: &DetectorModel,
    n_pulses: usize,
    seed: u64,
) -> Result<VoltageTrace> {
    if n_pulses == 0 {
        return Err(Error::Parameter("need at least one pulse slot".into()));
    }
    model.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let len = n_pulses * model.period_samples();
    let mut clean = vec![0.0f64; len];
    if model.electronic_noise_rms_v > 0.0 {
        let kernel = response_kernel(model)?;
        let noise = band_limited_noise(model.electronic_noise_rms_v, len, &kernel, &mut rng);
        clean = noise;
    }
    Ok(quantize_into_trace(clean, model))
}

/// Shot-noise calibration record: classical light split 50:50 onto the two
/// diodes.
///
/// Per pulse, a common fractional power fluctuation (`classical_noise_frac`
/// RMS) rides on both diodes and is suppressed by the CMRR, while each diode
/// adds independent Gaussian-approximated Poissonian shot noise of
/// `power_per_pd` mean detected photons. With `gain_ratio != 1` the nominal
/// imbalance `N (1 - r)` leaks through unsuppressed.
pub fn synthesize_calibration_trace(
    power_per_pd: f64,
    classical_noise_frac: f64,
    model: &DetectorModel,
    chain: &DetectionChain,
    n_pulses: usize,
    seed: u64,
) -> Result<VoltageTrace> {
    if !(power_per_pd.is_finite() && power_per_pd >= 0.0) {
        return Err(Error::Parameter(format!(
            "power_per_pd must be >= 0, got {power_per_pd}"
        )));
    }
    if !(classical_noise_frac.is_finite() && classical_noise_frac >= 0.0) {
        return Err(Error::Parameter(format!(
            "classical_noise_frac must be >= 0, got {classical_noise_frac}"
        )));
    }
    if n_pulses == 0 {
        return Err(Error::Parameter("need at least one pulse".into()));
    }
    chain.validate()?;
    model.validate()?;

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let r = chain.gain_ratio;
    let leak = model.common_mode_leak();
    let shot = power_per_pd.sqrt();
    let diffs: Vec<f64> = (0..n_pulses)
        .map(|_| {
            let z0: f64 = rng.sample(StandardNormal);
            let z1: f64 = rng.sample(StandardNormal);
            let z2: f64 = rng.sample(StandardNormal);
            let delta = classical_noise_frac * z0;
            shot * z1 - r * shot * z2
                + power_per_pd * (1.0 - r) * (1.0 + delta)
                + leak * (1.0 + r) * power_per_pd * delta
        })
        .collect();
    synthesize_with_rng(&diffs, chain, model, &mut rng)
}

/// Expected variance contribution of the electronic noise to one pulse-window
/// integral, per unit noise variance (multiply by `rms^2`).
pub fn noise_window_variance_factor(model: &DetectorModel) -> Result<f64> {
    let kernel = response_kernel(model)?;
    let energy = kernel.energy().sqrt();
    let taps: Vec<f64> = kernel.samples.iter().map(|s| s / energy).collect();
    let l = taps.len();
    let w = model.period_samples();
    // e = sum_{i in [0,W)} sum_j taps[j] * white[i + L - 1 - j]
    // Var(e) = sum_m (sum of taps contributing to white[m])^2.
    let mut factor = 0.0;
    for m in 0..(w + l - 1) {
        let mut c = 0.0;
        for (j, &t) in taps.iter().enumerate() {
            // i = m - (L - 1) + j must lie in [0, W)
            let i = m as isize - (l as isize - 1) + j as isize;
            if i >= 0 && (i as usize) < w {
                c += t;
            }
        }
        factor += c * c;
    }
    Ok(factor)
}

/// Per-sample noise RMS that reproduces the requested electronic-noise
/// variance on pulse-window integrals.
pub fn noise_rms_for_window_variance(target_variance: f64, model: &DetectorModel) -> Result<f64> {
    if !(target_variance.is_finite() && target_variance >= 0.0) {
        return Err(Error::Parameter("target variance must be >= 0".into()));
    }
    let mut probe = model.clone();
    probe.electronic_noise_rms_v = 0.0;
    let factor = noise_window_variance_factor(&probe)?;
    Ok((target_variance / factor).sqrt())
}
