//! Linearized Gaussian statistics of seeded parametric-amplifier twin beams.
//!
//! A bright coherent seed of `n0` photons per pulse enters an amplifier of
//! power gain `g`; the amplified signal and the generated idler leave with
//! photon numbers whose means, variances and cross covariance are linear in
//! `n0`. Photon-number fluctuations are treated as continuous Gaussian
//! variables around large means, which is accurate when the seed carries at
//! least a few hundred photons. On top of the ideal amplifier the model
//! exposes two impairment knobs: a variance multiplier `seed_excess_noise`
//! applied to all squeezer-output second moments, and additive Poissonian
//! background photons per channel (`raman_signal` / `raman_idler`).
//!
//! The module predicts the intensity-difference noise ratio after lossy
//! detection, solves for the electronic gain ratio that minimizes it, and
//! provides a seeded Monte-Carlo pulse-pair sampler used as the statistical
//! oracle for the downstream trace pipeline.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Seed-photon count below which linearized results are flagged unreliable:
/// relative fluctuations ~1/sqrt(n0) are no longer small.
pub const LINEARIZATION_MIN_SEED_PHOTONS: f64 = 100.0;

/// Source parameters of the pulsed parametric amplifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FopaParams {
    /// Power gain g (>= 1); g = 1 means the seed passes through unamplified.
    pub gain: f64,
    /// Mean photons per pulse in the injected seed (> 0).
    pub seed_photons: f64,
    /// Variance multiplier on the squeezer-output second moments
    /// (>= 1; 1 = shot-limited seed).
    pub seed_excess_noise: f64,
    /// Mean uncorrelated background photons per pulse added to the signal
    /// channel before detection (>= 0).
    pub raman_signal: f64,
    /// Background photons per pulse added to the idler channel (>= 0).
    pub raman_idler: f64,
}

impl Default for FopaParams {
    fn default() -> Self {
        Self {
            gain: 64.0,
            seed_photons: 250.0,
            seed_excess_noise: 1.0,
            raman_signal: 0.0,
            raman_idler: 0.0,
        }
    }
}

impl FopaParams {
    pub fn new(gain: f64, seed_photons: f64) -> Self {
        Self {
            gain,
            seed_photons,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all_finite = self.gain.is_finite()
            && self.seed_photons.is_finite()
            && self.seed_excess_noise.is_finite()
            && self.raman_signal.is_finite()
            && self.raman_idler.is_finite();
        if !all_finite {
            return Err(Error::Parameter("source parameters must be finite".into()));
        }
        if self.gain < 1.0 {
            return Err(Error::Parameter(format!("gain must be >= 1, got {}", self.gain)));
        }
        if self.seed_photons <= 0.0 {
            return Err(Error::Parameter(format!(
                "seed_photons must be > 0, got {}",
                self.seed_photons
            )));
        }
        if self.seed_excess_noise < 1.0 {
            return Err(Error::Parameter(format!(
                "seed_excess_noise must be >= 1, got {}",
                self.seed_excess_noise
            )));
        }
        if self.raman_signal < 0.0 || self.raman_idler < 0.0 {
            return Err(Error::Parameter("raman photon terms must be >= 0".into()));
        }
        Ok(())
    }

    /// True when the seed is bright enough for the linearization to hold.
    pub fn linearization_valid(&self) -> bool {
        self.seed_photons >= LINEARIZATION_MIN_SEED_PHOTONS
    }
}

/// Detection chain seen by one signal/idler pulse pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectionChain {
    /// Overall signal-channel detection efficiency in [0, 1].
    pub eta_signal: f64,
    /// Overall idler-channel detection efficiency in [0, 1].
    pub eta_idler: f64,
    /// Electronic gain ratio r applied to the idler photocurrent before
    /// subtraction (> 0).
    pub gain_ratio: f64,
    /// Conversion from one detected photon to integrated pulse area,
    /// in volt-sample units per photon (> 0).
    pub volts_per_photon: f64,
}

impl Default for DetectionChain {
    fn default() -> Self {
        Self {
            eta_signal: 0.70,
            eta_idler: 0.68,
            gain_ratio: 1.0,
            volts_per_photon: 1.69e-4,
        }
    }
}

impl DetectionChain {
    pub fn validate(&self) -> Result<()> {
        let all_finite = self.eta_signal.is_finite()
            && self.eta_idler.is_finite()
            && self.gain_ratio.is_finite()
            && self.volts_per_photon.is_finite();
        if !all_finite {
            return Err(Error::Parameter("detection parameters must be finite".into()));
        }
        if !(0.0..=1.0).contains(&self.eta_signal) || !(0.0..=1.0).contains(&self.eta_idler) {
            return Err(Error::Parameter(format!(
                "efficiencies must lie in [0, 1], got eta_signal={}, eta_idler={}",
                self.eta_signal, self.eta_idler
            )));
        }
        if self.gain_ratio <= 0.0 {
            return Err(Error::Parameter(format!(
                "gain_ratio must be > 0, got {}",
                self.gain_ratio
            )));
        }
        if self.volts_per_photon <= 0.0 {
            return Err(Error::Parameter(format!(
                "volts_per_photon must be > 0, got {}",
                self.volts_per_photon
            )));
        }
        Ok(())
    }

    /// Mean of the two channel efficiencies, used for detection-loss
    /// correction of measured squeezing.
    pub fn eta_mean(&self) -> f64 {
        0.5 * (self.eta_signal + self.eta_idler)
    }
}

/// First and second moments of the per-pulse photon numbers of the two beams.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwinBeamStats {
    /// Mean photons per pulse, signal channel.
    pub mean_signal: f64,
    /// Mean photons per pulse, idler channel.
    pub mean_idler: f64,
    pub var_signal: f64,
    pub var_idler: f64,
    /// Photon-number covariance between the channels.
    pub covariance: f64,
    /// False when the generating parameters sit outside the linearization
    /// regime (see [`LINEARIZATION_MIN_SEED_PHOTONS`]).
    pub linearization_valid: bool,
}

impl TwinBeamStats {
    /// Covariance-matrix validity: cov^2 <= var_s * var_i up to rounding.
    pub fn covariance_valid(&self) -> bool {
        if self.var_signal < 0.0 || self.var_idler < 0.0 {
            return false;
        }
        let bound = self.var_signal * self.var_idler;
        self.covariance * self.covariance <= bound * (1.0 + 1e-12) + f64::MIN_POSITIVE
    }

    /// Variance of the weighted photon-number difference n_s - r * n_i.
    pub fn difference_variance(&self, gain_ratio: f64) -> f64 {
        self.var_signal + gain_ratio * gain_ratio * self.var_idler
            - 2.0 * gain_ratio * self.covariance
    }

    /// Shot-noise variance of the same weighted difference for coherent
    /// beams of the same means.
    pub fn shot_noise_variance(&self, gain_ratio: f64) -> f64 {
        self.mean_signal + gain_ratio * gain_ratio * self.mean_idler
    }
}

/// Pre-detection photon statistics of the amplifier output.
///
/// Means are `g*n0` (signal) and `(g-1)*n0` (idler) plus the background
/// terms; second moments are the linearized amplifier expressions scaled by
/// the excess-noise multiplier, with Poissonian background added per channel.
/// For `seed_excess_noise = 1` and no background the construction enforces
/// Var(n_s - n_i) = n0 exactly (photon-number-difference conservation of an
/// ideal two-mode squeezer with a coherent seed).
pub fn source_stats(params: &FopaParams) -> Result<TwinBeamStats> {
    params.validate()?;
    let g = params.gain;
    let n0 = params.seed_photons;
    let xi = params.seed_excess_noise;
    Ok(TwinBeamStats {
        mean_signal: g * n0 + params.raman_signal,
        mean_idler: (g - 1.0) * n0 + params.raman_idler,
        var_signal: xi * g * (2.0 * g - 1.0) * n0 + params.raman_signal,
        var_idler: xi * (g - 1.0) * (2.0 * g - 1.0) * n0 + params.raman_idler,
        covariance: xi * 2.0 * g * (g - 1.0) * n0,
        linearization_valid: params.linearization_valid(),
    })
}

/// Push photon statistics through independent Bernoulli loss channels of
/// efficiency `eta_signal` / `eta_idler`.
///
/// Per channel: mean' = eta * mean, var' = eta^2 * var + eta(1-eta) * mean;
/// the cross covariance scales with eta_s * eta_i.
pub fn apply_detection(stats: &TwinBeamStats, chain: &DetectionChain) -> Result<TwinBeamStats> {
    chain.validate()?;
    let es = chain.eta_signal;
    let ei = chain.eta_idler;
    Ok(TwinBeamStats {
        mean_signal: es * stats.mean_signal,
        mean_idler: ei * stats.mean_idler,
        var_signal: es * es * stats.var_signal + es * (1.0 - es) * stats.mean_signal,
        var_idler: ei * ei * stats.var_idler + ei * (1.0 - ei) * stats.mean_idler,
        covariance: es * ei * stats.covariance,
        linearization_valid: stats.linearization_valid,
    })
}

/// Intensity-difference noise ratio R for given detected statistics and
/// electronic gain ratio: Var(n_s - r n_i) over the shot-noise variance of
/// the same detected means. R < 1 indicates squeezing.
pub fn ratio_from_stats(detected: &TwinBeamStats, gain_ratio: f64) -> Result<f64> {
    if !(gain_ratio.is_finite() && gain_ratio > 0.0) {
        return Err(Error::Parameter(format!(
            "gain_ratio must be finite and > 0, got {gain_ratio}"
        )));
    }
    let shot = detected.shot_noise_variance(gain_ratio);
    if shot <= 0.0 {
        return Err(Error::Degenerate(
            "no detected light: shot-noise denominator is zero".into(),
        ));
    }
    Ok(detected.difference_variance(gain_ratio) / shot)
}

/// Predicted intensity-difference noise ratio of the source after detection.
pub fn predict_ratio(params: &FopaParams, chain: &DetectionChain) -> Result<f64> {
    let detected = apply_detection(&source_stats(params)?, chain)?;
    ratio_from_stats(&detected, chain.gain_ratio)
}

/// Result of the electronic gain-ratio optimization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalGainRatio {
    /// Minimizing gain ratio r.
    pub gain_ratio: f64,
    /// Noise ratio at the minimizer.
    pub ratio: f64,
}

/// Minimize the noise ratio over the electronic gain ratio r > 0.
///
/// The objective (a - 2br + cr^2) / (M + m r^2) has stationary points at the
/// roots of b*m*r^2 + (c*M - a*m)*r - b*M = 0; positive roots are evaluated
/// and the smaller r wins ties. Falls back to a bracketed golden-section
/// search when the closed form degenerates.
pub fn optimal_gain_ratio(
    params: &FopaParams,
    eta_signal: f64,
    eta_idler: f64,
) -> Result<OptimalGainRatio> {
    let chain = DetectionChain {
        eta_signal,
        eta_idler,
        gain_ratio: 1.0,
        volts_per_photon: 1.0,
    };
    let detected = apply_detection(&source_stats(params)?, &chain)?;
    if detected.mean_idler <= 0.0 {
        return Err(Error::Degenerate(
            "optimal gain ratio undefined: detected idler mean is zero".into(),
        ));
    }
    if detected.mean_signal <= 0.0 {
        return Err(Error::Degenerate(
            "optimal gain ratio undefined: detected signal mean is zero".into(),
        ));
    }

    let a = detected.var_signal;
    let b = detected.covariance;
    let c = detected.var_idler;
    let mean_s = detected.mean_signal;
    let mean_i = detected.mean_idler;
    let objective = |r: f64| {
        (a - 2.0 * b * r + c * r * r) / (mean_s + mean_i * r * r)
    };

    let mut candidates: Vec<f64> = Vec::new();
    if b.abs() > 0.0 {
        // b*m*r^2 + (c*M - a*m)*r - b*M = 0
        let qa = b * mean_i;
        let qb = c * mean_s - a * mean_i;
        let qc = -b * mean_s;
        let disc = qb * qb - 4.0 * qa * qc;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            for root in [(-qb + sq) / (2.0 * qa), (-qb - sq) / (2.0 * qa)] {
                if root.is_finite() && root > 0.0 {
                    candidates.push(root);
                }
            }
        }
    }

    let best = candidates
        .iter()
        .copied()
        .map(|r| (r, objective(r)))
        .filter(|(_, f)| f.is_finite())
        .min_by(|(r1, f1), (r2, f2)| {
            f1.partial_cmp(f2)
                .unwrap()
                .then(r1.partial_cmp(r2).unwrap())
        });

    if let Some((gain_ratio, ratio)) = best {
        return Ok(OptimalGainRatio { gain_ratio, ratio });
    }
    // No usable stationary point; search a wide bracket numerically.
    let (gain_ratio, ratio) = golden_section_min(&objective, 1e-6, 1e6, 1e-12);
    Ok(OptimalGainRatio { gain_ratio, ratio })
}

/// Numeric verification path for [`optimal_gain_ratio`]: golden-section
/// search of the same objective over a bracket around r = 1.
pub fn optimal_gain_ratio_numeric(
    params: &FopaParams,
    eta_signal: f64,
    eta_idler: f64,
) -> Result<OptimalGainRatio> {
    let chain = DetectionChain {
        eta_signal,
        eta_idler,
        gain_ratio: 1.0,
        volts_per_photon: 1.0,
    };
    let detected = apply_detection(&source_stats(params)?, &chain)?;
    if detected.mean_idler <= 0.0 || detected.mean_signal <= 0.0 {
        return Err(Error::Degenerate(
            "optimal gain ratio undefined for a dark channel".into(),
        ));
    }
    let a = detected.var_signal;
    let b = detected.covariance;
    let c = detected.var_idler;
    let objective =
        |r: f64| (a - 2.0 * b * r + c * r * r) / (detected.mean_signal + detected.mean_idler * r * r);
    let (gain_ratio, ratio) = golden_section_min(&objective, 1e-4, 1e4, 1e-13);
    Ok(OptimalGainRatio { gain_ratio, ratio })
}

fn golden_section_min(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, rel_tol: f64) -> (f64, f64) {
    // Work in log space so the huge bracket converges quickly.
    let (mut a, mut b) = (lo.ln(), hi.ln());
    let phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let eval = |x: f64| f(x.exp());
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (eval(c), eval(d));
    for _ in 0..400 {
        if (b - a).abs() < rel_tol.max(1e-15) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = eval(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = eval(d);
        }
    }
    let mid = 0.5 * (a.exp() + b.exp());
    (mid, f(mid))
}

/// Add attenuation to whichever channel carries the larger weighted detected
/// mean so that mean_s' = r * mean_i' holds exactly and the average recorded
/// intensity difference vanishes. Never increases either efficiency.
pub fn balance_attenuation(params: &FopaParams, chain: &DetectionChain) -> Result<DetectionChain> {
    chain.validate()?;
    let stats = source_stats(params)?;
    let detected = apply_detection(&stats, chain)?;
    let weighted_idler = chain.gain_ratio * detected.mean_idler;
    if detected.mean_signal <= 0.0 || weighted_idler <= 0.0 {
        return Err(Error::Degenerate(
            "balancing requires light in both detected channels".into(),
        ));
    }
    let mut balanced = chain.clone();
    if detected.mean_signal >= weighted_idler {
        balanced.eta_signal = weighted_idler / stats.mean_signal;
    } else {
        balanced.eta_idler = detected.mean_signal / (chain.gain_ratio * stats.mean_idler);
    }
    Ok(balanced)
}

/// Per-pulse photon numbers of a sampled twin-beam pulse train.
#[derive(Debug, Clone, PartialEq)]
pub struct PulsePairSeries {
    /// Signal photons per pulse.
    pub signal: Vec<f64>,
    /// Idler photons per pulse.
    pub idler: Vec<f64>,
    /// Number of negative linearized draws clamped to zero. Must stay a
    /// negligible fraction in the linearization regime.
    pub clamped: usize,
}

impl PulsePairSeries {
    pub fn len(&self) -> usize {
        self.signal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signal.is_empty()
    }

    pub fn clamp_fraction(&self) -> f64 {
        if self.signal.is_empty() {
            0.0
        } else {
            // Two draws per pulse pair.
            self.clamped as f64 / (2.0 * self.signal.len() as f64)
        }
    }

    /// Weighted per-pulse intensity differences i_s - r * i_i.
    pub fn differences(&self, gain_ratio: f64) -> Vec<f64> {
        self.signal
            .iter()
            .zip(&self.idler)
            .map(|(s, i)| s - gain_ratio * i)
            .collect()
    }

    /// Sample moments (means, unbiased variances, unbiased covariance).
    pub fn sample_stats(&self) -> TwinBeamStats {
        let n = self.signal.len() as f64;
        let mean_s = self.signal.iter().sum::<f64>() / n;
        let mean_i = self.idler.iter().sum::<f64>() / n;
        let mut var_s = 0.0;
        let mut var_i = 0.0;
        let mut cov = 0.0;
        for (s, i) in self.signal.iter().zip(&self.idler) {
            var_s += (s - mean_s) * (s - mean_s);
            var_i += (i - mean_i) * (i - mean_i);
            cov += (s - mean_s) * (i - mean_i);
        }
        let denom = (n - 1.0).max(1.0);
        TwinBeamStats {
            mean_signal: mean_s,
            mean_idler: mean_i,
            var_signal: var_s / denom,
            var_idler: var_i / denom,
            covariance: cov / denom,
            linearization_valid: true,
        }
    }

    /// Empirical intensity-difference noise ratio of the sampled series.
    pub fn empirical_ratio(&self, gain_ratio: f64) -> Result<f64> {
        if self.len() < 2 {
            return Err(Error::Degenerate(
                "need at least two pulse pairs for an empirical ratio".into(),
            ));
        }
        let stats = self.sample_stats();
        ratio_from_stats(&stats, gain_ratio)
    }
}

/// Draw `n_pulses` independent pulse pairs from the bivariate Gaussian with
/// the detected twin-beam moments. Deterministic for a fixed seed; negative
/// draws are clamped to zero and counted.
pub fn sample_pulse_pairs(
    params: &FopaParams,
    chain: &DetectionChain,
    n_pulses: usize,
    seed: u64,
) -> Result<PulsePairSeries> {
    if n_pulses == 0 {
        return Err(Error::Parameter("n_pulses must be >= 1".into()));
    }
    let detected = apply_detection(&source_stats(params)?, chain)?;
    if !detected.covariance_valid() {
        return Err(Error::Internal(format!(
            "detected covariance matrix is not positive semidefinite: {detected:?}"
        )));
    }

    // Cholesky factor of [[var_s, cov], [cov, var_i]] with graceful handling
    // of dark channels (zero rows/columns).
    let l11 = detected.var_signal.max(0.0).sqrt();
    let l21 = if l11 > 0.0 { detected.covariance / l11 } else { 0.0 };
    let l22 = (detected.var_idler - l21 * l21).max(0.0).sqrt();

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut signal = Vec::with_capacity(n_pulses);
    let mut idler = Vec::with_capacity(n_pulses);
    let mut clamped = 0usize;
    for _ in 0..n_pulses {
        let z1: f64 = StandardNormal.sample(&mut rng);
        let z2: f64 = StandardNormal.sample(&mut rng);
        let mut s = detected.mean_signal + l11 * z1;
        let mut i = detected.mean_idler + l21 * z1 + l22 * z2;
        if s < 0.0 {
            s = 0.0;
            clamped += 1;
        }
        if i < 0.0 {
            i = 0.0;
            clamped += 1;
        }
        signal.push(s);
        idler.push(i);
    }
    Ok(PulsePairSeries { signal, idler, clamped })
}

/// Parametric map between pump power and amplifier gain,
/// g(P) = 1 + sinh^2(c * P). Used only to label gain sweeps with a pump-power
/// axis; the coefficient is a fitted constant, not derived fiber physics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GainPowerMap {
    /// Fit coefficient c in 1/W. The default puts g = 64 at ~1 mW of
    /// average pump power.
    pub coefficient: f64,
}

impl Default for GainPowerMap {
    fn default() -> Self {
        Self { coefficient: 2769.0 }
    }
}

impl GainPowerMap {
    pub fn gain_at(&self, pump_power_w: f64) -> f64 {
        1.0 + (self.coefficient * pump_power_w).sinh().powi(2)
    }

    pub fn pump_power_for(&self, gain: f64) -> Result<f64> {
        if gain < 1.0 {
            return Err(Error::Parameter(format!("gain must be >= 1, got {gain}")));
        }
        Ok(((gain - 1.0).sqrt()).asinh() / self.coefficient)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ideal(gain: f64, n0: f64) -> FopaParams {
        FopaParams {
            gain,
            seed_photons: n0,
            seed_excess_noise: 1.0,
            raman_signal: 0.0,
            raman_idler: 0.0,
        }
    }

    fn lossless(r: f64) -> DetectionChain {
        DetectionChain {
            eta_signal: 1.0,
            eta_idler: 1.0,
            gain_ratio: r,
            volts_per_photon: 1.0,
        }
    }

    #[test]
    fn unit_gain_passes_seed_through() {
        let s = source_stats(&ideal(1.0, 1e6)).unwrap();
        assert_eq!(s.mean_idler, 0.0);
        assert_eq!(s.var_idler, 0.0);
        assert_eq!(s.covariance, 0.0);
        assert_eq!(s.var_signal, 1e6);
        assert_eq!(s.mean_signal, 1e6);
    }

    #[test]
    fn difference_conservation_identity() {
        let s = source_stats(&ideal(10.0, 1e6)).unwrap();
        let diff = s.var_signal + s.var_idler - 2.0 * s.covariance;
        assert_eq!(diff, 1e6);
    }

    #[test]
    fn gain64_signal_variance() {
        let s = source_stats(&ideal(64.0, 1e6)).unwrap();
        assert_eq!(s.var_signal, 64.0 * 127.0 * 1e6);
        assert!((s.var_signal - 8.128e9).abs() < 1.0);
    }

    #[test]
    fn excess_noise_scales_second_moments_only() {
        let mut p = ideal(8.0, 1e5);
        p.seed_excess_noise = 3.0;
        let s = source_stats(&p).unwrap();
        let base = source_stats(&ideal(8.0, 1e5)).unwrap();
        assert_eq!(s.mean_signal, base.mean_signal);
        assert_eq!(s.var_signal, 3.0 * base.var_signal);
        assert_eq!(s.covariance, 3.0 * base.covariance);
    }

    #[test]
    fn raman_terms_are_poissonian_and_uncorrelated() {
        let mut p = ideal(4.0, 1e5);
        p.raman_signal = 500.0;
        p.raman_idler = 300.0;
        let s = source_stats(&p).unwrap();
        let base = source_stats(&ideal(4.0, 1e5)).unwrap();
        assert_eq!(s.mean_signal - base.mean_signal, 500.0);
        assert_eq!(s.var_signal - base.var_signal, 500.0);
        assert_eq!(s.mean_idler - base.mean_idler, 300.0);
        assert_eq!(s.covariance, base.covariance);
    }

    #[test]
    fn invalid_source_params_rejected() {
        assert!(source_stats(&ideal(0.5, 100.0)).is_err());
        assert!(source_stats(&ideal(2.0, 0.0)).is_err());
        let mut p = ideal(2.0, 100.0);
        p.seed_excess_noise = 0.5;
        assert!(source_stats(&p).is_err());
        p = ideal(2.0, 100.0);
        p.raman_idler = -1.0;
        assert!(source_stats(&p).is_err());
    }

    #[test]
    fn linearization_flag_follows_seed_photons() {
        assert!(!source_stats(&ideal(2.0, 50.0)).unwrap().linearization_valid);
        assert!(source_stats(&ideal(2.0, 100.0)).unwrap().linearization_valid);
    }

    #[test]
    fn identity_loss_is_identity() {
        let s = source_stats(&ideal(5.0, 1e5)).unwrap();
        let out = apply_detection(&s, &lossless(1.0)).unwrap();
        assert_eq!(s, out);
    }

    #[test]
    fn full_signal_loss_darkens_channel() {
        let s = source_stats(&ideal(5.0, 1e5)).unwrap();
        let chain = DetectionChain {
            eta_signal: 0.0,
            ..lossless(1.0)
        };
        let out = apply_detection(&s, &chain).unwrap();
        assert_eq!(out.mean_signal, 0.0);
        assert_eq!(out.var_signal, 0.0);
        assert_eq!(out.covariance, 0.0);
    }

    #[test]
    fn binomial_partition_of_noiseless_beam() {
        let s = TwinBeamStats {
            mean_signal: 1000.0,
            mean_idler: 0.0,
            var_signal: 0.0,
            var_idler: 0.0,
            covariance: 0.0,
            linearization_valid: true,
        };
        let chain = DetectionChain {
            eta_signal: 0.5,
            ..lossless(1.0)
        };
        let out = apply_detection(&s, &chain).unwrap();
        assert_eq!(out.var_signal, 0.25 * 1000.0);
    }

    #[test]
    fn unit_gain_sits_at_shot_noise_limit() {
        for (eta_s, eta_i, r) in [(1.0, 1.0, 1.0), (0.4, 0.9, 2.5), (0.7, 0.68, 0.3)] {
            let chain = DetectionChain {
                eta_signal: eta_s,
                eta_idler: eta_i,
                gain_ratio: r,
                volts_per_photon: 1.0,
            };
            let ratio = predict_ratio(&ideal(1.0, 1e6), &chain).unwrap();
            assert!((ratio - 1.0).abs() < 1e-12, "got {ratio}");
        }
    }

    #[test]
    fn lossless_ratio_is_inverse_total_gain() {
        let ratio = predict_ratio(&ideal(10.0, 1e6), &lossless(1.0)).unwrap();
        assert!((ratio - 1.0 / 19.0).abs() < 1e-15);
    }

    #[test]
    fn balanced_reference_point() {
        let chain = DetectionChain {
            eta_signal: 0.68 * 63.0 / 64.0,
            eta_idler: 0.68,
            gain_ratio: 1.0,
            volts_per_photon: 1.0,
        };
        let ratio = predict_ratio(&ideal(64.0, 1e6), &chain).unwrap();
        assert!((ratio - 0.330625).abs() < 1e-9, "got {ratio}");
        assert!((10.0 * ratio.log10() + 4.8066).abs() < 1e-3);
    }

    #[test]
    fn no_light_is_degenerate() {
        let chain = DetectionChain {
            eta_signal: 0.0,
            ..lossless(1.0)
        };
        let err = predict_ratio(&ideal(1.0, 1e4), &chain).unwrap_err();
        assert!(matches!(err, Error::Degenerate(_)));
    }

    #[test]
    fn optimal_ratio_lossless_closed_form() {
        // With equal efficiencies the stationary point is r = sqrt(g/(g-1)).
        for g in [2.0, 10.0, 64.0] {
            let opt = optimal_gain_ratio(&ideal(g, 1e6), 1.0, 1.0).unwrap();
            let expected = (g / (g - 1.0)).sqrt();
            assert!(
                (opt.gain_ratio - expected).abs() < 1e-9,
                "g={g}: {} vs {expected}",
                opt.gain_ratio
            );
            let at_unity = predict_ratio(&ideal(g, 1e6), &lossless(1.0)).unwrap();
            assert!(opt.ratio <= at_unity + 1e-15);
        }
    }

    #[test]
    fn optimal_ratio_inset_regime() {
        let opt = optimal_gain_ratio(&ideal(100.0, 1e6), 0.90, 0.90).unwrap();
        assert!(opt.gain_ratio > 1.0 && opt.gain_ratio < 1.01, "{}", opt.gain_ratio);
        let db = 10.0 * opt.ratio.log10();
        assert!(db <= -9.8, "expected -9.8 dB or better, got {db}");
    }

    #[test]
    fn optimal_ratio_requires_idler() {
        let err = optimal_gain_ratio(&ideal(1.0, 1e4), 0.9, 0.9).unwrap_err();
        assert!(matches!(err, Error::Degenerate(_)));
    }

    #[test]
    fn balance_reduces_larger_channel() {
        let chain = DetectionChain::default();
        let balanced = balance_attenuation(&FopaParams::new(64.0, 1e6), &chain).unwrap();
        assert!((balanced.eta_signal - 0.68 * 63.0 / 64.0).abs() < 1e-12);
        assert_eq!(balanced.eta_idler, 0.68);

        // g=2, unity efficiencies: signal mean 2*n0 vs idler n0.
        let balanced = balance_attenuation(&FopaParams::new(2.0, 1e6), &lossless(1.0)).unwrap();
        assert!((balanced.eta_signal - 0.5).abs() < 1e-12);
    }

    #[test]
    fn balance_is_idempotent() {
        let chain = balance_attenuation(&FopaParams::new(64.0, 1e6), &DetectionChain::default())
            .unwrap();
        let again = balance_attenuation(&FopaParams::new(64.0, 1e6), &chain).unwrap();
        assert!((again.eta_signal - chain.eta_signal).abs() < 1e-12);
        assert!((again.eta_idler - chain.eta_idler).abs() < 1e-12);
    }

    #[test]
    fn balance_respects_gain_ratio_weighting() {
        let chain = DetectionChain {
            gain_ratio: 1.1,
            ..DetectionChain::default()
        };
        let params = FopaParams::new(64.0, 1e6);
        let balanced = balance_attenuation(&params, &chain).unwrap();
        let detected = apply_detection(&source_stats(&params).unwrap(), &balanced).unwrap();
        let residual = detected.mean_signal - chain.gain_ratio * detected.mean_idler;
        assert!(residual.abs() < 1e-6 * detected.mean_signal);
        assert!(balanced.eta_signal <= chain.eta_signal);
        assert!(balanced.eta_idler <= chain.eta_idler);
    }

    #[test]
    fn sampler_is_deterministic() {
        let p = ideal(16.0, 1e5);
        let d = DetectionChain::default();
        let a = sample_pulse_pairs(&p, &d, 500, 99).unwrap();
        let b = sample_pulse_pairs(&p, &d, 500, 99).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sampler_dark_idler_at_unit_gain() {
        let series = sample_pulse_pairs(&ideal(1.0, 1e5), &DetectionChain::default(), 200, 7)
            .unwrap();
        assert!(series.idler.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn sampler_never_clamps_in_valid_regime() {
        let series =
            sample_pulse_pairs(&ideal(64.0, 1e6), &DetectionChain::default(), 100_000, 3).unwrap();
        assert_eq!(series.clamped, 0);
        assert!(series.clamp_fraction() < 1e-6);
    }

    #[test]
    fn gain_power_map_round_trips() {
        let map = GainPowerMap::default();
        for g in [1.5, 8.0, 64.0] {
            let p = map.pump_power_for(g).unwrap();
            assert!((map.gain_at(p) - g).abs() < 1e-9 * g);
        }
        assert!((map.gain_at(1e-3) - 64.0).abs() < 1.0);
    }
}
