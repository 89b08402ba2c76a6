//! Ensemble-averaged power spectral density of detector records.
//!
//! Each record contributes one unwindowed periodogram of its full length;
//! periodograms are averaged in record order, so results do not depend on
//! how the per-record transforms were scheduled. The one-sided PSD is
//! normalized so that `sum(psd) * freq_resolution` equals the mean square
//! voltage (Parseval).

use rustfft::{num_complex::Complex, FftPlanner};

use crate::error::{Error, Result};
use crate::trace::VoltageTrace;

/// One-sided ensemble PSD estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdEstimate {
    /// Bin frequencies in Hz, ascending from DC to Nyquist.
    pub freqs: Vec<f64>,
    /// PSD values in V^2/Hz.
    pub psd: Vec<f64>,
    /// Number of averaged records.
    pub n_averages: usize,
}

impl PsdEstimate {
    pub fn freq_resolution(&self) -> f64 {
        if self.freqs.len() > 1 {
            self.freqs[1] - self.freqs[0]
        } else {
            0.0
        }
    }

    pub fn nyquist(&self) -> f64 {
        *self.freqs.last().unwrap_or(&0.0)
    }

    /// Integrated power over the inclusive frequency band [lo, hi], in V^2.
    pub fn band_power(&self, lo_hz: f64, hi_hz: f64) -> Result<f64> {
        if !(lo_hz.is_finite() && hi_hz.is_finite()) || lo_hz < 0.0 || hi_hz <= lo_hz {
            return Err(Error::Parameter(format!(
                "invalid band [{lo_hz}, {hi_hz}]"
            )));
        }
        if hi_hz > self.nyquist() {
            return Err(Error::Parameter(format!(
                "band edge {hi_hz} beyond Nyquist {}",
                self.nyquist()
            )));
        }
        let df = self.freq_resolution();
        let mut acc = 0.0;
        let mut n = 0usize;
        for (f, p) in self.freqs.iter().zip(&self.psd) {
            if *f >= lo_hz && *f <= hi_hz {
                acc += p * df;
                n += 1;
            }
        }
        if n == 0 {
            return Err(Error::Parameter(format!(
                "band [{lo_hz}, {hi_hz}] narrower than one bin ({df} Hz)"
            )));
        }
        Ok(acc)
    }

    /// Total integrated power (mean square voltage).
    pub fn total_power(&self) -> f64 {
        self.psd.iter().sum::<f64>() * self.freq_resolution()
    }

    /// Frequency where the (lightly smoothed) PSD falls 3 dB below its
    /// plateau, estimated as the mean over [plateau_lo, plateau_hi].
    pub fn minus_3db_hz(&self, plateau_lo: f64, plateau_hi: f64) -> Option<f64> {
        let df = self.freq_resolution();
        if df <= 0.0 {
            return None;
        }
        let in_band = |f: f64| f >= plateau_lo && f <= plateau_hi;
        let plateau_bins: Vec<f64> = self
            .freqs
            .iter()
            .zip(&self.psd)
            .filter(|(f, _)| in_band(**f))
            .map(|(_, p)| *p)
            .collect();
        if plateau_bins.is_empty() {
            return None;
        }
        let plateau = plateau_bins.iter().sum::<f64>() / plateau_bins.len() as f64;
        let target = plateau / 2.0;

        // Boxcar smoothing over 5 bins to suppress single-bin noise.
        let smooth = |k: usize| -> f64 {
            let lo = k.saturating_sub(2);
            let hi = (k + 2).min(self.psd.len() - 1);
            self.psd[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        };
        let start = self.freqs.iter().position(|&f| f > plateau_hi)?;
        let mut prev = smooth(start);
        for k in start + 1..self.psd.len() {
            let cur = smooth(k);
            if prev >= target && cur < target {
                // Linear interpolation between the two bins.
                let frac = (prev - target) / (prev - cur);
                return Some(self.freqs[k - 1] + frac * df);
            }
            prev = cur;
        }
        None
    }
}

/// Average the per-record periodograms of an ensemble of traces.
///
/// All traces must share the same geometry. Reduction follows the slice
/// order, making the result independent of any upstream parallelism.
pub fn ensemble_psd(traces: &[VoltageTrace]) -> Result<PsdEstimate> {
    let first = traces
        .first()
        .ok_or_else(|| Error::Parameter("empty trace ensemble".into()))?;
    let n = first.samples.len();
    if n < 2 {
        return Err(Error::Parameter("traces too short for a PSD".into()));
    }
    for t in traces.iter().skip(1) {
        if !t.same_geometry(first) {
            return Err(Error::Parameter(
                "all traces in the ensemble must share length and rates".into(),
            ));
        }
    }

    let fs = first.sample_rate_hz;
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(n);
    let n_bins = n / 2 + 1;
    let mut acc = vec![0.0f64; n_bins];
    let mut buf: Vec<Complex<f64>> = Vec::with_capacity(n);
    for trace in traces {
        buf.clear();
        buf.extend(trace.samples.iter().map(|&v| Complex::new(v, 0.0)));
        fft.process(&mut buf);
        for k in 0..n_bins {
            acc[k] += buf[k].norm_sqr();
        }
    }

    let n_traces = traces.len() as f64;
    let base = 1.0 / (fs * n as f64 * n_traces);
    let psd: Vec<f64> = acc
        .iter()
        .enumerate()
        .map(|(k, &a)| {
            let one_sided = if k == 0 || (n % 2 == 0 && k == n / 2) {
                1.0
            } else {
                2.0
            };
            a * base * one_sided
        })
        .collect();
    let freqs: Vec<f64> = (0..n_bins).map(|k| k as f64 * fs / n as f64).collect();
    Ok(PsdEstimate {
        freqs,
        psd,
        n_averages: traces.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;
    use rand_distr::StandardNormal;

    fn trace_from(samples: Vec<f64>) -> VoltageTrace {
        VoltageTrace {
            samples,
            sample_rate_hz: 5e9,
            pulse_period_s: 20e-9,
            first_pulse_offset_s: 10e-9,
            saturated_count: 0,
        }
    }

    #[test]
    fn sinusoid_concentrates_in_one_bin() {
        let n = 25_000;
        let fs = 5e9;
        let f0 = 50e6; // exactly bin 250
        let samples: Vec<f64> = (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * f0 * i as f64 / fs).sin())
            .collect();
        let psd = ensemble_psd(&[trace_from(samples)]).unwrap();
        let peak_bin = psd
            .psd
            .iter()
            .enumerate()
            .max_by(|(_, a), (_, b)| a.partial_cmp(b).unwrap())
            .unwrap()
            .0;
        assert_eq!(peak_bin, 250);
        assert!((psd.freqs[peak_bin] - 50e6).abs() < 1.0);
        // Essentially all the power in that single bin.
        let band = psd.band_power(49.9e6, 50.1e6).unwrap();
        assert!((band - 0.5).abs() < 1e-6, "sine mean square is 1/2, got {band}");
    }

    #[test]
    fn white_noise_parseval_identity() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let sigma = 3e-3;
        let samples: Vec<f64> = (0..25_000)
            .map(|_| sigma * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let mean_sq = samples.iter().map(|v| v * v).sum::<f64>() / samples.len() as f64;
        let psd = ensemble_psd(&[trace_from(samples)]).unwrap();
        // Parseval holds to rounding; the 5% bound on sigma^2 covers the
        // statistical fluctuation of the draw itself.
        assert!((psd.total_power() - mean_sq).abs() < 1e-12 * mean_sq.max(1.0));
        assert!((psd.total_power() - sigma * sigma).abs() < 0.05 * sigma * sigma);
    }

    #[test]
    fn averaging_reduces_variance() {
        let sigma = 1e-3;
        let make = |seed: u64| {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            trace_from(
                (0..4096)
                    .map(|_| sigma * rng.sample::<f64, _>(StandardNormal))
                    .collect(),
            )
        };
        let single = ensemble_psd(&[make(0)]).unwrap();
        let many: Vec<VoltageTrace> = (0..64).map(make).collect();
        let avg = ensemble_psd(&many).unwrap();
        let spread = |p: &PsdEstimate| {
            let mean = p.psd.iter().sum::<f64>() / p.psd.len() as f64;
            p.psd.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / p.psd.len() as f64
        };
        assert!(spread(&avg) < spread(&single) / 8.0);
        assert_eq!(avg.n_averages, 64);
    }

    #[test]
    fn mismatched_geometry_rejected() {
        let a = trace_from(vec![0.0; 1000]);
        let b = trace_from(vec![0.0; 2000]);
        assert!(ensemble_psd(&[a, b]).is_err());
    }

    #[test]
    fn band_power_validates_edges() {
        let psd = ensemble_psd(&[trace_from(vec![1.0; 1000])]).unwrap();
        assert!(psd.band_power(-1.0, 1e6).is_err());
        assert!(psd.band_power(1e6, 1e6).is_err());
        assert!(psd.band_power(1e6, 3e9).is_err()); // beyond Nyquist
    }

    #[test]
    fn empty_ensemble_rejected() {
        assert!(ensemble_psd(&[]).is_err());
    }
}
