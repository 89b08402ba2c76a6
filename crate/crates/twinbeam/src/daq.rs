//! Trace analysis: pulse-peak location, window integration, per-pulse
//! statistics, correlation between shifted pulses and histograms.
//!
//! The repetition rate is known a priori, so peak search is grid-anchored:
//! each interior pulse slot is scanned for its most negative sample, with a
//! per-pulse drift tolerance of 10% of the period. Slots whose extremum
//! drifts further (dark or noise-dominated records) are snapped back to the
//! slot center and counted as degenerate. Integration windows are the slot
//! windows shifted by the robust (median) peak offset, which keeps them
//! non-overlapping even on noisy records.


use crate::error::{Error, Result};
use crate::trace::VoltageTrace;

/// Fraction of the pulse period a located peak may drift from the slot
/// center before it is treated as degenerate.
const DRIFT_TOLERANCE: f64 = 0.10;

/// Located pulse peaks of one record. The first and last slot are always
/// discarded because their integration windows could clip the record.
#[derive(Debug, Clone, PartialEq)]
pub struct PeakLocations {
    /// One sample index per interior pulse slot.
    pub indices: Vec<usize>,
    /// Slot centers of the nominal grid, same length as `indices`.
    pub grid_centers: Vec<usize>,
    /// Number of slots whose extremum exceeded the drift tolerance and was
    /// snapped back to the slot center (low-confidence peaks).
    pub degenerate: usize,
}

impl PeakLocations {
    /// Integration anchors: the nominal grid shifted by the median peak
    /// offset. Robust to individual noisy slots and always non-overlapping.
    pub fn grid_anchors(&self) -> Vec<usize> {
        if self.indices.is_empty() {
            return Vec::new();
        }
        let mut offsets: Vec<isize> = self
            .indices
            .iter()
            .zip(&self.grid_centers)
            .map(|(&p, &c)| p as isize - c as isize)
            .collect();
        offsets.sort_unstable();
        let median = offsets[offsets.len() / 2];
        self.grid_centers
            .iter()
            .map(|&c| (c as isize + median).max(0) as usize)
            .collect()
    }
}

/// Locate the negative peak of every interior pulse slot.
///
/// Ties (e.g. an all-zero trace) resolve to the sample closest to the slot
/// center.
pub fn find_pulse_peaks(trace: &VoltageTrace) -> Result<PeakLocations> {
    let period = trace.period_samples();
    if period == 0 || trace.samples.len() < period {
        return Err(Error::Degenerate(
            "trace shorter than one pulse period".into(),
        ));
    }
    let slots = trace.samples.len() / period;
    if slots < 3 {
        return Err(Error::Degenerate(format!(
            "need at least 3 pulse slots to keep an interior slot, got {slots}"
        )));
    }
    let offset = trace.first_pulse_offset_samples() % period;
    let tolerance = (DRIFT_TOLERANCE * period as f64).round() as isize;

    let mut indices = Vec::with_capacity(slots - 2);
    let mut grid_centers = Vec::with_capacity(slots - 2);
    let mut degenerate = 0usize;
    for slot in 1..slots - 1 {
        let center = offset + slot * period;
        let lo = center - period / 2;
        let hi = (lo + period).min(trace.samples.len());
        let mut best = center;
        let mut best_v = trace.samples[center];
        for j in lo..hi {
            let v = trace.samples[j];
            let closer =
                (j as isize - center as isize).abs() < (best as isize - center as isize).abs();
            if v < best_v || (v == best_v && closer) {
                best = j;
                best_v = v;
            }
        }
        if (best as isize - center as isize).abs() > tolerance {
            best = center;
            degenerate += 1;
        }
        indices.push(best);
        grid_centers.push(center);
    }
    Ok(PeakLocations {
        indices,
        grid_centers,
        degenerate,
    })
}

/// Per-pulse integrals and their first two moments.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseEstimates {
    /// Windowed integral e_n per pulse, in volt-samples.
    pub integrals: Vec<f64>,
    pub mean: f64,
    /// Unbiased (n-1) variance; zero when fewer than two pulses.
    pub variance: f64,
}

impl PulseEstimates {
    pub fn from_integrals(integrals: Vec<f64>) -> Result<Self> {
        if integrals.is_empty() {
            return Err(Error::Degenerate("no pulse integrals".into()));
        }
        let n = integrals.len() as f64;
        let mean = integrals.iter().sum::<f64>() / n;
        let variance = if integrals.len() < 2 {
            0.0
        } else {
            integrals.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (n - 1.0)
        };
        Ok(Self {
            integrals,
            mean,
            variance,
        })
    }

    pub fn len(&self) -> usize {
        self.integrals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.integrals.is_empty()
    }

}

/// Sum the samples of one period-wide window around each anchor.
///
/// Windows must lie in-record and must not overlap; overlapping windows
/// indicate a peak-finding failure upstream.
pub fn integrate_windows(trace: &VoltageTrace, anchors: &[usize]) -> Result<PulseEstimates> {
    let period = trace.period_samples();
    if anchors.is_empty() {
        return Err(Error::Degenerate("no pulse anchors to integrate".into()));
    }
    let half = period / 2;
    let mut prev_hi: Option<usize> = None;
    let mut integrals = Vec::with_capacity(anchors.len());
    for &anchor in anchors {
        if anchor < half {
            return Err(Error::Parameter(format!(
                "window around sample {anchor} clips the record start"
            )));
        }
        let lo = anchor - half;
        let hi = lo + period;
        if hi > trace.samples.len() {
            return Err(Error::Parameter(format!(
                "window around sample {anchor} clips the record end"
            )));
        }
        if let Some(p) = prev_hi {
            if lo < p {
                return Err(Error::Parameter(format!(
                    "integration windows overlap at sample {lo}; peak finding failed"
                )));
            }
        }
        prev_hi = Some(hi);
        integrals.push(trace.samples[lo..hi].iter().sum());
    }
    PulseEstimates::from_integrals(integrals)
}

/// Full single-record pipeline: locate peaks, fit the grid offset, integrate.
pub fn analyze_trace(trace: &VoltageTrace) -> Result<PulseEstimates> {
    let peaks = find_pulse_peaks(trace)?;
    integrate_windows(trace, &peaks.grid_anchors())
}

/// Normalized correlation between pulse integrals and their `shift`-pulse
/// shifted copies. Equals 1 at zero shift by construction; the denominator
/// uses the population variance so that identity is exact.
pub fn correlation_coefficient(estimates: &PulseEstimates, shift: usize) -> Result<f64> {
    let n = estimates.integrals.len();
    if shift >= n {
        return Err(Error::Parameter(format!(
            "shift {shift} must be smaller than the pulse count {n}"
        )));
    }
    let mean = estimates.mean;
    let e = &estimates.integrals;
    let mut ssq = 0.0;
    for v in e {
        ssq += (v - mean) * (v - mean);
    }
    if ssq <= 0.0 {
        return Err(Error::Degenerate(
            "correlation undefined: pulse integrals have zero variance".into(),
        ));
    }
    let mut acc = 0.0;
    for k in shift..n {
        acc += (e[k] - mean) * (e[k - shift] - mean);
    }
    // acc and ssq accumulate identically at zero shift, so C(0) = 1 exactly.
    Ok((acc / ssq) * (n as f64 / (n - shift) as f64))
}

/// Equal-width histogram of pulse integrals.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / self.counts.len() as f64
    }

    pub fn bin_center(&self, index: usize) -> f64 {
        self.lo + (index as f64 + 0.5) * self.bin_width()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Mean estimated from bin centers.
    pub fn mean(&self) -> f64 {
        let total = self.total() as f64;
        self.counts
            .iter()
            .enumerate()
            .map(|(i, &c)| c as f64 * self.bin_center(i))
            .sum::<f64>()
            / total
    }

    /// Population variance estimated from bin centers.
    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        let total = self.total() as f64;
        self.counts
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let d = self.bin_center(i) - mean;
                c as f64 * d * d
            })
            .sum::<f64>()
            / total
    }
}

/// Bin pulse integrals into `n_bins` equal-width bins spanning [min, max].
/// A constant series occupies a single bin of a synthetic unit-wide span.
pub fn histogram(estimates: &PulseEstimates, n_bins: usize) -> Result<Histogram> {
    if n_bins == 0 {
        return Err(Error::Parameter("n_bins must be >= 1".into()));
    }
    if estimates.is_empty() {
        return Err(Error::Degenerate("cannot histogram zero pulses".into()));
    }
    let mut lo = estimates.integrals.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut hi = estimates.integrals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        lo -= 0.5;
        hi += 0.5;
    }
    let width = (hi - lo) / n_bins as f64;
    let mut counts = vec![0u64; n_bins];
    for &e in &estimates.integrals {
        let idx = (((e - lo) / width) as usize).min(n_bins - 1);
        counts[idx] += 1;
    }
    Ok(Histogram { lo, hi, counts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::{response_kernel, synthesize_clean, DetectorModel, KernelShape};
    use crate::model::DetectionChain;

    fn quiet_model() -> DetectorModel {
        DetectorModel {
            electronic_noise_rms_v: 0.0,
            ..DetectorModel::default()
        }
    }

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
    fn single_pulse_peak_is_kernel_minimum() {
        let m = quiet_model();
        let chain = DetectionChain::default();
        let mut diffs = vec![0.0; 5];
        diffs[2] = 100.0;
        let clean = synthesize_clean(&diffs, &chain, &m).unwrap();
        let trace = trace_from(clean);
        let peaks = find_pulse_peaks(&trace).unwrap();
        // Interior slots 1..4; the pulse sits in slot 2 at grid center 250.
        assert_eq!(peaks.indices.len(), 3);
        assert_eq!(peaks.indices[1], 250);
        // Slot 3 sees only the decaying tail of pulse 2 and snaps back to its
        // center; the fully dark slot 1 tie-breaks to its center directly.
        assert_eq!(peaks.indices[0], 150);
        assert_eq!(peaks.indices[2], 350);
        assert_eq!(peaks.degenerate, 1);
    }

    #[test]
    fn slot_count_drops_edges() {
        let m = quiet_model();
        let chain = DetectionChain::default();
        let diffs = vec![1.0; 250];
        let clean = synthesize_clean(&diffs, &chain, &m).unwrap();
        assert_eq!(clean.len(), 25_000);
        let peaks = find_pulse_peaks(&trace_from(clean)).unwrap();
        assert_eq!(peaks.indices.len(), 248);
    }

    #[test]
    fn all_zero_trace_snaps_to_centers() {
        let trace = trace_from(vec![0.0; 1000]);
        let peaks = find_pulse_peaks(&trace).unwrap();
        assert_eq!(peaks.indices, vec![150, 250, 350, 450, 550, 650, 750, 850]);
        assert_eq!(peaks.degenerate, 0); // argmin tie-break already lands on center
    }

    #[test]
    fn short_trace_is_rejected() {
        let trace = trace_from(vec![0.0; 80]);
        assert!(matches!(find_pulse_peaks(&trace), Err(Error::Degenerate(_))));
    }

    #[test]
    fn integration_recovers_kernel_area_per_pulse() {
        // Gaussian kernel narrow enough to fit inside one window.
        let m = DetectorModel {
            kernel_shape: KernelShape::Gaussian,
            bandwidth_hz: 300e6,
            ..quiet_model()
        };
        let chain = DetectionChain::default();
        let kernel = response_kernel(&m).unwrap();
        assert!(kernel.len() < 100, "kernel must fit in one window");
        let diffs = vec![0.0, 40.0, -25.0, 10.0, 0.0];
        let clean = synthesize_clean(&diffs, &chain, &m).unwrap();
        let est = analyze_trace(&trace_from(clean)).unwrap();
        for (slot, &e) in est.integrals.iter().enumerate() {
            let expected = chain.volts_per_photon * kernel.area() * diffs[slot + 1];
            assert!(
                (e - expected).abs() < 1e-12,
                "slot {slot}: {e} vs {expected}"
            );
        }
    }

    #[test]
    fn zero_trace_integrates_to_zero() {
        let est = analyze_trace(&trace_from(vec![0.0; 2000])).unwrap();
        assert!(est.integrals.iter().all(|&e| e == 0.0));
        assert_eq!(est.variance, 0.0);
    }

    #[test]
    fn overlapping_windows_error() {
        let trace = trace_from(vec![0.0; 1000]);
        let err = integrate_windows(&trace, &[150, 200]).unwrap_err();
        assert!(matches!(err, Error::Parameter(_)));
    }

    #[test]
    fn clipped_windows_error() {
        let trace = trace_from(vec![0.0; 1000]);
        assert!(integrate_windows(&trace, &[10]).is_err());
        assert!(integrate_windows(&trace, &[980]).is_err());
    }

    #[test]
    fn correlation_at_zero_shift_is_exactly_one() {
        let est = PulseEstimates::from_integrals(vec![3.0, -1.0, 2.5, 0.5, 9.0]).unwrap();
        assert_eq!(correlation_coefficient(&est, 0).unwrap(), 1.0);
    }

    #[test]
    fn alternating_series_anticorrelates_at_shift_one() {
        let e: Vec<f64> = (0..1000).map(|n| if n % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let est = PulseEstimates::from_integrals(e).unwrap();
        let c = correlation_coefficient(&est, 1).unwrap();
        assert!((c + 1.0).abs() < 1e-12, "got {c}");
    }

    #[test]
    fn correlation_of_constant_series_is_undefined() {
        let est = PulseEstimates::from_integrals(vec![2.0; 50]).unwrap();
        assert!(matches!(
            correlation_coefficient(&est, 1),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn correlation_shift_must_be_in_range() {
        let est = PulseEstimates::from_integrals(vec![1.0, 2.0, 3.0]).unwrap();
        assert!(correlation_coefficient(&est, 3).is_err());
    }

    #[test]
    fn reversed_series_has_identical_correlation() {
        let e: Vec<f64> = (0..500)
            .map(|n| ((n * 2654435761u64 % 1000) as f64) / 1000.0)
            .collect();
        let est = PulseEstimates::from_integrals(e.clone()).unwrap();
        let mut rev = e;
        rev.reverse();
        let est_rev = PulseEstimates::from_integrals(rev).unwrap();
        for shift in 0..10 {
            let a = correlation_coefficient(&est, shift).unwrap();
            let b = correlation_coefficient(&est_rev, shift).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn histogram_counts_sum_to_pulses() {
        let e: Vec<f64> = (0..1234).map(|n| (n as f64).sin()).collect();
        let est = PulseEstimates::from_integrals(e).unwrap();
        let h = histogram(&est, 40).unwrap();
        assert_eq!(h.total(), 1234);
    }

    #[test]
    fn constant_series_occupies_one_bin() {
        let est = PulseEstimates::from_integrals(vec![7.0; 100]).unwrap();
        let h = histogram(&est, 11).unwrap();
        assert_eq!(h.counts.iter().filter(|&&c| c > 0).count(), 1);
        assert_eq!(h.total(), 100);
    }

    #[test]
    fn empty_histogram_is_an_error() {
        let est = PulseEstimates {
            integrals: vec![],
            mean: 0.0,
            variance: 0.0,
        };
        assert!(histogram(&est, 10).is_err());
    }
}
