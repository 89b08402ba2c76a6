//! Multi-record synthesis with per-record seeds derived from a master seed.
//!
//! Each record's seed depends only on (master seed, domain, record index),
//! so callers may synthesize records in any order or in parallel and still
//! obtain identical ensembles.

use crate::daq::analyze_trace;
use crate::daq::PulseEstimates;
use crate::detector::{
    synthesize_calibration_trace, synthesize_electronic_trace, synthesize_trace, DetectorModel,
};
use crate::error::Result;
use crate::model::{sample_pulse_pairs, DetectionChain, FopaParams};
use crate::seed::{derive_seed, SeedDomain};
use crate::trace::VoltageTrace;

/// Synthesize record `index` of a twin-beam measurement run.
pub fn twin_beam_record(
    params: &FopaParams,
    chain: &DetectionChain,
    model: &DetectorModel,
    pulses_per_record: usize,
    master_seed: u64,
    index: u64,
) -> Result<VoltageTrace> {
    let pair_seed = derive_seed(master_seed, SeedDomain::PulseSampling, index);
    let noise_seed = derive_seed(master_seed, SeedDomain::TraceNoise, index);
    let series = sample_pulse_pairs(params, chain, pulses_per_record, pair_seed)?;
    let diffs = series.differences(chain.gain_ratio);
    synthesize_trace(&diffs, chain, model, noise_seed)
}

/// Synthesize record `index` of a shot-noise calibration run.
pub fn calibration_record(
    power_per_pd: f64,
    classical_noise_frac: f64,
    model: &DetectorModel,
    chain: &DetectionChain,
    pulses_per_record: usize,
    master_seed: u64,
    index: u64,
) -> Result<VoltageTrace> {
    let seed = derive_seed(master_seed, SeedDomain::Calibration, index);
    synthesize_calibration_trace(
        power_per_pd,
        classical_noise_frac,
        model,
        chain,
        pulses_per_record,
        seed,
    )
}

/// Synthesize record `index` of a dark (electronic-noise-only) run.
pub fn electronic_record(
    model: &DetectorModel,
    pulses_per_record: usize,
    master_seed: u64,
    index: u64,
) -> Result<VoltageTrace> {
    let seed = derive_seed(master_seed, SeedDomain::Electronic, index);
    synthesize_electronic_trace(model, pulses_per_record, seed)
}

/// Serial convenience wrapper around [`twin_beam_record`].
pub fn twin_beam_ensemble(
    params: &FopaParams,
    chain: &DetectionChain,
    model: &DetectorModel,
    pulses_per_record: usize,
    records: usize,
    master_seed: u64,
) -> Result<Vec<VoltageTrace>> {
    (0..records as u64)
        .map(|i| twin_beam_record(params, chain, model, pulses_per_record, master_seed, i))
        .collect()
}

/// Serial convenience wrapper around [`calibration_record`].
pub fn calibration_ensemble(
    power_per_pd: f64,
    classical_noise_frac: f64,
    model: &DetectorModel,
    chain: &DetectionChain,
    pulses_per_record: usize,
    records: usize,
    master_seed: u64,
) -> Result<Vec<VoltageTrace>> {
    (0..records as u64)
        .map(|i| {
            calibration_record(
                power_per_pd,
                classical_noise_frac,
                model,
                chain,
                pulses_per_record,
                master_seed,
                i,
            )
        })
        .collect()
}

/// Serial convenience wrapper around [`electronic_record`].
pub fn electronic_ensemble(
    model: &DetectorModel,
    pulses_per_record: usize,
    records: usize,
    master_seed: u64,
) -> Result<Vec<VoltageTrace>> {
    (0..records as u64)
        .map(|i| electronic_record(model, pulses_per_record, master_seed, i))
        .collect()
}

/// Run the pulse pipeline on every record and pool all integrals into one
/// estimate (records are independent and share a common mean).
pub fn pooled_estimates(traces: &[VoltageTrace]) -> Result<PulseEstimates> {
    let mut integrals = Vec::new();
    for trace in traces {
        integrals.extend(analyze_trace(trace)?.integrals);
    }
    PulseEstimates::from_integrals(integrals)
}
