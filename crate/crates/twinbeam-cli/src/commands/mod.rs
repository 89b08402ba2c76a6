//! Subcommand implementations.

pub mod analyze;
pub mod calibrate;
pub mod measure;
pub mod predict;
pub mod reproduce;
pub mod simulate;

use rayon::prelude::*;

use twinbeam::daq::PulseEstimates;
use twinbeam::detector::DetectorModel;
use twinbeam::ensemble::{calibration_record, electronic_record, twin_beam_record};
use twinbeam::error::Result;
use twinbeam::model::{balance_attenuation, DetectionChain, FopaParams};
use twinbeam::trace::VoltageTrace;

use crate::config::ScenarioConfig;

/// Detection chain actually used for a given gain: the configured one, with
/// the brighter channel attenuated when auto-balancing is on.
pub fn chain_for_gain(cfg: &ScenarioConfig, gain: f64) -> Result<DetectionChain> {
    let params = FopaParams {
        gain,
        ..cfg.fopa.clone()
    };
    if cfg.measure.auto_balance && gain > 1.0 {
        balance_attenuation(&params, &cfg.detection)
    } else {
        Ok(cfg.detection.clone())
    }
}

/// Parallel twin-beam ensemble; record seeds depend only on the master seed
/// and record index, so the result is identical to the serial loop.
pub fn par_twin_beam_ensemble(
    params: &FopaParams,
    chain: &DetectionChain,
    model: &DetectorModel,
    pulses: usize,
    records: usize,
    master_seed: u64,
) -> Result<Vec<VoltageTrace>> {
    (0..records as u64)
        .into_par_iter()
        .map(|i| twin_beam_record(params, chain, model, pulses, master_seed, i))
        .collect()
}

pub fn par_calibration_ensemble(
    power_per_pd: f64,
    classical_noise_frac: f64,
    model: &DetectorModel,
    chain: &DetectionChain,
    pulses: usize,
    records: usize,
    master_seed: u64,
) -> Result<Vec<VoltageTrace>> {
    (0..records as u64)
        .into_par_iter()
        .map(|i| {
            calibration_record(
                power_per_pd,
                classical_noise_frac,
                model,
                chain,
                pulses,
                master_seed,
                i,
            )
        })
        .collect()
}

pub fn par_electronic_ensemble(
    model: &DetectorModel,
    pulses: usize,
    records: usize,
    master_seed: u64,
) -> Result<Vec<VoltageTrace>> {
    (0..records as u64)
        .into_par_iter()
        .map(|i| electronic_record(model, pulses, master_seed, i))
        .collect()
}

/// Pool the pulse integrals of an ensemble (parallel per-record analysis,
/// order-preserving concatenation).
pub fn par_pooled_estimates(traces: &[VoltageTrace]) -> Result<PulseEstimates> {
    let per_record: Vec<PulseEstimates> = traces
        .par_iter()
        .map(twinbeam::daq::analyze_trace)
        .collect::<Result<_>>()?;
    let mut integrals = Vec::new();
    for est in per_record {
        integrals.extend(est.integrals);
    }
    PulseEstimates::from_integrals(integrals)
}

/// Equivalent per-diode calibration power of a detected twin-beam state:
/// half the shot-noise-weighted total detected photons.
pub fn per_pd_equivalent_power(
    params: &FopaParams,
    chain: &DetectionChain,
) -> Result<f64> {
    let detected =
        twinbeam::model::apply_detection(&twinbeam::model::source_stats(params)?, chain)?;
    Ok(0.5 * (detected.mean_signal + chain.gain_ratio.powi(2) * detected.mean_idler))
}
