//! `reproduce-figure`: deterministic data bundles underlying the standard
//! plots of a twin-beam squeezing characterization: detector waveform
//! spectra, pulse-shift correlation, shot-noise calibration line, pulse
//! histograms, gain sweeps of the time-domain ratio, and the
//! frequency-domain sweep with the optimal-gain-ratio curve.

use std::path::Path;

use rayon::prelude::*;

use twinbeam::calibration::run_snl_calibration;
use twinbeam::daq::{correlation_coefficient, histogram};
use twinbeam::error::{Error, Result};
use twinbeam::metrics::{db, freq_domain_ratio};
use twinbeam::model::{
    balance_attenuation, optimal_gain_ratio, predict_ratio, DetectionChain, FopaParams,
};
use twinbeam::psd::ensemble_psd;
use twinbeam::seed::{derive_seed, SeedDomain};

use crate::commands::measure::measure_point;
use crate::commands::{
    chain_for_gain, par_calibration_ensemble, par_electronic_ensemble, par_pooled_estimates,
    par_twin_beam_ensemble, per_pd_equivalent_power,
};
use crate::config::ScenarioConfig;
use crate::output::{num, opt, CsvFile};

pub fn run(cfg: &ScenarioConfig, out_dir: &Path, figure: &str) -> Result<()> {
    match figure {
        "fig2b" => waveform_spectra(cfg, out_dir),
        "fig2c" => pulse_shift_correlation(cfg, out_dir),
        "fig2d" => calibration_line(cfg, out_dir),
        "fig3a" => pulse_histograms(cfg, out_dir),
        "fig3c" => gain_sweep_time_domain(cfg, out_dir),
        "fig4" => gain_sweep_frequency_domain(cfg, out_dir),
        other => Err(Error::Configuration(format!(
            "unknown figure id \"{other}\" (known: fig2b, fig2c, fig2d, fig3a, fig3c, fig4)"
        ))),
    }
}

/// Operating calibration power: the per-diode detected photon number
/// equivalent to the configured twin-beam point.
fn operating_power(cfg: &ScenarioConfig) -> Result<f64> {
    let chain = chain_for_gain(cfg, cfg.fopa.gain)?;
    per_pd_equivalent_power(&cfg.fopa, &chain)
}

/// Ensemble PSDs of the calibration light at several powers.
fn waveform_spectra(cfg: &ScenarioConfig, out_dir: &Path) -> Result<()> {
    let operating = operating_power(cfg)?;
    let fractions = [0.0, 0.5, 1.0, 2.0];
    let mut spectra = Vec::new();
    for (k, frac) in fractions.iter().enumerate() {
        let traces = par_calibration_ensemble(
            operating * frac,
            cfg.calibration.classical_noise_frac,
            &cfg.detector,
            &cfg.detection,
            cfg.daq.pulses_per_record,
            cfg.daq.records,
            derive_seed(cfg.run.master_seed, SeedDomain::Calibration, 1000 + k as u64),
        )?;
        spectra.push(ensemble_psd(&traces)?);
    }
    let mut csv = CsvFile::create(
        out_dir.join("fig2b_psd.csv"),
        &cfg.hash(),
        cfg.run.master_seed,
        "freq_hz,psd_p000,psd_p050,psd_p100,psd_p200",
    )?;
    for i in 0..spectra[0].freqs.len() {
        csv.row([
            num(spectra[0].freqs[i]),
            num(spectra[0].psd[i]),
            num(spectra[1].psd[i]),
            num(spectra[2].psd[i]),
            num(spectra[3].psd[i]),
        ])?;
    }
    csv.finish()?;
    Ok(())
}

/// Pulse-shift correlation of the calibration light, averaged per record as
/// in the reference acquisition.
fn pulse_shift_correlation(cfg: &ScenarioConfig, out_dir: &Path) -> Result<()> {
    let operating = operating_power(cfg)?;
    let traces = par_calibration_ensemble(
        operating,
        cfg.calibration.classical_noise_frac,
        &cfg.detector,
        &cfg.detection,
        cfg.daq.pulses_per_record,
        cfg.daq.records,
        cfg.run.master_seed,
    )?;
    let per_record: Vec<Vec<f64>> = traces
        .par_iter()
        .map(|t| {
            let est = twinbeam::daq::analyze_trace(t)?;
            (0..=10)
                .map(|shift| correlation_coefficient(&est, shift))
                .collect()
        })
        .collect::<Result<_>>()?;

    let mut csv = CsvFile::create(
        out_dir.join("fig2c_correlation.csv"),
        &cfg.hash(),
        cfg.run.master_seed,
        "shift,c_id_mean",
    )?;
    for shift in 0..=10usize {
        let mean = per_record.iter().map(|c| c[shift]).sum::<f64>() / per_record.len() as f64;
        csv.row([shift.to_string(), num(mean)])?;
    }
    csv.finish()?;
    Ok(())
}

fn calibration_line(cfg: &ScenarioConfig, out_dir: &Path) -> Result<()> {
    let fit = run_snl_calibration(
        &cfg.calibration,
        &cfg.detector,
        &cfg.detection,
        cfg.run.master_seed,
    )?;
    let mut csv = CsvFile::create(
        out_dir.join("fig2d_snl_calibration.csv"),
        &cfg.hash(),
        cfg.run.master_seed,
        "power_photons_per_pd,variance_v2,fit_variance_v2",
    )?;
    for &(power, variance) in &fit.points {
        csv.row([
            num(power),
            num(variance),
            num(fit.slope * power + fit.intercept),
        ])?;
    }
    csv.finish()?;
    Ok(())
}

fn write_histogram(
    cfg: &ScenarioConfig,
    path: &Path,
    estimates: &twinbeam::daq::PulseEstimates,
) -> Result<()> {
    let hist = histogram(estimates, cfg.measure.histogram_bins)?;
    let mut csv = CsvFile::create(
        path,
        &cfg.hash(),
        cfg.run.master_seed,
        "bin_lo_vs,bin_hi_vs,count",
    )?;
    let width = hist.bin_width();
    for (i, &count) in hist.counts.iter().enumerate() {
        csv.row([
            num(hist.lo + i as f64 * width),
            num(hist.lo + (i + 1) as f64 * width),
            count.to_string(),
        ])?;
    }
    csv.finish()
}

/// Histograms of the pulse integrals: twin beams, shot-noise reference of
/// the same detected power, and dark electronics.
fn pulse_histograms(cfg: &ScenarioConfig, out_dir: &Path) -> Result<()> {
    let chain = chain_for_gain(cfg, cfg.fopa.gain)?;
    let signal = par_twin_beam_ensemble(
        &cfg.fopa,
        &chain,
        &cfg.detector,
        cfg.daq.pulses_per_record,
        cfg.daq.records,
        cfg.run.master_seed,
    )?;
    write_histogram(
        cfg,
        &out_dir.join("fig3a_hist_id.csv"),
        &par_pooled_estimates(&signal)?,
    )?;

    let snl = par_calibration_ensemble(
        per_pd_equivalent_power(&cfg.fopa, &chain)?,
        cfg.calibration.classical_noise_frac,
        &cfg.detector,
        &chain,
        cfg.daq.pulses_per_record,
        cfg.daq.records,
        cfg.run.master_seed,
    )?;
    write_histogram(
        cfg,
        &out_dir.join("fig3a_hist_snl.csv"),
        &par_pooled_estimates(&snl)?,
    )?;

    let dark = par_electronic_ensemble(
        &cfg.detector,
        cfg.daq.pulses_per_record,
        cfg.daq.records,
        cfg.run.master_seed,
    )?;
    write_histogram(
        cfg,
        &out_dir.join("fig3a_hist_en.csv"),
        &par_pooled_estimates(&dark)?,
    )?;
    Ok(())
}

/// Measured and predicted time-domain ratio over the gain sweep.
fn gain_sweep_time_domain(cfg: &ScenarioConfig, out_dir: &Path) -> Result<()> {
    let fit = run_snl_calibration(
        &cfg.calibration,
        &cfg.detector,
        &cfg.detection,
        cfg.run.master_seed,
    )?;
    let dark = par_electronic_ensemble(
        &cfg.detector,
        cfg.daq.pulses_per_record,
        cfg.daq.records,
        cfg.run.master_seed,
    )?;
    let var_en = par_pooled_estimates(&dark)?.variance;

    let mut csv = CsvFile::create(
        out_dir.join("fig3c_ratio_vs_gain.csv"),
        &cfg.hash(),
        cfg.run.master_seed,
        "gain,pump_power_w,ratio_db_measured,ratio_db_predicted",
    )?;
    for &gain in &cfg.measure.gains {
        let (point, _) = measure_point(cfg, &fit, gain, var_en)?;
        let params = FopaParams {
            gain,
            ..cfg.fopa.clone()
        };
        let chain = chain_for_gain(cfg, gain)?;
        let predicted = predict_ratio(&params, &chain)?;
        csv.row([
            num(gain),
            num(cfg.gain_map.pump_power_for(gain)?),
            opt(point.result.ratio_db),
            num(db(predicted)),
        ])?;
    }
    csv.finish()?;
    Ok(())
}

/// Frequency-domain ratio over the gain sweep at the high-efficiency
/// detection point, with the optimal-gain-ratio prediction alongside.
fn gain_sweep_frequency_domain(cfg: &ScenarioConfig, out_dir: &Path) -> Result<()> {
    let mut csv = CsvFile::create(
        out_dir.join("fig4_freq_domain.csv"),
        &cfg.hash(),
        cfg.run.master_seed,
        "gain,ratio_db_simulated,ratio_db_predicted,r_opt,ratio_db_predicted_ropt",
    )?;
    let dark = par_electronic_ensemble(
        &cfg.detector,
        cfg.daq.pulses_per_record,
        cfg.daq.records,
        derive_seed(cfg.run.master_seed, SeedDomain::FrequencyDomain, 0),
    )?;
    for (k, &gain) in cfg.measure.gains.iter().enumerate() {
        let params = FopaParams {
            gain,
            ..cfg.fopa.clone()
        };
        let raw = DetectionChain {
            eta_signal: cfg.frequency.eta_signal,
            eta_idler: cfg.frequency.eta_idler,
            ..cfg.detection.clone()
        };
        let chain = if cfg.measure.auto_balance && gain > 1.0 {
            balance_attenuation(&params, &raw)?
        } else {
            raw.clone()
        };
        let seed = derive_seed(cfg.run.master_seed, SeedDomain::FrequencyDomain, 1 + k as u64);
        let signal = par_twin_beam_ensemble(
            &params,
            &chain,
            &cfg.detector,
            cfg.daq.pulses_per_record,
            cfg.daq.records,
            seed,
        )?;
        let snl = par_calibration_ensemble(
            per_pd_equivalent_power(&params, &chain)?,
            0.0,
            &cfg.detector,
            &chain,
            cfg.daq.pulses_per_record,
            cfg.daq.records,
            seed.wrapping_add(1),
        )?;
        let ratio = freq_domain_ratio(
            &signal,
            &snl,
            &dark,
            cfg.frequency.center_hz,
            cfg.frequency.bandwidth_hz,
        )?;
        let predicted = predict_ratio(&params, &chain)?;
        let optimal = optimal_gain_ratio(&params, raw.eta_signal, raw.eta_idler)?;
        csv.row([
            num(gain),
            num(db(ratio.max(f64::MIN_POSITIVE))),
            num(db(predicted)),
            num(optimal.gain_ratio),
            num(db(optimal.ratio)),
        ])?;
    }
    csv.finish()?;
    Ok(())
}
