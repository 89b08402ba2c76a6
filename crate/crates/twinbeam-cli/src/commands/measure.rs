//! `measure`: sweep the amplifier gain, synthesize records, run the pulse
//! pipeline and emit squeezing results with electronic-noise subtraction and
//! loss correction. Requires an existing calibration record; never
//! recalibrates silently.

use std::path::Path;

use twinbeam::calibration::{snl_at_power, CalibrationRecord};
use twinbeam::daq::histogram;
use twinbeam::error::Result;
use twinbeam::metrics::{compute_rt, SqueezingResult};
use twinbeam::model::FopaParams;

use crate::commands::{
    chain_for_gain, par_electronic_ensemble, par_pooled_estimates, par_twin_beam_ensemble,
    per_pd_equivalent_power,
};
use crate::config::ScenarioConfig;
use crate::output::{num, opt, CsvFile};

#[derive(serde::Serialize)]
pub struct MeasurePoint {
    pub gain: f64,
    pub eta_signal: f64,
    pub eta_idler: f64,
    pub result: SqueezingResult,
    pub snl_extrapolated: bool,
}

/// Structured-text mirror of the results CSV.
#[derive(serde::Serialize)]
struct MeasureRecord<'a> {
    version: u32,
    config_hash: String,
    master_seed: u64,
    points: &'a [MeasurePoint],
}

/// One gain point of the measurement sweep.
pub fn measure_point(
    cfg: &ScenarioConfig,
    fit: &twinbeam::calibration::CalibrationFit,
    gain: f64,
    var_en: f64,
) -> Result<(MeasurePoint, twinbeam::daq::PulseEstimates)> {
    let params = FopaParams {
        gain,
        ..cfg.fopa.clone()
    };
    let chain = chain_for_gain(cfg, gain)?;
    let traces = par_twin_beam_ensemble(
        &params,
        &chain,
        &cfg.detector,
        cfg.daq.pulses_per_record,
        cfg.daq.records,
        cfg.run.master_seed,
    )?;
    let estimates = par_pooled_estimates(&traces)?;
    let snl = snl_at_power(fit, per_pd_equivalent_power(&params, &chain)?)?;
    let result = compute_rt(estimates.variance, snl.variance, var_en)?
        .with_loss_correction(chain.eta_mean())?;
    Ok((
        MeasurePoint {
            gain,
            eta_signal: chain.eta_signal,
            eta_idler: chain.eta_idler,
            result,
            snl_extrapolated: snl.extrapolated,
        },
        estimates,
    ))
}

fn flags(point: &MeasurePoint) -> String {
    let mut out = Vec::new();
    if point.result.unphysical_subtraction {
        out.push("unphysical_subtraction");
    }
    if point.result.unphysical_correction {
        out.push("unphysical_correction");
    }
    if point.snl_extrapolated {
        out.push("snl_extrapolated");
    }
    if out.is_empty() {
        "ok".to_string()
    } else {
        out.join(";")
    }
}

pub fn run(cfg: &ScenarioConfig, calibration_path: &Path, out_dir: &Path) -> Result<()> {
    let record = CalibrationRecord::load(calibration_path)?;

    let dark = par_electronic_ensemble(
        &cfg.detector,
        cfg.daq.pulses_per_record,
        cfg.daq.records,
        cfg.run.master_seed,
    )?;
    let var_en = par_pooled_estimates(&dark)?.variance;

    let mut csv = CsvFile::create(
        out_dir.join("measure_results.csv"),
        &cfg.hash(),
        cfg.run.master_seed,
        "gain,eta_signal,eta_idler,gain_ratio,var_id_v2,var_snl_v2,var_en_v2,ratio,ratio_db,corrected_db,eta_bar,flags",
    )?;

    let mut points = Vec::new();
    for &gain in &cfg.measure.gains {
        let (point, estimates) = measure_point(cfg, &record.fit, gain, var_en)?;
        csv.row([
            num(gain),
            num(point.eta_signal),
            num(point.eta_idler),
            num(cfg.detection.gain_ratio),
            num(point.result.var_id),
            num(point.result.var_snl),
            num(point.result.var_en),
            opt(point.result.ratio),
            opt(point.result.ratio_db),
            opt(point.result.corrected_db),
            opt(point.result.eta_bar),
            flags(&point),
        ])?;

        let hist = histogram(&estimates, cfg.measure.histogram_bins)?;
        let mut hist_csv = CsvFile::create(
            out_dir.join(format!("hist_id_g{gain}.csv")),
            &cfg.hash(),
            cfg.run.master_seed,
            "bin_lo_vs,bin_hi_vs,count",
        )?;
        let width = hist.bin_width();
        for (i, &count) in hist.counts.iter().enumerate() {
            hist_csv.row([
                num(hist.lo + i as f64 * width),
                num(hist.lo + (i + 1) as f64 * width),
                count.to_string(),
            ])?;
        }
        hist_csv.finish()?;
        points.push(point);
    }
    csv.finish()?;

    let structured = MeasureRecord {
        version: 1,
        config_hash: cfg.hash(),
        master_seed: cfg.run.master_seed,
        points: &points,
    };
    std::fs::write(
        out_dir.join("measure_results.toml"),
        toml::to_string_pretty(&structured)
            .map_err(|e| twinbeam::Error::Format(e.to_string()))?,
    )?;
    println!("measure: {} gain points -> {}", points.len(), out_dir.display());
    Ok(())
}
