//! `calibrate`: run the shot-noise calibration sweep and persist the fit.

use std::path::Path;

use twinbeam::calibration::{run_snl_calibration, CalibrationRecord};
use twinbeam::error::Result;

use crate::config::ScenarioConfig;
use crate::output::{num, CsvFile};

pub fn run(cfg: &ScenarioConfig, out_dir: &Path) -> Result<()> {
    let fit = run_snl_calibration(
        &cfg.calibration,
        &cfg.detector,
        &cfg.detection,
        cfg.run.master_seed,
    )?;

    let mut csv = CsvFile::create(
        out_dir.join("calibration_points.csv"),
        &cfg.hash(),
        cfg.run.master_seed,
        "power_photons_per_pd,variance_v2,fit_variance_v2",
    )?;
    for &(power, variance) in &fit.points {
        let fitted = fit.slope * power + fit.intercept;
        csv.row([num(power), num(variance), num(fitted)])?;
    }
    csv.finish()?;

    let record = CalibrationRecord::new(cfg.calibration.clone(), fit, cfg.run.master_seed);
    record.save(out_dir.join("calibration.toml"))?;
    println!(
        "calibration: slope={:.6e} intercept={:.6e} r_squared={:.6}",
        record.fit.slope, record.fit.intercept, record.fit.r_squared
    );
    Ok(())
}
