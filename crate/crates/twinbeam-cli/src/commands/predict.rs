//! `predict`: analytic noise-ratio and optimal-gain-ratio tables, no
//! synthesis involved.

use std::path::Path;

use twinbeam::error::Result;
use twinbeam::metrics::db;
use twinbeam::model::{optimal_gain_ratio, predict_ratio, FopaParams};

use crate::commands::chain_for_gain;
use crate::config::ScenarioConfig;
use crate::output::{num, CsvFile};

pub fn run(
    cfg: &ScenarioConfig,
    out_dir: &Path,
    gain_min: f64,
    gain_max: f64,
    steps: usize,
) -> Result<()> {
    if !(gain_min >= 1.0 && gain_max > gain_min && steps >= 2) {
        return Err(twinbeam::Error::Parameter(format!(
            "need 1 <= gain_min < gain_max and steps >= 2, got [{gain_min}, {gain_max}] x {steps}"
        )));
    }
    let mut csv = CsvFile::create(
        out_dir.join("predict.csv"),
        &cfg.hash(),
        cfg.run.master_seed,
        "gain,pump_power_w,ratio,ratio_db,r_opt,ratio_opt,ratio_opt_db",
    )?;
    for k in 0..steps {
        let gain = gain_min + (gain_max - gain_min) * k as f64 / (steps - 1) as f64;
        let params = FopaParams {
            gain,
            ..cfg.fopa.clone()
        };
        let chain = chain_for_gain(cfg, gain)?;
        let ratio = predict_ratio(&params, &chain)?;
        // The optimized electronic gain ratio replaces balancing attenuation,
        // so it is evaluated at the raw configured efficiencies.
        let opt = if gain > 1.0 {
            Some(optimal_gain_ratio(
                &params,
                cfg.detection.eta_signal,
                cfg.detection.eta_idler,
            )?)
        } else {
            None
        };
        let pump = cfg.gain_map.pump_power_for(gain)?;
        csv.row([
            num(gain),
            num(pump),
            num(ratio),
            num(db(ratio)),
            opt.map(|o| num(o.gain_ratio)).unwrap_or_else(|| "-".into()),
            opt.map(|o| num(o.ratio)).unwrap_or_else(|| "-".into()),
            opt.map(|o| num(db(o.ratio))).unwrap_or_else(|| "-".into()),
        ])?;
    }
    csv.finish()?;
    println!("predict: {steps} points -> {}", out_dir.display());
    Ok(())
}
