//! `simulate-traces`: write raw detector records to disk in the trace
//! format, one file per record, with a manifest.

use std::path::Path;

use twinbeam::error::Result;
use twinbeam::model::FopaParams;

use crate::commands::{chain_for_gain, par_twin_beam_ensemble};
use crate::config::ScenarioConfig;
use crate::output::CsvFile;

pub fn run(cfg: &ScenarioConfig, out_dir: &Path, records: Option<usize>) -> Result<()> {
    let records = records.unwrap_or(cfg.daq.records);
    let params = FopaParams {
        ..cfg.fopa.clone()
    };
    let chain = chain_for_gain(cfg, params.gain)?;
    let traces = par_twin_beam_ensemble(
        &params,
        &chain,
        &cfg.detector,
        cfg.daq.pulses_per_record,
        records,
        cfg.run.master_seed,
    )?;

    std::fs::create_dir_all(out_dir)?;
    let mut manifest = CsvFile::create(
        out_dir.join("manifest.csv"),
        &cfg.hash(),
        cfg.run.master_seed,
        "record,file",
    )?;
    for (i, trace) in traces.iter().enumerate() {
        let name = format!("trace_{i:05}.tbt1");
        trace.save(out_dir.join(&name))?;
        manifest.row([i.to_string(), name])?;
    }
    manifest.finish()?;
    println!("simulate-traces: {records} records -> {}", out_dir.display());
    Ok(())
}
