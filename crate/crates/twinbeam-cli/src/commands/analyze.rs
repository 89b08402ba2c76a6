//! `analyze`: ingest externally produced trace files, run the pulse
//! pipeline and emit pulse integrals, shift correlations and the ensemble
//! PSD as CSV.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use twinbeam::daq::{analyze_trace, correlation_coefficient, PulseEstimates};
use twinbeam::error::{Error, Result};
use twinbeam::psd::ensemble_psd;
use twinbeam::trace::VoltageTrace;

use crate::config::ScenarioConfig;
use crate::output::{num, CsvFile};

const MAX_CORRELATION_SHIFT: usize = 10;

pub fn run(cfg: &ScenarioConfig, out_dir: &Path, inputs: &[PathBuf]) -> Result<()> {
    if inputs.is_empty() {
        return Err(Error::Parameter("no trace files given".into()));
    }
    let mut files: Vec<PathBuf> = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let mut entries: Vec<PathBuf> = std::fs::read_dir(input)?
                .filter_map(|e| e.ok())
                .map(|e| e.path())
                .filter(|p| p.extension().is_some_and(|x| x == "tbt1"))
                .collect();
            entries.sort();
            files.extend(entries);
        } else {
            files.push(input.clone());
        }
    }
    if files.is_empty() {
        return Err(Error::Parameter("no .tbt1 files found".into()));
    }

    let traces: Vec<VoltageTrace> = files
        .iter()
        .map(VoltageTrace::load)
        .collect::<Result<_>>()?;
    let per_record: Vec<PulseEstimates> = traces
        .par_iter()
        .map(analyze_trace)
        .collect::<Result<_>>()?;

    let hash = cfg.hash();
    let seed = cfg.run.master_seed;

    let mut pulses = CsvFile::create(
        out_dir.join("pulses.csv"),
        &hash,
        seed,
        "record,pulse,integral_vs",
    )?;
    let mut pooled = Vec::new();
    for (r, est) in per_record.iter().enumerate() {
        for (n, &e) in est.integrals.iter().enumerate() {
            pulses.row([r.to_string(), n.to_string(), num(e)])?;
        }
        pooled.extend(est.integrals.iter().copied());
    }
    pulses.finish()?;

    let pooled = PulseEstimates::from_integrals(pooled)?;
    let mut summary = CsvFile::create(
        out_dir.join("summary.csv"),
        &hash,
        seed,
        "records,pulses,mean_vs,variance_v2",
    )?;
    summary.row([
        traces.len().to_string(),
        pooled.len().to_string(),
        num(pooled.mean),
        num(pooled.variance),
    ])?;
    summary.finish()?;

    let mut corr = CsvFile::create(
        out_dir.join("correlation.csv"),
        &hash,
        seed,
        "shift,c_id",
    )?;
    let max_shift = MAX_CORRELATION_SHIFT.min(pooled.len().saturating_sub(1));
    for shift in 0..=max_shift {
        corr.row([shift.to_string(), num(correlation_coefficient(&pooled, shift)?)])?;
    }
    corr.finish()?;

    let psd = ensemble_psd(&traces)?;
    let mut psd_csv = CsvFile::create(
        out_dir.join("psd.csv"),
        &hash,
        seed,
        "freq_hz,psd_v2_per_hz",
    )?;
    for (f, p) in psd.freqs.iter().zip(&psd.psd) {
        psd_csv.row([num(*f), num(*p)])?;
    }
    psd_csv.finish()?;

    println!(
        "analyze: {} records, {} pulses -> {}",
        traces.len(),
        pooled.len(),
        out_dir.display()
    );
    Ok(())
}
