//! Sampled balanced-detector voltage traces and their on-disk format.
//!
//! Traces are stored in a little-endian binary layout:
//!
//! | field                | type       |
//! |----------------------|------------|
//! | magic                | `"TBT1"`   |
//! | version              | `u16`      |
//! | sample_rate_hz       | `f64`      |
//! | pulse_period_s       | `f64`      |
//! | first_pulse_offset_s | `f64`      |
//! | n_samples            | `u64`      |
//! | samples (volts)      | `f32 * n`  |
//!
//! Readers reject unknown magic bytes or versions.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"TBT1";
const VERSION: u16 = 1;

/// A sampled balanced-detector output record.
#[derive(Debug, Clone, PartialEq)]
pub struct VoltageTrace {
    /// Sample values in volts.
    pub samples: Vec<f64>,
    pub sample_rate_hz: f64,
    /// Pulse repetition period.
    pub pulse_period_s: f64,
    /// Time of the first pulse peak relative to the record start.
    pub first_pulse_offset_s: f64,
    /// Samples that exceeded the ADC full scale before quantization.
    /// Synthesis diagnostic only; not stored on disk.
    pub saturated_count: usize,
}

impl VoltageTrace {
    /// Pulse period expressed in samples (validated to be integral at
    /// synthesis time).
    pub fn period_samples(&self) -> usize {
        (self.pulse_period_s * self.sample_rate_hz).round() as usize
    }

    pub fn first_pulse_offset_samples(&self) -> usize {
        (self.first_pulse_offset_s * self.sample_rate_hz).round() as usize
    }

    /// Number of whole pulse periods contained in the record.
    pub fn pulse_slots(&self) -> usize {
        self.samples.len().checked_div(self.period_samples()).unwrap_or(0)
    }

    /// Record duration in seconds.
    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }

    /// Traces are geometry-compatible when length, rate and period match.
    pub fn same_geometry(&self, other: &VoltageTrace) -> bool {
        self.samples.len() == other.samples.len()
            && self.sample_rate_hz == other.sample_rate_hz
            && self.pulse_period_s == other.pulse_period_s
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&self.sample_rate_hz.to_le_bytes())?;
        w.write_all(&self.pulse_period_s.to_le_bytes())?;
        w.write_all(&self.first_pulse_offset_s.to_le_bytes())?;
        w.write_all(&(self.samples.len() as u64).to_le_bytes())?;
        for &s in &self.samples {
            w.write_all(&(s as f32).to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format(format!(
                "bad magic {:02x?}, expected \"TBT1\"",
                magic
            )));
        }
        let mut u16buf = [0u8; 2];
        r.read_exact(&mut u16buf)?;
        let version = u16::from_le_bytes(u16buf);
        if version != VERSION {
            return Err(Error::Format(format!(
                "unsupported trace version {version}, expected {VERSION}"
            )));
        }
        let mut f64buf = [0u8; 8];
        let mut read_f64 = |r: &mut R| -> Result<f64> {
            r.read_exact(&mut f64buf)?;
            Ok(f64::from_le_bytes(f64buf))
        };
        let sample_rate_hz = read_f64(&mut r)?;
        let pulse_period_s = read_f64(&mut r)?;
        let first_pulse_offset_s = read_f64(&mut r)?;
        let mut u64buf = [0u8; 8];
        r.read_exact(&mut u64buf)?;
        let n = u64::from_le_bytes(u64buf) as usize;
        let mut samples = Vec::with_capacity(n.min(1 << 28));
        let mut f32buf = [0u8; 4];
        for _ in 0..n {
            r.read_exact(&mut f32buf)?;
            samples.push(f32::from_le_bytes(f32buf) as f64);
        }
        Ok(VoltageTrace {
            samples,
            sample_rate_hz,
            pulse_period_s,
            first_pulse_offset_s,
            saturated_count: 0,
        })
    }

    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}
