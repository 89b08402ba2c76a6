//! CSV emission. Every file starts with comment lines carrying the resolved
//! configuration hash and master seed, followed by a header row; numeric
//! cells use the shortest round-trip float form so re-runs are bit-exact.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use twinbeam::error::Result;

pub struct CsvFile {
    writer: BufWriter<File>,
}

impl CsvFile {
    pub fn create<P: AsRef<Path>>(
        path: P,
        config_hash: &str,
        master_seed: u64,
        header: &str,
    ) -> Result<Self> {
        if let Some(parent) = path.as_ref().parent() {
            fs::create_dir_all(parent)?;
        }
        let mut writer = BufWriter::new(File::create(path)?);
        writeln!(writer, "# config_hash={config_hash}")?;
        writeln!(writer, "# master_seed={master_seed}")?;
        writeln!(writer, "{header}")?;
        Ok(Self { writer })
    }

    pub fn row<I, S>(&mut self, cells: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut first = true;
        for cell in cells {
            if !first {
                write!(self.writer, ",")?;
            }
            write!(self.writer, "{}", cell.as_ref())?;
            first = false;
        }
        writeln!(self.writer)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.writer.flush()?;
        Ok(())
    }
}

/// Shortest round-trip representation of a float.
pub fn num(v: f64) -> String {
    format!("{v}")
}

/// Optional value, "-" when absent.
pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_else(|| "-".to_string())
}
