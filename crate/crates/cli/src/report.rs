//! CSV writers. Floats are written with 17 significant digits so that files
//! re-parse to identical values and byte-compare across reruns.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use motionssm::stats::{median, quartiles};
use motionssm::{Error, Result};

pub fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

pub struct CsvWriter {
    out: BufWriter<File>,
}

impl CsvWriter {
    pub fn create<P: AsRef<Path>>(path: P, header: &str) -> Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "{header}")?;
        Ok(Self { out })
    }

    pub fn row(&mut self, fields: &[String]) -> Result<()> {
        writeln!(self.out, "{}", fields.join(","))?;
        Ok(())
    }
}

/// One aggregate row per (group, metric): median and quartiles over seeds.
pub fn aggregate_rows(
    writer: &mut CsvWriter,
    group: &str,
    metric: &str,
    values: &[f64],
) -> Result<()> {
    if values.is_empty() {
        return Err(Error::Precondition(format!("no values to aggregate for {metric}")));
    }
    let (q25, q75) = quartiles(values);
    writer.row(&[
        group.to_string(),
        metric.to_string(),
        fmt(median(values)),
        fmt(q25),
        fmt(q75),
    ])
}
