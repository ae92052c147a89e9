//! Flat CSV tables. Floats use the shortest round-trip representation, so
//! re-running with identical inputs yields byte-identical files.

use crate::Result;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

/// Formats a float so that parsing it back gives the same value; `-0` prints as `0`.
pub fn num(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    format!("{v}")
}

pub fn write_table<W, R, I>(out: W, header: &[&str], rows: I) -> Result<()>
where
    W: Write,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
    I: IntoIterator<Item = R>,
{
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(header)?;
    for r in rows {
        wtr.write_record(r)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}
