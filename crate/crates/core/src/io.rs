//! CSV and JSON input/output.
//!
//! Paths are read from and written to CSV with header `t,x1,...,xd`, one row
//! per sample.

use std::io::{Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::variation::SampledPath;

pub fn read_path_csv<R: Read>(reader: R) -> Result<SampledPath> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.len() < 2 || &headers[0] != "t" {
        return Err(Error::InvalidPath("header must be t,x1,...,xd".into()));
    }
    let dim = headers.len() - 1;
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != dim + 1 {
            return Err(Error::InvalidPath(format!("row {} has {} fields", line + 1, record.len())));
        }
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| Error::InvalidPath(format!("row {}: {s:?}: {e}", line + 1)))
        };
        times.push(parse(&record[0])?);
        for field in record.iter().skip(1) {
            values.push(parse(field)?);
        }
    }
    SampledPath::from_flat(times, dim, values)
}

pub fn load_path_csv(path: impl AsRef<Path>) -> Result<SampledPath> {
    read_path_csv(std::fs::File::open(path)?)
}

pub fn write_path_csv<W: Write>(x: &SampledPath, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["t".to_string()];
    header.extend((1..=x.dim()).map(|i| format!("x{i}")));
    wtr.write_record(&header)?;
    for (k, &t) in x.times().iter().enumerate() {
        let mut row = vec![format!("{t:e}")];
        row.extend(x.point(k).iter().map(|v| format!("{v:e}")));
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn save_path_csv(x: &SampledPath, path: impl AsRef<Path>) -> Result<()> {
    write_path_csv(x, std::fs::File::create(path)?)
}

pub fn load_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let file = std::fs::File::open(path)?;
    Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
}

pub fn save_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(file), value)?;
    Ok(())
}
