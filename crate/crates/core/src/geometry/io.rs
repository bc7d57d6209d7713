//! Scalar-field files.
//!
//! Binary layout (little-endian): the 4-byte magic `S2F1`, `n` as `u32`,
//! `res` as `u32`, then `res^{2n}` `f64` samples in row-major grid order.
//! CSV layout: header `x1,…,x{2n},value`, one row per grid point in the same
//! order.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{ScalarField, TorusGrid};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"S2F1";

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

pub fn write_binary(field: &ScalarField, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    let mut put = |bytes: &[u8]| w.write_all(bytes).map_err(|e| io_err(path, e));
    put(MAGIC)?;
    put(&(field.grid.n() as u32).to_le_bytes())?;
    put(&(field.grid.res() as u32).to_le_bytes())?;
    for x in &field.samples {
        put(&x.to_le_bytes())?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn read_binary(path: &Path) -> Result<ScalarField> {
    let mut bytes = Vec::new();
    File::open(path).and_then(|mut f| f.read_to_end(&mut bytes)).map_err(|e| io_err(path, e))?;
    if bytes.len() < 12 || &bytes[..4] != MAGIC {
        return Err(Error::Format(format!("{}: missing S2F1 header", path.display())));
    }
    let word = |k: usize| u32::from_le_bytes(bytes[k..k + 4].try_into().unwrap()) as usize;
    let grid = TorusGrid::new(word(4), word(8))?;
    let body = &bytes[12..];
    if body.len() != grid.len() * 8 {
        return Err(Error::Format(format!(
            "{}: expected {} samples, found {} bytes",
            path.display(),
            grid.len(),
            body.len()
        )));
    }
    let samples = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    ScalarField::new(grid, samples)
}

pub fn write_csv(field: &ScalarField, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    let d = field.grid.dims();
    let header: Vec<String> = (1..=d).map(|a| format!("x{a}")).chain(["value".to_string()]).collect();
    writeln!(w, "{}", header.join(",")).map_err(|e| io_err(path, e))?;
    for (idx, v) in field.samples.iter().enumerate() {
        let row: Vec<String> = field.grid.coords(idx).iter().map(|x| format!("{x:.17e}")).collect();
        writeln!(w, "{},{v:.17e}", row.join(",")).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Reads a CSV written by [`write_csv`]; rows must be in grid order.
pub fn read_csv(path: &Path, n: usize, res: usize) -> Result<ScalarField> {
    let grid = TorusGrid::new(n, res)?;
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let header = lines.next().transpose().map_err(|e| io_err(path, e))?.unwrap_or_default();
    if header.split(',').count() != grid.dims() + 1 {
        return Err(Error::Format(format!("{}: header does not match n = {n}", path.display())));
    }
    let mut samples = Vec::with_capacity(grid.len());
    for (row, line) in lines.enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        let value = line
            .rsplit(',')
            .next()
            .and_then(|s| s.trim().parse::<f64>().ok())
            .ok_or_else(|| Error::Format(format!("{}: bad value on row {}", path.display(), row + 2)))?;
        samples.push(value);
    }
    ScalarField::new(grid, samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_and_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = TorusGrid::new(2, 4).unwrap();
        let f = ScalarField::from_fn(g, |x| x[0].sin() - 0.25 * x[3]);
        let bin = dir.path().join("f.bin");
        write_binary(&f, &bin).unwrap();
        assert_eq!(read_binary(&bin).unwrap(), f);
        let raw = std::fs::read(&bin).unwrap();
        assert_eq!(&raw[..4], b"S2F1");
        assert_eq!(raw.len(), 12 + 8 * g.len());
        let csv = dir.path().join("f.csv");
        write_csv(&f, &csv).unwrap();
        assert_eq!(read_csv(&csv, 2, 4).unwrap(), f);
        let text = std::fs::read_to_string(&csv).unwrap();
        assert!(text.starts_with("x1,x2,x3,x4,value\n"));
    }

    #[test]
    fn rejects_bad_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.bin");
        std::fs::write(&p, b"NOPE0000000000").unwrap();
        assert!(matches!(read_binary(&p), Err(Error::Format(_))));
    }
}
