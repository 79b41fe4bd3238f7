//! On-disk formats: binary waveform files and CSV grid references.
//!
//! Waveform files are little-endian: an 8-byte magic `ILCWAVE1`, a u64
//! sample count, an f64 sample rate in Hz, then interleaved f64 I/Q pairs.
//! Grid references serialize as CSV rows `symbol_index, subcarrier_index,
//! re, im` with one row per occupied resource element.

use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::waveform::{ComplexWaveform, GridReference};

const WAVEFORM_MAGIC: &[u8; 8] = b"ILCWAVE1";

/// Writes a waveform in the `ILCWAVE1` binary format.
pub fn write_waveform(path: &Path, w: &ComplexWaveform) -> Result<()> {
    let mut out = BufWriter::new(std::fs::File::create(path)?);
    out.write_all(WAVEFORM_MAGIC)?;
    out.write_all(&(w.len() as u64).to_le_bytes())?;
    out.write_all(&w.sample_rate.to_le_bytes())?;
    for s in &w.samples {
        out.write_all(&s.re.to_le_bytes())?;
        out.write_all(&s.im.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a waveform written by [`write_waveform`].
pub fn read_waveform(path: &Path) -> Result<ComplexWaveform> {
    let mut input = BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != WAVEFORM_MAGIC {
        return Err(Error::Parse(format!(
            "{}: bad magic {:?}, expected ILCWAVE1",
            path.display(),
            String::from_utf8_lossy(&magic)
        )));
    }
    let mut u64buf = [0u8; 8];
    input.read_exact(&mut u64buf)?;
    let count = u64::from_le_bytes(u64buf) as usize;
    input.read_exact(&mut u64buf)?;
    let sample_rate = f64::from_le_bytes(u64buf);
    let mut samples = Vec::with_capacity(count);
    let mut pair = [0u8; 16];
    for i in 0..count {
        input.read_exact(&mut pair).map_err(|e| {
            Error::Parse(format!(
                "{}: truncated at sample {i} of {count}: {e}",
                path.display()
            ))
        })?;
        let re = f64::from_le_bytes(pair[..8].try_into().expect("8 bytes"));
        let im = f64::from_le_bytes(pair[8..].try_into().expect("8 bytes"));
        samples.push(Complex64::new(re, im));
    }
    ComplexWaveform::new(samples, sample_rate)
}

/// Writes a grid reference as CSV, one row per resource element.
pub fn write_grid_csv(path: &Path, grid: &GridReference) -> Result<()> {
    let mut out = BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "symbol_index,subcarrier_index,re,im")?;
    for (sym, row) in grid.data_symbols.iter().enumerate() {
        for (&idx, point) in grid.subcarrier_indices.iter().zip(row) {
            writeln!(out, "{sym},{idx},{:.17e},{:.17e}", point.re, point.im)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads a grid reference CSV written by [`write_grid_csv`]. Rows must be
/// grouped by symbol in ascending order with a consistent subcarrier set.
pub fn read_grid_csv(path: &Path) -> Result<GridReference> {
    let input = BufReader::new(std::fs::File::open(path)?);
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse(format!("{}: empty grid file", path.display())))??;
    if header.trim() != "symbol_index,subcarrier_index,re,im" {
        return Err(Error::Parse(format!(
            "{}: unexpected header {header:?}",
            path.display()
        )));
    }
    let mut subcarrier_indices: Vec<i32> = Vec::new();
    let mut data_symbols: Vec<Vec<Complex64>> = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::Parse(format!(
                "{}:{}: expected 4 fields, got {}",
                path.display(),
                lineno + 2,
                fields.len()
            )));
        }
        let parse_err =
            |what: &str| Error::Parse(format!("{}:{}: bad {what}", path.display(), lineno + 2));
        let sym: usize = fields[0]
            .trim()
            .parse()
            .map_err(|_| parse_err("symbol index"))?;
        let idx: i32 = fields[1]
            .trim()
            .parse()
            .map_err(|_| parse_err("subcarrier index"))?;
        let re: f64 = fields[2].trim().parse().map_err(|_| parse_err("re"))?;
        let im: f64 = fields[3].trim().parse().map_err(|_| parse_err("im"))?;
        if sym == data_symbols.len() {
            data_symbols.push(Vec::new());
        } else if sym + 1 != data_symbols.len() {
            return Err(parse_err("symbol order (must be grouped ascending)"));
        }
        if data_symbols.len() == 1 {
            subcarrier_indices.push(idx);
        } else {
            let col = data_symbols[sym].len();
            if subcarrier_indices.get(col) != Some(&idx) {
                return Err(parse_err("subcarrier set (differs from first symbol)"));
            }
        }
        data_symbols[sym].push(Complex64::new(re, im));
    }
    if data_symbols.is_empty() {
        return Err(Error::Parse(format!("{}: no data rows", path.display())));
    }
    let width = subcarrier_indices.len();
    if data_symbols.iter().any(|row| row.len() != width) {
        return Err(Error::Parse(format!(
            "{}: ragged symbol rows",
            path.display()
        )));
    }
    Ok(GridReference {
        data_symbols,
        subcarrier_indices,
    })
}
