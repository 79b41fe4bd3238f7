//! CSV artifact emission.
//!
//! All numeric formatting is fixed-precision so that identical runs
//! produce identical bytes (the determinism contract); error text is
//! escaped per RFC 4180 so failing sweep rows stay machine-readable.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use dpdlab_core::error::Result;
use dpdlab_core::gmp::GmpModel;

/// Formats a dB quantity (six decimals: far below any metric tolerance).
pub fn fmt_db(x: f64) -> String {
    format!("{x:.6}")
}

/// Formats a frequency in Hz.
pub fn fmt_hz(x: f64) -> String {
    format!("{x:.3}")
}

/// Formats a linear amplitude or phase (scientific keeps small values).
pub fn fmt_amp(x: f64) -> String {
    format!("{x:.9e}")
}

/// Quotes a CSV field if it contains separators or quotes.
pub fn csv_escape(text: &str) -> String {
    if text.contains(',') || text.contains('"') || text.contains('\n') {
        format!("\"{}\"", text.replace('"', "\"\""))
    } else {
        text.to_string()
    }
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

/// Writes a CSV file: one header naming columns and units, then rows.
pub fn write_csv(path: &Path, header: &str, rows: &[String]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{header}")?;
    for row in rows {
        writeln!(out, "{row}")?;
    }
    out.flush()?;
    Ok(())
}

/// PSD rows as (freq_hz, level_db).
pub fn write_psd(path: &Path, spectrum: &[(f64, f64)]) -> Result<()> {
    let rows: Vec<String> = spectrum
        .iter()
        .map(|(f, l)| format!("{},{}", fmt_hz(*f), fmt_db(*l)))
        .collect();
    write_csv(path, "freq_hz,level_db", &rows)
}

/// AM-AM/AM-PM scatter rows as (input amplitude, output amplitude, phase
/// shift).
pub fn write_scatter(path: &Path, scatter: &[(f64, f64, f64)]) -> Result<()> {
    let rows: Vec<String> = scatter
        .iter()
        .map(|(a, b, p)| format!("{},{},{}", fmt_amp(*a), fmt_amp(*b), fmt_amp(*p)))
        .collect();
    write_csv(
        path,
        "input_amplitude,output_amplitude,phase_shift_rad",
        &rows,
    )
}

/// GMP model: a comment line carrying the full index configuration, then
/// one row per term in canonical order.
pub fn write_gmp_model(path: &Path, model: &GmpModel) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    let c = &model.config;
    writeln!(
        out,
        "# gmp order_k={} memory_depth_l={} cross_memory_m={} include_lagging={} include_leading={} ridge={:e}",
        c.order_k, c.memory_depth_l, c.cross_memory_m, c.include_lagging, c.include_leading, c.ridge
    )?;
    writeln!(out, "branch,k,l,m,re,im")?;
    for (t, coeff) in model.term_index.iter().zip(&model.coefficients) {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            t.branch,
            t.k,
            t.l,
            t.m,
            fmt_amp(coeff.re),
            fmt_amp(coeff.im)
        )?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use dpdlab_core::gmp::GmpConfig;
    use num_complex::Complex64;

    #[test]
    fn escape_quotes_fields_with_separators() {
        assert_eq!(csv_escape("plain"), "plain");
        assert_eq!(csv_escape("a,b"), "\"a,b\"");
        assert_eq!(csv_escape("say \"hi\""), "\"say \"\"hi\"\"\"");
    }

    #[test]
    fn csv_bytes_are_reproducible() {
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("a.csv");
        let p2 = dir.path().join("b.csv");
        let rows = vec![format!("{},{}", fmt_db(-50.123456789), fmt_db(0.1))];
        write_csv(&p1, "x_db,y_db", &rows).unwrap();
        write_csv(&p2, "x_db,y_db", &rows).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
        let text = std::fs::read_to_string(&p1).unwrap();
        assert_eq!(text, "x_db,y_db\n-50.123457,0.100000\n");
    }

    #[test]
    fn gmp_model_csv_carries_config_and_terms() {
        let cfg = GmpConfig {
            order_k: 3,
            memory_depth_l: 0,
            cross_memory_m: 1,
            ..GmpConfig::default()
        };
        let model = GmpModel {
            term_index: cfg.terms(),
            coefficients: vec![Complex64::new(1.0, -2.0); cfg.term_count()],
            config: cfg,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.csv");
        write_gmp_model(&path, &model).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("# gmp order_k=3"));
        assert_eq!(lines[1], "branch,k,l,m,re,im");
        assert_eq!(lines.len(), 2 + model.term_index.len());
        assert!(lines[2].starts_with("aligned,1,0,0,"));
    }
}
