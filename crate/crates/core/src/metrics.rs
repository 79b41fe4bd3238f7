//! Signal-quality metrics: NMSE, per-subcarrier EVM, Welch PSD, and
//! AM-AM/AM-PM scatter extraction.
//!
//! All dB metrics clamp at -200 dB so exact matches serialize cleanly.
//! NMSE is a raw time-domain comparison and retains any linear-response
//! error; EVM equalizes each subcarrier with a single least-squares tap
//! first (receiver practice), so it forgives linear filtering and reports
//! only what a demodulator would see.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft;
use crate::waveform::{demodulate, ComplexWaveform, GridReference, OfdmConfig};

/// Clamp floor for all dB metrics.
pub const METRIC_CLAMP_DB: f64 = -200.0;

/// Normalized mean squared error in dB:
/// `10 log10(sum |test - ref|^2 / sum |ref|^2)`, clamped at -200 dB.
pub fn nmse(reference: &ComplexWaveform, test: &ComplexWaveform) -> Result<f64> {
    if reference.len() != test.len() {
        return Err(Error::Shape(format!(
            "nmse length mismatch: {} vs {}",
            reference.len(),
            test.len()
        )));
    }
    let sig: f64 = reference.samples.iter().map(|s| s.norm_sqr()).sum();
    if sig <= 0.0 {
        return Err(Error::UndefinedMetric(
            "NMSE against a zero reference".into(),
        ));
    }
    let err: f64 = reference
        .samples
        .iter()
        .zip(&test.samples)
        .map(|(r, t)| (t - r).norm_sqr())
        .sum();
    if err == 0.0 {
        return Ok(METRIC_CLAMP_DB);
    }
    Ok((10.0 * (err / sig).log10()).max(METRIC_CLAMP_DB))
}

/// Constellation-domain EVM in dB after per-subcarrier single-tap
/// equalization.
///
/// Demodulates as many whole symbols as the capture holds (up to the grid
/// size), fits one complex gain per subcarrier across symbols, and scores
/// the residual. A residual above -3 dB means the capture is not symbol
/// aligned and is reported as an alignment error rather than a number.
pub fn evm_subcarrier(
    grid: &GridReference,
    captured: &ComplexWaveform,
    cfg: &OfdmConfig,
) -> Result<f64> {
    let rows = demodulate(captured, cfg)?;
    let num_symbols = rows.len().min(grid.num_symbols());
    if num_symbols == 0 {
        return Err(Error::Length("no whole symbol to demodulate".into()));
    }
    let num_sc = grid.subcarrier_indices.len();
    let mut err = 0.0;
    let mut sig = 0.0;
    let symbol_pairs = || grid.data_symbols.iter().zip(&rows).take(num_symbols);
    for k in 0..num_sc {
        let mut cross = Complex64::ZERO;
        let mut ref_pow = 0.0;
        for (sent, seen) in symbol_pairs() {
            cross += sent[k].conj() * seen[k];
            ref_pow += sent[k].norm_sqr();
        }
        if ref_pow <= 0.0 {
            return Err(Error::UndefinedMetric(format!(
                "subcarrier {k} has zero reference power"
            )));
        }
        let tap = cross / ref_pow;
        for (sent, seen) in symbol_pairs() {
            let ideal = tap * sent[k];
            err += (seen[k] - ideal).norm_sqr();
            sig += ideal.norm_sqr();
        }
    }
    if sig <= 0.0 {
        return Err(Error::UndefinedMetric(
            "equalized signal power is zero".into(),
        ));
    }
    if err == 0.0 {
        return Ok(METRIC_CLAMP_DB);
    }
    let evm = 10.0 * (err / sig).log10();
    if evm > -3.0 {
        return Err(Error::Alignment(format!(
            "equalizer residual {evm:.1} dB: capture is not symbol aligned"
        )));
    }
    Ok(evm.max(METRIC_CLAMP_DB))
}

/// Welch PSD window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsdWindow {
    Hann,
}

/// Level normalization of the PSD output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsdNormalization {
    /// Shift levels so the peak bin reads 0 dB.
    PeakZeroDb,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsdConfig {
    pub segment_len: usize,
    pub overlap_fraction: f64,
    pub window: PsdWindow,
    pub normalization: PsdNormalization,
}

impl Default for PsdConfig {
    fn default() -> Self {
        Self {
            segment_len: 4096,
            overlap_fraction: 0.5,
            window: PsdWindow::Hann,
            normalization: PsdNormalization::PeakZeroDb,
        }
    }
}

/// Welch average of windowed periodograms, in linear power per bin,
/// baseband-centered (index 0 = most negative frequency). Normalized so
/// the sum over bins estimates the waveform's mean power.
fn welch_linear(w: &ComplexWaveform, cfg: &PsdConfig) -> Result<Vec<f64>> {
    if cfg.segment_len == 0 {
        return Err(Error::Config("PSD segment length must be positive".into()));
    }
    if !(0.0..1.0).contains(&cfg.overlap_fraction) {
        return Err(Error::Config(format!(
            "overlap fraction must be in [0, 1), got {}",
            cfg.overlap_fraction
        )));
    }
    let n = cfg.segment_len;
    if w.len() < n {
        return Err(Error::Length(format!(
            "waveform of {} samples shorter than PSD segment {n}",
            w.len()
        )));
    }
    let window: Vec<f64> = match cfg.window {
        // Periodic Hann, the DFT-analysis variant.
        PsdWindow::Hann => (0..n)
            .map(|i| 0.5 * (1.0 - (std::f64::consts::TAU * i as f64 / n as f64).cos()))
            .collect(),
    };
    let window_power: f64 = window.iter().map(|v| v * v).sum();
    let hop = ((n as f64) * (1.0 - cfg.overlap_fraction)).round().max(1.0) as usize;
    let mut acc = vec![0.0; n];
    let mut segments = 0usize;
    let mut start = 0;
    while start + n <= w.len() {
        let seg: Vec<Complex64> = (0..n).map(|i| w.samples[start + i] * window[i]).collect();
        let spec = fft::forward(&seg);
        for (a, s) in acc.iter_mut().zip(&spec) {
            *a += s.norm_sqr();
        }
        segments += 1;
        start += hop;
    }
    // Per-bin power such that the bin sum estimates mean |w|^2.
    let scale = 1.0 / (segments as f64 * n as f64 * window_power);
    let mut shifted = vec![0.0; n];
    for (bin, a) in acc.iter().enumerate() {
        // fftshift: put negative frequencies first.
        shifted[(bin + n / 2) % n] = a * scale;
    }
    Ok(shifted)
}

/// Welch power spectral density: (frequency Hz, level dB) pairs with the
/// frequency axis centered at baseband 0 and the peak normalized to 0 dB.
pub fn psd(w: &ComplexWaveform, cfg: &PsdConfig) -> Result<Vec<(f64, f64)>> {
    let linear = welch_linear(w, cfg)?;
    let n = cfg.segment_len;
    let peak = linear.iter().fold(0.0f64, |m, &v| m.max(v));
    if peak <= 0.0 {
        return Err(Error::UndefinedMetric("PSD of a zero waveform".into()));
    }
    let df = w.sample_rate / n as f64;
    Ok(linear
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let freq = (i as f64 - (n / 2) as f64) * df;
            let level = if v > 0.0 {
                (10.0 * (v / peak).log10()).max(METRIC_CLAMP_DB)
            } else {
                METRIC_CLAMP_DB
            };
            (freq, level)
        })
        .collect())
}

/// Per-sample AM-AM/AM-PM scatter: `(|x|, |y|, wrapped phase(y) - phase(x))`
/// tuples. Samples with `|x|` below 1e-6 of the input RMS are excluded
/// (their phase is numerically meaningless).
pub fn amam_ampm(x: &ComplexWaveform, y: &ComplexWaveform) -> Result<Vec<(f64, f64, f64)>> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!(
            "scatter length mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    let floor = 1e-6 * x.rms();
    Ok(x.samples
        .iter()
        .zip(&y.samples)
        .filter(|(xi, _)| xi.norm() >= floor)
        .map(|(xi, yi)| {
            let mut dphi = yi.arg() - xi.arg();
            if dphi > std::f64::consts::PI {
                dphi -= std::f64::consts::TAU;
            } else if dphi <= -std::f64::consts::PI {
                dphi += std::f64::consts::TAU;
            }
            (xi.norm(), yi.norm(), dphi)
        })
        .collect())
}
