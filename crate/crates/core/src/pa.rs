//! Behavioral power-amplifier model: a Wiener-style chain of a short
//! memory FIR, a static nonlinearity (Rapp or Saleh AM-AM, optional Saleh
//! AM-PM), a small-signal gain, and an optional output FIR.
//!
//! The model is the plant the learning loop linearizes; it is deliberately
//! simple (few parameters, controllable memory strength) rather than a fit
//! of any particular device.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::waveform::ComplexWaveform;

/// Static AM-AM characteristic applied to the sample magnitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AmAm {
    /// `a / (1 + (a/sat)^(2p))^(1/(2p))`: soft limiter with knee sharpness
    /// `p`, output amplitude bounded by `sat`.
    Rapp { sat: f64, p: f64 },
    /// `alpha * a / (1 + beta * a^2)`.
    Saleh { alpha: f64, beta: f64 },
}

/// Static AM-PM characteristic (phase rotation in radians vs amplitude).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AmPm {
    None,
    /// `alpha * a^2 / (1 + beta * a^2)` radians.
    Saleh {
        alpha: f64,
        beta: f64,
    },
}

/// Power-amplifier description: `post_fir * (G * nl(memory_fir * x))`.
#[derive(Debug, Clone, PartialEq)]
pub struct PaModel {
    pub memory_fir: Vec<Complex64>,
    pub amam: AmAm,
    pub ampm: AmPm,
    pub small_signal_gain: f64,
    pub post_fir: Option<Vec<Complex64>>,
}

/// Reference model presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PaPreset {
    /// Memoryless Rapp with heavy backoff: effectively linear at unit RMS.
    Mild,
    /// Short memory FIR, Rapp compression with saturation 10 dB above unit
    /// RMS, Saleh AM-PM: clips the peaks of an 11 dB-PAPR waveform.
    TestbedLike,
}

impl PaModel {
    pub fn validate(&self) -> Result<()> {
        match self.memory_fir.first() {
            Some(&h0) if (h0 - Complex64::ONE).norm() < 1e-12 => {}
            _ => {
                return Err(Error::Config(
                    "memory_fir must start with a unit leading tap".into(),
                ))
            }
        }
        if !(self.small_signal_gain > 1.0) {
            return Err(Error::Config(format!(
                "small-signal gain must exceed 1, got {}",
                self.small_signal_gain
            )));
        }
        match self.amam {
            AmAm::Rapp { sat, p } => {
                if !(sat > 0.0) || !(p > 0.0) {
                    return Err(Error::Config("Rapp sat and p must be positive".into()));
                }
            }
            AmAm::Saleh { alpha, beta } => {
                if !(alpha > 0.0) || !(beta >= 0.0) {
                    return Err(Error::Config(
                        "Saleh alpha must be positive, beta nonnegative".into(),
                    ));
                }
            }
        }
        if let AmPm::Saleh { beta, .. } = self.ampm {
            if !(beta >= 0.0) {
                return Err(Error::Config("Saleh AM-PM beta must be nonnegative".into()));
            }
        }
        if let Some(fir) = &self.post_fir {
            if fir.is_empty() {
                return Err(Error::Config(
                    "post_fir, when present, must be non-empty".into(),
                ));
            }
        }
        Ok(())
    }

    /// Amplitude scale at which the nonlinearity saturates; used to place
    /// small-signal probes.
    fn saturation_scale(&self) -> f64 {
        match self.amam {
            AmAm::Rapp { sat, .. } => sat,
            // Saleh AM-AM peaks at a = 1/sqrt(beta).
            AmAm::Saleh { beta, .. } => {
                if beta > 0.0 {
                    beta.sqrt().recip()
                } else {
                    1.0
                }
            }
        }
    }
}

/// Same-length FIR convolution with zero history before the first sample.
fn fir_same_len(h: &[Complex64], x: &[Complex64]) -> Vec<Complex64> {
    (0..x.len())
        .map(|n| {
            h.iter()
                .enumerate()
                .take(n + 1)
                .map(|(k, &hk)| hk * x[n - k])
                .sum()
        })
        .collect()
}

fn static_nonlinearity(model: &PaModel, v: Complex64) -> Complex64 {
    let a = v.norm();
    if a == 0.0 {
        return Complex64::ZERO;
    }
    let a_out = match model.amam {
        AmAm::Rapp { sat, p } => a / (1.0 + (a / sat).powf(2.0 * p)).powf(1.0 / (2.0 * p)),
        AmAm::Saleh { alpha, beta } => alpha * a / (1.0 + beta * a * a),
    };
    let phase_shift = match model.ampm {
        AmPm::None => 0.0,
        AmPm::Saleh { alpha, beta } => alpha * a * a / (1.0 + beta * a * a),
    };
    Complex64::from_polar(model.small_signal_gain * a_out, v.arg() + phase_shift)
}

/// Runs a waveform through the PA model. Deterministic; output length
/// equals input length.
pub fn apply_pa(model: &PaModel, x: &ComplexWaveform) -> Result<ComplexWaveform> {
    model.validate()?;
    let after_memory = fir_same_len(&model.memory_fir, &x.samples);
    let mut out: Vec<Complex64> = after_memory
        .iter()
        .map(|&v| static_nonlinearity(model, v))
        .collect();
    if let Some(fir) = &model.post_fir {
        out = fir_same_len(fir, &out);
    }
    ComplexWaveform::new(out, x.sample_rate)
}

/// Builds one of the fixed reference PA models.
pub fn make_reference_pa(preset: PaPreset) -> PaModel {
    match preset {
        PaPreset::Mild => PaModel {
            memory_fir: vec![Complex64::ONE],
            amam: AmAm::Rapp { sat: 10.0, p: 2.0 },
            ampm: AmPm::None,
            small_signal_gain: 10.0,
            post_fir: None,
        },
        PaPreset::TestbedLike => PaModel {
            memory_fir: vec![
                Complex64::ONE,
                Complex64::from_polar(0.15, std::f64::consts::FRAC_PI_6),
                Complex64::from_polar(0.05, -std::f64::consts::FRAC_PI_4),
            ],
            // Saturation 10 dB above unit RMS.
            amam: AmAm::Rapp {
                sat: 10f64.powf(10.0 / 20.0),
                p: 2.0,
            },
            ampm: AmPm::Saleh {
                alpha: 0.5,
                beta: 2.0,
            },
            small_signal_gain: 10.0,
            post_fir: None,
        },
    }
}

/// Measures the complex small-signal gain by least-squares fitting the
/// response to a low-amplitude white probe (RMS two decades below the
/// saturation scale).
pub fn estimate_small_signal_gain(model: &PaModel) -> Result<Complex64> {
    estimate_small_signal_gain_seeded(model, 0)
}

/// [`estimate_small_signal_gain`] with an explicit probe seed; the estimate
/// is insensitive to the seed (white probe averages out memory cross-terms).
pub fn estimate_small_signal_gain_seeded(model: &PaModel, seed: u64) -> Result<Complex64> {
    model.validate()?;
    let rms = model.saturation_scale() / 100.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 1 << 16;
    let scale = rms / 2f64.sqrt();
    let probe: Vec<Complex64> = (0..n)
        .map(|_| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(re * scale, im * scale)
        })
        .collect();
    let x = ComplexWaveform::new(probe, 1.0)?;
    let y = apply_pa(model, &x)?;
    let num: Complex64 = x
        .samples
        .iter()
        .zip(&y.samples)
        .map(|(a, b)| a.conj() * b)
        .sum();
    let den: f64 = x.samples.iter().map(|a| a.norm_sqr()).sum();
    Ok(num / den)
}
