//! Capture-path model: reference-level companding quantizer, additive
//! noise, fractional delay, and rational resampling.
//!
//! The quantizer models a capture instrument whose reference level sits a
//! factor `rho` below the signal peak. Logarithmic mode compands the
//! normalized magnitude with `h(z) = log_rho((rho-1) z + 1)` before uniform
//! quantization, which shrinks the effective step size for small
//! amplitudes (where most OFDM samples live) at the cost of larger steps
//! near the peak. Uniform mode (or `rho = 1`) quantizes the magnitude
//! directly. Both operate per real component with midpoint reconstruction.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::sinc;
use crate::waveform::{ComplexWaveform, Ratio};

/// Magnitude-axis quantizer layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuantizerMode {
    Uniform,
    Logarithmic,
}

/// Per-component quantizer: `bits` covers sign plus magnitude, so the
/// magnitude axis [0, 1] is divided into `Q + 1 = 2^(bits-1)` cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizerSpec {
    pub bits: u32,
    /// Peak amplitude over reference level, linear scale, >= 1.
    pub rho: f64,
    pub mode: QuantizerMode,
}

impl QuantizerSpec {
    pub fn validate(&self) -> Result<()> {
        if !(2..=54).contains(&self.bits) {
            return Err(Error::Config(format!(
                "quantizer bits must be in [2, 54], got {}",
                self.bits
            )));
        }
        if !(self.rho >= 1.0) {
            return Err(Error::Config(format!("rho must be >= 1, got {}", self.rho)));
        }
        Ok(())
    }

    /// Number of magnitude cells, `Q + 1`.
    pub fn cells(&self) -> usize {
        1usize << (self.bits - 1)
    }

    /// `Q`, the number of interior thresholds.
    pub fn q(&self) -> usize {
        self.cells() - 1
    }
}

/// Capture-path configuration. `quantizer: None` bypasses quantization
/// entirely (an ideal-resolution capture).
#[derive(Debug, Clone, PartialEq)]
pub struct CaptureConfig {
    pub quantizer: Option<QuantizerSpec>,
    /// AWGN level as SNR in dB relative to the input signal power.
    pub noise_snr_db: Option<f64>,
    /// Sub-sample timing offset injected by the capture, in [0, 1).
    pub fractional_delay_samples: f64,
    /// Output rate / input rate of the capture device, if it resamples.
    pub resample: Option<Ratio>,
    pub seed: u64,
}

impl Default for CaptureConfig {
    fn default() -> Self {
        Self {
            quantizer: None,
            noise_snr_db: None,
            fractional_delay_samples: 0.0,
            resample: None,
            seed: 0,
        }
    }
}

impl CaptureConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(q) = &self.quantizer {
            q.validate()?;
        }
        if let Some(snr) = self.noise_snr_db {
            if !snr.is_finite() {
                return Err(Error::Config(format!(
                    "noise SNR must be finite, got {snr}"
                )));
            }
        }
        if !(0.0..1.0).contains(&self.fractional_delay_samples) {
            return Err(Error::Config(format!(
                "fractional delay must be in [0, 1), got {}",
                self.fractional_delay_samples
            )));
        }
        Ok(())
    }
}

fn check_unit_interval(name: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::Domain(format!("{name} = {v} outside [0, 1]")));
    }
    Ok(())
}

fn check_rho(rho: f64) -> Result<()> {
    if !(rho > 1.0) {
        return Err(Error::Domain(format!(
            "compand/expand require rho > 1, got {rho} (rho = 1 is the uniform limit)"
        )));
    }
    Ok(())
}

/// Companding transform `h(z) = log_rho((rho - 1) z + 1)`, mapping [0, 1]
/// onto [0, 1] monotonically. Written in `ln_1p` form so it stays accurate
/// as `rho` approaches 1.
pub fn compand(z: f64, rho: f64) -> Result<f64> {
    check_unit_interval("z", z)?;
    check_rho(rho)?;
    let r = rho - 1.0;
    Ok((r * z).ln_1p() / r.ln_1p())
}

/// Inverse companding transform `(rho^u - 1)/(rho - 1)`.
pub fn expand(u: f64, rho: f64) -> Result<f64> {
    check_unit_interval("u", u)?;
    check_rho(rho)?;
    let r = rho - 1.0;
    Ok((u * r.ln_1p()).exp_m1() / r)
}

/// Decision thresholds `d_q = (rho^(q/(Q+1)) - 1)/(rho - 1)`, `q = 1..=Q`.
pub fn thresholds(rho: f64, q_count: usize) -> Result<Vec<f64>> {
    if q_count < 1 {
        return Err(Error::Domain("threshold count Q must be >= 1".into()));
    }
    check_rho(rho)?;
    let cells = (q_count + 1) as f64;
    (1..=q_count)
        .map(|q| expand(q as f64 / cells, rho))
        .collect()
}

/// Step sizes `delta_q = d_(q+1) - d_q`, `q = 1..=Q-1`, computed directly
/// from the thresholds.
pub fn step_sizes(rho: f64, q_count: usize) -> Result<Vec<f64>> {
    if q_count < 2 {
        return Err(Error::Domain("step sizes need Q >= 2".into()));
    }
    let d = thresholds(rho, q_count)?;
    Ok(d.windows(2).map(|w| w[1] - w[0]).collect())
}

/// Quantizes normalized magnitudes in [0, 1] with midpoint reconstruction.
/// Logarithmic mode compands first, quantizes uniformly in the companded
/// domain, and expands the cell midpoint back; `rho = 1` degenerates to
/// uniform. Idempotent.
pub fn quantize_magnitude(z: &[f64], spec: &QuantizerSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let cells = spec.cells() as f64;
    let logarithmic = spec.mode == QuantizerMode::Logarithmic && spec.rho > 1.0;
    z.iter()
        .map(|&zi| {
            check_unit_interval("z", zi)?;
            let u = if logarithmic {
                compand(zi, spec.rho)?
            } else {
                zi
            };
            let cell = ((u * cells).floor()).min(cells - 1.0);
            let mid = (cell + 0.5) / cells;
            if logarithmic {
                expand(mid, spec.rho)
            } else {
                Ok(mid)
            }
        })
        .collect()
}

/// Quantizes one real component of a waveform: normalize by the component's
/// peak magnitude, quantize, reattach sign and scale. An all-zero component
/// passes through unchanged.
fn quantize_component(values: &[f64], spec: &QuantizerSpec) -> Result<Vec<f64>> {
    let peak = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return Ok(values.to_vec());
    }
    let z: Vec<f64> = values.iter().map(|v| v.abs() / peak).collect();
    let q = quantize_magnitude(&z, spec)?;
    Ok(values
        .iter()
        .zip(q)
        .map(|(&v, qi)| qi.copysign(v) * peak)
        .collect())
}

/// Runs a waveform through the capture path: optional AWGN, fractional
/// delay, optional resampling, then per-component quantization.
/// Deterministic for a given `cfg.seed`.
pub fn capture_chain(y: &ComplexWaveform, cfg: &CaptureConfig) -> Result<ComplexWaveform> {
    cfg.validate()?;
    let power = y.mean_power();
    if power <= 0.0 {
        return Err(Error::UndefinedMetric("capture of a zero waveform".into()));
    }
    let mut samples = y.samples.clone();
    let mut rate = y.sample_rate;

    if let Some(snr_db) = cfg.noise_snr_db {
        let sigma = (power / 10f64.powf(snr_db / 10.0) / 2.0).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        for s in &mut samples {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            *s += Complex64::new(re * sigma, im * sigma);
        }
    }

    if cfg.fractional_delay_samples != 0.0 {
        samples = sinc::shift_by(&samples, cfg.fractional_delay_samples);
    }

    if let Some(ratio) = cfg.resample {
        samples = sinc::resample_rational(&samples, ratio.num, ratio.den);
        rate *= ratio.value();
    }

    if let Some(spec) = &cfg.quantizer {
        let re: Vec<f64> = samples.iter().map(|s| s.re).collect();
        let im: Vec<f64> = samples.iter().map(|s| s.im).collect();
        let qre = quantize_component(&re, spec)?;
        let qim = quantize_component(&im, spec)?;
        samples = qre
            .into_iter()
            .zip(qim)
            .map(|(r, i)| Complex64::new(r, i))
            .collect();
    }

    ComplexWaveform::new(samples, rate)
}

/// Splits samples at the given amplitude percentile (in (0, 100)) and
/// returns the mean squared quantization error of the lower and upper
/// groups: the quantitative consequence of the companding design.
pub fn quantization_mse_by_percentile(
    dist_samples: &[f64],
    spec: &QuantizerSpec,
    percentile_split: f64,
) -> Result<(f64, f64)> {
    if dist_samples.is_empty() {
        return Err(Error::UndefinedMetric(
            "percentile MSE of an empty sample set".into(),
        ));
    }
    if !(0.0 < percentile_split && percentile_split < 100.0) {
        return Err(Error::Domain(format!(
            "percentile must be in (0, 100), got {percentile_split}"
        )));
    }
    let quantized = quantize_magnitude(dist_samples, spec)?;
    let mut order: Vec<usize> = (0..dist_samples.len()).collect();
    order.sort_by(|&a, &b| dist_samples[a].total_cmp(&dist_samples[b]));
    let split = ((dist_samples.len() as f64) * percentile_split / 100.0).round() as usize;
    if split == 0 || split >= dist_samples.len() {
        return Err(Error::UndefinedMetric(format!(
            "percentile {percentile_split} leaves an empty group for {} samples",
            dist_samples.len()
        )));
    }
    let group_mse = |idx: &[usize]| {
        idx.iter()
            .map(|&i| (quantized[i] - dist_samples[i]).powi(2))
            .sum::<f64>()
            / idx.len() as f64
    };
    Ok((group_mse(&order[..split]), group_mse(&order[split..])))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::waveform::{generate_ofdm, OfdmConfig};
    use proptest::prelude::*;

    const RHO_GRID: [f64; 4] = [1.0 + 1e-9, 2.0, 10.0, 199.5262314968879]; // last = 10^2.3

    fn log_spec(bits: u32, rho: f64) -> QuantizerSpec {
        QuantizerSpec {
            bits,
            rho,
            mode: QuantizerMode::Logarithmic,
        }
    }

    fn uniform_spec(bits: u32) -> QuantizerSpec {
        QuantizerSpec {
            bits,
            rho: 1.0,
            mode: QuantizerMode::Uniform,
        }
    }

    #[test]
    fn compand_endpoints_and_midpoint() {
        for rho in [1.5, 10.0, 40.0] {
            assert_eq!(compand(0.0, rho).unwrap(), 0.0);
            assert!((compand(1.0, rho).unwrap() - 1.0).abs() < 1e-15);
        }
        // log10(5.5)
        let v = compand(0.5, 10.0).unwrap();
        assert!(
            (v - 0.7403626894942439).abs() < 1e-12,
            "compand(0.5, 10) = {v}"
        );
    }

    #[test]
    fn compand_monotone() {
        for rho in RHO_GRID {
            if rho <= 1.0 {
                continue;
            }
            let mut prev = -1.0;
            for k in 0..=1000 {
                let v = compand(k as f64 / 1000.0, rho).unwrap();
                assert!(v > prev, "not strictly increasing at {k} for rho {rho}");
                prev = v;
            }
        }
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(compand(-0.1, 10.0), Err(Error::Domain(_))));
        assert!(matches!(compand(1.1, 10.0), Err(Error::Domain(_))));
        assert!(matches!(compand(0.5, 1.0), Err(Error::Domain(_))));
        assert!(matches!(compand(0.5, 0.5), Err(Error::Domain(_))));
        assert!(matches!(expand(0.5, 1.0), Err(Error::Domain(_))));
        assert!(matches!(expand(2.0, 10.0), Err(Error::Domain(_))));
    }

    #[test]
    fn expand_endpoints() {
        for rho in [1.0 + 1e-9, 2.0, 16.0] {
            assert_eq!(expand(0.0, rho).unwrap(), 0.0);
            assert!((expand(1.0, rho).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn compand_expand_roundtrip_dense_grid() {
        for rho in RHO_GRID {
            let mut worst = 0.0f64;
            for k in 0..=10_000 {
                let z = k as f64 / 10_000.0;
                let back = expand(compand(z, rho).unwrap(), rho).unwrap();
                worst = worst.max((back - z).abs());
            }
            assert!(worst < 1e-12, "rho {rho}: roundtrip error {worst:e}");
        }
    }

    #[test]
    fn thresholds_match_expand_of_cell_edges() {
        let rho = 7.3;
        let q = 31;
        let d = thresholds(rho, q).unwrap();
        for (i, &dq) in d.iter().enumerate() {
            let edge = expand((i + 1) as f64 / (q + 1) as f64, rho).unwrap();
            assert!((dq - edge).abs() < 1e-15);
        }
    }

    #[test]
    fn thresholds_hand_example_rho16_q3() {
        // rho^(1/4) = 2: d = [(2-1)/15, (4-1)/15, (8-1)/15].
        let d = thresholds(16.0, 3).unwrap();
        let want = [1.0 / 15.0, 0.2, 7.0 / 15.0];
        for (got, want) in d.iter().zip(want) {
            assert!((got - want).abs() < 1e-14, "got {got}, want {want}");
        }
    }

    #[test]
    fn thresholds_uniform_limit() {
        let q = 7;
        let d = thresholds(1.0 + 1e-9, q).unwrap();
        for (i, &dq) in d.iter().enumerate() {
            let uniform = (i + 1) as f64 / (q + 1) as f64;
            assert!(
                (dq - uniform).abs() < 1e-6,
                "d_{} = {dq} vs uniform {uniform}",
                i + 1
            );
        }
    }

    #[test]
    fn thresholds_increase_within_unit_interval() {
        for rho in [1.0 + 1e-9, 3.0, 16.0, 100.0] {
            for q in [1, 2, 15, 127] {
                let d = thresholds(rho, q).unwrap();
                assert_eq!(d.len(), q);
                assert!(d[0] > 0.0);
                assert!(*d.last().unwrap() < 1.0);
                assert!(d.windows(2).all(|w| w[1] > w[0]), "rho {rho}, Q {q}");
            }
        }
    }

    #[test]
    fn step_sizes_hand_example() {
        let s = step_sizes(16.0, 3).unwrap();
        assert!((s[0] - 2.0 / 15.0).abs() < 1e-14);
        assert!((s[1] - 4.0 / 15.0).abs() < 1e-14);
    }

    #[test]
    fn step_sizes_strictly_increase_in_q() {
        // Convexity of expand(): delta_q < delta_(q+1) for every rho > 1.
        for rho in [1.0 + 1e-6, 1.5, 6.31, 16.0, 199.5] {
            for q in [3, 31, 1023] {
                let s = step_sizes(rho, q).unwrap();
                assert!(
                    s.windows(2).all(|w| w[1] > w[0]),
                    "steps not increasing for rho {rho}, Q {q}"
                );
            }
        }
    }

    #[test]
    fn small_amplitude_steps_shrink_with_rho() {
        // The companding payoff: for cells in the bottom quarter of the
        // companded axis, a larger rho gives smaller steps.
        let q = 1023;
        let lo = step_sizes(40.0, q).unwrap();
        let hi = step_sizes(4.0, q).unwrap();
        for i in 0..(q + 1) / 4 {
            assert!(
                lo[i] < hi[i],
                "step {i}: rho=40 {} !< rho=4 {}",
                lo[i],
                hi[i]
            );
        }
        // Frozen first-step values.
        assert!(
            (lo[0] - 9.287e-5).abs() / 9.287e-5 < 1e-3,
            "delta_1(40) = {}",
            lo[0]
        );
        assert!(
            (hi[0] - 4.522e-4).abs() / 4.522e-4 < 1e-3,
            "delta_1(4) = {}",
            hi[0]
        );
    }

    #[test]
    fn cell_widths_sum_to_one() {
        for rho in [1.0 + 1e-9, 5.0, 16.0] {
            for q in [1, 7, 255] {
                let d = thresholds(rho, q).unwrap();
                let total = d[0]
                    + d.windows(2).map(|w| w[1] - w[0]).sum::<f64>()
                    + (1.0 - d.last().unwrap());
                assert!((total - 1.0).abs() < 1e-12, "rho {rho}, Q {q}: sum {total}");
            }
        }
    }

    #[test]
    fn quantize_uniform_hand_example() {
        // Q+1 = 4 cells: 0.30 lies in [0.25, 0.5) -> midpoint 0.375.
        let out = quantize_magnitude(&[0.30], &uniform_spec(3)).unwrap();
        assert!((out[0] - 0.375).abs() < 1e-15);
    }

    #[test]
    fn quantize_logarithmic_hand_example() {
        // rho = 16, Q+1 = 4: compand(0.3) = ln(5.5)/ln(16) ~ 0.6149 ->
        // cell 2 -> midpoint u = 0.625 -> expand = (2^2.5 - 1)/15.
        let out = quantize_magnitude(&[0.30], &log_spec(3, 16.0)).unwrap();
        assert!(
            (out[0] - 0.3104569499661587).abs() < 1e-12,
            "got {}",
            out[0]
        );
    }

    #[test]
    fn quantize_idempotent() {
        let z: Vec<f64> = (0..=500).map(|k| k as f64 / 500.0).collect();
        for spec in [uniform_spec(6), log_spec(6, 16.0), log_spec(4, 2.0)] {
            let once = quantize_magnitude(&z, &spec).unwrap();
            let twice = quantize_magnitude(&once, &spec).unwrap();
            assert_eq!(once, twice, "{spec:?}");
        }
    }

    #[test]
    fn logarithmic_mode_at_rho_one_is_uniform() {
        let z: Vec<f64> = (0..=100).map(|k| k as f64 / 100.0).collect();
        let a = quantize_magnitude(&z, &log_spec(5, 1.0)).unwrap();
        let b = quantize_magnitude(&z, &uniform_spec(5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn quantize_rejects_out_of_range() {
        assert!(quantize_magnitude(&[1.5], &uniform_spec(4)).is_err());
        assert!(quantize_magnitude(&[-0.1], &uniform_spec(4)).is_err());
    }

    #[test]
    fn capture_bypass_is_identity() {
        let (x, _) = generate_ofdm(&OfdmConfig::default(), 5).unwrap();
        let out = capture_chain(&x, &CaptureConfig::default()).unwrap();
        assert_eq!(out.samples, x.samples);
        assert_eq!(out.sample_rate, x.sample_rate);
    }

    #[test]
    fn capture_quantizes_constant_within_one_step() {
        let x = ComplexWaveform::new(vec![Complex64::new(0.5, 0.0); 64], 1.0).unwrap();
        let cfg = CaptureConfig {
            quantizer: Some(uniform_spec(12)),
            ..CaptureConfig::default()
        };
        let out = capture_chain(&x, &cfg).unwrap();
        let step = 0.5 / 2048.0; // peak / cells
        for s in &out.samples {
            assert!((s.re - 0.5).abs() < step);
            assert_eq!(s.im, 0.0, "zero component must pass through");
        }
    }

    #[test]
    fn capture_noise_hits_requested_snr() {
        let (x, _) = generate_ofdm(&OfdmConfig::default(), 6).unwrap();
        for seed in 0..10 {
            let cfg = CaptureConfig {
                noise_snr_db: Some(40.0),
                seed,
                ..CaptureConfig::default()
            };
            let out = capture_chain(&x, &cfg).unwrap();
            let err: f64 = out
                .samples
                .iter()
                .zip(&x.samples)
                .map(|(a, b)| (a - b).norm_sqr())
                .sum();
            let sig: f64 = x.samples.iter().map(|s| s.norm_sqr()).sum();
            let nmse = 10.0 * (err / sig).log10();
            assert!(
                (nmse + 40.0).abs() < 0.3,
                "seed {seed}: measured noise NMSE {nmse:.2} dB"
            );
        }
    }

    #[test]
    fn capture_deterministic_per_seed() {
        let (x, _) = generate_ofdm(&OfdmConfig::default(), 7).unwrap();
        let cfg = CaptureConfig {
            quantizer: Some(log_spec(12, 6.31)),
            noise_snr_db: Some(50.0),
            fractional_delay_samples: 0.25,
            seed: 99,
            ..CaptureConfig::default()
        };
        let a = capture_chain(&x, &cfg).unwrap();
        let b = capture_chain(&x, &cfg).unwrap();
        assert_eq!(a.samples, b.samples);
        let c = capture_chain(&x, &CaptureConfig { seed: 100, ..cfg }).unwrap();
        assert_ne!(a.samples, c.samples);
    }

    #[test]
    fn capture_resample_scales_length_and_rate() {
        let (x, _) = generate_ofdm(&OfdmConfig::default(), 8).unwrap();
        let cfg = CaptureConfig {
            resample: Some(Ratio { num: 2, den: 1 }),
            ..CaptureConfig::default()
        };
        let out = capture_chain(&x, &cfg).unwrap();
        assert_eq!(out.len(), 2 * x.len());
        assert!((out.sample_rate - 2.0 * x.sample_rate).abs() < 1e-6);
    }

    #[test]
    fn capture_rejects_zero_waveform() {
        let x = ComplexWaveform::new(vec![Complex64::ZERO; 8], 1.0).unwrap();
        assert!(matches!(
            capture_chain(&x, &CaptureConfig::default()),
            Err(Error::UndefinedMetric(_))
        ));
    }

    #[test]
    fn capture_rejects_bad_delay() {
        let (x, _) = generate_ofdm(&OfdmConfig::default(), 9).unwrap();
        let cfg = CaptureConfig {
            fractional_delay_samples: 1.5,
            ..CaptureConfig::default()
        };
        assert!(capture_chain(&x, &cfg).is_err());
    }

    /// Half-normal magnitude samples normalized to unit peak: the amplitude
    /// profile of one real component of an OFDM waveform.
    fn ofdm_like_magnitudes(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw: Vec<f64> = (0..n)
            .map(|_| {
                let g: f64 = StandardNormal.sample(&mut rng);
                g.abs()
            })
            .collect();
        let peak = raw.iter().fold(0.0f64, |m, v| m.max(*v));
        raw.iter().map(|v| v / peak).collect()
    }

    #[test]
    fn near_continuous_quantizer_mse_vanishes() {
        let z = ofdm_like_magnitudes(10_000, 1);
        for spec in [uniform_spec(21), log_spec(21, 39.8)] {
            let (lo, hi) = quantization_mse_by_percentile(&z, &spec, 50.0).unwrap();
            assert!(lo < 1e-10 && hi < 1e-10, "{spec:?}: ({lo:e}, {hi:e})");
        }
    }

    #[test]
    fn companding_trades_low_amplitude_error_for_high() {
        // The quantitative heart of the companding design, measured on
        // 10^6 OFDM-like magnitude samples at 12 bits, rho = 16 dB.
        let z = ofdm_like_magnitudes(1_000_000, 2);
        let rho = 10f64.powf(16.0 / 20.0);
        let log = log_spec(12, rho);
        let uni = uniform_spec(12);
        let (log_lo50, _) = quantization_mse_by_percentile(&z, &log, 50.0).unwrap();
        let (uni_lo50, _) = quantization_mse_by_percentile(&z, &uni, 50.0).unwrap();
        assert!(
            log_lo50 < uni_lo50,
            "bottom-50% MSE: log {log_lo50:e} !< uniform {uni_lo50:e}"
        );
        let (_, log_hi5) = quantization_mse_by_percentile(&z, &log, 95.0).unwrap();
        let (_, uni_hi5) = quantization_mse_by_percentile(&z, &uni, 95.0).unwrap();
        assert!(
            log_hi5 > uni_hi5,
            "top-5% MSE: log {log_hi5:e} !> uniform {uni_hi5:e}"
        );
    }

    #[test]
    fn percentile_split_rejects_degenerate_groups() {
        let z = vec![0.5, 0.6];
        assert!(quantization_mse_by_percentile(&[], &uniform_spec(4), 50.0).is_err());
        assert!(quantization_mse_by_percentile(&z, &uniform_spec(4), 10.0).is_err());
        assert!(quantization_mse_by_percentile(&z, &uniform_spec(4), 100.0).is_err());
    }

    proptest! {
        #[test]
        fn quantization_stays_within_cell(
            z in proptest::collection::vec(0.0f64..=1.0, 1..64),
            bits in 3u32..14,
            rho_db in 0.0f64..23.0,
            uniform in proptest::bool::ANY,
        ) {
            let spec = if uniform {
                uniform_spec(bits)
            } else {
                log_spec(bits, 10f64.powf(rho_db / 20.0))
            };
            let out = quantize_magnitude(&z, &spec).unwrap();
            // Cell edges in the (possibly companded) domain.
            let cells = spec.cells() as f64;
            for (&zi, &qi) in z.iter().zip(&out) {
                let u = if uniform || spec.rho == 1.0 {
                    zi
                } else {
                    compand(zi, spec.rho).unwrap()
                };
                let cell = ((u * cells).floor()).min(cells - 1.0);
                let (lo_u, hi_u) = (cell / cells, (cell + 1.0) / cells);
                let (lo, hi) = if uniform || spec.rho == 1.0 {
                    (lo_u, hi_u)
                } else {
                    (expand(lo_u, spec.rho).unwrap(), expand(hi_u, spec.rho).unwrap())
                };
                prop_assert!(qi >= lo && qi <= hi, "recon {qi} outside cell [{lo}, {hi}]");
                prop_assert!((qi - zi).abs() <= hi - lo + 1e-15);
            }
        }

        #[test]
        fn quantized_output_idempotent_random(
            z in proptest::collection::vec(0.0f64..=1.0, 1..64),
            bits in 3u32..10,
            rho_db in 0.1f64..23.0,
        ) {
            let spec = log_spec(bits, 10f64.powf(rho_db / 20.0));
            let once = quantize_magnitude(&z, &spec).unwrap();
            let twice = quantize_magnitude(&once, &spec).unwrap();
            prop_assert_eq!(once, twice);
        }
    }
}
