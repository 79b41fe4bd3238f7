//! Iterative learning control of the PA drive signal.
//!
//! Starting from `x_0 = s`, each iteration plays the current drive through
//! the plant (PA plus capture path), aligns and gain-normalizes the
//! response, and nudges the drive toward the reference:
//! `x_{i+1} = x_i + mu (s - y_hat_i)`. The update error is taken in the
//! contraction orientation (reference minus response): the positive-
//! feedback reading diverges for a compressive plant and has the same
//! fixed point. Gain-inverse mode multiplies by `s/y_hat` instead, with a
//! linear-rule fallback where the response is too small to divide by.
//!
//! Alignment (delay and complex gain) is estimated once, on the first
//! iteration's response, and reused: the plant's timing does not change
//! between iterations, and a frozen correction keeps the loop stationary.

use num_complex::Complex64;

use crate::align::{self, AlignmentResult};
use crate::error::{Error, Result};
use crate::waveform::ComplexWaveform;

/// Drive-update rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateMode {
    /// `x + mu (s - y_hat)`.
    Linear,
    /// `x * s / y_hat`, falling back to the linear rule for samples where
    /// `|y_hat|` is below the configured floor.
    GainInverse,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IlcConfig {
    pub max_iterations: usize,
    pub step_mu: f64,
    pub update_mode: UpdateMode,
    /// Early-stop threshold; the default of -200 dB only fires on the
    /// exact-match clamp (effectively disabled).
    pub convergence_nmse_db: f64,
    /// Minimum `|y_hat|` as a fraction of its RMS for the gain-inverse
    /// division.
    pub gain_inverse_floor: f64,
    /// Keep every intermediate drive in the result (memory-heavy).
    pub store_trajectory: bool,
}

impl Default for IlcConfig {
    fn default() -> Self {
        Self {
            max_iterations: 10,
            step_mu: 0.5,
            update_mode: UpdateMode::Linear,
            convergence_nmse_db: -200.0,
            gain_inverse_floor: 0.01,
            store_trajectory: false,
        }
    }
}

impl IlcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations < 1 {
            return Err(Error::Config("max_iterations must be >= 1".into()));
        }
        if !(self.step_mu > 0.0 && self.step_mu <= 1.0) {
            return Err(Error::Config(format!(
                "step_mu must be in (0, 1], got {}",
                self.step_mu
            )));
        }
        if !(self.gain_inverse_floor >= 0.0) {
            return Err(Error::Config(
                "gain_inverse_floor must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// Outcome of an ILC run.
#[derive(Debug, Clone)]
pub struct IlcResult {
    /// The drive after the last executed update (or the unchanged drive if
    /// the run early-stopped at convergence).
    pub final_input: ComplexWaveform,
    /// Guarded-interior NMSE of the normalized response vs the reference,
    /// one entry per executed iteration.
    pub per_iteration_nmse_db: Vec<f64>,
    /// Drive trajectory, present when requested in the config.
    pub per_iteration_inputs: Option<Vec<ComplexWaveform>>,
    /// Complex small-signal gain estimated from the first response.
    pub estimated_gain: Complex64,
}

/// One drive update from the aligned, gain-normalized response `y_hat_i`.
pub fn ilc_step(
    x_i: &ComplexWaveform,
    y_hat_i: &ComplexWaveform,
    s: &ComplexWaveform,
    cfg: &IlcConfig,
) -> Result<ComplexWaveform> {
    cfg.validate()?;
    if x_i.len() != y_hat_i.len() || x_i.len() != s.len() {
        return Err(Error::Shape(format!(
            "length mismatch: x {} / y_hat {} / s {}",
            x_i.len(),
            y_hat_i.len(),
            s.len()
        )));
    }
    let mu = cfg.step_mu;
    let linear = |x: Complex64, y: Complex64, sr: Complex64| x + mu * (sr - y);
    let samples: Vec<Complex64> = match cfg.update_mode {
        UpdateMode::Linear => x_i
            .samples
            .iter()
            .zip(&y_hat_i.samples)
            .zip(&s.samples)
            .map(|((&x, &y), &sr)| linear(x, y, sr))
            .collect(),
        UpdateMode::GainInverse => {
            let floor = cfg.gain_inverse_floor * y_hat_i.rms();
            x_i.samples
                .iter()
                .zip(&y_hat_i.samples)
                .zip(&s.samples)
                .map(|((&x, &y), &sr)| {
                    if y.norm() >= floor {
                        x * sr / y
                    } else {
                        linear(x, y, sr)
                    }
                })
                .collect()
        }
    };
    ComplexWaveform::new(samples, x_i.sample_rate)
}

/// Runs the full loop against an abstract plant (PA plus capture chain).
///
/// `align_r` is the fractional-delay search resolution used on the first
/// response; the resulting correction is reused for every iteration.
pub fn ilc_run<F>(
    s: &ComplexWaveform,
    mut plant: F,
    cfg: &IlcConfig,
    align_r: usize,
) -> Result<IlcResult>
where
    F: FnMut(&ComplexWaveform) -> Result<ComplexWaveform>,
{
    cfg.validate()?;
    let mut x = s.clone();
    let mut nmse_trace = Vec::with_capacity(cfg.max_iterations);
    let mut trajectory = cfg.store_trajectory.then(Vec::new);
    let mut alignment: Option<AlignmentResult> = None;

    for iteration in 0..cfg.max_iterations {
        if let Some(t) = trajectory.as_mut() {
            t.push(x.clone());
        }
        let y = plant(&x)?;
        if y.mean_power() <= 0.0 {
            return Err(Error::Plant(format!(
                "plant returned a zero-power waveform at iteration {iteration}"
            )));
        }
        if alignment.is_none() {
            alignment = Some(align::estimate_delay(s, &y, align_r)?);
        }
        let correction = alignment.as_ref().expect("set on first iteration");
        let y_hat = align::apply_alignment(&y, correction);
        let nmse = align::aligned_nmse_db(s, &y_hat)?;
        nmse_trace.push(nmse);
        if nmse <= cfg.convergence_nmse_db {
            // Converged: keep the drive that achieved it.
            break;
        }
        // Update even on the final iteration: a one-iteration run performs
        // exactly one correction.
        x = ilc_step(&x, &y_hat, s, cfg)?;
    }

    let correction = alignment.expect("at least one iteration ran");
    Ok(IlcResult {
        final_input: x,
        per_iteration_nmse_db: nmse_trace,
        per_iteration_inputs: trajectory,
        estimated_gain: correction.complex_gain,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capture::{capture_chain, CaptureConfig};
    use crate::pa::{apply_pa, make_reference_pa, PaPreset};
    use crate::waveform::{generate_ofdm, OfdmConfig};

    fn reference(seed: u64) -> ComplexWaveform {
        generate_ofdm(&OfdmConfig::default(), seed).unwrap().0
    }

    fn scale(w: &ComplexWaveform, c: Complex64) -> ComplexWaveform {
        ComplexWaveform {
            samples: w.samples.iter().map(|s| s * c).collect(),
            sample_rate: w.sample_rate,
        }
    }

    #[test]
    fn fixed_point_in_both_modes() {
        let s = reference(1);
        for mode in [UpdateMode::Linear, UpdateMode::GainInverse] {
            let cfg = IlcConfig {
                update_mode: mode,
                ..IlcConfig::default()
            };
            let x = ilc_step(&s, &s, &s, &cfg).unwrap();
            for (a, b) in x.samples.iter().zip(&s.samples) {
                assert!((a - b).norm() <= 1e-15 * b.norm(), "{mode:?}: {a} != {b}");
            }
        }
    }

    #[test]
    fn linear_update_hand_example() {
        // mu = 1, x = s, y_hat = 1.1 s  ->  x' = 0.9 s.
        let s = reference(2);
        let cfg = IlcConfig {
            step_mu: 1.0,
            ..IlcConfig::default()
        };
        let y_hat = scale(&s, Complex64::new(1.1, 0.0));
        let x = ilc_step(&s, &y_hat, &s, &cfg).unwrap();
        for (a, b) in x.samples.iter().zip(&s.samples) {
            let want = b * 0.9;
            assert!((a - want).norm() < 1e-12 * want.norm() + 1e-15);
        }
    }

    #[test]
    fn gain_inverse_guards_small_samples() {
        let s = ComplexWaveform::new(
            vec![
                Complex64::ONE,
                Complex64::new(0.0, 1.0),
                Complex64::new(2.0, 0.0),
            ],
            1.0,
        )
        .unwrap();
        let mut y = s.clone();
        y.samples[1] = Complex64::ZERO; // would divide by zero
        let cfg = IlcConfig {
            update_mode: UpdateMode::GainInverse,
            ..IlcConfig::default()
        };
        let x = ilc_step(&s, &y, &s, &cfg).unwrap();
        assert!(x
            .samples
            .iter()
            .all(|v| v.re.is_finite() && v.im.is_finite()));
        // Guarded sample took the linear rule: x + mu (s - 0) = (1 + mu) s.
        let want = s.samples[1] * 1.5;
        assert!((x.samples[1] - want).norm() < 1e-15);
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let s = reference(3);
        let short = s.slice(0..s.len() - 1);
        assert!(matches!(
            ilc_step(&s, &short, &s, &IlcConfig::default()),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn identity_plant_converges_immediately() {
        let s = reference(4);
        let result = ilc_run(&s, |x| Ok(x.clone()), &IlcConfig::default(), 32).unwrap();
        assert_eq!(result.per_iteration_nmse_db, vec![-200.0]);
        assert_eq!(result.final_input.samples, s.samples);
        assert!((result.estimated_gain - Complex64::ONE).norm() < 1e-12);
    }

    #[test]
    fn mild_pa_bypass_capture_converges_deep() {
        let s = reference(5);
        let model = make_reference_pa(PaPreset::Mild);
        let result = ilc_run(&s, |x| apply_pa(&model, x), &IlcConfig::default(), 32).unwrap();
        let last = *result.per_iteration_nmse_db.last().unwrap();
        assert!(
            last <= -60.0,
            "mild plant stalled at {last:.1} dB: {:?}",
            result.per_iteration_nmse_db
        );
        assert!((result.estimated_gain.norm() - 10.0).abs() < 0.5);
    }

    #[test]
    fn nmse_trend_non_increasing_for_mild_plant() {
        let s = reference(6);
        let model = make_reference_pa(PaPreset::Mild);
        let result = ilc_run(&s, |x| apply_pa(&model, x), &IlcConfig::default(), 32).unwrap();
        let t = &result.per_iteration_nmse_db;
        for i in 1..t.len() - 1 {
            assert!(
                t[i + 1] <= t[i] + 0.5,
                "NMSE rose from {:.2} to {:.2} at iteration {}",
                t[i],
                t[i + 1],
                i + 1
            );
        }
    }

    #[test]
    fn single_iteration_applies_exactly_one_update() {
        let s = reference(7);
        let model = make_reference_pa(PaPreset::Mild);
        let cfg = IlcConfig {
            max_iterations: 1,
            ..IlcConfig::default()
        };
        let result = ilc_run(&s, |x| apply_pa(&model, x), &cfg, 32).unwrap();
        assert_eq!(result.per_iteration_nmse_db.len(), 1);

        // Reconstruct the expected update from the same deterministic plant.
        let y = apply_pa(&model, &s).unwrap();
        let a = crate::align::estimate_delay(&s, &y, 32).unwrap();
        let y_hat = crate::align::apply_alignment(&y, &a);
        let want = ilc_step(&s, &y_hat, &s, &cfg).unwrap();
        assert_eq!(result.final_input.samples, want.samples);
    }

    #[test]
    fn linear_update_phase_equivariant() {
        let s = reference(8);
        let rot = Complex64::from_polar(1.0, 1.234);
        let y_hat = scale(&s, Complex64::new(1.05, -0.02));
        let cfg = IlcConfig::default();
        let plain = ilc_step(&s, &y_hat, &s, &cfg).unwrap();
        let rotated =
            ilc_step(&scale(&s, rot), &scale(&y_hat, rot), &scale(&s, rot), &cfg).unwrap();
        for (a, b) in rotated.samples.iter().zip(&plain.samples) {
            let want = b * rot;
            assert!((a - want).norm() < 1e-12 * want.norm() + 1e-15);
        }
    }

    #[test]
    fn plant_errors_propagate() {
        let s = reference(9);
        let zero = ComplexWaveform {
            samples: vec![Complex64::ZERO; s.len()],
            sample_rate: s.sample_rate,
        };
        let err = ilc_run(&s, |_| Ok(zero.clone()), &IlcConfig::default(), 32);
        assert!(matches!(err, Err(Error::Plant(_))));
    }

    #[test]
    fn trajectory_stored_on_request() {
        let s = reference(10);
        let model = make_reference_pa(PaPreset::Mild);
        let cfg = IlcConfig {
            max_iterations: 3,
            store_trajectory: true,
            ..IlcConfig::default()
        };
        let result = ilc_run(&s, |x| apply_pa(&model, x), &cfg, 32).unwrap();
        let inputs = result.per_iteration_inputs.unwrap();
        assert_eq!(inputs.len(), 3);
        assert_eq!(inputs[0].samples, s.samples);
    }

    #[test]
    fn quantized_capture_loop_runs_end_to_end() {
        // Smoke test of the full plant composition used by the harness.
        use crate::capture::{QuantizerMode, QuantizerSpec};
        let s = reference(11);
        let model = make_reference_pa(PaPreset::TestbedLike);
        let capture = CaptureConfig {
            quantizer: Some(QuantizerSpec {
                bits: 12,
                rho: 10f64.powf(16.0 / 20.0),
                mode: QuantizerMode::Logarithmic,
            }),
            fractional_delay_samples: 0.3,
            seed: 42,
            ..CaptureConfig::default()
        };
        let cfg = IlcConfig {
            max_iterations: 5,
            ..IlcConfig::default()
        };
        let result = ilc_run(
            &s,
            |x| capture_chain(&apply_pa(&model, x)?, &capture),
            &cfg,
            32,
        )
        .unwrap();
        assert_eq!(result.per_iteration_nmse_db.len(), 5);
        let (first, last) = (
            result.per_iteration_nmse_db[0],
            *result.per_iteration_nmse_db.last().unwrap(),
        );
        assert!(last < first, "no improvement: {first:.1} -> {last:.1} dB");
        assert!(last < -35.0, "quantized loop stalled at {last:.1} dB");
    }
}
