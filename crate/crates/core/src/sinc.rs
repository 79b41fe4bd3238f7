//! Kaiser-windowed sinc interpolation: fractional sample delay and
//! rational-rate resampling.
//!
//! Kernels are centered so that an integer delay maps to an exact sample
//! shift (zero extra latency) and the fractional part is interpolated by a
//! windowed sinc. Signals are treated as zero outside their support, so a
//! handful of samples at each edge carry filter transients; callers exclude
//! an edge guard before computing metrics.

use num_complex::Complex64;

/// Tap count used for all fractional-delay and resampling kernels.
pub(crate) const KERNEL_TAPS: usize = 64;

/// Kaiser window shape parameter (roughly 90 dB sidelobe suppression).
const KAISER_BETA: f64 = 8.6;

/// Modified Bessel function of the first kind, order zero, by power series.
fn bessel_i0(x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= (half / k as f64) * (half / k as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// Kaiser window value at normalized position `u` in [-1, 1].
fn kaiser(u: f64) -> f64 {
    if u.abs() > 1.0 {
        return 0.0;
    }
    bessel_i0(KAISER_BETA * (1.0 - u * u).sqrt()) / bessel_i0(KAISER_BETA)
}

fn sinc(t: f64) -> f64 {
    if t.abs() < 1e-12 {
        1.0
    } else {
        let p = std::f64::consts::PI * t;
        p.sin() / p
    }
}

/// Interpolation kernel for a fractional offset `frac` in [-0.5, 0.5] with
/// passband `cutoff` in (0, 1] (1 = full Nyquist). The kernel is centered at
/// tap `taps/2` and normalized to unit DC gain; at `frac == 0, cutoff == 1`
/// it reduces to a unit impulse.
fn kernel(frac: f64, cutoff: f64, taps: usize) -> Vec<f64> {
    let center = (taps / 2) as f64;
    let mut h: Vec<f64> = (0..taps)
        .map(|k| {
            let t = k as f64 - center - frac;
            cutoff * sinc(cutoff * t) * kaiser(t / center)
        })
        .collect();
    let sum: f64 = h.iter().sum();
    h.iter_mut().for_each(|v| *v /= sum);
    h
}

/// Delays `x` by an arbitrary real number of samples (`delay` may be
/// negative for an advance). Output has the same length; samples shifted in
/// from outside the input are zero.
pub(crate) fn shift_by(x: &[Complex64], delay: f64) -> Vec<Complex64> {
    let int = delay.round();
    let frac = delay - int;
    let int = int as i64;
    if frac == 0.0 {
        // Pure integer shift, exact.
        return (0..x.len() as i64)
            .map(|n| {
                let src = n - int;
                if (0..x.len() as i64).contains(&src) {
                    x[src as usize]
                } else {
                    Complex64::ZERO
                }
            })
            .collect();
    }
    let h = kernel(frac, 1.0, KERNEL_TAPS);
    let center = (KERNEL_TAPS / 2) as i64;
    (0..x.len() as i64)
        .map(|n| {
            let mut acc = Complex64::ZERO;
            for (k, &hk) in h.iter().enumerate() {
                // y[n] = sum_k h[k] x[n - int + center - k]: the kernel's own
                // group delay of `center` samples is compensated here.
                let src = n - int + center - k as i64;
                if (0..x.len() as i64).contains(&src) {
                    acc += hk * x[src as usize];
                }
            }
            acc
        })
        .collect()
}

/// Resamples `x` by the rational factor `num/den` (output rate = input rate
/// times `num/den`). Output length is `floor(len * num / den)`. Downsampling
/// applies the matching anti-alias cutoff.
pub(crate) fn resample_rational(x: &[Complex64], num: u32, den: u32) -> Vec<Complex64> {
    assert!(num > 0 && den > 0, "resampling ratio must be positive");
    if num == den {
        return x.to_vec();
    }
    let cutoff = (num as f64 / den as f64).min(1.0);
    // Widen the kernel when downsampling so the narrower passband keeps a
    // comparable transition width.
    let taps = (KERNEL_TAPS as f64 / cutoff).ceil() as usize;
    let taps = taps + (taps % 2); // keep the center on an integer tap
                                  // Output sample m sits at input position m * den / num; the fractional
                                  // part cycles through `num` phases, so precompute one kernel per phase.
                                  // `kernel(f, ..)` convolved against x evaluates x at (base - f), so the
                                  // fractional offset is negated to interpolate at base + (pos - int).
    let phases: Vec<(i64, Vec<f64>)> = (0..num as i64)
        .map(|m| {
            let pos = m as f64 * den as f64 / num as f64;
            let int = pos.round();
            (int as i64, kernel(int - pos, cutoff, taps))
        })
        .collect();
    let out_len = (x.len() * num as usize) / den as usize;
    let center = (taps / 2) as i64;
    (0..out_len as i64)
        .map(|m| {
            let cycle = m / num as i64;
            let (int, h) = &phases[(m % num as i64) as usize];
            let base = cycle * den as i64 + int;
            let mut acc = Complex64::ZERO;
            for (k, &hk) in h.iter().enumerate() {
                let src = base + center - k as i64;
                if (0..x.len() as i64).contains(&src) {
                    acc += hk * x[src as usize];
                }
            }
            acc
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Bandlimited multitone test signal safely inside the kernel passband.
    fn multitone(len: usize) -> Vec<Complex64> {
        let freqs = [0.013, -0.087, 0.191, 0.258, -0.240];
        (0..len)
            .map(|n| {
                freqs
                    .iter()
                    .enumerate()
                    .map(|(i, f)| {
                        Complex64::from_polar(
                            1.0 + 0.2 * i as f64,
                            std::f64::consts::TAU * f * n as f64,
                        )
                    })
                    .sum()
            })
            .collect()
    }

    fn interior_nmse_db(a: &[Complex64], b: &[Complex64], guard: usize) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for i in guard..a.len() - guard {
            num += (a[i] - b[i]).norm_sqr();
            den += b[i].norm_sqr();
        }
        10.0 * (num / den).log10()
    }

    #[test]
    fn bessel_i0_reference_values() {
        // Abramowitz & Stegun 9.8: I0(0) = 1, I0(1) = 1.2660658778,
        // I0(2) = 2.2795853023.
        assert!((bessel_i0(0.0) - 1.0).abs() < 1e-15);
        assert!((bessel_i0(1.0) - 1.2660658777520084).abs() < 1e-12);
        assert!((bessel_i0(2.0) - 2.2795853023360673).abs() < 1e-12);
    }

    #[test]
    fn zero_fraction_kernel_is_impulse() {
        let h = kernel(0.0, 1.0, KERNEL_TAPS);
        for (k, &v) in h.iter().enumerate() {
            if k == KERNEL_TAPS / 2 {
                assert!((v - 1.0).abs() < 1e-12);
            } else {
                assert!(v.abs() < 1e-12, "tap {k} = {v}");
            }
        }
    }

    #[test]
    fn integer_shift_is_exact() {
        let x = multitone(256);
        let y = shift_by(&x, 3.0);
        for n in 3..x.len() {
            assert_eq!(y[n], x[n - 3]);
        }
        assert_eq!(y[0], Complex64::ZERO);
    }

    #[test]
    fn negative_shift_advances() {
        let x = multitone(256);
        let y = shift_by(&x, -2.0);
        for n in 0..x.len() - 2 {
            assert_eq!(y[n], x[n + 2]);
        }
    }

    #[test]
    fn fractional_shift_matches_phase_ramp() {
        // Delaying exp(j 2 pi f n) by d multiplies it by exp(-j 2 pi f d).
        let f = 0.21;
        let x: Vec<Complex64> = (0..512)
            .map(|n| Complex64::from_polar(1.0, std::f64::consts::TAU * f * n as f64))
            .collect();
        let d = 0.37;
        let y = shift_by(&x, d);
        let rot = Complex64::from_polar(1.0, -std::f64::consts::TAU * f * d);
        let expect: Vec<Complex64> = x.iter().map(|v| v * rot).collect();
        let nmse = interior_nmse_db(&y, &expect, KERNEL_TAPS);
        assert!(nmse < -80.0, "fractional shift NMSE {nmse:.1} dB");
    }

    #[test]
    fn shift_roundtrip_is_identity_in_interior() {
        let x = multitone(512);
        let y = shift_by(&shift_by(&x, 0.43), -0.43);
        let nmse = interior_nmse_db(&y, &x, 2 * KERNEL_TAPS);
        assert!(nmse < -80.0, "roundtrip NMSE {nmse:.1} dB");
    }

    #[test]
    fn unit_ratio_resample_is_identity() {
        let x = multitone(100);
        assert_eq!(resample_rational(&x, 1, 1), x);
        assert_eq!(resample_rational(&x, 7, 7).len(), 100);
    }

    #[test]
    fn resample_length_scales_by_ratio() {
        let x = multitone(300);
        assert_eq!(resample_rational(&x, 2, 1).len(), 600);
        assert_eq!(resample_rational(&x, 2, 3).len(), 200);
        assert_eq!(resample_rational(&x, 3, 2).len(), 450);
    }

    #[test]
    fn upsample_preserves_tone() {
        let f = 0.11;
        let x: Vec<Complex64> = (0..512)
            .map(|n| Complex64::from_polar(1.0, std::f64::consts::TAU * f * n as f64))
            .collect();
        let y = resample_rational(&x, 2, 1);
        // Same tone at half the normalized frequency.
        let expect: Vec<Complex64> = (0..y.len())
            .map(|m| Complex64::from_polar(1.0, std::f64::consts::TAU * f * m as f64 / 2.0))
            .collect();
        let nmse = interior_nmse_db(&y, &expect, 2 * KERNEL_TAPS);
        assert!(nmse < -70.0, "upsample NMSE {nmse:.1} dB");
    }

    #[test]
    fn resample_roundtrip_is_identity_in_interior() {
        let x = multitone(600);
        let y = resample_rational(&resample_rational(&x, 3, 2), 2, 3);
        assert_eq!(y.len(), x.len());
        let nmse = interior_nmse_db(&y, &x, 4 * KERNEL_TAPS);
        assert!(nmse < -60.0, "3/2 then 2/3 roundtrip NMSE {nmse:.1} dB");
    }
}
