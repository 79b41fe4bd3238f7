//! OFDM baseband waveform generation and basic waveform arithmetic.
//!
//! Waveforms are complex baseband sample sequences tagged with a sample
//! rate. The generator synthesizes random-data OFDM symbols on a known
//! frequency-domain grid (kept alongside as [`GridReference`]) so that
//! constellation-domain metrics can be computed later. Synthesis uses a
//! unitary IDFT: without a cyclic prefix, time-domain power equals grid
//! power exactly.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fft;

/// Complex baseband sample sequence with its sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexWaveform {
    pub samples: Vec<Complex64>,
    pub sample_rate: f64,
}

impl ComplexWaveform {
    /// Builds a waveform, rejecting empty/non-finite data and bad rates.
    pub fn new(samples: Vec<Complex64>, sample_rate: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Config("waveform must be non-empty".into()));
        }
        if !(sample_rate > 0.0) {
            return Err(Error::Config(format!(
                "sample rate must be positive, got {sample_rate}"
            )));
        }
        if samples
            .iter()
            .any(|s| !s.re.is_finite() || !s.im.is_finite())
        {
            return Err(Error::Config("waveform contains non-finite samples".into()));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Mean power, `mean |x|^2`.
    pub fn mean_power(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / self.samples.len() as f64
    }

    pub fn rms(&self) -> f64 {
        self.mean_power().sqrt()
    }

    /// Largest sample magnitude.
    pub fn peak(&self) -> f64 {
        self.samples.iter().map(|s| s.norm()).fold(0.0, f64::max)
    }

    /// Copy of a sample range as a new waveform (same rate).
    pub fn slice(&self, range: std::ops::Range<usize>) -> Self {
        Self {
            samples: self.samples[range].to_vec(),
            sample_rate: self.sample_rate,
        }
    }
}

/// Positive rational number, used for oversampling and resampling ratios.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ratio {
    pub num: u32,
    pub den: u32,
}

impl Ratio {
    pub fn new(num: u32, den: u32) -> Result<Self> {
        if num == 0 || den == 0 {
            return Err(Error::Config(format!("ratio {num}/{den} must be positive")));
        }
        Ok(Self { num, den })
    }

    pub fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// Scales a length by the ratio, failing unless the result is integral.
    pub fn scale_len(&self, n: usize) -> Result<usize> {
        let scaled = n * self.num as usize;
        if !scaled.is_multiple_of(self.den as usize) {
            return Err(Error::Config(format!(
                "{n} * {}/{} is not an integer sample count",
                self.num, self.den
            )));
        }
        Ok(scaled / self.den as usize)
    }

    /// The reciprocal ratio (undoes a resampling by `self`).
    pub fn inverse(&self) -> Self {
        Self {
            num: self.den,
            den: self.num,
        }
    }
}

impl std::fmt::Display for Ratio {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

/// Subcarrier constellation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constellation {
    Qpsk,
    Qam16,
    Qam64,
    Qam256,
}

impl Constellation {
    /// Points per I/Q axis.
    fn levels(&self) -> usize {
        match self {
            Constellation::Qpsk => 2,
            Constellation::Qam16 => 4,
            Constellation::Qam64 => 8,
            Constellation::Qam256 => 16,
        }
    }

    /// Scale that normalizes the constellation to unit average power.
    fn scale(&self) -> f64 {
        let m = self.levels() as f64;
        // E|a|^2 over {±1, ±3, ..., ±(m-1)} per axis is (m^2 - 1)/3, twice for I+Q.
        (2.0 * (m * m - 1.0) / 3.0).sqrt().recip()
    }

    /// The `idx`-th axis level, `idx < levels()`.
    fn level(&self, idx: usize) -> f64 {
        let m = self.levels() as f64;
        (2.0 * idx as f64 + 1.0 - m) * self.scale()
    }

    /// Draws a uniformly random constellation point.
    fn draw(&self, rng: &mut impl Rng) -> Complex64 {
        let m = self.levels();
        let i = rng.random_range(0..m);
        let q = rng.random_range(0..m);
        Complex64::new(self.level(i), self.level(q))
    }

    /// Whether `point` is (numerically) a point of this constellation.
    pub fn contains(&self, point: Complex64) -> bool {
        let m = self.levels();
        let close = |v: f64| (0..m).any(|i| (v - self.level(i)).abs() < 1e-12);
        close(point.re) && close(point.im)
    }
}

impl std::fmt::Display for Constellation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Constellation::Qpsk => "qpsk",
            Constellation::Qam16 => "qam16",
            Constellation::Qam64 => "qam64",
            Constellation::Qam256 => "qam256",
        };
        f.write_str(s)
    }
}

/// OFDM numerology.
///
/// The subcarrier spacing is `bandwidth_hz / occupied_subcarriers`; the
/// output sample rate is `spacing * fft_size * oversampling`. The cyclic
/// prefix length is given in base-rate samples and scaled by the
/// oversampling ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct OfdmConfig {
    pub fft_size: usize,
    pub occupied_subcarriers: usize,
    pub num_symbols: usize,
    pub cyclic_prefix_len: usize,
    pub constellation: Constellation,
    pub oversampling: Ratio,
    pub bandwidth_hz: f64,
}

impl Default for OfdmConfig {
    fn default() -> Self {
        Self {
            fft_size: 1024,
            occupied_subcarriers: 800,
            num_symbols: 20,
            cyclic_prefix_len: 64,
            constellation: Constellation::Qam256,
            oversampling: Ratio { num: 3, den: 2 },
            bandwidth_hz: 160e6,
        }
    }
}

impl OfdmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.fft_size == 0 || self.occupied_subcarriers == 0 || self.num_symbols == 0 {
            return Err(Error::Config(
                "fft size, occupancy and symbol count must be positive".into(),
            ));
        }
        if self.occupied_subcarriers >= self.fft_size {
            return Err(Error::Config(format!(
                "occupied subcarriers ({}) must leave a guard band below fft size ({})",
                self.occupied_subcarriers, self.fft_size
            )));
        }
        if !(self.bandwidth_hz > 0.0) {
            return Err(Error::Config("bandwidth must be positive".into()));
        }
        self.oversampling.scale_len(self.fft_size)?;
        self.oversampling.scale_len(self.cyclic_prefix_len)?;
        Ok(())
    }

    /// Occupied subcarrier indices relative to DC, ascending, DC excluded.
    pub fn subcarrier_indices(&self) -> Vec<i32> {
        let n_neg = (self.occupied_subcarriers / 2) as i32;
        let n_pos = self.occupied_subcarriers as i32 - n_neg;
        (-n_neg..=-1).chain(1..=n_pos).collect()
    }

    /// IDFT length after oversampling.
    pub fn oversampled_fft(&self) -> usize {
        self.oversampling
            .scale_len(self.fft_size)
            .expect("validated")
    }

    /// Cyclic prefix length after oversampling.
    pub fn oversampled_cp(&self) -> usize {
        self.oversampling
            .scale_len(self.cyclic_prefix_len)
            .expect("validated")
    }

    /// Samples per OFDM symbol including the cyclic prefix.
    pub fn symbol_len(&self) -> usize {
        self.oversampled_fft() + self.oversampled_cp()
    }

    pub fn subcarrier_spacing_hz(&self) -> f64 {
        self.bandwidth_hz / self.occupied_subcarriers as f64
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.subcarrier_spacing_hz() * self.oversampled_fft() as f64
    }
}

/// Frequency-domain reference: the transmitted constellation points per
/// symbol and the subcarrier indices they sit on.
#[derive(Debug, Clone, PartialEq)]
pub struct GridReference {
    /// `[num_symbols][occupied_subcarriers]`, aligned with `subcarrier_indices`.
    pub data_symbols: Vec<Vec<Complex64>>,
    pub subcarrier_indices: Vec<i32>,
}

impl GridReference {
    pub fn num_symbols(&self) -> usize {
        self.data_symbols.len()
    }

    /// Sum of |point|^2 over the whole grid.
    pub fn total_power(&self) -> f64 {
        self.data_symbols
            .iter()
            .flat_map(|row| row.iter())
            .map(|p| p.norm_sqr())
            .sum()
    }

    /// Copy of a symbol range.
    pub fn slice_symbols(&self, range: std::ops::Range<usize>) -> Self {
        Self {
            data_symbols: self.data_symbols[range].to_vec(),
            subcarrier_indices: self.subcarrier_indices.clone(),
        }
    }
}

/// Synthesizes the time-domain waveform for a given grid (no RMS
/// normalization). Unitary scaling: with no cyclic prefix the total
/// time-domain power equals [`GridReference::total_power`].
pub fn synthesize(cfg: &OfdmConfig, grid: &GridReference) -> Result<ComplexWaveform> {
    cfg.validate()?;
    let n_os = cfg.oversampled_fft();
    let cp = cfg.oversampled_cp();
    let mut samples = Vec::with_capacity(grid.num_symbols() * (n_os + cp));
    let mut spectrum = vec![Complex64::ZERO; n_os];
    for row in &grid.data_symbols {
        if row.len() != grid.subcarrier_indices.len() {
            return Err(Error::Shape(
                "grid row length != subcarrier index count".into(),
            ));
        }
        spectrum.iter_mut().for_each(|v| *v = Complex64::ZERO);
        for (&idx, &point) in grid.subcarrier_indices.iter().zip(row) {
            let bin = if idx >= 0 {
                idx as usize
            } else {
                n_os - idx.unsigned_abs() as usize
            };
            spectrum[bin] = point;
        }
        let mut time = spectrum.clone();
        fft::inverse_unitary(&mut time);
        samples.extend_from_slice(&time[n_os - cp..]);
        samples.extend_from_slice(&time);
    }
    ComplexWaveform::new(samples, cfg.sample_rate_hz())
}

/// Demodulates a waveform back onto the occupied grid: strips the cyclic
/// prefix, forward-DFTs each symbol and extracts the occupied bins.
/// Processes as many whole symbols as fit in `w`.
pub fn demodulate(w: &ComplexWaveform, cfg: &OfdmConfig) -> Result<Vec<Vec<Complex64>>> {
    cfg.validate()?;
    let n_os = cfg.oversampled_fft();
    let cp = cfg.oversampled_cp();
    let sym_len = n_os + cp;
    let num_symbols = w.len() / sym_len;
    if num_symbols == 0 {
        return Err(Error::Length(format!(
            "waveform of {} samples holds no whole {sym_len}-sample symbol",
            w.len()
        )));
    }
    let indices = cfg.subcarrier_indices();
    let mut rows = Vec::with_capacity(num_symbols);
    for s in 0..num_symbols {
        let start = s * sym_len + cp;
        let mut buf = w.samples[start..start + n_os].to_vec();
        fft::forward_unitary(&mut buf);
        let row = indices
            .iter()
            .map(|&idx| {
                let bin = if idx >= 0 {
                    idx as usize
                } else {
                    n_os - idx.unsigned_abs() as usize
                };
                buf[bin]
            })
            .collect();
        rows.push(row);
    }
    Ok(rows)
}

/// Generates an OFDM waveform with uniformly random data symbols.
///
/// Deterministic: the same `(cfg, seed)` pair yields bit-identical output.
/// The returned waveform is RMS-normalized to 1.
pub fn generate_ofdm(cfg: &OfdmConfig, seed: u64) -> Result<(ComplexWaveform, GridReference)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let indices = cfg.subcarrier_indices();
    let data_symbols: Vec<Vec<Complex64>> = (0..cfg.num_symbols)
        .map(|_| {
            (0..indices.len())
                .map(|_| cfg.constellation.draw(&mut rng))
                .collect()
        })
        .collect();
    let grid = GridReference {
        data_symbols,
        subcarrier_indices: indices,
    };
    let raw = synthesize(cfg, &grid)?;
    let normalized = normalize_rms(&raw, 1.0)?;
    Ok((normalized, grid))
}

/// Peak-to-average power ratio in dB: `10 log10(max|w|^2 / mean|w|^2)`.
pub fn measure_papr(w: &ComplexWaveform) -> Result<f64> {
    let mean = w.mean_power();
    if mean <= 0.0 {
        return Err(Error::UndefinedMetric(
            "PAPR of an all-zero waveform".into(),
        ));
    }
    let peak = w.samples.iter().map(|s| s.norm_sqr()).fold(0.0, f64::max);
    Ok(10.0 * (peak / mean).log10())
}

/// Scales a waveform so its RMS equals `target_rms`.
pub fn normalize_rms(w: &ComplexWaveform, target_rms: f64) -> Result<ComplexWaveform> {
    if !(target_rms > 0.0) {
        return Err(Error::Domain(format!(
            "target RMS must be positive, got {target_rms}"
        )));
    }
    let rms = w.rms();
    if rms <= 0.0 {
        return Err(Error::UndefinedMetric(
            "cannot normalize a zero-power waveform".into(),
        ));
    }
    let c = target_rms / rms;
    let samples = w.samples.iter().map(|s| s * c).collect();
    ComplexWaveform::new(samples, w.sample_rate)
}

/// Resamples a waveform by a rational ratio (polyphase windowed sinc with
/// anti-alias filtering when decimating); the sample rate is scaled to
/// match.
pub fn resample(w: &ComplexWaveform, ratio: Ratio) -> Result<ComplexWaveform> {
    if w.len() < 2 {
        return Err(Error::Length("resampling needs at least 2 samples".into()));
    }
    let samples = crate::sinc::resample_rational(&w.samples, ratio.num, ratio.den);
    if samples.is_empty() {
        return Err(Error::Length(format!(
            "resampling {} samples by {ratio} leaves none",
            w.len()
        )));
    }
    ComplexWaveform::new(samples, w.sample_rate * ratio.value())
}
