//! Experiment configuration: a flat key-value file with dotted section
//! prefixes (`capture.quantizer.bits = 12`), a complete defaults table,
//! and strict rejection of unknown or unused keys so typos cannot
//! silently fall back to defaults.
//!
//! Values: numbers (`1e6` ok), booleans (`true`/`false`), ratios (`3/2`),
//! comma lists (`0, 4, 8`), inclusive ranges (`-1:1:23` as
//! start:step:end), and complex numbers in rectangular (`0.1-0.2i`) or
//! polar (`0.15@30`, magnitude at degrees) form.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use dpdlab_core::capture::{CaptureConfig, QuantizerMode, QuantizerSpec};
use dpdlab_core::error::{Error, Result};
use dpdlab_core::gmp::GmpConfig;
use dpdlab_core::ilc::{IlcConfig, UpdateMode};
use dpdlab_core::pa::{make_reference_pa, AmAm, AmPm, PaModel, PaPreset};
use dpdlab_core::waveform::{Constellation, OfdmConfig, Ratio};

/// Experiment kind selected by the required `scenario` key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    RhoSweep,
    GmpFit,
    PowerSweep,
    PsdExport,
}

impl Scenario {
    /// Stable tag used in seed derivation and artifact naming.
    pub fn tag(&self) -> &'static str {
        match self {
            Scenario::RhoSweep => "rho-sweep",
            Scenario::GmpFit => "gmp-fit",
            Scenario::PowerSweep => "power-sweep",
            Scenario::PsdExport => "psd-export",
        }
    }
}

impl std::str::FromStr for Scenario {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rho-sweep" => Ok(Scenario::RhoSweep),
            "gmp-fit" => Ok(Scenario::GmpFit),
            "power-sweep" => Ok(Scenario::PowerSweep),
            "psd-export" => Ok(Scenario::PsdExport),
            other => Err(Error::Config(format!(
                "unknown scenario {other:?} (expected rho-sweep, gmp-fit, power-sweep or psd-export)"
            ))),
        }
    }
}

/// Fully resolved experiment description.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub ofdm: OfdmConfig,
    pub pa: PaModel,
    /// Capture template; the `seed` field is overwritten per capture call.
    pub capture: CaptureConfig,
    pub ilc: IlcConfig,
    pub gmp: GmpConfig,
    /// Fractional-delay search resolution R for alignment.
    pub align_resolution: usize,
    pub rho_grid_db: Vec<f64>,
    pub power_grid_db: Vec<f64>,
    /// Optional explicit GMP order per power-sweep point; derived from the
    /// 3..9 escalation when absent.
    pub gmp_order_schedule: Option<Vec<u32>>,
    pub num_train: usize,
    pub num_test: usize,
    pub master_seed: u64,
    pub output_dir: PathBuf,
}

/// Parsed key-value file tracking which keys were consumed.
struct KeyValues {
    entries: BTreeMap<String, String>,
    used: RefCell<BTreeSet<String>>,
}

impl KeyValues {
    fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!(
                    "line {}: expected `key = value`, got {raw:?}",
                    lineno + 1
                ))
            })?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() {
                return Err(Error::Config(format!("line {}: empty key", lineno + 1)));
            }
            if entries.insert(key.clone(), value).is_some() {
                return Err(Error::Config(format!("duplicate key {key:?}")));
            }
        }
        Ok(Self {
            entries,
            used: RefCell::new(BTreeSet::new()),
        })
    }

    fn raw(&self, key: &str) -> Option<&str> {
        let hit = self.entries.get(key).map(String::as_str);
        if hit.is_some() {
            self.used.borrow_mut().insert(key.to_string());
        }
        hit
    }

    fn string(&self, key: &str, default: &str) -> String {
        self.raw(key).unwrap_or(default).to_string()
    }

    fn required(&self, key: &str) -> Result<&str> {
        self.raw(key)
            .ok_or_else(|| Error::Config(format!("missing required key {key:?}")))
    }

    fn f64(&self, key: &str, default: f64) -> Result<f64> {
        match self.raw(key) {
            Some(v) => parse_f64(v).map_err(|e| at_key(key, e)),
            None => Ok(default),
        }
    }

    fn optional_f64(&self, key: &str) -> Result<Option<f64>> {
        match self.raw(key) {
            None => Ok(None),
            Some("none") => Ok(None),
            Some(v) => parse_f64(v).map(Some).map_err(|e| at_key(key, e)),
        }
    }

    fn u64(&self, key: &str, default: u64) -> Result<u64> {
        match self.raw(key) {
            Some(v) => v.parse::<u64>().map_err(|_| {
                Error::Config(format!(
                    "key {key:?}: expected an unsigned integer, got {v:?}"
                ))
            }),
            None => Ok(default),
        }
    }

    fn usize(&self, key: &str, default: usize) -> Result<usize> {
        Ok(self.u64(key, default as u64)? as usize)
    }

    fn u32(&self, key: &str, default: u32) -> Result<u32> {
        let v = self.u64(key, u64::from(default))?;
        u32::try_from(v).map_err(|_| Error::Config(format!("key {key:?}: {v} out of range")))
    }

    fn bool(&self, key: &str, default: bool) -> Result<bool> {
        match self.raw(key) {
            Some("true") => Ok(true),
            Some("false") => Ok(false),
            Some(v) => Err(Error::Config(format!(
                "key {key:?}: expected true or false, got {v:?}"
            ))),
            None => Ok(default),
        }
    }

    fn ratio(&self, key: &str, default: Ratio) -> Result<Ratio> {
        match self.raw(key) {
            Some(v) => parse_ratio(v).map_err(|e| at_key(key, e)),
            None => Ok(default),
        }
    }

    fn optional_ratio(&self, key: &str) -> Result<Option<Ratio>> {
        match self.raw(key) {
            None => Ok(None),
            Some("none") => Ok(None),
            Some(v) => parse_ratio(v).map(Some).map_err(|e| at_key(key, e)),
        }
    }

    fn f64_list(&self, key: &str, default: &str) -> Result<Vec<f64>> {
        parse_f64_list(self.raw(key).unwrap_or(default)).map_err(|e| at_key(key, e))
    }

    fn complex_list(&self, key: &str, default: &str) -> Result<Vec<Complex64>> {
        parse_complex_list(self.raw(key).unwrap_or(default)).map_err(|e| at_key(key, e))
    }

    fn optional_complex_list(&self, key: &str) -> Result<Option<Vec<Complex64>>> {
        match self.raw(key) {
            None => Ok(None),
            Some("none") => Ok(None),
            Some(v) => parse_complex_list(v).map(Some).map_err(|e| at_key(key, e)),
        }
    }

    fn optional_u32_list(&self, key: &str) -> Result<Option<Vec<u32>>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .split(',')
                .map(|t| {
                    t.trim().parse::<u32>().map_err(|_| {
                        Error::Config(format!("key {key:?}: expected integers, got {t:?}"))
                    })
                })
                .collect::<Result<Vec<_>>>()
                .map(Some),
        }
    }

    /// Rejects keys that were present but never consumed (typos or keys
    /// that do not apply to the selected preset/scenario).
    fn finish(&self) -> Result<()> {
        let used = self.used.borrow();
        let unknown: Vec<&String> = self.entries.keys().filter(|k| !used.contains(*k)).collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "unknown or unused keys: {}",
                unknown
                    .iter()
                    .map(|k| k.as_str())
                    .collect::<Vec<_>>()
                    .join(", ")
            )))
        }
    }
}

fn at_key(key: &str, e: Error) -> Error {
    Error::Config(format!("key {key:?}: {e}"))
}

fn parse_f64(v: &str) -> Result<f64> {
    let x: f64 = v
        .parse()
        .map_err(|_| Error::Config(format!("expected a number, got {v:?}")))?;
    if !x.is_finite() {
        return Err(Error::Config(format!("{v:?} is not finite")));
    }
    Ok(x)
}

fn parse_ratio(v: &str) -> Result<Ratio> {
    let (n, d) = v
        .split_once('/')
        .ok_or_else(|| Error::Config(format!("expected num/den, got {v:?}")))?;
    let num = n
        .trim()
        .parse::<u32>()
        .map_err(|_| Error::Config(format!("bad ratio numerator {n:?}")))?;
    let den = d
        .trim()
        .parse::<u32>()
        .map_err(|_| Error::Config(format!("bad ratio denominator {d:?}")))?;
    Ratio::new(num, den)
}

/// Comma list (`0, 4, 8`) or inclusive range (`start:step:end`).
fn parse_f64_list(v: &str) -> Result<Vec<f64>> {
    if v.contains(':') {
        let parts: Vec<&str> = v.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::Config(format!(
                "range must be start:step:end, got {v:?}"
            )));
        }
        let start = parse_f64(parts[0].trim())?;
        let step = parse_f64(parts[1].trim())?;
        let end = parse_f64(parts[2].trim())?;
        if step <= 0.0 || end < start {
            return Err(Error::Config(format!(
                "range {v:?} needs a positive step and end >= start"
            )));
        }
        let count = ((end - start) / step + 1.0 + 1e-9).floor() as usize;
        return Ok((0..count).map(|i| start + step * i as f64).collect());
    }
    v.split(',').map(|t| parse_f64(t.trim())).collect()
}

/// Complex scalar: polar `mag@degrees` or rectangular `a`, `bi`, `a+bi`
/// (`j` accepted for `i`; exponents like `1e-3` work in either part).
fn parse_complex(v: &str) -> Result<Complex64> {
    let v = v.trim();
    if let Some((mag, deg)) = v.split_once('@') {
        let m = parse_f64(mag.trim())?;
        let d = parse_f64(deg.trim())?;
        return Ok(Complex64::from_polar(m, d.to_radians()));
    }
    let body = v.strip_suffix(['i', 'j']);
    match body {
        None => Ok(Complex64::new(parse_f64(v)?, 0.0)),
        Some(body) => {
            // Split at the last top-level sign (skipping index 0 and signs
            // that belong to an exponent).
            let bytes = body.as_bytes();
            let split = (1..bytes.len()).rev().find(|&i| {
                (bytes[i] == b'+' || bytes[i] == b'-') && !matches!(bytes[i - 1], b'e' | b'E')
            });
            match split {
                Some(i) => Ok(Complex64::new(
                    parse_f64(body[..i].trim())?,
                    parse_f64(body[i..].trim())?,
                )),
                None => Ok(Complex64::new(0.0, parse_f64(body.trim())?)),
            }
        }
    }
}

fn parse_complex_list(v: &str) -> Result<Vec<Complex64>> {
    v.split(',').map(parse_complex).collect()
}

fn parse_constellation(v: &str) -> Result<Constellation> {
    match v {
        "qpsk" => Ok(Constellation::Qpsk),
        "qam16" => Ok(Constellation::Qam16),
        "qam64" => Ok(Constellation::Qam64),
        "qam256" => Ok(Constellation::Qam256),
        other => Err(Error::Config(format!(
            "unknown constellation {other:?} (expected qpsk, qam16, qam64 or qam256)"
        ))),
    }
}

fn parse_ofdm(kv: &KeyValues) -> Result<OfdmConfig> {
    let d = OfdmConfig::default();
    let cfg = OfdmConfig {
        fft_size: kv.usize("waveform.fft_size", d.fft_size)?,
        occupied_subcarriers: kv.usize("waveform.occupied_subcarriers", d.occupied_subcarriers)?,
        num_symbols: kv.usize("waveform.num_symbols", d.num_symbols)?,
        cyclic_prefix_len: kv.usize("waveform.cyclic_prefix_len", d.cyclic_prefix_len)?,
        constellation: parse_constellation(&kv.string("waveform.constellation", "qam256"))?,
        oversampling: kv.ratio("waveform.oversampling", d.oversampling)?,
        bandwidth_hz: kv.f64("waveform.bandwidth_hz", d.bandwidth_hz)?,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn parse_pa(kv: &KeyValues) -> Result<PaModel> {
    let preset = kv.string("pa.preset", "testbed_like");
    let model = match preset.as_str() {
        "mild" => make_reference_pa(PaPreset::Mild),
        "testbed_like" => make_reference_pa(PaPreset::TestbedLike),
        "custom" => {
            let amam = match kv.string("pa.amam", "rapp").as_str() {
                "rapp" => AmAm::Rapp {
                    sat: kv.f64("pa.rapp.sat", 10f64.powf(0.5))?,
                    p: kv.f64("pa.rapp.p", 2.0)?,
                },
                "saleh" => AmAm::Saleh {
                    alpha: kv.f64("pa.saleh.alpha", 2.0)?,
                    beta: kv.f64("pa.saleh.beta", 1.0)?,
                },
                other => {
                    return Err(Error::Config(format!(
                        "unknown pa.amam {other:?} (expected rapp or saleh)"
                    )))
                }
            };
            let ampm = match kv.string("pa.ampm", "none").as_str() {
                "none" => AmPm::None,
                "saleh" => AmPm::Saleh {
                    alpha: kv.f64("pa.ampm.alpha", 0.5)?,
                    beta: kv.f64("pa.ampm.beta", 2.0)?,
                },
                other => {
                    return Err(Error::Config(format!(
                        "unknown pa.ampm {other:?} (expected none or saleh)"
                    )))
                }
            };
            PaModel {
                memory_fir: kv.complex_list("pa.memory_fir", "1")?,
                amam,
                ampm,
                small_signal_gain: kv.f64("pa.gain", 10.0)?,
                post_fir: kv.optional_complex_list("pa.post_fir")?,
            }
        }
        other => {
            return Err(Error::Config(format!(
                "unknown pa.preset {other:?} (expected mild, testbed_like or custom)"
            )))
        }
    };
    model.validate()?;
    Ok(model)
}

/// Converts a reference-level ratio from dB to the linear amplitude ratio
/// used by the quantizer (`rho = 10^(dB/20)`).
pub fn rho_from_db(rho_db: f64) -> f64 {
    10f64.powf(rho_db / 20.0)
}

fn parse_capture(kv: &KeyValues) -> Result<CaptureConfig> {
    let quantizer = if kv.bool("capture.quantizer.enabled", true)? {
        let bits = kv.u32("capture.quantizer.bits", 12)?;
        let rho_db = kv.f64("capture.quantizer.rho_db", 16.0)?;
        let mode = match kv.string("capture.quantizer.mode", "logarithmic").as_str() {
            "logarithmic" => QuantizerMode::Logarithmic,
            "uniform" => QuantizerMode::Uniform,
            other => {
                return Err(Error::Config(format!(
                    "unknown quantizer mode {other:?} (expected logarithmic or uniform)"
                )))
            }
        };
        let rho = match mode {
            // Uniform quantization does not compand: the baseline ladder
            // corresponds to rho = 1 (reference at the peak), whatever
            // rho_db says.
            QuantizerMode::Uniform => 1.0,
            QuantizerMode::Logarithmic => rho_from_db(rho_db),
        };
        Some(QuantizerSpec { bits, rho, mode })
    } else {
        None
    };
    let cfg = CaptureConfig {
        quantizer,
        noise_snr_db: kv.optional_f64("capture.noise_snr_db")?,
        fractional_delay_samples: kv.f64("capture.fractional_delay", 0.0)?,
        resample: kv.optional_ratio("capture.resample")?,
        seed: 0, // derived per capture call at run time
    };
    cfg.validate()?;
    Ok(cfg)
}

fn parse_ilc(kv: &KeyValues) -> Result<IlcConfig> {
    let d = IlcConfig::default();
    let cfg = IlcConfig {
        max_iterations: kv.usize("ilc.iterations", d.max_iterations)?,
        step_mu: kv.f64("ilc.mu", d.step_mu)?,
        update_mode: match kv.string("ilc.mode", "linear").as_str() {
            "linear" => UpdateMode::Linear,
            "gain-inverse" => UpdateMode::GainInverse,
            other => {
                return Err(Error::Config(format!(
                    "unknown ilc.mode {other:?} (expected linear or gain-inverse)"
                )))
            }
        },
        convergence_nmse_db: kv.f64("ilc.convergence_nmse_db", d.convergence_nmse_db)?,
        gain_inverse_floor: kv.f64("ilc.gain_inverse_floor", d.gain_inverse_floor)?,
        store_trajectory: false,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn parse_gmp(kv: &KeyValues) -> Result<GmpConfig> {
    let d = GmpConfig::default();
    let cfg = GmpConfig {
        order_k: kv.u32("gmp.order_k", d.order_k)?,
        memory_depth_l: kv.u32("gmp.memory_depth_l", d.memory_depth_l)?,
        cross_memory_m: kv.u32("gmp.cross_memory_m", d.cross_memory_m)?,
        include_lagging: kv.bool("gmp.include_lagging", d.include_lagging)?,
        include_leading: kv.bool("gmp.include_leading", d.include_leading)?,
        ridge: kv.f64("gmp.ridge", d.ridge)?,
    };
    cfg.validate()?;
    Ok(cfg)
}

impl ExperimentConfig {
    pub fn parse_str(text: &str) -> Result<Self> {
        let kv = KeyValues::parse(text)?;
        let scenario: Scenario = kv.required("scenario")?.parse()?;
        let cfg = ExperimentConfig {
            scenario,
            ofdm: parse_ofdm(&kv)?,
            pa: parse_pa(&kv)?,
            capture: parse_capture(&kv)?,
            ilc: parse_ilc(&kv)?,
            gmp: parse_gmp(&kv)?,
            align_resolution: kv.usize("align.fractional_resolution", 32)?,
            rho_grid_db: kv.f64_list("rho_grid_db", "-1:1:23")?,
            power_grid_db: kv.f64_list("power_grid_db", "-15:2.5:0")?,
            gmp_order_schedule: kv.optional_u32_list("power.gmp_order_schedule")?,
            num_train: kv.usize("train_waveforms", 10)?,
            num_test: kv.usize("test_waveforms", 10)?,
            master_seed: kv.u64("master_seed", 1)?,
            output_dir: PathBuf::from(kv.string("output_dir", "out")),
        };
        kv.finish()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.scenario == Scenario::RhoSweep && self.rho_grid_db.is_empty() {
            return Err(Error::Config(
                "rho_grid_db must be non-empty for rho-sweep".into(),
            ));
        }
        if self.scenario == Scenario::PowerSweep && self.power_grid_db.is_empty() {
            return Err(Error::Config(
                "power_grid_db must be non-empty for power-sweep".into(),
            ));
        }
        if self.num_train == 0 || self.num_test == 0 {
            return Err(Error::Config(
                "train/test waveform counts must be positive".into(),
            ));
        }
        if let Some(schedule) = &self.gmp_order_schedule {
            if self.scenario == Scenario::PowerSweep && schedule.len() != self.power_grid_db.len() {
                return Err(Error::Config(format!(
                    "gmp order schedule has {} entries for a {}-point power grid",
                    schedule.len(),
                    self.power_grid_db.len()
                )));
            }
            if let Some(bad) = schedule.iter().find(|&&k| k == 0 || k % 2 == 0) {
                return Err(Error::Config(format!(
                    "gmp order schedule entries must be odd and positive, got {bad}"
                )));
            }
        }
        Ok(())
    }
}
