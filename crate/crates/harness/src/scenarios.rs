//! Scenario orchestration: the experiment flows behind `dpdlab run`.
//!
//! Each sweep point derives its own seeds from the master seed, so points
//! are independent and may execute on any number of threads without
//! changing a single artifact byte: workers only compute; all files are
//! written sequentially afterwards in index order.
//!
//! Every scenario returns its row data as well, so integration tests can
//! assert on outcomes without re-parsing the CSVs.

use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use dpdlab_core::capture::{CaptureConfig, QuantizerMode, QuantizerSpec};
use dpdlab_core::error::{Error, Result};
use dpdlab_core::gmp::{self, GmpConfig, GmpModel};
use dpdlab_core::ilc;
use dpdlab_core::metrics::{self, PsdConfig};
use dpdlab_core::waveform::{self, ComplexWaveform, GridReference};
use dpdlab_core::{align, capture, pa};

use crate::artifacts::{self, csv_escape, fmt_db};
use crate::config::{rho_from_db, ExperimentConfig, Scenario};
use crate::seed::derive_seed;

/// Runs the configured scenario and writes its artifacts.
pub fn run_experiment(cfg: &ExperimentConfig, parallel: usize) -> Result<()> {
    artifacts::ensure_dir(&cfg.output_dir)?;
    match cfg.scenario {
        Scenario::RhoSweep => run_rho_sweep(cfg, parallel).map(|_| ()),
        Scenario::GmpFit => run_gmp_fit(cfg, parallel).map(|_| ()),
        Scenario::PowerSweep => run_power_sweep(cfg, parallel).map(|_| ()),
        Scenario::PsdExport => run_psd_export(cfg).map(|_| ()),
    }
}

/// Executes `f` for indices `0..count` on up to `parallel` threads,
/// returning results in index order (scheduling never affects output).
fn run_indexed<T, F>(count: usize, parallel: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    if parallel <= 1 || count <= 1 {
        return (0..count).map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<T>>> = (0..count).map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..parallel.min(count) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= count {
                    break;
                }
                let value = f(i);
                *slots[i]
                    .lock()
                    .expect("worker never panics holding the lock") = Some(value);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| {
            m.into_inner()
                .expect("no poisoned slots")
                .expect("every index visited")
        })
        .collect()
}

/// PA followed by the capture front end; restores the reference sample
/// rate if the capture resampled. Each call derives a fresh capture seed,
/// so successive ILC iterations see independent noise realizations.
fn make_plant<'a>(
    cfg: &'a ExperimentConfig,
    capture_template: &'a CaptureConfig,
    noise_stream: u64,
) -> impl FnMut(&ComplexWaveform) -> Result<ComplexWaveform> + 'a {
    let mut call: u64 = 0;
    move |x| {
        let mut cap = capture_template.clone();
        cap.seed = derive_seed(noise_stream, "capture", call);
        call += 1;
        let y = pa::apply_pa(&cfg.pa, x)?;
        let captured = capture::capture_chain(&y, &cap)?;
        match capture_template.resample {
            Some(r) => waveform::resample(&captured, r.inverse()),
            None => Ok(captured),
        }
    }
}

/// Outcome of one full ILC run plus a scoring pass on the converged drive.
struct IlcPoint {
    nmse_db: f64,
    evm_db: f64,
    iterations: usize,
    trace: Vec<f64>,
    final_input: ComplexWaveform,
    aligned_capture: ComplexWaveform,
}

fn run_ilc_point(
    cfg: &ExperimentConfig,
    capture_template: &CaptureConfig,
    s: &ComplexWaveform,
    grid: &GridReference,
    noise_stream: u64,
) -> Result<IlcPoint> {
    let mut plant = make_plant(cfg, capture_template, noise_stream);
    let result = ilc::ilc_run(s, &mut plant, &cfg.ilc, cfg.align_resolution)?;
    // Score the converged drive with one more plant pass (fresh noise): the
    // reported figures measure the drive, not the luckiest iteration.
    let y = plant(&result.final_input)?;
    let correction = align::estimate_delay(s, &y, cfg.align_resolution)?;
    let aligned = align::apply_alignment(&y, &correction);
    let nmse_db = align::aligned_nmse_db(s, &aligned)?;
    let evm_db = metrics::evm_subcarrier(grid, &aligned, &cfg.ofdm)?;
    Ok(IlcPoint {
        nmse_db,
        evm_db,
        iterations: result.per_iteration_nmse_db.len(),
        trace: result.per_iteration_nmse_db,
        final_input: result.final_input,
        aligned_capture: aligned,
    })
}

/// Applies a fitted GMP predistorter to a fresh waveform and scores it
/// through the same plant.
fn score_gmp_drive(
    cfg: &ExperimentConfig,
    capture_template: &CaptureConfig,
    model: &GmpModel,
    s: &ComplexWaveform,
    grid: &GridReference,
    noise_stream: u64,
) -> Result<(f64, f64, ComplexWaveform)> {
    let drive = gmp::apply_gmp(model, s)?;
    let mut plant = make_plant(cfg, capture_template, noise_stream);
    let y = plant(&drive)?;
    let correction = align::estimate_delay(s, &y, cfg.align_resolution)?;
    let aligned = align::apply_alignment(&y, &correction);
    let nmse_db = align::aligned_nmse_db(s, &aligned)?;
    let evm_db = metrics::evm_subcarrier(grid, &aligned, &cfg.ofdm)?;
    Ok((nmse_db, evm_db, aligned))
}

/// The quantizer used at a given reference-level ratio: companding for
/// rho > 0 dB, the conventional uniform setup (reference at the peak,
/// rho = 1) otherwise.
pub fn quantizer_for_rho(bits: u32, rho_db: f64) -> QuantizerSpec {
    if rho_db > 0.0 {
        QuantizerSpec {
            bits,
            rho: rho_from_db(rho_db),
            mode: QuantizerMode::Logarithmic,
        }
    } else {
        QuantizerSpec {
            bits,
            rho: 1.0,
            mode: QuantizerMode::Uniform,
        }
    }
}

// ---------------------------------------------------------------------
// rho sweep
// ---------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct RhoPoint {
    pub nmse_db: f64,
    pub evm_db: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct RhoRow {
    pub rho_db: f64,
    pub outcome: std::result::Result<RhoPoint, String>,
}

struct RhoWork {
    point: std::result::Result<RhoPoint, String>,
    trace: Vec<f64>,
    scatter: Vec<(f64, f64, f64)>,
}

type RhoEval = (RhoPoint, Vec<f64>, Vec<(f64, f64, f64)>);

/// ILC NMSE/EVM versus the reference-level ratio, plus per-point AM-AM /
/// AM-PM scatter artifacts.
pub fn run_rho_sweep(cfg: &ExperimentConfig, parallel: usize) -> Result<Vec<RhoRow>> {
    let bits = match &cfg.capture.quantizer {
        Some(q) => q.bits,
        None => return Err(Error::Config(
            "rho-sweep needs capture.quantizer.enabled = true (the quantizer is the sweep subject)"
                .into(),
        )),
    };
    let grid = &cfg.rho_grid_db;
    let work: Vec<RhoWork> = run_indexed(grid.len(), parallel, |i| {
        let rho_db = grid[i];
        let attempt = (|| -> Result<RhoEval> {
            let seed = derive_seed(cfg.master_seed, "rho-sweep", i as u64);
            let (s, gridref) = waveform::generate_ofdm(&cfg.ofdm, seed)?;
            let mut cap = cfg.capture.clone();
            cap.quantizer = Some(quantizer_for_rho(bits, rho_db));
            let m = run_ilc_point(cfg, &cap, &s, &gridref, derive_seed(seed, "noise", 0))?;
            let scatter = metrics::amam_ampm(&m.final_input, &m.aligned_capture)?;
            Ok((
                RhoPoint {
                    nmse_db: m.nmse_db,
                    evm_db: m.evm_db,
                    iterations: m.iterations,
                },
                m.trace,
                scatter,
            ))
        })();
        match attempt {
            Ok((point, trace, scatter)) => RhoWork {
                point: Ok(point),
                trace,
                scatter,
            },
            Err(e) => RhoWork {
                point: Err(e.to_string()),
                trace: Vec::new(),
                scatter: Vec::new(),
            },
        }
    });

    let mut rows = Vec::with_capacity(grid.len());
    let mut csv_rows = Vec::with_capacity(grid.len());
    let mut trace_rows = Vec::new();
    for (i, w) in work.iter().enumerate() {
        let rho_db = grid[i];
        match &w.point {
            Ok(p) => {
                csv_rows.push(format!(
                    "{},{},{},{},ok",
                    fmt_db(rho_db),
                    fmt_db(p.nmse_db),
                    fmt_db(p.evm_db),
                    p.iterations
                ));
                for (iter, nmse) in w.trace.iter().enumerate() {
                    trace_rows.push(format!("{i},{},{iter},{}", fmt_db(rho_db), fmt_db(*nmse)));
                }
                artifacts::write_scatter(
                    &cfg.output_dir
                        .join(format!("scatter_{i:02}_rho_{rho_db:.1}db.csv")),
                    &w.scatter,
                )?;
            }
            Err(msg) => {
                csv_rows.push(format!("{},,,,{}", fmt_db(rho_db), csv_escape(msg)));
            }
        }
        rows.push(RhoRow {
            rho_db,
            outcome: w.point.clone(),
        });
    }
    artifacts::write_csv(
        &cfg.output_dir.join("rho_sweep.csv"),
        "rho_db,final_nmse_db,final_evm_db,iterations,status",
        &csv_rows,
    )?;
    artifacts::write_csv(
        &cfg.output_dir.join("ilc_iterations.csv"),
        "point_index,rho_db,iteration,nmse_db",
        &trace_rows,
    )?;

    // Trend summary: does the largest companding ratio beat the smallest?
    let at = |want: f64| {
        rows.iter()
            .filter(|r| r.rho_db == want)
            .find_map(|r| r.outcome.as_ref().ok().map(|p| p.nmse_db))
    };
    let min_rho = grid.iter().copied().fold(f64::INFINITY, f64::min);
    let max_rho = grid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = (at(min_rho), at(max_rho));
    let improves = match (lo, hi) {
        (Some(l), Some(h)) => {
            if h < l {
                "true"
            } else {
                "false"
            }
        }
        _ => "unknown",
    };
    let summary = vec![
        format!("rho_min_db,{}", fmt_db(min_rho)),
        format!("rho_max_db,{}", fmt_db(max_rho)),
        format!("nmse_at_rho_min_db,{}", lo.map(fmt_db).unwrap_or_default()),
        format!("nmse_at_rho_max_db,{}", hi.map(fmt_db).unwrap_or_default()),
        format!("nmse_improves_with_rho,{improves}"),
    ];
    artifacts::write_csv(
        &cfg.output_dir.join("summary.csv"),
        "metric,value",
        &summary,
    )?;
    Ok(rows)
}

// ---------------------------------------------------------------------
// GMP fit
// ---------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct GmpTestRow {
    pub index: usize,
    /// (nmse_db, evm_db) of the ILC loop run fresh on this waveform.
    pub ilc: std::result::Result<(f64, f64), String>,
    /// (nmse_db, evm_db) of the one-shot GMP predistorter.
    pub gmp: std::result::Result<(f64, f64), String>,
}

#[derive(Debug, Clone)]
pub struct GmpFitOutcome {
    pub fit_residual_nmse_db: f64,
    pub fit_condition: f64,
    pub train_rows: Vec<std::result::Result<f64, String>>,
    pub test_rows: Vec<GmpTestRow>,
    pub mean_ilc_nmse_db: Option<f64>,
    pub mean_ilc_evm_db: Option<f64>,
    pub mean_gmp_nmse_db: Option<f64>,
    pub mean_gmp_evm_db: Option<f64>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let v: Vec<f64> = values.collect();
    if v.is_empty() {
        None
    } else {
        Some(v.iter().sum::<f64>() / v.len() as f64)
    }
}

/// Trains ILC on fresh waveforms, fits the GMP to the converged drives,
/// and compares one-shot GMP predistortion against ILC on held-out
/// waveforms.
pub fn run_gmp_fit(cfg: &ExperimentConfig, parallel: usize) -> Result<GmpFitOutcome> {
    run_gmp_fit_with(cfg, parallel, &cfg.gmp)
}

/// As `run_gmp_fit` but with an explicit GMP structure (the power sweep
/// escalates the order over its grid).
fn run_gmp_fit_with(
    cfg: &ExperimentConfig,
    parallel: usize,
    gmp_cfg: &GmpConfig,
) -> Result<GmpFitOutcome> {
    struct TrainWork {
        outcome: std::result::Result<(ComplexWaveform, ComplexWaveform, f64), String>,
        trace: Vec<f64>,
    }
    let train: Vec<TrainWork> = run_indexed(cfg.num_train, parallel, |t| {
        let attempt = (|| -> Result<(ComplexWaveform, ComplexWaveform, f64, Vec<f64>)> {
            let seed = derive_seed(cfg.master_seed, "gmp-fit/train", t as u64);
            let (s, grid) = waveform::generate_ofdm(&cfg.ofdm, seed)?;
            let m = run_ilc_point(cfg, &cfg.capture, &s, &grid, derive_seed(seed, "noise", 0))?;
            Ok((s, m.final_input, m.nmse_db, m.trace))
        })();
        match attempt {
            Ok((s, x, nmse, trace)) => TrainWork {
                outcome: Ok((s, x, nmse)),
                trace,
            },
            Err(e) => TrainWork {
                outcome: Err(e.to_string()),
                trace: Vec::new(),
            },
        }
    });

    let mut trace_rows = Vec::new();
    let mut train_rows = Vec::with_capacity(train.len());
    let mut s_train = Vec::new();
    let mut x_train = Vec::new();
    for (t, w) in train.iter().enumerate() {
        for (iter, nmse) in w.trace.iter().enumerate() {
            trace_rows.push(format!("{t},{iter},{}", fmt_db(*nmse)));
        }
        match &w.outcome {
            Ok((s, x, nmse)) => {
                train_rows.push(Ok(*nmse));
                s_train.push(s.clone());
                x_train.push(x.clone());
            }
            Err(msg) => train_rows.push(Err(msg.clone())),
        }
    }
    artifacts::write_csv(
        &cfg.output_dir.join("ilc_training_iterations.csv"),
        "waveform_index,iteration,nmse_db",
        &trace_rows,
    )?;
    if s_train.is_empty() {
        return Err(Error::Plant("every ILC training run failed".into()));
    }

    // Conditioning failures propagate: no model, nothing to evaluate.
    let fit = gmp::fit_gmp(&s_train, &x_train, gmp_cfg)?;
    artifacts::write_gmp_model(&cfg.output_dir.join("gmp_model.csv"), &fit.model)?;

    struct TestWork {
        ilc: std::result::Result<(f64, f64), String>,
        gmp: std::result::Result<(f64, f64), String>,
        psd_pair: Option<(ComplexWaveform, ComplexWaveform, ComplexWaveform)>,
    }
    let model = &fit.model;
    let test: Vec<TestWork> = run_indexed(cfg.num_test, parallel, |u| {
        let seed = derive_seed(cfg.master_seed, "gmp-fit/test", u as u64);
        let generated = waveform::generate_ofdm(&cfg.ofdm, seed);
        let (s, grid) = match generated {
            Ok(pair) => pair,
            Err(e) => {
                return TestWork {
                    ilc: Err(e.to_string()),
                    gmp: Err(e.to_string()),
                    psd_pair: None,
                }
            }
        };
        let ilc_run = run_ilc_point(cfg, &cfg.capture, &s, &grid, derive_seed(seed, "noise", 0));
        let gmp_run = score_gmp_drive(
            cfg,
            &cfg.capture,
            model,
            &s,
            &grid,
            derive_seed(seed, "noise", 1),
        );
        let psd_pair = match (&ilc_run, &gmp_run) {
            (Ok(i), Ok(g)) => Some((s.clone(), i.aligned_capture.clone(), g.2.clone())),
            _ => None,
        };
        TestWork {
            ilc: ilc_run
                .map(|m| (m.nmse_db, m.evm_db))
                .map_err(|e| e.to_string()),
            gmp: gmp_run.map(|(n, e, _)| (n, e)).map_err(|e| e.to_string()),
            psd_pair,
        }
    });

    let mut csv_rows = Vec::with_capacity(test.len());
    let mut test_rows = Vec::with_capacity(test.len());
    let mut psd_written = false;
    for (u, w) in test.iter().enumerate() {
        let cell = |r: &std::result::Result<(f64, f64), String>, pick: usize| match r {
            Ok(pair) => fmt_db(if pick == 0 { pair.0 } else { pair.1 }),
            Err(_) => String::new(),
        };
        let status = match (&w.ilc, &w.gmp) {
            (Ok(_), Ok(_)) => "ok".to_string(),
            (Err(e), _) | (_, Err(e)) => csv_escape(e),
        };
        csv_rows.push(format!(
            "{u},{},{},{},{},{status}",
            cell(&w.ilc, 0),
            cell(&w.ilc, 1),
            cell(&w.gmp, 0),
            cell(&w.gmp, 1)
        ));
        test_rows.push(GmpTestRow {
            index: u,
            ilc: w.ilc.clone(),
            gmp: w.gmp.clone(),
        });
        // Spectra come from the first test waveform that fully evaluated.
        if let (Some((s, ilc_out, gmp_out)), false) = (&w.psd_pair, psd_written) {
            psd_written = true;
            let psd_cfg = PsdConfig::default();
            artifacts::write_psd(
                &cfg.output_dir.join("psd_reference.csv"),
                &metrics::psd(s, &psd_cfg)?,
            )?;
            artifacts::write_psd(
                &cfg.output_dir.join("psd_ilc_output.csv"),
                &metrics::psd(ilc_out, &psd_cfg)?,
            )?;
            artifacts::write_psd(
                &cfg.output_dir.join("psd_gmp_output.csv"),
                &metrics::psd(gmp_out, &psd_cfg)?,
            )?;
        }
    }
    artifacts::write_csv(
        &cfg.output_dir.join("gmp_comparison.csv"),
        "waveform_index,ilc_nmse_db,ilc_evm_db,gmp_nmse_db,gmp_evm_db,status",
        &csv_rows,
    )?;

    let outcome = GmpFitOutcome {
        fit_residual_nmse_db: fit.residual_nmse_db,
        fit_condition: fit.condition,
        mean_ilc_nmse_db: mean(
            test_rows
                .iter()
                .filter_map(|r| r.ilc.as_ref().ok().map(|p| p.0)),
        ),
        mean_ilc_evm_db: mean(
            test_rows
                .iter()
                .filter_map(|r| r.ilc.as_ref().ok().map(|p| p.1)),
        ),
        mean_gmp_nmse_db: mean(
            test_rows
                .iter()
                .filter_map(|r| r.gmp.as_ref().ok().map(|p| p.0)),
        ),
        mean_gmp_evm_db: mean(
            test_rows
                .iter()
                .filter_map(|r| r.gmp.as_ref().ok().map(|p| p.1)),
        ),
        train_rows,
        test_rows,
    };
    let fmt_opt = |v: Option<f64>| v.map(fmt_db).unwrap_or_default();
    let summary = vec![
        format!(
            "fit_residual_nmse_db,{}",
            fmt_db(outcome.fit_residual_nmse_db)
        ),
        format!("fit_condition,{:.6e}", outcome.fit_condition),
        format!("mean_ilc_nmse_db,{}", fmt_opt(outcome.mean_ilc_nmse_db)),
        format!("mean_ilc_evm_db,{}", fmt_opt(outcome.mean_ilc_evm_db)),
        format!("mean_gmp_nmse_db,{}", fmt_opt(outcome.mean_gmp_nmse_db)),
        format!("mean_gmp_evm_db,{}", fmt_opt(outcome.mean_gmp_evm_db)),
    ];
    artifacts::write_csv(
        &cfg.output_dir.join("gmp_summary.csv"),
        "metric,value",
        &summary,
    )?;
    Ok(outcome)
}

// ---------------------------------------------------------------------
// power sweep
// ---------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct PowerPoint {
    pub ilc_nmse_db: f64,
    pub ilc_evm_db: f64,
    pub gmp_nmse_db: f64,
    pub gmp_evm_db: f64,
}

#[derive(Debug, Clone)]
pub struct PowerRow {
    pub power_db: f64,
    pub gmp_order: u32,
    pub outcome: std::result::Result<PowerPoint, String>,
}

/// Default order escalation: odd orders 3..9 spread evenly over the grid
/// ("polynomial order gradually increases from 3 to 9").
fn default_order_schedule(points: usize) -> Vec<u32> {
    (0..points)
        .map(|i| {
            let f = if points <= 1 {
                0.0
            } else {
                i as f64 / (points - 1) as f64
            };
            3 + 2 * (3.0 * f).round() as u32
        })
        .collect()
}

fn scale_waveform(w: &ComplexWaveform, factor: f64) -> ComplexWaveform {
    ComplexWaveform {
        samples: w.samples.iter().map(|s| s * factor).collect(),
        sample_rate: w.sample_rate,
    }
}

/// ILC vs GMP across drive levels, escalating the GMP order with drive.
pub fn run_power_sweep(cfg: &ExperimentConfig, parallel: usize) -> Result<Vec<PowerRow>> {
    let schedule = cfg
        .gmp_order_schedule
        .clone()
        .unwrap_or_else(|| default_order_schedule(cfg.power_grid_db.len()));
    if schedule.len() != cfg.power_grid_db.len() {
        return Err(Error::Config(format!(
            "gmp order schedule has {} entries for a {}-point power grid",
            schedule.len(),
            cfg.power_grid_db.len()
        )));
    }

    let rows: Vec<PowerRow> = run_indexed(cfg.power_grid_db.len(), parallel, |i| {
        let power_db = cfg.power_grid_db[i];
        let order = schedule[i];
        let attempt = (|| -> Result<PowerPoint> {
            let factor = 10f64.powf(power_db / 20.0);
            let stream = format!("power-sweep/{i}");
            let gmp_cfg = GmpConfig {
                order_k: order,
                ..cfg.gmp.clone()
            };

            let mut s_train = Vec::new();
            let mut x_train = Vec::new();
            for t in 0..cfg.num_train {
                let seed = derive_seed(cfg.master_seed, &format!("{stream}/train"), t as u64);
                let (s, grid) = waveform::generate_ofdm(&cfg.ofdm, seed)?;
                let s = scale_waveform(&s, factor);
                let m = run_ilc_point(cfg, &cfg.capture, &s, &grid, derive_seed(seed, "noise", 0))?;
                s_train.push(s);
                x_train.push(m.final_input);
            }
            let fit = gmp::fit_gmp(&s_train, &x_train, &gmp_cfg)?;

            let mut ilc_nmse = Vec::new();
            let mut ilc_evm = Vec::new();
            let mut gmp_nmse = Vec::new();
            let mut gmp_evm = Vec::new();
            for u in 0..cfg.num_test {
                let seed = derive_seed(cfg.master_seed, &format!("{stream}/test"), u as u64);
                let (s, grid) = waveform::generate_ofdm(&cfg.ofdm, seed)?;
                let s = scale_waveform(&s, factor);
                let m = run_ilc_point(cfg, &cfg.capture, &s, &grid, derive_seed(seed, "noise", 0))?;
                let (gn, ge, _) = score_gmp_drive(
                    cfg,
                    &cfg.capture,
                    &fit.model,
                    &s,
                    &grid,
                    derive_seed(seed, "noise", 1),
                )?;
                ilc_nmse.push(m.nmse_db);
                ilc_evm.push(m.evm_db);
                gmp_nmse.push(gn);
                gmp_evm.push(ge);
            }
            Ok(PowerPoint {
                ilc_nmse_db: mean(ilc_nmse.into_iter()).expect("num_test >= 1"),
                ilc_evm_db: mean(ilc_evm.into_iter()).expect("num_test >= 1"),
                gmp_nmse_db: mean(gmp_nmse.into_iter()).expect("num_test >= 1"),
                gmp_evm_db: mean(gmp_evm.into_iter()).expect("num_test >= 1"),
            })
        })();
        PowerRow {
            power_db,
            gmp_order: order,
            outcome: attempt.map_err(|e| e.to_string()),
        }
    });

    let csv_rows: Vec<String> = rows
        .iter()
        .map(|r| match &r.outcome {
            Ok(p) => format!(
                "{},{},{},{},{},{},ok",
                fmt_db(r.power_db),
                fmt_db(p.ilc_evm_db),
                fmt_db(p.gmp_evm_db),
                fmt_db(p.ilc_nmse_db),
                fmt_db(p.gmp_nmse_db),
                r.gmp_order
            ),
            Err(msg) => {
                format!(
                    "{},,,,,{},{}",
                    fmt_db(r.power_db),
                    r.gmp_order,
                    csv_escape(msg)
                )
            }
        })
        .collect();
    artifacts::write_csv(
        &cfg.output_dir.join("power_sweep.csv"),
        "power_db,ilc_evm_db,gmp_evm_db,ilc_nmse_db,gmp_nmse_db,gmp_order,status",
        &csv_rows,
    )?;
    Ok(rows)
}

// ---------------------------------------------------------------------
// PSD export
// ---------------------------------------------------------------------

/// Emits PSDs of the reference waveform, the raw PA output, and (when the
/// capture path is non-trivial) the captured waveform.
pub fn run_psd_export(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let seed = derive_seed(cfg.master_seed, "psd-export", 0);
    let (s, _) = waveform::generate_ofdm(&cfg.ofdm, seed)?;
    let psd_cfg = PsdConfig::default();
    let mut written = Vec::new();

    let ref_path = cfg.output_dir.join("psd_reference.csv");
    artifacts::write_psd(&ref_path, &metrics::psd(&s, &psd_cfg)?)?;
    written.push(ref_path);

    let y = pa::apply_pa(&cfg.pa, &s)?;
    let pa_path = cfg.output_dir.join("psd_pa_output.csv");
    artifacts::write_psd(&pa_path, &metrics::psd(&y, &psd_cfg)?)?;
    written.push(pa_path);

    let c = &cfg.capture;
    let trivial = c.quantizer.is_none()
        && c.noise_snr_db.is_none()
        && c.fractional_delay_samples == 0.0
        && c.resample.is_none();
    if !trivial {
        let mut cap = c.clone();
        cap.seed = derive_seed(seed, "noise", 0);
        let captured = capture::capture_chain(&y, &cap)?;
        let cap_path = cfg.output_dir.join("psd_captured.csv");
        artifacts::write_psd(&cap_path, &metrics::psd(&captured, &psd_cfg)?)?;
        written.push(cap_path);
    }
    Ok(written)
}
