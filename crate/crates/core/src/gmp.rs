//! Generalized memory polynomial (GMP) predistorter: term enumeration,
//! least-squares coefficient fitting, and application.
//!
//! Terms follow the canonical Morgan-style branch set, odd orders only:
//! aligned `s(n-l)|s(n-l)|^(k-1)`, lagging `s(n-l)|s(n-l-m)|^(k-1)`, and
//! leading `s(n-l)|s(n-l+m)|^(k-1)`. Cross branches start at `k = 3`
//! because their `k = 1` terms are exact duplicates of aligned ones. The
//! canonical column order is fixed: branches in the order above, memory
//! lag outermost within a branch, then order `k`, then cross lag `m`.
//!
//! Fitting streams the regressor matrix through a blocked QR update
//! (carrying only the `T x T` triangular factor and the rotated
//! right-hand side), finishing with an SVD of the triangle for a
//! rank-revealing solve and a condition estimate. Normal equations are
//! never formed.

use ndarray::{concatenate, Array1, Array2, Axis};
use ndarray_linalg::{QR, SVD};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::waveform::ComplexWaveform;

/// GMP branch kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Aligned,
    Lagging,
    Leading,
}

impl std::fmt::Display for Branch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Branch::Aligned => "aligned",
            Branch::Lagging => "lagging",
            Branch::Leading => "leading",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Branch {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "aligned" => Ok(Branch::Aligned),
            "lagging" => Ok(Branch::Lagging),
            "leading" => Ok(Branch::Leading),
            other => Err(Error::Parse(format!("unknown GMP branch {other:?}"))),
        }
    }
}

/// One model term `(branch, k, l, m)`; `m = 0` for aligned terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TermIndex {
    pub branch: Branch,
    pub k: u32,
    pub l: u32,
    pub m: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmpConfig {
    /// Maximum polynomial order (odd orders up to this are used).
    pub order_k: u32,
    /// Maximum memory lag `L` (lags `0..=L`).
    pub memory_depth_l: u32,
    /// Maximum cross-memory lag `M` (cross lags `1..=M`).
    pub cross_memory_m: u32,
    pub include_lagging: bool,
    pub include_leading: bool,
    /// Tikhonov regularization weight; 0 = plain least squares.
    pub ridge: f64,
}

impl Default for GmpConfig {
    fn default() -> Self {
        Self {
            order_k: 3,
            memory_depth_l: 20,
            cross_memory_m: 1,
            include_lagging: true,
            include_leading: true,
            ridge: 0.0,
        }
    }
}

impl GmpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.order_k < 1 {
            return Err(Error::Config("GMP order must be >= 1".into()));
        }
        if !(self.ridge >= 0.0) {
            return Err(Error::Config(format!(
                "ridge must be nonnegative, got {}",
                self.ridge
            )));
        }
        Ok(())
    }

    /// The canonical term enumeration (stable order, see module docs).
    pub fn terms(&self) -> Vec<TermIndex> {
        let mut terms = Vec::new();
        for l in 0..=self.memory_depth_l {
            for k in (1..=self.order_k).step_by(2) {
                terms.push(TermIndex {
                    branch: Branch::Aligned,
                    k,
                    l,
                    m: 0,
                });
            }
        }
        for (enabled, branch) in [
            (self.include_lagging, Branch::Lagging),
            (self.include_leading, Branch::Leading),
        ] {
            if !enabled {
                continue;
            }
            for l in 0..=self.memory_depth_l {
                for k in (3..=self.order_k).step_by(2) {
                    for m in 1..=self.cross_memory_m {
                        terms.push(TermIndex { branch, k, l, m });
                    }
                }
            }
        }
        terms
    }

    pub fn term_count(&self) -> usize {
        self.terms().len()
    }
}

/// Fitted GMP model.
#[derive(Debug, Clone, PartialEq)]
pub struct GmpModel {
    pub config: GmpConfig,
    pub coefficients: Vec<Complex64>,
    pub term_index: Vec<TermIndex>,
}

impl GmpModel {
    pub fn validate(&self) -> Result<()> {
        if self.coefficients.len() != self.term_index.len() {
            return Err(Error::Shape(format!(
                "{} coefficients for {} terms",
                self.coefficients.len(),
                self.term_index.len()
            )));
        }
        Ok(())
    }
}

/// Fit outcome: the model plus solver diagnostics.
#[derive(Debug, Clone)]
pub struct GmpFit {
    pub model: GmpModel,
    /// Training residual `10 log10(|X c - x|^2 / |x|^2)`, clamped at -200.
    pub residual_nmse_db: f64,
    /// Singular-value ratio of the regressor matrix.
    pub condition: f64,
}

fn sample_at(s: &[Complex64], idx: i64) -> Complex64 {
    if (0..s.len() as i64).contains(&idx) {
        s[idx as usize]
    } else {
        Complex64::ZERO
    }
}

/// Value of one term at sample index `n` (history outside the record is
/// zero).
fn term_value(s: &[Complex64], n: usize, t: &TermIndex) -> Complex64 {
    let base_idx = n as i64 - t.l as i64;
    let base = sample_at(s, base_idx);
    if t.k == 1 {
        return base;
    }
    let env_idx = match t.branch {
        Branch::Aligned => base_idx,
        Branch::Lagging => base_idx - t.m as i64,
        Branch::Leading => base_idx + t.m as i64,
    };
    let env = sample_at(s, env_idx).norm();
    base * env.powi(t.k as i32 - 1)
}

fn regressor_rows(
    s: &[Complex64],
    rows: std::ops::Range<usize>,
    terms: &[TermIndex],
) -> Array2<Complex64> {
    let mut a = Array2::zeros((rows.len(), terms.len()));
    for (i, n) in rows.enumerate() {
        for (j, t) in terms.iter().enumerate() {
            a[(i, j)] = term_value(s, n, t);
        }
    }
    a
}

/// Full `N x T` regressor matrix for a waveform. Requires an
/// overdetermined system (`N > T`).
pub fn build_regressors(s: &ComplexWaveform, cfg: &GmpConfig) -> Result<Array2<Complex64>> {
    cfg.validate()?;
    let terms = cfg.terms();
    if s.len() <= terms.len() {
        return Err(Error::Underdetermined {
            rows: s.len(),
            cols: terms.len(),
        });
    }
    Ok(regressor_rows(&s.samples, 0..s.len(), &terms))
}

fn linalg_err(e: ndarray_linalg::error::LinalgError) -> Error {
    Error::Linalg(e.to_string())
}

/// Relative singular-value cutoff below which a ridge-free fit is refused.
const RANK_TOLERANCE: f64 = 1e-10;

/// Rows fed to each incremental QR update.
const FIT_BLOCK_ROWS: usize = 8192;

/// Fits GMP coefficients mapping `s_train` onto `x_train` by streaming
/// least squares (blocked QR; final SVD solve).
pub fn fit_gmp(
    s_train: &[ComplexWaveform],
    x_train: &[ComplexWaveform],
    cfg: &GmpConfig,
) -> Result<GmpFit> {
    cfg.validate()?;
    if s_train.is_empty() || s_train.len() != x_train.len() {
        return Err(Error::Shape(format!(
            "{} input waveforms paired with {} targets",
            s_train.len(),
            x_train.len()
        )));
    }
    for (i, (sw, xw)) in s_train.iter().zip(x_train).enumerate() {
        if sw.len() != xw.len() {
            return Err(Error::Shape(format!(
                "training pair {i}: input {} samples, target {}",
                sw.len(),
                xw.len()
            )));
        }
    }
    let terms = cfg.terms();
    let t = terms.len();
    let total_rows: usize = s_train.iter().map(|w| w.len()).sum();
    if total_rows <= t {
        return Err(Error::Underdetermined {
            rows: total_rows,
            cols: t,
        });
    }

    // Streamed QR: maintain R (upper triangle) and q^H b for everything
    // seen so far; each block re-factors [R; A_block].
    let mut carried_r: Option<Array2<Complex64>> = None;
    let mut carried_qtb: Option<Array1<Complex64>> = None;
    let mut discarded_sq = 0.0; // residual energy orthogonal to the column space
    let mut target_sq = 0.0;
    let block = FIT_BLOCK_ROWS.max(t + 1);

    for (sw, xw) in s_train.iter().zip(x_train) {
        target_sq += xw.samples.iter().map(|z| z.norm_sqr()).sum::<f64>();
        let mut start = 0;
        while start < sw.len() {
            let end = (start + block).min(sw.len());
            let a = regressor_rows(&sw.samples, start..end, &terms);
            let b = Array1::from_iter(xw.samples[start..end].iter().copied());
            let (m, v) = match (&carried_r, &carried_qtb) {
                (Some(r), Some(qtb)) => (
                    concatenate![Axis(0), r.view(), a.view()],
                    concatenate![Axis(0), qtb.view(), b.view()],
                ),
                _ => (a, b),
            };
            let (q, r) = m.qr().map_err(linalg_err)?;
            let qtb = q.mapv(|z| z.conj()).t().dot(&v);
            let before: f64 = v.iter().map(|z| z.norm_sqr()).sum();
            let after: f64 = qtb.iter().map(|z| z.norm_sqr()).sum();
            discarded_sq += (before - after).max(0.0);
            carried_r = Some(r);
            carried_qtb = Some(qtb);
            start = end;
        }
    }
    let r = carried_r.expect("at least one block processed");
    let qtb = carried_qtb.expect("at least one block processed");

    let (u, sigma, vt) = r.svd(true, true).map_err(linalg_err)?;
    let u = u.expect("left vectors requested");
    let vt = vt.expect("right vectors requested");
    let s_max = sigma.iter().copied().fold(0.0f64, f64::max);
    let s_min = sigma.iter().copied().fold(f64::INFINITY, f64::min);
    let condition = if s_min > 0.0 {
        s_max / s_min
    } else {
        f64::INFINITY
    };
    if cfg.ridge == 0.0 && !(s_min > s_max * RANK_TOLERANCE) {
        return Err(Error::Conditioning { condition });
    }

    let mut w = u.mapv(|z| z.conj()).t().dot(&qtb);
    for (wi, &sv) in w.iter_mut().zip(sigma.iter()) {
        let factor = if cfg.ridge > 0.0 {
            sv / (sv * sv + cfg.ridge)
        } else {
            1.0 / sv
        };
        *wi *= factor;
    }
    let c = vt.mapv(|z| z.conj()).t().dot(&w);

    let solve_residual: f64 = r
        .dot(&c)
        .iter()
        .zip(qtb.iter())
        .map(|(a, b)| (a - b).norm_sqr())
        .sum();
    let residual_sq = discarded_sq + solve_residual;
    if target_sq <= 0.0 {
        return Err(Error::UndefinedMetric("all-zero fit target".into()));
    }
    let residual_nmse_db = if residual_sq > 0.0 {
        (10.0 * (residual_sq / target_sq).log10()).max(-200.0)
    } else {
        -200.0
    };

    Ok(GmpFit {
        model: GmpModel {
            config: cfg.clone(),
            coefficients: c.to_vec(),
            term_index: terms,
        },
        residual_nmse_db,
        condition,
    })
}

/// Applies the model: `y(n) = sum_t c_t * term_t(n)`. Length-preserving
/// and deterministic; no overdetermination requirement.
pub fn apply_gmp(model: &GmpModel, s: &ComplexWaveform) -> Result<ComplexWaveform> {
    model.validate()?;
    let samples: Vec<Complex64> = (0..s.len())
        .map(|n| {
            model
                .term_index
                .iter()
                .zip(&model.coefficients)
                .map(|(t, c)| c * term_value(&s.samples, n, t))
                .sum()
        })
        .collect();
    ComplexWaveform::new(samples, s.sample_rate)
}
