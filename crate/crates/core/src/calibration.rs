//! Recovering the threshold-charge line from `(V_in, t_on)` data.
//!
//! A leak-free device latches at `t_on = (α·v + β) / I_Dn`, so a line through
//! the data gives `α / I_Dn` and `β / I_Dn`. The absolute α needs an
//! independent measurement of `I_Dn`. With a finite leak time τ the latch time
//! is `-τ ln(1 - (α·v + β) / (I_Dn·τ))`. The transform
//! `u = τ (1 - e^(-t_on/τ))` makes this affine in `v` again for each candidate τ.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::stats::{fit_line, LineFit};

const GOLDEN_ITERATIONS: usize = 200;
const GOLDEN_LOG_TOL: f64 = 1e-12;

/// Bias conditions under which a dataset was taken.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TonMetadata {
    pub v_g1: f64,
    pub v_a: f64,
    pub f_clk: f64,
}

impl Default for TonMetadata {
    fn default() -> Self {
        Self {
            v_g1: 0.45,
            v_a: 1.0,
            f_clk: 1e3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TonDataset {
    /// `(v_in, t_on)` pairs.
    pub rows: Vec<(f64, f64)>,
    pub metadata: TonMetadata,
}

impl TonDataset {
    pub fn new(rows: Vec<(f64, f64)>, metadata: TonMetadata) -> Result<Self> {
        if rows
            .iter()
            .any(|&(v, t)| !v.is_finite() || !t.is_finite() || t < 0.0)
        {
            return Err(Error::InvalidParameter {
                name: "dataset row",
                reason: "v_in must be finite and t_on finite and >= 0",
            });
        }
        Ok(Self { rows, metadata })
    }

    pub fn distinct_inputs(&self) -> usize {
        let mut v: Vec<f64> = self.rows.iter().map(|r| r.0).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v.len()
    }

    fn columns(&self) -> (Vec<f64>, Vec<f64>) {
        self.rows.iter().copied().unzip()
    }

    fn require_distinct(&self, needed: usize, what: &'static str) -> Result<()> {
        let found = self.distinct_inputs();
        if found >= needed {
            Ok(())
        } else if found == 1 && needed == 2 {
            Err(Error::DegenerateDesign)
        } else {
            Err(Error::InsufficientData {
                what,
                needed,
                found,
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    /// `α / I_Dn`, s/V.
    pub qth_slope_over_idn: f64,
    /// `β / I_Dn`, s.
    pub qth_offset_over_idn: f64,
    /// Selected leak time, s. Infinite for the leak-free model.
    pub tau_leak_est: f64,
    /// Goodness of fit of `t_on`, clamped to `[0, 1]`.
    pub r_squared: f64,
    /// Measured minus predicted `t_on`, in dataset order.
    pub residuals: Vec<f64>,
    pub rss: f64,
}

impl FitReport {
    /// Resolves `(α, β)` given an independently known injection current.
    pub fn absolute(&self, i_dn: f64) -> (f64, f64) {
        (
            self.qth_slope_over_idn * i_dn,
            self.qth_offset_over_idn * i_dn,
        )
    }

    pub fn max_abs_residual(&self) -> f64 {
        self.residuals.iter().fold(0.0_f64, |m, r| m.max(r.abs()))
    }
}

fn r_squared(ts: &[f64], rss: f64) -> f64 {
    let mean = ts.iter().sum::<f64>() / ts.len() as f64;
    let sst: f64 = ts.iter().map(|t| (t - mean) * (t - mean)).sum();
    if sst > 0.0 {
        (1.0 - rss / sst).clamp(0.0, 1.0)
    } else if rss == 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Least-squares line of `t_on` on `v_in`.
pub fn fit_linear(data: &TonDataset) -> Result<FitReport> {
    data.require_distinct(2, "linear fit")?;
    let (vs, ts) = data.columns();
    let line = fit_line(&vs, &ts)?;
    Ok(FitReport {
        qth_slope_over_idn: line.slope,
        qth_offset_over_idn: line.intercept,
        tau_leak_est: f64::INFINITY,
        r_squared: line.r_squared,
        residuals: line.residuals,
        rss: line.rss,
    })
}

/// Leaky-model fit at one fixed τ, or `None` when the fitted line predicts a
/// threshold the leaky integrator can never reach.
pub fn fit_at_tau(data: &TonDataset, tau: f64) -> Option<FitReport> {
    if tau.is_infinite() {
        return fit_linear(data).ok();
    }
    if !(tau > 0.0) {
        return None;
    }
    let (vs, ts) = data.columns();
    let us: Vec<f64> = ts.iter().map(|&t| -tau * math::expm1(-t / tau)).collect();
    let line: LineFit = fit_line(&vs, &us).ok()?;

    let mut residuals = Vec::with_capacity(ts.len());
    for (&v, &t) in vs.iter().zip(&ts) {
        let x = line.predict(v) / tau;
        if !(x < 1.0) {
            return None;
        }
        let t_hat = -tau * math::ln_1p(-x);
        if !t_hat.is_finite() {
            return None;
        }
        residuals.push(t - t_hat);
    }
    let rss: f64 = residuals.iter().map(|r| r * r).sum();
    Some(FitReport {
        qth_slope_over_idn: line.slope,
        qth_offset_over_idn: line.intercept,
        tau_leak_est: tau,
        r_squared: r_squared(&ts, rss),
        residuals,
        rss,
    })
}

/// Candidate leak times: 8 per decade from 1 µs to 100 s, then infinity.
pub fn default_tau_grid() -> Vec<f64> {
    let mut grid: Vec<f64> = (0..=64)
        .map(|k| math::pow10(-6.0 + k as f64 / 8.0))
        .collect();
    grid.push(f64::INFINITY);
    grid
}

/// Picks the τ on `grid` with the smallest residual sum of squares, then
/// refines it by golden-section search in log τ between its grid neighbours.
pub fn fit_leaky(data: &TonDataset, grid: &[f64]) -> Result<FitReport> {
    data.require_distinct(3, "leaky fit")?;
    if grid.is_empty() {
        return Err(Error::InvalidGrid("tau grid is empty"));
    }
    if grid.iter().any(|&t| t.is_nan() || t <= 0.0) {
        return Err(Error::InvalidGrid("tau candidates must be > 0"));
    }
    let mut taus = grid.to_vec();
    taus.sort_by(f64::total_cmp);
    taus.dedup();

    let mut best: Option<(usize, FitReport)> = None;
    for (k, &tau) in taus.iter().enumerate() {
        if let Some(report) = fit_at_tau(data, tau) {
            // Ties go to the longer leak time.
            if best.as_ref().is_none_or(|(_, b)| report.rss <= b.rss) {
                best = Some((k, report));
            }
        }
    }
    let (k, grid_best) = best.ok_or(Error::NoValidTau)?;
    if grid_best.tau_leak_est.is_infinite() {
        return Ok(grid_best);
    }

    let tau = grid_best.tau_leak_est;
    let lo = if k > 0 { taus[k - 1] } else { tau / 10.0 };
    let hi = match taus.get(k + 1) {
        Some(&t) if t.is_finite() => t,
        _ => tau * 10.0,
    };
    let refined = golden_section(math::ln(lo), math::ln(hi), |log_tau| {
        fit_at_tau(data, math::exp(log_tau)).map_or(f64::INFINITY, |r| r.rss)
    });
    match fit_at_tau(data, math::exp(refined)) {
        Some(r) if r.rss < grid_best.rss => Ok(r),
        _ => Ok(grid_best),
    }
}

/// Minimizer of a unimodal `f` on `[a, b]`.
fn golden_section(mut a: f64, mut b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let inv_phi = (math::sqrt(5.0) - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..GOLDEN_ITERATIONS {
        if (b - a).abs() <= GOLDEN_LOG_TOL {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}
