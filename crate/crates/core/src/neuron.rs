//! PWM neuron: input voltage on gate 2 to output pulse width per clock cycle.
//!
//! The device latches `t_on` after the rising clock edge and stays on until
//! the falling edge, so the output pulse is `t_p = t_max - t_on`. Sweeping the
//! input traces a hard sigmoid that saturates at `t_max` (zero threshold) and
//! at 0 (threshold never reached).

use alloc::vec::Vec;

use crate::device::{check_ascending, PfDeviceParams};
use crate::error::{Error, Result};
use crate::stats::fit_line;
use crate::transient::{extract_t_on, simulate, ClockSpec, SimConfig, Stimulus};

/// Outcome of one encoded cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Encoded {
    /// Latch time after the rising edge. `None` if the device never latched.
    pub t_on: Option<f64>,
    /// Output pulse width, in `[0, t_max]`.
    pub t_p: f64,
}

impl Encoded {
    fn from_t_on(t_on: Option<f64>, t_max: f64) -> Self {
        let t_p = match t_on {
            Some(t) => (t_max - t).clamp(0.0, t_max),
            None => 0.0,
        };
        Self { t_on, t_p }
    }

    /// Integration time until latch, saturating at `t_max`. This is the
    /// inverted (ascending) output, `t_max - t_p`.
    pub fn t_on_or_max(&self, t_max: f64) -> f64 {
        self.t_on.unwrap_or(t_max).min(t_max)
    }
}

/// Simulates one clock cycle with `v_in` on gate 2.
pub fn encode(
    params: &PfDeviceParams,
    v_in: f64,
    clock: &ClockSpec,
    cfg: &SimConfig,
) -> Result<Encoded> {
    let wf = simulate(params, &Stimulus::constant(*clock, v_in, 1), cfg)?;
    Ok(Encoded::from_t_on(extract_t_on(&wf, 0)?, clock.t_max()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActivationPoint {
    pub v_in: f64,
    pub t_on: Option<f64>,
    pub t_p: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActivationCurve {
    pub points: Vec<ActivationPoint>,
    pub t_max: f64,
}

impl ActivationCurve {
    /// Assembles a curve from per-point encodings, e.g. evaluated in parallel.
    pub fn from_encoded(v_grid: &[f64], encoded: &[Encoded], t_max: f64) -> Result<Self> {
        if v_grid.len() != encoded.len() {
            return Err(Error::DimensionMismatch {
                what: "encoded points",
                expected: v_grid.len(),
                found: encoded.len(),
            });
        }
        let points = v_grid
            .iter()
            .zip(encoded)
            .map(|(&v_in, e)| ActivationPoint {
                v_in,
                t_on: e.t_on,
                t_p: e.t_p,
            })
            .collect();
        Ok(Self { points, t_max })
    }
}

/// One `encode` per grid point, in grid order.
pub fn activation_curve(
    params: &PfDeviceParams,
    v_grid: &[f64],
    clock: &ClockSpec,
    cfg: &SimConfig,
) -> Result<ActivationCurve> {
    check_ascending(v_grid)?;
    let encoded = v_grid
        .iter()
        .map(|&v| encode(params, v, clock, cfg))
        .collect::<Result<Vec<_>>>()?;
    ActivationCurve::from_encoded(v_grid, &encoded, clock.t_max())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SigmoidPolarity {
    Descending,
    Ascending,
}

/// Clipped-affine fit of `t_p(v_in)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HardSigmoidFit {
    /// Lower knee, V.
    pub v_low: f64,
    /// Upper knee, V.
    pub v_high: f64,
    /// `dt_p/dv_in` in the linear region, s/V.
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub max_residual: f64,
    pub polarity: SigmoidPolarity,
    /// Points used for the fit.
    pub n_linear: usize,
}

/// Least-squares line through the unsaturated points (`0 < t_p < t_max`),
/// with knees where that line meets `t_max` and 0.
pub fn fit_hard_sigmoid(curve: &ActivationCurve) -> Result<HardSigmoidFit> {
    let (vs, tps): (Vec<f64>, Vec<f64>) = curve
        .points
        .iter()
        .filter(|p| p.t_p > 0.0 && p.t_p < curve.t_max)
        .map(|p| (p.v_in, p.t_p))
        .unzip();
    if vs.len() < 3 {
        return Err(Error::InsufficientData {
            what: "hard-sigmoid fit (unsaturated points)",
            needed: 3,
            found: vs.len(),
        });
    }
    let line = fit_line(&vs, &tps)?;
    if line.slope == 0.0 {
        return Err(Error::DegenerateDesign);
    }
    let at_max = (curve.t_max - line.intercept) / line.slope;
    let at_zero = -line.intercept / line.slope;
    Ok(HardSigmoidFit {
        v_low: at_max.min(at_zero),
        v_high: at_max.max(at_zero),
        slope: line.slope,
        intercept: line.intercept,
        r_squared: line.r_squared,
        max_residual: line.max_abs_residual(),
        polarity: if line.slope < 0.0 {
            SigmoidPolarity::Descending
        } else {
            SigmoidPolarity::Ascending
        },
        n_linear: vs.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
            .collect()
    }

    #[test]
    fn encode_examples() {
        let p = PfDeviceParams::default();
        let clock = ClockSpec::default();
        let cfg = SimConfig::default();

        let e = encode(&p, 2.0, &clock, &cfg).unwrap();
        assert!((e.t_on.unwrap() - 200e-6).abs() <= cfg.t_tol);
        assert!((e.t_p - 800e-6).abs() <= cfg.t_tol);

        let zero = encode(&p, 0.0, &clock, &cfg).unwrap();
        assert_eq!(zero.t_on, Some(0.0));
        assert_eq!(zero.t_p, clock.t_max());

        let high = encode(&p, 20.0, &clock, &cfg).unwrap();
        assert_eq!(high.t_on, None);
        assert_eq!(high.t_p, 0.0);
    }

    #[test]
    fn curve_spanning_both_saturations() {
        let p = PfDeviceParams::default();
        let clock = ClockSpec {
            f_clk: 10e3,
            ..Default::default()
        };
        let cfg = SimConfig::default();
        let v = grid(-0.5, 1.5, 21);
        let curve = activation_curve(&p, &v, &clock, &cfg).unwrap();
        let t_max = clock.t_max();
        assert_eq!(curve.points[0].t_p, t_max);
        assert_eq!(curve.points.last().unwrap().t_p, 0.0);
        assert!(curve.points.windows(2).all(|w| w[1].t_p <= w[0].t_p));
        for pt in &curve.points {
            assert!((0.0..=t_max).contains(&pt.t_p));
        }

        let fit = fit_hard_sigmoid(&curve).unwrap();
        assert_eq!(fit.polarity, SigmoidPolarity::Descending);
        assert!(fit.r_squared >= 0.999_999);
        // t_p = 100 µs - 100 µs/V * v: knees at 0 V and 1 V.
        assert!(fit.v_low.abs() < 1e-4, "{}", fit.v_low);
        assert!((fit.v_high - 1.0).abs() < 1e-4, "{}", fit.v_high);
        assert!((fit.slope + 100e-6).abs() < 1e-9);
    }

    #[test]
    fn single_point_curve() {
        let curve = activation_curve(
            &PfDeviceParams::default(),
            &[1.0],
            &ClockSpec::default(),
            &SimConfig::default(),
        )
        .unwrap();
        assert_eq!(curve.points.len(), 1);
    }

    #[test]
    fn fully_saturated_curve_cannot_be_fit() {
        let curve = ActivationCurve {
            points: vec![
                ActivationPoint {
                    v_in: 0.0,
                    t_on: Some(0.0),
                    t_p: 1e-3,
                },
                ActivationPoint {
                    v_in: 20.0,
                    t_on: None,
                    t_p: 0.0,
                },
                ActivationPoint {
                    v_in: 30.0,
                    t_on: None,
                    t_p: 0.0,
                },
            ],
            t_max: 1e-3,
        };
        assert!(matches!(
            fit_hard_sigmoid(&curve),
            Err(Error::InsufficientData { found: 0, .. })
        ));
    }

    #[test]
    fn grid_must_ascend() {
        let p = PfDeviceParams::default();
        let r = activation_curve(
            &p,
            &[1.0, 0.5],
            &ClockSpec::default(),
            &SimConfig::default(),
        );
        assert!(matches!(r, Err(Error::InvalidGrid(_))));
        let r = activation_curve(&p, &[], &ClockSpec::default(), &SimConfig::default());
        assert!(matches!(r, Err(Error::InvalidGrid(_))));
    }
}
