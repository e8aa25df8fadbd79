//! Toy crossbar multiply-accumulate with PWM-coded and amplitude-coded inputs.
//!
//! A PWM input drives every row at the read voltage for its pulse width, so a
//! column integrates `Q_j = Σ_i g_ij · v_read · w_i`. The synapse nonlinearity
//! is only ever evaluated at `v_read`, where it is normalized to 1. Amplitude
//! coding drives each row at its own voltage and picks up the nonlinearity
//! there.

use alloc::vec::Vec;

use crate::device::PfDeviceParams;
use crate::error::{finite, Error, Result};
use crate::math;
use crate::neuron::{encode, SigmoidPolarity};
use crate::transient::{ClockSpec, SimConfig};

/// Ratio of effective to read-voltage conductance as a function of the
/// applied voltage.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Nonlinearity {
    #[default]
    None,
    /// `f(x) = Σ c_k x^k` with `x = v / v_read`. Coefficients must sum to 1.
    Polynomial(Vec<f64>),
}

impl Nonlinearity {
    pub fn factor(&self, v: f64, v_read: f64) -> f64 {
        match self {
            Nonlinearity::None => 1.0,
            Nonlinearity::Polynomial(coeffs) => {
                let x = v / v_read;
                coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
            }
        }
    }
}

/// Conductance matrix, rows are inputs and columns are outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct SynapseArray {
    rows: usize,
    cols: usize,
    /// Row-major, siemens.
    g: Vec<f64>,
    pub nonlinearity: Nonlinearity,
    pub v_read: f64,
}

impl SynapseArray {
    pub fn new(
        rows: usize,
        cols: usize,
        g: Vec<f64>,
        nonlinearity: Nonlinearity,
        v_read: f64,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidParameter {
                name: "synapse array",
                reason: "needs at least one row and one column",
            });
        }
        if g.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                what: "conductance matrix",
                expected: rows * cols,
                found: g.len(),
            });
        }
        if g.iter().any(|&x| !(x.is_finite() && x >= 0.0)) {
            return Err(Error::InvalidParameter {
                name: "conductance",
                reason: "must be finite and >= 0",
            });
        }
        if !(v_read.is_finite() && v_read > 0.0) {
            return Err(Error::InvalidParameter {
                name: "v_read",
                reason: "must be finite and > 0",
            });
        }
        if let Nonlinearity::Polynomial(c) = &nonlinearity {
            if c.is_empty() || c.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidParameter {
                    name: "nonlinearity",
                    reason: "coefficients must be finite and nonempty",
                });
            }
            if (nonlinearity.factor(v_read, v_read) - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidParameter {
                    name: "nonlinearity",
                    reason: "must equal 1 at v_read",
                });
            }
        }
        Ok(Self {
            rows,
            cols,
            g,
            nonlinearity,
            v_read,
        })
    }

    /// Builds from one vector per input row.
    pub fn from_rows(rows: &[Vec<f64>], nonlinearity: Nonlinearity, v_read: f64) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch {
                what: "conductance row",
                expected: cols,
                found: bad.len(),
            });
        }
        let g = rows.iter().flatten().copied().collect();
        Self::new(rows.len(), cols, g, nonlinearity, v_read)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn g(&self, row: usize, col: usize) -> f64 {
        self.g[row * self.cols + col]
    }

    /// Largest column charge reachable when every row is on for `t_max`.
    pub fn full_scale_charge(&self, t_max: f64) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self.g(i, j)).sum::<f64>() * self.v_read * t_max)
            .fold(0.0, f64::max)
    }
}

/// Pulse widths, one per crossbar row.
#[derive(Debug, Clone, PartialEq)]
pub struct PwmVector {
    pub widths: Vec<f64>,
    pub t_max: f64,
}

impl PwmVector {
    pub fn new(widths: Vec<f64>, t_max: f64) -> Result<Self> {
        if !(t_max.is_finite() && t_max > 0.0) {
            return Err(Error::InvalidParameter {
                name: "t_max",
                reason: "must be finite and > 0",
            });
        }
        if widths.iter().any(|&w| !(0.0..=t_max).contains(&w)) {
            return Err(Error::InvalidParameter {
                name: "pulse width",
                reason: "must lie in [0, t_max]",
            });
        }
        Ok(Self { widths, t_max })
    }
}

fn check_rows(arr: &SynapseArray, len: usize, what: &'static str) -> Result<()> {
    if len == arr.rows {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what,
            expected: arr.rows,
            found: len,
        })
    }
}

/// Column charges for constant-amplitude pulses.
pub fn mac_pwm(arr: &SynapseArray, x: &PwmVector) -> Result<Vec<f64>> {
    check_rows(arr, x.widths.len(), "pulse widths")?;
    Ok((0..arr.cols)
        .map(|j| {
            x.widths
                .iter()
                .enumerate()
                .map(|(i, &w)| arr.g(i, j) * arr.v_read * w)
                .sum()
        })
        .collect())
}

/// Column currents for amplitude-coded inputs.
pub fn mac_pam(arr: &SynapseArray, v: &[f64]) -> Result<Vec<f64>> {
    check_rows(arr, v.len(), "input amplitudes")?;
    for &vi in v {
        finite(vi, "input amplitude")?;
    }
    Ok((0..arr.cols)
        .map(|j| {
            v.iter()
                .enumerate()
                .map(|(i, &vi)| arr.g(i, j) * vi * arr.nonlinearity.factor(vi, arr.v_read))
                .sum()
        })
        .collect())
}

/// Affine map from column charge to the next layer's input voltage, clamped
/// to `[v_lo, v_hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChargeMap {
    pub q_lo: f64,
    pub q_hi: f64,
    pub v_lo: f64,
    pub v_hi: f64,
}

impl ChargeMap {
    pub fn new(q_lo: f64, q_hi: f64, v_lo: f64, v_hi: f64) -> Result<Self> {
        for (v, what) in [
            (q_lo, "q_lo"),
            (q_hi, "q_hi"),
            (v_lo, "v_lo"),
            (v_hi, "v_hi"),
        ] {
            finite(v, what)?;
        }
        if q_hi <= q_lo || v_hi <= v_lo {
            return Err(Error::DegenerateChargeMap);
        }
        Ok(Self {
            q_lo,
            q_hi,
            v_lo,
            v_hi,
        })
    }

    pub fn apply(&self, q: f64) -> f64 {
        let v = self.v_lo + (q - self.q_lo) / (self.q_hi - self.q_lo) * (self.v_hi - self.v_lo);
        v.clamp(self.v_lo, self.v_hi)
    }
}

/// How a PF neuron turns a voltage into a pulse width between layers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeuronConfig {
    pub params: PfDeviceParams,
    pub clock: ClockSpec,
    pub sim: SimConfig,
    /// `Descending` uses the raw output `t_max - t_on`. `Ascending` inverts it
    /// to `t_on`, so larger inputs give wider pulses.
    pub polarity: SigmoidPolarity,
    /// Interlayer voltage range. `None` uses [`NeuronConfig::linear_input_range`].
    pub v_range: Option<(f64, f64)>,
}

impl Default for NeuronConfig {
    fn default() -> Self {
        Self {
            params: PfDeviceParams::default(),
            clock: ClockSpec::default(),
            sim: SimConfig::default(),
            polarity: SigmoidPolarity::Ascending,
            v_range: None,
        }
    }
}

impl NeuronConfig {
    /// Inputs between these voltages give an unsaturated pulse: the first
    /// zeroes the threshold charge, the second puts it at the charge reached
    /// by the end of the clock-high phase.
    pub fn linear_input_range(&self) -> Result<(f64, f64)> {
        let p = &self.params;
        let i_dn = p.injection_current(self.clock.v_high)?;
        let t_max = self.clock.t_max();
        let q_end = if p.tau_leak.is_infinite() {
            i_dn * t_max
        } else {
            -i_dn * p.tau_leak * math::expm1(-t_max / p.tau_leak)
        };
        let v_lo = -p.qth_offset / p.qth_slope + 0.0;
        Ok((v_lo, (q_end - p.qth_offset) / p.qth_slope))
    }

    pub fn width(&self, v_in: f64) -> Result<f64> {
        let e = encode(&self.params, v_in, &self.clock, &self.sim)?;
        Ok(match self.polarity {
            SigmoidPolarity::Descending => e.t_p,
            SigmoidPolarity::Ascending => e.t_on_or_max(self.clock.t_max()),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferenceResult {
    /// Neuron input voltages per layer.
    pub inputs: Vec<Vec<f64>>,
    /// Pulse widths driving each layer.
    pub widths: Vec<Vec<f64>>,
    /// Column charges out of each layer.
    pub charges: Vec<Vec<f64>>,
    /// Map applied before layer `k + 1`.
    pub maps: Vec<ChargeMap>,
}

impl InferenceResult {
    pub fn output(&self) -> &[f64] {
        self.charges.last().map_or(&[], Vec::as_slice)
    }
}

/// Runs `input` through PF neurons and crossbar layers in turn.
///
/// Charges leaving layer `k` are mapped onto the neuron input range by a
/// [`ChargeMap`] spanning zero to that layer's full-scale charge.
pub fn infer(
    layers: &[SynapseArray],
    input: &[f64],
    neuron: &NeuronConfig,
) -> Result<InferenceResult> {
    let Some(first) = layers.first() else {
        return Err(Error::InvalidParameter {
            name: "layers",
            reason: "need at least one layer",
        });
    };
    check_rows(first, input.len(), "network input")?;
    for pair in layers.windows(2) {
        if pair[1].rows != pair[0].cols {
            return Err(Error::DimensionMismatch {
                what: "layer chain",
                expected: pair[0].cols,
                found: pair[1].rows,
            });
        }
    }
    let t_max = neuron.clock.t_max();
    let (v_lo, v_hi) = match neuron.v_range {
        Some(r) => r,
        None => neuron.linear_input_range()?,
    };

    let mut result = InferenceResult {
        inputs: Vec::with_capacity(layers.len()),
        widths: Vec::with_capacity(layers.len()),
        charges: Vec::with_capacity(layers.len()),
        maps: Vec::with_capacity(layers.len().saturating_sub(1)),
    };
    let mut volts = input.to_vec();
    for (k, layer) in layers.iter().enumerate() {
        if k > 0 {
            let q_hi = layers[k - 1].full_scale_charge(t_max);
            let map = ChargeMap::new(0.0, q_hi, v_lo, v_hi)?;
            volts = result.charges[k - 1]
                .iter()
                .map(|&q| map.apply(q))
                .collect();
            result.maps.push(map);
        }
        let widths = volts
            .iter()
            .map(|&v| neuron.width(v))
            .collect::<Result<Vec<_>>>()?;
        let charges = mac_pwm(layer, &PwmVector::new(widths.clone(), t_max)?)?;
        result.inputs.push(volts.clone());
        result.widths.push(widths);
        result.charges.push(charges);
    }
    Ok(result)
}
