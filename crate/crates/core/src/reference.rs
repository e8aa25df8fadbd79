//! Closed-form model of the conventional sawtooth-comparator PWM circuit.
//!
//! A pull-up current charges `c_saw` while the clock is high, giving a ramp
//! `V_saw = (I / C_saw)(t - t0)`. An ideal comparator outputs 1 while
//! `V_in > V_saw`, so the pulse width is `V_in * C_saw / I` clipped to the
//! clock-high time. The level shifter is treated as width-preserving.

use crate::device::PfDeviceParams;
use crate::error::{finite, Error, Result};
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SawtoothSpec {
    /// Pull-up current, A.
    pub i_pullup: f64,
    /// Ramp capacitor, F.
    pub c_saw: f64,
    /// Supply; the ramp caps here and sits here while the clock is low, V.
    pub v_dd: f64,
    pub f_clk: f64,
    /// Fraction of the period the clock is high.
    pub duty: f64,
}

impl Default for SawtoothSpec {
    fn default() -> Self {
        Self {
            i_pullup: 1e-6,
            c_saw: 1e-9,
            v_dd: 1.8,
            f_clk: 1e3,
            duty: 1.0,
        }
    }
}

impl SawtoothSpec {
    pub fn validate(&self) -> Result<()> {
        for (v, name) in [
            (self.i_pullup, "i_pullup"),
            (self.c_saw, "c_saw"),
            (self.v_dd, "v_dd"),
            (self.f_clk, "f_clk"),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: "must be finite and > 0",
                });
            }
        }
        if !(self.duty > 0.0 && self.duty <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "duty",
                reason: "must lie in (0, 1]",
            });
        }
        Ok(())
    }

    /// Ramp rate `I / C_saw`, V/s.
    pub fn slew(&self) -> f64 {
        self.i_pullup / self.c_saw
    }

    pub fn t_max(&self) -> f64 {
        self.duty / self.f_clk
    }
}

/// Sawtooth voltage at absolute time `t >= 0`.
pub fn v_saw(spec: &SawtoothSpec, t: f64) -> f64 {
    let period = 1.0 / spec.f_clk;
    let cycle = math::floor(t / period);
    let phase = t - cycle * period;
    if phase >= spec.t_max() {
        spec.v_dd
    } else {
        (spec.slew() * phase).min(spec.v_dd)
    }
}

/// Pulse width for input `v_in`: `clamp(v_in * C_saw / I, 0, t_max)`.
pub fn encode_ref(spec: &SawtoothSpec, v_in: f64) -> f64 {
    (v_in / spec.slew()).clamp(0.0, spec.t_max())
}

/// PF parameters whose integration time to latch equals the reference pulse
/// width: `qth_slope / I_Dn = C_saw / I`, zero intercept, no leak.
///
/// `v_g1` is the clock-high bias that sets `I_Dn`.
pub fn match_pf_params(
    spec: &SawtoothSpec,
    pf: &PfDeviceParams,
    v_g1: f64,
) -> Result<PfDeviceParams> {
    spec.validate()?;
    let i_dn = pf.injection_current(finite(v_g1, "v_g1")?)?;
    Ok(PfDeviceParams {
        qth_slope: i_dn / spec.slew(),
        qth_offset: 0.0,
        tau_leak: f64::INFINITY,
        ..*pf
    })
}
