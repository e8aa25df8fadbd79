//! Behavioral compact model of the two-gate positive-feedback device.
//!
//! Gate 1 sets a subthreshold injection current that charges the n⁻ floating
//! body. Gate 2 sets the threshold charge at which the internal p-MOSFET turns
//! on and the positive-feedback loop latches the device into a diode-like
//! on-state. Charges are stored as nonnegative magnitudes in coulombs.

use alloc::vec::Vec;

use crate::error::{finite, Error, Result};
use crate::math;

/// Behavioral constants of the PF device. All quantities SI.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PfDeviceParams {
    /// Slope of the threshold-charge line, C/V.
    pub qth_slope: f64,
    /// Intercept of the threshold-charge line, C.
    pub qth_offset: f64,
    /// Gate-2 interval over which the linear threshold law is trusted, V.
    pub vg2_valid: (f64, f64),
    /// Injection current at `inj_vref`, A.
    pub inj_i0: f64,
    /// Reference gate-1 bias for `inj_i0`, V.
    pub inj_vref: f64,
    /// Subthreshold swing of the injection current, V/decade.
    pub inj_ss: f64,
    /// Floating-body relaxation time, s. `f64::INFINITY` disables the leak.
    pub tau_leak: f64,
    /// Off-state anode leakage, A.
    pub i_off: f64,
    /// On-state diode saturation current, A.
    pub diode_is: f64,
    /// On-state diode ideality factor.
    pub diode_n: f64,
    /// Thermal voltage, V.
    pub thermal_v: f64,
}

impl Default for PfDeviceParams {
    /// 10 fC/V threshold slope and 100 pA injection at a 0.45 V clock put
    /// t_on between 50 µs and 200 µs for inputs of 0.5 V to 2.0 V.
    fn default() -> Self {
        Self {
            qth_slope: 10e-15,
            qth_offset: 0.0,
            vg2_valid: (0.5, 2.0),
            inj_i0: 100e-12,
            inj_vref: 0.45,
            inj_ss: 0.1,
            tau_leak: f64::INFINITY,
            i_off: 1e-12,
            diode_is: 1e-15,
            diode_n: 1.0,
            thermal_v: crate::THERMAL_VOLTAGE_300K,
        }
    }
}

/// Threshold charge together with a range flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdCharge {
    /// Clamped threshold charge, C.
    pub charge: f64,
    /// False when the gate-2 bias lies outside `vg2_valid`. Not an error.
    pub in_valid_range: bool,
}

/// Terminal voltages of the device.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasPoint {
    pub v_g1: f64,
    pub v_g2: f64,
    pub v_a: f64,
    pub v_c: f64,
}

impl BiasPoint {
    pub fn new(v_g1: f64, v_g2: f64, v_a: f64) -> Self {
        Self {
            v_g1,
            v_g2,
            v_a,
            v_c: 0.0,
        }
    }
}

/// Dynamic state: floating-body charge, latch flag and time.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PfDeviceState {
    /// Magnitude of the stored electron charge, C. Never negative.
    pub q_n: f64,
    pub latched: bool,
    pub t: f64,
}

impl PfDeviceState {
    pub fn at(t: f64) -> Self {
        Self {
            q_n: 0.0,
            latched: false,
            t,
        }
    }

    /// Clears the latch and empties the floating body.
    pub fn reset(&mut self) {
        self.q_n = 0.0;
        self.latched = false;
    }
}

/// Quasi-static anode current versus gate-1 bias at one gate-2 bias.
#[derive(Debug, Clone, PartialEq)]
pub struct DcTransfer {
    pub v_g2: f64,
    /// Threshold charge at `v_g2`, C.
    pub q_th: f64,
    /// Gate-1 bias where the steady-state charge equals the threshold.
    /// `-inf` when the threshold is zero.
    pub v_g1_on: f64,
    /// `(v_g1, i_a)` pairs in grid order.
    pub points: Vec<(f64, f64)>,
}

impl PfDeviceParams {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, name: &'static str| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter {
                    name,
                    reason: "must be finite and > 0",
                })
            }
        };
        positive(self.qth_slope, "qth_slope")?;
        finite(self.qth_offset, "qth_offset")?;
        positive(self.inj_i0, "inj_i0")?;
        finite(self.inj_vref, "inj_vref")?;
        positive(self.inj_ss, "inj_ss")?;
        positive(self.i_off, "i_off")?;
        positive(self.diode_is, "diode_is")?;
        positive(self.diode_n, "diode_n")?;
        positive(self.thermal_v, "thermal_v")?;
        if !(self.tau_leak > 0.0) || self.tau_leak.is_nan() {
            return Err(Error::InvalidParameter {
                name: "tau_leak",
                reason: "must be > 0 or infinite",
            });
        }
        let (lo, hi) = self.vg2_valid;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::InvalidParameter {
                name: "vg2_valid",
                reason: "must be a finite interval with min <= max",
            });
        }
        Ok(())
    }

    /// `max(0, qth_slope * v_g2 + qth_offset)`.
    pub fn threshold_charge(&self, v_g2: f64) -> Result<ThresholdCharge> {
        let v_g2 = finite(v_g2, "v_g2")?;
        let (lo, hi) = self.vg2_valid;
        Ok(ThresholdCharge {
            charge: (self.qth_slope * v_g2 + self.qth_offset).max(0.0),
            in_valid_range: (lo..=hi).contains(&v_g2),
        })
    }

    /// Subthreshold injection current `inj_i0 * 10^((v_g1 - inj_vref) / inj_ss)`.
    pub fn injection_current(&self, v_g1: f64) -> Result<f64> {
        let v_g1 = finite(v_g1, "v_g1")?;
        Ok(self.inj_i0 * math::pow10((v_g1 - self.inj_vref) / self.inj_ss))
    }

    /// Diode law on the anode-cathode voltage, clipped at `i_compliance`.
    pub fn diode_current(&self, v_ac: f64, i_compliance: f64) -> f64 {
        let i = self.diode_is * math::expm1(v_ac / (self.diode_n * self.thermal_v));
        i.min(i_compliance)
    }

    /// Anode current: `i_off` when unlatched, clipped diode current otherwise.
    pub fn anode_current(&self, state: &PfDeviceState, bias: &BiasPoint, i_compliance: f64) -> f64 {
        if state.latched {
            self.diode_current(bias.v_a - bias.v_c, i_compliance)
        } else {
            self.i_off
        }
    }

    /// One explicit-Euler step of the floating-body charge.
    ///
    /// A latched device holds its charge. An unlatched one latches when the
    /// updated charge reaches the threshold set by `bias.v_g2`.
    pub fn step(&self, state: &PfDeviceState, bias: &BiasPoint, dt: f64) -> Result<PfDeviceState> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidParameter {
                name: "dt",
                reason: "must be finite and > 0",
            });
        }
        let mut next = *state;
        next.t = state.t + dt;
        if state.latched {
            return Ok(next);
        }
        let i_dn = self.injection_current(bias.v_g1)?;
        let q_th = self.threshold_charge(bias.v_g2)?.charge;
        next.q_n = (state.q_n + (i_dn - state.q_n / self.tau_leak) * dt).max(0.0);
        next.latched = next.q_n >= q_th;
        Ok(next)
    }

    /// Closed-form charge after `elapsed` seconds of constant injection
    /// `i_dn`, starting from `q0`.
    pub fn charge_after(&self, q0: f64, i_dn: f64, elapsed: f64) -> f64 {
        if self.tau_leak.is_infinite() {
            q0 + i_dn * elapsed
        } else {
            let q_inf = i_dn * self.tau_leak;
            // q0 + (q_inf - q0) * (1 - e^(-s/tau))
            (q0 - (q_inf - q0) * math::expm1(-elapsed / self.tau_leak)).max(0.0)
        }
    }

    /// Quasi-static anode current over `v_g1_grid` at fixed `v_g2`.
    ///
    /// The device is on wherever the steady-state charge `I_Dn * tau_leak`
    /// reaches the threshold charge, so a finite `tau_leak` is required.
    pub fn dc_transfer_sweep(
        &self,
        v_g2: f64,
        v_g1_grid: &[f64],
        v_a: f64,
        i_compliance: f64,
    ) -> Result<DcTransfer> {
        if self.tau_leak.is_infinite() {
            return Err(Error::InfiniteLeakTime);
        }
        check_ascending(v_g1_grid)?;
        let q_th = self.threshold_charge(v_g2)?.charge;
        let v_g1_on = if q_th > 0.0 {
            self.inj_vref + self.inj_ss * math::log10(q_th / (self.inj_i0 * self.tau_leak))
        } else {
            f64::NEG_INFINITY
        };
        let on_current = self.diode_current(v_a, i_compliance);
        let points = v_g1_grid
            .iter()
            .map(|&v_g1| {
                let q_ss = self.injection_current(v_g1)? * self.tau_leak;
                let i_a = if q_ss >= q_th { on_current } else { self.i_off };
                Ok((v_g1, i_a))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(DcTransfer {
            v_g2,
            q_th,
            v_g1_on,
            points,
        })
    }
}

/// Nonempty, finite and strictly ascending.
pub(crate) fn check_ascending(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidGrid("grid is empty"));
    }
    if grid.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidGrid("grid contains a non-finite value"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidGrid("grid must be strictly ascending"));
    }
    Ok(())
}
