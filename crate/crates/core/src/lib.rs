//! Behavioral simulator for a two-gate positive-feedback (PF) device used as a
//! pulse-width-modulation neuron.
//!
//! The device integrates an injection current into a floating-body charge and
//! latches abruptly once that charge crosses a gate-2-controlled threshold.
//! Driving gate 1 with a clock and gate 2 with the input voltage turns the
//! latch instant into a pulse width, which gives a hard-sigmoid activation.
//!
//! The crate is `no_std` (with `alloc`). File formats, the experiment runner
//! and the CLI live in the companion `pfpwm` crate.

#![no_std]
// NaN must fail parameter checks, which `!(x > 0.0)` does.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

pub mod calibration;
pub mod crossbar;
pub mod device;
mod error;
mod math;
pub mod neuron;
pub mod reference;
pub mod stats;
pub mod transient;

pub use calibration::{fit_leaky, fit_linear, FitReport, TonDataset, TonMetadata};
pub use crossbar::{
    infer, mac_pam, mac_pwm, ChargeMap, InferenceResult, NeuronConfig, Nonlinearity, PwmVector,
    SynapseArray,
};
pub use device::{BiasPoint, DcTransfer, PfDeviceParams, PfDeviceState, ThresholdCharge};
pub use error::{Error, Result};
pub use neuron::{
    activation_curve, encode, fit_hard_sigmoid, ActivationCurve, ActivationPoint, Encoded,
    HardSigmoidFit, SigmoidPolarity,
};
pub use reference::{encode_ref, match_pf_params, v_saw, SawtoothSpec};
pub use transient::{
    extract_t_on, simulate, ClockSpec, PiecewiseConstant, Sample, SimConfig, Stimulus, TurnOnEvent,
    Waveform,
};

/// Thermal voltage kT/q at 300 K, in volts.
pub const THERMAL_VOLTAGE_300K: f64 = 0.025_85;
