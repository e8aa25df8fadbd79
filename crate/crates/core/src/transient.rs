//! Clocked transient simulation with refined latch-event timing.
//!
//! Gate 1 carries the clock and gate 2 a piecewise-constant input. Within each
//! clock-high phase the floating-body charge is advanced step by step. Bias is
//! constant between steps and breakpoints, so the charge has a closed form
//! there. The latch instant is found by bisection on that closed form, which
//! keeps event accuracy independent of `dt`. The latch clears and the charge
//! empties on every falling clock edge, and the device is held in reset while
//! the clock is low.

use alloc::vec;
use alloc::vec::Vec;

use crate::device::{PfDeviceParams, PfDeviceState};
use crate::error::{finite, Error, Result};
use crate::math;

const MAX_BISECTIONS: usize = 200;

/// Clock waveform applied to gate 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClockSpec {
    pub f_clk: f64,
    pub v_high: f64,
    pub v_low: f64,
    /// Fraction of the period the clock is high, in (0, 1].
    pub duty: f64,
}

impl Default for ClockSpec {
    fn default() -> Self {
        Self {
            f_clk: 1e3,
            v_high: 0.45,
            v_low: 0.0,
            duty: 1.0,
        }
    }
}

impl ClockSpec {
    pub fn period(&self) -> f64 {
        1.0 / self.f_clk
    }

    /// Length of the clock-high phase. This is the longest possible pulse, t_max.
    pub fn t_max(&self) -> f64 {
        self.duty / self.f_clk
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f_clk.is_finite() && self.f_clk > 0.0) {
            return Err(Error::InvalidParameter {
                name: "f_clk",
                reason: "must be finite and > 0",
            });
        }
        finite(self.v_high, "clock v_high")?;
        finite(self.v_low, "clock v_low")?;
        if self.v_high <= self.v_low {
            return Err(Error::InvalidParameter {
                name: "clock levels",
                reason: "v_high must exceed v_low",
            });
        }
        if !(self.duty > 0.0 && self.duty <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "duty",
                reason: "must lie in (0, 1]",
            });
        }
        Ok(())
    }
}

/// A piecewise-constant signal. Segment `i` holds `values[i]` from
/// `starts[i]` up to the next start; the last one extends forever.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseConstant {
    starts: Vec<f64>,
    values: Vec<f64>,
}

impl PiecewiseConstant {
    pub fn constant(value: f64) -> Self {
        Self {
            starts: vec![0.0],
            values: vec![value],
        }
    }

    /// Builds from `(start_time, value)` pairs. The first segment must start
    /// at 0 and starts must strictly increase.
    pub fn from_segments(segments: &[(f64, f64)]) -> Result<Self> {
        let Some(&(first, _)) = segments.first() else {
            return Err(Error::InvalidGrid("piecewise signal has no segments"));
        };
        if first != 0.0 {
            return Err(Error::InvalidGrid("first segment must start at t = 0"));
        }
        if segments
            .iter()
            .any(|&(t, v)| !t.is_finite() || !v.is_finite())
        {
            return Err(Error::InvalidGrid(
                "segment times and values must be finite",
            ));
        }
        if segments.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::InvalidGrid("segment starts must strictly increase"));
        }
        Ok(Self {
            starts: segments.iter().map(|s| s.0).collect(),
            values: segments.iter().map(|s| s.1).collect(),
        })
    }

    pub fn segments(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.starts.iter().copied().zip(self.values.iter().copied())
    }

    pub fn value_at(&self, t: f64) -> f64 {
        let idx = self.starts.partition_point(|&s| s <= t);
        self.values[idx.saturating_sub(1)]
    }

    /// Segment starts strictly inside `(a, b)`.
    fn breakpoints_within(&self, a: f64, b: f64) -> impl Iterator<Item = f64> + '_ {
        self.starts.iter().copied().filter(move |&s| s > a && s < b)
    }
}

/// Bias applied to the device over a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Stimulus {
    pub clock: ClockSpec,
    pub v_g2: PiecewiseConstant,
    pub v_a: f64,
    pub v_c: f64,
    pub n_cycles: usize,
}

impl Stimulus {
    /// Constant gate-2 input at the default 1 V anode bias.
    pub fn constant(clock: ClockSpec, v_g2: f64, n_cycles: usize) -> Self {
        Self {
            clock,
            v_g2: PiecewiseConstant::constant(v_g2),
            v_a: 1.0,
            v_c: 0.0,
            n_cycles,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    /// Integration step, s.
    pub dt: f64,
    /// Event refinement tolerance, s.
    pub t_tol: f64,
    /// Keep every `sample_stride`-th step in the waveform.
    pub sample_stride: usize,
    /// Clip on the on-state anode current, A.
    pub i_compliance: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1e-6,
            t_tol: 1e-9,
            sample_stride: 1,
            i_compliance: 10e-6,
        }
    }
}

impl SimConfig {
    pub fn validate(&self, clock: &ClockSpec) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidParameter {
                name: "dt",
                reason: "must be finite and > 0",
            });
        }
        if !(self.t_tol > 0.0 && self.t_tol <= self.dt) {
            return Err(Error::InvalidParameter {
                name: "t_tol",
                reason: "must satisfy 0 < t_tol <= dt",
            });
        }
        if self.dt > clock.period() / 100.0 {
            return Err(Error::InvalidParameter {
                name: "dt",
                reason: "must not exceed 1/100 of the clock period",
            });
        }
        if self.sample_stride == 0 {
            return Err(Error::InvalidParameter {
                name: "sample_stride",
                reason: "must be >= 1",
            });
        }
        if !(self.i_compliance > 0.0) {
            return Err(Error::InvalidParameter {
                name: "i_compliance",
                reason: "must be > 0",
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub q_n: f64,
    pub i_a: f64,
    pub latched: bool,
}

/// A latch event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TurnOnEvent {
    pub cycle_index: usize,
    /// Time from cycle start to latch, s.
    pub t_on: f64,
    pub absolute_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<Sample>,
    /// At most one per cycle, in cycle order.
    pub events: Vec<TurnOnEvent>,
    pub n_cycles: usize,
    /// Clock-high time of each cycle.
    pub t_max: f64,
}

impl Waveform {
    pub fn event(&self, cycle: usize) -> Option<&TurnOnEvent> {
        self.events.iter().find(|e| e.cycle_index == cycle)
    }
}

/// Turn-on time of `cycle`, or `None` when the device never latched in it.
pub fn extract_t_on(wf: &Waveform, cycle: usize) -> Result<Option<f64>> {
    if cycle >= wf.n_cycles {
        return Err(Error::CycleOutOfRange {
            cycle,
            n_cycles: wf.n_cycles,
        });
    }
    Ok(wf.event(cycle).map(|e| e.t_on))
}

/// Number of `dt` steps covering `span`, with the last one possibly short.
fn step_count(span: f64, dt: f64) -> usize {
    (math::ceil(span / dt - 1e-9) as usize).max(1)
}

/// Smallest elapsed time in `[0, width]` at which the charge reaches `q_th`,
/// bracketed to `t_tol` and reported as the bracket midpoint.
fn refine_crossing(
    params: &PfDeviceParams,
    q0: f64,
    i_dn: f64,
    q_th: f64,
    width: f64,
    t_tol: f64,
) -> Result<f64> {
    let mut lo = 0.0;
    let mut hi = width;
    for _ in 0..MAX_BISECTIONS {
        if hi - lo <= t_tol {
            return Ok(0.5 * (lo + hi));
        }
        let mid = 0.5 * (lo + hi);
        if params.charge_after(q0, i_dn, mid) >= q_th {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Err(Error::Internal("latch-time bisection did not converge"))
}

struct Recorder {
    samples: Vec<Sample>,
    stride: usize,
    steps: usize,
}

impl Recorder {
    fn push_step(&mut self, sample: Sample) {
        self.steps += 1;
        if self.steps.is_multiple_of(self.stride) {
            self.samples.push(sample);
        }
    }
}

/// Runs the device through `stim.n_cycles` clock cycles.
pub fn simulate(params: &PfDeviceParams, stim: &Stimulus, cfg: &SimConfig) -> Result<Waveform> {
    params.validate()?;
    stim.clock.validate()?;
    cfg.validate(&stim.clock)?;
    finite(stim.v_a, "v_a")?;
    finite(stim.v_c, "v_c")?;
    if stim.n_cycles == 0 {
        return Err(Error::InvalidParameter {
            name: "n_cycles",
            reason: "must be >= 1",
        });
    }

    let period = stim.clock.period();
    let t_max = stim.clock.t_max();
    let i_dn = params.injection_current(stim.clock.v_high)?;
    let i_on = params.diode_current(stim.v_a - stim.v_c, cfg.i_compliance);
    let i_a = |latched: bool| if latched { i_on } else { params.i_off };

    let high_steps = step_count(t_max, cfg.dt);
    let low_span = period - t_max;
    let low_steps = if low_span > cfg.dt * 1e-9 {
        step_count(low_span, cfg.dt)
    } else {
        0
    };

    let mut rec = Recorder {
        samples: Vec::with_capacity(
            stim.n_cycles * (high_steps + low_steps) / cfg.sample_stride + 1,
        ),
        stride: cfg.sample_stride,
        steps: 0,
    };
    let mut events = Vec::new();

    for cycle in 0..stim.n_cycles {
        let t0 = cycle as f64 * period;
        let mut state = PfDeviceState::at(t0);

        let q_th0 = params.threshold_charge(stim.v_g2.value_at(t0))?.charge;
        if state.q_n >= q_th0 {
            state.latched = true;
            events.push(TurnOnEvent {
                cycle_index: cycle,
                t_on: 0.0,
                absolute_time: t0,
            });
        }
        if cycle == 0 {
            rec.samples.push(Sample {
                t: 0.0,
                q_n: state.q_n,
                i_a: i_a(state.latched),
                latched: state.latched,
            });
        }

        for step in 0..high_steps {
            let s_a = step as f64 * cfg.dt;
            let s_b = if step + 1 == high_steps {
                t_max
            } else {
                ((step + 1) as f64 * cfg.dt).min(t_max)
            };
            if !state.latched {
                if let Some(t_on) = advance(
                    params, &stim.v_g2, &mut state, t0, s_a, s_b, i_dn, cfg.t_tol,
                )? {
                    events.push(TurnOnEvent {
                        cycle_index: cycle,
                        t_on,
                        absolute_time: t0 + t_on,
                    });
                }
            }
            state.t = t0 + s_b;
            rec.push_step(Sample {
                t: state.t,
                q_n: state.q_n,
                i_a: i_a(state.latched),
                latched: state.latched,
            });
        }

        // Falling edge: the latch clears and the body empties until the next
        // rising edge.
        state.reset();
        for step in 0..low_steps {
            let s_b = if step + 1 == low_steps {
                period
            } else {
                (t_max + (step + 1) as f64 * cfg.dt).min(period)
            };
            rec.push_step(Sample {
                t: t0 + s_b,
                q_n: 0.0,
                i_a: params.i_off,
                latched: false,
            });
        }
    }

    Ok(Waveform {
        samples: rec.samples,
        events,
        n_cycles: stim.n_cycles,
        t_max,
    })
}

/// Advances an unlatched device over cycle offsets `[s_a, s_b]`, splitting at
/// gate-2 breakpoints. Returns the latch offset when the device latches.
#[allow(clippy::too_many_arguments)]
fn advance(
    params: &PfDeviceParams,
    v_g2: &PiecewiseConstant,
    state: &mut PfDeviceState,
    t0: f64,
    s_a: f64,
    s_b: f64,
    i_dn: f64,
    t_tol: f64,
) -> Result<Option<f64>> {
    let mut cuts: Vec<f64> = Vec::new();
    cuts.push(s_a);
    cuts.extend(v_g2.breakpoints_within(t0 + s_a, t0 + s_b).map(|t| t - t0));
    cuts.push(s_b);

    for span in cuts.windows(2) {
        let (u, w) = (span[0], span[1]);
        let q_th = params.threshold_charge(v_g2.value_at(t0 + u))?.charge;
        if state.q_n >= q_th {
            state.latched = true;
            return Ok(Some(u));
        }
        let q_w = params.charge_after(state.q_n, i_dn, w - u);
        if q_w >= q_th {
            let s = refine_crossing(params, state.q_n, i_dn, q_th, w - u, t_tol)?;
            state.q_n = params.charge_after(state.q_n, i_dn, s);
            state.latched = true;
            return Ok(Some(u + s));
        }
        state.q_n = q_w;
    }
    Ok(None)
}
