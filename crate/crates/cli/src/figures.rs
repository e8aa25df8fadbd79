//! Plot-ready columnar files named after the figures they reproduce.
//!
//! | recipe | header | source |
//! |---|---|---|
//! | `fig1c.csv` | `v_g2_V,v_g1_V,i_a_A` | iv-sweep, one series per `v_g2_V` |
//! | `fig3b.csv` | `v_in_V,t_s,i_a_A` | transient |
//! | `fig3c.csv` | `v_in_V,t_on_s` | activation |
//! | `fig5b.csv` | `v_in_V,t_s,q_n_C` | transient |
//! | `fig5c.csv` | `v_in_V,t_s,i_a_A` | transient |
//! | `fig5d.csv` | `v_in_V,t_on_s,t_max_minus_t_on_s` | activation |
//!
//! An empty `t_on_s` field means the device did not latch.

use pfpwm_core::{ActivationCurve, DcTransfer, PiecewiseConstant, Waveform};

use crate::error::Result;
use crate::files::{fmt_f64, fmt_opt, OutDir};

pub fn fig1c(out: &mut OutDir, curves: &[DcTransfer]) -> Result<()> {
    out.csv(
        "fig1c.csv",
        &["v_g2_V", "v_g1_V", "i_a_A"],
        curves.iter().flat_map(|c| {
            c.points
                .iter()
                .map(move |&(v_g1, i_a)| vec![fmt_f64(c.v_g2), fmt_f64(v_g1), fmt_f64(i_a)])
        }),
    )
}

/// A transient run together with the gate-2 input that drove it.
pub struct TransientRun {
    pub v_g2: PiecewiseConstant,
    pub waveform: Waveform,
}

fn time_series<F>(
    out: &mut OutDir,
    name: &str,
    column: &str,
    runs: &[TransientRun],
    pick: F,
) -> Result<()>
where
    F: Fn(&pfpwm_core::Sample) -> f64,
{
    out.csv(
        name,
        &["v_in_V", "t_s", column],
        runs.iter().flat_map(|run| {
            let pick = &pick;
            run.waveform.samples.iter().map(move |s| {
                vec![
                    fmt_f64(run.v_g2.value_at(s.t)),
                    fmt_f64(s.t),
                    fmt_f64(pick(s)),
                ]
            })
        }),
    )
}

pub fn fig3b(out: &mut OutDir, runs: &[TransientRun]) -> Result<()> {
    time_series(out, "fig3b.csv", "i_a_A", runs, |s| s.i_a)
}

pub fn fig5b(out: &mut OutDir, runs: &[TransientRun]) -> Result<()> {
    time_series(out, "fig5b.csv", "q_n_C", runs, |s| s.q_n)
}

pub fn fig5c(out: &mut OutDir, runs: &[TransientRun]) -> Result<()> {
    time_series(out, "fig5c.csv", "i_a_A", runs, |s| s.i_a)
}

pub fn fig3c(out: &mut OutDir, curve: &ActivationCurve) -> Result<()> {
    out.csv(
        "fig3c.csv",
        &["v_in_V", "t_on_s"],
        curve
            .points
            .iter()
            .map(|p| vec![fmt_f64(p.v_in), fmt_opt(p.t_on)]),
    )
}

pub fn fig5d(out: &mut OutDir, curve: &ActivationCurve) -> Result<()> {
    out.csv(
        "fig5d.csv",
        &["v_in_V", "t_on_s", "t_max_minus_t_on_s"],
        curve
            .points
            .iter()
            .map(|p| vec![fmt_f64(p.v_in), fmt_opt(p.t_on), fmt_f64(p.t_p)]),
    )
}
