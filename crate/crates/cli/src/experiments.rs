//! One runner per experiment kind. Each writes its data files and returns the
//! derived quantities and metrics that go into `summary.json`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde_json::Value;

use pfpwm_core::{
    encode, encode_ref, fit_hard_sigmoid, fit_leaky, fit_linear, infer, mac_pam, mac_pwm,
    match_pf_params, simulate, ActivationCurve, ChargeMap, FitReport, NeuronConfig, PfDeviceParams,
    PiecewiseConstant, PwmVector, SigmoidPolarity, Stimulus, SynapseArray, TonDataset, TonMetadata,
};

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::{Result, RunError};
use crate::figures::{self, TransientRun};
use crate::files::{self, fmt_f64, fmt_opt, num, num_opt, nums, object, OutDir};
use crate::pool::Pool;

pub struct Outcome {
    pub derived: Value,
    pub metrics: Value,
}

pub fn run(cfg: &ExperimentConfig, pool: &Pool, out: &mut OutDir) -> Result<Outcome> {
    match cfg.kind {
        ExperimentKind::IvSweep => iv_sweep(cfg, pool, out),
        ExperimentKind::Transient => transient(cfg, pool, out),
        ExperimentKind::Activation => activation(cfg, pool, out),
        ExperimentKind::CompareRef => compare_ref(cfg, pool, out),
        ExperimentKind::Calibrate => calibrate(cfg, out),
        ExperimentKind::Infer => infer_network(cfg, out),
    }
}

/// Closed-form latch time after the rising edge, `None` if the charge never
/// reaches the threshold within `t_max`.
pub fn closed_form_t_on(p: &PfDeviceParams, q_th: f64, i_dn: f64, t_max: f64) -> Option<f64> {
    let t = if p.tau_leak.is_infinite() {
        q_th / i_dn
    } else {
        let x = q_th / (i_dn * p.tau_leak);
        if x >= 1.0 {
            return None;
        }
        -p.tau_leak * (-x).ln_1p()
    };
    (t <= t_max).then_some(t)
}

fn iv_sweep(cfg: &ExperimentConfig, pool: &Pool, out: &mut OutDir) -> Result<Outcome> {
    let tau = cfg.iv_tau_leak();
    let params = PfDeviceParams {
        tau_leak: tau,
        ..cfg.device
    };
    let v_ac = cfg.v_a - cfg.v_c;
    let curves = pool.map(&cfg.iv.v_g2, |&v_g2| {
        params.dc_transfer_sweep(v_g2, &cfg.iv.v_g1, v_ac, cfg.sim.i_compliance)
    })?;
    figures::fig1c(out, &curves)?;

    let i_on = params.diode_current(v_ac, cfg.sim.i_compliance);
    let per_bias: Vec<Value> = curves
        .iter()
        .map(|c| {
            object([
                ("v_g2_V", num(c.v_g2)),
                ("q_th_C", num(c.q_th)),
                ("v_g1_on_V", num(c.v_g1_on)),
            ])
        })
        .collect();
    let v_on: Vec<f64> = curves.iter().map(|c| c.v_g1_on).collect();
    Ok(Outcome {
        derived: object([
            ("tau_leak_s", num(tau)),
            ("i_on_A", num(i_on)),
            ("i_off_A", num(params.i_off)),
            ("curves", Value::Array(per_bias)),
        ]),
        metrics: object([
            ("on_off_ratio", num(i_on / params.i_off)),
            (
                "v_g1_on_increasing",
                Value::Bool(v_on.windows(2).all(|w| w[1] > w[0])),
            ),
        ]),
    })
}

fn transient(cfg: &ExperimentConfig, pool: &Pool, out: &mut OutDir) -> Result<Outcome> {
    let inputs: Vec<PiecewiseConstant> = match &cfg.transient.segments {
        Some(segs) => vec![PiecewiseConstant::from_segments(segs)?],
        None => cfg
            .transient
            .v_g2
            .iter()
            .map(|&v| PiecewiseConstant::constant(v))
            .collect(),
    };
    let runs: Vec<TransientRun> = pool.map(&inputs, |v_g2| {
        let stim = Stimulus {
            clock: cfg.clock,
            v_g2: v_g2.clone(),
            v_a: cfg.v_a,
            v_c: cfg.v_c,
            n_cycles: cfg.transient.cycles,
        };
        simulate(&cfg.device, &stim, &cfg.sim).map(|waveform| TransientRun {
            v_g2: v_g2.clone(),
            waveform,
        })
    })?;

    let mut per_run = Vec::with_capacity(runs.len());
    for (k, run) in runs.iter().enumerate() {
        let wf = &run.waveform;
        out.csv(
            &format!("waveform_{k}.csv"),
            &["t_s", "q_n_C", "i_a_A", "latched"],
            wf.samples.iter().map(|s| {
                vec![
                    fmt_f64(s.t),
                    fmt_f64(s.q_n),
                    fmt_f64(s.i_a),
                    u8::from(s.latched).to_string(),
                ]
            }),
        )?;
        let events: Vec<Value> = wf
            .events
            .iter()
            .map(|e| {
                object([
                    ("cycle", Value::from(e.cycle_index)),
                    ("t_on_s", num(e.t_on)),
                ])
            })
            .collect();
        out.json(&format!("events_{k}.json"), &Value::Array(events))?;
        let segments: Vec<Value> = run
            .v_g2
            .segments()
            .map(|(t, v)| object([("t_s", num(t)), ("v_g2_V", num(v))]))
            .collect();
        per_run.push(object([
            ("v_g2", Value::Array(segments)),
            ("samples", Value::from(wf.samples.len())),
            ("events", Value::from(wf.events.len())),
        ]));
    }
    figures::fig3b(out, &runs)?;
    figures::fig5b(out, &runs)?;
    figures::fig5c(out, &runs)?;

    Ok(Outcome {
        derived: object([
            (
                "i_dn_A",
                num(cfg.device.injection_current(cfg.clock.v_high)?),
            ),
            ("t_max_s", num(cfg.clock.t_max())),
            ("runs", Value::Array(per_run)),
        ]),
        metrics: object([(
            "latched_cycles",
            Value::from(runs.iter().map(|r| r.waveform.events.len()).sum::<usize>()),
        )]),
    })
}

fn check_grid(grid: &[f64], key: &str) -> Result<()> {
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(RunError::config(format!(
            "{key} must be strictly ascending"
        )));
    }
    Ok(())
}

fn activation(cfg: &ExperimentConfig, pool: &Pool, out: &mut OutDir) -> Result<Outcome> {
    let grid = &cfg.activation.v_in;
    check_grid(grid, "activation.v_in")?;
    let t_max = cfg.clock.t_max();
    let encoded = pool.map(grid, |&v| encode(&cfg.device, v, &cfg.clock, &cfg.sim))?;
    let curve = ActivationCurve::from_encoded(grid, &encoded, t_max)?;

    out.csv(
        "activation.csv",
        &["v_in_V", "t_on_s", "t_p_s"],
        curve
            .points
            .iter()
            .map(|p| vec![fmt_f64(p.v_in), fmt_opt(p.t_on), fmt_f64(p.t_p)]),
    )?;
    let fit = match fit_hard_sigmoid(&curve) {
        Ok(f) => object([
            ("v_low_V", num(f.v_low)),
            ("v_high_V", num(f.v_high)),
            ("slope_s_per_V", num(f.slope)),
            ("intercept_s", num(f.intercept)),
            ("r_squared", num(f.r_squared)),
            ("max_residual_s", num(f.max_residual)),
            (
                "polarity",
                Value::from(match f.polarity {
                    SigmoidPolarity::Descending => "descending",
                    SigmoidPolarity::Ascending => "ascending",
                }),
            ),
            ("n_linear", Value::from(f.n_linear)),
        ]),
        Err(e) => object([("error", Value::from(e.to_string()))]),
    };
    out.json("fit.json", &fit)?;
    figures::fig3c(out, &curve)?;
    figures::fig5d(out, &curve)?;

    let i_dn = cfg.device.injection_current(cfg.clock.v_high)?;
    let mut max_err: f64 = 0.0;
    let mut agree = true;
    for p in &curve.points {
        let q_th = cfg.device.threshold_charge(p.v_in)?.charge;
        // A latch landing within t_tol of the falling edge may go either way.
        let edge = t_max - cfg.sim.t_tol;
        match (
            p.t_on,
            closed_form_t_on(&cfg.device, q_th, i_dn, f64::INFINITY),
        ) {
            (Some(a), Some(b)) => max_err = max_err.max((a - b).abs()),
            (None, Some(b)) => agree &= b >= edge,
            (None, None) => {}
            (Some(_), None) => agree = false,
        }
    }
    let t_ps: Vec<f64> = curve.points.iter().map(|p| p.t_p).collect();
    Ok(Outcome {
        derived: object([("i_dn_A", num(i_dn)), ("t_max_s", num(t_max)), ("fit", fit)]),
        metrics: object([
            ("max_closed_form_error_s", num(max_err)),
            ("latch_agrees_with_closed_form", Value::Bool(agree)),
            (
                "clipped",
                Value::Bool(t_ps.iter().all(|&t| (0.0..=t_max).contains(&t))),
            ),
        ]),
    })
}

fn compare_ref(cfg: &ExperimentConfig, pool: &Pool, out: &mut OutDir) -> Result<Outcome> {
    let spec = &cfg.compare.sawtooth;
    let grid = &cfg.compare.v_in;
    let pf = match_pf_params(spec, &cfg.device, cfg.clock.v_high)?;
    let t_max = cfg.clock.t_max();
    let pf_widths = pool.map(grid, |&v| {
        encode(&pf, v, &cfg.clock, &cfg.sim).map(|e| e.t_on_or_max(t_max))
    })?;
    let ref_widths: Vec<f64> = grid.iter().map(|&v| encode_ref(spec, v)).collect();
    let diffs: Vec<f64> = pf_widths
        .iter()
        .zip(&ref_widths)
        .map(|(a, b)| a - b)
        .collect();
    out.csv(
        "compare.csv",
        &["v_in_V", "t_on_pf_s", "t_p_ref_s", "diff_s"],
        (0..grid.len()).map(|i| {
            vec![
                fmt_f64(grid[i]),
                fmt_f64(pf_widths[i]),
                fmt_f64(ref_widths[i]),
                fmt_f64(diffs[i]),
            ]
        }),
    )?;
    let max_diff = diffs.iter().fold(0.0_f64, |m, d| m.max(d.abs()));
    let bound = 2.0 * cfg.sim.t_tol;
    Ok(Outcome {
        derived: object([
            ("matched_qth_slope_C_per_V", num(pf.qth_slope)),
            ("slew_V_per_s", num(spec.slew())),
            ("t_max_s", num(t_max)),
        ]),
        metrics: object([
            ("max_width_discrepancy_s", num(max_diff)),
            ("bound_s", num(bound)),
            ("within_bound", Value::Bool(max_diff <= bound)),
        ]),
    })
}

fn report_json(r: &FitReport, i_dn: Option<f64>) -> Value {
    let (alpha, beta) = match i_dn {
        Some(i) => {
            let (a, b) = r.absolute(i);
            (num(a), num(b))
        }
        None => (Value::Null, Value::Null),
    };
    object([
        ("qth_slope_over_idn_s_per_V", num(r.qth_slope_over_idn)),
        ("qth_offset_over_idn_s", num(r.qth_offset_over_idn)),
        ("tau_leak_est_s", num(r.tau_leak_est)),
        ("r_squared", num(r.r_squared)),
        ("rss_s2", num(r.rss)),
        ("max_abs_residual_s", num(r.max_abs_residual())),
        ("residuals_s", nums(&r.residuals)),
        ("qth_slope_C_per_V", alpha),
        ("qth_offset_C", beta),
    ])
}

fn rel_err(est: f64, truth: f64) -> Value {
    if truth == 0.0 {
        num(est.abs())
    } else {
        num(((est - truth) / truth).abs())
    }
}

fn calibrate(cfg: &ExperimentConfig, out: &mut OutDir) -> Result<Outcome> {
    let c = &cfg.calibrate;
    let metadata = TonMetadata {
        v_g1: cfg.clock.v_high,
        v_a: cfg.v_a,
        f_clk: cfg.clock.f_clk,
    };
    let true_i_dn = cfg.device.injection_current(cfg.clock.v_high)?;
    let (rows, synthetic) = match &c.data {
        Some(path) => (files::read_dataset(path)?, false),
        None => (synthesize(cfg, true_i_dn)?, true),
    };
    let data = TonDataset::new(rows, metadata)?;
    out.csv(
        "dataset.csv",
        &["v_in_V", "t_on_s"],
        data.rows.iter().map(|&(v, t)| vec![fmt_f64(v), fmt_f64(t)]),
    )?;

    let i_dn = c.i_dn.or(synthetic.then_some(true_i_dn));
    let linear = fit_linear(&data)?;
    let leaky = fit_leaky(&data, &c.tau_grid);
    let leaky_json = match &leaky {
        Ok(r) => report_json(r, i_dn),
        Err(e) => object([("error", Value::from(e.to_string()))]),
    };
    let report = object([
        ("linear", report_json(&linear, i_dn)),
        ("leaky", leaky_json),
        ("rows", Value::from(data.rows.len())),
        ("distinct_inputs", Value::from(data.distinct_inputs())),
    ]);
    out.json("report.json", &report)?;

    let metrics = if synthetic {
        let slope = cfg.device.qth_slope / true_i_dn;
        let offset = cfg.device.qth_offset / true_i_dn;
        let mut m = vec![
            (
                "linear_slope_rel_err",
                rel_err(linear.qth_slope_over_idn, slope),
            ),
            (
                "linear_offset_rel_err",
                rel_err(linear.qth_offset_over_idn, offset),
            ),
        ];
        if let Ok(r) = &leaky {
            m.push(("leaky_slope_rel_err", rel_err(r.qth_slope_over_idn, slope)));
            if c.tau_true.is_finite() && r.tau_leak_est.is_finite() {
                m.push(("leaky_tau_rel_err", rel_err(r.tau_leak_est, c.tau_true)));
            }
        }
        Value::Object(m.into_iter().map(|(k, v)| (k.to_owned(), v)).collect())
    } else {
        object([("linear_r_squared", num(linear.r_squared))])
    };
    Ok(Outcome {
        derived: object([
            ("synthetic", Value::Bool(synthetic)),
            ("i_dn_A", num_opt(i_dn)),
            (
                "truth",
                if synthetic {
                    object([
                        (
                            "qth_slope_over_idn_s_per_V",
                            num(cfg.device.qth_slope / true_i_dn),
                        ),
                        (
                            "qth_offset_over_idn_s",
                            num(cfg.device.qth_offset / true_i_dn),
                        ),
                        ("tau_leak_s", num(c.tau_true)),
                    ])
                } else {
                    Value::Null
                },
            ),
        ]),
        metrics,
    })
}

/// Closed-form turn-on times on an even grid, with seeded multiplicative
/// Gaussian noise. Inputs whose threshold is never reached are skipped.
fn synthesize(cfg: &ExperimentConfig, i_dn: f64) -> Result<Vec<(f64, f64)>> {
    let c = &cfg.calibrate;
    let p = PfDeviceParams {
        tau_leak: c.tau_true,
        ..cfg.device
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rows = Vec::with_capacity(c.points);
    for k in 0..c.points {
        let v = c.v_min + (c.v_max - c.v_min) * k as f64 / (c.points - 1) as f64;
        let q_th = p.threshold_charge(v)?.charge;
        let Some(t) = closed_form_t_on(&p, q_th, i_dn, f64::INFINITY) else {
            continue;
        };
        let z: f64 = rng.sample(StandardNormal);
        rows.push((v, (t * (1.0 + c.noise * z)).max(0.0)));
    }
    if rows.len() < 2 {
        return Err(RunError::config(
            "calibrate: fewer than two synthetic points latch; raise calibrate.tau_true",
        ));
    }
    Ok(rows)
}

fn infer_network(cfg: &ExperimentConfig, out: &mut OutDir) -> Result<Outcome> {
    let b = &cfg.infer;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let layers: Vec<SynapseArray> = if b.weights.is_empty() {
        b.layers
            .windows(2)
            .map(|w| {
                let g = (0..w[0] * w[1])
                    .map(|_| rng.gen_range(0.0..b.g_max))
                    .collect();
                SynapseArray::new(w[0], w[1], g, b.nonlinearity.clone(), b.v_read)
            })
            .collect::<pfpwm_core::Result<_>>()?
    } else {
        b.weights
            .iter()
            .map(|path| {
                let rows = files::read_matrix(path)?;
                Ok(SynapseArray::from_rows(
                    &rows,
                    b.nonlinearity.clone(),
                    b.v_read,
                )?)
            })
            .collect::<Result<_>>()?
    };

    let neuron = NeuronConfig {
        params: cfg.device,
        clock: cfg.clock,
        sim: cfg.sim,
        polarity: b.polarity,
        v_range: b.v_range,
    };
    let (v_lo, v_hi) = match b.v_range {
        Some(r) => r,
        None => neuron.linear_input_range()?,
    };
    let input = match &b.input {
        Some(v) => v.clone(),
        None => (0..layers[0].rows())
            .map(|_| rng.gen_range(v_lo..v_hi))
            .collect(),
    };
    let result = infer(&layers, &input, &neuron)?;

    // Amplitude coding of the same first-layer values, for comparison.
    let t_max = cfg.clock.t_max();
    let first = &layers[0];
    let widths = &result.widths[0];
    let ideal: Vec<f64> = (0..first.cols())
        .map(|j| {
            (0..first.rows())
                .map(|i| first.g(i, j) * b.v_read * widths[i])
                .sum()
        })
        .collect();
    let pwm = mac_pwm(first, &PwmVector::new(widths.clone(), t_max)?)?;
    let amplitudes: Vec<f64> = widths.iter().map(|w| b.v_read * w / t_max).collect();
    let pam: Vec<f64> = mac_pam(first, &amplitudes)?
        .into_iter()
        .map(|i| i * t_max)
        .collect();
    let mean_rel = |xs: &[f64]| -> f64 {
        let errs: Vec<f64> = xs
            .iter()
            .zip(&ideal)
            .filter(|(_, q)| **q != 0.0)
            .map(|(x, q)| ((x - q) / q).abs())
            .collect();
        if errs.is_empty() {
            0.0
        } else {
            errs.iter().sum::<f64>() / errs.len() as f64
        }
    };

    let matrix = |rows: &[Vec<f64>]| Value::Array(rows.iter().map(|r| nums(r)).collect());
    let map_json = |m: &ChargeMap| {
        object([
            ("q_lo_C", num(m.q_lo)),
            ("q_hi_C", num(m.q_hi)),
            ("v_lo_V", num(m.v_lo)),
            ("v_hi_V", num(m.v_hi)),
        ])
    };
    let weights: Vec<Value> = layers
        .iter()
        .map(|l| {
            Value::Array(
                (0..l.rows())
                    .map(|i| Value::Array((0..l.cols()).map(|j| num(l.g(i, j))).collect()))
                    .collect(),
            )
        })
        .collect();
    out.json(
        "result.json",
        &object([
            ("weights_S", Value::Array(weights)),
            ("inputs_V", matrix(&result.inputs)),
            ("widths_s", matrix(&result.widths)),
            ("charges_C", matrix(&result.charges)),
            (
                "maps",
                Value::Array(result.maps.iter().map(map_json).collect()),
            ),
            ("output_C", nums(result.output())),
        ]),
    )?;

    Ok(Outcome {
        derived: object([
            (
                "layer_sizes",
                Value::Array(
                    std::iter::once(layers[0].rows())
                        .chain(layers.iter().map(SynapseArray::cols))
                        .map(Value::from)
                        .collect(),
                ),
            ),
            ("v_range_V", nums(&[v_lo, v_hi])),
            ("t_max_s", num(t_max)),
        ]),
        metrics: object([
            ("pwm_mean_rel_err", num(mean_rel(&pwm))),
            ("pam_mean_rel_err", num(mean_rel(&pam))),
        ]),
    })
}
