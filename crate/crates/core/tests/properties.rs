use pfpwm_core::calibration::fit_at_tau;
use pfpwm_core::*;
use proptest::prelude::*;

/// Closed-form latch time of a leaky (or leak-free) integrator starting empty.
fn oracle_t_on(q_th: f64, i_dn: f64, tau: f64) -> Option<f64> {
    if tau.is_infinite() {
        return Some(q_th / i_dn);
    }
    let ratio = q_th / (i_dn * tau);
    (ratio < 1.0).then(|| -tau * (1.0 - ratio).ln())
}

fn params(q_th: f64, tau: f64) -> PfDeviceParams {
    PfDeviceParams {
        qth_offset: q_th,
        tau_leak: tau,
        ..Default::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn threshold_nondecreasing_and_linear(slope in 1e-16..1e-13f64, offset in -1e-14..1e-14f64,
                                          a in -3.0..3.0f64, b in -3.0..3.0f64) {
        let p = PfDeviceParams { qth_slope: slope, qth_offset: offset, ..Default::default() };
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let q_lo = p.threshold_charge(lo).unwrap().charge;
        let q_hi = p.threshold_charge(hi).unwrap().charge;
        prop_assert!(q_lo <= q_hi);
        prop_assert!(q_lo >= 0.0);
        if slope * lo + offset > 0.0 {
            let predicted = q_lo + slope * (hi - lo);
            prop_assert!((q_hi - predicted).abs() <= 1e-12 * q_hi.max(1e-30));
        }
    }

    #[test]
    fn leak_free_euler_is_exact(v_g1 in 0.3..0.6f64, n in 1usize..2000) {
        let p = PfDeviceParams::default();
        let bias = BiasPoint::new(v_g1, 1e6, 1.0);
        let dt = 1e-7;
        let mut s = PfDeviceState::default();
        for _ in 0..n {
            s = p.step(&s, &bias, dt).unwrap();
        }
        let i_dn = p.injection_current(v_g1).unwrap();
        let exact = i_dn * n as f64 * dt;
        prop_assert!((s.q_n - exact).abs() <= 1e-12 * exact);
    }

    #[test]
    fn latch_is_monotone_within_a_run(v_g2 in 0.0..3.0f64, steps in 1usize..3000) {
        let p = PfDeviceParams::default();
        let bias = BiasPoint::new(0.45, v_g2, 1.0);
        let mut s = PfDeviceState::default();
        let mut seen = false;
        for _ in 0..steps {
            s = p.step(&s, &bias, 1e-7).unwrap();
            prop_assert!(s.q_n >= 0.0);
            if seen {
                prop_assert!(s.latched);
            }
            seen |= s.latched;
        }
    }

    #[test]
    fn dc_turn_on_increases_with_gate2(slope in 1e-16..1e-13f64, tau in 1e-6..1.0f64,
                                       v1 in 0.1..3.0f64, dv in 0.01..1.0f64) {
        let p = PfDeviceParams { qth_slope: slope, tau_leak: tau, ..Default::default() };
        let a = p.dc_transfer_sweep(v1, &[0.0], 1.0, 10e-6).unwrap().v_g1_on;
        let b = p.dc_transfer_sweep(v1 + dv, &[0.0], 1.0, 10e-6).unwrap().v_g1_on;
        prop_assert!(b > a);
    }

    #[test]
    fn simulated_t_on_matches_closed_form(q_fc in 0.0..120.0f64, tau_exp in -4.0..0.5f64, leak in any::<bool>()) {
        let tau = if leak { 10f64.powf(tau_exp) } else { f64::INFINITY };
        let q_th = q_fc * 1e-15;
        let p = params(q_th, tau);
        let cfg = SimConfig::default();
        let wf = simulate(&p, &Stimulus::constant(ClockSpec::default(), 0.0, 1), &cfg).unwrap();
        let got = extract_t_on(&wf, 0).unwrap();
        match oracle_t_on(q_th, 100e-12, tau).filter(|&t| t <= 1e-3) {
            Some(expected) => {
                let t = got.expect("latch expected");
                prop_assert!((t - expected).abs() <= cfg.t_tol + cfg.dt * 1e-6, "{} vs {}", t, expected);
            }
            None => prop_assert!(got.is_none() || (got.unwrap() - 1e-3).abs() <= cfg.t_tol),
        }
    }

    #[test]
    fn events_independent_of_stride(v_g2 in 0.0..12.0f64, stride in 1usize..50) {
        let p = PfDeviceParams { tau_leak: 3e-3, ..Default::default() };
        let stim = Stimulus::constant(ClockSpec::default(), v_g2, 2);
        let full = simulate(&p, &stim, &SimConfig::default()).unwrap();
        let sparse = simulate(&p, &stim, &SimConfig { sample_stride: stride, ..Default::default() }).unwrap();
        prop_assert_eq!(&full.events, &sparse.events);
        for s in &sparse.samples {
            prop_assert!(full.samples.contains(s));
        }
    }

    #[test]
    fn pulse_width_clipped_and_dual(v_in in -2.0..15.0f64, duty in 0.2..1.0f64) {
        let p = PfDeviceParams::default();
        let clock = ClockSpec { duty, ..Default::default() };
        let e = encode(&p, v_in, &clock, &SimConfig::default()).unwrap();
        let t_max = clock.t_max();
        prop_assert!(e.t_p >= 0.0 && e.t_p <= t_max);
        if let Some(t_on) = e.t_on {
            prop_assert_eq!(t_on + e.t_p, t_max);
        } else {
            prop_assert_eq!(e.t_p, 0.0);
        }
    }

    #[test]
    fn pulse_width_monotone(a in -1.0..12.0f64, b in -1.0..12.0f64) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let p = PfDeviceParams::default();
        let clock = ClockSpec::default();
        let cfg = SimConfig::default();
        let e_lo = encode(&p, lo, &clock, &cfg).unwrap();
        let e_hi = encode(&p, hi, &clock, &cfg).unwrap();
        prop_assert!(e_hi.t_p <= e_lo.t_p + cfg.t_tol);
        let t_lo = e_lo.t_on_or_max(clock.t_max());
        let t_hi = e_hi.t_on_or_max(clock.t_max());
        prop_assert!(t_hi + cfg.t_tol >= t_lo);
    }

    #[test]
    fn reference_width_affine_and_bounded(v in -1.0..3.0f64, i in 1e-7..1e-5f64, c in 1e-10..1e-8f64) {
        let spec = SawtoothSpec { i_pullup: i, c_saw: c, ..Default::default() };
        let t = encode_ref(&spec, v);
        prop_assert!(t >= 0.0 && t <= spec.t_max());
        let raw = v * c / i;
        if raw > 0.0 && raw < spec.t_max() {
            prop_assert!((t - raw).abs() <= 1e-15 * raw.max(1e-12));
        }
    }

    #[test]
    fn mac_pwm_is_the_exact_dot_product(
        g in proptest::collection::vec(0.0..1e-5f64, 12),
        w in proptest::collection::vec(0.0..1e-3f64, 4),
        v_read in 0.1..2.0f64,
    ) {
        let arr = SynapseArray::new(4, 3, g.clone(), Nonlinearity::Polynomial(vec![0.0, 0.0, 1.0]), v_read).unwrap();
        let q = mac_pwm(&arr, &PwmVector::new(w.clone(), 1e-3).unwrap()).unwrap();
        for j in 0..3 {
            // Reverse-order sum, scaling applied at the end.
            let mut exact = 0.0;
            for i in (0..4).rev() {
                exact += g[i * 3 + j] * w[i];
            }
            exact *= v_read;
            prop_assert!((q[j] - exact).abs() <= 1e-12 * exact.abs().max(1e-300));
        }
    }

    #[test]
    fn ols_is_affine_equivariant(shift in -1e-3..1e-3f64, noise in proptest::collection::vec(-1e-6..1e-6f64, 8)) {
        let rows: Vec<(f64, f64)> = noise.iter().enumerate()
            .map(|(k, n)| (0.5 + 0.2 * k as f64, 1e-4 * (0.5 + 0.2 * k as f64) + 2e-3 + n))
            .collect();
        let shifted: Vec<(f64, f64)> = rows.iter().map(|&(v, t)| (v, t + shift)).collect();
        let a = fit_linear(&TonDataset::new(rows, TonMetadata::default()).unwrap()).unwrap();
        let b = fit_linear(&TonDataset::new(shifted, TonMetadata::default()).unwrap()).unwrap();
        prop_assert!((b.qth_offset_over_idn - a.qth_offset_over_idn - shift).abs() < 1e-15);
        prop_assert!((b.qth_slope_over_idn - a.qth_slope_over_idn).abs() < 1e-14);
        for (ra, rb) in a.residuals.iter().zip(&b.residuals) {
            prop_assert!((ra - rb).abs() < 1e-15);
        }
    }
}

#[test]
fn leaky_euler_tracks_exponential() {
    let tau = 1e-3;
    let p = PfDeviceParams {
        tau_leak: tau,
        ..Default::default()
    };
    let bias = BiasPoint::new(0.45, 1e6, 1.0);
    let dt = tau / 1000.0;
    let i_dn = 100e-12;
    let mut s = PfDeviceState::default();
    for k in 1..=10_000 {
        s = p.step(&s, &bias, dt).unwrap();
        let t = k as f64 * dt;
        let exact = i_dn * tau * (1.0 - (-t / tau).exp());
        assert!((s.q_n - exact).abs() <= 0.005 * exact, "t = {t}");
    }
    // Converged to I_Dn * tau.
    assert!((s.q_n - i_dn * tau).abs() <= 1e-3 * i_dn * tau);
}

#[test]
fn on_off_ratio_at_one_volt() {
    let p = PfDeviceParams::default();
    let bias = BiasPoint::new(0.45, 1.0, 1.0);
    let on = PfDeviceState {
        latched: true,
        ..Default::default()
    };
    let ratio = p.anode_current(&on, &bias, 10e-6)
        / p.anode_current(&PfDeviceState::default(), &bias, 10e-6);
    assert!(ratio >= 1e5);
}

#[test]
fn matched_params_reproduce_reference_widths() {
    let spec = SawtoothSpec::default();
    let pf = match_pf_params(&spec, &PfDeviceParams::default(), 0.45).unwrap();
    let clock = ClockSpec::default();
    let cfg = SimConfig::default();
    for k in 0..=30 {
        let v = -0.2 + 1.4 * k as f64 / 30.0;
        let e = encode(&pf, v, &clock, &cfg).unwrap();
        let got = e.t_on_or_max(clock.t_max());
        assert!(
            (got - encode_ref(&spec, v)).abs() <= 2.0 * cfg.t_tol,
            "v = {v}"
        );
    }
    let zero = encode(&pf, 0.0, &clock, &cfg).unwrap();
    assert_eq!(zero.t_on, Some(0.0));
    assert_eq!(encode_ref(&spec, 0.0), 0.0);
}

#[test]
fn single_layer_diagonal_preserves_order() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let n = 5;
    let mut g = vec![0.0; n * n];
    for i in 0..n {
        g[i * n + i] = 2e-6;
    }
    let arr = SynapseArray::new(n, n, g, Nonlinearity::None, 1.0).unwrap();
    let neuron = NeuronConfig::default();
    for _ in 0..10 {
        let input: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..10.0)).collect();
        let r = infer(std::slice::from_ref(&arr), &input, &neuron).unwrap();
        let widths = &r.widths[0];
        let out = r.output();
        for a in 0..n {
            for b in 0..n {
                if widths[a] < widths[b] {
                    assert!(out[a] < out[b]);
                }
                if input[a] < input[b] {
                    assert!(widths[a] <= widths[b]);
                }
            }
        }
    }
}

#[test]
fn two_layer_inference_matches_scalar_pipeline() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let mut layer = |rows: usize, cols: usize| {
        let g: Vec<f64> = (0..rows * cols).map(|_| rng.gen_range(0.0..5e-6)).collect();
        SynapseArray::new(rows, cols, g, Nonlinearity::None, 0.8).unwrap()
    };
    let layers = [layer(4, 4), layer(4, 2)];
    let input: Vec<f64> = (0..4).map(|_| rng.gen_range(0.0..10.0)).collect();
    let neuron = NeuronConfig::default();
    let got = infer(&layers, &input, &neuron).unwrap();

    // Scalar pipeline using the closed-form latch time instead of simulation.
    let t_max = 1e-3;
    let width = |v: f64| (10e-15 * v / 100e-12).clamp(0.0, t_max);
    let (v_lo, v_hi) = (0.0, 10.0);
    let mut volts = input.clone();
    let mut charges = Vec::new();
    for (k, arr) in layers.iter().enumerate() {
        if k > 0 {
            let mut q_full: f64 = 0.0;
            for j in 0..layers[k - 1].cols() {
                let mut col = 0.0;
                for i in 0..layers[k - 1].rows() {
                    col += layers[k - 1].g(i, j);
                }
                q_full = q_full.max(col * layers[k - 1].v_read * t_max);
            }
            volts = charges
                .iter()
                .map(|&q: &f64| (v_lo + q / q_full * (v_hi - v_lo)).clamp(v_lo, v_hi))
                .collect();
        }
        charges = (0..arr.cols())
            .map(|j| {
                let mut q = 0.0;
                for (i, &v) in volts.iter().enumerate() {
                    q += arr.g(i, j) * arr.v_read * width(v);
                }
                q
            })
            .collect();
    }
    // Widths agree to t_tol, i.e. 1e-6 relative at full scale.
    for (a, b) in got.output().iter().zip(&charges) {
        assert!((a - b).abs() <= 1e-5 * b.abs().max(1e-18), "{a} vs {b}");
    }
    assert_eq!(got.maps.len(), 1);
}

#[test]
fn calibration_noise_matches_brute_force_regression() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
    let rows: Vec<(f64, f64)> = (0..200)
        .map(|k| {
            let v = 0.5 + 1.5 * k as f64 / 199.0;
            let noise: f64 = rng.gen_range(-1.0..1.0) * 0.01 * 3f64.sqrt();
            (v, 100e-6 * v * (1.0 + noise))
        })
        .collect();
    // Normal equations from raw sums.
    let n = rows.len() as f64;
    let (sx, sy, sxx, sxy) = rows.iter().fold((0.0, 0.0, 0.0, 0.0), |acc, &(x, y)| {
        (acc.0 + x, acc.1 + y, acc.2 + x * x, acc.3 + x * y)
    });
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let fit = fit_linear(&TonDataset::new(rows, TonMetadata::default()).unwrap()).unwrap();
    assert!((fit.qth_slope_over_idn - slope).abs() <= 1e-9 * slope);
    assert!((fit.qth_slope_over_idn - 100e-6).abs() <= 0.02 * 100e-6);
}

#[test]
fn infinite_tau_candidate_equals_linear_fit() {
    let rows: Vec<(f64, f64)> = (0..10)
        .map(|k| (k as f64, 1e-5 * k as f64 + 1e-6))
        .collect();
    let d = TonDataset::new(rows, TonMetadata::default()).unwrap();
    assert_eq!(
        fit_at_tau(&d, f64::INFINITY).unwrap(),
        fit_linear(&d).unwrap()
    );
}
