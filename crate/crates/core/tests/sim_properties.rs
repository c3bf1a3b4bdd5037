use modkit_core::converter::{ideal_bridge_voltages, switching_functions, Grid, PhaseShiftTuple, SampledTrace};
use modkit_core::metrics::{DcLink, Oracle, PerformanceEvaluator};
use modkit_core::sim::{
    average_power, energy_balance, second_order_residuals, simulate_full, steady_state_current, CircuitParams,
    LoadModel,
};
use proptest::prelude::*;

fn tuple_strategy() -> impl Strategy<Value = PhaseShiftTuple> {
    (0.0..=1.0f64, 0.0..=1.0f64, 0.0..=1.0f64).prop_map(|(a, b, c)| PhaseShiftTuple::new(a, b, c).unwrap())
}

fn rms(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn steady_state_is_periodic_and_half_wave_antisymmetric(
        t in tuple_strategy(),
        v2 in 100.0..250.0f64,
        r in 0.0..0.5f64,
    ) {
        let c = CircuitParams { resistance: r, ..CircuitParams::default() };
        let g = c.grid(200).unwrap();
        let (vp, vs) = ideal_bridge_voltages(&t, 200.0, v2, g).unwrap();
        let i = steady_state_current(&c, &vp, &vs).unwrap();
        let vals = i.values();
        let peak = vals.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        // one more exact step closes the period
        let last = vals.len() - 1;
        let drive = vp.values()[last] - vs.values()[last];
        let a = r * g.dt() / c.inductance;
        let phi = if a > 0.0 { -(-a).exp_m1() / a } else { 1.0 };
        let closing = vals[last] * (-a).exp() + drive * g.dt() / c.inductance * phi;
        prop_assert!((closing - vals[0]).abs() <= 1e-9 * (1.0 + peak));
        let half = vals.len() / 2;
        for k in 0..half {
            prop_assert!((vals[k + half] + vals[k]).abs() <= 1e-6 * (1.0 + peak));
        }
    }

    #[test]
    fn stress_is_shift_invariant_and_scales_linearly(t in tuple_strategy(), shift in 0usize..200, scale in 0.1..5.0f64) {
        let c = CircuitParams::default();
        let g = c.grid(200).unwrap();
        let (vp, vs) = ideal_bridge_voltages(&t, 200.0, 160.0, g).unwrap();
        let i = steady_state_current(&c, &vp, &vs).unwrap();
        let s0 = modkit_core::metrics::current_stress(&i).unwrap();
        let s1 = modkit_core::metrics::current_stress(&i.rotate(shift)).unwrap();
        let s2 = modkit_core::metrics::current_stress(&i.map(|x| scale * x)).unwrap();
        prop_assert_eq!(s0, s1);
        prop_assert!((s2 - scale * s0).abs() <= 1e-12 * (1.0 + s2));
    }

    #[test]
    fn conduction_loss_scales_with_r_on_and_amplitude_squared(t in tuple_strategy(), r_on in 0.001..1.0f64, scale in 0.1..5.0f64) {
        use modkit_core::metrics::conduction_loss;
        let c = CircuitParams { r_on, ..CircuitParams::default() };
        let g = c.grid(200).unwrap();
        let (vp, vs) = ideal_bridge_voltages(&t, 200.0, 160.0, g).unwrap();
        let (sp, ss) = switching_functions(&t, g);
        let i = steady_state_current(&c, &vp, &vs).unwrap();
        let base = conduction_loss(&i, &sp, &ss, &c).unwrap();
        let doubled = conduction_loss(&i, &sp, &ss, &CircuitParams { r_on: 2.0 * r_on, ..c }).unwrap();
        let scaled = conduction_loss(&i.map(|x| scale * x), &sp, &ss, &c).unwrap();
        prop_assert!((doubled - 2.0 * base).abs() <= 1e-12 * (1.0 + doubled));
        prop_assert!((scaled - scale * scale * base).abs() <= 1e-10 * (1.0 + scaled));
    }

    #[test]
    fn zvs_flags_follow_a_circular_shift(shift in 0usize..200) {
        use modkit_core::metrics::soft_switching_check;
        let c = CircuitParams::default();
        let g = c.grid(200).unwrap();
        let t = PhaseShiftTuple::new(0.2, 0.3, 0.1).unwrap();
        let (vp, vs) = ideal_bridge_voltages(&t, 200.0, 180.0, g).unwrap();
        let i = steady_state_current(&c, &vp, &vs).unwrap();
        let comm = t.commutations(g.period);
        let moved: Vec<_> = comm
            .iter()
            .map(|x| {
                let k = g.index_of(x.time).unwrap();
                let mut y = *x;
                y.time = g.time((k + g.len() - shift) % g.len());
                y
            })
            .collect();
        let a = soft_switching_check(&i, &comm).unwrap();
        let b = soft_switching_check(&i.rotate(shift), &moved).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert_eq!(x.zvs, y.zvs);
            prop_assert_eq!(x.margin, y.margin);
        }
    }
}

#[test]
fn sps_power_matches_closed_form_over_the_outer_shift_range() {
    let c = CircuitParams {
        resistance: 0.0,
        inductance: 40e-6,
        ..CircuitParams::default()
    };
    let g = c.grid(200).unwrap();
    for j in 1..=9 {
        let d = 0.05 * j as f64;
        let t = PhaseShiftTuple::new(0.0, d, 0.0).unwrap();
        let (vp, vs) = ideal_bridge_voltages(&t, 200.0, 160.0, g).unwrap();
        let i = steady_state_current(&c, &vp, &vs).unwrap();
        let trace = modkit_core::sim::StateTrace {
            i_l: i,
            v_c1: SampledTrace::new(g, vec![200.0; 200]).unwrap(),
            v_c2: SampledTrace::new(g, vec![160.0; 200]).unwrap(),
            v_p: vp,
            v_s: vs,
        };
        let p = average_power(&trace, 1.0);
        let expected = c.sps_power(200.0, 160.0, d);
        assert!((p - expected).abs() <= 1e-3 * expected, "D={d}: {p} vs {expected}");
    }
}

#[test]
fn stiff_capacitors_reproduce_the_closed_form_current() {
    let c = CircuitParams {
        c1: 1e3,
        c2: 1e3,
        ..CircuitParams::default()
    };
    let load = LoadModel {
        source_resistance: 0.0,
        ..LoadModel::default()
    };
    let g = c.grid(200).unwrap();
    for t in [(0.0, 0.2, 0.0), (0.1, 0.3, 0.2), (0.35, 0.15, 0.05)] {
        let t = PhaseShiftTuple::new(t.0, t.1, t.2).unwrap();
        let sim = simulate_full(&c, &load, &t, g, 50, 1e-8).unwrap();
        let v2 = sim.trace.v_c2.values();
        let v2_mean = sim.trace.v_c2.mean();
        assert!(v2.iter().all(|v| (v - v2_mean).abs() <= 1e-6 * v2_mean));
        assert!(sim.trace.v_c1.values().iter().all(|v| *v == 200.0));
        let closed = steady_state_current(&c, &sim.trace.v_p, &sim.trace.v_s).unwrap();
        let diff: Vec<f64> = closed.values().iter().zip(sim.trace.i_l.values()).map(|(a, b)| a - b).collect();
        assert!(rms(&diff) <= 1e-4 * rms(closed.values()));
    }
}

#[test]
fn converged_trajectory_balances_energy() {
    let c = CircuitParams::default();
    let load = LoadModel::default();
    let g = c.grid(200).unwrap();
    for t in [(0.0, 0.25, 0.0), (0.2, 0.3, 0.1)] {
        let t = PhaseShiftTuple::new(t.0, t.1, t.2).unwrap();
        let sim = simulate_full(&c, &load, &t, g, 50, 1e-8).unwrap();
        let e = energy_balance(&sim.trace, &c, &load);
        let rhs = e.load + e.inductor;
        assert!((e.source - rhs).abs() <= 5e-3 * e.source, "{e:?}");
    }
}

#[test]
fn second_order_residual_shrinks_quadratically() {
    let c = CircuitParams {
        c1: 20e-6,
        c2: 20e-6,
        ..CircuitParams::default()
    };
    let load = LoadModel {
        source_resistance: 0.5,
        load_resistance: 20.0,
        ..LoadModel::default()
    };
    let t = PhaseShiftTuple::new(0.2, 0.3, 0.1).unwrap();
    let res = |k: usize| {
        let g = c.grid(k).unwrap();
        let sim = simulate_full(&c, &load, &t, g, 50, 1e-10).unwrap();
        let (r1, r2) = second_order_residuals(&sim.trace, &c, &load, &t).unwrap();
        (rms(&r1), rms(&r2))
    };
    let (a1, a2) = res(200);
    let (b1, b2) = res(400);
    assert!(a1 / b1 >= 3.5, "{a1} / {b1}");
    assert!(a2 / b2 >= 3.5, "{a2} / {b2}");
}

#[test]
fn reversing_the_outer_shift_reverses_power() {
    // A secondary lagging by -D equals one leading by 1 - D with the bridge
    // output negated (half-wave antisymmetry). Winding loss breaks the
    // symmetry by twice the loss, so R_L is halved to keep that under 0.5 %.
    let c = CircuitParams {
        resistance: 0.05,
        ..CircuitParams::default()
    };
    let g: Grid = c.grid(200).unwrap();
    for d in [0.1, 0.25, 0.4] {
        let fwd = PhaseShiftTuple::new(0.1, d, 0.1).unwrap();
        let back = PhaseShiftTuple::new(0.1, 1.0 - d, 0.1).unwrap();
        let (vp, vs) = ideal_bridge_voltages(&fwd, 200.0, 200.0, g).unwrap();
        let (_, vs_back) = ideal_bridge_voltages(&back, 200.0, 200.0, g).unwrap();
        let vs_back = vs_back.map(|v| -v);
        let i_f = steady_state_current(&c, &vp, &vs).unwrap();
        let i_b = steady_state_current(&c, &vp, &vs_back).unwrap();
        let mk = |i, v_s| modkit_core::sim::StateTrace {
            i_l: i,
            v_c1: SampledTrace::new(g, vec![200.0; 200]).unwrap(),
            v_c2: SampledTrace::new(g, vec![200.0; 200]).unwrap(),
            v_p: vp.clone(),
            v_s,
        };
        let pf = average_power(&mk(i_f, vs), 1.0);
        let pb = average_power(&mk(i_b, vs_back), 1.0);
        assert!((pf + pb).abs() <= 5e-3 * pf.abs(), "D={d}: {pf} vs {pb}");
    }
}

#[test]
fn oracle_reports_are_bitwise_repeatable_and_bounded() {
    let c = CircuitParams::default();
    let link = DcLink { v1: 200.0, v2: 170.0 };
    let mut n = 0;
    for a in 0..5 {
        for b in 0..5 {
            for d in 0..4 {
                let t = PhaseShiftTuple::new(0.2 * a as f64, 0.05 + 0.1 * b as f64, 0.3 * d as f64).unwrap();
                let r = Oracle.evaluate(&c, link, &t).unwrap();
                assert_eq!(r, Oracle.evaluate(&c, link, &t).unwrap());
                assert!(r.efficiency_proxy > 0.0 && r.efficiency_proxy <= 1.0);
                assert!(r.current_stress >= 0.0 && r.conduction_loss >= 0.0);
                n += 1;
            }
        }
    }
    assert_eq!(n, 100);
}

#[test]
fn zero_outer_shift_at_matched_voltages_is_idle() {
    let c = CircuitParams::default();
    let t = PhaseShiftTuple::new(0.0, 0.0, 0.0).unwrap();
    let r = Oracle.evaluate(&c, DcLink { v1: 200.0, v2: 200.0 }, &t).unwrap();
    assert_eq!(r.average_power, 0.0);
    assert_eq!(r.current_stress, 0.0);
    assert_eq!(r.efficiency_proxy, 1.0);
}
