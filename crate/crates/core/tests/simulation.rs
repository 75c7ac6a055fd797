//! Integration tests of the simulation engine against full scenarios.

use heatfair::coordination::{AllocationMode, Strategy};
use heatfair::engine::{run, write_result_dir, Summary};
use heatfair::error::Error;
use heatfair::scenario::{
    bundled_scenario, bundled_scenario_names, demo_units, BroadcastDropout, FeedbackMode,
    InitialState, PowerSchedule, Scenario, WeatherSource,
};
use heatfair::thermal::UnitState;
use heatfair::weather::SynthWeather;

fn constant_weather(t_ext_c: f64) -> WeatherSource {
    WeatherSource::Synth(SynthWeather {
        base_c: t_ext_c,
        amplitude_c: 0.0,
        period_h: 24.0,
        snap_depth_c: 0.0,
        snap_start_h: 0.0,
        snap_end_h: 0.0,
        duration_h: 241,
    })
}

#[test]
fn bundled_scenarios_run_and_satisfy_round_invariants() {
    for name in bundled_scenario_names() {
        let s = bundled_scenario(name).unwrap();
        let r = run(&s).unwrap();
        assert_eq!(r.grid_h.len(), 2401);
        assert_eq!(r.units.len(), 3);
        for rec in &r.rounds {
            assert!(rec.p_sat_kw >= 0.0);
            // Transparency below saturation.
            if rec.p_sat_kw == 0.0 {
                assert_eq!(rec.sum_p_kw, rec.sum_p_tilde_kw, "{name} at {} h", rec.t_h);
            }
        }
        assert!(
            r.metrics.total_discomfort_ch > 0.0,
            "{name} shows no deficit at all"
        );
    }
}

#[test]
fn deterministic_reruns_are_bit_identical() {
    let s = bundled_scenario("demo-price").unwrap();
    let a = run(&s).unwrap();
    let b = run(&s).unwrap();
    assert_eq!(a, b);
}

#[test]
fn unconstrained_supply_matches_isolated_units() {
    // With the limit out of reach every unit behaves as if it were alone on
    // the network.
    let mut joint = bundled_scenario("demo-flat").unwrap();
    joint.p_max = PowerSchedule::Constant(1e9);
    let joint_result = run(&joint).unwrap();

    for (i, unit) in joint.units.iter().enumerate() {
        let single = Scenario {
            name: None,
            units: vec![unit.clone()],
            strategy: Strategy::Flat,
            ..joint.clone()
        };
        let single_result = run(&single).unwrap();
        for (a, b) in joint_result.units[i]
            .t_in_c
            .iter()
            .zip(&single_result.units[0].t_in_c)
        {
            assert!((a - b).abs() <= 1e-12);
        }
    }
    // And nobody is ever denied anything.
    for rec in &joint_result.rounds {
        assert_eq!(rec.p_sat_kw, 0.0);
        assert_eq!(rec.sum_p_kw, rec.sum_p_tilde_kw);
    }
}

#[test]
fn redistribute_mode_respects_the_supply_limit() {
    // The stiff table1 set clamps heavily around the snap edges; in
    // redistribute mode the delivered total must still respect the limit.
    let mut s = bundled_scenario("table1-flat").unwrap();
    s.allocation_mode = AllocationMode::Redistribute;
    let r = run(&s).unwrap();
    let p_max = match s.p_max {
        PowerSchedule::Constant(v) => v,
        _ => unreachable!(),
    };
    let mut saturated_rounds = 0;
    for rec in &r.rounds {
        if rec.p_sat_kw > 0.0 {
            saturated_rounds += 1;
            assert!(
                rec.sum_p_kw <= p_max + 1e-9,
                "delivered {} above limit {p_max} at {} h",
                rec.sum_p_kw,
                rec.t_h
            );
        }
    }
    assert!(saturated_rounds > 100);
}

#[test]
fn clamp_mode_logs_allocation_clamps() {
    let s = bundled_scenario("table1-skewed").unwrap();
    let r = run(&s).unwrap();
    // The snap-edge request spikes exceed the carrier's own request, so the
    // last unit gets clamped at zero and the events are counted.
    assert!(r.metrics.allocation_clamps[2] > 0);
    assert_eq!(r.metrics.allocation_clamps[0], 0);
    assert_eq!(r.metrics.allocation_clamps[1], 0);
}

#[test]
fn skewed_concentrates_on_the_last_unit() {
    let s = bundled_scenario("demo-skewed").unwrap();
    let r = run(&s).unwrap();
    let m = &r.metrics;
    // Unit 3 bears essentially everything; the others stay near comfort.
    assert!(m.discomfort_ch[2] / m.total_discomfort_ch > 0.9);
    assert!(m.max_deviation_c[0] < 0.05);
    assert!(m.max_deviation_c[1] < 0.05);
    assert!(m.max_deviation_c[2] > 0.5);
}

#[test]
fn grid_refinement_on_stiff_units_stays_bounded() {
    // The stiff table1 controllers react to each weather resampling with
    // request transients of tens of kW, so halving the round spacing shifts
    // their trajectories at the 1e-2 degC level (the gentle demo family is
    // held to 1e-3 in the acceptance suite). Guard the stiff family against
    // regressions beyond that documented scale.
    for name in ["table1-skewed", "table1-price"] {
        let s = bundled_scenario(name).unwrap();
        let mut half = s.clone();
        half.coordination_interval_s = s.coordination_interval_s / 2.0;
        let a = run(&s).unwrap();
        let b = run(&half).unwrap();
        let mut worst = 0.0f64;
        for (ua, ub) in a.units.iter().zip(&b.units) {
            for (x, y) in ua.t_in_c.iter().zip(&ub.t_in_c) {
                worst = worst.max((x - y).abs());
            }
        }
        assert!(worst < 0.05, "{name}: {worst}");
    }
}

#[test]
fn sampled_feedback_mode_tracks_the_continuous_mode() {
    let s = bundled_scenario("demo-gain").unwrap();
    let mut sampled = s.clone();
    sampled.feedback_mode = FeedbackMode::Sampled;
    let a = run(&s).unwrap();
    let b = run(&sampled).unwrap();
    // Holding the allocated load across each 30 s interval is a small
    // perturbation of the continuous loop at this time scale.
    let rel = (a.metrics.total_discomfort_ch - b.metrics.total_discomfort_ch).abs()
        / a.metrics.total_discomfort_ch;
    assert!(rel < 0.05, "sampled mode diverges: {rel}");
    for (x, y) in a.units[2].t_in_c.iter().zip(&b.units[2].t_in_c) {
        assert!((x - y).abs() < 0.05);
    }
}

#[test]
fn broadcast_dropout_shifts_only_the_affected_window() {
    let s = bundled_scenario("demo-gain").unwrap();
    let baseline = run(&s).unwrap();

    // Find a round well inside the deficit episode.
    let first_deficit = baseline
        .rounds
        .iter()
        .position(|r| r.p_sat_kw > 0.0)
        .expect("scenario has a deficit episode");
    let start = first_deficit as u64 + 1200; // an hour into the episode
    let mut dropped = s.clone();
    dropped.broadcast_dropout = Some(BroadcastDropout {
        unit: 2,
        first_round: start,
        rounds: 600,
    });
    let r = run(&dropped).unwrap();

    // Identical before the dropout window, different after it starts.
    let start_h = baseline.rounds[start as usize].t_h;
    let mut diverged = false;
    for (j, t) in baseline.grid_h.iter().enumerate() {
        let d = (baseline.units[2].t_in_c[j] - r.units[2].t_in_c[j]).abs();
        if *t < start_h - 1e-9 {
            assert_eq!(d, 0.0, "diverged before the dropout at {t} h");
        } else if d > 1e-6 {
            diverged = true;
        }
    }
    assert!(diverged, "dropout had no effect");
    // The stale deficit is smaller than the live one, so the unit sheds less
    // and stays warmer through the window.
    let j_mid = baseline
        .grid_h
        .iter()
        .position(|t| *t >= start_h + 2.0)
        .unwrap();
    assert!(r.units[2].t_in_c[j_mid] > baseline.units[2].t_in_c[j_mid]);
}

#[test]
fn explicit_initial_state_and_weights() {
    let mut s = bundled_scenario("demo-flat").unwrap();
    s.strategy = Strategy::Explicit {
        weights: vec![0.5, 0.25, 0.25],
    };
    s.initial_state = InitialState::Explicit(vec![
        UnitState {
            t_in_c: 18.0,
            t_hs_c: 30.0,
        },
        UnitState {
            t_in_c: 19.0,
            t_hs_c: 31.0,
        },
        UnitState {
            t_in_c: 20.0,
            t_hs_c: 32.0,
        },
    ]);
    let r = run(&s).unwrap();
    assert_eq!(r.weights, vec![0.5, 0.25, 0.25]);
    assert_eq!(r.units[0].t_in_c[0], 18.0);
    assert_eq!(r.units[1].t_hs_c[0], 31.0);
    // The cold start recovers towards comfort.
    assert!(r.units[0].t_in_c[30] > 18.0);
}

#[test]
fn weather_must_cover_the_horizon() {
    let mut s = bundled_scenario("demo-flat").unwrap();
    s.t_end_h = 400.0; // weather ends at 240 h
    let err = run(&s).unwrap_err();
    assert!(matches!(err, Error::WeatherRange { .. }), "{err}");
}

#[test]
fn output_grid_decouples_from_rounds() {
    let mut s = bundled_scenario("demo-gain").unwrap();
    s.t_end_h = 10.0;
    s.output_interval_h = 0.25;
    let coarse = run(&s).unwrap();
    assert_eq!(coarse.grid_h.len(), 41);

    // A grid finer than the coordination interval samples inside intervals.
    s.output_interval_h = 1.0 / 3600.0; // one second
    s.t_end_h = 0.01;
    let fine = run(&s).unwrap();
    assert_eq!(fine.grid_h.len(), 37);
    for w in fine.units[0].t_hs_c.windows(2) {
        assert!(w[0].is_finite() && w[1].is_finite());
    }
}

#[test]
fn result_emission_round_trips() {
    let mut s = bundled_scenario("demo-price").unwrap();
    s.t_end_h = 24.0;
    let r = run(&s).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_result_dir(&r, dir.path()).unwrap();

    for id in ["house-a", "house-b", "house-c"] {
        let text = std::fs::read_to_string(dir.path().join(format!("series_{id}.csv"))).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t_h,T_in_C,T_hs_C,P_tilde_kW,P_kW");
        assert_eq!(lines.count(), r.grid_h.len());
    }
    let rounds = std::fs::read_to_string(dir.path().join("rounds.csv")).unwrap();
    let mut lines = rounds.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t_h,P_sat_kW,sum_P_tilde_kW,sum_P_kW"
    );
    assert_eq!(lines.count(), r.rounds.len());

    let summary: Summary =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary, Summary::of(&r));
}

#[test]
fn p_max_schedule_drives_the_deficit() {
    // Constant weather, supply dip in the middle third: the deficit episode
    // must coincide with the dip.
    let mut s = bundled_scenario("demo-gain").unwrap();
    s.weather = constant_weather(-10.0);
    s.t_end_h = 120.0;
    s.p_max = PowerSchedule::Steps(vec![
        heatfair::scenario::PowerStep {
            from_h: 0.0,
            p_max_kw: 1e6,
        },
        heatfair::scenario::PowerStep {
            from_h: 40.0,
            p_max_kw: 4.8,
        },
        heatfair::scenario::PowerStep {
            from_h: 80.0,
            p_max_kw: 1e6,
        },
    ]);
    let r = run(&s).unwrap();
    for rec in &r.rounds {
        if rec.t_h < 40.0 - 1e-9 || rec.t_h >= 80.0 {
            assert_eq!(rec.p_sat_kw, 0.0, "unexpected deficit at {} h", rec.t_h);
        }
    }
    let deficits = r.rounds.iter().filter(|rec| rec.p_sat_kw > 0.0).count();
    assert!(
        deficits > 1000,
        "dip produced only {deficits} deficit rounds"
    );
}

#[test]
fn negated_a1_flips_the_weighting_terms() {
    // With the as-printed positive slopes the gain terms are negative; the
    // sign switch makes them positive. Both are valid weight vectors.
    let mut s = bundled_scenario("demo-flat").unwrap();
    s.units = heatfair::scenario::table1_units();
    s.strategy = Strategy::GainProportional;
    s.t_end_h = 1.0;
    let as_given = run(&s).unwrap();
    s.a1_sign = heatfair::scenario::A1Sign::Negated;
    let negated = run(&s).unwrap();
    assert!((as_given.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!((negated.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!(as_given.weights != negated.weights);
    let expected = [54.0 / 303.0, 73.0 / 303.0, 176.0 / 303.0];
    for (w, e) in as_given.weights.iter().zip(expected) {
        assert!((w - e).abs() < 1e-12);
    }
}

#[test]
fn nonsense_scenarios_are_rejected() {
    let mut s = bundled_scenario("demo-flat").unwrap();
    s.coordination_interval_s = 0.0;
    assert!(run(&s).is_err());

    let mut s = bundled_scenario("demo-flat").unwrap();
    s.units[0].k_p = -1.0;
    assert!(run(&s).is_err());

    let mut s = bundled_scenario("demo-flat").unwrap();
    s.strategy = Strategy::Explicit {
        weights: vec![0.9, 0.2, 0.2],
    };
    assert!(run(&s).is_err());
}

#[test]
fn warm_weather_initial_state_falls_back_to_rest() {
    let mut s = bundled_scenario("demo-flat").unwrap();
    // Warmer outside than any driveable stationary point: the controller
    // would be clamped, so units start at the isothermal rest state.
    s.weather = constant_weather(35.0);
    s.t_end_h = 2.0;
    let r = run(&s).unwrap();
    assert_eq!(r.units[0].t_in_c[0], 35.0);
    assert_eq!(r.units[0].t_hs_c[0], 35.0);
    // Nothing to heat: requests stay clamped at zero.
    assert!(r.rounds.iter().all(|rec| rec.sum_p_tilde_kw == 0.0));
    assert!(r.metrics.control_clamps.iter().all(|c| *c > 0));
}

#[test]
fn compare_identical_results_give_identical_rows() {
    let mut s = bundled_scenario("demo-gain").unwrap();
    s.t_end_h = 24.0;
    let r = run(&s).unwrap();
    let report = heatfair::metrics::compare(&[
        ("first".to_string(), &r),
        ("second".to_string(), &r),
    ])
    .unwrap();
    assert_eq!(report.rows[0].discomfort_ch, report.rows[1].discomfort_ch);
    assert_eq!(
        report.rows[0].total_consumption_mwh,
        report.rows[1].total_consumption_mwh
    );
    assert_eq!(report.rows[0].discomfort_share, report.rows[1].discomfort_share);
}

#[test]
fn compare_rejects_mismatched_results() {
    let mut s = bundled_scenario("demo-gain").unwrap();
    s.t_end_h = 24.0;
    let r = run(&s).unwrap();

    let mut fewer = s.clone();
    fewer.units.pop();
    fewer.strategy = Strategy::Flat;
    let r_fewer = run(&fewer).unwrap();
    assert!(heatfair::metrics::compare(&[
        ("a".to_string(), &r),
        ("b".to_string(), &r_fewer),
    ])
    .is_err());

    let mut shorter = s.clone();
    shorter.t_end_h = 12.0;
    let r_shorter = run(&shorter).unwrap();
    assert!(heatfair::metrics::compare(&[
        ("a".to_string(), &r),
        ("b".to_string(), &r_shorter),
    ])
    .is_err());
}

#[test]
fn demo_units_are_well_tuned() {
    for u in demo_units() {
        let res = heatfair::control::well_tuned_residual(&u);
        assert!(res.abs() < 1e-9, "{}: {res}", u.unit_id);
    }
}
