mod support;

use voltvar_core::admm::InitScheme;
use voltvar_core::metrics::deviation;
use voltvar_core::oracle::{solve_centralized, DEFAULT_TOL};
use voltvar_core::simulator::{hybrid_run, run, Algorithm, RunConfig};
use voltvar_core::units::Line;
use voltvar_core::{dual_ascent, ControlVector, Error};

use support::case;

fn oracle(id: u32, voltage: bool) -> ControlVector {
    solve_centralized(&case(id, 0), voltage, DEFAULT_TOL).unwrap().control
}

#[test]
fn full_and_flow_only_variants_agree_when_voltages_are_slack() {
    for id in 1..=5 {
        let f = case(id, 0);
        let mut full = RunConfig::new(Algorithm::Admm).with_init(InitScheme::LocalPolicy);
        full.stop_tol = 1e-12;
        let mut nov = RunConfig::new(Algorithm::AdmmNov);
        nov.stop_tol = 1e-12;
        let a = run(&f, &full, None).unwrap().control;
        let b = run(&f, &nov, None).unwrap().control;
        let d = deviation(&a, &b).unwrap();
        assert!(d <= 1e-3, "case {id}: {d}");
    }
}

#[test]
fn dual_ascent_fixed_point_is_the_relaxed_optimum() {
    for id in [3, 4] {
        let o = oracle(id, false);
        let mut cfg = RunConfig::new(Algorithm::DualAscent);
        cfg.max_iters = 20_000;
        cfg.stop_tol = 1e-9;
        let out = run(&case(id, 0), &cfg, Some(&o)).unwrap();
        assert!(out.converged, "case {id}");
        assert!(deviation(&out.control, &o).unwrap() <= 1e-3, "case {id}");
    }
}

#[test]
fn oversized_dual_step_trips_the_divergence_guard() {
    let diverged = (1..=7).any(|id| {
        let f = case(id, 0);
        let mut cfg = RunConfig::new(Algorithm::DualAscent);
        cfg.alpha = Some(10.0 * dual_ascent::default_alpha(&Line::new(&f)));
        cfg.max_iters = 20_000;
        matches!(run(&f, &cfg, None), Err(Error::Diverged { .. }))
    });
    assert!(diverged);
}

#[test]
fn message_counts_follow_the_schedules() {
    let f = case(2, 0);
    let n = f.len();
    let mut cfg = RunConfig::new(Algorithm::Admm);
    cfg.max_iters = 7;
    cfg.stop_tol = 1e-300;
    let out = run(&f, &cfg, None).unwrap();
    assert_eq!(out.iterations, 7);
    assert_eq!(out.messages, 7 * 2 * (n - 1));

    let mut cfg = RunConfig::new(Algorithm::DualAscent);
    cfg.max_iters = 7;
    cfg.stop_tol = 1e-300;
    let out = run(&f, &cfg, None).unwrap();
    assert_eq!(out.messages, 7 * 2 * n);
}

#[test]
fn deviation_falls_tenfold_on_cases_one_to_five() {
    for id in 1..=5 {
        let f = case(id, 0);
        for (alg, voltage) in [(Algorithm::Admm, true), (Algorithm::AdmmNov, false), (Algorithm::DualAscent, false)] {
            let o = oracle(id, voltage);
            let mut cfg = RunConfig::new(alg);
            if alg == Algorithm::DualAscent {
                cfg.max_iters = 60_000;
            }
            let out = run(&f, &cfg, Some(&o)).unwrap();
            let first = out.trace.rows[0].d_k.unwrap();
            let last = out.trace.last().unwrap().d_k.unwrap();
            assert!(last * 10.0 <= first || last <= 1e-9, "case {id} {alg:?}: {first} -> {last}");
        }
    }
}

#[test]
fn hybrid_warm_up_reaches_the_optimum() {
    let f = case(1, 0);
    let o = oracle(1, true);
    let mut cfg = RunConfig::new(Algorithm::Admm).with_init(InitScheme::NoOpt);
    cfg.stop_tol = 1e-12;
    let out = hybrid_run(&f, 50, &cfg, Some(&o)).unwrap();
    assert!(deviation(&out.control, &o).unwrap() <= 1e-3);
    assert!(out.trace.rows.windows(2).all(|w| w[0].k < w[1].k));
}

#[test]
fn no_control_deviation_is_the_mean_optimal_injection() {
    let f = case(1, 0);
    let o = oracle(1, true);
    let out = run(&f, &RunConfig::new(Algorithm::None), Some(&o)).unwrap();
    let mean = o.q_g.iter().map(|q| q.abs()).sum::<f64>() / o.len() as f64 / 1e3;
    let d = out.trace.rows[0].d_k.unwrap();
    assert!((d - mean).abs() <= 1e-12 * mean.max(1.0));
}

#[test]
fn dual_ascent_rejects_warm_starts() {
    let cfg = RunConfig::new(Algorithm::DualAscent).with_init(InitScheme::LocalPolicy);
    assert!(matches!(run(&case(1, 0), &cfg, None), Err(Error::InvalidConfig(_))));
}

#[test]
fn oracle_length_is_checked() {
    let bad = ControlVector::zeros(3);
    assert!(run(&case(1, 0), &RunConfig::new(Algorithm::Admm), Some(&bad)).is_err());
}
