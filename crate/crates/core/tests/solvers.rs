use irs_wpcn::sca::{
    baseline_no_irs, baseline_random_phases, round_association, solve_general, solve_general_sweep, solve_hybrid,
    solve_static, solve_user_adaptive, ScaOptions,
};
use irs_wpcn::scenario::{generate_scenario, Scenario, SystemConfig};
use irs_wpcn::sdr::{gaussian_randomize, solve_relaxed};

fn scenario(n: usize, k: usize, seed: u64) -> Scenario {
    let mut cfg = SystemConfig::desk();
    cfg.num_elements = n;
    cfg.num_devices = k;
    cfg.seed = seed;
    generate_scenario(&cfg).unwrap()
}

fn opts() -> ScaOptions {
    ScaOptions {
        restarts: 3,
        ..ScaOptions::default()
    }
}

#[test]
fn every_scheme_returns_a_feasible_design() {
    let s = scenario(8, 3, 7);
    let o = opts();
    let sols = vec![
        solve_static(&s, &o).unwrap(),
        solve_user_adaptive(&s, &o).unwrap(),
        solve_hybrid(&s, 2, &o).unwrap(),
        solve_general(&s, 2, &o).unwrap(),
        baseline_random_phases(&s, 5).unwrap(),
    ];
    for sol in &sols {
        let r = sol.verify(&s, 1e-9).unwrap();
        assert!((r - sol.throughput).abs() <= 1e-9 * r);
        for t in sol.diagnostics.trace.windows(2) {
            assert!(t[1] >= t[0] - 1e-9);
        }
    }
    let plain = s.without_irs();
    let none = baseline_no_irs(&s).unwrap();
    none.verify(&plain, 1e-9).unwrap();
}

#[test]
fn scheme_ordering_holds() {
    let o = opts();
    for seed in 0..3 {
        let s = scenario(8, 3, seed);
        let st = solve_static(&s, &o).unwrap();
        let ua = solve_user_adaptive(&s, &o).unwrap();
        let none = baseline_no_irs(&s).unwrap();
        assert!(ua.throughput >= st.throughput - 1e-9);
        assert!(st.throughput >= none.throughput - 1e-9);
        let ub = solve_relaxed(&s, 1e-9).unwrap();
        assert!(ub.bound >= ua.throughput);
        let rnd = gaussian_randomize(&ub.lifted, &s, 30).unwrap();
        assert!(rnd.throughput <= ub.bound);
    }
}

#[test]
fn rounding_never_loses_throughput() {
    let o = opts();
    for seed in 0..3 {
        let s = scenario(6, 3, seed);
        for sol in solve_general_sweep(&s, 3, &o).unwrap() {
            let r = round_association(&sol, &s).unwrap();
            assert!(r.throughput >= sol.throughput * (1.0 - 1e-9));
            r.verify(&s, 1e-9).unwrap();
        }
    }
}

#[test]
fn hybrid_rejects_more_vectors_than_devices() {
    let s = scenario(4, 2, 0);
    assert!(solve_hybrid(&s, 3, &opts()).is_err());
}

#[test]
fn results_are_reproducible() {
    let s = scenario(6, 2, 9);
    let a = solve_general(&s, 1, &opts()).unwrap();
    let b = solve_general(&s, 1, &opts()).unwrap();
    assert_eq!(a.throughput, b.throughput);
    assert_eq!(a.plan, b.plan);
}
