//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any failure.
//!
//! The oracles here (grid search, exact surrogate targets, the two-term
//! inequality) are written out independently of the library code they check.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use irs_wpcn::allocation::{allocate, EffectiveRates};
use irs_wpcn::plan::Solution;
use irs_wpcn::sca::{
    baseline_no_irs, baseline_random_phases, round_association, solve_general_sweep, solve_general_warm,
    solve_hybrid_warm, solve_static, solve_ul_adaptive_warm, solve_user_adaptive_warm, ScaOptions,
};
use irs_wpcn::scenario::{generate_scenario, Scenario, SystemConfig};
use irs_wpcn::sdr::{gaussian_randomize, solve_relaxed};
use irs_wpcn::surrogates::{DlEnergySurrogate, ExpProductSurrogate, QuarticSurrogate};
use irs_wpcn_experiments::spec::{Axis, ExperimentSpec, Profile, Scheme};
use irs_wpcn_experiments::sweep::{collect_rows, summarize, ResultRow, SummaryRow};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEEDS: u64 = 20;

type Outcome = (bool, String);

fn instance(n: usize, k: usize, seed: u64) -> Scenario {
    let mut cfg = SystemConfig::desk();
    cfg.num_elements = n;
    cfg.num_devices = k;
    cfg.seed = seed;
    generate_scenario(&cfg).expect("valid desk config")
}

fn opts() -> ScaOptions {
    ScaOptions::default()
}

struct Suite {
    stat: Solution,
    ua: Solution,
    ul: Solution,
    hybrid: Solution,
    general: Solution,
}

fn default_suite() -> (Vec<Suite>, f64) {
    let o = opts();
    let mut out = Vec::new();
    let mut secs = 0.0;
    for seed in 1..=SEEDS {
        let s = instance(16, 4, seed);
        let start = Instant::now();
        let stat = solve_static(&s, &o).unwrap();
        let ua = solve_user_adaptive_warm(&s, &o, &stat.plan.v0).unwrap();
        secs += start.elapsed().as_secs_f64();
        let ul = solve_ul_adaptive_warm(&s, &o, &stat.plan.v0).unwrap();
        let hybrid = solve_hybrid_warm(&s, 2, &o, &stat.plan.v0).unwrap();
        let general = solve_general_warm(&s, 2, &o, &stat).unwrap();
        out.push(Suite {
            stat,
            ua,
            ul,
            hybrid,
            general,
        });
    }
    (out, secs)
}

fn c1_ordering(suite: &[Suite], secs: f64) -> Outcome {
    let worst = suite.iter().map(|r| r.ua.throughput - r.stat.throughput).fold(f64::INFINITY, f64::min);
    (worst >= -1e-4 && secs < 300.0, format!("min(UA - static) = {worst:.2e} bits/Hz, {secs:.1} s"))
}

fn c2_ul_equality(suite: &[Suite]) -> Outcome {
    let agree = suite
        .iter()
        .filter(|r| (r.ul.throughput - r.stat.throughput).abs() <= 0.01 * r.stat.throughput)
        .count();
    (agree >= 18, format!("{agree}/{} instances within 1%", suite.len()))
}

/// `(general(K), UA, general(K + 2), general(K) before/after rounding)`.
fn association_runs() -> Vec<(f64, f64, f64, f64, f64)> {
    let o = opts();
    (1..=SEEDS)
        .map(|seed| {
            let s = instance(8, 2, seed);
            let stat = solve_static(&s, &o).unwrap();
            let ua = solve_user_adaptive_warm(&s, &o, &stat.plan.v0).unwrap();
            let full = solve_general_warm(&s, 2, &o, &stat).unwrap();
            let more = solve_general_warm(&s, 4, &o, &full).unwrap();
            let rounded = round_association(&full, &s).unwrap();
            (full.throughput, ua.throughput, more.throughput, full.throughput, rounded.throughput)
        })
        .collect()
}

fn c3_association(runs: &[(f64, f64, f64, f64, f64)]) -> Outcome {
    let gap = runs.iter().map(|r| (r.0 - r.1).abs() / r.1).fold(0.0, f64::max);
    let rounding = runs.iter().all(|r| r.4 >= r.3 * (1.0 - 1e-9));
    (
        gap <= 0.01 && rounding,
        format!("max |general(K) - UA| / UA = {:.3}%, rounding never decreases = {rounding}", 100.0 * gap),
    )
}

fn c4_sufficiency(runs: &[(f64, f64, f64, f64, f64)]) -> Outcome {
    let worst = runs.iter().map(|r| r.2 / r.0 - 1.0).fold(f64::NEG_INFINITY, f64::max);
    (worst <= 0.01, format!("max general(K+2)/general(K) - 1 = {:.3}%", 100.0 * worst))
}

fn c5_bound() -> Outcome {
    let o = opts();
    let mut worst = f64::INFINITY;
    let mut k1_gap: f64 = 0.0;
    for seed in 1..=5 {
        let s = instance(16, 4, seed);
        let ub = solve_relaxed(&s, 1e-9).unwrap();
        let stat = solve_static(&s, &o).unwrap();
        let mut values = vec![
            stat.throughput,
            solve_user_adaptive_warm(&s, &o, &stat.plan.v0).unwrap().throughput,
            solve_ul_adaptive_warm(&s, &o, &stat.plan.v0).unwrap().throughput,
            solve_general_warm(&s, 2, &o, &stat).unwrap().throughput,
            baseline_random_phases(&s, 1).unwrap().throughput,
            baseline_no_irs(&s).unwrap().throughput,
            gaussian_randomize(&ub.lifted, &s, 200).unwrap().throughput,
        ];
        for j in 1..=4 {
            values.push(solve_hybrid_warm(&s, j, &o, &stat.plan.v0).unwrap().throughput);
        }
        worst = values.iter().map(|v| ub.bound - v).fold(worst, f64::min);

        let one = instance(16, 1, seed);
        let ub1 = solve_relaxed(&one, 1e-10).unwrap();
        let st1 = solve_static(&one, &o).unwrap();
        let ua1 = solve_user_adaptive_warm(&one, &o, &st1.plan.v0).unwrap();
        k1_gap = k1_gap.max((ub1.bound - ua1.throughput).abs() / ub1.bound);
    }
    (
        worst >= -1e-6 && k1_gap <= 1e-4,
        format!("min(bound - scheme) = {worst:.2e}, K=1 relative gap = {k1_gap:.2e}"),
    )
}

fn sum_rate(c: &[f64], tau0: f64, tau: &[f64]) -> f64 {
    tau.iter()
        .zip(c)
        .map(|(&t, &ck)| if t > 0.0 { t * (1.0 + ck * tau0 / t).log2() } else { 0.0 })
        .sum()
}

/// 200 x 200 nested grid: DL share outside, UL split inside.
fn grid(c: &[f64]) -> f64 {
    let m = 200;
    let mut best: f64 = 0.0;
    for i in 1..m {
        let tau0 = i as f64 / m as f64;
        let rest = 1.0 - tau0;
        let inner = |a: usize, b: usize| -> Vec<f64> {
            let t1 = rest * a as f64 / m as f64;
            let t2 = rest * b as f64 / m as f64;
            match c.len() {
                1 => vec![rest],
                2 => vec![t1, rest - t1],
                _ => vec![t1, t2, (rest - t1 - t2).max(0.0)],
            }
        };
        match c.len() {
            1 => best = best.max(sum_rate(c, tau0, &inner(0, 0))),
            2 => {
                for a in 0..=m {
                    best = best.max(sum_rate(c, tau0, &inner(a, 0)));
                }
            }
            _ => {
                for a in 0..=m {
                    for b in 0..=(m - a) {
                        best = best.max(sum_rate(c, tau0, &inner(a, b)));
                    }
                }
            }
        }
    }
    best
}

fn c6_allocation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let k = rng.random_range(1..=3);
        let c: Vec<f64> = (0..k).map(|_| 10f64.powf(rng.random_range(-1.0..3.0))).collect();
        let (_, r) = allocate(&EffectiveRates::uniform(c.clone()).unwrap(), 1.0).unwrap();
        let g = grid(&c);
        let err = if g > r * (1.0 + 1e-9) { f64::INFINITY } else { (r - g) / r };
        worst = worst.max(err);
    }
    let (t, r) = allocate(&EffectiveRates::uniform(vec![1.0]).unwrap(), 1.0).unwrap();
    let tau_ok = (t.tau0 - (1.0 - (-1f64).exp())).abs() <= 1e-6;
    let r_ok = (r - 0.5307).abs() <= 1e-4;
    (
        worst <= 1e-3 && tau_ok && r_ok,
        format!("max grid gap {worst:.2e}; single user tau0 = {:.7}, R = {r:.5}", t.tau0),
    )
}

fn c7_surrogates() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let n = 6;
    let draw = |rng: &mut ChaCha8Rng, unit: bool| -> Vec<Complex64> {
        (0..n)
            .map(|_| {
                let z = Complex64::from_polar(rng.random_range(0.0..2.0), rng.random_range(0.0..std::f64::consts::TAU));
                if unit {
                    z / z.norm()
                } else {
                    z
                }
            })
            .collect()
    };
    let gain = |b: &[Complex64], v: &[Complex64]| -> f64 { b.iter().zip(v).map(|(x, y)| x * y).sum::<Complex64>().norm_sqr() };
    let mut violations = [0usize; 3];
    let mut tight: f64 = 0.0;
    for _ in 0..100_000 {
        let b = draw(&mut rng, false);
        let w = draw(&mut rng, true);
        let v = draw(&mut rng, true);
        let (t0, tau0): (f64, f64) = (rng.random_range(1e-3..1.0), rng.random_range(1e-3..1.0));
        let (gw, gv) = (gain(&b, &w), gain(&b, &v));

        let q = QuarticSurrogate::new(&b, &w, t0).unwrap();
        let target = tau0 * gv * gv;
        violations[0] += usize::from(q.eval(&v, tau0) > target + 1e-9 * target.max(1.0));
        tight = tight.max((q.eval(&w, t0) - t0 * gw * gw).abs() / (t0 * gw * gw).max(1.0));

        let d = DlEnergySurrogate::new(&b, &w, t0).unwrap();
        let target = tau0 * gv;
        violations[2] += usize::from(d.eval(&v, tau0) > target + 1e-9 * target.max(1.0));
        tight = tight.max((d.eval(&w, t0) - t0 * gw).abs() / (t0 * gw).max(1.0));

        let (xh, yh, x, y): (f64, f64, f64, f64) = (
            rng.random_range(-5.0..5.0),
            rng.random_range(-5.0..5.0),
            rng.random_range(-5.0..5.0),
            rng.random_range(-5.0..5.0),
        );
        let e = ExpProductSurrogate::new(xh, yh);
        violations[1] += usize::from(e.eval(x, y) > (x + y).exp() * (1.0 + 1e-12));
        tight = tight.max((e.eval(xh, yh) - (xh + yh).exp()).abs() / (xh + yh).exp());
    }
    (
        violations.iter().all(|&v| v == 0) && tight <= 1e-9,
        format!("violations quartic/exp/dl = {violations:?}, worst tightness {tight:.1e}"),
    )
}

fn c8_convergence(suite: &[Suite]) -> Outcome {
    let mut drop: f64 = 0.0;
    let mut iters = 0;
    let mut statuses = BTreeMap::new();
    for r in suite {
        for sol in [&r.stat, &r.ua, &r.ul, &r.hybrid, &r.general] {
            for w in sol.diagnostics.trace.windows(2) {
                drop = drop.max(w[0] - w[1]);
            }
            iters = iters.max(sol.diagnostics.outer_iters);
            *statuses.entry(sol.diagnostics.status.as_str()).or_insert(0) += 1;
        }
    }
    (
        drop <= 1e-9 && iters <= 50,
        format!("largest trace decrease {drop:.1e}, max outer iterations {iters}, statuses {statuses:?}"),
    )
}

fn sweep(axis: Axis, values: Vec<f64>, schemes: Vec<Scheme>, base: Option<&Path>) -> (Vec<ResultRow>, Vec<SummaryRow>) {
    let spec = ExperimentSpec {
        base_config: base.map(Path::to_path_buf),
        profile: Profile::Desk,
        axis,
        values,
        schemes,
        seeds: (1..=10).collect(),
        output: "unused.csv".into(),
        summary: None,
        vectors: 2,
        random_trials: 1,
        sdr_samples: 200,
        sdr_tol: 1e-9,
        solver: opts(),
    };
    let rows = collect_rows(&spec).unwrap();
    let summary = summarize(&rows);
    (rows, summary)
}

fn series(summary: &[SummaryRow], scheme: &str, f: fn(&SummaryRow) -> f64) -> Vec<f64> {
    summary.iter().filter(|r| r.scheme == scheme).map(f).collect()
}

fn strictly_up(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] > w[0])
}

fn c9_trends() -> Outcome {
    let mut notes = Vec::new();
    let (_, by_power) = sweep(
        Axis::HapPowerDbm,
        vec![30.0, 34.0, 38.0, 42.0],
        vec![Scheme::UserAdaptive, Scheme::Static, Scheme::Random, Scheme::NoIrs],
        None,
    );
    let power_ok = ["user_adaptive", "static", "random", "no_irs"]
        .iter()
        .all(|s| strictly_up(&series(&by_power, s, |r| r.throughput_mean)));
    notes.push(format!("throughput up in P_A: {power_ok}"));

    let ua = series(&by_power, "user_adaptive", |r| r.throughput_mean);
    let rnd = series(&by_power, "random", |r| r.throughput_mean);
    let none = series(&by_power, "no_irs", |r| r.throughput_mean);
    let ratio = (0..ua.len()).map(|i| (rnd[i] - none[i]) / (ua[i] - none[i])).fold(f64::NEG_INFINITY, f64::max);
    let random_ok = ratio <= 0.25;
    notes.push(format!("random/optimised gain {:.1}% (limit 25%)", 100.0 * ratio));

    let (_, by_n) = sweep(Axis::Elements, vec![8.0, 16.0, 24.0, 32.0], vec![Scheme::Hybrid], None);
    let thr = series(&by_n, "hybrid", |r| r.throughput_mean);
    let tau: Vec<f64> = series(&by_n, "hybrid", |r| -r.tau0_mean);
    let harvest = series(&by_n, "hybrid", |r| r.harvested_energy_mean);
    let n_ok = strictly_up(&thr) && strictly_up(&tau) && strictly_up(&harvest);
    notes.push(format!("N: throughput up, tau0 down, energy up: {n_ok}"));

    let o = opts();
    let seeds = 10;
    let mut r_j = [0.0; 7];
    let mut t_j = [0.0; 7];
    for seed in 1..=seeds {
        let s = instance(8, 4, seed);
        for (j, sol) in solve_general_sweep(&s, 6, &o).unwrap().iter().enumerate() {
            r_j[j] += sol.throughput / seeds as f64;
            t_j[j] += sol.alloc.tau0 / seeds as f64;
        }
    }
    let j_ok = r_j.windows(2).all(|w| w[1] >= w[0]) && r_j[6] <= r_j[4] * 1.01 && t_j.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-6));
    notes.push(format!("J: R = {r_j:.4?}, tau0 = {t_j:.4?}"));
    (power_ok && random_ok && n_ok && j_ok, notes.join("; "))
}

fn c10_near_far() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("near_far.toml");
    let mut cfg = SystemConfig::desk();
    cfg.num_devices = 2;
    cfg.device_positions = Some(vec![[7.0, 0.0, 0.0], [10.0, 0.0, 0.0]]);
    // The sweep moves the IRS along (x, 0, 0).
    cfg.irs_pos = [0.0, 0.0, 0.0];
    std::fs::write(&path, cfg.to_toml_string().unwrap()).unwrap();
    let (rows, _) = sweep(Axis::IrsX, vec![9.0], vec![Scheme::UserAdaptive, Scheme::NoIrs], Some(&path));
    let per_device = |scheme: &str| -> [f64; 2] {
        let mut acc = [0.0; 2];
        let picked: Vec<&ResultRow> = rows.iter().filter(|r| r.scheme == scheme).collect();
        for r in &picked {
            for (a, x) in acc.iter_mut().zip(r.device_throughputs.split(';')) {
                *a += x.parse::<f64>().unwrap() / picked.len() as f64;
            }
        }
        acc
    };
    let with = per_device("user_adaptive");
    let without = per_device("no_irs");
    let near = with[0] - without[0];
    let far = with[1] - without[1];
    (
        far > near,
        format!("mean gain near {near:.4}, far {far:.4} bits/Hz (no IRS: {:.4} / {:.4})", without[0], without[1]),
    )
}

fn c11_lemma() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut bad = 0;
    for i in 0..100_000 {
        let a: f64 = rng.random_range(0.0..100.0);
        let b: f64 = if i % 5 == 0 { a } else { rng.random_range(0.0..100.0) };
        let lhs = 1.0 + a * b;
        let rhs = ((1.0 + a * a) * (1.0 + b * b)).sqrt();
        let equal = (rhs - lhs).abs() <= 1e-9 * rhs;
        if lhs > rhs * (1.0 + 1e-12) {
            bad += 1;
        }
        // Away from the diagonal the gap (a-b)^2 / (lhs + rhs) is resolvable.
        let resolvable = (a - b).powi(2) / (lhs + rhs) > 1e-8 * rhs;
        if (a == b && !equal) || (resolvable && equal) {
            bad += 1;
        }
    }
    (bad == 0, format!("{bad} violations in 100000 draws"))
}

fn main() -> ExitCode {
    let mut results: Vec<(u32, &str, Outcome, f64)> = Vec::new();
    let mut run = |id: u32, name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let out = f();
        let secs = t.elapsed().as_secs_f64();
        println!("[{}] criterion {id:>2} {name}: {} ({secs:.1} s)", if out.0 { "PASS" } else { "FAIL" }, out.1);
        results.push((id, name, out, secs));
    };

    let (suite, pair_secs) = default_suite();
    run(1, "user-adaptive >= static", &mut || c1_ordering(&suite, pair_secs));
    run(2, "UL-adaptive == static", &mut || c2_ul_equality(&suite));
    let assoc = association_runs();
    run(3, "general(K) == user-adaptive", &mut || c3_association(&assoc));
    run(4, "K vectors suffice", &mut || c4_sufficiency(&assoc));
    run(5, "relaxation bound dominance", &mut c5_bound);
    run(6, "allocation grid oracle", &mut c6_allocation);
    run(7, "surrogate lower bounds", &mut c7_surrogates);
    run(8, "SCA monotone convergence", &mut || c8_convergence(&suite));
    run(9, "trend reproduction", &mut c9_trends);
    run(10, "doubly-near-far mitigation", &mut c10_near_far);
    run(11, "two-term inequality", &mut c11_lemma);

    let failed: Vec<u32> = results.iter().filter(|r| !r.2 .0).map(|r| r.0).collect();
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", results.len());
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {failed:?}");
        ExitCode::FAILURE
    }
}
