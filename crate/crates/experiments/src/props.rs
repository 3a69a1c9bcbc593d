//! Property suite run by `irs-wpcn props`.
//!
//! Each check returns a [`CheckResult`]. Failures are reported, never thrown;
//! solver errors inside a check count as a failure of that check.

use std::time::Instant;

use irs_wpcn::allocation::{allocate, perspective_rate, EffectiveRates};
use irs_wpcn::plan::Solution;
use irs_wpcn::sca::{
    baseline_no_irs, baseline_random_phases, solve_general_warm, solve_hybrid_warm, solve_static, solve_ul_adaptive_warm,
    solve_user_adaptive_warm, ScaOptions,
};
use irs_wpcn::scenario::{generate_scenario, Scenario, SystemConfig};
use irs_wpcn::sdr::{gaussian_randomize, solve_relaxed};
use irs_wpcn::surrogates::{DlEnergySurrogate, ExpProductSurrogate, QuarticSurrogate};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ExperimentError, Result};

fn default_system() -> SystemConfig {
    SystemConfig::desk()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PropsConfig {
    #[serde(default = "default_system")]
    pub system: SystemConfig,
    /// Instances in the default suite, seeded `system.seed + i`.
    pub seeds: u64,
    pub solver: ScaOptions,
    /// Size of the instances used for the association checks.
    pub small_elements: usize,
    pub small_devices: usize,
    pub bound_seeds: u64,
    pub trend_seeds: u64,
    pub fuzz_samples: usize,
    pub allocation_instances: usize,
    pub grid_points: usize,
    pub time_limit_s: f64,
}

impl Default for PropsConfig {
    fn default() -> Self {
        Self {
            system: default_system(),
            seeds: 20,
            solver: ScaOptions::default(),
            small_elements: 8,
            small_devices: 2,
            bound_seeds: 5,
            trend_seeds: 10,
            fuzz_samples: 100_000,
            allocation_instances: 100,
            grid_points: 200,
            time_limit_s: 300.0,
        }
    }
}

impl PropsConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| ExperimentError::Toml(e.to_string()))?;
        cfg.system.validate()?;
        cfg.solver.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| ExperimentError::Toml(e.to_string()))
    }

    fn instance(&self, n: usize, k: usize, i: u64) -> Result<Scenario> {
        let mut cfg = self.system.clone();
        cfg.num_elements = n;
        cfg.num_devices = k;
        cfg.seed = self.system.seed + i;
        Ok(generate_scenario(&cfg)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub id: u32,
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub runtime_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropsReport {
    pub passed: bool,
    pub checks: Vec<CheckResult>,
}

impl PropsReport {
    pub fn summary_lines(&self) -> Vec<String> {
        self.checks
            .iter()
            .map(|c| {
                format!(
                    "[{}] {:>2} {:<28} {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.id,
                    c.name,
                    c.detail
                )
            })
            .collect()
    }
}

fn timed(id: u32, name: &str, f: impl FnOnce() -> Result<(bool, String)>) -> CheckResult {
    let start = Instant::now();
    let (passed, detail) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
    CheckResult {
        id,
        name: name.to_string(),
        passed,
        detail,
        runtime_ms: start.elapsed().as_secs_f64() * 1e3,
    }
}

/// Solutions of the default suite shared by several checks.
struct SuiteRun {
    stat: Solution,
    ua: Solution,
    ul: Solution,
    hybrid: Solution,
    general: Solution,
    /// Seconds spent on static plus user-adaptive.
    pair_secs: f64,
}

fn run_suite_instance(cfg: &PropsConfig, i: u64) -> Result<SuiteRun> {
    let s = cfg.instance(cfg.system.num_elements, cfg.system.num_devices, i)?;
    let o = &cfg.solver;
    let start = Instant::now();
    let stat = solve_static(&s, o)?;
    let ua = solve_user_adaptive_warm(&s, o, &stat.plan.v0)?;
    let pair_secs = start.elapsed().as_secs_f64();
    let ul = solve_ul_adaptive_warm(&s, o, &stat.plan.v0)?;
    let j = 2.min(s.num_devices());
    let hybrid = solve_hybrid_warm(&s, j, o, &stat.plan.v0)?;
    let general = solve_general_warm(&s, j, o, &stat)?;
    Ok(SuiteRun {
        stat,
        ua,
        ul,
        hybrid,
        general,
        pair_secs,
    })
}

fn check_ordering(cfg: &PropsConfig, runs: &[SuiteRun]) -> (bool, String) {
    let worst = runs
        .iter()
        .map(|r| r.ua.throughput - r.stat.throughput)
        .fold(f64::INFINITY, f64::min);
    let secs: f64 = runs.iter().map(|r| r.pair_secs).sum();
    let ok = worst >= -1e-4 && secs < cfg.time_limit_s;
    (ok, format!("min(UA - static) = {worst:.3e} over {} instances, {secs:.1} s", runs.len()))
}

fn check_ul_equality(runs: &[SuiteRun]) -> (bool, String) {
    let agree = runs
        .iter()
        .filter(|r| (r.ul.throughput - r.stat.throughput).abs() <= 0.01 * r.stat.throughput)
        .count();
    let need = (runs.len() * 9).div_ceil(10);
    (agree >= need, format!("{agree}/{} within 1% (need {need})", runs.len()))
}

/// `(general(K), UA, general(K + 2), rounded general(K))` per small instance.
fn association_runs(cfg: &PropsConfig) -> Result<Vec<[f64; 4]>> {
    let k = cfg.small_devices;
    (0..cfg.seeds)
        .into_par_iter()
        .map(|i| {
            let s = cfg.instance(cfg.small_elements, k, i)?;
            let o = &cfg.solver;
            let stat = solve_static(&s, o)?;
            let ua = solve_user_adaptive_warm(&s, o, &stat.plan.v0)?;
            let full = solve_general_warm(&s, k, o, &stat)?;
            let more = solve_general_warm(&s, k + 2, o, &full)?;
            let rounded = irs_wpcn::sca::round_association(&full, &s)?;
            Ok([full.throughput, ua.throughput, more.throughput, rounded.throughput])
        })
        .collect()
}

fn check_association(runs: &[[f64; 4]]) -> (bool, String) {
    let worst_gap = runs.iter().map(|r| (r[0] - r[1]).abs() / r[1]).fold(0.0, f64::max);
    let rounding_ok = runs.iter().all(|r| r[3] >= r[0] * (1.0 - 1e-9));
    (
        worst_gap <= 0.01 && rounding_ok,
        format!(
            "max |general(K) - UA| = {:.3}% over {} instances, rounding monotone = {rounding_ok}",
            100.0 * worst_gap,
            runs.len()
        ),
    )
}

fn check_sufficiency(runs: &[[f64; 4]]) -> (bool, String) {
    let worst = runs.iter().map(|r| r[2] / r[0] - 1.0).fold(f64::NEG_INFINITY, f64::max);
    (worst <= 0.01, format!("max general(K+2)/general(K) - 1 = {:.3}%", 100.0 * worst))
}

fn check_bound(cfg: &PropsConfig) -> Result<(bool, String)> {
    let o = &cfg.solver;
    let mut worst: f64 = f64::INFINITY;
    let mut single_gap: f64 = 0.0;
    for i in 0..cfg.bound_seeds {
        let n = cfg.system.num_elements.min(16);
        let s = cfg.instance(n, cfg.system.num_devices, i)?;
        let ub = solve_relaxed(&s, 1e-9)?;
        let stat = solve_static(&s, o)?;
        let j = 2.min(s.num_devices());
        let values = [
            stat.throughput,
            solve_user_adaptive_warm(&s, o, &stat.plan.v0)?.throughput,
            solve_ul_adaptive_warm(&s, o, &stat.plan.v0)?.throughput,
            solve_hybrid_warm(&s, j, o, &stat.plan.v0)?.throughput,
            solve_general_warm(&s, j, o, &stat)?.throughput,
            baseline_random_phases(&s, 1)?.throughput,
            baseline_no_irs(&s)?.throughput,
            gaussian_randomize(&ub.lifted, &s, irs_wpcn::sdr::DEFAULT_SAMPLES)?.throughput,
        ];
        for v in values {
            worst = worst.min(ub.bound - v);
        }
        let one = cfg.instance(n, 1, i)?;
        let ub1 = solve_relaxed(&one, 1e-10)?;
        let st1 = solve_static(&one, o)?;
        let ua1 = solve_user_adaptive_warm(&one, o, &st1.plan.v0)?;
        single_gap = single_gap.max((ub1.bound - ua1.throughput).abs() / ub1.bound);
    }
    Ok((
        worst >= -1e-6 && single_gap <= 1e-4,
        format!("min(bound - scheme) = {worst:.3e}, K=1 relative gap = {single_gap:.2e}"),
    ))
}

fn grid_optimum(c: &[f64], points: usize) -> f64 {
    let rate = |tau0: f64, tau: &[f64]| -> f64 { tau.iter().zip(c).map(|(&t, &ck)| perspective_rate(t, ck * tau0)).sum() };
    let m = points as f64;
    let mut best: f64 = 0.0;
    for i in 1..points {
        let tau0 = i as f64 / m;
        let rest = 1.0 - tau0;
        match c.len() {
            1 => best = best.max(rate(tau0, &[rest])),
            2 => {
                for a in 0..=points {
                    let t1 = rest * a as f64 / m;
                    best = best.max(rate(tau0, &[t1, rest - t1]));
                }
            }
            _ => {
                for a in 0..=points {
                    for b in 0..=(points - a) {
                        let t1 = rest * a as f64 / m;
                        let t2 = rest * b as f64 / m;
                        best = best.max(rate(tau0, &[t1, t2, (rest - t1 - t2).max(0.0)]));
                    }
                }
            }
        }
    }
    best
}

fn check_allocation(cfg: &PropsConfig) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.system.seed);
    let instances: Vec<Vec<f64>> = (0..cfg.allocation_instances)
        .map(|_| {
            let k = rng.random_range(1..=3);
            (0..k).map(|_| 10f64.powf(rng.random_range(-1.0..3.0))).collect()
        })
        .collect();
    let points = cfg.grid_points;
    let errs: Vec<Result<f64>> = instances
        .par_iter()
        .map(|c| {
            let (_, r) = allocate(&EffectiveRates::uniform(c.clone())?, 1.0)?;
            let g = grid_optimum(c, points);
            Ok(if g > r * (1.0 + 1e-9) { f64::INFINITY } else { (r - g) / r })
        })
        .collect();
    let mut worst: f64 = 0.0;
    for e in errs {
        worst = worst.max(e?);
    }
    let (t, r) = allocate(&EffectiveRates::uniform(vec![1.0])?, 1.0)?;
    let e = std::f64::consts::E;
    let closed = (t.tau0 - (1.0 - 1.0 / e)).abs() <= 1e-6 && (r - 0.5307).abs() <= 1e-4;
    Ok((
        worst <= 1e-3 && closed,
        format!("max relative grid gap {worst:.2e}; single user tau0 = {:.7}, R = {r:.5}", t.tau0),
    ))
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize, unit: bool) -> Vec<Complex64> {
    (0..n)
        .map(|_| {
            let z = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            if unit {
                z / z.norm().max(1e-12)
            } else {
                z
            }
        })
        .collect()
}

fn check_surrogates(cfg: &PropsConfig) -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.system.seed ^ 0x5eed);
    let n = 5;
    let amp = |b: &[Complex64], v: &[Complex64]| -> Complex64 { b.iter().zip(v).map(|(x, y)| x * y).sum() };
    let (mut viol, mut tight): (usize, f64) = (0, 0.0);
    for _ in 0..cfg.fuzz_samples {
        let b = random_vec(&mut rng, n, false);
        let w = random_vec(&mut rng, n, true);
        let v = random_vec(&mut rng, n, true);
        let t0 = rng.random_range(0.01..1.0);
        let tau0 = rng.random_range(0.01..1.0);
        let gw = amp(&b, &w).norm_sqr();
        let gv = amp(&b, &v).norm_sqr();

        let q = QuarticSurrogate::new(&b, &w, t0).expect("positive t0");
        let exact = tau0 * gv * gv;
        viol += usize::from(q.eval(&v, tau0) > exact + 1e-9 * exact.max(1.0));
        tight = tight.max((q.eval(&w, t0) - t0 * gw * gw).abs() / (t0 * gw * gw).max(1.0));

        let d = DlEnergySurrogate::new(&b, &w, t0).expect("positive t0");
        let exact = tau0 * gv;
        viol += usize::from(d.eval(&v, tau0) > exact + 1e-9 * exact.max(1.0));
        tight = tight.max((d.eval(&w, t0) - t0 * gw).abs() / (t0 * gw).max(1.0));

        let (xh, yh, x, y): (f64, f64, f64, f64) = (
            rng.random_range(-3.0..3.0),
            rng.random_range(-3.0..3.0),
            rng.random_range(-3.0..3.0),
            rng.random_range(-3.0..3.0),
        );
        let ex = ExpProductSurrogate::new(xh, yh);
        let exact: f64 = (x + y).exp();
        viol += usize::from(ex.eval(x, y) > exact * (1.0 + 1e-12));
        tight = tight.max((ex.eval(xh, yh) - (xh + yh).exp()).abs() / (xh + yh).exp());
    }
    (
        viol == 0 && tight <= 1e-9,
        format!("{viol} violations in 3 x {} samples, worst tightness error {tight:.2e}", cfg.fuzz_samples),
    )
}

fn check_convergence(cfg: &PropsConfig, runs: &[SuiteRun]) -> (bool, String) {
    let mut worst_drop: f64 = 0.0;
    let mut max_iters = 0;
    for r in runs {
        for sol in [&r.stat, &r.ua, &r.ul, &r.hybrid, &r.general] {
            for w in sol.diagnostics.trace.windows(2) {
                worst_drop = worst_drop.max(w[0] - w[1]);
            }
            max_iters = max_iters.max(sol.diagnostics.outer_iters);
        }
    }
    let limit = cfg.solver.max_outer_iters.min(50);
    (
        worst_drop <= 1e-9 && max_iters <= limit,
        format!("largest trace decrease {worst_drop:.2e}, most outer iterations {max_iters}"),
    )
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn increasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] > w[0])
}

fn check_trends(cfg: &PropsConfig) -> Result<(bool, String)> {
    let o = &cfg.solver;
    let seeds = cfg.trend_seeds;
    let k = cfg.system.num_devices;
    let mut notes = Vec::new();
    let mut ok = true;

    // Throughput in P_A for every scheme.
    let powers = [30.0, 34.0, 38.0, 42.0];
    let mut by_power = vec![[0.0; 4]; powers.len()];
    for (pi, &p) in powers.iter().enumerate() {
        for i in 0..seeds {
            let mut c = cfg.system.clone();
            c.hap_power_dbm = p;
            c.seed = cfg.system.seed + i;
            let s = generate_scenario(&c)?;
            let stat = solve_static(&s, o)?;
            let ua = solve_user_adaptive_warm(&s, o, &stat.plan.v0)?;
            let row = [stat.throughput, ua.throughput, baseline_random_phases(&s, 1)?.throughput, baseline_no_irs(&s)?.throughput];
            for (acc, v) in by_power[pi].iter_mut().zip(row) {
                *acc += v / seeds as f64;
            }
        }
    }
    let power_ok = (0..4).all(|c| increasing(&by_power.iter().map(|r| r[c]).collect::<Vec<_>>()));
    ok &= power_ok;
    notes.push(format!("P_A monotone: {power_ok}"));

    // Random phases versus optimised at the default power.
    let mid = cfg.system.hap_power_dbm;
    let (mut rnd_gain, mut opt_gain) = (0.0, 0.0);
    for i in 0..seeds {
        let mut c = cfg.system.clone();
        c.hap_power_dbm = mid;
        c.seed = cfg.system.seed + i;
        let s = generate_scenario(&c)?;
        let none = baseline_no_irs(&s)?.throughput;
        let stat = solve_static(&s, o)?;
        let ua = solve_user_adaptive_warm(&s, o, &stat.plan.v0)?.throughput;
        rnd_gain += baseline_random_phases(&s, 1)?.throughput - none;
        opt_gain += ua - none;
    }
    let random_ok = rnd_gain <= 0.25 * opt_gain;
    ok &= random_ok;
    notes.push(format!("random gain {:.1}% of optimised gain", 100.0 * rnd_gain / opt_gain));

    // Throughput, DL duration and harvested energy in N.
    let sizes = [8usize, 16, 24, 32];
    let (mut thr, mut tau, mut harv) = (Vec::new(), Vec::new(), Vec::new());
    for &n in &sizes {
        let (mut a, mut b, mut c) = (Vec::new(), Vec::new(), Vec::new());
        for i in 0..seeds {
            let s = cfg.instance(n, k, i)?;
            let stat = solve_static(&s, o)?;
            let h = solve_hybrid_warm(&s, 2.min(k), o, &stat.plan.v0)?;
            a.push(h.throughput);
            b.push(h.alloc.tau0);
            c.push(h.harvested_energy(&s).iter().sum::<f64>());
        }
        thr.push(mean(&a));
        tau.push(mean(&b));
        harv.push(mean(&c));
    }
    let tau_neg: Vec<f64> = tau.iter().map(|t| -t).collect();
    let n_ok = increasing(&thr) && increasing(&tau_neg) && increasing(&harv);
    ok &= n_ok;
    notes.push(format!("N trends: {n_ok}"));

    // Throughput and DL duration in J on smaller instances.
    let jn = cfg.small_elements;
    let mut r_j = vec![0.0; k + 3];
    let mut t_j = vec![0.0; k + 3];
    for i in 0..seeds {
        let s = cfg.instance(jn, k, i)?;
        let sols = irs_wpcn::sca::solve_general_sweep(&s, k + 2, o)?;
        for (j, sol) in sols.iter().enumerate() {
            r_j[j] += sol.throughput / seeds as f64;
            t_j[j] += sol.alloc.tau0 / seeds as f64;
        }
    }
    let plateau = r_j[k + 2] <= r_j[k] * 1.01;
    let j_ok = r_j.windows(2).all(|w| w[1] >= w[0] - 1e-9) && plateau && t_j[k] < t_j[0];
    ok &= j_ok;
    notes.push(format!(
        "J trends: {j_ok} (R(J) = {:?}, tau0(J) = {:?})",
        r_j.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>(),
        t_j.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>()
    ));
    Ok((ok, notes.join("; ")))
}

/// Two devices at (7,0,0) and (10,0,0) with the IRS at (9,0,0).
pub fn near_far_config(base: &SystemConfig) -> SystemConfig {
    let mut c = base.clone();
    c.num_devices = 2;
    c.device_positions = Some(vec![[7.0, 0.0, 0.0], [10.0, 0.0, 0.0]]);
    c.irs_pos = [9.0, 0.0, 0.0];
    c
}

fn check_near_far(cfg: &PropsConfig) -> Result<(bool, String)> {
    let o = &cfg.solver;
    let (mut near, mut far) = (0.0, 0.0);
    for i in 0..cfg.seeds {
        let mut c = near_far_config(&cfg.system);
        c.seed = cfg.system.seed + i;
        let s = generate_scenario(&c)?;
        let stat = solve_static(&s, o)?;
        let ua = solve_user_adaptive_warm(&s, o, &stat.plan.v0)?;
        let none = baseline_no_irs(&s)?;
        near += ua.device_throughputs[0] - none.device_throughputs[0];
        far += ua.device_throughputs[1] - none.device_throughputs[1];
    }
    let n = cfg.seeds as f64;
    Ok((
        far > near,
        format!("mean improvement: far {:.4}, near {:.4} bits/Hz", far / n, near / n),
    ))
}

fn check_lemma(cfg: &PropsConfig) -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.system.seed ^ 0x1e44a);
    let mut bad = 0;
    for i in 0..cfg.fuzz_samples {
        let a: f64 = 10f64.powf(rng.random_range(-3.0..3.0));
        let b = if i % 10 == 0 { a } else { 10f64.powf(rng.random_range(-3.0..3.0)) };
        let lhs = 1.0 + a * b;
        let rhs = ((1.0 + a * a) * (1.0 + b * b)).sqrt();
        // rhs^2 - lhs^2 = (a - b)^2, so the exact gap is positive iff a != b.
        let gap = (a - b).powi(2) / (rhs + lhs);
        let tol = 1e-9 * rhs;
        let violated = lhs > rhs + tol || ((rhs - lhs) - gap).abs() > tol || (a == b) != (gap == 0.0);
        bad += usize::from(violated);
    }
    (bad == 0, format!("{bad} violations in {} draws", cfg.fuzz_samples))
}

/// Runs every check. The returned report passes iff every check passes.
pub fn run_property_suite(cfg: &PropsConfig) -> PropsReport {
    let mut checks = Vec::new();
    let suite_start = Instant::now();
    let runs: Result<Vec<SuiteRun>> = (0..cfg.seeds).into_par_iter().map(|i| run_suite_instance(cfg, i)).collect();
    let suite_ms = suite_start.elapsed().as_secs_f64() * 1e3;
    match &runs {
        Ok(runs) => {
            let mut c = timed(1, "ua_dominates_static", || Ok(check_ordering(cfg, runs)));
            c.runtime_ms += suite_ms;
            checks.push(c);
            checks.push(timed(2, "ul_adaptive_equals_static", || Ok(check_ul_equality(runs))));
        }
        Err(e) => {
            for (id, name) in [(1, "ua_dominates_static"), (2, "ul_adaptive_equals_static")] {
                checks.push(timed(id, name, || Ok((false, format!("error: {e}")))));
            }
        }
    }
    let start = Instant::now();
    let assoc = association_runs(cfg);
    let assoc_ms = start.elapsed().as_secs_f64() * 1e3;
    for (id, name, f) in [
        (3, "association_equivalence", check_association as fn(&[[f64; 4]]) -> (bool, String)),
        (4, "k_vectors_suffice", check_sufficiency),
    ] {
        let mut c = match &assoc {
            Ok(runs) => timed(id, name, || Ok(f(runs))),
            Err(e) => timed(id, name, || Ok((false, format!("error: {e}")))),
        };
        c.runtime_ms += assoc_ms;
        checks.push(c);
    }
    checks.push(timed(5, "upper_bound_dominance", || check_bound(cfg)));
    checks.push(timed(6, "allocation_oracle", || check_allocation(cfg)));
    checks.push(timed(7, "surrogate_bounds", || Ok(check_surrogates(cfg))));
    match &runs {
        Ok(runs) => checks.push(timed(8, "sca_convergence", || Ok(check_convergence(cfg, runs)))),
        Err(e) => checks.push(timed(8, "sca_convergence", || Ok((false, format!("error: {e}"))))),
    }
    checks.push(timed(9, "trends", || check_trends(cfg)));
    checks.push(timed(10, "doubly_near_far", || check_near_far(cfg)));
    checks.push(timed(11, "lemma_inequality", || Ok(check_lemma(cfg))));
    PropsReport {
        passed: checks.iter().all(|c| c.passed),
        checks,
    }
}
