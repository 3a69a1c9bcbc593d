//! General dynamic scheme: `J` UL vectors optimised jointly with `v0` and a
//! per-(device, slot) split of time and energy.
//!
//! Per slot the SNR numerator `kappa e g(v_j)` is handled in the log domain,
//! `S <= exp(x + y)` with `exp(x) <= e` and `exp(y) <= g(v_j)`, and each
//! nonconvex piece is replaced by its tangent bound at the current iterate.

use num_complex::Complex64;

use super::dl::{device_order, solve_static};
use super::rounding::round_association_from;
use super::{augment, pick_best, Normalized, ScaOptions, ScaTrace, DEGENERATE_GAIN, INTERIOR};
use crate::allocation::{finish_solution, perspective_rate};
use crate::channel::{align_phases, project_unit_modulus, PhaseKind, PhaseVector};
use crate::error::Result;
use crate::kernel::{solve_subproblem, Affine, ConvexSubproblem};
use crate::plan::{evaluate_throughput, Allocation, Diagnostics, PhasePlan, Solution, SolveStatus};
use crate::scenario::Scenario;
use crate::surrogates::{DlEnergySurrogate, ExpProductSurrogate, LinearizedGain, RealLinear};

/// Initial share given to slots a device does not use yet.
const SLOT_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone)]
struct GenState {
    /// IRS parts of `v_0 .. v_J`.
    v: Vec<Vec<Complex64>>,
    tau0: f64,
    /// `t[k][j]`, fractions of `T`.
    t: Vec<Vec<f64>>,
    /// `e[k][j]` in units of `eta_k P_A g_ref T`.
    e: Vec<Vec<f64>>,
}

fn relaxed_value(norm: &Normalized, st: &GenState) -> f64 {
    let mut total = 0.0;
    for k in 0..norm.num_devices() {
        for (j, v) in st.v.iter().enumerate() {
            let a = norm.kappa[k] * st.e[k][j] * norm.gain(k, v);
            total += norm.weights[k] * perspective_rate(st.t[k][j], a);
        }
    }
    total
}

fn phase_affine(lin: &RealLinear, v_vars: &[(usize, usize)], extra: f64) -> Affine {
    let n = v_vars.len();
    let mut a = Affine::constant(extra + lin.coeffs[n].re);
    for (i, &(re, im)) in v_vars.iter().enumerate() {
        let (cr, ci) = lin.real_coeffs(i);
        a.add_term(re, cr);
        a.add_term(im, ci);
    }
    a
}

struct PairVars {
    k: usize,
    j: usize,
    t: usize,
    e: usize,
    s: usize,
    x: usize,
    y: usize,
}

fn general_step(norm: &Normalized, st: &GenState, tol: f64) -> Option<GenState> {
    let n = norm.num_elements();
    let slots = st.v.len();
    let k_total = norm.num_devices();
    let t0 = st.tau0;
    let shrink = 1.0 - INTERIOR;

    let devices: Vec<usize> = (0..k_total)
        .filter(|&k| norm.weights[k] > 0.0 && norm.kappa[k] > 0.0 && norm.gain(k, &st.v[0]) > DEGENERATE_GAIN)
        .collect();
    if devices.is_empty() {
        return None;
    }

    let mut p = ConvexSubproblem::new();
    let tau0 = p.add_real("tau0");
    let v_vars: Vec<Vec<(usize, usize)>> = (0..slots)
        .map(|j| (0..n).map(|i| p.add_complex(&format!("v{j}_{i}"))).collect())
        .collect();
    let mut time = Affine::var(tau0);
    let mut pairs: Vec<PairVars> = Vec::new();
    let mut causal: Vec<(usize, Affine, f64)> = Vec::new();
    let mut gain_bounds: Vec<Affine> = Vec::new();
    let mut exp_bounds: Vec<ExpProductSurrogate> = Vec::new();

    for &k in &devices {
        let dl = DlEnergySurrogate::new(&norm.rows[k], &augment(&st.v[0]), t0).ok()?;
        let dl_base = phase_affine(&dl.linear, &v_vars[0], 0.0);
        let mut bound = dl_base.clone();
        let before = pairs.len();
        for j in 0..slots {
            let g_hat = norm.gain(k, &st.v[j]);
            if g_hat <= DEGENERATE_GAIN || st.e[k][j] <= 0.0 || st.t[k][j] <= 0.0 {
                continue;
            }
            let pv = PairVars {
                k,
                j,
                t: p.add_real(format!("t{k}_{j}")),
                e: p.add_real(format!("e{k}_{j}")),
                s: p.add_real(format!("S{k}_{j}")),
                x: p.add_real(format!("x{k}_{j}")),
                y: p.add_real(format!("y{k}_{j}")),
            };
            time.add_term(pv.t, 1.0);
            bound.add_term(pv.e, -1.0);
            p.add_perspective(pv.t, pv.s, norm.weights[k], norm.kappa[k]);
            p.add_exp_le(pv.x, Affine::var(pv.e));
            let lg = LinearizedGain::new(&norm.rows[k], &augment(&st.v[j]));
            let gb = phase_affine(&lg.linear, &v_vars[j], lg.constant);
            p.add_exp_le(pv.y, gb.clone());
            let sur = ExpProductSurrogate::new(st.e[k][j].ln(), g_hat.ln());
            let (slope, c) = sur.affine();
            p.add_nonnegative(
                Affine::constant(c)
                    .with_term(pv.x, slope)
                    .with_term(pv.y, slope)
                    .with_term(pv.s, -1.0),
            );
            gain_bounds.push(gb);
            exp_bounds.push(sur);
            pairs.push(pv);
        }
        if pairs.len() == before {
            continue;
        }
        p.add_power_ratio_le(tau0, dl.beta, 1.0, bound);
        causal.push((k, dl_base, dl.beta));
    }
    if pairs.is_empty() {
        return None;
    }
    p.add_linear_le(time, 1.0);
    p.add_nonnegative(Affine::var(tau0));
    for vars in &v_vars {
        for &(re, im) in vars {
            p.add_unit_disk(re, im);
        }
    }

    // Strictly feasible start next to `st`.
    let mut x0 = vec![0.0; p.num_vars()];
    let total = st.tau0 + pairs.iter().map(|pv| st.t[pv.k][pv.j]).sum::<f64>();
    let factor = shrink / total.max(1.0);
    x0[tau0] = st.tau0 * factor;
    for (j, vars) in v_vars.iter().enumerate() {
        for (i, &(re, im)) in vars.iter().enumerate() {
            x0[re] = st.v[j][i].re * shrink;
            x0[im] = st.v[j][i].im * shrink;
        }
    }
    for (k, dl_base, beta) in &causal {
        let budget = dl_base.eval(&x0) - beta / x0[tau0];
        if !(budget > 0.0) {
            return None;
        }
        let used: f64 = pairs.iter().filter(|pv| pv.k == *k).map(|pv| st.e[pv.k][pv.j]).sum();
        let scale = (shrink * budget / used).min(1.0);
        for pv in pairs.iter().filter(|pv| pv.k == *k) {
            x0[pv.e] = st.e[pv.k][pv.j] * scale;
        }
    }
    for ((pv, gb), sur) in pairs.iter().zip(&gain_bounds).zip(&exp_bounds) {
        x0[pv.t] = st.t[pv.k][pv.j] * factor;
        x0[pv.x] = x0[pv.e].ln() + shrink.ln();
        let lg = gb.eval(&x0);
        if !(lg > 0.0) {
            return None;
        }
        x0[pv.y] = lg.ln() + shrink.ln();
        let s_bound = sur.eval(x0[pv.x], x0[pv.y]);
        if !(s_bound > 0.0) {
            return None;
        }
        x0[pv.s] = s_bound * shrink;
    }

    let (x, _report) = match solve_subproblem(&p, &x0, tol) {
        Ok(r) => r,
        Err(e) => {
            log::debug!("general subproblem rejected: {e}");
            return None;
        }
    };
    let mut t = vec![vec![0.0; slots]; k_total];
    let mut e = vec![vec![0.0; slots]; k_total];
    for pv in &pairs {
        t[pv.k][pv.j] = x[pv.t];
        e[pv.k][pv.j] = x[pv.e];
    }
    Some(GenState {
        v: v_vars
            .iter()
            .map(|vars| vars.iter().map(|&(re, im)| Complex64::new(x[re], x[im])).collect())
            .collect(),
        tau0: x[tau0],
        t,
        e,
    })
}

/// Strongest slot per device among `first..=J`.
fn argmax_assignment(s: &Scenario, v0: &PhaseVector, ul: &[PhaseVector], first: usize) -> PhasePlan {
    let mut plan = PhasePlan::new(v0.clone(), ul.to_vec(), vec![first; s.num_devices()]);
    for k in 0..s.num_devices() {
        let mut best = (first, plan.gain(s, k, first));
        for j in (first + 1)..plan.num_slots() {
            let g = plan.gain(s, k, j);
            if g > best.1 {
                best = (j, g);
            }
        }
        plan.assignment[k] = best.0;
    }
    plan
}

/// Normalised SCA state from a finished solution, giving every usable slot
/// (index `first` and up) a small share of time and energy so that its
/// variables start positive. Slots below `first` stay empty for good.
fn initial_state(s: &Scenario, norm: &Normalized, sol: &Solution, first: usize) -> GenState {
    let slots = sol.plan.num_slots();
    let k_total = s.num_devices();
    let t_total = norm.total_time;
    let v: Vec<Vec<Complex64>> = (0..slots).map(|j| sol.plan.vector(j).irs().to_vec()).collect();
    let mut t = vec![vec![0.0; slots]; k_total];
    for k in 0..k_total {
        for j in first..slots {
            let share = sol.alloc.time[k][j] / t_total;
            t[k][j] = if share > 0.0 { share } else { SLOT_FLOOR };
        }
    }
    let mut tau0 = sol.alloc.tau0 / t_total;
    let total = tau0 + t.iter().flatten().sum::<f64>();
    tau0 /= total;
    for row in &mut t {
        for x in row.iter_mut() {
            *x /= total;
        }
    }
    let mut e = vec![vec![0.0; slots]; k_total];
    for k in 0..k_total {
        let budget = tau0 * norm.gain(k, &v[0]);
        let assigned = sol.plan.assignment[k];
        for j in first..slots {
            e[k][j] = if j == assigned {
                budget * (1.0 - SLOT_FLOOR * (slots - 1 - first) as f64)
            } else {
                budget * SLOT_FLOOR
            };
        }
    }
    GenState { v, tau0, t, e }
}

/// Split solution in physical units from a relaxed state with projected
/// vectors. Energies are scaled down where projection reduced the DL gain.
fn split_solution(s: &Scenario, norm: &Normalized, st: &GenState, plan: &PhasePlan) -> Result<Solution> {
    let cfg = &s.config;
    let t_total = norm.total_time;
    let slots = plan.num_slots();
    let mut alloc = Allocation::zeros(s.num_devices(), slots);
    alloc.tau0 = st.tau0 * t_total;
    for k in 0..s.num_devices() {
        let unit = cfg.efficiency(k) * cfg.hap_power_w() * norm.g_ref * t_total;
        let budget = cfg.efficiency(k) * cfg.hap_power_w() * plan.gain(s, k, 0) * alloc.tau0;
        let wanted: f64 = (0..slots).map(|j| st.e[k][j] * unit).sum();
        let scale = if wanted > budget && wanted > 0.0 { budget / wanted } else { 1.0 };
        for j in 0..slots {
            let t = st.t[k][j] * t_total;
            if t > 0.0 {
                alloc.time[k][j] = t;
                alloc.energy[k][j] = st.e[k][j] * unit * scale;
            }
        }
    }
    // Keep the time budget exact despite round-off.
    let used = alloc.total_time();
    if used > t_total {
        let f = t_total / used;
        alloc.tau0 *= f;
        for row in &mut alloc.time {
            for x in row.iter_mut() {
                *x *= f;
            }
        }
        for k in 0..s.num_devices() {
            let budget = cfg.efficiency(k) * cfg.hap_power_w() * plan.gain(s, k, 0) * alloc.tau0;
            let spent = alloc.device_energy(k);
            if spent > budget {
                for x in alloc.energy[k].iter_mut() {
                    *x *= budget / spent;
                }
            }
        }
    }
    let (throughput, device_throughputs) = evaluate_throughput(s, plan, &alloc)?;
    Ok(Solution {
        plan: plan.clone(),
        alloc,
        throughput,
        device_throughputs,
        diagnostics: Diagnostics::default(),
    })
}

/// General scheme with `j` UL vectors. `j = 0` is the static scheme.
pub fn solve_general(s: &Scenario, j: usize, opts: &ScaOptions) -> Result<Solution> {
    let stat = solve_static(s, opts)?;
    if j == 0 {
        return Ok(stat);
    }
    solve_general_warm(s, j, opts, &stat)
}

/// General scheme started from `warm`: its `v0` and UL vectors are reused,
/// and missing UL vectors are filled with vectors aligned to the strongest
/// devices in order. Never returns less than the finished start plan.
pub fn solve_general_warm(s: &Scenario, j: usize, opts: &ScaOptions, warm: &Solution) -> Result<Solution> {
    run_general(s, j, opts, warm, 0)
}

/// UL-adaptive scheme: one UL vector shared by all devices, decoupled from
/// `v0`. Its optimum equals the static one, so this serves as a cross-check
/// and is started from the static solution.
pub fn solve_ul_adaptive(s: &Scenario, opts: &ScaOptions) -> Result<Solution> {
    let stat = solve_static(s, opts)?;
    solve_ul_adaptive_warm(s, opts, &stat.plan.v0)
}

pub fn solve_ul_adaptive_warm(s: &Scenario, opts: &ScaOptions, v0: &PhaseVector) -> Result<Solution> {
    let k_total = s.num_devices();
    let warm = finish_solution(s, &PhasePlan::new(v0.clone(), vec![v0.clone()], vec![1; k_total]))?;
    run_general(s, 1, opts, &warm, 1)
}

/// Shared engine. Devices may transmit only on slots `first..=j`.
fn run_general(s: &Scenario, j: usize, opts: &ScaOptions, warm: &Solution, first: usize) -> Result<Solution> {
    opts.validate()?;
    warm.plan.validate(s)?;
    let norm = Normalized::new(s);
    let order = device_order(s);
    let mut ul: Vec<PhaseVector> = warm.plan.ul_vectors.iter().take(j).cloned().collect();
    for i in ul.len()..j {
        let k = order[i % order.len()];
        ul.push(align_phases(s.direct[k], &s.cascaded[k]).0);
    }
    let start_plan = argmax_assignment(s, &warm.plan.v0, &ul, first);
    let start = finish_solution(s, &start_plan)?;

    let mut st = initial_state(s, &norm, &start, first);
    let mut trace = ScaTrace::start(relaxed_value(&norm, &st));
    for _ in 0..opts.max_outer_iters {
        let Some(next) = general_step(&norm, &st, opts.subproblem_tol) else {
            trace.iterations += 1;
            trace.status = SolveStatus::NumericalFailure;
            break;
        };
        let value = relaxed_value(&norm, &next);
        let (accepted, more) = trace.push(value, opts.convergence_tol);
        if accepted {
            st = next;
        }
        if !more {
            break;
        }
    }

    let mut degenerate = 0;
    let projected: Vec<PhaseVector> = st
        .v
        .iter()
        .map(|v| {
            let p = project_unit_modulus(v, PhaseKind::Bare);
            degenerate += p.degenerate;
            p.vector
        })
        .collect();
    let plan = argmax_assignment(s, &projected[0], &projected[1..], first);
    let split = split_solution(s, &norm, &st, &plan)?;
    let rounded = round_association_from(&split, s, first)?;
    let mut best = pick_best(vec![start, rounded]).expect("two candidates");
    best.diagnostics = Diagnostics {
        trace: trace.values.iter().map(|v| v * norm.total_time).collect(),
        outer_iters: trace.iterations,
        restarts: 1,
        status: trace.status,
        degenerate_phases: degenerate,
    };
    Ok(best)
}

/// Solutions for `J = 0..=j_max`, each warm-started from the previous one, so
/// the throughput is nondecreasing in `J`.
pub fn solve_general_sweep(s: &Scenario, j_max: usize, opts: &ScaOptions) -> Result<Vec<Solution>> {
    let mut out = vec![solve_static(s, opts)?];
    for j in 1..=j_max {
        let prev = out.last().expect("non-empty");
        let next = solve_general_warm(s, j, opts, prev)?;
        out.push(next);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{generate_scenario, SystemConfig};
    use crate::sca::solve_user_adaptive_warm;

    fn small(n: usize, k: usize, seed: u64) -> Scenario {
        let mut cfg = SystemConfig::desk();
        cfg.num_elements = n;
        cfg.num_devices = k;
        cfg.seed = seed;
        generate_scenario(&cfg).unwrap()
    }

    fn quick() -> ScaOptions {
        ScaOptions {
            restarts: 2,
            parallel: false,
            ..ScaOptions::default()
        }
    }

    #[test]
    fn zero_vectors_is_static() {
        let s = small(6, 2, 3);
        let a = solve_general(&s, 0, &quick()).unwrap();
        let b = solve_static(&s, &quick()).unwrap();
        assert_eq!(a.throughput, b.throughput);
        let engine = solve_general_warm(&s, 0, &quick(), &b).unwrap();
        assert!(engine.throughput >= b.throughput - 1e-6);
        assert!(engine.throughput <= b.throughput * 1.01);
    }

    #[test]
    fn full_set_tracks_user_adaptive() {
        let s = small(8, 2, 7);
        let opts = quick();
        let stat = solve_static(&s, &opts).unwrap();
        let g = solve_general_warm(&s, 2, &opts, &stat).unwrap();
        let ua = solve_user_adaptive_warm(&s, &opts, &stat.plan.v0).unwrap();
        assert!((g.throughput - ua.throughput).abs() <= 0.01 * ua.throughput, "{} vs {}", g.throughput, ua.throughput);
        assert!(g.verify(&s, 1e-9).is_ok());
        for w in g.diagnostics.trace.windows(2) {
            assert!(w[1] >= w[0]);
        }
    }

    #[test]
    fn ul_adaptive_matches_static() {
        let s = small(6, 3, 2);
        let opts = quick();
        let stat = solve_static(&s, &opts).unwrap();
        let ul = solve_ul_adaptive_warm(&s, &opts, &stat.plan.v0).unwrap();
        assert!(ul.plan.assignment.iter().all(|&a| a == 1));
        assert!(ul.alloc.time.iter().all(|row| row[0] == 0.0));
        assert!(ul.throughput >= stat.throughput - 1e-9);
        assert!(ul.throughput <= stat.throughput * 1.01, "{} vs {}", ul.throughput, stat.throughput);
    }

    #[test]
    fn sweep_is_monotone() {
        let s = small(6, 2, 8);
        let sols = solve_general_sweep(&s, 3, &quick()).unwrap();
        for w in sols.windows(2) {
            assert!(w[1].throughput >= w[0].throughput - 1e-12);
        }
        assert_eq!(sols[3].plan.ul_vectors.len(), 3);
    }
}
