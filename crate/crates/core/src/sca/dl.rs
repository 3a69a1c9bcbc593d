//! Schemes whose only optimised vector is the DL vector `v0`: static,
//! hybrid and user-adaptive. Devices either share `v0` for their UL slot or
//! use a fixed vector aligned to their own channel.

use num_complex::Complex64;

use super::{
    augment, map_maybe_parallel, pick_best, random_phases, restart_rng, Normalized, ScaOptions, ScaTrace,
    DEGENERATE_GAIN, INTERIOR,
};
use crate::allocation::{finish_solution, perspective_rate};
use crate::channel::{align_phases, project_unit_modulus, PhaseKind, PhaseVector};
use crate::error::{Error, Result};
use crate::kernel::{solve_subproblem, Affine, ConvexSubproblem};
use crate::plan::{Diagnostics, PhasePlan, Solution, SolveStatus};
use crate::scenario::Scenario;
use crate::surrogates::{DlEnergySurrogate, QuarticSurrogate, RealLinear};

#[derive(Debug, Clone, Copy, PartialEq)]
enum Role {
    /// UL under `v0`; the rate depends on `tau0 |s(v0)|^4`.
    Shared,
    /// UL under a fixed vector with normalised gain `ul_gain`.
    Dedicated { ul_gain: f64 },
}

#[derive(Debug, Clone)]
struct DlState {
    v: Vec<Complex64>,
    tau0: f64,
    t: Vec<f64>,
}

/// Devices sorted by descending aligned gain; lower index wins ties.
pub fn device_order(s: &Scenario) -> Vec<usize> {
    let gains: Vec<f64> = (0..s.num_devices())
        .map(|k| align_phases(s.direct[k], &s.cascaded[k]).1)
        .collect();
    let mut order: Vec<usize> = (0..s.num_devices()).collect();
    order.sort_by(|&a, &b| gains[b].partial_cmp(&gains[a]).unwrap_or(std::cmp::Ordering::Equal));
    order
}

pub(crate) fn aligned_vectors(s: &Scenario) -> Vec<PhaseVector> {
    (0..s.num_devices())
        .map(|k| align_phases(s.direct[k], &s.cascaded[k]).0)
        .collect()
}

fn relaxed_value(norm: &Normalized, roles: &[Role], st: &DlState) -> f64 {
    roles
        .iter()
        .enumerate()
        .map(|(k, role)| {
            let g = norm.gain(k, &st.v);
            let a = match role {
                Role::Shared => norm.kappa[k] * st.tau0 * g * g,
                Role::Dedicated { ul_gain } => norm.kappa[k] * st.tau0 * g * ul_gain,
            };
            norm.weights[k] * perspective_rate(st.t[k], a)
        })
        .sum()
}

/// Affine `Re(sum c_n v_n) + extra` over the IRS variables, with the direct
/// entry fixed to 1.
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

/// One convex step around `st`. `None` when no strictly feasible start exists
/// or the kernel rejects the problem.
fn dl_step(norm: &Normalized, roles: &[Role], active: &[usize], st: &DlState, tol: f64) -> Option<DlState> {
    let n = norm.num_elements();
    let w = augment(&st.v);
    let t0 = st.tau0;

    let mut p = ConvexSubproblem::new();
    let tau0 = p.add_real("tau0");
    let v_vars: Vec<(usize, usize)> = (0..n).map(|i| p.add_complex(&format!("v{i}"))).collect();
    let mut time = Affine::var(tau0);
    let mut dev_vars = Vec::with_capacity(active.len());
    for &k in active {
        let t = p.add_real(format!("t{k}"));
        let s = p.add_real(format!("S{k}"));
        time.add_term(t, 1.0);
        let (lin, beta, exponent, extra, gain) = match roles[k] {
            Role::Shared => {
                let q = QuarticSurrogate::new(&norm.rows[k], &w, t0).ok()?;
                (q.linear, q.beta, 0.5, q.constant, norm.kappa[k])
            }
            Role::Dedicated { ul_gain } => {
                let d = DlEnergySurrogate::new(&norm.rows[k], &w, t0).ok()?;
                (d.linear, d.beta, 1.0, 0.0, norm.kappa[k] * ul_gain)
            }
        };
        let base = phase_affine(&lin, &v_vars, extra);
        p.add_power_ratio_le(tau0, beta, exponent, base.clone().with_term(s, -1.0));
        p.add_perspective(t, s, norm.weights[k], gain);
        dev_vars.push((k, t, s, base, beta, exponent));
    }
    p.add_linear_le(time, 1.0);
    p.add_nonnegative(Affine::var(tau0));
    for &(re, im) in &v_vars {
        p.add_unit_disk(re, im);
    }

    // Strictly feasible start next to `st`.
    let mut x0 = vec![0.0; p.num_vars()];
    let shrink = 1.0 - INTERIOR;
    let total: f64 = st.tau0 + active.iter().map(|&k| st.t[k].max(1e-9)).sum::<f64>();
    let factor = shrink / total.max(1.0);
    x0[tau0] = st.tau0 * factor;
    for (i, &(re, im)) in v_vars.iter().enumerate() {
        x0[re] = st.v[i].re * shrink;
        x0[im] = st.v[i].im * shrink;
    }
    for &(k, t, ..) in &dev_vars {
        x0[t] = st.t[k].max(1e-9) * factor;
    }
    for (_, _, s, base, beta, exponent) in &dev_vars {
        let bound = base.eval(&x0) - beta * x0[tau0].powf(-exponent);
        if !(bound > 0.0) {
            return None;
        }
        x0[*s] = bound * shrink;
    }

    let (x, _report) = match solve_subproblem(&p, &x0, tol) {
        Ok(r) => r,
        Err(e) => {
            log::debug!("DL subproblem rejected: {e}");
            return None;
        }
    };
    let mut t = vec![0.0; norm.num_devices()];
    for &(k, tv, ..) in &dev_vars {
        t[k] = x[tv];
    }
    Some(DlState {
        v: v_vars.iter().map(|&(re, im)| Complex64::new(x[re], x[im])).collect(),
        tau0: x[tau0],
        t,
    })
}

fn sca_dl(norm: &Normalized, roles: &[Role], init: DlState, opts: &ScaOptions) -> (DlState, ScaTrace) {
    let mut st = init;
    let mut trace = ScaTrace::start(relaxed_value(norm, roles, &st));
    for _ in 0..opts.max_outer_iters {
        let active: Vec<usize> = (0..norm.num_devices())
            .filter(|&k| {
                let g = norm.gain(k, &st.v);
                let ul_ok = match roles[k] {
                    Role::Shared => true,
                    Role::Dedicated { ul_gain } => ul_gain > DEGENERATE_GAIN,
                };
                norm.weights[k] > 0.0 && norm.kappa[k] > 0.0 && g > DEGENERATE_GAIN && ul_ok
            })
            .collect();
        if active.is_empty() || st.tau0 <= 0.0 {
            trace.status = SolveStatus::Converged;
            break;
        }
        let Some(next) = dl_step(norm, roles, &active, &st, opts.subproblem_tol) else {
            trace.iterations += 1;
            trace.status = SolveStatus::NumericalFailure;
            break;
        };
        let value = relaxed_value(norm, roles, &next);
        let (accepted, more) = trace.push(value, opts.convergence_tol);
        if accepted {
            st = next;
        }
        if !more {
            break;
        }
    }
    (st, trace)
}

/// SCA from `start` followed by projection and exact allocation. The finished
/// start plan is kept if it is better.
fn run_from(
    s: &Scenario,
    norm: &Normalized,
    roles: &[Role],
    build: &dyn Fn(PhaseVector) -> PhasePlan,
    start: &PhaseVector,
    opts: &ScaOptions,
) -> Result<Solution> {
    let bare = start.to_bare();
    let warm = finish_solution(s, &build(bare.clone()))?;
    let t_total = norm.total_time;
    let init = DlState {
        v: bare.entries().to_vec(),
        tau0: warm.alloc.tau0 / t_total,
        t: warm.alloc.time.iter().map(|row| row.iter().sum::<f64>() / t_total).collect(),
    };
    let (state, trace) = sca_dl(norm, roles, init, opts);
    let projection = project_unit_modulus(&state.v, PhaseKind::Bare);
    let refined = finish_solution(s, &build(projection.vector))?;
    let diagnostics = Diagnostics {
        trace: trace.values.iter().map(|v| v * t_total).collect(),
        outer_iters: trace.iterations,
        restarts: 1,
        status: trace.status,
        degenerate_phases: projection.degenerate,
    };
    let mut best = if refined.throughput >= warm.throughput { refined } else { warm };
    best.diagnostics = diagnostics;
    Ok(best)
}

fn run_starts(
    s: &Scenario,
    roles: &[Role],
    build: &(dyn Fn(PhaseVector) -> PhasePlan + Sync),
    starts: &[PhaseVector],
    opts: &ScaOptions,
) -> Result<Solution> {
    opts.validate()?;
    if starts.is_empty() {
        return Err(Error::InvalidArgument("at least one start vector is required".into()));
    }
    for v in starts {
        if v.num_elements() != s.num_elements() {
            return Err(Error::DimensionMismatch {
                expected: s.num_elements(),
                found: v.num_elements(),
            });
        }
    }
    let norm = Normalized::new(s);
    let runs = map_maybe_parallel(starts.to_vec(), opts.parallel, |v| {
        run_from(s, &norm, roles, build, &v, opts)
    });
    let runs: Vec<Solution> = runs.into_iter().collect::<Result<_>>()?;
    let mut best = pick_best(runs).expect("non-empty starts");
    best.diagnostics.restarts = starts.len();
    Ok(best)
}

/// Static scheme: one vector for DL and every UL slot.
///
/// Starts from the vector aligned to the strongest device plus
/// `restarts - 1` uniformly random vectors.
pub fn solve_static(s: &Scenario, opts: &ScaOptions) -> Result<Solution> {
    opts.validate()?;
    let order = device_order(s);
    let mut starts = vec![align_phases(s.direct[order[0]], &s.cascaded[order[0]]).0];
    for r in 1..opts.restarts {
        let mut rng = restart_rng(opts.seed, r as u64);
        starts.push(random_phases(s.num_elements(), &mut rng));
    }
    solve_static_from(s, &starts, opts)
}

/// Static scheme from explicit start vectors.
pub fn solve_static_from(s: &Scenario, starts: &[PhaseVector], opts: &ScaOptions) -> Result<Solution> {
    let k_total = s.num_devices();
    let roles = vec![Role::Shared; k_total];
    let build = move |v: PhaseVector| PhasePlan::single(v, k_total);
    run_starts(s, &roles, &build, starts, opts)
}

fn hybrid_parts(s: &Scenario, j: usize) -> (Vec<Role>, Vec<PhaseVector>, Vec<usize>) {
    let norm = Normalized::new(s);
    let aligned = aligned_vectors(s);
    let order = device_order(s);
    let mut roles = vec![Role::Shared; s.num_devices()];
    let mut ul = Vec::with_capacity(j);
    let mut assignment = vec![0; s.num_devices()];
    for (slot, &k) in order.iter().take(j).enumerate() {
        roles[k] = Role::Dedicated {
            ul_gain: norm.gain(k, aligned[k].entries()),
        };
        ul.push(aligned[k].clone());
        assignment[k] = slot + 1;
    }
    (roles, ul, assignment)
}

/// Hybrid scheme: the `j` strongest devices get their own aligned UL vector,
/// the rest share `v0`. Warm-started from the static solution.
pub fn solve_hybrid(s: &Scenario, j: usize, opts: &ScaOptions) -> Result<Solution> {
    if j > s.num_devices() {
        return Err(Error::TooManyVectors {
            requested: j,
            devices: s.num_devices(),
        });
    }
    let stat = solve_static(s, opts)?;
    if j == 0 {
        return Ok(stat);
    }
    solve_hybrid_warm(s, j, opts, &stat.plan.v0)
}

/// Hybrid scheme from a given DL vector.
pub fn solve_hybrid_warm(s: &Scenario, j: usize, opts: &ScaOptions, v0: &PhaseVector) -> Result<Solution> {
    if j > s.num_devices() {
        return Err(Error::TooManyVectors {
            requested: j,
            devices: s.num_devices(),
        });
    }
    let (roles, ul, assignment) = hybrid_parts(s, j);
    let build = move |v: PhaseVector| PhasePlan::new(v, ul.clone(), assignment.clone());
    run_starts(s, &roles, &build, std::slice::from_ref(v0), opts)
}

/// User-adaptive scheme: every device has its own aligned UL vector and only
/// `v0` and the allocation are optimised. Warm-started from the static
/// solution, so the result is never below it.
pub fn solve_user_adaptive(s: &Scenario, opts: &ScaOptions) -> Result<Solution> {
    let stat = solve_static(s, opts)?;
    solve_user_adaptive_warm(s, opts, &stat.plan.v0)
}

/// User-adaptive scheme from a given DL vector. Device `k` uses slot `k + 1`.
pub fn solve_user_adaptive_warm(s: &Scenario, opts: &ScaOptions, v0: &PhaseVector) -> Result<Solution> {
    let norm = Normalized::new(s);
    let aligned = aligned_vectors(s);
    let roles: Vec<Role> = (0..s.num_devices())
        .map(|k| Role::Dedicated {
            ul_gain: norm.gain(k, aligned[k].entries()),
        })
        .collect();
    let assignment: Vec<usize> = (1..=s.num_devices()).collect();
    let build = move |v: PhaseVector| PhasePlan::new(v, aligned.clone(), assignment.clone());
    run_starts(s, &roles, &build, std::slice::from_ref(v0), opts)
}
