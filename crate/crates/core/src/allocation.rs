//! Exact time and energy allocation for a fixed phase plan.
//!
//! With the phase vectors fixed, every device's rate reduces to
//! `tau_k log2(1 + c_k tau0 / tau_k)`. The outer problem over `tau0` is
//! concave and solved by golden-section search; the inner split of the UL
//! budget is solved from its KKT conditions.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plan::{evaluate_throughput, Allocation, Diagnostics, PhasePlan, Solution};
use crate::scenario::Scenario;

const GOLDEN_ITERS: usize = 100;
const SPLIT_TOL: f64 = 1e-10;

/// Composite per-device coefficients `c_k = eta_k P_A g_dl g_ul / sigma^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectiveRates {
    pub coeffs: Vec<f64>,
    pub weights: Vec<f64>,
}

impl EffectiveRates {
    pub fn new(coeffs: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if coeffs.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: coeffs.len(),
                found: weights.len(),
            });
        }
        if let Some(c) = coeffs.iter().find(|c| !(**c >= 0.0 && c.is_finite())) {
            return Err(Error::InvalidArgument(format!("rate coefficient {c} must be finite and nonnegative")));
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0 && w.is_finite())) {
            return Err(Error::InvalidArgument(format!("weight {w} must be finite and nonnegative")));
        }
        Ok(Self { coeffs, weights })
    }

    pub fn uniform(coeffs: Vec<f64>) -> Result<Self> {
        let w = vec![1.0; coeffs.len()];
        Self::new(coeffs, w)
    }
}

/// DL duration and per-device UL durations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeAllocation {
    pub tau0: f64,
    pub tau: Vec<f64>,
}

/// `tau log2(1 + a / tau)`, extended by its limit 0 at `tau = 0`.
pub fn perspective_rate(tau: f64, a: f64) -> f64 {
    if tau <= 0.0 || a <= 0.0 {
        0.0
    } else {
        tau * (a / tau).ln_1p() / LN_2
    }
}

/// `ln(1 + x) - x / (1 + x)`: the marginal value of UL time at SNR `x`.
fn marginal(x: f64) -> f64 {
    if x < 1e-3 {
        // sum_{n>=2} (-1)^n (n-1)/n x^n, avoiding cancellation.
        let mut term = x;
        let mut acc = 0.0;
        for n in 2..10 {
            term *= -x;
            acc -= term * (n - 1) as f64 / n as f64;
        }
        acc
    } else {
        x.ln_1p() - x / (1.0 + x)
    }
}

/// Inverse of [`marginal`] on `(0, inf)`, solved by safeguarded Newton in `ln x`.
fn marginal_inverse(y: f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    let (mut lo, mut hi) = (-700.0_f64, 700.0_f64);
    // Small-y behaviour is x^2/2, large-y behaviour is e^(y+1).
    let mut u = if y < 1.0 { (2.0 * y).sqrt().ln() } else { y + 1.0 };
    u = u.clamp(lo, hi);
    for _ in 0..100 {
        let x = u.exp();
        let f = marginal(x) - y;
        if f > 0.0 {
            hi = u;
        } else {
            lo = u;
        }
        let slope = x * x / ((1.0 + x) * (1.0 + x));
        let mut next = u - f / slope.max(1e-300);
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - u).abs() <= 1e-15 * u.abs().max(1.0) {
            u = next;
            break;
        }
        u = next;
    }
    u.exp()
}

/// Splits the UL budget `t_ul` among devices to maximise
/// `sum_k w_k tau_k log2(1 + a_k / tau_k)`.
///
/// At the optimum every active device satisfies `w_k phi(a_k / tau_k) = nu`
/// for a common multiplier `nu`, which is found by bisection.
pub fn inner_split(a: &[f64], t_ul: f64, w: &[f64]) -> Result<Vec<f64>> {
    if !(t_ul >= 0.0) {
        return Err(Error::NegativeBudget(t_ul));
    }
    if a.len() != w.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: w.len(),
        });
    }
    let active: Vec<usize> = (0..a.len()).filter(|&k| a[k] > 0.0 && w[k] > 0.0).collect();
    let mut tau = vec![0.0; a.len()];
    if active.is_empty() || t_ul == 0.0 {
        return Ok(tau);
    }
    if active.len() == 1 {
        tau[active[0]] = t_ul;
        return Ok(tau);
    }

    let w_ref = w[active[0]];
    if active.iter().all(|&k| w[k] == w_ref) {
        // Equal weights share one SNR, so time is proportional to a_k.
        let total: f64 = active.iter().map(|&k| a[k]).sum();
        for &k in &active {
            tau[k] = t_ul * a[k] / total;
        }
        return Ok(tau);
    }

    let used = |ln_nu: f64| -> f64 {
        let nu = ln_nu.exp();
        active.iter().map(|&k| a[k] / marginal_inverse(nu / w[k])).sum()
    };
    // Equal-SNR guess for the multiplier, then expand to a bracket. Larger nu
    // means higher SNR and therefore less time used.
    let total: f64 = active.iter().map(|&k| a[k]).sum();
    let w_max = active.iter().map(|&k| w[k]).fold(0.0, f64::max);
    let guess = (w_max * marginal(total / t_ul)).max(1e-300).ln();
    let (mut lo, mut hi) = (guess, guess);
    while used(lo) < t_ul {
        lo -= 2.0;
        if lo < -700.0 {
            break;
        }
    }
    while used(hi) > t_ul {
        hi += 2.0;
        if hi > 700.0 {
            break;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let s = used(mid);
        if (s - t_ul).abs() <= SPLIT_TOL * t_ul {
            lo = mid;
            hi = mid;
            break;
        }
        if s > t_ul {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    let nu = (0.5 * (lo + hi)).exp();
    for &k in &active {
        tau[k] = a[k] / marginal_inverse(nu / w[k]);
    }
    let s: f64 = tau.iter().sum();
    if s > 0.0 {
        for t in &mut tau {
            *t *= t_ul / s;
        }
    }
    Ok(tau)
}

fn split_value(rates: &EffectiveRates, tau0: f64, t_max: f64) -> Result<(Vec<f64>, f64)> {
    let t_ul = (t_max - tau0).max(0.0);
    let a: Vec<f64> = rates.coeffs.iter().map(|c| c * tau0).collect();
    let tau = inner_split(&a, t_ul, &rates.weights)?;
    let r = tau
        .iter()
        .zip(&a)
        .zip(&rates.weights)
        .map(|((&t, &ak), &wk)| wk * perspective_rate(t, ak))
        .sum();
    Ok((tau, r))
}

/// Maximises `sum_k w_k tau_k log2(1 + c_k tau0 / tau_k)` subject to
/// `tau0 + sum_k tau_k = t_max`. Returns the allocation and the objective.
pub fn allocate(rates: &EffectiveRates, t_max: f64) -> Result<(TimeAllocation, f64)> {
    if !(t_max > 0.0) {
        return Err(Error::InvalidArgument(format!("total time {t_max} must be positive")));
    }
    let k_total = rates.coeffs.len();
    let live = rates
        .coeffs
        .iter()
        .zip(&rates.weights)
        .any(|(&c, &w)| c > 0.0 && w > 0.0);
    if !live {
        return Ok((
            TimeAllocation {
                tau0: 0.0,
                tau: vec![0.0; k_total],
            },
            0.0,
        ));
    }

    let ratio = 0.5 * (5.0_f64.sqrt() - 1.0);
    let (mut a, mut b) = (0.0, t_max);
    let mut x1 = b - ratio * (b - a);
    let mut x2 = a + ratio * (b - a);
    let mut f1 = split_value(rates, x1, t_max)?.1;
    let mut f2 = split_value(rates, x2, t_max)?.1;
    for _ in 0..GOLDEN_ITERS {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + ratio * (b - a);
            f2 = split_value(rates, x2, t_max)?.1;
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - ratio * (b - a);
            f1 = split_value(rates, x1, t_max)?.1;
        }
    }
    let tau0 = if f1 >= f2 { x1 } else { x2 };
    let (tau, r) = split_value(rates, tau0, t_max)?;
    Ok((TimeAllocation { tau0, tau }, r))
}

/// Effective rate coefficients of every device under `plan`.
pub fn plan_rates(scenario: &Scenario, plan: &PhasePlan) -> Result<EffectiveRates> {
    plan.validate(scenario)?;
    let cfg = &scenario.config;
    let scale = cfg.hap_power_w() / cfg.noise_power_w();
    let coeffs = (0..scenario.num_devices())
        .map(|k| {
            let dl = plan.gain(scenario, k, 0);
            let ul = plan.gain(scenario, k, plan.assignment[k]);
            cfg.efficiency(k) * scale * dl * ul
        })
        .collect();
    let weights = (0..scenario.num_devices()).map(|k| cfg.weight(k)).collect();
    EffectiveRates::new(coeffs, weights)
}

/// Optimal allocation for a fixed plan, with energy causality met with
/// equality for every transmitting device.
pub fn finish_solution(scenario: &Scenario, plan: &PhasePlan) -> Result<Solution> {
    let rates = plan_rates(scenario, plan)?;
    let cfg = &scenario.config;
    let (times, _) = allocate(&rates, cfg.total_time)?;
    let slots = plan.num_slots();
    let mut alloc = Allocation::zeros(scenario.num_devices(), slots);
    alloc.tau0 = times.tau0;
    for (k, &tau) in times.tau.iter().enumerate() {
        if tau > 0.0 {
            let slot = plan.assignment[k];
            alloc.time[k][slot] = tau;
            alloc.energy[k][slot] = cfg.efficiency(k) * cfg.hap_power_w() * plan.gain(scenario, k, 0) * times.tau0;
        }
    }
    let (throughput, device_throughputs) = evaluate_throughput(scenario, plan, &alloc)?;
    Ok(Solution {
        plan: plan.clone(),
        alloc,
        throughput,
        device_throughputs,
        diagnostics: Diagnostics::default(),
    })
}
