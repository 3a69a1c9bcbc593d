use crate::allocation::finish_solution;
use crate::error::Result;
use crate::plan::{evaluate_throughput, Allocation, PhasePlan, Solution};
use crate::scenario::Scenario;

/// Moves every device onto the single slot with its highest gain.
///
/// Each device's time and energy across all slots are pooled onto that slot,
/// which cannot lower its rate by concavity of `t log2(1 + e g / t)`. The
/// allocation is then re-optimised exactly. Lower slot index wins ties.
pub fn round_association(sol: &Solution, s: &Scenario) -> Result<Solution> {
    round_association_from(sol, s, 0)
}

/// As [`round_association`], choosing only among slots `first` and up.
pub(crate) fn round_association_from(sol: &Solution, s: &Scenario, first: usize) -> Result<Solution> {
    let plan = &sol.plan;
    plan.validate(s)?;
    let k_total = s.num_devices();
    let slots = plan.num_slots();
    let mut assignment = Vec::with_capacity(k_total);
    for k in 0..k_total {
        let mut best = first;
        let mut best_gain = plan.gain(s, k, first);
        for j in (first + 1)..slots {
            let g = plan.gain(s, k, j);
            if g > best_gain {
                best = j;
                best_gain = g;
            }
        }
        assignment.push(best);
    }
    let rounded_plan = PhasePlan {
        v0: plan.v0.clone(),
        ul_vectors: plan.ul_vectors.clone(),
        assignment,
    };

    let mut pooled = Allocation::zeros(k_total, slots);
    pooled.tau0 = sol.alloc.tau0;
    for k in 0..k_total {
        let t: f64 = sol.alloc.time[k].iter().sum();
        let e: f64 = sol.alloc.energy[k].iter().sum();
        if t > 0.0 {
            let j = rounded_plan.assignment[k];
            pooled.time[k][j] = t;
            pooled.energy[k][j] = e;
        }
    }
    let (throughput, device_throughputs) = evaluate_throughput(s, &rounded_plan, &pooled)?;
    let pooled_sol = Solution {
        plan: rounded_plan.clone(),
        alloc: pooled,
        throughput,
        device_throughputs,
        diagnostics: sol.diagnostics.clone(),
    };
    let mut finished = finish_solution(s, &rounded_plan)?;
    finished.diagnostics = sol.diagnostics.clone();
    Ok(if finished.throughput >= pooled_sol.throughput {
        finished
    } else {
        pooled_sol
    })
}
