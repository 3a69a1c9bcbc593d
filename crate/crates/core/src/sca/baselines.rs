use super::{pick_best, random_phases, restart_rng};
use crate::allocation::finish_solution;
use crate::channel::PhaseVector;
use crate::error::{Error, Result};
use crate::plan::{PhasePlan, Solution};
use crate::scenario::Scenario;

/// Stream offset keeping baseline draws apart from solver restarts.
const RANDOM_BASELINE_STREAM: u64 = 1 << 32;

/// Best of `trials` uniformly random static vectors, each with optimal allocation.
pub fn baseline_random_phases(s: &Scenario, trials: usize) -> Result<Solution> {
    if trials == 0 {
        return Err(Error::InvalidArgument("at least one trial is required".into()));
    }
    let mut rng = restart_rng(s.config.seed, RANDOM_BASELINE_STREAM);
    let mut sols = Vec::with_capacity(trials);
    for _ in 0..trials {
        let v = random_phases(s.num_elements(), &mut rng);
        sols.push(finish_solution(s, &PhasePlan::single(v, s.num_devices()))?);
    }
    Ok(pick_best(sols).expect("trials > 0"))
}

/// Optimal allocation with the reflected paths removed. The returned solution
/// refers to `s.without_irs()`.
pub fn baseline_no_irs(s: &Scenario) -> Result<Solution> {
    let plain = s.without_irs();
    finish_solution(&plain, &PhasePlan::single(PhaseVector::ones(s.num_elements()), s.num_devices()))
}
