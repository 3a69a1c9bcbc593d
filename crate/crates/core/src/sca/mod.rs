//! Successive convex approximation solvers for the four beamforming schemes,
//! association rounding and the two reference baselines.
//!
//! All schemes share one normalisation: times are fractions of `T`, channel
//! rows are divided by `sqrt(g_ref)` with `g_ref` the strongest aligned gain,
//! and each device carries `kappa_k = eta_k P_A g_ref^2 / sigma^2`.

mod baselines;
mod dl;
mod general;
mod rounding;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{align_phases, PhaseVector};
use crate::error::{Error, Result};
use crate::plan::{Solution, SolveStatus};
use crate::scenario::Scenario;

pub use baselines::{baseline_no_irs, baseline_random_phases};
pub use dl::{
    device_order, solve_hybrid, solve_hybrid_warm, solve_static, solve_static_from, solve_user_adaptive,
    solve_user_adaptive_warm,
};
pub use general::{solve_general, solve_general_sweep, solve_general_warm, solve_ul_adaptive, solve_ul_adaptive_warm};
pub use rounding::round_association;
pub(crate) use dl::aligned_vectors;

/// Below this normalised gain a device is left out of the convex subproblems.
pub(crate) const DEGENERATE_GAIN: f64 = 1e-12;
/// Relative pull-in used to make the expansion point strictly feasible.
const INTERIOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScaOptions {
    pub max_outer_iters: usize,
    /// Stop when the relative objective change falls below this.
    pub convergence_tol: f64,
    pub restarts: usize,
    /// Duality-gap target of each convex subproblem.
    pub subproblem_tol: f64,
    pub seed: u64,
    /// Run restarts on the rayon pool.
    pub parallel: bool,
}

impl Default for ScaOptions {
    fn default() -> Self {
        Self {
            max_outer_iters: 50,
            convergence_tol: 1e-6,
            restarts: 5,
            subproblem_tol: 1e-9,
            seed: 0,
            parallel: true,
        }
    }
}

impl ScaOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_outer_iters == 0 || self.restarts == 0 {
            return Err(Error::InvalidArgument("iteration and restart counts must be positive".into()));
        }
        if !(self.convergence_tol > 0.0) || !(self.subproblem_tol > 0.0) {
            return Err(Error::InvalidArgument("tolerances must be positive".into()));
        }
        Ok(())
    }
}

/// Scaled channel data shared by the SCA engines.
#[derive(Debug, Clone)]
pub(crate) struct Normalized {
    /// `q_bar_k^H / sqrt(g_ref)`, IRS entries then the direct entry.
    pub rows: Vec<Vec<Complex64>>,
    pub kappa: Vec<f64>,
    pub weights: Vec<f64>,
    pub g_ref: f64,
    pub total_time: f64,
}

impl Normalized {
    pub fn new(s: &Scenario) -> Self {
        let cfg = &s.config;
        let g_ref = (0..s.num_devices())
            .map(|k| align_phases(s.direct[k], &s.cascaded[k]).1)
            .fold(0.0, f64::max);
        let g_ref = if g_ref > 0.0 { g_ref } else { 1.0 };
        let scale = 1.0 / g_ref.sqrt();
        let rows = (0..s.num_devices())
            .map(|k| s.augmented_row(k).iter().map(|z| z * scale).collect())
            .collect();
        let kappa = (0..s.num_devices())
            .map(|k| cfg.efficiency(k) * cfg.hap_power_w() * g_ref * g_ref / cfg.noise_power_w())
            .collect();
        let weights = (0..s.num_devices()).map(|k| cfg.weight(k)).collect();
        Self {
            rows,
            kappa,
            weights,
            g_ref,
            total_time: cfg.total_time,
        }
    }

    pub fn num_devices(&self) -> usize {
        self.rows.len()
    }

    pub fn num_elements(&self) -> usize {
        self.rows.first().map_or(0, |r| r.len() - 1)
    }

    /// Normalised gain `|s_k(v)|^2` for the IRS part `v` (direct entry 1).
    pub fn gain(&self, k: usize, v: &[Complex64]) -> f64 {
        let row = &self.rows[k];
        let n = row.len() - 1;
        let amp: Complex64 = row[n] + row[..n].iter().zip(v).map(|(b, z)| b * z).sum::<Complex64>();
        amp.norm_sqr()
    }
}

/// `v` with a trailing 1.
pub(crate) fn augment(v: &[Complex64]) -> Vec<Complex64> {
    let mut out = v.to_vec();
    out.push(Complex64::new(1.0, 0.0));
    out
}

pub(crate) fn random_phases(n: usize, rng: &mut impl Rng) -> PhaseVector {
    let angles: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * std::f64::consts::TAU).collect();
    PhaseVector::from_angles(&angles)
}

pub(crate) fn restart_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Runs `f` over `items`, in parallel when asked, preserving order.
pub(crate) fn map_maybe_parallel<T, U, F>(items: Vec<T>, parallel: bool, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync + Send,
{
    if parallel {
        items.into_par_iter().map(f).collect()
    } else {
        items.into_iter().map(f).collect()
    }
}

/// Highest throughput wins; earlier candidates win ties.
pub(crate) fn pick_best(candidates: Vec<Solution>) -> Option<Solution> {
    candidates.into_iter().fold(None, |best, c| match best {
        Some(b) if b.throughput >= c.throughput => Some(b),
        _ => Some(c),
    })
}

/// Outcome of one SCA run, in normalised units.
#[derive(Debug, Clone)]
pub(crate) struct ScaTrace {
    pub values: Vec<f64>,
    pub iterations: usize,
    pub status: SolveStatus,
}

impl ScaTrace {
    pub fn start(value: f64) -> Self {
        Self {
            values: vec![value],
            iterations: 0,
            status: SolveStatus::MaxIterations,
        }
    }

    /// Records `value` if it does not decrease the objective. Returns
    /// `(accepted, continue)`.
    pub fn push(&mut self, value: f64, tol: f64) -> (bool, bool) {
        self.iterations += 1;
        let last = *self.values.last().expect("trace starts non-empty");
        if !(value >= last) {
            // Subproblem accuracy floor reached.
            self.status = SolveStatus::Converged;
            return (false, false);
        }
        self.values.push(value);
        if value - last <= tol * last.abs().max(1e-12) {
            self.status = SolveStatus::Converged;
            return (true, false);
        }
        (true, true)
    }
}
