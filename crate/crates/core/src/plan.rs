//! Phase plans, per-slot allocations and finished solutions.

use serde::{Deserialize, Serialize};

use crate::channel::{combined_amplitude, PhaseKind, PhaseVector};
use crate::error::{Error, Result};
use crate::scenario::Scenario;

/// The DL vector `v0` plus `J` UL vectors and a device-to-slot map. Slot 0 is
/// `v0` itself; slot `j >= 1` is `ul_vectors[j - 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhasePlan {
    pub v0: PhaseVector,
    pub ul_vectors: Vec<PhaseVector>,
    pub assignment: Vec<usize>,
}

impl PhasePlan {
    /// Static plan: every device transmits under the DL vector.
    pub fn single(v0: PhaseVector, num_devices: usize) -> Self {
        Self {
            v0: v0.to_augmented(),
            ul_vectors: Vec::new(),
            assignment: vec![0; num_devices],
        }
    }

    pub fn new(v0: PhaseVector, ul_vectors: Vec<PhaseVector>, assignment: Vec<usize>) -> Self {
        Self {
            v0: v0.to_augmented(),
            ul_vectors: ul_vectors.iter().map(PhaseVector::to_augmented).collect(),
            assignment,
        }
    }

    /// `J + 1`.
    pub fn num_slots(&self) -> usize {
        1 + self.ul_vectors.len()
    }

    pub fn vector(&self, slot: usize) -> &PhaseVector {
        if slot == 0 {
            &self.v0
        } else {
            &self.ul_vectors[slot - 1]
        }
    }

    pub fn validate(&self, scenario: &Scenario) -> Result<()> {
        let n = scenario.num_elements();
        let k_total = scenario.num_devices();
        for slot in 0..self.num_slots() {
            let v = self.vector(slot);
            if v.num_elements() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: v.num_elements(),
                });
            }
            if v.kind() != PhaseKind::Augmented {
                return Err(Error::BadAugmentedTail("bare vector in plan".into()));
            }
        }
        if self.assignment.len() < k_total {
            return Err(Error::UnassignedDevice(self.assignment.len()));
        }
        if self.assignment.len() > k_total {
            return Err(Error::DimensionMismatch {
                expected: k_total,
                found: self.assignment.len(),
            });
        }
        for (device, &slot) in self.assignment.iter().enumerate() {
            if slot >= self.num_slots() {
                return Err(Error::SlotOutOfRange {
                    device,
                    slot,
                    slots: self.num_slots(),
                });
            }
        }
        Ok(())
    }

    /// `|h_{d,k} + q_k^H v_slot|^2`.
    pub fn gain(&self, scenario: &Scenario, device: usize, slot: usize) -> f64 {
        combined_amplitude(
            scenario.direct[device],
            &scenario.cascaded[device],
            self.vector(slot).irs(),
        )
        .norm_sqr()
    }
}

/// Time and energy per (device, slot), plus the DL duration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub tau0: f64,
    /// `time[k][j]`, seconds.
    pub time: Vec<Vec<f64>>,
    /// `energy[k][j]`, joules.
    pub energy: Vec<Vec<f64>>,
}

impl Allocation {
    pub fn zeros(num_devices: usize, num_slots: usize) -> Self {
        Self {
            tau0: 0.0,
            time: vec![vec![0.0; num_slots]; num_devices],
            energy: vec![vec![0.0; num_slots]; num_devices],
        }
    }

    pub fn power(&self, k: usize, j: usize) -> f64 {
        let t = self.time[k][j];
        if t > 0.0 {
            self.energy[k][j] / t
        } else {
            0.0
        }
    }

    pub fn total_time(&self) -> f64 {
        self.tau0 + self.time.iter().flatten().sum::<f64>()
    }

    pub fn device_energy(&self, k: usize) -> f64 {
        self.energy[k].iter().sum()
    }

    /// Sign, time-budget and zero-time checks.
    pub fn check(&self, total_time: f64) -> Result<()> {
        let all = std::iter::once(&self.tau0)
            .chain(self.time.iter().flatten())
            .chain(self.energy.iter().flatten());
        for &x in all {
            if !(x >= 0.0) {
                return Err(Error::InvalidArgument(format!("negative allocation entry {x}")));
            }
        }
        if self.total_time() > total_time + 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "time budget exceeded: {} > {total_time}",
                self.total_time()
            )));
        }
        for (t_row, e_row) in self.time.iter().zip(&self.energy) {
            for (&t, &e) in t_row.iter().zip(e_row) {
                if t == 0.0 && e != 0.0 {
                    return Err(Error::InvalidArgument("energy spent in a zero-length slot".into()));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    /// Closed form or exact allocation, no iteration involved.
    Exact,
    Converged,
    MaxIterations,
    /// A subproblem failed; the best iterate so far was kept.
    NumericalFailure,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Exact => "exact",
            SolveStatus::Converged => "converged",
            SolveStatus::MaxIterations => "max_iters",
            SolveStatus::NumericalFailure => "numerical_failure",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Objective (bits/Hz) per outer iteration of the winning run.
    pub trace: Vec<f64>,
    pub outer_iters: usize,
    pub restarts: usize,
    pub status: SolveStatus,
    /// Zero-modulus entries replaced during projection.
    pub degenerate_phases: usize,
}

impl Default for Diagnostics {
    fn default() -> Self {
        Self {
            trace: Vec::new(),
            outer_iters: 0,
            restarts: 0,
            status: SolveStatus::Exact,
            degenerate_phases: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub plan: PhasePlan,
    pub alloc: Allocation,
    /// Weighted sum throughput, bits/Hz.
    pub throughput: f64,
    /// Unweighted throughput of each device, bits/Hz.
    pub device_throughputs: Vec<f64>,
    pub diagnostics: Diagnostics,
}

impl Solution {
    /// Energy harvested by every device during the DL phase, joules.
    pub fn harvested_energy(&self, scenario: &Scenario) -> Vec<f64> {
        let p = scenario.config.hap_power_w();
        (0..scenario.num_devices())
            .map(|k| scenario.config.efficiency(k) * p * self.plan.gain(scenario, k, 0) * self.alloc.tau0)
            .collect()
    }

    /// Recomputes the throughput from `(plan, alloc)` and checks the energy
    /// causality and time constraints. Returns the recomputed value.
    pub fn verify(&self, scenario: &Scenario, tol: f64) -> Result<f64> {
        self.plan.validate(scenario)?;
        let (total, _) = evaluate_throughput(scenario, &self.plan, &self.alloc)?;
        if (total - self.throughput).abs() > tol * self.throughput.abs().max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "throughput {} does not match re-evaluation {total}",
                self.throughput
            )));
        }
        self.alloc.check(scenario.config.total_time)?;
        for (k, budget) in self.harvested_energy(scenario).iter().enumerate() {
            let used = self.alloc.device_energy(k);
            if used > budget + tol * budget.max(1e-30) {
                return Err(Error::InvalidArgument(format!(
                    "device {k} spends {used} J but harvested {budget} J"
                )));
            }
        }
        Ok(total)
    }
}

/// Weighted sum throughput `sum_k w_k sum_j t_kj log2(1 + p_kj gain_kj / sigma^2)`
/// and the unweighted per-device totals.
pub fn evaluate_throughput(scenario: &Scenario, plan: &PhasePlan, alloc: &Allocation) -> Result<(f64, Vec<f64>)> {
    let k_total = scenario.num_devices();
    let slots = plan.num_slots();
    if alloc.time.len() != k_total || alloc.energy.len() != k_total {
        return Err(Error::DimensionMismatch {
            expected: k_total,
            found: alloc.time.len(),
        });
    }
    let noise = scenario.config.noise_power_w();
    let mut per_device = vec![0.0; k_total];
    let mut total = 0.0;
    for k in 0..k_total {
        if alloc.time[k].len() != slots || alloc.energy[k].len() != slots {
            return Err(Error::DimensionMismatch {
                expected: slots,
                found: alloc.time[k].len(),
            });
        }
        let mut r = 0.0;
        for j in 0..slots {
            let t = alloc.time[k][j];
            if t > 0.0 {
                let snr = alloc.energy[k][j] * plan.gain(scenario, k, j) / (t * noise);
                r += t * snr.ln_1p() / std::f64::consts::LN_2;
            }
        }
        per_device[k] = r;
        total += scenario.config.weight(k) * r;
    }
    Ok((total, per_device))
}
