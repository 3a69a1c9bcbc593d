//! Semidefinite relaxation of the user-adaptive design.
//!
//! The downlink vector enters only through `tau0 v v^H`, so lifting it to a
//! PSD matrix `W0` with constant diagonal and dropping the rank constraint
//! gives a concave program whose optimum bounds every scheme from above.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::allocation::finish_solution;
use crate::channel::{project_unit_modulus, PhaseKind, PhaseVector};
use crate::error::{Error, Result};
use crate::kernel::{solve_subproblem, Affine, ConvexSubproblem, LmiBlock, SolverReport};
use crate::plan::{Allocation, PhasePlan, Solution};
use crate::sca::{aligned_vectors, pick_best, restart_rng, Normalized, DEGENERATE_GAIN};
use crate::scenario::Scenario;

/// Largest IRS size accepted by [`solve_relaxed`]. The Newton system grows
/// with the square of the lifted dimension.
pub const MAX_RELAXED_ELEMENTS: usize = 32;
pub const DEFAULT_SAMPLES: usize = 200;
const EIGEN_FLOOR: f64 = 1e-12;
const SAMPLE_STREAM: u64 = 2 << 32;

/// `W0 = tau0 V0` with `V0` PSD and unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedMatrix {
    pub w0: DMatrix<Complex64>,
    /// Seconds.
    pub tau0: f64,
}

impl LiftedMatrix {
    /// Rank-one lift `tau0 v v^H` of an augmented or bare phase vector.
    pub fn rank_one(v: &PhaseVector, tau0: f64) -> Self {
        let a = v.to_augmented();
        let e = a.entries();
        let w0 = DMatrix::from_fn(e.len(), e.len(), |i, j| e[i] * e[j].conj() * tau0);
        Self { w0, tau0 }
    }

    pub fn dim(&self) -> usize {
        self.w0.nrows()
    }

    /// Largest `|[W0]_nn - tau0|`.
    pub fn diagonal_deviation(&self) -> f64 {
        (0..self.dim())
            .map(|i| (self.w0[(i, i)] - Complex64::new(self.tau0, 0.0)).norm())
            .fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.w0.clone()).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Outcome of [`solve_relaxed`].
#[derive(Debug, Clone)]
pub struct RelaxedBound {
    pub lifted: LiftedMatrix,
    /// Relaxed allocation, laid out like the user-adaptive plan (device `k` on
    /// slot `k + 1`). Energies follow the lifted matrix, so no phase vector
    /// need achieve them.
    pub alloc: Allocation,
    /// Certified upper bound `T (objective + gap)` in bits/Hz.
    pub bound: f64,
    /// Relaxed objective at the returned point in bits/Hz.
    pub objective: f64,
    pub report: SolverReport,
}

/// Solves the rank-relaxed user-adaptive problem to duality gap `tol`
/// (normalised units).
pub fn solve_relaxed(s: &Scenario, tol: f64) -> Result<RelaxedBound> {
    let n = s.num_elements();
    if n > MAX_RELAXED_ELEMENTS {
        return Err(Error::InvalidArgument(format!(
            "relaxation supports at most {MAX_RELAXED_ELEMENTS} elements, got {n}"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    let norm = Normalized::new(s);
    let aligned = aligned_vectors(s);
    let k_total = s.num_devices();
    let dim = n + 1;

    let mut p = ConvexSubproblem::new();
    let tau0 = p.add_real("tau0");
    let mut pair_vars = Vec::with_capacity(dim * (dim - 1) / 2);
    for a in 0..dim {
        for b in (a + 1)..dim {
            let (re, im) = p.add_complex(&format!("w{a}_{b}"));
            pair_vars.push((a, b, re, im));
        }
    }
    let one = Complex64::new(1.0, 0.0);
    let j = Complex64::new(0.0, 1.0);
    let mut terms = vec![(tau0, (0..dim).map(|i| (i, i, one)).collect::<Vec<_>>())];
    for &(a, b, re, im) in &pair_vars {
        terms.push((re, vec![(a, b, one), (b, a, one)]));
        terms.push((im, vec![(a, b, j), (b, a, -j)]));
    }
    p.set_lmi(LmiBlock {
        dim,
        constant: Vec::new(),
        terms,
    });

    // Start from W0 = tau0 I, which is strictly inside the cone.
    let tau0_start = 0.5;
    let mut devices = Vec::new();
    let mut time = Affine::var(tau0);
    for k in 0..k_total {
        let row = &norm.rows[k];
        let ul_gain = norm.gain(k, aligned[k].entries());
        let row_energy: f64 = row.iter().map(|z| z.norm_sqr()).sum();
        if ul_gain < DEGENERATE_GAIN || row_energy < DEGENERATE_GAIN {
            continue;
        }
        let t = p.add_real(format!("t{k}"));
        let e = p.add_real(format!("e{k}"));
        p.add_perspective(t, e, norm.weights[k], norm.kappa[k] * ul_gain);
        // e_k <= Tr(Q_k W0) with Q_k[a][b] = conj(r_a) r_b.
        let mut harvest = Affine::var(tau0).scaled(row_energy);
        for &(a, b, re, im) in &pair_vars {
            let c = row[b].conj() * row[a];
            harvest.add_term(re, 2.0 * c.re);
            harvest.add_term(im, -2.0 * c.im);
        }
        harvest.add_term(e, -1.0);
        p.add_nonnegative(harvest);
        time.add_term(t, 1.0);
        devices.push((k, t, e, row_energy));
    }
    p.add_linear_le(time, 1.0);

    let mut start = vec![0.0; p.num_vars()];
    start[tau0] = tau0_start;
    let share = 0.4 / devices.len().max(1) as f64;
    for &(_, t, e, row_energy) in &devices {
        start[t] = share;
        start[e] = 0.5 * tau0_start * row_energy;
    }

    let (x, report) = if devices.is_empty() {
        let rep = SolverReport {
            status: crate::kernel::SolverStatus::Optimal,
            objective: 0.0,
            iterations: 0,
            gap: 0.0,
        };
        (start.clone(), rep)
    } else {
        solve_subproblem(&p, &start, tol)?
    };

    let t_total = norm.total_time;
    let mut w = DMatrix::<Complex64>::zeros(dim, dim);
    for i in 0..dim {
        w[(i, i)] = Complex64::new(x[tau0] * t_total, 0.0);
    }
    for &(a, b, re, im) in &pair_vars {
        let z = Complex64::new(x[re], x[im]) * t_total;
        w[(a, b)] = z;
        w[(b, a)] = z.conj();
    }
    let cfg = &s.config;
    let mut alloc = Allocation::zeros(k_total, k_total + 1);
    alloc.tau0 = x[tau0] * t_total;
    for &(k, t, e, _) in &devices {
        let unit = cfg.efficiency(k) * cfg.hap_power_w() * norm.g_ref * t_total;
        alloc.time[k][k + 1] = x[t] * t_total;
        alloc.energy[k][k + 1] = x[e] * unit;
    }
    let objective = p.objective(&x) * t_total;
    Ok(RelaxedBound {
        lifted: LiftedMatrix {
            w0: w,
            tau0: alloc.tau0,
        },
        alloc,
        bound: objective + report.gap.max(0.0) * t_total,
        objective,
        report,
    })
}

/// Recovers a feasible user-adaptive design from a lifted matrix.
///
/// Draws `samples` vectors from `CN(0, W0 / tau0)`, projects each onto the
/// unit-modulus set with the last entry fixed to 1 and re-optimises the
/// allocation with the aligned uplink vectors. The principal eigenvector is
/// always tried as well. Returns the best candidate.
pub fn gaussian_randomize(lifted: &LiftedMatrix, s: &Scenario, samples: usize) -> Result<Solution> {
    if samples == 0 {
        return Err(Error::InvalidArgument("at least one sample is required".into()));
    }
    if !(lifted.tau0 > 0.0) {
        return Err(Error::DegenerateLift(lifted.tau0));
    }
    let dim = s.num_elements() + 1;
    if lifted.dim() != dim || lifted.w0.ncols() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: lifted.dim(),
        });
    }
    let v0 = lifted.w0.map(|z| z / lifted.tau0);
    let eig = SymmetricEigen::new(v0);
    let mut factor = eig.eigenvectors.clone();
    for (i, &lambda) in eig.eigenvalues.iter().enumerate() {
        let scale = lambda.max(EIGEN_FLOOR).sqrt();
        for r in 0..dim {
            factor[(r, i)] *= scale;
        }
    }
    let principal = eig.eigenvalues.imax();

    let aligned = aligned_vectors(s);
    let assignment: Vec<usize> = (1..=s.num_devices()).collect();
    let finish = |xi: Vec<Complex64>| -> Result<Solution> {
        let proj = project_unit_modulus(&xi, PhaseKind::Augmented);
        let plan = PhasePlan::new(proj.vector, aligned.clone(), assignment.clone());
        let mut sol = finish_solution(s, &plan)?;
        sol.diagnostics.degenerate_phases = proj.degenerate;
        Ok(sol)
    };

    let seed = s.config.seed;
    let mut candidates = vec![finish(eig.eigenvectors.column(principal).iter().copied().collect())?];
    let drawn: Vec<Result<Solution>> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = restart_rng(seed, SAMPLE_STREAM + i);
            let z: Vec<Complex64> = (0..dim)
                .map(|_| {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
                })
                .collect();
            let xi = (0..dim).map(|r| (0..dim).map(|c| factor[(r, c)] * z[c]).sum()).collect();
            finish(xi)
        })
        .collect();
    for sol in drawn {
        candidates.push(sol?);
    }
    Ok(pick_best(candidates).expect("at least one candidate"))
}
