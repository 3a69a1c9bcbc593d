use std::f64::consts::LN_2;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::problem::{constraint_slack, Constraint, ConvexSubproblem, LmiBlock};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolverStatus {
    Optimal,
    MaxIterations,
    NumericalFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub status: SolverStatus,
    pub objective: f64,
    /// Total Newton steps over all barrier stages.
    pub iterations: usize,
    /// Duality-gap bound `m / t` at the last completed barrier stage.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Target duality gap.
    pub tol: f64,
    /// Barrier parameter growth per stage.
    pub mu: f64,
    pub t_init: f64,
    pub max_newton_per_stage: usize,
    pub max_stages: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            mu: 10.0,
            t_init: 1.0,
            max_newton_per_stage: 80,
            max_stages: 40,
        }
    }
}

/// Solves `p` from the strictly feasible point `start` to absolute accuracy `tol`.
pub fn solve_subproblem(p: &ConvexSubproblem, start: &[f64], tol: f64) -> Result<(Vec<f64>, SolverReport)> {
    let opts = SolverOptions {
        tol,
        ..SolverOptions::default()
    };
    solve_with_options(p, start, &opts)
}

pub fn solve_with_options(p: &ConvexSubproblem, start: &[f64], opts: &SolverOptions) -> Result<(Vec<f64>, SolverReport)> {
    p.check_indices()?;
    let n = p.num_vars();
    if start.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: start.len(),
        });
    }
    if let Some(bad) = start.iter().position(|x| !x.is_finite()) {
        return Err(Error::InfeasibleStart(format!("variable {} is not finite", p.names[bad])));
    }
    for (i, c) in p.constraints.iter().enumerate() {
        let s = constraint_slack(c, start);
        if !(s > 0.0) {
            return Err(Error::InfeasibleStart(format!("constraint {i} has slack {s}")));
        }
    }
    for (i, e) in p.equalities.iter().enumerate() {
        let r = e.eval(start);
        if r.abs() > 1e-9 {
            return Err(Error::InfeasibleStart(format!("equality {i} has residual {r}")));
        }
    }
    if let Some(l) = &p.lmi {
        if lmi_factor(l, start).is_none() {
            return Err(Error::InfeasibleStart("matrix inequality is not strictly satisfied".into()));
        }
    }

    let m = p.constraints.len() + p.lmi.as_ref().map_or(0, |l| l.dim);
    let basis = nullspace_basis(p);
    let mut x = DVector::from_column_slice(start);
    let mut t = opts.t_init;
    let mut iterations = 0;
    let mut status = SolverStatus::MaxIterations;
    let mut gap = f64::INFINITY;

    for _ in 0..opts.max_stages {
        let stage = center(p, basis.as_ref(), &mut x, t, opts.max_newton_per_stage);
        iterations += stage.steps;
        if stage.failed {
            status = SolverStatus::NumericalFailure;
            break;
        }
        gap = m as f64 / t;
        if gap <= opts.tol {
            status = SolverStatus::Optimal;
            break;
        }
        if stage.stalled {
            // Barrier differences are below round-off; larger t cannot help.
            break;
        }
        t *= opts.mu;
    }

    let x: Vec<f64> = x.iter().copied().collect();
    let f_new = p.objective(&x);
    let f_start = p.objective(start);
    let (best, objective) = if f_new >= f_start {
        (x, f_new)
    } else {
        (start.to_vec(), f_start)
    };
    Ok((
        best,
        SolverReport {
            status,
            objective,
            iterations,
            gap,
        },
    ))
}

/// Barrier value `-t F(x) - sum ln slack - ln det W`, or `None` outside the domain.
fn barrier_value(p: &ConvexSubproblem, x: &[f64], t: f64) -> Option<f64> {
    let mut phi = -t * p.objective(x);
    for c in &p.constraints {
        let s = constraint_slack(c, x);
        if !(s > 0.0) {
            return None;
        }
        phi -= s.ln();
    }
    if let Some(l) = &p.lmi {
        let chol = lmi_factor(l, x)?;
        let l_mat = chol.l();
        let logdet: f64 = (0..l.dim).map(|i| l_mat[(i, i)].re.ln()).sum::<f64>() * 2.0;
        phi -= logdet;
    }
    if phi.is_finite() {
        Some(phi)
    } else {
        None
    }
}

fn lmi_matrix(l: &LmiBlock, x: &[f64]) -> DMatrix<Complex64> {
    let mut w = DMatrix::<Complex64>::zeros(l.dim, l.dim);
    for &(p, q, a) in &l.constant {
        w[(p, q)] += a;
    }
    for (var, entries) in &l.terms {
        let xi = x[*var];
        for &(p, q, a) in entries {
            w[(p, q)] += a * xi;
        }
    }
    w
}

fn lmi_factor(l: &LmiBlock, x: &[f64]) -> Option<nalgebra::Cholesky<Complex64, nalgebra::Dyn>> {
    let w = lmi_matrix(l, x);
    if w.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return None;
    }
    // nalgebra's complex Cholesky takes complex square roots of the pivots
    // and never rejects an indefinite matrix, so definiteness is checked here.
    if !hermitian_positive_definite(&w) {
        return None;
    }
    nalgebra::Cholesky::new(w)
}

fn hermitian_positive_definite(w: &DMatrix<Complex64>) -> bool {
    let d = w.nrows();
    let mut l = DMatrix::<Complex64>::zeros(d, d);
    for j in 0..d {
        let mut diag = w[(j, j)].re;
        for k in 0..j {
            diag -= l[(j, k)].norm_sqr();
        }
        if !(diag > 0.0) {
            return false;
        }
        let ljj = diag.sqrt();
        l[(j, j)] = Complex64::new(ljj, 0.0);
        for i in (j + 1)..d {
            let mut v = w[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = v / ljj;
        }
    }
    true
}

fn add_outer(h: &mut DMatrix<f64>, g: &[(usize, f64)], scale: f64) {
    for &(i, a) in g {
        for &(j, b) in g {
            h[(i, j)] += scale * a * b;
        }
    }
}

/// Gradient and Hessian of the barrier function at `x`.
fn derivatives(p: &ConvexSubproblem, x: &[f64], t: f64) -> (DVector<f64>, DMatrix<f64>) {
    let n = p.num_vars();
    let mut g = DVector::<f64>::zeros(n);
    let mut h = DMatrix::<f64>::zeros(n, n);

    for &(i, c) in &p.linear.terms {
        g[i] -= t * c;
    }
    for per in &p.perspectives {
        let tt = x[per.t];
        let sp = per.gain * x[per.s];
        let u = tt + sp;
        let c = per.weight / LN_2;
        g[per.t] -= t * c * ((sp / tt).ln_1p() - sp / u);
        g[per.s] -= t * c * per.gain * tt / u;
        let scale = t * c / (tt * u * u);
        let v = [(per.t, sp), (per.s, -per.gain * tt)];
        add_outer(&mut h, &v, scale);
    }

    let mut grad_s: Vec<(usize, f64)> = Vec::new();
    for c in &p.constraints {
        let s = constraint_slack(c, x);
        grad_s.clear();
        match c {
            Constraint::Linear(a) => grad_s.extend_from_slice(&a.terms),
            Constraint::Exp { var, bound } => {
                let e = x[*var].exp();
                grad_s.extend_from_slice(&bound.terms);
                grad_s.push((*var, -e));
                h[(*var, *var)] += e / s;
            }
            Constraint::Disk { re, im } => {
                grad_s.push((*re, -2.0 * x[*re]));
                grad_s.push((*im, -2.0 * x[*im]));
                h[(*re, *re)] += 2.0 / s;
                h[(*im, *im)] += 2.0 / s;
            }
            Constraint::PowerRatio {
                var,
                beta,
                exponent,
                bound,
            } => {
                grad_s.extend_from_slice(&bound.terms);
                if *beta != 0.0 {
                    let v = x[*var];
                    let pw = *exponent;
                    grad_s.push((*var, pw * beta * v.powf(-pw - 1.0)));
                    h[(*var, *var)] += pw * (pw + 1.0) * beta * v.powf(-pw - 2.0) / s;
                }
            }
        }
        for &(i, a) in &grad_s {
            g[i] -= a / s;
        }
        add_outer(&mut h, &grad_s, 1.0 / (s * s));
    }

    if let Some(l) = &p.lmi {
        if let Some(chol) = lmi_factor(l, x) {
            let z = chol.inverse();
            for (a_idx, (va, ea)) in l.terms.iter().enumerate() {
                let mut tr = Complex64::new(0.0, 0.0);
                for &(pp, qq, alpha) in ea {
                    tr += alpha * z[(qq, pp)];
                }
                g[*va] -= tr.re;
                for (b_idx, (vb, eb)) in l.terms.iter().enumerate().skip(a_idx) {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for &(pp, qq, alpha) in ea {
                        for &(r, s, beta) in eb {
                            acc += alpha * beta * z[(qq, r)] * z[(s, pp)];
                        }
                    }
                    h[(*va, *vb)] += acc.re;
                    if b_idx != a_idx {
                        h[(*vb, *va)] += acc.re;
                    }
                }
            }
        }
    }
    (g, h)
}

/// Orthonormal basis of `{d : A d = 0}` for the equality rows of `p`.
fn nullspace_basis(p: &ConvexSubproblem) -> Option<DMatrix<f64>> {
    if p.equalities.is_empty() {
        return None;
    }
    let n = p.num_vars();
    let mut rows: Vec<DVector<f64>> = Vec::new();
    for e in &p.equalities {
        let mut r = DVector::<f64>::zeros(n);
        for &(i, c) in &e.terms {
            r[i] += c;
        }
        for q in &rows {
            let proj = q.dot(&r);
            r.axpy(-proj, q, 1.0);
        }
        let norm = r.norm();
        if norm > 1e-12 {
            rows.push(r / norm);
        }
    }
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for i in 0..n {
        let mut v = DVector::<f64>::zeros(n);
        v[i] = 1.0;
        // Two passes of Gram-Schmidt for orthogonality to working precision.
        for _ in 0..2 {
            for q in rows.iter().chain(basis.iter()) {
                let proj = q.dot(&v);
                v.axpy(-proj, q, 1.0);
            }
        }
        let norm = v.norm();
        if norm > 0.5 {
            basis.push(v / norm);
        }
        if basis.len() + rows.len() == n {
            break;
        }
    }
    Some(DMatrix::from_columns(&basis))
}

fn regularized_solve(h: DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    let n = rhs.len();
    let scale = (0..n).map(|i| h[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
    let mut delta = 0.0;
    for _ in 0..12 {
        let mut hr = h.clone();
        for i in 0..n {
            hr[(i, i)] += delta;
        }
        if let Some(chol) = nalgebra::Cholesky::new(hr) {
            let d = chol.solve(rhs);
            if d.iter().all(|v| v.is_finite()) {
                return Some(d);
            }
        }
        delta = if delta == 0.0 { 1e-14 * scale } else { delta * 100.0 };
    }
    None
}

/// Newton direction for the barrier problem, restricted to the equality
/// nullspace when one is given.
fn newton_direction(basis: Option<&DMatrix<f64>>, g: &DVector<f64>, h: &DMatrix<f64>) -> Option<DVector<f64>> {
    match basis {
        None => regularized_solve(h.clone(), &(-g)),
        Some(b) => {
            let hz = b.transpose() * h * b;
            let gz = b.transpose() * g;
            let dz = regularized_solve(hz, &(-gz))?;
            Some(b * dz)
        }
    }
}

struct Stage {
    steps: usize,
    /// The line search could not decrease the barrier.
    stalled: bool,
    /// No Newton direction could be formed.
    failed: bool,
}

/// Damped Newton centering at barrier weight `t`.
fn center(
    p: &ConvexSubproblem,
    basis: Option<&DMatrix<f64>>,
    x: &mut DVector<f64>,
    t: f64,
    max_steps: usize,
) -> Stage {
    let stage = |steps, stalled, failed| Stage { steps, stalled, failed };
    let mut phi = match barrier_value(p, x.as_slice(), t) {
        Some(v) => v,
        None => return stage(0, false, true),
    };
    for step in 0..max_steps {
        let (g, h) = derivatives(p, x.as_slice(), t);
        let d = match newton_direction(basis, &g, &h) {
            Some(d) => d,
            None => return stage(step, false, true),
        };
        let slope = g.dot(&d);
        let decrement = -slope;
        if !(decrement > 1e-12) {
            return stage(step, false, false);
        }
        let mut alpha = 1.0;
        let mut accepted = false;
        let mut trial = x.clone();
        while alpha > 1e-16 {
            trial.copy_from(x);
            trial.axpy(alpha, &d, 1.0);
            if let Some(v) = barrier_value(p, trial.as_slice(), t) {
                if v <= phi + 0.01 * alpha * slope {
                    phi = v;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            // Round-off floor: the barrier cannot be decreased further.
            return stage(step + 1, true, false);
        }
        x.copy_from(&trial);
        if decrement < 1e-10 {
            return stage(step + 1, false, false);
        }
    }
    stage(max_steps, false, false)
}
