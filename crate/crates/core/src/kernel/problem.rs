use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sparse affine function `constant + sum_i coeff_i x_i`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Affine {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl Affine {
    pub fn constant(c: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn var(i: usize) -> Self {
        Self {
            terms: vec![(i, 1.0)],
            constant: 0.0,
        }
    }

    pub fn add_term(&mut self, i: usize, coeff: f64) -> &mut Self {
        if coeff != 0.0 {
            self.terms.push((i, coeff));
        }
        self
    }

    pub fn with_term(mut self, i: usize, coeff: f64) -> Self {
        self.add_term(i, coeff);
        self
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            terms: self.terms.iter().map(|&(i, c)| (i, c * factor)).collect(),
            constant: self.constant * factor,
        }
    }

    /// `self - other`.
    pub fn minus(&self, other: &Affine) -> Self {
        let mut out = self.clone();
        out.terms.extend(other.terms.iter().map(|&(i, c)| (i, -c)));
        out.constant -= other.constant;
        out
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(i, c)| c * x[i]).sum::<f64>()
    }

    /// Merges repeated indices and drops zeros.
    pub fn compact(&mut self) {
        self.terms.sort_by_key(|&(i, _)| i);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(self.terms.len());
        for &(i, c) in &self.terms {
            match merged.last_mut() {
                Some((j, acc)) if *j == i => *acc += c,
                _ => merged.push((i, c)),
            }
        }
        merged.retain(|&(_, c)| c != 0.0);
        self.terms = merged;
    }

    fn max_index(&self) -> Option<usize> {
        self.terms.iter().map(|&(i, _)| i).max()
    }
}

/// `weight * t * log2(1 + gain * s / t)`, concave in `(t, s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Perspective {
    pub t: usize,
    pub s: usize,
    pub weight: f64,
    pub gain: f64,
}

/// Scalar constraints, each held as `slack(x) > 0` with concave slack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Constraint {
    /// `expr(x) >= 0`.
    Linear(Affine),
    /// `exp(x_var) <= bound(x)`.
    Exp { var: usize, bound: Affine },
    /// `x_re^2 + x_im^2 <= 1`.
    Disk { re: usize, im: usize },
    /// `beta * x_var^(-exponent) <= bound(x)` with `x_var > 0`.
    PowerRatio {
        var: usize,
        beta: f64,
        exponent: f64,
        bound: Affine,
    },
}

/// Sparse Hermitian matrix given by all of its nonzero entries.
pub type SparseHermitian = Vec<(usize, usize, Complex64)>;

/// `constant + sum_i x_i A_i` must be positive definite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmiBlock {
    pub dim: usize,
    pub constant: SparseHermitian,
    pub terms: Vec<(usize, SparseHermitian)>,
}

/// Maximise `sum perspectives + linear(x)` over the constraint set.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvexSubproblem {
    pub names: Vec<String>,
    pub perspectives: Vec<Perspective>,
    pub linear: Affine,
    pub constraints: Vec<Constraint>,
    pub equalities: Vec<Affine>,
    pub lmi: Option<LmiBlock>,
}

impl ConvexSubproblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> usize {
        self.names.len()
    }

    pub fn add_real(&mut self, name: impl Into<String>) -> usize {
        self.names.push(name.into());
        self.names.len() - 1
    }

    /// Adds a complex variable as a (real, imaginary) pair.
    pub fn add_complex(&mut self, name: &str) -> (usize, usize) {
        let re = self.add_real(format!("{name}.re"));
        let im = self.add_real(format!("{name}.im"));
        (re, im)
    }

    /// Adds `weight * t log2(1 + gain s / t)` to the objective together with
    /// `t >= 0` and `s >= 0`.
    pub fn add_perspective(&mut self, t: usize, s: usize, weight: f64, gain: f64) {
        self.perspectives.push(Perspective { t, s, weight, gain });
        self.constraints.push(Constraint::Linear(Affine::var(t)));
        self.constraints.push(Constraint::Linear(Affine::var(s)));
    }

    pub fn add_objective_term(&mut self, var: usize, coeff: f64) {
        self.linear.add_term(var, coeff);
    }

    /// `expr(x) <= rhs`.
    pub fn add_linear_le(&mut self, expr: Affine, rhs: f64) {
        let mut slack = expr.scaled(-1.0);
        slack.constant += rhs;
        slack.compact();
        self.constraints.push(Constraint::Linear(slack));
    }

    /// `expr(x) >= 0`.
    pub fn add_nonnegative(&mut self, expr: Affine) {
        let mut e = expr;
        e.compact();
        self.constraints.push(Constraint::Linear(e));
    }

    /// `expr(x) = rhs`.
    pub fn add_linear_eq(&mut self, expr: Affine, rhs: f64) {
        let mut e = expr;
        e.constant -= rhs;
        e.compact();
        self.equalities.push(e);
    }

    pub fn add_exp_le(&mut self, var: usize, bound: Affine) {
        let mut b = bound;
        b.compact();
        self.constraints.push(Constraint::Exp { var, bound: b });
    }

    pub fn add_unit_disk(&mut self, re: usize, im: usize) {
        self.constraints.push(Constraint::Disk { re, im });
    }

    /// `beta * x_var^(-exponent) <= bound(x)`.
    pub fn add_power_ratio_le(&mut self, var: usize, beta: f64, exponent: f64, bound: Affine) {
        let mut b = bound;
        b.compact();
        self.constraints.push(Constraint::PowerRatio {
            var,
            beta,
            exponent,
            bound: b,
        });
    }

    pub fn set_lmi(&mut self, block: LmiBlock) {
        self.lmi = Some(block);
    }

    /// Objective value at `x`.
    pub fn objective(&self, x: &[f64]) -> f64 {
        let mut f = self.linear.eval(x) - self.linear.constant;
        for p in &self.perspectives {
            let t = x[p.t];
            if t > 0.0 {
                f += p.weight * t * (p.gain * x[p.s] / t).ln_1p() / std::f64::consts::LN_2;
            }
        }
        f
    }

    /// Largest constraint violation at `x` (0 when feasible).
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for c in &self.constraints {
            worst = worst.max(-constraint_slack(c, x));
        }
        for e in &self.equalities {
            worst = worst.max(e.eval(x).abs());
        }
        worst
    }

    pub fn check_indices(&self) -> Result<()> {
        let n = self.num_vars();
        let bad = |i: usize| i >= n;
        let affine_bad = |a: &Affine| a.max_index().is_some_and(bad);
        let mut any = affine_bad(&self.linear) || self.equalities.iter().any(affine_bad);
        for p in &self.perspectives {
            any |= bad(p.t) || bad(p.s);
        }
        for c in &self.constraints {
            any |= match c {
                Constraint::Linear(a) => affine_bad(a),
                Constraint::Exp { var, bound } => bad(*var) || affine_bad(bound),
                Constraint::Disk { re, im } => bad(*re) || bad(*im),
                Constraint::PowerRatio { var, bound, .. } => bad(*var) || affine_bad(bound),
            };
        }
        if let Some(l) = &self.lmi {
            any |= l.terms.iter().any(|(i, _)| bad(*i));
            let entry_bad = |m: &SparseHermitian| m.iter().any(|&(p, q, _)| p >= l.dim || q >= l.dim);
            any |= entry_bad(&l.constant) || l.terms.iter().any(|(_, m)| entry_bad(m));
        }
        if any {
            Err(Error::InvalidArgument("subproblem refers to an undeclared variable".into()))
        } else {
            Ok(())
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Writes the subproblem as JSON for offline inspection.
    pub fn dump(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

pub(crate) fn constraint_slack(c: &Constraint, x: &[f64]) -> f64 {
    match c {
        Constraint::Linear(a) => a.eval(x),
        Constraint::Exp { var, bound } => bound.eval(x) - x[*var].exp(),
        Constraint::Disk { re, im } => 1.0 - x[*re] * x[*re] - x[*im] * x[*im],
        Constraint::PowerRatio {
            var,
            beta,
            exponent,
            bound,
        } => {
            let v = x[*var];
            if *beta == 0.0 {
                bound.eval(x)
            } else if v > 0.0 {
                bound.eval(x) - beta * v.powf(-exponent)
            } else {
                f64::NEG_INFINITY
            }
        }
    }
}
