//! Log-barrier Newton method for smooth convex objectives over a polytope
//! `{x : Ax = b, Cx ≤ d}`.
//!
//! Iterates stay in the affine set by moving only along a basis of the
//! nullspace of `A`, and strictly inside the inequalities by backtracking.
//! After centering at barrier weight `t` the objective is within `m/t` of the
//! optimum, with `m` the number of active inequalities.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub trait Objective {
    fn value(&self, x: &DVector<f64>) -> f64;
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;
    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64>;
}

/// `aᵀx = b` in the equality list, `aᵀx ≤ b` in the inequality list.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    pub a: DVector<f64>,
    pub b: f64,
}

impl LinearConstraint {
    pub fn new(a: Vec<f64>, b: f64) -> Self {
        Self { a: DVector::from_vec(a), b }
    }

    fn slack(&self, x: &DVector<f64>) -> f64 {
        self.b - self.a.dot(x)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Problem {
    pub dim: usize,
    pub equalities: Vec<LinearConstraint>,
    pub inequalities: Vec<LinearConstraint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Stop once the barrier gap bound `m/t` is below this.
    pub gap_tolerance: f64,
    /// Centering stops when half the squared Newton decrement is below this.
    pub newton_tolerance: f64,
    /// A centering step that stalls is accepted only below this decrement.
    pub centering_tolerance: f64,
    pub max_iterations: usize,
    /// Floor inside square roots of the objectives.
    pub tau: f64,
    pub t0: f64,
    pub mu: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            gap_tolerance: 1e-10,
            newton_tolerance: 1e-10,
            centering_tolerance: 1e-6,
            max_iterations: 100_000,
            tau: 1e-12,
            t0: 1.0,
            mu: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SolverDiagnostics {
    pub iterations: usize,
    pub outer_iterations: usize,
    /// `m/t` at termination.
    pub duality_gap: f64,
    /// Norm of the reduced gradient of the Lagrangian with multipliers
    /// `1/(t·s_i)`.
    pub kkt_residual: f64,
    /// Smallest inequality slack at the returned point.
    pub min_slack: f64,
    /// The equalities leave no freedom; the start point is the answer.
    pub pinned: bool,
    /// Inequalities constant on the affine set, checked once and dropped.
    pub dropped_constraints: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub x: DVector<f64>,
    pub value: f64,
    pub diagnostics: SolverDiagnostics,
}

const EQ_TOL: f64 = 1e-9;
const MAX_CENTERING_STEPS: usize = 200;

/// Orthonormal basis of `{z : Az = 0}` from the eigenvectors of `AᵀA`.
fn nullspace(problem: &Problem) -> DMatrix<f64> {
    let n = problem.dim;
    if problem.equalities.is_empty() {
        return DMatrix::identity(n, n);
    }
    let a = DMatrix::from_fn(problem.equalities.len(), n, |i, j| problem.equalities[i].a[j]);
    let eig = SymmetricEigen::new(a.transpose() * &a);
    let scale = eig.eigenvalues.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let cols: Vec<DVector<f64>> = (0..n)
        .filter(|&i| eig.eigenvalues[i] <= 1e-10 * scale)
        .map(|i| eig.eigenvectors.column(i).into_owned())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

struct Reduced {
    a: Vec<DVector<f64>>,
    full: Vec<LinearConstraint>,
}

/// Minimizes `objective` from a feasible `start`, strictly inside every
/// inequality that is not constant on the affine set.
pub fn minimize(
    objective: &dyn Objective,
    problem: &Problem,
    start: DVector<f64>,
    cfg: &SolverConfig,
) -> Result<Solution> {
    if start.len() != problem.dim {
        return Err(Error::DomainMismatch { left: start.len(), right: problem.dim });
    }
    for (i, c) in problem.equalities.iter().enumerate() {
        if c.slack(&start).abs() > EQ_TOL {
            return Err(Error::InvalidParameter(format!("start violates equality {i}")));
        }
    }
    let z = nullspace(problem);
    let mut diagnostics = SolverDiagnostics::default();
    let mut kept = Reduced { a: Vec::new(), full: Vec::new() };
    for (i, c) in problem.inequalities.iter().enumerate() {
        let reduced = z.transpose() * &c.a;
        if reduced.norm() <= 1e-12 * c.a.norm().max(1.0) {
            if c.slack(&start) < -EQ_TOL {
                return Err(Error::InvalidParameter(format!("inequality {i} is infeasible on the affine set")));
            }
            diagnostics.dropped_constraints += 1;
        } else {
            kept.a.push(reduced);
            kept.full.push(c.clone());
        }
    }
    let slacks = |x: &DVector<f64>| kept.full.iter().map(|c| c.slack(x)).collect::<Vec<_>>();
    let min_slack = |x: &DVector<f64>| slacks(x).into_iter().fold(f64::INFINITY, f64::min);

    if z.ncols() == 0 {
        diagnostics.pinned = true;
        diagnostics.min_slack = min_slack(&start);
        return Ok(Solution { value: objective.value(&start), x: start, diagnostics });
    }
    if min_slack(&start) <= 0.0 {
        return Err(Error::SolverDidNotConverge(
            "no strictly feasible starting point: the feasible set has empty interior".into(),
        ));
    }

    let m = kept.full.len() as f64;
    let mut x = start;
    let mut t = cfg.t0;
    loop {
        diagnostics.outer_iterations += 1;
        let mut last_decrement;
        let mut inner = 0usize;
        loop {
            let s = slacks(&x);
            let mut g = z.transpose() * objective.gradient(&x) * t;
            let mut h = z.transpose() * objective.hessian(&x) * &z * t;
            for (a, si) in kept.a.iter().zip(&s) {
                g += a / *si;
                h += a * a.transpose() / (si * si);
            }
            let step = solve_spd(h, &g).ok_or_else(|| {
                Error::SolverDidNotConverge("reduced Hessian is not positive definite".into())
            })?;
            let dir = -step;
            let decrement = -g.dot(&dir);
            last_decrement = decrement / 2.0;
            diagnostics.kkt_residual = g.norm() / t;
            if last_decrement <= cfg.newton_tolerance {
                break;
            }
            diagnostics.iterations += 1;
            if diagnostics.iterations > cfg.max_iterations {
                return Err(Error::SolverDidNotConverge(format!(
                    "{} Newton iterations without convergence (decrement {last_decrement:e})",
                    cfg.max_iterations
                )));
            }
            let dx = &z * &dir;
            let barrier = |x: &DVector<f64>| -> f64 {
                t * objective.value(x) - slacks(x).iter().map(|s| s.ln()).sum::<f64>()
            };
            let f0 = barrier(&x);
            let mut step = 1.0;
            while min_slack(&(&x + &dx * step)) <= 0.0 {
                step *= 0.5;
            }
            let mut accepted = false;
            while step > 1e-14 {
                let cand = &x + &dx * step;
                if barrier(&cand) <= f0 - 0.25 * step * decrement {
                    x = cand;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            inner += 1;
            // Round-off dominates the barrier value once steps stop being
            // accepted or the decrement stops shrinking; the point is then as
            // central as f64 can resolve.
            if !accepted || (inner >= MAX_CENTERING_STEPS && last_decrement <= cfg.centering_tolerance) {
                break;
            }
        }
        if last_decrement > cfg.centering_tolerance {
            return Err(Error::SolverDidNotConverge(format!(
                "centering stalled at t = {t:e} with decrement {last_decrement:e}"
            )));
        }
        diagnostics.duality_gap = m / t;
        if m / t <= cfg.gap_tolerance || m == 0.0 {
            break;
        }
        t *= cfg.mu;
    }
    diagnostics.min_slack = min_slack(&x);
    Ok(Solution { value: objective.value(&x), x, diagnostics })
}

fn solve_spd(mut h: DMatrix<f64>, g: &DVector<f64>) -> Option<DVector<f64>> {
    let scale = h.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let mut reg = 0.0;
    for _ in 0..8 {
        if let Some(ch) = h.clone().cholesky() {
            return Some(ch.solve(g));
        }
        let bump = if reg == 0.0 { 1e-14 * scale } else { reg * 100.0 };
        for i in 0..h.nrows() {
            h[(i, i)] += bump - reg;
        }
        reg = bump;
    }
    None
}

/// `1 - Σ √(p_x q_x)` on `x = (p, q)`, the squared Hellinger distance of two
/// points of the simplex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HellingerObjective {
    pub n: usize,
    pub tau: f64,
}

impl HellingerObjective {
    fn pq(&self, x: &DVector<f64>, i: usize) -> (f64, f64) {
        (x[i].max(self.tau), x[self.n + i].max(self.tau))
    }
}

impl Objective for HellingerObjective {
    fn value(&self, x: &DVector<f64>) -> f64 {
        1.0 - (0..self.n).map(|i| {
            let (p, q) = self.pq(x, i);
            (p * q).sqrt()
        }).sum::<f64>()
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut g = DVector::zeros(2 * self.n);
        for i in 0..self.n {
            let (p, q) = self.pq(x, i);
            g[i] = -0.5 * (q / p).sqrt();
            g[self.n + i] = -0.5 * (p / q).sqrt();
        }
        g
    }

    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let n = self.n;
        let mut h = DMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            let (p, q) = self.pq(x, i);
            h[(i, i)] = 0.25 * q.sqrt() * p.powf(-1.5);
            h[(n + i, n + i)] = 0.25 * p.sqrt() * q.powf(-1.5);
            let off = -0.25 / (p * q).sqrt();
            h[(i, n + i)] = off;
            h[(n + i, i)] = off;
        }
        h
    }
}

/// `-Σ √p_x`; minimizing it maximizes the Rényi-½ entropy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootSumObjective {
    pub n: usize,
    pub tau: f64,
}

impl Objective for RootSumObjective {
    fn value(&self, x: &DVector<f64>) -> f64 {
        -x.iter().map(|p| p.max(self.tau).sqrt()).sum::<f64>()
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        x.map(|p| -0.5 / p.max(self.tau).sqrt())
    }

    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_diagonal(&x.map(|p| 0.25 * p.max(self.tau).powf(-1.5)))
    }
}
