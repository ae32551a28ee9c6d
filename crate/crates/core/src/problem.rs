//! Herglotz problems of order `n` and their optimal-control reduction.
//!
//! The reduced state is packed as `(x^(0), x^(1), ..., x^(n-1), z)`, each
//! `x^(j)` a block of `m` components. The control is `u = x^(n)`. The same
//! packing is used by costates (`psi_1 .. psi_n`, then `psi_z`) and by the CSV
//! trajectory columns.

use crate::error::{Error, Result};
use crate::expr::{Alphabet, EvalPoint, Expr, VarRef};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

/// Extremize `z(b)` subject to `z' = L(t, x, x', ..., x^(n), z)`, `z(a) = gamma`
/// and `x^(j)(a) = alpha[j]` for `j < n`.
#[derive(Debug, Clone, PartialEq)]
pub struct HerglotzProblem {
    pub order: usize,
    pub dim: usize,
    pub a: f64,
    pub b: f64,
    pub lagrangian: Expr,
    /// `alpha[j][k]` is the initial value of `x_{k+1}^(j)`.
    pub alpha: Vec<Vec<f64>>,
    pub gamma: f64,
    pub sense: Sense,
}

/// Outcome of [`HerglotzProblem::validate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Validation {
    /// `dL/dz` is structurally zero: the problem is a classical one.
    pub classical: bool,
    /// `d2L/du2` is structurally zero: controls cannot be eliminated.
    pub singular_control: bool,
}

impl HerglotzProblem {
    pub fn alphabet(&self) -> Alphabet {
        Alphabet::new(self.order, self.dim)
    }

    pub fn validate(&self) -> Result<Validation> {
        if !(self.a.is_finite() && self.b.is_finite() && self.a < self.b) {
            return Err(Error::InvalidInterval { a: self.a, b: self.b });
        }
        if self.order == 0 || self.dim == 0 {
            return Err(Error::DimensionMismatch("order and dimension must be at least 1".into()));
        }
        if self.alpha.len() != self.order || self.alpha.iter().any(|row| row.len() != self.dim) {
            return Err(Error::DimensionMismatch(format!(
                "initial data must have {} rows of {} values",
                self.order, self.dim
            )));
        }
        if !self.gamma.is_finite() || self.alpha.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::DimensionMismatch("initial data must be finite".into()));
        }
        self.lagrangian
            .check_bounds(&self.alphabet())
            .map_err(|e| Error::VariableOutOfBounds(e.to_string()))?;

        let partials = Partials::of(self);
        Ok(Validation {
            classical: partials.dz.is_zero(),
            singular_control: partials.hessian.iter().flatten().all(Expr::is_zero),
        })
    }

    pub fn is_autonomous(&self) -> bool {
        !self.lagrangian.contains(VarRef::Time)
    }

    /// Number of reduced state components, `n*m + 1`.
    pub fn state_dim(&self) -> usize {
        self.order * self.dim + 1
    }

    /// Initial reduced state `(alpha_0, ..., alpha_{n-1}, gamma)`.
    pub fn initial_state(&self) -> Vec<f64> {
        let mut s: Vec<f64> = self.alpha.iter().flatten().copied().collect();
        s.push(self.gamma);
        s
    }
}

/// Symbolic partial derivatives of `L` used throughout.
#[derive(Debug, Clone)]
pub struct Partials {
    /// `dx[j][k] = dL/dx_{k+1}^(j)` for `j = 0..=n`.
    pub dx: Vec<Vec<Expr>>,
    pub dz: Expr,
    pub dt: Expr,
    /// `hessian[k][l] = d2L / du_k du_l` with `u = x^(n)`.
    pub hessian: Vec<Vec<Expr>>,
}

impl Partials {
    pub fn of(p: &HerglotzProblem) -> Self {
        let l = &p.lagrangian;
        let dx: Vec<Vec<Expr>> = (0..=p.order)
            .map(|j| (1..=p.dim).map(|k| l.diff(VarRef::x(k, j))).collect())
            .collect();
        let hessian = dx[p.order]
            .iter()
            .map(|g| (1..=p.dim).map(|l| g.diff(VarRef::x(l, p.order))).collect())
            .collect();
        Partials { dx, dz: l.diff(VarRef::Z), dt: l.diff(VarRef::Time), hessian }
    }

    /// `dL/du` at `point`.
    pub fn gradient_u(&self, point: &EvalPoint, out: &mut [f64]) -> Result<()> {
        let top = self.dx.len() - 1;
        for (o, g) in out.iter_mut().zip(&self.dx[top]) {
            *o = g.eval(point)?;
        }
        Ok(())
    }
}

/// First-order control system equivalent to a [`HerglotzProblem`]:
/// `x_{j-1}' = x_j`, `x_{n-1}' = u`, `z' = L`, payoff `z(b)`.
#[derive(Debug, Clone)]
pub struct OcpSystem {
    problem: HerglotzProblem,
}

pub fn reduce_to_ocp(p: &HerglotzProblem) -> OcpSystem {
    OcpSystem { problem: p.clone() }
}

impl OcpSystem {
    pub fn problem(&self) -> &HerglotzProblem {
        &self.problem
    }

    pub fn state_dim(&self) -> usize {
        self.problem.state_dim()
    }

    pub fn control_dim(&self) -> usize {
        self.problem.dim
    }

    /// Writes `(t, state, u)` into an evaluation point, identifying `x_j`
    /// with `x^(j)` and `u` with `x^(n)`.
    pub fn assemble(&self, t: f64, state: &[f64], u: &[f64], point: &mut EvalPoint) {
        let nm = self.problem.order * self.problem.dim;
        point.t = t;
        point.z = state[nm];
        let packed = point.packed_mut();
        packed[..nm].copy_from_slice(&state[..nm]);
        packed[nm..].copy_from_slice(u);
    }

    pub fn point(&self, t: f64, state: &[f64], u: &[f64]) -> EvalPoint {
        let mut p = EvalPoint::zeros(self.problem.order, self.problem.dim);
        self.assemble(t, state, u, &mut p);
        p
    }

    /// The vector field `F(t, X, u)`.
    pub fn field(&self, t: f64, state: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        let m = self.problem.dim;
        let nm = self.problem.order * m;
        if state.len() != nm + 1 || u.len() != m {
            return Err(Error::DimensionMismatch(format!(
                "state of length {} and control of length {} for n*m = {nm}",
                state.len(),
                u.len()
            )));
        }
        let mut out = Vec::with_capacity(nm + 1);
        out.extend_from_slice(&state[m..nm]);
        out.extend_from_slice(u);
        out.push(self.problem.lagrangian.eval(&self.point(t, state, u))?);
        Ok(out)
    }

    pub fn payoff(&self, state: &[f64]) -> f64 {
        state[self.problem.order * self.problem.dim]
    }
}
