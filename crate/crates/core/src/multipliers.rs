//! Multipliers `psi_1 .. psi_n` and `psi_z` along a trajectory.
//!
//! Two independent routes are provided. [`psi_backward_ode`] integrates the
//! adjoint system backward from `psi_j(b) = 0`, `psi_z(b) = 1`; it is the
//! accurate one and the solver relies on it. [`psi_closed_form`] evaluates the
//! alternating sum of time derivatives with finite differences and is kept as
//! a cross-check.

use crate::error::{Error, Result};
use crate::expr::EvalPoint;
use crate::ode::{self, rk4, Direction, GridFunction, NodalInterpolant};
use crate::problem::{HerglotzProblem, Partials};
use crate::trajectory::Trajectory;

/// `psi_z` (one column) and `psi` (`n*m` columns, block `j-1` holds `psi_j`).
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierSet {
    pub psi_z: GridFunction,
    pub psi: GridFunction,
    order: usize,
    dim: usize,
}

impl MultiplierSet {
    pub fn new(order: usize, dim: usize, psi: GridFunction, psi_z: GridFunction) -> Result<Self> {
        if psi.dim() != order * dim || psi_z.dim() != 1 || psi.grid() != psi_z.grid() {
            return Err(Error::DimensionMismatch(format!(
                "multipliers of order {order} dim {dim} need {} psi columns and one psi_z column",
                order * dim
            )));
        }
        Ok(MultiplierSet { psi_z, psi, order, dim })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `psi_j` component `index` (both counted from 1) at node `i`.
    pub fn psi(&self, i: usize, j: usize, index: usize) -> f64 {
        self.psi.get(i, (j - 1) * self.dim + index - 1)
    }

    pub fn psi_z(&self, i: usize) -> f64 {
        self.psi_z.get(i, 0)
    }

    pub fn psi_series(&self, j: usize, index: usize) -> Vec<f64> {
        self.psi.column((j - 1) * self.dim + index - 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HamiltonianValue {
    pub h: f64,
    /// `psi_z * dL/dt`.
    pub partial_t: f64,
}

/// `L` and its partials evaluated at every node of a trajectory.
#[derive(Debug, Clone)]
pub struct NodalPartials {
    /// Column `j*m + k-1` holds `dL/dx_k^(j)`.
    pub dx: GridFunction,
    pub dz: Vec<f64>,
    pub dt: Vec<f64>,
    pub lagrangian: Vec<f64>,
}

impl NodalPartials {
    pub fn evaluate(p: &HerglotzProblem, traj: &Trajectory) -> Result<Self> {
        traj.check_matches(p)?;
        let partials = Partials::of(p);
        let n = traj.len();
        let width = (p.order + 1) * p.dim;
        let mut dx = Vec::with_capacity(n * width);
        let mut dz = Vec::with_capacity(n);
        let mut dt = Vec::with_capacity(n);
        let mut lagrangian = Vec::with_capacity(n);
        let mut point = EvalPoint::zeros(p.order, p.dim);
        for i in 0..n {
            traj.fill_point(i, &mut point);
            for block in &partials.dx {
                for g in block {
                    dx.push(g.eval(&point)?);
                }
            }
            dz.push(partials.dz.eval(&point)?);
            dt.push(partials.dt.eval(&point)?);
            lagrangian.push(p.lagrangian.eval(&point)?);
        }
        Ok(NodalPartials { dx: GridFunction::new(*traj.grid(), width, dx)?, dz, dt, lagrangian })
    }

    fn dx_series(&self, dim: usize, order: usize, index: usize) -> Vec<f64> {
        self.dx.column(order * dim + index - 1)
    }
}

/// `psi_z(t) = exp(int_t^b dL/dz)`; exactly one everywhere for classical
/// problems.
pub fn psi_z_quadrature(p: &HerglotzProblem, traj: &Trajectory) -> Result<GridFunction> {
    if Partials::of(p).dz.is_zero() {
        traj.check_matches(p)?;
        return GridFunction::from_column(*traj.grid(), vec![1.0; traj.len()]);
    }
    psi_z_by_quadrature(p, traj)
}

/// Quadrature route without the classical short-circuit.
pub fn psi_z_by_quadrature(p: &HerglotzProblem, traj: &Trajectory) -> Result<GridFunction> {
    let nodal = NodalPartials::evaluate(p, traj)?;
    Ok(psi_z_from_partials(&nodal, traj))
}

fn psi_z_from_partials(nodal: &NodalPartials, traj: &Trajectory) -> GridFunction {
    let n = traj.len();
    let h = traj.grid().step();
    let values: Vec<f64> = (0..n).map(|i| ode::quad_samples(&nodal.dz, h, i, n - 1).exp()).collect();
    GridFunction::from_column(*traj.grid(), values).expect("exp of a finite integral")
}

/// Integrates the adjoint system backward from `psi_j(b) = 0`, `psi_z(b) = 1`:
///
/// ```text
/// psi_1' = -psi_z dL/dx^(0)
/// psi_j' = -psi_{j-1} - psi_z dL/dx^(j-1)     j = 2..n
/// psi_z' = -psi_z dL/dz
/// ```
///
/// Coefficients between nodes come from cubic interpolation of their nodal
/// values, which keeps the scheme fourth order.
pub fn psi_backward_ode(p: &HerglotzProblem, traj: &Trajectory) -> Result<MultiplierSet> {
    let nodal = NodalPartials::evaluate(p, traj)?;
    let (n, m) = (p.order, p.dim);
    let nm = n * m;

    // coefficients: dL/dx^(j) for j < n, then dL/dz
    let mut columns: Vec<Vec<f64>> = (0..nm).map(|c| nodal.dx.column(c)).collect();
    columns.push(nodal.dz.clone());
    let coeffs = NodalInterpolant::new(&GridFunction::from_columns(*traj.grid(), &columns)?);

    let mut c = vec![0.0; nm + 1];
    let mut y_end = vec![0.0; nm + 1];
    y_end[nm] = 1.0;
    let sol = rk4(
        |t, y| {
            coeffs.at(t, &mut c);
            let psi_z = y[nm];
            let mut dy = vec![0.0; nm + 1];
            for k in 0..m {
                dy[k] = -psi_z * c[k];
            }
            for j in 1..n {
                for k in 0..m {
                    dy[j * m + k] = -y[(j - 1) * m + k] - psi_z * c[j * m + k];
                }
            }
            dy[nm] = -psi_z * c[nm];
            Ok(dy)
        },
        &y_end,
        traj.grid(),
        Direction::Backward,
    )?;

    let psi: Vec<Vec<f64>> = (0..nm).map(|col| sol.column(col)).collect();
    MultiplierSet::new(
        n,
        m,
        GridFunction::from_columns(*traj.grid(), &psi)?,
        GridFunction::from_column(*traj.grid(), sol.column(nm))?,
    )
}

/// `psi_j = sum_{i=0}^{n-j} (-1)^(i+1) d^i/dt^i (psi_z dL/dx^(i+j))`, with the
/// time derivatives taken by finite differences on the grid.
pub fn psi_closed_form(p: &HerglotzProblem, traj: &Trajectory, psi_z: &GridFunction) -> Result<MultiplierSet> {
    let nodal = NodalPartials::evaluate(p, traj)?;
    let (n, m) = (p.order, p.dim);
    if psi_z.len() != traj.len() {
        return Err(Error::DimensionMismatch("psi_z and trajectory grids differ".into()));
    }
    let needed = n.saturating_sub(1);
    if traj.len() < 2 * needed + 1 {
        return Err(Error::GridTooCoarse { nodes: traj.len(), order: needed });
    }
    let h = traj.grid().step();
    let pz = psi_z.column(0);
    let mut columns = Vec::with_capacity(n * m);
    for j in 1..=n {
        for k in 1..=m {
            let mut acc = vec![0.0; traj.len()];
            for i in 0..=(n - j) {
                let weighted: Vec<f64> =
                    nodal.dx_series(m, i + j, k).iter().zip(&pz).map(|(d, z)| d * z).collect();
                let deriv = ode::diff_samples_n(&weighted, h, i)?;
                let sign = if i % 2 == 0 { -1.0 } else { 1.0 };
                for (a, d) in acc.iter_mut().zip(deriv) {
                    *a += sign * d;
                }
            }
            columns.push(acc);
        }
    }
    MultiplierSet::new(n, m, GridFunction::from_columns(*traj.grid(), &columns)?, psi_z.clone())
}

/// `H = sum_j psi_j . x^(j) + psi_z L` at one node.
pub fn hamiltonian(p: &HerglotzProblem, traj: &Trajectory, mult: &MultiplierSet, node: usize) -> Result<HamiltonianValue> {
    traj.check_matches(p)?;
    let point = traj.point(node);
    let l = p.lagrangian.eval(&point)?;
    let dt = Partials::of(p).dt.eval(&point)?;
    Ok(HamiltonianValue {
        h: bracket_at(traj, mult, node, l),
        partial_t: mult.psi_z(node) * dt,
    })
}

/// `H` at every node, reusing already evaluated nodal `L` values.
pub fn hamiltonian_series(traj: &Trajectory, mult: &MultiplierSet, lagrangian: &[f64]) -> Vec<f64> {
    (0..traj.len()).map(|i| bracket_at(traj, mult, i, lagrangian[i])).collect()
}

fn bracket_at(traj: &Trajectory, mult: &MultiplierSet, node: usize, l: f64) -> f64 {
    let mut h = 0.0;
    for j in 1..=traj.order() {
        for k in 1..=traj.dim() {
            h += mult.psi(node, j, k) * traj.x(node, k, j);
        }
    }
    h + mult.psi_z(node) * l
}
