use crate::error::{Error, Result};
use crate::expr::EvalPoint;
use crate::ode::{rk4, Direction, Grid, GridFunction};
use crate::problem::HerglotzProblem;

/// `x` with its derivatives up to order `n`, and `z`, sampled on a grid.
///
/// Derivative columns are packed order-major: column `j*m + k-1` holds
/// `x_k^(j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    order: usize,
    dim: usize,
    x: GridFunction,
    z: GridFunction,
}

impl Trajectory {
    pub fn new(order: usize, dim: usize, x: GridFunction, z: GridFunction) -> Result<Self> {
        if x.dim() != (order + 1) * dim || z.dim() != 1 || x.grid() != z.grid() {
            return Err(Error::DimensionMismatch(format!(
                "trajectory of order {order} and dim {dim} needs {} derivative columns and one z column",
                (order + 1) * dim
            )));
        }
        Ok(Trajectory { order, dim, x, z })
    }

    /// Samples `f(t) = (packed derivatives, z)` at every node.
    pub fn from_fn(
        grid: Grid,
        order: usize,
        dim: usize,
        mut f: impl FnMut(f64) -> (Vec<f64>, f64),
    ) -> Result<Self> {
        let mut xs = Vec::with_capacity(grid.len() * (order + 1) * dim);
        let mut zs = Vec::with_capacity(grid.len());
        for t in grid.times() {
            let (x, z) = f(t);
            xs.extend(x);
            zs.push(z);
        }
        Trajectory::new(
            order,
            dim,
            GridFunction::new(grid, (order + 1) * dim, xs)?,
            GridFunction::from_column(grid, zs)?,
        )
    }

    /// Admissible trajectory for `p` built from a closed-form `x`:
    /// `x_of(t)` returns packed derivatives `0..=n`, and `z` is integrated from
    /// `z' = L` with RK4.
    pub fn admissible(p: &HerglotzProblem, grid: Grid, x_of: impl Fn(f64) -> Vec<f64>) -> Result<Self> {
        let mut point = EvalPoint::zeros(p.order, p.dim);
        let z = rk4(
            |t, z| {
                point.t = t;
                point.z = z[0];
                point.packed_mut().copy_from_slice(&x_of(t));
                Ok(vec![p.lagrangian.eval(&point)?])
            },
            &[p.gamma],
            &grid,
            Direction::Forward,
        )?;
        let x = GridFunction::from_fn(grid, (p.order + 1) * p.dim, &x_of)?;
        Trajectory::new(p.order, p.dim, x, z)
    }

    pub fn grid(&self) -> &Grid {
        self.x.grid()
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `x_index^(order)` at node `i`.
    pub fn x(&self, i: usize, index: usize, order: usize) -> f64 {
        self.x.get(i, order * self.dim + index - 1)
    }

    pub fn z(&self, i: usize) -> f64 {
        self.z.get(i, 0)
    }

    pub fn derivatives(&self) -> &GridFunction {
        &self.x
    }

    pub fn z_values(&self) -> &GridFunction {
        &self.z
    }

    /// Column of `x_index^(order)` over all nodes.
    pub fn x_series(&self, index: usize, order: usize) -> Vec<f64> {
        self.x.column(order * self.dim + index - 1)
    }

    pub fn point(&self, i: usize) -> EvalPoint {
        let mut p = EvalPoint::zeros(self.order, self.dim);
        self.fill_point(i, &mut p);
        p
    }

    pub fn fill_point(&self, i: usize, p: &mut EvalPoint) {
        p.t = self.grid().t(i);
        p.z = self.z(i);
        p.packed_mut().copy_from_slice(self.x.row(i));
    }

    pub fn check_matches(&self, p: &HerglotzProblem) -> Result<()> {
        if self.order != p.order || self.dim != p.dim {
            return Err(Error::DimensionMismatch(format!(
                "trajectory has order {} dim {}, problem has order {} dim {}",
                self.order, self.dim, p.order, p.dim
            )));
        }
        Ok(())
    }
}
