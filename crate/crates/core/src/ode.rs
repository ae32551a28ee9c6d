//! Fixed-step integration, quadrature and finite differences on a uniform grid.

use crate::error::{Error, Result};

/// Uniform grid of `nodes` points on `[a, b]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    a: f64,
    b: f64,
    nodes: usize,
}

impl Grid {
    /// Requires `a < b` and an odd node count of at least 3, so that Simpson's
    /// rule covers the full range.
    pub fn new(a: f64, b: f64, nodes: usize) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::InvalidInterval { a, b });
        }
        if nodes < 3 || nodes % 2 == 0 {
            return Err(Error::InvalidGrid(format!("node count must be odd and at least 3, got {nodes}")));
        }
        Ok(Grid { a, b, nodes })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn len(&self) -> usize {
        self.nodes
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        (self.b - self.a) / (self.nodes - 1) as f64
    }

    /// Node `i`; the last node is exactly `b`.
    pub fn t(&self, i: usize) -> f64 {
        if i + 1 == self.nodes {
            self.b
        } else {
            self.a + i as f64 * self.step()
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.nodes).map(|i| self.t(i)).collect()
    }

    /// Same interval with `2(N-1) + 1` nodes.
    pub fn refined(&self) -> Grid {
        Grid { nodes: 2 * (self.nodes - 1) + 1, ..*self }
    }
}

/// Values of a `dim`-vector function at every node, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    dim: usize,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Grid, dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 || values.len() != grid.len() * dim {
            return Err(Error::DimensionMismatch(format!(
                "grid function needs {} x {dim} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { node: pos / dim });
        }
        Ok(GridFunction { grid, dim, values })
    }

    pub fn zeros(grid: Grid, dim: usize) -> Self {
        GridFunction { grid, dim, values: vec![0.0; grid.len() * dim] }
    }

    pub fn from_fn(grid: Grid, dim: usize, mut f: impl FnMut(f64) -> Vec<f64>) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.len() * dim);
        for i in 0..grid.len() {
            let row = f(grid.t(i));
            if row.len() != dim {
                return Err(Error::DimensionMismatch(format!("row of length {} for dim {dim}", row.len())));
            }
            values.extend(row);
        }
        GridFunction::new(grid, dim, values)
    }

    pub fn from_column(grid: Grid, column: Vec<f64>) -> Result<Self> {
        GridFunction::new(grid, 1, column)
    }

    /// Stacks single columns side by side.
    pub fn from_columns(grid: Grid, columns: &[Vec<f64>]) -> Result<Self> {
        let dim = columns.len();
        let mut values = vec![0.0; grid.len() * dim];
        for (c, col) in columns.iter().enumerate() {
            if col.len() != grid.len() {
                return Err(Error::DimensionMismatch(format!("column of length {} on {} nodes", col.len(), grid.len())));
            }
            for (i, v) in col.iter().enumerate() {
                values[i * dim + c] = *v;
            }
        }
        GridFunction::new(grid, dim, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn get(&self, i: usize, c: usize) -> f64 {
        self.values[i * self.dim + c]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.len()).map(|i| self.get(i, c)).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn last(&self) -> &[f64] {
        self.row(self.len() - 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// Classical fourth-order Runge-Kutta on `grid`.
///
/// `Forward` starts from `y0` at the first node; `Backward` starts from `y0`
/// at the last node and steps with `-h`. The result is always stored in grid
/// order.
pub fn rk4<F>(mut field: F, y0: &[f64], grid: &Grid, direction: Direction) -> Result<GridFunction>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
{
    let n = grid.len();
    let d = y0.len();
    if d == 0 {
        return Err(Error::DimensionMismatch("empty initial state".into()));
    }
    let mut values = vec![0.0; n * d];
    let (start, sign) = match direction {
        Direction::Forward => (0, 1.0),
        Direction::Backward => (n - 1, -1.0),
    };
    if y0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteState { node: start });
    }
    values[start * d..(start + 1) * d].copy_from_slice(y0);

    let h = sign * grid.step();
    let mut y = y0.to_vec();
    let mut tmp = vec![0.0; d];
    for step in 0..n - 1 {
        let (i, next) = match direction {
            Direction::Forward => (step, step + 1),
            Direction::Backward => (n - 1 - step, n - 2 - step),
        };
        let t = grid.t(i);
        let t_next = grid.t(next);
        let t_mid = 0.5 * (t + t_next);

        let k1 = checked(field(t, &y)?, d)?;
        axpy(&mut tmp, &y, 0.5 * h, &k1);
        let k2 = checked(field(t_mid, &tmp)?, d)?;
        axpy(&mut tmp, &y, 0.5 * h, &k2);
        let k3 = checked(field(t_mid, &tmp)?, d)?;
        axpy(&mut tmp, &y, h, &k3);
        let k4 = checked(field(t_next, &tmp)?, d)?;
        for c in 0..d {
            y[c] += h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { node: next });
        }
        values[next * d..(next + 1) * d].copy_from_slice(&y);
    }
    GridFunction::new(*grid, d, values)
}

fn checked(k: Vec<f64>, d: usize) -> Result<Vec<f64>> {
    if k.len() != d {
        return Err(Error::DimensionMismatch(format!("vector field returned {} components, expected {d}", k.len())));
    }
    Ok(k)
}

fn axpy(out: &mut [f64], y: &[f64], a: f64, k: &[f64]) {
    for ((o, yi), ki) in out.iter_mut().zip(y).zip(k) {
        *o = yi + a * ki;
    }
}

/// Integral of sampled values between nodes `from` and `to`.
///
/// Composite Simpson when the interval count is even; otherwise Simpson up to
/// `to - 1` plus a trapezoid on the final interval.
pub fn quad_samples(values: &[f64], h: f64, from: usize, to: usize) -> f64 {
    assert!(from <= to && to < values.len(), "quad range {from}..={to} out of bounds");
    let count = to - from;
    if count == 0 {
        return 0.0;
    }
    if count == 1 {
        return 0.5 * h * (values[from] + values[to]);
    }
    let simpson_end = if count % 2 == 0 { to } else { to - 1 };
    let mut acc = values[from] + values[simpson_end];
    for i in (from + 1)..simpson_end {
        acc += if (i - from) % 2 == 1 { 4.0 * values[i] } else { 2.0 * values[i] };
    }
    let mut total = acc * h / 3.0;
    if simpson_end != to {
        total += 0.5 * h * (values[to - 1] + values[to]);
    }
    total
}

/// Per-column integral of `f` between nodes `from` and `to`.
pub fn quad(f: &GridFunction, from: usize, to: usize) -> Vec<f64> {
    let h = f.grid().step();
    (0..f.dim()).map(|c| quad_samples(&f.column(c), h, from, to)).collect()
}

/// Running integral from the first node, `F(t_i) = int_a^{t_i} f`.
pub fn cumulative(values: &[f64], h: f64) -> Vec<f64> {
    (0..values.len()).map(|i| quad_samples(values, h, 0, i)).collect()
}

/// Second-order first derivative of sampled values: central in the interior,
/// one-sided three-point at the ends.
pub fn diff_samples(values: &[f64], h: f64) -> Result<Vec<f64>> {
    let n = values.len();
    if n < 3 {
        return Err(Error::GridTooCoarse { nodes: n, order: 1 });
    }
    let mut out = vec![0.0; n];
    out[0] = (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * h);
    for i in 1..n - 1 {
        out[i] = (values[i + 1] - values[i - 1]) / (2.0 * h);
    }
    out[n - 1] = (3.0 * values[n - 1] - 4.0 * values[n - 2] + values[n - 3]) / (2.0 * h);
    Ok(out)
}

/// `order`-th derivative by repeated application of [`diff_samples`].
pub fn diff_samples_n(values: &[f64], h: f64, order: usize) -> Result<Vec<f64>> {
    if order == 0 {
        return Ok(values.to_vec());
    }
    if values.len() < 2 * order + 1 {
        return Err(Error::GridTooCoarse { nodes: values.len(), order });
    }
    let mut out = values.to_vec();
    for _ in 0..order {
        out = diff_samples(&out, h)?;
    }
    Ok(out)
}

/// Per-column `order`-th time derivative.
///
/// Only nodes `order..N-order` carry the full O(h^2) accuracy for `order >= 2`;
/// see [`interior`].
pub fn fd_derivative(f: &GridFunction, order: usize) -> Result<GridFunction> {
    if order == 0 {
        return Err(Error::GridTooCoarse { nodes: f.len(), order });
    }
    let h = f.grid().step();
    let columns = (0..f.dim())
        .map(|c| diff_samples_n(&f.column(c), h, order))
        .collect::<Result<Vec<_>>>()?;
    GridFunction::from_columns(*f.grid(), &columns)
}

/// Node range not contaminated by the boundary stencils of an `order`-fold
/// difference.
pub fn interior(nodes: usize, order: usize) -> std::ops::Range<usize> {
    order.min(nodes)..nodes.saturating_sub(order).max(order.min(nodes))
}

/// Cubic Lagrange interpolation of nodal samples; used to supply vector-field
/// coefficients at the RK4 half steps.
#[derive(Debug, Clone)]
pub struct NodalInterpolant {
    grid: Grid,
    dim: usize,
    values: Vec<f64>,
}

impl NodalInterpolant {
    pub fn new(f: &GridFunction) -> Self {
        NodalInterpolant { grid: *f.grid(), dim: f.dim(), values: f.values().to_vec() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn at(&self, t: f64, out: &mut [f64]) {
        let n = self.grid.len();
        let h = self.grid.step();
        let u = (t - self.grid.a()) / h;
        let nearest = u.round();
        if (u - nearest).abs() < 1e-9 && nearest >= 0.0 && (nearest as usize) < n {
            let i = nearest as usize;
            out.copy_from_slice(&self.values[i * self.dim..(i + 1) * self.dim]);
            return;
        }
        let points = n.min(4);
        let base = (u.floor() as isize - 1).clamp(0, (n - points) as isize) as usize;
        out.iter_mut().for_each(|o| *o = 0.0);
        for p in 0..points {
            let mut w = 1.0;
            for q in 0..points {
                if q != p {
                    w *= (u - (base + q) as f64) / (p as f64 - q as f64);
                }
            }
            let row = &self.values[(base + p) * self.dim..(base + p + 1) * self.dim];
            for (o, v) in out.iter_mut().zip(row) {
                *o += w * v;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn decay(_: f64, y: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![-y[0]])
    }

    #[test]
    fn grid_validation() {
        assert!(Grid::new(1.0, 0.0, 11).is_err());
        assert!(Grid::new(0.0, 1.0, 10).is_err());
        assert!(Grid::new(0.0, 1.0, 1).is_err());
        let g = Grid::new(0.0, 1.0, 11).unwrap();
        assert_eq!(g.t(10), 1.0);
        assert_eq!(g.refined().len(), 21);
    }

    #[test]
    fn rk4_exponential_decay() {
        let g = Grid::new(0.0, 1.0, 101).unwrap();
        let sol = rk4(decay, &[1.0], &g, Direction::Forward).unwrap();
        assert!((sol.last()[0] - (-1.0f64).exp()).abs() < 1e-8);
    }

    #[test]
    fn rk4_exact_on_linear() {
        let g = Grid::new(0.0, 1.0, 11).unwrap();
        let sol = rk4(|_, _| Ok(vec![1.0]), &[0.0], &g, Direction::Forward).unwrap();
        for i in 0..g.len() {
            assert!((sol.get(i, 0) - g.t(i)).abs() < 1e-15);
        }
    }

    #[test]
    fn rk4_halving_gains_factor_14() {
        let err = |nodes| {
            let g = Grid::new(0.0, 1.0, nodes).unwrap();
            let sol = rk4(decay, &[1.0], &g, Direction::Forward).unwrap();
            (0..g.len()).map(|i| (sol.get(i, 0) - (-g.t(i)).exp()).abs()).fold(0.0, f64::max)
        };
        assert!(err(21) / err(41) >= 14.0);
    }

    #[test]
    fn rk4_forward_backward_round_trip() {
        let g = Grid::new(0.0, 2.0, 201).unwrap();
        let osc = |_: f64, y: &[f64]| Ok(vec![y[1], -y[0] - 0.1 * y[1]]);
        let fwd = rk4(osc, &[1.0, 0.5], &g, Direction::Forward).unwrap();
        let back = rk4(osc, fwd.last(), &g, Direction::Backward).unwrap();
        assert!((back.get(0, 0) - 1.0).abs() < 1e-9);
        assert!((back.get(0, 1) - 0.5).abs() < 1e-9);
    }

    #[test]
    fn rk4_reports_blow_up() {
        let g = Grid::new(0.0, 1.0, 11).unwrap();
        let r = rk4(|_, y| Ok(vec![1e200 * y[0] * y[0]]), &[1e200], &g, Direction::Forward);
        assert!(matches!(r, Err(Error::NonFiniteState { node: 1 })));
    }

    #[test]
    fn quad_examples() {
        let g = Grid::new(0.0, PI, 101).unwrap();
        let f = GridFunction::from_fn(g, 1, |t| vec![t.sin()]).unwrap();
        let bound = PI * g.step().powi(4) / 180.0;
        assert!((quad(&f, 0, 100)[0] - 2.0).abs() <= bound);

        let c = GridFunction::from_fn(g, 1, |_| vec![3.0]).unwrap();
        for (from, to) in [(0, 100), (3, 40), (7, 8)] {
            let expected = 3.0 * (g.t(to) - g.t(from));
            assert!((quad(&c, from, to)[0] - expected).abs() < 1e-12);
        }
        assert_eq!(quad(&f, 42, 42)[0], 0.0);
    }

    #[test]
    fn fd_examples() {
        let g = Grid::new(0.0, 1.0, 101).unwrap();
        let sq = GridFunction::from_fn(g, 1, |t| vec![t * t]).unwrap();
        let d = fd_derivative(&sq, 1).unwrap();
        for i in 0..g.len() {
            assert!((d.get(i, 0) - 2.0 * g.t(i)).abs() < 1e-10);
        }
        let c = GridFunction::from_fn(g, 1, |_| vec![5.0]).unwrap();
        for order in 1..=3 {
            let d = fd_derivative(&c, order).unwrap();
            assert!(d.values().iter().all(|v| v.abs() < 1e-9));
        }
        let tiny = GridFunction::from_fn(Grid::new(0.0, 1.0, 3).unwrap(), 1, |t| vec![t]).unwrap();
        assert!(matches!(fd_derivative(&tiny, 2), Err(Error::GridTooCoarse { .. })));
    }

    #[test]
    fn fd_second_derivative_of_sine_converges() {
        let err = |nodes| {
            let g = Grid::new(0.0, 2.0, nodes).unwrap();
            let f = GridFunction::from_fn(g, 1, |t| vec![t.sin()]).unwrap();
            let d = fd_derivative(&f, 2).unwrap();
            interior(nodes, 2).map(|i| (d.get(i, 0) + g.t(i).sin()).abs()).fold(0.0, f64::max)
        };
        let (e1, e2) = (err(101), err(201));
        assert!(e1 < 1e-3);
        assert!(e1 / e2 > 3.5);
    }

    #[test]
    fn derivative_of_running_integral_recovers_integrand() {
        let g = Grid::new(0.0, 1.0, 201).unwrap();
        let f: Vec<f64> = g.times().iter().map(|t| (3.0 * t).cos()).collect();
        let big_f = cumulative(&f, g.step());
        let back = diff_samples(&big_f, g.step()).unwrap();
        for i in 2..g.len() - 2 {
            assert!((back[i] - f[i]).abs() < 50.0 * g.step().powi(2), "node {i}");
        }
    }

    #[test]
    fn interpolant_is_cubic_exact() {
        let g = Grid::new(-1.0, 1.0, 9).unwrap();
        let f = GridFunction::from_fn(g, 2, |t| vec![t * t * t - t, 2.0]).unwrap();
        let it = NodalInterpolant::new(&f);
        let mut out = [0.0; 2];
        for t in [-1.0, -0.93, -0.1, 0.0, 0.3125, 0.99, 1.0] {
            it.at(t, &mut out);
            assert!((out[0] - (t * t * t - t)).abs() < 1e-13, "t = {t}");
            assert!((out[1] - 2.0).abs() < 1e-13);
        }
    }
}
