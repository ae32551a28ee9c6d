//! Numerical certificates along a trajectory: Euler-Lagrange residual,
//! transversality, DuBois-Reymond drift, invariance of a transformation
//! family and constancy of the associated Noether charge.
//!
//! Every check that involves a finite-difference time derivative is judged
//! against a tolerance of the form `C * h^2` (see [`fd_tolerance`]).

use std::fmt;

use crate::error::{Error, Result};
use crate::expr::{Alphabet, EvalPoint, Expr};
use crate::multipliers::{hamiltonian_series, MultiplierSet, NodalPartials};
use crate::ode::{self, GridFunction};
use crate::problem::HerglotzProblem;
use crate::trajectory::Trajectory;

/// Default factor in the `C * h^2` tolerance.
pub const DEFAULT_TOL_SCALE: f64 = 50.0;

/// Finite-difference step used for derivatives in the group parameter `s`.
pub const PARAM_EPS: f64 = 1e-4;

const IDENTITY_TOL: f64 = 1e-10;

pub fn fd_tolerance(traj: &Trajectory, scale: f64) -> f64 {
    scale * traj.grid().step().powi(2)
}

/// Generators `T = dT^s/ds`, `X_0 = dX^s/ds`, `Z = dZ^s/ds` at `s = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetryFamily {
    pub t: Expr,
    pub x: Vec<Expr>,
    pub z: Expr,
}

impl SymmetryFamily {
    pub fn time_translation(dim: usize) -> Self {
        SymmetryFamily { t: Expr::Const(1.0), x: vec![Expr::zero(); dim], z: Expr::zero() }
    }

    pub fn check(&self, alphabet: &Alphabet) -> Result<()> {
        if self.x.len() != alphabet.dim {
            return Err(Error::DimensionMismatch(format!("{} X generators for dimension {}", self.x.len(), alphabet.dim)));
        }
        for e in std::iter::once(&self.t).chain(&self.x).chain(std::iter::once(&self.z)) {
            e.check_bounds(alphabet)?;
        }
        Ok(())
    }
}

/// Finite transformations `(T^s, X^s, Z^s)` over the alphabet extended with `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteFamily {
    pub t: Expr,
    pub x: Vec<Expr>,
    pub z: Expr,
}

impl FiniteFamily {
    pub fn check(&self, order: usize, dim: usize) -> Result<()> {
        SymmetryFamily { t: self.t.clone(), x: self.x.clone(), z: self.z.clone() }
            .check(&Alphabet::with_param(order, dim))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub check: String,
    /// Infinity norm over the applicable nodes.
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub aux: Vec<(String, f64)>,
    /// For conservation laws: whether invariance was certified in the same run.
    pub guarded: Option<bool>,
}

impl VerificationReport {
    fn new(check: &str, residual: f64, tolerance: f64) -> Self {
        VerificationReport {
            check: check.to_string(),
            residual,
            tolerance,
            pass: residual <= tolerance,
            aux: Vec::new(),
            guarded: None,
        }
    }

    fn with(mut self, name: &str, value: f64) -> Self {
        self.aux.push((name.to_string(), value));
        self
    }

    pub fn aux(&self, name: &str) -> Option<f64> {
        self.aux.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }
}

impl fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<16} residual={:.6e} tol={:.6e} {}",
            self.check,
            self.residual,
            self.tolerance,
            if self.pass { "PASS" } else { "FAIL" }
        )?;
        for (name, value) in &self.aux {
            write!(f, " {name}={value:.6e}")?;
        }
        Ok(())
    }
}

/// Nodes not affected by the boundary stencils of an `order`-fold difference.
fn trusted_nodes(nodes: usize, order: usize) -> std::ops::Range<usize> {
    if order >= 2 {
        ode::interior(nodes, order)
    } else {
        0..nodes
    }
}

fn max_abs_over(values: impl Iterator<Item = f64>) -> f64 {
    values.fold(0.0f64, |a, v| if v.is_nan() { f64::NAN } else { a.max(v.abs()) })
}

fn mean_and_deviation(values: &[f64]) -> (f64, f64) {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    (mean, max_abs_over(values.iter().map(|v| v - mean)))
}

/// `sum_j (-1)^j d^j/dt^j (psi_z dL/dx^(j))`, one column per component.
pub fn el_residual(p: &HerglotzProblem, traj: &Trajectory, psi_z: &GridFunction) -> Result<GridFunction> {
    let nodal = NodalPartials::evaluate(p, traj)?;
    let (n, m) = (p.order, p.dim);
    if traj.len() < 2 * n + 1 {
        return Err(Error::GridTooCoarse { nodes: traj.len(), order: n });
    }
    let h = traj.grid().step();
    let pz = psi_z.column(0);
    let mut columns = Vec::with_capacity(m);
    for k in 0..m {
        let mut acc = vec![0.0; traj.len()];
        for j in 0..=n {
            let weighted: Vec<f64> = nodal.dx.column(j * m + k).iter().zip(&pz).map(|(d, z)| d * z).collect();
            let deriv = ode::diff_samples_n(&weighted, h, j)?;
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            for (a, d) in acc.iter_mut().zip(deriv) {
                *a += sign * d;
            }
        }
        columns.push(acc);
    }
    GridFunction::from_columns(*traj.grid(), &columns)
}

pub fn el_report(p: &HerglotzProblem, traj: &Trajectory, psi_z: &GridFunction, tolerance: f64) -> Result<VerificationReport> {
    let res = el_residual(p, traj, psi_z)?;
    let norm = max_abs_over(trusted_nodes(traj.len(), p.order).flat_map(|i| res.row(i).to_vec()));
    Ok(VerificationReport::new("euler-lagrange", norm, tolerance))
}

/// `max_j |psi_j(b)|` together with `|psi_z(b) - 1|`.
pub fn transversality(mult: &MultiplierSet, tolerance: f64) -> VerificationReport {
    let last = mult.psi.len() - 1;
    let psi_b = max_abs_over(mult.psi.row(last).iter().copied());
    let psi_z_err = (mult.psi_z(last) - 1.0).abs();
    VerificationReport::new("transversality", psi_b.max(psi_z_err), tolerance)
        .with("max_psi_b", psi_b)
        .with("psi_z_b_error", psi_z_err)
}

/// `d/dt (sum_i psi_i x^(i) + psi_z L) - psi_z dL/dt` on interior nodes.
///
/// For autonomous Lagrangians the bracket itself must be constant, and its
/// deviation from the mean also counts towards the residual.
pub fn dubois_reymond(
    p: &HerglotzProblem,
    traj: &Trajectory,
    mult: &MultiplierSet,
    tolerance: f64,
) -> Result<VerificationReport> {
    let nodal = NodalPartials::evaluate(p, traj)?;
    let bracket = hamiltonian_series(traj, mult, &nodal.lagrangian);
    let drift = ode::diff_samples(&bracket, traj.grid().step())?;
    let n = traj.len();
    let drift_norm = max_abs_over((1..n - 1).map(|i| drift[i] - mult.psi_z(i) * nodal.dt[i]));
    let mut report = VerificationReport::new("dubois-reymond", drift_norm, tolerance).with("drift", drift_norm);
    if p.is_autonomous() {
        let (mean, dev) = mean_and_deviation(&bracket);
        report.residual = drift_norm.max(dev);
        report.pass = report.residual <= tolerance;
        report = report.with("bracket_mean", mean).with("bracket_deviation", dev);
    }
    Ok(report)
}

/// `X_0 .. X_{n-1}` along `traj`, with
/// `X_i = d/dt X_{i-1} - x^(i) d/dt T`.
pub fn gen_x(fam: &SymmetryFamily, traj: &Trajectory) -> Result<Vec<GridFunction>> {
    let (n, m) = (traj.order(), traj.dim());
    if fam.x.len() != m {
        return Err(Error::DimensionMismatch(format!("{} X generators for dimension {m}", fam.x.len())));
    }
    let h = traj.grid().step();
    let mut point = EvalPoint::zeros(n, m);
    let mut t_gen = Vec::with_capacity(traj.len());
    let mut x0 = vec![Vec::with_capacity(traj.len()); m];
    for i in 0..traj.len() {
        traj.fill_point(i, &mut point);
        t_gen.push(fam.t.eval(&point)?);
        for (col, e) in x0.iter_mut().zip(&fam.x) {
            col.push(e.eval(&point)?);
        }
    }
    let t_dot = if n > 1 { ode::diff_samples(&t_gen, h)? } else { vec![0.0; traj.len()] };
    let mut out = vec![GridFunction::from_columns(*traj.grid(), &x0)?];
    let mut prev = x0;
    for i in 1..n {
        let mut next = Vec::with_capacity(m);
        for (k, col) in prev.iter().enumerate() {
            let d = ode::diff_samples(col, h)?;
            let xi = traj.x_series(k + 1, i);
            next.push(d.iter().zip(&xi).zip(&t_dot).map(|((d, x), td)| d - x * td).collect::<Vec<f64>>());
        }
        out.push(GridFunction::from_columns(*traj.grid(), &next)?);
        prev = next;
    }
    Ok(out)
}

/// `sum_i psi_i . X_{i-1} + psi_z Z - (sum_i psi_i . x^(i) + psi_z L) T` at
/// every node.
pub fn noether_series(
    p: &HerglotzProblem,
    traj: &Trajectory,
    mult: &MultiplierSet,
    fam: &SymmetryFamily,
) -> Result<Vec<f64>> {
    fam.check(&p.alphabet())?;
    let nodal = NodalPartials::evaluate(p, traj)?;
    let bracket = hamiltonian_series(traj, mult, &nodal.lagrangian);
    let xs = gen_x(fam, traj)?;
    let mut point = EvalPoint::zeros(p.order, p.dim);
    let mut charge = Vec::with_capacity(traj.len());
    for node in 0..traj.len() {
        traj.fill_point(node, &mut point);
        let mut c = 0.0;
        for (i, x_gen) in xs.iter().enumerate() {
            for k in 0..p.dim {
                c += mult.psi(node, i + 1, k + 1) * x_gen.get(node, k);
            }
        }
        c += mult.psi_z(node) * fam.z.eval(&point)?;
        c -= bracket[node] * fam.t.eval(&point)?;
        charge.push(c);
    }
    Ok(charge)
}

/// Constancy of the Noether charge, measured as
/// `max |C - mean(C)| / (1 + |mean(C)|)`.
///
/// The report is unguarded; use [`certify_noether`] to tie it to an
/// invariance check.
pub fn noether_charge(
    p: &HerglotzProblem,
    traj: &Trajectory,
    mult: &MultiplierSet,
    fam: &SymmetryFamily,
    tolerance: f64,
) -> Result<VerificationReport> {
    let charge = noether_series(p, traj, mult, fam)?;
    let range = trusted_nodes(traj.len(), p.order.saturating_sub(1));
    let (mean, dev) = mean_and_deviation(&charge[range]);
    let relative = dev / (1.0 + mean.abs());
    let mut report = VerificationReport::new("noether-charge", relative, tolerance)
        .with("charge_mean", mean)
        .with("max_deviation", dev);
    report.guarded = Some(false);
    Ok(report)
}

/// Runs [`invariance_check`] and then [`noether_charge`]; the charge report
/// is guarded only when invariance passed.
pub fn certify_noether(
    p: &HerglotzProblem,
    traj: &Trajectory,
    mult: &MultiplierSet,
    fam: &SymmetryFamily,
    finite: &FiniteFamily,
    tolerance: f64,
) -> Result<(VerificationReport, VerificationReport)> {
    let invariance = invariance_check(p, traj, finite, tolerance)?;
    let mut charge = noether_charge(p, traj, mult, fam, tolerance)?;
    charge.guarded = Some(invariance.pass);
    Ok((invariance, charge))
}

struct Transformed {
    t: Vec<f64>,
    x: Vec<Vec<f64>>,
    z: Vec<f64>,
}

fn transform(fam: &FiniteFamily, traj: &Trajectory, s: f64) -> Result<Transformed> {
    let mut point = EvalPoint::zeros(traj.order(), traj.dim());
    let mut out = Transformed {
        t: Vec::with_capacity(traj.len()),
        x: vec![Vec::with_capacity(traj.len()); traj.dim()],
        z: Vec::with_capacity(traj.len()),
    };
    for i in 0..traj.len() {
        traj.fill_point(i, &mut point);
        point.s = s;
        out.t.push(fam.t.eval(&point)?);
        for (col, e) in out.x.iter_mut().zip(&fam.x) {
            col.push(e.eval(&point)?);
        }
        out.z.push(fam.z.eval(&point)?);
    }
    Ok(out)
}

/// Per-node `dT^s/dt` and the residual of
/// `dZ^s/dt - L(T^s, X^s, dX^s/dT^s, ..., Z^s) dT^s/dt`.
fn transformed_residuals(p: &HerglotzProblem, traj: &Trajectory, tr: &Transformed) -> Result<(Vec<f64>, Vec<f64>)> {
    let h = traj.grid().step();
    let (n, m) = (p.order, p.dim);
    let tau = ode::diff_samples(&tr.t, h)?;
    if let Some(i) = tau.iter().position(|v| *v == 0.0) {
        return Err(Error::Domain(format!("dT^s/dt vanishes at node {i}")));
    }
    // derivs[j][k] = d^j X^s_k / d(T^s)^j
    let mut derivs = vec![tr.x.clone()];
    for j in 1..=n {
        let next = derivs[j - 1]
            .iter()
            .map(|col| {
                ode::diff_samples(col, h).map(|d| d.iter().zip(&tau).map(|(a, b)| a / b).collect::<Vec<f64>>())
            })
            .collect::<Result<Vec<_>>>()?;
        derivs.push(next);
    }
    let z_dot = ode::diff_samples(&tr.z, h)?;
    let mut point = EvalPoint::zeros(n, m);
    let mut residual = Vec::with_capacity(traj.len());
    for i in 0..traj.len() {
        point.t = tr.t[i];
        point.z = tr.z[i];
        for (j, block) in derivs.iter().enumerate() {
            for (k, col) in block.iter().enumerate() {
                point.set_x(k + 1, j, col[i]);
            }
        }
        residual.push(z_dot[i] - p.lagrangian.eval(&point)? * tau[i]);
    }
    Ok((tau, residual))
}

/// First-order (in `s`) check that `p` is invariant under `finite` along `traj`.
///
/// Condition (i) is turned into a node-wise estimate of the constant `xi`,
/// `xi(t) = -(z(b)/(b-a)) d/ds (dT^s/dt)|_{s=0}`, which must not vary.
/// Condition (ii) requires the `s`-derivative of its residual to vanish.
/// Both `s`-derivatives are central differences with step [`PARAM_EPS`].
pub fn invariance_check(
    p: &HerglotzProblem,
    traj: &Trajectory,
    finite: &FiniteFamily,
    tolerance: f64,
) -> Result<VerificationReport> {
    traj.check_matches(p)?;
    finite.check(p.order, p.dim)?;
    if traj.len() < 2 * p.order + 1 {
        return Err(Error::GridTooCoarse { nodes: traj.len(), order: p.order });
    }

    let identity = transform(finite, traj, 0.0)?;
    for i in 0..traj.len() {
        let mut dev = (identity.t[i] - traj.grid().t(i)).abs().max((identity.z[i] - traj.z(i)).abs());
        for k in 0..p.dim {
            dev = dev.max((identity.x[k][i] - traj.x(i, k + 1, 0)).abs());
        }
        if !(dev <= IDENTITY_TOL) {
            return Err(Error::IdentityViolation { node: i, deviation: dev });
        }
    }

    let plus = transform(finite, traj, PARAM_EPS)?;
    let minus = transform(finite, traj, -PARAM_EPS)?;
    let (tau_p, res_p) = transformed_residuals(p, traj, &plus)?;
    let (tau_m, res_m) = transformed_residuals(p, traj, &minus)?;

    let scale = traj.z(traj.len() - 1) / (p.b - p.a);
    let xi: Vec<f64> = tau_p.iter().zip(&tau_m).map(|(a, b)| -scale * (a - b) / (2.0 * PARAM_EPS)).collect();
    let (xi_mean, xi_dev) = mean_and_deviation(&xi);

    let cond_ii = max_abs_over(
        trusted_nodes(traj.len(), p.order).map(|i| (res_p[i] - res_m[i]) / (2.0 * PARAM_EPS)),
    );

    Ok(VerificationReport::new("invariance", xi_dev.max(cond_ii), tolerance)
        .with("xi", xi_mean)
        .with("xi_deviation", xi_dev)
        .with("condition_ii", cond_ii))
}
