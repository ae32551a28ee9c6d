//! Extremals by single shooting on the Pontryagin system, and a direct
//! transcription oracle that optimizes `z(b)` without any necessary condition.

use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::expr::EvalPoint;
use crate::multipliers::{psi_backward_ode, MultiplierSet};
use crate::nelder_mead::{self, NelderMeadConfig};
use crate::ode::{rk4, Direction, Grid, GridFunction};
use crate::problem::{reduce_to_ocp, HerglotzProblem, OcpSystem, Partials, Sense};
use crate::trajectory::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShootingConfig {
    pub grid: Grid,
    /// Tolerance on the infinity norm of the terminal residual.
    pub tol: f64,
    pub max_iter: usize,
    pub multistart: usize,
    pub seed: u64,
    /// Relative forward-difference step of the Jacobian.
    pub fd_eps: f64,
}

impl ShootingConfig {
    pub fn new(grid: Grid) -> Self {
        ShootingConfig { grid, tol: 1e-8, max_iter: 50, multistart: 8, seed: 42, fd_eps: 1e-6 }
    }

    fn check(&self) -> Result<()> {
        if !(self.tol > 0.0) || self.max_iter == 0 || self.multistart == 0 || !(self.fd_eps > 0.0) {
            return Err(Error::DimensionMismatch(
                "shooting needs tol > 0, fd_eps > 0, max_iter >= 1 and multistart >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Extremal {
    pub traj: Trajectory,
    pub mult: MultiplierSet,
    pub converged: bool,
    pub residual_norm: f64,
    pub z_b: f64,
    /// Newton iterations taken by the selected branch.
    pub iterations: usize,
    /// Index of the multistart branch that produced this extremal.
    pub branch: usize,
    /// `(psi_1(a), ..., psi_n(a), psi_z(a))` found by the shooting iteration.
    pub costate0: Vec<f64>,
}

/// Eliminates the control from the optimality condition
/// `psi_n + psi_z dL/du = 0` by damped Newton iteration.
pub struct ControlSolver<'a> {
    ocp: &'a OcpSystem,
    partials: Partials,
    point: EvalPoint,
}

const CONTROL_MAX_ITER: usize = 50;

impl<'a> ControlSolver<'a> {
    pub fn new(ocp: &'a OcpSystem) -> Result<Self> {
        let partials = Partials::of(ocp.problem());
        if partials.hessian.iter().flatten().all(|e| e.is_zero()) {
            return Err(Error::SingularControl("L is affine in the highest derivative".into()));
        }
        let p = ocp.problem();
        Ok(ControlSolver { ocp, partials, point: EvalPoint::zeros(p.order, p.dim) })
    }

    pub fn partials(&self) -> &Partials {
        &self.partials
    }

    /// Solves for `u` given the reduced state, the last costate block and `psi_z`.
    pub fn solve(&mut self, t: f64, state: &[f64], psi_n: &[f64], psi_z: f64, u_guess: &[f64]) -> Result<Vec<f64>> {
        if !(psi_z > 0.0) {
            return Err(Error::Domain(format!("psi_z must be positive, got {psi_z}")));
        }
        let m = self.ocp.control_dim();
        let scale = 1.0 + psi_n.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let tol = 1e-12 * scale;
        let mut u = u_guess.to_vec();
        let mut g = vec![0.0; m];
        let mut norm = self.residual(t, state, &u, psi_n, psi_z, &mut g)?;
        for _ in 0..CONTROL_MAX_ITER {
            if norm <= tol {
                return Ok(u);
            }
            let mut jac = DMatrix::zeros(m, m);
            for r in 0..m {
                for c in 0..m {
                    jac[(r, c)] = psi_z * self.partials.hessian[r][c].eval(&self.point)?;
                }
            }
            let rhs = DVector::from_iterator(m, g.iter().map(|v| -v));
            let delta = jac
                .lu()
                .solve(&rhs)
                .filter(|d| d.iter().all(|v| v.is_finite()))
                .ok_or_else(|| Error::SingularControl(format!("psi_z d2L/du2 is singular at t = {t}")))?;

            let mut lambda = 1.0;
            let mut accepted = false;
            let mut trial = u.clone();
            for _ in 0..30 {
                for ((tr, ui), di) in trial.iter_mut().zip(&u).zip(delta.iter()) {
                    *tr = ui + lambda * di;
                }
                if let Ok(n) = self.residual(t, state, &trial, psi_n, psi_z, &mut g) {
                    if n < norm {
                        norm = n;
                        accepted = true;
                        break;
                    }
                }
                lambda *= 0.5;
            }
            if !accepted {
                // step below round-off: accept if already tiny
                let step = delta.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                let size = 1.0 + u.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                if step <= 1e-13 * size {
                    return Ok(u);
                }
                return Err(Error::NoConvergence(format!("control elimination stalled at t = {t}")));
            }
            u.copy_from_slice(&trial);
        }
        if norm <= tol {
            Ok(u)
        } else {
            Err(Error::NoConvergence(format!("control elimination did not converge at t = {t}")))
        }
    }

    fn residual(&mut self, t: f64, state: &[f64], u: &[f64], psi_n: &[f64], psi_z: f64, g: &mut [f64]) -> Result<f64> {
        self.ocp.assemble(t, state, u, &mut self.point);
        self.partials.gradient_u(&self.point, g)?;
        let mut norm = 0.0f64;
        for (gi, pn) in g.iter_mut().zip(psi_n) {
            *gi = pn + psi_z * *gi;
            norm = norm.max(gi.abs());
        }
        if norm.is_finite() {
            Ok(norm)
        } else {
            Err(Error::Domain(format!("non-finite optimality residual at t = {t}")))
        }
    }
}

/// One-shot control elimination at a single point.
pub fn control_from_costate(
    p: &HerglotzProblem,
    t: f64,
    state: &[f64],
    psi_n: &[f64],
    psi_z: f64,
    u_guess: &[f64],
) -> Result<Vec<f64>> {
    let ocp = reduce_to_ocp(p);
    let mut solver = ControlSolver::new(&ocp)?;
    solver.solve(t, state, psi_n, psi_z, u_guess)
}

/// State and costates integrated forward from one costate guess.
struct ForwardSolution {
    traj: Trajectory,
    residual: Vec<f64>,
}

struct Shooter<'a> {
    problem: &'a HerglotzProblem,
    ocp: &'a OcpSystem,
    grid: Grid,
}

impl Shooter<'_> {
    fn integrate(&self, costate0: &[f64]) -> Result<ForwardSolution> {
        let p = self.problem;
        let (n, m) = (p.order, p.dim);
        let nm = n * m;
        let mut control = ControlSolver::new(self.ocp)?;
        let mut u_last = vec![0.0; m];

        let mut y0 = p.initial_state();
        y0.extend_from_slice(costate0);

        let mut dx = vec![0.0; nm];
        let mut point = EvalPoint::zeros(n, m);
        let sol = rk4(
            |t, y| {
                let (state, costate) = y.split_at(nm + 1);
                let psi_z = costate[nm];
                let u = control.solve(t, state, &costate[(n - 1) * m..nm], psi_z, &u_last)?;
                u_last.copy_from_slice(&u);

                self.ocp.assemble(t, state, &u, &mut point);
                let point = &point;
                for j in 0..n {
                    for k in 0..m {
                        dx[j * m + k] = control.partials.dx[j][k].eval(point)?;
                    }
                }
                let dz = control.partials.dz.eval(point)?;

                let mut dy = Vec::with_capacity(2 * (nm + 1));
                dy.extend_from_slice(&state[m..nm]);
                dy.extend_from_slice(&u);
                dy.push(self.ocp.problem().lagrangian.eval(point)?);
                for k in 0..m {
                    dy.push(-psi_z * dx[k]);
                }
                for j in 1..n {
                    for k in 0..m {
                        dy.push(-costate[(j - 1) * m + k] - psi_z * dx[j * m + k]);
                    }
                }
                dy.push(-psi_z * dz);
                Ok(dy)
            },
            &y0,
            &self.grid,
            Direction::Forward,
        )?;

        // recover u = x^(n) at the nodes
        let nodes = self.grid.len();
        let mut xs = Vec::with_capacity(nodes * (n + 1) * m);
        let mut zs = Vec::with_capacity(nodes);
        u_last.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..nodes {
            let row = sol.row(i);
            let (state, costate) = row.split_at(nm + 1);
            let u = control.solve(self.grid.t(i), state, &costate[(n - 1) * m..nm], costate[nm], &u_last)?;
            xs.extend_from_slice(&state[..nm]);
            xs.extend_from_slice(&u);
            zs.push(state[nm]);
            u_last = u;
        }
        let traj = Trajectory::new(
            n,
            m,
            GridFunction::new(self.grid, (n + 1) * m, xs)?,
            GridFunction::from_column(self.grid, zs)?,
        )?;

        let end = sol.last();
        let mut residual = end[nm + 1..2 * nm + 1].to_vec();
        residual.push(end[2 * nm + 1] - 1.0);
        Ok(ForwardSolution { traj, residual })
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

struct Branch {
    costate0: Vec<f64>,
    solution: ForwardSolution,
    norm: f64,
    iterations: usize,
    converged: bool,
}

fn newton_branch(shooter: &Shooter<'_>, cfg: &ShootingConfig, guess: Vec<f64>) -> Result<Branch> {
    let mut v = guess;
    let mut current = shooter.integrate(&v)?;
    let mut norm = inf_norm(&current.residual);
    let dim = v.len();
    let mut iterations = 0;
    while norm > cfg.tol && iterations < cfg.max_iter {
        let mut jac = DMatrix::zeros(dim, dim);
        let mut jac_ok = true;
        for c in 0..dim {
            let step = cfg.fd_eps * (1.0 + v[c].abs());
            let mut w = v.clone();
            w[c] += step;
            match shooter.integrate(&w) {
                Ok(sol) => {
                    for r in 0..dim {
                        jac[(r, c)] = (sol.residual[r] - current.residual[r]) / step;
                    }
                }
                Err(_) => {
                    jac_ok = false;
                    break;
                }
            }
        }
        if !jac_ok {
            break;
        }
        let rhs = DVector::from_iterator(dim, current.residual.iter().map(|r| -r));
        let Some(delta) = jac.lu().solve(&rhs).filter(|d| d.iter().all(|x| x.is_finite())) else {
            break;
        };

        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..=20 {
            let trial: Vec<f64> = v.iter().zip(delta.iter()).map(|(a, d)| a + lambda * d).collect();
            if let Ok(sol) = shooter.integrate(&trial) {
                let n = inf_norm(&sol.residual);
                if n < norm {
                    accepted = Some((trial, sol, n));
                    break;
                }
            }
            lambda *= 0.5;
        }
        iterations += 1;
        let Some((trial, sol, n)) = accepted else {
            break;
        };
        v = trial;
        current = sol;
        norm = n;
    }
    Ok(Branch { converged: norm <= cfg.tol, costate0: v, solution: current, norm, iterations })
}

/// Solves the Pontryagin boundary-value problem by single shooting on the
/// initial costates `(psi_1(a), ..., psi_n(a), psi_z(a))`.
///
/// Branch 0 starts from `psi_j(a) = 0`; the remaining branches draw
/// `psi_j(a)` from a seeded standard normal. Every branch starts with
/// `psi_z(a) = 1`. The branch with the smallest residual wins, ties going to
/// the lowest index.
pub fn shoot(p: &HerglotzProblem, cfg: &ShootingConfig) -> Result<Extremal> {
    p.validate()?;
    cfg.check()?;
    if cfg.grid.a() != p.a || cfg.grid.b() != p.b {
        return Err(Error::DimensionMismatch("shooting grid must span the problem interval".into()));
    }
    let ocp = reduce_to_ocp(p);
    ControlSolver::new(&ocp)?;
    let shooter = Shooter { problem: p, ocp: &ocp, grid: cfg.grid };

    let nm = p.order * p.dim;
    let mut rng = StdRng::seed_from_u64(cfg.seed);
    let guesses: Vec<Vec<f64>> = (0..cfg.multistart)
        .map(|b| {
            let mut g: Vec<f64> = if b == 0 {
                vec![0.0; nm]
            } else {
                (0..nm).map(|_| StandardNormal.sample(&mut rng)).collect()
            };
            g.push(1.0);
            g
        })
        .collect();

    let results = run_branches(&shooter, cfg, guesses);

    let mut best: Option<(usize, Branch)> = None;
    let mut first_err = None;
    for (idx, r) in results.into_iter().enumerate() {
        match r {
            Ok(branch) => {
                if best.as_ref().is_none_or(|(_, b)| branch.norm < b.norm) {
                    best = Some((idx, branch));
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    let Some((idx, branch)) = best else {
        return Err(first_err.unwrap_or_else(|| Error::NoConvergence("no shooting branch ran".into())));
    };
    let traj = branch.solution.traj;
    let mult = psi_backward_ode(p, &traj)?;
    let z_b = traj.z(traj.len() - 1);
    Ok(Extremal {
        traj,
        mult,
        converged: branch.converged,
        residual_norm: branch.norm,
        z_b,
        iterations: branch.iterations,
        branch: idx,
        costate0: branch.costate0,
    })
}

#[cfg(feature = "parallel")]
fn run_branches(shooter: &Shooter<'_>, cfg: &ShootingConfig, guesses: Vec<Vec<f64>>) -> Vec<Result<Branch>> {
    use rayon::prelude::*;
    guesses.into_par_iter().map(|g| newton_branch(shooter, cfg, g)).collect()
}

#[cfg(not(feature = "parallel"))]
fn run_branches(shooter: &Shooter<'_>, cfg: &ShootingConfig, guesses: Vec<Vec<f64>>) -> Vec<Result<Branch>> {
    guesses.into_iter().map(|g| newton_branch(shooter, cfg, g)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleConfig {
    /// Control parameter nodes (piecewise-linear interpolation between them).
    pub coarse_nodes: usize,
    /// RK4 steps per coarse interval.
    pub substeps: usize,
    pub max_evals: usize,
    pub max_restarts: usize,
    pub ftol: f64,
    pub initial_step: f64,
    pub seed: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            coarse_nodes: 21,
            substeps: 5,
            max_evals: 400_000,
            max_restarts: 12,
            ftol: 1e-13,
            initial_step: 0.5,
            seed: 42,
        }
    }
}

/// Result of [`direct_oracle`].
#[derive(Debug, Clone)]
pub struct DirectSolution {
    /// Trajectory on the fine integration grid; `x^(n)` is the interpolated control.
    pub traj: Trajectory,
    /// Control values at the coarse nodes, `controls[i*m + k]`.
    pub controls: Vec<f64>,
    pub z_b: f64,
    pub converged: bool,
    pub evaluations: usize,
}

fn interpolate_control(params: &[f64], m: usize, coarse: usize, a: f64, h: f64, t: f64, out: &mut [f64]) {
    let pos = ((t - a) / h).max(0.0);
    let i = (pos.floor() as usize).min(coarse - 2);
    let w = (pos - i as f64).clamp(0.0, 1.0);
    for k in 0..m {
        out[k] = (1.0 - w) * params[i * m + k] + w * params[(i + 1) * m + k];
    }
}

fn integrate_direct(ocp: &OcpSystem, params: &[f64], coarse: usize, fine: &Grid) -> Result<GridFunction> {
    let p = ocp.problem();
    let m = p.dim;
    let h = (p.b - p.a) / (coarse - 1) as f64;
    let mut u = vec![0.0; m];
    rk4(
        |t, y| {
            interpolate_control(params, m, coarse, p.a, h, t, &mut u);
            ocp.field(t, y, &u)
        },
        &p.initial_state(),
        fine,
        Direction::Forward,
    )
}

/// Optimizes `z(b)` directly over a piecewise-linear control with Nelder-Mead.
///
/// Shares nothing with the shooting path beyond the reduced dynamics, so it
/// serves as an independent check on extremals.
pub fn direct_oracle(p: &HerglotzProblem, cfg: &OracleConfig) -> Result<DirectSolution> {
    p.validate()?;
    if cfg.coarse_nodes < 2 || cfg.substeps == 0 {
        return Err(Error::InvalidGrid("oracle needs at least 2 coarse nodes and 1 substep".into()));
    }
    let ocp = reduce_to_ocp(p);
    let mut fine_nodes = (cfg.coarse_nodes - 1) * cfg.substeps + 1;
    if fine_nodes % 2 == 0 {
        fine_nodes = 2 * (fine_nodes - 1) + 1;
    }
    let fine = Grid::new(p.a, p.b, fine_nodes)?;
    let m = p.dim;
    let sign = match p.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let mut objective = |params: &[f64]| -> f64 {
        match integrate_direct(&ocp, params, cfg.coarse_nodes, &fine) {
            Ok(sol) => sign * ocp.payoff(sol.last()),
            Err(_) => f64::INFINITY,
        }
    };
    let x0 = vec![0.0; cfg.coarse_nodes * m];
    let nm_cfg = NelderMeadConfig {
        initial_step: cfg.initial_step,
        max_evals: cfg.max_evals,
        ftol: cfg.ftol,
        max_restarts: cfg.max_restarts,
    };
    let mut rng = StdRng::seed_from_u64(cfg.seed);
    let best = nelder_mead::minimize(&mut objective, &x0, &nm_cfg, &mut rng);
    if !best.f.is_finite() {
        return Err(Error::NoConvergence("direct transcription found no finite objective".into()));
    }

    let sol = integrate_direct(&ocp, &best.x, cfg.coarse_nodes, &fine)?;
    let (n, nm) = (p.order, p.order * m);
    let h = (p.b - p.a) / (cfg.coarse_nodes - 1) as f64;
    let mut u = vec![0.0; m];
    let mut xs = Vec::with_capacity(fine.len() * (n + 1) * m);
    for i in 0..fine.len() {
        xs.extend_from_slice(&sol.row(i)[..nm]);
        interpolate_control(&best.x, m, cfg.coarse_nodes, p.a, h, fine.t(i), &mut u);
        xs.extend_from_slice(&u);
    }
    let traj = Trajectory::new(
        n,
        m,
        GridFunction::new(fine, (n + 1) * m, xs)?,
        GridFunction::from_column(fine, sol.column(nm))?,
    )?;
    Ok(DirectSolution {
        z_b: ocp.payoff(sol.last()),
        traj,
        controls: best.x,
        converged: best.converged,
        evaluations: best.evals,
    })
}
