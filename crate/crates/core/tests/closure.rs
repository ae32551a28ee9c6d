//! Converged extremals must pass every certificate; non-extremals must not.

use herglotz::multipliers::NodalPartials;
use herglotz::ode;
use herglotz::{
    dubois_reymond, el_report, el_residual, fd_tolerance, invariance_check, noether_charge, noether_series,
    parse_with, psi_closed_form, psi_z_quadrature, shoot, transversality, Alphabet, Expr, Extremal, FiniteFamily,
    Grid, HerglotzProblem, Sense, ShootingConfig, SymmetryFamily, Trajectory,
};

const SCALE: f64 = 50.0;

fn problem(src: &str, order: usize, dim: usize, alpha: Vec<Vec<f64>>, sense: Sense) -> HerglotzProblem {
    HerglotzProblem {
        order,
        dim,
        a: 0.0,
        b: 1.0,
        lagrangian: Expr::parse(src, order, dim).unwrap(),
        alpha,
        gamma: 0.25,
        sense,
    }
}

fn catalogue() -> Vec<HerglotzProblem> {
    vec![
        problem("x1'^2/2 - x1^2/2 - z", 1, 1, vec![vec![1.0]], Sense::Minimize),
        problem("x1''^2/2 + x1^2/2 - z/2", 2, 1, vec![vec![1.0], vec![0.0]], Sense::Minimize),
        problem("x1'^2/2 + x2'^2/2 - x1*x2 - z/2", 1, 2, vec![vec![1.0, -0.5]], Sense::Minimize),
        problem("-x1'^2/2 + x1^2/2 + z", 1, 1, vec![vec![1.0]], Sense::Maximize),
        problem("t*x1 + x1'^2/2 + z/3", 1, 1, vec![vec![0.5]], Sense::Minimize),
        problem("x1'''^2/2 + x1'^2/2", 3, 1, vec![vec![0.0], vec![1.0], vec![0.0]], Sense::Minimize),
    ]
}

fn solve(p: &HerglotzProblem, nodes: usize) -> Extremal {
    let ext = shoot(p, &ShootingConfig::new(Grid::new(p.a, p.b, nodes).unwrap())).unwrap();
    assert!(ext.converged, "{} did not converge", p.lagrangian);
    ext
}

fn time_translation(order: usize, dim: usize) -> FiniteFamily {
    let a = Alphabet::with_param(order, dim);
    FiniteFamily {
        t: parse_with("t + s", &a).unwrap(),
        x: (1..=dim).map(|k| parse_with(&format!("x{k}"), &a).unwrap()).collect(),
        z: parse_with("z", &a).unwrap(),
    }
}

#[test]
fn converged_extremals_pass_all_conditions() {
    for p in catalogue() {
        let ext = solve(&p, 401);
        assert_eq!(ext.traj.x(0, 1, 0), p.alpha[0][0]);
        assert_eq!(ext.traj.z(0), p.gamma);
        let tol = fd_tolerance(&ext.traj, SCALE);
        let psi_z = psi_z_quadrature(&p, &ext.traj).unwrap();
        let el = el_report(&p, &ext.traj, &psi_z, tol).unwrap();
        assert!(el.pass, "{}: {el}", p.lagrangian);
        assert!(transversality(&ext.mult, tol).pass);
        let closed = psi_closed_form(&p, &ext.traj, &psi_z).unwrap();
        let tr = transversality(&closed, tol);
        assert!(tr.pass, "{}: {tr}", p.lagrangian);
        let dr = dubois_reymond(&p, &ext.traj, &ext.mult, tol).unwrap();
        assert!(dr.pass, "{}: {dr}", p.lagrangian);
    }
}

#[test]
fn invariant_families_have_constant_charge() {
    for p in catalogue() {
        let ext = solve(&p, 401);
        let tol = fd_tolerance(&ext.traj, SCALE);
        let inv = invariance_check(&p, &ext.traj, &time_translation(p.order, p.dim), tol).unwrap();
        assert_eq!(inv.pass, p.is_autonomous(), "{}: {inv}", p.lagrangian);
        if inv.pass {
            let fam = SymmetryFamily::time_translation(p.dim);
            let charge = noether_charge(&p, &ext.traj, &ext.mult, &fam, tol).unwrap();
            assert!(charge.pass, "{}: {charge}", p.lagrangian);
        }
    }
}

#[test]
fn time_translation_charge_is_negated_bracket() {
    for p in catalogue().into_iter().filter(|p| p.is_autonomous()) {
        let ext = solve(&p, 201);
        let charge = noether_series(&p, &ext.traj, &ext.mult, &SymmetryFamily::time_translation(p.dim)).unwrap();
        for (i, c) in charge.iter().enumerate() {
            let h = herglotz::hamiltonian(&p, &ext.traj, &ext.mult, i).unwrap().h;
            assert!((c + h).abs() <= 1e-10);
        }
    }
}

#[test]
fn first_order_residual_is_psi_z_times_generalized_residual() {
    // dL/dx - d/dt dL/dx' + dL/dz dL/dx', on a trajectory that is not an extremal
    let p = problem("x1'^2/2 + sin(x1) - z*x1'/4", 1, 1, vec![vec![1.0]], Sense::Minimize);
    let traj = Trajectory::admissible(&p, Grid::new(0.0, 1.0, 401).unwrap(), |t| {
        vec![(2.0 * t).cos(), -2.0 * (2.0 * t).sin()]
    })
    .unwrap();
    let tol = fd_tolerance(&traj, SCALE);
    let psi_z = psi_z_quadrature(&p, &traj).unwrap();
    let r = el_residual(&p, &traj, &psi_z).unwrap();
    let nodal = NodalPartials::evaluate(&p, &traj).unwrap();
    let (dl_dx, dl_dv) = (nodal.dx.column(0), nodal.dx.column(1));
    let d_dv = ode::diff_samples(&dl_dv, traj.grid().step()).unwrap();
    let mut largest: f64 = 0.0;
    for i in 0..traj.len() {
        let generalized = dl_dx[i] - d_dv[i] + nodal.dz[i] * dl_dv[i];
        largest = largest.max(generalized.abs());
        assert!((r.get(i, 0) - psi_z.get(i, 0) * generalized).abs() <= tol, "node {i}");
    }
    assert!(largest > 0.1, "trajectory should not be an extremal");
}

#[test]
fn classical_problems_reduce_to_the_classical_residual() {
    let p = problem("x1''^2/2 + x1^2/2", 2, 1, vec![vec![1.0], vec![0.0]], Sense::Minimize);
    assert!(p.validate().unwrap().classical);
    let ext = solve(&p, 401);
    let psi_z = psi_z_quadrature(&p, &ext.traj).unwrap();
    assert!(psi_z.values().iter().all(|v| *v == 1.0));
    let r = el_residual(&p, &ext.traj, &psi_z).unwrap();
    let nodal = NodalPartials::evaluate(&p, &ext.traj).unwrap();
    let h = ext.traj.grid().step();
    let d1 = ode::diff_samples_n(&nodal.dx.column(1), h, 1).unwrap();
    let d2 = ode::diff_samples_n(&nodal.dx.column(2), h, 2).unwrap();
    for i in 0..ext.traj.len() {
        let classical = nodal.dx.get(i, 0) - d1[i] + d2[i];
        assert!((r.get(i, 0) - classical).abs() <= 1e-10);
    }
}

#[test]
fn perturbed_extremal_is_rejected() {
    let p = problem("x1'^2/2 - x1^2/2 - z", 1, 1, vec![vec![1.0]], Sense::Minimize);
    let ext = solve(&p, 401);
    let bump = |t: f64| 0.05 * (std::f64::consts::PI * t).sin();
    let bump_dot = |t: f64| 0.05 * std::f64::consts::PI * (std::f64::consts::PI * t).cos();
    let traj = Trajectory::admissible(&p, *ext.traj.grid(), |t| {
        let i = ((t - p.a) / ext.traj.grid().step()).round() as usize;
        vec![ext.traj.x(i, 1, 0) + bump(t), ext.traj.x(i, 1, 1) + bump_dot(t)]
    })
    .unwrap();
    let tol = fd_tolerance(&traj, SCALE);
    let psi_z = psi_z_quadrature(&p, &traj).unwrap();
    assert!(!el_report(&p, &traj, &psi_z, tol).unwrap().pass);
}

#[test]
fn z_translation_is_rejected_on_z_dependent_lagrangian() {
    let p = problem("x1'^2/2 - x1^2/2 - z", 1, 1, vec![vec![1.0]], Sense::Minimize);
    let ext = solve(&p, 201);
    let a = Alphabet::with_param(1, 1);
    let fam = FiniteFamily {
        t: parse_with("t", &a).unwrap(),
        x: vec![parse_with("x1", &a).unwrap()],
        z: parse_with("z + s", &a).unwrap(),
    };
    let rep = invariance_check(&p, &ext.traj, &fam, fd_tolerance(&ext.traj, SCALE)).unwrap();
    assert!(!rep.pass);
}

#[test]
fn shooting_is_reproducible_across_runs() {
    let p = &catalogue()[2];
    let mut cfg = ShootingConfig::new(Grid::new(0.0, 1.0, 101).unwrap());
    cfg.seed = 7;
    let runs: Vec<Extremal> = (0..3).map(|_| shoot(p, &cfg).unwrap()).collect();
    for r in &runs[1..] {
        assert_eq!(r.traj, runs[0].traj);
        assert_eq!(r.branch, runs[0].branch);
    }
}
