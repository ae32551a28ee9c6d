//! Browser bindings. Each exported function takes a JSON request and returns
//! a JSON response; failures come back as `{"error": "..."}`.

use herglotz::verify::DEFAULT_TOL_SCALE;
use herglotz::{
    certify_noether, dubois_reymond, el_report, fd_tolerance, noether_series, parse_with, psi_closed_form,
    psi_z_quadrature, shoot, transversality, Alphabet, Expr, Extremal, FiniteFamily, Grid, HerglotzProblem, Sense,
    ShootingConfig, SymmetryFamily, VerificationReport,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

#[derive(Debug, Deserialize)]
pub struct ProblemInput {
    pub lagrangian: String,
    pub order: usize,
    pub dim: usize,
    pub interval: [f64; 2],
    pub x_init: Vec<Vec<f64>>,
    pub z_init: f64,
    #[serde(default = "default_sense")]
    pub sense: String,
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_sense() -> String {
    "min".into()
}

fn default_grid() -> usize {
    301
}

fn default_seed() -> u64 {
    42
}

#[derive(Debug, Deserialize)]
pub struct NoetherInput {
    #[serde(flatten)]
    pub problem: ProblemInput,
    #[serde(rename = "T")]
    pub t: String,
    #[serde(rename = "X")]
    pub x: Vec<String>,
    #[serde(rename = "Z")]
    pub z: String,
    #[serde(rename = "Ts")]
    pub ts: String,
    #[serde(rename = "Xs")]
    pub xs: Vec<String>,
    #[serde(rename = "Zs")]
    pub zs: String,
}

#[derive(Debug, Serialize)]
struct Report {
    check: String,
    residual: f64,
    tolerance: f64,
    pass: bool,
    aux: serde_json::Map<String, Value>,
}

impl From<&VerificationReport> for Report {
    fn from(r: &VerificationReport) -> Self {
        Report {
            check: r.check.clone(),
            residual: r.residual,
            tolerance: r.tolerance,
            pass: r.pass,
            aux: r.aux.iter().map(|(k, v)| (k.clone(), json!(v))).collect(),
        }
    }
}

type Outcome = Result<Value, String>;

impl ProblemInput {
    fn build(&self) -> Result<HerglotzProblem, String> {
        let sense = match self.sense.as_str() {
            "min" | "minimize" => Sense::Minimize,
            "max" | "maximize" => Sense::Maximize,
            other => return Err(format!("unknown sense {other:?}")),
        };
        let p = HerglotzProblem {
            order: self.order,
            dim: self.dim,
            a: self.interval[0],
            b: self.interval[1],
            lagrangian: Expr::parse(&self.lagrangian, self.order, self.dim).map_err(|e| format!("lagrangian: {e}"))?,
            alpha: self.x_init.clone(),
            gamma: self.z_init,
            sense,
        };
        p.validate().map_err(|e| e.to_string())?;
        Ok(p)
    }

    fn solve(&self) -> Result<(HerglotzProblem, Extremal), String> {
        let p = self.build()?;
        let grid = Grid::new(p.a, p.b, self.grid).map_err(|e| e.to_string())?;
        let mut cfg = ShootingConfig::new(grid);
        cfg.seed = self.seed;
        let ext = shoot(&p, &cfg).map_err(|e| e.to_string())?;
        Ok((p, ext))
    }
}

fn respond(result: Outcome) -> String {
    match result {
        Ok(v) => v.to_string(),
        Err(e) => json!({ "error": e }).to_string(),
    }
}

fn parse_request<'a, T: Deserialize<'a>>(input: &'a str) -> Result<T, String> {
    serde_json::from_str(input).map_err(|e| format!("bad request: {e}"))
}

fn solve_value(input: &str) -> Outcome {
    let req: ProblemInput = parse_request(input)?;
    let (p, ext) = req.solve()?;
    let traj = &ext.traj;
    let x: Vec<Vec<f64>> = (1..=p.dim).map(|k| traj.x_series(k, 0)).collect();
    let psi: Vec<Vec<f64>> = (1..=p.dim).map(|k| ext.mult.psi_series(1, k)).collect();
    Ok(json!({
        "z_b": ext.z_b,
        "converged": ext.converged,
        "residual": ext.residual_norm,
        "iterations": ext.iterations,
        "t": traj.grid().times(),
        "x": x,
        "z": traj.z_values().column(0),
        "psi": psi,
        "psi_z": ext.mult.psi_z.column(0),
    }))
}

pub fn solve_json(input: &str) -> String {
    respond(solve_value(input))
}

fn verify_value(input: &str) -> Outcome {
    let req: ProblemInput = parse_request(input)?;
    let (p, ext) = req.solve()?;
    let tol = fd_tolerance(&ext.traj, DEFAULT_TOL_SCALE);
    let psi_z = psi_z_quadrature(&p, &ext.traj).map_err(|e| e.to_string())?;
    let closed = psi_closed_form(&p, &ext.traj, &psi_z).map_err(|e| e.to_string())?;
    let reports = [
        el_report(&p, &ext.traj, &psi_z, tol).map_err(|e| e.to_string())?,
        transversality(&closed, tol),
        dubois_reymond(&p, &ext.traj, &ext.mult, tol).map_err(|e| e.to_string())?,
    ];
    let reports: Vec<Report> = reports.iter().map(Report::from).collect();
    Ok(json!({ "converged": ext.converged, "z_b": ext.z_b, "reports": reports }))
}

pub fn verify_json(input: &str) -> String {
    respond(verify_value(input))
}

fn exprs(sources: &[String], alphabet: &Alphabet, what: &str) -> Result<Vec<Expr>, String> {
    sources.iter().map(|s| parse_with(s, alphabet).map_err(|e| format!("{what}: {e}"))).collect()
}

fn noether_value(input: &str) -> Outcome {
    let req: NoetherInput = parse_request(input)?;
    let (p, ext) = req.problem.solve()?;
    let plain = Alphabet::new(p.order, p.dim);
    let extended = Alphabet::with_param(p.order, p.dim);
    let one = |s: &String, a: &Alphabet, what: &str| exprs(std::slice::from_ref(s), a, what).map(|mut v| v.remove(0));
    let fam = SymmetryFamily { t: one(&req.t, &plain, "T")?, x: exprs(&req.x, &plain, "X")?, z: one(&req.z, &plain, "Z")? };
    let finite =
        FiniteFamily { t: one(&req.ts, &extended, "Ts")?, x: exprs(&req.xs, &extended, "Xs")?, z: one(&req.zs, &extended, "Zs")? };
    let tol = fd_tolerance(&ext.traj, DEFAULT_TOL_SCALE);
    let (inv, charge) = certify_noether(&p, &ext.traj, &ext.mult, &fam, &finite, tol).map_err(|e| e.to_string())?;
    let series = noether_series(&p, &ext.traj, &ext.mult, &fam).map_err(|e| e.to_string())?;
    Ok(json!({
        "invariance": Report::from(&inv),
        "charge": Report::from(&charge),
        "guarded": charge.guarded.unwrap_or(false),
        "t": ext.traj.grid().times(),
        "series": series,
    }))
}

pub fn noether_json(input: &str) -> String {
    respond(noether_value(input))
}

#[wasm_bindgen]
pub fn solve(input: &str) -> String {
    solve_json(input)
}

#[wasm_bindgen]
pub fn verify(input: &str) -> String {
    verify_json(input)
}

#[wasm_bindgen]
pub fn noether(input: &str) -> String {
    noether_json(input)
}
