//! TOML problem files.
//!
//! ```toml
//! [problem]
//! order = 1
//! dim = 1
//! interval = [0.0, 1.0]
//! lagrangian = "x1'^2/2 - x1^2/2 - z"
//! x_init = [[1.0]]
//! z_init = 0.0
//! sense = "min"
//!
//! [solver]
//! grid_points = 1001
//!
//! [symmetry]
//! T = "1"
//! X = ["0"]
//! Z = "0"
//!
//! [finite_symmetry]
//! Ts = "t + s"
//! Xs = ["x1"]
//! Zs = "z"
//! ```

use std::path::Path;

use herglotz::{parse_with, Alphabet, Expr, FiniteFamily, HerglotzProblem, Sense, SymmetryFamily};
use serde::Deserialize;

use crate::error::CliError;

pub const DEFAULT_GRID: usize = 1001;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    problem: RawProblem,
    #[serde(default)]
    solver: RawSolver,
    symmetry: Option<RawSymmetry>,
    finite_symmetry: Option<RawFinite>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    order: usize,
    dim: usize,
    interval: [f64; 2],
    lagrangian: String,
    x_init: Vec<Vec<f64>>,
    z_init: f64,
    #[serde(default = "default_sense")]
    sense: String,
}

fn default_sense() -> String {
    "min".into()
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    method: Option<String>,
    grid_points: Option<usize>,
    tolerance: Option<f64>,
    max_iterations: Option<usize>,
    multistart: Option<usize>,
    seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSymmetry {
    #[serde(rename = "T")]
    t: String,
    #[serde(rename = "X")]
    x: Vec<String>,
    #[serde(rename = "Z")]
    z: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFinite {
    #[serde(rename = "Ts")]
    t: String,
    #[serde(rename = "Xs")]
    x: Vec<String>,
    #[serde(rename = "Zs")]
    z: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Shooting,
    Direct,
}

impl Method {
    pub fn parse(s: &str) -> Option<Method> {
        match s {
            "shooting" | "shoot" => Some(Method::Shooting),
            "direct" | "oracle" => Some(Method::Direct),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverSettings {
    pub method: Method,
    pub grid_points: Option<usize>,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub multistart: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct ProblemFile {
    pub problem: HerglotzProblem,
    pub solver: SolverSettings,
    pub symmetry: Option<SymmetryFamily>,
    pub finite_symmetry: Option<FiniteFamily>,
}

pub fn load(path: &Path) -> Result<ProblemFile, CliError> {
    let source = std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.to_path_buf(), message: e.to_string() })?;
    parse(&source, path)
}

pub fn parse(source: &str, path: &Path) -> Result<ProblemFile, CliError> {
    let raw: RawFile = toml::from_str(source).map_err(|e| {
        let (line, column) = e.span().map(|s| line_col(source, s.start)).unwrap_or((1, 1));
        CliError::Syntax { path: path.to_path_buf(), line, column, message: e.message().to_string() }
    })?;
    let ctx = Locator { source, path };
    let p = &raw.problem;
    let (order, dim) = (p.order, p.dim);
    if order == 0 || dim == 0 {
        return Err(ctx.invalid("problem", "order", "order and dim must be at least 1"));
    }
    let alphabet = Alphabet::new(order, dim);
    let lagrangian = ctx.expr("problem", "lagrangian", 0, &p.lagrangian, &alphabet)?;
    let sense = match p.sense.as_str() {
        "min" | "minimize" => Sense::Minimize,
        "max" | "maximize" => Sense::Maximize,
        other => return Err(ctx.invalid("problem", "sense", &format!("unknown sense {other:?}, expected \"min\" or \"max\""))),
    };
    if p.x_init.len() != order || p.x_init.iter().any(|row| row.len() != dim) {
        return Err(ctx.invalid(
            "problem",
            "x_init",
            &format!("x_init needs {order} rows of {dim} entries"),
        ));
    }
    let problem = HerglotzProblem {
        order,
        dim,
        a: p.interval[0],
        b: p.interval[1],
        lagrangian,
        alpha: p.x_init.clone(),
        gamma: p.z_init,
        sense,
    };
    problem.validate().map_err(|e| ctx.invalid("problem", "interval", &e.to_string()))?;

    let s = &raw.solver;
    let method = match &s.method {
        None => Method::Shooting,
        Some(m) => Method::parse(m)
            .ok_or_else(|| ctx.invalid("solver", "method", &format!("unknown method {m:?}, expected \"shooting\" or \"direct\"")))?,
    };
    let solver = SolverSettings {
        method,
        grid_points: s.grid_points,
        tolerance: s.tolerance.unwrap_or(1e-8),
        max_iterations: s.max_iterations.unwrap_or(50),
        multistart: s.multistart.unwrap_or(8),
        seed: s.seed.unwrap_or(42),
    };

    let symmetry = match &raw.symmetry {
        None => None,
        Some(sym) => {
            if sym.x.len() != dim {
                return Err(ctx.invalid("symmetry", "X", &format!("X needs {dim} entries")));
            }
            Some(SymmetryFamily {
                t: ctx.expr("symmetry", "T", 0, &sym.t, &alphabet)?,
                x: sym
                    .x
                    .iter()
                    .enumerate()
                    .map(|(i, src)| ctx.expr("symmetry", "X", i, src, &alphabet))
                    .collect::<Result<_, _>>()?,
                z: ctx.expr("symmetry", "Z", 0, &sym.z, &alphabet)?,
            })
        }
    };
    let extended = Alphabet::with_param(order, dim);
    let finite_symmetry = match &raw.finite_symmetry {
        None => None,
        Some(fin) => {
            if fin.x.len() != dim {
                return Err(ctx.invalid("finite_symmetry", "Xs", &format!("Xs needs {dim} entries")));
            }
            Some(FiniteFamily {
                t: ctx.expr("finite_symmetry", "Ts", 0, &fin.t, &extended)?,
                x: fin
                    .x
                    .iter()
                    .enumerate()
                    .map(|(i, src)| ctx.expr("finite_symmetry", "Xs", i, src, &extended))
                    .collect::<Result<_, _>>()?,
                z: ctx.expr("finite_symmetry", "Zs", 0, &fin.z, &extended)?,
            })
        }
    };
    Ok(ProblemFile { problem, solver, symmetry, finite_symmetry })
}

fn line_col(source: &str, offset: usize) -> (usize, usize) {
    let before = &source[..offset.min(source.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

/// Maps a key inside a section back to a position in the source text.
struct Locator<'a> {
    source: &'a str,
    path: &'a Path,
}

impl Locator<'_> {
    /// Line and column of the first character inside the `index`-th quoted
    /// string of `key` in `[section]`, or of the key itself.
    fn find(&self, section: &str, key: &str, index: usize) -> (usize, usize) {
        let mut current = "";
        for (n, line) in self.source.lines().enumerate() {
            let trimmed = line.trim_start();
            if let Some(rest) = trimmed.strip_prefix('[') {
                current = rest.split(']').next().unwrap_or("").trim();
                continue;
            }
            if current != section {
                continue;
            }
            let Some((k, _)) = trimmed.split_once('=') else { continue };
            if k.trim() != key {
                continue;
            }
            let quotes: Vec<usize> = line.char_indices().filter(|(_, c)| *c == '"').map(|(i, _)| i).collect();
            let col = quotes
                .get(2 * index)
                .map(|q| line[..*q].chars().count() + 2)
                .unwrap_or(line.len() - trimmed.len() + 1);
            return (n + 1, col);
        }
        (1, 1)
    }

    fn expr(&self, section: &str, key: &str, index: usize, src: &str, alphabet: &Alphabet) -> Result<Expr, CliError> {
        parse_with(src, alphabet).map_err(|err| {
            let (line, start) = self.find(section, key, index);
            let offset = match &err {
                herglotz::Error::Syntax { column, .. } | herglotz::Error::UnknownIdentifier { column, .. } => {
                    column.saturating_sub(1)
                }
                _ => 0,
            };
            CliError::Expression { path: self.path.to_path_buf(), line, column: start + offset, source: err }
        })
    }

    fn invalid(&self, section: &str, key: &str, message: &str) -> CliError {
        let (line, column) = self.find(section, key, 0);
        CliError::Syntax { path: self.path.to_path_buf(), line, column, message: message.to_string() }
    }
}
