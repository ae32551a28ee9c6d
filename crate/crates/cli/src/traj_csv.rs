//! Trajectory CSV files: `t`, `x{k}d{j}`, `z`, `psi{j}_{k}`, `psi_z`.
//!
//! Values are written with 17 significant digits so that files from
//! different runs can be compared byte for byte.

use std::io::{Read, Write};
use std::path::Path;

use herglotz::{Grid, GridFunction, MultiplierSet, Trajectory};

use crate::error::CliError;

pub fn header(order: usize, dim: usize) -> Vec<String> {
    let mut cols = vec!["t".to_string()];
    for j in 0..=order {
        for k in 1..=dim {
            cols.push(format!("x{k}d{j}"));
        }
    }
    cols.push("z".into());
    for j in 1..=order {
        for k in 1..=dim {
            cols.push(format!("psi{j}_{k}"));
        }
    }
    cols.push("psi_z".into());
    cols
}

pub fn column_count(order: usize, dim: usize) -> usize {
    1 + dim * (order + 1) + 1 + order * dim + 1
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write<W: Write>(out: W, traj: &Trajectory, mult: &MultiplierSet) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header(traj.order(), traj.dim()))?;
    let mut record = Vec::with_capacity(column_count(traj.order(), traj.dim()));
    for i in 0..traj.len() {
        record.clear();
        record.push(fmt(traj.grid().t(i)));
        record.extend(traj.derivatives().row(i).iter().map(|v| fmt(*v)));
        record.push(fmt(traj.z(i)));
        record.extend(mult.psi.row(i).iter().map(|v| fmt(*v)));
        record.push(fmt(mult.psi_z(i)));
        w.write_record(&record)?;
    }
    w.flush()
}

/// A trajectory file read back, with the stored multipliers.
#[derive(Debug, Clone)]
pub struct TrajectoryFile {
    pub traj: Trajectory,
    pub mult: MultiplierSet,
}

pub fn read<R: Read>(input: R, path: &Path, order: usize, dim: usize) -> Result<TrajectoryFile, CliError> {
    let expected = column_count(order, dim);
    let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(input);
    let csv_err = |line: usize, message: String| CliError::Csv { path: path.to_path_buf(), line, message };
    let found = reader.headers().map_err(|e| csv_err(1, e.to_string()))?.len();
    if found != expected {
        return Err(CliError::ColumnMismatch { path: path.to_path_buf(), expected, found });
    }
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| csv_err(line, e.to_string()))?;
        if rec.len() != expected {
            return Err(CliError::ColumnMismatch { path: path.to_path_buf(), expected, found: rec.len() });
        }
        let row = rec
            .iter()
            .map(|f| f.trim().parse::<f64>().map_err(|_| csv_err(line, format!("not a number: {f:?}"))))
            .collect::<Result<Vec<f64>, _>>()?;
        if let Some(prev) = rows.last() {
            if !(row[0] > prev[0]) {
                return Err(csv_err(line, "t must be strictly increasing".into()));
            }
        }
        rows.push(row);
    }
    if rows.len() < 3 {
        return Err(csv_err(1, format!("need at least 3 rows, found {}", rows.len())));
    }
    let grid = Grid::new(rows[0][0], rows[rows.len() - 1][0], rows.len()).map_err(CliError::Input)?;
    for (i, row) in rows.iter().enumerate() {
        if (row[0] - grid.t(i)).abs() > 1e-6 * grid.step() {
            return Err(csv_err(i + 2, "t must be uniformly spaced".into()));
        }
    }
    let nx = (order + 1) * dim;
    let take = |from: usize, width: usize| -> Vec<f64> {
        rows.iter().flat_map(|r| r[from..from + width].iter().copied()).collect()
    };
    let build = || -> herglotz::Result<TrajectoryFile> {
        let x = GridFunction::new(grid, nx, take(1, nx))?;
        let z = GridFunction::new(grid, 1, take(1 + nx, 1))?;
        let psi = GridFunction::new(grid, order * dim, take(2 + nx, order * dim))?;
        let psi_z = GridFunction::new(grid, 1, take(2 + nx + order * dim, 1))?;
        Ok(TrajectoryFile {
            traj: Trajectory::new(order, dim, x, z)?,
            mult: MultiplierSet::new(order, dim, psi, psi_z)?,
        })
    };
    build().map_err(CliError::Input)
}

pub fn read_file(path: &Path, order: usize, dim: usize) -> Result<TrajectoryFile, CliError> {
    let file = std::fs::File::open(path).map_err(|e| CliError::Io { path: path.to_path_buf(), message: e.to_string() })?;
    read(std::io::BufReader::new(file), path, order, dim)
}

#[cfg(test)]
mod tests {
    use super::*;
    use herglotz::{psi_backward_ode, Expr, HerglotzProblem, Sense};

    fn sample() -> (Trajectory, MultiplierSet) {
        let p = HerglotzProblem {
            order: 2,
            dim: 1,
            a: 0.0,
            b: 1.0,
            lagrangian: Expr::parse("x1''^2/2 + x1^2/2 - z/3", 2, 1).unwrap(),
            alpha: vec![vec![0.0], vec![1.0]],
            gamma: 0.1,
            sense: Sense::Minimize,
        };
        let grid = Grid::new(0.0, 1.0, 21).unwrap();
        let traj = Trajectory::admissible(&p, grid, |t| vec![t.sin(), t.cos(), -t.sin()]).unwrap();
        let mult = psi_backward_ode(&p, &traj).unwrap();
        (traj, mult)
    }

    #[test]
    fn header_layout() {
        assert_eq!(
            header(2, 2),
            ["t", "x1d0", "x2d0", "x1d1", "x2d1", "x1d2", "x2d2", "z", "psi1_1", "psi1_2", "psi2_1", "psi2_2", "psi_z"]
        );
        assert_eq!(header(2, 2).len(), column_count(2, 2));
    }

    #[test]
    fn round_trip_is_lossless() {
        let (traj, mult) = sample();
        let mut buf = Vec::new();
        write(&mut buf, &traj, &mult).unwrap();
        let back = read(buf.as_slice(), Path::new("mem.csv"), 2, 1).unwrap();
        assert_eq!(back.traj, traj);
        assert_eq!(back.mult, mult);
    }

    #[test]
    fn rejects_wrong_shape() {
        let (traj, mult) = sample();
        let mut buf = Vec::new();
        write(&mut buf, &traj, &mult).unwrap();
        let err = read(buf.as_slice(), Path::new("mem.csv"), 2, 2).unwrap_err();
        assert!(matches!(err, CliError::ColumnMismatch { expected: 13, found: 8, .. }));
    }

    #[test]
    fn rejects_non_monotone_time() {
        let text = "t,x1d0,x1d1,z,psi1_1,psi_z\n0,0,0,0,0,1\n0.5,0,0,0,0,1\n0.5,0,0,0,0,1\n";
        assert!(matches!(read(text.as_bytes(), Path::new("m"), 1, 1), Err(CliError::Csv { line: 4, .. })));
        let text = "t,x1d0,x1d1,z,psi1_1,psi_z\n0,0,0,0,0,1\n0.2,0,0,0,0,1\n1,0,0,0,0,1\n";
        assert!(matches!(read(text.as_bytes(), Path::new("m"), 1, 1), Err(CliError::Csv { line: 3, .. })));
    }
}
