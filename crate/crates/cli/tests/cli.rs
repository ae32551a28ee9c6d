use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_herglotz"));
    c.env_remove("HERGLOTZ_GRID");
    c
}

fn problem(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("problems").join(name)
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

fn run(cmd: &mut Command) -> (i32, String, String) {
    let Output { status, stdout, stderr } = cmd.output().expect("binary runs");
    (status.code().unwrap_or(-1), text(&stdout), text(&stderr))
}

fn solve_to(dir: &TempDir, name: &str, extra: &[&str]) -> PathBuf {
    let out = dir.path().join(name.replace(".toml", ".csv"));
    let (code, _, err) = run(bin().arg("solve").arg(problem(name)).arg("--out").arg(&out).args(extra));
    assert_eq!(code, 0, "{err}");
    out
}

fn write(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, body).unwrap();
    path
}

#[test]
fn solve_prints_summary() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("fp.csv");
    let (code, stdout, _) = run(bin().arg("solve").arg(problem("free_particle.toml")).arg("--out").arg(&out));
    assert_eq!(code, 0);
    assert!(stdout.starts_with("z(b)=5.000000e0 converged=true"), "{stdout}");
    let csv = std::fs::read_to_string(&out).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "t,x1d0,x1d1,z,psi1_1,psi_z");
    assert_eq!(csv.lines().count(), 1002);
}

#[test]
fn csv_goes_to_stdout_without_out() {
    let (code, stdout, stderr) = run(bin().arg("solve").arg(problem("jerk.toml")).args(["--grid", "21"]));
    assert_eq!(code, 0);
    assert!(stdout.starts_with("t,x1d0,x1d1,x1d2,z,psi1_1,psi2_1,psi_z\n"));
    assert_eq!(stdout.lines().count(), 22);
    assert!(stderr.contains("converged=true"));
}

#[test]
fn round_trip_verifies() {
    let dir = TempDir::new().unwrap();
    for name in ["damped_oscillator.toml", "elastic_beam.toml", "coupled_pair.toml", "time_dependent.toml"] {
        let csv = solve_to(&dir, name, &[]);
        let (code, stdout, _) = run(bin().arg("verify").arg(&csv).arg("--problem").arg(problem(name)));
        assert_eq!(code, 0, "{name}: {stdout}");
        assert_eq!(stdout.lines().count(), 3);
        assert!(stdout.lines().all(|l| l.contains("PASS")));
    }
}

#[test]
fn output_is_byte_identical_across_runs() {
    let dir = TempDir::new().unwrap();
    let a = solve_to(&dir, "coupled_pair.toml", &["--seed", "3"]);
    let first = std::fs::read(&a).unwrap();
    let b = solve_to(&dir, "coupled_pair.toml", &["--seed", "3"]);
    assert_eq!(first, std::fs::read(&b).unwrap());
}

#[test]
fn straight_line_fails_transversality() {
    let dir = TempDir::new().unwrap();
    let mut body = String::from("t,x1d0,x1d1,z,psi1_1,psi_z\n");
    for i in 0..=100 {
        let t = i as f64 / 100.0;
        body.push_str(&format!("{t:.16e},{t:.16e},1,{:.16e},0,1\n", 5.0 + t / 2.0));
    }
    let csv = write(&dir, "line.csv", &body);
    let (code, stdout, _) = run(bin().arg("verify").arg(&csv).arg("--problem").arg(problem("free_particle.toml")));
    assert_eq!(code, 2);
    let line = stdout.lines().find(|l| l.starts_with("transversality")).unwrap();
    assert!(line.contains("FAIL") && line.contains("max_psi_b=1.000000e0"), "{line}");
    assert!(stdout.lines().find(|l| l.starts_with("euler-lagrange")).unwrap().contains("PASS"));
}

#[test]
fn dimension_mismatch_is_an_input_error() {
    let dir = TempDir::new().unwrap();
    let csv = solve_to(&dir, "damped_oscillator.toml", &["--grid", "51"]);
    let (code, _, stderr) = run(bin().arg("verify").arg(&csv).arg("--problem").arg(problem("coupled_pair.toml")));
    assert_eq!(code, 1);
    assert!(stderr.contains("expected 9 columns"), "{stderr}");
}

#[test]
fn malformed_lagrangian_reports_position() {
    let dir = TempDir::new().unwrap();
    let src = std::fs::read_to_string(problem("damped_oscillator.toml")).unwrap();
    let bad = write(&dir, "bad.toml", &src.replace("x1'^2/2 - x1^2/2 - z", "x1'^2/2 - (x1^2/2 - z"));
    let (code, _, stderr) = run(bin().arg("solve").arg(&bad));
    assert_eq!(code, 1);
    assert!(stderr.contains("bad.toml:6:36:"), "{stderr}");
    assert!(stderr.to_lowercase().contains("syntax"), "{stderr}");
}

#[test]
fn direct_method_and_oracle_alias() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("direct.csv");
    let (code, stdout, _) =
        run(bin().arg("solve").arg(problem("free_particle.toml")).args(["--method", "direct", "--out"]).arg(&out));
    assert_eq!(code, 0);
    assert!(stdout.starts_with("z(b)=5.000000e0 converged=true evaluations="), "{stdout}");
    let (code, _, stderr) = run(bin().arg("oracle").arg(problem("free_particle.toml")));
    assert_eq!(code, 0);
    assert!(stderr.contains("evaluations="));
}

#[test]
fn noether_on_autonomous_problem_passes() {
    let dir = TempDir::new().unwrap();
    let csv = solve_to(&dir, "damped_oscillator.toml", &[]);
    let (code, stdout, _) = run(bin().arg("noether").arg(problem("damped_oscillator.toml")).arg("--traj").arg(&csv));
    assert_eq!(code, 0, "{stdout}");
    let inv = stdout.lines().next().unwrap();
    assert!(inv.starts_with("invariance") && inv.contains("PASS"));
    let xi: f64 = inv.split("xi=").nth(1).unwrap().split(' ').next().unwrap().parse().unwrap();
    assert!(xi.abs() <= 1e-6);
    assert!(stdout.lines().nth(1).unwrap().starts_with("noether-charge") && stdout.contains("charge_mean="));
}

#[test]
fn noether_on_time_dependent_problem_is_not_asserted() {
    let dir = TempDir::new().unwrap();
    let csv = solve_to(&dir, "time_dependent.toml", &[]);
    let (code, stdout, _) = run(bin().arg("noether").arg(problem("time_dependent.toml")).arg("--traj").arg(&csv));
    assert_eq!(code, 2);
    assert!(stdout.lines().next().unwrap().contains("FAIL"));
    assert!(stdout.contains("not asserted"));
}

#[test]
fn noether_without_symmetry_section() {
    let dir = TempDir::new().unwrap();
    let csv = solve_to(&dir, "free_particle.toml", &["--grid", "101"]);
    let src = std::fs::read_to_string(problem("free_particle.toml")).unwrap();
    let stripped = src.split("[symmetry]").next().unwrap().to_string();
    let file = write(&dir, "nosym.toml", &stripped);
    let (code, _, stderr) = run(bin().arg("noether").arg(&file).arg("--traj").arg(&csv));
    assert_eq!(code, 1);
    assert!(stderr.contains("missing [symmetry]"), "{stderr}");

    let unguarded = src.split("[finite_symmetry]").next().unwrap().to_string();
    let file = write(&dir, "unguarded.toml", &unguarded);
    let (code, stdout, stderr) = run(bin().arg("noether").arg(&file).arg("--traj").arg(&csv));
    assert_eq!(code, 0);
    assert!(stderr.contains("warning"));
    assert!(stdout.starts_with("noether-charge"));
}

#[test]
fn grid_precedence_flag_over_env_over_file() {
    let (_, stdout, _) = run(bin().arg("solve").arg(problem("free_particle.toml")).env("HERGLOTZ_GRID", "11"));
    assert_eq!(stdout.lines().count(), 12);
    let (_, stdout, _) =
        run(bin().arg("solve").arg(problem("free_particle.toml")).args(["--grid", "7"]).env("HERGLOTZ_GRID", "11"));
    assert_eq!(stdout.lines().count(), 8);
    // damped_oscillator.toml sets grid_points = 1001; the environment still wins
    let (_, stdout, _) = run(bin().arg("solve").arg(problem("damped_oscillator.toml")).env("HERGLOTZ_GRID", "21"));
    assert_eq!(stdout.lines().count(), 22);
}

#[test]
fn even_grid_is_rejected() {
    let (code, _, stderr) = run(bin().arg("solve").arg(problem("free_particle.toml")).args(["--grid", "100"]));
    assert_eq!(code, 1);
    assert!(stderr.contains("error"));
}

#[test]
fn nonconvergence_exits_with_two() {
    let dir = TempDir::new().unwrap();
    let src = std::fs::read_to_string(problem("stiffening_spring.toml")).unwrap();
    let file = write(&dir, "tight.toml", &src.replace("sense = \"min\"", "sense = \"min\"\n[solver]\nmax_iterations = 1\nmultistart = 1\ntolerance = 1e-300"));
    let (code, _, stderr) = run(bin().arg("solve").arg(&file).args(["--grid", "51"]));
    assert_eq!(code, 2, "{stderr}");
    assert!(stderr.contains("converged=false"));
}
