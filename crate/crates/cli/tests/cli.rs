use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn repqr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_repqr"))
        .args(args)
        .env_remove("REPQR_SEED")
        .env_remove("REPQR_WORKERS")
        .output()
        .expect("run repqr")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const DATA: &str = "year,wind\n1,1.0\n1,2.0\n1,3.5\n1,2.5\n2,2.2\n2,3.1\n2,4.0\n2,2.9\n3,3.3\n3,5.0\n3,4.4\n3,4.1\n";

#[test]
fn fit_writes_both_methods() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "d.csv", DATA);
    let o = repqr(&["fit", &input, "--tau", "0.25", "0.75"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "tau,method,beta0,beta1,se0,se1,k,n");
    assert_eq!(lines.len(), 5);
    assert!(lines[1].contains(",wls,") && lines[2].contains(",kb,"));
}

#[test]
fn csv_numbers_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "d.csv", DATA);
    let out = dir.path().join("fit.csv");
    let o = repqr(&[
        "fit",
        &input,
        "--tau",
        "0.5",
        "--method",
        "kb",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let text = fs::read_to_string(&out).unwrap();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    let beta0: f64 = row[2].parse().unwrap();
    assert_eq!(format!("{beta0:.16e}"), row[2]);
    // the median line passes through two of the observations
    let beta1: f64 = row[3].parse().unwrap();
    assert!(
        (beta0 + beta1 - 2.0).abs() < 1e-12
            || (beta0 + 2.0 * beta1 - 3.0).abs() < 1e-12
            || (beta0 + 3.0 * beta1 - 4.1).abs() < 1e-12
    );
}

#[test]
fn plot_data_has_points_and_lines() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "d.csv", DATA);
    let plot = dir.path().join("plot.csv");
    let o = repqr(&[
        "fit",
        &input,
        "--tau",
        "0.5",
        "--plot-data",
        plot.to_str().unwrap(),
        "--format",
        "markdown",
    ]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("| tau |"));
    let text = fs::read_to_string(&plot).unwrap();
    let kinds: Vec<&str> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(kinds.iter().filter(|k| **k == "point").count(), 12);
    assert_eq!(kinds.iter().filter(|k| **k == "line").count(), 4);
}

#[test]
fn malformed_row_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "bad.csv", "x,y\n1,2\n1,oops\n");
    let o = repqr(&["fit", &input, "--tau", "0.5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
}

#[test]
fn invalid_arguments_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "d.csv", DATA);
    assert_eq!(
        repqr(&["fit", &input, "--tau", "1.5"]).status.code(),
        Some(2)
    );
    assert_eq!(
        repqr(&["fit", "/nonexistent/file.csv", "--tau", "0.5"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(repqr(&["simulate", "--tau", "0.5"]).status.code(), Some(2));
}

#[test]
fn wls_without_replicates_points_to_kb() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "s.csv", "x,y\n1,1\n2,2.5\n3,2.9\n4,4.2\n");
    let o = repqr(&["fit", &input, "--tau", "0.5", "--method", "wls"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--method kb"));
    let o = repqr(&["fit", &input, "--tau", "0.5", "--method", "kb"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("NaN"));
}

#[test]
fn simulate_is_reproducible_across_workers() {
    let args = [
        "simulate", "--tau", "0.3", "--k", "5", "--n0", "30", "--reps", "40", "--seed", "7",
    ];
    let a = repqr(&[&args[..], &["--workers", "1"]].concat());
    let b = repqr(&[&args[..], &["--workers", "3"]].concat());
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    // two eta rules x two estimators x two coefficients
    assert_eq!(stdout(&a).lines().count(), 1 + 8);
}

#[test]
fn seed_can_come_from_the_environment() {
    let run = |seed: &str| {
        Command::new(env!("CARGO_BIN_EXE_repqr"))
            .args([
                "simulate", "--tau", "0.5", "--k", "5", "--n0", "20", "--eta", "unit", "--reps",
                "10",
            ])
            .env("REPQR_SEED", seed)
            .output()
            .unwrap()
            .stdout
    };
    let explicit = repqr(&[
        "simulate", "--tau", "0.5", "--k", "5", "--n0", "20", "--eta", "unit", "--reps", "10",
        "--seed", "42",
    ]);
    assert_eq!(run("42"), explicit.stdout);
    assert_ne!(run("43"), explicit.stdout);
}

#[test]
fn asymptotics_from_design_file() {
    let dir = tempfile::tempdir().unwrap();
    let design = write(dir.path(), "des.csv", "x,n,f\n1,10,1\n2,10,1\n3,10,1\n");
    let o = repqr(&[
        "asymptotics",
        "--design",
        &design,
        "--tau",
        "0.5",
        "--format",
        "tsv",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let eq = text.lines().find(|l| l.contains("equal_sparsity")).unwrap();
    let value: f64 = eq.rsplit('\t').next().unwrap().parse().unwrap();
    assert_eq!(value, 1.0);
    let gap = text.lines().find(|l| l.contains("loewner_gap")).unwrap();
    let gap: f64 = gap.rsplit('\t').next().unwrap().parse().unwrap();
    assert!(gap.abs() < 1e-12);
}
