use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const MINIMAL: &str = "\
[grid]
nx = 16
nvx = 8
[physics]
epsilon = 0.15
[time]
t_end = 0.02
[output]
snapshot_every = 2
";

fn nsv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nsv")).args(args).output().expect("spawn nsv")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn run(cfg: &str, out: &Path) -> Output {
    nsv(&["run", "--config", cfg, "--out", out.to_str().unwrap()])
}

#[test]
fn minimal_config_runs() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.ini", MINIMAL);
    let out = tmp.path().join("out");
    let o = run(&cfg, &out);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let ledger = fs::read_to_string(out.join("ledger.csv")).unwrap();
    assert!(ledger.lines().count() >= 2);
    assert!(out.join("snapshots/step_000000/f.bin").exists());
    let summary = fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("overflow_mass"));
}

#[test]
fn negative_delta_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.ini", &MINIMAL.replace("epsilon = 0.15", "epsilon = 0.15\ndelta = -1"));
    let o = run(&cfg, &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("physics.delta"), "{}", stderr(&o));
}

#[test]
fn unknown_key_suggests_the_closest() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.ini", "[time]\nt_ned = 0.1\n");
    let o = run(&cfg, &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("did you mean `time.t_end`"), "{}", stderr(&o));
}

#[test]
fn missing_config_file_is_input_error() {
    let tmp = TempDir::new().unwrap();
    let o = run(tmp.path().join("absent.ini").to_str().unwrap(), &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("absent.ini"));
}

#[test]
fn ledger_is_byte_identical_across_runs() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.ini", MINIMAL);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(run(&cfg, &a).status.code(), Some(0));
    assert_eq!(run(&cfg, &b).status.code(), Some(0));
    assert_eq!(fs::read(a.join("ledger.csv")).unwrap(), fs::read(b.join("ledger.csv")).unwrap());
}

#[test]
fn solver_failure_exits_one_with_stage() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.ini", &format!("{MINIMAL}[solver]\nmax_iter = 1\n"));
    let o = run(&cfg, &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("stage"), "{}", stderr(&o));
}

#[test]
fn zero_state_verifies() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.ini", &format!("{MINIMAL}[initial]\npreset = uniform\n"));
    let out = tmp.path().join("out");
    assert_eq!(run(&cfg, &out).status.code(), Some(0));
    let o = nsv(&["verify", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}{}", String::from_utf8_lossy(&o.stdout), stderr(&o));
    let report = fs::read_to_string(out.join("report.csv")).unwrap();
    for check in ["energy", "weak-momentum", "weak-vlasov", "moment-M2"] {
        assert!(report.contains(check), "{report}");
    }
    assert!(!report.contains("false"), "{report}");
}

#[test]
fn corrupted_snapshot_names_the_file() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.ini", MINIMAL);
    let out = tmp.path().join("out");
    assert_eq!(run(&cfg, &out).status.code(), Some(0));
    let bad = out.join("snapshots/step_000002/u_y.csv");
    fs::write(&bad, "nx,ny,lx,ly,field,t\n16,16,1,1,uy,0\n1,2,oops\n").unwrap();
    let o = nsv(&["verify", out.to_str().unwrap(), "--checks", "weak-momentum"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("u_y.csv"), "{}", stderr(&o));
}

#[test]
fn verify_without_snapshots_is_input_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.ini", MINIMAL);
    let out = tmp.path().join("out");
    assert_eq!(run(&cfg, &out).status.code(), Some(0));
    fs::remove_dir_all(out.join("snapshots")).unwrap();
    assert_eq!(nsv(&["verify", out.to_str().unwrap()]).status.code(), Some(2));
    let o = nsv(&["verify", out.to_str().unwrap(), "--checks", "enrgy"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("did you mean `energy`"));
}

fn sweep_rows(dir: &Path, check: &str) -> Vec<Vec<String>> {
    let mut rdr = csv::Reader::from_path(dir.join("sweep.csv")).unwrap();
    rdr.records()
        .map(|r| r.unwrap().iter().map(str::to_string).collect::<Vec<_>>())
        .filter(|r| r[0] == check)
        .collect()
}

#[test]
fn delta_sweep_without_particles_has_zero_differences() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.ini", &format!("{MINIMAL}[initial]\npreset = solid-rotation\n"));
    let out = tmp.path().join("sweep");
    let o = nsv(&[
        "sweep", "--config", &cfg, "--param", "delta", "--values", "0.1,0.01,0.001", "--jobs", "2", "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = sweep_rows(&out, "delta-cauchy");
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r[2].parse::<f64>().unwrap() == 0.0));
}

#[test]
fn epsilon_sweep_on_uniform_density_reports_epsilon() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.ini", &format!("{MINIMAL}[initial]\npreset = uniform\n").replace("nx = 16", "nx = 32"));
    let out = tmp.path().join("sweep");
    let o = nsv(&["sweep", "--config", &cfg, "--param", "epsilon", "--values", "0.4,0.2,0.1", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for r in sweep_rows(&out, "epsilon-initial-density") {
        let (eps, err): (f64, f64) = (r[1].parse().unwrap(), r[2].parse().unwrap());
        assert!((eps - err).abs() < 1e-13, "{r:?}");
    }
}

#[test]
fn resolution_sweep_reports_fitted_order() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("sweep");
    let o = nsv(&["sweep", "--param", "resolution", "--case", "stokes", "--values", "8,16,32", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let rows = sweep_rows(&out, "mms-stokes");
    assert_eq!(rows.len(), 3);
    assert!(rows[0][3].parse::<f64>().unwrap() >= 1.75);
    let o = nsv(&["sweep", "--param", "resolution", "--case", "stoke", "--values", "8,16,32", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}
