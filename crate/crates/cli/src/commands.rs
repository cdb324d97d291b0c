//! The `run`, `verify` and `sweep` subcommands. Each returns whether every
//! check passed; errors carry the exit-code classification.

use std::fs;
use std::path::Path;

use log::info;
use nsv_core::engine::{run_from, EnergyLedger, SimState, Trajectory};
use nsv_core::error::{Error, Result};
use nsv_core::initial::build_initial_state;
use nsv_core::io::{read_ledger, read_snapshot, snapshot_dirs, snapshot_time, write_ledger, write_snapshot};
use nsv_core::verify::{
    check_energy_inequality, delta_sweep, epsilon_sweep, mms, moment_bound_stream, weak_residual_stream,
    VerificationReport, WeakParams,
};

use crate::config::{initial_data, sim_config, suggest, verify_settings, ConfigDoc};

pub const CHECKS: &[&str] = &["energy", "weak-momentum", "weak-vlasov", "moments"];
pub const CASES: &[&str] = &["translation", "stokes", "free-streaming"];

const LEDGER_COLUMNS: &str = "\
ledger.csv columns:
  step            time step index (0 = initial state)
  t               time
  E_fluid         integral of rho |u|^2
  E_part          integral of f (1 + |v|^2) over phase space
  D_visc          2 dt mu integral |grad u|^2 of the step
  D_drag          2 dt integral R rho f |u - v|^2 of the step
  defect          E(n+1) + D_visc + D_drag - E(n)
  M0f             particle mass
  M3f             integral of |v|^3 f
  overflow_mass   cumulative mass leaked past the velocity box
";

const REPORT_COLUMNS: &str = "\
columns of report.csv and sweep.csv:
  check           check name
  level           step, time, seed, resolution h, delta or epsilon of the row
  value           measured quantity of the row
  fitted_order    least-squares order over the levels (empty if none)
  required_order  order the fit is compared with (empty if none)
  passed          verdict of the whole check
";

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_reports(path: &Path, reports: &[VerificationReport]) -> Result<()> {
    let mut text = format!("{}\n", VerificationReport::CSV_HEADER);
    for r in reports {
        for row in r.csv_rows() {
            text.push_str(&row);
            text.push('\n');
        }
    }
    write_text(path, &text)
}

fn print_reports(reports: &[VerificationReport]) -> bool {
    for r in reports {
        println!("{}", r.summary_line());
    }
    reports.iter().all(|r| r.passed)
}

fn run_summary(doc: &ConfigDoc, traj: &Trajectory, steps: usize, failure: Option<&Error>) -> String {
    let ledger = &traj.ledger;
    let mut s = format!("config: {}\n", doc.path.display());
    match failure {
        Some(e) => s.push_str(&format!("status: FAILED after {} steps: {e}\n", ledger.rows.len().saturating_sub(1))),
        None => s.push_str(&format!("status: completed {steps} steps\n")),
    }
    s.push_str(&format!("dt: {:e}\n", traj.dt));
    if let (Some(first), Some(last)) = (ledger.rows.first(), ledger.rows.last()) {
        s.push_str(&format!("t_final: {:e}\n", last.t));
        s.push_str(&format!("energy initial: {:e}\n", first.energy()));
        s.push_str(&format!("energy final: {:e}\n", last.energy()));
        s.push_str(&format!("max cumulative defect: {:e}\n", ledger.max_cumulative_defect()));
        s.push_str(&format!("overflow mass: {:e}\n", last.overflow_mass));
    }
    s.push_str("\nresolved configuration (also in config.ini):\n");
    s.push_str(&doc.to_text());
    s.push('\n');
    s.push_str(LEDGER_COLUMNS);
    s.push_str(
        "\nsnapshots/step_NNNNNN: rho.csv, p.csv (cell centres), u_x.csv, u_y.csv (faces), f.bin (phase space).\n\
         CSV field files: header nx,ny,lx,ly,field,t, one metadata record, then one record per grid row.\n",
    );
    s
}

/// `nsv run`: simulate, writing `ledger.csv`, `snapshots/`, `config.ini`
/// and `summary.txt` to `out`.
pub fn run(config: &Path, out: &Path, seed: Option<u64>) -> Result<bool> {
    let mut doc = ConfigDoc::load(config)?;
    if let Some(s) = seed {
        doc.set("solver.seed", s.to_string());
    }
    let cfg = sim_config(&doc)?;
    let init = initial_data(&doc, &cfg)?;
    let state = build_initial_state(&init, cfg.tol).map_err(|e| e.in_stage("initial data"))?;
    let (_, steps) = cfg.time_step(&state)?;
    create_dir(out)?;
    write_text(&out.join("config.ini"), &doc.to_text())?;
    let every = cfg.snapshot_every;
    // The engine keeps only the end points in memory; snapshots go to disk.
    let engine_cfg = nsv_core::engine::SimConfig {
        snapshot_every: 0,
        ..cfg.clone()
    };
    let result = run_from(&engine_cfg, state, |s: &SimState, _| {
        if s.step == 0 || s.step == steps || (every > 0 && s.step % every == 0) {
            write_snapshot(out, s)?;
        }
        Ok(())
    });
    let (traj, failure) = match result {
        Ok(t) => (t, None),
        Err(f) => (f.partial, Some(f.error)),
    };
    write_ledger(&out.join("ledger.csv"), &traj.ledger)?;
    write_text(&out.join("summary.txt"), &run_summary(&doc, &traj, steps, failure.as_ref()))?;
    if let Some(e) = failure {
        return Err(e);
    }
    info!("wrote {} ledger rows to {}", traj.ledger.rows.len(), out.display());
    println!(
        "completed {steps} steps to t = {}; max cumulative defect {:.3e}",
        cfg.t_end,
        traj.ledger.max_cumulative_defect()
    );
    Ok(true)
}

fn energy_report(dir: &Path, doc: &ConfigDoc) -> Result<VerificationReport> {
    let cfg = sim_config(doc)?;
    let ledger: EnergyLedger = read_ledger(&dir.join("ledger.csv"))?;
    let dt = match ledger.rows.as_slice() {
        [a, b, ..] => b.t - a.t,
        _ => 0.0,
    };
    let tol = cfg.defect_tolerance(ledger.initial_energy(), dt);
    Ok(check_energy_inequality(&ledger, tol))
}

/// `nsv verify`: run the selected checks on a directory written by `run`
/// and write `report.csv` to `out`.
pub fn verify(dir: &Path, checks: &[String], out: &Path, seed: Option<u64>) -> Result<bool> {
    for c in checks {
        if !CHECKS.contains(&c.as_str()) {
            let hint = suggest(c, CHECKS.iter().copied()).map_or(String::new(), |s| format!("; did you mean `{s}`?"));
            return Err(Error::Input(format!("unknown check `{c}`{hint}")));
        }
    }
    let want = |c: &str| checks.is_empty() || checks.iter().any(|x| x == c);
    let doc = ConfigDoc::load(&dir.join("config.ini"))?;
    let cfg = sim_config(&doc)?;
    let settings = verify_settings(&doc)?;
    let dirs = snapshot_dirs(dir)?;
    let load = || dirs.iter().map(|d| read_snapshot(d));
    let mut reports = Vec::new();
    if want("energy") {
        reports.push(energy_report(dir, &doc)?);
    }
    if want("weak-momentum") || want("weak-vlasov") {
        let times = dirs.iter().map(|d| snapshot_time(d)).collect::<Result<Vec<f64>>>()?;
        let params = WeakParams {
            epsilon: cfg.epsilon,
            delta: cfg.delta,
            mu: cfg.mu,
        };
        let weak = weak_residual_stream(
            &times,
            load(),
            params,
            seed.unwrap_or(cfg.seed),
            settings.test_functions,
            settings.weak_tol,
        )?;
        reports.extend(weak.into_iter().filter(|r| want(&r.check)));
    }
    if want("moments") {
        for k in 1..=3 {
            reports.push(moment_bound_stream(load(), k)?);
        }
    }
    create_dir(out)?;
    write_reports(&out.join("report.csv"), &reports)?;
    write_text(&out.join("report.txt"), &report_text(&reports))?;
    Ok(print_reports(&reports))
}

fn report_text(reports: &[VerificationReport]) -> String {
    let mut s: String = reports.iter().map(|r| r.summary_line() + "\n").collect();
    s.push('\n');
    s.push_str(REPORT_COLUMNS);
    s
}

/// Swept parameter of `nsv sweep`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum SweepParam {
    Epsilon,
    Delta,
    Resolution,
}

/// `nsv sweep`: a δ or ε sweep of the configured run, or a resolution
/// study of a manufactured-solution case. Writes `sweep.csv` and
/// `summary.txt` to `out`.
pub fn sweep(
    config: Option<&Path>,
    param: SweepParam,
    values: &[f64],
    case: &str,
    out: &Path,
    jobs: usize,
) -> Result<bool> {
    let reports = match param {
        SweepParam::Resolution => {
            let ns = values
                .iter()
                .map(|v| {
                    if *v >= 1.0 && v.fract() == 0.0 {
                        Ok(*v as usize)
                    } else {
                        Err(Error::Input(format!("resolution values must be positive integers, got {v}")))
                    }
                })
                .collect::<Result<Vec<usize>>>()?;
            let report = match case {
                "translation" => mms::refinement_study("mms-translation", &ns, 1.5, mms::translation_density)?,
                "stokes" => mms::refinement_study("mms-stokes", &ns, 2.0, mms::stokes_steady)?,
                "free-streaming" => mms::refinement_study("mms-free-streaming", &ns, 1.0, mms::free_streaming)?,
                other => {
                    let hint = suggest(other, CASES.iter().copied()).map_or(String::new(), |s| format!("; did you mean `{s}`?"));
                    return Err(Error::Input(format!("unknown case `{other}`{hint}")));
                }
            };
            vec![report]
        }
        SweepParam::Delta | SweepParam::Epsilon => {
            let path = config.ok_or_else(|| Error::Input("--config is required for delta and epsilon sweeps".into()))?;
            let doc = ConfigDoc::load(path)?;
            let mut cfg = sim_config(&doc)?;
            cfg.snapshot_every = 0;
            let init = initial_data(&doc, &cfg)?;
            if param == SweepParam::Delta {
                delta_sweep(&cfg, &init, values, jobs)?
            } else {
                epsilon_sweep(&cfg, &init, values, jobs)?
            }
        }
    };
    create_dir(out)?;
    write_reports(&out.join("sweep.csv"), &reports)?;
    write_text(&out.join("summary.txt"), &report_text(&reports))?;
    Ok(print_reports(&reports))
}
