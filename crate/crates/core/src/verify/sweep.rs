//! Parameter sweeps over δ and ε, run on a bounded pool of worker threads.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::engine::{run_from, SimConfig, SimState, Trajectory};
use crate::error::{Error, Result};
use crate::initial::{build_initial_state, regularize_density, regularize_momentum, InitialDataSpec};

use super::VerificationReport;

/// One run of a sweep.
#[derive(Clone, Debug)]
pub struct SweepMember {
    pub value: f64,
    pub cfg: SimConfig,
    pub init: InitialDataSpec,
}

/// Result of one member: its trajectory and the largest `Q_δ` seen, with
/// whether it ever exceeded `δ(max m0 + max|m1|)`.
#[derive(Clone, Debug)]
pub struct MemberOutcome {
    pub value: f64,
    pub trajectory: Trajectory,
    pub q_delta_max: f64,
    pub q_bound_violations: usize,
}

impl MemberOutcome {
    pub fn final_state(&self) -> &SimState {
        self.trajectory.snapshots.last().expect("trajectory has an initial snapshot")
    }
}

fn run_member(m: &SweepMember) -> Result<MemberOutcome> {
    let state = build_initial_state(&m.init, m.cfg.tol)?;
    let mut q_max: f64 = 0.0;
    let mut violations = 0;
    let traj = run_from(&m.cfg, state, |_, rep| {
        if let Some(r) = rep {
            q_max = q_max.max(r.q_delta_max);
            if r.q_delta_max > r.q_delta_bound {
                violations += 1;
            }
        }
        Ok(())
    })
    .map_err(|f| f.error)?;
    Ok(MemberOutcome {
        value: m.value,
        trajectory: traj,
        q_delta_max: q_max,
        q_bound_violations: violations,
    })
}

/// Run every member on at most `jobs` threads; results keep member order.
pub fn run_members(members: &[SweepMember], jobs: usize) -> Vec<Result<MemberOutcome>> {
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<MemberOutcome>>>> = members.iter().map(|_| Mutex::new(None)).collect();
    let workers = jobs.clamp(1, members.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                if k >= members.len() {
                    break;
                }
                let out = run_member(&members[k]);
                *slots[k].lock().expect("result slot poisoned") = Some(out);
            });
        }
    });
    slots
        .into_iter()
        .map(|s| s.into_inner().expect("result slot poisoned").expect("every member ran"))
        .collect()
}

/// `‖ρa - ρb‖_L¹ + ‖ua - ub‖_L² + ‖fa - fb‖_L¹`.
pub fn final_state_distance(a: &SimState, b: &SimState) -> f64 {
    let g = a.grid();
    let drho = a.rho.sub(&b.rho).l1_norm();
    let du = a.u.sub(&b.u).l2_norm();
    let df: f64 = a.f.data.iter().zip(&b.f.data).map(|(x, y)| (x - y).abs()).sum::<f64>()
        * g.cell_area()
        * a.f.vgrid.cell_volume();
    drho + du + df
}

fn check_list(name: &str, values: &[f64]) -> Result<()> {
    if values.len() < 3 {
        return Err(Error::Input(format!("{name} sweep needs at least 3 values, got {}", values.len())));
    }
    if values.windows(2).any(|w| !(w[1] < w[0])) || values.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::Input(format!("{name} values must be positive and strictly decreasing")));
    }
    Ok(())
}

fn collect(results: Vec<Result<MemberOutcome>>) -> Result<Vec<MemberOutcome>> {
    results.into_iter().collect()
}

/// Successive final-state differences `d_i` between values `i` and `i+1`,
/// required to shrink by `2^(decades)` from one pair to the next. Zero
/// differences count as converged.
fn cauchy_report(name: &str, outcomes: &[MemberOutcome]) -> VerificationReport {
    let mut rep = VerificationReport::new(name);
    for w in outcomes.windows(2) {
        rep.levels.push(w[1].value);
        rep.values.push(final_state_distance(w[0].final_state(), w[1].final_state()));
    }
    for k in 1..rep.values.len() {
        let (prev, cur) = (rep.values[k - 1], rep.values[k]);
        if cur == 0.0 {
            continue;
        }
        let decades = (rep.levels[k - 1] / rep.levels[k]).log10();
        let needed = 2f64.powf(decades);
        if prev / cur < needed {
            rep.passed = false;
            rep.detail = format!(
                "difference ratio {:.3} below {needed:.3} between {:e} and {:e}",
                prev / cur,
                rep.levels[k - 1],
                rep.levels[k]
            );
        }
    }
    if rep.passed {
        rep.detail = "differences contract".into();
    }
    rep
}

/// Identical runs with varying δ: the pointwise `Q_δ` bound for every step
/// of every run and the Cauchy behaviour of the final states.
pub fn delta_sweep(
    cfg: &SimConfig,
    init: &InitialDataSpec,
    deltas: &[f64],
    jobs: usize,
) -> Result<Vec<VerificationReport>> {
    check_list("delta", deltas)?;
    let members: Vec<SweepMember> = deltas
        .iter()
        .map(|d| SweepMember {
            value: *d,
            cfg: SimConfig { delta: *d, ..cfg.clone() },
            init: init.clone(),
        })
        .collect();
    let outcomes = collect(run_members(&members, jobs))?;
    let mut q = VerificationReport::new("delta-q-bound");
    for o in &outcomes {
        q.levels.push(o.value);
        q.values.push(o.q_delta_max);
        if o.q_bound_violations > 0 {
            q.passed = false;
            q.detail = format!("delta {:e}: Q_delta bound violated in {} steps", o.value, o.q_bound_violations);
        }
    }
    if q.passed {
        q.detail = "bound holds at every step".into();
    }
    Ok(vec![q, cauchy_report("delta-cauchy", &outcomes)])
}

/// Identical runs with varying ε: initial-data errors `‖ρ₀^ε - ρ₀‖_L¹`,
/// `‖m₀^ε - m₀‖_L²` with order ≥ 1, and the final-state Cauchy behaviour.
pub fn epsilon_sweep(
    cfg: &SimConfig,
    init: &InitialDataSpec,
    eps: &[f64],
    jobs: usize,
) -> Result<Vec<VerificationReport>> {
    check_list("epsilon", eps)?;
    let mut rho_rep = VerificationReport::new("epsilon-initial-density");
    let mut m_rep = VerificationReport::new("epsilon-initial-momentum");
    for e in eps {
        let r = regularize_density(&init.rho0, *e)?;
        let m = regularize_momentum(&init.m0, *e)?;
        rho_rep.levels.push(*e);
        rho_rep.values.push(r.sub(&init.rho0).l1_norm());
        m_rep.levels.push(*e);
        m_rep.values.push(m.sub(&init.m0).l2_norm());
    }
    let rho_rep = rho_rep.with_order(1.0);
    // A momentum that the cut-off and kernel leave untouched has no error
    // to fit; that is exact convergence.
    let m_rep = if m_rep.values.iter().all(|v| *v < 1e-14) {
        m_rep
    } else {
        m_rep.with_order(1.0)
    };
    let members: Vec<SweepMember> = eps
        .iter()
        .map(|e| SweepMember {
            value: *e,
            cfg: SimConfig { epsilon: *e, ..cfg.clone() },
            init: InitialDataSpec { epsilon: *e, ..init.clone() },
        })
        .collect();
    let outcomes = collect(run_members(&members, jobs))?;
    Ok(vec![rho_rep, m_rep, cauchy_report("epsilon-cauchy", &outcomes)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::initial::Preset;

    fn cfg() -> SimConfig {
        let mut c = SimConfig::new(16, 8).unwrap();
        c.epsilon = 0.15;
        c.t_end = 0.04;
        c
    }

    #[test]
    fn without_particles_all_delta_runs_coincide() {
        let c = cfg();
        let init = Preset::named("solid-rotation").unwrap().build(c.grid, c.vgrid, c.epsilon);
        assert_eq!(init.f0.max(), 0.0);
        let reps = delta_sweep(&c, &init, &[1e-1, 1e-2, 1e-3], 2).unwrap();
        assert!(reps.iter().all(|r| r.passed));
        assert!(reps[1].values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn uniform_density_error_equals_epsilon() {
        let mut c = cfg();
        c.grid = crate::grid::Grid2D::unit(32).unwrap();
        let init = Preset::named("uniform").unwrap().build(c.grid, c.vgrid, 0.1);
        let reps = epsilon_sweep(&c, &init, &[0.2, 0.15, 0.1], 1).unwrap();
        for (e, v) in reps[0].levels.iter().zip(&reps[0].values) {
            assert!((v - e).abs() < 1e-13, "{e} {v}");
        }
        assert!((reps[0].fitted_order.unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn sweep_values_must_decrease() {
        let c = cfg();
        let init = Preset::named("uniform").unwrap().build(c.grid, c.vgrid, c.epsilon);
        assert!(delta_sweep(&c, &init, &[0.1, 0.2, 0.01], 1).is_err());
        assert!(delta_sweep(&c, &init, &[0.1, 0.01], 1).is_err());
    }

    #[test]
    fn member_order_is_kept_with_threads() {
        let c = cfg();
        let init = Preset::named("uniform").unwrap().build(c.grid, c.vgrid, c.epsilon);
        let members: Vec<SweepMember> = (0..4)
            .map(|k| SweepMember {
                value: k as f64,
                cfg: c.clone(),
                init: init.clone(),
            })
            .collect();
        let out = run_members(&members, 3);
        for (k, o) in out.iter().enumerate() {
            assert_eq!(o.as_ref().unwrap().value, k as f64);
        }
    }
}
