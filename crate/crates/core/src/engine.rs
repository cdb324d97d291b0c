//! Coupled time stepping: mollify `u`, transport `ρ`, advance `f`, assemble
//! the drag and solve the momentum equation, optionally Picard-iterated,
//! with a per-step energy ledger.

use log::{debug, info};

use crate::density::{advance_density, density_dt_limit};
use crate::error::{Error, Result};
use crate::fluid::{advance_momentum, DragFields, FluidStepReport, MomentumInputs};
use crate::grid::{dirichlet_energy, Grid2D, ScalarField, VectorField};
use crate::initial::{build_initial_state, InitialDataSpec};
use crate::kinetic::{advance_vlasov, compute_moments, regularizer, streaming_dt_limit, PhaseDistribution, VelocityGrid, VlasovReport};
use crate::linalg::SolverTolerance;
use crate::mollify::mollified_velocity;

/// Solution triple `(ρ, u, f)` with the pressure of the last step.
#[derive(Clone, Debug, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub step: usize,
    pub rho: ScalarField,
    pub u: VectorField,
    pub p: ScalarField,
    pub f: PhaseDistribution,
}

impl SimState {
    /// Uniform density, fluid at rest, no particles.
    pub fn at_rest(grid: Grid2D, vgrid: VelocityGrid, rho: f64) -> Self {
        SimState {
            t: 0.0,
            step: 0,
            rho: ScalarField::constant(grid, rho),
            u: VectorField::zeros(grid),
            p: ScalarField::zeros(grid),
            f: PhaseDistribution::zeros(grid, vgrid),
        }
    }

    pub fn grid(&self) -> Grid2D {
        self.rho.grid
    }

    /// Midpoint `(self + other) / 2` of all fields, used by the Picard sweep.
    fn midpoint(&self, other: &SimState) -> SimState {
        let avg = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect::<Vec<_>>();
        let g = self.grid();
        SimState {
            t: 0.5 * (self.t + other.t),
            step: self.step,
            rho: ScalarField { grid: g, data: avg(&self.rho.data, &other.rho.data) },
            u: VectorField { grid: g, x: avg(&self.u.x, &other.u.x), y: avg(&self.u.y, &other.u.y) },
            p: self.p.clone(),
            f: PhaseDistribution { grid: g, vgrid: self.f.vgrid, data: avg(&self.f.data, &other.f.data) },
        }
    }
}

/// Parameters of a simulation.
#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub grid: Grid2D,
    pub vgrid: VelocityGrid,
    pub epsilon: f64,
    pub delta: f64,
    pub mu: f64,
    /// Fixed step; when absent the step is `cfl` times the admissible one.
    pub dt: Option<f64>,
    pub cfl: f64,
    pub t_end: f64,
    pub sub_iterations: usize,
    /// Picard stops once `‖u⁽ᵏ⁺¹⁾ - u⁽ᵏ⁾‖ ≤ picard_tol ‖u⁽ᵏ⁺¹⁾‖`.
    pub picard_tol: f64,
    pub tol: SolverTolerance,
    /// Snapshot every this many steps; 0 keeps only the first and last.
    pub snapshot_every: usize,
    pub seed: u64,
    /// With `false` the particles are frozen and the drag is switched off.
    pub coupling: bool,
    /// Defect tolerance `coef · E⁰ · (Δt/dt_ref + h/h_ref)`.
    pub defect_coef: f64,
    pub dt_ref: f64,
    pub h_ref: f64,
}

impl SimConfig {
    /// Default parameters on a unit square with `n²` cells and `nv²` velocity cells.
    pub fn new(n: usize, nv: usize) -> Result<Self> {
        let grid = Grid2D::unit(n)?;
        let vgrid = VelocityGrid::new(nv, nv, 4.0)?;
        Ok(SimConfig {
            grid,
            vgrid,
            epsilon: 0.1,
            delta: 0.1,
            mu: 0.01,
            dt: None,
            cfl: 0.9,
            t_end: 0.5,
            sub_iterations: 1,
            picard_tol: 1e-10,
            tol: SolverTolerance::default(),
            snapshot_every: 0,
            seed: 0,
            coupling: true,
            defect_coef: 0.02,
            dt_ref: grid.hx() / (std::f64::consts::SQRT_2 * 4.0),
            h_ref: grid.hx(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(key, format!("must be positive and finite, got {v}")))
            }
        };
        pos("physics.epsilon", self.epsilon)?;
        if !(self.delta >= 0.0) || !self.delta.is_finite() {
            return Err(Error::config("physics.delta", format!("must be nonnegative and finite, got {}", self.delta)));
        }
        if !(self.mu >= 0.0) || !self.mu.is_finite() {
            return Err(Error::config("physics.mu", format!("must be nonnegative and finite, got {}", self.mu)));
        }
        pos("physics.vmax", self.vgrid.vmax)?;
        if let Some(dt) = self.dt {
            pos("time.dt", dt)?;
        }
        if !(self.cfl > 0.0 && self.cfl <= 0.9) {
            return Err(Error::config("time.cfl", format!("must lie in (0, 0.9], got {}", self.cfl)));
        }
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return Err(Error::config("time.t_end", format!("must be nonnegative and finite, got {}", self.t_end)));
        }
        if self.sub_iterations == 0 {
            return Err(Error::config("solver.sub_iterations", "must be at least 1"));
        }
        pos("solver.picard_tol", self.picard_tol)?;
        pos("solver.abs_tol", self.tol.abs_tol)?;
        if !(self.tol.rel_tol >= 0.0) {
            return Err(Error::config("solver.rel_tol", "must be nonnegative"));
        }
        if self.tol.max_iter == 0 {
            return Err(Error::config("solver.max_iter", "must be at least 1"));
        }
        pos("output.defect_coef", self.defect_coef)?;
        pos("output.dt_ref", self.dt_ref)?;
        pos("output.h_ref", self.h_ref)?;
        // The mollifier must fit: same check as building it.
        crate::mollify::Mollifier::new(&self.grid, self.epsilon)
            .map_err(|e| Error::config("physics.epsilon", e.to_string()))?;
        Ok(())
    }

    /// Fixed step and step count for the run starting at `state`.
    pub fn time_step(&self, state: &SimState) -> Result<(f64, usize)> {
        if self.t_end == 0.0 {
            return Ok((self.dt.unwrap_or(0.0), 0));
        }
        let dt0 = match self.dt {
            Some(dt) => dt,
            None => {
                let mut limit = density_dt_limit(&mollified_velocity(&state.u, self.epsilon)?);
                // f ≡ 0 stays zero, so only a populated phase space limits the step.
                if self.coupling && state.f.max() > 0.0 {
                    limit = limit.min(streaming_dt_limit(&self.grid, &self.vgrid));
                }
                if !limit.is_finite() {
                    limit = self.grid.hx().min(self.grid.hy());
                }
                self.cfl * limit
            }
        };
        let n = (self.t_end / dt0 - 1e-9).ceil().max(1.0) as usize;
        Ok((self.t_end / n as f64, n))
    }

    /// Allowed per-run defect for initial energy `e0` and step `dt`.
    pub fn defect_tolerance(&self, e0: f64, dt: f64) -> f64 {
        let h = self.grid.hx().max(self.grid.hy());
        self.defect_coef * e0 * (dt / self.dt_ref + h / self.h_ref)
    }
}

/// Diagnostics of one coupled step.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepReport {
    pub dt: f64,
    pub vlasov: VlasovReport,
    pub fluid: FluidStepReport,
    pub picard_iterations: usize,
    /// Relative change of `u` in the last Picard sweep (0 for one sweep).
    pub picard_change: f64,
    /// `max Q_δ` of the drag regularizer used in the step.
    pub q_delta_max: f64,
    /// `δ (max m0 + max |m1|)`, an upper bound for `q_delta_max`.
    pub q_delta_bound: f64,
}

struct Sweep {
    state: SimState,
    vlasov: VlasovReport,
    fluid: FluidStepReport,
    q_max: f64,
    q_bound: f64,
}

fn sweep(base: &SimState, mid: &SimState, cfg: &SimConfig, dt: f64) -> Result<Sweep> {
    let u_eps = mollified_velocity(&mid.u, cfg.epsilon).map_err(|e| e.in_stage("mollify"))?;
    let rho = advance_density(&base.rho, &u_eps, dt).map_err(|e| e.in_stage("density transport"))?;
    let g = base.grid();
    // An empty phase space stays empty and exerts no drag.
    let populated = base.f.max() > 0.0 || mid.f.max() > 0.0;
    let (f, vlasov, drag, q_max, q_bound) = if cfg.coupling && populated {
        let (f, rep) =
            advance_vlasov(&base.f, &mid.rho, &mid.u, cfg.delta, dt).map_err(|e| e.in_stage("vlasov"))?;
        let m = compute_moments(&mid.f);
        let r = regularizer(&m, cfg.delta).map_err(|e| e.in_stage("drag"))?;
        let q_max = r.q().max();
        let m1_max = (0..g.n_cells()).map(|k| m.m1_norm(k)).fold(0.0, f64::max);
        let q_bound = cfg.delta * (m.m0.max() + m1_max);
        (f, rep, DragFields::from_moments(&m, &r), q_max, q_bound)
    } else {
        (base.f.clone(), VlasovReport::default(), DragFields::zeros(g), 0.0, 0.0)
    };
    let (u, p, fluid) = advance_momentum(MomentumInputs {
        u: &base.u,
        rho: &rho,
        rho_prev: &base.rho,
        drag: &drag,
        u_eps: &u_eps,
        p_prev: &base.p,
        source: None,
        mu: cfg.mu,
        dt,
        tol: cfg.tol,
    })
    .map_err(|e| e.in_stage("momentum"))?;
    Ok(Sweep {
        state: SimState {
            t: base.t + dt,
            step: base.step + 1,
            rho,
            u,
            p,
            f,
        },
        vlasov,
        fluid,
        q_max,
        q_bound,
    })
}

/// Advance `state` by `dt`. The first sweep evaluates every coefficient at
/// the old level; each further Picard sweep re-evaluates them at the
/// midpoint of the old state and the latest iterate.
pub fn step(state: &SimState, cfg: &SimConfig, dt: f64) -> Result<(SimState, StepReport)> {
    let mut s = sweep(state, state, cfg, dt)?;
    let mut iterations = 1;
    let mut change = 0.0;
    while iterations < cfg.sub_iterations {
        let mid = state.midpoint(&s.state);
        let next = sweep(state, &mid, cfg, dt)?;
        iterations += 1;
        let norm = next.state.u.l2_norm();
        change = next.state.u.sub(&s.state.u).l2_norm() / norm.max(f64::MIN_POSITIVE);
        s = next;
        if change <= cfg.picard_tol {
            break;
        }
    }
    let report = StepReport {
        dt,
        vlasov: s.vlasov,
        fluid: s.fluid,
        picard_iterations: iterations,
        picard_change: change,
        q_delta_max: s.q_max,
        q_delta_bound: s.q_bound,
    };
    Ok((s.state, report))
}

/// One ledger record. `E_fluid = ∫ρ|u|²`, `E_part = ∫∫f(1+|v|²)`,
/// `D_visc = 2Δtμ∫|∇u|²`, `D_drag = 2Δt∫∫R_δ ρ f|u-v|²`; the defect is
/// `E_fluid + E_part + D_visc + D_drag` minus the previous energies.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LedgerRow {
    pub step: usize,
    pub t: f64,
    pub e_fluid: f64,
    pub e_part: f64,
    pub d_visc: f64,
    pub d_drag: f64,
    pub defect: f64,
    pub m0f: f64,
    pub m3f: f64,
    pub overflow_mass: f64,
}

impl LedgerRow {
    pub fn energy(&self) -> f64 {
        self.e_fluid + self.e_part
    }

    pub fn is_finite(&self) -> bool {
        [self.t, self.e_fluid, self.e_part, self.d_visc, self.d_drag, self.defect, self.m0f, self.m3f, self.overflow_mass]
            .iter()
            .all(|v| v.is_finite())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EnergyLedger {
    pub rows: Vec<LedgerRow>,
}

impl EnergyLedger {
    pub const HEADER: &'static str = "step,t,E_fluid,E_part,D_visc,D_drag,defect,M0f,M3f,overflow_mass";

    pub fn initial_energy(&self) -> f64 {
        self.rows.first().map_or(0.0, LedgerRow::energy)
    }

    /// Cumulative defect `Eⁿ + Σ(D_visc + D_drag) - E⁰` after every row.
    pub fn cumulative_defects(&self) -> Vec<f64> {
        let e0 = self.initial_energy();
        let mut diss = 0.0;
        self.rows
            .iter()
            .map(|r| {
                diss += r.d_visc + r.d_drag;
                r.energy() + diss - e0
            })
            .collect()
    }

    pub fn max_cumulative_defect(&self) -> f64 {
        self.cumulative_defects().into_iter().fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(Self::HEADER);
        s.push('\n');
        for r in &self.rows {
            s.push_str(&format!(
                "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}\n",
                r.step, r.t, r.e_fluid, r.e_part, r.d_visc, r.d_drag, r.defect, r.m0f, r.m3f, r.overflow_mass
            ));
        }
        s
    }
}

/// `∫ρ|u|²` with the density averaged onto the faces.
pub fn fluid_energy(rho: &ScalarField, u: &VectorField) -> f64 {
    u.hadamard(&rho.face_average()).dot(u)
}

/// `∫∫f(1+|v|²)`.
pub fn particle_energy(f: &PhaseDistribution) -> f64 {
    f.weighted_total(|a, b| 1.0 + a * a + b * b)
}

/// `∫∫R_δ ρ f|u-v|²` with `R_δ`, `ρ`, `f` from `prev` and `u` from `next`.
fn drag_dissipation_rate(prev: &SimState, u: &VectorField, delta: f64) -> Result<f64> {
    let f = &prev.f;
    let g = f.grid;
    let v = f.vgrid;
    let nc = g.n_cells();
    let r = regularizer(&compute_moments(f), delta)?;
    let (ux, uy) = u.at_centers();
    let mut acc = vec![0.0; nc];
    for ky in 0..v.nvy {
        for kx in 0..v.nvx {
            let (a, b) = (v.vx(kx), v.vy(ky));
            for (c, fv) in f.slab(kx, ky).iter().enumerate() {
                if *fv != 0.0 {
                    let (dx, dy) = (ux.data[c] - a, uy.data[c] - b);
                    acc[c] += fv * (dx * dx + dy * dy);
                }
            }
        }
    }
    let s: f64 = (0..nc).map(|c| r.r.data[c] * prev.rho.data[c] * acc[c]).sum();
    Ok(s * g.cell_area() * v.cell_volume())
}

/// Ledger record for the step `prev → next`.
pub fn energy_ledger_entry(next: &SimState, prev: &SimState, dt: f64, mu: f64, delta: f64) -> Result<LedgerRow> {
    let mut row = initial_ledger_row(next);
    row.d_visc = 2.0 * dt * mu * dirichlet_energy(&next.u);
    row.d_drag = 2.0 * dt * drag_dissipation_rate(prev, &next.u, delta)?;
    let e_prev = fluid_energy(&prev.rho, &prev.u) + particle_energy(&prev.f);
    row.defect = row.energy() + row.d_visc + row.d_drag - e_prev;
    Ok(row)
}

/// Energies and moments of a single state, with zero dissipation.
pub fn initial_ledger_row(s: &SimState) -> LedgerRow {
    LedgerRow {
        step: s.step,
        t: s.t,
        e_fluid: fluid_energy(&s.rho, &s.u),
        e_part: particle_energy(&s.f),
        m0f: s.f.total_mass(),
        m3f: s.f.weighted_total(|a, b| (a * a + b * b).powf(1.5)),
        ..Default::default()
    }
}

/// Snapshots and ledger of a run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub snapshots: Vec<SimState>,
    pub ledger: EnergyLedger,
}

/// A failed run together with everything computed before the failure.
#[derive(Debug)]
pub struct RunFailure {
    pub error: Error,
    pub partial: Trajectory,
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} (after {} ledger rows)", self.error, self.partial.ledger.rows.len())
    }
}

impl std::error::Error for RunFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

impl From<Error> for RunFailure {
    fn from(error: Error) -> Self {
        RunFailure {
            error,
            partial: Trajectory::default(),
        }
    }
}

/// Regularize the initial data and run to `cfg.t_end`.
pub fn run(cfg: &SimConfig, init: &InitialDataSpec) -> std::result::Result<Trajectory, Box<RunFailure>> {
    cfg.validate().map_err(|e| Box::new(e.into()))?;
    let state = build_initial_state(init, cfg.tol).map_err(|e| Box::new(RunFailure::from(e.in_stage("initial data"))))?;
    run_from(cfg, state, |_, _| Ok(()))
}

/// Run from an already regularized state, calling `observe` on the initial
/// state and after every step.
pub fn run_from(
    cfg: &SimConfig,
    state: SimState,
    mut observe: impl FnMut(&SimState, Option<&StepReport>) -> Result<()>,
) -> std::result::Result<Trajectory, Box<RunFailure>> {
    let mut traj = Trajectory::default();
    let fail = |error: Error, traj: Trajectory| Box::new(RunFailure { error, partial: traj });
    if let Err(e) = cfg.validate() {
        return Err(fail(e, traj));
    }
    if let Err(e) = cfg.grid.check_same(&state.rho.grid) {
        return Err(fail(e, traj));
    }
    let (dt, nsteps) = match cfg.time_step(&state) {
        Ok(v) => v,
        Err(e) => return Err(fail(e, traj)),
    };
    traj.dt = dt;
    info!("running {nsteps} steps of dt = {dt:.4e} to t = {}", cfg.t_end);
    traj.ledger.rows.push(initial_ledger_row(&state));
    traj.snapshots.push(state.clone());
    if let Err(e) = observe(&state, None) {
        return Err(fail(e, traj));
    }
    let mut cur = state;
    let mut leaked = 0.0;
    for n in 0..nsteps {
        let (mut next, report) = match step(&cur, cfg, dt) {
            Ok(v) => v,
            Err(e) => return Err(fail(e, traj)),
        };
        if n + 1 == nsteps {
            next.t = cfg.t_end;
        }
        let mut row = match energy_ledger_entry(&next, &cur, dt, cfg.mu, cfg.delta) {
            Ok(r) => r,
            Err(e) => return Err(fail(e.in_stage("energy ledger"), traj)),
        };
        leaked += report.vlasov.leaked_mass;
        row.overflow_mass = leaked;
        debug!(
            "step {} t={:.4} E={:.6e} defect={:.3e} picard={} div={:.2e}",
            row.step,
            row.t,
            row.energy(),
            row.defect,
            report.picard_iterations,
            report.fluid.divergence
        );
        traj.ledger.rows.push(row);
        if let Err(e) = observe(&next, Some(&report)) {
            return Err(fail(e, traj));
        }
        let last = n + 1 == nsteps;
        if last || (cfg.snapshot_every > 0 && (n + 1) % cfg.snapshot_every == 0) {
            traj.snapshots.push(next.clone());
        }
        cur = next;
    }
    Ok(traj)
}
