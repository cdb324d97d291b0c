//! Momentum step of the regularized fluid equation
//!
//! `ρ ∂t u + ρ u_ε·∇u - μΔu + ∇p + ρ e u = ρ g`, `div u = 0`,
//!
//! with `e = R_δ m0 f` and `g = R_δ m1 f`: explicit conservative convection
//! by `u_ε`, implicit viscosity and drag, then an incremental
//! density-weighted pressure projection.

use crate::density::density_dt_limit;
use crate::error::{Error, Result};
use crate::grid::{divergence, gradient, laplacian_into, Grid2D, ScalarField, VectorField};
use crate::kinetic::{compute_moments, regularizer, MomentFields, PhaseDistribution, RegularizerField};
use crate::linalg::{pcg, SolverTolerance, SpdOperator};
use crate::projection::weighted_projection;
use crate::transport::Lattice;

pub use crate::projection::leray_project;

/// Drag coefficients at cell centres and on faces.
#[derive(Clone, Debug, PartialEq)]
pub struct DragFields {
    /// Internal-force coefficient `e = R_δ m0`, cell centred.
    pub e: ScalarField,
    /// `e` averaged onto the faces.
    pub e_faces: VectorField,
    /// External force density `g = R_δ m1`, face averaged.
    pub g: VectorField,
    /// Cell-centred components of `g`.
    pub g_cells: (ScalarField, ScalarField),
}

impl DragFields {
    pub fn zeros(grid: Grid2D) -> Self {
        DragFields {
            e: ScalarField::zeros(grid),
            e_faces: VectorField::zeros(grid),
            g: VectorField::zeros(grid),
            g_cells: (ScalarField::zeros(grid), ScalarField::zeros(grid)),
        }
    }

    pub fn from_moments(m: &MomentFields, r: &RegularizerField) -> Self {
        let g = m.m0.grid;
        let mut e = ScalarField::zeros(g);
        let mut gx = ScalarField::zeros(g);
        let mut gy = ScalarField::zeros(g);
        for k in 0..g.n_cells() {
            let rk = r.r.data[k];
            e.data[k] = rk * m.m0.data[k];
            gx.data[k] = rk * m.m1x.data[k];
            gy.data[k] = rk * m.m1y.data[k];
        }
        let e_faces = e.face_average();
        let fx = gx.face_average();
        let fy = gy.face_average();
        DragFields {
            e,
            e_faces,
            g: VectorField { grid: g, x: fx.x, y: fy.y },
            g_cells: (gx, gy),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.e.max_abs() == 0.0 && self.g.max_abs() == 0.0
    }
}

/// `e = R_δ m0 f`, `g = R_δ m1 f` from the distribution.
pub fn assemble_drag(f: &PhaseDistribution, delta: f64) -> Result<DragFields> {
    let m = compute_moments(f);
    let r = regularizer(&m, delta)?;
    Ok(DragFields::from_moments(&m, &r))
}

/// Diagnostics of one momentum step.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FluidStepReport {
    pub convection_substeps: usize,
    pub implicit_iterations: usize,
    pub implicit_residual: f64,
    pub pressure_iterations: usize,
    /// `‖div u‖∞` after the projection.
    pub divergence: f64,
}

/// Inputs of [`advance_momentum`].
#[derive(Clone, Copy, Debug)]
pub struct MomentumInputs<'a> {
    pub u: &'a VectorField,
    /// Density at the new time level.
    pub rho: &'a ScalarField,
    /// Density at the old time level; it also weights the drag terms.
    pub rho_prev: &'a ScalarField,
    pub drag: &'a DragFields,
    pub u_eps: &'a VectorField,
    /// Pressure of the previous step (incremental projection).
    pub p_prev: &'a ScalarField,
    /// Optional body force per unit volume (manufactured solutions).
    pub source: Option<&'a VectorField>,
    pub mu: f64,
    pub dt: f64,
    pub tol: SolverTolerance,
}

/// `(ρ_f/Δt + ρ_f e_f) I - μ Δ` on the interior faces; wall-normal faces are
/// identity rows so the system stays SPD with those entries pinned to 0.
struct MomentumOperator {
    grid: Grid2D,
    coef: VectorField,
    mu: f64,
    wall: Vec<bool>,
}

impl MomentumOperator {
    fn new(grid: Grid2D, coef: VectorField, mu: f64) -> Self {
        let mut wall = vec![false; coef.x.len() + coef.y.len()];
        let nxf = coef.x.len();
        for j in 0..grid.ny {
            wall[j * (grid.nx + 1)] = true;
            wall[j * (grid.nx + 1) + grid.nx] = true;
        }
        for i in 0..grid.nx {
            wall[nxf + i] = true;
            wall[nxf + grid.ny * grid.nx + i] = true;
        }
        MomentumOperator { grid, coef, mu, wall }
    }

    fn split(&self, x: &[f64]) -> VectorField {
        let n = self.coef.x.len();
        VectorField {
            grid: self.grid,
            x: x[..n].to_vec(),
            y: x[n..].to_vec(),
        }
    }
}

impl SpdOperator for MomentumOperator {
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let u = self.split(x);
        let mut lap = VectorField::zeros(self.grid);
        laplacian_into(&u, &mut lap);
        let n = self.coef.x.len();
        for k in 0..x.len() {
            y[k] = if self.wall[k] {
                x[k]
            } else {
                let (c, l) = if k < n { (self.coef.x[k], lap.x[k]) } else { (self.coef.y[k - n], lap.y[k - n]) };
                c * x[k] - self.mu * l
            };
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        let (ihx2, ihy2) = (1.0 / self.grid.hx().powi(2), 1.0 / self.grid.hy().powi(2));
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let n = self.coef.x.len();
        let mut d = vec![0.0; self.wall.len()];
        for (k, dk) in d.iter_mut().enumerate() {
            if self.wall[k] {
                *dk = 1.0;
                continue;
            }
            // Tangential neighbours across a wall use the ghost -u, which
            // adds one more unit to the stencil centre.
            let (c, extra_y, extra_x) = if k < n {
                let j = k / (nx + 1);
                (self.coef.x[k], j == 0 || j + 1 == ny, false)
            } else {
                let i = (k - n) % nx;
                (self.coef.y[k - n], false, i == 0 || i + 1 == nx)
            };
            let mut lap = 2.0 * ihx2 + 2.0 * ihy2;
            if extra_y {
                lap += ihy2;
            }
            if extra_x {
                lap += ihx2;
            }
            *dk = c + self.mu * lap;
        }
        d
    }
}

/// Conservative convection `m ← m - Δt div(m ⊗ u_ε)` of the face momentum
/// on the staggered control volumes. Returns the sub-step count.
pub fn convect_momentum(m: &mut VectorField, u_eps: &VectorField, dt: f64) -> usize {
    let g = m.grid;
    let (nx, ny) = (g.nx, g.ny);
    let (hx, hy) = (g.hx(), g.hy());
    // x-momentum lattice: (nx+1) x ny control volumes centred on x-faces.
    let (w, h) = (nx + 1, ny);
    let mut ax = vec![0.0; (w + 1) * h];
    let mut ay = vec![0.0; w * (h + 1)];
    for j in 0..h {
        for i in 1..w {
            ax[j * (w + 1) + i] = 0.5 * (u_eps.ux(i - 1, j) + u_eps.ux(i, j));
        }
    }
    for j in 1..h {
        for i in 1..w - 1 {
            ay[j * w + i] = 0.5 * (u_eps.uy(i - 1, j) + u_eps.uy(i, j));
        }
    }
    let mut fixed = vec![false; w * h];
    for j in 0..h {
        fixed[j * w] = true;
        fixed[j * w + w - 1] = true;
    }
    let lat = Lattice {
        w,
        h,
        dx: hx,
        dy: hy,
        ax: &ax,
        ay: &ay,
        fixed: Some(&fixed),
    };
    let n1 = lat.advance(&mut m.x, dt);

    // y-momentum lattice: nx x (ny+1) control volumes centred on y-faces.
    let (w, h) = (nx, ny + 1);
    let mut ax = vec![0.0; (w + 1) * h];
    let mut ay = vec![0.0; w * (h + 1)];
    for j in 1..h - 1 {
        for i in 1..w {
            ax[j * (w + 1) + i] = 0.5 * (u_eps.ux(i, j - 1) + u_eps.ux(i, j));
        }
    }
    for j in 1..h {
        for i in 0..w {
            ay[j * w + i] = 0.5 * (u_eps.uy(i, j - 1) + u_eps.uy(i, j));
        }
    }
    let mut fixed = vec![false; w * h];
    for i in 0..w {
        fixed[i] = true;
        fixed[(h - 1) * w + i] = true;
    }
    let lat = Lattice {
        w,
        h,
        dx: hx,
        dy: hy,
        ax: &ax,
        ay: &ay,
        fixed: Some(&fixed),
    };
    let n2 = lat.advance(&mut m.y, dt);
    n1.max(n2)
}

/// One momentum step. Returns `(uⁿ⁺¹, pⁿ⁺¹, report)` with `div uⁿ⁺¹ = 0` to
/// the solver tolerance and `∫p = 0`.
pub fn advance_momentum(inp: MomentumInputs<'_>) -> Result<(VectorField, ScalarField, FluidStepReport)> {
    let g = inp.u.grid;
    for other in [&inp.rho.grid, &inp.rho_prev.grid, &inp.u_eps.grid, &inp.p_prev.grid, &inp.drag.e.grid] {
        g.check_same(other)?;
    }
    let dt = inp.dt;
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::config("time.dt", format!("time step must be positive, got {dt}")));
    }
    if !(inp.mu >= 0.0) || !inp.mu.is_finite() {
        return Err(Error::config("physics.mu", format!("viscosity must be nonnegative, got {}", inp.mu)));
    }
    for rho in [inp.rho, inp.rho_prev] {
        let lo = rho.min();
        if !(lo > 0.0) {
            return Err(Error::Input(format!("density {lo} below the positive floor in the momentum step")));
        }
    }
    let limit = density_dt_limit(inp.u_eps);
    if dt > limit * (1.0 + 1e-12) {
        return Err(Error::Cfl {
            stage: "momentum convection",
            dt,
            limit,
        });
    }
    let mut report = FluidStepReport::default();
    let rf_new = inp.rho.face_average();
    let rf_old = inp.rho_prev.face_average();

    let mut m = inp.u.hadamard(&rf_old);
    m.zero_wall_normal();
    report.convection_substeps = convect_momentum(&mut m, inp.u_eps, dt);

    let drag_coef = inp.drag.e_faces.hadamard(&rf_old);
    let mut coef = rf_new.clone();
    coef.scale(1.0 / dt);
    coef.axpy(1.0, &drag_coef);
    let mut rhs = m;
    rhs.scale(1.0 / dt);
    rhs.axpy(1.0, &inp.drag.g.hadamard(&rf_old));
    rhs.axpy(-1.0, &gradient(inp.p_prev));
    if let Some(s) = inp.source {
        g.check_same(&s.grid)?;
        rhs.axpy(1.0, s);
    }
    rhs.zero_wall_normal();

    let op = MomentumOperator::new(g, coef, inp.mu);
    let b: Vec<f64> = rhs.x.iter().chain(&rhs.y).copied().collect();
    let mut x: Vec<f64> = inp.u.x.iter().chain(&inp.u.y).copied().collect();
    for (k, w) in op.wall.iter().enumerate() {
        if *w {
            x[k] = 0.0;
        }
    }
    let stats = pcg("implicit momentum", &op, &b, &mut x, inp.tol)?;
    report.implicit_iterations = stats.iterations;
    report.implicit_residual = stats.residual;
    let u_star = op.split(&x);

    let beta = VectorField {
        grid: g,
        x: rf_new.x.iter().map(|r| 1.0 / r).collect(),
        y: rf_new.y.iter().map(|r| 1.0 / r).collect(),
    };
    let (u, phi, pstats) = weighted_projection(&u_star, &beta, inp.tol)?;
    report.pressure_iterations = pstats.iterations;
    report.divergence = divergence(&u).max_abs();
    // Rotational form of the pressure increment.
    let div_star = divergence(&u_star);
    let mut p = inp.p_prev.clone();
    for ((pv, d), dv) in p.data.iter_mut().zip(&phi.data).zip(&div_star.data) {
        *pv += d / dt - inp.mu * dv;
    }
    p.remove_mean();
    Ok((u, p, report))
}
