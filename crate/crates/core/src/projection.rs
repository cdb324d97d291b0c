//! Discrete Leray projection and its density-weighted variant (the Hodge
//! split `m = ρ u + ∇q` with `div u = 0`).

use crate::error::{Error, Result};
use crate::grid::{divergence, gradient, Grid2D, ScalarField, VectorField};
use crate::linalg::{pcg, SolveStats, SolverTolerance, SpdOperator};

/// `-div(β ∇φ)` on cells with zero-flux walls; β lives on faces.
struct WeightedNeumann<'a> {
    grid: Grid2D,
    beta: &'a VectorField,
}

impl SpdOperator for WeightedNeumann<'_> {
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let g = self.grid;
        let (nx, ny) = (g.nx, g.ny);
        let (ihx2, ihy2) = (1.0 / (g.hx() * g.hx()), 1.0 / (g.hy() * g.hy()));
        for j in 0..ny {
            for i in 0..nx {
                let c = x[j * nx + i];
                let mut acc = 0.0;
                if i > 0 {
                    acc += self.beta.ux(i, j) * (c - x[j * nx + i - 1]) * ihx2;
                }
                if i + 1 < nx {
                    acc += self.beta.ux(i + 1, j) * (c - x[j * nx + i + 1]) * ihx2;
                }
                if j > 0 {
                    acc += self.beta.uy(i, j) * (c - x[(j - 1) * nx + i]) * ihy2;
                }
                if j + 1 < ny {
                    acc += self.beta.uy(i, j + 1) * (c - x[(j + 1) * nx + i]) * ihy2;
                }
                y[j * nx + i] = acc;
            }
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        let g = self.grid;
        let (nx, ny) = (g.nx, g.ny);
        let (ihx2, ihy2) = (1.0 / (g.hx() * g.hx()), 1.0 / (g.hy() * g.hy()));
        let mut d = vec![0.0; nx * ny];
        for j in 0..ny {
            for i in 0..nx {
                let mut acc = 0.0;
                if i > 0 {
                    acc += self.beta.ux(i, j) * ihx2;
                }
                if i + 1 < nx {
                    acc += self.beta.ux(i + 1, j) * ihx2;
                }
                if j > 0 {
                    acc += self.beta.uy(i, j) * ihy2;
                }
                if j + 1 < ny {
                    acc += self.beta.uy(i, j + 1) * ihy2;
                }
                d[j * nx + i] = acc;
            }
        }
        d
    }

    fn constant_nullspace(&self) -> bool {
        true
    }
}

/// Solve `div(β ∇φ) = div(w)` and return `(w - β∇φ, φ)`; the first entry is
/// discretely divergence free to the solver tolerance. Wall-normal faces of
/// `w` are ignored (treated as 0).
pub fn weighted_projection(
    w: &VectorField,
    beta: &VectorField,
    tol: SolverTolerance,
) -> Result<(VectorField, ScalarField, SolveStats)> {
    let g = w.grid;
    g.check_same(&beta.grid)?;
    let mut w = w.clone();
    w.zero_wall_normal();
    let rhs = divergence(&w).map(|v| -v);
    let op = WeightedNeumann { grid: g, beta };
    let mut phi = ScalarField::zeros(g);
    let stats = pcg("pressure poisson", &op, &rhs.data, &mut phi.data, tol)?;
    let grad = gradient(&phi);
    let mut out = w;
    out.axpy(-1.0, &grad.hadamard(beta));
    Ok((out, phi, stats))
}

/// Unweighted Leray projection `u = u* - ∇φ`, `Δφ = div u*`. The potential
/// is returned with zero mean.
pub fn leray_project(u_star: &VectorField, tol: SolverTolerance) -> Result<(VectorField, ScalarField)> {
    let beta = ones_on_faces(u_star.grid);
    let (u, phi, _) = weighted_projection(u_star, &beta, tol)?;
    Ok((u, phi))
}

pub(crate) fn ones_on_faces(g: Grid2D) -> VectorField {
    let mut b = VectorField::zeros(g);
    b.x.fill(1.0);
    b.y.fill(1.0);
    b
}

/// Output of [`hodge_project`].
#[derive(Clone, Debug)]
pub struct HodgeResult {
    /// Divergence-free part `u` with `m = ρu + ∇q`.
    pub u: VectorField,
    /// Potential `q`, zero mean.
    pub q: ScalarField,
    /// `‖m - ρu - ∇q‖∞` over faces.
    pub decomposition_residual: f64,
    /// `‖div u‖∞`.
    pub divergence_residual: f64,
    pub iterations: usize,
}

/// Weighted Hodge decomposition `m = ρ u + ∇q`, `div u = 0`, with face
/// densities taken as arithmetic means of the adjacent cells.
pub fn hodge_project(m: &VectorField, rho: &ScalarField, tol: SolverTolerance) -> Result<HodgeResult> {
    m.grid.check_same(&rho.grid)?;
    if let Some(bad) = rho.data.iter().find(|v| !(**v > 0.0)) {
        return Err(Error::Input(format!("hodge_project needs a positive density, found {bad}")));
    }
    let rho_f = rho.face_average();
    let beta = VectorField {
        grid: rho_f.grid,
        x: rho_f.x.iter().map(|r| 1.0 / r).collect(),
        y: rho_f.y.iter().map(|r| 1.0 / r).collect(),
    };
    let mut m0 = m.clone();
    m0.zero_wall_normal();
    let (u, q, stats) = weighted_projection(&m0.hadamard(&beta), &beta, tol)?;
    let mut recon = u.hadamard(&rho_f);
    recon.axpy(1.0, &gradient(&q));
    let decomposition_residual = m0.sub(&recon).max_abs();
    let divergence_residual = divergence(&u).max_abs();
    Ok(HodgeResult {
        u,
        q,
        decomposition_residual,
        divergence_residual,
        iterations: stats.iterations,
    })
}

/// The three quadratures of the orthogonality identity
/// `∫ρ|u|² + ∫|∇q|²/ρ = ∫|m|²/ρ`, evaluated on faces.
pub fn hodge_energy_terms(m: &VectorField, rho: &ScalarField, h: &HodgeResult) -> (f64, f64, f64) {
    let rho_f = rho.face_average();
    let grad = gradient(&h.q);
    let mut m0 = m.clone();
    m0.zero_wall_normal();
    let area = m.grid.cell_area();
    let mut kinetic = 0.0;
    let mut potential = 0.0;
    let mut total = 0.0;
    for k in 0..m0.x.len() {
        let r = rho_f.x[k];
        kinetic += r * h.u.x[k] * h.u.x[k];
        potential += grad.x[k] * grad.x[k] / r;
        total += m0.x[k] * m0.x[k] / r;
    }
    for k in 0..m0.y.len() {
        let r = rho_f.y[k];
        kinetic += r * h.u.y[k] * h.u.y[k];
        potential += grad.y[k] * grad.y[k] / r;
        total += m0.y[k] * m0.y[k] / r;
    }
    (kinetic * area, potential * area, total * area)
}
