//! Manufactured and exact solutions for convergence studies: density
//! translation, steady Stokes flow and free streaming in phase space.

use std::f64::consts::PI;

use crate::density::advance_density;
use crate::error::Result;
use crate::fluid::{advance_momentum, DragFields, MomentumInputs};
use crate::grid::{divergence, Grid2D, NodeField, ScalarField, VectorField};
use crate::kinetic::{advance_free_streaming, streaming_dt_limit, PhaseDistribution, VelocityGrid};
use crate::linalg::SolverTolerance;

use super::VerificationReport;

/// Error of one refinement level.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LevelError {
    pub n: usize,
    pub h: f64,
    pub error: f64,
}

/// Run `case` on every resolution and fit the order of the error in `h`.
pub fn refinement_study(
    name: &str,
    resolutions: &[usize],
    required: f64,
    case: impl Fn(usize) -> Result<LevelError>,
) -> Result<VerificationReport> {
    let mut rep = VerificationReport::new(name);
    for &n in resolutions {
        let e = case(n)?;
        rep.levels.push(e.h);
        rep.values.push(e.error);
    }
    Ok(rep.with_order(required))
}

/// `C²` step: 0 for `s ≤ 0`, 1 for `s ≥ 1`.
fn smooth_step(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
}

/// Plateau factor: 1 on `[a, 1-a]`, 0 within `b` of the ends.
fn plateau(x: f64, a: f64, b: f64) -> f64 {
    smooth_step((x - b) / (a - b)) * smooth_step((1.0 - b - x) / (a - b))
}

/// Smooth bump of radius `r` centred at `c`.
fn bump(x: f64, y: f64, c: (f64, f64), r: f64) -> f64 {
    let d2 = ((x - c.0).powi(2) + (y - c.1).powi(2)) / (r * r);
    if d2 >= 1.0 {
        0.0
    } else {
        (1.0 - d2).powi(4)
    }
}

/// Density translated by a uniform flow `(1, 0)` on `[0.15, 0.85]²`, carried
/// by a stream function that is constant near the walls. A bump of radius
/// 0.15 starts at `(0.35, 0.5)` and is transported to `t = 0.2` at Courant
/// number 0.4 (the return flow near the walls is the fastest); the error is
/// the L¹ distance to the translated bump.
pub fn translation_density(n: usize) -> Result<LevelError> {
    let g = Grid2D::unit(n)?;
    let psi = NodeField::from_fn(g, |x, y| (y - 0.5) * plateau(x, 0.15, 0.05) * plateau(y, 0.15, 0.05));
    let u = VectorField::from_stream_function(&psi);
    let (c0, r, t_end) = ((0.35, 0.5), 0.15, 0.2);
    let mut rho = ScalarField::from_fn(g, |x, y| 1.0 + bump(x, y, c0, r));
    let steps = (t_end * u.max_abs() / (0.4 * g.hx())).ceil() as usize;
    let dt = t_end / steps as f64;
    for _ in 0..steps {
        rho = advance_density(&rho, &u, dt)?;
    }
    let exact = ScalarField::from_fn(g, |x, y| 1.0 + bump(x, y, (c0.0 + t_end, c0.1), r));
    Ok(LevelError {
        n,
        h: g.hx(),
        error: rho.sub(&exact).l1_norm(),
    })
}

/// Steady Stokes flow `-μΔu + ∇p = s`, `div u = 0` with
/// `ψ = sin²(πx) sin²(πy)`, `u = curl ψ`, `p = cos(πx) cos(πy)` and `μ = 1`,
/// reached by marching the momentum step with `Δt = 1`. The error is the
/// face L² distance to the exact velocity.
pub fn stokes_steady(n: usize) -> Result<LevelError> {
    let g = Grid2D::unit(n)?;
    let mu = 1.0;
    let (s, c) = (|z: f64| (PI * z).sin(), |z: f64| (PI * z).cos());
    // ψ = S(x) S(y) with S = sin², S' = π sin(2πz), S'' = 2π² cos(2πz),
    // S''' = -4π³ sin(2πz).
    let s0 = |z: f64| s(z) * s(z);
    let s1 = |z: f64| PI * (2.0 * PI * z).sin();
    let s2 = |z: f64| 2.0 * PI * PI * (2.0 * PI * z).cos();
    let s3 = |z: f64| -4.0 * PI.powi(3) * (2.0 * PI * z).sin();
    let exact = VectorField::from_fn(g, |x, y| (s0(x) * s1(y), -s1(x) * s0(y)));
    // Δu = (S''S' + S S''', -(S'''S + S'S''))
    let source = VectorField::from_fn(g, |x, y| {
        let lap_u = s2(x) * s1(y) + s0(x) * s3(y);
        let lap_v = -(s3(x) * s0(y) + s1(x) * s2(y));
        (-mu * lap_u - PI * s(x) * c(y), -mu * lap_v - PI * c(x) * s(y))
    });
    let rho = ScalarField::constant(g, 1.0);
    let drag = DragFields::zeros(g);
    let zero = VectorField::zeros(g);
    let mut u = VectorField::zeros(g);
    let mut p = ScalarField::zeros(g);
    let tol = SolverTolerance {
        abs_tol: 1e-10,
        ..SolverTolerance::default()
    };
    for _ in 0..200 {
        let (un, pn, _) = advance_momentum(MomentumInputs {
            u: &u,
            rho: &rho,
            rho_prev: &rho,
            drag: &drag,
            u_eps: &zero,
            p_prev: &p,
            source: Some(&source),
            mu,
            dt: 1.0,
            tol,
        })?;
        let change = un.sub(&u).max_abs();
        u = un;
        p = pn;
        if change < 1e-9 {
            break;
        }
    }
    debug_assert!(divergence(&u).max_abs() < 1e-8);
    Ok(LevelError {
        n,
        h: g.hx(),
        error: u.sub(&exact).l2_norm(),
    })
}

/// Free streaming of a smooth blob that stays clear of the walls up to
/// `t = 0.2`, compared with `f₀(x - vt, v)` in L¹ over phase space. The
/// velocity grid (16², `Vmax = 1`) is fixed; only space and time are refined.
pub fn free_streaming(n: usize) -> Result<LevelError> {
    let g = Grid2D::unit(n)?;
    let v = VelocityGrid::new(16, 16, 1.0)?;
    let t_end = 0.2;
    let f0 = |x: f64, y: f64| bump(x, y, (0.5, 0.5), 0.2);
    let mut f = PhaseDistribution::from_fn(g, v, |x, y, _, _| f0(x, y));
    let limit = 0.9 * streaming_dt_limit(&g, &v);
    let steps = (t_end / limit).ceil() as usize;
    let dt = t_end / steps as f64;
    for _ in 0..steps {
        f = advance_free_streaming(&f, dt)?.0;
    }
    let exact = PhaseDistribution::from_fn(g, v, |x, y, a, b| f0(x - a * t_end, y - b * t_end));
    let err: f64 = f.data.iter().zip(&exact.data).map(|(a, b)| (a - b).abs()).sum::<f64>()
        * g.cell_area()
        * v.cell_volume();
    Ok(LevelError { n, h: g.hx(), error: err })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plateau_flow_is_uniform_inside() {
        let g = Grid2D::unit(40).unwrap();
        let psi = NodeField::from_fn(g, |x, y| (y - 0.5) * plateau(x, 0.15, 0.05) * plateau(y, 0.15, 0.05));
        let u = VectorField::from_stream_function(&psi);
        let (x, y) = g.xface_pos(20, 20);
        assert!((x - 0.5).abs() < 1e-12 && (y - 0.5125).abs() < 1e-12);
        assert!((u.ux(20, 20) - 1.0).abs() < 1e-12);
        assert!(u.uy(20, 20).abs() < 1e-12);
        assert!(divergence(&u).max_abs() < 1e-10);
    }

    #[test]
    fn stokes_error_is_small_on_coarse_grid() {
        let e = stokes_steady(16).unwrap();
        assert!(e.error < 0.05, "{e:?}");
    }
}
