//! Density transport by the mollified velocity, `ρ_t + div(ρ u_ε) = 0`, and
//! its characteristics representation `ρ(t, x) = ρ₀(X(0; t, x))` used as an
//! oracle.

use crate::error::{Error, Result};
use crate::grid::{ScalarField, VectorField};
use crate::transport::Lattice;

/// Admissible density step `min(hx, hy) / max|u_ε|` (infinite for `u_ε = 0`).
pub fn density_dt_limit(u_eps: &VectorField) -> f64 {
    let g = u_eps.grid;
    let umax = u_eps.max_abs();
    if umax == 0.0 {
        f64::INFINITY
    } else {
        g.hx().min(g.hy()) / umax
    }
}

/// One conservative finite-volume step (MUSCL/minmod, SSP-RK2, sub-cycled
/// so every Euler stage is a convex combination of neighbouring values).
///
/// The result is clipped to `[min ρ, max ρ]`; with a discretely
/// divergence-free `u_ε` this only removes round-off.
pub fn advance_density(rho: &ScalarField, u_eps: &VectorField, dt: f64) -> Result<ScalarField> {
    let g = rho.grid;
    g.check_same(&u_eps.grid)?;
    if !(dt >= 0.0) || !dt.is_finite() {
        return Err(Error::config("time.dt", format!("time step must be nonnegative, got {dt}")));
    }
    let limit = density_dt_limit(u_eps);
    if dt > limit * (1.0 + 1e-12) {
        return Err(Error::Cfl {
            stage: "density transport",
            dt,
            limit,
        });
    }
    let mut a = u_eps.clone();
    a.zero_wall_normal();
    let lattice = Lattice {
        w: g.nx,
        h: g.ny,
        dx: g.hx(),
        dy: g.hy(),
        ax: &a.x,
        ay: &a.y,
        fixed: None,
    };
    let (lo, hi) = (rho.min(), rho.max());
    let mut out = rho.clone();
    lattice.advance(&mut out.data, dt);
    for v in &mut out.data {
        *v = v.clamp(lo, hi);
    }
    Ok(out)
}

/// Velocity fields stored at increasing times, interpolated linearly in
/// time and bilinearly (per staggered component) in space.
#[derive(Clone, Debug, Default)]
pub struct VelocityHistory {
    times: Vec<f64>,
    fields: Vec<VectorField>,
}

impl VelocityHistory {
    pub fn new() -> Self {
        Self::default()
    }

    /// Append a field; times must be strictly increasing.
    pub fn push(&mut self, t: f64, u: VectorField) -> Result<()> {
        if let Some(&last) = self.times.last() {
            if !(t > last) {
                return Err(Error::Input(format!("history times must increase: {t} after {last}")));
            }
            self.fields[0].grid.check_same(&u.grid)?;
        }
        self.times.push(t);
        self.fields.push(u);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn span(&self) -> Option<(f64, f64)> {
        Some((*self.times.first()?, *self.times.last()?))
    }

    fn check_time(&self, t: f64) -> Result<()> {
        let (start, end) = self.span().ok_or(Error::OutsideHistory { t, start: f64::NAN, end: f64::NAN })?;
        let slack = 1e-12 * (1.0 + end.abs());
        if t < start - slack || t > end + slack {
            return Err(Error::OutsideHistory { t, start, end });
        }
        Ok(())
    }

    /// Velocity at `(x, y)` and time `t`.
    pub fn velocity_at(&self, x: f64, y: f64, t: f64) -> Result<(f64, f64)> {
        self.check_time(t)?;
        if self.times.len() == 1 {
            return Ok(self.fields[0].sample(x, y));
        }
        let k = match self.times.partition_point(|&s| s <= t) {
            0 => 0,
            p => (p - 1).min(self.times.len() - 2),
        };
        let (t0, t1) = (self.times[k], self.times[k + 1]);
        let w = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
        let a = self.fields[k].sample(x, y);
        let b = self.fields[k + 1].sample(x, y);
        Ok(((1.0 - w) * a.0 + w * b.0, (1.0 - w) * a.1 + w * b.1))
    }

    fn max_speed(&self) -> f64 {
        self.fields.iter().map(|u| u.max_abs()).fold(0.0, f64::max)
    }

    fn min_interval(&self) -> f64 {
        self.times.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
    }
}

/// `X(s; t, x)`: the point reached at time `s` by the flow line through `x`
/// at time `t`. Classical RK4 with steps short enough to resolve both the
/// grid (a quarter cell per step) and the time levels of the history.
pub fn trace_characteristic(history: &VelocityHistory, x: [f64; 2], t: f64, s: f64) -> Result<[f64; 2]> {
    history.check_time(t)?;
    history.check_time(s)?;
    if s == t {
        return Ok(x);
    }
    let g = history.fields[0].grid;
    let span = (s - t).abs();
    let speed = history.max_speed();
    let mut n = (4.0 * span / history.min_interval()).ceil().max(1.0);
    if speed > 0.0 {
        n = n.max((4.0 * span * speed / g.hx().min(g.hy())).ceil());
    }
    let n = n as usize;
    let h = (s - t) / n as f64;
    let clamp = |p: [f64; 2]| [p[0].clamp(0.0, g.lx), p[1].clamp(0.0, g.ly)];
    let vel = |p: [f64; 2], tau: f64| history.velocity_at(p[0], p[1], tau).map(|(a, b)| [a, b]);
    let mut p = x;
    for k in 0..n {
        let tau = t + k as f64 * h;
        let k1 = vel(p, tau)?;
        let k2 = vel(clamp([p[0] + 0.5 * h * k1[0], p[1] + 0.5 * h * k1[1]]), tau + 0.5 * h)?;
        let k3 = vel(clamp([p[0] + 0.5 * h * k2[0], p[1] + 0.5 * h * k2[1]]), tau + 0.5 * h)?;
        let k4 = vel(clamp([p[0] + h * k3[0], p[1] + h * k3[1]]), tau + h)?;
        p = clamp([
            p[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            p[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        ]);
    }
    Ok(p)
}

/// Semi-Lagrangian density `ρ(t, x) = ρ₀(X(t₀; t, x))` at every cell centre,
/// where `t₀` is the first time of the history. `ρ₀` is sampled bilinearly,
/// so the result stays within the bounds of `ρ₀`.
pub fn density_via_characteristics(rho0: &ScalarField, history: &VelocityHistory, t: f64) -> Result<ScalarField> {
    let (start, _) = history.span().ok_or(Error::OutsideHistory { t, start: f64::NAN, end: f64::NAN })?;
    history.check_time(t)?;
    rho0.grid.check_same(&history.fields[0].grid)?;
    if t == start {
        return Ok(rho0.clone());
    }
    let g = rho0.grid;
    let mut out = ScalarField::zeros(g);
    for j in 0..g.ny {
        for i in 0..g.nx {
            let (x, y) = g.cell_center(i, j);
            let p = trace_characteristic(history, [x, y], t, start)?;
            out.data[j * g.nx + i] = rho0.sample(p[0], p[1]);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{divergence, Grid2D, NodeField};
    use crate::mollify::mollified_velocity;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn swirl(g: Grid2D, amp: f64) -> VectorField {
        let psi = NodeField::from_fn(g, |x, y| amp * (PI * x).sin().powi(2) * (PI * y).sin().powi(2));
        mollified_velocity(&VectorField::from_stream_function(&psi), 0.1).unwrap()
    }

    #[test]
    fn uniform_density_is_stationary() {
        let g = Grid2D::unit(32).unwrap();
        let u = swirl(g, 1.0);
        let rho = ScalarField::constant(g, 0.7);
        let dt = 0.9 * density_dt_limit(&u);
        let out = advance_density(&rho, &u, dt).unwrap();
        assert!(out.data.iter().all(|v| (v - 0.7).abs() < 1e-15));
    }

    #[test]
    fn random_density_bounds_and_mass() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let g = Grid2D::new(24, 20, 1.0, 0.9).unwrap();
        for _ in 0..100 {
            let amp = rng.gen_range(-2.0..2.0);
            let u = swirl(g, amp);
            assert!(divergence(&u).max_abs() < 1e-10);
            let rho = ScalarField::from_fn(g, |_, _| rng.gen_range(0.0..1.0));
            let dt = rng.gen_range(0.1..1.0) * density_dt_limit(&u).min(1.0);
            let out = advance_density(&rho, &u, dt).unwrap();
            assert!(out.min() >= rho.min() && out.max() <= rho.max());
            assert!((out.integral() - rho.integral()).abs() <= 1e-12 * rho.integral());
        }
    }

    #[test]
    fn cfl_violation_names_dt() {
        let g = Grid2D::unit(16).unwrap();
        let u = swirl(g, 3.0);
        let dt = 2.0 * density_dt_limit(&u);
        match advance_density(&ScalarField::constant(g, 1.0), &u, dt) {
            Err(Error::Cfl { dt: bad, .. }) => assert_eq!(bad, dt),
            other => panic!("{other:?}"),
        }
    }

    fn constant_history(g: Grid2D, vel: (f64, f64), t_end: f64) -> VelocityHistory {
        let mut h = VelocityHistory::new();
        h.push(0.0, VectorField::from_fn(g, |_, _| vel)).unwrap();
        h.push(t_end, VectorField::from_fn(g, |_, _| vel)).unwrap();
        h
    }

    #[test]
    fn zero_velocity_keeps_points() {
        let g = Grid2D::unit(8).unwrap();
        let h = constant_history(g, (0.0, 0.0), 1.0);
        assert_eq!(trace_characteristic(&h, [0.3, 0.6], 1.0, 0.0).unwrap(), [0.3, 0.6]);
    }

    #[test]
    fn constant_flow_shifts_points() {
        let g = Grid2D::unit(8).unwrap();
        let h = constant_history(g, (1.0, 0.0), 1.0);
        let p = trace_characteristic(&h, [0.7, 0.4], 0.5, 0.2).unwrap();
        assert!((p[0] - 0.4).abs() < 1e-14 && (p[1] - 0.4).abs() < 1e-14);
    }

    #[test]
    fn rigid_rotation_keeps_radius() {
        let g = Grid2D::unit(64).unwrap();
        let omega = 2.0 * PI;
        let rot = VectorField::from_fn(g, |x, y| (-omega * (y - 0.5), omega * (x - 0.5)));
        let mut h = VelocityHistory::new();
        h.push(0.0, rot.clone()).unwrap();
        h.push(1.0, rot).unwrap();
        let x = [0.8, 0.5];
        let p = trace_characteristic(&h, x, 0.0, 1.0).unwrap();
        let r0 = 0.3;
        assert!(((p[0] - 0.5).hypot(p[1] - 0.5) - r0).abs() < 1e-8);
        assert!((p[0] - x[0]).abs() < 1e-6 && (p[1] - x[1]).abs() < 1e-6);
    }

    #[test]
    fn times_outside_history_rejected() {
        let g = Grid2D::unit(8).unwrap();
        let h = constant_history(g, (0.0, 0.0), 1.0);
        assert!(matches!(
            trace_characteristic(&h, [0.5, 0.5], 1.5, 0.0),
            Err(Error::OutsideHistory { .. })
        ));
        let rho = ScalarField::constant(g, 1.0);
        assert!(density_via_characteristics(&rho, &h, -0.1).is_err());
    }

    #[test]
    fn characteristics_at_start_return_initial_density() {
        let g = Grid2D::unit(8).unwrap();
        let h = constant_history(g, (0.5, 0.0), 1.0);
        let rho = ScalarField::from_fn(g, |x, y| x + y * y);
        assert_eq!(density_via_characteristics(&rho, &h, 0.0).unwrap(), rho);
    }
}
