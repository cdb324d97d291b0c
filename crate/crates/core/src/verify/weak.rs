//! Space-time residuals of the weak momentum and Vlasov equations,
//! accumulated snapshot by snapshot with the trapezoidal rule in time and
//! the midpoint rule in space and velocity.

use crate::engine::SimState;
use crate::error::{Error, Result};
use crate::kinetic::{compute_moments, regularizer};
use crate::mollify::mollified_velocity;

use super::testfn::{time_cutoff, TestFunctionSpec, VelocityTest};

/// Model parameters entering the residuals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeakParams {
    pub epsilon: f64,
    pub delta: f64,
    pub mu: f64,
}

/// Uniform-cadence trapezoid bookkeeping shared by both residuals.
#[derive(Clone, Debug, Default)]
struct TimeQuadrature {
    last_t: Option<f64>,
    interval: Option<f64>,
    first_integrand: f64,
    sum: f64,
    initial_term: f64,
    count: usize,
    /// Same quadrature applied to the pointwise absolute integrands.
    first_abs: f64,
    abs_sum: f64,
}

impl TimeQuadrature {
    fn advance(&mut self, t: f64) -> Result<()> {
        if let Some(prev) = self.last_t {
            let d = t - prev;
            match self.interval {
                None if d > 0.0 => self.interval = Some(d),
                Some(h) if (d - h).abs() <= 1e-9 * h => {}
                _ => {
                    return Err(Error::Input(format!(
                        "snapshots must have a uniform positive cadence (t = {prev} then {t})"
                    )))
                }
            }
        }
        self.last_t = Some(t);
        Ok(())
    }

    fn add(&mut self, integrand: f64, abs: f64) {
        if self.count == 0 {
            self.first_integrand = integrand;
            self.first_abs = abs;
        } else {
            self.sum += integrand;
            self.abs_sum += abs;
        }
        self.count += 1;
    }

    /// `|initial term| + ∫ ∫|integrand|`, the size the residual is measured against.
    fn magnitude(&self) -> f64 {
        self.initial_term.abs() + self.interval.unwrap_or(0.0) * (0.5 * self.first_abs + self.abs_sum)
    }

    fn value(&self, t_end: f64) -> Result<f64> {
        if self.count < 2 {
            return Err(Error::Input(format!(
                "weak residual needs at least 2 snapshots, got {}",
                self.count
            )));
        }
        let last = self.last_t.unwrap_or(0.0);
        if last < t_end * (1.0 - 1e-9) {
            return Err(Error::Input(format!(
                "snapshots end at t = {last} before the test-function horizon {t_end}"
            )));
        }
        let h = self.interval.unwrap_or(0.0);
        // The integrand vanishes at t_end, so the end weight is irrelevant.
        Ok(self.initial_term + h * (0.5 * self.first_integrand + self.sum))
    }
}

/// Residual of
/// `-∫m₀·φ(0) + ∫∫[-ρu·∂tφ - (ρu⊗u_ε):∇φ - μ u·Δφ + ρ(e u - g)·φ]`
/// for a divergence-free `φ` vanishing on the walls.
pub struct MomentumResidual {
    spec: TestFunctionSpec,
    params: WeakParams,
    tests: Vec<VelocityTest>,
    quad: TimeQuadrature,
}

impl MomentumResidual {
    pub fn new(spec: TestFunctionSpec, params: WeakParams) -> Self {
        MomentumResidual {
            spec,
            params,
            tests: Vec::new(),
            quad: TimeQuadrature::default(),
        }
    }

    pub fn push(&mut self, s: &SimState) -> Result<()> {
        self.quad.advance(s.t)?;
        let g = s.grid();
        if self.tests.is_empty() {
            self.tests = (0..g.n_cells())
                .map(|c| {
                    let (x, y) = g.cell_center(c % g.nx, c / g.nx);
                    self.spec.velocity_test(x, y)
                })
                .collect();
        }
        let (chi, dchi) = time_cutoff(s.t, self.spec.t_end);
        let (ux, uy) = s.u.at_centers();
        let area = g.cell_area();
        if self.quad.count == 0 {
            let m0: f64 = (0..g.n_cells())
                .map(|c| s.rho.data[c] * (ux.data[c] * self.tests[c].phi[0] + uy.data[c] * self.tests[c].phi[1]))
                .sum();
            self.quad.initial_term = -m0 * area;
        }
        if chi == 0.0 && dchi == 0.0 {
            self.quad.add(0.0, 0.0);
            return Ok(());
        }
        let (ex, ey) = mollified_velocity(&s.u, self.params.epsilon)?.at_centers();
        let drag = if s.f.max() > 0.0 {
            let m = compute_moments(&s.f);
            let r = regularizer(&m, self.params.delta)?;
            Some((m, r))
        } else {
            None
        };
        let mut acc = 0.0;
        let mut abs = 0.0;
        for (c, t) in self.tests.iter().enumerate() {
            let rho = s.rho.data[c];
            let u = [ux.data[c], uy.data[c]];
            let ue = [ex.data[c], ey.data[c]];
            let mut v = -rho * (u[0] * t.phi[0] + u[1] * t.phi[1]) * dchi;
            let mut conv = 0.0;
            for i in 0..2 {
                for j in 0..2 {
                    conv += u[i] * ue[j] * t.grad[i][j];
                }
            }
            v -= chi * rho * conv;
            v -= chi * self.params.mu * (u[0] * t.lap[0] + u[1] * t.lap[1]);
            if let Some((m, r)) = &drag {
                let rr = r.r.data[c];
                let fx = rr * (m.m0.data[c] * u[0] - m.m1x.data[c]);
                let fy = rr * (m.m0.data[c] * u[1] - m.m1y.data[c]);
                v += chi * rho * (fx * t.phi[0] + fy * t.phi[1]);
            }
            acc += v;
            abs += v.abs();
        }
        self.quad.add(acc * area, abs * area);
        Ok(())
    }

    pub fn value(&self) -> Result<f64> {
        self.quad.value(self.spec.t_end)
    }

    pub fn magnitude(&self) -> f64 {
        self.quad.magnitude()
    }
}

/// Residual of `-∫∫f₀φ(0) - ∫∫∫f(∂tφ + v·∇xφ + R_δ ρ(u - v)·∇vφ)` for
/// `φ = χ(t) A(x) B(v)`.
pub struct VlasovResidual {
    spec: TestFunctionSpec,
    params: WeakParams,
    a: Vec<(f64, [f64; 2])>,
    b: Vec<(f64, f64, f64)>,
    quad: TimeQuadrature,
}

impl VlasovResidual {
    pub fn new(spec: TestFunctionSpec, params: WeakParams) -> Self {
        VlasovResidual {
            spec,
            params,
            a: Vec::new(),
            b: Vec::new(),
            quad: TimeQuadrature::default(),
        }
    }

    pub fn push(&mut self, s: &SimState) -> Result<()> {
        self.quad.advance(s.t)?;
        let g = s.grid();
        let v = s.f.vgrid;
        let nc = g.n_cells();
        if self.a.is_empty() {
            self.a = (0..nc)
                .map(|c| {
                    let (x, y) = g.cell_center(c % g.nx, c / g.nx);
                    self.spec.spatial_weight(x, y)
                })
                .collect();
            self.b = (0..v.n())
                .map(|k| self.spec.velocity.eval(v.vx(k % v.nvx), v.vy(k / v.nvx)))
                .collect();
        }
        let (chi, dchi) = time_cutoff(s.t, self.spec.t_end);
        let dvol = g.cell_area() * v.cell_volume();
        if self.quad.count == 0 {
            let mut m = 0.0;
            for (k, b) in self.b.iter().enumerate() {
                if b.0 != 0.0 {
                    let slab = &s.f.data[k * nc..(k + 1) * nc];
                    m += b.0 * slab.iter().zip(&self.a).map(|(f, a)| f * a.0).sum::<f64>();
                }
            }
            self.quad.initial_term = -m * dvol;
        }
        if (chi == 0.0 && dchi == 0.0) || s.f.max() == 0.0 {
            self.quad.add(0.0, 0.0);
            return Ok(());
        }
        let mom = compute_moments(&s.f);
        let r = regularizer(&mom, self.params.delta)?;
        let (ux, uy) = s.u.at_centers();
        let mut acc = 0.0;
        let mut abs = 0.0;
        for (k, &(b, bx, by)) in self.b.iter().enumerate() {
            if b == 0.0 && bx == 0.0 && by == 0.0 {
                continue;
            }
            let (vx, vy) = (v.vx(k % v.nvx), v.vy(k / v.nvx));
            let slab = &s.f.data[k * nc..(k + 1) * nc];
            let mut part = 0.0;
            let mut part_abs = 0.0;
            for (c, f) in slab.iter().enumerate() {
                if *f == 0.0 {
                    continue;
                }
                let (a, ga) = self.a[c];
                let kappa = r.r.data[c] * s.rho.data[c];
                let drift = kappa * ((ux.data[c] - vx) * bx + (uy.data[c] - vy) * by);
                let w = f * (dchi * a * b + chi * (vx * ga[0] + vy * ga[1]) * b + chi * a * drift);
                part += w;
                part_abs += w.abs();
            }
            acc += part;
            abs += part_abs;
        }
        self.quad.add(-acc * dvol, abs * dvol);
        Ok(())
    }

    pub fn value(&self) -> Result<f64> {
        self.quad.value(self.spec.t_end)
    }

    pub fn magnitude(&self) -> f64 {
        self.quad.magnitude()
    }
}

/// Momentum residual over stored snapshots of uniform cadence.
pub fn weak_residual_momentum(traj: &[SimState], spec: &TestFunctionSpec, params: WeakParams) -> Result<f64> {
    let mut r = MomentumResidual::new(spec.clone(), params);
    for s in traj {
        r.push(s)?;
    }
    r.value()
}

/// Vlasov residual over stored snapshots of uniform cadence.
pub fn weak_residual_vlasov(traj: &[SimState], spec: &TestFunctionSpec, params: WeakParams) -> Result<f64> {
    let mut r = VlasovResidual::new(spec.clone(), params);
    for s in traj {
        r.push(s)?;
    }
    r.value()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid2D;
    use crate::kinetic::VelocityGrid;

    fn zero_traj(n: usize) -> Vec<SimState> {
        let g = Grid2D::unit(12).unwrap();
        let v = VelocityGrid::new(8, 8, 2.0).unwrap();
        (0..n)
            .map(|k| {
                let mut s = SimState::at_rest(g, v, 1.0);
                s.t = 0.1 * k as f64;
                s.step = k;
                s
            })
            .collect()
    }

    const P: WeakParams = WeakParams {
        epsilon: 0.2,
        delta: 0.1,
        mu: 0.1,
    };

    #[test]
    fn zero_trajectory_has_zero_residual() {
        let traj = zero_traj(6);
        let spec = TestFunctionSpec::random(1, 1.0, 1.0, 0.5, 1.5, true);
        assert_eq!(weak_residual_momentum(&traj, &spec, P).unwrap(), 0.0);
        assert_eq!(weak_residual_vlasov(&traj, &spec, P).unwrap(), 0.0);
    }

    #[test]
    fn insufficient_or_irregular_snapshots_rejected() {
        let spec = TestFunctionSpec::random(1, 1.0, 1.0, 0.5, 1.5, true);
        assert!(weak_residual_momentum(&zero_traj(1), &spec, P).is_err());
        let mut t = zero_traj(6);
        t[3].t = 0.31;
        assert!(weak_residual_vlasov(&t, &spec, P).is_err());
        let short = zero_traj(3);
        assert!(weak_residual_momentum(&short, &spec, P).is_err());
    }
}
