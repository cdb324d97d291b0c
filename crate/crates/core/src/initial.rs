//! Regularized initial data: `ρ₀^ε = ρ₀ ∗ θ_ε + ε`, the cut-off mollified
//! momentum and its weighted Hodge split, and the named analytic presets.

use std::f64::consts::PI;

use crate::engine::SimState;
use crate::error::{Error, Result};
use crate::grid::{Grid2D, NodeField, ScalarField, VectorField};
use crate::kinetic::{PhaseDistribution, VelocityGrid};
use crate::linalg::SolverTolerance;
use crate::mollify::Mollifier;
use crate::projection::{hodge_project, HodgeResult};

/// Raw initial data before regularization.
#[derive(Clone, Debug)]
pub struct InitialDataSpec {
    pub rho0: ScalarField,
    pub m0: VectorField,
    pub f0: PhaseDistribution,
    pub epsilon: f64,
}

impl InitialDataSpec {
    /// Check `ρ₀ ≥ 0`, `m₀ = 0` on faces where the face density vanishes,
    /// and `f₀ ≥ 0`.
    pub fn validate(&self) -> Result<()> {
        let g = self.rho0.grid;
        g.check_same(&self.m0.grid)?;
        g.check_same(&self.f0.grid)?;
        check_density(&self.rho0)?;
        if !self.m0.is_finite() {
            return Err(Error::Input("initial momentum has non-finite values".into()));
        }
        let rf = self.rho0.face_average();
        let vacuum_momentum = rf.x.iter().zip(&self.m0.x).chain(rf.y.iter().zip(&self.m0.y)).any(|(r, m)| *r == 0.0 && *m != 0.0);
        if vacuum_momentum {
            return Err(Error::Input("initial momentum must vanish where the density vanishes".into()));
        }
        self.f0.validate()
    }

    /// `∫|m₀|²/ρ₀` on faces with `0/0 := 0`.
    pub fn kinetic_energy_bound(&self) -> f64 {
        let rf = self.rho0.face_average();
        let q = |r: &f64, m: &f64| if *r > 0.0 { m * m / r } else { 0.0 };
        let s: f64 = rf.x.iter().zip(&self.m0.x).map(|(r, m)| q(r, m)).sum::<f64>()
            + rf.y.iter().zip(&self.m0.y).map(|(r, m)| q(r, m)).sum::<f64>();
        s * self.rho0.grid.cell_area()
    }
}

fn check_density(rho: &ScalarField) -> Result<()> {
    if let Some(v) = rho.data.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
        return Err(Error::Input(format!("density must be nonnegative and finite, found {v}")));
    }
    Ok(())
}

/// `ρ₀ ∗ θ_ε + ε` with a renormalized kernel at the walls, so that
/// `ε ≤ ρ₀^ε ≤ max ρ₀ + ε`.
pub fn regularize_density(rho0: &ScalarField, eps: f64) -> Result<ScalarField> {
    check_density(rho0)?;
    let k = Mollifier::new(&rho0.grid, eps)?;
    Ok(k.mollify_scalar(rho0).map(|v| v + eps))
}

/// Smooth cut-off: 0 within `2ε` of the walls, 1 beyond `3ε`, C¹ between.
fn wall_cutoff(d: f64, eps: f64) -> f64 {
    let s = ((d - 2.0 * eps) / eps).clamp(0.0, 1.0);
    s * s * (3.0 - 2.0 * s)
}

/// Mollified initial momentum multiplied by the wall cut-off.
pub fn regularize_momentum(m0: &VectorField, eps: f64) -> Result<VectorField> {
    let g = m0.grid;
    let k = Mollifier::new(&g, eps)?;
    let mut m = k.mollify_vector(m0);
    for j in 0..g.ny {
        for i in 0..=g.nx {
            let (x, y) = g.xface_pos(i, j);
            m.x[j * (g.nx + 1) + i] *= wall_cutoff(g.wall_distance(x, y), eps);
        }
    }
    for j in 0..=g.ny {
        for i in 0..g.nx {
            let (x, y) = g.yface_pos(i, j);
            m.y[j * g.nx + i] *= wall_cutoff(g.wall_distance(x, y), eps);
        }
    }
    Ok(m)
}

/// Regularized initial data together with the Hodge split of the momentum.
#[derive(Clone, Debug)]
pub struct RegularizedData {
    pub rho: ScalarField,
    pub momentum: VectorField,
    pub hodge: HodgeResult,
}

pub fn regularize(spec: &InitialDataSpec, tol: SolverTolerance) -> Result<RegularizedData> {
    spec.validate()?;
    let rho = regularize_density(&spec.rho0, spec.epsilon)?;
    let momentum = regularize_momentum(&spec.m0, spec.epsilon)?;
    let hodge = hodge_project(&momentum, &rho, tol)?;
    Ok(RegularizedData { rho, momentum, hodge })
}

/// Assemble `(ρ₀^ε, u₀^ε, f₀)` at `t = 0`.
pub fn build_initial_state(spec: &InitialDataSpec, tol: SolverTolerance) -> Result<SimState> {
    let reg = regularize(spec, tol)?;
    Ok(SimState {
        t: 0.0,
        step: 0,
        rho: reg.rho,
        u: reg.hodge.u,
        p: ScalarField::zeros(spec.rho0.grid),
        f: spec.f0.clone(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub enum DensityProfile {
    Uniform { value: f64 },
    /// `inside` on the central box `[0.3, 0.7]` (fractions of the domain),
    /// `outside` elsewhere; `outside = 0` gives an initial vacuum.
    Patch { inside: f64, outside: f64 },
    /// `mean (1 + amplitude cos(πx/Lx) cos(πy/Ly))`.
    Smooth { mean: f64, amplitude: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub enum MomentumProfile {
    Zero,
    /// `ρ₀ ω (1 - r²/R²)² (-(y - c₂), x - c₁)` around the domain centre,
    /// built from a stream function so it is discretely divergence free.
    SolidRotation { omega: f64, radius: f64 },
    /// `ρ₀ curl ψ` with `ψ = A (sin(πx/Lx) sin(πy/Ly))⁴`.
    Vortex { amplitude: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub enum ParticleProfile {
    None,
    /// Spatially uniform drifting Maxwellian.
    Maxwellian { density: f64, temperature: f64, drift: [f64; 2] },
    /// Maxwellian times the bump `(1 - r²/R²)²` around the domain centre.
    Cloud { density: f64, temperature: f64, drift: [f64; 2], radius: f64 },
}

/// Analytic initial data.
#[derive(Clone, Debug, PartialEq)]
pub struct Preset {
    pub density: DensityProfile,
    pub momentum: MomentumProfile,
    pub particles: ParticleProfile,
}

pub const PRESET_NAMES: &[&str] = &["uniform", "patch", "solid-rotation", "maxwellian", "decaying-flow"];

impl Preset {
    pub fn named(name: &str) -> Option<Preset> {
        let p = match name {
            "uniform" => Preset {
                density: DensityProfile::Uniform { value: 1.0 },
                momentum: MomentumProfile::Zero,
                particles: ParticleProfile::None,
            },
            "patch" => Preset {
                density: DensityProfile::Patch { inside: 1.0, outside: 0.0 },
                momentum: MomentumProfile::Zero,
                particles: ParticleProfile::None,
            },
            "solid-rotation" => Preset {
                density: DensityProfile::Uniform { value: 1.0 },
                momentum: MomentumProfile::SolidRotation { omega: 1.0, radius: 0.35 },
                particles: ParticleProfile::None,
            },
            "maxwellian" => Preset {
                density: DensityProfile::Uniform { value: 1.0 },
                momentum: MomentumProfile::Zero,
                particles: ParticleProfile::Maxwellian {
                    density: 1.0,
                    temperature: 0.25,
                    drift: [0.5, 0.0],
                },
            },
            "decaying-flow" => Preset {
                density: DensityProfile::Smooth { mean: 1.0, amplitude: 0.3 },
                momentum: MomentumProfile::Vortex { amplitude: 1.0 },
                particles: ParticleProfile::Cloud {
                    density: 0.5,
                    temperature: 0.1,
                    drift: [0.3, -0.2],
                    radius: 0.3,
                },
            },
            _ => return None,
        };
        Some(p)
    }

    pub fn density_field(&self, g: Grid2D) -> ScalarField {
        match self.density {
            DensityProfile::Uniform { value } => ScalarField::constant(g, value),
            DensityProfile::Patch { inside, outside } => ScalarField::from_fn(g, |x, y| {
                let (a, b) = (x / g.lx, y / g.ly);
                if (0.3..=0.7).contains(&a) && (0.3..=0.7).contains(&b) {
                    inside
                } else {
                    outside
                }
            }),
            DensityProfile::Smooth { mean, amplitude } => ScalarField::from_fn(g, |x, y| {
                mean * (1.0 + amplitude * (PI * x / g.lx).cos() * (PI * y / g.ly).cos())
            }),
        }
    }

    /// Velocity field carried by the momentum profile (before weighting by
    /// the density).
    pub fn velocity_field(&self, g: Grid2D) -> VectorField {
        let (cx, cy) = (0.5 * g.lx, 0.5 * g.ly);
        match self.momentum {
            MomentumProfile::Zero => VectorField::zeros(g),
            MomentumProfile::SolidRotation { omega, radius } => {
                // ψ(r) with ψ'(r) = -ω r (1 - r²/R²)², constant outside R.
                let psi = NodeField::from_fn(g, |x, y| {
                    let z = (((x - cx).powi(2) + (y - cy).powi(2)) / (radius * radius)).min(1.0);
                    -omega * radius * radius / 6.0 * (1.0 - (1.0 - z).powi(3))
                });
                VectorField::from_stream_function(&psi)
            }
            MomentumProfile::Vortex { amplitude } => {
                let psi = NodeField::from_fn(g, |x, y| {
                    amplitude / PI * ((PI * x / g.lx).sin() * (PI * y / g.ly).sin()).powi(4)
                });
                VectorField::from_stream_function(&psi)
            }
        }
    }

    pub fn distribution(&self, g: Grid2D, v: VelocityGrid) -> PhaseDistribution {
        let (cx, cy) = (0.5 * g.lx, 0.5 * g.ly);
        let (lo_x, hi_x, lo_y, hi_y) = (v.vx(0), v.vx(v.nvx - 1), v.vy(0), v.vy(v.nvy - 1));
        let inside_box = |a: f64, b: f64| a > lo_x && a < hi_x && b > lo_y && b < hi_y;
        let maxwellian = move |a: f64, b: f64, t: f64, d: [f64; 2]| {
            if inside_box(a, b) {
                (-((a - d[0]).powi(2) + (b - d[1]).powi(2)) / (2.0 * t)).exp() / (2.0 * PI * t)
            } else {
                0.0
            }
        };
        match self.particles {
            ParticleProfile::None => PhaseDistribution::zeros(g, v),
            ParticleProfile::Maxwellian { density, temperature, drift } => {
                PhaseDistribution::from_fn(g, v, |_, _, a, b| density * maxwellian(a, b, temperature, drift))
            }
            ParticleProfile::Cloud { density, temperature, drift, radius } => PhaseDistribution::from_fn(g, v, |x, y, a, b| {
                let z = ((x - cx).powi(2) + (y - cy).powi(2)) / (radius * radius);
                if z >= 1.0 {
                    0.0
                } else {
                    density * (1.0 - z).powi(2) * maxwellian(a, b, temperature, drift)
                }
            }),
        }
    }

    /// Raw data on the given grids.
    pub fn build(&self, g: Grid2D, v: VelocityGrid, epsilon: f64) -> InitialDataSpec {
        let rho0 = self.density_field(g);
        let m0 = self.velocity_field(g).hadamard(&rho0.face_average());
        InitialDataSpec {
            rho0,
            m0,
            f0: self.distribution(g, v),
            epsilon,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::divergence;
    use crate::projection::hodge_energy_terms;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn vgrid() -> VelocityGrid {
        VelocityGrid::new(8, 8, 2.0).unwrap()
    }

    #[test]
    fn zero_density_becomes_floor() {
        let g = Grid2D::unit(32).unwrap();
        let r = regularize_density(&ScalarField::zeros(g), 0.1).unwrap();
        assert!(r.data.iter().all(|v| (v - 0.1).abs() < 1e-15));
    }

    #[test]
    fn unit_density_shifted_by_eps() {
        let g = Grid2D::unit(40).unwrap();
        let r = regularize_density(&ScalarField::constant(g, 1.0), 0.05).unwrap();
        assert!(r.data.iter().all(|v| (v - 1.05).abs() < 1e-14));
    }

    #[test]
    fn patch_density_bounds_match_direct_convolution() {
        let g = Grid2D::unit(32).unwrap();
        let eps = 0.1;
        let rho0 = Preset::named("patch").unwrap().density_field(g);
        let r = regularize_density(&rho0, eps).unwrap();
        assert!(r.min() >= eps && r.max() <= 1.0 + eps);
        let (i, j) = (9, 13);
        let (xc, yc) = g.cell_center(i, j);
        let (mut num, mut den) = (0.0, 0.0);
        for jj in 0..g.ny {
            for ii in 0..g.nx {
                let (x, y) = g.cell_center(ii, jj);
                let q = ((x - xc).powi(2) + (y - yc).powi(2)) / (eps * eps);
                if q < 1.0 {
                    num += (1.0 - q).powi(2) * rho0.at(ii, jj);
                    den += (1.0 - q).powi(2);
                }
            }
        }
        assert!((r.at(i, j) - (num / den + eps)).abs() < 1e-13);
    }

    #[test]
    fn negative_density_rejected() {
        let g = Grid2D::unit(16).unwrap();
        let mut rho = ScalarField::constant(g, 1.0);
        rho.data[3] = -0.5;
        assert!(matches!(regularize_density(&rho, 0.15), Err(Error::Input(_))));
    }

    #[test]
    fn hodge_of_solenoidal_momentum_with_unit_density() {
        let g = Grid2D::unit(32).unwrap();
        let m = Preset::named("solid-rotation").unwrap().velocity_field(g);
        let h = hodge_project(&m, &ScalarField::constant(g, 1.0), SolverTolerance::default()).unwrap();
        assert!(h.u.sub(&m).max_abs() < 1e-10);
        assert!(h.q.max_abs() < 1e-10);
    }

    #[test]
    fn hodge_of_gradient_is_potential() {
        let g = Grid2D::unit(24).unwrap();
        let phi = ScalarField::from_fn(g, |x, y| (PI * x).cos() * (PI * y).cos() + x * y);
        let m = crate::grid::gradient(&phi);
        let h = hodge_project(&m, &ScalarField::constant(g, 1.0), SolverTolerance::default()).unwrap();
        assert!(h.u.max_abs() < 1e-9);
    }

    #[test]
    fn random_hodge_orthogonality_and_idempotence() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let g = Grid2D::new(20, 16, 1.0, 0.8).unwrap();
        for _ in 0..10 {
            let mut m = VectorField::zeros(g);
            for v in m.x.iter_mut().chain(m.y.iter_mut()) {
                *v = rng.gen_range(-1.0..1.0);
            }
            let rho = ScalarField::from_fn(g, |_, _| rng.gen_range(0.5..2.0));
            let h = hodge_project(&m, &rho, SolverTolerance::default()).unwrap();
            let (a, b, c) = hodge_energy_terms(&m, &rho, &h);
            assert!(((a + b) - c).abs() <= 1e-8 * c, "{a} + {b} vs {c}");
            assert!(h.divergence_residual <= 1e-10);
            let again = hodge_project(&h.u.hadamard(&rho.face_average()), &rho, SolverTolerance::default()).unwrap();
            assert!(again.u.sub(&h.u).max_abs() < 1e-9);
            assert!(again.q.max_abs() < 1e-9);
        }
    }

    #[test]
    fn resting_state_has_zero_velocity() {
        let g = Grid2D::unit(16).unwrap();
        let spec = Preset::named("uniform").unwrap().build(g, vgrid(), 0.15);
        let s = build_initial_state(&spec, SolverTolerance::default()).unwrap();
        assert_eq!(s.u.max_abs(), 0.0);
        assert!(s.rho.data.iter().all(|v| (v - 1.15).abs() < 1e-14));
    }

    #[test]
    fn solid_rotation_state_matches_rotation() {
        let g = Grid2D::unit(64).unwrap();
        let eps = 1.0 / 32.0;
        let preset = Preset::named("solid-rotation").unwrap();
        let s = build_initial_state(&preset.build(g, vgrid(), eps), SolverTolerance::default()).unwrap();
        let rot = preset.velocity_field(g);
        assert!(divergence(&s.u).max_abs() < 1e-10);
        // Mollification error plus the density floor: u = m/(1 + ε).
        let mut expected = rot.clone();
        expected.scale(1.0 / (1.0 + eps));
        assert!(s.u.sub(&expected).max_abs() < 0.05 * rot.max_abs());
    }

    #[test]
    fn built_energy_bounded_by_initial_energy() {
        let g = Grid2D::unit(32).unwrap();
        let v = VelocityGrid::new(16, 16, 2.5).unwrap();
        for name in PRESET_NAMES {
            let spec = Preset::named(name).unwrap().build(g, v, 0.07);
            let s = build_initial_state(&spec, SolverTolerance::default()).unwrap();
            let rf = s.rho.face_average();
            let e_fluid = s.u.hadamard(&rf).dot(&s.u);
            let bound = spec.kinetic_energy_bound();
            assert!(e_fluid <= bound * (1.0 + 1e-12) + 1e-14, "{name}: {e_fluid} > {bound}");
        }
    }

    #[test]
    fn vacuum_momentum_rejected() {
        let g = Grid2D::unit(16).unwrap();
        let mut spec = Preset::named("patch").unwrap().build(g, vgrid(), 0.15);
        spec.m0.x[1] = 1.0;
        assert!(matches!(spec.validate(), Err(Error::Input(_))));
    }
}
