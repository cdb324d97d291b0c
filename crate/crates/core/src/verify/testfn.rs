//! Closed-form test functions for the weak forms.
//!
//! Velocity tests are `φ = χ(t) curl ψ` with
//! `ψ = sin(πx/Lx) sin(πy/Ly) Σ a sin(mπx/Lx) sin(nπy/Ly)`, so `φ` and `∇ψ`
//! vanish on the walls. Kinetic tests are `χ(t) A(x) B(v)` with `A` a sine
//! sum and `B = (1 - |v|²/V²)³ (c0 + c1 vx + c2 vy)` supported in `|v| < V`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `(1 - t/T)³` and its derivative.
pub fn time_cutoff(t: f64, t_end: f64) -> (f64, f64) {
    if t_end <= 0.0 || t >= t_end {
        return (0.0, 0.0);
    }
    let s = 1.0 - t / t_end;
    (s * s * s, -3.0 * s * s / t_end)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mode {
    pub m: u32,
    pub n: u32,
    pub amp: f64,
}

/// Kinetic factor `B(v)`; `None` coefficients mean `B ≡ 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct VelocityWeight {
    pub radius: f64,
    pub coeffs: Option<[f64; 3]>,
}

impl VelocityWeight {
    /// `(B, ∂B/∂vx, ∂B/∂vy)`.
    pub fn eval(&self, vx: f64, vy: f64) -> (f64, f64, f64) {
        let Some([c0, c1, c2]) = self.coeffs else {
            return (1.0, 0.0, 0.0);
        };
        let s = 1.0 - (vx * vx + vy * vy) / (self.radius * self.radius);
        if s <= 0.0 {
            return (0.0, 0.0, 0.0);
        }
        let lin = c0 + c1 * vx + c2 * vy;
        let s2 = s * s;
        let ds = -6.0 * s2 / (self.radius * self.radius);
        (s2 * s * lin, ds * vx * lin + s2 * s * c1, ds * vy * lin + s2 * s * c2)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TestFunctionSpec {
    pub seed: u64,
    pub lx: f64,
    pub ly: f64,
    pub t_end: f64,
    /// Modes of the stream function (velocity tests) or of `A(x)`.
    pub modes: Vec<Mode>,
    pub velocity: VelocityWeight,
}

/// k-th derivative of `cos(p x)`.
fn dcos(p: f64, x: f64, k: u32) -> f64 {
    p.powi(k as i32) * (p * x + k as f64 * std::f64::consts::FRAC_PI_2).cos()
}

/// k-th derivative of `sin(πx/L) sin(mπx/L) = (cos((m-1)πx/L) - cos((m+1)πx/L)) / 2`.
fn bump_mode(m: u32, l: f64, x: f64, k: u32) -> f64 {
    let w = std::f64::consts::PI / l;
    0.5 * (dcos((m as f64 - 1.0) * w, x, k) - dcos((m as f64 + 1.0) * w, x, k))
}

/// k-th derivative of `sin(mπx/L)`.
fn sine_mode(m: u32, l: f64, x: f64, k: u32) -> f64 {
    let p = m as f64 * std::f64::consts::PI / l;
    p.powi(k as i32) * (p * x + k as f64 * std::f64::consts::FRAC_PI_2).sin()
}

/// Spatial values of a velocity test field at one point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct VelocityTest {
    pub phi: [f64; 2],
    /// `grad[i][j] = ∂_j φ_i`.
    pub grad: [[f64; 2]; 2],
    pub lap: [f64; 2],
}

impl TestFunctionSpec {
    /// Random spec: up to 4 modes per axis, amplitudes in `[-1, 1]`.
    /// With `kinetic` the velocity weight is a random linear polynomial
    /// times the cut-off of radius `vradius`; otherwise `B ≡ 1`.
    pub fn random(seed: u64, lx: f64, ly: f64, t_end: f64, vradius: f64, kinetic: bool) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let count = rng.gen_range(1..=3);
        let modes = (0..count)
            .map(|_| Mode {
                m: rng.gen_range(1..=4),
                n: rng.gen_range(1..=4),
                amp: rng.gen_range(-1.0..1.0),
            })
            .collect();
        let coeffs = kinetic.then(|| [rng.gen_range(0.5..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]);
        TestFunctionSpec {
            seed,
            lx,
            ly,
            t_end,
            modes,
            velocity: VelocityWeight { radius: vradius, coeffs },
        }
    }

    /// Same modes with every amplitude scaled.
    pub fn scaled(&self, a: f64) -> Self {
        let mut s = self.clone();
        for m in &mut s.modes {
            m.amp *= a;
        }
        s
    }

    /// `∂^(kx,ky) ψ`.
    fn psi(&self, x: f64, y: f64, kx: u32, ky: u32) -> f64 {
        self.modes
            .iter()
            .map(|md| md.amp * bump_mode(md.m, self.lx, x, kx) * bump_mode(md.n, self.ly, y, ky))
            .sum()
    }

    /// `curl ψ`, its gradient and Laplacian (time factor excluded).
    pub fn velocity_test(&self, x: f64, y: f64) -> VelocityTest {
        let p = |a, b| self.psi(x, y, a, b);
        let (pxx, pxy, pyy) = (p(2, 0), p(1, 1), p(0, 2));
        VelocityTest {
            phi: [p(0, 1), -p(1, 0)],
            grad: [[pxy, pyy], [-pxx, -pxy]],
            lap: [p(2, 1) + p(0, 3), -p(3, 0) - p(1, 2)],
        }
    }

    /// `A(x)` and its gradient for kinetic tests.
    pub fn spatial_weight(&self, x: f64, y: f64) -> (f64, [f64; 2]) {
        let mut a = 0.0;
        let mut g = [0.0; 2];
        for md in &self.modes {
            let (sx, sy) = (sine_mode(md.m, self.lx, x, 0), sine_mode(md.n, self.ly, y, 0));
            a += md.amp * sx * sy;
            g[0] += md.amp * sine_mode(md.m, self.lx, x, 1) * sy;
            g[1] += md.amp * sx * sine_mode(md.n, self.ly, y, 1);
        }
        (a, g)
    }
}
