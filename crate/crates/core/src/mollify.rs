//! Compactly supported mollification and the interior-truncated mollified
//! velocity that transports the density.

use crate::error::{Error, Result};
use crate::grid::{Grid2D, NodeField, ScalarField, VectorField};

/// How lattice points outside Ω are treated by the convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Extension {
    /// Divide by the kernel mass that falls inside Ω. Preserves constants and
    /// keeps the result within the input bounds.
    Renormalize,
    /// Treat values outside Ω as 0.
    Zero,
}

/// Discrete quartic bump `θ_ε(x) ∝ (1 - |x|²/ε²)²`, normalised so that
/// `Σ w · hx · hy = 1`.
#[derive(Clone, Debug)]
pub struct Mollifier {
    pub radius: f64,
    hx: f64,
    hy: f64,
    stencil: Vec<(isize, isize, f64)>,
}

impl Mollifier {
    /// Kernel of radius `eps` on `grid`. Requires `eps ≥ 2 max(hx, hy)` and a
    /// support that fits inside Ω.
    pub fn new(grid: &Grid2D, eps: f64) -> Result<Self> {
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(Error::config("physics.epsilon", format!("mollifier radius must be positive, got {eps}")));
        }
        let h = grid.hx().max(grid.hy());
        if eps < 2.0 * h * (1.0 - 1e-12) {
            return Err(Error::config(
                "physics.epsilon",
                format!("mollifier radius {eps} under-resolved: need at least 2*max(hx,hy) = {}", 2.0 * h),
            ));
        }
        if 2.0 * eps > grid.lx.min(grid.ly) {
            return Err(Error::config(
                "physics.epsilon",
                format!("mollifier support 2*{eps} exceeds the domain {}x{}", grid.lx, grid.ly),
            ));
        }
        Ok(Self::build(grid, eps))
    }

    /// Kernel without the resolution check. A radius below one cell
    /// degenerates to the identity.
    pub(crate) fn build(grid: &Grid2D, radius: f64) -> Self {
        let (hx, hy) = (grid.hx(), grid.hy());
        let ax = (radius / hx).floor() as isize;
        let ay = (radius / hy).floor() as isize;
        let mut stencil = Vec::new();
        for b in -ay..=ay {
            for a in -ax..=ax {
                let r2 = ((a as f64 * hx).powi(2) + (b as f64 * hy).powi(2)) / (radius * radius);
                if r2 < 1.0 {
                    stencil.push((a, b, (1.0 - r2).powi(2)));
                }
            }
        }
        let total: f64 = stencil.iter().map(|s| s.2).sum::<f64>() * hx * hy;
        for s in &mut stencil {
            s.2 /= total;
        }
        Mollifier {
            radius,
            hx,
            hy,
            stencil,
        }
    }

    /// `Σ w · hx · hy`; equals 1 up to round-off.
    pub fn mass(&self) -> f64 {
        self.stencil.iter().map(|s| s.2).sum::<f64>() * self.hx * self.hy
    }

    pub fn weights(&self) -> impl Iterator<Item = (isize, isize, f64)> + '_ {
        self.stencil.iter().copied()
    }

    /// Convolve a `w x h` lattice with the kernel.
    pub fn convolve_lattice(&self, data: &[f64], w: usize, h: usize, ext: Extension) -> Vec<f64> {
        let area = self.hx * self.hy;
        let mut out = vec![0.0; data.len()];
        for j in 0..h {
            for i in 0..w {
                let mut acc = 0.0;
                let mut mass = 0.0;
                for &(a, b, wt) in &self.stencil {
                    let ii = i as isize + a;
                    let jj = j as isize + b;
                    if ii < 0 || jj < 0 || ii >= w as isize || jj >= h as isize {
                        continue;
                    }
                    acc += wt * data[jj as usize * w + ii as usize];
                    mass += wt;
                }
                out[j * w + i] = match ext {
                    Extension::Renormalize => acc / mass,
                    Extension::Zero => acc * area,
                };
            }
        }
        out
    }

    pub fn mollify_scalar(&self, f: &ScalarField) -> ScalarField {
        let g = f.grid;
        ScalarField {
            grid: g,
            data: self.convolve_lattice(&f.data, g.nx, g.ny, Extension::Renormalize),
        }
    }

    pub fn mollify_vector(&self, u: &VectorField) -> VectorField {
        let g = u.grid;
        VectorField {
            grid: g,
            x: self.convolve_lattice(&u.x, g.nx + 1, g.ny, Extension::Renormalize),
            y: self.convolve_lattice(&u.y, g.nx, g.ny + 1, Extension::Renormalize),
        }
    }
}

/// Interior-truncated mollified velocity `u_ε`.
///
/// The stream function of `u` is cut off outside `Ω_ε = {dist(x, ∂Ω) > ε}`,
/// mollified with radius `ε/2`, and differentiated with the discrete curl.
/// The result is divergence free to round-off and vanishes within `ε/2` of
/// the walls.
pub fn mollified_velocity(u: &VectorField, eps: f64) -> Result<VectorField> {
    let g = u.grid;
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::config("physics.epsilon", format!("must be positive, got {eps}")));
    }
    let psi = NodeField::stream_function_of(u);
    let mut cut = psi.clone();
    let mut interior_nodes = 0usize;
    for j in 0..=g.ny {
        for i in 0..=g.nx {
            let (x, y) = g.node_pos(i, j);
            if g.wall_distance(x, y) > eps {
                interior_nodes += 1;
            } else {
                cut.data[j * (g.nx + 1) + i] = 0.0;
            }
        }
    }
    if interior_nodes == 0 {
        return Err(Error::config(
            "physics.epsilon",
            format!("truncated interior is empty for eps = {eps} on a {}x{} domain", g.lx, g.ly),
        ));
    }
    let kernel = Mollifier::build(&g, 0.5 * eps);
    let smoothed = NodeField {
        grid: g,
        data: kernel.convolve_lattice(&cut.data, g.nx + 1, g.ny + 1, Extension::Zero),
    };
    Ok(VectorField::from_stream_function(&smoothed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::divergence;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn kernel_is_normalised_and_nonnegative() {
        let g = Grid2D::new(40, 30, 1.0, 0.9).unwrap();
        for eps in [0.07, 0.1, 0.2] {
            let m = Mollifier::new(&g, eps).unwrap();
            assert!((m.mass() - 1.0).abs() < 1e-12);
            assert!(m.weights().all(|w| w.2 >= 0.0));
            let rmax = m
                .weights()
                .map(|(a, b, _)| ((a as f64 * g.hx()).powi(2) + (b as f64 * g.hy()).powi(2)).sqrt())
                .fold(0.0, f64::max);
            assert!(rmax <= eps);
        }
    }

    #[test]
    fn rejects_oversized_or_unresolved_kernels() {
        let g = Grid2D::unit(16).unwrap();
        assert!(matches!(Mollifier::new(&g, 0.6), Err(Error::Config { .. })));
        assert!(matches!(Mollifier::new(&g, 0.05), Err(Error::Config { .. })));
    }

    #[test]
    fn constants_are_preserved() {
        let g = Grid2D::unit(24).unwrap();
        let m = Mollifier::new(&g, 0.15).unwrap();
        let c = ScalarField::constant(g, 2.5);
        let out = m.mollify_scalar(&c);
        assert!(out.data.iter().all(|v| (v - 2.5).abs() < 1e-13));
    }

    #[test]
    fn point_mass_gives_kernel_shape() {
        let g = Grid2D::unit(32).unwrap();
        let m = Mollifier::new(&g, 0.125).unwrap();
        let mut f = ScalarField::zeros(g);
        let c = f.idx(16, 16);
        f.data[c] = 1.0;
        let out = m.convolve_lattice(&f.data, g.nx, g.ny, Extension::Zero);
        for (a, b, w) in m.weights() {
            let k = ((16 + b) as usize) * g.nx + (16 + a) as usize;
            assert!((out[k] - w * g.cell_area()).abs() < 1e-15);
        }
        let total: f64 = out.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bounds_preserved_on_random_fields() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = Grid2D::new(20, 16, 1.0, 0.8).unwrap();
        let m = Mollifier::new(&g, 0.13).unwrap();
        for _ in 0..100 {
            let f = ScalarField::from_fn(g, |_, _| rng.gen_range(-3.0..5.0));
            let out = m.mollify_scalar(&f);
            // Brute-force convolution oracle.
            let (i, j) = (rng.gen_range(0..g.nx), rng.gen_range(0..g.ny));
            let (xc, yc) = g.cell_center(i, j);
            let (mut num, mut den) = (0.0, 0.0);
            for jj in 0..g.ny {
                for ii in 0..g.nx {
                    let (x, y) = g.cell_center(ii, jj);
                    let r2 = ((x - xc).powi(2) + (y - yc).powi(2)) / (0.13 * 0.13);
                    if r2 < 1.0 {
                        num += (1.0 - r2).powi(2) * f.at(ii, jj);
                        den += (1.0 - r2).powi(2);
                    }
                }
            }
            assert!((out.at(i, j) - num / den).abs() < 1e-12);
            assert!(out.max() <= f.max() + 1e-14);
            assert!(out.min() >= f.min() - 1e-14);
        }
    }

    #[test]
    fn zero_velocity_stays_zero() {
        let g = Grid2D::unit(16).unwrap();
        let ue = mollified_velocity(&VectorField::zeros(g), 0.15).unwrap();
        assert_eq!(ue.max_abs(), 0.0);
    }

    #[test]
    fn uniform_flow_kept_in_interior_and_cut_at_walls() {
        let g = Grid2D::unit(40).unwrap();
        let eps = 0.1;
        let u = VectorField::from_fn(g, |_, _| (1.0, 0.0));
        let ue = mollified_velocity(&u, eps).unwrap();
        for j in 0..g.ny {
            for i in 0..=g.nx {
                let (x, y) = g.xface_pos(i, j);
                let d = g.wall_distance(x, y);
                if d > 1.5 * eps + 2.0 * g.hx() {
                    assert!((ue.ux(i, j) - 1.0).abs() < 1e-12, "({x},{y}) {}", ue.ux(i, j));
                }
                if d < 0.5 * eps {
                    assert_eq!(ue.ux(i, j), 0.0);
                }
            }
        }
        assert!(divergence(&ue).max_abs() < 1e-10);
    }

    #[test]
    fn empty_interior_rejected() {
        let g = Grid2D::unit(8).unwrap();
        let u = VectorField::zeros(g);
        assert!(matches!(mollified_velocity(&u, 0.6), Err(Error::Config { .. })));
    }
}
