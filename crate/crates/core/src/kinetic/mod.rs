//! Phase-space distribution `f(x, v)` on a 2D×2D tensor grid, its velocity
//! moments, the drag regularizer, specular reflection and the Vlasov step.

mod moments;
mod regularizer;
mod specular;
mod vlasov;

pub use moments::{compute_moments, MomentFields};
pub use regularizer::{regularizer, RegularizerField};
pub use specular::specular_reflect;
pub use vlasov::{advance_free_streaming, advance_velocity_space, advance_vlasov, streaming_dt_limit, VlasovReport};

use crate::error::{Error, Result};
use crate::grid::{pairwise_sum, Grid2D};

/// Uniform velocity grid on the symmetric box `[-vmax, vmax]²`.
///
/// Cell centres are computed as `(k + 1/2 - n/2) dv`, so the mirrored cell
/// `n - 1 - k` carries exactly the negated velocity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VelocityGrid {
    pub nvx: usize,
    pub nvy: usize,
    pub vmax: f64,
}

impl VelocityGrid {
    pub fn new(nvx: usize, nvy: usize, vmax: f64) -> Result<Self> {
        if nvx < 4 || nvy < 4 {
            return Err(Error::config(
                "grid.nv",
                format!("velocity grid needs at least 4 cells per axis, got {nvx}x{nvy}"),
            ));
        }
        if !(vmax > 0.0) || !vmax.is_finite() {
            return Err(Error::config("physics.vmax", format!("must be positive and finite, got {vmax}")));
        }
        Ok(VelocityGrid { nvx, nvy, vmax })
    }

    #[inline]
    pub fn dvx(&self) -> f64 {
        2.0 * self.vmax / self.nvx as f64
    }

    #[inline]
    pub fn dvy(&self) -> f64 {
        2.0 * self.vmax / self.nvy as f64
    }

    #[inline]
    pub fn cell_volume(&self) -> f64 {
        self.dvx() * self.dvy()
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.nvx * self.nvy
    }

    #[inline]
    pub fn vx(&self, k: usize) -> f64 {
        (k as f64 + 0.5 - 0.5 * self.nvx as f64) * self.dvx()
    }

    #[inline]
    pub fn vy(&self, k: usize) -> f64 {
        (k as f64 + 0.5 - 0.5 * self.nvy as f64) * self.dvy()
    }

    /// Index of the velocity cell containing `v`, if inside the box.
    pub fn locate(&self, v: [f64; 2]) -> Option<(usize, usize)> {
        let fx = (v[0] + self.vmax) / self.dvx();
        let fy = (v[1] + self.vmax) / self.dvy();
        if fx < 0.0 || fy < 0.0 || fx >= self.nvx as f64 || fy >= self.nvy as f64 {
            return None;
        }
        Some((fx as usize, fy as usize))
    }

    pub fn is_edge(&self, kx: usize, ky: usize) -> bool {
        kx == 0 || ky == 0 || kx + 1 == self.nvx || ky + 1 == self.nvy
    }
}

/// Cell-averaged distribution function. Layout is velocity-major:
/// `data[(ky * nvx + kx) * ncell + j * nx + i]`, so each velocity cell owns a
/// contiguous spatial slab.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseDistribution {
    pub grid: Grid2D,
    pub vgrid: VelocityGrid,
    pub data: Vec<f64>,
}

impl PhaseDistribution {
    pub fn zeros(grid: Grid2D, vgrid: VelocityGrid) -> Self {
        PhaseDistribution {
            grid,
            vgrid,
            data: vec![0.0; grid.n_cells() * vgrid.n()],
        }
    }

    /// Sample `f(x, y, vx, vy)` at phase-space cell centres.
    pub fn from_fn(grid: Grid2D, vgrid: VelocityGrid, mut f: impl FnMut(f64, f64, f64, f64) -> f64) -> Self {
        let mut out = Self::zeros(grid, vgrid);
        let nc = grid.n_cells();
        for ky in 0..vgrid.nvy {
            for kx in 0..vgrid.nvx {
                let (vx, vy) = (vgrid.vx(kx), vgrid.vy(ky));
                let base = (ky * vgrid.nvx + kx) * nc;
                for j in 0..grid.ny {
                    for i in 0..grid.nx {
                        let (x, y) = grid.cell_center(i, j);
                        out.data[base + j * grid.nx + i] = f(x, y, vx, vy);
                    }
                }
            }
        }
        out
    }

    #[inline]
    pub fn n_cells(&self) -> usize {
        self.grid.n_cells()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, kx: usize, ky: usize) -> usize {
        (ky * self.vgrid.nvx + kx) * self.n_cells() + j * self.grid.nx + i
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize, kx: usize, ky: usize) -> f64 {
        self.data[self.index(i, j, kx, ky)]
    }

    pub fn slab(&self, kx: usize, ky: usize) -> &[f64] {
        let nc = self.n_cells();
        let s = (ky * self.vgrid.nvx + kx) * nc;
        &self.data[s..s + nc]
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `∫∫ f dx dv`.
    pub fn total_mass(&self) -> f64 {
        pairwise_sum(&self.data) * self.grid.cell_area() * self.vgrid.cell_volume()
    }

    /// `∫∫ w(v) f dx dv` for a weight depending on velocity only.
    pub fn weighted_total(&self, w: impl Fn(f64, f64) -> f64) -> f64 {
        let nc = self.n_cells();
        let v = self.vgrid;
        let mut per_slab = Vec::with_capacity(v.n());
        for ky in 0..v.nvy {
            for kx in 0..v.nvx {
                let s = (ky * v.nvx + kx) * nc;
                per_slab.push(w(v.vx(kx), v.vy(ky)) * pairwise_sum(&self.data[s..s + nc]));
            }
        }
        pairwise_sum(&per_slab) * self.grid.cell_area() * v.cell_volume()
    }

    /// Mass sitting on the outermost ring of velocity cells.
    pub fn edge_mass(&self) -> f64 {
        let v = self.vgrid;
        let nc = self.n_cells();
        let mut s = 0.0;
        for ky in 0..v.nvy {
            for kx in 0..v.nvx {
                if v.is_edge(kx, ky) {
                    let b = (ky * v.nvx + kx) * nc;
                    s += pairwise_sum(&self.data[b..b + nc]);
                }
            }
        }
        s * self.grid.cell_area() * v.cell_volume()
    }

    /// Check `f ≥ 0` and finiteness.
    pub fn validate(&self) -> Result<()> {
        if let Some(k) = self.data.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Input(format!(
                "distribution value {} at flat index {k} is negative or not finite",
                self.data[k]
            )));
        }
        Ok(())
    }
}
