//! Structured MAC grid containers and the discrete differential operators.
//!
//! Scalars live at cell centres, vector components on the staggered faces
//! normal to them, and stream functions at the cell corners (nodes). The
//! x-component of a [`VectorField`] is stored on `(nx + 1) * ny` faces and the
//! y-component on `nx * (ny + 1)` faces, both row-major with `i` fastest.
//!
//! The wall-normal faces on ∂Ω carry the no-penetration value 0 for velocity
//! fields; tangential no-slip is imposed through mirrored ghost values in
//! [`laplacian`] and [`dirichlet_energy`].

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid2D {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
}

impl Grid2D {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        if nx < 4 || ny < 4 {
            return Err(Error::config("grid.nx", format!("need at least 4 cells per axis, got {nx}x{ny}")));
        }
        if !(lx > 0.0 && lx.is_finite()) {
            return Err(Error::config("grid.lx", format!("domain length must be positive, got {lx}")));
        }
        if !(ly > 0.0 && ly.is_finite()) {
            return Err(Error::config("grid.ly", format!("domain length must be positive, got {ly}")));
        }
        Ok(Grid2D { nx, ny, lx, ly })
    }

    /// Unit square with `n x n` cells.
    pub fn unit(n: usize) -> Result<Self> {
        Self::new(n, n, 1.0, 1.0)
    }

    #[inline]
    pub fn hx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    #[inline]
    pub fn hy(&self) -> f64 {
        self.ly / self.ny as f64
    }

    #[inline]
    pub fn cell_area(&self) -> f64 {
        self.hx() * self.hy()
    }

    #[inline]
    pub fn n_cells(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn cell_center(&self, i: usize, j: usize) -> (f64, f64) {
        ((i as f64 + 0.5) * self.hx(), (j as f64 + 0.5) * self.hy())
    }

    #[inline]
    pub fn xface_pos(&self, i: usize, j: usize) -> (f64, f64) {
        (i as f64 * self.hx(), (j as f64 + 0.5) * self.hy())
    }

    #[inline]
    pub fn yface_pos(&self, i: usize, j: usize) -> (f64, f64) {
        ((i as f64 + 0.5) * self.hx(), j as f64 * self.hy())
    }

    #[inline]
    pub fn node_pos(&self, i: usize, j: usize) -> (f64, f64) {
        (i as f64 * self.hx(), j as f64 * self.hy())
    }

    /// Distance from a point to the boundary of the box.
    pub fn wall_distance(&self, x: f64, y: f64) -> f64 {
        x.min(self.lx - x).min(y).min(self.ly - y)
    }

    pub(crate) fn check_same(&self, other: &Grid2D) -> Result<()> {
        if self != other {
            return Err(Error::GridMismatch(format!("{self:?} vs {other:?}")));
        }
        Ok(())
    }
}

/// Cell-centred grid function.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    pub grid: Grid2D,
    pub data: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid2D) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid2D, c: f64) -> Self {
        ScalarField {
            grid,
            data: vec![c; grid.n_cells()],
        }
    }

    pub fn from_fn(grid: Grid2D, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let mut data = Vec::with_capacity(grid.n_cells());
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let (x, y) = grid.cell_center(i, j);
                data.push(f(x, y));
            }
        }
        ScalarField { grid, data }
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.grid.nx + i
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.grid.nx + i]
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Midpoint-rule integral over Ω.
    pub fn integral(&self) -> f64 {
        pairwise_sum(&self.data) * self.grid.cell_area()
    }

    pub fn l1_norm(&self) -> f64 {
        self.data.iter().map(|v| v.abs()).sum::<f64>() * self.grid.cell_area()
    }

    pub fn l2_norm(&self) -> f64 {
        (self.data.iter().map(|v| v * v).sum::<f64>() * self.grid.cell_area()).sqrt()
    }

    pub fn dot(&self, other: &ScalarField) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum::<f64>() * self.grid.cell_area()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField {
            grid: self.grid,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn sub(&self, other: &ScalarField) -> ScalarField {
        ScalarField {
            grid: self.grid,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    /// Subtract the mean so that the midpoint integral vanishes.
    pub fn remove_mean(&mut self) {
        let mean = pairwise_sum(&self.data) / self.data.len() as f64;
        for v in &mut self.data {
            *v -= mean;
        }
    }

    /// Arithmetic face averages of a cell field, laid out like a
    /// [`VectorField`]. Boundary faces copy the adjacent cell.
    pub fn face_average(&self) -> VectorField {
        let g = self.grid;
        let (nx, ny) = (g.nx, g.ny);
        let mut out = VectorField::zeros(g);
        for j in 0..ny {
            for i in 0..=nx {
                let l = self.at(i.saturating_sub(1), j);
                let r = self.at(i.min(nx - 1), j);
                out.x[j * (nx + 1) + i] = 0.5 * (l + r);
            }
        }
        for j in 0..=ny {
            for i in 0..nx {
                let b = self.at(i, j.saturating_sub(1));
                let t = self.at(i, j.min(ny - 1));
                out.y[j * nx + i] = 0.5 * (b + t);
            }
        }
        out
    }

    /// Bilinear interpolation of the cell values, clamped at the walls. The
    /// result is a convex combination of at most four cell values.
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let g = self.grid;
        bilinear(&self.data, g.nx, g.ny, x / g.hx() - 0.5, y / g.hy() - 0.5)
    }
}

/// Face-centred (MAC) vector field.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    pub grid: Grid2D,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl VectorField {
    pub fn zeros(grid: Grid2D) -> Self {
        VectorField {
            grid,
            x: vec![0.0; (grid.nx + 1) * grid.ny],
            y: vec![0.0; grid.nx * (grid.ny + 1)],
        }
    }

    /// Sample a continuous field on the faces. Wall-normal faces are sampled
    /// too; call [`VectorField::zero_wall_normal`] to impose no-penetration.
    pub fn from_fn(grid: Grid2D, f: impl Fn(f64, f64) -> (f64, f64)) -> Self {
        let mut u = VectorField::zeros(grid);
        for j in 0..grid.ny {
            for i in 0..=grid.nx {
                let (x, y) = grid.xface_pos(i, j);
                u.x[j * (grid.nx + 1) + i] = f(x, y).0;
            }
        }
        for j in 0..=grid.ny {
            for i in 0..grid.nx {
                let (x, y) = grid.yface_pos(i, j);
                u.y[j * grid.nx + i] = f(x, y).1;
            }
        }
        u
    }

    /// Discrete curl of a node-centred stream function, `u = ∂ψ/∂y`,
    /// `v = -∂ψ/∂x`. The result is divergence free to round-off, and its
    /// wall-normal faces vanish whenever ψ is constant along each wall.
    pub fn from_stream_function(psi: &NodeField) -> Self {
        let g = psi.grid;
        let (nx, ny) = (g.nx, g.ny);
        let (hx, hy) = (g.hx(), g.hy());
        let mut u = VectorField::zeros(g);
        for j in 0..ny {
            for i in 0..=nx {
                u.x[j * (nx + 1) + i] = (psi.at(i, j + 1) - psi.at(i, j)) / hy;
            }
        }
        for j in 0..=ny {
            for i in 0..nx {
                u.y[j * nx + i] = -(psi.at(i + 1, j) - psi.at(i, j)) / hx;
            }
        }
        u
    }

    #[inline]
    pub fn xi(&self, i: usize, j: usize) -> usize {
        j * (self.grid.nx + 1) + i
    }

    #[inline]
    pub fn yi(&self, i: usize, j: usize) -> usize {
        j * self.grid.nx + i
    }

    #[inline]
    pub fn ux(&self, i: usize, j: usize) -> f64 {
        self.x[j * (self.grid.nx + 1) + i]
    }

    #[inline]
    pub fn uy(&self, i: usize, j: usize) -> f64 {
        self.y[j * self.grid.nx + i]
    }

    pub fn zero_wall_normal(&mut self) {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        for j in 0..ny {
            self.x[j * (nx + 1)] = 0.0;
            self.x[j * (nx + 1) + nx] = 0.0;
        }
        for i in 0..nx {
            self.y[i] = 0.0;
            self.y[ny * nx + i] = 0.0;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.x.iter().chain(&self.y).fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(&self.y).all(|v| v.is_finite())
    }

    /// Face inner product `Σ u·w hx hy` over all faces.
    pub fn dot(&self, other: &VectorField) -> f64 {
        let s: f64 = self.x.iter().zip(&other.x).map(|(a, b)| a * b).sum::<f64>()
            + self.y.iter().zip(&other.y).map(|(a, b)| a * b).sum::<f64>();
        s * self.grid.cell_area()
    }

    pub fn l2_norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn axpy(&mut self, a: f64, other: &VectorField) {
        for (s, o) in self.x.iter_mut().zip(&other.x) {
            *s += a * o;
        }
        for (s, o) in self.y.iter_mut().zip(&other.y) {
            *s += a * o;
        }
    }

    pub fn sub(&self, other: &VectorField) -> VectorField {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    pub fn scale(&mut self, a: f64) {
        for v in self.x.iter_mut().chain(self.y.iter_mut()) {
            *v *= a;
        }
    }

    /// Component-wise product with face weights, `w ∘ u`.
    pub fn hadamard(&self, w: &VectorField) -> VectorField {
        VectorField {
            grid: self.grid,
            x: self.x.iter().zip(&w.x).map(|(a, b)| a * b).collect(),
            y: self.y.iter().zip(&w.y).map(|(a, b)| a * b).collect(),
        }
    }

    /// Cell-centred components by averaging the two faces of each cell.
    pub fn at_centers(&self) -> (ScalarField, ScalarField) {
        let g = self.grid;
        let mut cx = ScalarField::zeros(g);
        let mut cy = ScalarField::zeros(g);
        for j in 0..g.ny {
            for i in 0..g.nx {
                cx.data[j * g.nx + i] = 0.5 * (self.ux(i, j) + self.ux(i + 1, j));
                cy.data[j * g.nx + i] = 0.5 * (self.uy(i, j) + self.uy(i, j + 1));
            }
        }
        (cx, cy)
    }

    /// Bilinear interpolation of each component on its own staggered
    /// lattice, clamped to the lattice.
    pub fn sample(&self, x: f64, y: f64) -> (f64, f64) {
        let g = self.grid;
        let ux = bilinear(&self.x, g.nx + 1, g.ny, x / g.hx(), y / g.hy() - 0.5);
        let uy = bilinear(&self.y, g.nx, g.ny + 1, x / g.hx() - 0.5, y / g.hy());
        (ux, uy)
    }
}

/// Node-centred grid function (stream functions).
#[derive(Clone, Debug, PartialEq)]
pub struct NodeField {
    pub grid: Grid2D,
    pub data: Vec<f64>,
}

impl NodeField {
    pub fn zeros(grid: Grid2D) -> Self {
        NodeField {
            grid,
            data: vec![0.0; (grid.nx + 1) * (grid.ny + 1)],
        }
    }

    pub fn from_fn(grid: Grid2D, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let mut psi = NodeField::zeros(grid);
        for j in 0..=grid.ny {
            for i in 0..=grid.nx {
                let (x, y) = grid.node_pos(i, j);
                psi.data[j * (grid.nx + 1) + i] = f(x, y);
            }
        }
        psi
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[j * (self.grid.nx + 1) + i]
    }

    /// Stream function of a face field obtained by integrating the
    /// x-component upward from the bottom wall, ψ(x, 0) = 0. For a
    /// divergence-free field with zero wall-normal faces this inverts
    /// [`VectorField::from_stream_function`].
    pub fn stream_function_of(u: &VectorField) -> NodeField {
        let g = u.grid;
        let hy = g.hy();
        let mut psi = NodeField::zeros(g);
        for i in 0..=g.nx {
            let mut acc = 0.0;
            for j in 0..g.ny {
                acc += hy * u.ux(i, j);
                psi.data[(j + 1) * (g.nx + 1) + i] = acc;
            }
        }
        psi
    }
}

fn bilinear(data: &[f64], w: usize, h: usize, fx: f64, fy: f64) -> f64 {
    let fx = fx.clamp(0.0, (w - 1) as f64);
    let fy = fy.clamp(0.0, (h - 1) as f64);
    let i0 = (fx.floor() as usize).min(w - 2);
    let j0 = (fy.floor() as usize).min(h - 2);
    let sx = fx - i0 as f64;
    let sy = fy - j0 as f64;
    let v00 = data[j0 * w + i0];
    let v10 = data[j0 * w + i0 + 1];
    let v01 = data[(j0 + 1) * w + i0];
    let v11 = data[(j0 + 1) * w + i0 + 1];
    (1.0 - sy) * ((1.0 - sx) * v00 + sx * v10) + sy * ((1.0 - sx) * v01 + sx * v11)
}

/// Deterministic pairwise summation.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 64 {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

pub fn divergence(u: &VectorField) -> ScalarField {
    let g = u.grid;
    let (hx, hy) = (g.hx(), g.hy());
    let mut d = ScalarField::zeros(g);
    for j in 0..g.ny {
        for i in 0..g.nx {
            d.data[j * g.nx + i] =
                (u.ux(i + 1, j) - u.ux(i, j)) / hx + (u.uy(i, j + 1) - u.uy(i, j)) / hy;
        }
    }
    d
}

/// Face gradient of a cell field; wall-normal faces are set to 0 (zero-flux
/// walls), which makes `gradient` the negative adjoint of [`divergence`] on
/// fields with vanishing wall-normal faces.
pub fn gradient(p: &ScalarField) -> VectorField {
    let g = p.grid;
    let (hx, hy) = (g.hx(), g.hy());
    let mut out = VectorField::zeros(g);
    for j in 0..g.ny {
        for i in 1..g.nx {
            out.x[j * (g.nx + 1) + i] = (p.at(i, j) - p.at(i - 1, j)) / hx;
        }
    }
    for j in 1..g.ny {
        for i in 0..g.nx {
            out.y[j * g.nx + i] = (p.at(i, j) - p.at(i, j - 1)) / hy;
        }
    }
    out
}

/// Neumann Laplacian `div(grad p)` of a cell field.
pub fn laplacian_scalar(p: &ScalarField) -> ScalarField {
    divergence(&gradient(p))
}

/// Vector Laplacian with homogeneous Dirichlet walls. Wall-normal faces are
/// Dirichlet unknowns pinned to 0 (their output is 0); tangential walls sit
/// half a cell outside the first face row and use the mirrored ghost `-u`.
pub fn laplacian(u: &VectorField) -> VectorField {
    let g = u.grid;
    let mut out = VectorField::zeros(g);
    laplacian_into(u, &mut out);
    out
}

pub(crate) fn laplacian_into(u: &VectorField, out: &mut VectorField) {
    let g = u.grid;
    let (nx, ny) = (g.nx, g.ny);
    let (ihx2, ihy2) = (1.0 / (g.hx() * g.hx()), 1.0 / (g.hy() * g.hy()));
    let w = nx + 1;
    for j in 0..ny {
        out.x[j * w] = 0.0;
        out.x[j * w + nx] = 0.0;
        for i in 1..nx {
            let c = u.x[j * w + i];
            let s = if j > 0 { u.x[(j - 1) * w + i] } else { -c };
            let n = if j + 1 < ny { u.x[(j + 1) * w + i] } else { -c };
            out.x[j * w + i] = (u.x[j * w + i - 1] - 2.0 * c + u.x[j * w + i + 1]) * ihx2 + (s - 2.0 * c + n) * ihy2;
        }
    }
    for i in 0..nx {
        out.y[i] = 0.0;
        out.y[ny * nx + i] = 0.0;
    }
    for j in 1..ny {
        for i in 0..nx {
            let c = u.y[j * nx + i];
            let wv = if i > 0 { u.y[j * nx + i - 1] } else { -c };
            let e = if i + 1 < nx { u.y[j * nx + i + 1] } else { -c };
            out.y[j * nx + i] = (wv - 2.0 * c + e) * ihx2 + (u.y[(j - 1) * nx + i] - 2.0 * c + u.y[(j + 1) * nx + i]) * ihy2;
        }
    }
}

/// Discrete `∫|∇u|²` matching the no-slip Laplacian: equals `-⟨Δu, u⟩` for
/// fields with zero wall-normal faces, written as a sum of squares so it is
/// nonnegative by construction.
pub fn dirichlet_energy(u: &VectorField) -> f64 {
    let g = u.grid;
    let (nx, ny) = (g.nx, g.ny);
    let (hx, hy) = (g.hx(), g.hy());
    let w = nx + 1;
    let mut s = 0.0;
    // x-component: differences along x between all adjacent faces (the wall
    // faces are 0), along y between rows plus the two wall links.
    for j in 0..ny {
        for i in 0..nx {
            let d = (u.x[j * w + i + 1] - u.x[j * w + i]) / hx;
            s += d * d;
        }
        if j + 1 < ny {
            for i in 1..nx {
                let d = (u.x[(j + 1) * w + i] - u.x[j * w + i]) / hy;
                s += d * d;
            }
        }
    }
    for i in 1..nx {
        let b = u.x[i];
        let t = u.x[(ny - 1) * w + i];
        s += 2.0 * (b * b + t * t) / (hy * hy);
    }
    for j in 0..ny {
        for i in 0..nx {
            let d = (u.y[(j + 1) * nx + i] - u.y[j * nx + i]) / hy;
            s += d * d;
        }
    }
    for j in 1..ny {
        for i in 0..nx - 1 {
            let d = (u.y[j * nx + i + 1] - u.y[j * nx + i]) / hx;
            s += d * d;
        }
        let l = u.y[j * nx];
        let r = u.y[j * nx + nx - 1];
        s += 2.0 * (l * l + r * r) / (hx * hx);
    }
    s * g.cell_area()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_interior_vector(g: Grid2D, rng: &mut ChaCha8Rng) -> VectorField {
        let mut u = VectorField::zeros(g);
        for v in u.x.iter_mut().chain(u.y.iter_mut()) {
            *v = rng.gen_range(-1.0..1.0);
        }
        u.zero_wall_normal();
        u
    }

    #[test]
    fn rejects_tiny_grid() {
        assert!(Grid2D::new(3, 8, 1.0, 1.0).is_err());
        assert!(Grid2D::new(8, 8, 0.0, 1.0).is_err());
    }

    #[test]
    fn linear_strain_is_divergence_free() {
        let g = Grid2D::new(12, 9, 1.3, 0.7).unwrap();
        let u = VectorField::from_fn(g, |x, y| (x, -y));
        let d = divergence(&u);
        assert!(d.max_abs() < 1e-12, "{}", d.max_abs());
    }

    #[test]
    fn gradient_of_constant_vanishes() {
        let g = Grid2D::unit(8).unwrap();
        let p = ScalarField::constant(g, 3.7);
        assert_eq!(gradient(&p).max_abs(), 0.0);
    }

    #[test]
    fn div_grad_adjointness() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let g = Grid2D::new(10, 13, 1.0, 2.0).unwrap();
            let u = random_interior_vector(g, &mut rng);
            let p = ScalarField::from_fn(g, |_, _| rng.gen_range(-1.0..1.0));
            let lhs = divergence(&u).dot(&p);
            let rhs = -u.dot(&gradient(&p));
            assert!((lhs - rhs).abs() < 1e-12, "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn dirichlet_energy_matches_laplacian_pairing() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let g = Grid2D::new(9, 7, 1.0, 0.8).unwrap();
        for _ in 0..10 {
            let u = random_interior_vector(g, &mut rng);
            let e = dirichlet_energy(&u);
            let pairing = -laplacian(&u).dot(&u);
            assert!((e - pairing).abs() < 1e-10 * e.abs().max(1.0), "{e} vs {pairing}");
        }
    }

    #[test]
    fn stream_function_round_trip() {
        let g = Grid2D::new(8, 6, 1.0, 1.0).unwrap();
        let psi = NodeField::from_fn(g, |x, y| (x * (1.0 - x) * y * (1.0 - y)).powi(2));
        let u = VectorField::from_stream_function(&psi);
        assert!(divergence(&u).max_abs() < 1e-13);
        let back = NodeField::stream_function_of(&u);
        let err = psi.data.iter().zip(&back.data).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-15);
    }

    #[test]
    fn sample_reproduces_bilinear_fields() {
        let g = Grid2D::new(8, 8, 2.0, 1.0).unwrap();
        let p = ScalarField::from_fn(g, |x, y| 1.0 + 2.0 * x - y);
        let (cx, cy) = g.cell_center(3, 4);
        assert!((p.sample(cx + 0.03, cy - 0.02) - (1.0 + 2.0 * (cx + 0.03) - (cy - 0.02))).abs() < 1e-13);
    }
}
