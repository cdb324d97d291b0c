//! Split Vlasov step: free streaming in x with specular walls, then the drag
//! relaxation in v.
//!
//! The v-step uses the exact flow of the affine drift `a = κ (u - v)`,
//! `κ = R_δ ρ`, which contracts every velocity cell towards `u` by
//! `c = exp(-κ Δt)` per axis. The pushed-forward cell masses are projected
//! back onto the velocity cells by overlap and the first moment is then
//! restored by a fractional upwind shift, so `m0` is kept and `m1` follows
//! `u m0 + (m1 - u m0) c` exactly.

use super::regularizer::regularizer_value;
use super::{compute_moments, PhaseDistribution, VelocityGrid};
use crate::error::{Error, Result};
use crate::grid::{Grid2D, ScalarField, VectorField};
use crate::transport::minmod;

/// Diagnostics of one Vlasov step.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct VlasovReport {
    /// Mass pushed out of the velocity box during the step.
    pub leaked_mass: f64,
    /// Mass on the outermost velocity cells after the step.
    pub edge_mass: f64,
    pub substeps: usize,
}

/// Full step `f ↦ V_Δt ∘ X_Δt f` for the drag field built from `ρ` and the
/// face velocity `u`.
pub fn advance_vlasov(
    f: &PhaseDistribution,
    rho: &ScalarField,
    u: &VectorField,
    delta: f64,
    dt: f64,
) -> Result<(PhaseDistribution, VlasovReport)> {
    let (streamed, substeps) = advance_free_streaming(f, dt)?;
    let (out, leaked_mass) = advance_velocity_space(&streamed, rho, u, delta, dt)?;
    let edge_mass = out.edge_mass();
    Ok((
        out,
        VlasovReport {
            leaked_mass,
            edge_mass,
            substeps,
        },
    ))
}

/// Admissible step for the x-transport, `min(hx, hy) / (√2 vmax)`.
pub fn streaming_dt_limit(grid: &Grid2D, v: &VelocityGrid) -> f64 {
    grid.hx().min(grid.hy()) / (std::f64::consts::SQRT_2 * v.vmax)
}

/// `∂t f + v·∇x f = 0` with specular reflection at the walls: dimensional
/// splitting (x then y), each sweep MUSCL/minmod with SSP-RK2 at Courant
/// number ≤ 1/2. Wall ghosts are taken from the mirrored velocity cell.
/// Returns the new distribution and the number of sub-steps per sweep.
pub fn advance_free_streaming(f: &PhaseDistribution, dt: f64) -> Result<(PhaseDistribution, usize)> {
    if !(dt >= 0.0) || !dt.is_finite() {
        return Err(Error::config("time.dt", format!("time step must be nonnegative, got {dt}")));
    }
    let (g, v) = (f.grid, f.vgrid);
    let limit = streaming_dt_limit(&g, &v);
    if dt > limit * (1.0 + 1e-12) {
        return Err(Error::Cfl {
            stage: "vlasov x-transport",
            dt,
            limit,
        });
    }
    let mut out = f.clone();
    if dt == 0.0 {
        return Ok((out, 0));
    }
    let courant = (dt * v.vx(v.nvx - 1) / g.hx()).max(dt * v.vy(v.nvy - 1) / g.hy());
    let n = (2.0 * courant).ceil().max(1.0) as usize;
    let sub = dt / n as f64;
    let mut s1 = vec![0.0; out.data.len()];
    let mut s2 = vec![0.0; out.data.len()];
    for _ in 0..n {
        for axis in [Axis::X, Axis::Y] {
            euler(axis, &out.data, &mut s1, g, v, sub);
            euler(axis, &s1, &mut s2, g, v, sub);
            for (q, b) in out.data.iter_mut().zip(&s2) {
                *q = 0.5 * *q + 0.5 * b;
            }
        }
    }
    Ok((out, n))
}

#[derive(Clone, Copy)]
enum Axis {
    X,
    Y,
}

/// One forward-Euler stage of the x- or y-sweep over every velocity slab.
fn euler(axis: Axis, src: &[f64], dst: &mut [f64], g: Grid2D, v: VelocityGrid, dt: f64) {
    let (nx, ny, nc) = (g.nx, g.ny, g.n_cells());
    match axis {
        Axis::X => {
            let mut pad = vec![0.0; nx + 4];
            let mut flux = vec![0.0; nx + 1];
            for ky in 0..v.nvy {
                for kx in 0..v.nvx {
                    let s = (ky * v.nvx + kx) * nc;
                    let m = (ky * v.nvx + (v.nvx - 1 - kx)) * nc;
                    let a = v.vx(kx);
                    let lam = dt / g.hx() * a;
                    for j in 0..ny {
                        let row = &src[s + j * nx..s + (j + 1) * nx];
                        let mrow = &src[m + j * nx..m + (j + 1) * nx];
                        pad[2..nx + 2].copy_from_slice(row);
                        pad[1] = mrow[0];
                        pad[0] = mrow[1];
                        pad[nx + 2] = mrow[nx - 1];
                        pad[nx + 3] = mrow[nx - 2];
                        face_fluxes(a, lam, &pad[..nx + 3], &pad[1..nx + 4], &pad[2..], &pad[3..], &mut flux);
                        let out = &mut dst[s + j * nx..s + (j + 1) * nx];
                        for i in 0..nx {
                            out[i] = row[i] - (flux[i + 1] - flux[i]);
                        }
                    }
                }
            }
        }
        Axis::Y => {
            let mut lo = vec![0.0; nx];
            let mut hi = vec![0.0; nx];
            for ky in 0..v.nvy {
                for kx in 0..v.nvx {
                    let s = (ky * v.nvx + kx) * nc;
                    let m = ((v.nvy - 1 - ky) * v.nvx + kx) * nc;
                    let a = v.vy(ky);
                    let lam = dt / g.hy() * a;
                    let slab = &src[s..s + nc];
                    let mslab = &src[m..m + nc];
                    let row = |j: isize| -> &[f64] {
                        let r = if j < 0 {
                            return &mslab[(-1 - j) as usize * nx..(-j) as usize * nx];
                        } else if j >= ny as isize {
                            let k = (2 * ny as isize - 1 - j) as usize;
                            return &mslab[k * nx..(k + 1) * nx];
                        } else {
                            j as usize
                        };
                        &slab[r * nx..(r + 1) * nx]
                    };
                    face_fluxes(a, lam, row(-2), row(-1), row(0), row(1), &mut lo);
                    for j in 0..ny {
                        let fj = j as isize + 1;
                        face_fluxes(a, lam, row(fj - 2), row(fj - 1), row(fj), row(fj + 1), &mut hi);
                        let out = &mut dst[s + j * nx..s + (j + 1) * nx];
                        let cur = &slab[j * nx..(j + 1) * nx];
                        for i in 0..nx {
                            out[i] = cur[i] - (hi[i] - lo[i]);
                        }
                        std::mem::swap(&mut lo, &mut hi);
                    }
                }
            }
        }
    }
}

/// `out[k] = lam · muscl_face(a, ll[k], l[k], r[k], rr[k])` with the upwind
/// branch hoisted out of the loop.
#[inline]
fn face_fluxes(a: f64, lam: f64, ll: &[f64], l: &[f64], r: &[f64], rr: &[f64], out: &mut [f64]) {
    let n = out.len();
    let (ll, l, r, rr) = (&ll[..n], &l[..n], &r[..n], &rr[..n]);
    if a >= 0.0 {
        for k in 0..n {
            out[k] = lam * (l[k] + 0.5 * minmod(r[k] - l[k], l[k] - ll[k]));
        }
    } else {
        for k in 0..n {
            out[k] = lam * (r[k] - 0.5 * minmod(r[k] - l[k], rr[k] - r[k]));
        }
    }
}

/// Drag relaxation `∂t f + div_v(R_δ ρ (u - v) f) = 0` in every spatial
/// cell, with `R_δ` taken at the predicted midpoint of the step. Returns the
/// new distribution and the mass that left the velocity box.
pub fn advance_velocity_space(
    f: &PhaseDistribution,
    rho: &ScalarField,
    u: &VectorField,
    delta: f64,
    dt: f64,
) -> Result<(PhaseDistribution, f64)> {
    let g = f.grid;
    g.check_same(&rho.grid)?;
    g.check_same(&u.grid)?;
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(Error::config("physics.delta", format!("must be nonnegative and finite, got {delta}")));
    }
    if !(dt >= 0.0) || !dt.is_finite() {
        return Err(Error::config("time.dt", format!("time step must be nonnegative, got {dt}")));
    }
    let v = f.vgrid;
    let nc = g.n_cells();
    let (nvx, nvy) = (v.nvx, v.nvy);
    let (dvx, dvy) = (v.dvx(), v.dvy());
    let (ucx, ucy) = u.at_centers();
    let m = compute_moments(f);
    let mut out = f.clone();
    // Spatial cells are processed in chunks so that the strided gather of
    // each velocity block reuses cache lines.
    const CHUNK: usize = 16;
    let nv = v.n();
    let mut chunk = vec![0.0; nv * CHUNK];
    let mut block = vec![0.0; nv];
    let mut line = vec![0.0; nvx.max(nvy)];
    let mut work = vec![0.0; nvx.max(nvy)];
    let mut leaked = 0.0;
    let mut c0 = 0;
    while c0 < nc {
        let w = CHUNK.min(nc - c0);
        for kv in 0..nv {
            chunk[kv * CHUNK..kv * CHUNK + w].copy_from_slice(&f.data[kv * nc + c0..kv * nc + c0 + w]);
        }
        for t in 0..w {
            let c = c0 + t;
            let m0 = m.m0.data[c];
            if m0 == 0.0 {
                continue;
            }
            let r = rho.data[c];
            let (ux, uy) = (ucx.data[c], ucy.data[c]);
            let (m1x, m1y) = (m.m1x.data[c], m.m1y.data[c]);
            let kappa0 = regularizer_value(delta, m0, m1x.hypot(m1y)) * r;
            let half = (-0.5 * kappa0 * dt).exp();
            let mid_x = ux * m0 + (m1x - ux * m0) * half;
            let mid_y = uy * m0 + (m1y - uy * m0) * half;
            let kappa = regularizer_value(delta, m0, mid_x.hypot(mid_y)) * r;
            let contraction = (-kappa * dt).exp();
            if contraction == 1.0 {
                continue;
            }
            for (kv, b) in block.iter_mut().enumerate() {
                *b = chunk[kv * CHUNK + t];
            }
            let mut cell_leak = 0.0;
            for ky in 0..nvy {
                let l = &mut block[ky * nvx..(ky + 1) * nvx];
                cell_leak += remap_line(l, &mut work[..nvx], v.vmax, dvx, ux, contraction) * dvy;
            }
            for kx in 0..nvx {
                for ky in 0..nvy {
                    line[ky] = block[ky * nvx + kx];
                }
                cell_leak += remap_line(&mut line[..nvy], &mut work[..nvy], v.vmax, dvy, uy, contraction) * dvx;
                for ky in 0..nvy {
                    block[ky * nvx + kx] = line[ky];
                }
            }
            for (kv, b) in block.iter().enumerate() {
                chunk[kv * CHUNK + t] = b.max(0.0);
            }
            leaked += cell_leak;
        }
        for kv in 0..nv {
            out.data[kv * nc + c0..kv * nc + c0 + w].copy_from_slice(&chunk[kv * CHUNK..kv * CHUNK + w]);
        }
        c0 += w;
    }
    Ok((out, leaked * g.cell_area()))
}

/// Remap the cell averages on one velocity line under `w ↦ u + (w - u) c`.
/// Returns the leaked line mass `Σ f dv` that left `[-vmax, vmax]`.
fn remap_line(q: &mut [f64], out: &mut [f64], vmax: f64, dv: f64, u: f64, c: f64) -> f64 {
    let n = q.len();
    let center = |k: usize| (k as f64 + 0.5 - 0.5 * n as f64) * dv;
    out.fill(0.0);
    let mut leaked = 0.0;
    let mut target = 0.0;
    // Image of cell k in units of dv from -vmax: [base + c k, base + c (k+1)].
    let base = (u + vmax) * (1.0 - c) / dv;
    for k in 0..n {
        let qk = q[k];
        if qk == 0.0 {
            continue;
        }
        target += qk * (u + (center(k) - u) * c);
        let a = base + c * k as f64;
        let b = a + c;
        let fa = a.floor();
        let fb = b.floor();
        // The image has length c·dv ≤ dv, so it meets at most two cells.
        let mut deposit = |idx: f64, share: f64| {
            if idx >= 0.0 && idx < n as f64 {
                out[idx as usize] += qk * share;
            } else {
                leaked += qk * share;
            }
        };
        if fa == fb || c <= 0.0 {
            deposit(fa, 1.0);
        } else {
            let s0 = ((fb - a) / c).clamp(0.0, 1.0);
            deposit(fa, s0);
            deposit(fb, 1.0 - s0);
        }
    }
    if leaked == 0.0 {
        // Restore the first moment with a fractional one-cell shift.
        let mass: f64 = out.iter().sum();
        let current: f64 = out.iter().enumerate().map(|(k, w)| w * center(k)).sum();
        if mass > 0.0 {
            let s = ((target - current) / (mass * dv)).clamp(-1.0, 1.0);
            if s > 0.0 {
                leaked += s * out[n - 1];
                for k in (1..n).rev() {
                    out[k] = (1.0 - s) * out[k] + s * out[k - 1];
                }
                out[0] *= 1.0 - s;
            } else if s < 0.0 {
                let s = -s;
                leaked += s * out[0];
                for k in 0..n - 1 {
                    out[k] = (1.0 - s) * out[k] + s * out[k + 1];
                }
                out[n - 1] *= 1.0 - s;
            }
        }
    }
    q.copy_from_slice(out);
    leaked * dv
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_f(g: Grid2D, v: VelocityGrid, seed: u64) -> PhaseDistribution {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        PhaseDistribution::from_fn(g, v, |_, _, a, b| {
            if a <= v.vx(0) || a >= v.vx(v.nvx - 1) || b <= v.vy(0) || b >= v.vy(v.nvy - 1) {
                0.0
            } else {
                rng.gen_range(0.0..1.0)
            }
        })
    }

    #[test]
    fn remap_line_keeps_mass_and_exact_first_moment() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (n, vmax) = (16, 2.0);
        let dv = 2.0 * vmax / n as f64;
        for _ in 0..200 {
            let mut q: Vec<f64> = (0..n).map(|k| if k == 0 || k == n - 1 { 0.0 } else { rng.gen_range(0.0..1.0) }).collect();
            let u = rng.gen_range(-1.5..1.5);
            let c = rng.gen_range(0.05..1.0);
            let center = |k: usize| (k as f64 + 0.5 - 0.5 * n as f64) * dv;
            let m0: f64 = q.iter().sum::<f64>() * dv;
            let m1: f64 = q.iter().enumerate().map(|(k, w)| w * center(k)).sum::<f64>() * dv;
            let qmax = q.iter().copied().fold(0.0, f64::max);
            let mut work = vec![0.0; n];
            let leak = remap_line(&mut q, &mut work, vmax, dv, u, c);
            assert_eq!(leak, 0.0);
            let n0: f64 = q.iter().sum::<f64>() * dv;
            let n1: f64 = q.iter().enumerate().map(|(k, w)| w * center(k)).sum::<f64>() * dv;
            assert!((n0 - m0).abs() < 1e-13);
            assert!((n1 - (u * m0 + (m1 - u * m0) * c)).abs() < 1e-13);
            assert!(q.iter().all(|&w| w >= 0.0 && w <= qmax / c * (1.0 + 1e-12)));
        }
    }

    #[test]
    fn velocity_step_conserves_mass_and_stays_positive() {
        let g = Grid2D::unit(6).unwrap();
        let v = VelocityGrid::new(12, 10, 3.0).unwrap();
        let f = random_f(g, v, 2);
        let rho = ScalarField::from_fn(g, |x, y| 0.5 + x * y);
        let mut u = VectorField::from_fn(g, |x, y| (y - 0.5, 0.5 - x));
        u.zero_wall_normal();
        let (out, leaked) = advance_velocity_space(&f, &rho, &u, 0.3, 0.2).unwrap();
        assert_eq!(leaked, 0.0);
        assert!(out.min() >= 0.0);
        let rel = (out.total_mass() - f.total_mass()).abs() / f.total_mass();
        assert!(rel < 1e-13, "{rel}");
    }

    #[test]
    fn free_streaming_conserves_mass_and_speed_flux() {
        let g = Grid2D::new(10, 8, 1.0, 0.8).unwrap();
        let v = VelocityGrid::new(8, 8, 2.0).unwrap();
        let f = random_f(g, v, 9);
        let dt = 0.9 * streaming_dt_limit(&g, &v);
        let (out, n) = advance_free_streaming(&f, dt).unwrap();
        assert!(n >= 1);
        assert!(out.min() >= 0.0);
        assert!(out.max() <= f.max());
        let rel = (out.total_mass() - f.total_mass()).abs() / f.total_mass();
        assert!(rel < 1e-13, "{rel}");
        let e = |p: &PhaseDistribution| p.weighted_total(|a, b| a * a + b * b);
        assert!((e(&out) - e(&f)).abs() < 1e-12 * e(&f));
    }

    #[test]
    fn streaming_cfl_violation_is_reported() {
        let g = Grid2D::unit(8).unwrap();
        let v = VelocityGrid::new(8, 8, 2.0).unwrap();
        let f = PhaseDistribution::zeros(g, v);
        let dt = 1.5 * streaming_dt_limit(&g, &v);
        match advance_free_streaming(&f, dt) {
            Err(Error::Cfl { dt: bad, .. }) => assert_eq!(bad, dt),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn zero_density_leaves_velocity_profile() {
        let g = Grid2D::unit(4).unwrap();
        let v = VelocityGrid::new(8, 8, 2.0).unwrap();
        let f = random_f(g, v, 4);
        let u = VectorField::from_fn(g, |_, _| (0.3, 0.1));
        let (out, _) = advance_velocity_space(&f, &ScalarField::zeros(g), &u, 0.0, 0.1).unwrap();
        assert_eq!(out, f);
    }

    /// RK4 reference for `dm1/dt = R(m0, |m1|) ρ (u m0 - m1)`.
    fn drag_ode(m0: f64, m1: [f64; 2], u: [f64; 2], rho: f64, delta: f64, t: f64) -> [f64; 2] {
        let rhs = |m: [f64; 2]| {
            let k = regularizer_value(delta, m0, m[0].hypot(m[1])) * rho;
            [k * (u[0] * m0 - m[0]), k * (u[1] * m0 - m[1])]
        };
        let n = 20_000;
        let h = t / n as f64;
        let mut m = m1;
        for _ in 0..n {
            let k1 = rhs(m);
            let k2 = rhs([m[0] + 0.5 * h * k1[0], m[1] + 0.5 * h * k1[1]]);
            let k3 = rhs([m[0] + 0.5 * h * k2[0], m[1] + 0.5 * h * k2[1]]);
            let k4 = rhs([m[0] + h * k3[0], m[1] + h * k3[1]]);
            for d in 0..2 {
                m[d] += h / 6.0 * (k1[d] + 2.0 * k2[d] + 2.0 * k3[d] + k4[d]);
            }
        }
        m
    }

    #[test]
    fn homogeneous_drag_is_second_order_in_time() {
        let g = Grid2D::unit(4).unwrap();
        let v = VelocityGrid::new(32, 32, 4.0).unwrap();
        let f = PhaseDistribution::from_fn(g, v, |_, _, a, b| (-((a - 1.5).powi(2) + (b + 0.5).powi(2)) / 0.3).exp());
        let uf = [-0.5, 0.8];
        let u = VectorField::from_fn(g, |_, _| (uf[0], uf[1]));
        let rho = ScalarField::constant(g, 1.2);
        let delta = 0.5;
        let m = compute_moments(&f);
        let (m0, m10) = (m.m0.data[0], [m.m1x.data[0], m.m1y.data[0]]);
        let t_end = 1.0;
        let mut errs = Vec::new();
        for steps in [10, 20, 40] {
            let dt = t_end / steps as f64;
            let mut cur = f.clone();
            let mut worst = 0.0f64;
            for n in 1..=steps {
                cur = advance_velocity_space(&cur, &rho, &u, delta, dt).unwrap().0;
                let mm = compute_moments(&cur);
                let exact = drag_ode(m0, m10, uf, 1.2, delta, n as f64 * dt);
                worst = worst.max((mm.m1x.data[0] - exact[0]).hypot(mm.m1y.data[0] - exact[1]));
            }
            errs.push(worst);
        }
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((3.4..=4.6).contains(&ratio), "{errs:?}");
        }
    }
}
