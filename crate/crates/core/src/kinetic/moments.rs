use super::PhaseDistribution;
use crate::grid::{ScalarField, VectorField};

/// Velocity moments of `f` at cell centres.
///
/// `m0 = ∫f dv`, `m1 = ∫v f dv` (vector), `m2 = ∫|v|² f dv`,
/// `m3 = ∫|v|³ f dv`; `totals[k] = M_k = ∫ m_k dx` with `m_1` in the
/// totals read as the scalar moment `∫|v| f dv`.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentFields {
    pub m0: ScalarField,
    pub m1x: ScalarField,
    pub m1y: ScalarField,
    pub m1_abs: ScalarField,
    pub m2: ScalarField,
    pub m3: ScalarField,
    pub totals: [f64; 4],
}

impl MomentFields {
    /// `|m1|` at a cell.
    #[inline]
    pub fn m1_norm(&self, k: usize) -> f64 {
        self.m1x.data[k].hypot(self.m1y.data[k])
    }

    /// The vector moment averaged onto the MAC faces.
    pub fn m1_faces(&self) -> VectorField {
        let fx = self.m1x.face_average();
        let fy = self.m1y.face_average();
        VectorField {
            grid: fx.grid,
            x: fx.x,
            y: fy.y,
        }
    }
}

/// Midpoint quadrature of the velocity moments.
pub fn compute_moments(f: &PhaseDistribution) -> MomentFields {
    let g = f.grid;
    let v = f.vgrid;
    let nc = g.n_cells();
    let dv = v.cell_volume();
    let mut m0 = vec![0.0; nc];
    let mut m1x = vec![0.0; nc];
    let mut m1y = vec![0.0; nc];
    let mut m1a = vec![0.0; nc];
    let mut m2 = vec![0.0; nc];
    let mut m3 = vec![0.0; nc];
    for ky in 0..v.nvy {
        for kx in 0..v.nvx {
            let (vx, vy) = (v.vx(kx), v.vy(ky));
            let s2 = vx * vx + vy * vy;
            let s1 = s2.sqrt();
            let s3 = s2 * s1;
            let slab = f.slab(kx, ky);
            for c in 0..nc {
                let w = slab[c] * dv;
                m0[c] += w;
                m1x[c] += w * vx;
                m1y[c] += w * vy;
                m1a[c] += w * s1;
                m2[c] += w * s2;
                m3[c] += w * s3;
            }
        }
    }
    let wrap = |data| ScalarField { grid: g, data };
    let (m0, m1a, m2, m3) = (wrap(m0), wrap(m1a), wrap(m2), wrap(m3));
    let totals = [m0.integral(), m1a.integral(), m2.integral(), m3.integral()];
    MomentFields {
        m0,
        m1x: wrap(m1x),
        m1y: wrap(m1y),
        m1_abs: m1a,
        m2,
        m3,
        totals,
    }
}
