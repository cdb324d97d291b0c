use super::MomentFields;
use crate::error::{Error, Result};
use crate::grid::ScalarField;

/// Pointwise drag regularizer `R_δ = 1 / (1 + δ m0 + δ |m1|)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RegularizerField {
    pub delta: f64,
    pub r: ScalarField,
}

impl RegularizerField {
    /// `Q_δ = 1 - R_δ`, evaluated as `s / (1 + s)` with `s = δ(m0 + |m1|)`
    /// to avoid cancellation for small δ.
    pub fn q(&self) -> ScalarField {
        self.r.map(|r| {
            let s = 1.0 / r - 1.0;
            s / (1.0 + s)
        })
    }
}

#[inline]
pub(crate) fn regularizer_value(delta: f64, m0: f64, m1_norm: f64) -> f64 {
    1.0 / (1.0 + delta * m0 + delta * m1_norm)
}

pub fn regularizer(m: &MomentFields, delta: f64) -> Result<RegularizerField> {
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(Error::config("physics.delta", format!("must be nonnegative and finite, got {delta}")));
    }
    let mut r = ScalarField::zeros(m.m0.grid);
    for k in 0..r.data.len() {
        r.data[k] = regularizer_value(delta, m.m0.data[k], m.m1_norm(k));
    }
    Ok(RegularizerField { delta, r })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid2D;

    fn moments_with(m0: f64, m1: (f64, f64)) -> MomentFields {
        let g = Grid2D::unit(4).unwrap();
        let c = |v| ScalarField::constant(g, v);
        MomentFields {
            m0: c(m0),
            m1x: c(m1.0),
            m1y: c(m1.1),
            m1_abs: c(m1.0.hypot(m1.1)),
            m2: c(0.0),
            m3: c(0.0),
            totals: [0.0; 4],
        }
    }

    #[test]
    fn vanishing_moments_give_one() {
        let r = regularizer(&moments_with(0.0, (0.0, 0.0)), 0.7).unwrap();
        assert!(r.r.data.iter().all(|&v| v == 1.0));
        assert!(r.q().data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn closed_form_value() {
        let r = regularizer(&moments_with(1.0, (0.0, 2.0)), 0.5).unwrap();
        assert!((r.r.data[0] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn zero_delta_is_identity_and_negative_rejected() {
        let m = moments_with(3.0, (1.0, 1.0));
        assert!(regularizer(&m, 0.0).unwrap().r.data.iter().all(|&v| v == 1.0));
        match regularizer(&m, -1.0) {
            Err(Error::Config { key, .. }) => assert_eq!(key, "physics.delta"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn small_delta_slope_matches_taylor_expansion() {
        let (m0, m1) = (1.3, (0.4, -0.3));
        let s = m0 + 0.5;
        let m = moments_with(m0, m1);
        let deltas: Vec<f64> = (2..6).map(|k| 10f64.powi(-k)).collect();
        let qs: Vec<f64> = deltas.iter().map(|&d| regularizer(&m, d).unwrap().q().data[0]).collect();
        // Q/δ = s - s²δ + O(δ²): Richardson extrapolation in δ recovers s.
        for w in deltas.windows(2).zip(qs.windows(2)) {
            let (d, q) = w;
            let a = q[0] / d[0];
            let b = q[1] / d[1];
            let extrap = (b * d[0] - a * d[1]) / (d[0] - d[1]);
            assert!((extrap - s).abs() < 10.0 * d[0] * d[0] * s * s * s, "{extrap} vs {s}");
        }
    }
}
