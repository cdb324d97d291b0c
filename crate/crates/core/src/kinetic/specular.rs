use crate::error::{Error, Result};

/// Specular velocity `v* = v - 2 (v·ν) ν` for a unit normal `ν`.
pub fn specular_reflect(v: [f64; 2], nu: [f64; 2]) -> Result<[f64; 2]> {
    let n2 = nu[0] * nu[0] + nu[1] * nu[1];
    if !((n2 - 1.0).abs() <= 1e-12) {
        return Err(Error::Input(format!(
            "specular reflection needs a unit normal, |nu| = {}",
            n2.sqrt()
        )));
    }
    let d = v[0] * nu[0] + v[1] * nu[1];
    Ok([v[0] - 2.0 * d * nu[0], v[1] - 2.0 * d * nu[1]])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bottom_wall_flips_normal_component() {
        assert_eq!(specular_reflect([1.0, -1.0], [0.0, -1.0]).unwrap(), [1.0, 1.0]);
    }

    #[test]
    fn tangent_velocity_unchanged() {
        assert_eq!(specular_reflect([2.5, 0.0], [0.0, 1.0]).unwrap(), [2.5, 0.0]);
    }

    #[test]
    fn non_unit_normal_rejected() {
        assert!(matches!(specular_reflect([1.0, 0.0], [0.0, 2.0]), Err(Error::Input(_))));
    }

    #[test]
    fn random_isometry_and_involution() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let v = [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)];
            let a: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let nu = [a.cos(), a.sin()];
            let r = specular_reflect(v, nu).unwrap();
            let rr = specular_reflect(r, nu).unwrap();
            let nv = v[0].hypot(v[1]);
            assert!((r[0].hypot(r[1]) - nv).abs() <= 1e-14 * nv.max(1.0));
            assert!((rr[0] - v[0]).abs() <= 1e-14 * nv.max(1.0));
            assert!((rr[1] - v[1]).abs() <= 1e-14 * nv.max(1.0));
        }
    }
}
