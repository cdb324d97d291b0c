//! Jacobi-preconditioned conjugate gradients for the symmetric elliptic
//! problems of the scheme (Neumann pressure Poisson, weighted Hodge solve,
//! implicit viscosity/drag).

use crate::error::{Error, Result};

/// Stopping rule: converged once `‖r‖∞ ≤ max(abs_tol, rel_tol · ‖b‖∞)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverTolerance {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for SolverTolerance {
    fn default() -> Self {
        SolverTolerance {
            abs_tol: 1e-11,
            rel_tol: 1e-14,
            max_iter: 20_000,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub residual: f64,
}

/// Symmetric positive (semi-)definite operator in the sign convention
/// `A = -L` for a negative elliptic operator `L`.
pub trait SpdOperator {
    fn apply(&self, x: &[f64], y: &mut [f64]);
    fn diagonal(&self) -> Vec<f64>;
    /// True when the operator annihilates constants (pure Neumann problem).
    fn constant_nullspace(&self) -> bool {
        false
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn remove_mean(v: &mut [f64]) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    for x in v {
        *x -= m;
    }
}

/// Solve `A x = b` starting from `x`. For operators with a constant
/// nullspace the mean of `b` is discarded and `x` is returned with zero mean.
pub fn pcg(
    name: &'static str,
    op: &impl SpdOperator,
    b: &[f64],
    x: &mut [f64],
    tol: SolverTolerance,
) -> Result<SolveStats> {
    let n = b.len();
    let singular = op.constant_nullspace();
    let mut rhs = b.to_vec();
    if singular {
        remove_mean(&mut rhs);
        remove_mean(x);
    }
    let target = tol.abs_tol.max(tol.rel_tol * norm_inf(&rhs));
    let inv_diag: Vec<f64> = op
        .diagonal()
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();

    let mut r = vec![0.0; n];
    let mut ap = vec![0.0; n];
    let mut iterations = 0;

    // Outer restarts recompute the true residual so the reported value is
    // not the drifted recurrence.
    for _restart in 0..8 {
        op.apply(x, &mut ap);
        for k in 0..n {
            r[k] = rhs[k] - ap[k];
        }
        if singular {
            remove_mean(&mut r);
        }
        let res = norm_inf(&r);
        if res <= target {
            return Ok(SolveStats { iterations, residual: res });
        }
        let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(a, d)| a * d).collect();
        if singular {
            remove_mean(&mut z);
        }
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        loop {
            if iterations >= tol.max_iter {
                return Err(Error::Solver {
                    solver: name,
                    iterations,
                    residual: norm_inf(&r),
                    target,
                });
            }
            iterations += 1;
            op.apply(&p, &mut ap);
            let pap = dot(&p, &ap);
            if pap <= 0.0 || !pap.is_finite() {
                break;
            }
            let alpha = rz / pap;
            for k in 0..n {
                x[k] += alpha * p[k];
                r[k] -= alpha * ap[k];
            }
            if norm_inf(&r) <= 0.25 * target {
                break;
            }
            for k in 0..n {
                z[k] = r[k] * inv_diag[k];
            }
            if singular {
                remove_mean(&mut z);
            }
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for k in 0..n {
                p[k] = z[k] + beta * p[k];
            }
        }
        if singular {
            remove_mean(x);
        }
    }
    op.apply(x, &mut ap);
    for k in 0..n {
        r[k] = rhs[k] - ap[k];
    }
    if singular {
        remove_mean(&mut r);
    }
    let res = norm_inf(&r);
    if res <= target {
        Ok(SolveStats { iterations, residual: res })
    } else {
        Err(Error::Solver {
            solver: name,
            iterations,
            residual: res,
            target,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// 1D Dirichlet Laplacian, -u'' on n points.
    struct Lap1d(usize);

    impl SpdOperator for Lap1d {
        fn apply(&self, x: &[f64], y: &mut [f64]) {
            let n = self.0;
            for i in 0..n {
                let l = if i > 0 { x[i - 1] } else { 0.0 };
                let r = if i + 1 < n { x[i + 1] } else { 0.0 };
                y[i] = 2.0 * x[i] - l - r;
            }
        }
        fn diagonal(&self) -> Vec<f64> {
            vec![2.0; self.0]
        }
    }

    #[test]
    fn solves_tridiagonal_system() {
        let n = 50;
        let exact: Vec<f64> = (0..n).map(|i| ((i as f64) * 0.3).sin()).collect();
        let mut b = vec![0.0; n];
        Lap1d(n).apply(&exact, &mut b);
        let mut x = vec![0.0; n];
        let stats = pcg("test", &Lap1d(n), &b, &mut x, SolverTolerance::default()).unwrap();
        assert!(stats.residual <= 1e-10);
        for (a, e) in x.iter().zip(&exact) {
            assert!((a - e).abs() < 1e-8);
        }
    }

    #[test]
    fn reports_non_convergence() {
        let n = 200;
        let b = vec![1.0; n];
        let mut x = vec![0.0; n];
        let tol = SolverTolerance {
            abs_tol: 1e-14,
            rel_tol: 0.0,
            max_iter: 3,
        };
        let err = pcg("tiny", &Lap1d(n), &b, &mut x, tol).unwrap_err();
        assert!(matches!(err, Error::Solver { iterations: 3, .. }));
    }
}
