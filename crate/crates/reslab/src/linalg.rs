//! Small shared linear-algebra helpers: LU solves with a singularity check,
//! a least-squares fallback for consistent singular systems, and a cheap
//! condition estimate.

use crate::error::{Error, Result};
use crate::fields::{Matrix, Vector};

/// Relative pivot threshold below which a matrix is treated as singular.
const SINGULAR_REL_TOL: f64 = 1e-12;

/// Solve A x = b by LU with partial pivoting. Errors when A is singular to
/// working precision. Also returns a rough condition estimate
/// (max |pivot| / min |pivot|).
pub fn lu_solve(a: &Matrix, b: &Vector) -> Result<(Vector, f64)> {
    let scale = a.amax();
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::SingularJacobian(format!("matrix scale {scale}")));
    }
    let lu = a.clone().lu();
    let u = lu.u();
    let mut pmin = f64::INFINITY;
    let mut pmax: f64 = 0.0;
    for i in 0..u.nrows().min(u.ncols()) {
        let p = u[(i, i)].abs();
        pmin = pmin.min(p);
        pmax = pmax.max(p);
    }
    if pmin <= SINGULAR_REL_TOL * scale {
        return Err(Error::SingularJacobian(format!(
            "pivot ratio {:.3e} below tolerance",
            pmin / scale
        )));
    }
    let x = lu
        .solve(b)
        .ok_or_else(|| Error::SingularJacobian("LU back-substitution failed".into()))?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerics("linear solve produced non-finite values".into()));
    }
    Ok((x, pmax / pmin))
}

/// Solve A x = b, falling back to the minimum-norm least-squares solution
/// when A is singular but the system is consistent. Errors when the system
/// is inconsistent (residual above tolerance).
pub fn solve_or_min_norm(a: &Matrix, b: &Vector) -> Result<Vector> {
    if let Ok((x, _)) = lu_solve(a, b) {
        return Ok(x);
    }
    let svd = a.clone().svd(true, true);
    let scale = a.amax().max(1.0);
    let x = svd
        .solve(b, SINGULAR_REL_TOL * scale)
        .map_err(|e| Error::SingularJacobian(e.to_string()))?;
    let residual = (a * &x - b).amax();
    let btol = 1e-8 * (1.0 + b.amax());
    if residual > btol {
        return Err(Error::SingularJacobian(format!(
            "singular system is inconsistent, residual {residual:.3e}"
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerics("least-squares solve produced non-finite values".into()));
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn lu_solves_well_conditioned_system() {
        let a = Matrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]);
        let b = Vector::from_vec(vec![5.0, 10.0]);
        let (x, cond) = lu_solve(&a, &b).unwrap();
        assert_relative_eq!((&a * &x - &b).amax(), 0.0, epsilon = 1e-12);
        assert!(cond >= 1.0);
    }

    #[test]
    fn lu_rejects_singular() {
        let a = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        let b = Vector::from_vec(vec![1.0, 2.0]);
        assert!(lu_solve(&a, &b).is_err());
    }

    #[test]
    fn min_norm_handles_consistent_singular_system() {
        let a = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let b = Vector::from_vec(vec![3.0, 0.0]);
        let x = solve_or_min_norm(&a, &b).unwrap();
        assert_relative_eq!(x[0], 3.0, epsilon = 1e-10);
        assert_relative_eq!(x[1], 0.0, epsilon = 1e-10);
    }

    #[test]
    fn min_norm_rejects_inconsistent_system() {
        let a = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let b = Vector::from_vec(vec![3.0, 1.0]);
        assert!(solve_or_min_norm(&a, &b).is_err());
    }
}
