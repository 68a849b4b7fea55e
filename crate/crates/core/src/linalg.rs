use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Pivots at or below this magnitude (relative to the largest entry of
/// the system) are treated as exact zeros.
pub(crate) const SINGULAR_PIVOT: f64 = 1e-13;

/// Solves `a x = b` by LU with partial pivoting, reporting near-zero
/// pivots as [`Error::SingularSystem`] instead of dividing by them.
pub(crate) fn solve_dense(a: DMatrix<f64>, b: DVector<f64>) -> Result<DVector<f64>> {
    let scale = a.amax().max(1.0);
    let lu = a.lu();
    let min_pivot = lu
        .u()
        .diagonal()
        .iter()
        .map(|d| d.abs())
        .fold(f64::INFINITY, f64::min);
    if !(min_pivot > SINGULAR_PIVOT * scale) {
        return Err(Error::SingularSystem { pivot: min_pivot });
    }
    lu.solve(&b).ok_or(Error::SingularSystem { pivot: 0.0 })
}
