//! Dense helpers shared by the Hessian, sketch and solver modules.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// `(m + mᵀ) / 2`.
pub fn symmetrize(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

/// Eigenvalues of the symmetrized matrix, ascending.
pub fn sym_eigenvalues(m: &Mat) -> Result<Vec<f64>> {
    if m.nrows() != m.ncols() {
        return Err(Error::Eigen(format!(
            "matrix is {}x{}, expected square",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Eigen("matrix has non-finite entries".into()));
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::Eigen("eigenvalues did not converge".into()));
    }
    vals.sort_by(|a, b| a.total_cmp(b));
    Ok(vals)
}

pub fn lambda_min(m: &Mat) -> Result<f64> {
    sym_eigenvalues(m).map(|v| v.first().copied().unwrap_or(0.0))
}

pub fn lambda_max(m: &Mat) -> Result<f64> {
    sym_eigenvalues(m).map(|v| v.last().copied().unwrap_or(0.0))
}

/// Largest singular value.
pub fn spectral_norm(m: &Mat) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.singular_values().max()
}

/// Smallest singular value over `min(rows, cols)` values.
pub fn sigma_min(m: &Mat) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.singular_values().min()
}

/// Kronecker product with the row-major index convention
/// `(a ⊗ b)[(i1·p + i2), (j1·q + j2)] = a[i1, j1] · b[i2, j2]`.
pub fn kron(a: &Mat, b: &Mat) -> Mat {
    let (p, q) = b.shape();
    Mat::from_fn(a.nrows() * p, a.ncols() * q, |r, c| {
        a[(r / p, c / q)] * b[(r % p, c % q)]
    })
}

/// Max-abs entrywise difference.
pub fn max_abs_diff(a: &Mat, b: &Mat) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn max_abs(a: &Mat) -> f64 {
    a.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

/// Entrywise discrepancy scaled by `max(1, max|b|)`.
pub fn scaled_diff(a: &Mat, b: &Mat) -> f64 {
    max_abs_diff(a, b) / max_abs(b).max(1.0)
}

pub fn all_finite(m: &Mat) -> bool {
    m.iter().all(|v| v.is_finite())
}

/// Median of a non-empty slice.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let k = v.len();
    if k == 0 {
        return f64::NAN;
    }
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.max(1e-12).ln()).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let num: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let den: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    num / den
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kron_identity() {
        let i2 = Mat::identity(2, 2);
        assert_eq!(kron(&i2, &i2), Mat::identity(4, 4));
    }

    #[test]
    fn kron_column_vectors() {
        let a = Mat::from_row_slice(2, 1, &[2.0, 3.0]);
        let b = Mat::from_row_slice(2, 1, &[5.0, 7.0]);
        let k = kron(&a, &b);
        assert_eq!(k.as_slice(), &[10.0, 14.0, 15.0, 21.0]);
    }

    #[test]
    fn eigen_and_norms() {
        let m = Mat::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let ev = sym_eigenvalues(&m).unwrap();
        assert!((ev[0] - 1.0).abs() < 1e-12 && (ev[1] - 3.0).abs() < 1e-12);
        assert!((spectral_norm(&m) - 3.0).abs() < 1e-12);
        assert!((sigma_min(&m) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn slope_of_power_law() {
        let xs = [1.0, 2.0, 4.0, 8.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powi(2)).collect();
        assert!((loglog_slope(&xs, &ys) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
