//! Row-major vectorization and matrix-free Kronecker blocks.
//!
//! Throughout the crate `vec(X)` stacks the rows of `X`, so entry `(i, j)` of a
//! `d × d` matrix lands at index `i·d + j`. Under this convention
//! `vec(A₁ X A₂ᵀ) = (A₁ ⊗ A₂) vec(X)`, and the `n × d²` slab of `A₁ ⊗ A₂` whose
//! rows share row `j0` of `A₁` acts on `x` as row `j0` of `A₁ X A₂ᵀ`.

use crate::error::{dim_err, Result};
use crate::linalg::{kron, Mat, Vector};
use crate::oracles::OracleCap;

/// Stack the rows of a square matrix into a vector.
pub fn vec_rowmajor(x: &Mat) -> Vector {
    let (r, c) = x.shape();
    Vector::from_iterator(r * c, (0..r).flat_map(|i| (0..c).map(move |j| x[(i, j)])))
}

/// Inverse of [`vec_rowmajor`] for a `d × d` matrix.
pub fn mat_rowmajor(x: &Vector, d: usize) -> Result<Mat> {
    if x.len() != d * d {
        return Err(dim_err("mat_rowmajor", d * d, x.len()));
    }
    Ok(Mat::from_row_slice(d, d, x.as_slice()))
}

/// The `n × d²` block `𝖠_{j0}` of `A₁ ⊗ A₂`, kept in factored form.
#[derive(Debug, Clone)]
pub struct KronBlock<'a> {
    a1_row: Vector,
    a2: &'a Mat,
    j0: usize,
}

impl<'a> KronBlock<'a> {
    pub fn new(a1: &Mat, a2: &'a Mat, j0: usize) -> Result<Self> {
        if a1.ncols() != a2.ncols() {
            return Err(dim_err("KronBlock columns", a1.ncols(), a2.ncols()));
        }
        if j0 >= a1.nrows() {
            return Err(dim_err("KronBlock row index", format!("< {}", a1.nrows()), j0));
        }
        Ok(Self {
            a1_row: a1.row(j0).transpose(),
            a2,
            j0,
        })
    }

    pub fn j0(&self) -> usize {
        self.j0
    }

    pub fn a1_row(&self) -> &Vector {
        &self.a1_row
    }

    fn d(&self) -> usize {
        self.a1_row.len()
    }

    /// `𝖠_{j0} x`, i.e. row `j0` of `A₁ mat(x) A₂ᵀ` as a column vector.
    pub fn apply(&self, x: &Vector) -> Result<Vector> {
        let d = self.d();
        let xm = mat_rowmajor(x, d)?;
        let t = xm.transpose() * &self.a1_row;
        Ok(self.a2 * t)
    }

    /// `𝖠_{j0}ᵀ v = vec(a ⊗ (A₂ᵀ v))` where `a` is row `j0` of `A₁`.
    pub fn apply_transpose(&self, v: &Vector) -> Result<Vector> {
        if v.len() != self.a2.nrows() {
            return Err(dim_err("KronBlock::apply_transpose", self.a2.nrows(), v.len()));
        }
        let d = self.d();
        let s = self.a2.transpose() * v;
        Ok(Vector::from_fn(d * d, |idx, _| {
            self.a1_row[idx / d] * s[idx % d]
        }))
    }
}

/// Dense `A₁ ⊗ A₂ ∈ ℝ^{n²×d²}`. Oracle use only; refuses sizes above `cap`.
pub fn materialize_kron(a1: &Mat, a2: &Mat, cap: OracleCap) -> Result<Mat> {
    cap.check(a1.nrows().max(a2.nrows()), a1.ncols().max(a2.ncols()))?;
    Ok(kron(a1, a2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Mat {
        Mat::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn vec_of_two_by_two() {
        let x = Mat::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(vec_rowmajor(&x).as_slice(), &[1.0, 2.0, 3.0, 4.0]);
        let one = Mat::from_row_slice(1, 1, &[7.0]);
        assert_eq!(vec_rowmajor(&one).as_slice(), &[7.0]);
    }

    #[test]
    fn mat_rejects_bad_length() {
        assert!(mat_rowmajor(&Vector::zeros(3), 2).is_err());
    }

    #[test]
    fn tensor_trick_holds_under_rowmajor() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (n, d) = (3, 2);
        let a1 = rand_mat(&mut rng, n, d);
        let a2 = rand_mat(&mut rng, n, d);
        let x = rand_mat(&mut rng, d, d);
        let lhs = vec_rowmajor(&(&a1 * &x * a2.transpose()));
        let big = materialize_kron(&a1, &a2, OracleCap::default()).unwrap();
        let rhs = big * vec_rowmajor(&x);
        assert!((lhs - rhs).amax() <= 1e-12);
        assert_eq!(mat_rowmajor(&vec_rowmajor(&x), d).unwrap(), x);
    }

    #[test]
    fn block_apply_scalar_case() {
        let a1 = Mat::from_row_slice(1, 1, &[2.0]);
        let a2 = Mat::from_row_slice(1, 1, &[3.0]);
        let blk = KronBlock::new(&a1, &a2, 0).unwrap();
        assert_eq!(blk.apply(&Vector::from_vec(vec![5.0])).unwrap()[0], 30.0);
        assert_eq!(blk.apply_transpose(&Vector::from_vec(vec![1.0])).unwrap()[0], 6.0);
        assert_eq!(blk.apply(&Vector::zeros(1)).unwrap()[0], 0.0);
    }

    #[test]
    fn blocks_match_materialized_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (n, d) = (4, 2);
        let a1 = rand_mat(&mut rng, n, d);
        let a2 = rand_mat(&mut rng, n, d);
        let big = materialize_kron(&a1, &a2, OracleCap::default()).unwrap();
        let x = Vector::from_fn(d * d, |_, _| rng.random_range(-1.0..1.0));
        let v = Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let full = &big * &x;
        for j0 in 0..n {
            let blk = KronBlock::new(&a1, &a2, j0).unwrap();
            let slab = big.rows(j0 * n, n).into_owned();
            let ax = blk.apply(&x).unwrap();
            assert!((&ax - full.rows(j0 * n, n)).amax() <= 1e-12);
            let atv = blk.apply_transpose(&v).unwrap();
            assert!((&atv - slab.transpose() * &v).amax() <= 1e-12);
            // adjoint identity
            assert!((ax.dot(&v) - x.dot(&atv)).abs() <= 1e-12);
        }
        assert!(blk_zero_maps_to_zero(&a1, &a2));
    }

    fn blk_zero_maps_to_zero(a1: &Mat, a2: &Mat) -> bool {
        let blk = KronBlock::new(a1, a2, 0).unwrap();
        blk.apply_transpose(&Vector::zeros(a2.nrows())).unwrap().amax() == 0.0
    }

    #[test]
    fn materialize_small_cases() {
        let one = Mat::from_row_slice(1, 1, &[1.0]);
        let cap = OracleCap::default();
        assert_eq!(materialize_kron(&one, &one, cap).unwrap(), one);
        let i2 = Mat::identity(2, 2);
        assert_eq!(materialize_kron(&i2, &i2, cap).unwrap(), Mat::identity(4, 4));
        let too_big = Mat::zeros(17, 2);
        assert!(materialize_kron(&too_big, &too_big, cap).is_err());
    }
}
