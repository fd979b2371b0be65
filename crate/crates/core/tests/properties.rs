//! Randomized structural properties.

use attn_newton::forward::{forward, ParamState};
use attn_newton::gradients::grad_fast;
use attn_newton::hessian::HessianBundle;
use attn_newton::kron::{materialize_kron, mat_rowmajor, vec_rowmajor};
use attn_newton::linalg::{max_abs_diff, Mat, Vector};
use attn_newton::oracles::{fd_gradient, random_instance, random_params, OracleCap, FD_GRADIENT_STEP};
use attn_newton::seeds::{rng_for, Stream};
use attn_newton::sketch::{fwht, sparse_hash};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn softmax_rows_are_distributions(seed in any::<u64>(), n in 1usize..12, d in 1usize..4) {
        let mut rng = rng_for(seed, Stream::Verify);
        let inst = random_instance(&mut rng, n, d, 1.0);
        let p = random_params(&mut rng, d, 1.0);
        let cache = forward(&inst, &p).unwrap();
        for row in cache.f.row_iter() {
            prop_assert!((row.sum() - 1.0).abs() < 1e-12);
            prop_assert!(row.iter().all(|&v| v > 0.0));
        }
    }

    #[test]
    fn kronecker_product_matches_matrix_form(seed in any::<u64>(), n in 1usize..6, d in 1usize..4) {
        let mut rng = rng_for(seed, Stream::Verify);
        let inst = random_instance(&mut rng, n, d, 1.0);
        let p = random_params(&mut rng, d, 1.0);
        let big = materialize_kron(&inst.a1, &inst.a2, OracleCap::default()).unwrap();
        let lhs = &big * p.x_vec();
        let rhs = vec_rowmajor(&(&inst.a1 * &p.x * inst.a2.transpose()));
        prop_assert!((lhs - rhs).amax() < 1e-12);
        prop_assert_eq!(mat_rowmajor(&p.x_vec(), d).unwrap(), p.x.clone());
    }

    #[test]
    fn gradient_matches_finite_differences(seed in any::<u64>(), n in 2usize..8, d in 1usize..3) {
        let mut rng = rng_for(seed, Stream::Verify);
        let inst = random_instance(&mut rng, n, d, 1.0);
        let p = random_params(&mut rng, d, 1.0);
        let g = grad_fast(&inst, &p, &forward(&inst, &p).unwrap()).unwrap();
        let x = p.x_vec();
        let fd = fd_gradient(|y| Ok(forward(&inst, &ParamState::from_vecs(&x, y, d)?)?.loss), &p.y_vec(), FD_GRADIENT_STEP).unwrap();
        prop_assert!((&g.gy - &fd).norm() <= 1e-6 * fd.norm().max(1e-8));
    }

    #[test]
    fn hessian_is_symmetric(seed in any::<u64>(), n in 2usize..8, d in 1usize..4) {
        let mut rng = rng_for(seed, Stream::Verify);
        let inst = random_instance(&mut rng, n, d, 1.0);
        let p = random_params(&mut rng, d, 1.0);
        let h = HessianBundle::exact(&forward(&inst, &p).unwrap(), &inst).full();
        prop_assert!(max_abs_diff(&h, &h.transpose()) < 1e-12);
    }

    #[test]
    fn hadamard_transform_is_an_involution_up_to_scale(v in proptest::collection::vec(-10.0f64..10.0, 16)) {
        let twice = fwht(&fwht(&v).unwrap()).unwrap();
        for (a, b) in twice.iter().zip(&v) {
            prop_assert!((a - 16.0 * b).abs() < 1e-9);
        }
    }

    #[test]
    fn sparse_hash_stays_in_range(seed in any::<u64>(), i in 0usize..1000, k in 0usize..8, buckets in 1usize..512) {
        let (bucket, sign) = sparse_hash(seed, 1, i, k, buckets);
        prop_assert!(bucket < buckets);
        prop_assert!(sign == 1.0 || sign == -1.0);
        prop_assert_eq!(sparse_hash(seed, 1, i, k, buckets), (bucket, sign));
    }
}

#[test]
fn zero_vector_roundtrips_through_reshape() {
    let v = Vector::zeros(9);
    assert_eq!(mat_rowmajor(&v, 3).unwrap(), Mat::zeros(3, 3));
}
