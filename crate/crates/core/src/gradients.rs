//! Gradients of the loss and of the weighted penalty.

use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Result};
use crate::forward::{ForwardCache, ParamState, ProblemInstance};
use crate::kron::{materialize_kron, vec_rowmajor};
use crate::linalg::{Mat, Vector};
use crate::oracles::OracleCap;

/// `(∂/∂x, ∂/∂y)` with both parts in row-major vectorization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientPair {
    pub gx: Vector,
    pub gy: Vector,
}

impl GradientPair {
    pub fn zeros(d: usize) -> Self {
        Self {
            gx: Vector::zeros(d * d),
            gy: Vector::zeros(d * d),
        }
    }

    pub fn norm(&self) -> f64 {
        (self.gx.norm_squared() + self.gy.norm_squared()).sqrt()
    }

    pub fn axpy(&mut self, alpha: f64, other: &GradientPair) {
        self.gx.axpy(alpha, &other.gx, 1.0);
        self.gy.axpy(alpha, &other.gy, 1.0);
    }

    pub fn is_finite(&self) -> bool {
        self.gx.iter().chain(self.gy.iter()).all(|v| v.is_finite())
    }
}

/// The `n × n` matrix whose row `j0` is `f_{j0} ∘ q_{j0} − ⟨f_{j0}, q_{j0}⟩ f_{j0}`
/// with `q = h cᵀ`.
pub fn p_matrix(cache: &ForwardCache) -> Mat {
    let n = cache.n();
    // column j0 of q is Σ_{i0} c_{j0,i0} h_{i0}
    let q = &cache.h * cache.c.transpose();
    let mut p = Mat::zeros(n, n);
    for j0 in 0..n {
        let f = cache.f.row(j0);
        let qj = q.column(j0);
        let mean: f64 = f.iter().zip(qj.iter()).map(|(a, b)| a * b).sum();
        for j1 in 0..n {
            p[(j0, j1)] = f[j1] * (qj[j1] - mean);
        }
    }
    p
}

/// Matrix-view gradients: `gx = vec(A₁ᵀ p A₂)`, `gy = vec(A₃ᵀ fᵀ c)`.
pub fn grad_fast(inst: &ProblemInstance, _p: &ParamState, cache: &ForwardCache) -> Result<GradientPair> {
    if cache.n() != inst.n() || cache.d() != inst.d() {
        return Err(dim_err(
            "grad_fast cache",
            format!("n={}, d={}", inst.n(), inst.d()),
            format!("n={}, d={}", cache.n(), cache.d()),
        ));
    }
    let p = p_matrix(cache);
    let gx = vec_rowmajor(&(inst.a1.transpose() * p * &inst.a2));
    let q_tilde = cache.f.transpose() * &cache.c;
    let gy = vec_rowmajor(&(inst.a3.transpose() * q_tilde));
    Ok(GradientPair { gx, gy })
}

/// Per-entry gradient of `L_{j0,i0}` in `x`, computed from the materialized
/// Kronecker block. Oracle only.
pub fn grad_naive_x(
    inst: &ProblemInstance,
    cache: &ForwardCache,
    j0: usize,
    i0: usize,
    cap: OracleCap,
) -> Result<Vector> {
    let (n, d) = (inst.n(), inst.d());
    let big = materialize_kron(&inst.a1, &inst.a2, cap)?;
    let block = big.rows(j0 * n, n);
    let f = cache.f_row(j0);
    let v = cache.h.column(i0);
    let c = cache.c[(j0, i0)];
    let gamma = f.dot(&v);
    Ok(Vector::from_fn(d * d, |i, _| {
        let col = block.column(i);
        let fav: f64 = (0..n).map(|k| f[k] * col[k] * v[k]).sum();
        let fa = f.dot(&col);
        c * (fav - gamma * fa)
    }))
}

/// Gradient of `½‖W A₁ X A₂ᵀ‖²_F + ½‖W A₃ Y‖²_F`.
pub fn grad_reg(inst: &ProblemInstance, p: &ParamState) -> Result<GradientPair> {
    let d = inst.d();
    if p.d() != d {
        return Err(dim_err("grad_reg", d, p.d()));
    }
    let w2 = inst.w.map(|w| w * w);
    let mut mx = &inst.a1 * &p.x * inst.a2.transpose();
    let mut my = &inst.a3 * &p.y;
    for j in 0..inst.n() {
        mx.row_mut(j).scale_mut(w2[j]);
        my.row_mut(j).scale_mut(w2[j]);
    }
    Ok(GradientPair {
        gx: vec_rowmajor(&(inst.a1.transpose() * mx * &inst.a2)),
        gy: vec_rowmajor(&(inst.a3.transpose() * my)),
    })
}

/// Gradient of `L + ρ·penalty`.
pub fn grad_total(
    inst: &ProblemInstance,
    p: &ParamState,
    cache: &ForwardCache,
    rho: f64,
) -> Result<GradientPair> {
    let mut g = grad_fast(inst, p, cache)?;
    if rho != 0.0 {
        g.axpy(rho, &grad_reg(inst, p)?);
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::{forward, loss_reg, objective};
    use crate::oracles::{fd_gradient, plant, random_instance, random_params, FD_GRADIENT_STEP};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rel_err(a: &Vector, b: &Vector) -> f64 {
        (a - b).norm() / b.norm().max(1e-12)
    }

    #[test]
    fn planted_optimum_has_zero_gradient() {
        let pl = plant(12, 8, 3, 1.0, 0.7).unwrap();
        let p = pl.optimum();
        let cache = forward(&pl.instance, &p).unwrap();
        let g = grad_fast(&pl.instance, &p, &cache).unwrap();
        assert!(g.gx.amax() <= 1e-12 && g.gy.amax() <= 1e-12);
    }

    #[test]
    fn single_token_has_no_x_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let inst = random_instance(&mut rng, 1, 2, 1.0);
        let p = random_params(&mut rng, 2, 1.0);
        let cache = forward(&inst, &p).unwrap();
        let g = grad_fast(&inst, &p, &cache).unwrap();
        assert!(g.gx.amax() < 1e-16);
    }

    #[test]
    fn matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let (n, d) = (8, 3);
        let inst = random_instance(&mut rng, n, d, 1.0);
        let p = random_params(&mut rng, d, 1.0);
        let cache = forward(&inst, &p).unwrap();
        let g = grad_fast(&inst, &p, &cache).unwrap();
        let y = p.y_vec();
        let fx = fd_gradient(
            |x| Ok(forward(&inst, &ParamState::from_vecs(x, &y, d)?)?.loss),
            &p.x_vec(),
            FD_GRADIENT_STEP,
        )
        .unwrap();
        let x = p.x_vec();
        let fy = fd_gradient(
            |yv| Ok(forward(&inst, &ParamState::from_vecs(&x, yv, d)?)?.loss),
            &y,
            FD_GRADIENT_STEP,
        )
        .unwrap();
        assert!(rel_err(&g.gx, &fx) <= 1e-6, "gx rel err {}", rel_err(&g.gx, &fx));
        assert!(rel_err(&g.gy, &fy) <= 1e-6);
    }

    #[test]
    fn naive_terms_sum_to_fast_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let (n, d) = (5, 2);
        let inst = random_instance(&mut rng, n, d, 1.0);
        let p = random_params(&mut rng, d, 1.0);
        let cache = forward(&inst, &p).unwrap();
        let mut sum = Vector::zeros(d * d);
        for j0 in 0..n {
            for i0 in 0..d {
                sum += grad_naive_x(&inst, &cache, j0, i0, OracleCap::default()).unwrap();
            }
        }
        let g = grad_fast(&inst, &p, &cache).unwrap();
        assert!((sum - g.gx).amax() <= 1e-10);
    }

    #[test]
    fn naive_zero_when_residual_zero() {
        let pl = plant(5, 4, 2, 1.0, 0.5).unwrap();
        let cache = forward(&pl.instance, &pl.optimum()).unwrap();
        let g = grad_naive_x(&pl.instance, &cache, 1, 1, OracleCap::default()).unwrap();
        assert!(g.amax() < 1e-15);
    }

    #[test]
    fn reg_gradient_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let inst = random_instance(&mut rng, 4, 2, 1.0);
        let g0 = grad_reg(&inst, &ParamState::zeros(2)).unwrap();
        assert_eq!(g0.norm(), 0.0);

        let one = Mat::from_element(1, 1, 1.0);
        let scalar = ProblemInstance::new(
            one.clone(),
            one.clone(),
            one.clone(),
            Mat::zeros(1, 1),
            Vector::from_element(1, 1.0),
            1.0,
            1.0,
        )
        .unwrap();
        let p = ParamState::new(Mat::from_element(1, 1, 3.0), Mat::zeros(1, 1));
        assert_eq!(grad_reg(&scalar, &p).unwrap().gx[0], 3.0);
    }

    #[test]
    fn reg_gradient_matches_fd_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let d = 2;
        let mut inst = random_instance(&mut rng, 5, d, 1.0);
        inst.w = Vector::from_fn(5, |i, _| 0.7 + 0.3 * i as f64);
        let p = random_params(&mut rng, d, 1.0);
        let y = p.y_vec();
        let x = p.x_vec();
        let reg_only = |xv: &Vector, yv: &Vector| -> Result<f64> {
            let q = ParamState::from_vecs(xv, yv, d)?;
            Ok(loss_reg(&inst, &q)? - objective(&inst, &q, 0.0)?)
        };
        let fx = fd_gradient(|xv| reg_only(xv, &y), &x, FD_GRADIENT_STEP).unwrap();
        let fy = fd_gradient(|yv| reg_only(&x, yv), &y, FD_GRADIENT_STEP).unwrap();
        let g = grad_reg(&inst, &p).unwrap();
        assert!(rel_err(&g.gx, &fx) <= 1e-6);
        assert!(rel_err(&g.gy, &fy) <= 1e-6);
    }
}
