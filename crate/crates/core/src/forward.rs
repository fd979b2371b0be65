//! Forward pass of the attention regression loss.
//!
//! `L(X, Y) = ½‖softmax_rows(A₁ X A₂ᵀ) A₃ Y − B‖²_F`, with an optional weighted
//! penalty `½‖W A₁ X A₂ᵀ‖²_F + ½‖W A₃ Y‖²_F` where `W` is a positive diagonal.

use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::kron::vec_rowmajor;
use crate::linalg::{all_finite, spectral_norm, Mat, Vector};

/// Relative slack allowed on the norm bounds checked at construction.
const BOUND_SLACK: f64 = 1e-9;

/// Fixed data of one attention regression problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemInstance {
    pub a1: Mat,
    pub a2: Mat,
    pub a3: Mat,
    pub b: Mat,
    /// Diagonal of the positive weight matrix `W`.
    pub w: Vector,
    /// Norm bound on `A₁`, `A₂`, `A₃` and on the entries of `B`.
    pub r: f64,
    /// Strong-convexity target.
    pub l: f64,
}

impl ProblemInstance {
    /// Validates shapes, `W > 0`, `‖Aᵢ‖ ≤ R` and `max |B| ≤ R`.
    pub fn new(a1: Mat, a2: Mat, a3: Mat, b: Mat, w: Vector, r: f64, l: f64) -> Result<Self> {
        let (n, d) = a1.shape();
        if n == 0 || d == 0 {
            return Err(Error::InvalidInstance("n and d must be positive".into()));
        }
        for (name, m) in [("A2", &a2), ("A3", &a3), ("B", &b)] {
            if m.shape() != (n, d) {
                return Err(dim_err(
                    "ProblemInstance",
                    format!("{name} of shape {n}x{d}"),
                    format!("{}x{}", m.nrows(), m.ncols()),
                ));
            }
        }
        if w.len() != n {
            return Err(dim_err("ProblemInstance weights", n, w.len()));
        }
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::InvalidInstance(format!("R must be positive, got {r}")));
        }
        if !(l.is_finite() && l > 0.0) {
            return Err(Error::InvalidInstance(format!("l must be positive, got {l}")));
        }
        if [&a1, &a2, &a3, &b].iter().any(|m| !all_finite(m)) || w.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("problem instance"));
        }
        if let Some(bad) = w.iter().find(|v| **v <= 0.0) {
            return Err(Error::InvalidInstance(format!(
                "weight diagonal must be strictly positive, found {bad}"
            )));
        }
        let limit = r * (1.0 + BOUND_SLACK);
        for (name, m) in [("A1", &a1), ("A2", &a2), ("A3", &a3)] {
            let s = spectral_norm(m);
            if s > limit {
                return Err(Error::InvalidInstance(format!("‖{name}‖ = {s} exceeds R = {r}")));
            }
        }
        let bmax = b.amax();
        if bmax > limit {
            return Err(Error::InvalidInstance(format!("max |B| = {bmax} exceeds R = {r}")));
        }
        Ok(Self { a1, a2, a3, b, w, r, l })
    }

    pub fn n(&self) -> usize {
        self.a1.nrows()
    }

    pub fn d(&self) -> usize {
        self.a1.ncols()
    }

    /// Replace the weight diagonal with `w·1ₙ`.
    pub fn with_uniform_weight(mut self, w: f64) -> Result<Self> {
        if !(w.is_finite() && w > 0.0) {
            return Err(Error::InvalidInstance(format!("weight must be positive, got {w}")));
        }
        self.w = Vector::from_element(self.n(), w);
        Ok(self)
    }

    pub fn with_target(mut self, l: f64) -> Result<Self> {
        if !(l.is_finite() && l > 0.0) {
            return Err(Error::InvalidInstance(format!("l must be positive, got {l}")));
        }
        self.l = l;
        Ok(self)
    }

    pub fn w_min(&self) -> f64 {
        self.w.min()
    }

    /// `W A₁`, the weighted first factor of the regularization Gram.
    pub fn weighted_a1(&self) -> Mat {
        let mut m = self.a1.clone();
        for (j, mut row) in m.row_iter_mut().enumerate() {
            row *= self.w[j];
        }
        m
    }

    fn check_params(&self, p: &ParamState) -> Result<()> {
        let d = self.d();
        if p.x.shape() != (d, d) || p.y.shape() != (d, d) {
            return Err(dim_err(
                "ParamState",
                format!("{d}x{d}"),
                format!("X {:?}, Y {:?}", p.x.shape(), p.y.shape()),
            ));
        }
        if !all_finite(&p.x) || !all_finite(&p.y) {
            return Err(Error::NonFinite("parameters"));
        }
        Ok(())
    }
}

/// The optimization variables `X, Y ∈ ℝ^{d×d}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamState {
    pub x: Mat,
    pub y: Mat,
}

impl ParamState {
    pub fn new(x: Mat, y: Mat) -> Self {
        Self { x, y }
    }

    pub fn zeros(d: usize) -> Self {
        Self::new(Mat::zeros(d, d), Mat::zeros(d, d))
    }

    pub fn from_vecs(x: &Vector, y: &Vector, d: usize) -> Result<Self> {
        Ok(Self::new(
            crate::kron::mat_rowmajor(x, d)?,
            crate::kron::mat_rowmajor(y, d)?,
        ))
    }

    pub fn d(&self) -> usize {
        self.x.nrows()
    }

    pub fn x_vec(&self) -> Vector {
        vec_rowmajor(&self.x)
    }

    pub fn y_vec(&self) -> Vector {
        vec_rowmajor(&self.y)
    }

    /// `‖x − x'‖₂ + ‖y − y'‖₂`, the distance used by the convergence analysis.
    pub fn distance(&self, other: &ParamState) -> f64 {
        (&self.x - &other.x).norm() + (&self.y - &other.y).norm()
    }

    /// R-bounded mode: `‖x‖₂ ≤ R` and every column of `Y` has norm at most `R`.
    pub fn is_bounded(&self, r: f64) -> bool {
        let limit = r * (1.0 + BOUND_SLACK);
        self.x.norm() <= limit && self.y.column_iter().all(|c| c.norm() <= limit)
    }
}

/// Everything the gradient and Hessian routines consume.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Row-stochastic `n × n`; row `j0` is `f(x)_{j0}ᵀ`.
    pub f: Mat,
    /// `A₃ Y`; column `i0` is `h(Y)_{i0}`.
    pub h: Mat,
    /// `f h − B`.
    pub c: Mat,
    /// `log α(x)_{j0}` where `α(x)_{j0} = ⟨exp(𝖠_{j0} x), 1ₙ⟩`.
    pub log_alpha: Vector,
    pub loss: f64,
}

impl ForwardCache {
    pub fn n(&self) -> usize {
        self.f.nrows()
    }

    pub fn d(&self) -> usize {
        self.h.ncols()
    }

    /// `f(x)_{j0}` as a column vector.
    pub fn f_row(&self, j0: usize) -> Vector {
        self.f.row(j0).transpose()
    }

    /// `γ_{j0} = ⟨f(x)_{j0}, h(Y)_{i0}⟩`.
    pub fn gamma(&self, j0: usize, i0: usize) -> f64 {
        self.f.row(j0).transpose().dot(&self.h.column(i0))
    }
}

/// Row softmax of the logits `A₁ X A₂ᵀ`, with row-max shifting.
pub(crate) fn softmax_rows(logits: &Mat) -> (Mat, Vector) {
    let (n, k) = logits.shape();
    let mut f = Mat::zeros(n, k);
    let mut log_alpha = Vector::zeros(n);
    for j in 0..n {
        let row = logits.row(j);
        let mx = row.max();
        let mut sum = 0.0;
        for i in 0..k {
            let e = (row[i] - mx).exp();
            f[(j, i)] = e;
            sum += e;
        }
        for i in 0..k {
            f[(j, i)] /= sum;
        }
        log_alpha[j] = mx + sum.ln();
    }
    (f, log_alpha)
}

/// Compute `f`, `h`, `c` and the loss without forming any `n² × d²` object.
pub fn forward(inst: &ProblemInstance, p: &ParamState) -> Result<ForwardCache> {
    inst.check_params(p)?;
    let logits = &inst.a1 * &p.x * inst.a2.transpose();
    if !all_finite(&logits) {
        return Err(Error::NonFinite("attention logits"));
    }
    let (f, log_alpha) = softmax_rows(&logits);
    let h = &inst.a3 * &p.y;
    let c = &f * &h - &inst.b;
    let loss = 0.5 * c.norm_squared();
    if !loss.is_finite() {
        return Err(Error::NonFinite("loss"));
    }
    Ok(ForwardCache { f, h, c, log_alpha, loss })
}

/// `½‖W A₁ X A₂ᵀ‖²_F + ½‖W A₃ Y‖²_F`.
pub fn regularizer(inst: &ProblemInstance, p: &ParamState) -> Result<f64> {
    inst.check_params(p)?;
    let mut mx = &inst.a1 * &p.x * inst.a2.transpose();
    let mut my = &inst.a3 * &p.y;
    for j in 0..inst.n() {
        let w = inst.w[j];
        mx.row_mut(j).scale_mut(w);
        my.row_mut(j).scale_mut(w);
    }
    Ok(0.5 * (mx.norm_squared() + my.norm_squared()))
}

/// Regularized loss with unit multiplier.
pub fn loss_reg(inst: &ProblemInstance, p: &ParamState) -> Result<f64> {
    objective(inst, p, 1.0)
}

/// `L(X, Y) + ρ · regularizer`.
pub fn objective(inst: &ProblemInstance, p: &ParamState, rho: f64) -> Result<f64> {
    let base = forward(inst, p)?.loss;
    if rho == 0.0 {
        return Ok(base);
    }
    Ok(base + rho * regularizer(inst, p)?)
}

/// Smallest softmax normalizer and whether it clears `exp(−R²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaDiagnostics {
    pub alpha_min: f64,
    pub beta_bound_ok: bool,
}

pub fn alpha_diagnostics(inst: &ProblemInstance, p: &ParamState) -> Result<AlphaDiagnostics> {
    let cache = forward(inst, p)?;
    let log_min = cache.log_alpha.min();
    Ok(AlphaDiagnostics {
        alpha_min: log_min.exp(),
        // compared in log space so huge normalizers never overflow
        beta_bound_ok: log_min >= -inst.r * inst.r,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kron::materialize_kron;
    use crate::oracles::{random_instance, random_params, OracleCap};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny() -> ProblemInstance {
        ProblemInstance::new(
            Mat::from_row_slice(2, 1, &[1.0, 0.0]),
            Mat::from_row_slice(2, 1, &[1.0, -1.0]),
            Mat::from_row_slice(2, 1, &[1.0, 1.0]),
            Mat::zeros(2, 1),
            Vector::from_element(2, 1.0),
            2.0,
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn zero_x_gives_uniform_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let inst = random_instance(&mut rng, 5, 2, 1.0);
        let mut p = random_params(&mut rng, 2, 1.0);
        p.x = Mat::zeros(2, 2);
        let cache = forward(&inst, &p).unwrap();
        for v in cache.f.iter() {
            assert!((v - 0.2).abs() < 1e-15);
        }
        for la in cache.log_alpha.iter() {
            assert!((la - 5f64.ln()).abs() < 1e-14);
        }
    }

    #[test]
    fn exact_fit_has_zero_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut inst = random_instance(&mut rng, 4, 2, 1.0);
        let mut p = random_params(&mut rng, 2, 1.0);
        p.x = Mat::zeros(2, 2);
        let ones = Mat::from_element(4, 4, 0.25);
        inst.b = ones * &inst.a3 * &p.y;
        let cache = forward(&inst, &p).unwrap();
        assert!(cache.c.amax() < 1e-15);
        assert!(cache.loss < 1e-30);
    }

    #[test]
    fn two_token_scalar_example() {
        let inst = tiny();
        let p = ParamState::new(Mat::from_element(1, 1, 1.0), Mat::from_element(1, 1, 1.0));
        let cache = forward(&inst, &p).unwrap();
        let e2 = 1f64.exp().powi(2);
        let expect_f = [e2 / (1.0 + e2), 1.0 / (1.0 + e2), 0.5, 0.5];
        for (k, v) in expect_f.iter().enumerate() {
            assert!((cache.f[(k / 2, k % 2)] - v).abs() < 1e-15);
        }
        // h = A3 Y = [1, 1]; c = f h − 0 = [1, 1]; loss = 1
        assert!((cache.h[(0, 0)] - 1.0).abs() < 1e-15);
        assert!((cache.c[(0, 0)] - 1.0).abs() < 1e-15);
        assert!((cache.c[(1, 0)] - 1.0).abs() < 1e-15);
        assert!((cache.loss - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rows_are_stochastic_and_shift_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let logits = Mat::from_fn(6, 6, |i, j| (i as f64 - j as f64) * 3.0);
        let (f, _) = softmax_rows(&logits);
        for row in f.row_iter() {
            assert!((row.sum() - 1.0).abs() < 1e-12);
            assert!(row.iter().all(|v| *v > 0.0 && *v < 1.0));
            assert!(row.norm() <= 1.0);
        }
        let mut shifted = logits.clone();
        shifted.row_mut(2).add_scalar_mut(17.5);
        let (g, _) = softmax_rows(&shifted);
        assert!((f - g).amax() <= 1e-14);
        let _ = &mut rng;
    }

    #[test]
    fn regularizer_matches_materialized_kron() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut inst = random_instance(&mut rng, 4, 2, 1.0);
        inst.w = Vector::from_fn(4, |i, _| 0.5 + i as f64);
        let p = random_params(&mut rng, 2, 1.0);
        let big = materialize_kron(&inst.a1, &inst.a2, OracleCap::default()).unwrap();
        let wi = crate::linalg::kron(&Mat::from_diagonal(&inst.w), &Mat::identity(4, 4));
        let xterm = 0.5 * (wi * big * p.x_vec()).norm_squared();
        let wa3y = Mat::from_diagonal(&inst.w) * &inst.a3 * &p.y;
        let expect = forward(&inst, &p).unwrap().loss + xterm + 0.5 * wa3y.norm_squared();
        assert!((loss_reg(&inst, &p).unwrap() - expect).abs() <= 1e-12);
    }

    #[test]
    fn regularizer_vanishes_at_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let inst = random_instance(&mut rng, 3, 2, 1.0);
        assert_eq!(regularizer(&inst, &ParamState::zeros(2)).unwrap(), 0.0);
    }

    #[test]
    fn alpha_bound_at_zero_and_single_token() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let inst = random_instance(&mut rng, 4, 2, 1.0);
        let diag = alpha_diagnostics(&inst, &ParamState::zeros(2)).unwrap();
        assert!((diag.alpha_min - 4.0).abs() < 1e-12 && diag.beta_bound_ok);
        let single = random_instance(&mut rng, 1, 1, 1.0);
        let p = random_params(&mut rng, 1, 1.0);
        assert!(alpha_diagnostics(&single, &p).unwrap().beta_bound_ok);
    }

    #[test]
    fn rejects_bad_instances() {
        let a = Mat::from_element(2, 1, 0.1);
        let w = Vector::from_element(2, 1.0);
        let bad_w = Vector::from_vec(vec![1.0, 0.0]);
        assert!(ProblemInstance::new(a.clone(), a.clone(), a.clone(), a.clone(), bad_w, 1.0, 1.0).is_err());
        let big = Mat::from_element(2, 1, 5.0);
        assert!(ProblemInstance::new(big, a.clone(), a.clone(), a.clone(), w.clone(), 1.0, 1.0).is_err());
        let mut nan = a.clone();
        nan[(0, 0)] = f64::NAN;
        assert!(ProblemInstance::new(nan, a.clone(), a.clone(), a, w, 1.0, 1.0).is_err());
    }

    #[test]
    fn nan_params_rejected() {
        let inst = tiny();
        let p = ParamState::new(Mat::from_element(1, 1, f64::NAN), Mat::zeros(1, 1));
        assert!(matches!(forward(&inst, &p), Err(Error::NonFinite(_))));
    }
}
