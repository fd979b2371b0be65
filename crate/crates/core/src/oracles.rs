//! Independent ground truth: finite differences, random and planted instances,
//! and the closed-form least-squares solution in `Y`.
//!
//! Nothing here calls the fast gradient or Hessian paths.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{forward, ParamState, ProblemInstance};
use crate::linalg::{spectral_norm, symmetrize, Mat, Vector};
use crate::seeds::{rng_for, Stream};

pub const FD_GRADIENT_STEP: f64 = 1e-3;
pub const FD_HESSIAN_STEP: f64 = 1e-4;

/// Size cap for anything that materializes `A₁ ⊗ A₂`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleCap {
    pub max_n: usize,
    pub max_d: usize,
}

impl Default for OracleCap {
    fn default() -> Self {
        Self { max_n: 16, max_d: 4 }
    }
}

impl OracleCap {
    pub fn check(&self, n: usize, d: usize) -> Result<()> {
        if n > self.max_n || d > self.max_d {
            return Err(Error::OracleCap {
                n,
                d,
                max_n: self.max_n,
                max_d: self.max_d,
            });
        }
        Ok(())
    }
}

/// Fourth-order central differences
/// `(8[f(p + h eᵢ) − f(p − h eᵢ)] − [f(p + 2h eᵢ) − f(p − 2h eᵢ)]) / 12h`.
///
/// The wider stencil lets `h` be large enough that rounding stays far below
/// small gradients, while truncation is `O(h⁴)`.
pub fn fd_gradient<F>(f: F, point: &Vector, step: f64) -> Result<Vector>
where
    F: Fn(&Vector) -> Result<f64>,
{
    if !(step > 0.0) {
        return Err(Error::InvalidConfig(format!("finite-difference step must be positive, got {step}")));
    }
    let mut g = Vector::zeros(point.len());
    let mut p = point.clone();
    for i in 0..point.len() {
        let orig = p[i];
        let mut at = |offset: f64| -> Result<f64> {
            p[i] = orig + offset;
            let v = f(&p)?;
            if !v.is_finite() {
                return Err(Error::NonFinite("finite-difference evaluation"));
            }
            Ok(v)
        };
        let (f1, fm1, f2, fm2) = (at(step)?, at(-step)?, at(2.0 * step)?, at(-2.0 * step)?);
        p[i] = orig;
        g[i] = (8.0 * (f1 - fm1) - (f2 - fm2)) / (12.0 * step);
    }
    Ok(g)
}

/// Central-difference Jacobian of a vector map; column `i` is `∂g/∂pᵢ`.
pub fn fd_jacobian<G>(g: G, point: &Vector, step: f64) -> Result<Mat>
where
    G: Fn(&Vector) -> Result<Vector>,
{
    if !(step > 0.0) {
        return Err(Error::InvalidConfig(format!("finite-difference step must be positive, got {step}")));
    }
    let mut p = point.clone();
    let mut cols = Vec::with_capacity(point.len());
    for i in 0..point.len() {
        let orig = p[i];
        p[i] = orig + step;
        let gp = g(&p)?;
        p[i] = orig - step;
        let gm = g(&p)?;
        p[i] = orig;
        let col = (gp - gm) / (2.0 * step);
        if col.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("finite-difference evaluation"));
        }
        cols.push(col);
    }
    if cols.is_empty() {
        return Ok(Mat::zeros(0, 0));
    }
    Ok(Mat::from_columns(&cols))
}

/// Symmetrized finite-difference Hessian from a gradient map.
pub fn fd_hessian<G>(g: G, point: &Vector, step: f64) -> Result<Mat>
where
    G: Fn(&Vector) -> Result<Vector>,
{
    fd_jacobian(g, point, step).map(|j| symmetrize(&j))
}

/// Gaussian `rows × cols` rescaled to spectral norm exactly `r`.
pub fn gaussian_with_norm<R: Rng>(rng: &mut R, rows: usize, cols: usize, r: f64) -> Mat {
    let m = Mat::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal));
    let s = spectral_norm(&m);
    if s == 0.0 {
        return m;
    }
    m * (r / s)
}

fn gaussian_direction<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Mat {
    let m = Mat::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal));
    let nrm = m.norm();
    if nrm == 0.0 {
        m
    } else {
        m / nrm
    }
}

/// Random R-bounded instance with `W = I`, `l = 1` and `B` uniform in `[−R/2, R/2]`.
pub fn random_instance<R: Rng>(rng: &mut R, n: usize, d: usize, r: f64) -> ProblemInstance {
    let a1 = gaussian_with_norm(rng, n, d, r);
    let a2 = gaussian_with_norm(rng, n, d, r);
    let a3 = gaussian_with_norm(rng, n, d, r);
    let b = Mat::from_fn(n, d, |_, _| rng.random_range(-0.5 * r..0.5 * r));
    ProblemInstance::new(a1, a2, a3, b, Vector::from_element(n, 1.0), r, 1.0)
        .expect("random instance satisfies its own bounds")
}

/// Random parameters with `‖x‖₂ ≤ R` and every `Y` column of norm at most `R`.
pub fn random_params<R: Rng>(rng: &mut R, d: usize, r: f64) -> ParamState {
    let x = gaussian_direction(rng, d, d) * (r * rng.random_range(0.2..1.0));
    let mut y = Mat::zeros(d, d);
    for i in 0..d {
        let col = gaussian_direction(rng, d, 1) * (r * rng.random_range(0.2..1.0));
        y.set_column(i, &col.column(0));
    }
    ParamState::new(x, y)
}

/// A problem with a known zero-loss minimizer `(X*, Y*)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedInstance {
    pub instance: ProblemInstance,
    pub x_star: Mat,
    pub y_star: Mat,
}

impl PlantedInstance {
    pub fn optimum(&self) -> ParamState {
        ParamState::new(self.x_star.clone(), self.y_star.clone())
    }
}

/// Plant `(X*, Y*)` with `‖x*‖ = R·scale` and `Y*` columns of norm
/// `scale·min(R, 1)`, then set `B = f(X*) h(Y*)`.
pub fn plant(seed: u64, n: usize, d: usize, r: f64, scale: f64) -> Result<PlantedInstance> {
    if n == 0 || d == 0 {
        return Err(Error::InvalidConfig("plant needs n, d >= 1".into()));
    }
    if !(scale >= 0.0 && scale.is_finite()) {
        return Err(Error::InvalidConfig(format!("plant scale must be non-negative, got {scale}")));
    }
    let mut rng = rng_for(seed, Stream::Instance);
    let a1 = gaussian_with_norm(&mut rng, n, d, r);
    let a2 = gaussian_with_norm(&mut rng, n, d, r);
    let a3 = gaussian_with_norm(&mut rng, n, d, r);
    let x_star = gaussian_direction(&mut rng, d, d) * (r * scale);
    let ycol = scale * r.min(1.0);
    let mut y_star = Mat::zeros(d, d);
    for i in 0..d {
        let col = gaussian_direction(&mut rng, d, 1) * ycol;
        y_star.set_column(i, &col.column(0));
    }
    let star = ParamState::new(x_star.clone(), y_star.clone());
    let w = Vector::from_element(n, 1.0);
    let probe = ProblemInstance::new(
        a1.clone(),
        a2.clone(),
        a3.clone(),
        Mat::zeros(n, d),
        w.clone(),
        r,
        1.0,
    )?;
    let cache = forward(&probe, &star)?;
    let b = &cache.f * &cache.h;
    let instance = ProblemInstance::new(a1, a2, a3, b, w, r, 1.0)?;
    let check = forward(&instance, &star)?;
    if check.loss > 1e-20 {
        return Err(Error::InvalidInstance(format!(
            "planted loss {} exceeds 1e-20",
            check.loss
        )));
    }
    Ok(PlantedInstance { instance, x_star, y_star })
}

/// `argmin_Y ‖f(X) A₃ Y − B‖_F` via the `d × d` normal equations, with a
/// pseudo-inverse (relative cutoff 1e−10) when `f(X) A₃` is rank deficient.
pub fn y_least_squares(inst: &ProblemInstance, x: &Mat) -> Result<Mat> {
    let d = inst.d();
    let cache = forward(inst, &ParamState::new(x.clone(), Mat::zeros(d, d)))?;
    let fa3 = &cache.f * &inst.a3;
    let gram = fa3.transpose() * &fa3;
    let rhs = fa3.transpose() * &inst.b;
    let svd = gram.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let eps = 1e-10 * smax.max(f64::MIN_POSITIVE);
    let solve = |r: &Mat| svd.solve(r, eps).map_err(|e| Error::Eigen(e.to_string()));
    let y = solve(&rhs)?;
    // one refinement sweep recovers the accuracy the SVD loses on small singular values
    let correction = solve(&(&rhs - &gram * &y))?;
    Ok(y + correction)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fd_gradient_of_quadratic() {
        let x = Vector::from_vec(vec![0.3, -1.2, 2.0]);
        let g = fd_gradient(|p| Ok(0.5 * p.norm_squared()), &x, FD_GRADIENT_STEP).unwrap();
        assert!((g - &x).amax() <= 1e-9);
        let z = fd_gradient(|_| Ok(4.0), &x, FD_GRADIENT_STEP).unwrap();
        assert_eq!(z.amax(), 0.0);
    }

    #[test]
    fn fd_hessian_of_linear_map() {
        let a = Mat::from_row_slice(2, 2, &[1.0, 2.0, -3.0, 4.0]);
        let x = Vector::from_vec(vec![0.5, 0.25]);
        let h = fd_hessian(|p| Ok(&a * p), &x, FD_HESSIAN_STEP).unwrap();
        assert!((h - symmetrize(&a)).amax() <= 1e-10);
        let z = fd_hessian(|p| Ok(Vector::zeros(p.len())), &x, FD_HESSIAN_STEP).unwrap();
        assert_eq!(z.amax(), 0.0);
    }

    #[test]
    fn fd_rejects_bad_step_and_nan() {
        let x = Vector::zeros(2);
        assert!(fd_gradient(|_| Ok(0.0), &x, 0.0).is_err());
        assert!(fd_gradient(|_| Ok(f64::NAN), &x, 1e-3).is_err());
    }

    #[test]
    fn fd_richardson_consistency() {
        // halving h shrinks the error roughly fourfold on a smooth function
        let f = |p: &Vector| Ok(p[0].sin() * p[1].exp());
        let x = Vector::from_vec(vec![0.7, -0.3]);
        let exact = Vector::from_vec(vec![0.7f64.cos() * (-0.3f64).exp(), 0.7f64.sin() * (-0.3f64).exp()]);
        let e1 = (fd_gradient(f, &x, 1e-2).unwrap() - &exact).amax();
        let e2 = (fd_gradient(f, &x, 5e-3).unwrap() - &exact).amax();
        assert!(e2 < e1 / 3.0, "e1 = {e1}, e2 = {e2}");
    }

    #[test]
    fn plant_has_zero_loss() {
        for seed in 0..5 {
            let p = plant(seed, 6, 3, 1.0, 0.8).unwrap();
            let cache = forward(&p.instance, &p.optimum()).unwrap();
            assert!(cache.loss <= 1e-20);
        }
    }

    #[test]
    fn plant_at_zero_scale_is_trivial() {
        let p = plant(3, 5, 2, 1.0, 0.0).unwrap();
        assert_eq!(p.x_star.amax(), 0.0);
        assert_eq!(p.instance.b.amax(), 0.0);
    }

    #[test]
    fn plant_single_token_copies_h() {
        let p = plant(4, 1, 2, 1.0, 0.5).unwrap();
        let h = &p.instance.a3 * &p.y_star;
        assert!((h - &p.instance.b).amax() < 1e-15);
    }

    #[test]
    fn y_least_squares_recovers_generator() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut inst = random_instance(&mut rng, 8, 3, 1.0);
        let params = random_params(&mut rng, 3, 1.0);
        let cache = forward(&inst, &params).unwrap();
        inst.b = &cache.f * &cache.h;
        let y = y_least_squares(&inst, &params.x).unwrap();
        assert!((y - &params.y).amax() < 1e-8);
        inst.b = Mat::zeros(8, 3);
        assert!(y_least_squares(&inst, &params.x).unwrap().amax() < 1e-14);
    }

    #[test]
    fn cap_enforced() {
        let cap = OracleCap::default();
        assert!(cap.check(16, 4).is_ok());
        assert!(cap.check(17, 4).is_err());
        assert!(cap.check(4, 5).is_err());
    }
}
