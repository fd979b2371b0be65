//! Hessian blocks of the attention regression loss.
//!
//! The full Hessian over `(x, y) ∈ ℝ^{2d²}` is
//!
//! ```text
//! H = [ Hxx   Hxy      ]
//!     [ Hxyᵀ  Hyy ⊗ I_d ]
//! ```
//!
//! `Hyy = A₃ᵀ fᵀ f A₃` is a single `d × d` matrix. Under row-major `vec(Y)` the
//! `y`-block is `Hyy ⊗ I_d`, i.e. one copy of `Hyy` per column of `Y` after a
//! permutation. Column `i1·d + i0` of `Hxy` is the derivative with respect to
//! `Y_{i1,i0}`.
//!
//! Entry-level formulas are the reference; the structured assemblies
//! (`hess_xx_block_fast`, `hess_xy`) are checked against them and against
//! finite differences.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{ForwardCache, ProblemInstance};
use crate::kron::materialize_kron;
use crate::linalg::{kron, lambda_max, lambda_min, sigma_min, spectral_norm, Mat, Vector};
use crate::oracles::OracleCap;

/// Absolute tolerance on eigenvalue comparisons.
pub const EIG_TOL: f64 = 1e-8;

/// Which coefficients to use for the per-entry `x`-Hessian.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CoefficientForm {
    /// Second derivative of `½ c²` as it actually is.
    Derived,
    /// Coefficients as printed in the source derivation: the third-order term
    /// `⟨f∘aᵢ∘aₗ, v⟩ − γ⟨f∘aᵢ∘aₗ, 1⟩` appears as `(1 − γ)⟨f∘aᵢ∘aₗ, v⟩`, and the
    /// symmetric rank-2 part carries `−(2γ + c)`. Kept to quantify the gap.
    AsPrinted,
}

/// The four `n × n` pieces of `B(x)` for one `(j0, i0)` pair, so that
/// `∂²L_{j0,i0}/∂x∂x = 𝖠_{j0}ᵀ (diag + rank1 + rank2 + rank3) 𝖠_{j0}`.
#[derive(Debug, Clone)]
pub struct BParts {
    pub diag: Mat,
    pub rank1: Mat,
    pub rank2: Mat,
    pub rank3: Mat,
}

impl BParts {
    pub fn total(&self) -> Mat {
        &self.diag + &self.rank1 + &self.rank2 + &self.rank3
    }
}

/// `B(x)` pieces for `(j0, i0)` with `v = h(Y)_{i0}`.
pub fn b_parts(cache: &ForwardCache, j0: usize, i0: usize, form: CoefficientForm) -> BParts {
    let f = cache.f_row(j0);
    let v: Vector = cache.h.column(i0).into_owned();
    let c = cache.c[(j0, i0)];
    let gamma = f.dot(&v);
    let fv = f.component_mul(&v);
    let sym = &fv * f.transpose() + &f * fv.transpose();
    let (diag_vec, rank1_coef) = match form {
        CoefficientForm::Derived => (fv.clone() * c - f.clone() * (c * gamma), -(gamma + c)),
        CoefficientForm::AsPrinted => (fv.clone() * ((1.0 - gamma) * c), -(2.0 * gamma + c)),
    };
    BParts {
        diag: Mat::from_diagonal(&diag_vec),
        rank1: sym * rank1_coef,
        rank2: &f * f.transpose() * (2.0 * gamma * c + gamma * gamma),
        rank3: &fv * fv.transpose(),
    }
}

fn xx_entry_from_columns(
    f: &Vector,
    v: &Vector,
    c: f64,
    ai: &Vector,
    al: &Vector,
    form: CoefficientForm,
) -> f64 {
    let gamma = f.dot(v);
    let fai_v = f.component_mul(ai).dot(v);
    let fal_v = f.component_mul(al).dot(v);
    let f_ai = f.dot(ai);
    let f_al = f.dot(al);
    let faial = f.component_mul(ai).component_mul(al);
    let gi = fai_v - gamma * f_ai;
    let gl = fal_v - gamma * f_al;
    let third = match form {
        CoefficientForm::Derived => faial.dot(v) - gamma * faial.sum(),
        CoefficientForm::AsPrinted => faial.dot(v) * (1.0 - gamma),
    };
    gi * gl + c * (third - fai_v * f_al - fal_v * f_ai + 2.0 * f_ai * f_al * gamma)
}

/// `∂²L_{j0,i0} / ∂xᵢ∂xₗ` from the closed-form entry expression.
#[allow(clippy::too_many_arguments)]
pub fn hess_xx_entry(
    cache: &ForwardCache,
    inst: &ProblemInstance,
    j0: usize,
    i0: usize,
    i: usize,
    l: usize,
    form: CoefficientForm,
    cap: OracleCap,
) -> Result<f64> {
    let n = inst.n();
    let big = materialize_kron(&inst.a1, &inst.a2, cap)?;
    let block = big.rows(j0 * n, n);
    Ok(xx_entry_from_columns(
        &cache.f_row(j0),
        &cache.h.column(i0).into_owned(),
        cache.c[(j0, i0)],
        &block.column(i).into_owned(),
        &block.column(l).into_owned(),
        form,
    ))
}

/// `Hxx = Σ_{j0,i0} [∂²L_{j0,i0}/∂xᵢ∂xₗ]` assembled entry by entry. Oracle only.
pub fn hess_xx_entrywise(
    cache: &ForwardCache,
    inst: &ProblemInstance,
    form: CoefficientForm,
    cap: OracleCap,
) -> Result<Mat> {
    let (n, d) = (inst.n(), inst.d());
    let big = materialize_kron(&inst.a1, &inst.a2, cap)?;
    let dd = d * d;
    let mut hxx = Mat::zeros(dd, dd);
    for j0 in 0..n {
        let block = big.rows(j0 * n, n);
        let cols: Vec<Vector> = (0..dd).map(|i| block.column(i).into_owned()).collect();
        let f = cache.f_row(j0);
        for i0 in 0..d {
            let v = cache.h.column(i0).into_owned();
            let c = cache.c[(j0, i0)];
            for i in 0..dd {
                for l in 0..dd {
                    hxx[(i, l)] += xx_entry_from_columns(&f, &v, c, &cols[i], &cols[l], form);
                }
            }
        }
    }
    Ok(hxx)
}

/// `Σ_{j0,i0} 𝖠_{j0}ᵀ B_{j0,i0} 𝖠_{j0}` with explicit `n × n` B matrices,
/// via `(a ⊗ A₂)ᵀ B (a ⊗ A₂) = (aᵀa) ⊗ (A₂ᵀ B A₂)`.
pub fn hess_xx_from_b(cache: &ForwardCache, inst: &ProblemInstance, form: CoefficientForm) -> Mat {
    let (n, d) = (inst.n(), inst.d());
    let mut hxx = Mat::zeros(d * d, d * d);
    for j0 in 0..n {
        let mut bsum = Mat::zeros(n, n);
        for i0 in 0..d {
            bsum += b_parts(cache, j0, i0, form).total();
        }
        let k = inst.a2.transpose() * bsum * &inst.a2;
        accumulate_row_kron(&mut hxx, &inst.a1.row(j0).transpose(), &k, 1.0);
    }
    hxx
}

/// `target += s · (a aᵀ) ⊗ k` with row-major indexing.
fn accumulate_row_kron(target: &mut Mat, a: &Vector, k: &Mat, s: f64) {
    let d = a.len();
    let kd = k.nrows();
    for k1 in 0..d {
        for l1 in 0..d {
            let coef = s * a[k1] * a[l1];
            if coef == 0.0 {
                continue;
            }
            for k2 in 0..kd {
                let row = k1 * kd + k2;
                for l2 in 0..kd {
                    target[(row, l1 * kd + l2)] += coef * k[(k2, l2)];
                }
            }
        }
    }
}

/// Structured `Hxx` in `O(n²d² + n d⁴)`.
///
/// Per row `j0`, the sum over `i0` of the B pieces projects onto `A₂` as
/// `A₂ᵀ diag(δ) A₂ + Σ_{i0} [−(γ + c)(p φᵀ + φ pᵀ) + (2γc + γ²) φ φᵀ + p pᵀ]`
/// where `δ = f∘q − ⟨f, q⟩ f`, `q = Σ c·h`, `φ = A₂ᵀ f` and `p = A₂ᵀ(f∘h)`.
pub fn hess_xx_block_fast(cache: &ForwardCache, inst: &ProblemInstance) -> Mat {
    let (n, d) = (inst.n(), inst.d());
    let a2 = &inst.a2;
    let mut hxx = Mat::zeros(d * d, d * d);
    for j0 in 0..n {
        let f = cache.f_row(j0);
        let c_row = cache.c.row(j0).transpose();
        let q = &cache.h * &c_row;
        let fq = f.dot(&q);
        let delta = f.component_mul(&q) - &f * fq;
        let mut scaled = a2.clone();
        for (j, mut row) in scaled.row_iter_mut().enumerate() {
            row *= delta[j];
        }
        let mut k = a2.transpose() * scaled;

        let phi = a2.transpose() * &f;
        let mut fh = cache.h.clone();
        for (j, mut row) in fh.row_iter_mut().enumerate() {
            row *= f[j];
        }
        let p = a2.transpose() * fh;
        let gammas = cache.h.transpose() * &f;
        let phi_phi = &phi * phi.transpose();
        for i0 in 0..d {
            let pk = p.column(i0);
            let g = gammas[i0];
            let c = c_row[i0];
            let cross = pk * phi.transpose() + &phi * pk.transpose();
            k += cross * (-(g + c));
            k += &phi_phi * (2.0 * g * c + g * g);
            k += pk * pk.transpose();
        }
        accumulate_row_kron(&mut hxx, &inst.a1.row(j0).transpose(), &k, 1.0);
    }
    hxx
}

/// `Hyy = A₃ᵀ fᵀ f A₃`, shared by every column of `Y`.
pub fn hess_yy(cache: &ForwardCache, inst: &ProblemInstance) -> Mat {
    let fa3 = &cache.f * &inst.a3;
    fa3.transpose() * fa3
}

/// Entry form `Σ_{j0} ⟨f_{j0}, A₃[:, i1]⟩⟨f_{j0}, A₃[:, i2]⟩` for any fixed `i0`.
pub fn hess_yy_entry(cache: &ForwardCache, inst: &ProblemInstance, i1: usize, i2: usize) -> f64 {
    (0..inst.n())
        .map(|j0| {
            let f = cache.f.row(j0);
            let a = f.dot(&inst.a3.column(i1).transpose());
            let b = f.dot(&inst.a3.column(i2).transpose());
            a * b
        })
        .sum()
}

/// The `n × n` middle factor of `∂²L_{j0,i0}/∂x∂y_{i0} = 𝖠_{j0}ᵀ M A₃`:
/// `M = (f∘h) fᵀ − γ f fᵀ + c (diag(f) − f fᵀ)`.
pub fn bxy_matrix(cache: &ForwardCache, j0: usize, i0: usize) -> Mat {
    let f = cache.f_row(j0);
    let h = cache.h.column(i0).into_owned();
    let gamma = f.dot(&h);
    let c = cache.c[(j0, i0)];
    let ff = &f * f.transpose();
    f.component_mul(&h) * f.transpose() - &ff * gamma + (Mat::from_diagonal(&f) - ff) * c
}

/// Pieces of the mixed-block factor exactly as printed in its definition
/// (first rank-one term listed twice, diagonal term with a minus sign).
pub fn bxy_matrix_as_printed(cache: &ForwardCache, j0: usize, i0: usize) -> Mat {
    let f = cache.f_row(j0);
    let h = cache.h.column(i0).into_owned();
    let gamma = f.dot(&h);
    let c = cache.c[(j0, i0)];
    let r1 = f.component_mul(&h) * f.transpose();
    let r2 = &f * f.transpose() * (-gamma);
    let d1 = Mat::from_diagonal(&f) * (-c);
    &r1 + r2 + d1 + &r1
}

/// `𝖠_{j0}ᵀ M A₃ ∈ ℝ^{d²×d}`; column `i1` is the derivative with respect to `Y_{i1,i0}`.
pub fn hess_xy_block(cache: &ForwardCache, inst: &ProblemInstance, j0: usize, i0: usize) -> Mat {
    let d = inst.d();
    let f = cache.f_row(j0);
    let h = cache.h.column(i0).into_owned();
    let gamma = f.dot(&h);
    let c = cache.c[(j0, i0)];
    let psi = inst.a3.transpose() * &f;
    let mut z = f.component_mul(&h) * psi.transpose() - &f * psi.transpose() * (gamma + c);
    for j in 0..inst.n() {
        let s = c * f[j];
        for k in 0..d {
            z[(j, k)] += s * inst.a3[(j, k)];
        }
    }
    let t = inst.a2.transpose() * z;
    let a = inst.a1.row(j0);
    Mat::from_fn(d * d, d, |r, i1| a[r / d] * t[(r % d, i1)])
}

/// Full `Hxy ∈ ℝ^{d²×d²}` in row-major `y` order.
pub fn hess_xy(cache: &ForwardCache, inst: &ProblemInstance) -> Mat {
    let (n, d) = (inst.n(), inst.d());
    let mut hxy = Mat::zeros(d * d, d * d);
    for j0 in 0..n {
        for i0 in 0..d {
            let blk = hess_xy_block(cache, inst, j0, i0);
            for i1 in 0..d {
                let mut col = hxy.column_mut(i1 * d + i0);
                col += blk.column(i1);
            }
        }
    }
    hxy
}

/// `Hxy` from the entry expression `∂/∂Y_{i1,i0} (∂L_{j0,i0}/∂xᵢ)`. Oracle only.
pub fn hess_xy_entrywise(cache: &ForwardCache, inst: &ProblemInstance, cap: OracleCap) -> Result<Mat> {
    let (n, d) = (inst.n(), inst.d());
    let big = materialize_kron(&inst.a1, &inst.a2, cap)?;
    let dd = d * d;
    let mut hxy = Mat::zeros(dd, dd);
    for j0 in 0..n {
        let block = big.rows(j0 * n, n);
        let f = cache.f_row(j0);
        for i0 in 0..d {
            let h = cache.h.column(i0).into_owned();
            let gamma = f.dot(&h);
            let c = cache.c[(j0, i0)];
            for i in 0..dd {
                let ai = block.column(i).into_owned();
                let f_ai = f.dot(&ai);
                let fai_h = f.component_mul(&ai).dot(&h);
                for i1 in 0..d {
                    let a3c = inst.a3.column(i1).into_owned();
                    let f_a3 = f.dot(&a3c);
                    let fai_a3 = f.component_mul(&ai).dot(&a3c);
                    hxy[(i, i1 * d + i0)] +=
                        f_a3 * fai_h - f_a3 * gamma * f_ai + c * (fai_a3 - f_a3 * f_ai);
                }
            }
        }
    }
    Ok(hxy)
}

/// `Σ 𝖠_{j0}ᵀ M_{j0,i0} A₃` for an arbitrary per-pair middle factor.
pub fn hess_xy_from_middle<F>(cache: &ForwardCache, inst: &ProblemInstance, middle: F) -> Mat
where
    F: Fn(&ForwardCache, usize, usize) -> Mat,
{
    let (n, d) = (inst.n(), inst.d());
    let mut hxy = Mat::zeros(d * d, d * d);
    for j0 in 0..n {
        let a = inst.a1.row(j0);
        for i0 in 0..d {
            let t = inst.a2.transpose() * middle(cache, j0, i0) * &inst.a3;
            for r in 0..d * d {
                for i1 in 0..d {
                    hxy[(r, i1 * d + i0)] += a[r / d] * t[(r % d, i1)];
                }
            }
        }
    }
    hxy
}

/// `𝖠ᵀ(W² ⊗ Iₙ)𝖠 = (A₁ᵀ W² A₁) ⊗ (A₂ᵀ A₂)`.
pub fn regularization_gram(inst: &ProblemInstance) -> Mat {
    let wa1 = inst.weighted_a1();
    kron(&(wa1.transpose() * &wa1), &(inst.a2.transpose() * &inst.a2))
}

/// The same Gram through the materialized Kronecker product. Oracle only.
pub fn regularization_gram_materialized(inst: &ProblemInstance, cap: OracleCap) -> Result<Mat> {
    let n = inst.n();
    let big = materialize_kron(&inst.a1, &inst.a2, cap)?;
    let mut weighted = big.clone();
    for (r, mut row) in weighted.row_iter_mut().enumerate() {
        let w = inst.w[r / n];
        row *= w * w;
    }
    Ok(big.transpose() * weighted)
}

/// `A₃ᵀ W² A₃`.
pub fn regularization_yy(inst: &ProblemInstance) -> Mat {
    let mut wa3 = inst.a3.clone();
    for (j, mut row) in wa3.row_iter_mut().enumerate() {
        row *= inst.w[j];
    }
    wa3.transpose() * wa3
}

/// Exact Hessian blocks, optionally with the weighted penalty folded in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HessianBundle {
    pub hxx: Mat,
    pub hxy: Mat,
    /// The `d × d` block shared by every column of `Y`.
    pub hyy: Mat,
    pub reg_applied: bool,
    /// Penalty multiplier folded into `hxx`/`hyy` (0 when none).
    pub rho: f64,
}

impl HessianBundle {
    pub fn exact(cache: &ForwardCache, inst: &ProblemInstance) -> Self {
        Self {
            hxx: hess_xx_block_fast(cache, inst),
            hxy: hess_xy(cache, inst),
            hyy: hess_yy(cache, inst),
            reg_applied: false,
            rho: 0.0,
        }
    }

    pub fn d(&self) -> usize {
        self.hyy.nrows()
    }

    /// `Hyy ⊗ I_d` in row-major `y` order.
    pub fn hyy_full(&self) -> Mat {
        kron(&self.hyy, &Mat::identity(self.d(), self.d()))
    }

    /// Columns of `Hxy` belonging to column `i0` of `Y`.
    pub fn hxy_column_block(&self, i0: usize) -> Mat {
        let d = self.d();
        Mat::from_fn(d * d, d, |r, i1| self.hxy[(r, i1 * d + i0)])
    }

    /// The symmetric `2d² × 2d²` matrix.
    pub fn full(&self) -> Mat {
        let dd = self.hxx.nrows();
        let mut h = Mat::zeros(2 * dd, 2 * dd);
        h.view_mut((0, 0), (dd, dd)).copy_from(&self.hxx);
        h.view_mut((0, dd), (dd, dd)).copy_from(&self.hxy);
        h.view_mut((dd, 0), (dd, dd)).copy_from(&self.hxy.transpose());
        h.view_mut((dd, dd), (dd, dd)).copy_from(&self.hyy_full());
        h
    }
}

/// Add `ρ·𝖠ᵀ(W²⊗I)𝖠` to `Hxx` and `ρ·A₃ᵀW²A₃` to the `Hyy` block.
pub fn assemble_regularized(bundle: &HessianBundle, inst: &ProblemInstance, rho: f64) -> Result<HessianBundle> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::InvalidConfig(format!("regularization multiplier must be positive, got {rho}")));
    }
    Ok(HessianBundle {
        hxx: &bundle.hxx + regularization_gram(inst) * rho,
        hxy: bundle.hxy.clone(),
        hyy: &bundle.hyy + regularization_yy(inst) * rho,
        reg_applied: true,
        rho: bundle.rho + rho,
    })
}

/// Local constant bounding each `‖B_{j0,i0}(x)‖` on R-bounded inputs:
/// `30·R⁸`, floored at `30·R⁴` so it stays valid for `R < 1`.
pub fn c0(r: f64) -> f64 {
    30.0 * r.powi(8).max(r.powi(4))
}

/// Smallest singular value of `A₁ ⊗ A₂`.
pub fn kron_sigma_min(inst: &ProblemInstance) -> f64 {
    sigma_min(&inst.a1) * sigma_min(&inst.a2)
}

fn weight_from_squared(name: &str, sq: f64, rho: f64) -> Result<f64> {
    if !sq.is_finite() {
        return Err(Error::InvalidInstance(format!(
            "{name} threshold is infinite (rank-deficient factor)"
        )));
    }
    Ok((sq / rho).sqrt())
}

/// Uniform weight that makes both regularized blocks `⪰ l·I`:
/// `ρ w² ≥ l / σ_min(A₁⊗A₂)² + d·C₀` and `ρ w² ≥ l / σ_min(A₃)²`.
pub fn strong_convexity_weight(inst: &ProblemInstance, l: f64, rho: f64) -> Result<f64> {
    let sx = kron_sigma_min(inst);
    let sy = sigma_min(&inst.a3);
    let d = inst.d() as f64;
    let wx = weight_from_squared("x-block", l / (sx * sx) + d * c0(inst.r), rho)?;
    let wy = weight_from_squared("y-block", l / (sy * sy), rho)?;
    Ok(wx.max(wy))
}

/// Uniform weight at which the penalty dominates the data Hessian (the
/// `0.9 / 1.1` sandwich): `ρ w² ≥ l/σ_min(A₁⊗A₂)² + 100·d·C₀` and
/// `ρ w² ≥ l/σ_min(A₃)² + 100 n`.
pub fn dominance_weight(inst: &ProblemInstance, l: f64, rho: f64) -> Result<f64> {
    let sx = kron_sigma_min(inst);
    let sy = sigma_min(&inst.a3);
    let d = inst.d() as f64;
    let wx = weight_from_squared("x-block", l / (sx * sx) + 100.0 * d * c0(inst.r), rho)?;
    let wy = weight_from_squared("y-block", l / (sy * sy) + 100.0 * inst.n() as f64, rho)?;
    Ok(wx.max(wy))
}

/// Spectral summary of a Hessian bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsdReport {
    /// `λ_min(Hxx)`.
    pub alpha1: f64,
    /// `λ_min(Hyy)`.
    pub alpha2: f64,
    /// `‖Hxy‖`.
    pub alpha3: f64,
    pub lambda_min_full: f64,
    /// `min(α₁ − α₃, α₂ − α₃)`.
    pub combination_bound: f64,
    /// `λ_min(H) ≥ min(α₁ − α₃, α₂ − α₃) − 1e−8`.
    pub combination_bound_ok: bool,
    /// Whether `min W` clears [`strong_convexity_weight`] for `inst.l`.
    pub threshold_met: bool,
    /// Both regularized blocks `⪰ l·I` (only meaningful when the threshold is met).
    pub blocks_at_least_l: bool,
    /// `λ_min(H) ≥ l − 1e−8`.
    pub full_at_least_l: bool,
    /// Combination bound holds, and the blocks reach `l` whenever the threshold is met.
    pub lower_bound_ok: bool,
}

pub fn psd_report(bundle: &HessianBundle, inst: &ProblemInstance) -> Result<PsdReport> {
    let alpha1 = lambda_min(&bundle.hxx)?;
    let alpha2 = lambda_min(&bundle.hyy)?;
    let alpha3 = spectral_norm(&bundle.hxy);
    let lambda_min_full = lambda_min(&bundle.full())?;
    let combination_bound = (alpha1 - alpha3).min(alpha2 - alpha3);
    let combination_bound_ok = lambda_min_full >= combination_bound - EIG_TOL;
    let threshold_met = bundle.rho > 0.0
        && strong_convexity_weight(inst, inst.l, bundle.rho)
            .map(|w| inst.w_min() >= w)
            .unwrap_or(false);
    let l = inst.l;
    let blocks_at_least_l = alpha1 >= l - EIG_TOL && alpha2 >= l - EIG_TOL;
    Ok(PsdReport {
        alpha1,
        alpha2,
        alpha3,
        lambda_min_full,
        combination_bound,
        combination_bound_ok,
        threshold_met,
        blocks_at_least_l,
        full_at_least_l: lambda_min_full >= l - EIG_TOL,
        lower_bound_ok: combination_bound_ok && (!threshold_met || blocks_at_least_l),
    })
}

/// Spectral norms of the four B pieces, plus `λ_min` of the PSD piece.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BPartNorms {
    pub diag: f64,
    pub rank1: f64,
    pub rank2: f64,
    pub rank3: f64,
    pub rank3_lambda_min: f64,
}

pub fn b_part_norms(parts: &BParts) -> Result<BPartNorms> {
    Ok(BPartNorms {
        diag: spectral_norm(&parts.diag),
        rank1: spectral_norm(&parts.rank1),
        rank2: spectral_norm(&parts.rank2),
        rank3: lambda_max(&parts.rank3)?.abs().max(spectral_norm(&parts.rank3)),
        rank3_lambda_min: lambda_min(&parts.rank3)?,
    })
}
