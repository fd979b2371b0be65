//! Randomized sketches of the Kronecker product `Ā₁ ⊗ A₂` with `Ā₁ = W A₁`.
//!
//! Neither sketch forms the `n² × d²` matrix: TensorSRHT transforms each
//! factor with a Hadamard transform and samples row pairs, TensorSparse
//! count-sketches each factor and combines buckets by addition modulo the
//! bucket count.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::forward::ProblemInstance;
use crate::linalg::{symmetrize, Mat, Vector};
use crate::seeds::mix64;

/// In-place Sylvester–Hadamard transform `v ← H v` (unnormalized ±1 entries).
pub fn fwht_in_place(v: &mut [f64]) -> Result<()> {
    let n = v.len();
    if !n.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(n));
    }
    let mut half = 1;
    while half < n {
        for start in (0..n).step_by(2 * half) {
            for i in start..start + half {
                let (a, b) = (v[i], v[i + half]);
                v[i] = a + b;
                v[i + half] = a - b;
            }
        }
        half *= 2;
    }
    Ok(())
}

/// `H v` for a power-of-two length vector.
pub fn fwht(v: &[f64]) -> Result<Vec<f64>> {
    let mut out = v.to_vec();
    fwht_in_place(&mut out)?;
    Ok(out)
}

/// Dense Sylvester–Hadamard matrix, `H[i][j] = (−1)^{popcount(i & j)}`.
pub fn hadamard_dense(n: usize) -> Result<Mat> {
    if !n.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(n));
    }
    Ok(Mat::from_fn(n, n, |i, j| if (i & j).count_ones() % 2 == 0 { 1.0 } else { -1.0 }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SketchKind {
    Srht,
    Sparse,
}

/// How TensorSRHT picks its `m` row pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampling {
    /// `m` pairs drawn uniformly with replacement from `[ñ]²`.
    Iid,
    /// Every pair exactly once; requires `m = ñ²` and reproduces the Gram exactly.
    Exhaustive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SketchConfig {
    pub kind: SketchKind,
    pub m: usize,
    /// Block count, TensorSparse only.
    pub s: usize,
    /// Target embedding accuracy, reported against the measured value.
    pub epsilon: f64,
    pub delta: f64,
    pub seed: u64,
    pub sampling: Sampling,
}

impl SketchConfig {
    pub fn srht(m: usize, seed: u64) -> Self {
        Self {
            kind: SketchKind::Srht,
            m,
            s: 1,
            epsilon: 0.5,
            delta: 0.05,
            seed,
            sampling: Sampling::Iid,
        }
    }

    pub fn sparse(m: usize, s: usize, seed: u64) -> Self {
        Self {
            kind: SketchKind::Sparse,
            s,
            ..Self::srht(m, seed)
        }
    }

    /// Same configuration with a different seed.
    pub fn reseeded(&self, seed: u64) -> Self {
        Self { seed, ..*self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::InvalidConfig("sketch size m must be at least 1".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidConfig(format!("epsilon must lie in (0, 1), got {}", self.epsilon)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidConfig(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        if self.kind == SketchKind::Sparse && (self.s == 0 || !self.m.is_multiple_of(self.s)) {
            return Err(Error::InvalidConfig(format!(
                "block count s = {} must divide m = {}",
                self.s, self.m
            )));
        }
        Ok(())
    }
}

/// The sketched factor `S(Ā₁ ⊗ A₂) ∈ ℝ^{m × d²}` together with how it was made.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SketchedFactor {
    pub sa: Mat,
    pub config: SketchConfig,
    /// Power-of-two padded row count (TensorSRHT); `n` for TensorSparse.
    pub padded_n: usize,
}

impl SketchedFactor {
    pub fn gram(&self) -> Mat {
        symmetrize(&(self.sa.transpose() * &self.sa))
    }
}

fn check_factors(abar1: &Mat, a2: &Mat) -> Result<(usize, usize)> {
    if abar1.nrows() != a2.nrows() {
        return Err(dim_err("sketch factors (rows)", abar1.nrows(), a2.nrows()));
    }
    if abar1.ncols() != a2.ncols() {
        return Err(dim_err("sketch factors (cols)", abar1.ncols(), a2.ncols()));
    }
    if abar1.ncols() == 0 || abar1.nrows() == 0 {
        return Err(Error::InvalidConfig("sketch factors must be non-empty".into()));
    }
    Ok((abar1.nrows(), abar1.ncols()))
}

/// Zero-pad to `padded` rows, flip row signs by `signs`, then transform every column.
fn signed_hadamard(a: &Mat, signs: &[f64], padded: usize) -> Result<Mat> {
    let mut out = Mat::zeros(padded, a.ncols());
    let mut buf = vec![0.0; padded];
    for c in 0..a.ncols() {
        buf.iter_mut().for_each(|v| *v = 0.0);
        for r in 0..a.nrows() {
            buf[r] = signs[r] * a[(r, c)];
        }
        fwht_in_place(&mut buf)?;
        out.column_mut(c).copy_from_slice(&buf);
    }
    Ok(out)
}

/// TensorSRHT: `S = (1/√m) P (H D₁ ⊗ H D₂)` with unnormalized `H`.
///
/// Each sampled pair `(a, b)` contributes the row `(G₁)_a ⊗ (G₂)_b / √m`. Because
/// `(HD)ᵀ(HD) = ñ I` per factor and each of the `ñ²` pairs is drawn with
/// probability `1/ñ²`, this makes `E[SAᵀSA]` equal to the Gram exactly.
pub fn tensor_srht_apply(abar1: &Mat, a2: &Mat, cfg: &SketchConfig) -> Result<SketchedFactor> {
    cfg.validate()?;
    if cfg.kind != SketchKind::Srht {
        return Err(Error::InvalidConfig("tensor_srht_apply needs an SRHT config".into()));
    }
    let (n, d) = check_factors(abar1, a2)?;
    let padded = n.next_power_of_two();
    if cfg.sampling == Sampling::Exhaustive && cfg.m != padded * padded {
        return Err(Error::InvalidConfig(format!(
            "exhaustive sampling needs m = ñ² = {}, got {}",
            padded * padded,
            cfg.m
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rademacher = |len: usize| -> Vec<f64> {
        (0..len).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect()
    };
    let d1 = rademacher(n);
    let d2 = rademacher(n);
    let g1 = signed_hadamard(abar1, &d1, padded)?;
    let g2 = signed_hadamard(a2, &d2, padded)?;

    let pairs: Vec<(usize, usize)> = match cfg.sampling {
        Sampling::Iid => (0..cfg.m)
            .map(|_| (rng.random_range(0..padded), rng.random_range(0..padded)))
            .collect(),
        Sampling::Exhaustive => (0..padded).flat_map(|a| (0..padded).map(move |b| (a, b))).collect(),
    };
    let scale = 1.0 / (cfg.m as f64).sqrt();
    let mut sa = Mat::zeros(cfg.m, d * d);
    for (r, &(a, b)) in pairs.iter().enumerate() {
        for k1 in 0..d {
            let u = scale * g1[(a, k1)];
            for k2 in 0..d {
                sa[(r, k1 * d + k2)] = u * g2[(b, k2)];
            }
        }
    }
    Ok(SketchedFactor {
        sa,
        config: *cfg,
        padded_n: padded,
    })
}

/// Keyed hash used by TensorSparse: bucket in `[buckets]` and a ±1 sign for
/// row `i` of factor `factor` (1 or 2) in block `k`.
pub fn sparse_hash(seed: u64, factor: u64, i: usize, k: usize, buckets: usize) -> (usize, f64) {
    let key = mix64(seed ^ mix64(factor.wrapping_mul(0xA24B_AED4_963E_E407)));
    let v = mix64(key ^ mix64(((k as u64) << 32) ^ i as u64));
    let bucket = ((v & 0xFFFF_FFFF) % buckets as u64) as usize;
    let sign = if v >> 63 == 0 { 1.0 } else { -1.0 };
    (bucket, sign)
}

fn count_sketch(a: &Mat, seed: u64, factor: u64, k: usize, buckets: usize) -> Mat {
    let mut c = Mat::zeros(buckets, a.ncols());
    for i in 0..a.nrows() {
        let (b, s) = sparse_hash(seed, factor, i, k, buckets);
        for col in 0..a.ncols() {
            c[(b, col)] += s * a[(i, col)];
        }
    }
    c
}

/// TensorSparse with `s` blocks of `m/s` buckets each.
///
/// Row `(i, j)` of `Ā₁ ⊗ A₂` lands in bucket `(h₁(i,k) + h₂(j,k)) mod (m/s)` of
/// block `k` with sign `σ₁(i,k)σ₂(j,k)/√s`, which on the factors is a circular
/// convolution of their count sketches.
pub fn tensor_sparse_apply(abar1: &Mat, a2: &Mat, cfg: &SketchConfig) -> Result<SketchedFactor> {
    cfg.validate()?;
    if cfg.kind != SketchKind::Sparse {
        return Err(Error::InvalidConfig("tensor_sparse_apply needs a sparse config".into()));
    }
    let (n, d) = check_factors(abar1, a2)?;
    let buckets = cfg.m / cfg.s;
    let scale = 1.0 / (cfg.s as f64).sqrt();
    let mut sa = Mat::zeros(cfg.m, d * d);
    for k in 0..cfg.s {
        let c1 = count_sketch(abar1, cfg.seed, 1, k, buckets);
        let c2 = count_sketch(a2, cfg.seed, 2, k, buckets);
        let base = k * buckets;
        for u in 0..buckets {
            for c1i in 0..d {
                let x = c1[(u, c1i)];
                if x == 0.0 {
                    continue;
                }
                for v in 0..buckets {
                    let row = base + (u + v) % buckets;
                    for c2i in 0..d {
                        sa[(row, c1i * d + c2i)] += scale * x * c2[(v, c2i)];
                    }
                }
            }
        }
    }
    Ok(SketchedFactor {
        sa,
        config: *cfg,
        padded_n: n,
    })
}

/// Apply whichever sketch `cfg` names to `(Ā₁, A₂)`.
pub fn apply_sketch(abar1: &Mat, a2: &Mat, cfg: &SketchConfig) -> Result<SketchedFactor> {
    match cfg.kind {
        SketchKind::Srht => tensor_srht_apply(abar1, a2, cfg),
        SketchKind::Sparse => tensor_sparse_apply(abar1, a2, cfg),
    }
}

/// `S𝖠̄` for the instance, with `Ā₁ = W A₁`.
pub fn sketch_factor(inst: &ProblemInstance, cfg: &SketchConfig) -> Result<SketchedFactor> {
    apply_sketch(&inst.weighted_a1(), &inst.a2, cfg)
}

/// Sketched surrogate `(S𝖠̄)ᵀ(S𝖠̄)` for `𝖠ᵀ(W² ⊗ I)𝖠`.
pub fn sketched_gram(inst: &ProblemInstance, cfg: &SketchConfig) -> Result<Mat> {
    Ok(sketch_factor(inst, cfg)?.gram())
}

/// `𝖠ᵀ(W² ⊗ I)𝖠` accumulated one explicit Kronecker row at a time:
/// `n²` rows of length `d²`, `O(n² d⁴)` work, no `n² × d²` storage.
pub fn gram_by_rows(inst: &ProblemInstance) -> Mat {
    let (n, d) = (inst.n(), inst.d());
    let dd = d * d;
    let mut g = Mat::zeros(dd, dd);
    let mut row = vec![0.0; dd];
    for j0 in 0..n {
        let w = inst.w[j0];
        for j1 in 0..n {
            for k1 in 0..d {
                let u = w * inst.a1[(j0, k1)];
                for k2 in 0..d {
                    row[k1 * d + k2] = u * inst.a2[(j1, k2)];
                }
            }
            for r in 0..dd {
                let x = row[r];
                for c in r..dd {
                    g[(r, c)] += x * row[c];
                }
            }
        }
    }
    for r in 0..dd {
        for c in 0..r {
            g[(r, c)] = g[(c, r)];
        }
    }
    g
}

/// Embedding error `max |σᵢ(S U) − 1|` for an orthonormal basis `U` of the
/// numerical column space of `abar` (singular values above `1e−10·σ_max`).
///
/// `sa` must equal `S · abar`; `S U` is recovered as `sa · V Σ⁻¹`.
pub fn ose_quality(abar: &Mat, sa: &Mat) -> Result<f64> {
    if abar.ncols() != sa.ncols() {
        return Err(dim_err("ose_quality", abar.ncols(), sa.ncols()));
    }
    let svd = abar.clone().svd(false, true);
    let v_t = svd.v_t.ok_or_else(|| Error::Eigen("SVD did not return V".into()))?;
    let smax = svd.singular_values.max();
    if smax == 0.0 {
        return Ok(0.0);
    }
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > 1e-10 * smax)
        .collect();
    let mut basis = Mat::zeros(abar.ncols(), keep.len());
    for (c, &i) in keep.iter().enumerate() {
        let col = v_t.row(i).transpose() / svd.singular_values[i];
        basis.column_mut(c).copy_from(&col);
    }
    let su = sa * basis;
    let sv = su.singular_values();
    let mut eps = sv.iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max);
    if sv.len() < keep.len() {
        eps = eps.max(1.0);
    }
    Ok(eps)
}

/// Range of `uᵀ Ĝ u / uᵀ G u` over the column space of `G`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    pub lower: f64,
    pub upper: f64,
    /// Largest `|uᵀĜu|` over unit vectors in the null space of `G`, relative to `‖G‖`.
    pub null_leak: f64,
}

impl SandwichReport {
    /// `(1 − ε) G ⪯ Ĝ ⪯ (1 + ε) G`.
    pub fn within(&self, eps: f64) -> bool {
        self.lower >= 1.0 - eps && self.upper <= 1.0 + eps && self.null_leak <= 1e-10
    }
}

/// Generalized eigenvalue range of `approx` against `gram` by whitening `gram`.
pub fn gram_sandwich(gram: &Mat, approx: &Mat) -> Result<SandwichReport> {
    if gram.shape() != approx.shape() || !gram.is_square() {
        return Err(dim_err("gram_sandwich", format!("{:?}", gram.shape()), format!("{:?}", approx.shape())));
    }
    let eig = symmetrize(gram).symmetric_eigen();
    let lmax = eig.eigenvalues.amax();
    if lmax == 0.0 {
        return Err(Error::Eigen("reference Gram is zero".into()));
    }
    let (mut range, mut null) = (Vec::new(), Vec::new());
    for i in 0..eig.eigenvalues.len() {
        if eig.eigenvalues[i] > 1e-10 * lmax {
            range.push(i);
        } else {
            null.push(i);
        }
    }
    let whiten = Mat::from_fn(gram.nrows(), range.len(), |r, c| {
        eig.eigenvectors[(r, range[c])] / eig.eigenvalues[range[c]].sqrt()
    });
    let t = symmetrize(&(whiten.transpose() * approx * &whiten));
    let ev: Vector = t.symmetric_eigenvalues();
    if !ev.iter().all(|v| v.is_finite()) {
        return Err(Error::Eigen("non-finite generalized eigenvalue".into()));
    }
    let null_leak = if null.is_empty() {
        0.0
    } else {
        let z = Mat::from_fn(gram.nrows(), null.len(), |r, c| eig.eigenvectors[(r, null[c])]);
        let leak = symmetrize(&(z.transpose() * approx * &z));
        leak.symmetric_eigenvalues().amax() / lmax
    };
    Ok(SandwichReport {
        lower: ev.min(),
        upper: ev.max(),
        null_leak,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kron::materialize_kron;
    use crate::linalg::max_abs_diff;
    use crate::oracles::{gaussian_with_norm, random_instance, OracleCap};

    fn factors(seed: u64, n: usize, d: usize) -> (Mat, Mat) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (gaussian_with_norm(&mut rng, n, d, 1.0), gaussian_with_norm(&mut rng, n, d, 1.0))
    }

    fn dense_gram(a1: &Mat, a2: &Mat) -> Mat {
        let big = materialize_kron(a1, a2, OracleCap::default()).unwrap();
        big.transpose() * big
    }

    #[test]
    fn fwht_small_cases() {
        assert_eq!(fwht(&[1.0, 0.0]).unwrap(), vec![1.0, 1.0]);
        assert_eq!(fwht(&[1.0, 1.0]).unwrap(), vec![2.0, 0.0]);
        assert_eq!(fwht(&[3.5]).unwrap(), vec![3.5]);
        assert!(matches!(fwht(&[1.0, 2.0, 3.0]), Err(Error::NotPowerOfTwo(3))));
    }

    #[test]
    fn fwht_matches_dense_and_is_involution() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let h = hadamard_dense(8).unwrap();
        let dense = &h * Vector::from_column_slice(&v);
        let fast = fwht(&v).unwrap();
        for i in 0..8 {
            assert!((dense[i] - fast[i]).abs() <= 1e-12);
        }
        let twice = fwht(&fast).unwrap();
        for i in 0..8 {
            assert!((twice[i] - 8.0 * v[i]).abs() <= 1e-10 * 8.0);
        }
    }

    #[test]
    fn srht_exhaustive_is_exact() {
        let (a1, a2) = factors(4, 6, 2);
        let mut cfg = SketchConfig::srht(64, 9);
        cfg.sampling = Sampling::Exhaustive;
        let sf = tensor_srht_apply(&a1, &a2, &cfg).unwrap();
        assert_eq!(sf.padded_n, 8);
        assert!(max_abs_diff(&sf.gram(), &dense_gram(&a1, &a2)) <= 1e-10);
        cfg.m = 63;
        assert!(tensor_srht_apply(&a1, &a2, &cfg).is_err());
    }

    #[test]
    fn zero_inputs_give_zero_sketch() {
        let z = Mat::zeros(8, 2);
        let (a1, _) = factors(5, 8, 2);
        let s1 = tensor_srht_apply(&z, &a1, &SketchConfig::srht(32, 1)).unwrap();
        let s2 = tensor_sparse_apply(&a1, &z, &SketchConfig::sparse(32, 4, 1)).unwrap();
        assert_eq!(s1.sa.amax(), 0.0);
        assert_eq!(s2.sa.amax(), 0.0);
    }

    #[test]
    fn sparse_unit_vectors_hit_one_bucket() {
        let n = 8;
        let (i, j, m, seed) = (3, 5, 16, 77);
        let mut e1 = Mat::zeros(n, 1);
        e1[(i, 0)] = 1.0;
        let mut e2 = Mat::zeros(n, 1);
        e2[(j, 0)] = 1.0;
        let sf = tensor_sparse_apply(&e1, &e2, &SketchConfig::sparse(m, 1, seed)).unwrap();
        let (h1, s1) = sparse_hash(seed, 1, i, 0, m);
        let (h2, s2) = sparse_hash(seed, 2, j, 0, m);
        for r in 0..m {
            let expect = if r == (h1 + h2) % m { s1 * s2 } else { 0.0 };
            assert_eq!(sf.sa[(r, 0)], expect);
        }
    }

    #[test]
    fn config_validation() {
        assert!(SketchConfig::srht(0, 1).validate().is_err());
        assert!(SketchConfig::sparse(30, 4, 1).validate().is_err());
        assert!(SketchConfig::sparse(32, 4, 1).validate().is_ok());
    }

    #[test]
    fn both_sketches_unbiased() {
        let (a1, a2) = factors(6, 8, 2);
        let exact = dense_gram(&a1, &a2);
        for kind in [SketchKind::Srht, SketchKind::Sparse] {
            let mut mean = Mat::zeros(4, 4);
            for seed in 0..20 {
                let cfg = match kind {
                    SketchKind::Srht => SketchConfig::srht(2048, seed),
                    SketchKind::Sparse => SketchConfig::sparse(2048, 4, seed),
                };
                mean += apply_sketch(&a1, &a2, &cfg).unwrap().gram() / 20.0;
            }
            let rel = (&mean - &exact).norm() / exact.norm();
            assert!(rel <= 0.05, "{kind:?} rel {rel}");
        }
    }

    #[test]
    fn gram_by_rows_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut inst = random_instance(&mut rng, 5, 3, 1.0);
        inst.w = Vector::from_fn(5, |i, _| 1.0 + 0.1 * i as f64);
        let dense = dense_gram(&inst.weighted_a1(), &inst.a2);
        assert!(max_abs_diff(&gram_by_rows(&inst), &dense) <= 1e-12);
    }

    #[test]
    fn ose_quality_edge_cases() {
        let (a1, a2) = factors(8, 4, 2);
        let big = materialize_kron(&a1, &a2, OracleCap::default()).unwrap();
        let mut cfg = SketchConfig::srht(16, 2);
        cfg.sampling = Sampling::Exhaustive;
        let sf = tensor_srht_apply(&a1, &a2, &cfg).unwrap();
        assert!(ose_quality(&big, &sf.sa).unwrap() <= 1e-10);
        let zero = Mat::zeros(16, 4);
        assert!((ose_quality(&big, &zero).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sandwich_of_identity_scaling() {
        let g = Mat::from_diagonal(&Vector::from_vec(vec![1.0, 2.0, 0.0]));
        let rep = gram_sandwich(&g, &(&g * 1.2)).unwrap();
        assert!((rep.lower - 1.2).abs() < 1e-12 && (rep.upper - 1.2).abs() < 1e-12);
        assert!(rep.within(0.25) && !rep.within(0.1));
    }

    #[test]
    fn sketches_are_deterministic() {
        let (a1, a2) = factors(9, 8, 2);
        for cfg in [SketchConfig::srht(64, 3), SketchConfig::sparse(64, 4, 3)] {
            let a = apply_sketch(&a1, &a2, &cfg).unwrap();
            let b = apply_sketch(&a1, &a2, &cfg).unwrap();
            assert_eq!(a, b);
        }
    }
}
