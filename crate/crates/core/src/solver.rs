//! Approximate Newton training loop.

use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::forward::{forward, objective, ForwardCache, ParamState, ProblemInstance};
use crate::gradients::{grad_total, GradientPair};
use crate::hessian::{assemble_regularized, hess_yy, regularization_yy, HessianBundle, EIG_TOL};
use crate::kron::mat_rowmajor;
use crate::linalg::{lambda_min, spectral_norm, Mat, Vector};
use crate::seeds::derive_seed;
use crate::sketch::{sketched_gram, SketchConfig};

/// Damping escalations attempted after the first failed factorization.
pub const DAMPING_RETRIES: usize = 3;
/// Default damping relative to the mean diagonal of the surrogate.
pub const DEFAULT_DAMPING_SCALE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum HessianMode {
    /// Full regularized Hessian including the cross block.
    Exact,
    /// Block-diagonal surrogate with a sketched `x`-block Gram.
    Sketched(SketchConfig),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub t_max: usize,
    /// Stop once `‖g‖₂ ≤ eps`, or the distance to a known plant is `≤ eps`.
    pub eps: f64,
    pub rho: f64,
    pub mode: HessianMode,
    /// Fixed damping; `None` uses `1e−8 · trace(H̃) / 2d²`.
    pub damping: Option<f64>,
    /// Expected per-step contraction of `r_t`, audited when a plant is known.
    pub contraction_assert: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            t_max: 50,
            eps: 1e-8,
            rho: 0.0,
            mode: HessianMode::Exact,
            damping: None,
            contraction_assert: Some(0.4),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t_max == 0 {
            return Err(Error::InvalidConfig("t_max must be at least 1".into()));
        }
        if !(self.eps > 0.0) {
            return Err(Error::InvalidConfig(format!("eps must be positive, got {}", self.eps)));
        }
        if !(self.rho >= 0.0 && self.rho.is_finite()) {
            return Err(Error::InvalidConfig(format!("rho must be finite and non-negative, got {}", self.rho)));
        }
        if let Some(l) = self.damping {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(Error::InvalidConfig(format!("damping must be non-negative, got {l}")));
            }
        }
        if let HessianMode::Sketched(sk) = &self.mode {
            sk.validate()?;
            if self.rho == 0.0 {
                return Err(Error::InvalidConfig(
                    "sketched mode approximates the penalty Gram and needs rho > 0".into(),
                ));
            }
        }
        Ok(())
    }
}

/// A symmetric surrogate of the Hessian in a form cheap to factor.
#[derive(Debug, Clone, PartialEq)]
pub enum ApproxHessian {
    Full(Mat),
    /// `diag(xx, yy ⊗ I_d)` with `yy` the shared `d × d` block.
    BlockDiagonal { xx: Mat, yy: Mat },
}

impl ApproxHessian {
    pub fn dim(&self) -> usize {
        match self {
            ApproxHessian::Full(h) => h.nrows(),
            ApproxHessian::BlockDiagonal { xx, .. } => 2 * xx.nrows(),
        }
    }

    pub fn trace(&self) -> f64 {
        match self {
            ApproxHessian::Full(h) => h.trace(),
            ApproxHessian::BlockDiagonal { xx, yy } => xx.trace() + yy.nrows() as f64 * yy.trace(),
        }
    }

    /// Dense `2d² × 2d²` matrix in `(x, y)` row-major order.
    pub fn dense(&self) -> Mat {
        match self {
            ApproxHessian::Full(h) => h.clone(),
            ApproxHessian::BlockDiagonal { xx, yy } => {
                let bundle = HessianBundle {
                    hxx: xx.clone(),
                    hxy: Mat::zeros(xx.nrows(), xx.ncols()),
                    hyy: yy.clone(),
                    reg_applied: true,
                    rho: 0.0,
                };
                bundle.full()
            }
        }
    }

    fn try_solve(&self, g: &GradientPair, damping: f64) -> Option<(Vector, Vector)> {
        let chol = |m: &Mat| {
            let mut m = m.clone();
            for i in 0..m.nrows() {
                m[(i, i)] += damping;
            }
            m.cholesky()
        };
        match self {
            ApproxHessian::Full(h) => {
                let rhs = Vector::from_iterator(g.gx.len() * 2, g.gx.iter().chain(g.gy.iter()).copied());
                let sol = chol(h)?.solve(&rhs);
                let dd = g.gx.len();
                Some((sol.rows(0, dd).into_owned(), sol.rows(dd, dd).into_owned()))
            }
            ApproxHessian::BlockDiagonal { xx, yy } => {
                let dx = chol(xx)?.solve(&g.gx);
                let d = yy.nrows();
                // (G ⊗ I) vec(ΔY) = vec(G ΔY) under row-major vec
                let gy = mat_rowmajor(&g.gy, d).ok()?;
                let dy = chol(yy)?.solve(&gy);
                Some((dx, crate::kron::vec_rowmajor(&dy)))
            }
        }
    }
}

/// Default damping `1e−8 · trace(H̃) / 2d²`.
pub fn default_damping(h: &ApproxHessian) -> f64 {
    DEFAULT_DAMPING_SCALE * h.trace().abs() / h.dim() as f64
}

/// Build `H̃` at the point whose forward pass is `cache`.
///
/// `sketch_index` keys a fresh sketch per call in sketched mode.
pub fn build_approx_hessian(
    inst: &ProblemInstance,
    cache: &ForwardCache,
    cfg: &SolverConfig,
    sketch_index: u64,
) -> Result<ApproxHessian> {
    match &cfg.mode {
        HessianMode::Exact => {
            let bundle = HessianBundle::exact(cache, inst);
            let bundle = if cfg.rho > 0.0 {
                assemble_regularized(&bundle, inst, cfg.rho)?
            } else {
                bundle
            };
            Ok(ApproxHessian::Full(bundle.full()))
        }
        HessianMode::Sketched(sk) => {
            let sk = sk.reseeded(derive_seed(sk.seed, sketch_index));
            let xx = sketched_gram(inst, &sk)? * cfg.rho;
            let yy = hess_yy(cache, inst) + regularization_yy(inst) * cfg.rho;
            Ok(ApproxHessian::BlockDiagonal { xx, yy })
        }
    }
}

/// Result of one Newton update.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub state: ParamState,
    /// `Δ = H̃⁻¹ g` stacked as `[Δx; Δy]`.
    pub step: Vector,
    pub damping: f64,
}

/// `[x; y] ← [x; y] − (H̃ + λI)⁻¹ g`, raising `λ` tenfold on factorization failure.
pub fn newton_step(
    state: &ParamState,
    grads: &GradientPair,
    h: &ApproxHessian,
    damping: f64,
) -> Result<StepOutcome> {
    let d = state.d();
    if grads.gx.len() != d * d || grads.gy.len() != d * d || h.dim() != 2 * d * d {
        return Err(dim_err("newton_step", 2 * d * d, h.dim()));
    }
    let floor = DEFAULT_DAMPING_SCALE * h.trace().abs() / h.dim() as f64;
    let mut lam = damping;
    for _ in 0..=DAMPING_RETRIES {
        if let Some((dx, dy)) = h.try_solve(grads, lam) {
            if dx.iter().chain(dy.iter()).all(|v| v.is_finite()) {
                let next = ParamState::from_vecs(&(state.x_vec() - &dx), &(state.y_vec() - &dy), d)?;
                let step = Vector::from_iterator(2 * d * d, dx.iter().chain(dy.iter()).copied());
                return Ok(StepOutcome {
                    state: next,
                    step,
                    damping: lam,
                });
            }
        }
        lam = (lam * 10.0).max(floor);
    }
    Err(Error::Factorization {
        retries: DAMPING_RETRIES,
        damping: lam / 10.0,
    })
}

/// Wall-clock time per phase of one iteration, in milliseconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimings {
    pub forward_ms: f64,
    pub grad_ms: f64,
    pub hess_ms: f64,
    pub solve_ms: f64,
}

/// Metrics at `x_t` and the step taken from it (none on the final record).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub t: usize,
    /// Objective `L + ρ·penalty`.
    pub loss: f64,
    pub grad_norm_x: f64,
    pub grad_norm_y: f64,
    pub step_norm: Option<f64>,
    pub r_t: Option<f64>,
    pub damping: Option<f64>,
    pub timings: PhaseTimings,
}

impl IterationRecord {
    pub fn grad_norm(&self) -> f64 {
        self.grad_norm_x.hypot(self.grad_norm_y)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub records: Vec<IterationRecord>,
}

impl IterationTrace {
    /// Number of Newton updates performed.
    pub fn updates(&self) -> usize {
        self.records.iter().filter(|r| r.step_norm.is_some()).count()
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }

    /// Successive ratios `r_{t+1} / r_t` where both are known and `r_t > floor`.
    pub fn contraction_ratios(&self, floor: f64) -> Vec<f64> {
        self.records
            .windows(2)
            .filter_map(|w| match (w[0].r_t, w[1].r_t) {
                (Some(a), Some(b)) if a > floor => Some(b / a),
                _ => None,
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    GradTol,
    PlantTol,
    MaxIter,
    NonFinite,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::GradTol => "grad_tol",
            Termination::PlantTol => "plant_tol",
            Termination::MaxIter => "max_iter",
            Termination::NonFinite => "non_finite",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub trace: IterationTrace,
    pub state: ParamState,
    pub termination: Termination,
    /// Steps where `r_{t+1} > factor · r_t` under `contraction_assert`.
    pub contraction_violations: usize,
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

/// Run the approximate Newton loop from `init`.
///
/// A known optimum `plant` enables `r_t` and the plant-distance stopping rule.
/// A non-finite loss or gradient ends the run with [`Termination::NonFinite`]
/// and the trace so far; other failures are returned as errors.
pub fn train(
    inst: &ProblemInstance,
    init: &ParamState,
    cfg: &SolverConfig,
    plant: Option<&ParamState>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if init.d() != inst.d() {
        return Err(dim_err("train init", inst.d(), init.d()));
    }
    let mut state = init.clone();
    let mut trace = IterationTrace::default();
    let mut violations = 0;
    let mut t = 0;
    let termination = loop {
        let mut timings = PhaseTimings::default();
        let clock = Instant::now();
        let cache = match forward(inst, &state) {
            Ok(c) => c,
            Err(Error::NonFinite(_)) => break Termination::NonFinite,
            Err(e) => return Err(e),
        };
        let loss = if cfg.rho > 0.0 {
            objective(inst, &state, cfg.rho)?
        } else {
            cache.loss
        };
        timings.forward_ms = ms(clock);

        let clock = Instant::now();
        let g = grad_total(inst, &state, &cache, cfg.rho)?;
        timings.grad_ms = ms(clock);

        let r_t = plant.map(|p| state.distance(p));
        if let (Some(f), Some(r), Some(prev)) = (cfg.contraction_assert, r_t, trace.last().and_then(|r| r.r_t)) {
            if r > f * prev {
                violations += 1;
            }
        }
        let mut record = IterationRecord {
            t,
            loss,
            grad_norm_x: g.gx.norm(),
            grad_norm_y: g.gy.norm(),
            step_norm: None,
            r_t,
            damping: None,
            timings,
        };
        if !loss.is_finite() || !g.is_finite() {
            trace.records.push(record);
            break Termination::NonFinite;
        }
        if record.grad_norm() <= cfg.eps {
            trace.records.push(record);
            break Termination::GradTol;
        }
        if r_t.is_some_and(|r| r <= cfg.eps) {
            trace.records.push(record);
            break Termination::PlantTol;
        }
        if t >= cfg.t_max {
            trace.records.push(record);
            break Termination::MaxIter;
        }

        let clock = Instant::now();
        let h = build_approx_hessian(inst, &cache, cfg, t as u64)?;
        record.timings.hess_ms = ms(clock);

        let clock = Instant::now();
        let lam = cfg.damping.unwrap_or_else(|| default_damping(&h));
        let out = newton_step(&state, &g, &h, lam)?;
        record.timings.solve_ms = ms(clock);

        record.step_norm = Some(out.step.norm());
        record.damping = Some(out.damping);
        trace.records.push(record);
        state = out.state;
        t += 1;
    };
    Ok(TrainOutcome {
        trace,
        state,
        termination,
        contraction_violations: violations,
    })
}

/// Sampling setup for [`good_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoodCheckConfig {
    pub samples: usize,
    /// Radius (in `‖Δx‖ + ‖Δy‖`) of the ball around the state that pairs are drawn from.
    pub radius: f64,
    pub rho: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoodReport {
    /// `λ_min` of the exact regularized Hessian at the state.
    pub lambda_min: f64,
    /// Empirical Lipschitz constant of the full Hessian.
    pub m_hat: f64,
    /// Empirical Lipschitz constant of the `y`-block alone.
    pub m_hat_yy: f64,
    /// `‖init − state‖` when an initialization was supplied.
    pub r0: Option<f64>,
    pub strongly_convex: bool,
    /// `r₀ M̂ ≤ 0.1 l` when an initialization was supplied.
    pub basin_ok: Option<bool>,
    pub good: bool,
}

fn exact_full(inst: &ProblemInstance, p: &ParamState, rho: f64) -> Result<HessianBundle> {
    let bundle = HessianBundle::exact(&forward(inst, p)?, inst);
    if rho > 0.0 {
        assemble_regularized(&bundle, inst, rho)
    } else {
        Ok(bundle)
    }
}

fn point_in_ball<R: Rng>(rng: &mut R, center: &ParamState, radius: f64) -> Result<ParamState> {
    let d = center.d();
    let dir = Vector::from_fn(2 * d * d, |_, _| rng.random_range(-1.0..1.0));
    let dx = dir.rows(0, d * d).into_owned();
    let dy = dir.rows(d * d, d * d).into_owned();
    let len = dx.norm() + dy.norm();
    let scale = if len > 0.0 { radius * rng.random::<f64>() / len } else { 0.0 };
    ParamState::from_vecs(&(center.x_vec() + dx * scale), &(center.y_vec() + dy * scale), d)
}

/// Check the `(l, M)`-good conditions at `state` against `inst.l`.
pub fn good_check(
    inst: &ProblemInstance,
    state: &ParamState,
    init: Option<&ParamState>,
    cfg: &GoodCheckConfig,
) -> Result<GoodReport> {
    let lambda_min = lambda_min(&exact_full(inst, state, cfg.rho)?.full())?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (mut m_hat, mut m_hat_yy) = (0.0_f64, 0.0_f64);
    for _ in 0..cfg.samples {
        let p = point_in_ball(&mut rng, state, cfg.radius)?;
        let q = point_in_ball(&mut rng, state, cfg.radius)?;
        let dist = p.distance(&q);
        if dist == 0.0 {
            continue;
        }
        let (hp, hq) = (exact_full(inst, &p, cfg.rho)?, exact_full(inst, &q, cfg.rho)?);
        m_hat = m_hat.max(spectral_norm(&(hp.full() - hq.full())) / dist);
        m_hat_yy = m_hat_yy.max(spectral_norm(&(hp.hyy - hq.hyy)) / dist);
    }
    let r0 = init.map(|i| i.distance(state));
    let strongly_convex = lambda_min >= inst.l - EIG_TOL;
    let basin_ok = r0.map(|r| r * m_hat <= 0.1 * inst.l);
    Ok(GoodReport {
        lambda_min,
        m_hat,
        m_hat_yy,
        r0,
        strongly_convex,
        basin_ok,
        good: strongly_convex && basin_ok.unwrap_or(true),
    })
}

/// Exact-Hessian Newton from `init` down to gradient norm `tol`; used to get
/// a reference minimizer when no plant is available.
pub fn reference_minimizer(inst: &ProblemInstance, init: &ParamState, rho: f64, tol: f64) -> Result<ParamState> {
    let cfg = SolverConfig {
        t_max: 200,
        eps: tol,
        rho,
        mode: HessianMode::Exact,
        damping: None,
        contraction_assert: None,
    };
    let out = train(inst, init, &cfg, None)?;
    if out.termination != Termination::GradTol {
        return Err(Error::InvalidConfig(format!(
            "reference Newton run ended with {}",
            out.termination.as_str()
        )));
    }
    Ok(out.state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;
    use crate::oracles::{plant, random_instance, random_params, y_least_squares};

    #[test]
    fn zero_gradient_is_fixed_point() {
        let h = ApproxHessian::Full(Mat::identity(2, 2) * 3.0);
        let s = ParamState::new(Mat::from_element(1, 1, 0.5), Mat::from_element(1, 1, -1.0));
        let out = newton_step(&s, &GradientPair::zeros(1), &h, 0.0).unwrap();
        assert_eq!(out.state, s);
    }

    #[test]
    fn one_dimensional_step() {
        let h = ApproxHessian::BlockDiagonal {
            xx: Mat::from_element(1, 1, 2.0),
            yy: Mat::from_element(1, 1, 1.0),
        };
        let g = GradientPair {
            gx: Vector::from_element(1, 4.0),
            gy: Vector::zeros(1),
        };
        let out = newton_step(&ParamState::zeros(1), &g, &h, 0.0).unwrap();
        assert!((out.step[0] - 2.0).abs() < 1e-15);
        assert!((out.state.x[(0, 0)] + 2.0).abs() < 1e-15);
    }

    #[test]
    fn singular_surrogate_gets_damped() {
        let h = ApproxHessian::Full(Mat::zeros(2, 2));
        let g = GradientPair {
            gx: Vector::from_element(1, 1.0),
            gy: Vector::from_element(1, 1.0),
        };
        assert!(matches!(
            newton_step(&ParamState::zeros(1), &g, &h, 0.0),
            Err(Error::Factorization { .. })
        ));
        let out = newton_step(&ParamState::zeros(1), &g, &h, 0.5).unwrap();
        assert!((out.step[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn block_diagonal_matches_dense_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let d = 2;
        let a = Mat::from_fn(4, 4, |_, _| rng.random_range(-1.0..1.0));
        let b = Mat::from_fn(2, 2, |_, _| rng.random_range(-1.0..1.0));
        let xx = &a * a.transpose() + Mat::identity(4, 4);
        let yy = &b * b.transpose() + Mat::identity(2, 2);
        let h = ApproxHessian::BlockDiagonal { xx, yy };
        let g = GradientPair {
            gx: Vector::from_fn(4, |i, _| i as f64),
            gy: Vector::from_fn(4, |i, _| 1.0 - i as f64),
        };
        let out = newton_step(&ParamState::zeros(d), &g, &h, 0.0).unwrap();
        let rhs = Vector::from_iterator(8, g.gx.iter().chain(g.gy.iter()).copied());
        let dense = h.dense().lu().solve(&rhs).unwrap();
        assert!((out.step - dense).amax() < 1e-12);
    }

    #[test]
    fn exact_mode_equals_regularized_assembly() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let inst = random_instance(&mut rng, 5, 2, 1.0);
        let p = random_params(&mut rng, 2, 1.0);
        let cache = forward(&inst, &p).unwrap();
        let cfg = SolverConfig {
            rho: 0.7,
            ..Default::default()
        };
        let h = build_approx_hessian(&inst, &cache, &cfg, 0).unwrap();
        let expect = assemble_regularized(&HessianBundle::exact(&cache, &inst), &inst, 0.7)
            .unwrap()
            .full();
        assert!(max_abs_diff(&h.dense(), &expect) == 0.0);
    }

    #[test]
    fn sketched_mode_on_zero_data_is_damping_only() {
        let z = Mat::zeros(4, 2);
        let inst = ProblemInstance::new(z.clone(), z.clone(), z.clone(), z, Vector::from_element(4, 1.0), 1.0, 1.0)
            .unwrap();
        let cache = forward(&inst, &ParamState::zeros(2)).unwrap();
        let cfg = SolverConfig {
            rho: 1.0,
            mode: HessianMode::Sketched(SketchConfig::srht(16, 1)),
            ..Default::default()
        };
        let h = build_approx_hessian(&inst, &cache, &cfg, 0).unwrap();
        let g = GradientPair {
            gx: Vector::from_element(4, 1.0),
            gy: Vector::from_element(4, 1.0),
        };
        let out = newton_step(&ParamState::zeros(2), &g, &h, 0.25).unwrap();
        assert!(out.step.iter().all(|v| (v - 4.0).abs() < 1e-12));
    }

    #[test]
    fn y_subproblem_converges_in_one_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let inst = random_instance(&mut rng, 8, 3, 1.0);
        let p = random_params(&mut rng, 3, 1.0);
        let cache = forward(&inst, &p).unwrap();
        let g = crate::gradients::grad_fast(&inst, &p, &cache).unwrap();
        let h = ApproxHessian::BlockDiagonal {
            xx: Mat::identity(9, 9),
            yy: hess_yy(&cache, &inst),
        };
        let only_y = GradientPair {
            gx: Vector::zeros(9),
            gy: g.gy,
        };
        let out = newton_step(&p, &only_y, &h, 0.0).unwrap();
        let target = y_least_squares(&inst, &p.x).unwrap();
        assert!((&out.state.y - &target).amax() <= 1e-9 * target.amax().max(1.0));
    }

    #[test]
    fn start_at_plant_terminates_immediately() {
        let pl = plant(5, 6, 2, 1.0, 0.5).unwrap();
        let out = train(&pl.instance, &pl.optimum(), &SolverConfig::default(), Some(&pl.optimum())).unwrap();
        assert_eq!(out.trace.records.len(), 1);
        assert_eq!(out.termination, Termination::GradTol);
        assert!(out.trace.records[0].grad_norm() <= 1e-10);
    }

    #[test]
    fn single_iteration_cap() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let inst = random_instance(&mut rng, 6, 2, 1.0);
        let cfg = SolverConfig {
            t_max: 1,
            rho: 1.0,
            ..Default::default()
        };
        let out = train(&inst, &ParamState::zeros(2), &cfg, None).unwrap();
        assert_eq!(out.trace.updates(), 1);
        assert_eq!(out.termination, Termination::MaxIter);
        assert!(SolverConfig { t_max: 0, ..cfg }.validate().is_err());
    }

    #[test]
    fn exact_newton_converges_on_plant() {
        let pl = plant(7, 10, 2, 3.0, 1.0).unwrap();
        let star = pl.optimum();
        let mut init = star.clone();
        init.x[(0, 1)] += 1e-3;
        init.y[(1, 0)] -= 1e-3;
        let cfg = SolverConfig {
            eps: 1e-10,
            ..Default::default()
        };
        let out = train(&pl.instance, &init, &cfg, Some(&star)).unwrap();
        assert!(matches!(out.termination, Termination::GradTol | Termination::PlantTol));
        assert!(out.trace.contraction_ratios(1e-10).iter().all(|&r| r <= 0.4));
    }

    #[test]
    fn training_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let inst = random_instance(&mut rng, 8, 2, 1.0);
        let cfg = SolverConfig {
            t_max: 4,
            rho: 50.0,
            mode: HessianMode::Sketched(SketchConfig::srht(64, 3)),
            ..Default::default()
        };
        let a = train(&inst, &ParamState::zeros(2), &cfg, None).unwrap();
        let b = train(&inst, &ParamState::zeros(2), &cfg, None).unwrap();
        let strip = |o: &TrainOutcome| -> Vec<(f64, f64, Option<f64>)> {
            o.trace.records.iter().map(|r| (r.loss, r.grad_norm(), r.step_norm)).collect()
        };
        assert_eq!(strip(&a), strip(&b));
    }

    #[test]
    fn good_check_cases() {
        let z = Mat::zeros(5, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let inst = random_instance(&mut rng, 5, 2, 1.0);
        let y_only = ProblemInstance::new(z, inst.a2.clone(), inst.a3.clone(), inst.b.clone(), inst.w.clone(), 1.0, 1.0)
            .unwrap();
        let cfg = GoodCheckConfig {
            samples: 5,
            radius: 0.5,
            rho: 1.0,
            seed: 1,
        };
        let rep = good_check(&y_only, &random_params(&mut rng, 2, 1.0), None, &cfg).unwrap();
        assert_eq!(rep.m_hat_yy, 0.0);

        let big_l = inst.clone().with_target(1e6).unwrap();
        let rep = good_check(&big_l, &ParamState::zeros(2), None, &cfg).unwrap();
        assert!(!rep.good);
    }
}
