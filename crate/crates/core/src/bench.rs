//! Timing sweeps over `n` at fixed `d`.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::forward;
use crate::gradients::grad_total;
use crate::linalg::{loglog_slope, median};
use crate::oracles::{random_instance, random_params};
use crate::seeds::{derive_seed, rng_for, Stream};
use crate::sketch::{gram_by_rows, sketched_gram, SketchConfig};
use crate::solver::{build_approx_hessian, default_damping, newton_step, HessianMode, SolverConfig};

pub const METHOD_EXACT_GRAM: &str = "exact_gram";
pub const METHOD_SKETCHED_GRAM: &str = "sketched_gram";
pub const METHOD_ITERATION: &str = "iteration_sketched";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub d: usize,
    pub ns: Vec<usize>,
    pub reps: usize,
    pub m: usize,
    pub seed: u64,
    /// Also time one full sketched Newton update per rep.
    pub iterations: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            d: 4,
            ns: (8..=12).map(|k| 1usize << k).collect(),
            reps: 5,
            m: 512,
            seed: 0,
            iterations: true,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.ns.is_empty() || self.ns.contains(&0) {
            return Err(Error::InvalidConfig("bench needs d > 0 and positive n values".into()));
        }
        if self.reps == 0 || self.m == 0 {
            return Err(Error::InvalidConfig("bench needs reps > 0 and m > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub n: usize,
    pub method: String,
    pub median_ms: f64,
    pub reps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub config: BenchConfig,
    pub rows: Vec<BenchRow>,
    /// Fitted log-log exponent of median time against `n`, per method
    /// (present when at least two sizes were timed).
    pub slopes: BTreeMap<String, f64>,
    pub total_s: f64,
}

impl BenchReport {
    pub fn series(&self, method: &str) -> Vec<(usize, f64)> {
        self.rows
            .iter()
            .filter(|r| r.method == method)
            .map(|r| (r.n, r.median_ms))
            .collect()
    }
}

/// Per-call milliseconds; short calls are batched so one timed rep spans at least
/// `MIN_REP_MS`. The first (warm-up) call also sizes the batch.
const MIN_REP_MS: f64 = 5.0;

fn median_ms<T>(reps: usize, mut f: impl FnMut() -> Result<T>) -> Result<f64> {
    let start = Instant::now();
    std::hint::black_box(f()?);
    let warm = start.elapsed().as_secs_f64() * 1e3;
    let batch = if warm >= MIN_REP_MS { 1 } else { (MIN_REP_MS / warm.max(1e-6)).ceil().min(1e4) as usize };
    let mut times = Vec::with_capacity(reps);
    for _ in 0..reps {
        let start = Instant::now();
        for _ in 0..batch {
            std::hint::black_box(f()?);
        }
        times.push(start.elapsed().as_secs_f64() * 1e3 / batch as f64);
    }
    Ok(median(&times))
}

pub fn run_bench(cfg: &BenchConfig) -> Result<BenchReport> {
    cfg.validate()?;
    let start = Instant::now();
    let mut rows = Vec::new();
    for (k, &n) in cfg.ns.iter().enumerate() {
        let mut rng = rng_for(derive_seed(cfg.seed, k as u64), Stream::Bench);
        let inst = random_instance(&mut rng, n, cfg.d, 1.0);
        let sketch = SketchConfig::srht(cfg.m, derive_seed(cfg.seed, 100 + k as u64));

        let exact = median_ms(cfg.reps, || Ok(gram_by_rows(&inst)))?;
        rows.push(BenchRow { n, method: METHOD_EXACT_GRAM.into(), median_ms: exact, reps: cfg.reps });

        let sk = median_ms(cfg.reps, || sketched_gram(&inst, &sketch))?;
        rows.push(BenchRow { n, method: METHOD_SKETCHED_GRAM.into(), median_ms: sk, reps: cfg.reps });

        if cfg.iterations {
            let p = random_params(&mut rng, cfg.d, 1.0);
            let solver = SolverConfig {
                rho: 1.0,
                mode: HessianMode::Sketched(sketch),
                ..Default::default()
            };
            let it = median_ms(cfg.reps, || {
                let cache = forward(&inst, &p)?;
                let g = grad_total(&inst, &p, &cache, solver.rho)?;
                let h = build_approx_hessian(&inst, &cache, &solver, 0)?;
                newton_step(&p, &g, &h, default_damping(&h))
            })?;
            rows.push(BenchRow { n, method: METHOD_ITERATION.into(), median_ms: it, reps: cfg.reps });
        }
    }
    let mut report = BenchReport {
        config: cfg.clone(),
        rows,
        slopes: BTreeMap::new(),
        total_s: 0.0,
    };
    if cfg.ns.len() >= 2 {
        for method in [METHOD_EXACT_GRAM, METHOD_SKETCHED_GRAM, METHOD_ITERATION] {
            let s = report.series(method);
            if s.len() >= 2 {
                let xs: Vec<f64> = s.iter().map(|p| p.0 as f64).collect();
                let ys: Vec<f64> = s.iter().map(|p| p.1.max(1e-9)).collect();
                report.slopes.insert(method.to_string(), loglog_slope(&xs, &ys));
            }
        }
    }
    report.total_s = start.elapsed().as_secs_f64();
    Ok(report)
}

/// `n,method,median_ms,reps` table.
pub fn write_bench_csv<W: Write>(out: W, report: &BenchReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "method", "median_ms", "reps"])?;
    for r in &report.rows {
        w.write_record([r.n.to_string(), r.method.clone(), format!("{:e}", r.median_ms), r.reps.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_size_single_rep_has_one_row_per_method() {
        let cfg = BenchConfig {
            ns: vec![16],
            reps: 1,
            m: 32,
            ..Default::default()
        };
        let rep = run_bench(&cfg).unwrap();
        assert_eq!(rep.rows.len(), 3);
        assert!(rep.slopes.is_empty());
        let mut buf = Vec::new();
        write_bench_csv(&mut buf, &rep).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 4);
    }

    #[test]
    fn rejects_zero_reps() {
        let cfg = BenchConfig { reps: 0, ..Default::default() };
        assert!(run_bench(&cfg).is_err());
    }
}
