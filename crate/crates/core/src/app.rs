//! Command-line surface: `gen`, `run`, `verify` and `bench`.
//!
//! Every setting resolves as command-line flag, then `--config` JSON file,
//! then built-in default.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::bench::{run_bench, write_bench_csv, BenchConfig, BenchReport};
use crate::error::{Error, Result};
use crate::forward::{forward, ParamState, ProblemInstance};
use crate::hessian::{dominance_weight, HessianBundle};
use crate::io::{load_instance, save_instance, write_json, write_trace_csv, LoadedInstance};
use crate::linalg::{lambda_min, Vector};
use crate::oracles::{plant, random_instance};
use crate::seeds::{rng_for, Stream};
use crate::sketch::SketchConfig;
use crate::solver::{good_check, train, GoodCheckConfig, HessianMode, SolverConfig, TrainOutcome};
use crate::verify::{run_battery, VerifyConfig, VerifyReport};

/// Environment variable that caps worker threads for `verify`.
pub const THREADS_ENV: &str = "ATTN_NEWTON_THREADS";

#[derive(Debug, Parser)]
#[command(name = "attn-newton", version, about = "Newton training for softmax attention regression")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate an instance file (optionally with a planted optimum).
    Gen(GenArgs),
    /// Train on an instance and write a trace CSV plus a summary JSON.
    Run(RunArgs),
    /// Run the property battery; exits nonzero on any failure.
    Verify(VerifyArgs),
    /// Time Gram construction and sketched iterations over a sweep of n.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// JSON file with default settings for this command.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct InstanceArgs {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long = "R")]
    pub r: Option<f64>,
    /// Plant a zero-loss optimum.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub planted: Option<bool>,
    /// Planted optimum size relative to R.
    #[arg(long)]
    pub scale: Option<f64>,
    /// Target strong-convexity level stored with the instance.
    #[arg(long)]
    pub l: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GenArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub instance: InstanceArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SketchChoice {
    Exact,
    Srht,
    Sparse,
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub instance: InstanceArgs,
    /// Instance JSON to train on instead of generating one.
    #[arg(long = "instance")]
    pub instance_path: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub sketch: Option<SketchChoice>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub s: Option<usize>,
    /// Stopping tolerance on the gradient norm (and plant distance).
    #[arg(long)]
    pub eps: Option<f64>,
    /// Target accuracy recorded with the sketch.
    #[arg(long)]
    pub sketch_eps: Option<f64>,
    #[arg(long)]
    pub tmax: Option<usize>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub damping: Option<f64>,
    /// Distance of the initial point from the plant (or from zero). Defaults
    /// to the estimated basin radius around a plant, else 0.05.
    #[arg(long)]
    pub init_radius: Option<f64>,
    /// Set a uniform W at the penalty-dominance threshold for `l` and `rho`.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub auto_weight: Option<bool>,
    /// Fill the timing columns of the trace.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub timings: Option<bool>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Comma-separated property names to run.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    pub only: Option<Vec<String>>,
    /// Flip the sign of the analytic gradient (negative control).
    #[arg(long, hide = true)]
    pub inject_gradient_fault: bool,
}

#[derive(Debug, Clone, Default, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub d: Option<usize>,
    /// Comma-separated problem sizes.
    #[arg(long, value_delimiter = ',')]
    pub ns: Option<Vec<usize>>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    /// Also time full sketched iterations.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub iterations: Option<bool>,
}

/// Settings accepted by `--config`; every field is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub n: Option<usize>,
    pub d: Option<usize>,
    #[serde(rename = "R")]
    pub r: Option<f64>,
    pub planted: Option<bool>,
    pub scale: Option<f64>,
    pub l: Option<f64>,
    pub instance: Option<PathBuf>,
    pub sketch: Option<SketchChoice>,
    pub m: Option<usize>,
    pub s: Option<usize>,
    pub eps: Option<f64>,
    pub sketch_eps: Option<f64>,
    pub tmax: Option<usize>,
    pub rho: Option<f64>,
    pub damping: Option<f64>,
    pub init_radius: Option<f64>,
    pub auto_weight: Option<bool>,
    pub timings: Option<bool>,
    pub only: Option<Vec<String>>,
    pub ns: Option<Vec<usize>>,
    pub reps: Option<usize>,
    pub iterations: Option<bool>,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = fs::read_to_string(p)?;
                serde_json::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", p.display())))
            }
        }
    }
}

fn out_dir(common: &CommonArgs, file: &ConfigFile) -> Result<PathBuf> {
    let dir = common.out.clone().or(file.out.clone()).unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn positive_usize(name: &str, v: usize) -> Result<usize> {
    if v == 0 {
        return Err(Error::InvalidConfig(format!("{name} must be positive")));
    }
    Ok(v)
}

fn positive_f64(name: &str, v: f64) -> Result<f64> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::InvalidConfig(format!("{name} must be positive and finite, got {v}")));
    }
    Ok(v)
}

/// Resolved instance-generation settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenSettings {
    pub seed: u64,
    pub n: usize,
    pub d: usize,
    #[serde(rename = "R")]
    pub r: f64,
    pub planted: bool,
    pub scale: f64,
    pub l: f64,
}

impl GenSettings {
    fn resolve(args: &InstanceArgs, seed: Option<u64>, file: &ConfigFile, planted_default: bool) -> Result<Self> {
        Ok(Self {
            seed: seed.or(file.seed).unwrap_or(0),
            n: positive_usize("n", args.n.or(file.n).unwrap_or(16))?,
            d: positive_usize("d", args.d.or(file.d).unwrap_or(3))?,
            r: positive_f64("R", args.r.or(file.r).unwrap_or(4.0))?,
            planted: args.planted.or(file.planted).unwrap_or(planted_default),
            scale: positive_f64("scale", args.scale.or(file.scale).unwrap_or(1.0))?,
            l: positive_f64("l", args.l.or(file.l).unwrap_or(1.0))?,
        })
    }

    pub fn generate(&self) -> Result<LoadedInstance> {
        if self.planted {
            let pl = plant(self.seed, self.n, self.d, self.r, self.scale)?;
            Ok(LoadedInstance {
                plant: Some(pl.optimum()),
                instance: pl.instance.with_target(self.l)?,
                seed: Some(self.seed),
            })
        } else {
            let mut rng = rng_for(self.seed, Stream::Instance);
            let inst = random_instance(&mut rng, self.n, self.d, self.r).with_target(self.l)?;
            Ok(LoadedInstance {
                instance: inst,
                seed: Some(self.seed),
                plant: None,
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenOutcome {
    pub path: PathBuf,
    pub settings: GenSettings,
    pub instance: LoadedInstance,
}

pub fn cmd_gen(args: &GenArgs) -> Result<GenOutcome> {
    let file = ConfigFile::load(args.common.config.as_deref())?;
    let settings = GenSettings::resolve(&args.instance, args.common.seed, &file, false)?;
    let instance = settings.generate()?;
    let path = out_dir(&args.common, &file)?.join("instance.json");
    save_instance(&path, &instance)?;
    Ok(GenOutcome { path, settings, instance })
}

/// Fully resolved `run` settings, echoed into the summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSettings {
    pub instance_path: Option<PathBuf>,
    pub generation: Option<GenSettings>,
    pub seed: u64,
    pub sketch: SketchChoice,
    pub init_radius: f64,
    pub auto_weight: bool,
    pub timings: bool,
    pub solver: SolverConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedEcho {
    pub seed: u64,
    pub instance: Option<u64>,
    pub sketch: Option<u64>,
    pub init: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub final_loss: f64,
    pub final_grad_norm: f64,
    pub final_r: Option<f64>,
    pub iterations: usize,
    pub termination: String,
    pub contraction_violations: usize,
    pub n: usize,
    pub d: usize,
    pub config: RunSettings,
    pub seeds: SeedEcho,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub trace_path: PathBuf,
    pub summary_path: PathBuf,
    pub summary: RunSummary,
    pub train: TrainOutcome,
}

/// Point at distance `radius` (in `‖Δx‖ + ‖Δy‖`) from `center` along a
/// random direction.
fn offset<R: Rng>(rng: &mut R, center: &ParamState, radius: f64) -> Result<ParamState> {
    let dd = center.d() * center.d();
    let dx = Vector::from_fn(dd, |_, _| rng.random_range(-1.0..1.0));
    let dy = Vector::from_fn(dd, |_, _| rng.random_range(-1.0..1.0));
    let s = radius / (dx.norm() + dy.norm()).max(f64::MIN_POSITIVE);
    ParamState::from_vecs(&(center.x_vec() + dx * s), &(center.y_vec() + dy * s), center.d())
}

/// Start radius without a plant (offset from zero).
pub const DEFAULT_INIT_RADIUS: f64 = 0.05;

/// Largest probe radius for the basin estimate around a plant.
pub const BASIN_PROBE_RADIUS: f64 = 1e-3;

/// Radius `min(1e-3, 0.09·l/M̂)` around a plant, with `l = λmin(H*)` and
/// `M̂` the sampled Hessian Lipschitz estimate, so `r₀·M̂ ≤ 0.1·l` holds.
/// Falls back to the probe radius when `H*` is not positive definite.
pub fn basin_radius(inst: &ProblemInstance, star: &ParamState, seed: u64) -> Result<f64> {
    let l = lambda_min(&HessianBundle::exact(&forward(inst, star)?, inst).full())?;
    if l <= 0.0 {
        return Ok(BASIN_PROBE_RADIUS);
    }
    let probe = GoodCheckConfig {
        samples: 20,
        radius: BASIN_PROBE_RADIUS,
        rho: 0.0,
        seed,
    };
    let m_hat = good_check(&inst.clone().with_target(l)?, star, None, &probe)?.m_hat;
    Ok(if m_hat > 0.0 { (0.09 * l / m_hat).min(BASIN_PROBE_RADIUS) } else { BASIN_PROBE_RADIUS })
}

pub fn cmd_run(args: &RunArgs) -> Result<RunOutcome> {
    let file = ConfigFile::load(args.common.config.as_deref())?;
    let seed = args.common.seed.or(file.seed).unwrap_or(0);
    let instance_path = args.instance_path.clone().or(file.instance.clone());

    let (loaded, generation) = match &instance_path {
        Some(path) => {
            let loaded = load_instance(path)?;
            let (n, d) = (loaded.instance.n(), loaded.instance.d());
            for (name, want, got) in [("n", args.instance.n.or(file.n), n), ("d", args.instance.d.or(file.d), d)] {
                if let Some(w) = want {
                    if w != got {
                        return Err(Error::InvalidConfig(format!(
                            "{name} = {w} requested but instance {} has {name} = {got}",
                            path.display()
                        )));
                    }
                }
            }
            (loaded, None)
        }
        None => {
            let g = GenSettings::resolve(&args.instance, Some(seed), &file, true)?;
            (g.generate()?, Some(g))
        }
    };
    let LoadedInstance { mut instance, seed: instance_seed, plant } = loaded;

    let rho = args.rho.or(file.rho).unwrap_or(0.0);
    let sketch = args.sketch.or(file.sketch).unwrap_or(SketchChoice::Exact);
    let sketch_seed = rng_for(seed, Stream::Sketch).next_u64();
    let m = args.m.or(file.m).unwrap_or(1024);
    let mut sk = match sketch {
        SketchChoice::Exact => None,
        SketchChoice::Srht => Some(SketchConfig::srht(m, sketch_seed)),
        SketchChoice::Sparse => Some(SketchConfig::sparse(m, args.s.or(file.s).unwrap_or(4), sketch_seed)),
    };
    if let (Some(sk), Some(e)) = (sk.as_mut(), args.sketch_eps.or(file.sketch_eps)) {
        sk.epsilon = e;
    }
    let solver = SolverConfig {
        t_max: args.tmax.or(file.tmax).unwrap_or(50),
        eps: args.eps.or(file.eps).unwrap_or(1e-8),
        rho,
        mode: sk.map_or(HessianMode::Exact, HessianMode::Sketched),
        damping: args.damping.or(file.damping),
        ..Default::default()
    };
    solver.validate()?;

    let auto_weight = args.auto_weight.or(file.auto_weight).unwrap_or(false);
    if auto_weight {
        if rho == 0.0 {
            return Err(Error::InvalidConfig("--auto-weight needs rho > 0".into()));
        }
        let w = dominance_weight(&instance, instance.l, rho)?;
        instance = instance.with_uniform_weight(w)?;
    }
    // With a penalty the plant is no longer the minimizer, so r_t is not reported.
    let plant = plant.filter(|_| rho == 0.0);

    let init_seed = rng_for(seed, Stream::Solver).next_u64();
    let init_radius = match (args.init_radius.or(file.init_radius), &plant) {
        (Some(r), _) => r,
        (None, Some(star)) => basin_radius(&instance, star, init_seed)?,
        (None, None) => DEFAULT_INIT_RADIUS,
    };
    if !(init_radius >= 0.0 && init_radius.is_finite()) {
        return Err(Error::InvalidConfig(format!("init_radius must be non-negative, got {init_radius}")));
    }
    let mut init_rng = rng_for(init_seed, Stream::Solver);
    let center = plant.clone().unwrap_or_else(|| ParamState::zeros(instance.d()));
    let init = offset(&mut init_rng, &center, init_radius)?;

    let outcome = train(&instance, &init, &solver, plant.as_ref())?;
    let timings = args.timings.or(file.timings).unwrap_or(false);
    let dir = out_dir(&args.common, &file)?;
    let trace_path = dir.join("trace.csv");
    write_trace_csv(fs::File::create(&trace_path)?, &outcome.trace, timings)?;

    let last = outcome.trace.last();
    let final_loss = match last {
        Some(r) => r.loss,
        None => forward(&instance, &outcome.state)?.loss,
    };
    let summary = RunSummary {
        final_loss,
        final_grad_norm: last.map_or(f64::NAN, |r| r.grad_norm()),
        final_r: last.and_then(|r| r.r_t),
        iterations: outcome.trace.updates(),
        termination: outcome.termination.as_str().to_string(),
        contraction_violations: outcome.contraction_violations,
        n: instance.n(),
        d: instance.d(),
        config: RunSettings {
            instance_path,
            generation,
            seed,
            sketch,
            init_radius,
            auto_weight,
            timings,
            solver,
        },
        seeds: SeedEcho {
            seed,
            instance: instance_seed,
            sketch: sk.map(|s| s.seed),
            init: init_seed,
        },
    };
    let summary_path = dir.join("summary.json");
    write_json(&summary_path, &summary)?;
    Ok(RunOutcome {
        trace_path,
        summary_path,
        summary,
        train: outcome,
    })
}

/// Worker count from `ATTN_NEWTON_THREADS`, if set.
pub fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(t) if t > 0 => Ok(Some(t)),
            _ => Err(Error::InvalidConfig(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
        },
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOutcome {
    pub report_path: PathBuf,
    pub report: VerifyReport,
}

pub fn cmd_verify(args: &VerifyArgs) -> Result<VerifyOutcome> {
    let file = ConfigFile::load(args.common.config.as_deref())?;
    let cfg = VerifyConfig {
        seed: args.common.seed.or(file.seed).unwrap_or(0),
        only: args
            .only
            .clone()
            .or(file.only.clone())
            .map(|v| v.into_iter().map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()),
        inject_gradient_fault: args.inject_gradient_fault,
        threads: threads_from_env()?,
    };
    let report = run_battery(&cfg)?;
    let report_path = out_dir(&args.common, &file)?.join("verify_report.json");
    write_json(&report_path, &report)?;
    Ok(VerifyOutcome { report_path, report })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchOutcome {
    pub csv_path: PathBuf,
    pub report: BenchReport,
}

pub fn cmd_bench(args: &BenchArgs) -> Result<BenchOutcome> {
    let file = ConfigFile::load(args.common.config.as_deref())?;
    let base = BenchConfig::default();
    let cfg = BenchConfig {
        d: args.d.or(file.d).unwrap_or(base.d),
        ns: args.ns.clone().or(file.ns.clone()).unwrap_or(base.ns),
        reps: args.reps.or(file.reps).unwrap_or(base.reps),
        m: args.m.or(file.m).unwrap_or(base.m),
        seed: args.common.seed.or(file.seed).unwrap_or(base.seed),
        iterations: args.iterations.or(file.iterations).unwrap_or(base.iterations),
    };
    let report = run_bench(&cfg)?;
    let dir = out_dir(&args.common, &file)?;
    let csv_path = dir.join("bench.csv");
    write_bench_csv(fs::File::create(&csv_path)?, &report)?;
    write_json(&dir.join("bench.json"), &report)?;
    Ok(BenchOutcome { csv_path, report })
}

/// Run one parsed command, print a short report and return the exit code.
pub fn dispatch(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Gen(a) => {
            let o = cmd_gen(a)?;
            println!(
                "wrote {} (n={}, d={}, planted={})",
                o.path.display(),
                o.settings.n,
                o.settings.d,
                o.settings.planted
            );
            Ok(0)
        }
        Command::Run(a) => {
            let o = cmd_run(a)?;
            let s = &o.summary;
            println!(
                "{} after {} iterations: loss {:e}, |g| {:e}",
                s.termination, s.iterations, s.final_loss, s.final_grad_norm
            );
            println!("wrote {} and {}", o.trace_path.display(), o.summary_path.display());
            Ok(0)
        }
        Command::Verify(a) => {
            let o = cmd_verify(a)?;
            for p in &o.report.properties {
                println!("{}", p.summary_line());
                for note in &p.notes {
                    println!("    {note}");
                }
            }
            println!("status: {} ({})", o.report.status, o.report_path.display());
            Ok(if o.report.passed() { 0 } else { 1 })
        }
        Command::Bench(a) => {
            let o = cmd_bench(a)?;
            for r in &o.report.rows {
                println!("n={:>6} {:<20} {:>12.3} ms", r.n, r.method, r.median_ms);
            }
            for (m, s) in &o.report.slopes {
                println!("slope {m}: {s:.3}");
            }
            println!("total {:.1} s, wrote {}", o.report.total_s, o.csv_path.display());
            Ok(0)
        }
    }
}
