// Exact and sketched Newton on planted problems, with a CSV trace.

use attn_newton::hessian::dominance_weight;
use attn_newton::io::write_trace_csv;
use attn_newton::oracles::{plant, random_params};
use attn_newton::seeds::{rng_for, Stream};
use attn_newton::sketch::SketchConfig;
use attn_newton::solver::{train, HessianMode, SolverConfig};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    // Exact Hessian from near the plant; r_t is the distance to it.
    let pl = plant(1, 16, 3, 4.0, 1.0)?;
    let star = pl.optimum();
    let mut init = star.clone();
    init.x[(0, 1)] += 1e-3;
    init.y[(2, 0)] -= 1e-3;
    let exact = train(&pl.instance, &init, &SolverConfig::default(), Some(&star))?;
    for r in &exact.trace.records {
        println!("t={} loss={:.3e} r={:.3e}", r.t, r.loss, r.r_t.unwrap_or(f64::NAN));
    }
    println!("exact: {}", exact.termination.as_str());

    // Penalized objective with a sketched x-block, from a random start.
    let pl = plant(2, 16, 3, 1.0, 1.0)?;
    let inst = pl.instance.clone().with_uniform_weight(dominance_weight(&pl.instance, 1.0, 1.0)?)?;
    let cfg = SolverConfig {
        rho: 1.0,
        mode: HessianMode::Sketched(SketchConfig::srht(1024, 4)),
        contraction_assert: None,
        ..Default::default()
    };
    let start = random_params(&mut rng_for(2, Stream::Solver), 3, 1.0);
    let sketched = train(&inst, &start, &cfg, None)?;
    println!(
        "sketched: {} after {} updates",
        sketched.termination.as_str(),
        sketched.trace.updates()
    );

    let mut csv = Vec::new();
    write_trace_csv(&mut csv, &sketched.trace, false)?;
    print!("{}", String::from_utf8(csv)?);
    if exact.termination.as_str() != "grad_tol" || sketched.termination.as_str() != "grad_tol" {
        return Err("training did not converge".into());
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
