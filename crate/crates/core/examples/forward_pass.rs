// Forward pass on a planted instance: attention rows, residuals and loss.

use attn_newton::forward::{alpha_diagnostics, forward};
use attn_newton::oracles::plant;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let pl = plant(3, 8, 2, 1.0, 0.8)?;
    let star = pl.optimum();
    let cache = forward(&pl.instance, &star)?;
    println!("loss at plant: {:e}", cache.loss);
    if cache.loss > 1e-20 {
        return Err(format!("planted loss too large: {:e}", cache.loss).into());
    }

    let row_sums: Vec<f64> = cache.f.row_iter().map(|r| r.sum()).collect();
    println!("softmax row sums: {row_sums:.3?}");

    let alpha = alpha_diagnostics(&pl.instance, &star)?;
    println!(
        "smallest normalizer {:.4} (bound exp(-R^2) = {:.4}, ok = {})",
        alpha.alpha_min,
        (-1.0f64).exp(),
        alpha.beta_bound_ok
    );

    let mut moved = star.clone();
    moved.x[(0, 0)] += 0.1;
    println!("loss after moving x[0,0] by 0.1: {:e}", forward(&pl.instance, &moved)?.loss);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
