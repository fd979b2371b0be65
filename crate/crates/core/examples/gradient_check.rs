// Closed-form gradients against central finite differences.

use attn_newton::forward::{forward, ParamState};
use attn_newton::gradients::grad_fast;
use attn_newton::oracles::{fd_gradient, random_instance, random_params, FD_GRADIENT_STEP};
use attn_newton::seeds::{rng_for, Stream};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = rng_for(11, Stream::Instance);
    let inst = random_instance(&mut rng, 12, 3, 1.0);
    let p = random_params(&mut rng, 3, 1.0);
    let g = grad_fast(&inst, &p, &forward(&inst, &p)?)?;

    let y = p.y_vec();
    let fd = fd_gradient(
        |x| Ok(forward(&inst, &ParamState::from_vecs(x, &y, 3)?)?.loss),
        &p.x_vec(),
        FD_GRADIENT_STEP,
    )?;
    let rel = (&g.gx - &fd).norm() / fd.norm().max(1e-8);
    println!("|gx| = {:.6e}, relative error vs FD = {rel:.2e}", g.gx.norm());
    if rel > 1e-6 {
        return Err(format!("gradient mismatch {rel:e}").into());
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
