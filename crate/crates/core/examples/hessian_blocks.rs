// Hessian blocks three ways, and the strong-convexity threshold on W.

use attn_newton::forward::forward;
use attn_newton::hessian::{
    assemble_regularized, hess_xx_entrywise, hess_xx_from_b, psd_report, strong_convexity_weight,
    CoefficientForm, HessianBundle,
};
use attn_newton::linalg::scaled_diff;
use attn_newton::oracles::{random_instance, random_params, OracleCap};
use attn_newton::seeds::{rng_for, Stream};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = rng_for(5, Stream::Instance);
    let inst = random_instance(&mut rng, 6, 2, 1.0);
    let p = random_params(&mut rng, 2, 1.0);
    let cache = forward(&inst, &p)?;
    let bundle = HessianBundle::exact(&cache, &inst);

    let entry = hess_xx_entrywise(&cache, &inst, CoefficientForm::Derived, OracleCap::default())?;
    let agree = scaled_diff(&bundle.hxx, &entry);
    let printed = scaled_diff(&hess_xx_from_b(&cache, &inst, CoefficientForm::AsPrinted), &entry);
    println!("x-block: structured vs entry {agree:.1e}, printed coefficients vs entry {printed:.1e}");
    if agree > 1e-9 {
        return Err("structured x-block disagrees with entry formula".into());
    }

    let w = strong_convexity_weight(&inst, 1.0, 1.0)?;
    let weighted = inst.with_uniform_weight(w)?;
    let cache = forward(&weighted, &p)?;
    let reg = assemble_regularized(&HessianBundle::exact(&cache, &weighted), &weighted, 1.0)?;
    let rep = psd_report(&reg, &weighted)?;
    println!(
        "w = {w:.3e}: alpha1 = {:.3e}, alpha2 = {:.3e}, alpha3 = {:.3e}, lambda_min(H) = {:.3e}",
        rep.alpha1, rep.alpha2, rep.alpha3, rep.lambda_min_full
    );
    if !rep.lower_bound_ok {
        return Err("regularized Hessian below the target level".into());
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
