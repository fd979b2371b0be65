// TensorSRHT and TensorSparse sketches of the Kronecker Gram.

use attn_newton::oracles::{random_instance, OracleCap};
use attn_newton::kron::materialize_kron;
use attn_newton::seeds::{rng_for, Stream};
use attn_newton::sketch::{apply_sketch, fwht, gram_sandwich, ose_quality, SketchConfig};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    println!("FWHT of e0 over 4 points: {:?}", fwht(&[1.0, 0.0, 0.0, 0.0])?);

    let mut rng = rng_for(2, Stream::Instance);
    let inst = random_instance(&mut rng, 8, 2, 1.0);
    let big = materialize_kron(&inst.a1, &inst.a2, OracleCap::default())?;
    let gram = big.transpose() * &big;

    for cfg in [SketchConfig::srht(1024, 9), SketchConfig::sparse(1024, 4, 9)] {
        let sk = apply_sketch(&inst.a1, &inst.a2, &cfg)?;
        let band = gram_sandwich(&gram, &sk.gram())?;
        let eps = ose_quality(&big, &sk.sa)?;
        println!(
            "{:?} m={}: sandwich [{:.3}, {:.3}], subspace error {eps:.3}",
            cfg.kind, cfg.m, band.lower, band.upper
        );
        if !band.within(0.5) {
            return Err(format!("{:?} sketch outside the 0.5 band", cfg.kind).into());
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
