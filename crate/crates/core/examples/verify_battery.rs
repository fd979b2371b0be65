// A slice of the property battery, as `attn-newton verify --only ...` runs it.

use attn_newton::verify::{property_names, run_battery, VerifyConfig};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    println!("available properties: {}", property_names().join(", "));
    let cfg = VerifyConfig {
        seed: 42,
        only: Some(vec!["gradient_fd".into(), "norm_caps".into(), "sketch_sandwich_srht".into()]),
        ..Default::default()
    };
    let report = run_battery(&cfg)?;
    for p in &report.properties {
        println!("{}", p.summary_line());
    }
    println!("status: {}", report.status);
    if !report.passed() {
        return Err("battery failed".into());
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
