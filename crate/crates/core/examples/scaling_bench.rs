// Small timing sweep: streamed Kronecker Gram vs sketched Gram.

use attn_newton::bench::{run_bench, BenchConfig};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = BenchConfig {
        ns: vec![64, 128, 256],
        reps: 3,
        m: 256,
        iterations: false,
        ..Default::default()
    };
    let report = run_bench(&cfg)?;
    for r in &report.rows {
        println!("n={:>4} {:<14} {:>9.3} ms", r.n, r.method, r.median_ms);
    }
    for (method, slope) in &report.slopes {
        println!("log-log slope {method}: {slope:.2}");
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
