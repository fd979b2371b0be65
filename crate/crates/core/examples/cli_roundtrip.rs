// Generate an instance file, then train on it through the command layer.

use attn_newton::app::{cmd_gen, cmd_run, CommonArgs, GenArgs, InstanceArgs, RunArgs};
use attn_newton::io::read_trace_csv;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let common = CommonArgs {
        out: Some(dir.path().to_path_buf()),
        seed: Some(8),
        ..Default::default()
    };
    let gen = cmd_gen(&GenArgs {
        common: common.clone(),
        instance: InstanceArgs {
            n: Some(10),
            d: Some(2),
            r: Some(3.0),
            planted: Some(true),
            ..Default::default()
        },
    })?;
    println!("instance written to {}", gen.path.display());

    let run = cmd_run(&RunArgs {
        common,
        instance_path: Some(gen.path.clone()),
        init_radius: Some(1e-3),
        ..Default::default()
    })?;
    let rows = read_trace_csv(&run.trace_path)?;
    println!(
        "{} rows, termination {}, final loss {:e}",
        rows.len(),
        run.summary.termination,
        run.summary.final_loss
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
