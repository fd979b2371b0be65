mod forward_pass_example {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/forward_pass.rs"));
}
mod gradient_check_example {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/gradient_check.rs"));
}
mod hessian_blocks_example {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/hessian_blocks.rs"));
}
mod tensor_sketch_example {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/tensor_sketch.rs"));
}
mod newton_training_example {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/newton_training.rs"));
}
mod verify_battery_example {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/verify_battery.rs"));
}
mod scaling_bench_example {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/scaling_bench.rs"));
}
mod cli_roundtrip_example {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/cli_roundtrip.rs"));
}

#[test]
fn forward_pass_example_runs() {
    forward_pass_example::run_example().expect("forward pass example should run");
}

#[test]
fn gradient_check_example_runs() {
    gradient_check_example::run_example().expect("gradient check example should run");
}

#[test]
fn hessian_blocks_example_runs() {
    hessian_blocks_example::run_example().expect("hessian blocks example should run");
}

#[test]
fn tensor_sketch_example_runs() {
    tensor_sketch_example::run_example().expect("tensor sketch example should run");
}

#[test]
fn newton_training_example_runs() {
    newton_training_example::run_example().expect("newton training example should run");
}

#[test]
fn verify_battery_example_runs() {
    verify_battery_example::run_example().expect("verify battery example should run");
}

#[test]
fn scaling_bench_example_runs() {
    scaling_bench_example::run_example().expect("scaling bench example should run");
}

#[test]
fn cli_roundtrip_example_runs() {
    cli_roundtrip_example::run_example().expect("cli roundtrip example should run");
}
