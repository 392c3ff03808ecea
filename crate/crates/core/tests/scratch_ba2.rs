// Temporary single-multiplier trace; removed once the stopping rules settle.
use ctcrd_core::model::{modified_distortion, validate_document};
use ctcrd_core::presets::preset_document;
use ctcrd_core::rd::ba_fixed_multipliers;

#[test]
#[ignore]
fn trace_one() {
    let v = validate_document(&preset_document("example3").unwrap()).unwrap();
    let px = v.source.symbol_marginal();
    let matrices: Vec<Vec<f64>> = v
        .criteria
        .iter()
        .map(|c| modified_distortion(&v.source, c).unwrap())
        .collect();
    let out = ba_fixed_multipliers(&px, &matrices, 256, &[5000.0, 5000.0], 1e-10, 50_000).unwrap();
    println!("rate={} iters={}", out.rate, out.iterations);
}
