// Temporary convergence probe for the inner iteration; removed once the
// stopping rules settle.
use std::time::Instant;

use ctcrd_core::model::{modified_distortion, validate_document};
use ctcrd_core::presets::preset_document;
use ctcrd_core::rd::ba_fixed_multipliers;

#[test]
#[ignore]
fn ba_iteration_counts_on_example3() {
    let v = validate_document(&preset_document("example3").unwrap()).unwrap();
    let px = v.source.symbol_marginal();
    let matrices: Vec<Vec<f64>> = v
        .criteria
        .iter()
        .map(|c| modified_distortion(&v.source, c).unwrap())
        .collect();
    for s in [1.0, 5.0, 20.0, 50.0, 200.0, 1000.0, 5000.0] {
        let t0 = Instant::now();
        let out = ba_fixed_multipliers(&px, &matrices, 256, &[s, s], 1e-10, 50_000).unwrap();
        println!(
            "s={s:8.1}: rate={:.6} d=({:.6},{:.6}) iters={} ({:?})",
            out.rate, out.distortions[0], out.distortions[1], out.iterations, t0.elapsed()
        );
    }
}
