// Temporary probe of one dual solve; removed once runtimes settle.
use std::time::Instant;

use ctcrd_core::model::{validate_document, DistortionBudget};
use ctcrd_core::presets::preset_document;
use ctcrd_core::{optimal_rate, SolverOptions};

#[test]
#[ignore]
fn one_point() {
    let v = validate_document(&preset_document("example3").unwrap()).unwrap();
    let opts = SolverOptions::default();
    let level: f64 = std::env::var("LEVEL").map(|s| s.parse().unwrap()).unwrap_or(1e-2);
    let budget = DistortionBudget::uniform(&v.criteria, level).unwrap();
    let t0 = Instant::now();
    let point = optimal_rate(&v.source, &v.criteria, &budget, &opts).unwrap();
    println!("D={level:e}: R*={:.6}  ({:?})", point.rate, t0.elapsed());
}
