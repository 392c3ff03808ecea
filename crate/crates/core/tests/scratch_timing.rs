// Temporary timing probe; removed once tolerances and runtimes settle.
use std::time::Instant;

use ctcrd_core::model::{validate_document, DistortionBudget};
use ctcrd_core::presets::preset_document;
use ctcrd_core::{label_based_rate_with_reference, optimal_rate, SolverOptions};

#[test]
#[ignore]
fn time_example3_star_only() {
    let v = validate_document(&preset_document("example3").unwrap()).unwrap();
    let opts = SolverOptions::default();
    for level in [0.25, 1e-2, 1e-3, 1e-4] {
        let budget = DistortionBudget::uniform(&v.criteria, level).unwrap();
        let t0 = Instant::now();
        let point = optimal_rate(&v.source, &v.criteria, &budget, &opts).unwrap();
        println!("D={level:e}: R*={:.6}  ({:?})", point.rate, t0.elapsed());
    }
}

#[test]
#[ignore]
fn time_example3_rg() {
    let v = validate_document(&preset_document("example3").unwrap()).unwrap();
    let opts = SolverOptions::default();
    for level in [0.25, 1e-4] {
        let budget = DistortionBudget::uniform(&v.criteria, level).unwrap();
        let point = optimal_rate(&v.source, &v.criteria, &budget, &opts).unwrap();
        let t0 = Instant::now();
        let (rg, _) = label_based_rate_with_reference(
            &v.source,
            &v.classifier,
            &v.criteria,
            &budget,
            1e-3,
            &opts,
            Some(&point),
        )
        .unwrap();
        let gap = rg + 1.0 - point.rate;
        println!(
            "D={level:e}: R*={:.6} RG={rg:.6} gap={gap:.6}  ({:?})",
            point.rate,
            t0.elapsed()
        );
    }
}
