//! Subcommand implementations.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use ctcrd_core::codec::{
    assemble_ctc, assemble_label_based, chunked_vlc, lossless_label_code, simulate as run_sim,
    write_container, CodeUnderTest, SimulationParams, VariableLengthCode,
};
use ctcrd_core::model::{
    active_criteria, active_labels, class_conditional, modified_distortion, validate_document,
    DistortionBudget, ValidatedSource,
};
use ctcrd_core::presets::preset_document;
use ctcrd_core::rd::rate_for_budget;
use ctcrd_core::{
    classical_rd, format_float, gap_sweep, label_based_rate, label_entropy, optimal_rate_warm,
    SolverOptions,
};

use crate::grid::{budgets_from_axes, parse_axis, GridAxis};
use crate::{BuildArgs, SimArgs, Sweep};

/// Per-class quantizer block length used by the simulation designer.
const BLOCK_LEN: usize = 20;

fn install_threads(threads: Option<usize>) {
    if let Some(n) = threads {
        // A second call in the same process keeps the existing pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn load_model(spec: &Option<std::path::PathBuf>, example: &Option<String>) -> Result<(ValidatedSource, String)> {
    match (spec, example) {
        (Some(path), None) => {
            let raw = fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            let model = ctcrd_core::validate_source(&raw)?;
            let name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "spec".to_string());
            Ok((model, name))
        }
        (None, Some(name)) => {
            let doc = preset_document(name)?;
            Ok((validate_document(&doc)?, name.clone()))
        }
        _ => bail!("exactly one of --spec and --example is required"),
    }
}

fn solver_options(tol: f64) -> SolverOptions {
    SolverOptions {
        constraint_tol: tol,
        ..SolverOptions::default()
    }
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn rd_sweep(args: Sweep) -> Result<()> {
    install_threads(args.threads);
    let (model, name) = load_model(&args.model.spec, &args.model.example)?;
    let opts = solver_options(args.tol);

    if args.budget_grid.is_empty() {
        match name.as_str() {
            "example1" => return constraint_line_sweep(&model, &opts, &args),
            "example2" => {
                let axes = default_axes(&model, 0.0, 0.6, 50);
                return surface_sweep(&model, &axes, &opts, &args, "fig4.csv", "fig5.csv");
            }
            "example3" => {
                let axes = default_axes(&model, 0.0, 0.3, 50);
                return surface_sweep(&model, &axes, &opts, &args, "fig6.csv", "fig7.csv");
            }
            _ => bail!("--budget-grid is required for a custom source document"),
        }
    }

    let axes: Vec<GridAxis> = args
        .budget_grid
        .iter()
        .map(|t| parse_axis(t))
        .collect::<Result<_>>()?;
    let budgets = budgets_from_axes(&model.criteria, &axes)?;
    let report = gap_sweep(
        &model.source,
        &model.classifier,
        &model.criteria,
        &budgets,
        args.alloc_res,
        &opts,
    )?;
    write(&args.out.join("rd_sweep.csv"), &report.to_csv())?;
    println!("wrote {}", args.out.join("rd_sweep.csv").display());
    Ok(())
}

fn default_axes(model: &ValidatedSource, min: f64, max: f64, steps: usize) -> Vec<GridAxis> {
    model
        .criteria
        .iter()
        .map(|c| GridAxis {
            id: c.id().to_string(),
            min,
            max,
            steps,
        })
        .collect()
}

/// Full-surface sweep written as an R* projection plus the complete report.
fn surface_sweep(
    model: &ValidatedSource,
    axes: &[GridAxis],
    opts: &SolverOptions,
    args: &Sweep,
    surface_file: &str,
    gap_file: &str,
) -> Result<()> {
    let budgets = budgets_from_axes(&model.criteria, axes)?;
    let report = gap_sweep(
        &model.source,
        &model.classifier,
        &model.criteria,
        &budgets,
        args.alloc_res,
        opts,
    )?;
    let mut surface = String::new();
    for id in &report.criteria_ids {
        surface.push_str(&format!("D_{id},"));
    }
    surface.push_str("R_star,status\n");
    for p in &report.points {
        for v in &p.levels {
            surface.push_str(&format_float(*v));
            surface.push(',');
        }
        surface.push_str(&format!("{},{}\n", format_float(p.rate_optimal), p.status));
    }
    write(&args.out.join(surface_file), &surface)?;
    write(&args.out.join(gap_file), &report.to_csv())?;
    println!("wrote {}", args.out.join(surface_file).display());
    println!("wrote {}", args.out.join(gap_file).display());
    Ok(())
}

/// Sweep along the lines where the state-weighted budget average is held at
/// a few fixed levels, reporting the constrained rate along each line next
/// to the matching classical rate of the symbol marginal.
fn constraint_line_sweep(model: &ValidatedSource, opts: &SolverOptions, args: &Sweep) -> Result<()> {
    if model.criteria.len() != 2 {
        bail!("the constraint-line sweep needs exactly two criteria");
    }
    let weights: Vec<f64> = model
        .criteria
        .iter()
        .map(|c| model.source.state_subset_probability(c.state_subset()))
        .collect();
    let px = model.source.symbol_marginal();
    let mut out = String::from("delta,D_0,D_1,R_star,R_O,status\n");
    for delta in [0.1, 0.25, 0.4] {
        let classical = classical_rd(
            &px,
            model.criteria[0].distortion_row_major(),
            model.source.n_reproductions(),
            delta,
            opts,
        )?;
        let d0_max = (delta / weights[0]).min(1.0);
        let points = 201usize;
        let mut warm: Option<Vec<f64>> = None;
        for i in 0..points {
            let d0 = d0_max * i as f64 / (points - 1) as f64;
            let d1 = (delta - weights[0] * d0) / weights[1];
            if d1 < 0.0 {
                continue;
            }
            let budget = DistortionBudget::from_pairs(&[
                (model.criteria[0].id(), d0),
                (model.criteria[1].id(), d1),
            ])?;
            let row = match optimal_rate_warm(
                &model.source,
                &model.criteria,
                &budget,
                opts,
                warm.as_deref(),
            ) {
                Ok(point) => {
                    warm = Some(point.multipliers.values().copied().collect());
                    format!(
                        "{},{},{},{},{},ok\n",
                        format_float(delta),
                        format_float(d0),
                        format_float(d1),
                        format_float(point.rate),
                        format_float(classical)
                    )
                }
                Err(e) => format!(
                    "{},{},{},nan,{},{}\n",
                    format_float(delta),
                    format_float(d0),
                    format_float(d1),
                    format_float(classical),
                    e
                ),
            };
            out.push_str(&row);
        }
    }
    write(&args.out.join("fig3.csv"), &out)?;
    println!("wrote {}", args.out.join("fig3.csv").display());
    Ok(())
}

pub fn simulate(args: SimArgs) -> Result<()> {
    install_threads(args.threads);
    let (model, _) = load_model(&args.model.spec, &args.model.example)?;
    let opts = solver_options(args.tol);

    let axes: Vec<GridAxis> = args
        .budget_grid
        .iter()
        .map(|t| parse_axis(t))
        .collect::<Result<_>>()?;
    if axes.is_empty() {
        bail!("--budget-grid is required; the minima define the design budget");
    }
    let mut levels = std::collections::BTreeMap::new();
    for axis in &axes {
        levels.insert(axis.id.clone(), axis.min);
    }
    let budget = DistortionBudget::new(levels)?;
    budget.resolve(&model.criteria)?;

    let eps: Vec<f64> = args
        .eps
        .split(',')
        .filter(|t| !t.is_empty())
        .map(|t| t.trim().parse::<f64>().context("parsing --eps"))
        .collect::<Result<_>>()?;

    // Rate targets: the label-conditional rate fixes the per-class budgets.
    let (given_rate, allocation) = label_based_rate(
        &model.source,
        &model.classifier,
        &model.criteria,
        &budget,
        args.alloc_res,
        &opts,
    )?;
    let entropy = label_entropy(&model.source, &model.classifier);
    let ctc_rate = given_rate + entropy;
    println!("label-conditional rate {given_rate:.6}, label entropy {entropy:.6}, ctc rate {ctc_rate:.6}");

    let code = build_ctc_code(&model, &allocation, &opts, args.seed)?;

    let params = SimulationParams {
        n: args.n,
        trials: args.trials,
        seed: args.seed,
        eps,
    };
    let report = run_sim(
        &model.source,
        &CodeUnderTest::Ctc(&code),
        &model.criteria,
        &budget,
        &params,
    )?;
    write(&args.out.join("simulation.csv"), &report.to_csv())?;
    println!(
        "mean rate {:.6} bits/symbol over {} trials (max {:.6})",
        report.mean_rate(),
        report.trials.len(),
        report.max_rate()
    );

    if args.n > 0 {
        // One deterministic encoded stream in the container format.
        let sample = sample_symbols(&model, args.n, args.seed);
        let bits = code.encode(&sample)?;
        let path = args.out.join("stream.crd");
        let mut file = fs::File::create(&path)?;
        write_container(&mut file, &bits)?;
        println!("wrote {}", path.display());
    }
    println!("wrote {}", args.out.join("simulation.csv").display());
    Ok(())
}

/// Designs per-class codes at the allocation's levels and assembles the
/// classify-then-compress code.
fn build_ctc_code(
    model: &ValidatedSource,
    allocation: &ctcrd_core::DistortionAllocation,
    opts: &SolverOptions,
    seed: u64,
) -> Result<ctcrd_core::codec::CtcCode> {
    let act_criteria = active_criteria(&model.source, &model.criteria);
    let act_labels = active_labels(&model.source, &model.classifier);
    let n_rep = model.source.n_reproductions();

    let mut per_class: Vec<Box<dyn VariableLengthCode>> = Vec::new();
    for u in 0..model.classifier.n_labels() {
        if !act_labels.contains(&u) {
            // Unreachable classes still need a total code.
            per_class.push(Box::new(chunked_vlc(
                &uniformish(model.source.n_symbols()),
                model.criteria[0].distortion_row_major(),
                n_rep,
                0.0,
                BLOCK_LEN,
                seed,
            )));
            continue;
        }
        let conditional = class_conditional(&model.source, &model.classifier, u)?;
        let class_pmf = conditional.symbol_marginal();

        // Criteria active within this class, their reweighted matrices and
        // the class's levels from the allocation.
        let mut matrices = Vec::new();
        let mut class_levels = Vec::new();
        let mut ids = Vec::new();
        for &k in &act_criteria {
            let mass = conditional.state_subset_probability(model.criteria[k].state_subset());
            if mass > 0.0 {
                matrices.push(modified_distortion(&conditional, &model.criteria[k])?);
                class_levels.push(allocation.level(k, u));
                ids.push(model.criteria[k].id().to_string());
            }
        }
        if matrices.is_empty() {
            per_class.push(Box::new(chunked_vlc(
                &class_pmf,
                model.criteria[0].distortion_row_major(),
                n_rep,
                0.0,
                BLOCK_LEN,
                seed.wrapping_add(u as u64),
            )));
            continue;
        }
        let sol = rate_for_budget(
            &class_pmf,
            &matrices,
            n_rep,
            None,
            &class_levels,
            &ids,
            opts,
            None,
        )?;

        // The design distortion blends the class's constraints by their
        // multipliers; with all constraints slack any member works.
        let mut blend = vec![0.0; model.source.n_symbols() * n_rep];
        let total_s: f64 = sol.multipliers.iter().sum();
        for (m, &s) in matrices.iter().zip(&sol.multipliers) {
            let w = if total_s > 0.0 { s / total_s } else { 1.0 / matrices.len() as f64 };
            for (b, &v) in blend.iter_mut().zip(m) {
                *b += w * v;
            }
        }
        per_class.push(Box::new(chunked_vlc(
            &class_pmf,
            &blend,
            n_rep,
            sol.rate,
            BLOCK_LEN,
            seed.wrapping_add(u as u64),
        )));
    }

    let label_code = lossless_label_code(&model.classifier.label_marginal(&model.source));
    let order: Vec<usize> = (0..model.classifier.n_labels()).collect();
    let label_based = assemble_label_based(per_class, order);
    Ok(assemble_ctc(label_code, label_based, &model.classifier))
}

fn uniformish(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

fn sample_symbols(model: &ValidatedSource, n: usize, seed: u64) -> Vec<usize> {
    use rand::distributions::WeightedIndex;
    use rand::prelude::*;
    let joint = model.source.joint_row_major();
    let sampler = WeightedIndex::new(joint.iter().map(|&p| p.max(0.0))).unwrap();
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed ^ 0x5eed_5eed_5eed_5eed);
    (0..n)
        .map(|_| sampler.sample(&mut rng) % model.source.n_symbols())
        .collect()
}

pub fn build_example(args: BuildArgs) -> Result<()> {
    let doc = preset_document(&args.example)?;
    validate_document(&doc)?;
    let path = args.out.join(format!("{}.json", args.example));
    write(&path, &serde_json::to_string_pretty(&doc)?)?;
    println!("wrote {}", path.display());
    Ok(())
}
