//! Implementations of the subcommands. Every artifact writer is
//! deterministic: JSON is pretty-printed with a trailing newline, CSV
//! floats use the shortest exact decimal form.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use mononet::activation::{ActivationKind, ActivationSelector};
use mononet::data::{
    apply_normalization, builtin_descriptor, generate_synthetic, load_csv, normalize, split_80_20,
    synthetic_truth, DatasetDescriptor, FeatureSpec, TabularDataset, TargetSpec, Task,
};
use mononet::error::Error;
use mononet::layer::MonotonicityIndicator;
use mononet::network::{
    load_model, save_model, Architecture, FinalActivation, LayerSpec, NetworkSpec,
};
use mononet::train::{
    evaluate, grid_search, multi_run, spec_for_cell, train_fresh, LossKind, SearchSpace,
    TrainConfig,
};
use mononet::verify::{check_pairwise_monotonicity, total_violations, SamplingBox};

use crate::{
    resolve_seed, EvalArgs, ExportCurveArgs, FitDemoArgs, GridArgs, SynthArgs, TrainArgs,
    VerifyArgs,
};

type Result<T> = std::result::Result<T, Error>;

/// Keys accepted in a `--config` JSON file; each mirrors a long flag and is
/// overridden by the flag when both are present.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    arch: Option<String>,
    width: Option<usize>,
    depth: Option<usize>,
    kind: Option<String>,
    selector: Option<String>,
    epochs: Option<usize>,
    lr: Option<f64>,
    batch_size: Option<usize>,
    optimizer: Option<String>,
    loss: Option<String>,
    seed: Option<u64>,
    runs: Option<usize>,
    best: Option<usize>,
    points: Option<usize>,
    noise: Option<f64>,
}

fn parse_arch(name: &str) -> Result<Architecture> {
    match name {
        "type1" => Ok(Architecture::Type1),
        "type2" => Ok(Architecture::Type2),
        other => Err(Error::InvalidConfig(format!(
            "unknown architecture '{other}' (expected type1 or type2)"
        ))),
    }
}

fn parse_loss(name: &str) -> Result<LossKind> {
    match name {
        "mse" => Ok(LossKind::Mse),
        "cross-entropy" | "cross_entropy" => Ok(LossKind::CrossEntropy),
        other => Err(Error::InvalidConfig(format!(
            "unknown loss '{other}' (expected mse or cross-entropy)"
        ))),
    }
}

fn parse_selector(text: &str) -> Result<ActivationSelector> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 3 {
        return Err(Error::InvalidConfig(format!(
            "selector must be 'convex,concave,saturated', got '{text}'"
        )));
    }
    let mut counts = [0usize; 3];
    for (slot, part) in counts.iter_mut().zip(&parts) {
        *slot = part.trim().parse().map_err(|_| {
            Error::InvalidConfig(format!("selector component '{part}' is not a count"))
        })?;
    }
    Ok(ActivationSelector::new(counts[0], counts[1], counts[2]))
}

fn parse_indicator(text: &str) -> Result<MonotonicityIndicator> {
    let entries = text
        .split(',')
        .map(|part| match part.trim() {
            "1" | "+1" => Ok(1),
            "0" => Ok(0),
            "-1" => Ok(-1),
            other => Err(Error::InvalidConfig(format!(
                "indicator entry '{other}' is not -1, 0, or 1"
            ))),
        })
        .collect::<Result<Vec<i8>>>()?;
    MonotonicityIndicator::new(entries)
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>> {
    text.split(',')
        .map(|part| {
            part.trim()
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("bad {what} entry '{part}'")))
        })
        .collect()
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut body = serde_json::to_string_pretty(value)?;
    body.push('\n');
    fs::write(path, body)?;
    Ok(())
}

fn read_descriptor(path: &Path) -> Result<DatasetDescriptor> {
    let body = fs::read_to_string(path)
        .map_err(|err| Error::InvalidConfig(format!("cannot read {}: {err}", path.display())))?;
    Ok(serde_json::from_str(&body)?)
}

/// Loads the named dataset: from the CSV when given (the path must exist),
/// otherwise by generating synthetic data.
fn load_table(
    dataset: &str,
    csv: Option<&Path>,
    points: usize,
    noise: f64,
    seed: u64,
) -> Result<TabularDataset> {
    let descriptor = builtin_descriptor(dataset)?;
    match csv {
        Some(path) => {
            if !path.exists() {
                return Err(Error::InvalidConfig(format!(
                    "csv file not found: {}",
                    path.display()
                )));
            }
            load_csv(path, &descriptor)
        }
        None if dataset == "synthetic" => generate_synthetic(points, noise, seed),
        None => Err(Error::InvalidConfig(format!(
            "--csv is required for dataset '{dataset}'"
        ))),
    }
}

struct ResolvedTrain {
    arch: Architecture,
    width: usize,
    depth: usize,
    kind: ActivationKind,
    selector: Option<ActivationSelector>,
    config: TrainConfig,
    runs: usize,
    best: usize,
    points: usize,
    noise: f64,
}

/// Merges flags over the config file over defaults into one concrete plan.
fn resolve_train(args: &TrainArgs, task: Task) -> Result<ResolvedTrain> {
    let file: FileConfig = match &args.config {
        Some(path) => {
            let body = fs::read_to_string(path).map_err(|err| {
                Error::InvalidConfig(format!("cannot read {}: {err}", path.display()))
            })?;
            serde_json::from_str(&body)?
        }
        None => FileConfig::default(),
    };
    let arch = parse_arch(
        args.arch
            .as_deref()
            .or(file.arch.as_deref())
            .unwrap_or("type1"),
    )?;
    let width = args.width.or(file.width).unwrap_or(32);
    let depth = args.depth.or(file.depth).unwrap_or(1);
    let kind = ActivationKind::from_name(
        args.kind
            .as_deref()
            .or(file.kind.as_deref())
            .unwrap_or("elu"),
    )?;
    let selector = args
        .selector
        .as_deref()
        .or(file.selector.as_deref())
        .map(parse_selector)
        .transpose()?;
    if let Some(s) = selector {
        if s.width() != width {
            return Err(Error::InvalidConfig(format!(
                "selector sums to {}, width is {width}",
                s.width()
            )));
        }
    }
    let loss = args
        .loss
        .as_deref()
        .or(file.loss.as_deref())
        .map(parse_loss)
        .transpose()?
        .unwrap_or(LossKind::for_task(task));
    let seed = resolve_seed(args.seed.or(file.seed))?;
    let defaults = TrainConfig::default();
    let config = TrainConfig {
        loss,
        optimizer: args
            .optimizer
            .clone()
            .or(file.optimizer)
            .unwrap_or(defaults.optimizer),
        learning_rate: args.lr.or(file.lr).unwrap_or(defaults.learning_rate),
        batch_size: args
            .batch_size
            .or(file.batch_size)
            .unwrap_or(defaults.batch_size),
        epochs: args.epochs.or(file.epochs).unwrap_or(defaults.epochs),
        seed,
    };
    config.validate()?;
    let runs = args.runs.or(file.runs).unwrap_or(1);
    if runs == 0 {
        return Err(Error::InvalidConfig("--runs must be >= 1".into()));
    }
    let best = args.best.or(file.best).unwrap_or_else(|| runs.min(5));
    if best == 0 || best > runs {
        return Err(Error::InvalidConfig(format!(
            "--best must be between 1 and --runs ({runs})"
        )));
    }
    Ok(ResolvedTrain {
        arch,
        width,
        depth,
        kind,
        selector,
        config,
        runs,
        best,
        points: args.points.or(file.points).unwrap_or(100),
        noise: args.noise.or(file.noise).unwrap_or(0.2),
    })
}

/// Network spec for the resolved plan, with the optional uniform selector
/// override applied to every hidden layer and per-feature unit.
fn spec_for_plan(data: &TabularDataset, plan: &ResolvedTrain) -> NetworkSpec {
    let mut spec = spec_for_cell(data, plan.arch, plan.width, plan.depth, plan.kind);
    if let Some(selector) = plan.selector {
        for layer in &mut spec.hidden {
            layer.selector = Some(selector);
        }
        for unit in &mut spec.per_feature_units {
            unit.selector = Some(selector);
        }
    }
    spec
}

pub fn run_train(args: &TrainArgs) -> Result<u8> {
    let descriptor = builtin_descriptor(&args.dataset)?;
    let plan = resolve_train(args, descriptor.task)?;
    let raw = load_table(
        &args.dataset,
        args.csv.as_deref(),
        plan.points,
        plan.noise,
        plan.config.seed,
    )?;
    let (train_raw, test_raw) = split_80_20(&raw, plan.config.seed)?;
    let (train_data, stats) = normalize(&train_raw)?;
    let test_data = apply_normalization(&test_raw, &stats);
    let spec = spec_for_plan(&train_data, &plan);

    if plan.runs > 1 {
        let summary = multi_run(
            &spec,
            &train_data,
            &test_data,
            &plan.config,
            plan.runs,
            plan.best,
        )?;
        let lower = raw.descriptor.task == Task::Regression;
        let best_run = summary
            .runs
            .iter()
            .min_by(|a, b| {
                let (x, y) = (a.test_metric, b.test_metric);
                let ord = x.partial_cmp(&y).expect("finite metrics");
                if lower {
                    ord
                } else {
                    ord.reverse()
                }
            })
            .expect("at least one run");
        let rerun_config = TrainConfig {
            seed: best_run.seed,
            ..plan.config.clone()
        };
        let (net, _) = train_fresh(&spec, &train_data, &test_data, &rerun_config)?;
        save_model(&net, &args.model_out)?;
        write_json(&args.report_out, &summary)?;
        write_json(&args.descriptor_out, &train_data.descriptor)?;
        println!(
            "{} best-{}-of-{} mean {:.6} std {:.6}",
            summary.metric_name, summary.best_k, plan.runs, summary.best_mean, summary.best_std
        );
    } else {
        let (net, report) = train_fresh(&spec, &train_data, &test_data, &plan.config)?;
        save_model(&net, &args.model_out)?;
        write_json(&args.report_out, &report)?;
        write_json(&args.descriptor_out, &train_data.descriptor)?;
        println!("{} {:.6}", report.metric_name, report.test_metric);
    }
    Ok(0)
}

#[derive(Serialize)]
struct EvalReport {
    metric_name: String,
    value: f64,
    rows: usize,
}

pub fn run_eval(args: &EvalArgs) -> Result<u8> {
    let descriptor = read_descriptor(&args.descriptor)?;
    let stats = descriptor.normalization.clone().ok_or_else(|| {
        Error::InvalidConfig(
            "descriptor has no fitted normalization; use the one written by `train`".into(),
        )
    })?;
    if !args.csv.exists() {
        return Err(Error::InvalidConfig(format!(
            "csv file not found: {}",
            args.csv.display()
        )));
    }
    let raw = load_csv(&args.csv, &descriptor)?;
    let data = apply_normalization(&raw, &stats);
    let net = load_model(&args.model)?;
    let (metric_name, value) = evaluate(&net, &data)?;
    write_json(
        &args.report_out,
        &EvalReport {
            metric_name: metric_name.clone(),
            value,
            rows: data.len(),
        },
    )?;
    println!("{metric_name} {value:.6}");
    Ok(0)
}

#[derive(Serialize)]
struct VerifyReport {
    pairs: usize,
    seed: u64,
    total_violations: usize,
    features: Vec<mononet::verify::MonotonicityReport>,
}

pub fn run_verify(args: &VerifyArgs) -> Result<u8> {
    let net = load_model(&args.model)?;
    let descriptor = args
        .descriptor
        .as_deref()
        .map(read_descriptor)
        .transpose()?;

    let indicator = match (&args.indicator, &descriptor) {
        (Some(text), _) => parse_indicator(text)?,
        (None, Some(descriptor)) => descriptor.expanded_indicator(),
        (None, None) => {
            return Err(Error::InvalidConfig(
                "provide --descriptor or --indicator for the monotonicity claim".into(),
            ))
        }
    };

    let sampling_box = match (&args.csv, &descriptor) {
        (Some(path), Some(descriptor)) => {
            if !path.exists() {
                return Err(Error::InvalidConfig(format!(
                    "csv file not found: {}",
                    path.display()
                )));
            }
            let raw = load_csv(path, descriptor)?;
            let data = match &descriptor.normalization {
                Some(stats) => apply_normalization(&raw, stats),
                None => raw,
            };
            SamplingBox::from_data(&data)?
        }
        (Some(_), None) => {
            return Err(Error::InvalidConfig(
                "--csv needs --descriptor to interpret the columns".into(),
            ))
        }
        (None, _) => SamplingBox::symmetric(net.input_dim(), args.half_width)?,
    };

    let seed = resolve_seed(args.seed)?;
    let features = check_pairwise_monotonicity(&net, &indicator, &sampling_box, args.pairs, seed)?;
    let violations = total_violations(&features);
    write_json(
        &args.report_out,
        &VerifyReport {
            pairs: args.pairs,
            seed,
            total_violations: violations,
            features: features.clone(),
        },
    )?;
    for feature in &features {
        println!(
            "feature {} direction {:+}: {} violations in {} pairs (worst {:.3e})",
            feature.feature,
            feature.direction,
            feature.violations,
            feature.pairs_tested,
            feature.worst_violation
        );
    }
    if violations == 0 {
        println!("verified: no ordering violations");
        Ok(0)
    } else {
        println!("FAILED: {violations} ordering violations");
        Ok(1)
    }
}

fn cubic_dataset(n: usize) -> TabularDataset {
    let descriptor = DatasetDescriptor {
        name: "cubic".into(),
        task: Task::Regression,
        features: vec![FeatureSpec::monotone("x", 1)],
        target: TargetSpec::plain("y"),
        normalization: None,
    };
    let xs: Vec<f64> = (0..n)
        .map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64)
        .collect();
    TabularDataset {
        descriptor,
        features: xs.iter().map(|&x| vec![x]).collect(),
        targets: xs.iter().map(|&x| x.powi(3)).collect(),
        dropped_rows: 0,
        filtered_rows: 0,
    }
}

/// The three comparison variants used by fit-demo and synth.
fn variant_spec(
    name: &str,
    input_dim: usize,
    monotone: &[i8],
    width: usize,
    kind: ActivationKind,
) -> NetworkSpec {
    let (indicator, selector) = match name {
        "unconstrained" => (
            MonotonicityIndicator::zeros(input_dim),
            ActivationSelector::split_default(width),
        ),
        "convex" => (
            MonotonicityIndicator::new(monotone.to_vec()).expect("static indicator"),
            ActivationSelector::all_convex(width),
        ),
        "three-activation" => (
            MonotonicityIndicator::new(monotone.to_vec()).expect("static indicator"),
            ActivationSelector::split_default(width),
        ),
        other => unreachable!("unknown variant {other}"),
    };
    NetworkSpec {
        architecture: Architecture::Type1,
        indicator,
        hidden: vec![LayerSpec {
            width,
            selector: Some(selector),
            kind: None,
        }],
        kind,
        final_activation: FinalActivation::Linear,
        output_dim: 1,
        per_feature_units: Vec::new(),
        free_extractor: Vec::new(),
    }
}

const VARIANTS: [&str; 3] = ["unconstrained", "convex", "three-activation"];

#[derive(Serialize)]
struct CurveSummary {
    variant: String,
    width: usize,
    mse_full: f64,
    mse_left: f64,
    mse_right: f64,
}

pub fn run_fit_demo(args: &FitDemoArgs) -> Result<u8> {
    fs::create_dir_all(&args.out_dir)?;
    let seed = resolve_seed(args.seed)?;
    let kind = ActivationKind::from_name(&args.kind)?;
    let train_data = cubic_dataset(256);
    let config = TrainConfig {
        learning_rate: args.lr,
        epochs: args.epochs,
        batch_size: 32,
        seed,
        ..TrainConfig::default()
    };

    let mut summaries = Vec::new();
    for width in [2usize, 32] {
        for variant in VARIANTS {
            let spec = variant_spec(variant, 1, &[1], width, kind);
            let (net, _) = train_fresh(&spec, &train_data, &train_data, &config)?;

            let path = args
                .out_dir
                .join(format!("fit-demo-{variant}-w{width}.csv"));
            let mut body = String::from("x,y_true,y_pred\n");
            let (mut left, mut right, mut full) = (0.0, 0.0, 0.0);
            let (mut n_left, mut n_right) = (0usize, 0usize);
            for i in 0..201 {
                let x = -1.0 + 2.0 * i as f64 / 200.0;
                let y_true = x.powi(3);
                let y_pred = net.forward_pre_head(&[x])?[0];
                body.push_str(&format!("{x},{y_true},{y_pred}\n"));
                let err = (y_pred - y_true).powi(2);
                full += err / 201.0;
                if x <= 0.0 {
                    left += err;
                    n_left += 1;
                }
                if x >= 0.0 {
                    right += err;
                    n_right += 1;
                }
            }
            fs::write(&path, body)?;
            summaries.push(CurveSummary {
                variant: variant.into(),
                width,
                mse_full: full,
                mse_left: left / n_left as f64,
                mse_right: right / n_right as f64,
            });
            println!(
                "{variant} w{width}: mse {:.3e} (left {:.3e}, right {:.3e})",
                summaries.last().unwrap().mse_full,
                summaries.last().unwrap().mse_left,
                summaries.last().unwrap().mse_right
            );
        }
    }
    write_json(&args.out_dir.join("fit-demo-summary.json"), &summaries)?;
    Ok(0)
}

#[derive(Serialize)]
struct SynthVariantReport {
    variant: String,
    grid_mse: f64,
    violations: usize,
    pairs: usize,
}

#[derive(Serialize)]
struct SynthReport {
    points: usize,
    noise: f64,
    seed: u64,
    variants: Vec<SynthVariantReport>,
}

pub fn run_synth(args: &SynthArgs) -> Result<u8> {
    fs::create_dir_all(&args.out_dir)?;
    let seed = resolve_seed(args.seed)?;
    let kind = ActivationKind::from_name(&args.kind)?;
    let sample = generate_synthetic(args.points, args.noise, seed)?;
    let (train_data, stats) = normalize(&sample)?;
    let claim = MonotonicityIndicator::new(vec![1, 0]).expect("static indicator");
    let audit_box = SamplingBox::from_data(&train_data)?;
    let config = TrainConfig {
        learning_rate: args.lr,
        epochs: args.epochs,
        batch_size: 16,
        seed,
        ..TrainConfig::default()
    };

    let mut report = SynthReport {
        points: args.points,
        noise: args.noise,
        seed,
        variants: Vec::new(),
    };
    let steps = 50usize;
    for variant in VARIANTS {
        let spec = variant_spec(variant, 2, &[1, 0], args.width, kind);
        let (net, _) = train_fresh(&spec, &train_data, &train_data, &config)?;

        let mut body = String::from("x,y,f_true,f_pred\n");
        let mut grid_mse = 0.0;
        for ix in 0..steps {
            for iy in 0..steps {
                let x = -2.45 + 4.9 * ix as f64 / (steps - 1) as f64;
                let y = -2.45 + 4.9 * iy as f64 / (steps - 1) as f64;
                let f_true = synthetic_truth(x, y);
                let input = stats.normalize_features(&[x, y]);
                let f_pred = stats.denormalize_target(net.forward_pre_head(&input)?[0]);
                body.push_str(&format!("{x},{y},{f_true},{f_pred}\n"));
                grid_mse += (f_pred - f_true).powi(2) / (steps * steps) as f64;
            }
        }
        fs::write(args.out_dir.join(format!("synth-{variant}.csv")), body)?;

        let features = check_pairwise_monotonicity(&net, &claim, &audit_box, args.pairs, seed + 7)?;
        let violations = total_violations(&features);
        println!(
            "{variant}: grid mse {grid_mse:.4}, {violations} violations in {} pairs",
            args.pairs
        );
        report.variants.push(SynthVariantReport {
            variant: variant.into(),
            grid_mse,
            violations,
            pairs: args.pairs,
        });
    }
    write_json(&args.out_dir.join("synth-report.json"), &report)?;
    Ok(0)
}

pub fn run_grid(args: &GridArgs) -> Result<u8> {
    let descriptor = builtin_descriptor(&args.dataset)?;
    let seed = resolve_seed(args.seed)?;
    let raw = load_table(
        &args.dataset,
        args.csv.as_deref(),
        args.points.unwrap_or(100),
        args.noise.unwrap_or(0.2),
        seed,
    )?;
    let (train_raw, _) = split_80_20(&raw, seed)?;
    let (train_data, _) = normalize(&train_raw)?;
    let arch = parse_arch(args.arch.as_deref().unwrap_or("type1"))?;
    let space = SearchSpace {
        widths: parse_list(&args.widths, "width")?,
        depths: parse_list(&args.depths, "depth")?,
        kinds: parse_list::<String>(&args.kinds, "kind")?
            .iter()
            .map(|name| ActivationKind::from_name(name))
            .collect::<Result<Vec<_>>>()?,
    };
    let config = TrainConfig {
        loss: LossKind::for_task(descriptor.task),
        learning_rate: args.lr,
        epochs: args.epochs,
        seed,
        ..TrainConfig::default()
    };
    let report = grid_search(&train_data, arch, &space, &config)?;
    write_json(&args.report_out, &report)?;
    for cell in report.leaderboard.iter().take(5) {
        println!(
            "width {} depth {} kind {}: {} {:.6} ({} params)",
            cell.width,
            cell.depth,
            cell.kind,
            cell.metric_name,
            cell.validation_metric,
            cell.param_count
        );
    }
    Ok(0)
}

pub fn run_export_curve(args: &ExportCurveArgs) -> Result<u8> {
    let net = load_model(&args.model)?;
    if args.feature >= net.input_dim() {
        return Err(Error::InvalidConfig(format!(
            "feature {} out of range (model has {} inputs)",
            args.feature,
            net.input_dim()
        )));
    }
    if args.points < 2 {
        return Err(Error::InvalidConfig("--points must be >= 2".into()));
    }
    if args.lo.is_nan() || args.hi.is_nan() || args.lo >= args.hi {
        return Err(Error::InvalidConfig("--lo must be below --hi".into()));
    }
    let header = if net.output_dim() == 1 {
        "x,y".to_string()
    } else {
        let mut h = String::from("x");
        for j in 0..net.output_dim() {
            h.push_str(&format!(",y{j}"));
        }
        h
    };
    let mut body = header + "\n";
    let mut input = vec![args.at; net.input_dim()];
    for i in 0..args.points {
        let x = args.lo + (args.hi - args.lo) * i as f64 / (args.points - 1) as f64;
        input[args.feature] = x;
        let out = net.forward(&input)?;
        body.push_str(&x.to_string());
        for v in &out {
            body.push_str(&format!(",{v}"));
        }
        body.push('\n');
    }
    fs::write(&args.out, body)?;
    println!("wrote {} ({} points)", args.out.display(), args.points);
    Ok(0)
}
