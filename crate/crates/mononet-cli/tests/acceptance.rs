//! CLI contract tests: the determinism criterion (every subcommand rewrites
//! byte-identical artifacts under a fixed seed) plus the exit-code and
//! artifact-shape guarantees the subcommands promise.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mononet::layer::MonotonicityIndicator;
use mononet::network::{build, save_model, FinalActivation, NetworkSpec};

/// `println!` that writes straight to the process stdout, so the per-criterion
/// lines survive libtest's output capture in a plain `cargo test` run.
macro_rules! report {
    ($($arg:tt)*) => {{
        use std::io::Write;
        let mut out = std::io::stdout().lock();
        let _ = writeln!(out, $($arg)*);
    }};
}


fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mononet"))
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin()
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn mononet")
}

fn assert_ok(out: &Output, context: &str) {
    assert!(
        out.status.success(),
        "{context} failed: stdout={} stderr={}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Every regular file under `dir`, keyed by relative path.
fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(current) = stack.pop() {
        for entry in fs::read_dir(&current).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path
                    .strip_prefix(dir)
                    .unwrap()
                    .to_string_lossy()
                    .into_owned();
                files.insert(rel, fs::read(&path).unwrap());
            }
        }
    }
    files
}

fn assert_identical_reruns(args: &[&str], context: &str) {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    assert_ok(&run_in(dir_a.path(), args), context);
    assert_ok(&run_in(dir_b.path(), args), context);
    let (a, b) = (snapshot(dir_a.path()), snapshot(dir_b.path()));
    assert_eq!(
        a.keys().collect::<Vec<_>>(),
        b.keys().collect::<Vec<_>>(),
        "{context}: emitted file sets differ"
    );
    for (name, bytes) in &a {
        assert_eq!(
            bytes, &b[name],
            "{context}: {name} differs between identical invocations"
        );
    }
    assert!(!a.is_empty(), "{context}: no artifacts emitted");
}

#[test]
fn a10_reruns_are_byte_identical() {
    assert_identical_reruns(
        &[
            "train",
            "--dataset",
            "synthetic",
            "--width",
            "8",
            "--epochs",
            "80",
            "--runs",
            "3",
            "--best",
            "2",
            "--seed",
            "5",
        ],
        "train multi-run",
    );
    assert_identical_reruns(&["fit-demo", "--epochs", "60", "--seed", "1"], "fit-demo");
    assert_identical_reruns(
        &[
            "synth", "--points", "50", "--epochs", "60", "--seed", "2", "--pairs", "2000",
        ],
        "synth",
    );
    assert_identical_reruns(
        &[
            "grid",
            "--dataset",
            "synthetic",
            "--widths",
            "4,8",
            "--depths",
            "1",
            "--kinds",
            "elu,relu",
            "--epochs",
            "40",
            "--seed",
            "3",
        ],
        "grid",
    );
    report!(
        "[10] PASS determinism: train/fit-demo/synth/grid reruns emit byte-identical artifacts"
    );
}

#[test]
fn train_then_eval_verify_and_export_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &[
            "train",
            "--dataset",
            "synthetic",
            "--width",
            "16",
            "--epochs",
            "300",
            "--seed",
            "7",
        ],
    );
    assert_ok(&out, "train");
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(
        stdout.starts_with("mse "),
        "unexpected metric line: {stdout}"
    );
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["seed"], 7);
    assert!(report["test_metric"].is_f64());

    let verify = run_in(
        dir.path(),
        &[
            "verify",
            "--model",
            "model.json",
            "--descriptor",
            "descriptor.json",
            "--pairs",
            "4000",
            "--seed",
            "1",
        ],
    );
    assert_ok(&verify, "verify constrained model");
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("verify-report.json")).unwrap())
            .unwrap();
    assert_eq!(report["total_violations"], 0);

    let curve = run_in(
        dir.path(),
        &[
            "export-curve",
            "--model",
            "model.json",
            "--feature",
            "0",
            "--lo",
            "-2",
            "--hi",
            "2",
            "--points",
            "21",
            "--out",
            "curve.csv",
        ],
    );
    assert_ok(&curve, "export-curve");
    let body = fs::read_to_string(dir.path().join("curve.csv")).unwrap();
    let lines: Vec<&str> = body.lines().collect();
    assert_eq!(lines[0], "x,y");
    assert_eq!(lines.len(), 22);
    let first: f64 = lines[1].split(',').nth(1).unwrap().parse().unwrap();
    let last: f64 = lines[21].split(',').nth(1).unwrap().parse().unwrap();
    assert!(last >= first, "declared-increasing curve decreased overall");
}

#[test]
fn fit_demo_emits_panel_csvs() {
    let dir = tempfile::tempdir().unwrap();
    assert_ok(
        &run_in(dir.path(), &["fit-demo", "--epochs", "40", "--seed", "4"]),
        "fit-demo",
    );
    for variant in ["unconstrained", "convex", "three-activation"] {
        for width in [2, 32] {
            let body =
                fs::read_to_string(dir.path().join(format!("fit-demo-{variant}-w{width}.csv")))
                    .unwrap();
            let lines: Vec<&str> = body.lines().collect();
            assert_eq!(lines[0], "x,y_true,y_pred");
            assert_eq!(lines.len(), 202);
            assert!(lines[1].starts_with("-1,"));
        }
    }
    let summary: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("fit-demo-summary.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(summary.as_array().unwrap().len(), 6);
}

#[test]
fn csv_ingestion_through_cli() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from(
        "mpg,cylinders,displacement,horsepower,weight,acceleration,model_year,origin\n",
    );
    for i in 0..60 {
        let wt = 2000.0 + 25.0 * i as f64;
        let hp = 60.0 + i as f64;
        let mpg = 46.0 - 0.008 * wt - 0.05 * hp;
        let hp_cell = if i == 30 {
            "?".to_string()
        } else {
            hp.to_string()
        };
        csv.push_str(&format!(
            "{mpg},{cyl},200,{hp_cell},{wt},15,{yr},1\n",
            cyl = 4 + (i % 2) * 2,
            yr = 70 + i % 12,
        ));
    }
    fs::write(dir.path().join("mpg.csv"), csv).unwrap();
    let out = run_in(
        dir.path(),
        &[
            "train",
            "--dataset",
            "auto-mpg",
            "--csv",
            "mpg.csv",
            "--arch",
            "type1",
            "--width",
            "8",
            "--kind",
            "elu",
            "--epochs",
            "200",
            "--seed",
            "7",
        ],
    );
    assert_ok(&out, "train on csv");
    let eval = run_in(
        dir.path(),
        &[
            "eval",
            "--model",
            "model.json",
            "--descriptor",
            "descriptor.json",
            "--csv",
            "mpg.csv",
        ],
    );
    assert_ok(&eval, "eval on csv");
    assert!(String::from_utf8(eval.stdout).unwrap().starts_with("mse "));
}

#[test]
fn exit_codes_follow_the_contract() {
    let dir = tempfile::tempdir().unwrap();

    // Usage failure: unknown flag.
    let out = run_in(dir.path(), &["train", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(1));

    // Data failure: the message names the missing path.
    let out = run_in(
        dir.path(),
        &["train", "--dataset", "auto-mpg", "--csv", "missing.csv"],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.csv"));

    // Malformed model file.
    fs::write(dir.path().join("broken.json"), "{not json").unwrap();
    let out = run_in(
        dir.path(),
        &["verify", "--model", "broken.json", "--indicator", "1"],
    );
    assert_eq!(out.status.code(), Some(1));

    // Numerical failure: an absurd learning rate diverges.
    let out = run_in(
        dir.path(),
        &[
            "train",
            "--dataset",
            "synthetic",
            "--optimizer",
            "sgd",
            "--lr",
            "1e18",
            "--epochs",
            "30",
            "--seed",
            "0",
        ],
    );
    assert_eq!(
        out.status.code(),
        Some(2),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );

    // Help is a success.
    let out = run_in(dir.path(), &["--help"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn verify_flags_violations_with_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    // A free (unconstrained) single-layer model with a negative slope; the
    // audit claims the feature is increasing, so violations are certain.
    let spec = NetworkSpec::type1(
        MonotonicityIndicator::zeros(1),
        &[],
        mononet::activation::ActivationKind::elu(),
        FinalActivation::Linear,
        1,
    );
    let mut net = build(&spec, 0).unwrap();
    net.set_params(&[-1.0, 0.0]).unwrap();
    let model_path = dir.path().join("model.json");
    save_model(&net, &model_path).unwrap();

    let out = run_in(
        dir.path(),
        &[
            "verify",
            "--model",
            "model.json",
            "--indicator",
            "1",
            "--pairs",
            "500",
            "--seed",
            "3",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("verify-report.json")).unwrap())
            .unwrap();
    assert_eq!(report["total_violations"], 500);
}

#[test]
fn seed_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .current_dir(dir.path())
        .env("MONONET_SEED", "41")
        .args([
            "train",
            "--dataset",
            "synthetic",
            "--width",
            "4",
            "--epochs",
            "10",
        ])
        .output()
        .unwrap();
    assert_ok(&out, "train with env seed");
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["seed"], 41);

    // An explicit flag wins over the environment.
    let out = bin()
        .current_dir(dir.path())
        .env("MONONET_SEED", "41")
        .args([
            "train",
            "--dataset",
            "synthetic",
            "--width",
            "4",
            "--epochs",
            "10",
            "--seed",
            "6",
        ])
        .output()
        .unwrap();
    assert_ok(&out, "train with flag seed");
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["seed"], 6);
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("config.json"),
        "{\"width\": 4, \"epochs\": 10, \"seed\": 12, \"lr\": 0.005}\n",
    )
    .unwrap();
    let out = run_in(
        dir.path(),
        &[
            "train",
            "--dataset",
            "synthetic",
            "--config",
            "config.json",
            "--epochs",
            "20",
        ],
    );
    assert_ok(&out, "train with config file");
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["seed"], 12);
    assert_eq!(report["epochs"], 20);

    // Unknown keys are a usage error, not silently ignored.
    fs::write(dir.path().join("bad.json"), "{\"learning_rate\": 0.01}\n").unwrap();
    let out = run_in(
        dir.path(),
        &["train", "--dataset", "synthetic", "--config", "bad.json"],
    );
    assert_eq!(out.status.code(), Some(1));
}
