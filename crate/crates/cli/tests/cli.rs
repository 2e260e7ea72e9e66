use std::fs;
use std::path::Path;

use sdai_cli::main_with;
use serde_json::Value;

fn run(args: &[&str]) -> i32 {
    let mut full = vec!["sdai"];
    full.extend_from_slice(args);
    main_with(full)
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn generate(dir: &Path, seed: &str) {
    let code = run(&[
        "generate", "--n-samples", "40", "--n-features", "6", "--frequencies", "1,2", "--seed", seed, "--out-dir",
        p(dir),
    ]);
    assert_eq!(code, 0);
}

#[test]
fn generate_is_deterministic_and_echoes_config() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    generate(&a, "5");
    generate(&b, "5");
    generate(&c, "6");
    let read = |d: &Path| fs::read(d.join("data.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));

    let echoed: Value = serde_json::from_str(&fs::read_to_string(a.join("config.json")).unwrap()).unwrap();
    assert_eq!(echoed["seed"], 5);
    assert_eq!(echoed["n_features"], 6);
    assert_eq!(echoed["frequencies"], serde_json::json!([1, 2]));
}

#[test]
fn echoed_config_replays_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    generate(&a, "11");
    let b = tmp.path().join("b");
    assert_eq!(run(&["generate", "--config", p(&a.join("config.json")), "--out-dir", p(&b)]), 0);
    assert_eq!(fs::read(a.join("data.csv")).unwrap(), fs::read(b.join("data.csv")).unwrap());
}

#[test]
fn flags_override_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");
    fs::write(&cfg, r#"{"n_samples": 12, "n_features": 4, "seed": 1}"#).unwrap();
    let out = tmp.path().join("out");
    assert_eq!(run(&["generate", "--config", p(&cfg), "--n-features", "3", "--out-dir", p(&out)]), 0);
    let echoed: Value = serde_json::from_str(&fs::read_to_string(out.join("config.json")).unwrap()).unwrap();
    assert_eq!(echoed["n_samples"], 12);
    assert_eq!(echoed["n_features"], 3);
    let text = fs::read_to_string(out.join("data.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "s1,s2,s3");
    assert_eq!(text.lines().count(), 13);
}

#[test]
fn bad_configuration_exits_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");
    fs::write(&cfg, r#"{"n_sample": 12}"#).unwrap();
    let out = tmp.path().join("out");
    assert_ne!(run(&["generate", "--config", p(&cfg), "--out-dir", p(&out)]), 0);
    assert_ne!(run(&["generate", "--kind", "spiral", "--out-dir", p(&out)]), 0);
    assert_ne!(run(&["train", "--out-dir", p(&out)]), 0);
    assert_ne!(run(&["generate", "--jobs", "0", "--out-dir", p(&out)]), 0);
    assert_ne!(run(&["frobnicate"]), 0);
}

#[test]
fn corrupt_train_impute_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let gen = tmp.path().join("gen");
    generate(&gen, "2");
    let cor = tmp.path().join("cor");
    let code = run(&[
        "corrupt", "--input", p(&gen.join("data.csv")), "--schema", p(&gen.join("schema.json")), "--fraction",
        "0.25", "--seed", "4", "--out-dir", p(&cor),
    ]);
    assert_eq!(code, 0);
    let corrupted = fs::read_to_string(cor.join("corrupted.csv")).unwrap();
    let mask = fs::read_to_string(cor.join("eval_mask.csv")).unwrap();
    let removed = mask.matches('1').count();
    assert_eq!(removed, 60);
    let missing = corrupted.lines().skip(1).flat_map(|l| l.split(',')).filter(|c| c.is_empty() || *c == "NA").count();
    assert_eq!(missing, removed);

    let tr = tmp.path().join("tr");
    let code = run(&[
        "train", "--input", p(&cor.join("corrupted.csv")), "--schema", p(&cor.join("schema.json")),
        "--encoder-sizes", "5,3", "--dropout-probs", "0,0", "--pretrain-epochs", "2", "--finetune-epochs", "4",
        "--seed", "9", "--jobs", "1", "--out-dir", p(&tr),
    ]);
    assert_eq!(code, 0);
    let losses = fs::read_to_string(tr.join("loss_history.csv")).unwrap();
    assert!(losses.starts_with("epoch,loss\n"));
    assert!(tr.join("model.json").exists() && tr.join("config.json").exists());

    for (method, dir) in [("sdai", "imp_sdai"), ("mean", "imp_mean"), ("knn", "imp_knn")] {
        let out = tmp.path().join(dir);
        let code = run(&[
            "impute", "--input", p(&cor.join("corrupted.csv")), "--schema", p(&cor.join("schema.json")), "--method",
            method, "--model", p(&tr.join("model.json")), "--k", "3", "--probabilities", "--out-dir", p(&out),
        ]);
        assert_eq!(code, 0, "{method}");
        let imputed = fs::read_to_string(out.join("imputed.csv")).unwrap();
        assert_eq!(imputed.lines().count(), 41);
        assert!(!imputed.lines().skip(1).any(|l| l.split(',').any(|c| c.is_empty() || c == "NA")));
        let probs = fs::read_to_string(out.join("probabilities.csv")).unwrap();
        assert_eq!(probs.lines().next().unwrap(), "s1,s2,s3,s4,s5,s6");
    }
}

#[test]
fn zero_fraction_corruption_is_a_no_op() {
    let tmp = tempfile::tempdir().unwrap();
    let gen = tmp.path().join("gen");
    generate(&gen, "2");
    let cor = tmp.path().join("cor");
    let code = run(&[
        "corrupt", "--input", p(&gen.join("data.csv")), "--schema", p(&gen.join("schema.json")), "--fraction", "0",
        "--out-dir", p(&cor),
    ]);
    assert_eq!(code, 0);
    assert_eq!(fs::read(gen.join("data.csv")).unwrap(), fs::read(cor.join("corrupted.csv")).unwrap());
    assert!(!fs::read_to_string(cor.join("eval_mask.csv")).unwrap().contains('1'));
}

#[test]
fn model_refuses_a_different_schema() {
    let tmp = tempfile::tempdir().unwrap();
    let gen = tmp.path().join("gen");
    generate(&gen, "2");
    let tr = tmp.path().join("tr");
    let code = run(&[
        "train", "--input", p(&gen.join("data.csv")), "--schema", p(&gen.join("schema.json")), "--encoder-sizes",
        "4,2", "--dropout-probs", "0,0", "--finetune-epochs", "2", "--out-dir", p(&tr),
    ]);
    assert_eq!(code, 0);
    let other = tmp.path().join("other");
    let code = run(&[
        "generate", "--n-samples", "10", "--n-features", "5", "--out-dir", p(&other),
    ]);
    assert_eq!(code, 0);
    let out = tmp.path().join("imp");
    let code = run(&[
        "impute", "--input", p(&other.join("data.csv")), "--schema", p(&other.join("schema.json")), "--model",
        p(&tr.join("model.json")), "--out-dir", p(&out),
    ]);
    assert_eq!(code, 1);
}

#[test]
fn image_corruption_writes_a_mask_picture() {
    let tmp = tempfile::tempdir().unwrap();
    let gen = tmp.path().join("gen");
    let code = run(&[
        "generate", "--kind", "blobs", "--n-samples", "4", "--height", "8", "--width", "8", "--out-dir", p(&gen),
    ]);
    assert_eq!(code, 0);
    let cor = tmp.path().join("cor");
    let code = run(&[
        "corrupt", "--input", p(&gen.join("data.csv")), "--schema", p(&gen.join("schema.json")), "--scheme", "lines",
        "--fraction", "0.5", "--image-shape", "8,8", "--out-dir", p(&cor),
    ]);
    assert_eq!(code, 0);
    let pgm = fs::read(cor.join("mask.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n8 8\n255\n"));
    assert_eq!(pgm.len(), 11 + 64);

    let missing_shape = tmp.path().join("bad");
    let code = run(&[
        "corrupt", "--input", p(&gen.join("data.csv")), "--schema", p(&gen.join("schema.json")), "--scheme", "lines",
        "--out-dir", p(&missing_shape),
    ]);
    assert_eq!(code, 2);
}

#[test]
fn search_and_benchmark_write_their_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let gen = tmp.path().join("gen");
    generate(&gen, "3");
    let cfg = tmp.path().join("space.json");
    fs::write(
        &cfg,
        r#"{"space": {"depths": [1], "hidden_widths": [4], "bottleneck_widths": [2], "pretrain_epochs": [1],
            "finetune_epochs": [2], "trials": 2}, "inner_folds": 2}"#,
    )
    .unwrap();
    let out = tmp.path().join("search");
    let code = run(&[
        "search", "--config", p(&cfg), "--input", p(&gen.join("data.csv")), "--schema", p(&gen.join("schema.json")),
        "--out-dir", p(&out),
    ]);
    assert_eq!(code, 0);
    let trials: Value = serde_json::from_str(&fs::read_to_string(out.join("trials.json")).unwrap()).unwrap();
    assert_eq!(trials.as_array().unwrap().len(), 2);
    let best: Value = serde_json::from_str(&fs::read_to_string(out.join("best_config.json")).unwrap()).unwrap();
    assert_eq!(best["encoder_sizes"], serde_json::json!([2]));

    let bench = tmp.path().join("bench");
    let code = run(&[
        "benchmark", "--input", p(&gen.join("data.csv")), "--schema", p(&gen.join("schema.json")), "--methods",
        "knn,mean", "--fractions", "0.2", "--outer-folds", "2", "--out-dir", p(&bench),
    ]);
    assert_eq!(code, 0);
    let report = fs::read_to_string(bench.join("report.csv")).unwrap();
    assert!(report.lines().next().unwrap().starts_with("method,fraction,fold,metric,value"));
    assert!(report.contains("knn") && report.contains("mean") && !report.contains("sdai"));
    assert!(bench.join("report.json").exists() && bench.join("config.json").exists());
}
