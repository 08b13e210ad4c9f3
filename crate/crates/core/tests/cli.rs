mod common;

use std::fs;
use std::path::Path;

use common::*;

const SMALL: &str = r#""input_size": [16, 16], "conv_channels": [2, 3], "fc_sizes": [6],
    "epochs_pretrain": 2, "epochs_finetune": 3, "batch_size": 4,
    "pretrain_manifest": "unlabeled.csv", "labeled_manifest": "labeled.csv",
    "checkpoint_dir": "ckpt", "report_dir": "reports""#;

fn setup(dir: &Path, extra: &str) -> String {
    let unlabeled: Vec<_> = smooth_images(6, 16, 1).into_iter().map(|t| (t, 0)).collect();
    write_dataset(dir, "unlabeled.csv", &unlabeled);
    write_dataset(dir, "labeled.csv", &striped_images(9, 16, 2));
    let mut cfg: serde_json::Map<String, serde_json::Value> =
        serde_json::from_str(&format!("{{{SMALL}}}")).unwrap();
    let extra: serde_json::Map<String, serde_json::Value> =
        serde_json::from_str(&format!("{{{extra}}}")).unwrap();
    cfg.extend(extra);
    write_config(dir, &serde_json::Value::Object(cfg).to_string())
        .to_str()
        .unwrap()
        .to_string()
}

#[test]
fn missing_config_exits_2_naming_path() {
    let o = caenet(&["pretrain", "--config", "/no/such/run.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/no/such/run.json"), "{}", stderr(&o));
}

#[test]
fn malformed_or_unknown_config_fields_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "{ not json");
    assert_eq!(caenet(&["pretrain", "--config", bad.to_str().unwrap()]).status.code(), Some(2));
    let unknown = write_config(dir.path(), r#"{"learning_rate": 0.1}"#);
    assert_eq!(caenet(&["pretrain", "--config", unknown.to_str().unwrap()]).status.code(), Some(2));
    let range = write_config(dir.path(), r#"{"corruption_fraction": 1.5}"#);
    assert_eq!(caenet(&["pretrain", "--config", range.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn dry_run_echoes_defaults_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"seed": 5, "checkpoint_dir": "out"}"#);
    let o = caenet(&["pretrain", "--config", cfg.to_str().unwrap(), "--dry-run"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let echoed: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(echoed["seed"], 5);
    assert_eq!(echoed["lr0"], 0.01);
    assert_eq!(echoed["decay"], 0.98);
    assert_eq!(echoed["corruption_fraction"], 0.2);
    assert_eq!(echoed["input_size"], serde_json::json!([64, 64]));
    assert!(!dir.path().join("out").exists());
    assert!(!dir.path().join("reports").exists());

    let o = caenet(&["pretrain", "--config", cfg.to_str().unwrap(), "--dry-run", "--seed", "9"]);
    let echoed: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(echoed["seed"], 9);
}

#[test]
fn pretrain_writes_checkpoint_and_log() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), "");
    let o = caenet(&["pretrain", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(dir.path().join("ckpt/cae.ckpt").is_file());
    let log = fs::read_to_string(dir.path().join("reports/pretrain_loss.csv")).unwrap();
    let lines: Vec<_> = log.lines().collect();
    assert_eq!(lines[0], "epoch,learning_rate,mean_loss");
    assert_eq!(lines.len(), 1 + 2);
    assert!(lines[1].starts_with("0,0.01,"));
}

#[test]
fn runs_are_byte_identical_across_thread_counts() {
    let run = |threads: &str| {
        let dir = tempfile::tempdir().unwrap();
        let cfg = setup(dir.path(), "");
        let o = caenet(&["pretrain", "--config", &cfg, "--threads", threads]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        (
            fs::read(dir.path().join("ckpt/cae.ckpt")).unwrap(),
            fs::read(dir.path().join("reports/pretrain_loss.csv")).unwrap(),
        )
    };
    let a = run("1");
    assert_eq!(a, run("1"));
    assert_eq!(a, run("4"));
}

#[test]
fn unreadable_image_is_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), "");
    fs::write(dir.path().join("images/unlabeled.csv-002.ppm"), b"P6 garbage").unwrap();
    let o = caenet(&["pretrain", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("unlabeled.csv-002.ppm"));

    fs::remove_file(dir.path().join("unlabeled.csv")).unwrap();
    assert_eq!(caenet(&["pretrain", "--config", &cfg]).status.code(), Some(3));
}

#[test]
fn class_count_mismatch_is_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), r#""n_classes": 4, "use_pretrained": false"#);
    assert_eq!(caenet(&["finetune", "--config", &cfg]).status.code(), Some(3));
}

#[test]
fn finetune_uses_pretrained_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), "");
    let o = caenet(&["finetune", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(4), "missing cae.ckpt must be a checkpoint error");

    assert_eq!(caenet(&["pretrain", "--config", &cfg]).status.code(), Some(0));
    let o = caenet(&["finetune", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(dir.path().join("ckpt/cnn.ckpt").is_file());
    let log = fs::read_to_string(dir.path().join("reports/finetune_log.csv")).unwrap();
    assert_eq!(log.lines().next(), Some("epoch,learning_rate,mean_loss,train_accuracy"));
    assert_eq!(log.lines().count(), 1 + 3);
}

#[test]
fn crossval_rejects_single_fold() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), r#""folds": 1, "use_pretrained": false"#);
    let o = caenet(&["crossval", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn crossval_reports_every_fold_deterministically() {
    let run = || {
        let dir = tempfile::tempdir().unwrap();
        let cfg = setup(dir.path(), r#""folds": 3, "use_pretrained": false"#);
        let o = caenet(&["crossval", "--config", &cfg]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        for i in 0..3 {
            assert!(dir.path().join(format!("ckpt/cnn_fold{i}.ckpt")).is_file());
        }
        fs::read_to_string(dir.path().join("reports/crossval_report.csv")).unwrap()
    };
    let report = run();
    let lines: Vec<_> = report.lines().collect();
    assert_eq!(lines.len(), 1 + 3 + 2);
    assert_eq!(lines[0], "fold,accuracy");
    assert!(lines[4].starts_with("mean,"));
    assert!(lines[5].starts_with("sd,"));
    assert_eq!(report, run());
}

fn parse_matrix(out: &str) -> (u64, u64) {
    let mut trace = 0;
    let mut total = 0;
    for (i, line) in out.lines().skip_while(|l| !l.starts_with("true\\pred")).skip(1).enumerate() {
        if line.starts_with("accuracy") {
            break;
        }
        let counts: Vec<u64> = line.split('\t').skip(1).map(|c| c.parse().unwrap()).collect();
        trace += counts[i];
        total += counts.iter().sum::<u64>();
    }
    (trace, total)
}

#[test]
fn evaluate_prints_matrix_consistent_with_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), r#""use_pretrained": false, "epochs_finetune": 40, "lr0": 0.05"#);
    assert_eq!(caenet(&["finetune", "--config", &cfg]).status.code(), Some(0));
    let log = fs::read_to_string(dir.path().join("reports/finetune_log.csv")).unwrap();
    let final_acc: f64 = log.lines().last().unwrap().rsplit(',').next().unwrap().parse().unwrap();

    let o = caenet(&["evaluate", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    let (trace, total) = parse_matrix(&out);
    assert_eq!(total, 9);
    let printed = out.lines().find(|l| l.starts_with("accuracy: ")).unwrap();
    assert_eq!(printed, format!("accuracy: {:.4}", trace as f64 / total as f64));
    // the training images are re-read from the same files, so the
    // end-of-epoch training accuracy must be reproduced
    assert_eq!(printed, format!("accuracy: {final_acc:.4}"));
}

#[test]
fn evaluate_perfect_model_prints_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), r#""use_pretrained": false, "epochs_finetune": 300, "lr0": 0.05"#);
    assert_eq!(caenet(&["finetune", "--config", &cfg]).status.code(), Some(0));
    let o = caenet(&["evaluate", "--config", &cfg]);
    assert!(stdout(&o).contains("accuracy: 1.0000"), "{}", stdout(&o));
}

#[test]
fn evaluate_corrupt_checkpoint_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), "");
    let ck = dir.path().join("broken.ckpt");
    fs::write(&ck, b"DPNT\x01\x00garbage").unwrap();
    let o = caenet(&["evaluate", "--config", &cfg, "--checkpoint", ck.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    let missing = caenet(&["evaluate", "--config", &cfg]);
    assert_eq!(missing.status.code(), Some(4));
}

#[test]
fn evaluate_rejects_autoencoder_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), "");
    assert_eq!(caenet(&["pretrain", "--config", &cfg]).status.code(), Some(0));
    let cae = dir.path().join("ckpt/cae.ckpt");
    let o = caenet(&["evaluate", "--config", &cfg, "--checkpoint", cae.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn gradcheck_default_passes_and_lists_every_component() {
    let o = caenet(&["gradcheck"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let out = stdout(&o);
    for c in [
        "activation.relu",
        "activation.sigmoid",
        "activation.identity",
        "conv2d",
        "deconv2d.tied",
        "deconv2d.learned",
        "maxpool2x2",
        "unpool2x2",
        "dense",
        "softmax_cross_entropy",
        "cae.tied",
        "cae.learned",
        "cnn",
    ] {
        assert!(out.lines().any(|l| l.starts_with(c) && l.ends_with("ok")), "{c} missing:\n{out}");
    }
}

#[test]
fn gradcheck_perturbed_exits_1() {
    let o = caenet(&["gradcheck", "--perturb-analytic"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL"));
}

#[test]
fn unknown_subcommand_exits_2() {
    assert_eq!(caenet(&["train"]).status.code(), Some(2));
    assert_eq!(caenet(&["--help"]).status.code(), Some(0));
}
