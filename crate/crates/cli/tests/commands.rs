use std::fs;
use std::path::Path;
use std::process::Command;

use tslab_cli::commands::{cmd_edit, cmd_gradcheck, cmd_plotdata, cmd_train, snapshot_name};
use tslab_cli::config::{parse_config, ExperimentConfig};
use tslab_cli::error::CliError;
use tslab_cli::experiments::preset;
use tslab_core::io::{open, read_trajectory};
use tslab_core::metrics::accuracy_of;
use tslab_core::spectral_edit::{EditOrder, EditTarget};

fn small(dir: &Path) -> ExperimentConfig {
    let mut cfg = preset();
    cfg.n = 12;
    cfg.len = 10;
    cfg.epochs = 30;
    cfg.switch_epoch = 10;
    cfg.seeds = vec![3, 4];
    cfg.snapshot_epochs = vec![0, 10, 30];
    cfg.output_dir = dir.to_path_buf();
    cfg
}

fn rows(path: &Path) -> usize {
    read_trajectory(open(path).unwrap()).unwrap().len()
}

#[test]
fn train_writes_one_directory_per_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small(tmp.path());
    let dirs = cmd_train(&cfg, true).unwrap();
    assert_eq!(dirs.len(), 2);
    for dir in &dirs {
        assert_eq!(rows(&dir.join("trajectory.csv")), 31);
        for e in [0, 10, 30] {
            assert!(dir.join(snapshot_name(e)).is_file());
        }
        assert!(dir.join("dataset.txt").is_file());
        let summary = fs::read_to_string(dir.join("summary.txt")).unwrap();
        assert_eq!(parse_config(&summary).unwrap(), cfg);
        assert!(summary.contains("# switch.acc_p = "));
    }
}

#[test]
fn preset_gives_401_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = preset();
    cfg.seeds = vec![0];
    cfg.output_dir = tmp.path().to_path_buf();
    let dirs = cmd_train(&cfg, false).unwrap();
    assert_eq!(rows(&dirs[0].join("trajectory.csv")), 401);
}

#[test]
fn zero_epochs_gives_one_row() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small(tmp.path());
    cfg.epochs = 0;
    cfg.snapshot_epochs = vec![0];
    cfg.seeds = vec![1];
    let dirs = cmd_train(&cfg, false).unwrap();
    assert_eq!(rows(&dirs[0].join("trajectory.csv")), 1);
}

#[test]
fn train_is_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let da = cmd_train(&small(a.path()), false).unwrap();
    let db = cmd_train(&small(b.path()), false).unwrap();
    for (x, y) in da.iter().zip(&db) {
        for f in ["trajectory.csv", &snapshot_name(30)] {
            assert_eq!(fs::read(x.join(f)).unwrap(), fs::read(y.join(f)).unwrap(), "{f}");
        }
    }
}

#[test]
fn edit_covers_grid_orders_and_targets() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small(tmp.path());
    let dirs = cmd_train(&cfg, false).unwrap();
    let snap = dirs[0].join(snapshot_name(30));
    let out = tmp.path().join("edited.csv");
    let rows = cmd_edit(&cfg, &snap, 3, &out).unwrap();
    assert_eq!(rows.len(), 10 * 2 * 3);
    for order in EditOrder::ALL {
        for target in EditTarget::ALL {
            assert_eq!(rows.iter().filter(|r| r.order == order && r.target == target).count(), 10);
        }
    }
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().next(), Some("rho,order,target,acc_full,acc_p,acc_q"));
    assert_eq!(text.lines().count(), 61);

    let bw = tslab_cli::commands::load_weights(&snap).unwrap();
    let ds = tslab_cli::experiments::build_dataset(&cfg, 3).unwrap();
    let base = accuracy_of(&bw, &ds);
    for r in rows.iter().filter(|r| r.rho == 1.0) {
        assert_eq!(r.acc, base);
    }
}

#[test]
fn edit_names_bad_snapshot() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small(tmp.path());
    let snap = tmp.path().join("broken.txt");
    fs::write(&snap, "not a weights file\n").unwrap();
    match cmd_edit(&cfg, &snap, 0, &tmp.path().join("o.csv")) {
        Err(CliError::Format { path, .. }) => assert!(path.ends_with("broken.txt")),
        other => panic!("{other:?}"),
    }
}

#[test]
fn plotdata_from_file() {
    let tmp = tempfile::tempdir().unwrap();
    let dirs = cmd_train(&small(tmp.path()), false).unwrap();
    let csv = dirs[0].join("trajectory.csv");
    let out = cmd_plotdata(&csv, &["acc_p".into(), "acc_q".into()]).unwrap();
    assert_eq!(out.lines().count(), 32);
    assert!(out.lines().skip(1).all(|l| l.split_whitespace().count() == 3));
    match cmd_plotdata(&csv, &["foo".into()]) {
        Err(CliError::UnknownColumn(c)) => assert_eq!(c, "foo"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn gradcheck_reports_kinks() {
    let r = cmd_gradcheck(20);
    assert_eq!(r.seeds, 20);
    assert!(r.passed(), "{r:?}");
    let text = tslab_cli::commands::gradcheck_text(&r);
    assert!(text.contains("kink_skipped=") && text.ends_with("PASS\n"));
}

fn tslab(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_tslab")).args(args).output().unwrap()
}

#[test]
fn binary_exit_codes() {
    let ok = tslab(&["constants"]);
    assert!(ok.status.success());
    assert!(String::from_utf8_lossy(&ok.stdout).contains("eps_v1"));

    let tmp = tempfile::tempdir().unwrap();
    let missing = tslab(&["plotdata", tmp.path().join("nope.csv").to_str().unwrap(), "acc_p"]);
    assert!(!missing.status.success());

    let conf = tmp.path().join("bad.conf");
    fs::write(&conf, "d=10\nd=11\n").unwrap();
    let bad = tslab(&["constants", conf.to_str().unwrap()]);
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("duplicate key `d`"));
}

#[test]
fn help_mentions_full_batch_epochs() {
    let out = tslab(&["--help"]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("one epoch is exactly one gradient step"));
}

#[test]
fn seed_env_overrides_config() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_tslab"))
        .args(["train", "--out", tmp.path().to_str().unwrap()])
        .env("TSLAB_SEED", "9")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let entries: Vec<_> = fs::read_dir(tmp.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(entries, vec!["seed-9"]);
}
