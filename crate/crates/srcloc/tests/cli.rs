//! Drives the binary end to end on a tiny configuration.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use srcloc::config::RunConfig;
use srcloc::fixtures::{simulate_sequence, RealLikeSpec};
use srcloc_core::geometry::{Position, SourceBox};

const TINY: &str = r#"
seed = 7
window_ms = 16
[corpus]
synthetic_clips = 4
synthetic_min_s = 0.5
synthetic_max_s = 1.0
[simulate]
examples = 40
windows_per_clip = 10
[train]
epochs = 2
batch_size = 10
clips_per_epoch = 4
windows_per_clip = 10
validation_fraction = 0.25
finetune_epochs = 1
hidden = 16
dropout = 0.0
blocks = [
  { filters = 4, kernel = 7, pool = true },
  { filters = 4, kernel = 5, pool = true },
  { filters = 4, kernel = 3, pool = false },
]
[srp]
resolution_m = 0.25
"#;

fn srcloc(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_srcloc"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn ok(o: &Output) {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

fn setup() -> (tempfile::TempDir, Vec<PathBuf>) {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("tiny.toml"), TINY).unwrap();
    let cfg = RunConfig::from_toml(TINY, Path::new("tiny.toml")).unwrap();
    let geom = cfg.geometry.geometry().unwrap();
    let region = SourceBox::new(Position::new(1.0, 5.5, 1.1), Position::new(2.6, 6.5, 1.3)).unwrap();
    let mut spec = RealLikeSpec::mismatched(region);
    spec.duration_s = 1.0;
    let seqs = ["seq01", "seq02", "seq03", "seq11", "seq15"]
        .iter()
        .enumerate()
        .map(|(k, id)| {
            simulate_sequence(id, &geom, &spec, k as u64)
                .unwrap()
                .write(&dir.path().join("seqs"), 16_000)
                .unwrap()
        })
        .collect();
    (dir, seqs)
}

#[test]
fn every_subcommand_runs() {
    let (dir, seqs) = setup();
    let d = dir.path();
    let s = |p: &PathBuf| p.to_str().unwrap().to_string();
    let c = ["--config", "tiny.toml", "--deterministic"];

    ok(&srcloc(d, &[&["simulate"][..], &c, &["--out", "sim"]].concat()));
    ok(&srcloc(d, &[&["train"][..], &c, &["--out", "tr", "--dataset", "sim/dataset.asld"]].concat()));
    ok(&srcloc(d, &[&["train"][..], &c, &["--out", "pre"]].concat()));
    for f in ["run.resolved", "inputs.manifest", "checkpoint.aslc", "loss_history.csv"] {
        assert!(d.join("pre").join(f).exists(), "{f}");
    }
    let seq15 = s(&seqs[4]);
    let seq01 = s(&seqs[0]);
    let o = srcloc(
        d,
        &[&["finetune"][..], &c, &["--out", "ft", "--checkpoint", "pre/checkpoint.aslc", "--sequences", &seq15, "--test-sequences", "seq01"]].concat(),
    );
    ok(&o);
    ok(&srcloc(d, &[&["train-scratch"][..], &c, &["--out", "ts", "--sequences", &seq15]].concat()));
    ok(&srcloc(d, &[&["eval-cnn"][..], &c, &["--out", "ev", "--checkpoint", "ft/checkpoint.aslc", "--sequences", &seq01, "--method", "CNNf15"]].concat()));
    ok(&srcloc(d, &[&["eval-srp"][..], &c, &["--out", "ev", "--sequences", &seq01]].concat()));
    assert!(d.join("ev/reports/seq01__CNNf15__16ms.csv").exists());
    assert!(d.join("ev/reports/seq01__SRP__16ms.csv").exists());
    assert!(d.join("ev/srp_seq01_16ms.csv").exists());
    let o = srcloc(d, &["report", "--reports", "ev/reports", "--out", "rep"]);
    ok(&o);
    let table = String::from_utf8(o.stdout).unwrap();
    assert!(table.contains("CNNf15") && table.contains("SRP"), "{table}");
    assert!(d.join("rep/matrix.csv").exists());

    // a leaked test sequence is refused as a configuration error
    let o = srcloc(
        d,
        &[&["finetune"][..], &c, &["--out", "bad", "--checkpoint", "pre/checkpoint.aslc", "--sequences", &seq15, "--test-sequences", "seq15"]].concat(),
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn reproduce_writes_every_table() {
    let (dir, _) = setup();
    let d = dir.path();
    let o = srcloc(d, &["reproduce", "--config", "tiny.toml", "--out", "rep", "--sequences-dir", "seqs"]);
    ok(&o);
    for t in [3, 4, 5, 6, 8] {
        let text = std::fs::read_to_string(d.join(format!("rep/table{t}.txt"))).unwrap();
        assert!(text.contains("Average"), "table {t}: {text}");
    }
}

#[test]
fn exit_codes() {
    let (dir, seqs) = setup();
    let d = dir.path();
    // unknown key
    std::fs::write(d.join("bad.toml"), "seeed = 1\n").unwrap();
    assert_eq!(srcloc(d, &["simulate", "--config", "bad.toml"]).status.code(), Some(2));
    // missing config file
    assert_eq!(srcloc(d, &["simulate", "--config", "nope.toml"]).status.code(), Some(3));
    // missing dataset
    assert_eq!(srcloc(d, &["train", "--config", "tiny.toml", "--dataset", "nope.asld"]).status.code(), Some(3));
    // malformed checkpoint
    std::fs::write(d.join("junk.aslc"), b"not a checkpoint").unwrap();
    let seq = seqs[0].to_str().unwrap();
    let o = srcloc(d, &["eval-cnn", "--config", "tiny.toml", "--checkpoint", "junk.aslc", "--sequences", seq]);
    assert_eq!(o.status.code(), Some(1));

    // window mismatch between checkpoint and flag
    ok(&srcloc(d, &["train", "--config", "tiny.toml", "--out", "pre"]));
    let o = srcloc(
        d,
        &["eval-cnn", "--config", "tiny.toml", "--window-ms", "32", "--checkpoint", "pre/checkpoint.aslc", "--sequences", seq],
    );
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("256") && err.contains("512"), "{err}");
    // clap usage errors also map to 2
    assert_eq!(srcloc(d, &["simulate", "--bogus"]).status.code(), Some(2));
}

#[test]
fn convert_annotations_roundtrip() {
    let (dir, _) = setup();
    let d = dir.path();
    let o = srcloc(d, &["convert-annotations", "seqs/seq01.gt", "--output", "copy.gt"]);
    ok(&o);
    assert_eq!(
        std::fs::read(d.join("seqs/seq01.gt")).unwrap(),
        std::fs::read(d.join("copy.gt")).unwrap()
    );
}

#[test]
fn shipped_configs_are_valid() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["tiny.toml", "reference.toml"] {
        let path = dir.join(name);
        let text = std::fs::read_to_string(&path).unwrap();
        RunConfig::from_toml(&text, &path).unwrap().validate().unwrap();
    }
}
