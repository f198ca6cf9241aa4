use std::path::Path;
use std::process::{Command, Output};

fn fvlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fvlab"))
        .args(args)
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = fvlab(args);
    assert!(
        out.status.success(),
        "fvlab {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn write_config(dir: &Path) -> String {
    let cfg = dir.join("run.cfg");
    std::fs::write(
        &cfg,
        "out = run\nseed = 7\nids = 40\nclips = 4\nlatent_dim = 4\nnoise = 0.5\nfeature_dim = 16\n\
         n_train = 30\niterations = 60\nlr_decay_every = 40\nhard_mining_start = 30\nhidden_dim = 16\n\
         embed_dim = 8\nset_size = 10\nks = 1,5,10\nrepeats = 2\nn_trials = 5\n",
    )
    .unwrap();
    cfg.display().to_string()
}

fn pipeline(dir: &Path) -> Vec<String> {
    let cfg = write_config(dir);
    let mut stdout = Vec::new();
    for cmd in [
        vec!["synth"],
        vec!["split"],
        vec!["train", "--checkpoint-every", "30"],
        vec!["eval-match", "--grouping", "none"],
        vec!["eval-match", "--grouping", "G"],
        vec!["eval-match", "--grouping", "none", "--random-scores"],
        vec!["eval-recall"],
        vec![
            "probe",
            "--attributes",
            "gender,random_attr",
            "--probe-set",
            "all",
        ],
        vec!["export-embeddings"],
    ] {
        let mut args = cmd.clone();
        args.extend(["--config", &cfg]);
        stdout.push(ok(&args));
    }
    stdout
}

const REPORTS: [&str; 13] = [
    "manifest.jsonl",
    "split.json",
    "model.ckpt",
    "model_0000030.ckpt",
    "train_log.jsonl",
    "eval_match_none.jsonl",
    "eval_match_G.jsonl",
    "eval_match_none_random.jsonl",
    "recall.jsonl",
    "probes.jsonl",
    "probes.tsv",
    "embeddings.jsonl",
    "train.cfg",
];

#[test]
fn pipeline_runs_and_reruns_byte_identically() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let out_a = pipeline(a.path());
    pipeline(b.path());
    assert!(out_a[3].contains("accuracy"), "{}", out_a[3]);
    assert!(out_a[6].contains("R@1"), "{}", out_a[6]);
    let (ra, rb) = (a.path().join("run"), b.path().join("run"));
    for name in REPORTS.iter().filter(|n| !n.ends_with(".cfg")) {
        assert_eq!(
            read(&ra, name),
            read(&rb, name),
            "{name} differs between runs"
        );
    }
    for cfg in [
        "synth",
        "split",
        "train",
        "eval-match",
        "eval-recall",
        "probe",
        "export-embeddings",
    ] {
        let text = String::from_utf8(read(&ra, &format!("{cfg}.cfg"))).unwrap();
        assert!(text.contains("seed = 7"), "{cfg}.cfg: {text}");
    }
    // Defaults land in the echo too.
    let train_cfg = String::from_utf8(read(&ra, "train.cfg")).unwrap();
    assert!(
        train_cfg.contains("batch_size = 8") && train_cfg.contains("iterations = 60"),
        "{train_cfg}"
    );

    let log = String::from_utf8(read(&ra, "train_log.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 60);
    let embeddings = String::from_utf8(read(&ra, "embeddings.jsonl")).unwrap();
    assert_eq!(embeddings.lines().count(), 40 * 4 * 2);
    let probes = String::from_utf8(read(&ra, "probes.tsv")).unwrap();
    assert_eq!(probes.lines().count(), 1 + 2 * 2);
}

#[test]
fn flags_override_config_values() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    ok(&["synth", "--config", &cfg, "--ids", "12", "--clips", "2"]);
    let manifest = String::from_utf8(read(&dir.path().join("run"), "manifest.jsonl")).unwrap();
    assert_eq!(manifest.lines().count(), 1 + 12 * 2);
    let echo = String::from_utf8(read(&dir.path().join("run"), "synth.cfg")).unwrap();
    assert!(
        echo.contains("ids = 12") && echo.contains("clips = 2"),
        "{echo}"
    );
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o").display().to_string();

    // GEFA without a target is rejected before any data is read.
    let r = fvlab(&["eval-match", "--grouping", "GEFA", "--out", &out]);
    assert_eq!(
        r.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&r.stderr)
    );
    assert!(String::from_utf8_lossy(&r.stderr).contains("GEFA"));

    assert_eq!(fvlab(&["train", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(fvlab(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(
        fvlab(&["synth", "--shared", "1.5", "--out", &out])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(fvlab(&["stats", "--out", &out]).status.code(), Some(2));
    assert_eq!(fvlab(&["--help"]).status.code(), Some(0));

    // Missing inputs are runtime errors.
    let r = fvlab(&["split", "--out", &out]);
    assert_eq!(
        r.status.code(),
        Some(1),
        "{}",
        String::from_utf8_lossy(&r.stderr)
    );
}

#[test]
fn stats_reproduces_published_summary_rows() {
    let dir = tempfile::tempdir().unwrap();
    let input = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/study_summaries.jsonl");
    let out = dir.path().display().to_string();
    let stdout = ok(&["stats", "--input", input.to_str().unwrap(), "--out", &out]);
    for t in ["13.17 (70)", "9.65 (70)", "5.20 (73)", "3.69 (75)"] {
        assert!(stdout.contains(t), "missing {t} in\n{stdout}");
    }
    assert_eq!(stdout.matches("p < 0.001").count(), 4, "{stdout}");

    let raw = dir.path().join("raw.jsonl");
    std::fs::write(
        &raw,
        "{\"label\": \"a\", \"values\": [0.5, 0.6, 0.7, 0.55]}\n{\"label\": \"b\", \"values\": [0.9, 0.95, 0.85, 0.9]}\n",
    )
    .unwrap();
    let stdout = ok(&[
        "stats",
        "--input",
        raw.to_str().unwrap(),
        "--out",
        &out,
        "--tukey-draws",
        "2000",
    ]);
    assert!(stdout.contains("ANOVA"), "{stdout}");
    let report = String::from_utf8(read(dir.path(), "stats.jsonl")).unwrap();
    assert_eq!(report.lines().count(), 4);
}

#[test]
fn shipped_desk_config_parses() {
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/desk.cfg");
    let text = std::fs::read_to_string(cfg).unwrap();
    let kv = fvlab_core::config::KvConfig::parse(&text).unwrap();
    assert_eq!(kv.get("iterations"), Some("2000"));
    assert_eq!(kv.get("n_train"), Some("200"));
}
