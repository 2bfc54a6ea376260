//! End-to-end tests of the `probelab` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_probelab"))
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin()
        .current_dir(dir)
        .env_remove("DIFFICULTY_SEED")
        .args(args)
        .output()
        .expect("spawn probelab")
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn synth_small(dir: &Path, id: &str, seed: u64) {
    let out = run_in(
        dir,
        &[
            "synth",
            "--classes",
            "3",
            "--per-class",
            "30",
            "--side",
            "16",
            "--separation",
            "0.4",
            "--sigma",
            "0.1",
            "--id",
            id,
            "--seed",
            &seed.to_string(),
            "--out",
            "data",
        ],
    );
    assert_ok(&out);
}

#[test]
fn help_exits_zero_and_documents_flags() {
    let out = bin().arg("--help").output().unwrap();
    assert!(out.status.success());
    for sub in ["score", "eval", "synth"] {
        let out = bin().args([sub, "--help"]).output().unwrap();
        assert!(out.status.success(), "{sub} --help failed");
    }
    for sub in ["score", "synth"] {
        let out = bin().args([sub, "--help"]).output().unwrap();
        let text = String::from_utf8_lossy(&out.stdout).into_owned();
        assert!(text.contains("--seed"), "{sub} help misses --seed:\n{text}");
    }
    let score_help = bin().args(["score", "--help"]).output().unwrap();
    let text = String::from_utf8_lossy(&score_help.stdout).into_owned();
    for flag in [
        "--dataset",
        "--format",
        "--method",
        "--pipeline",
        "--transform",
        "--metric",
        "--probe",
        "--epochs",
        "--embedding",
        "--n-max",
        "--out",
        "--jobs",
        "--repro",
    ] {
        assert!(text.contains(flag), "score help misses {flag}");
    }
}

#[test]
fn unknown_pipeline_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    synth_small(dir.path(), "d", 1);
    let out = run_in(
        dir.path(),
        &[
            "score",
            "--method",
            "silhouette",
            "--pipeline",
            "S9",
            "--dataset",
            "data/d.dset",
        ],
    );
    assert_eq!(out.status.code(), Some(2), "bad pipeline value is a usage error");
    // Unknown flags are usage errors too.
    let out = run_in(dir.path(), &["score", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn score_appends_rows_with_header_once() {
    let dir = tempfile::tempdir().unwrap();
    synth_small(dir.path(), "d", 2);
    for _ in 0..2 {
        let out = run_in(
            dir.path(),
            &[
                "score",
                "--method",
                "silhouette",
                "--pipeline",
                "S3",
                "--dataset",
                "data/d.dset",
                "--seed",
                "7",
            ],
        );
        assert_ok(&out);
    }
    let text = fs::read_to_string(dir.path().join("scores.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3, "{text}");
    assert_eq!(lines[0], "dataset_id,method,variant,score,wall_time_s,seed");
    assert!(lines[1].starts_with("d,silhouette,S3,"));
    assert_eq!(lines[1].split(',').next_back(), Some("7"));
}

#[test]
fn env_seed_is_used_unless_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    synth_small(dir.path(), "d", 3);
    let out = bin()
        .current_dir(dir.path())
        .env("DIFFICULTY_SEED", "911")
        .args([
            "score",
            "--method",
            "kmeans",
            "--dataset",
            "data/d.dset",
        ])
        .output()
        .unwrap();
    assert_ok(&out);
    let text = fs::read_to_string(dir.path().join("scores.csv")).unwrap();
    assert!(text.lines().nth(1).unwrap().ends_with(",911"), "{text}");

    let out = bin()
        .current_dir(dir.path())
        .env("DIFFICULTY_SEED", "911")
        .args([
            "score",
            "--method",
            "kmeans",
            "--dataset",
            "data/d.dset",
            "--seed",
            "5",
        ])
        .output()
        .unwrap();
    assert_ok(&out);
    let text = fs::read_to_string(dir.path().join("scores.csv")).unwrap();
    assert!(text.lines().nth(2).unwrap().ends_with(",5"), "{text}");
}

#[test]
fn jobs_fan_out_keeps_deterministic_order() {
    let dir = tempfile::tempdir().unwrap();
    synth_small(dir.path(), "a", 4);
    synth_small(dir.path(), "b", 5);
    let args = |out: &str, jobs: &str| {
        vec![
            "score".to_string(),
            "--method".into(),
            "kmeans".into(),
            "--transform".into(),
            "none,resize8".into(),
            "--metric".into(),
            "aecm,v".into(),
            "--dataset".into(),
            "data/a.dset".into(),
            "--dataset".into(),
            "data/b.dset".into(),
            "--repro".into(),
            "--seed".into(),
            "3".into(),
            "--jobs".into(),
            jobs.into(),
            "--out".into(),
            out.into(),
        ]
    };
    let a1: Vec<String> = args("seq.csv", "1");
    let out = run_in(dir.path(), &a1.iter().map(String::as_str).collect::<Vec<_>>());
    assert_ok(&out);
    let a4: Vec<String> = args("par.csv", "4");
    let out = run_in(dir.path(), &a4.iter().map(String::as_str).collect::<Vec<_>>());
    assert_ok(&out);
    let seq = fs::read(dir.path().join("seq.csv")).unwrap();
    let par = fs::read(dir.path().join("par.csv")).unwrap();
    assert_eq!(seq, par, "parallel fan-out changed the output bytes");
    assert_eq!(String::from_utf8_lossy(&seq).lines().count(), 9); // header + 2x4 rows
}

#[test]
fn eval_reports_and_flags_unknown_ids() {
    let dir = tempfile::tempdir().unwrap();
    synth_small(dir.path(), "a", 6);
    synth_small(dir.path(), "b", 7);
    synth_small(dir.path(), "c", 8);
    for ds in ["a", "b", "c"] {
        let out = run_in(
            dir.path(),
            &[
                "score",
                "--method",
                "silhouette",
                "--pipeline",
                "S3",
                "--dataset",
                &format!("data/{ds}.dset"),
                "--repro",
            ],
        );
        assert_ok(&out);
    }
    fs::write(
        dir.path().join("reference.csv"),
        "dataset_id,top1\na,0.9\nb,0.8\nc,0.7\n",
    )
    .unwrap();
    let out = run_in(
        dir.path(),
        &[
            "eval",
            "--scores",
            "scores.csv",
            "--reference",
            "reference.csv",
            "--out",
            "rpt",
        ],
    );
    assert_ok(&out);
    assert!(dir.path().join("rpt/report.csv").exists());
    assert!(dir.path().join("rpt/scatter_silhouette_S3.svg").exists());

    // A score row with an id missing from the reference fails, naming it.
    fs::write(dir.path().join("reference.csv"), "dataset_id,top1\na,0.9\nb,0.8\n").unwrap();
    let out = run_in(
        dir.path(),
        &[
            "eval",
            "--scores",
            "scores.csv",
            "--reference",
            "reference.csv",
            "--out",
            "rpt2",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains('c'));
}

#[test]
fn eval_accepts_header_only_scores() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("scores.csv"),
        "dataset_id,method,variant,score,wall_time_s,seed\n",
    )
    .unwrap();
    fs::write(dir.path().join("reference.csv"), "dataset_id,top1\n").unwrap();
    let out = run_in(
        dir.path(),
        &[
            "eval",
            "--scores",
            "scores.csv",
            "--reference",
            "reference.csv",
            "--out",
            "rpt",
        ],
    );
    assert_ok(&out);
    let report = fs::read_to_string(dir.path().join("rpt/report.csv")).unwrap();
    assert_eq!(report.lines().count(), 1); // header only
}

#[test]
fn eval_names_bad_schema_column() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("scores.csv"),
        "dataset_id,method,variant,result,wall_time_s,seed\n",
    )
    .unwrap();
    fs::write(dir.path().join("reference.csv"), "dataset_id,top1\n").unwrap();
    let out = run_in(
        dir.path(),
        &[
            "eval",
            "--scores",
            "scores.csv",
            "--reference",
            "reference.csv",
            "--out",
            "rpt",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr).into_owned();
    assert!(err.contains("result"), "{err}");
    assert!(err.contains("score"), "{err}");
}

#[test]
fn synth_preset_emits_six_datasets_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &["synth", "--preset", "noise-ladder", "--seed", "9", "--out", "ladder"],
    );
    assert_ok(&out);
    let mut dsets: Vec<String> = fs::read_dir(dir.path().join("ladder"))
        .unwrap()
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".dset"))
        .collect();
    dsets.sort();
    assert_eq!(dsets.len(), 6, "{dsets:?}");
    let manifest = fs::read_to_string(dir.path().join("ladder/manifest.csv")).unwrap();
    assert_eq!(manifest.lines().count(), 7);
    assert!(manifest.starts_with(
        "dataset_id,classes,per_class,side,separation,sigma,label_flip_rate,seed"
    ));
    for sigma in ["0.02", "0.05", "0.1", "0.2", "0.4", "0.8"] {
        assert!(manifest.contains(&format!(",{sigma},")), "sigma {sigma} missing");
    }

    // Same seed reproduces byte-identical files.
    let out = run_in(
        dir.path(),
        &["synth", "--preset", "noise-ladder", "--seed", "9", "--out", "ladder2"],
    );
    assert_ok(&out);
    for name in &dsets {
        let a = fs::read(dir.path().join("ladder").join(name)).unwrap();
        let b = fs::read(dir.path().join("ladder2").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between runs");
    }
}

#[test]
fn probe_curve_csv_has_per_epoch_rows() {
    let dir = tempfile::tempdir().unwrap();
    synth_small(dir.path(), "d", 10);
    let out = run_in(
        dir.path(),
        &[
            "score",
            "--method",
            "probenet",
            "--probe",
            "narrow",
            "--epochs",
            "2",
            "--probe-size",
            "native",
            "--no-augment",
            "--dataset",
            "data/d.dset",
            "--curve-out",
            "curve.csv",
            "--repro",
        ],
    );
    assert_ok(&out);
    let curve = fs::read_to_string(dir.path().join("curve.csv")).unwrap();
    let lines: Vec<&str> = curve.lines().collect();
    assert_eq!(lines[0], "epoch,top1,loss,seconds");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("1,"));
    let scores = fs::read_to_string(dir.path().join("scores.csv")).unwrap();
    assert!(scores.contains(",probenet,narrow@2,"), "{scores}");
}
