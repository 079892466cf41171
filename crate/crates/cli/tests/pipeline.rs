//! End-to-end tests of the `aggremc` binary: stage composition, determinism,
//! artifact contracts, and error reporting.

use std::path::Path;
use std::process::{Command, Output};

use aggremc_core::synth::two_clusters;

const ARTIFACTS: &[&str] = &[
    "id_map.tsv",
    "priors.tsv",
    "ground.tsv",
    "map.tsv",
    "map_info.txt",
    "samples.tsv",
    "diagnostics.txt",
    "queries.tsv",
    "report.tsv",
];

fn aggremc(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aggremc"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("failed to launch the aggremc binary")
}

fn run_ok(dir: &Path, args: &[&str]) -> String {
    let out = aggremc(dir, args);
    assert!(
        out.status.success(),
        "command {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn run_err(dir: &Path, args: &[&str]) -> String {
    let out = aggremc(dir, args);
    assert!(
        !out.status.success(),
        "command {args:?} unexpectedly succeeded:\n{}",
        String::from_utf8_lossy(&out.stdout)
    );
    String::from_utf8(out.stderr).unwrap()
}

/// Writes the demo dataset plus a config into `dir`; returns the config path.
fn setup(dir: &Path, extra_config: &str) -> String {
    two_clusters(0).write_to(dir).unwrap();
    let config = format!(
        "edges = edges.tsv\nlabels = labels.tsv\nsplit = split.tsv\nout = run\n{extra_config}"
    );
    std::fs::write(dir.join("run.conf"), config).unwrap();
    "run.conf".to_string()
}

fn read_artifact(dir: &Path, out: &str, name: &str) -> String {
    let path = dir.join(out).join(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("cannot read {}: {e}", path.display()))
}

#[test]
fn pipeline_equals_the_stages_run_individually() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let conf = setup(dir, "mode = mean\nseed = 3\n");

    run_ok(dir, &["pipeline", &conf]);
    for stage in ["prior", "ground", "map", "sample", "query", "evaluate"] {
        run_ok(dir, &[stage, &conf, "--out", "stagewise"]);
    }

    for name in ARTIFACTS {
        assert_eq!(
            read_artifact(dir, "run", name),
            read_artifact(dir, "stagewise", name),
            "artifact {name} differs between pipeline and stage-by-stage runs"
        );
    }
}

#[test]
fn reruns_with_the_same_seed_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let conf = setup(dir, "mode = samples\nseed = 11\n");

    run_ok(dir, &["pipeline", &conf]);
    let first: Vec<String> = ARTIFACTS
        .iter()
        .map(|name| read_artifact(dir, "run", name))
        .collect();

    run_ok(dir, &["pipeline", &conf]);
    for (name, before) in ARTIFACTS.iter().zip(&first) {
        assert_eq!(
            &read_artifact(dir, "run", name),
            before,
            "artifact {name} changed across identical reruns"
        );
    }
}

#[test]
fn samples_mode_writes_exactly_the_thinned_row_count() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let conf = setup(
        dir,
        "mode = samples\nseed = 5\nsampler.iterations = 1100\nsampler.burn_in = 100\n\
         sampler.thin_to = 100\n",
    );
    run_ok(dir, &["pipeline", &conf]);
    let samples = read_artifact(dir, "run", "samples.tsv");
    // Header plus one line per retained sample.
    assert_eq!(samples.lines().count(), 101);
    let queries = read_artifact(dir, "run", "queries.tsv");
    assert!(queries.starts_with("method\tPSL-SAMPLES\n"), "{queries}");
}

#[test]
fn fully_observed_map_run_scores_zero_delta_and_undefined_accuracy() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    two_clusters(0).write_to(dir).unwrap();
    // Observe every node: the split lists each node id from the label file.
    let labels = std::fs::read_to_string(dir.join("labels.tsv")).unwrap();
    let all: String = labels
        .lines()
        .map(|l| format!("{}\n", l.split('\t').next().unwrap()))
        .collect();
    std::fs::write(dir.join("split.tsv"), all).unwrap();
    std::fs::write(
        dir.join("run.conf"),
        "edges = edges.tsv\nlabels = labels.tsv\nsplit = split.tsv\nout = run\nmode = map\n",
    )
    .unwrap();

    run_ok(dir, &["pipeline", "run.conf"]);
    let report = read_artifact(dir, "run", "report.tsv");
    let row = report.lines().nth(1).unwrap();
    let cells: Vec<&str> = row.split('\t').collect();
    assert_eq!(cells[0], "PSL-MAP");
    for delta in &cells[1..7] {
        let v: f64 = delta.trim_end_matches('*').parse().unwrap();
        assert_eq!(v, 0.0, "nonzero delta in fully observed run: {row}");
    }
    assert_eq!(
        cells[7], "n/a*",
        "accuracy must be flagged undefined: {row}"
    );
}

#[test]
fn fully_observed_sampling_mode_skips_the_sample_stage() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    two_clusters(0).write_to(dir).unwrap();
    let labels = std::fs::read_to_string(dir.join("labels.tsv")).unwrap();
    let all: String = labels
        .lines()
        .map(|l| format!("{}\n", l.split('\t').next().unwrap()))
        .collect();
    std::fs::write(dir.join("split.tsv"), all).unwrap();
    std::fs::write(
        dir.join("run.conf"),
        "edges = edges.tsv\nlabels = labels.tsv\nsplit = split.tsv\nout = run\nmode = mean\n",
    )
    .unwrap();

    let stdout = run_ok(dir, &["pipeline", "run.conf"]);
    assert!(stdout.contains("sample: skipped"), "{stdout}");
    assert!(!dir.join("run/samples.tsv").exists());
    let report = read_artifact(dir, "run", "report.tsv");
    assert!(report.contains("n/a*"), "{report}");
}

#[test]
fn missing_artifacts_name_the_stage_that_produces_them() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let conf = setup(dir, "");

    let stderr = run_err(dir, &["map", &conf]);
    assert!(stderr.starts_with("error: stage map"), "{stderr}");
    assert!(stderr.contains("run the `ground` stage first"), "{stderr}");

    let stderr = run_err(dir, &["ground", &conf]);
    assert!(stderr.contains("run the `prior` stage first"), "{stderr}");

    run_ok(dir, &["prior", &conf]);
    run_ok(dir, &["ground", &conf]);
    let stderr = run_err(dir, &["sample", &conf]);
    assert!(stderr.contains("run the `map` stage first"), "{stderr}");
}

#[test]
fn config_errors_are_stage_qualified_and_name_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    std::fs::write(
        dir.join("bad.conf"),
        "edges = e.tsv\nsplit = s.tsv\nout = run\n",
    )
    .unwrap();
    let stderr = run_err(dir, &["prior", "bad.conf"]);
    assert!(stderr.starts_with("error: stage prior"), "{stderr}");
    assert!(stderr.contains("`labels`"), "{stderr}");

    std::fs::write(
        dir.join("typo.conf"),
        "edges = e\nlabels = l\nsplit = s\nout = o\nsampler.iteratoins = 2\n",
    )
    .unwrap();
    let stderr = run_err(dir, &["pipeline", "typo.conf"]);
    assert!(stderr.contains("sampler.iteratoins"), "{stderr}");
}

#[test]
fn mode_flag_overrides_the_config() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let conf = setup(dir, "mode = mean\nseed = 2\n");
    run_ok(dir, &["pipeline", &conf, "--mode", "map"]);
    let queries = read_artifact(dir, "run", "queries.tsv");
    assert!(queries.starts_with("method\tPSL-MAP\n"), "{queries}");
    // Map mode never runs the sampler.
    assert!(!dir.join("run/samples.tsv").exists());
}

#[test]
fn evaluate_rejects_queries_from_a_different_mode() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let conf = setup(dir, "mode = map\n");
    run_ok(dir, &["pipeline", &conf]);
    let stderr = run_err(dir, &["evaluate", &conf, "--mode", "samples"]);
    assert!(stderr.contains("PSL-MAP"), "{stderr}");
    assert!(stderr.contains("re-run the `query` stage"), "{stderr}");
}

#[test]
fn timings_artifact_lists_every_stage_and_the_total() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let conf = setup(dir, "mode = samples\nseed = 1\n");
    run_ok(dir, &["pipeline", &conf]);
    let timings = read_artifact(dir, "run", "timings.tsv");
    for stage in [
        "prior", "ground", "map", "sample", "query", "evaluate", "total",
    ] {
        assert!(
            timings
                .lines()
                .any(|l| l.starts_with(&format!("{stage}\t"))),
            "missing {stage} in timings:\n{timings}"
        );
    }
}
