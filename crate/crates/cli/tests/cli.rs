use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use x2static_cli::{manifest_path, RunManifest};

fn x2static(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_x2static"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let o = x2static(dir, args);
    assert_eq!(o.status.code(), Some(0), "{args:?}: {}", stderr(&o));
    o
}

/// synthetic corpus, vocabulary, planted stream and gold pairs
fn planted_workspace() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--output", "corpus.txt", "--words", "200", "--sentences", "3000", "--seed", "4"]);
    ok(d, &["vocab", "--input", "corpus.txt", "--output", "vocab.tsv", "--min-count", "1"]);
    ok(
        d,
        &[
            "mock-teacher", "--input", "corpus.txt", "--vocab", "vocab.tsv", "--output", "stream.x2s",
            "--teacher", "planted", "--dim", "8", "--noise", "0.3", "--seed", "5", "--gold", "gold.tsv",
            "--pairs", "150",
        ],
    );
    dir
}

fn rho_of(report: &str, dataset: &str) -> f64 {
    let line = report.lines().find(|l| l.starts_with(&format!("{dataset}\t"))).unwrap();
    line.split('\t').nth(1).unwrap().parse().unwrap()
}

#[test]
fn full_pipeline_writes_artifacts_and_manifests() {
    let dir = planted_workspace();
    let d = dir.path();
    let train = ok(d, &["train", "--stream", "stream.x2s", "--vocab", "vocab.tsv", "--output", "emb.txt", "--checkpoint", "emb.bin"]);
    assert!(stderr(&train).contains("examples"));
    ok(d, &["ase", "--stream", "stream.x2s", "--vocab", "vocab.tsv", "--output", "ase.txt", "--coverage", "cov.tsv"]);
    let eval = ok(d, &["eval-sim", "--input", "ase.txt", "--dataset", "gold.tsv"]);
    let report = stdout(&eval);
    assert_eq!(report.lines().count(), 1);
    assert!(rho_of(&report, "gold") > 0.9, "{report}");

    for artifact in ["corpus.txt", "vocab.tsv", "stream.x2s", "gold.tsv", "emb.txt", "emb.bin", "ase.txt", "cov.tsv"] {
        let m = RunManifest::read(&manifest_path(&d.join(artifact))).unwrap();
        assert_eq!(m.version, env!("CARGO_PKG_VERSION"));
        assert!(m.outputs.values().any(|p| p == Path::new(artifact)), "{artifact}");
    }
    let vocab_manifest = RunManifest::read(&manifest_path(&d.join("vocab.tsv"))).unwrap();
    assert!(vocab_manifest.stats["total_tokens"].as_u64().unwrap() > 0);
    let train_manifest = RunManifest::read(&manifest_path(&d.join("emb.txt"))).unwrap();
    assert_eq!(train_manifest.subcommand, "train");
    assert_eq!(train_manifest.config["negatives"], 10);
    assert_eq!(train_manifest.seed, Some(0));

    let cov = fs::read_to_string(d.join("cov.tsv")).unwrap();
    assert_eq!(cov.lines().count(), fs::read_to_string(d.join("vocab.tsv")).unwrap().lines().count());

    let nn = ok(d, &["nn", "--input", "ase.txt", "--k", "4", "w00000", "w00003"]);
    assert_eq!(stdout(&nn).lines().count(), 8);
}

#[test]
fn train_announces_default_hyperparameters() {
    let dir = planted_workspace();
    let o = ok(dir.path(), &["train", "--stream", "stream.x2s", "--vocab", "vocab.tsv", "--output", "emb.txt"]);
    assert!(
        stderr(&o).contains("epochs=1 negatives=10 subsample_t=5e-6 lr=0.001 batch=128"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn unknown_flag_is_a_usage_error_naming_the_flag() {
    let dir = tempfile::tempdir().unwrap();
    let o = x2static(dir.path(), &["train", "--vocab", "v", "--output", "o", "--learning-speed", "3"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--learning-speed"), "{}", stderr(&o));

    let o = x2static(dir.path(), &["frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
    let o = x2static(dir.path(), &[]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn help_and_version_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    assert!(stdout(&ok(dir.path(), &["--help"])).contains("sweep"));
    assert!(stdout(&ok(dir.path(), &["train", "--help"])).contains("--subsample-t"));
    assert!(stdout(&ok(dir.path(), &["--version"])).contains(env!("CARGO_PKG_VERSION")));
}

#[test]
fn missing_input_is_a_data_error_naming_the_path() {
    let dir = planted_workspace();
    let o = x2static(dir.path(), &["train", "--stream", "absent.x2s", "--vocab", "vocab.tsv", "--output", "e.txt"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("absent.x2s"), "{}", stderr(&o));
    let o = x2static(dir.path(), &["vocab", "--input", "no_corpus.txt", "--output", "v2.tsv"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no_corpus.txt"));
}

#[test]
fn corrupt_stream_is_a_data_error() {
    let dir = planted_workspace();
    let d = dir.path();
    fs::write(d.join("bad.x2s"), b"NOPE0000000000000000").unwrap();
    let o = x2static(d, &["ase", "--stream", "bad.x2s", "--vocab", "vocab.tsv", "--output", "a.txt"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bad.x2s"));

    // truncate a valid stream mid-record
    let bytes = fs::read(d.join("stream.x2s")).unwrap();
    fs::write(d.join("cut.x2s"), &bytes[..bytes.len() - 3]).unwrap();
    let o = x2static(d, &["train", "--stream", "cut.x2s", "--vocab", "vocab.tsv", "--output", "e.txt"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn eval_with_zero_coverage_exits_two() {
    let dir = planted_workspace();
    let d = dir.path();
    ok(d, &["ase", "--stream", "stream.x2s", "--vocab", "vocab.tsv", "--output", "ase.txt"]);
    fs::write(d.join("alien.tsv"), "zebra quokka 3.0\nnarwhal okapi 1.5\n").unwrap();
    let o = x2static(d, &["eval-sim", "--input", "ase.txt", "--dataset", "alien.tsv"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("alien"));
}

#[test]
fn invalid_hyperparameters_are_usage_errors() {
    let dir = planted_workspace();
    let d = dir.path();
    for bad in [["--epochs", "0"], ["--negatives", "0"], ["--lr", "-1"], ["--batch", "0"]] {
        let mut args = vec!["train", "--stream", "stream.x2s", "--vocab", "vocab.tsv", "--output", "e.txt"];
        args.extend(bad);
        assert_eq!(x2static(d, &args).status.code(), Some(1), "{bad:?}");
    }
    let o = x2static(d, &["sweep", "--stream", "stream.x2s", "--vocab", "vocab.tsv", "--dataset", "gold.tsv", "--fractions", "0.5,0.1"]);
    assert_eq!(o.status.code(), Some(1));
    let o = x2static(d, &["sweep", "--stream", "stream.x2s", "--vocab", "vocab.tsv", "--dataset", "gold.tsv", "--fractions", "0.5,abc"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn outputs_never_overwrite_inputs() {
    let dir = planted_workspace();
    let d = dir.path();
    let before = fs::read(d.join("vocab.tsv")).unwrap();
    let o = x2static(d, &["train", "--stream", "stream.x2s", "--vocab", "vocab.tsv", "--output", "vocab.tsv"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(fs::read(d.join("vocab.tsv")).unwrap(), before);
}

#[test]
fn config_file_sits_between_flags_and_defaults() {
    let dir = planted_workspace();
    let d = dir.path();
    fs::write(d.join("run.toml"), "[trainer]\nepochs = 2\nnegatives = 4\nsubsample_t = 1e-3\n").unwrap();
    let o = ok(
        d,
        &["train", "--config", "run.toml", "--stream", "stream.x2s", "--vocab", "vocab.tsv", "--output", "e.txt", "--epochs", "3"],
    );
    assert!(stderr(&o).contains("epochs=3 negatives=4 subsample_t=1e-3 lr=0.001 batch=128"), "{}", stderr(&o));
    let m = RunManifest::read(&manifest_path(&d.join("e.txt"))).unwrap();
    assert_eq!(m.config["epochs"], 3);
    assert_eq!(m.config["negatives"], 4);
    assert_eq!(m.config["batch_size"], 128);

    fs::write(d.join("typo.toml"), "[trainer]\nepoch = 2\n").unwrap();
    let o = x2static(d, &["train", "--config", "typo.toml", "--stream", "stream.x2s", "--vocab", "vocab.tsv", "--output", "e.txt"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("typo.toml"));
}

#[test]
fn replaying_a_manifest_reproduces_the_artifact() {
    let dir = planted_workspace();
    let d = dir.path();
    let inputs: Vec<(PathBuf, Vec<u8>)> = ["stream.x2s", "vocab.tsv", "corpus.txt"]
        .iter()
        .map(|f| (d.join(f), fs::read(d.join(f)).unwrap()))
        .collect();
    ok(d, &["train", "--stream", "stream.x2s", "--vocab", "vocab.tsv", "--output", "e.txt", "--epochs", "2", "--seed", "8"]);
    let first = fs::read(d.join("e.txt")).unwrap();
    fs::remove_file(d.join("e.txt")).unwrap();
    fs::copy(manifest_path(&d.join("e.txt")), d.join("run.json")).unwrap();
    ok(d, &["replay", "--input", "run.json"]);
    assert_eq!(fs::read(d.join("e.txt")).unwrap(), first);

    // no subcommand touched its inputs
    for (path, bytes) in inputs {
        assert_eq!(fs::read(&path).unwrap(), bytes, "{}", path.display());
    }
}

#[test]
fn sweep_rows_and_full_fraction_match_a_standalone_run() {
    let dir = planted_workspace();
    let d = dir.path();
    let common = ["--stream", "stream.x2s", "--vocab", "vocab.tsv", "--seed", "3", "--subsample-t", "1e-3", "--lr", "0.01"];
    let mut args = vec!["sweep", "--dataset", "gold.tsv", "--fractions", "0.01,0.1,1.0", "--output", "sweep.tsv"];
    args.extend(common);
    ok(d, &args);
    let table = fs::read_to_string(d.join("sweep.tsv")).unwrap();
    let rows: Vec<Vec<&str>> = table.lines().skip(1).map(|l| l.split('\t').collect()).collect();
    // |fractions| x |methods| x |datasets|
    assert_eq!(rows.len(), 3 * 2);
    assert!(manifest_path(&d.join("sweep.tsv")).exists());

    let mut args = vec!["train", "--output", "full.txt"];
    args.extend(common);
    ok(d, &args);
    let report = stdout(&ok(d, &["eval-sim", "--input", "full.txt", "--dataset", "gold.tsv"]));
    let full = rows.iter().find(|r| r[0] == "distilled" && r[1] == "1").unwrap();
    assert_eq!(full[4], format!("{:.6}", rho_of(&report, "gold")));

    let ase_words: Vec<usize> = rows.iter().filter(|r| r[0] == "ase").map(|r| r[7].parse().unwrap()).collect();
    assert!(ase_words.windows(2).all(|w| w[0] <= w[1]), "{ase_words:?}");
}

#[test]
fn text_pipeline_from_raw_paragraphs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let para = "The cat sat on the mat near the door. The dog slept by the warm fire all night. \
                A bird sang outside the window until the morning came. Nobody woke the dog.";
    fs::write(d.join("raw.txt"), format!("{para}\n\nToo short.\n\n{para}\n")).unwrap();
    ok(d, &["preprocess", "--input", "raw.txt", "--output", "corpus.txt"]);
    let corpus = fs::read_to_string(d.join("corpus.txt")).unwrap();
    assert_eq!(corpus.split("\n\n").filter(|p| !p.trim().is_empty()).count(), 2);
    assert!(corpus.starts_with("the cat sat on the mat near the door .\n"));

    ok(d, &["vocab", "--input", "corpus.txt", "--output", "vocab.tsv", "--min-count", "2"]);
    ok(d, &["mock-teacher", "--input", "corpus.txt", "--vocab", "vocab.tsv", "--output", "s.x2s", "--dim", "6", "--dtype", "f16", "--scope", "paragraph"]);
    ok(d, &["train", "--stream", "s.x2s", "--vocab", "vocab.tsv", "--output", "e.txt", "--subsample-t", "1"]);
    ok(d, &["train", "--mode", "static", "--input", "corpus.txt", "--vocab", "vocab.tsv", "--output", "st.txt", "--dim", "6", "--subsample-t", "1"]);
    let first = fs::read_to_string(d.join("e.txt")).unwrap();
    assert!(first.starts_with(&format!("{} 6\n", fs::read_to_string(d.join("vocab.tsv")).unwrap().lines().count())));
    let o = x2static(d, &["train", "--mode", "static", "--vocab", "vocab.tsv", "--output", "st.txt", "--dim", "6"]);
    assert_eq!(o.status.code(), Some(1));
}
