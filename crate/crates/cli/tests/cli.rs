use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use cdsk::eval::{feature_mse_report, signal_dcor, EvalItem, EvalReport};
use cdsk::features::io::{read_features, write_features_csv};
use cdsk::features::FeatureMatrix;
use cdsk::skdae::{load_checkpoint, Variant};
use ndarray::Array2;

fn cdsk(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cdsk"))
        .args(args)
        .current_dir(cwd)
        .env("RUST_LOG", "info")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn files_with_ext(dir: &Path, ext: &str) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == ext))
        .collect();
    v.sort();
    v
}

/// Synthetic corpus with `n` one-second clean utterances and four noises.
fn corpus(dir: &Path, n: usize) {
    ok(&cdsk(&["synth", "--out", "corpus", "--utterances", &n.to_string(), "--seed", "4"], dir));
}

const SMOKE_CONFIG: &str = r#"
clean_dir = "corpus/clean"
noise_files = ["corpus/noise/hum.wav", "corpus/noise/band.wav"]
snr_db = [0, 10]
out_dir = "run"
seed = 11

[train]
variant = "CDSK-DAE"
batch_size = 64
epochs = 2

[model]
encoder = [64, 32, 16]
"#;

#[test]
fn features_on_empty_dir_succeeds_with_warning() {
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir(dir.path().join("empty")).unwrap();
    let out = cdsk(&["features", "empty", "feats"], dir.path());
    ok(&out);
    assert!(String::from_utf8_lossy(&out.stderr).contains("no WAV files"));
    assert!(!dir.path().join("feats").exists() || files_with_ext(&dir.path().join("feats"), "dcdf").is_empty());
}

#[test]
fn features_writes_one_parseable_file_per_wav() {
    let dir = tempfile::tempdir().unwrap();
    corpus(dir.path(), 1);
    fs::write(dir.path().join("corpus/clean/notes.txt"), "not audio").unwrap();
    let out = cdsk(&["features", "corpus/clean", "feats", "--csv"], dir.path());
    ok(&out);
    assert!(String::from_utf8_lossy(&out.stderr).contains("skipping non-WAV"));
    let files = files_with_ext(&dir.path().join("feats"), "dcdf");
    assert_eq!(files.len(), 1);
    let f = read_features(&files[0]).unwrap();
    assert_eq!(f.frames().dim(), (98, 40));
    assert!(f.is_normalized());
    assert_eq!(files_with_ext(&dir.path().join("feats"), "csv").len(), 1);
}

#[test]
fn corrupt_wav_fails_and_names_the_file() {
    let dir = tempfile::tempdir().unwrap();
    corpus(dir.path(), 1);
    fs::write(dir.path().join("corpus/clean/broken.wav"), b"RIFF\x00\x00garbage").unwrap();
    let out = cdsk(&["features", "corpus/clean", "feats"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("broken.wav"));
    // The good file is still processed.
    assert_eq!(files_with_ext(&dir.path().join("feats"), "dcdf").len(), 1);
}

#[test]
fn mix_is_cartesian_documented_and_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    corpus(dir.path(), 2);
    let args = ["mix", "--clean", "corpus/clean", "--noise", "corpus/noise/hiss.wav", "--snr", "0,5,10,20", "--seed", "9"];
    ok(&cdsk(&[&args[..], &["--out", "a"]].concat(), dir.path()));
    ok(&cdsk(&[&args[..], &["--out", "b"]].concat(), dir.path()));

    let wavs = files_with_ext(&dir.path().join("a"), "wav");
    assert_eq!(wavs.len(), 8);
    let manifest = fs::read_to_string(dir.path().join("a/manifest.csv")).unwrap();
    let mut lines = manifest.lines();
    assert_eq!(lines.next().unwrap(), "output,source,noise,snr_db,offset,gain");
    assert_eq!(lines.count(), 8);
    assert!(manifest.contains("utt0001__hiss__20dB.wav,utt0001.wav,hiss.wav,20.0,"));

    for w in &wavs {
        let other = dir.path().join("b").join(w.file_name().unwrap());
        assert_eq!(fs::read(w).unwrap(), fs::read(other).unwrap());
    }
    assert_eq!(manifest, fs::read_to_string(dir.path().join("b/manifest.csv")).unwrap());
}

#[test]
fn train_validation_lists_every_problem_before_work() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("bad.toml"),
        "clean_dir = \"missing\"\nsnr_db = []\n[train]\nvariant = \"CDSK-DAE\"\nsigma = 0.5\nbatch_size = 1\n",
    )
    .unwrap();
    let start = Instant::now();
    let out = cdsk(&["train", "--config", "bad.toml"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    for needle in ["clean_dir", "noise", "snr_db", "out_dir", "batch_size", "CDSK-DAE requires"] {
        assert!(err.contains(needle), "missing {needle:?} in: {err}");
    }
    assert!(start.elapsed() < Duration::from_secs(5));
    assert!(!dir.path().join("run").exists());

    fs::write(dir.path().join("typo.toml"), "clean_dirr = \"x\"\n").unwrap();
    assert_eq!(cdsk(&["train", "--config", "typo.toml"], dir.path()).status.code(), Some(1));
}

#[test]
fn sk_dae_forces_zero_penalty_weights() {
    let dir = tempfile::tempdir().unwrap();
    corpus(dir.path(), 2);
    fs::write(dir.path().join("smoke.toml"), SMOKE_CONFIG).unwrap();
    let out = cdsk(
        &["train", "--config", "smoke.toml", "--variant", "SK-DAE", "--beta", "0.3", "--epochs", "1"],
        dir.path(),
    );
    ok(&out);
    let (_, cfg) = load_checkpoint(&dir.path().join("run/checkpoint.skda")).unwrap();
    assert_eq!(cfg.variant, Variant::SkDae);
    assert_eq!((cfg.beta, cfg.sigma), (0.0, 0.0));
    assert_eq!(cfg.epochs, 1);
}

#[test]
fn smoke_pipeline_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    corpus(d, 4);
    fs::write(d.join("smoke.toml"), SMOKE_CONFIG).unwrap();

    let start = Instant::now();
    ok(&cdsk(&["train", "--config", "smoke.toml"], d));
    assert!(start.elapsed() < Duration::from_secs(300));
    let traj = fs::read_to_string(d.join("run/trajectory.csv")).unwrap();
    assert_eq!(traj.lines().count(), 3);
    assert_eq!(traj.lines().next().unwrap(), "epoch,loss,mse,dcor_latent,dcor_output");

    // Same config again: byte-identical artifacts.
    ok(&cdsk(&["train", "--config", "smoke.toml", "--out-dir", "run2"], d));
    assert_eq!(fs::read(d.join("run/checkpoint.skda")).unwrap(), fs::read(d.join("run2/checkpoint.skda")).unwrap());
    assert_eq!(traj, fs::read_to_string(d.join("run2/trajectory.csv")).unwrap());

    ok(&cdsk(
        &["mix", "--clean", "corpus/clean", "--noise", "corpus/noise/hum.wav", "corpus/noise/band.wav", "--snr", "0,10", "--seed", "11", "--out", "mixed"],
        d,
    ));
    ok(&cdsk(&["features", "corpus/clean", "feats/clean"], d));
    ok(&cdsk(&["features", "mixed", "feats/noisy"], d));
    ok(&cdsk(&["enhance", "--checkpoint", "run/checkpoint.skda", "--input", "feats/noisy", "--out", "feats/enh"], d));

    let noisy = files_with_ext(&d.join("feats/noisy"), "dcdf");
    let enhanced = files_with_ext(&d.join("feats/enh"), "dcdf");
    assert_eq!(noisy.len(), 16);
    assert_eq!(enhanced.len(), noisy.len());
    for (n, e) in noisy.iter().zip(&enhanced) {
        assert_eq!(read_features(n).unwrap().frames().dim(), read_features(e).unwrap().frames().dim());
        assert_eq!(read_features(e).unwrap().dim(), 40);
    }

    ok(&cdsk(
        &["eval", "--enhanced", "feats/enh", "--noisy", "feats/noisy", "--clean", "feats/clean", "--manifest", "mixed/manifest.csv", "--out", "report.json", "--checkpoint-id", "smoke"],
        d,
    ));
    let report = EvalReport::read_json(&d.join("report.json")).unwrap();
    assert_eq!(report.checkpoint_id, "smoke");
    assert_eq!(report.rows.len(), 4);
    let csv = fs::read_to_string(d.join("report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);

    // The report reproduces a direct library computation on the same files.
    let load = |p: PathBuf| read_features(&p).unwrap();
    let mut triples = Vec::new();
    let mut meta = Vec::new();
    for n in &noisy {
        let name = n.file_stem().unwrap().to_string_lossy().into_owned();
        let parts: Vec<&str> = name.split("__").collect();
        let source = parts[0].to_string();
        meta.push((parts[1].to_string(), parts[2].trim_end_matches("dB").parse::<f64>().unwrap()));
        triples.push((
            load(d.join("feats/enh").join(n.file_name().unwrap())),
            load(n.clone()),
            load(d.join("feats/clean").join(format!("{source}.dcdf"))),
        ));
    }
    let items: Vec<EvalItem> = triples
        .iter()
        .zip(&meta)
        .map(|((e, n, c), (noise, snr))| EvalItem {
            noise_type: noise,
            snr_db: *snr,
            enhanced: e,
            noisy: n,
            clean: c,
        })
        .collect();
    assert_eq!(feature_mse_report(&items, 0).unwrap(), report.rows);
}

fn write_csv_features(path: &Path, frames: Array2<f64>) {
    write_features_csv(path, &FeatureMatrix::raw(frames).unwrap()).unwrap();
}

#[test]
fn dcor_command_values() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    corpus(d, 2);
    ok(&cdsk(&["features", "corpus/clean", "feats"], d));

    let same = cdsk(&["dcor", "feats/utt0000.dcdf", "feats/utt0000.dcdf"], d);
    ok(&same);
    assert_eq!(String::from_utf8_lossy(&same.stdout).trim(), "1.0");

    write_csv_features(&d.join("const.csv"), Array2::from_elem((98, 40), 0.25));
    let constant = cdsk(&["dcor", "feats/utt0000.dcdf", "const.csv"], d);
    ok(&constant);
    assert_eq!(String::from_utf8_lossy(&constant.stdout).trim(), "0.0");

    let other = cdsk(&["dcor", "feats/utt0000.dcdf", "feats/utt0001.dcdf", "--max-frames", "40", "--seed", "3"], d);
    ok(&other);
    let printed: f64 = String::from_utf8_lossy(&other.stdout).trim().parse().unwrap();
    let a = read_features(&d.join("feats/utt0000.dcdf")).unwrap();
    let b = read_features(&d.join("feats/utt0001.dcdf")).unwrap();
    assert_eq!(printed, signal_dcor(a.frames(), b.frames(), 40, 3).unwrap());

    assert_eq!(cdsk(&["dcor", "nope.dcdf", "feats/utt0000.dcdf"], d).status.code(), Some(1));
}

#[test]
fn exit_codes_for_usage() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(cdsk(&["bogus"], dir.path()).status.code(), Some(1));
    assert_eq!(cdsk(&["--help"], dir.path()).status.code(), Some(0));
    assert_eq!(
        cdsk(&["mix", "--clean", "nowhere", "--noise", "n.wav", "--out", "o"], dir.path()).status.code(),
        Some(1)
    );
}
