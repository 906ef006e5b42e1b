use std::fs;
use std::path::{Path, PathBuf};

use cdsk::eval::{feature_mse_report, signal_dcor, training_trajectory_csv, EvalItem, EvalReport};
use cdsk::features::io::{read_features, read_matrix_csv, read_wav, write_features, write_features_csv, write_wav};
use cdsk::features::{
    mix_at_snr, stack_context_with_radius, AnalysisConfig, ContextWindowBatch, FeatureMatrix, LogMelExtractor, Mixture,
    Utterance, CONTEXT_RADIUS,
};
use cdsk::seed::derive;
use cdsk::skdae::{enhance, load_checkpoint, save_checkpoint, train, SkDaeModel};
use cdsk::synthetic::{self, NoiseKind};
use log::{debug, error, info, warn};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::failure::{CmdResult, Failure};
use crate::files::{file_name, list_with_extension, stem};

pub const MANIFEST_NAME: &str = "manifest.csv";
pub const CHECKPOINT_NAME: &str = "checkpoint.skda";
pub const TRAJECTORY_NAME: &str = "trajectory.csv";

/// One row of the mixing manifest. Paths are file names relative to the
/// directories they live in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub output: String,
    pub source: String,
    pub noise: String,
    pub snr_db: f64,
    pub offset: usize,
    pub gain: f64,
}

fn require_dir(path: &Path, what: &str) -> CmdResult {
    if path.is_dir() {
        Ok(())
    } else {
        Err(Failure::validation(format!("{what} {} is not a directory", path.display())))
    }
}

fn extractor() -> LogMelExtractor {
    LogMelExtractor::new(AnalysisConfig::default()).expect("default analysis config is valid")
}

/// Runs `f` on every item, logging failures; errors out at the end if any failed.
fn for_each_file<T>(items: &[T], label: impl Fn(&T) -> String, mut f: impl FnMut(&T) -> cdsk::Result<()>) -> CmdResult {
    let mut failed = Vec::new();
    for it in items {
        if let Err(e) = f(it) {
            error!("{}: {e}", label(it));
            failed.push(label(it));
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Runtime(format!(
            "{} of {} file(s) failed: {}",
            failed.len(),
            items.len(),
            failed.join(", ")
        )))
    }
}

pub fn cmd_features(audio_dir: &Path, out_dir: &Path, raw: bool, csv: bool) -> CmdResult {
    require_dir(audio_dir, "audio dir")?;
    let (wavs, skipped) = list_with_extension(audio_dir, "wav")?;
    for s in &skipped {
        warn!("skipping non-WAV file {}", s.display());
    }
    if wavs.is_empty() {
        warn!("no WAV files in {}", audio_dir.display());
        return Ok(());
    }
    fs::create_dir_all(out_dir)?;
    let ex = extractor();
    for_each_file(&wavs, |p| p.display().to_string(), |path| {
        let mut feats = ex.extract(&read_wav(path)?)?;
        if !raw {
            feats = feats.normalize()?;
        }
        write_features(&out_dir.join(format!("{}.dcdf", stem(path))), &feats)?;
        if csv {
            write_features_csv(&out_dir.join(format!("{}.csv", stem(path))), &feats)?;
        }
        debug!("{} -> {} frames", path.display(), feats.num_frames());
        Ok(())
    })?;
    info!("wrote {} feature file(s) to {}", wavs.len(), out_dir.display());
    Ok(())
}

fn snr_label(snr: f64) -> String {
    format!("{snr}dB")
}

/// Name of the mixture of `clean` with `noise` at `snr`.
pub fn mixture_name(clean: &Path, noise: &Path, snr: f64) -> String {
    format!("{}__{}__{}.wav", stem(clean), stem(noise), snr_label(snr))
}

/// Seed of the `index`-th mixture in clean × noise × SNR order.
fn mix_seed(seed: u64, index: usize) -> u64 {
    derive(seed, "mix", index as u64)
}

fn load_noises(noise_files: &[PathBuf]) -> Result<Vec<Utterance>, Failure> {
    noise_files
        .iter()
        .map(|p| read_wav(p).map_err(|e| Failure::Runtime(format!("{}: {e}", p.display()))))
        .collect()
}

pub fn cmd_mix(clean_dir: &Path, noise_files: &[PathBuf], snrs: &[f64], seed: u64, out_dir: &Path) -> CmdResult {
    let mut problems = Vec::new();
    if !clean_dir.is_dir() {
        problems.push(format!("clean dir {} is not a directory", clean_dir.display()));
    }
    if noise_files.is_empty() {
        problems.push("at least one noise file is required".into());
    }
    for n in noise_files {
        if !n.is_file() {
            problems.push(format!("noise file {} does not exist", n.display()));
        }
    }
    if snrs.is_empty() {
        problems.push("SNR list is empty".into());
    }
    if !problems.is_empty() {
        return Err(Failure::Validation(problems));
    }

    let (cleans, skipped) = list_with_extension(clean_dir, "wav")?;
    for s in &skipped {
        warn!("skipping non-WAV file {}", s.display());
    }
    let noises = load_noises(noise_files)?;
    fs::create_dir_all(out_dir)?;

    let mut rows = Vec::new();
    let mut failed = Vec::new();
    let per_clean = noise_files.len() * snrs.len();
    for (ci, clean_path) in cleans.iter().enumerate() {
        let clean = match read_wav(clean_path) {
            Ok(u) => u,
            Err(e) => {
                error!("{}: {e}", clean_path.display());
                failed.push(clean_path.display().to_string());
                continue;
            }
        };
        for (ni, (noise_path, noise)) in noise_files.iter().zip(&noises).enumerate() {
            for (si, &snr) in snrs.iter().enumerate() {
                let index = ci * per_clean + ni * snrs.len() + si;
                let name = mixture_name(clean_path, noise_path, snr);
                let result = mix_at_snr(&clean, noise, snr, mix_seed(seed, index))
                    .and_then(|m| write_wav(&out_dir.join(&name), &m.mixed).map(|_| m));
                match result {
                    Ok(m) => rows.push(ManifestRow {
                        output: name,
                        source: file_name(clean_path),
                        noise: file_name(noise_path),
                        snr_db: snr,
                        offset: m.noise_offset,
                        gain: m.gain,
                    }),
                    Err(e) => {
                        error!("{} + {} @ {snr} dB: {e}", clean_path.display(), noise_path.display());
                        failed.push(name);
                    }
                }
            }
        }
    }

    let mut w = csv::Writer::from_path(out_dir.join(MANIFEST_NAME))?;
    for r in &rows {
        w.serialize(r)?;
    }
    if rows.is_empty() {
        w.write_record(["output", "source", "noise", "snr_db", "offset", "gain"])?;
    }
    w.flush()?;
    info!("wrote {} mixture(s) and {MANIFEST_NAME} to {}", rows.len(), out_dir.display());
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Runtime(format!("{} mixture(s) failed: {}", failed.len(), failed.join(", "))))
    }
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRow>, Failure> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
    r.deserialize()
        .collect::<Result<Vec<ManifestRow>, _>>()
        .map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

/// Flag values that take precedence over the config file.
#[derive(Debug, Default)]
pub struct TrainOverrides {
    pub clean_dir: Option<PathBuf>,
    pub noise_files: Vec<PathBuf>,
    pub snr_db: Option<Vec<f64>>,
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub variant: Option<String>,
    pub beta: Option<f64>,
    pub sigma: Option<f64>,
    pub lr: Option<f64>,
    pub batch_size: Option<usize>,
    pub epochs: Option<usize>,
}

pub fn cmd_train(config: Option<&Path>, ov: TrainOverrides) -> CmdResult {
    let mut cfg = match config {
        Some(p) => RunConfig::load(p).map_err(Failure::validation)?,
        None => RunConfig::default(),
    };
    if ov.clean_dir.is_some() {
        cfg.clean_dir = ov.clean_dir;
    }
    if !ov.noise_files.is_empty() {
        cfg.noise_dir = None;
        cfg.noise_files = ov.noise_files;
    }
    if let Some(s) = ov.snr_db {
        cfg.snr_db = s;
    }
    if ov.out_dir.is_some() {
        cfg.out_dir = ov.out_dir;
    }
    cfg.seed = ov.seed.or(cfg.seed);
    let t = &mut cfg.train;
    t.variant = ov.variant.or(t.variant.take());
    t.beta = ov.beta.or(t.beta);
    t.sigma = ov.sigma.or(t.sigma);
    t.lr = ov.lr.or(t.lr);
    t.batch_size = ov.batch_size.or(t.batch_size);
    t.epochs = ov.epochs.or(t.epochs);

    let run = cfg.resolve().map_err(Failure::Validation)?;
    info!(
        "{}: {} clean × {} noise × {} SNR, β={} σ={} lr={} batch={} epochs={} seed={}",
        run.train.variant,
        run.clean_files.len(),
        run.noise_files.len(),
        run.snrs_db.len(),
        run.train.beta,
        run.train.sigma,
        run.train.lr,
        run.train.batch_size,
        run.train.epochs,
        run.train.seed
    );

    let ex = extractor();
    let noises = load_noises(&run.noise_files)?;
    let per_clean = noises.len() * run.snrs_db.len();
    let mut parts = Vec::with_capacity(run.clean_files.len() * per_clean);
    for (ci, path) in run.clean_files.iter().enumerate() {
        let at = |e: cdsk::Error| Failure::Runtime(format!("{}: {e}", path.display()));
        let clean = read_wav(path).map_err(at)?;
        let target = ex.extract(&clean).and_then(|f| f.normalize()).map_err(at)?;
        for (ni, noise) in noises.iter().enumerate() {
            for (si, &snr) in run.snrs_db.iter().enumerate() {
                let index = ci * per_clean + ni * run.snrs_db.len() + si;
                let m: Mixture = mix_at_snr(&clean, noise, snr, mix_seed(run.train.seed, index)).map_err(at)?;
                let noisy = ex.extract(&m.mixed).and_then(|f| f.normalize()).map_err(at)?;
                parts.push(stack_context_with_radius(&noisy, &target, CONTEXT_RADIUS)?);
            }
        }
    }
    let data = ContextWindowBatch::concat(&parts)?;
    drop(parts);
    info!("{} training frames", data.len());

    let model = SkDaeModel::new(run.dims, derive(run.train.seed, "init", 0))?;
    let outcome = train(model, &data, &run.train)?;
    fs::create_dir_all(&run.out_dir)?;
    let ck = run.out_dir.join(CHECKPOINT_NAME);
    save_checkpoint(&outcome.model, &run.train, &ck)?;
    let traj = run.out_dir.join(TRAJECTORY_NAME);
    training_trajectory_csv(&outcome.reports, &traj)?;
    info!("wrote {} and {}", ck.display(), traj.display());
    Ok(())
}

pub fn cmd_enhance(checkpoint: &Path, input_dir: &Path, out_dir: &Path) -> CmdResult {
    let mut problems = Vec::new();
    if !checkpoint.is_file() {
        problems.push(format!("checkpoint {} does not exist", checkpoint.display()));
    }
    if !input_dir.is_dir() {
        problems.push(format!("input dir {} is not a directory", input_dir.display()));
    }
    if !problems.is_empty() {
        return Err(Failure::Validation(problems));
    }
    let (model, cfg) = load_checkpoint(checkpoint).map_err(|e| Failure::Runtime(format!("{}: {e}", checkpoint.display())))?;
    info!("loaded {} model from {}", cfg.variant, checkpoint.display());
    let (files, skipped) = list_with_extension(input_dir, "dcdf")?;
    for s in &skipped {
        warn!("skipping {}", s.display());
    }
    if files.is_empty() {
        warn!("no .dcdf feature files in {}", input_dir.display());
        return Ok(());
    }
    fs::create_dir_all(out_dir)?;
    for_each_file(&files, |p| p.display().to_string(), |path| {
        let mut noisy = read_features(path)?;
        if !noisy.is_normalized() {
            info!("{}: normalizing raw features", path.display());
            noisy = noisy.normalize()?;
        }
        let enhanced = enhance(&model, &noisy)?;
        write_features(&out_dir.join(file_name(path)), &enhanced)
    })?;
    info!("enhanced {} file(s) into {}", files.len(), out_dir.display());
    Ok(())
}

pub struct EvalArgs<'a> {
    pub enhanced_dir: &'a Path,
    pub noisy_dir: &'a Path,
    pub clean_dir: &'a Path,
    pub manifest: &'a Path,
    pub out_json: &'a Path,
    pub out_csv: Option<&'a Path>,
    pub checkpoint_id: Option<String>,
    pub corpus_id: Option<String>,
    pub seed: u64,
}

fn features_for(dir: &Path, wav_name: &str) -> Result<FeatureMatrix, Failure> {
    let path = dir.join(format!("{}.dcdf", stem(Path::new(wav_name))));
    let f = read_features(&path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
    if f.is_normalized() {
        Ok(f)
    } else {
        Ok(f.normalize()?)
    }
}

pub fn cmd_eval(a: EvalArgs<'_>) -> CmdResult {
    let mut problems = Vec::new();
    for (dir, what) in [(a.enhanced_dir, "enhanced dir"), (a.noisy_dir, "noisy dir"), (a.clean_dir, "clean dir")] {
        if !dir.is_dir() {
            problems.push(format!("{what} {} is not a directory", dir.display()));
        }
    }
    if !a.manifest.is_file() {
        problems.push(format!("manifest {} does not exist", a.manifest.display()));
    }
    if !problems.is_empty() {
        return Err(Failure::Validation(problems));
    }

    let rows = read_manifest(a.manifest)?;
    let mut loaded = Vec::with_capacity(rows.len());
    for r in &rows {
        loaded.push((
            features_for(a.enhanced_dir, &r.output)?,
            features_for(a.noisy_dir, &r.output)?,
            features_for(a.clean_dir, &r.source)?,
        ));
    }
    let noise_types: Vec<String> = rows.iter().map(|r| stem(Path::new(&r.noise))).collect();
    let items: Vec<EvalItem> = rows
        .iter()
        .zip(&loaded)
        .zip(&noise_types)
        .map(|((r, (enhanced, noisy, clean)), noise_type)| EvalItem {
            noise_type,
            snr_db: r.snr_db,
            enhanced,
            noisy,
            clean,
        })
        .collect();
    let report = EvalReport {
        checkpoint_id: a.checkpoint_id.unwrap_or_else(|| file_name(a.enhanced_dir)),
        corpus_id: a.corpus_id.unwrap_or_else(|| file_name(a.manifest.parent().unwrap_or(Path::new("")))),
        rows: feature_mse_report(&items, a.seed)?,
    };
    report.write_json(a.out_json)?;
    let csv_path = a
        .out_csv
        .map(Path::to_path_buf)
        .unwrap_or_else(|| a.out_json.with_extension("csv"));
    report.write_csv(&csv_path)?;
    for r in &report.rows {
        info!(
            "{:>12} {:>6} dB  mse enhanced {:.4}  noisy {:.4}  dcor {:.4}",
            r.noise_type, r.snr_db, r.mse_enhanced, r.mse_noisy, r.dcor_enhanced_clean
        );
    }
    info!("wrote {} and {}", a.out_json.display(), csv_path.display());
    Ok(())
}

fn load_frames(path: &Path) -> Result<Array2<f64>, Failure> {
    if !path.is_file() {
        return Err(Failure::validation(format!("{} does not exist", path.display())));
    }
    let is_csv = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let res = if is_csv {
        read_matrix_csv(path)
    } else {
        read_features(path).map(|f| f.frames().clone())
    };
    res.map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

/// Returns the value so callers (and tests) can check what was printed.
pub fn cmd_dcor(a: &Path, b: &Path, max_frames: usize, seed: u64) -> Result<f64, Failure> {
    if max_frames < 2 {
        return Err(Failure::validation("--max-frames must be >= 2"));
    }
    let x = load_frames(a)?;
    let y = load_frames(b)?;
    let r = signal_dcor(&x, &y, max_frames, seed)?;
    println!("{r:?}");
    Ok(r)
}

pub fn cmd_synth(out_dir: &Path, utterances: usize, seconds: f64, seed: u64) -> CmdResult {
    if utterances == 0 || !(seconds >= 0.05) {
        return Err(Failure::validation("need at least one utterance of at least 0.05 s"));
    }
    let len = (seconds * synthetic::SAMPLE_RATE as f64).round() as usize;
    let clean_dir = out_dir.join("clean");
    let noise_dir = out_dir.join("noise");
    fs::create_dir_all(&clean_dir)?;
    fs::create_dir_all(&noise_dir)?;
    for i in 0..utterances {
        let u = synthetic::speech(len, derive(seed, "speech", i as u64));
        write_wav(&clean_dir.join(format!("utt{i:04}.wav")), &u)?;
    }
    for (i, kind) in NoiseKind::ALL.iter().enumerate() {
        let n = synthetic::noise(*kind, 3 * len, derive(seed, "noise", i as u64));
        write_wav(&noise_dir.join(format!("{}.wav", kind.name())), &n)?;
    }
    info!(
        "wrote {utterances} clean utterance(s) to {} and {} noise file(s) to {}",
        clean_dir.display(),
        NoiseKind::ALL.len(),
        noise_dir.display()
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mixture_names_are_stable() {
        assert_eq!(
            mixture_name(Path::new("a/utt1.wav"), Path::new("n/babble.wav"), 5.0),
            "utt1__babble__5dB.wav"
        );
        assert_eq!(mixture_name(Path::new("x.wav"), Path::new("y.wav"), -2.5), "x__y__-2.5dB.wav");
    }

    #[test]
    fn dcor_rejects_tiny_sample() {
        assert!(matches!(
            cmd_dcor(Path::new("a"), Path::new("b"), 1, 0),
            Err(Failure::Validation(_))
        ));
    }
}
