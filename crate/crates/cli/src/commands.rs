//! Implementations of the CLI subcommands.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};

use occbeam::beamform::{process, Strategy};
use occbeam::detect::FrameFlags;
use occbeam::wav;
use occbeam::wola::{analyze, synthesize, TimeSignal};

use crate::config::ExperimentConfig;
use crate::plotdata;
use crate::runner::{run_experiment, BaseScene, EvalContext, OccludedScene};

/// Builds one scene and writes its WAVs, flag streams, and metadata.
pub fn simulate(
    config: &str,
    utterance: usize,
    noise: usize,
    switches: usize,
    snr_db: f64,
    seed: Option<u64>,
    out: Option<&Path>,
) -> anyhow::Result<PathBuf> {
    let mut cfg = ExperimentConfig::load(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let out_dir = cfg.resolve_out_dir(out);
    let ctx = EvalContext::new(cfg)?;
    if utterance >= ctx.cfg.utterance_count() {
        bail!("utterance index {utterance} out of range (have {})", ctx.cfg.utterance_count());
    }
    if noise >= ctx.cfg.noise.seeds {
        bail!("noise index {noise} out of range (have {})", ctx.cfg.noise.seeds);
    }
    let noise_spec = std::sync::Arc::new(crate::runner::build_noise(&ctx, noise)?);
    let base = BaseScene::build(&ctx, utterance, noise_spec, noise)?;
    let occluded = OccludedScene::build(&ctx, &base, utterance, noise, switches)?;
    let scene = occluded.mix(&ctx, &base, snr_db)?;

    std::fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;
    wav::write(&out_dir.join("noisy.wav"), &scene.noisy_t)?;
    wav::write(&out_dir.join("speech.wav"), &scene.speech_occ_t)?;
    wav::write(&out_dir.join("noise.wav"), &scene.noise_scaled_t)?;
    let flags = FrameFlags::new(scene.vad_oracle.clone(), scene.od.clone())?;
    std::fs::write(out_dir.join("flags.csv"), flags.to_csv())?;
    let flags_fn = FrameFlags::new(scene.vad_fn.clone(), scene.od.clone())?;
    std::fs::write(out_dir.join("flags_fn.csv"), flags_fn.to_csv())?;
    let meta = format!(
        "utterance = {utterance}\nnoise = {noise}\nswitches = {switches}\nsnr_db = {snr_db}\nseed = {}\nnoise_gain = {:.12e}\n",
        ctx.cfg.seed, scene.gain
    );
    std::fs::write(out_dir.join("scene.toml"), meta)?;
    Ok(out_dir)
}

/// Enhances a simulated scene directory (noisy.wav + flags.csv) with one
/// strategy and writes the output WAV, padded to the input duration.
#[allow(clippy::too_many_arguments)]
pub fn enhance(
    scene_dir: &Path,
    strategy: &str,
    reference: &str,
    config: &str,
    corrupted_vad: bool,
    dump_weights: bool,
    seed: Option<u64>,
    out: Option<&Path>,
) -> anyhow::Result<PathBuf> {
    let strategy: Strategy = strategy.parse()?;
    let mut cfg = ExperimentConfig::load(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let ctx = EvalContext::new(cfg)?;
    let apriori = match reference {
        "left" => &ctx.apriori_left,
        "right" => &ctx.apriori_right,
        other => bail!("unknown reference '{other}' (use left or right)"),
    };

    let noisy_t = wav::read_multichannel(&scene_dir.join("noisy.wav"))?;
    let flags_name = if corrupted_vad { "flags_fn.csv" } else { "flags.csv" };
    let flags_text = std::fs::read_to_string(scene_dir.join(flags_name))
        .with_context(|| format!("reading {}", scene_dir.join(flags_name).display()))?;
    let flags = FrameFlags::from_csv(&flags_text)?;

    let noisy = analyze(&noisy_t, &ctx.wola)?;
    if flags.len() != noisy.frames() {
        bail!("flags cover {} frames but the scene has {}", flags.len(), noisy.frames());
    }
    let result = process(&noisy, &flags, apriori, &ctx.strategy_config(strategy))?;
    let enhanced = synthesize(&result.enhanced, &ctx.wola)?;
    let mut padded = TimeSignal::zeros(1, noisy_t.len(), noisy_t.sample_rate_hz);
    for i in 0..enhanced.len().min(noisy_t.len()) {
        padded.samples[(0, i)] = enhanced.samples[(0, i)];
    }

    let out_path = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| scene_dir.join(format!("enhanced_{}.wav", strategy.name())));
    wav::write(&out_path, &padded)?;
    if dump_weights {
        let weights_path = out_path.with_extension("weights.bin");
        std::fs::write(&weights_path, result.weights.to_bytes())?;
    }
    Ok(out_path)
}

/// Runs the full evaluation grid and writes results.csv / timings.csv.
pub fn evaluate(config: &str, seed: Option<u64>, out: Option<&Path>) -> anyhow::Result<PathBuf> {
    let mut cfg = ExperimentConfig::load(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let out_dir = cfg.resolve_out_dir(out);
    let outputs = run_experiment(cfg, &out_dir)?;
    println!(
        "wrote {} data rows to {}",
        outputs.rows.len(),
        outputs.results_path.display()
    );
    Ok(outputs.results_path)
}

/// Converts a results CSV into plot-ready JSON.
pub fn plotdata_cmd(csv: &Path, out: Option<&Path>) -> anyhow::Result<PathBuf> {
    let out_path = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| csv.with_file_name("plotdata.json"));
    plotdata::emit_plotdata(csv, &out_path)?;
    Ok(out_path)
}
