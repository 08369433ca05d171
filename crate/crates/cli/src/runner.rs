//! Experiment runner: builds scenes over the condition grid, runs every
//! strategy with both reference sides, and assembles deterministic CSV
//! output plus a runtime sidecar.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Context};

use occbeam::beamform::{process, shadow_apply, Strategy, StrategyConfig};
use occbeam::detect::{corrupt_vad, oracle_od, oracle_vad, FrameFlags};
use occbeam::estimation::SmoothingConfig;
use occbeam::metrics::{activity_mask, ovd_db, snr_db, MetricsReport, SideValues};
use occbeam::scene::{
    apply_occlusion, derive_seed, generate_pattern, parametric_occlusion_profile, propagate_rtf,
    snr_gain, synth_utterance, synthesize_noise, AprioriData, ArrayGeometry, Component,
    OcclusionPattern, OcclusionProfile,
};
use occbeam::wav;
use occbeam::wola::{analyze, synthesize, Spectrogram, TimeSignal, WolaConfig};

use crate::config::{ExperimentConfig, VadCondition};

/// Seed-stream tags for the deterministic seed derivation.
mod tag {
    pub const UTTERANCE: u64 = 1;
    pub const NOISE: u64 = 2;
    pub const PATTERN: u64 = 3;
    pub const VAD_FN: u64 = 4;
}

/// Everything condition-independent: geometry, windows, a-priori data per
/// reference side.
pub struct EvalContext {
    pub cfg: ExperimentConfig,
    pub wola: WolaConfig,
    pub geom: ArrayGeometry,
    pub profile: OcclusionProfile,
    pub apriori_left: AprioriData,
    pub apriori_right: AprioriData,
    pub smoothing: SmoothingConfig,
    /// Scene length in samples, aligned to full frames.
    pub n_samples: usize,
}

impl EvalContext {
    pub fn new(cfg: ExperimentConfig) -> anyhow::Result<Self> {
        cfg.validate()?;
        let wola = WolaConfig::new(cfg.wola.sample_rate_hz, cfg.wola.frame_len, cfg.wola.hop)?;
        let geom = ArrayGeometry::glasses_default();
        let profile = parametric_occlusion_profile(
            cfg.occlusion.speech_cutoff_hz,
            cfg.occlusion.noise_cutoff_hz,
            cfg.occlusion.depth_db,
            &wola,
        )?;
        let apriori_left = AprioriData::from_scene(&geom, &wola, &profile, geom.left_ref_index)?;
        let apriori_right = AprioriData::from_scene(&geom, &wola, &profile, geom.right_ref_index)?;
        let smoothing = SmoothingConfig::from_forgetting_times(
            cfg.processing.forgetting_noisy_s,
            cfg.processing.forgetting_noise_s,
            wola.hop_duration_s(),
        )?;
        let requested = (cfg.duration_s * wola.sample_rate_hz as f64).round() as usize;
        let n_samples = wola.covered_len(wola.num_frames(requested)?);
        Ok(Self {
            cfg,
            wola,
            geom,
            profile,
            apriori_left,
            apriori_right,
            smoothing,
            n_samples,
        })
    }

    pub fn strategy_config(&self, strategy: Strategy) -> StrategyConfig {
        StrategyConfig {
            strategy,
            smoothing: self.smoothing,
            loading: self.cfg.processing.loading,
            gevd_iterations: self.cfg.processing.gevd_iterations,
            divergence_limit: self.cfg.processing.divergence_limit,
        }
    }

    /// Mono speech source for one utterance slot, trimmed/padded to the scene
    /// length.
    pub fn utterance(&self, idx: usize) -> anyhow::Result<Vec<f64>> {
        let mut mono = if self.cfg.speech.wav_paths.is_empty() {
            synth_utterance(
                derive_seed(self.cfg.seed, &[tag::UTTERANCE, idx as u64]),
                self.cfg.duration_s,
                self.wola.sample_rate_hz,
            )
        } else {
            let path = &self.cfg.speech.wav_paths[idx];
            let (samples, rate) = wav::read_mono(path)?;
            if rate != self.wola.sample_rate_hz {
                bail!(
                    "{} is sampled at {rate} Hz, expected {}",
                    path.display(),
                    self.wola.sample_rate_hz
                );
            }
            samples
        };
        mono.resize(self.n_samples, 0.0);
        Ok(mono)
    }
}

/// Per-(utterance, noise-seed) base material.
pub struct BaseScene {
    pub speech_unocc: Arc<Spectrogram>,
    pub noise_unocc: Arc<Spectrogram>,
    pub vad_oracle: Vec<bool>,
    pub vad_fn: Vec<bool>,
}

impl BaseScene {
    pub fn build(
        ctx: &EvalContext,
        utt_idx: usize,
        noise_spec: Arc<Spectrogram>,
        noise_idx: usize,
    ) -> anyhow::Result<Self> {
        let mono = ctx.utterance(utt_idx)?;
        let mono_spec = analyze(&TimeSignal::from_mono(mono, ctx.wola.sample_rate_hz), &ctx.wola)?;
        let speech_unocc =
            Arc::new(propagate_rtf(&mono_spec, &ctx.apriori_left.rtf_unoccluded)?);
        let vad_oracle = oracle_vad(&speech_unocc, ctx.cfg.vad.threshold_db);
        let vad_fn = corrupt_vad(
            &vad_oracle,
            ctx.cfg.vad.false_negative_rate,
            derive_seed(ctx.cfg.seed, &[tag::VAD_FN, utt_idx as u64, noise_idx as u64]),
        )?;
        Ok(Self { speech_unocc, noise_unocc: noise_spec, vad_oracle, vad_fn })
    }
}

/// Fully mixed scene for one grid condition, ready for processing.
pub struct SceneData {
    pub noisy: Spectrogram,
    pub speech_occ: Arc<Spectrogram>,
    pub noise_occ: Arc<Spectrogram>,
    pub gain: f64,
    pub speech_occ_t: TimeSignal,
    pub noise_scaled_t: TimeSignal,
    pub noisy_t: TimeSignal,
    pub pattern: OcclusionPattern,
    pub vad_oracle: Vec<bool>,
    pub vad_fn: Vec<bool>,
    pub od: Vec<bool>,
}

/// Occluded (but unmixed) material for one (utterance, noise, switches) cell.
pub struct OccludedScene {
    pub speech_occ: Arc<Spectrogram>,
    pub noise_occ: Arc<Spectrogram>,
    pub speech_occ_t: TimeSignal,
    pub noise_occ_t: TimeSignal,
    pub pattern: OcclusionPattern,
    pub od: Vec<bool>,
}

impl OccludedScene {
    pub fn build(
        ctx: &EvalContext,
        base: &BaseScene,
        utt_idx: usize,
        noise_idx: usize,
        switches: usize,
    ) -> anyhow::Result<Self> {
        let frames = base.speech_unocc.frames();
        let pattern = generate_pattern(
            frames,
            switches,
            ctx.cfg.occlusion.min_segment_frames,
            derive_seed(
                ctx.cfg.seed,
                &[tag::PATTERN, utt_idx as u64, noise_idx as u64, switches as u64],
            ),
        )?;
        let speech_occ =
            apply_occlusion(&base.speech_unocc, &ctx.profile, &pattern, Component::Speech)?;
        let noise_occ =
            apply_occlusion(&base.noise_unocc, &ctx.profile, &pattern, Component::Noise)?;
        let speech_occ_t = synthesize(&speech_occ, &ctx.wola)?;
        let noise_occ_t = synthesize(&noise_occ, &ctx.wola)?;
        let od = oracle_od(&pattern);
        Ok(Self {
            speech_occ: Arc::new(speech_occ),
            noise_occ: Arc::new(noise_occ),
            speech_occ_t,
            noise_occ_t,
            pattern,
            od,
        })
    }

    /// Mixes at the requested SNR.
    pub fn mix(
        &self,
        ctx: &EvalContext,
        base: &BaseScene,
        snr_db: f64,
    ) -> anyhow::Result<SceneData> {
        let gain = snr_gain(&self.speech_occ_t, &self.noise_occ_t, &ctx.geom, snr_db)?;
        let noisy = self.speech_occ.add_scaled(&self.noise_occ, gain)?;
        let mut noise_scaled_t = self.noise_occ_t.clone();
        noise_scaled_t.samples.mapv_inplace(|v| v * gain);
        let noisy_t = self.speech_occ_t.add_scaled(&noise_scaled_t, 1.0)?;
        Ok(SceneData {
            noisy,
            speech_occ: self.speech_occ.clone(),
            noise_occ: self.noise_occ.clone(),
            gain,
            speech_occ_t: self.speech_occ_t.clone(),
            noise_scaled_t,
            noisy_t,
            pattern: self.pattern.clone(),
            vad_oracle: base.vad_oracle.clone(),
            vad_fn: base.vad_fn.clone(),
            od: self.od.clone(),
        })
    }
}

/// Noise signal for one seed slot (cached across the grid).
pub fn build_noise(ctx: &EvalContext, noise_idx: usize) -> anyhow::Result<Spectrogram> {
    let sig = synthesize_noise(
        &ctx.geom,
        ctx.n_samples,
        ctx.wola.sample_rate_hz,
        ctx.cfg.noise.wave_count,
        derive_seed(ctx.cfg.seed, &[tag::NOISE, noise_idx as u64]),
    )?;
    Ok(analyze(&sig, &ctx.wola)?)
}

/// One CSV row: condition key, metrics, and the measured runtime.
#[derive(Debug, Clone)]
pub struct ResultRow {
    pub utterance: String,
    pub utt_idx: usize,
    pub noise_idx: usize,
    pub snr_db: f64,
    pub switches: usize,
    pub vad: VadCondition,
    pub strategy: Strategy,
    pub metrics: MetricsReport,
    pub nose_improvement_db: SideValues,
    pub runtime_ms: f64,
}

/// Metric columns shared by the CSV writer, the aggregates, and the plot
/// data extraction.
pub const METRIC_COLUMNS: &[(&str, fn(&ResultRow) -> f64)] = &[
    ("snr_in_l", |r| r.metrics.snr_in_db.left),
    ("snr_in_r", |r| r.metrics.snr_in_db.right),
    ("snr_in", |r| r.metrics.snr_in_db.mean()),
    ("snr_out_l", |r| r.metrics.snr_out_db.left),
    ("snr_out_r", |r| r.metrics.snr_out_db.right),
    ("snr_out", |r| r.metrics.snr_out_db.mean()),
    ("snr_imp_l", |r| r.metrics.snr_improvement_db.left),
    ("snr_imp_r", |r| r.metrics.snr_improvement_db.right),
    ("snr_imp", |r| r.metrics.snr_improvement_db.mean()),
    ("ovd_l", |r| r.metrics.ovd_db.left),
    ("ovd_r", |r| r.metrics.ovd_db.right),
    ("ovd", |r| r.metrics.ovd_db.mean()),
    ("nose_imp_l", |r| r.nose_improvement_db.left),
    ("nose_imp_r", |r| r.nose_improvement_db.right),
    ("nose_imp", |r| r.nose_improvement_db.mean()),
];

pub const CSV_SCHEMA: &str = "# occbeam-results v1";

/// Runs one strategy on a scene with the given flags, evaluating both
/// reference sides and averaging.
pub fn run_strategy(
    ctx: &EvalContext,
    scene: &SceneData,
    vad: &[bool],
    strategy: Strategy,
) -> anyhow::Result<(MetricsReport, SideValues)> {
    let flags = FrameFlags::new(vad.to_vec(), scene.od.clone())?;
    let mask = activity_mask(&scene.vad_oracle, &ctx.wola, scene.speech_occ_t.len());
    let cfg = ctx.strategy_config(strategy);

    let mut snr_in = [0.0f64; 2];
    let mut snr_out = [0.0f64; 2];
    let mut ovd = [0.0f64; 2];
    let mut nose = [0.0f64; 2];
    for (side, apriori) in [(0, &ctx.apriori_left), (1, &ctx.apriori_right)] {
        let out = process(&scene.noisy, &flags, apriori, &cfg)?;
        let z_t = synthesize(&out.enhanced, &ctx.wola)?;
        let shadow_s = shadow_apply(&out.weights, &scene.speech_occ, &ctx.wola)?;
        let shadow_n = shadow_apply(&out.weights, &scene.noise_occ, &ctx.wola)?;
        let shadow_n_scaled: Vec<f64> =
            shadow_n.channel(0).iter().map(|v| v * scene.gain).collect();

        let r = apriori.ref_index;
        let speech_ref: Vec<f64> = scene.speech_occ_t.channel(r).to_vec();
        let noise_ref: Vec<f64> = scene.noise_scaled_t.channel(r).to_vec();
        snr_in[side] = snr_db(&speech_ref, &noise_ref, &mask)?;
        snr_out[side] = snr_db(shadow_s.channel(0).as_slice().unwrap(), &shadow_n_scaled, &mask)?;
        ovd[side] = ovd_db(&speech_ref, z_t.channel(0).as_slice().unwrap(), &mask)?;

        let speech_nose: Vec<f64> = scene.speech_occ_t.channel(0).to_vec();
        let noise_nose: Vec<f64> = scene.noise_scaled_t.channel(0).to_vec();
        nose[side] = snr_db(&speech_nose, &noise_nose, &mask)? - snr_in[side];
    }
    let report = MetricsReport::from_sides(
        SideValues { left: snr_in[0], right: snr_in[1] },
        SideValues { left: snr_out[0], right: snr_out[1] },
        SideValues { left: ovd[0], right: ovd[1] },
    );
    Ok((report, SideValues { left: nose[0], right: nose[1] }))
}

/// Executes the full grid. Scene groups run in parallel (with the `parallel`
/// feature); rows come back in deterministic condition order regardless of
/// scheduling.
pub fn run_grid(ctx: &EvalContext) -> anyhow::Result<Vec<ResultRow>> {
    let strategies = ctx.strategies_checked()?;
    let vad_conditions = ctx.cfg.vad_conditions()?;
    let n_utt = ctx.cfg.utterance_count();
    let n_noise = ctx.cfg.noise.seeds;

    let noise_specs: Vec<Arc<Spectrogram>> = (0..n_noise)
        .map(|i| build_noise(ctx, i).map(Arc::new))
        .collect::<anyhow::Result<_>>()?;

    struct Group {
        utt_idx: usize,
        noise_idx: usize,
        switches: usize,
    }
    let mut groups = Vec::new();
    for utt_idx in 0..n_utt {
        for noise_idx in 0..n_noise {
            for &switches in &ctx.cfg.grid.switches {
                groups.push(Group { utt_idx, noise_idx, switches });
            }
        }
    }

    let run_group = |g: &Group| -> anyhow::Result<Vec<ResultRow>> {
        let base =
            BaseScene::build(ctx, g.utt_idx, noise_specs[g.noise_idx].clone(), g.noise_idx)?;
        let occluded = OccludedScene::build(ctx, &base, g.utt_idx, g.noise_idx, g.switches)?;
        let mut rows = Vec::new();
        for &snr in &ctx.cfg.grid.snr_db {
            let scene = occluded.mix(ctx, &base, snr)?;
            for &strategy in &strategies {
                // The switching strategy ignores the VAD; run it once and
                // emit identical rows for every VAD condition.
                if strategy == Strategy::Switching {
                    let t0 = Instant::now();
                    let (metrics, nose) =
                        run_strategy(ctx, &scene, &scene.vad_oracle, strategy)?;
                    let runtime_ms = t0.elapsed().as_secs_f64() * 1e3;
                    for &vad in &vad_conditions {
                        rows.push(ResultRow {
                            utterance: ctx.cfg.utterance_label(g.utt_idx),
                            utt_idx: g.utt_idx,
                            noise_idx: g.noise_idx,
                            snr_db: snr,
                            switches: g.switches,
                            vad,
                            strategy,
                            metrics,
                            nose_improvement_db: nose,
                            runtime_ms,
                        });
                    }
                } else {
                    for &vad in &vad_conditions {
                        let stream = match vad {
                            VadCondition::Oracle => &scene.vad_oracle,
                            VadCondition::FalseNegatives => &scene.vad_fn,
                        };
                        let t0 = Instant::now();
                        let (metrics, nose) = run_strategy(ctx, &scene, stream, strategy)?;
                        rows.push(ResultRow {
                            utterance: ctx.cfg.utterance_label(g.utt_idx),
                            utt_idx: g.utt_idx,
                            noise_idx: g.noise_idx,
                            snr_db: snr,
                            switches: g.switches,
                            vad,
                            strategy,
                            metrics,
                            nose_improvement_db: nose,
                            runtime_ms: t0.elapsed().as_secs_f64() * 1e3,
                        });
                    }
                }
            }
        }
        Ok(rows)
    };

    #[cfg(feature = "parallel")]
    let per_group: Vec<anyhow::Result<Vec<ResultRow>>> = {
        use rayon::prelude::*;
        groups.par_iter().map(run_group).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let per_group: Vec<anyhow::Result<Vec<ResultRow>>> = groups.iter().map(run_group).collect();

    let mut rows = Vec::new();
    for group_rows in per_group {
        rows.extend(group_rows?);
    }
    // Deterministic condition order: utterance, noise, switches, snr, vad,
    // strategy — independent of scheduling.
    let order_of = |r: &ResultRow| {
        let snr_pos = ctx.cfg.grid.snr_db.iter().position(|s| *s == r.snr_db).unwrap_or(0);
        let sw_pos = ctx.cfg.grid.switches.iter().position(|s| *s == r.switches).unwrap_or(0);
        let vad_pos = vad_conditions.iter().position(|v| *v == r.vad).unwrap_or(0);
        let strat_pos = strategies.iter().position(|s| *s == r.strategy).unwrap_or(0);
        (r.utt_idx, r.noise_idx, sw_pos, snr_pos, vad_pos, strat_pos)
    };
    rows.sort_by_key(order_of);
    Ok(rows)
}

impl EvalContext {
    fn strategies_checked(&self) -> anyhow::Result<Vec<Strategy>> {
        let strategies = self.cfg.strategies()?;
        if strategies.is_empty() {
            bail!("no strategies configured");
        }
        Ok(strategies)
    }
}

fn format_db(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.3}")
    }
}

/// Renders the deterministic results CSV: one data row per condition plus
/// mean/std aggregate rows over the utterance/noise pairs.
pub fn results_csv(rows: &[ResultRow]) -> String {
    let mut out = String::new();
    out.push_str(CSV_SCHEMA);
    out.push('\n');
    out.push_str("kind,utterance,noise,snr_db,switches,vad,strategy");
    for (name, _) in METRIC_COLUMNS {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "data,{},n{},{},{},{},{}",
            r.utterance,
            r.noise_idx,
            format_db(r.snr_db),
            r.switches,
            r.vad.label(),
            r.strategy.name()
        ));
        for (_, get) in METRIC_COLUMNS {
            out.push(',');
            out.push_str(&format_db(get(r)));
        }
        out.push('\n');
    }

    // Aggregates over utterance/noise pairs, in first-appearance order of the
    // (switches, snr, vad, strategy) key.
    let mut keys: Vec<(usize, f64, VadCondition, Strategy)> = Vec::new();
    for r in rows {
        let key = (r.switches, r.snr_db, r.vad, r.strategy);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    for (switches, snr, vad, strategy) in keys {
        let members: Vec<&ResultRow> = rows
            .iter()
            .filter(|r| {
                r.switches == switches && r.snr_db == snr && r.vad == vad && r.strategy == strategy
            })
            .collect();
        let n = members.len() as f64;
        for kind in ["mean", "std"] {
            out.push_str(&format!(
                "{kind},all,all,{},{},{},{}",
                format_db(snr),
                switches,
                vad.label(),
                strategy.name()
            ));
            for (_, get) in METRIC_COLUMNS {
                let mean = members.iter().map(|r| get(r)).sum::<f64>() / n;
                let value = if kind == "mean" {
                    mean
                } else if members.len() < 2 {
                    0.0
                } else {
                    (members.iter().map(|r| (get(r) - mean).powi(2)).sum::<f64>() / (n - 1.0))
                        .sqrt()
                };
                out.push(',');
                out.push_str(&format_db(value));
            }
            out.push('\n');
        }
    }
    out
}

/// Runtime sidecar, kept out of the deterministic results file.
pub fn timings_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from("# occbeam-timings v1\n");
    out.push_str("utterance,noise,snr_db,switches,vad,strategy,runtime_ms\n");
    for r in rows {
        out.push_str(&format!(
            "{},n{},{},{},{},{},{:.3}\n",
            r.utterance,
            r.noise_idx,
            format_db(r.snr_db),
            r.switches,
            r.vad.label(),
            r.strategy.name(),
            r.runtime_ms
        ));
    }
    out
}

/// Outputs written by a full evaluation.
pub struct EvalOutputs {
    pub rows: Vec<ResultRow>,
    pub results_path: PathBuf,
    pub timings_path: PathBuf,
}

/// Runs the configured grid and writes `results.csv` and `timings.csv`.
pub fn run_experiment(cfg: ExperimentConfig, out_dir: &Path) -> anyhow::Result<EvalOutputs> {
    let ctx = EvalContext::new(cfg)?;
    let rows = run_grid(&ctx)?;
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating output directory {}", out_dir.display()))?;
    let results_path = out_dir.join("results.csv");
    let timings_path = out_dir.join("timings.csv");
    std::fs::write(&results_path, results_csv(&rows))
        .with_context(|| format!("writing {}", results_path.display()))?;
    std::fs::write(&timings_path, timings_csv(&rows))
        .with_context(|| format!("writing {}", timings_path.display()))?;
    Ok(EvalOutputs { rows, results_path, timings_path })
}
