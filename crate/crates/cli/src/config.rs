//! Experiment configuration: a TOML tree whose defaults mirror the evaluation
//! protocol (SNR grid, switch-count grid, VAD conditions, strategies, six
//! utterance/noise pairings of about 13 s each).

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use occbeam::beamform::Strategy;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub duration_s: f64,
    pub out_dir: Option<PathBuf>,
    pub grid: GridConfig,
    pub speech: SpeechConfig,
    pub noise: NoiseConfig,
    pub occlusion: OcclusionConfig,
    pub vad: VadConfig,
    pub processing: ProcessingConfig,
    pub wola: WolaSection,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub snr_db: Vec<f64>,
    pub switches: Vec<usize>,
    /// "oracle" and/or "fn" (false negatives at `vad.false_negative_rate`).
    pub vad: Vec<String>,
    pub strategies: Vec<String>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            snr_db: vec![0.0, 5.0, 10.0],
            switches: vec![2, 8, 24, 48],
            vad: vec!["oracle".into(), "fn".into()],
            strategies: vec!["adaptive".into(), "switching".into(), "hybrid".into()],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SpeechConfig {
    /// Number of bundled synthetic utterances (used when `wav_paths` is empty).
    pub utterances: usize,
    /// User-supplied mono 16 kHz WAV files; overrides the synthetic set.
    pub wav_paths: Vec<PathBuf>,
}

impl Default for SpeechConfig {
    fn default() -> Self {
        Self { utterances: 3, wav_paths: Vec::new() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub seeds: usize,
    pub wave_count: usize,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self { seeds: 2, wave_count: 256 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct OcclusionConfig {
    pub speech_cutoff_hz: f64,
    pub noise_cutoff_hz: f64,
    pub depth_db: f64,
    pub min_segment_frames: usize,
}

impl Default for OcclusionConfig {
    fn default() -> Self {
        Self {
            speech_cutoff_hz: 800.0,
            noise_cutoff_hz: 1500.0,
            depth_db: 20.0,
            min_segment_frames: 10,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct VadConfig {
    pub threshold_db: f64,
    pub false_negative_rate: f64,
}

impl Default for VadConfig {
    fn default() -> Self {
        Self { threshold_db: 40.0, false_negative_rate: 0.05 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ProcessingConfig {
    pub loading: f64,
    pub gevd_iterations: usize,
    pub forgetting_noisy_s: f64,
    pub forgetting_noise_s: f64,
    pub divergence_limit: f64,
}

impl Default for ProcessingConfig {
    fn default() -> Self {
        Self {
            loading: 1e-4,
            gevd_iterations: 2,
            forgetting_noisy_s: 0.3,
            forgetting_noise_s: 0.5,
            divergence_limit: 1e3,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct WolaSection {
    pub sample_rate_hz: u32,
    pub frame_len: usize,
    pub hop: usize,
}

impl Default for WolaSection {
    fn default() -> Self {
        Self { sample_rate_hz: 16_000, frame_len: 256, hop: 64 }
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            duration_s: 13.0,
            out_dir: None,
            grid: GridConfig::default(),
            speech: SpeechConfig::default(),
            noise: NoiseConfig::default(),
            occlusion: OcclusionConfig::default(),
            vad: VadConfig::default(),
            processing: ProcessingConfig::default(),
            wola: WolaSection::default(),
        }
    }
}

/// One of the VAD evaluation conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum VadCondition {
    Oracle,
    FalseNegatives,
}

impl VadCondition {
    pub fn label(&self) -> &'static str {
        match self {
            VadCondition::Oracle => "oracle",
            VadCondition::FalseNegatives => "fn",
        }
    }
}

impl ExperimentConfig {
    /// `"default"` loads built-in defaults; anything else is a TOML path.
    pub fn load(spec: &str) -> anyhow::Result<Self> {
        let cfg = if spec == "default" {
            Self::default()
        } else {
            let text = std::fs::read_to_string(Path::new(spec))
                .with_context(|| format!("reading config {spec}"))?;
            toml::from_str(&text).with_context(|| format!("parsing config {spec}"))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.grid.snr_db.is_empty()
            || self.grid.switches.is_empty()
            || self.grid.vad.is_empty()
            || self.grid.strategies.is_empty()
        {
            bail!("all grid dimensions must be nonempty");
        }
        if self.speech.wav_paths.is_empty() && self.speech.utterances == 0 {
            bail!("need at least one utterance");
        }
        if self.noise.seeds == 0 {
            bail!("need at least one noise seed");
        }
        if self.duration_s < 1.0 {
            bail!("duration_s must be at least 1 s");
        }
        self.vad_conditions()?;
        self.strategies()?;
        Ok(())
    }

    pub fn vad_conditions(&self) -> anyhow::Result<Vec<VadCondition>> {
        self.grid
            .vad
            .iter()
            .map(|s| match s.as_str() {
                "oracle" => Ok(VadCondition::Oracle),
                "fn" => Ok(VadCondition::FalseNegatives),
                other => bail!("unknown vad condition '{other}' (use \"oracle\" or \"fn\")"),
            })
            .collect()
    }

    pub fn strategies(&self) -> anyhow::Result<Vec<Strategy>> {
        self.grid
            .strategies
            .iter()
            .map(|s| s.parse::<Strategy>().map_err(anyhow::Error::from))
            .collect()
    }

    /// Number of utterance sources (synthetic or WAV).
    pub fn utterance_count(&self) -> usize {
        if self.speech.wav_paths.is_empty() {
            self.speech.utterances
        } else {
            self.speech.wav_paths.len()
        }
    }

    pub fn utterance_label(&self, idx: usize) -> String {
        if self.speech.wav_paths.is_empty() {
            format!("u{idx}")
        } else {
            self.speech.wav_paths[idx]
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| format!("u{idx}"))
        }
    }

    /// Output directory: explicit config value, then `OCCBEAM_OUT`, then
    /// `./occbeam-out`.
    pub fn resolve_out_dir(&self, cli_out: Option<&Path>) -> PathBuf {
        if let Some(p) = cli_out {
            return p.to_path_buf();
        }
        if let Some(p) = &self.out_dir {
            return p.clone();
        }
        if let Ok(p) = std::env::var("OCCBEAM_OUT") {
            return PathBuf::from(p);
        }
        PathBuf::from("occbeam-out")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid_and_matches_protocol() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.grid.snr_db, vec![0.0, 5.0, 10.0]);
        assert_eq!(cfg.grid.switches, vec![2, 8, 24, 48]);
        assert_eq!(cfg.utterance_count(), 3);
        assert_eq!(cfg.noise.seeds, 2);
        assert_eq!(cfg.vad.false_negative_rate, 0.05);
    }

    #[test]
    fn toml_roundtrip_preserves_config() {
        let cfg = ExperimentConfig::default();
        let text = toml::to_string_pretty(&cfg).unwrap();
        let back: ExperimentConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_toml_fills_defaults() {
        let cfg: ExperimentConfig = toml::from_str(
            r#"
            seed = 7
            [grid]
            snr_db = [5.0]
            "#,
        )
        .unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.grid.snr_db, vec![5.0]);
        assert_eq!(cfg.grid.switches, vec![2, 8, 24, 48]);
    }

    #[test]
    fn unknown_vad_condition_rejected() {
        let mut cfg = ExperimentConfig::default();
        cfg.grid.vad = vec!["psychic".into()];
        assert!(cfg.validate().is_err());
    }
}
