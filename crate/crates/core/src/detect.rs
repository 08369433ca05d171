//! Per-frame binary detection streams: oracle VAD, oracle occlusion
//! detection, and controlled VAD corruption.
//!
//! Every adaptive update is gated by these flags; the harness exports them as
//! CSV for debugging and for driving `enhance` on simulated scenes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::scene::OcclusionPattern;
use crate::wola::Spectrogram;

/// The two per-frame gating streams.
#[derive(Debug, Clone)]
pub struct FrameFlags {
    pub vad: Vec<bool>,
    pub od: Vec<bool>,
}

impl FrameFlags {
    pub fn new(vad: Vec<bool>, od: Vec<bool>) -> Result<Self> {
        if vad.len() != od.len() {
            return Err(Error::DimensionMismatch(format!(
                "vad has {} frames, od has {}",
                vad.len(),
                od.len()
            )));
        }
        Ok(Self { vad, od })
    }

    pub fn len(&self) -> usize {
        self.vad.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vad.is_empty()
    }

    /// Serializes as `frame,vad,od` CSV rows with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("frame,vad,od\n");
        for t in 0..self.len() {
            out.push_str(&format!(
                "{},{},{}\n",
                t,
                u8::from(self.vad[t]),
                u8::from(self.od[t])
            ));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut vad = Vec::new();
        let mut od = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if i == 0 || line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 {
                return Err(Error::InvalidConfig(format!(
                    "flags CSV line {i} has {} fields, expected 3",
                    fields.len()
                )));
            }
            vad.push(fields[1].trim() == "1");
            od.push(fields[2].trim() == "1");
        }
        Self::new(vad, od)
    }
}

/// Oracle VAD on clean speech: a frame is active when its broadband energy is
/// within `threshold_db` of the loudest frame. All-silent input yields an
/// all-zero VAD.
pub fn oracle_vad(clean_speech: &Spectrogram, threshold_db: f64) -> Vec<bool> {
    let frames = clean_speech.frames();
    let energies: Vec<f64> = (0..frames).map(|t| clean_speech.frame_energy(t)).collect();
    let max = energies.iter().cloned().fold(0.0f64, f64::max);
    if max <= 0.0 {
        return vec![false; frames];
    }
    let floor = max * 10f64.powf(-threshold_db / 10.0);
    energies.iter().map(|&e| e >= floor).collect()
}

/// Flips active frames to inactive independently with the given probability.
/// Never introduces false positives.
pub fn corrupt_vad(vad: &[bool], false_negative_rate: f64, seed: u64) -> Result<Vec<bool>> {
    if !(0.0..=1.0).contains(&false_negative_rate) {
        return Err(Error::InvalidConfig(format!(
            "false negative rate {false_negative_rate} outside [0, 1]"
        )));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    Ok(vad
        .iter()
        .map(|&active| {
            // Draw for every frame so the stream is independent of the
            // pattern of active frames.
            let flip = rng.gen::<f64>() < false_negative_rate;
            active && !flip
        })
        .collect())
}

/// Ground-truth occlusion detection: a passthrough of the imposed pattern.
pub fn oracle_od(pattern: &OcclusionPattern) -> Vec<bool> {
    pattern.state_per_frame.clone()
}
