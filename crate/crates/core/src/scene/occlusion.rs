//! Occlusion transfer functions, per-frame occlusion patterns, and their
//! imposition on spectrograms.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::wola::{Spectrogram, WolaConfig};

/// Per-bin transfer functions between the occluded and unoccluded state of
/// the nose-pad microphone: `speech_tf` for the own-voice component and
/// `noise_tf` for the farfield noise component.
#[derive(Debug, Clone)]
pub struct OcclusionProfile {
    pub speech_tf: Vec<Complex64>,
    pub noise_tf: Vec<Complex64>,
}

impl OcclusionProfile {
    /// Identity profile (no occlusion effect).
    pub fn identity(bins: usize) -> Self {
        Self {
            speech_tf: vec![Complex64::ONE; bins],
            noise_tf: vec![Complex64::ONE; bins],
        }
    }

    pub fn bins(&self) -> usize {
        self.speech_tf.len()
    }

    pub fn validate(&self, cfg: &WolaConfig) -> Result<()> {
        if self.speech_tf.len() != cfg.bins() || self.noise_tf.len() != cfg.bins() {
            return Err(Error::DimensionMismatch("occlusion profile bin count".into()));
        }
        for tf in [&self.speech_tf, &self.noise_tf] {
            for v in tf {
                if !v.re.is_finite() || !v.im.is_finite() || v.norm() > 10.0 {
                    return Err(Error::InvalidConfig("occlusion transfer function out of range".into()));
                }
            }
        }
        Ok(())
    }

    /// Mean squared magnitude of the speech transfer function over bins whose
    /// center frequency falls in `[lo_hz, hi_hz)`.
    pub fn speech_band_power(&self, cfg: &WolaConfig, lo_hz: f64, hi_hz: f64) -> f64 {
        let mut sum = 0.0;
        let mut count = 0usize;
        for (k, v) in self.speech_tf.iter().enumerate() {
            let f = cfg.bin_freq_hz(k);
            if f >= lo_hz && f < hi_hz {
                sum += v.norm_sqr();
                count += 1;
            }
        }
        sum / count.max(1) as f64
    }
}

/// First-order low-pass magnitude surrogate for the occlusion transfer
/// functions, with a stop-band floor `depth_db` below unity. Speech and noise
/// components get distinct cutoffs, preserving that occlusion affects the two
/// differently.
pub fn parametric_occlusion_profile(
    speech_cutoff_hz: f64,
    noise_cutoff_hz: f64,
    depth_db: f64,
    cfg: &WolaConfig,
) -> Result<OcclusionProfile> {
    let nyquist = cfg.sample_rate_hz as f64 / 2.0;
    for c in [speech_cutoff_hz, noise_cutoff_hz] {
        if !(c > 0.0 && c < nyquist) {
            return Err(Error::InvalidConfig(format!(
                "cutoff {c} Hz outside (0, {nyquist})"
            )));
        }
    }
    let floor = 10f64.powf(-depth_db / 20.0);
    let lowpass = |cutoff: f64| -> Vec<Complex64> {
        (0..cfg.bins())
            .map(|k| {
                let f = cfg.bin_freq_hz(k);
                let mag = (1.0 + (f / cutoff).powi(2)).sqrt().recip().max(floor);
                Complex64::new(mag, 0.0)
            })
            .collect()
    };
    Ok(OcclusionProfile {
        speech_tf: lowpass(speech_cutoff_hz),
        noise_tf: lowpass(noise_cutoff_hz),
    })
}

/// Which signal component an occlusion profile applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    Speech,
    Noise,
}

/// Per-frame binary occlusion state (true = occluded).
#[derive(Debug, Clone)]
pub struct OcclusionPattern {
    pub state_per_frame: Vec<bool>,
    pub switch_count: usize,
}

impl OcclusionPattern {
    pub fn constant(frames: usize, occluded: bool) -> Self {
        Self { state_per_frame: vec![occluded; frames], switch_count: 0 }
    }

    pub fn len(&self) -> usize {
        self.state_per_frame.len()
    }

    pub fn is_empty(&self) -> bool {
        self.state_per_frame.is_empty()
    }

    pub fn transitions(&self) -> usize {
        self.state_per_frame.windows(2).filter(|w| w[0] != w[1]).count()
    }
}

/// Generates an occlusion pattern with exactly `switch_count` transitions.
/// Segment boundaries are uniformly random subject to a minimum segment
/// length; the initial state is unoccluded.
pub fn generate_pattern(
    frames: usize,
    switch_count: usize,
    min_segment_frames: usize,
    seed: u64,
) -> Result<OcclusionPattern> {
    let segments = switch_count + 1;
    if min_segment_frames == 0 || segments * min_segment_frames > frames {
        return Err(Error::InfeasiblePattern(format!(
            "{segments} segments of at least {min_segment_frames} frames do not fit in {frames}"
        )));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let extra = frames - segments * min_segment_frames;
    // Uniform composition of `extra` over `segments` parts via sorted cuts.
    let mut cuts: Vec<usize> = (0..segments - 1).map(|_| rng.gen_range(0..=extra)).collect();
    cuts.sort_unstable();
    cuts.insert(0, 0);
    cuts.push(extra);
    let mut state_per_frame = Vec::with_capacity(frames);
    let mut occluded = false;
    for s in 0..segments {
        let len = min_segment_frames + (cuts[s + 1] - cuts[s]);
        state_per_frame.extend(std::iter::repeat(occluded).take(len));
        occluded = !occluded;
    }
    debug_assert_eq!(state_per_frame.len(), frames);
    Ok(OcclusionPattern { state_per_frame, switch_count })
}

/// Multiplies channel 0 of occluded frames by the component's occlusion
/// transfer function; all other channels and frames pass through untouched.
pub fn apply_occlusion(
    spec: &Spectrogram,
    profile: &OcclusionProfile,
    pattern: &OcclusionPattern,
    component: Component,
) -> Result<Spectrogram> {
    if pattern.len() != spec.frames() {
        return Err(Error::DimensionMismatch(format!(
            "pattern has {} frames, spectrogram {}",
            pattern.len(),
            spec.frames()
        )));
    }
    if profile.bins() != spec.bins() {
        return Err(Error::DimensionMismatch(format!(
            "profile has {} bins, spectrogram {}",
            profile.bins(),
            spec.bins()
        )));
    }
    let tf = match component {
        Component::Speech => &profile.speech_tf,
        Component::Noise => &profile.noise_tf,
    };
    let mut out = spec.clone();
    for (t, &occluded) in pattern.state_per_frame.iter().enumerate() {
        if occluded {
            for (k, &g) in tf.iter().enumerate() {
                out.data[(t, k, 0)] *= g;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_depth_gives_identity_profile() {
        let cfg = WolaConfig::default_16k();
        let p = parametric_occlusion_profile(800.0, 1500.0, 0.0, &cfg).unwrap();
        assert!(p.speech_tf.iter().all(|v| *v == Complex64::ONE));
        assert!(p.noise_tf.iter().all(|v| *v == Complex64::ONE));
    }

    #[test]
    fn cutoff_bin_sits_at_minus_3_db() {
        let cfg = WolaConfig::default_16k();
        // 1000 Hz is bin-centered (bin 16); use it as the cutoff.
        let p = parametric_occlusion_profile(1000.0, 1000.0, 40.0, &cfg).unwrap();
        let db = 20.0 * p.speech_tf[16].norm().log10();
        assert!((db + 3.0103).abs() < 0.1, "cutoff magnitude {db:.3} dB");
    }

    #[test]
    fn default_profile_matches_frozen_value_at_4_khz() {
        let cfg = WolaConfig::default_16k();
        let p = parametric_occlusion_profile(800.0, 1500.0, 20.0, &cfg).unwrap();
        // 4 kHz is bin 64; first-order magnitude 1/sqrt(1 + 25).
        let got = p.speech_tf[64].norm();
        assert!((got - 0.196_116_135_138_184_04).abs() < 1e-12);
    }

    #[test]
    fn default_profile_is_lowpass_and_valid() {
        let cfg = WolaConfig::default_16k();
        let p = parametric_occlusion_profile(800.0, 1500.0, 20.0, &cfg).unwrap();
        p.validate(&cfg).unwrap();
        let low = p.speech_band_power(&cfg, 0.0, 1000.0);
        let high = p.speech_band_power(&cfg, 4000.0, 8000.0);
        assert!(low >= high);
    }

    #[test]
    fn out_of_range_cutoff_rejected() {
        let cfg = WolaConfig::default_16k();
        assert!(parametric_occlusion_profile(0.0, 1500.0, 20.0, &cfg).is_err());
        assert!(parametric_occlusion_profile(800.0, 9000.0, 20.0, &cfg).is_err());
    }

    #[test]
    fn zero_switches_gives_constant_unoccluded() {
        let p = generate_pattern(100, 0, 10, 1).unwrap();
        assert_eq!(p.transitions(), 0);
        assert!(p.state_per_frame.iter().all(|&s| !s));
    }

    #[test]
    fn two_switches_alternate_from_unoccluded() {
        let p = generate_pattern(3250, 2, 10, 5).unwrap();
        assert_eq!(p.transitions(), 2);
        assert!(!p.state_per_frame[0]);
        assert!(!p.state_per_frame[3249]);
        assert!(p.state_per_frame.iter().any(|&s| s));
    }

    #[test]
    fn many_switches_respect_minimum_segment() {
        let p = generate_pattern(3250, 48, 10, 9).unwrap();
        assert_eq!(p.transitions(), 48);
        let mut run = 1;
        let mut min_run = usize::MAX;
        for w in p.state_per_frame.windows(2) {
            if w[0] == w[1] {
                run += 1;
            } else {
                min_run = min_run.min(run);
                run = 1;
            }
        }
        min_run = min_run.min(run);
        assert!(min_run >= 10, "shortest segment {min_run}");
    }

    #[test]
    fn infeasible_pattern_rejected() {
        assert!(generate_pattern(100, 48, 10, 0).is_err());
    }

    #[test]
    fn pattern_is_deterministic_per_seed() {
        let a = generate_pattern(1000, 8, 10, 42).unwrap();
        let b = generate_pattern(1000, 8, 10, 42).unwrap();
        assert_eq!(a.state_per_frame, b.state_per_frame);
    }

    #[test]
    fn all_zero_pattern_is_identity() {
        let cfg = WolaConfig::default_16k();
        let profile = parametric_occlusion_profile(800.0, 1500.0, 20.0, &cfg).unwrap();
        let mut spec = Spectrogram::zeros(5, 129, 3);
        spec.data[(2, 10, 0)] = Complex64::new(1.0, -2.0);
        spec.data[(3, 20, 1)] = Complex64::new(0.5, 0.5);
        let pattern = OcclusionPattern::constant(5, false);
        let out = apply_occlusion(&spec, &profile, &pattern, Component::Speech).unwrap();
        assert_eq!(out.data, spec.data);
    }

    #[test]
    fn identity_profile_is_identity_for_any_pattern() {
        let cfg = WolaConfig::default_16k();
        let profile = OcclusionProfile::identity(cfg.bins());
        let mut spec = Spectrogram::zeros(6, 129, 2);
        spec.data[(1, 5, 0)] = Complex64::new(3.0, 1.0);
        let pattern = generate_pattern(6, 2, 1, 3).unwrap();
        let out = apply_occlusion(&spec, &profile, &pattern, Component::Noise).unwrap();
        assert_eq!(out.data, spec.data);
    }

    #[test]
    fn constant_half_profile_scales_channel_zero_energy() {
        let cfg = WolaConfig::default_16k();
        let profile = OcclusionProfile {
            speech_tf: vec![Complex64::new(0.5, 0.0); cfg.bins()],
            noise_tf: vec![Complex64::ONE; cfg.bins()],
        };
        let mut spec = Spectrogram::zeros(4, 129, 3);
        for t in 0..4 {
            for k in 0..129 {
                for m in 0..3 {
                    spec.data[(t, k, m)] = Complex64::new(1.0, 1.0);
                }
            }
        }
        let pattern = OcclusionPattern::constant(4, true);
        let out = apply_occlusion(&spec, &profile, &pattern, Component::Speech).unwrap();
        let e_in: f64 = (0..4).map(|t| (0..129).map(|k| spec.data[(t, k, 0)].norm_sqr()).sum::<f64>()).sum();
        let e_out: f64 = (0..4).map(|t| (0..129).map(|k| out.data[(t, k, 0)].norm_sqr()).sum::<f64>()).sum();
        assert!((e_out / e_in - 0.25).abs() < 1e-12);
        for m in 1..3 {
            for t in 0..4 {
                for k in 0..129 {
                    assert_eq!(out.data[(t, k, m)], spec.data[(t, k, m)]);
                }
            }
        }
    }
}
