//! Own-voice source material and its propagation to the array.
//!
//! Scenes can use a bundled synthetic utterance generator or a user-supplied
//! mono WAV. The generator produces voiced segments from a pulse-train
//! source through formant resonators, separated by true silence so the VAD
//! has both states to work with.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::wola::Spectrogram;

/// Two-pole resonator (formant) filter.
struct Resonator {
    b0: f64,
    a1: f64,
    a2: f64,
    z1: f64,
    z2: f64,
}

impl Resonator {
    fn new(freq_hz: f64, bandwidth_hz: f64, fs: f64) -> Self {
        let r = (-std::f64::consts::PI * bandwidth_hz / fs).exp();
        let theta = 2.0 * std::f64::consts::PI * freq_hz / fs;
        Self {
            b0: (1.0 - r * r) * 0.5,
            a1: 2.0 * r * theta.cos(),
            a2: -r * r,
            z1: 0.0,
            z2: 0.0,
        }
    }

    fn tick(&mut self, x: f64) -> f64 {
        let y = self.b0 * x + self.a1 * self.z1 + self.a2 * self.z2;
        self.z2 = self.z1;
        self.z1 = y;
        y
    }
}

/// Synthesizes a speech-like mono utterance: voiced bursts (glottal pulse
/// train through three formant resonators, with pitch drift) alternating with
/// silent pauses, normalized to 0.1 RMS over the voiced part.
pub fn synth_utterance(seed: u64, duration_s: f64, sample_rate_hz: u32) -> Vec<f64> {
    let fs = sample_rate_hz as f64;
    let n = (duration_s * fs).round() as usize;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut out = vec![0.0f64; n];

    let f0_base = 105.0 + rng.gen::<f64>() * 90.0;
    let fade = (0.015 * fs) as usize;

    let mut pos = 0usize;
    // Lead-in pause so the first frames are silent.
    pos += (fs * (0.15 + rng.gen::<f64>() * 0.2)) as usize;
    while pos < n {
        let voiced_len = (fs * (0.45 + rng.gen::<f64>() * 0.75)) as usize;
        let end = (pos + voiced_len).min(n);

        let f0_seg = f0_base * (0.9 + rng.gen::<f64>() * 0.25);
        let drift = (rng.gen::<f64>() - 0.5) * 0.1;
        let f1 = 320.0 + rng.gen::<f64>() * 530.0;
        let f2 = 950.0 + rng.gen::<f64>() * 1350.0;
        let f3 = 2500.0 + rng.gen::<f64>() * 700.0;
        let mut formants = [
            Resonator::new(f1, 90.0, fs),
            Resonator::new(f2, 120.0, fs),
            Resonator::new(f3, 170.0, fs),
        ];

        let mut phase = 0.0f64;
        let mut tilt = 0.0f64;
        let len = end - pos;
        for i in 0..len {
            let frac = i as f64 / len.max(1) as f64;
            let f0 = f0_seg * (1.0 + drift * frac + 0.02 * (2.0 * std::f64::consts::PI * 4.5 * frac).sin());
            phase += f0 / fs;
            let mut pulse = 0.0;
            if phase >= 1.0 {
                phase -= 1.0;
                pulse = 1.0;
            }
            pulse += 0.01 * (rng.gen::<f64>() - 0.5); // aspiration noise
            // Glottal spectral tilt via a leaky integrator.
            tilt = 0.97 * tilt + pulse;
            let mut y = 0.0;
            for fmt in formants.iter_mut() {
                y += fmt.tick(tilt);
            }
            let env = segment_envelope(i, len, fade);
            out[pos + i] = y * env;
        }

        pos = end + (fs * (0.25 + rng.gen::<f64>() * 0.4)) as usize;
    }

    // Normalize RMS over nonzero samples.
    let (sum_sq, count) = out
        .iter()
        .filter(|v| **v != 0.0)
        .fold((0.0f64, 0usize), |(s, c), v| (s + v * v, c + 1));
    if count > 0 {
        let scale = 0.1 / (sum_sq / count as f64).sqrt();
        for v in &mut out {
            *v *= scale;
        }
    }
    out
}

fn segment_envelope(i: usize, len: usize, fade: usize) -> f64 {
    let ramp = |x: usize| 0.5 - 0.5 * (std::f64::consts::PI * x as f64 / fade as f64).cos();
    if i < fade {
        ramp(i)
    } else if i + fade > len {
        ramp(len - i)
    } else {
        1.0
    }
}

/// Slow random variation of the true per-microphone responses while talking.
/// The multiplicative transfer model is an idealization; a real mouth changes
/// shape with every phoneme, so the effective transfer functions wobble
/// around their nominal values, more strongly at high frequencies.
#[derive(Debug, Clone, Copy)]
pub struct ArticulationJitter {
    /// RMS relative deviation at the top of the band.
    pub sigma: f64,
    /// Correlation time of the wobble in seconds.
    pub corr_time_s: f64,
}

impl ArticulationJitter {
    pub fn is_active(&self) -> bool {
        self.sigma > 0.0 && self.corr_time_s > 0.0
    }
}

/// Propagation with articulation jitter: each microphone's response is
/// `h_m(k) · (1 + ε_m(t,k))` where `ε` is a slow complex perturbation with
/// RMS `σ·(0.3 + 0.7·f/f_nyq)`. With no active jitter this reduces exactly
/// to [`propagate_rtf`].
pub fn propagate_rtf_jittered(
    mono: &Spectrogram,
    rtf: &[Vec<Complex64>],
    jitter: Option<ArticulationJitter>,
    hop_s: f64,
    seed: u64,
) -> Result<Spectrogram> {
    let jitter = match jitter {
        Some(j) if j.is_active() => j,
        _ => return propagate_rtf(mono, rtf),
    };
    if mono.channels() != 1 {
        return Err(Error::DimensionMismatch(format!(
            "expected a mono spectrogram, got {} channels",
            mono.channels()
        )));
    }
    if rtf.len() != mono.bins() {
        return Err(Error::DimensionMismatch(format!(
            "RTF has {} bins, spectrogram {}",
            rtf.len(),
            mono.bins()
        )));
    }
    let mics = rtf[0].len();
    let bins = mono.bins();
    let frames = mono.frames();
    let rho = (-hop_s / jitter.corr_time_s).exp();
    let innovation_scale = (1.0 - rho * rho).sqrt();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut state: Vec<(f64, f64)> = (0..mics)
        .map(|_| {
            (
                rng.sample::<f64, _>(rand_distr::StandardNormal),
                rng.sample::<f64, _>(rand_distr::StandardNormal),
            )
        })
        .collect();
    let band_scale: Vec<f64> = (0..bins)
        .map(|k| jitter.sigma * (0.3 + 0.7 * k as f64 / (bins - 1) as f64))
        .collect();

    let mut out = Spectrogram::zeros(frames, bins, mics);
    let rt2 = std::f64::consts::FRAC_1_SQRT_2;
    for t in 0..frames {
        for (u, v) in state.iter_mut() {
            let iu: f64 = rng.sample(rand_distr::StandardNormal);
            let iv: f64 = rng.sample(rand_distr::StandardNormal);
            *u = rho * *u + innovation_scale * iu;
            *v = rho * *v + innovation_scale * iv;
        }
        for (k, h) in rtf.iter().enumerate() {
            let s = mono.data[(t, k, 0)];
            for (m, hm) in h.iter().enumerate() {
                let (u, v) = state[m];
                let eps = Complex64::new(u * rt2, v * rt2) * band_scale[k];
                out.data[(t, k, m)] = hm * (Complex64::ONE + eps) * s;
            }
        }
    }
    Ok(out)
}

/// Propagates a single-channel spectrogram to the array by per-bin
/// multiplication with an RTF vector (multiplicative transfer model).
pub fn propagate_rtf(mono: &Spectrogram, rtf: &[Vec<Complex64>]) -> Result<Spectrogram> {
    if mono.channels() != 1 {
        return Err(Error::DimensionMismatch(format!(
            "expected a mono spectrogram, got {} channels",
            mono.channels()
        )));
    }
    if rtf.len() != mono.bins() {
        return Err(Error::DimensionMismatch(format!(
            "RTF has {} bins, spectrogram {}",
            rtf.len(),
            mono.bins()
        )));
    }
    let mics = rtf[0].len();
    let mut out = Spectrogram::zeros(mono.frames(), mono.bins(), mics);
    for t in 0..mono.frames() {
        for (k, h) in rtf.iter().enumerate() {
            let s = mono.data[(t, k, 0)];
            for (m, hm) in h.iter().enumerate() {
                out.data[(t, k, m)] = hm * s;
            }
        }
    }
    Ok(out)
}
