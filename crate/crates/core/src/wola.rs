//! Weighted overlap-add STFT analysis and synthesis.
//!
//! Analysis windows a frame, FFTs it, and keeps the non-negative-frequency
//! bins; synthesis mirrors the spectrum, inverse-FFTs (scaled by
//! `1/fft_size`), applies the synthesis window and overlap-adds. The default
//! window pair is square-root Hann on both sides, which satisfies the
//! constant-overlap-add condition at 75% overlap, so interior samples
//! reconstruct perfectly.

use ndarray::{Array2, Array3, ArrayView1};
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::exec;

/// STFT framing parameters plus the analysis/synthesis window pair.
#[derive(Debug, Clone)]
pub struct WolaConfig {
    pub sample_rate_hz: u32,
    pub frame_len: usize,
    pub hop: usize,
    pub fft_size: usize,
    pub analysis_window: Vec<f64>,
    pub synthesis_window: Vec<f64>,
}

impl WolaConfig {
    /// Builds a config with square-root Hann windows, validating that the hop
    /// divides the frame length and that the pair overlap-adds to one.
    pub fn new(sample_rate_hz: u32, frame_len: usize, hop: usize) -> Result<Self> {
        let (analysis_window, synthesis_window) = design_windows(frame_len, hop)?;
        Ok(Self {
            sample_rate_hz,
            frame_len,
            hop,
            fft_size: frame_len,
            analysis_window,
            synthesis_window,
        })
    }

    /// 16 kHz, 16 ms frames, 75% overlap.
    pub fn default_16k() -> Self {
        Self::new(16_000, 256, 64).expect("default WOLA config is valid")
    }

    /// Number of non-negative-frequency bins (`fft_size/2 + 1`).
    pub fn bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    /// Center frequency of bin `k` in Hz.
    pub fn bin_freq_hz(&self, k: usize) -> f64 {
        k as f64 * self.sample_rate_hz as f64 / self.fft_size as f64
    }

    pub fn hop_duration_s(&self) -> f64 {
        self.hop as f64 / self.sample_rate_hz as f64
    }

    /// Frame count for a signal of `len` samples.
    pub fn num_frames(&self, len: usize) -> Result<usize> {
        if len < self.frame_len {
            return Err(Error::SignalTooShort { len, needed: self.frame_len });
        }
        Ok((len - self.frame_len) / self.hop + 1)
    }

    /// Length of the time span covered by `frames` frames.
    pub fn covered_len(&self, frames: usize) -> usize {
        if frames == 0 {
            0
        } else {
            (frames - 1) * self.hop + self.frame_len
        }
    }
}

/// Designs the square-root Hann analysis/synthesis pair, normalized so the
/// windowed overlap-add sums to exactly one.
pub fn design_windows(frame_len: usize, hop: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if frame_len == 0 || hop == 0 {
        return Err(Error::InvalidConfig("frame_len and hop must be positive".into()));
    }
    if frame_len % hop != 0 {
        return Err(Error::InvalidConfig(format!(
            "hop {hop} does not divide frame_len {frame_len}"
        )));
    }
    let shifts = frame_len / hop;
    if shifts < 2 {
        return Err(Error::InvalidConfig(
            "need at least 50% overlap for the sqrt-Hann pair".into(),
        ));
    }
    // Periodic Hann tiles to frame_len/(2*hop); scale so a*s sums to 1.
    let scale = 2.0 * hop as f64 / frame_len as f64;
    let win: Vec<f64> = (0..frame_len)
        .map(|n| {
            let hann = 0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / frame_len as f64).cos();
            (hann * scale).sqrt()
        })
        .collect();
    let err = cola_error(&win, &win, hop);
    if err > 1e-10 {
        return Err(Error::InvalidConfig(format!(
            "window pair violates constant overlap-add (error {err:.3e})"
        )));
    }
    Ok((win.clone(), win))
}

/// Largest deviation of `Σ_shifts analysis[n]·synthesis[n]` from one over a
/// fully-overlapped span.
pub fn cola_error(analysis: &[f64], synthesis: &[f64], hop: usize) -> f64 {
    let frame_len = analysis.len();
    let mut err: f64 = 0.0;
    for n in 0..hop {
        let mut sum = 0.0;
        let mut idx = n;
        while idx < frame_len {
            sum += analysis[idx] * synthesis[idx];
            idx += hop;
        }
        err = err.max((sum - 1.0).abs());
    }
    err
}

/// Multichannel time-domain signal, channels × samples.
#[derive(Debug, Clone)]
pub struct TimeSignal {
    pub samples: Array2<f64>,
    pub sample_rate_hz: u32,
}

impl TimeSignal {
    pub fn zeros(channels: usize, len: usize, sample_rate_hz: u32) -> Self {
        Self { samples: Array2::zeros((channels, len)), sample_rate_hz }
    }

    pub fn from_mono(samples: Vec<f64>, sample_rate_hz: u32) -> Self {
        let n = samples.len();
        Self {
            samples: Array2::from_shape_vec((1, n), samples).expect("shape matches"),
            sample_rate_hz,
        }
    }

    pub fn channels(&self) -> usize {
        self.samples.nrows()
    }

    pub fn len(&self) -> usize {
        self.samples.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn channel(&self, m: usize) -> ArrayView1<'_, f64> {
        self.samples.row(m)
    }

    /// `self + s · other`, elementwise over the common length.
    pub fn add_scaled(&self, other: &TimeSignal, s: f64) -> Result<TimeSignal> {
        if self.channels() != other.channels() || self.len() != other.len() {
            return Err(Error::DimensionMismatch(format!(
                "time signals {}x{} vs {}x{}",
                self.channels(),
                self.len(),
                other.channels(),
                other.len()
            )));
        }
        let mut out = self.clone();
        out.samples.zip_mut_with(&other.samples, |a, b| *a += s * b);
        Ok(out)
    }

    pub fn is_finite(&self) -> bool {
        self.samples.iter().all(|v| v.is_finite())
    }
}

/// Complex STFT tensor, frames × bins × channels.
#[derive(Debug, Clone)]
pub struct Spectrogram {
    pub data: Array3<Complex64>,
}

impl Spectrogram {
    pub fn zeros(frames: usize, bins: usize, channels: usize) -> Self {
        Self { data: Array3::zeros((frames, bins, channels)) }
    }

    pub fn frames(&self) -> usize {
        self.data.dim().0
    }

    pub fn bins(&self) -> usize {
        self.data.dim().1
    }

    pub fn channels(&self) -> usize {
        self.data.dim().2
    }

    /// `self + s · other`.
    pub fn add_scaled(&self, other: &Spectrogram, s: f64) -> Result<Spectrogram> {
        if self.data.dim() != other.data.dim() {
            return Err(Error::DimensionMismatch(format!(
                "spectrograms {:?} vs {:?}",
                self.data.dim(),
                other.data.dim()
            )));
        }
        let mut out = self.clone();
        out.data.zip_mut_with(&other.data, |a, b| *a += s * b);
        Ok(out)
    }

    /// Broadband energy of frame `t` summed over bins and channels.
    pub fn frame_energy(&self, t: usize) -> f64 {
        self.data
            .index_axis(ndarray::Axis(0), t)
            .iter()
            .map(|v| v.norm_sqr())
            .sum()
    }

    pub fn total_energy(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum()
    }
}

/// STFT analysis of a multichannel signal. Frame `t` covers samples
/// `[t·hop, t·hop + frame_len)`; trailing samples that do not fill a frame are
/// not covered.
pub fn analyze(signal: &TimeSignal, cfg: &WolaConfig) -> Result<Spectrogram> {
    let frames = cfg.num_frames(signal.len())?;
    let bins = cfg.bins();
    let channels = signal.channels();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(cfg.fft_size);

    let per_channel: Vec<Vec<Complex64>> = exec::map_indexed(channels, |m| {
        let x = signal.channel(m);
        let mut out = vec![Complex64::ZERO; frames * bins];
        let mut buf = vec![Complex64::ZERO; cfg.fft_size];
        let mut scratch = vec![Complex64::ZERO; fft.get_inplace_scratch_len()];
        for t in 0..frames {
            let start = t * cfg.hop;
            for n in 0..cfg.frame_len {
                buf[n] = Complex64::new(x[start + n] * cfg.analysis_window[n], 0.0);
            }
            for v in buf.iter_mut().skip(cfg.frame_len) {
                *v = Complex64::ZERO;
            }
            fft.process_with_scratch(&mut buf, &mut scratch);
            let row = &mut out[t * bins..(t + 1) * bins];
            row.copy_from_slice(&buf[..bins]);
            // Real input: DC and Nyquist are exactly real.
            row[0].im = 0.0;
            row[bins - 1].im = 0.0;
        }
        out
    });

    let mut spec = Spectrogram::zeros(frames, bins, channels);
    for (m, chan) in per_channel.iter().enumerate() {
        for t in 0..frames {
            for k in 0..bins {
                spec.data[(t, k, m)] = chan[t * bins + k];
            }
        }
    }
    Ok(spec)
}

/// WOLA synthesis; output covers `(frames − 1)·hop + frame_len` samples.
pub fn synthesize(spec: &Spectrogram, cfg: &WolaConfig) -> Result<TimeSignal> {
    if spec.bins() != cfg.bins() {
        return Err(Error::DimensionMismatch(format!(
            "spectrogram has {} bins, config expects {}",
            spec.bins(),
            cfg.bins()
        )));
    }
    let frames = spec.frames();
    let channels = spec.channels();
    let out_len = cfg.covered_len(frames);
    let ifft = FftPlanner::<f64>::new().plan_fft_inverse(cfg.fft_size);
    let inv_scale = 1.0 / cfg.fft_size as f64;

    let per_channel: Vec<Vec<f64>> = exec::map_indexed(channels, |m| {
        let mut out = vec![0.0f64; out_len];
        let mut buf = vec![Complex64::ZERO; cfg.fft_size];
        let mut scratch = vec![Complex64::ZERO; ifft.get_inplace_scratch_len()];
        let bins = cfg.bins();
        for t in 0..frames {
            for k in 0..bins {
                buf[k] = spec.data[(t, k, m)];
            }
            for f in bins..cfg.fft_size {
                buf[f] = spec.data[(t, cfg.fft_size - f, m)].conj();
            }
            ifft.process_with_scratch(&mut buf, &mut scratch);
            let start = t * cfg.hop;
            for n in 0..cfg.frame_len {
                out[start + n] += buf[n].re * inv_scale * cfg.synthesis_window[n];
            }
        }
        out
    });

    let mut signal = TimeSignal::zeros(channels, out_len, cfg.sample_rate_hz);
    for (m, chan) in per_channel.iter().enumerate() {
        for (n, v) in chan.iter().enumerate() {
            signal.samples[(m, n)] = *v;
        }
    }
    Ok(signal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn white_noise(channels: usize, len: usize, seed: u64) -> TimeSignal {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut sig = TimeSignal::zeros(channels, len, 16_000);
        for v in sig.samples.iter_mut() {
            *v = rng.gen::<f64>() * 2.0 - 1.0;
        }
        sig
    }

    /// Relative reconstruction error in dB on interior samples.
    fn roundtrip_error_db(sig: &TimeSignal, cfg: &WolaConfig) -> f64 {
        let spec = analyze(sig, cfg).unwrap();
        let rec = synthesize(&spec, cfg).unwrap();
        let lo = cfg.frame_len;
        let hi = rec.len() - cfg.frame_len;
        let mut err = 0.0;
        let mut energy = 0.0;
        for m in 0..sig.channels() {
            for n in lo..hi {
                let d = rec.samples[(m, n)] - sig.samples[(m, n)];
                err += d * d;
                energy += sig.samples[(m, n)] * sig.samples[(m, n)];
            }
        }
        10.0 * (err / energy).log10()
    }

    #[test]
    fn default_windows_satisfy_cola() {
        let cfg = WolaConfig::default_16k();
        assert!(cola_error(&cfg.analysis_window, &cfg.synthesis_window, cfg.hop) < 1e-10);
    }

    #[test]
    fn half_overlap_windows_satisfy_cola() {
        let (a, s) = design_windows(256, 128).unwrap();
        assert!(cola_error(&a, &s, 128) < 1e-10);
    }

    #[test]
    fn non_divisor_hop_rejected() {
        assert!(matches!(design_windows(256, 85), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn no_overlap_rejected() {
        assert!(design_windows(256, 256).is_err());
    }

    #[test]
    fn zero_signal_gives_zero_spectrogram() {
        let cfg = WolaConfig::default_16k();
        let sig = TimeSignal::zeros(3, 16_000, 16_000);
        let spec = analyze(&sig, &cfg).unwrap();
        assert_eq!(spec.frames(), (16_000 - 256) / 64 + 1);
        assert_eq!(spec.bins(), 129);
        assert_eq!(spec.channels(), 3);
        assert_eq!(spec.total_energy(), 0.0);
    }

    #[test]
    fn zero_spectrogram_gives_zero_signal() {
        let cfg = WolaConfig::default_16k();
        let spec = Spectrogram::zeros(10, 129, 2);
        let sig = synthesize(&spec, &cfg).unwrap();
        assert_eq!(sig.len(), cfg.covered_len(10));
        assert!(sig.samples.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn short_signal_rejected() {
        let cfg = WolaConfig::default_16k();
        let sig = TimeSignal::zeros(1, 255, 16_000);
        assert!(matches!(
            analyze(&sig, &cfg),
            Err(Error::SignalTooShort { len: 255, needed: 256 })
        ));
    }

    #[test]
    fn bin_centered_sinusoid_matches_direct_dft() {
        let cfg = WolaConfig::default_16k();
        let k0 = 16; // 1 kHz
        let f0 = cfg.bin_freq_hz(k0);
        let n = 16_000;
        let mut sig = TimeSignal::zeros(1, n, 16_000);
        for i in 0..n {
            sig.samples[(0, i)] =
                (2.0 * std::f64::consts::PI * f0 * i as f64 / 16_000.0).sin();
        }
        let spec = analyze(&sig, &cfg).unwrap();

        // Direct DFT oracle on one interior windowed frame.
        let t = 40;
        let start = t * cfg.hop;
        for k in 0..cfg.bins() {
            let mut acc = Complex64::ZERO;
            for i in 0..cfg.frame_len {
                let w = sig.samples[(0, start + i)] * cfg.analysis_window[i];
                let ph = -2.0 * std::f64::consts::PI * (k * i) as f64 / cfg.fft_size as f64;
                acc += Complex64::new(w * ph.cos(), w * ph.sin());
            }
            assert!(
                (spec.data[(t, k, 0)] - acc).norm() < 1e-9,
                "bin {k} differs from direct DFT"
            );
        }

        // Energy concentrates at the driven bin; far bins sit below the sine
        // window's sidelobe envelope, |W(d)/W(0)| ≈ 0.25/(d² − 0.25).
        let peak = spec.data[(t, k0, 0)].norm();
        for k in 0..cfg.bins() {
            let d = (k as isize - k0 as isize).unsigned_abs();
            if d >= 3 {
                let envelope = 0.25 / (d as f64 * d as f64 - 0.25);
                assert!(
                    spec.data[(t, k, 0)].norm() < 1.5 * envelope * peak,
                    "bin {k} leaks above sidelobe level"
                );
            }
        }
    }

    #[test]
    fn white_noise_roundtrip_below_minus_60_db() {
        let cfg = WolaConfig::default_16k();
        let sig = white_noise(4, 16_000, 99);
        assert!(roundtrip_error_db(&sig, &cfg) < -60.0);
    }

    #[test]
    fn synthesize_is_linear() {
        let cfg = WolaConfig::default_16k();
        let s1 = analyze(&white_noise(2, 8_000, 1), &cfg).unwrap();
        let s2 = analyze(&white_noise(2, 8_000, 2), &cfg).unwrap();
        let (a, b) = (0.7, -1.3);
        let combined = s1.add_scaled(&s2, b / a).unwrap();
        let mixed = synthesize(&combined, &cfg).unwrap();
        let y1 = synthesize(&s1, &cfg).unwrap();
        let y2 = synthesize(&s2, &cfg).unwrap();
        for m in 0..2 {
            for n in 0..y1.len() {
                let want = y1.samples[(m, n)] + (b / a) * y2.samples[(m, n)];
                assert!((mixed.samples[(m, n)] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn frame_spectrum_satisfies_parseval() {
        let cfg = WolaConfig::default_16k();
        let sig = white_noise(1, 4_000, 5);
        let spec = analyze(&sig, &cfg).unwrap();
        let t = 10;
        let start = t * cfg.hop;
        let time_energy: f64 = (0..cfg.frame_len)
            .map(|i| {
                let w = sig.samples[(0, start + i)] * cfg.analysis_window[i];
                w * w
            })
            .sum();
        let bins = cfg.bins();
        let mut spec_energy = spec.data[(t, 0, 0)].norm_sqr();
        spec_energy += spec.data[(t, bins - 1, 0)].norm_sqr();
        for k in 1..bins - 1 {
            spec_energy += 2.0 * spec.data[(t, k, 0)].norm_sqr();
        }
        spec_energy /= cfg.fft_size as f64;
        assert!((time_energy - spec_energy).abs() < 1e-10 * time_energy.max(1.0));
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(8))]
        #[test]
        fn roundtrip_property(seed in 0u64..1000, channels in 1usize..4) {
            let cfg = WolaConfig::default_16k();
            let len = 2048 + (seed as usize % 7) * 64;
            let sig = white_noise(channels, len, seed);
            proptest::prop_assert!(roundtrip_error_db(&sig, &cfg) < -60.0);
        }
    }
}
