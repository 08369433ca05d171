//! Diffuse noise: the sinc spatial-coherence model and its plane-wave
//! realization.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;

use crate::error::Result;
use crate::exec;
use crate::linalg::CovarianceMatrix;
use crate::scene::geometry::{ArrayGeometry, SPEED_OF_SOUND};
use crate::scene::derive_seed;
use crate::wola::{TimeSignal, WolaConfig};

/// Per-bin spatial coherence of a spherically isotropic noise field:
/// `Γ_ij(k) = sinc(2 f_k d_ij / c)` with unit diagonal.
pub fn diffuse_coherence(geom: &ArrayGeometry, cfg: &WolaConfig) -> Vec<CovarianceMatrix> {
    let m = geom.num_mics();
    (0..cfg.bins())
        .map(|k| {
            let f = cfg.bin_freq_hz(k);
            CovarianceMatrix::from_fn(m, |i, j| {
                let d = geom.mic_distance(i, j);
                Complex64::new(sinc(2.0 * f * d / SPEED_OF_SOUND), 0.0)
            })
        })
        .collect()
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

const EXCITATION_BLOCK: usize = 8192;

/// Slow lognormal amplitude modulation of the individual plane waves,
/// turning the perfectly stationary isotropic field into "diffuse-like"
/// ambient noise whose directional balance drifts over time.
#[derive(Debug, Clone, Copy)]
pub struct WaveModulation {
    /// Standard deviation of the per-wave level in dB.
    pub sigma_db: f64,
    /// Correlation time of the level fluctuations in seconds.
    pub corr_time_s: f64,
}

impl WaveModulation {
    pub fn is_active(&self) -> bool {
        self.sigma_db > 0.0 && self.corr_time_s > 0.0
    }
}

/// Spherically isotropic noise realized as a superposition of `wave_count`
/// plane waves from uniformly random directions, each carrying independent
/// white excitation. Synthesis runs in the full-length DFT domain so the
/// fractional inter-microphone delays are exact; the excitation is generated
/// in fixed-size frequency blocks with per-(wave, block) derived seeds, so the
/// output is bit-identical for a given seed regardless of thread count.
pub fn synthesize_noise(
    geom: &ArrayGeometry,
    n_samples: usize,
    sample_rate_hz: u32,
    wave_count: usize,
    seed: u64,
) -> Result<TimeSignal> {
    geom.validate()?;
    let m = geom.num_mics();
    let n = n_samples;
    let bins = n / 2 + 1;
    let df = sample_rate_hz as f64 / n as f64;

    // Directions are drawn once, outside the blocked excitation loop.
    let mut dir_rng = ChaCha12Rng::seed_from_u64(derive_seed(seed, &[0x6469_7273]));
    let directions: Vec<[f64; 3]> = (0..wave_count).map(|_| random_unit_vector(&mut dir_rng)).collect();
    // Propagation delay of wave p at mic i, relative to the head origin.
    let delays: Vec<f64> = directions
        .iter()
        .flat_map(|d| {
            geom.mic_positions.iter().map(move |p| {
                (p[0] * d[0] + p[1] * d[1] + p[2] * d[2]) / SPEED_OF_SOUND
            })
        })
        .collect();

    let amp = (n as f64 / wave_count as f64).sqrt();
    let n_blocks = bins.div_ceil(EXCITATION_BLOCK);
    let blocks: Vec<Vec<Complex64>> = exec::map_indexed(n_blocks, |b| {
        let lo = b * EXCITATION_BLOCK;
        let hi = (lo + EXCITATION_BLOCK).min(bins);
        let len = hi - lo;
        let mut acc = vec![Complex64::ZERO; m * len];
        let mut excitation = vec![Complex64::ZERO; len];
        for p in 0..wave_count {
            let mut rng =
                ChaCha12Rng::seed_from_u64(derive_seed(seed, &[0x6578_6369, p as u64, b as u64]));
            for e in excitation.iter_mut() {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                *e = Complex64::new(re, im) * (amp * std::f64::consts::FRAC_1_SQRT_2);
            }
            for mic in 0..m {
                let tau = delays[p * m + mic];
                // e^{-j2πfτ}, advanced incrementally with periodic resync.
                let step = Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * df * tau);
                let mic_acc = &mut acc[mic * len..(mic + 1) * len];
                let mut idx = 0;
                while idx < len {
                    let f_hz = (lo + idx) as f64 * df;
                    let mut phase =
                        Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * f_hz * tau);
                    let chunk_end = (idx + 1024).min(len);
                    for i in idx..chunk_end {
                        mic_acc[i] += excitation[i] * phase;
                        phase *= step;
                    }
                    idx = chunk_end;
                }
            }
        }
        acc
    });

    // Assemble per-mic spectra, zero DC and Nyquist, inverse FFT.
    let ifft = FftPlanner::<f64>::new().plan_fft_inverse(n);
    let per_mic: Vec<Vec<f64>> = exec::map_indexed(m, |mic| {
        let mut full = vec![Complex64::ZERO; n];
        for (b, block) in blocks.iter().enumerate() {
            let lo = b * EXCITATION_BLOCK;
            let hi = (lo + EXCITATION_BLOCK).min(bins);
            let len = hi - lo;
            full[lo..hi].copy_from_slice(&block[mic * len..(mic + 1) * len]);
        }
        full[0] = Complex64::ZERO;
        if n % 2 == 0 {
            full[n / 2] = Complex64::ZERO;
        }
        for f in (bins.max(1))..n {
            full[f] = full[n - f].conj();
        }
        let mut scratch = vec![Complex64::ZERO; ifft.get_inplace_scratch_len()];
        ifft.process_with_scratch(&mut full, &mut scratch);
        let scale = 1.0 / n as f64;
        full.iter().map(|v| v.re * scale).collect()
    });

    let mut sig = TimeSignal::zeros(m, n, sample_rate_hz);
    for (mic, chan) in per_mic.iter().enumerate() {
        for (i, &v) in chan.iter().enumerate() {
            sig.samples[(mic, i)] = v;
        }
    }
    Ok(sig)
}

fn random_unit_vector(rng: &mut ChaCha12Rng) -> [f64; 3] {
    // Uniform on the sphere: z uniform in [-1, 1], azimuth uniform.
    let z: f64 = rng.gen::<f64>() * 2.0 - 1.0;
    let phi: f64 = rng.gen::<f64>() * 2.0 * std::f64::consts::PI;
    let r = (1.0 - z * z).sqrt();
    [r * phi.cos(), r * phi.sin(), z]
}

const ENVELOPE_BLOCK: usize = 256;

/// Like [`synthesize_noise`], but each wave's excitation carries a slow
/// lognormal amplitude envelope (unit mean power), so the field is only
/// diffuse on average. `modulation = None` or an inactive modulation falls
/// back to the stationary synthesis.
pub fn synthesize_noise_modulated(
    geom: &ArrayGeometry,
    n_samples: usize,
    sample_rate_hz: u32,
    wave_count: usize,
    modulation: Option<WaveModulation>,
    seed: u64,
) -> Result<TimeSignal> {
    let modulation = match modulation {
        Some(m) if m.is_active() => m,
        _ => return synthesize_noise(geom, n_samples, sample_rate_hz, wave_count, seed),
    };
    geom.validate()?;
    let m = geom.num_mics();
    let n = n_samples;
    let bins = n / 2 + 1;
    let df = sample_rate_hz as f64 / n as f64;

    let mut dir_rng = ChaCha12Rng::seed_from_u64(derive_seed(seed, &[0x6469_7273]));
    let directions: Vec<[f64; 3]> =
        (0..wave_count).map(|_| random_unit_vector(&mut dir_rng)).collect();

    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
    let mut fft_scratch = vec![Complex64::ZERO; fft.get_inplace_scratch_len()];
    let amp = (wave_count as f64).sqrt().recip();
    let sigma_ln = modulation.sigma_db * std::f64::consts::LN_10 / 20.0;
    let block_dur = ENVELOPE_BLOCK as f64 / sample_rate_hz as f64;
    let rho = (-block_dur / modulation.corr_time_s).exp();
    let n_env = n.div_ceil(ENVELOPE_BLOCK) + 1;

    let mut spectra = vec![Complex64::ZERO; m * bins];
    let mut excitation = vec![Complex64::ZERO; n];
    for (p, dir) in directions.iter().enumerate() {
        let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(seed, &[0x6d6f_6475, p as u64]));
        // Ornstein-Uhlenbeck log-level on a coarse grid, linearly
        // interpolated; exp(-σ²/2) keeps unit mean power.
        let mut env = Vec::with_capacity(n_env);
        let mut state: f64 = rng.sample(StandardNormal);
        env.push((sigma_ln * state - sigma_ln * sigma_ln / 2.0).exp());
        for _ in 1..n_env {
            let innovation: f64 = rng.sample(StandardNormal);
            state = rho * state + (1.0 - rho * rho).sqrt() * innovation;
            env.push((sigma_ln * state - sigma_ln * sigma_ln / 2.0).exp());
        }
        for (i, e) in excitation.iter_mut().enumerate() {
            let pos = i as f64 / ENVELOPE_BLOCK as f64;
            let idx = pos as usize;
            let frac = pos - idx as f64;
            let g = env[idx] * (1.0 - frac) + env[idx + 1] * frac;
            let w: f64 = rng.sample(StandardNormal);
            *e = Complex64::new(w * g * amp, 0.0);
        }
        fft.process_with_scratch(&mut excitation, &mut fft_scratch);

        for mic in 0..m {
            let pos = &geom.mic_positions[mic];
            let tau = (pos[0] * dir[0] + pos[1] * dir[1] + pos[2] * dir[2]) / SPEED_OF_SOUND;
            let step = Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * df * tau);
            let mic_acc = &mut spectra[mic * bins..(mic + 1) * bins];
            let mut idx = 0;
            while idx < bins {
                let f_hz = idx as f64 * df;
                let mut phase =
                    Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * f_hz * tau);
                let chunk_end = (idx + 1024).min(bins);
                for i in idx..chunk_end {
                    mic_acc[i] += excitation[i] * phase;
                    phase *= step;
                }
                idx = chunk_end;
            }
        }
    }

    let ifft = FftPlanner::<f64>::new().plan_fft_inverse(n);
    let per_mic: Vec<Vec<f64>> = exec::map_indexed(m, |mic| {
        let mut full = vec![Complex64::ZERO; n];
        full[..bins].copy_from_slice(&spectra[mic * bins..(mic + 1) * bins]);
        full[0] = Complex64::ZERO;
        if n % 2 == 0 {
            full[n / 2] = Complex64::ZERO;
        }
        for f in (bins.max(1))..n {
            full[f] = full[n - f].conj();
        }
        let mut scratch = vec![Complex64::ZERO; ifft.get_inplace_scratch_len()];
        ifft.process_with_scratch(&mut full, &mut scratch);
        let scale = 1.0 / n as f64;
        full.iter().map(|v| v.re * scale).collect()
    });

    let mut sig = TimeSignal::zeros(m, n, sample_rate_hz);
    for (mic, chan) in per_mic.iter().enumerate() {
        for (i, &v) in chan.iter().enumerate() {
            sig.samples[(mic, i)] = v;
        }
    }
    Ok(sig)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wola::{analyze, WolaConfig};

    /// Per-bin sample spatial covariance of a multichannel spectrogram.
    fn sample_covariances(sig: &TimeSignal, cfg: &WolaConfig) -> Vec<CovarianceMatrix> {
        let spec = analyze(sig, cfg).unwrap();
        let (frames, bins, m) = (spec.frames(), spec.bins(), spec.channels());
        (0..bins)
            .map(|k| {
                let mut r = CovarianceMatrix::zeros(m);
                for t in 0..frames {
                    let y: Vec<Complex64> = (0..m).map(|c| spec.data[(t, k, c)]).collect();
                    r.smooth_update(t as f64 / (t + 1) as f64, &y);
                }
                r
            })
            .collect()
    }

    fn normalized(r: &CovarianceMatrix) -> CovarianceMatrix {
        r.scaled(r.dim() as f64 / r.trace_real())
    }

    #[test]
    fn coherence_has_unit_diagonal_and_all_ones_at_dc() {
        let geom = ArrayGeometry::glasses_default();
        let cfg = WolaConfig::default_16k();
        let cov = diffuse_coherence(&geom, &cfg);
        assert_eq!(cov.len(), 129);
        for c in &cov {
            for i in 0..5 {
                assert_eq!(c.get(i, i), Complex64::ONE);
            }
            assert_eq!(c.hermitian_error(), 0.0);
        }
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(cov[0].get(i, j), Complex64::ONE);
            }
        }
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let geom = ArrayGeometry::glasses_default();
        let a = synthesize_noise(&geom, 4096, 16_000, 16, 7).unwrap();
        let b = synthesize_noise(&geom, 4096, 16_000, 16, 7).unwrap();
        assert_eq!(a.samples, b.samples);
        let c = synthesize_noise(&geom, 4096, 16_000, 16, 8).unwrap();
        assert_ne!(a.samples, c.samples);
    }

    #[test]
    fn single_wave_gives_rank_one_bin_covariance() {
        let geom = ArrayGeometry::glasses_default();
        let cfg = WolaConfig::default_16k();
        let sig = synthesize_noise(&geom, 32_000, 16_000, 1, 3).unwrap();
        let covs = sample_covariances(&sig, &cfg);
        // Power iteration via repeated squaring is overkill; eigenvalues of a
        // 5x5 Hermitian PSD matrix: compare dominant share of trace.
        for k in [8, 32, 64, 100] {
            let r = &covs[k];
            // Dominant eigenvalue via power iteration on the raw matrix.
            let mut v = vec![Complex64::ONE; 5];
            let mut out = vec![Complex64::ZERO; 5];
            for _ in 0..200 {
                r.mul_vec(&v, &mut out);
                let n = crate::linalg::vec_norm(&out);
                for (a, b) in v.iter_mut().zip(out.iter()) {
                    *a = b / n;
                }
            }
            r.mul_vec(&v, &mut out);
            let lambda1 = crate::linalg::dotc(&v, &out).re;
            assert!(
                lambda1 / r.trace_real() > 0.98,
                "bin {k}: dominant share {}",
                lambda1 / r.trace_real()
            );
        }
    }

    #[test]
    fn many_waves_approach_sinc_model() {
        let geom = ArrayGeometry::glasses_default();
        let cfg = WolaConfig::default_16k();
        let sig = synthesize_noise(&geom, 13 * 16_000, 16_000, 256, 11).unwrap();
        let covs = sample_covariances(&sig, &cfg);
        let model = diffuse_coherence(&geom, &cfg);
        let mut num = 0.0;
        let mut den = 0.0;
        for k in 1..cfg.bins() {
            let got = normalized(&covs[k]);
            num += got.frobenius_dist(&model[k]).powi(2);
            den += model[k].frobenius_norm().powi(2);
        }
        let rel = (num / den).sqrt();
        assert!(rel < 0.10, "aggregate Frobenius distance {rel:.4}");
    }
}
