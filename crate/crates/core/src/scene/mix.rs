//! SNR-controlled mixing of speech and noise at the reference microphones.

use crate::error::{Error, Result};
use crate::scene::geometry::ArrayGeometry;
use crate::wola::TimeSignal;

/// Speech-activity threshold used to restrict the SNR measurement to active
/// samples, relative to the loudest analysis window.
const ACTIVITY_THRESHOLD_DB: f64 = 40.0;
const ACTIVITY_WINDOW: usize = 256;

/// Noise gain that brings the mean of the left/right reference-channel SNRs
/// over speech-active samples to `snr_db`.
pub fn snr_gain(
    speech: &TimeSignal,
    noise: &TimeSignal,
    geom: &ArrayGeometry,
    snr_db: f64,
) -> Result<f64> {
    if speech.len() != noise.len() || speech.channels() != noise.channels() {
        return Err(Error::DimensionMismatch(format!(
            "speech {}x{} vs noise {}x{}",
            speech.channels(),
            speech.len(),
            noise.channels(),
            noise.len()
        )));
    }
    let refs = [geom.left_ref_index, geom.right_ref_index];
    let active = speech_activity(speech, &refs);
    if active.iter().all(|&a| !a) {
        return Err(Error::SilentSignal("speech has no active samples in the references".into()));
    }

    let mut mean_db = 0.0;
    for &r in &refs {
        let ps = masked_power(speech, r, &active);
        let pn = masked_power(noise, r, &active);
        if ps <= 0.0 {
            return Err(Error::SilentSignal(format!("speech is silent in reference channel {r}")));
        }
        if pn <= 0.0 {
            return Err(Error::SilentSignal(format!("noise is silent in reference channel {r}")));
        }
        mean_db += 5.0 * (ps / pn).log10();
    }
    // Scaling the noise by g shifts each side's SNR by -20 log10(g).
    Ok(10f64.powf((mean_db - snr_db) / 20.0))
}

/// Scales the noise so that the mean of the left/right reference-channel SNRs
/// over speech-active samples equals `snr_db`, then returns the mixture and
/// the scaled noise.
pub fn mix_at_snr(
    speech: &TimeSignal,
    noise: &TimeSignal,
    geom: &ArrayGeometry,
    snr_db: f64,
) -> Result<(TimeSignal, TimeSignal)> {
    let gain = snr_gain(speech, noise, geom, snr_db)?;
    let mut scaled_noise = noise.clone();
    scaled_noise.samples.mapv_inplace(|v| v * gain);
    let noisy = speech.add_scaled(&scaled_noise, 1.0)?;
    Ok((noisy, scaled_noise))
}

/// Per-sample speech activity from windowed reference-channel energy,
/// thresholded relative to the loudest window.
fn speech_activity(speech: &TimeSignal, refs: &[usize]) -> Vec<bool> {
    let n = speech.len();
    let windows = n.div_ceil(ACTIVITY_WINDOW);
    let mut energy = vec![0.0f64; windows];
    for (w, e) in energy.iter_mut().enumerate() {
        let lo = w * ACTIVITY_WINDOW;
        let hi = (lo + ACTIVITY_WINDOW).min(n);
        for &r in refs {
            for i in lo..hi {
                *e += speech.samples[(r, i)].powi(2);
            }
        }
    }
    let max = energy.iter().cloned().fold(0.0f64, f64::max);
    let floor = max * 10f64.powf(-ACTIVITY_THRESHOLD_DB / 10.0);
    let mut mask = vec![false; n];
    for (w, &e) in energy.iter().enumerate() {
        if max > 0.0 && e >= floor {
            let lo = w * ACTIVITY_WINDOW;
            let hi = (lo + ACTIVITY_WINDOW).min(n);
            mask[lo..hi].fill(true);
        }
    }
    mask
}

fn masked_power(sig: &TimeSignal, channel: usize, mask: &[bool]) -> f64 {
    let mut sum = 0.0;
    for (i, &active) in mask.iter().enumerate() {
        if active {
            sum += sig.samples[(channel, i)].powi(2);
        }
    }
    sum
}

/// Measures the mean reference-channel SNR the same way `mix_at_snr` targets
/// it; exposed for verification.
pub fn measured_mean_snr_db(
    speech: &TimeSignal,
    noise: &TimeSignal,
    geom: &ArrayGeometry,
) -> f64 {
    let refs = [geom.left_ref_index, geom.right_ref_index];
    let active = speech_activity(speech, &refs);
    let mut mean = 0.0;
    for &r in &refs {
        let ps = masked_power(speech, r, &active);
        let pn = masked_power(noise, r, &active);
        mean += 5.0 * (ps / pn).log10();
    }
    mean
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn geom() -> ArrayGeometry {
        ArrayGeometry::glasses_default()
    }

    fn random_signal(channels: usize, len: usize, seed: u64, gains: &[f64]) -> TimeSignal {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut sig = TimeSignal::zeros(channels, len, 16_000);
        for m in 0..channels {
            for i in 0..len {
                sig.samples[(m, i)] = (rng.gen::<f64>() * 2.0 - 1.0) * gains[m];
            }
        }
        sig
    }

    #[test]
    fn equal_powers_at_target_zero_keeps_unit_gain() {
        let g = geom();
        let ones = [1.0; 5];
        let speech = random_signal(5, 8000, 1, &ones);
        let noise = random_signal(5, 8000, 2, &ones);
        let measured = measured_mean_snr_db(&speech, &noise, &g);
        let (_, scaled) = mix_at_snr(&speech, &noise, &g, measured).unwrap();
        // Asking for the already-measured SNR leaves the noise untouched.
        for i in 0..8000 {
            assert!((scaled.samples[(2, i)] - noise.samples[(2, i)]).abs() < 1e-12);
        }
    }

    #[test]
    fn plus_ten_db_from_equal_powers_attenuates_noise() {
        let g = geom();
        let ones = [1.0; 5];
        let speech = random_signal(5, 8000, 3, &ones);
        let noise = random_signal(5, 8000, 4, &ones);
        let base = measured_mean_snr_db(&speech, &noise, &g);
        let (_, scaled) = mix_at_snr(&speech, &noise, &g, base + 10.0).unwrap();
        let expected_gain = 10f64.powf(-10.0 / 20.0);
        let ratio = scaled.samples[(2, 100)] / noise.samples[(2, 100)];
        assert!((ratio - expected_gain).abs() < 1e-12);
    }

    #[test]
    fn asymmetric_channels_hit_target_mean_snr() {
        let g = geom();
        // Left reference louder speech than right.
        let speech = random_signal(5, 16_000, 5, &[1.0, 1.0, 2.0, 1.0, 0.7]);
        let noise = random_signal(5, 16_000, 6, &[1.0, 1.0, 0.8, 1.0, 1.3]);
        for target in [0.0, 5.0, 10.0] {
            let (noisy, scaled) = mix_at_snr(&speech, &noise, &g, target).unwrap();
            let achieved = measured_mean_snr_db(&speech, &scaled, &g);
            assert!((achieved - target).abs() < 0.01, "target {target}, got {achieved}");
            // Mixing additivity.
            for i in (0..16_000).step_by(997) {
                for m in 0..5 {
                    let want = speech.samples[(m, i)] + scaled.samples[(m, i)];
                    assert_eq!(noisy.samples[(m, i)], want);
                }
            }
        }
    }

    #[test]
    fn silent_inputs_rejected() {
        let g = geom();
        let speech = random_signal(5, 4000, 7, &[1.0; 5]);
        let silence = TimeSignal::zeros(5, 4000, 16_000);
        assert!(matches!(mix_at_snr(&speech, &silence, &g, 0.0), Err(Error::SilentSignal(_))));
        assert!(matches!(mix_at_snr(&silence, &speech, &g, 0.0), Err(Error::SilentSignal(_))));
    }

    #[test]
    fn length_mismatch_rejected() {
        let g = geom();
        let speech = random_signal(5, 4000, 8, &[1.0; 5]);
        let noise = random_signal(5, 4001, 9, &[1.0; 5]);
        assert!(mix_at_snr(&speech, &noise, &g, 0.0).is_err());
    }
}
