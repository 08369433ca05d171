//! Objective measures: SNR on masked time-domain samples and own-voice
//! distortion (negative scale-invariant SDR), both computed during speech
//! activity only.

use crate::error::{Error, Result};
use crate::wola::WolaConfig;

/// Floor for the own-voice distortion in dB.
pub const OVD_FLOOR_DB: f64 = -60.0;

/// Left/right values of a metric, with the binaural mean as the arithmetic
/// mean of the dB values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SideValues {
    pub left: f64,
    pub right: f64,
}

impl SideValues {
    pub fn mean(&self) -> f64 {
        0.5 * (self.left + self.right)
    }
}

/// Per-run metric bundle.
#[derive(Debug, Clone, Copy)]
pub struct MetricsReport {
    pub snr_in_db: SideValues,
    pub snr_out_db: SideValues,
    pub snr_improvement_db: SideValues,
    pub ovd_db: SideValues,
}

impl MetricsReport {
    pub fn from_sides(snr_in_db: SideValues, snr_out_db: SideValues, ovd_db: SideValues) -> Self {
        Self {
            snr_in_db,
            snr_out_db,
            snr_improvement_db: SideValues {
                left: snr_out_db.left - snr_in_db.left,
                right: snr_out_db.right - snr_in_db.right,
            },
            ovd_db,
        }
    }
}

/// Expands per-frame VAD flags to a per-sample mask: a sample is active when
/// any frame covering it is active. The first and last `frame_len` samples of
/// the covered span are excluded, matching the edge handling of the WOLA
/// round trip.
pub fn activity_mask(vad: &[bool], cfg: &WolaConfig, n_samples: usize) -> Vec<bool> {
    let mut mask = vec![false; n_samples];
    for (t, &active) in vad.iter().enumerate() {
        if active {
            let lo = t * cfg.hop;
            let hi = (lo + cfg.frame_len).min(n_samples);
            if lo < n_samples {
                mask[lo..hi].fill(true);
            }
        }
    }
    let covered_end = cfg.covered_len(vad.len()).min(n_samples);
    let lead = cfg.frame_len.min(n_samples);
    mask[..lead].fill(false);
    mask[covered_end.saturating_sub(cfg.frame_len)..].fill(false);
    mask
}

/// `10 log10(Σ speech² / Σ noise²)` over masked samples. Zero noise energy
/// yields `+∞`, zero speech energy `−∞`.
pub fn snr_db(speech: &[f64], noise: &[f64], mask: &[bool]) -> Result<f64> {
    if speech.len() != noise.len() || speech.len() != mask.len() {
        return Err(Error::DimensionMismatch(format!(
            "snr over {} speech, {} noise, {} mask samples",
            speech.len(),
            noise.len(),
            mask.len()
        )));
    }
    let mut ps = 0.0;
    let mut pn = 0.0;
    let mut any = false;
    for i in 0..speech.len() {
        if mask[i] {
            any = true;
            ps += speech[i] * speech[i];
            pn += noise[i] * noise[i];
        }
    }
    if !any {
        return Err(Error::EmptyMask);
    }
    if pn == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (ps / pn).log10())
}

/// Own-voice distortion: `−20 log10(‖c·x_ref‖ / ‖c·x_ref − x_out‖)` over
/// masked samples, with the projection `c = x_outᵀx_ref / ‖x_ref‖²`, floored
/// at −60 dB. A zero output (and hence `c = 0`) maps to 0 dB.
pub fn ovd_db(x_ref: &[f64], x_out: &[f64], mask: &[bool]) -> Result<f64> {
    if x_ref.len() != x_out.len() || x_ref.len() != mask.len() {
        return Err(Error::DimensionMismatch(format!(
            "ovd over {} reference, {} output, {} mask samples",
            x_ref.len(),
            x_out.len(),
            mask.len()
        )));
    }
    let mut dot = 0.0;
    let mut ref_sq = 0.0;
    let mut any = false;
    for i in 0..x_ref.len() {
        if mask[i] {
            any = true;
            dot += x_out[i] * x_ref[i];
            ref_sq += x_ref[i] * x_ref[i];
        }
    }
    if !any {
        return Err(Error::EmptyMask);
    }
    if ref_sq == 0.0 {
        return Err(Error::SilentSignal("OVD reference is silent over the mask".into()));
    }
    let c = dot / ref_sq;
    if c == 0.0 {
        return Ok(0.0);
    }
    let mut dist_sq = 0.0;
    for i in 0..x_ref.len() {
        if mask[i] {
            let d = c * x_ref[i] - x_out[i];
            dist_sq += d * d;
        }
    }
    let target_sq = c * c * ref_sq;
    if dist_sq == 0.0 {
        return Ok(OVD_FLOOR_DB);
    }
    Ok((-10.0 * (target_sq / dist_sq).log10()).max(OVD_FLOOR_DB))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_true(n: usize) -> Vec<bool> {
        vec![true; n]
    }

    #[test]
    fn mask_covers_interior_for_all_active_vad() {
        let cfg = WolaConfig::default_16k();
        let frames = 100;
        let n = cfg.covered_len(frames);
        let mask = activity_mask(&vec![true; frames], &cfg, n);
        assert!(mask[..cfg.frame_len].iter().all(|&m| !m));
        assert!(mask[n - cfg.frame_len..].iter().all(|&m| !m));
        assert!(mask[cfg.frame_len..n - cfg.frame_len].iter().all(|&m| m));
    }

    #[test]
    fn mask_empty_for_inactive_vad() {
        let cfg = WolaConfig::default_16k();
        let mask = activity_mask(&vec![false; 50], &cfg, cfg.covered_len(50));
        assert!(mask.iter().all(|&m| !m));
    }

    #[test]
    fn single_interior_frame_covers_frame_len_samples() {
        let cfg = WolaConfig::default_16k();
        let frames = 100;
        let mut vad = vec![false; frames];
        vad[50] = true;
        let mask = activity_mask(&vad, &cfg, cfg.covered_len(frames));
        let active: Vec<usize> = mask
            .iter()
            .enumerate()
            .filter_map(|(i, &m)| m.then_some(i))
            .collect();
        assert_eq!(active.len(), cfg.frame_len);
        assert_eq!(active[0], 50 * cfg.hop);
        assert_eq!(*active.last().unwrap(), 50 * cfg.hop + cfg.frame_len - 1);
    }

    #[test]
    fn equal_power_components_give_zero_db() {
        let speech = vec![0.5; 1000];
        let noise = vec![-0.5; 1000];
        let got = snr_db(&speech, &noise, &all_true(1000)).unwrap();
        assert!(got.abs() < 1e-12);
    }

    #[test]
    fn doubling_speech_amplitude_adds_six_db() {
        let speech: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.1).sin()).collect();
        let noise: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.13).cos()).collect();
        let mask = all_true(1000);
        let base = snr_db(&speech, &noise, &mask).unwrap();
        let loud: Vec<f64> = speech.iter().map(|v| v * 2.0).collect();
        let boosted = snr_db(&loud, &noise, &mask).unwrap();
        assert!((boosted - base - 6.020_599_913_279_624).abs() < 1e-10);
    }

    #[test]
    fn masking_silent_half_changes_nothing_for_stationary_noise() {
        // Speech lives in the first half; noise has identical power in both
        // halves by symmetric construction.
        let n = 2000;
        let mut speech = vec![0.0; n];
        for (i, s) in speech.iter_mut().take(n / 2).enumerate() {
            *s = (i as f64 * 0.07).sin();
        }
        let noise: Vec<f64> = (0..n / 2)
            .map(|i| 0.3 * (i as f64 * 0.11).sin())
            .chain((0..n / 2).map(|i| 0.3 * (i as f64 * 0.11).sin()))
            .collect();
        let full = snr_db(&speech, &noise, &all_true(n)).unwrap();
        let mut mask = vec![true; n / 2];
        mask.extend(vec![false; n / 2]);
        let masked = snr_db(&speech, &noise, &mask).unwrap();
        // The masked version should differ by exactly the speech-energy
        // ratio: all speech is in the active half, noise power is split
        // evenly, so SNR over the active half is 3.01 dB higher.
        assert!((masked - full - 10.0 * 2f64.log10()).abs() < 1e-10);
    }

    #[test]
    fn zero_noise_gives_infinity_and_empty_mask_errors() {
        let speech = vec![1.0; 10];
        let silence = vec![0.0; 10];
        assert_eq!(snr_db(&speech, &silence, &all_true(10)).unwrap(), f64::INFINITY);
        assert!(matches!(snr_db(&speech, &speech, &vec![false; 10]), Err(Error::EmptyMask)));
    }

    #[test]
    fn scaled_reference_match_floors_ovd() {
        let x: Vec<f64> = (0..500).map(|i| (i as f64 * 0.05).sin()).collect();
        let out: Vec<f64> = x.iter().map(|v| v * 2.0).collect();
        assert_eq!(ovd_db(&x, &out, &all_true(500)).unwrap(), OVD_FLOOR_DB);
    }

    #[test]
    fn orthogonal_error_at_ten_percent_gives_minus_twenty_db() {
        // x_ref on even samples, error on odd samples: exactly orthogonal.
        let n = 1000;
        let mut x_ref = vec![0.0; n];
        let mut e = vec![0.0; n];
        for i in 0..n / 2 {
            x_ref[2 * i] = 1.0;
            e[2 * i + 1] = 0.1;
        }
        // ‖e‖ = 0.1 ‖x_ref‖ by construction over the mask.
        let x_out: Vec<f64> = x_ref.iter().zip(e.iter()).map(|(a, b)| a + b).collect();
        let got = ovd_db(&x_ref, &x_out, &all_true(n)).unwrap();
        assert!((got + 20.0).abs() < 1e-10, "got {got}");
    }

    #[test]
    fn ovd_is_scale_invariant_in_output() {
        let x_ref: Vec<f64> = (0..800).map(|i| (i as f64 * 0.03).sin()).collect();
        let x_out: Vec<f64> = x_ref
            .iter()
            .enumerate()
            .map(|(i, v)| v + 0.05 * (i as f64 * 0.9).cos())
            .collect();
        let mask = all_true(800);
        let base = ovd_db(&x_ref, &x_out, &mask).unwrap();
        for g in [0.1, -3.0, 42.0] {
            let scaled: Vec<f64> = x_out.iter().map(|v| v * g).collect();
            let got = ovd_db(&x_ref, &scaled, &mask).unwrap();
            assert!((got - base).abs() < 1e-9, "gain {g}: {got} vs {base}");
        }
    }

    #[test]
    fn zero_output_maps_to_zero_db() {
        let x_ref: Vec<f64> = (0..100).map(|i| (i as f64 * 0.2).sin()).collect();
        let silence = vec![0.0; 100];
        assert_eq!(ovd_db(&x_ref, &silence, &all_true(100)).unwrap(), 0.0);
    }

    #[test]
    fn report_improvement_is_out_minus_in() {
        let report = MetricsReport::from_sides(
            SideValues { left: 3.0, right: 5.0 },
            SideValues { left: 10.0, right: 9.0 },
            SideValues { left: -12.0, right: -14.0 },
        );
        assert_eq!(report.snr_improvement_db.left, 7.0);
        assert_eq!(report.snr_improvement_db.right, 4.0);
        assert_eq!(report.snr_improvement_db.mean(), 5.5);
        assert_eq!(report.ovd_db.mean(), -13.0);
    }
}
