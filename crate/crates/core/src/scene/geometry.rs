//! Array geometry and nearfield own-voice RTF vectors.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::wola::WolaConfig;

/// Speed of sound in m/s.
pub const SPEED_OF_SOUND: f64 = 343.0;

/// Head-worn microphone layout. Coordinates are meters in a head-fixed frame:
/// x to the wearer's right, y forward, z up.
#[derive(Debug, Clone)]
pub struct ArrayGeometry {
    pub mic_positions: Vec<[f64; 3]>,
    /// The nose-pad microphone subject to occlusion (channel 0 by convention).
    pub occludable_index: usize,
    pub left_ref_index: usize,
    pub right_ref_index: usize,
    pub mouth_position: [f64; 3],
}

impl ArrayGeometry {
    /// Fixed glasses-like five-microphone layout: a nose-pad mic about 7 cm
    /// from the mouth and two mics per temple, with the rearmost (near-ear)
    /// pair acting as the left/right references.
    pub fn glasses_default() -> Self {
        Self {
            mic_positions: vec![
                [0.000, 0.075, 0.005],  // nose pad
                [-0.070, 0.060, 0.000], // left front temple
                [-0.075, -0.020, 0.000], // left rear temple (left reference)
                [0.070, 0.060, 0.000],  // right front temple
                [0.075, -0.020, 0.000], // right rear temple (right reference)
            ],
            occludable_index: 0,
            left_ref_index: 2,
            right_ref_index: 4,
            mouth_position: [0.0, 0.090, -0.060],
        }
    }

    pub fn num_mics(&self) -> usize {
        self.mic_positions.len()
    }

    /// A copy with Gaussian position offsets, modeling how a particular
    /// wearer's fit deviates from the nominal layout the a-priori data is
    /// computed for. Offsets are in meters.
    pub fn perturbed(&self, mic_sigma_m: f64, mouth_sigma_m: f64, seed: u64) -> Self {
        use rand::SeedableRng;
        use rand_distr::Distribution;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
        let normal = rand_distr::StandardNormal;
        let mut draw = |sigma: f64| -> f64 {
            let v: f64 = normal.sample(&mut rng);
            v * sigma
        };
        let mut out = self.clone();
        for p in &mut out.mic_positions {
            for x in p.iter_mut() {
                *x += draw(mic_sigma_m);
            }
        }
        for x in &mut out.mouth_position {
            *x += draw(mouth_sigma_m);
        }
        out
    }

    pub fn mic_distance(&self, i: usize, j: usize) -> f64 {
        dist(&self.mic_positions[i], &self.mic_positions[j])
    }

    pub fn mouth_distance(&self, m: usize) -> f64 {
        dist(&self.mic_positions[m], &self.mouth_position)
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.num_mics();
        let idx = [self.occludable_index, self.left_ref_index, self.right_ref_index];
        if idx.iter().any(|&i| i >= m) {
            return Err(Error::InvalidGeometry("role index out of range".into()));
        }
        if idx[0] == idx[1] || idx[0] == idx[2] || idx[1] == idx[2] {
            return Err(Error::InvalidGeometry("role indices must be distinct".into()));
        }
        let d_occ = self.mouth_distance(self.occludable_index);
        for i in 0..m {
            if i != self.occludable_index && self.mouth_distance(i) <= d_occ {
                return Err(Error::InvalidGeometry(format!(
                    "occludable mic must be nearest the mouth, but mic {i} is closer"
                )));
            }
        }
        Ok(())
    }
}

fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (0..3).map(|i| (a[i] - b[i]).powi(2)).sum::<f64>().sqrt()
}

/// Per-bin nearfield RTF vectors for the own-voice source: spherical-spreading
/// magnitudes `d_ref/d_m` with propagation-delay phase, normalized so the
/// reference entry is exactly one.
pub fn nearfield_rtf(
    geom: &ArrayGeometry,
    cfg: &WolaConfig,
    ref_index: usize,
) -> Result<Vec<Vec<Complex64>>> {
    geom.validate()?;
    if ref_index >= geom.num_mics() {
        return Err(Error::InvalidGeometry(format!("reference index {ref_index} out of range")));
    }
    let m = geom.num_mics();
    let dists: Vec<f64> = (0..m).map(|i| geom.mouth_distance(i)).collect();
    if dists.iter().any(|&d| d < 1e-6) {
        return Err(Error::InvalidGeometry("mouth coincides with a microphone".into()));
    }
    let d_ref = dists[ref_index];
    let bins = cfg.bins();
    let mut rtf = Vec::with_capacity(bins);
    for k in 0..bins {
        let f = cfg.bin_freq_hz(k);
        let mut h = Vec::with_capacity(m);
        for (i, &d) in dists.iter().enumerate() {
            if i == ref_index {
                h.push(Complex64::ONE);
            } else {
                let mag = d_ref / d;
                let phase = -2.0 * std::f64::consts::PI * f * (d - d_ref) / SPEED_OF_SOUND;
                h.push(Complex64::from_polar(mag, phase));
            }
        }
        rtf.push(h);
    }
    Ok(rtf)
}
