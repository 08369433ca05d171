//! A-priori knowledge for the switching strategies: the unoccluded RTF
//! vector, the diffuse noise covariance model, and the occlusion transfer
//! functions.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::CovarianceMatrix;
use crate::scene::geometry::{nearfield_rtf, ArrayGeometry};
use crate::scene::noise::diffuse_coherence;
use crate::scene::occlusion::OcclusionProfile;
use crate::wola::WolaConfig;

/// Diagonal loading applied to the diffuse model before it is ever inverted.
const COHERENCE_FLOOR: f64 = 1e-6;

/// Per-bin a-priori estimates, relative to a fixed reference microphone.
#[derive(Debug, Clone)]
pub struct AprioriData {
    /// Unoccluded RTF vector per bin, reference entry exactly one.
    pub rtf_unoccluded: Vec<Vec<Complex64>>,
    /// Unoccluded noise covariance per bin: floored diffuse model, normalized
    /// to unit mean diagonal.
    pub noise_cov_unoccluded: Vec<CovarianceMatrix>,
    pub occlusion_profile: OcclusionProfile,
    pub ref_index: usize,
}

impl AprioriData {
    pub fn from_scene(
        geom: &ArrayGeometry,
        cfg: &WolaConfig,
        profile: &OcclusionProfile,
        ref_index: usize,
    ) -> Result<Self> {
        if ref_index == 0 {
            return Err(Error::InvalidConfig(
                "the occludable microphone (channel 0) cannot be the reference".into(),
            ));
        }
        profile.validate(cfg)?;
        let rtf_unoccluded = nearfield_rtf(geom, cfg, ref_index)?;
        let noise_cov_unoccluded = diffuse_coherence(geom, cfg)
            .into_iter()
            .map(|mut r| {
                r.load_diagonal(COHERENCE_FLOOR);
                let scale = r.dim() as f64 / r.trace_real();
                r.scaled(scale)
            })
            .collect();
        Ok(Self {
            rtf_unoccluded,
            noise_cov_unoccluded,
            occlusion_profile: profile.clone(),
            ref_index,
        })
    }

    pub fn bins(&self) -> usize {
        self.rtf_unoccluded.len()
    }

    pub fn num_mics(&self) -> usize {
        self.rtf_unoccluded[0].len()
    }

    /// Occluded RTF vector at bin `k`: the speech occlusion transfer function
    /// applied to channel 0 of the unoccluded RTF.
    pub fn occluded_rtf(&self, k: usize) -> Vec<Complex64> {
        let mut h = self.rtf_unoccluded[k].clone();
        h[0] *= self.occlusion_profile.speech_tf[k];
        h
    }

    /// Occluded noise covariance at bin `k`: `G̃ R̃ G̃ᴴ` with the diagonal
    /// embedding of the noise occlusion transfer function.
    pub fn occluded_noise_cov(&self, k: usize) -> CovarianceMatrix {
        let m = self.num_mics();
        let mut d = vec![Complex64::ONE; m];
        d[0] = self.occlusion_profile.noise_tf[k];
        self.noise_cov_unoccluded[k].transform_diag(&d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::occlusion::parametric_occlusion_profile;

    fn apriori() -> AprioriData {
        let geom = ArrayGeometry::glasses_default();
        let cfg = WolaConfig::default_16k();
        let profile = parametric_occlusion_profile(800.0, 1500.0, 20.0, &cfg).unwrap();
        AprioriData::from_scene(&geom, &cfg, &profile, geom.left_ref_index).unwrap()
    }

    #[test]
    fn reference_entries_are_one_and_diagonals_unit_mean() {
        let a = apriori();
        for k in 0..a.bins() {
            assert_eq!(a.rtf_unoccluded[k][a.ref_index], Complex64::ONE);
            let r = &a.noise_cov_unoccluded[k];
            assert!((r.trace_real() / r.dim() as f64 - 1.0).abs() < 1e-12);
            assert!(r.hermitian_error() < 1e-15);
            assert!(r.cholesky().is_ok(), "floored model must be PD at bin {k}");
        }
    }

    #[test]
    fn occluded_transforms_only_touch_channel_zero() {
        let a = apriori();
        let k = 40;
        let h_occ = a.occluded_rtf(k);
        assert_eq!(h_occ[0], a.rtf_unoccluded[k][0] * a.occlusion_profile.speech_tf[k]);
        for m in 1..a.num_mics() {
            assert_eq!(h_occ[m], a.rtf_unoccluded[k][m]);
        }
        let r_occ = a.occluded_noise_cov(k);
        let g = a.occlusion_profile.noise_tf[k];
        let r = &a.noise_cov_unoccluded[k];
        assert!((r_occ.get(0, 0) - r.get(0, 0) * g.norm_sqr()).norm() < 1e-14);
        assert!((r_occ.get(0, 2) - r.get(0, 2) * g).norm() < 1e-14);
        assert_eq!(r_occ.get(1, 3), r.get(1, 3));
    }

    #[test]
    fn occludable_reference_rejected() {
        let geom = ArrayGeometry::glasses_default();
        let cfg = WolaConfig::default_16k();
        let profile = OcclusionProfile::identity(cfg.bins());
        assert!(AprioriData::from_scene(&geom, &cfg, &profile, 0).is_err());
    }
}
