//! Recursive covariance tracking and GEVD-based RTF estimation.
//!
//! The noisy covariance updates on speech frames and the noise covariance on
//! noise frames; the gated matrix holds bit-identically. The switching-
//! adaptive variant keeps one `(R_y, R_n)` pair per occlusion state and only
//! ever touches the pair for the currently detected state, so each pair's
//! trajectory is exactly a single-state tracker run on that state's frame
//! subsequence.
//!
//! The RTF estimate is the de-whitened principal eigenvector of the pencil
//! `(R_n, R_y)`, obtained by warm-started power iteration on the whitened
//! matrix `L⁻¹ R_y L⁻ᴴ` where `L` is the Cholesky factor of the (diagonally
//! loaded) noise covariance. De-whitening multiplies by `L` and normalizes
//! the reference entry to one.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{dotc, vec_norm, CholeskyFactor, CovarianceMatrix};
use crate::scene::AprioriData;

/// Diagonal loading applied to the noise covariance before inversion.
pub const NOISE_LOADING: f64 = 1e-4;

/// Smoothing constants derived from forgetting times as `α = exp(−hop/τ)`.
#[derive(Debug, Clone, Copy)]
pub struct SmoothingConfig {
    pub alpha_y: f64,
    pub alpha_n: f64,
}

impl SmoothingConfig {
    pub fn from_forgetting_times(tau_y_s: f64, tau_n_s: f64, hop_s: f64) -> Result<Self> {
        if tau_y_s <= 0.0 || tau_n_s <= 0.0 || hop_s <= 0.0 {
            return Err(Error::InvalidConfig("forgetting times and hop must be positive".into()));
        }
        let cfg = Self {
            alpha_y: (-hop_s / tau_y_s).exp(),
            alpha_n: (-hop_s / tau_n_s).exp(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Forgetting times of 0.3 s (noisy) and 0.5 s (noise) at a 4 ms hop.
    pub fn default_16k() -> Self {
        Self::from_forgetting_times(0.3, 0.5, 0.004).expect("defaults are valid")
    }

    pub fn validate(&self) -> Result<()> {
        for a in [self.alpha_y, self.alpha_n] {
            if !(a > 0.0 && a < 1.0) {
                return Err(Error::InvalidConfig(format!("smoothing constant {a} outside (0,1)")));
            }
        }
        Ok(())
    }
}

/// Noisy-covariance update: smooths on speech frames, holds otherwise.
pub fn update_noisy(r_y: &mut CovarianceMatrix, y: &[Complex64], vad: bool, alpha_y: f64) {
    if vad {
        r_y.smooth_update(alpha_y, y);
    }
}

/// Noise-covariance update: smooths on noise frames, holds otherwise.
pub fn update_noise(r_n: &mut CovarianceMatrix, y: &[Complex64], vad: bool, alpha_n: f64) {
    if !vad {
        r_n.smooth_update(alpha_n, y);
    }
}

/// One occlusion state's covariance pair, its warm-started RTF vector, and a
/// cached Cholesky factor of the loaded noise covariance.
#[derive(Debug, Clone)]
pub struct BinTracker {
    pub r_y: CovarianceMatrix,
    pub r_n: CovarianceMatrix,
    pub rtf: Vec<Complex64>,
    chol: CholeskyFactor,
    chol_fresh: bool,
    loaded: CovarianceMatrix,
}

impl BinTracker {
    pub fn new(r_y: CovarianceMatrix, r_n: CovarianceMatrix, rtf: Vec<Complex64>) -> Self {
        let dim = r_y.dim();
        Self {
            r_y,
            r_n,
            rtf,
            chol: CholeskyFactor::uninit(dim),
            chol_fresh: false,
            loaded: CovarianceMatrix::zeros(dim),
        }
    }

    /// Applies the VAD-gated pair update for one frame.
    pub fn observe(&mut self, y: &[Complex64], vad: bool, smoothing: &SmoothingConfig) {
        update_noisy(&mut self.r_y, y, vad, smoothing.alpha_y);
        if !vad {
            update_noise(&mut self.r_n, y, vad, smoothing.alpha_n);
            self.chol_fresh = false;
        }
    }

    /// Cholesky factor of `R_n` with diagonal loading, refreshed only when
    /// the noise covariance has changed since the last call.
    pub fn factor(&mut self, loading: f64) -> Result<&CholeskyFactor> {
        if !self.chol_fresh {
            self.loaded.clone_from(&self.r_n);
            self.loaded.load_diagonal(loading);
            self.chol.refactor(&self.loaded)?;
            self.chol_fresh = true;
        }
        Ok(&self.chol)
    }

    /// The cached factor; only valid directly after [`BinTracker::factor`] or
    /// [`BinTracker::refresh_rtf`].
    pub fn chol(&self) -> &CholeskyFactor {
        debug_assert!(self.chol_fresh, "factor() must run before chol()");
        &self.chol
    }

    /// Refreshes the factorization if stale and advances the warm-started
    /// RTF estimate; returns `(phi_x, eigenvalue)`.
    pub fn refresh_rtf(
        &mut self,
        ref_index: usize,
        iters: usize,
        loading: f64,
        scratch: &mut GevdScratch,
    ) -> Result<(f64, f64)> {
        if !self.chol_fresh {
            self.loaded.clone_from(&self.r_n);
            self.loaded.load_diagonal(loading);
            self.chol.refactor(&self.loaded)?;
            self.chol_fresh = true;
        }
        estimate_rtf_gevd_warm(&self.chol, &self.r_y, ref_index, iters, &mut self.rtf, scratch)
    }
}

/// Tracker state for one frequency bin: a single pair for the adaptive
/// strategy or an occlusion-switched pair of pairs for the hybrid strategy.
#[derive(Debug, Clone)]
pub enum TrackerState {
    Single(BinTracker),
    Dual([BinTracker; 2]),
}

impl TrackerState {
    /// Adaptive initialization from the a-priori data at bin `k`:
    /// `R_y ← h̃ h̃ᴴ`, `R_n ← R̃_n`, warm RTF `h̃`.
    pub fn init_single(apriori: &AprioriData, k: usize) -> Self {
        let h = apriori.rtf_unoccluded[k].clone();
        TrackerState::Single(BinTracker::new(
            CovarianceMatrix::outer(&h),
            apriori.noise_cov_unoccluded[k].clone(),
            h,
        ))
    }

    /// Switching-adaptive initialization at bin `k`: the unoccluded pair as
    /// in [`TrackerState::init_single`], and the occluded pair from the
    /// occlusion transforms of the same a-priori data.
    pub fn init_dual(apriori: &AprioriData, k: usize) -> Self {
        let h = apriori.rtf_unoccluded[k].clone();
        let b = apriori.occlusion_profile.speech_tf[k];
        let mut d = vec![Complex64::ONE; h.len()];
        d[0] = b;
        let r_y_unocc = CovarianceMatrix::outer(&h);
        let r_y_occ = r_y_unocc.transform_diag(&d);
        let unocc = BinTracker::new(r_y_unocc, apriori.noise_cov_unoccluded[k].clone(), h);
        let occ = BinTracker::new(r_y_occ, apriori.occluded_noise_cov(k), apriori.occluded_rtf(k));
        TrackerState::Dual([unocc, occ])
    }

    /// Updates the tracker for one frame and returns the active pair. The
    /// single-state tracker ignores the occlusion flag; the dual-state
    /// tracker updates only the pair for the detected state and leaves the
    /// other untouched, resuming from wherever it last stopped.
    pub fn update(
        &mut self,
        y: &[Complex64],
        vad: bool,
        od: bool,
        smoothing: &SmoothingConfig,
    ) -> &mut BinTracker {
        match self {
            TrackerState::Single(t) => {
                t.observe(y, vad, smoothing);
                t
            }
            TrackerState::Dual(pair) => {
                let t = &mut pair[usize::from(od)];
                t.observe(y, vad, smoothing);
                t
            }
        }
    }

    pub fn active(&self, od: bool) -> &BinTracker {
        match self {
            TrackerState::Single(t) => t,
            TrackerState::Dual(pair) => &pair[usize::from(od)],
        }
    }
}

/// RTF estimate with the speech PSD read off the dominant generalized
/// eigenvalue (diagnostic only).
#[derive(Debug, Clone)]
pub struct RtfEstimate {
    /// Estimated RTF vector, reference entry exactly one.
    pub h: Vec<Complex64>,
    /// `max(0, λ₁ − 1)` mapped back through the de-whitening scale.
    pub phi_x: f64,
    /// Dominant generalized eigenvalue of the pencil `(R_n, R_y)`.
    pub eigenvalue: f64,
}

/// Scratch buffers for the warm-started power iteration.
#[derive(Debug, Clone)]
pub struct GevdScratch {
    u: Vec<Complex64>,
    t: Vec<Complex64>,
    v: Vec<Complex64>,
}

impl GevdScratch {
    pub fn new(dim: usize) -> Self {
        Self {
            u: vec![Complex64::ZERO; dim],
            t: vec![Complex64::ZERO; dim],
            v: vec![Complex64::ZERO; dim],
        }
    }
}

/// Power iteration on the whitened pencil with a prefactored noise Cholesky.
/// `warm` carries the previous RTF estimate in and the new one out; returns
/// `(phi_x, eigenvalue)`. A vanishing iterate falls back to the warm vector.
pub fn estimate_rtf_gevd_warm(
    chol: &CholeskyFactor,
    r_y: &CovarianceMatrix,
    ref_index: usize,
    iters: usize,
    warm: &mut [Complex64],
    scratch: &mut GevdScratch,
) -> Result<(f64, f64)> {
    let GevdScratch { u, t, v } = scratch;
    // Whiten the warm start: u = L⁻¹ h_prev.
    chol.solve_lower(warm, u);
    let n0 = vec_norm(u);
    if !n0.is_finite() {
        return Err(Error::Numerical { op: "gevd", detail: "non-finite warm start".into() });
    }
    if n0 == 0.0 {
        return Ok((0.0, 1.0));
    }
    for x in u.iter_mut() {
        *x /= n0;
    }

    let mut lambda = 1.0;
    for _ in 0..iters {
        // v = L⁻¹ R_y L⁻ᴴ u, the whitened pencil applied to u.
        chol.solve_lower_adjoint(u, t);
        r_y.mul_vec(t, v);
        chol.solve_lower(v, t);
        lambda = dotc(u, t).re; // Rayleigh quotient; ‖u‖ = 1.
        let nrm = vec_norm(t);
        if !nrm.is_finite() {
            return Err(Error::Numerical { op: "gevd", detail: "power iteration diverged".into() });
        }
        if nrm == 0.0 {
            // Degenerate iterate: keep the previous estimate.
            return Ok((0.0, lambda));
        }
        for (a, b) in u.iter_mut().zip(t.iter()) {
            *a = b / nrm;
        }
    }

    // De-whiten: h ∝ L u, normalized at the reference entry.
    chol.mul_lower(u, v);
    let c = v[ref_index];
    if c.norm_sqr() < 1e-300 {
        return Ok((0.0, lambda));
    }
    for (h, x) in warm.iter_mut().zip(v.iter()) {
        *h = x / c;
    }
    warm[ref_index] = Complex64::ONE;
    // ‖L⁻¹ĥ‖² = ‖u/c‖² = 1/|c|², so φ_x = (λ−1)·|c|².
    let phi_x = (lambda - 1.0).max(0.0) * c.norm_sqr();
    Ok((phi_x, lambda))
}

/// Convenience wrapper: loads and factors the noise covariance, then runs the
/// warm-started power iteration.
pub fn estimate_rtf_gevd(
    r_n: &CovarianceMatrix,
    r_y: &CovarianceMatrix,
    ref_index: usize,
    iters: usize,
    prev: &[Complex64],
) -> Result<RtfEstimate> {
    if !r_n.is_finite() || !r_y.is_finite() {
        return Err(Error::Numerical { op: "gevd", detail: "non-finite covariance input".into() });
    }
    let chol = r_n.loaded(NOISE_LOADING).cholesky()?;
    let mut warm = prev.to_vec();
    let mut scratch = GevdScratch::new(r_n.dim());
    let (phi_x, eigenvalue) =
        estimate_rtf_gevd_warm(&chol, r_y, ref_index, iters, &mut warm, &mut scratch)?;
    Ok(RtfEstimate { h: warm, phi_x, eigenvalue })
}
