//! MVDR weights and the three occlusion-mitigation strategies.
//!
//! - adaptive: single-state covariance tracking with GEVD RTF estimation,
//! - switching: two fixed filters precomputed from a-priori data, selected
//!   per frame by the occlusion detection,
//! - hybrid: occlusion-switched dual-state tracking, estimating RTF and
//!   weights from whichever state pair is active.
//!
//! Bins are independent and processed in parallel; frames within a bin are
//! strictly sequential. The per-frame weights are logged so isolated signal
//! components can be shadow-filtered for metrics.

use num_complex::Complex64;

use crate::detect::FrameFlags;
use crate::error::{Error, Result};
use crate::estimation::{GevdScratch, SmoothingConfig, TrackerState};
use crate::exec;
use crate::linalg::{dotc, vec_is_finite, vec_norm, CholeskyFactor, CovarianceMatrix};
use crate::scene::AprioriData;
use crate::wola::{synthesize, Spectrogram, TimeSignal, WolaConfig};

/// MVDR weight vector: `w = R_n′⁻¹ h / (hᴴ R_n′⁻¹ h)` with diagonal loading
/// `R_n′ = R_n + loading·(trace/M)·I`.
pub fn mvdr(r_n: &CovarianceMatrix, h: &[Complex64], loading: f64) -> Result<Vec<Complex64>> {
    if !r_n.is_finite() || !vec_is_finite(h) {
        return Err(Error::Numerical { op: "mvdr", detail: "non-finite input".into() });
    }
    let chol = r_n.loaded(loading).cholesky()?;
    let mut w = vec![Complex64::ZERO; h.len()];
    let mut tmp = vec![Complex64::ZERO; h.len()];
    mvdr_prefactored(&chol, h, &mut w, &mut tmp)?;
    Ok(w)
}

/// MVDR with a prefactored loaded noise covariance; writes into `w`.
pub fn mvdr_prefactored(
    chol: &CholeskyFactor,
    h: &[Complex64],
    w: &mut [Complex64],
    tmp: &mut [Complex64],
) -> Result<()> {
    chol.solve(h, w, tmp);
    let denom = dotc(h, w).re;
    if !denom.is_finite() || denom <= 0.0 {
        return Err(Error::Numerical {
            op: "mvdr",
            detail: format!("constraint normalization hᴴR⁻¹h = {denom}"),
        });
    }
    for v in w.iter_mut() {
        *v /= denom;
    }
    Ok(())
}

/// The two fixed MVDR filters of the switching strategy, per bin.
#[derive(Debug, Clone)]
pub struct FixedFilterPair {
    pub unoccluded: Vec<Vec<Complex64>>,
    pub occluded: Vec<Vec<Complex64>>,
}

impl FixedFilterPair {
    pub fn select(&self, k: usize, occluded: bool) -> &[Complex64] {
        if occluded {
            &self.occluded[k]
        } else {
            &self.unoccluded[k]
        }
    }
}

/// Precomputes `w̃_ø = mvdr(R̃_n,ø, h̃_ø)` and `w̃_o = mvdr(G̃R̃_n,øG̃ᴴ, B̃h̃_ø)`
/// from the a-priori data.
pub fn precompute_fixed_filters(apriori: &AprioriData, loading: f64) -> Result<FixedFilterPair> {
    let bins = apriori.bins();
    let mut unoccluded = Vec::with_capacity(bins);
    let mut occluded = Vec::with_capacity(bins);
    for k in 0..bins {
        unoccluded.push(mvdr(&apriori.noise_cov_unoccluded[k], &apriori.rtf_unoccluded[k], loading)?);
        occluded.push(mvdr(&apriori.occluded_noise_cov(k), &apriori.occluded_rtf(k), loading)?);
    }
    Ok(FixedFilterPair { unoccluded, occluded })
}

/// Processing strategy selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    Adaptive,
    Switching,
    Hybrid,
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Adaptive => "adaptive",
            Strategy::Switching => "switching",
            Strategy::Hybrid => "hybrid",
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adaptive" => Ok(Strategy::Adaptive),
            "switching" => Ok(Strategy::Switching),
            "hybrid" => Ok(Strategy::Hybrid),
            other => Err(Error::InvalidConfig(format!("unknown strategy '{other}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct StrategyConfig {
    pub strategy: Strategy,
    pub smoothing: SmoothingConfig,
    /// Diagonal loading relative to `trace/M` for every noise inversion.
    pub loading: f64,
    /// Warm-started power iterations per frame.
    pub gevd_iterations: usize,
    /// Weight-norm guard; exceeding it resets to the a-priori fixed filter.
    pub divergence_limit: f64,
}

impl StrategyConfig {
    pub fn new(strategy: Strategy) -> Self {
        Self {
            strategy,
            smoothing: SmoothingConfig::default_16k(),
            loading: 1e-4,
            gevd_iterations: 2,
            divergence_limit: 1e3,
        }
    }
}

/// Per-frame, per-bin weight vectors from a processing run.
#[derive(Debug, Clone)]
pub struct WeightLog {
    frames: usize,
    bins: usize,
    mics: usize,
    data: Vec<Complex64>,
}

impl WeightLog {
    pub fn zeros(frames: usize, bins: usize, mics: usize) -> Self {
        Self { frames, bins, mics, data: vec![Complex64::ZERO; frames * bins * mics] }
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn mics(&self) -> usize {
        self.mics
    }

    #[inline]
    pub fn weight(&self, t: usize, k: usize) -> &[Complex64] {
        let at = (t * self.bins + k) * self.mics;
        &self.data[at..at + self.mics]
    }

    #[inline]
    fn weight_mut(&mut self, t: usize, k: usize) -> &mut [Complex64] {
        let at = (t * self.bins + k) * self.mics;
        &mut self.data[at..at + self.mics]
    }

    pub fn set_weight(&mut self, t: usize, k: usize, w: &[Complex64]) {
        self.weight_mut(t, k).copy_from_slice(w);
    }

    /// Raw little-endian dump (re, im interleaved), for offline analysis.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.data.len() * 16 + 24);
        for dim in [self.frames as u64, self.bins as u64, self.mics as u64] {
            out.extend_from_slice(&dim.to_le_bytes());
        }
        for v in &self.data {
            out.extend_from_slice(&v.re.to_le_bytes());
            out.extend_from_slice(&v.im.to_le_bytes());
        }
        out
    }
}

/// Result of a processing run: the single-channel enhanced spectrogram, the
/// weight log, and how often the divergence guard fired.
#[derive(Debug, Clone)]
pub struct ProcessOutput {
    pub enhanced: Spectrogram,
    pub weights: WeightLog,
    pub divergence_resets: usize,
}

/// Runs one strategy over a noisy spectrogram, producing the beamformed
/// output `Z(t,k) = w(t,k)ᴴ y(t,k)` and the full weight log.
pub fn process(
    noisy: &Spectrogram,
    flags: &FrameFlags,
    apriori: &AprioriData,
    cfg: &StrategyConfig,
) -> Result<ProcessOutput> {
    let (frames, bins, mics) = (noisy.frames(), noisy.bins(), noisy.channels());
    if flags.len() != frames {
        return Err(Error::DimensionMismatch(format!(
            "flags cover {} frames, spectrogram has {frames}",
            flags.len()
        )));
    }
    if apriori.bins() != bins || apriori.num_mics() != mics {
        return Err(Error::DimensionMismatch(format!(
            "a-priori data is {}x{}, spectrogram {}x{}",
            apriori.bins(),
            apriori.num_mics(),
            bins,
            mics
        )));
    }
    cfg.smoothing.validate()?;
    let fixed = precompute_fixed_filters(apriori, cfg.loading)?;
    let raw = noisy.data.as_slice().expect("spectrogram is contiguous");

    // Bins are independent; parallelize over contiguous bin chunks and walk
    // frames in order inside each chunk, so every frame row is streamed once.
    const CHUNK: usize = 16;
    let n_chunks = bins.div_ceil(CHUNK);

    struct ChunkResult {
        k0: usize,
        z: Vec<Complex64>,
        w: Vec<Complex64>,
        resets: usize,
    }

    let per_chunk: Vec<ChunkResult> = exec::try_map_indexed(n_chunks, |ci| -> Result<ChunkResult> {
        let k0 = ci * CHUNK;
        let k1 = (k0 + CHUNK).min(bins);
        let width = k1 - k0;
        let mut z = vec![Complex64::ZERO; frames * width];
        let mut w_log = vec![Complex64::ZERO; frames * width * mics];
        let mut resets = 0usize;

        let mut trackers: Vec<Option<TrackerState>> = (k0..k1)
            .map(|k| match cfg.strategy {
                Strategy::Switching => None,
                Strategy::Adaptive => Some(TrackerState::init_single(apriori, k)),
                Strategy::Hybrid => Some(TrackerState::init_dual(apriori, k)),
            })
            .collect();
        let mut scratch = GevdScratch::new(mics);
        let mut w = vec![Complex64::ZERO; mics];
        let mut tmp = vec![Complex64::ZERO; mics];

        for t in 0..frames {
            let vad = flags.vad[t];
            let od = flags.od[t];
            let row = &raw[(t * bins + k0) * mics..(t * bins + k1) * mics];
            for (i, tracker) in trackers.iter_mut().enumerate() {
                let k = k0 + i;
                let y = &row[i * mics..(i + 1) * mics];
                match tracker {
                    None => {
                        w.copy_from_slice(fixed.select(k, od));
                    }
                    Some(state) => {
                        let active = state.update(y, vad, od, &cfg.smoothing);
                        active
                            .refresh_rtf(
                                apriori.ref_index,
                                cfg.gevd_iterations,
                                cfg.loading,
                                &mut scratch,
                            )
                            .map_err(|_| Error::Divergence {
                                frame: t,
                                bin: k,
                                norm: f64::INFINITY,
                            })?;
                        mvdr_prefactored(active.chol(), &active.rtf, &mut w, &mut tmp).map_err(
                            |_| Error::Divergence { frame: t, bin: k, norm: f64::INFINITY },
                        )?;
                    }
                }

                let norm = vec_norm(&w);
                if !norm.is_finite() {
                    return Err(Error::Divergence { frame: t, bin: k, norm });
                }
                if norm > cfg.divergence_limit {
                    w.copy_from_slice(fixed.select(k, od));
                    resets += 1;
                }

                z[t * width + i] = dotc(&w, y);
                w_log[(t * width + i) * mics..(t * width + i + 1) * mics].copy_from_slice(&w);
            }
        }
        Ok(ChunkResult { k0, z, w: w_log, resets })
    })?;

    let mut enhanced = Spectrogram::zeros(frames, bins, 1);
    let mut weights = WeightLog::zeros(frames, bins, mics);
    let mut divergence_resets = 0;
    for r in &per_chunk {
        divergence_resets += r.resets;
        let width = r.z.len() / frames;
        for t in 0..frames {
            for i in 0..width {
                enhanced.data[(t, r.k0 + i, 0)] = r.z[t * width + i];
                weights
                    .weight_mut(t, r.k0 + i)
                    .copy_from_slice(&r.w[(t * width + i) * mics..(t * width + i + 1) * mics]);
            }
        }
    }
    Ok(ProcessOutput { enhanced, weights, divergence_resets })
}

/// Applies a logged weight trajectory to an isolated component spectrogram.
pub fn apply_weights(weights: &WeightLog, component: &Spectrogram) -> Result<Spectrogram> {
    if weights.frames() != component.frames()
        || weights.bins() != component.bins()
        || weights.mics() != component.channels()
    {
        return Err(Error::DimensionMismatch(format!(
            "weight log {}x{}x{} vs component {}x{}x{}",
            weights.frames(),
            weights.bins(),
            weights.mics(),
            component.frames(),
            component.bins(),
            component.channels()
        )));
    }
    let (frames, bins, mics) = (component.frames(), component.bins(), component.channels());
    let mut out = Spectrogram::zeros(frames, bins, 1);
    let mut y = vec![Complex64::ZERO; mics];
    for t in 0..frames {
        for k in 0..bins {
            for (m, v) in y.iter_mut().enumerate() {
                *v = component.data[(t, k, m)];
            }
            out.data[(t, k, 0)] = dotc(weights.weight(t, k), &y);
        }
    }
    Ok(out)
}

/// Shadow filtering: the exact per-frame weights applied to an isolated
/// component, synthesized back to the time domain.
pub fn shadow_apply(
    weights: &WeightLog,
    component: &Spectrogram,
    cfg: &WolaConfig,
) -> Result<TimeSignal> {
    let filtered = apply_weights(weights, component)?;
    synthesize(&filtered, cfg)
}
