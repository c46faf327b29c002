//! Privacy primitives: Laplace noise, exact list frequencies, and a stable
//! histogram over lists of predictors.

use std::collections::BTreeMap;

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypothesis::{Labels, Predictor};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrivacyParams {
    pub epsilon: f64,
    pub delta: f64,
}

impl PrivacyParams {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::param("epsilon", format!("must be positive, got {epsilon}")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::param("delta", format!("must lie in (0,1), got {delta}")));
        }
        Ok(PrivacyParams { epsilon, delta })
    }
}

/// Seed plus stream id; identical pairs give identical draw sequences.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSeed {
    pub seed: u64,
    pub stream: u64,
}

impl RngSeed {
    pub fn new(seed: u64, stream: u64) -> Self {
        RngSeed { seed, stream }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }

    /// A child seed, independent of the parent's draws.
    pub fn derive(&self, index: u64) -> RngSeed {
        // SplitMix64 finalizer over (seed, stream, index)
        let mut z = self
            .seed
            .wrapping_add(self.stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
            .wrapping_add(index.wrapping_add(1).wrapping_mul(0xBF58_476D_1CE4_E5B9));
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        RngSeed::new(z ^ (z >> 31), self.stream)
    }
}

/// The ordered list `L_t` of per-tree predictors.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct HypList {
    entries: Vec<Predictor>,
}

impl HypList {
    pub fn new(entries: Vec<Predictor>) -> Self {
        HypList { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[Predictor] {
        &self.entries
    }

    pub fn count(&self, f: &Predictor) -> usize {
        self.entries.iter().filter(|e| *e == f).count()
    }

    /// `freq_L(f) = |{i : L[i] = f}| / k`, exactly.
    pub fn freq(&self, f: &Predictor) -> Result<Ratio<u64>> {
        if self.is_empty() {
            return Err(Error::EmptyList);
        }
        Ok(Ratio::new(self.count(f) as u64, self.len() as u64))
    }

    pub fn freq_f64(&self, f: &Predictor) -> Result<f64> {
        let r = self.freq(f)?;
        Ok(*r.numer() as f64 / *r.denom() as f64)
    }

    /// Counts of the distinct non-⊥ entries, in fingerprint order.
    pub fn labelled_counts(&self) -> BTreeMap<Labels, usize> {
        let mut counts = BTreeMap::new();
        for e in &self.entries {
            if let Predictor::Labels(l) = e {
                *counts.entry(l.clone()).or_insert(0) += 1;
            }
        }
        counts
    }

    /// Number of positions at which two equal-length lists differ.
    pub fn hamming(&self, other: &HypList) -> usize {
        assert_eq!(self.len(), other.len());
        self.entries
            .iter()
            .zip(&other.entries)
            .filter(|(a, b)| a != b)
            .count()
    }
}

impl FromIterator<Predictor> for HypList {
    fn from_iter<I: IntoIterator<Item = Predictor>>(iter: I) -> Self {
        HypList::new(iter.into_iter().collect())
    }
}

/// One draw from Laplace(0, scale) by inverse-CDF sampling.
pub fn laplace<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> Result<f64> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::param("scale", format!("must be positive, got {scale}")));
    }
    Ok(laplace_unchecked(scale, rng))
}

pub(crate) fn laplace_unchecked<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.gen::<f64>() - 0.5;
        let tail = 1.0 - 2.0 * u.abs();
        if tail > 0.0 {
            return -scale * u.signum() * tail.ln();
        }
    }
}

/// Parameters of one histogram release. `beta` is the failure probability
/// the release threshold is calibrated for.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistParams {
    pub epsilon: f64,
    pub delta: f64,
    pub eta: f64,
    pub beta: f64,
}

impl HistParams {
    pub fn new(epsilon: f64, delta: f64, eta: f64, beta: f64) -> Result<Self> {
        PrivacyParams::new(epsilon, delta)?;
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(Error::param("eta", format!("must lie in (0,1], got {eta}")));
        }
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(Error::param("beta", format!("must lie in (0,1], got {beta}")));
        }
        Ok(HistParams {
            epsilon,
            delta,
            eta,
            beta,
        })
    }

    /// Laplace scale on frequencies: one substituted entry moves two bins by
    /// `1/k` each.
    pub fn noise_scale(&self, k: usize) -> f64 {
        2.0 / (k as f64 * self.epsilon)
    }

    /// Release threshold on noisy frequencies for a list of length `k`.
    ///
    /// The largest of three floors:
    /// * `η/2`;
    /// * `1/k + b·ln(1/(2δ))`, so that a bin present in only one of two
    ///   neighbouring lists is released with probability at most δ;
    /// * `η/4 + b·ln(k/β)`, so that with probability `1 − β/2` no entry of
    ///   frequency at most `η/4` is released (union bound over ≤ k bins).
    pub fn threshold(&self, k: usize) -> f64 {
        let b = self.noise_scale(k);
        let kf = k as f64;
        let privacy = 1.0 / kf + b * (1.0 / (2.0 * self.delta)).ln();
        let accuracy = self.eta / 4.0 + b * (kf / self.beta).ln();
        (self.eta / 2.0).max(privacy).max(accuracy)
    }
}

/// Output of a histogram release: noisy frequencies of the released entries.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct HistRelease {
    pub released: BTreeMap<Labels, f64>,
    pub threshold: f64,
}

impl HistRelease {
    pub fn is_empty(&self) -> bool {
        self.released.is_empty()
    }

    pub fn get(&self, f: &Predictor) -> Option<f64> {
        f.labels().and_then(|l| self.released.get(l).copied())
    }
}

/// Stable histogram over `list`: Laplace noise on every non-⊥ bin with a
/// nonzero count, release of the bins above [`HistParams::threshold`],
/// estimates clamped to `[0, 1]`. Bins are visited in fingerprint order, so
/// the draw sequence is a function of the distinct entries alone.
pub fn stable_histogram<R: Rng + ?Sized>(
    list: &HypList,
    params: &HistParams,
    rng: &mut R,
) -> Result<HistRelease> {
    if list.is_empty() {
        return Err(Error::EmptyList);
    }
    let k = list.len();
    let b = params.noise_scale(k);
    let threshold = params.threshold(k);
    let mut released = BTreeMap::new();
    for (labels, count) in list.labelled_counts() {
        let noisy = count as f64 / k as f64 + laplace_unchecked(b, rng);
        if noisy > threshold {
            released.insert(labels, noisy.clamp(0.0, 1.0));
        }
    }
    Ok(HistRelease {
        released,
        threshold,
    })
}

/// The released entry with the largest noisy frequency, ties to the
/// lexicographically smallest fingerprint; ⊥ when nothing was released.
pub fn argmax_release(release: &HistRelease) -> Predictor {
    let mut best: Option<(&Labels, f64)> = None;
    for (l, &v) in &release.released {
        if best.is_none_or(|(_, bv)| v > bv) {
            best = Some((l, v));
        }
    }
    best.map_or(Predictor::Bottom, |(l, _)| Predictor::Labels(l.clone()))
}

/// List length above which the histogram guarantees hold:
/// `4/η + ln(1/(η²βδ))/(ηε)`.
pub fn theta_hist(eta: f64, beta: f64, epsilon: f64, delta: f64) -> Result<f64> {
    HistParams::new(epsilon, delta, eta, beta)?;
    Ok(4.0 / eta + (1.0 / (eta * eta * beta * delta)).ln() / (eta * epsilon))
}
