//! Sparse-vector publication of a frequent hypothesis.
//!
//! [`AboveThreshold`] answers a stream of low-sensitivity queries and charges
//! budget only on answers above a noisy threshold. [`HistSparse`] uses it to
//! decide when the currently published predictor has lost its support in the
//! list, and only then re-runs the stable histogram.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypothesis::Predictor;
use crate::mech::{argmax_release, laplace_unchecked, stable_histogram, HistParams, HypList, PrivacyParams};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseParams {
    pub privacy: PrivacyParams,
    pub eta: f64,
    /// Budget of threshold crossings, counting the initial release.
    pub c: u64,
    /// List length.
    pub k: usize,
    pub beta: f64,
}

impl SparseParams {
    pub fn new(privacy: PrivacyParams, eta: f64, c: u64, k: usize, beta: f64) -> Result<Self> {
        if c < 1 {
            return Err(Error::param("c", "must be at least 1"));
        }
        if k < 1 {
            return Err(Error::param("k", "must be at least 1"));
        }
        // validates eta and beta
        HistParams::new(privacy.epsilon, privacy.delta, eta, beta)?;
        Ok(SparseParams {
            privacy,
            eta,
            c,
            k,
            beta,
        })
    }

    /// `σ = 2c/(kε)`.
    pub fn sigma(&self) -> f64 {
        2.0 * self.c as f64 / (self.k as f64 * self.privacy.epsilon)
    }

    /// `θ = 1 − 3η/32`.
    pub fn theta(&self) -> f64 {
        1.0 - 3.0 * self.eta / 32.0
    }

    /// `α = η/32`, the slack of the threshold test.
    pub fn alpha(&self) -> f64 {
        self.eta / 32.0
    }

    /// Each histogram call runs at `(ε/(2c), δ/c, η)`.
    pub fn hist_params(&self) -> HistParams {
        let c = self.c as f64;
        HistParams {
            epsilon: self.privacy.epsilon / (2.0 * c),
            delta: self.privacy.delta / c,
            eta: self.eta,
            beta: self.beta,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Response {
    Above,
    Below,
}

/// Above-threshold with a crossing budget `c`.
///
/// A step that takes the counter to `c` still returns its answer; the state
/// is then aborted and every later step fails with
/// [`Error::BudgetExhausted`].
#[derive(Clone, Debug)]
pub struct AboveThreshold {
    theta: f64,
    sigma: f64,
    c: u64,
    counter: u64,
    noisy_threshold: f64,
    aborted: bool,
}

impl AboveThreshold {
    /// Starts with `counter = 0`.
    pub fn new<R: Rng + ?Sized>(theta: f64, sigma: f64, c: u64, rng: &mut R) -> Result<Self> {
        Self::with_counter(theta, sigma, c, 0, rng)
    }

    pub fn with_counter<R: Rng + ?Sized>(
        theta: f64,
        sigma: f64,
        c: u64,
        counter: u64,
        rng: &mut R,
    ) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::param("sigma", format!("must be positive, got {sigma}")));
        }
        if c < 1 {
            return Err(Error::param("c", "must be at least 1"));
        }
        Ok(AboveThreshold {
            theta,
            sigma,
            c,
            counter,
            noisy_threshold: theta + laplace_unchecked(sigma, rng),
            aborted: counter >= c,
        })
    }

    pub fn counter(&self) -> u64 {
        self.counter
    }

    pub fn is_aborted(&self) -> bool {
        self.aborted
    }

    pub fn noisy_threshold(&self) -> f64 {
        self.noisy_threshold
    }

    pub fn step<R: Rng + ?Sized>(&mut self, query: f64, rng: &mut R) -> Result<Response> {
        if self.aborted {
            return Err(Error::BudgetExhausted);
        }
        let nu = laplace_unchecked(2.0 * self.sigma, rng);
        let response = if query + nu >= self.noisy_threshold {
            self.counter += 1;
            self.noisy_threshold = self.theta + laplace_unchecked(self.sigma, rng);
            Response::Above
        } else {
            Response::Below
        };
        if self.counter >= self.c {
            self.aborted = true;
        }
        Ok(response)
    }
}

/// What one round of [`HistSparse`] published.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseOutput {
    pub published: Predictor,
    /// Whether this round re-ran the histogram.
    pub hist_call: bool,
}

#[derive(Clone, Debug)]
pub struct HistSparse {
    params: SparseParams,
    hist: HistParams,
    svt: AboveThreshold,
    current: Predictor,
    hist_calls: u64,
}

impl HistSparse {
    /// Publishes `h₁ = hist(L₁)` and arms the threshold with `counter = 1`.
    pub fn init<R: Rng + ?Sized>(
        params: SparseParams,
        first: &HypList,
        rng: &mut R,
    ) -> Result<(HistSparse, Predictor)> {
        if first.len() != params.k {
            return Err(Error::ListLength {
                expected: params.k,
                got: first.len(),
            });
        }
        let svt = AboveThreshold::with_counter(params.theta(), params.sigma(), params.c, 1, rng)?;
        let hist = params.hist_params();
        let current = argmax_release(&stable_histogram(first, &hist, rng)?);
        let state = HistSparse {
            params,
            hist,
            svt,
            current: current.clone(),
            hist_calls: 1,
        };
        Ok((state, current))
    }

    pub fn params(&self) -> &SparseParams {
        &self.params
    }

    pub fn current(&self) -> &Predictor {
        &self.current
    }

    pub fn counter(&self) -> u64 {
        self.svt.counter()
    }

    pub fn is_aborted(&self) -> bool {
        self.svt.is_aborted()
    }

    /// Histogram calls so far, including the initial one.
    pub fn hist_calls(&self) -> u64 {
        self.hist_calls
    }

    /// `Q_t = 1 − freq_{L_t}(h_{t−1})`.
    pub fn query(&self, list: &HypList) -> Result<f64> {
        Ok(1.0 - list.freq_f64(&self.current)?)
    }

    pub fn step<R: Rng + ?Sized>(&mut self, list: &HypList, rng: &mut R) -> Result<SparseOutput> {
        if self.is_aborted() {
            return Err(Error::BudgetExhausted);
        }
        if list.len() != self.params.k {
            return Err(Error::ListLength {
                expected: self.params.k,
                got: list.len(),
            });
        }
        let q = self.query(list)?;
        let hist_call = self.svt.step(q, rng)? == Response::Above;
        if hist_call {
            self.current = argmax_release(&stable_histogram(list, &self.hist, rng)?);
            self.hist_calls += 1;
        }
        Ok(SparseOutput {
            published: self.current.clone(),
            hist_call,
        })
    }
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be positive, got {v}")))
    }
}

fn unit_open(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::param(name, format!("must lie in (0,1), got {v}")))
    }
}

/// List length sufficient for the sparse-vector accuracy bound:
/// `⌈8c(ln T + ln(2c/β))/(αε)⌉`.
pub fn theta_sparse(c: u64, alpha: f64, beta: f64, epsilon: f64, t: u64) -> Result<u64> {
    if c == 0 {
        return Err(Error::param("c", "must be positive"));
    }
    if t == 0 {
        return Err(Error::param("T", "must be positive"));
    }
    positive("alpha", alpha)?;
    positive("epsilon", epsilon)?;
    unit_open("beta", beta)?;
    let c = c as f64;
    let v = 8.0 * c * ((t as f64).ln() + (2.0 * c / beta).ln()) / (alpha * epsilon);
    Ok(v.ceil() as u64)
}

/// `max(theta_sparse(c, η/32, β, ε, T), ⌈Θ_hist(η, β, ε, δ)⌉)`.
pub fn theta_histsparse(c: u64, eta: f64, t: u64, beta: f64, epsilon: f64, delta: f64) -> Result<u64> {
    unit_open("delta", delta)?;
    let s = theta_sparse(c, eta / 32.0, beta, epsilon, t)?;
    let h = crate::mech::theta_hist(eta, beta, epsilon, delta)?.ceil() as u64;
    Ok(s.max(h))
}
