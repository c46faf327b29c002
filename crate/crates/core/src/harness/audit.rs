//! Empirical privacy audit: run a mechanism on two neighbouring inputs,
//! bucket the outcomes, and bound the log-ratio of bucket frequencies.

use std::collections::BTreeMap;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hypothesis::{Labels, Predictor};
use crate::mech::{argmax_release, laplace, stable_histogram, HistParams, HypList, RngSeed};
use crate::sparse::{AboveThreshold, Response};

pub const MIN_TRIALS: usize = 10_000;
pub const MIN_BUCKET: u64 = 30;
const CHUNKS: u64 = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mechanism {
    LaplaceCount,
    StableHistogram,
    AboveThresholdStream,
}

impl FromStr for Mechanism {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "laplace-count" => Ok(Mechanism::LaplaceCount),
            "stable-histogram" => Ok(Mechanism::StableHistogram),
            "above-threshold-stream" => Ok(Mechanism::AboveThresholdStream),
            _ => Err(Error::Unknown {
                kind: "mechanism",
                name: s.to_string(),
            }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Neighbor {
    /// Inputs differing in one element.
    Adjacent,
    /// The same input on both sides; a control.
    Identical,
}

impl FromStr for Neighbor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adjacent" => Ok(Neighbor::Adjacent),
            "identical" => Ok(Neighbor::Identical),
            _ => Err(Error::Unknown {
                kind: "neighbor",
                name: s.to_string(),
            }),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AuditSpec {
    pub mechanism: Mechanism,
    pub neighbor: Neighbor,
    pub epsilon: f64,
    pub delta: f64,
    /// Threshold crossings allowed for the above-threshold stream.
    pub c: u64,
    pub trials: usize,
    pub seed: u64,
}

impl AuditSpec {
    pub fn new(mechanism: Mechanism, neighbor: Neighbor, epsilon: f64, trials: usize, seed: u64) -> Self {
        let delta = match mechanism {
            Mechanism::StableHistogram => 0.01,
            _ => 0.0,
        };
        AuditSpec {
            mechanism,
            neighbor,
            epsilon,
            delta,
            c: 2,
            trials,
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Bucket {
    pub outcome: String,
    pub count: u64,
    pub count_neighbor: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AuditReport {
    pub mechanism: Mechanism,
    pub neighbor: String,
    pub trials: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub buckets: Vec<Bucket>,
    pub epsilon_hat: f64,
    pub slack: f64,
    pub pass: bool,
}

impl AuditReport {
    pub fn line(&self) -> String {
        format!(
            "{} {}: N = {}  eps_hat = {:.4}  budget = {} + {:.4}  {}",
            serde_json::to_string(&self.mechanism).unwrap().trim_matches('"'),
            self.neighbor,
            self.trials,
            self.epsilon_hat,
            self.epsilon,
            self.slack,
            if self.pass { "pass" } else { "fail" }
        )
    }
}

pub fn slack(epsilon: f64, trials: usize) -> f64 {
    3.0 * (2.0 / trials as f64).sqrt() * epsilon.exp()
}

/// `max ln((p − δ)/p′)` over both orientations and all buckets with at least
/// [`MIN_BUCKET`] hits on each side; 0 when no bucket qualifies.
pub fn epsilon_hat(buckets: &[Bucket], trials: usize, delta: f64) -> f64 {
    let n = trials as f64;
    let mut best = 0.0f64;
    for b in buckets {
        if b.count < MIN_BUCKET || b.count_neighbor < MIN_BUCKET {
            continue;
        }
        let p = b.count as f64 / n;
        let q = b.count_neighbor as f64 / n;
        for (a, z) in [(p, q), (q, p)] {
            if a - delta > 0.0 {
                best = best.max(((a - delta) / z).ln());
            }
        }
    }
    best
}

/// Input pair for one mechanism.
enum Inputs {
    Count(u64, u64),
    Lists(HypList, HypList),
    Queries(Vec<f64>, Vec<f64>),
}

const COUNT: u64 = 50;
const HIST_K: usize = 200;
const STREAM_K: usize = 10;
const STREAM_LEN: usize = 3;

fn inputs(spec: &AuditSpec) -> Inputs {
    let adjacent = spec.neighbor == Neighbor::Adjacent;
    match spec.mechanism {
        Mechanism::LaplaceCount => Inputs::Count(COUNT, COUNT + adjacent as u64),
        Mechanism::StableHistogram => {
            // Two heavy elements near the release threshold; the neighbour
            // moves one vote from the first to the second.
            let f = Predictor::Labels(Labels::from_bits([true, false]));
            let g = Predictor::Labels(Labels::from_bits([false, true]));
            let side = |nf: usize| {
                let mut v = vec![f.clone(); nf];
                v.resize(HIST_K, g.clone());
                HypList::new(v)
            };
            let nf = HIST_K / 2;
            Inputs::Lists(side(nf), side(nf - adjacent as usize))
        }
        Mechanism::AboveThresholdStream => {
            let q = vec![0.5; STREAM_LEN];
            let shift = if adjacent { 1.0 / STREAM_K as f64 } else { 0.0 };
            let q2 = q.iter().enumerate().map(|(i, v)| if i % 2 == 0 { v + shift } else { v - shift }).collect();
            Inputs::Queries(q, q2)
        }
    }
}

fn neighbor_description(spec: &AuditSpec) -> String {
    let kind = match spec.neighbor {
        Neighbor::Adjacent => "adjacent",
        Neighbor::Identical => "identical",
    };
    let what = match spec.mechanism {
        Mechanism::LaplaceCount => format!("count {COUNT} vs {}", COUNT + (spec.neighbor == Neighbor::Adjacent) as u64),
        Mechanism::StableHistogram => format!("k = {HIST_K}, one vote moved between two heavy bins"),
        Mechanism::AboveThresholdStream if spec.neighbor == Neighbor::Adjacent => {
            format!("{STREAM_LEN} queries at 0.5, moved alternately by ±1/{STREAM_K}")
        }
        Mechanism::AboveThresholdStream => format!("{STREAM_LEN} queries at 0.5"),
    };
    format!("{kind} ({what})")
}

fn outcome<R: Rng + ?Sized>(spec: &AuditSpec, inputs: &Inputs, neighbor: bool, rng: &mut R) -> Result<String> {
    match inputs {
        Inputs::Count(a, b) => {
            let c = if neighbor { *b } else { *a };
            let out = c as f64 + laplace(1.0 / spec.epsilon, rng)?;
            let mid = COUNT as f64 + 0.5;
            Ok(if out < mid { "low" } else { "high" }.to_string())
        }
        Inputs::Lists(a, b) => {
            let list = if neighbor { b } else { a };
            let params = HistParams::new(spec.epsilon, spec.delta, 0.5, 1.0)?;
            Ok(match argmax_release(&stable_histogram(list, &params, rng)?) {
                Predictor::Bottom => "bottom".to_string(),
                p => p.to_string(),
            })
        }
        Inputs::Queries(a, b) => {
            let qs = if neighbor { b } else { a };
            let sigma = 2.0 * spec.c as f64 / (STREAM_K as f64 * spec.epsilon);
            let mut at = AboveThreshold::new(0.5, sigma, spec.c, rng)?;
            let mut s = String::with_capacity(qs.len());
            for &q in qs {
                if at.is_aborted() {
                    break;
                }
                s.push(match at.step(q, rng)? {
                    Response::Above => 'T',
                    Response::Below => 'F',
                });
            }
            Ok(s)
        }
    }
}

/// Counts outcomes of `trials` runs on one side, in fixed-size chunks with
/// their own derived streams so the tally does not depend on thread count.
fn tally(spec: &AuditSpec, inputs: &Inputs, neighbor: bool) -> Result<BTreeMap<String, u64>> {
    let stream = 16 + neighbor as u64;
    let base = RngSeed::new(spec.seed, stream);
    let per_chunk = (spec.trials as u64).div_ceil(CHUNKS);
    let parts: Vec<Result<BTreeMap<String, u64>>> = (0..CHUNKS)
        .into_par_iter()
        .map(|chunk| {
            let start = chunk * per_chunk;
            let end = ((chunk + 1) * per_chunk).min(spec.trials as u64);
            let mut rng = base.derive(chunk).rng();
            let mut counts = BTreeMap::new();
            for _ in start..end {
                *counts.entry(outcome(spec, inputs, neighbor, &mut rng)?).or_insert(0) += 1;
            }
            Ok(counts)
        })
        .collect();
    let mut total = BTreeMap::new();
    for part in parts {
        for (k, v) in part? {
            *total.entry(k).or_insert(0) += v;
        }
    }
    Ok(total)
}

pub fn audit(spec: &AuditSpec) -> Result<AuditReport> {
    if spec.trials < MIN_TRIALS {
        return Err(Error::InsufficientTrials {
            got: spec.trials,
            min: MIN_TRIALS,
        });
    }
    if !(spec.epsilon > 0.0 && spec.epsilon.is_finite()) {
        return Err(Error::param("epsilon", format!("must be positive, got {}", spec.epsilon)));
    }
    let inputs = inputs(spec);
    let left = tally(spec, &inputs, false)?;
    let right = tally(spec, &inputs, true)?;
    let mut keys: Vec<&String> = left.keys().chain(right.keys()).collect();
    keys.sort();
    keys.dedup();
    let buckets: Vec<Bucket> = keys
        .into_iter()
        .map(|k| Bucket {
            outcome: k.clone(),
            count: left.get(k).copied().unwrap_or(0),
            count_neighbor: right.get(k).copied().unwrap_or(0),
        })
        .collect();
    let epsilon_hat = epsilon_hat(&buckets, spec.trials, spec.delta);
    let slack = slack(spec.epsilon, spec.trials);
    let budget = match spec.neighbor {
        Neighbor::Adjacent => spec.epsilon,
        Neighbor::Identical => 0.0,
    };
    Ok(AuditReport {
        mechanism: spec.mechanism,
        neighbor: neighbor_description(spec),
        trials: spec.trials,
        epsilon: spec.epsilon,
        delta: spec.delta,
        buckets,
        epsilon_hat,
        slack,
        pass: epsilon_hat <= budget + slack,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn too_few_trials() {
        let spec = AuditSpec::new(Mechanism::LaplaceCount, Neighbor::Adjacent, 0.5, 9_999, 1);
        assert_eq!(audit(&spec), Err(Error::InsufficientTrials { got: 9_999, min: 10_000 }));
    }

    #[test]
    fn epsilon_hat_ignores_thin_buckets() {
        let b = |c, d| Bucket {
            outcome: String::new(),
            count: c,
            count_neighbor: d,
        };
        assert_eq!(epsilon_hat(&[b(29, 1000)], 10_000, 0.0), 0.0);
        let e = epsilon_hat(&[b(200, 100)], 10_000, 0.0);
        assert!((e - 2f64.ln()).abs() < 1e-12);
        let e = epsilon_hat(&[b(200, 100)], 10_000, 0.005);
        assert!((e - 1.5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn laplace_buckets_match_analytic() {
        // P[count + Lap(2) < count + 1/2] = 1 − e^{−1/4}/2.
        let spec = AuditSpec::new(Mechanism::LaplaceCount, Neighbor::Identical, 0.5, 100_000, 7);
        let r = audit(&spec).unwrap();
        let low = r.buckets.iter().find(|b| b.outcome == "low").unwrap();
        let expect = 1.0 - 0.5 * (-0.25f64).exp();
        assert!((low.count as f64 / 1e5 - expect).abs() < 0.006);
        assert!(r.pass);
    }

    #[test]
    fn identical_control_rarely_fails() {
        for m in [Mechanism::LaplaceCount, Mechanism::StableHistogram, Mechanism::AboveThresholdStream] {
            let fails = (0..100)
                .filter(|&seed| {
                    let r = audit(&AuditSpec::new(m, Neighbor::Identical, 1.0, 10_000, seed)).unwrap();
                    r.epsilon_hat > r.slack
                })
                .count();
            assert!(fails <= 1, "{m:?}: {fails} of 100 audits above slack");
        }
    }

    #[test]
    fn deterministic() {
        let spec = AuditSpec::new(Mechanism::AboveThresholdStream, Neighbor::Adjacent, 1.0, 10_000, 3);
        assert_eq!(audit(&spec).unwrap(), audit(&spec).unwrap());
    }
}
