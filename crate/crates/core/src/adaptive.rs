//! Adaptive adversaries and the per-round re-instantiation runner.
//!
//! Against an adaptive adversary the learner starts a fresh forest every
//! round on the prefix seen so far and releases one histogram from it, with
//! the per-round privacy budget given by advanced composition.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::{streams, DpSoaParams, Forest};
use crate::hypothesis::{HypothesisClass, LabeledExample, Labels, OnlineLearner, Predictor, Soa, VersionSpace};
use crate::mech::{argmax_release, stable_histogram, HistParams, HypList, PrivacyParams, RngSeed};
use crate::record::{RoundRecord, RunRecord};

/// Chooses the next example from the hypotheses published so far.
pub trait Adversary {
    fn next_example(&mut self, history: &[Predictor]) -> Result<LabeledExample>;
}

/// Replays a fixed sequence.
pub struct Oblivious {
    seq: Vec<LabeledExample>,
    pos: usize,
}

impl Oblivious {
    pub fn new(seq: Vec<LabeledExample>) -> Self {
        Oblivious { seq, pos: 0 }
    }
}

impl Adversary for Oblivious {
    fn next_example(&mut self, _history: &[Predictor]) -> Result<LabeledExample> {
        let ex = *self
            .seq
            .get(self.pos)
            .ok_or_else(|| Error::param("T", format!("sequence has only {} examples", self.seq.len())))?;
        self.pos += 1;
        Ok(ex)
    }
}

/// Uniform points labelled by a target drawn once from the class.
pub struct FixedTarget {
    target: Labels,
    rng: ChaCha8Rng,
}

impl FixedTarget {
    pub fn new(class: &HypothesisClass, seed: u64) -> Result<Self> {
        if class.is_empty() {
            return Err(Error::EmptyClass);
        }
        let mut rng = RngSeed::new(seed, streams::ADVERSARY).rng();
        let target = class.hypothesis(rng.gen_range(0..class.len())).clone();
        Ok(FixedTarget { target, rng })
    }

    pub fn with_target(target: Labels, seed: u64) -> Self {
        FixedTarget {
            target,
            rng: RngSeed::new(seed, streams::ADVERSARY).rng(),
        }
    }

    pub fn target(&self) -> &Labels {
        &self.target
    }

    /// The first `len` examples this adversary would emit.
    pub fn sequence(mut self, len: usize) -> Vec<LabeledExample> {
        (0..len).map(|_| self.draw()).collect()
    }

    fn draw(&mut self) -> LabeledExample {
        let x = self.rng.gen_range(0..self.target.len());
        LabeledExample::new(x, self.target.get(x))
    }
}

impl Adversary for FixedTarget {
    fn next_example(&mut self, _history: &[Predictor]) -> Result<LabeledExample> {
        if self.target.is_empty() {
            return Err(Error::param("class", "empty domain"));
        }
        Ok(self.draw())
    }
}

fn last_prediction(history: &[Predictor], x: usize) -> bool {
    history.last().is_some_and(|h| h.predict(x))
}

/// Labels, against the last published hypothesis, the smallest point on
/// which some surviving hypothesis disagrees with it.
pub struct Disagree {
    class: Arc<HypothesisClass>,
    space: VersionSpace,
    rng: ChaCha8Rng,
}

impl Disagree {
    pub fn new(class: Arc<HypothesisClass>, seed: u64) -> Self {
        Disagree {
            space: class.full_space(),
            class,
            rng: RngSeed::new(seed, streams::ADVERSARY).rng(),
        }
    }
}

impl Adversary for Disagree {
    fn next_example(&mut self, history: &[Predictor]) -> Result<LabeledExample> {
        let n = self.class.domain_size();
        let contested = (0..n).find(|&x| {
            let y = !last_prediction(history, x);
            !self.class.restrict_space(&self.space, x, y).is_empty()
        });
        let ex = match contested {
            Some(x) => LabeledExample::new(x, !last_prediction(history, x)),
            None => {
                // every survivor agrees with the published hypothesis
                let h = self
                    .space
                    .iter()
                    .next()
                    .map(|i| self.class.hypothesis(i).clone())
                    .ok_or(Error::EmptyClass)?;
                let x = self.rng.gen_range(0..n);
                LabeledExample::new(x, h.get(x))
            }
        };
        self.space = self.class.restrict_space(&self.space, ex.x, ex.y);
        Ok(ex)
    }
}

/// Walks a shattered mistake tree, labelling each node against the last
/// published hypothesis; once the surviving class has dimension zero it
/// keeps labelling uniform points by the sole survivor.
pub struct MistakeTree {
    class: Arc<HypothesisClass>,
    space: VersionSpace,
    rng: ChaCha8Rng,
}

impl MistakeTree {
    pub fn new(class: Arc<HypothesisClass>, seed: u64) -> Self {
        MistakeTree {
            space: class.full_space(),
            class,
            rng: RngSeed::new(seed, streams::ADVERSARY).rng(),
        }
    }
}

impl Adversary for MistakeTree {
    fn next_example(&mut self, history: &[Predictor]) -> Result<LabeledExample> {
        let c = &self.class;
        let d = c.ldim_of(&self.space);
        if d < 0 {
            return Err(Error::EmptyClass);
        }
        let node = (d > 0)
            .then(|| {
                (0..c.domain_size()).find(|&x| {
                    c.ldim_of(&c.restrict_space(&self.space, x, false)) >= d - 1
                        && c.ldim_of(&c.restrict_space(&self.space, x, true)) >= d - 1
                })
            })
            .flatten();
        let ex = match node {
            Some(x) => LabeledExample::new(x, !last_prediction(history, x)),
            None => {
                let h = c.hypothesis(self.space.iter().next().expect("nonempty"));
                let x = self.rng.gen_range(0..c.domain_size());
                LabeledExample::new(x, h.get(x))
            }
        };
        self.space = c.restrict_space(&self.space, ex.x, ex.y);
        Ok(ex)
    }
}

/// `fixed-target`, `disagree` or `mistake-tree`.
pub fn build_adaptive_adversary(name: &str, class: Arc<HypothesisClass>, seed: u64) -> Result<Box<dyn Adversary>> {
    match name {
        "fixed-target" => Ok(Box::new(FixedTarget::new(&class, seed)?)),
        "disagree" => Ok(Box::new(Disagree::new(class, seed))),
        "mistake-tree" => Ok(Box::new(MistakeTree::new(class, seed))),
        other => Err(Error::Unknown {
            kind: "adversary",
            name: other.to_string(),
        }),
    }
}

/// Per-round budget under `T`-fold advanced composition.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompositionParams {
    pub epsilon_prime: f64,
    pub delta_prime: f64,
}

/// `δ′ = δ/(2T)`, `ε′ = ε/(2√(2T ln(1/δ)))`.
pub fn composition_params(epsilon: f64, delta: f64, horizon: u64) -> Result<CompositionParams> {
    PrivacyParams::new(epsilon, delta)?;
    if horizon < 1 {
        return Err(Error::param("T", "must be at least 1"));
    }
    let t = horizon as f64;
    Ok(CompositionParams {
        epsilon_prime: epsilon / (2.0 * (2.0 * t * (1.0 / delta).ln()).sqrt()),
        delta_prime: delta / (2.0 * t),
    })
}

/// Incremental realizability check over the emitted prefix.
struct Certifier<'a> {
    class: &'a HypothesisClass,
    space: VersionSpace,
    len: usize,
}

impl<'a> Certifier<'a> {
    fn new(class: &'a HypothesisClass) -> Self {
        Certifier {
            class,
            space: class.full_space(),
            len: 0,
        }
    }

    fn push(&mut self, ex: LabeledExample) -> Result<()> {
        self.class.check_point(ex.x)?;
        self.space = self.class.restrict_space(&self.space, ex.x, ex.y);
        if self.space.is_empty() {
            return Err(Error::NotRealizable { position: self.len });
        }
        self.len += 1;
        Ok(())
    }
}

/// A fresh forest run on `prefix`, seeded by `instance_seed`. Returns the
/// final list together with the forest for inspection.
pub fn instance_list(
    class: &Arc<HypothesisClass>,
    prefix: &[LabeledExample],
    k1: usize,
    k2: usize,
    instance_seed: u64,
) -> Result<(HypList, Forest<Soa>)> {
    let mut forest = Forest::new(Soa::new(class.clone()), k1, k2, prefix.len().max(1), instance_seed)?;
    for &ex in prefix {
        forest.observe(ex)?;
    }
    Ok((forest.list(), forest))
}

/// Seed of the forest instantiated at round `t` (1-based).
pub fn instance_seed(seed: u64, t: usize) -> u64 {
    RngSeed::new(seed, streams::ADVERSARY).derive(t as u64).seed
}

/// Runs the adaptive reduction for `horizon` rounds.
///
/// Round `t` builds a new forest on the first `t − 1` examples and
/// publishes one histogram release of its list at `(ε′, δ′)`. The adversary
/// then sees `h_1 … h_{t−1}` and emits `(x_t, y_t)`.
pub fn run_adaptive(
    class: &Arc<HypothesisClass>,
    adversary: &mut dyn Adversary,
    params: &DpSoaParams,
    horizon: usize,
    seed: u64,
) -> Result<RunRecord> {
    let comp = composition_params(params.privacy.epsilon, params.privacy.delta, horizon as u64)?;
    let hist = HistParams::new(comp.epsilon_prime, comp.delta_prime, params.eta, params.beta)?;
    let mut certifier = Certifier::new(class);
    let mut record = RunRecord::new(seed);
    let mut prefix = Vec::with_capacity(horizon);
    let mut history: Vec<Predictor> = Vec::with_capacity(horizon);
    for t in 1..=horizon {
        let inst = instance_seed(seed, t);
        let (list, forest) = instance_list(class, &prefix, params.k1, params.k2, inst)?;
        let mut rng = RngSeed::new(inst, streams::PUBLISH).rng();
        let h = argmax_release(&stable_histogram(&list, &hist, &mut rng)?);
        let ex = adversary.next_example(&history)?;
        certifier.push(ex)?;
        let yhat = h.predict(ex.x);
        record.rounds.push(RoundRecord {
            t,
            x: ex.x,
            y: ex.y as u8,
            yhat: yhat as u8,
            mistake: (yhat != ex.y) as u8,
            pertinent_size: forest.pertinent_count(),
            counter: 0,
            hist_call: 1,
            while_iters: 0,
            instance_seed: Some(inst),
        });
        record.resets += forest.resets();
        history.push(h);
        prefix.push(ex);
    }
    Ok(record)
}

/// Non-private SOA against the same adversary interface.
pub fn run_soa_adaptive(class: &Arc<HypothesisClass>, adversary: &mut dyn Adversary, horizon: usize) -> Result<RunRecord> {
    let soa = Soa::new(class.clone());
    let mut state = soa.fresh();
    let mut certifier = Certifier::new(class);
    let mut record = RunRecord::new(0);
    let mut history = Vec::with_capacity(horizon);
    for t in 1..=horizon {
        let h = soa.fingerprint(&state);
        let ex = adversary.next_example(&history)?;
        certifier.push(ex)?;
        let mistake = soa.update(&mut state, ex)?;
        record.rounds.push(RoundRecord {
            t,
            x: ex.x,
            y: ex.y as u8,
            yhat: (ex.y ^ mistake) as u8,
            mistake: mistake as u8,
            pertinent_size: 0,
            counter: 0,
            hist_call: 0,
            while_iters: 0,
            instance_seed: None,
        });
        history.push(h);
    }
    Ok(record)
}

/// For twin input streams under shared randomness, the number of differing
/// list entries of the instance built at each round.
pub fn adaptive_list_differences(
    class: &Arc<HypothesisClass>,
    a: &[LabeledExample],
    b: &[LabeledExample],
    k1: usize,
    k2: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    if a.len() != b.len() {
        return Err(Error::param("streams", "twin streams must have equal length"));
    }
    (1..=a.len())
        .map(|t| {
            let inst = instance_seed(seed, t);
            let (la, _) = instance_list(class, &a[..t - 1], k1, k2, inst)?;
            let (lb, _) = instance_list(class, &b[..t - 1], k1, k2, inst)?;
            Ok(la.hamming(&lb))
        })
        .collect()
}

/// Lockstep twin forests: list differences before every round and after the
/// last one.
pub fn oblivious_list_differences(
    class: &Arc<HypothesisClass>,
    a: &[LabeledExample],
    b: &[LabeledExample],
    k1: usize,
    k2: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    if a.len() != b.len() {
        return Err(Error::param("streams", "twin streams must have equal length"));
    }
    let horizon = a.len().max(1);
    let mut fa = Forest::new(Soa::new(class.clone()), k1, k2, horizon, seed)?;
    let mut fb = Forest::new(Soa::new(class.clone()), k1, k2, horizon, seed)?;
    let mut diffs = Vec::with_capacity(a.len() + 1);
    for (&ea, &eb) in a.iter().zip(b) {
        diffs.push(fa.list().hamming(&fb.list()));
        fa.observe(ea)?;
        fb.observe(eb)?;
    }
    diffs.push(fa.list().hamming(&fb.list()));
    Ok(diffs)
}
