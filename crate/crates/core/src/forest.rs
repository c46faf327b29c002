//! The private SOA forest.
//!
//! `k2` full binary trees with `k1` leaves each. Every round's example goes
//! to the pertinent ancestor of a random leaf; sibling vertices whose learner
//! outputs disagree are merged upward, each merge appending a point where
//! they disagree together with a guessed label. The per-tree outputs form
//! the list that the sparse-vector layer publishes from.

use std::sync::Arc;

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypothesis::{ensure_realizable, HypothesisClass, LabeledExample, OnlineLearner, Predictor, Soa};
use crate::mech::{argmax_release, stable_histogram, HistParams, HypList, PrivacyParams, RngSeed};
use crate::record::{RoundRecord, RunRecord};
use crate::sparse::{HistSparse, SparseParams};

/// RNG stream ids derived from a run seed.
pub mod streams {
    pub const LEAF_MAP: u64 = 0;
    pub const PUBLISH: u64 = 1;
    pub const ADVERSARY: u64 = 2;
    /// Tree `i` draws from stream `TREES + i`.
    pub const TREES: u64 = 1 << 32;
}

/// True when `DPSOA_TEST_MODE=strict` is set.
pub fn strict_mode_from_env() -> bool {
    std::env::var("DPSOA_TEST_MODE").is_ok_and(|v| v == "strict")
}

#[derive(Clone, Debug)]
struct Vertex<S> {
    // None is the ⊥ sample
    sample: Option<Vec<LabeledExample>>,
    state: Option<S>,
    predictor: Predictor,
}

/// Outcome of feeding one example to the forest.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Observation {
    pub tree: usize,
    pub while_iters: usize,
    pub reset: bool,
}

/// Depth–mistake accounting over the pertinent non-⊥ vertices.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DepthLaw {
    pub checked: usize,
    /// Vertices whose replayed mistake count equals their depth.
    pub exact: usize,
    /// Vertices with fewer mistakes than their depth.
    pub below: usize,
}

impl DepthLaw {
    pub fn holds_exactly(&self) -> bool {
        self.exact == self.checked
    }

    pub fn holds_as_lower_bound(&self) -> bool {
        self.below == 0
    }
}

pub struct Forest<L: OnlineLearner> {
    learner: L,
    k1: usize,
    k2: usize,
    levels: u32,
    vertices: Vec<Vertex<L::State>>,
    pertinent: Vec<bool>,
    pertinent_count: usize,
    leaf_map: Vec<u32>,
    reps: Vec<usize>,
    tree_rngs: Vec<ChaCha8Rng>,
    round: usize,
    resets: usize,
    strict: bool,
}

impl<L: OnlineLearner> Forest<L> {
    /// Builds the forest and draws the leaf assignment for `horizon` rounds.
    pub fn new(learner: L, k1: usize, k2: usize, horizon: usize, seed: u64) -> Result<Self> {
        if k1 < 2 || !k1.is_power_of_two() {
            return Err(Error::param("k1", format!("must be a power of two ≥ 2, got {k1}")));
        }
        if k2 < 1 {
            return Err(Error::param("k2", "must be at least 1"));
        }
        if horizon < 1 {
            return Err(Error::param("T", "must be at least 1"));
        }
        let per_tree = 2 * k1 - 1;
        let leaves = (k1 * k2) as u32;
        let mut pi_rng = RngSeed::new(seed, streams::LEAF_MAP).rng();
        let leaf_map = (0..horizon).map(|_| pi_rng.gen_range(0..leaves)).collect();

        let fresh = learner.fresh();
        let empty = learner.fingerprint(&fresh);
        let mut vertices = Vec::with_capacity(per_tree * k2);
        let mut pertinent = Vec::with_capacity(per_tree * k2);
        for _ in 0..k2 {
            for local in 0..per_tree {
                let leaf = local >= k1 - 1;
                vertices.push(if leaf {
                    Vertex {
                        sample: Some(Vec::new()),
                        state: Some(fresh.clone()),
                        predictor: empty.clone(),
                    }
                } else {
                    Vertex {
                        sample: None,
                        state: None,
                        predictor: Predictor::Bottom,
                    }
                });
                pertinent.push(leaf);
            }
        }
        let reps = (0..k2).map(|i| i * per_tree + k1 - 1).collect();
        let tree_rngs = (0..k2 as u64)
            .map(|i| RngSeed::new(seed, streams::TREES + i).rng())
            .collect();
        Ok(Forest {
            learner,
            k1,
            k2,
            levels: k1.ilog2(),
            vertices,
            pertinent,
            pertinent_count: k1 * k2,
            leaf_map,
            reps,
            tree_rngs,
            round: 0,
            resets: 0,
            strict: strict_mode_from_env(),
        })
    }

    /// Enables per-round invariant assertions.
    pub fn with_strict(mut self, strict: bool) -> Self {
        self.strict = strict;
        self
    }

    pub fn learner(&self) -> &L {
        &self.learner
    }

    pub fn k1(&self) -> usize {
        self.k1
    }

    pub fn k2(&self) -> usize {
        self.k2
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn pertinent_count(&self) -> usize {
        self.pertinent_count
    }

    pub fn is_pertinent(&self, v: usize) -> bool {
        self.pertinent[v]
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn resets(&self) -> usize {
        self.resets
    }

    pub fn horizon(&self) -> usize {
        self.leaf_map.len()
    }

    /// Global leaf index (`tree·k1 + offset`) assigned to round `t` (0-based).
    pub fn leaf_of_round(&self, t: usize) -> usize {
        self.leaf_map[t] as usize
    }

    pub fn leaf_map(&self) -> &[u32] {
        &self.leaf_map
    }

    pub fn representatives(&self) -> &[usize] {
        &self.reps
    }

    pub fn tree_of(&self, v: usize) -> usize {
        v / (2 * self.k1 - 1)
    }

    fn local(&self, v: usize) -> usize {
        v % (2 * self.k1 - 1)
    }

    fn base(&self, tree: usize) -> usize {
        tree * (2 * self.k1 - 1)
    }

    /// Distance from `v` to the leaves of its subtree.
    pub fn depth(&self, v: usize) -> u32 {
        self.levels - (self.local(v) + 1).ilog2()
    }

    pub fn is_root(&self, v: usize) -> bool {
        self.local(v) == 0
    }

    fn parent(&self, v: usize) -> usize {
        let l = self.local(v);
        self.base(self.tree_of(v)) + (l - 1) / 2
    }

    fn sibling(&self, v: usize) -> usize {
        let l = self.local(v);
        let s = if l % 2 == 1 { l + 1 } else { l - 1 };
        self.base(self.tree_of(v)) + s
    }

    fn leaf_vertex(&self, global_leaf: usize) -> usize {
        let tree = global_leaf / self.k1;
        self.base(tree) + self.k1 - 1 + global_leaf % self.k1
    }

    pub fn predictor(&self, v: usize) -> &Predictor {
        &self.vertices[v].predictor
    }

    pub fn sample(&self, v: usize) -> Option<&[LabeledExample]> {
        self.vertices[v].sample.as_deref()
    }

    /// The pertinent vertex on the path from the leaf up to its root.
    pub fn pertinent_ancestor(&self, global_leaf: usize) -> usize {
        let mut v = self.leaf_vertex(global_leaf);
        loop {
            if self.pertinent[v] {
                return v;
            }
            assert!(!self.is_root(v), "leaf {global_leaf} has no pertinent ancestor");
            v = self.parent(v);
        }
    }

    /// `L_t`: the representatives' outputs in tree order.
    pub fn list(&self) -> HypList {
        self.reps
            .iter()
            .map(|&v| self.vertices[v].predictor.clone())
            .collect()
    }

    fn append(&mut self, v: usize, ex: LabeledExample) {
        let learner = &self.learner;
        let vert = &mut self.vertices[v];
        if let (Some(sample), Some(state)) = (vert.sample.as_mut(), vert.state.as_mut()) {
            sample.push(ex);
            learner.absorb(state, ex);
            vert.predictor = learner.fingerprint(state);
        }
    }

    /// Feeds the round's example; the leaf is the one drawn for this round.
    pub fn observe(&mut self, ex: LabeledExample) -> Result<Observation> {
        if ex.x >= self.learner.domain_size() {
            return Err(Error::PointOutOfRange {
                x: ex.x,
                domain_size: self.learner.domain_size(),
            });
        }
        let Some(&leaf) = self.leaf_map.get(self.round) else {
            return Err(Error::param("T", format!("horizon {} exceeded", self.leaf_map.len())));
        };
        self.round += 1;
        let leaf = leaf as usize;
        let tree = leaf / self.k1;
        let mut v1 = self.pertinent_ancestor(leaf);
        self.append(v1, ex);
        let mut obs = Observation {
            tree,
            ..Default::default()
        };
        if self.is_root(v1) {
            self.after_round();
            return Ok(obs);
        }
        let mut v2 = self.sibling(v1);
        while self.pertinent[v1] && self.pertinent[v2] && self.vertices[v1].predictor != self.vertices[v2].predictor {
            let parent = self.parent(v1);
            let (p1, p2) = (&self.vertices[v1].predictor, &self.vertices[v2].predictor);
            let x = p1.disagreement(p2).expect("predictors differ");
            let y: bool = self.tree_rngs[tree].gen();
            // the child whose output errs on (x, y); a ⊥ side is charged first
            let erring = match (p1.eval(x), p2.eval(x)) {
                (None, _) => v1,
                (_, None) => v2,
                (Some(a), _) if a != y => v1,
                _ => v2,
            };
            let mut merged = self.vertices[erring].clone();
            self.vertices[parent] = {
                if let (Some(sample), Some(state)) = (merged.sample.as_mut(), merged.state.as_mut()) {
                    let ex = LabeledExample::new(x, y);
                    sample.push(ex);
                    self.learner.absorb(state, ex);
                    merged.predictor = self.learner.fingerprint(state);
                }
                merged
            };
            let before = self.pertinent_count;
            self.pertinent[v1] = false;
            self.pertinent[v2] = false;
            self.pertinent[parent] = true;
            self.pertinent_count -= 1;
            obs.while_iters += 1;
            if self.strict {
                assert_eq!(self.pertinent_count + 1, before);
                self.check_merge(parent, erring);
            }
            if self.is_root(parent) {
                break;
            }
            v1 = parent;
            v2 = self.sibling(parent);
        }
        if obs.while_iters > 0 {
            obs.reset = self.repick(tree);
        }
        self.after_round();
        Ok(obs)
    }

    fn check_merge(&self, parent: usize, child: usize) {
        if let (Some(p), Some(c)) = (&self.vertices[parent].state, &self.vertices[child].state) {
            assert_eq!(
                self.learner.mistakes(p),
                self.learner.mistakes(c) + 1,
                "merge into {parent} did not force a mistake"
            );
        }
    }

    fn after_round(&self) {
        if self.strict {
            if let Err(e) = self.check_invariants() {
                panic!("round {}: {e}", self.round);
            }
        }
    }

    /// Picks a new representative for `tree` among collisions, or resets it.
    fn repick(&mut self, tree: usize) -> bool {
        let base = self.base(tree);
        let candidates: Vec<usize> = (base + 1..base + 2 * self.k1 - 1)
            .filter(|&v| {
                let s = self.sibling(v);
                self.pertinent[v] && self.pertinent[s] && self.vertices[v].predictor == self.vertices[s].predictor
            })
            .collect();
        if candidates.is_empty() {
            for v in base..base + 2 * self.k1 - 1 {
                if self.pertinent[v] {
                    self.pertinent[v] = false;
                    self.pertinent_count -= 1;
                }
            }
            self.vertices[base] = Vertex {
                sample: None,
                state: None,
                predictor: Predictor::Bottom,
            };
            self.pertinent[base] = true;
            self.pertinent_count += 1;
            self.reps[tree] = base;
            self.resets += 1;
            true
        } else {
            let i = self.tree_rngs[tree].gen_range(0..candidates.len());
            self.reps[tree] = candidates[i];
            false
        }
    }

    /// Leaf cover, representative membership and the pertinent count.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        for leaf in 0..self.k1 * self.k2 {
            let mut v = self.leaf_vertex(leaf);
            let mut hits = 0;
            loop {
                hits += self.pertinent[v] as usize;
                if self.is_root(v) {
                    break;
                }
                v = self.parent(v);
            }
            if hits != 1 {
                return Err(format!("leaf {leaf} has {hits} pertinent ancestors"));
            }
        }
        for (i, &r) in self.reps.iter().enumerate() {
            if !self.pertinent[r] || self.tree_of(r) != i {
                return Err(format!("representative {r} of tree {i} is invalid"));
            }
        }
        let count = self.pertinent.iter().filter(|&&p| p).count();
        if count != self.pertinent_count {
            return Err(format!("pertinent count {} but {count} flagged", self.pertinent_count));
        }
        let law = self.depth_law();
        if !law.holds_as_lower_bound() {
            return Err(format!("{} vertices have fewer mistakes than their depth", law.below));
        }
        Ok(())
    }

    /// Replays every pertinent non-⊥ sample through a fresh learner and
    /// compares its mistake count to the vertex depth.
    pub fn depth_law(&self) -> DepthLaw {
        let mut law = DepthLaw::default();
        for v in (0..self.vertices.len()).filter(|&v| self.pertinent[v]) {
            let Some(sample) = &self.vertices[v].sample else {
                continue;
            };
            let mut st = self.learner.fresh();
            for &ex in sample {
                self.learner.absorb(&mut st, ex);
            }
            let m = self.learner.mistakes(&st);
            let d = self.depth(v) as usize;
            law.checked += 1;
            law.exact += (m == d) as usize;
            law.below += (m < d) as usize;
        }
        law
    }
}

/// Algorithm parameters for one private run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DpSoaParams {
    pub k1: usize,
    pub k2: usize,
    pub eta: f64,
    pub c: u64,
    pub privacy: PrivacyParams,
    /// Failure probability the histogram threshold is calibrated for.
    pub beta: f64,
}

impl DpSoaParams {
    pub fn sparse(&self) -> Result<SparseParams> {
        SparseParams::new(self.privacy, self.eta, self.c, self.k2, self.beta)
    }

    /// Histogram parameters when every round is released directly.
    pub fn per_step_hist(&self) -> Result<HistParams> {
        HistParams::new(self.privacy.epsilon, self.privacy.delta, self.eta, self.beta)
    }
}

/// How each round's list is turned into the published predictor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Publish {
    Sparse,
    PerStep,
}

enum Publisher {
    Sparse(Option<HistSparse>, SparseParams),
    PerStep(HistParams),
}

/// Runs the forest over a realizable sequence and returns the transcript.
///
/// Once the sparse-vector budget runs out the last published predictor is
/// kept for the remaining rounds and the record is flagged.
pub fn run_oblivious(
    class: &Arc<HypothesisClass>,
    seq: &[LabeledExample],
    params: &DpSoaParams,
    publish: Publish,
    seed: u64,
) -> Result<RunRecord> {
    ensure_realizable(class, seq)?;
    let mut forest = Forest::new(Soa::new(class.clone()), params.k1, params.k2, seq.len().max(1), seed)?;
    let mut rng = RngSeed::new(seed, streams::PUBLISH).rng();
    let mut publisher = match publish {
        Publish::Sparse => Publisher::Sparse(None, params.sparse()?),
        Publish::PerStep => Publisher::PerStep(params.per_step_hist()?),
    };
    let mut record = RunRecord::new(seed);
    let mut h = Predictor::Bottom;
    for (i, &ex) in seq.iter().enumerate() {
        let list = forest.list();
        let (hist_call, counter) = match &mut publisher {
            Publisher::Sparse(state @ None, sp) => {
                let (st, h1) = HistSparse::init(*sp, &list, &mut rng)?;
                h = h1;
                let counter = st.counter();
                if st.is_aborted() {
                    record.aborted_at = Some(i + 1);
                }
                *state = Some(st);
                (true, counter)
            }
            Publisher::Sparse(Some(st), _) => {
                if st.is_aborted() {
                    (false, st.counter())
                } else {
                    let out = st.step(&list, &mut rng)?;
                    h = out.published;
                    if st.is_aborted() {
                        record.aborted_at = Some(i + 1);
                    }
                    (out.hist_call, st.counter())
                }
            }
            Publisher::PerStep(hp) => {
                h = argmax_release(&stable_histogram(&list, hp, &mut rng)?);
                (true, 0)
            }
        };
        let yhat = h.predict(ex.x);
        let obs = forest.observe(ex)?;
        record.rounds.push(RoundRecord {
            t: i + 1,
            x: ex.x,
            y: ex.y as u8,
            yhat: yhat as u8,
            mistake: (yhat != ex.y) as u8,
            pertinent_size: forest.pertinent_count(),
            counter,
            hist_call: hist_call as u8,
            while_iters: obs.while_iters,
            instance_seed: None,
        });
    }
    record.resets = forest.resets();
    Ok(record)
}

/// Parameter values from the worst-case analysis, in exact arithmetic.
#[derive(Clone, Debug, PartialEq)]
pub struct TheoryParams {
    pub k1: u64,
    pub eta: BigRational,
    pub c: BigUint,
    pub k2: BigUint,
}

fn pow2(e: u64) -> BigUint {
    BigUint::one() << e
}

fn ceil_scaled(base: &BigUint, factor: f64) -> BigUint {
    let f = BigRational::from_float(factor).expect("finite factor");
    let v = BigRational::from_integer(base.clone().into()) * f;
    v.ceil().to_integer().to_biguint().expect("nonnegative")
}

/// `k1 = max(2^{d+1}, 20)`, `η = 2^{−4k1−2}/k1`, `c = 4k1/η`, and `k2` the
/// larger of the sparse-histogram and stability list lengths with `β = 1/T`.
/// Logarithmic factors are evaluated in floating point and the product
/// rounded up.
pub fn theory_params(d: u32, horizon: u64, epsilon: f64, delta: f64) -> Result<TheoryParams> {
    PrivacyParams::new(epsilon, delta)?;
    if horizon < 1 {
        return Err(Error::param("T", "must be at least 1"));
    }
    let k1 = (1u64 << (d + 1)).max(20);
    let inv_eta = pow2(4 * k1 + 2) * k1;
    let eta = BigRational::new(1u32.into(), inv_eta.clone().into());
    let c = pow2(4 * k1 + 4) * (k1 * k1);
    let t = horizon as f64;
    let ln2 = std::f64::consts::LN_2;
    let ln_k1 = (k1 as f64).ln();
    let ln_c = 2.0 * ln_k1 + (4 * k1 + 4) as f64 * ln2;
    let ln_inv_eta = ln_k1 + (4 * k1 + 2) as f64 * ln2;
    // β = 1/T; α = η/32
    let sparse_log = t.ln() + ln2 + ln_c + t.ln();
    let theta_sparse = ceil_scaled(&(&c * &inv_eta * 256u32), sparse_log / epsilon);
    let hist_log = 2.0 * ln_inv_eta + t.ln() + (1.0 / delta).ln();
    let theta_hist = ceil_scaled(&inv_eta, 4.0 + hist_log / epsilon);
    let stability_log = (5.0 * t * t * ln_k1).ln();
    let theta_g = ceil_scaled(&(pow2(8 * k1 + 6) * (k1 * k1)), stability_log);
    let k2 = theta_sparse.max(theta_hist).max(theta_g);
    Ok(TheoryParams { k1, eta, c, k2 })
}

impl TheoryParams {
    /// `k2` as a float, for display; saturates to infinity.
    pub fn k2_f64(&self) -> f64 {
        self.k2.to_f64().unwrap_or(f64::INFINITY)
    }
}
