use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::class::{HypothesisClass, VersionSpace};
use super::labels::{Labels, Predictor};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabeledExample {
    pub x: usize,
    pub y: bool,
}

impl LabeledExample {
    pub fn new(x: usize, y: bool) -> Self {
        LabeledExample { x, y }
    }
}

/// A deterministic mistake-bound learner usable as the black box inside the
/// forest.
///
/// `update` is the strict transition for realizable feeds. `absorb` is total:
/// an example that would empty the version space freezes the learner's
/// predictor instead of failing, and the state is marked burnt.
pub trait OnlineLearner {
    type State: Clone + std::fmt::Debug;

    fn fresh(&self) -> Self::State;
    fn predict(&self, state: &Self::State, x: usize) -> bool;
    fn update(&self, state: &mut Self::State, ex: LabeledExample) -> Result<bool>;
    fn absorb(&self, state: &mut Self::State, ex: LabeledExample) -> bool;
    fn fingerprint(&self, state: &Self::State) -> Predictor;
    fn mistakes(&self, state: &Self::State) -> usize;
    fn is_burnt(&self, state: &Self::State) -> bool;
    fn domain_size(&self) -> usize;
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SoaState {
    pub version_space: VersionSpace,
    pub history_len: usize,
    pub mistake_count: usize,
    pub burnt: bool,
}

/// The Standard Optimal Algorithm over an explicit class. Predicts the label
/// whose restriction keeps the larger Littlestone dimension, ties toward 1.
#[derive(Clone, Debug)]
pub struct Soa {
    class: Arc<HypothesisClass>,
}

impl Soa {
    pub fn new(class: Arc<HypothesisClass>) -> Self {
        Soa { class }
    }

    pub fn class(&self) -> &HypothesisClass {
        &self.class
    }

    pub fn class_arc(&self) -> &Arc<HypothesisClass> {
        &self.class
    }

    fn check(&self, x: usize) -> Result<()> {
        self.class.check_point(x)
    }

    /// Range-checked prediction.
    pub fn try_predict(&self, state: &SoaState, x: usize) -> Result<bool> {
        self.check(x)?;
        Ok(self.predict(state, x))
    }
}

impl OnlineLearner for Soa {
    type State = SoaState;

    fn fresh(&self) -> SoaState {
        SoaState {
            version_space: self.class.full_space(),
            history_len: 0,
            mistake_count: 0,
            burnt: false,
        }
    }

    fn predict(&self, state: &SoaState, x: usize) -> bool {
        let vs = &state.version_space;
        let d0 = self.class.ldim_of(&self.class.restrict_space(vs, x, false));
        let d1 = self.class.ldim_of(&self.class.restrict_space(vs, x, true));
        d1 >= d0
    }

    fn update(&self, state: &mut SoaState, ex: LabeledExample) -> Result<bool> {
        self.check(ex.x)?;
        let next = self.class.restrict_space(&state.version_space, ex.x, ex.y);
        if next.is_empty() {
            return Err(Error::InconsistentExample {
                x: ex.x,
                y: ex.y as u8,
            });
        }
        let mistake = self.predict(state, ex.x) != ex.y;
        state.version_space = next;
        state.history_len += 1;
        state.mistake_count += mistake as usize;
        Ok(mistake)
    }

    fn absorb(&self, state: &mut SoaState, ex: LabeledExample) -> bool {
        let mistake = self.predict(state, ex.x) != ex.y;
        if !state.burnt {
            let next = self.class.restrict_space(&state.version_space, ex.x, ex.y);
            if next.is_empty() {
                state.burnt = true;
            } else {
                state.version_space = next;
            }
        }
        state.history_len += 1;
        state.mistake_count += mistake as usize;
        mistake
    }

    fn fingerprint(&self, state: &SoaState) -> Predictor {
        Predictor::Labels(Labels::from_bits(
            (0..self.class.domain_size()).map(|x| self.predict(state, x)),
        ))
    }

    fn mistakes(&self, state: &SoaState) -> usize {
        state.mistake_count
    }

    fn is_burnt(&self, state: &SoaState) -> bool {
        state.burnt
    }

    fn domain_size(&self) -> usize {
        self.class.domain_size()
    }
}

/// `A(S)`: folds the strict update over `seq` from the fresh state and
/// returns the resulting fingerprint. `None` stands for the ⊥ sample.
pub fn run_on_sequence<L: OnlineLearner>(
    learner: &L,
    seq: Option<&[LabeledExample]>,
) -> Result<Predictor> {
    let Some(seq) = seq else {
        return Ok(Predictor::Bottom);
    };
    let mut state = learner.fresh();
    for &ex in seq {
        learner.update(&mut state, ex)?;
    }
    Ok(learner.fingerprint(&state))
}

/// Position of the first example that makes `seq` unrealizable, if any.
pub fn first_inconsistency(class: &HypothesisClass, seq: &[LabeledExample]) -> Result<Option<usize>> {
    let mut vs = class.full_space();
    for (i, ex) in seq.iter().enumerate() {
        class.check_point(ex.x)?;
        vs = class.restrict_space(&vs, ex.x, ex.y);
        if vs.is_empty() {
            return Ok(Some(i));
        }
    }
    Ok(None)
}

pub fn ensure_realizable(class: &HypothesisClass, seq: &[LabeledExample]) -> Result<()> {
    match first_inconsistency(class, seq)? {
        Some(position) => Err(Error::NotRealizable { position }),
        None => Ok(()),
    }
}
