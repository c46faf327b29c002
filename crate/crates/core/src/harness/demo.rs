//! Drifting list streams for exercising [`HistSparse`] on its own.

use std::io::Write;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hypothesis::{Labels, Predictor};
use crate::mech::{HypList, RngSeed};
use crate::sparse::{HistSparse, SparseParams};

const BITS: usize = 24;
const HEAVY: usize = 4;
const MAX_SWITCHES: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq)]
struct Switch {
    at: usize,
    /// Rounds spent fading from the old heavy element to the new one.
    fade: usize,
}

/// A stream of length-`k` lists that always holds some element at
/// frequency ≥ 1/2. Each phase has one heavy element padded with distinct
/// noise entries; phases change abruptly or by a crossfade.
#[derive(Clone, Debug)]
pub struct DriftingStream {
    k: usize,
    horizon: usize,
    heavy: Vec<Predictor>,
    weights: Vec<f64>,
    switches: Vec<Switch>,
    noise: Vec<Predictor>,
}

fn fingerprint(tag: bool, index: usize) -> Predictor {
    Predictor::Labels(Labels::from_bits(
        std::iter::once(tag).chain((0..BITS - 1).map(|b| (index >> b) & 1 == 1)),
    ))
}

impl DriftingStream {
    pub fn new<R: Rng + ?Sized>(k: usize, horizon: usize, rng: &mut R) -> Result<Self> {
        if k == 0 || k >= 1 << (BITS - 1) {
            return Err(Error::param("k", format!("must lie in 1..2^{}, got {k}", BITS - 1)));
        }
        if horizon < 40 {
            return Err(Error::param("T", format!("drifting streams need T ≥ 40, got {horizon}")));
        }
        let n_switch = rng.gen_range(0..=MAX_SWITCHES);
        let mut at: Vec<usize> = (0..n_switch).map(|_| rng.gen_range(10..horizon - 30)).collect();
        at.sort_unstable();
        at.dedup();
        let switches = at
            .into_iter()
            .map(|at| Switch {
                at,
                fade: if rng.gen_bool(0.5) { 0 } else { rng.gen_range(5..=30) },
            })
            .collect::<Vec<_>>();
        let weights = (0..=switches.len()).map(|_| rng.gen_range(0.5..=1.0)).collect();
        Ok(DriftingStream {
            k,
            horizon,
            heavy: (0..HEAVY).map(|i| fingerprint(true, i)).collect(),
            weights,
            switches,
            noise: (0..k).map(|i| fingerprint(false, i)).collect(),
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn switches(&self) -> usize {
        self.switches.len()
    }

    /// List for round `t` (1-based).
    pub fn list(&self, t: usize) -> HypList {
        let phase = self.switches.iter().filter(|s| s.at <= t).count();
        let heavy = |p: usize| &self.heavy[p % HEAVY];
        let mut entries = Vec::with_capacity(self.k);
        if phase > 0 {
            let s = self.switches[phase - 1];
            if t < s.at + s.fade {
                let frac = (t - s.at + 1) as f64 / (s.fade + 1) as f64;
                let new = ((frac * self.k as f64).round() as usize).min(self.k);
                entries.extend(std::iter::repeat_n(heavy(phase).clone(), new));
                entries.extend(std::iter::repeat_n(heavy(phase - 1).clone(), self.k - new));
                return HypList::new(entries);
            }
        }
        let n = ((self.weights[phase] * self.k as f64).ceil() as usize).min(self.k);
        entries.extend(std::iter::repeat_n(heavy(phase).clone(), n));
        let offset = t * 7919 % self.k;
        entries.extend((0..self.k - n).map(|i| self.noise[(offset + i) % self.k].clone()));
        HypList::new(entries)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DemoRow {
    pub t: usize,
    pub published: String,
    pub hist_call: u8,
    pub counter: u64,
    /// `freq_{L_t}(h_t)`.
    pub freq_current: f64,
    /// `freq_{L_t}(h_{t−1})`; equal to `freq_current` at `t = 1`.
    pub freq_previous: f64,
    pub aborted: u8,
}

/// Runs HistSparse over a fresh drifting stream until abort or the horizon.
pub fn hist_demo(params: SparseParams, horizon: usize, seed: u64) -> Result<Vec<DemoRow>> {
    let mut rng = RngSeed::new(seed, 4).rng();
    let stream = DriftingStream::new(params.k, horizon, &mut rng)?;
    let first = stream.list(1);
    let (mut hs, h1) = HistSparse::init(params, &first, &mut rng)?;
    let f1 = first.freq_f64(&h1)?;
    let mut rows = vec![DemoRow {
        t: 1,
        published: h1.to_string(),
        hist_call: 1,
        counter: hs.counter(),
        freq_current: f1,
        freq_previous: f1,
        aborted: hs.is_aborted() as u8,
    }];
    for t in 2..=horizon {
        if hs.is_aborted() {
            break;
        }
        let list = stream.list(t);
        let prev = hs.current().clone();
        let out = hs.step(&list, &mut rng)?;
        rows.push(DemoRow {
            t,
            published: out.published.to_string(),
            hist_call: out.hist_call as u8,
            counter: hs.counter(),
            freq_current: list.freq_f64(&out.published)?,
            freq_previous: list.freq_f64(&prev)?,
            aborted: hs.is_aborted() as u8,
        });
    }
    Ok(rows)
}

pub fn write_demo_csv<W: Write>(rows: &[DemoRow], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for r in rows {
        wtr.serialize(r).map_err(|e| Error::Io(e.to_string()))?;
    }
    wtr.flush()?;
    Ok(())
}
