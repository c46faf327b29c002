use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::record::RunRecord;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub rounds: usize,
    pub mistakes: usize,
    pub hist_calls: usize,
    pub aborted: bool,
    pub resets: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub per_seed: Vec<SeedSummary>,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    /// `(t, median cumulative mistakes)` at powers of two and at the horizon.
    pub curve: Vec<(usize, f64)>,
    pub hist_calls: usize,
    pub aborts: usize,
    /// Median of `mistakes(T)/T` at the horizon.
    pub rate_at_horizon: f64,
    /// Median of `mistakes(T/2)/(T/2)`.
    pub rate_at_half: f64,
}

/// Quantile with linear interpolation between order statistics.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    assert!(!values.is_empty());
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("no NaN"));
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

pub fn median(values: &[f64]) -> f64 {
    quantile(values, 0.5)
}

pub fn summarize(records: &[RunRecord]) -> Result<Summary> {
    if records.is_empty() {
        return Err(Error::param("records", "nothing to summarize"));
    }
    let per_seed: Vec<SeedSummary> = records
        .iter()
        .map(|r| SeedSummary {
            seed: r.seed,
            rounds: r.len(),
            mistakes: r.mistakes(),
            hist_calls: r.hist_calls(),
            aborted: r.aborted(),
            resets: r.resets,
        })
        .collect();
    let totals: Vec<f64> = per_seed.iter().map(|s| s.mistakes as f64).collect();
    let horizon = records.iter().map(|r| r.len()).max().unwrap_or(0);
    let mut marks: Vec<usize> = std::iter::successors(Some(1usize), |t| t.checked_mul(2))
        .take_while(|&t| t <= horizon)
        .collect();
    if marks.last() != Some(&horizon) && horizon > 0 {
        marks.push(horizon);
    }
    let curve = marks
        .iter()
        .map(|&t| {
            let v: Vec<f64> = records.iter().map(|r| r.mistakes_until(t) as f64).collect();
            (t, median(&v))
        })
        .collect();
    let rate = |t: usize| {
        if t == 0 {
            return 0.0;
        }
        let v: Vec<f64> = records.iter().map(|r| r.mistakes_until(t) as f64 / t as f64).collect();
        median(&v)
    };
    Ok(Summary {
        median: median(&totals),
        q1: quantile(&totals, 0.25),
        q3: quantile(&totals, 0.75),
        curve,
        hist_calls: per_seed.iter().map(|s| s.hist_calls).sum(),
        aborts: per_seed.iter().filter(|s| s.aborted).count(),
        rate_at_horizon: rate(horizon),
        rate_at_half: rate(horizon / 2),
        per_seed,
    })
}

impl Summary {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::Io(e.to_string());
        wtr.write_record(["seed", "rounds", "mistakes", "hist_calls", "aborted", "resets"])
            .map_err(io)?;
        for s in &self.per_seed {
            wtr.write_record([
                s.seed.to_string(),
                s.rounds.to_string(),
                s.mistakes.to_string(),
                s.hist_calls.to_string(),
                (s.aborted as u8).to_string(),
                s.resets.to_string(),
            ])
            .map_err(io)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn write_curve_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::Io(e.to_string());
        wtr.write_record(["t", "median_cumulative_mistakes"]).map_err(io)?;
        for (t, m) in &self.curve {
            wtr.write_record([t.to_string(), m.to_string()]).map_err(io)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn report(&self) -> String {
        format!(
            "runs {}  median mistakes {} (q1 {}, q3 {})  rate T/2 {:.4}  rate T {:.4}  hist calls {}  aborts {}",
            self.per_seed.len(),
            self.median,
            self.q1,
            self.q3,
            self.rate_at_half,
            self.rate_at_horizon,
            self.hist_calls,
            self.aborts
        )
    }
}
