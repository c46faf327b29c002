//! Per-round transcripts and their CSV form.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub t: usize,
    pub x: usize,
    pub y: u8,
    pub yhat: u8,
    pub mistake: u8,
    pub pertinent_size: usize,
    pub counter: u64,
    pub hist_call: u8,
    pub while_iters: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub instance_seed: Option<u64>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub rounds: Vec<RoundRecord>,
    /// First round after which the sparse-vector budget was exhausted.
    pub aborted_at: Option<usize>,
    pub resets: usize,
}

impl RunRecord {
    pub fn new(seed: u64) -> Self {
        RunRecord {
            seed,
            ..Default::default()
        }
    }

    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    pub fn mistakes(&self) -> usize {
        self.rounds.iter().map(|r| r.mistake as usize).sum()
    }

    /// Mistakes over the first `t` rounds.
    pub fn mistakes_until(&self, t: usize) -> usize {
        self.rounds.iter().take(t).map(|r| r.mistake as usize).sum()
    }

    pub fn hist_calls(&self) -> usize {
        self.rounds.iter().map(|r| r.hist_call as usize).sum()
    }

    pub fn while_iters(&self) -> usize {
        self.rounds.iter().map(|r| r.while_iters).sum()
    }

    pub fn aborted(&self) -> bool {
        self.aborted_at.is_some()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let adaptive = self.rounds.iter().any(|r| r.instance_seed.is_some());
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec![
            "t",
            "x",
            "y",
            "yhat",
            "mistake",
            "pertinent_size",
            "counter",
            "hist_call",
            "while_iters",
        ];
        if adaptive {
            header.push("instance_seed");
        }
        wtr.write_record(&header).map_err(csv_err)?;
        for r in &self.rounds {
            let mut row = vec![
                r.t.to_string(),
                r.x.to_string(),
                r.y.to_string(),
                r.yhat.to_string(),
                r.mistake.to_string(),
                r.pertinent_size.to_string(),
                r.counter.to_string(),
                r.hist_call.to_string(),
                r.while_iters.to_string(),
            ];
            if adaptive {
                row.push(r.instance_seed.map(|s| s.to_string()).unwrap_or_default());
            }
            wtr.write_record(&row).map_err(csv_err)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Io(e.to_string()))
    }

    pub fn read_csv<R: std::io::Read>(r: R, seed: u64) -> Result<RunRecord> {
        let mut rdr = csv::Reader::from_reader(r);
        let mut rec = RunRecord::new(seed);
        for row in rdr.deserialize() {
            let row: RoundRecord = row.map_err(csv_err)?;
            rec.rounds.push(row);
        }
        Ok(rec)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(t: usize, mistake: u8, seed: Option<u64>) -> RoundRecord {
        RoundRecord {
            t,
            x: 3,
            y: 1,
            yhat: 1 - mistake,
            mistake,
            pertinent_size: 8,
            counter: 1,
            hist_call: 0,
            while_iters: 0,
            instance_seed: seed,
        }
    }

    #[test]
    fn csv_roundtrip() {
        let mut rec = RunRecord::new(5);
        rec.rounds = vec![row(1, 1, None), row(2, 0, None)];
        let s = rec.to_csv_string().unwrap();
        assert!(s.starts_with("t,x,y,yhat,mistake,pertinent_size,counter,hist_call,while_iters\n"));
        let back = RunRecord::read_csv(s.as_bytes(), 5).unwrap();
        assert_eq!(back, rec);
        assert_eq!(rec.mistakes(), 1);
        assert_eq!(rec.mistakes_until(1), 1);
    }

    #[test]
    fn adaptive_csv_has_instance_seed() {
        let mut rec = RunRecord::new(5);
        rec.rounds = vec![row(1, 0, Some(77))];
        let s = rec.to_csv_string().unwrap();
        assert!(s.lines().next().unwrap().ends_with(",instance_seed"));
        assert_eq!(RunRecord::read_csv(s.as_bytes(), 5).unwrap(), rec);
    }
}
