use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::{theory_params, DpSoaParams, Publish, TheoryParams};
use crate::hypothesis::HypothesisClass;
use crate::mech::{PrivacyParams, RngSeed};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParamMode {
    Theory,
    Explicit,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmParams {
    pub k1: usize,
    pub k2: usize,
    pub eta: f64,
    pub c: u64,
}

/// Resolved configuration of one subcommand invocation. Serialized as the
/// `<out>.config` sidecar.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: String,
    pub class: String,
    pub adversary: String,
    pub horizon: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub mode: ParamMode,
    pub algorithm: Option<AlgorithmParams>,
    pub beta: f64,
    pub publish: Publish,
    pub seed: u64,
    pub trials: usize,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn privacy(&self) -> Result<PrivacyParams> {
        PrivacyParams::new(self.epsilon, self.delta)
    }

    /// Algorithm parameters for this run. Theory mode derives them from the
    /// class's Littlestone dimension and fails when they cannot be run.
    pub fn dpsoa_params(&self, class: &HypothesisClass) -> Result<DpSoaParams> {
        let privacy = self.privacy()?;
        let alg = match (self.mode, self.algorithm) {
            (ParamMode::Explicit, Some(a)) => a,
            (ParamMode::Explicit, None) => {
                return Err(Error::param("params", "explicit mode needs k1, k2, eta and c"));
            }
            (ParamMode::Theory, _) => {
                let tp = self.theory(class)?;
                return Err(Error::param(
                    "params",
                    format!(
                        "theory parameters are not runnable: k1 = {}, k2 has {} bits",
                        tp.k1,
                        tp.k2.bits()
                    ),
                ));
            }
        };
        let p = DpSoaParams {
            k1: alg.k1,
            k2: alg.k2,
            eta: alg.eta,
            c: alg.c,
            privacy,
            beta: self.beta,
        };
        p.sparse()?;
        Ok(p)
    }

    pub fn theory(&self, class: &HypothesisClass) -> Result<TheoryParams> {
        theory_params(class.ldim()?, self.horizon as u64, self.epsilon, self.delta)
    }

    /// Seed of trial `i`, independent of how trials are scheduled.
    pub fn trial_seed(&self, i: usize) -> u64 {
        RngSeed::new(self.seed, 3).derive(i as u64).seed
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn write_sidecar(&self) -> Result<()> {
        if let Some(out) = &self.out {
            std::fs::write(sidecar_path(out), self.to_json() + "\n")?;
        }
        Ok(())
    }
}

pub fn sidecar_path(out: &Path) -> PathBuf {
    suffixed(out, ".config")
}

/// `<out>` with `suffix` appended to the file name.
pub fn suffixed(out: &Path, suffix: &str) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Transcript path of trial `i`; a single trial writes `out` itself.
pub fn trial_path(out: &Path, i: usize, trials: usize) -> PathBuf {
    if trials == 1 {
        return out.to_path_buf();
    }
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let ext = out.extension().map(|e| e.to_string_lossy().into_owned()).unwrap_or_else(|| "csv".into());
    out.with_file_name(format!("{stem}.{i}.{ext}"))
}
