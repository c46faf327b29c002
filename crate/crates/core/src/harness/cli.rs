use std::ffi::OsString;
use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::sync::Arc;

use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use super::audit::{audit, AuditSpec, Mechanism, Neighbor};
use super::config::{sidecar_path, suffixed, trial_path, AlgorithmParams, ParamMode, RunConfig};
use super::demo::{hist_demo, write_demo_csv};
use super::summary::summarize;
use crate::adaptive::{build_adaptive_adversary, run_adaptive, run_soa_adaptive, FixedTarget};
use crate::error::{Error, Result};
use crate::forest::{run_oblivious, theory_params, Publish};
use crate::hypothesis::{generators, HypothesisClass};
use crate::mech::PrivacyParams;
use crate::record::RunRecord;
use crate::sparse::{theta_histsparse, SparseParams};

#[derive(Parser, Debug)]
#[command(name = "dpsoa", version, about = "Differentially private online classification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the Littlestone dimension of a class.
    Ldim {
        #[arg(long)]
        class: String,
    },
    /// Run the non-private SOA baseline.
    SoaRun(RunArgs),
    /// Run DP-SOA against an oblivious adversary.
    DpsoaRun(RunArgs),
    /// Run the adaptive reduction.
    AdaptiveRun(RunArgs),
    /// Run HistSparse on a synthetic drifting stream.
    HistDemo(DemoArgs),
    /// Empirical privacy audit of a mechanism.
    Audit(AuditArgs),
    /// Print the worst-case parameter values.
    Params(ParamsArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Theory,
    Explicit,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PublishArg {
    Sparse,
    PerStep,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long)]
    class: String,
    #[arg(long, default_value = "fixed-target")]
    adversary: String,
    #[arg(long = "T")]
    horizon: usize,
    #[arg(long, default_value_t = 1.0)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.01)]
    delta: f64,
    #[arg(long, value_enum, default_value = "explicit")]
    params: ModeArg,
    #[arg(long)]
    k1: Option<usize>,
    #[arg(long)]
    k2: Option<usize>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    c: Option<u64>,
    /// Failure probability the histogram threshold is calibrated for.
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long, value_enum, default_value = "sparse")]
    publish: PublishArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    trials: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct DemoArgs {
    /// List length; defaults to the smallest length the contract covers.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 0.5)]
    eta: f64,
    #[arg(long, default_value_t = 4)]
    c: u64,
    #[arg(long, default_value_t = 1.0)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.01)]
    delta: f64,
    #[arg(long, default_value_t = 0.05)]
    beta: f64,
    #[arg(long = "T", default_value_t = 200)]
    horizon: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct AuditArgs {
    /// laplace-count, stable-histogram or above-threshold-stream.
    #[arg(long)]
    mechanism: String,
    /// adjacent or identical.
    #[arg(long, default_value = "adjacent")]
    neighbor: String,
    #[arg(long, default_value_t = 1.0)]
    epsilon: f64,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, default_value_t = 2)]
    c: u64,
    #[arg(long, default_value_t = 100_000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ParamsArgs {
    /// Littlestone dimension; taken from `--class` when absent.
    #[arg(long)]
    d: Option<u32>,
    #[arg(long)]
    class: Option<String>,
    #[arg(long = "T")]
    horizon: u64,
    #[arg(long, default_value_t = 1.0)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.01)]
    delta: f64,
}

enum Failure {
    Usage(clap::Error),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e)
    }
}

/// Parses `args` (program name first), runs the subcommand, and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(Failure::Usage(e)) => {
            let _ = e.print();
            2
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn usage(kind: ErrorKind, msg: String) -> Failure {
    Failure::Usage(Cli::command().error(kind, msg))
}

fn dispatch(cmd: Command) -> std::result::Result<(), Failure> {
    match cmd {
        Command::Ldim { class } => {
            println!("{}", generators::from_spec(&class)?.ldim()?);
            Ok(())
        }
        Command::SoaRun(a) => run_command("soa-run", a),
        Command::DpsoaRun(a) => run_command("dpsoa-run", a),
        Command::AdaptiveRun(a) => run_command("adaptive-run", a),
        Command::HistDemo(a) => Ok(demo_command(a)?),
        Command::Audit(a) => audit_command(a),
        Command::Params(a) => params_command(a),
    }
}

fn resolve(command: &str, a: RunArgs) -> std::result::Result<RunConfig, Failure> {
    let private = command != "soa-run";
    let mode = match a.params {
        ModeArg::Theory => ParamMode::Theory,
        ModeArg::Explicit => ParamMode::Explicit,
    };
    let algorithm = match (a.k1, a.k2, a.eta, a.c) {
        (Some(k1), Some(k2), Some(eta), Some(c)) => Some(AlgorithmParams { k1, k2, eta, c }),
        _ if private && mode == ParamMode::Explicit => {
            let missing: Vec<&str> = [
                ("--k1", a.k1.is_none()),
                ("--k2", a.k2.is_none()),
                ("--eta", a.eta.is_none()),
                ("--c", a.c.is_none()),
            ]
            .into_iter()
            .filter_map(|(n, m)| m.then_some(n))
            .collect();
            return Err(usage(
                ErrorKind::MissingRequiredArgument,
                format!("explicit parameters need {}", missing.join(", ")),
            ));
        }
        _ => None,
    };
    if a.trials == 0 {
        return Err(usage(ErrorKind::InvalidValue, "--trials must be at least 1".into()));
    }
    Ok(RunConfig {
        command: command.to_string(),
        class: a.class,
        adversary: a.adversary,
        horizon: a.horizon,
        epsilon: a.epsilon,
        delta: a.delta,
        mode,
        algorithm,
        beta: a.beta,
        publish: match a.publish {
            PublishArg::Sparse => Publish::Sparse,
            PublishArg::PerStep => Publish::PerStep,
        },
        seed: a.seed,
        trials: a.trials,
        out: a.out,
    })
}

/// One trial of a run subcommand.
fn run_trial(cfg: &RunConfig, class: &Arc<HypothesisClass>, i: usize) -> Result<RunRecord> {
    let seed = cfg.trial_seed(i);
    match cfg.command.as_str() {
        "soa-run" => {
            let mut adv = build_adaptive_adversary(&cfg.adversary, class.clone(), seed)?;
            let mut rec = run_soa_adaptive(class, adv.as_mut(), cfg.horizon)?;
            rec.seed = seed;
            Ok(rec)
        }
        "dpsoa-run" => {
            if cfg.adversary != "fixed-target" {
                build_adaptive_adversary(&cfg.adversary, class.clone(), seed)?;
                return Err(Error::param(
                    "adversary",
                    format!("`{}` is adaptive; use adaptive-run", cfg.adversary),
                ));
            }
            let params = cfg.dpsoa_params(class)?;
            let seq = FixedTarget::new(class, seed)?.sequence(cfg.horizon);
            run_oblivious(class, &seq, &params, cfg.publish, seed)
        }
        _ => {
            let params = cfg.dpsoa_params(class)?;
            let mut adv = build_adaptive_adversary(&cfg.adversary, class.clone(), seed)?;
            run_adaptive(class, adv.as_mut(), &params, cfg.horizon, seed)
        }
    }
}

pub fn run_trials(cfg: &RunConfig) -> Result<Vec<RunRecord>> {
    let class = Arc::new(generators::from_spec(&cfg.class)?);
    (0..cfg.trials)
        .into_par_iter()
        .map(|i| run_trial(cfg, &class, i))
        .collect()
}

fn run_command(command: &str, a: RunArgs) -> std::result::Result<(), Failure> {
    let cfg = resolve(command, a)?;
    let records = run_trials(&cfg)?;
    let summary = summarize(&records)?;
    if let Some(out) = &cfg.out {
        for (i, r) in records.iter().enumerate() {
            r.write_csv(BufWriter::new(File::create(trial_path(out, i, cfg.trials)).map_err(Error::from)?))?;
        }
        summary.write_csv(BufWriter::new(File::create(suffixed(out, ".summary.csv")).map_err(Error::from)?))?;
        summary.write_curve_csv(BufWriter::new(File::create(suffixed(out, ".curve.csv")).map_err(Error::from)?))?;
        cfg.write_sidecar()?;
    }
    println!("{}", summary.report());
    Ok(())
}

fn write_json_sidecar<T: Serialize>(command: &str, args: &T, out: &Option<PathBuf>) -> Result<()> {
    if let Some(out) = out {
        let v = serde_json::json!({ "command": command, "args": args });
        std::fs::write(sidecar_path(out), serde_json::to_string_pretty(&v).expect("serializes") + "\n")?;
    }
    Ok(())
}

fn demo_command(mut a: DemoArgs) -> Result<()> {
    let privacy = PrivacyParams::new(a.epsilon, a.delta)?;
    let k = match a.k {
        Some(k) => k,
        None => theta_histsparse(a.c, a.eta, a.horizon as u64, a.beta, a.epsilon, a.delta)? as usize,
    };
    a.k = Some(k);
    let rows = hist_demo(SparseParams::new(privacy, a.eta, a.c, k, a.beta)?, a.horizon, a.seed)?;
    match &a.out {
        Some(out) => write_demo_csv(&rows, BufWriter::new(File::create(out)?))?,
        None => write_demo_csv(&rows, std::io::stdout().lock())?,
    }
    write_json_sidecar("hist-demo", &a, &a.out)?;
    let calls: u64 = rows.iter().map(|r| r.hist_call as u64).sum();
    let min_freq = rows.iter().map(|r| r.freq_current).fold(f64::INFINITY, f64::min);
    eprintln!(
        "k {k}  rounds {}  hist calls {calls}  aborted {}  min freq(h_t) {min_freq:.4}",
        rows.len(),
        rows.last().is_some_and(|r| r.aborted == 1)
    );
    Ok(())
}

fn audit_command(a: AuditArgs) -> std::result::Result<(), Failure> {
    let mechanism: Mechanism = a.mechanism.parse().map_err(|e: Error| usage(ErrorKind::InvalidValue, e.to_string()))?;
    let neighbor: Neighbor = a.neighbor.parse().map_err(|e: Error| usage(ErrorKind::InvalidValue, e.to_string()))?;
    let mut spec = AuditSpec::new(mechanism, neighbor, a.epsilon, a.trials, a.seed);
    spec.c = a.c;
    if let Some(d) = a.delta {
        spec.delta = d;
    }
    let report = audit(&spec)?;
    if let Some(out) = &a.out {
        let mut wtr = csv::Writer::from_path(out).map_err(|e| Error::Io(e.to_string()))?;
        for b in &report.buckets {
            wtr.serialize(b).map_err(|e| Error::Io(e.to_string()))?;
        }
        wtr.flush().map_err(Error::from)?;
    }
    write_json_sidecar("audit", &a, &a.out)?;
    println!("{}", report.line());
    if report.pass {
        Ok(())
    } else {
        Err(Failure::Runtime(Error::param("audit", "estimated epsilon exceeds budget + slack")))
    }
}

fn params_command(a: ParamsArgs) -> std::result::Result<(), Failure> {
    let d = match (a.d, &a.class) {
        (Some(d), _) => d,
        (None, Some(class)) => generators::from_spec(class)?.ldim()?,
        (None, None) => {
            return Err(usage(ErrorKind::MissingRequiredArgument, "params needs --d or --class".into()));
        }
    };
    let tp = theory_params(d, a.horizon, a.epsilon, a.delta)?;
    println!("k1 = {}", tp.k1);
    println!("eta = {}", tp.eta);
    println!("c = {}", tp.c);
    println!("k2 = {}", tp.k2);
    Ok(())
}
