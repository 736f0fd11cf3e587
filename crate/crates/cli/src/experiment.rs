//! Experiment runners behind the CLI subcommands.
//!
//! Every repetition draws its workload from a seed derived from the root
//! seed and the repetition index, so any row can be rebuilt on its own.
//! Repetitions run in parallel; rows come back sorted by sweep value, then
//! repetition.

use std::path::PathBuf;
use std::time::Instant;

use batch_auction::auction::{
    run_batch_auction, run_fcfs_baseline, AuctionConfig, AuctionError, AuctionOutcome, Event,
};
use batch_auction::model::{Bid, ResourceVector, Slot};
use batch_auction::oracle::{self, exact_opt, OracleError, OracleLimits};
use batch_auction::pricing::{solve_k, PricingConfig};
use batch_auction::scheduler::SearchLimits;
use batch_auction::workload::{
    batch_interval, derive_seed, generate_bids, interval_stats, load_trace, GeneratorConfig,
    TraceMapping, WorkloadError,
};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

/// Version stamped into every result file.
pub const SCHEMA_VERSION: u32 = 1;

/// Seed stream for per-repetition workloads.
const REPETITION: u64 = 0x10;

/// Loss target used for the recommended batch interval.
pub const LOSS_TARGET: f64 = 0.1;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("{0}")]
    Spec(String),
    #[error(transparent)]
    Workload(#[from] WorkloadError),
    #[error(transparent)]
    Auction(#[from] AuctionError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

impl ExperimentError {
    /// Process exit code: 2 for bad input, 3 for oracle limits.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Oracle(OracleError::TooLarge(_) | OracleError::BudgetExceeded(_)) => 3,
            _ => 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Source {
    Generate(GeneratorConfig),
    Trace {
        path: PathBuf,
        mapping: TraceMapping,
    },
}

/// A fully resolved experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub source: Source,
    pub horizon: Slot,
    pub resources: usize,
    pub capacity: f64,
    pub theta: u32,
    pub sigma: f64,
    /// `D / F` with `F = 1`; bid unit values are drawn from `[1, D]`.
    pub df_ratio: f64,
    pub max_containers_exact: usize,
    pub reps: u32,
    pub seed: u64,
    /// Report wall-clock time per row (breaks byte-for-byte reproducibility).
    pub timing: bool,
    /// Keep event logs for `--events`.
    pub record_events: bool,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::Spec(m));
        if self.horizon == 0 {
            return bad("--slots must be at least 1".into());
        }
        if self.theta == 0 {
            return bad("--theta must be at least 1".into());
        }
        if !(self.sigma > 0.0 && self.sigma <= 1.0) {
            return bad(format!("--sigma must lie in (0, 1], got {}", self.sigma));
        }
        if !(self.df_ratio >= 1.0 && self.df_ratio.is_finite()) {
            return bad(format!(
                "--df-ratio must be at least 1, got {}",
                self.df_ratio
            ));
        }
        if self.df_ratio / self.sigma <= 1.0 {
            return bad("--df-ratio 1 needs --sigma below 1 so prices can rise".into());
        }
        if !(self.capacity > 0.0) {
            return bad("--capacity must be positive".into());
        }
        if self.resources == 0 {
            return bad("need at least one resource".into());
        }
        if self.reps == 0 {
            return bad("--reps must be at least 1".into());
        }
        if self.max_containers_exact == 0 {
            return bad("--max-containers-exact must be at least 1".into());
        }
        if let Source::Generate(g) = &self.source {
            g.validate()?;
        }
        Ok(())
    }

    /// Seed of repetition `rep`.
    pub fn rep_seed(&self, rep: u32) -> u64 {
        derive_seed(self.seed, REPETITION, u64::from(rep))
    }

    /// The workload of repetition `rep`.
    pub fn workload(&self, rep: u32) -> Result<Vec<Bid>, ExperimentError> {
        let seed = self.rep_seed(rep);
        let value_range = (1.0, self.df_ratio);
        Ok(match &self.source {
            Source::Generate(g) => generate_bids(&GeneratorConfig {
                horizon: self.horizon,
                resources: self.resources,
                capacity: self.capacity,
                value_range,
                seed,
                ..g.clone()
            })?,
            Source::Trace { path, mapping } => load_trace(
                path,
                &TraceMapping {
                    horizon: self.horizon,
                    value_range,
                    seed,
                    ..mapping.clone()
                },
            )?,
        })
    }

    /// Auction settings at batch length `theta`, with price bounds matching
    /// the workload's unit-value range.
    pub fn auction(&self, theta: u32) -> AuctionConfig {
        AuctionConfig {
            horizon: self.horizon,
            capacities: ResourceVector::uniform(self.resources, self.capacity),
            theta,
            pricing: PricingConfig::fixed_uniform(self.resources, 1.0, self.df_ratio, self.sigma),
            limits: SearchLimits {
                max_containers: self.max_containers_exact,
                ..SearchLimits::default()
            },
            record_events: self.record_events,
        }
    }
}

/// One repetition of `run`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunRow {
    pub rep: u32,
    pub seed: u64,
    pub bids: usize,
    pub welfare_batch: f64,
    pub welfare_fcfs: f64,
    /// Offline optimum over batch welfare, when the instance is small enough.
    pub ratio: Option<f64>,
    pub winner_fraction: f64,
    pub sigma_realized: f64,
    pub lost: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runtime_ms: Option<u64>,
}

/// Event log lines tagged with their repetition.
#[derive(Serialize)]
struct TaggedEvent<'a> {
    rep: u32,
    #[serde(flatten)]
    event: &'a Event,
}

fn event_lines(rep: u32, outcome: &AuctionOutcome) -> String {
    outcome
        .events
        .iter()
        .map(|event| serde_json::to_string(&TaggedEvent { rep, event }).expect("event") + "\n")
        .collect()
}

/// Whether `bids` fits the exact oracle.
fn oracle_sized(bids: &[Bid], horizon: Slot) -> bool {
    let limits = OracleLimits::default();
    bids.len() <= limits.max_bids && horizon <= limits.max_horizon
}

/// Batch auction versus FCFS, one row per repetition, plus the batch
/// auction's event log when events are recorded.
pub fn cmd_run(spec: &ExperimentSpec) -> Result<(Vec<RunRow>, String), ExperimentError> {
    spec.validate()?;
    let results: Vec<Result<(RunRow, String), ExperimentError>> = (0..spec.reps)
        .into_par_iter()
        .map(|rep| {
            let started = Instant::now();
            let bids = spec.workload(rep)?;
            let row = run_one(spec, rep, &bids)?;
            let (mut row, events) = row;
            if spec.timing {
                row.runtime_ms = Some(started.elapsed().as_millis() as u64);
            }
            Ok((row, events))
        })
        .collect();
    let mut rows = Vec::new();
    let mut events = String::new();
    for r in results {
        let (row, log) = r?;
        rows.push(row);
        events.push_str(&log);
    }
    Ok((rows, events))
}

fn run_one(
    spec: &ExperimentSpec,
    rep: u32,
    bids: &[Bid],
) -> Result<(RunRow, String), ExperimentError> {
    let config = spec.auction(spec.theta);
    let row = |welfare_batch, welfare_fcfs, ratio, winner_fraction, sigma_realized, lost| RunRow {
        rep,
        seed: spec.rep_seed(rep),
        bids: bids.len(),
        welfare_batch,
        welfare_fcfs,
        ratio,
        winner_fraction,
        sigma_realized,
        lost,
        runtime_ms: None,
    };
    if bids.is_empty() {
        return Ok((row(0.0, 0.0, None, 0.0, 0.0, 0), String::new()));
    }
    let batch = run_batch_auction(bids, &config)?;
    let fcfs = run_fcfs_baseline(
        bids,
        &AuctionConfig {
            record_events: false,
            ..config.clone()
        },
    )?;
    let ratio = if oracle_sized(bids, spec.horizon) {
        let opt = exact_opt(bids, &config, &OracleLimits::default())?;
        Some(oracle::ratio(opt.welfare, batch.social_welfare))
    } else {
        None
    };
    Ok((
        row(
            batch.social_welfare,
            fcfs.social_welfare,
            ratio,
            batch.winner_fraction(),
            oracle::occupation_ratio(bids, &batch),
            batch.lost(),
        ),
        event_lines(rep, &batch),
    ))
}

/// One `(theta, repetition)` point of `sweep-theta`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThetaRow {
    pub theta: u32,
    pub rep: u32,
    pub bids: usize,
    pub welfare: f64,
    pub winner_fraction: f64,
    pub sigma_realized: f64,
    pub lost: usize,
    /// Batch length suggested by the workload's own processing and slack
    /// statistics at a 10% loss target.
    pub recommended_theta: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runtime_ms: Option<u64>,
}

/// Welfare and winners as the batch length varies over a fixed workload.
pub fn cmd_sweep_theta(
    spec: &ExperimentSpec,
    thetas: &[u32],
) -> Result<Vec<ThetaRow>, ExperimentError> {
    spec.validate()?;
    if thetas.is_empty() {
        return Err(ExperimentError::Spec(
            "sweep needs at least one theta".into(),
        ));
    }
    if thetas.contains(&0) {
        return Err(ExperimentError::Spec(
            "theta values must be at least 1".into(),
        ));
    }
    let mut sorted = thetas.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let workloads: Vec<Vec<Bid>> = (0..spec.reps)
        .into_par_iter()
        .map(|rep| spec.workload(rep))
        .collect::<Result<_, _>>()?;
    let points: Vec<(u32, u32)> = sorted
        .iter()
        .flat_map(|&t| (0..spec.reps).map(move |r| (t, r)))
        .collect();
    points
        .into_par_iter()
        .map(|(theta, rep)| {
            let started = Instant::now();
            let bids = &workloads[rep as usize];
            let recommended = interval_stats(bids)
                .and_then(|(processing, slack)| batch_interval(processing, slack, LOSS_TARGET).ok())
                .map(|b| b.theta);
            let (welfare, winner_fraction, sigma_realized, lost) = if bids.is_empty() {
                (0.0, 0.0, 0.0, 0)
            } else {
                let out = run_batch_auction(bids, &spec.auction(theta))?;
                (
                    out.social_welfare,
                    out.winner_fraction(),
                    oracle::occupation_ratio(bids, &out),
                    out.lost(),
                )
            };
            Ok(ThetaRow {
                theta,
                rep,
                bids: bids.len(),
                welfare,
                winner_fraction,
                sigma_realized,
                lost,
                recommended_theta: recommended,
                runtime_ms: spec.timing.then(|| started.elapsed().as_millis() as u64),
            })
        })
        .collect()
}

/// Summary of empirical ratios at one `D / F` value.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RatioRow {
    pub df_ratio: f64,
    /// Theoretical ratio for `D / (sigma F)`.
    pub k: f64,
    pub instances: usize,
    pub mean_ratio: Option<f64>,
    pub max_ratio: Option<f64>,
    /// Set when an instance broke the oracle's limits; the row's
    /// statistics are then absent.
    pub error: Option<String>,
}

/// Cuts a workload down to the oracle's bid limit, keeping the earliest ids.
pub fn oracle_instance(mut bids: Vec<Bid>) -> Vec<Bid> {
    bids.truncate(OracleLimits::default().max_bids);
    bids
}

/// Empirical competitive ratios of small instances across `D / F` values.
///
/// Oracle limit breaches mark the row and the sweep continues; the caller
/// decides the exit status from [`RatioRow::error`].
pub fn cmd_ratio_sweep(
    spec: &ExperimentSpec,
    df_ratios: &[f64],
) -> Result<Vec<RatioRow>, ExperimentError> {
    if df_ratios.is_empty() {
        return Err(ExperimentError::Spec(
            "sweep needs at least one D/F value".into(),
        ));
    }
    let mut sorted = df_ratios.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    for &df in &sorted {
        ExperimentSpec {
            df_ratio: df,
            ..spec.clone()
        }
        .validate()?;
    }
    Ok(sorted
        .into_par_iter()
        .map(|df| {
            let at = ExperimentSpec {
                df_ratio: df,
                ..spec.clone()
            };
            let k = solve_k(df / spec.sigma).unwrap_or(f64::NAN);
            let ratios: Result<Vec<f64>, ExperimentError> = (0..spec.reps)
                .into_par_iter()
                .map(|rep| {
                    let bids = oracle_instance(at.workload(rep)?);
                    if bids.is_empty() {
                        return Ok(1.0);
                    }
                    let config = at.auction(at.theta);
                    let opt = exact_opt(&bids, &config, &OracleLimits::default())?;
                    let auction = run_batch_auction(&bids, &config)?;
                    Ok(oracle::ratio(opt.welfare, auction.social_welfare))
                })
                .collect();
            match ratios {
                Ok(r) => RatioRow {
                    df_ratio: df,
                    k,
                    instances: r.len(),
                    mean_ratio: Some(r.iter().sum::<f64>() / r.len() as f64),
                    max_ratio: Some(r.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
                    error: None,
                },
                Err(e) => RatioRow {
                    df_ratio: df,
                    k,
                    instances: 0,
                    mean_ratio: None,
                    max_ratio: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect())
}
