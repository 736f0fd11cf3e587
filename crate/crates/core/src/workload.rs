//! Synthetic bid generation, trace ingestion and the batch-interval rule.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::model::{Bid, Container, ContainerGraph, ResourceVector, Slot};

#[derive(Debug, Error)]
pub enum WorkloadError {
    #[error("invalid generator config: {0}")]
    Config(String),
    #[error("horizon {horizon} too short for any job (shortest needs {needed} slots)")]
    HorizonTooShort { horizon: Slot, needed: Slot },
    #[error("trace row {row}: {message}")]
    Row { row: usize, message: String },
    #[error("trace has no jobs")]
    EmptyTrace,
    #[error("cannot read trace")]
    Io(#[from] std::io::Error),
    #[error("average slack {slack} does not exceed average processing time {processing}")]
    NoSlack { processing: f64, slack: f64 },
    #[error("loss target {0} outside (0, 1)")]
    LossTarget(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GraphShape {
    Chain,
    RandomDag,
}

/// Knobs of the synthetic workload. Ranges are inclusive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub horizon: Slot,
    pub resources: usize,
    pub capacity: f64,
    /// Expected arrivals per batch window.
    pub density: f64,
    /// Length of the window the density refers to.
    pub window: u32,
    pub slots_range: (u32, u32),
    pub demand_range: (f64, f64),
    pub containers_range: (usize, usize),
    pub shape: GraphShape,
    pub edge_probability: f64,
    /// Bid value per resource-slot, `[F, D]`.
    pub value_range: (f64, f64),
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            horizon: 200,
            resources: 3,
            capacity: 50.0,
            density: 10.0,
            window: 4,
            slots_range: (1, 10),
            demand_range: (0.0, 1.0),
            containers_range: (1, 6),
            shape: GraphShape::Chain,
            edge_probability: 0.3,
            value_range: (1.0, 2.0),
            seed: 1,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<(), WorkloadError> {
        let bad = |m: &str| Err(WorkloadError::Config(m.to_string()));
        if self.horizon == 0 {
            return bad("horizon must be positive");
        }
        if self.resources == 0 {
            return bad("need at least one resource");
        }
        if !(self.capacity > 0.0) {
            return bad("capacity must be positive");
        }
        if !(self.density > 0.0 && self.density.is_finite()) {
            return bad("density must be positive");
        }
        if self.window == 0 {
            return bad("window must be at least 1 slot");
        }
        if self.slots_range.0 == 0 || self.slots_range.0 > self.slots_range.1 {
            return bad("slots range must be non-empty and start at 1 or more");
        }
        let (dl, dh) = self.demand_range;
        if !(0.0 <= dl && dl <= dh && dh > 0.0) {
            return bad("demand range must be non-empty, non-negative and reach above 0");
        }
        if self.containers_range.0 == 0 || self.containers_range.0 > self.containers_range.1 {
            return bad("container count range must be non-empty and start at 1 or more");
        }
        if !(0.0..=1.0).contains(&self.edge_probability) {
            return bad("edge probability must lie in [0, 1]");
        }
        let (f, d) = self.value_range;
        if !(f > 0.0 && f <= d) {
            return bad("value range must be non-empty and positive");
        }
        // Arrival t and a one-container job of the shortest length need
        // deadline t + N <= T.
        let needed = self.slots_range.0 + 1;
        if self.horizon < needed {
            return Err(WorkloadError::HorizonTooShort {
                horizon: self.horizon,
                needed,
            });
        }
        Ok(())
    }
}

/// Stream tags for [`derive_seed`].
const ARRIVALS: u64 = 0x01;
const TRACE: u64 = 0x02;

/// Derives an independent seed for `(component, index)` from `root`.
///
/// SplitMix64 finalizer over the mixed inputs, so any stream can be
/// rebuilt in isolation.
pub fn derive_seed(root: u64, component: u64, index: u64) -> u64 {
    let mut z = root
        ^ component.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A random job shape: containers and precedence edges.
fn random_graph(cfg: &GeneratorConfig, rng: &mut ChaCha8Rng) -> ContainerGraph {
    let m = rng.random_range(cfg.containers_range.0..=cfg.containers_range.1);
    let containers = (0..m)
        .map(|_| {
            let slots = rng.random_range(cfg.slots_range.0..=cfg.slots_range.1);
            Container::new(slots, random_demand(cfg, rng))
        })
        .collect();
    let edges = match cfg.shape {
        GraphShape::Chain => (1..m).map(|j| (j - 1, j)).collect(),
        GraphShape::RandomDag => {
            let mut edges = Vec::new();
            for a in 0..m {
                for b in a + 1..m {
                    if rng.random_bool(cfg.edge_probability) {
                        edges.push((a, b));
                    }
                }
            }
            transitive_reduction(m, &edges)
        }
    };
    ContainerGraph::new(containers, edges)
}

/// Per-slot demand; redrawn in the measure-zero case of an all-zero vector.
fn random_demand(cfg: &GeneratorConfig, rng: &mut ChaCha8Rng) -> ResourceVector {
    let (lo, hi) = cfg.demand_range;
    loop {
        let v: Vec<f64> = (0..cfg.resources)
            .map(|_| {
                if lo == hi {
                    lo
                } else {
                    rng.random_range(lo..hi)
                }
            })
            .collect();
        if v.iter().any(|&x| x > 0.0) {
            return ResourceVector::new(v);
        }
    }
}

/// Drops every edge implied by a longer path. Edges must go from lower to
/// higher index.
pub fn transitive_reduction(n: usize, edges: &[(usize, usize)]) -> Vec<(usize, usize)> {
    let mut reach = vec![vec![false; n]; n];
    let mut succ = vec![Vec::new(); n];
    for &(a, b) in edges {
        succ[a].push(b);
    }
    for a in (0..n).rev() {
        for &b in &succ[a] {
            reach[a][b] = true;
            let via = reach[b].clone();
            for (to, &hit) in reach[a].iter_mut().zip(&via) {
                *to |= hit;
            }
        }
    }
    edges
        .iter()
        .copied()
        .filter(|&(a, b)| !succ[a].iter().any(|&c| c != b && reach[c][b]))
        .collect()
}

/// A full bid for a job arriving at `arrival`, or `None` when it cannot
/// finish by the horizon.
fn random_bid(cfg: &GeneratorConfig, arrival: Slot, rng: &mut ChaCha8Rng) -> Option<Bid> {
    let graph = random_graph(cfg, rng);
    let longest = graph
        .longest_path_slots()
        .expect("generated graphs are acyclic");
    let earliest = arrival + longest;
    if earliest > cfg.horizon {
        return None;
    }
    let deadline = rng.random_range(earliest..=cfg.horizon);
    let price = unit_value_price(cfg.value_range, &graph, rng);
    Some(Bid {
        id: 0,
        graph,
        arrival,
        deadline,
        price,
    })
}

/// `v * sum_m N_m * sum_r h_m,r` with `v ~ U[F, D]`.
fn unit_value_price(range: (f64, f64), graph: &ContainerGraph, rng: &mut ChaCha8Rng) -> f64 {
    let v = if range.0 == range.1 {
        range.0
    } else {
        rng.random_range(range.0..=range.1)
    };
    let volume: f64 = graph
        .containers()
        .iter()
        .map(|c| f64::from(c.slots) * c.demand.sum())
        .sum();
    v * volume
}

/// Draws a workload. Each arrival window has its own seeded stream, so
/// windows are generated in parallel and any one can be rebuilt alone.
///
/// Arrivals whose job cannot finish by the horizon are dropped. Ids run
/// from 1 in arrival order.
pub fn generate_bids(cfg: &GeneratorConfig) -> Result<Vec<Bid>, WorkloadError> {
    cfg.validate()?;
    let poisson =
        Poisson::new(cfg.density).map_err(|e| WorkloadError::Config(format!("density: {e}")))?;
    let windows = cfg.horizon.div_ceil(cfg.window);
    let per_window: Vec<Vec<Bid>> = (0..windows)
        .into_par_iter()
        .map(|q| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, ARRIVALS, u64::from(q)));
            let count = poisson.sample(&mut rng) as usize;
            let first = q * cfg.window + 1;
            let last = ((q + 1) * cfg.window).min(cfg.horizon);
            let mut arrivals: Vec<Slot> =
                (0..count).map(|_| rng.random_range(first..=last)).collect();
            arrivals.sort_unstable();
            arrivals
                .into_iter()
                .filter_map(|t| random_bid(cfg, t, &mut rng))
                .collect()
        })
        .collect();
    let mut bids: Vec<Bid> = per_window.into_iter().flatten().collect();
    for (i, b) in bids.iter_mut().enumerate() {
        b.id = i as u64 + 1;
    }
    Ok(bids)
}

/// How trace jobs become bids.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TraceMapping {
    /// Slot length in the trace's time unit.
    pub slot_length: f64,
    pub horizon: Slot,
    /// Containers per job; a job's slots are split evenly along a chain.
    pub chain_split: u32,
    pub value_range: (f64, f64),
    pub seed: u64,
}

impl Default for TraceMapping {
    fn default() -> Self {
        Self {
            slot_length: 1.0,
            horizon: 200,
            chain_split: 1,
            value_range: (1.0, 2.0),
            seed: 1,
        }
    }
}

#[derive(Debug, Deserialize)]
struct TraceRow {
    job_id: u64,
    arrival: String,
    duration: String,
    cpu: f64,
    ram: f64,
    disk: f64,
}

/// Parses a time value, tolerating an `h` unit suffix.
fn parse_time(raw: &str) -> Result<f64, String> {
    let s = raw.trim();
    let s = s.strip_suffix('h').unwrap_or(s).trim();
    s.parse::<f64>()
        .map_err(|_| format!("not a number: {raw:?}"))
}

/// Reads a CSV trace with header `job_id,arrival,duration,cpu,ram,disk`.
///
/// Arrival and duration share a time unit; `mapping.slot_length` converts
/// both to slots, rounding up. Deadlines and prices follow the generator's
/// rules, seeded per job.
pub fn load_trace(
    path: impl AsRef<Path>,
    mapping: &TraceMapping,
) -> Result<Vec<Bid>, WorkloadError> {
    let text = std::fs::read_to_string(path)?;
    parse_trace(&text, mapping)
}

/// [`load_trace`] over an in-memory CSV.
pub fn parse_trace(text: &str, mapping: &TraceMapping) -> Result<Vec<Bid>, WorkloadError> {
    if !(mapping.slot_length > 0.0) {
        return Err(WorkloadError::Config("slot length must be positive".into()));
    }
    if mapping.chain_split == 0 {
        return Err(WorkloadError::Config(
            "chain split must be at least 1".into(),
        ));
    }
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut bids = Vec::new();
    for (i, record) in reader.deserialize::<TraceRow>().enumerate() {
        // Row numbers count the header as row 1.
        let row = i + 2;
        let fail = |message: String| WorkloadError::Row { row, message };
        let rec = record.map_err(|e| fail(e.to_string()))?;
        let arrival_time = parse_time(&rec.arrival).map_err(fail)?;
        let duration = parse_time(&rec.duration).map_err(fail)?;
        if !(duration > 0.0) {
            return Err(fail("non-positive duration".into()));
        }
        if arrival_time < 0.0 {
            return Err(fail("negative arrival".into()));
        }
        let demand = vec![rec.cpu, rec.ram, rec.disk];
        if demand.iter().any(|&h| !(h >= 0.0)) || demand.iter().all(|&h| h == 0.0) {
            return Err(fail("demands must be non-negative and not all zero".into()));
        }
        let arrival = ((arrival_time / mapping.slot_length).ceil() as Slot).max(1);
        if arrival > mapping.horizon {
            return Err(fail(format!(
                "arrival slot {arrival} beyond horizon {}",
                mapping.horizon
            )));
        }
        let total = (duration / mapping.slot_length).ceil() as u32;
        let parts = mapping.chain_split.min(total);
        let containers = (0..parts)
            .map(|p| {
                let slots = total / parts + u32::from(p < total % parts);
                Container::new(slots, demand.clone())
            })
            .collect();
        let graph = ContainerGraph::chain(containers);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(mapping.seed, TRACE, rec.job_id));
        // Jobs that cannot finish are kept with the latest deadline and
        // show up as never feasible.
        let earliest = (arrival + total).min(mapping.horizon);
        let deadline = rng.random_range(earliest..=mapping.horizon);
        let price = unit_value_price(mapping.value_range, &graph, &mut rng);
        bids.push(Bid {
            id: rec.job_id,
            graph,
            arrival,
            deadline,
            price,
        });
    }
    if bids.is_empty() {
        return Err(WorkloadError::EmptyTrace);
    }
    Ok(bids)
}

/// Recommended batch length.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BatchInterval {
    pub theta: u32,
    /// No length of one slot or more meets the target; `theta` is 1.
    pub clamped: bool,
}

/// Longest batch that loses at most `loss_target` of jobs to batching delay.
///
/// With processing time `~ N(a1, b1^2)` and slack `d - t ~ N(a2, b2^2)`, a
/// job's spare waiting time is `N(a2 - a1, b1^2 + b2^2)`. A job is lost when
/// that is below the batch length, so the answer is the largest integer
/// `theta >= 1` whose CDF value stays within the target.
pub fn batch_interval(
    processing: (f64, f64),
    slack: (f64, f64),
    loss_target: f64,
) -> Result<BatchInterval, WorkloadError> {
    let (a1, b1) = processing;
    let (a2, b2) = slack;
    if !(a2 > a1) {
        return Err(WorkloadError::NoSlack {
            processing: a1,
            slack: a2,
        });
    }
    if !(loss_target > 0.0 && loss_target < 1.0) {
        return Err(WorkloadError::LossTarget(loss_target));
    }
    let mean = a2 - a1;
    let spread = (b1 * b1 + b2 * b2).sqrt();
    let z = Normal::standard().inverse_cdf(loss_target);
    let bound = (mean + z * spread).floor();
    Ok(if bound >= 1.0 {
        BatchInterval {
            theta: bound.min(f64::from(u32::MAX)) as u32,
            clamped: false,
        }
    } else {
        BatchInterval {
            theta: 1,
            clamped: true,
        }
    })
}

/// Sample mean and standard deviation of processing time (longest path in
/// slots) and slack (`d - t`) over `bids`, as `((a1, b1), (a2, b2))`.
pub fn interval_stats(bids: &[Bid]) -> Option<((f64, f64), (f64, f64))> {
    if bids.is_empty() {
        return None;
    }
    let stats = |xs: Vec<f64>| {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        (mean, var.sqrt())
    };
    let processing = bids
        .iter()
        .map(|b| f64::from(b.graph.longest_path_slots().unwrap_or(0)))
        .collect();
    let slack = bids
        .iter()
        .map(|b| f64::from(b.deadline) - f64::from(b.arrival))
        .collect();
    Some((stats(processing), stats(slack)))
}
