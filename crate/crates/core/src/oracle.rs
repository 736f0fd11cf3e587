//! Offline optimum for small instances and the run metrics built on it.

use std::collections::BTreeSet;

use rayon::prelude::*;
use thiserror::Error;

use crate::auction::{run_batch_auction, AuctionConfig, AuctionError, AuctionOutcome};
use crate::model::{fits, Bid, Market, Schedule, Slot};
use crate::pricing::{solve_k, PricingError};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("instance too large for exact oracle: {0}")]
    TooLarge(String),
    #[error("exact oracle exceeded its budget of {0} nodes")]
    BudgetExceeded(u64),
    #[error(transparent)]
    Auction(#[from] AuctionError),
    #[error(transparent)]
    Pricing(#[from] PricingError),
}

/// Size guards on [`exact_opt`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OracleLimits {
    pub max_bids: usize,
    pub max_horizon: Slot,
    pub max_nodes: u64,
}

impl Default for OracleLimits {
    fn default() -> Self {
        Self {
            max_bids: 6,
            max_horizon: 12,
            max_nodes: 10_000_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimumReport {
    pub welfare: f64,
    /// Per input bid, the schedule it runs under in the optimum.
    pub assignment: Vec<Option<Schedule>>,
    pub nodes: u64,
}

/// A distinct per-slot usage pattern of one bid, with one schedule producing it.
struct Candidate {
    usage: Vec<(usize, Vec<f64>)>,
    schedule: Schedule,
}

/// Every schedule of `bid` inside `[arrival, deadline]` that fits an empty
/// market, one per distinct footprint.
fn schedules_of(bid: &Bid, horizon: Slot, capacities: &[f64]) -> Vec<Candidate> {
    let graph = &bid.graph;
    let Ok(order) = graph.topological_order() else {
        return Vec::new();
    };
    let lo = bid.arrival.max(1);
    let hi = bid.deadline.min(horizon);
    let resources = capacities.len();
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    let mut assignment = vec![Vec::new(); graph.len()];
    let mut usage = vec![0.0; (horizon as usize + 1) * resources];

    #[allow(clippy::too_many_arguments)]
    fn walk(
        level: usize,
        bid: &Bid,
        order: &[usize],
        window: (Slot, Slot),
        capacities: &[f64],
        assignment: &mut Vec<Vec<Slot>>,
        usage: &mut Vec<f64>,
        seen: &mut BTreeSet<Vec<(usize, Vec<u64>)>>,
        out: &mut Vec<Candidate>,
    ) {
        let resources = capacities.len();
        if level == order.len() {
            let mut pattern = Vec::new();
            let mut key = Vec::new();
            for t in window.0..=window.1 {
                let cell = &usage[t as usize * resources..(t as usize + 1) * resources];
                if cell.iter().any(|&u| u != 0.0) {
                    pattern.push((t as usize, cell.to_vec()));
                    key.push((t as usize, cell.iter().map(|u| u.to_bits()).collect()));
                }
            }
            if seen.insert(key) {
                out.push(Candidate {
                    usage: pattern,
                    schedule: Schedule::new(assignment.clone()),
                });
            }
            return;
        }
        let m = order[level];
        let container = bid.graph.container(m);
        let start = bid
            .graph
            .predecessors(m)
            .filter_map(|p| assignment[p].last().copied())
            .map(|t| t + 1)
            .max()
            .unwrap_or(window.0)
            .max(window.0);
        let mut chosen = Vec::new();
        choose(
            start,
            window.1,
            container.slots as usize,
            &mut chosen,
            &mut |slots: &[Slot]| {
                let fits_all = slots.iter().all(|&t| {
                    (0..resources).all(|r| {
                        fits(
                            usage[t as usize * resources + r] + container.demand[r],
                            capacities[r],
                        )
                    })
                });
                if !fits_all {
                    return;
                }
                for &t in slots {
                    for r in 0..resources {
                        usage[t as usize * resources + r] += container.demand[r];
                    }
                }
                assignment[m] = slots.to_vec();
                walk(
                    level + 1,
                    bid,
                    order,
                    window,
                    capacities,
                    assignment,
                    usage,
                    seen,
                    out,
                );
                assignment[m].clear();
                for &t in slots {
                    for r in 0..resources {
                        usage[t as usize * resources + r] -= container.demand[r];
                    }
                }
            },
        );
    }

    fn choose(
        lo: Slot,
        hi: Slot,
        need: usize,
        chosen: &mut Vec<Slot>,
        visit: &mut dyn FnMut(&[Slot]),
    ) {
        if need == 0 {
            visit(chosen);
            return;
        }
        let mut t = lo;
        while t + need as Slot <= hi + 1 {
            chosen.push(t);
            choose(t + 1, hi, need - 1, chosen, visit);
            chosen.pop();
            t += 1;
        }
    }

    if lo <= hi {
        walk(
            0,
            bid,
            &order,
            (lo, hi),
            capacities,
            &mut assignment,
            &mut usage,
            &mut seen,
            &mut out,
        );
    }
    out
}

/// Welfare-maximizing offline allocation: every bid known upfront, each
/// either served under one of its schedules inside `[arrival, deadline]`
/// or not at all.
pub fn exact_opt(
    bids: &[Bid],
    config: &AuctionConfig,
    limits: &OracleLimits,
) -> Result<OptimumReport, OracleError> {
    if bids.len() > limits.max_bids {
        return Err(OracleError::TooLarge(format!(
            "{} bids, limit {}",
            bids.len(),
            limits.max_bids
        )));
    }
    if config.horizon > limits.max_horizon {
        return Err(OracleError::TooLarge(format!(
            "horizon {}, limit {}",
            config.horizon, limits.max_horizon
        )));
    }
    let capacities = config.capacities.as_slice().to_vec();
    let resources = capacities.len();
    let horizon = config.horizon;
    let options: Vec<Vec<Candidate>> = bids
        .iter()
        .map(|bid| {
            if bid
                .graph
                .containers()
                .iter()
                .any(|c| c.demand.len() != resources)
            {
                return Vec::new();
            }
            schedules_of(bid, horizon, &capacities)
        })
        .collect();

    // The optimum is the most valuable subset of bids that can all be served
    // together. Subsets are tried from the most valuable down; a superset of
    // an infeasible subset is skipped without search.
    let n = bids.len();
    let value = |mask: usize| -> f64 {
        (0..n)
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| bids[i].price)
            .sum()
    };
    let mut masks: Vec<usize> = (0..1usize << n).collect();
    masks.sort_by(|&a, &b| value(b).total_cmp(&value(a)).then(a.cmp(&b)));

    let mut packing = Packing {
        options: &options,
        capacities: &capacities,
        used: vec![0.0; (horizon as usize + 1) * resources],
        nodes: 0,
        max_nodes: limits.max_nodes,
    };
    let mut infeasible: Vec<usize> = Vec::new();
    for mask in masks {
        if infeasible.iter().any(|&bad| bad & !mask == 0) {
            continue;
        }
        let members: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        if !packing.volume_fits(bids, &members, horizon) {
            infeasible.push(mask);
            continue;
        }
        if let Some(picks) = packing.solve(&members)? {
            let mut assignment = vec![None; n];
            for (&i, k) in members.iter().zip(picks) {
                assignment[i] = Some(options[i][k].schedule.clone());
            }
            return Ok(OptimumReport {
                welfare: value(mask),
                assignment,
                nodes: packing.nodes,
            });
        }
        infeasible.push(mask);
    }
    unreachable!("the empty subset is always feasible")
}

/// Joint feasibility search over per-bid footprints.
struct Packing<'a> {
    options: &'a [Vec<Candidate>],
    capacities: &'a [f64],
    used: Vec<f64>,
    nodes: u64,
    max_nodes: u64,
}

impl Packing<'_> {
    fn fits(&self, opt: &Candidate) -> bool {
        let r_count = self.capacities.len();
        opt.usage.iter().all(|(t, u)| {
            (0..r_count).all(|r| fits(self.used[t * r_count + r] + u[r], self.capacities[r]))
        })
    }

    fn shift(&mut self, usage: &[(usize, Vec<f64>)], sign: f64) {
        let r_count = self.capacities.len();
        for (t, u) in usage {
            for (cell, amount) in self.used[t * r_count..(t + 1) * r_count].iter_mut().zip(u) {
                *cell += sign * amount;
            }
        }
    }

    /// Cheap necessary condition: total work per resource within capacity-time.
    fn volume_fits(&self, bids: &[Bid], members: &[usize], horizon: Slot) -> bool {
        (0..self.capacities.len()).all(|r| {
            let work: f64 = members.iter().map(|&i| bids[i].volume(r)).sum();
            fits(work, self.capacities[r] * horizon as f64)
        })
    }

    /// One footprint index per member such that all fit together, if any.
    fn solve(&mut self, members: &[usize]) -> Result<Option<Vec<usize>>, OracleError> {
        // Most constrained bids first.
        let mut order: Vec<usize> = (0..members.len()).collect();
        order.sort_by_key(|&j| (self.options[members[j]].len(), j));
        let sequence: Vec<usize> = order.iter().map(|&j| members[j]).collect();
        let mut picks = vec![0; members.len()];
        if !self.place(&sequence, 0, &mut picks)? {
            return Ok(None);
        }
        let mut out = vec![0; members.len()];
        for (pos, &j) in order.iter().enumerate() {
            out[j] = picks[pos];
        }
        Ok(Some(out))
    }

    fn place(
        &mut self,
        sequence: &[usize],
        level: usize,
        picks: &mut [usize],
    ) -> Result<bool, OracleError> {
        self.nodes += 1;
        if self.nodes > self.max_nodes {
            return Err(OracleError::BudgetExceeded(self.max_nodes));
        }
        if level == sequence.len() {
            return Ok(true);
        }
        // Forward check: every later bid must still have room somewhere.
        if sequence[level + 1..]
            .iter()
            .any(|&i| !self.options[i].iter().any(|o| self.fits(o)))
        {
            return Ok(false);
        }
        let i = sequence[level];
        for k in 0..self.options[i].len() {
            if !self.fits(&self.options[i][k]) {
                continue;
            }
            self.shift(&self.options[i][k].usage, 1.0);
            picks[level] = k;
            let done = self.place(sequence, level + 1, picks);
            self.shift(&self.options[i][k].usage, -1.0);
            if done? {
                return Ok(true);
            }
        }
        Ok(false)
    }
}

/// `OPT / auction welfare`, with `0 / 0 = 1` and infinity when the auction
/// serves nobody but the optimum serves someone.
pub fn ratio(opt_welfare: f64, auction_welfare: f64) -> f64 {
    if auction_welfare > 0.0 {
        opt_welfare / auction_welfare
    } else if opt_welfare > 0.0 {
        f64::INFINITY
    } else {
        1.0
    }
}

/// Optimum over batch-auction welfare on one instance.
pub fn empirical_ratio(
    bids: &[Bid],
    config: &AuctionConfig,
    limits: &OracleLimits,
) -> Result<f64, OracleError> {
    let opt = exact_opt(bids, config, limits)?;
    let auction = run_batch_auction(bids, config)?;
    Ok(ratio(opt.welfare, auction.social_welfare))
}

/// Dual objective recomputed from scratch: winners' utilities plus
/// capacity-weighted final prices.
pub fn dual_objective(outcome: &AuctionOutcome) -> f64 {
    outcome.outcomes.iter().map(|o| o.utility).sum::<f64>()
        + outcome.state.capacity_weighted_prices()
}

/// Smallest fraction, over resources, of capacity-time sold to winners.
pub fn occupation_ratio(bids: &[Bid], outcome: &AuctionOutcome) -> f64 {
    let state = &outcome.state;
    let horizon = f64::from(state.horizon());
    (0..state.resources())
        .map(|r| {
            let sold: f64 = bids
                .iter()
                .zip(&outcome.outcomes)
                .filter(|(_, o)| o.accepted)
                .map(|(b, _)| b.volume(r))
                .sum();
            sold / (state.capacity(r) * horizon)
        })
        .fold(f64::INFINITY, f64::min)
        .clamp(0.0, 1.0)
}

/// Theoretical competitive ratio `k / (k - 1) * alpha` for per-resource
/// density bounds and occupation `sigma`, with `alpha = max_r ln(k D_r /
/// (sigma F_r))` and `k` the matching root.
///
/// Infinite when `sigma` is zero or the spread collapses.
pub fn ratio_bound(max_density: &[f64], min_density: &[f64], sigma: f64) -> f64 {
    if !(sigma > 0.0) {
        return f64::INFINITY;
    }
    let spread = max_density
        .iter()
        .zip(min_density)
        .map(|(d, f)| d / (sigma * f))
        .fold(0.0, f64::max);
    let Ok(k) = solve_k(spread) else {
        return f64::INFINITY;
    };
    let alpha = max_density
        .iter()
        .zip(min_density)
        .map(|(d, f)| (k * d / (sigma * f)).ln())
        .fold(f64::NEG_INFINITY, f64::max);
    k / (k - 1.0) * alpha
}

/// Empirical ratios of many small instances, evaluated in parallel and
/// returned in input order.
pub fn ratio_batch(
    instances: &[(Vec<Bid>, AuctionConfig)],
    limits: &OracleLimits,
) -> Vec<Result<f64, OracleError>> {
    instances
        .par_iter()
        .map(|(bids, config)| empirical_ratio(bids, config, limits))
        .collect()
}
