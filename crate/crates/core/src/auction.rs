//! The batch posted-price auction and the first-come-first-served baseline.
//!
//! Bids are grouped by arrival into windows of `theta` slots. At the end of
//! each window the batch is resolved greedily: every pending bid is scheduled
//! at the current prices, the one with the highest value per unit of priced
//! resource is served and pays its posted cost, prices rise, and the rest are
//! scheduled again.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::model::{
    fits, validate_bid, Bid, Market, MarketState, ModelError, ResourceVector, Schedule, Slot,
    Violation,
};
use crate::pricing::{PriceParams, PricingConfig, PricingError};
use crate::scheduler::{check_schedule, schedule_bid, Footprint, SchedulingResult, SearchLimits};

#[derive(Debug, Error)]
pub enum AuctionError {
    #[error("batch interval must be at least 1 slot")]
    ZeroTheta,
    #[error(transparent)]
    Pricing(#[from] PricingError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("schedule for bid {bid} exceeds capacity of resource {resource} at slot {slot}")]
    CapacityExceeded {
        bid: u64,
        slot: Slot,
        resource: usize,
    },
}

/// Everything an auction run needs besides the bids.
#[derive(Clone, Debug, PartialEq)]
pub struct AuctionConfig {
    pub horizon: Slot,
    pub capacities: ResourceVector,
    pub theta: u32,
    pub pricing: PricingConfig,
    pub limits: SearchLimits,
    /// Keep a full event log in the outcome.
    pub record_events: bool,
}

impl AuctionConfig {
    pub fn new(
        horizon: Slot,
        capacities: ResourceVector,
        theta: u32,
        pricing: PricingConfig,
    ) -> Self {
        Self {
            horizon,
            capacities,
            theta,
            pricing,
            limits: SearchLimits::default(),
            record_events: false,
        }
    }

    pub fn resources(&self) -> usize {
        self.capacities.len()
    }
}

/// Why a bid was turned away.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum RejectReason {
    /// Its window closed before its batch was decided.
    Lost,
    /// Malformed bid.
    Invalid(String),
    /// No feasible schedule costs less than the bid.
    NoProfitableSchedule,
    /// The exact search gave up.
    SchedulerError(String),
}

/// Primal and dual objective gains of one acceptance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Increment {
    pub bid: u64,
    /// `u + sum kappa_old * dw`, which equals `B`.
    pub primal: f64,
    /// `u + sum C * dkappa`.
    pub dual: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BidOutcome {
    pub id: u64,
    pub accepted: bool,
    pub schedule: Option<Schedule>,
    pub payment: f64,
    pub utility: f64,
    /// 1-based batch index.
    pub batch: u32,
    /// Position in the global sequence of acceptances.
    pub acceptance_index: Option<usize>,
    pub reason: Option<RejectReason>,
}

impl BidOutcome {
    fn rejected(id: u64, batch: u32, reason: RejectReason) -> Self {
        Self {
            id,
            accepted: false,
            schedule: None,
            payment: 0.0,
            utility: 0.0,
            batch,
            acceptance_index: None,
            reason: Some(reason),
        }
    }
}

/// One line of the event log.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Scheduled {
        batch: u32,
        bid: u64,
        cost: Option<f64>,
        utility: f64,
    },
    Accepted {
        batch: u32,
        bid: u64,
        payment: f64,
        utility: f64,
        slots: Vec<Vec<Slot>>,
    },
    Rejected {
        batch: u32,
        bid: u64,
        reason: RejectReason,
    },
    PriceUpdate {
        bid: u64,
        slot: Slot,
        resource: usize,
        allocated: f64,
        price: f64,
    },
}

/// The result of a whole run.
#[derive(Clone, Debug)]
pub struct AuctionOutcome {
    /// One per input bid, in input order.
    pub outcomes: Vec<BidOutcome>,
    /// Sum of `B` over winners.
    pub social_welfare: f64,
    /// Sum of payments.
    pub revenue: f64,
    /// Dual objective before any bid was processed.
    pub initial_dual: f64,
    /// Maintained incrementally as `initial_dual + sum dual gains`.
    pub dual_objective: f64,
    pub increments: Vec<Increment>,
    pub events: Vec<Event>,
    pub state: MarketState,
    pub params: PriceParams,
}

impl AuctionOutcome {
    pub fn winners(&self) -> usize {
        self.outcomes.iter().filter(|o| o.accepted).count()
    }

    pub fn lost(&self) -> usize {
        self.outcomes
            .iter()
            .filter(|o| o.reason == Some(RejectReason::Lost))
            .count()
    }

    /// Winners over all bids; zero for an empty run.
    pub fn winner_fraction(&self) -> f64 {
        if self.outcomes.is_empty() {
            0.0
        } else {
            self.winners() as f64 / self.outcomes.len() as f64
        }
    }

    /// Event log as JSON lines.
    pub fn events_jsonl(&self) -> String {
        self.events
            .iter()
            .map(|e| serde_json::to_string(e).expect("events serialize") + "\n")
            .collect()
    }
}

/// Mutable run state threaded through every batch.
struct Ledger {
    outcomes: Vec<Option<BidOutcome>>,
    increments: Vec<Increment>,
    events: Vec<Event>,
    record: bool,
}

impl Ledger {
    fn new(bids: usize, record: bool) -> Self {
        Self {
            outcomes: vec![None; bids],
            increments: Vec::new(),
            events: Vec::new(),
            record,
        }
    }

    fn log(&mut self, event: impl FnOnce() -> Event) {
        if self.record {
            self.events.push(event());
        }
    }

    fn reject(&mut self, slot: usize, bid: &Bid, batch: u32, reason: RejectReason) {
        self.log(|| Event::Rejected {
            batch,
            bid: bid.id,
            reason: reason.clone(),
        });
        self.outcomes[slot] = Some(BidOutcome::rejected(bid.id, batch, reason));
    }
}

/// Bids that can never run, or whose window closes before `admission`.
fn screen(bid: &Bid, config: &AuctionConfig, admission: Slot) -> Option<RejectReason> {
    let report = validate_bid(bid, config.horizon, config.resources());
    let malformed: Vec<String> = report
        .violations
        .iter()
        .filter(|v| !matches!(v, Violation::NeverFeasible { .. }))
        .map(ToString::to_string)
        .collect();
    if !malformed.is_empty() {
        return Some(RejectReason::Invalid(malformed.join("; ")));
    }
    let required = bid.graph.longest_path_slots().ok()?;
    let last = bid.deadline.min(config.horizon);
    (admission + required > last + 1).then_some(RejectReason::Lost)
}

fn fresh_state(bids: &[Bid], config: &AuctionConfig) -> Result<MarketState, AuctionError> {
    if config.theta == 0 {
        return Err(AuctionError::ZeroTheta);
    }
    let params = config.pricing.resolve(bids, config.resources())?;
    Ok(MarketState::new(
        config.horizon,
        config.capacities.clone(),
        params,
    )?)
}

fn finish(bids: &[Bid], state: MarketState, ledger: Ledger, initial_dual: f64) -> AuctionOutcome {
    let outcomes: Vec<BidOutcome> = ledger
        .outcomes
        .into_iter()
        .map(|o| o.expect("every bid resolved"))
        .collect();
    let social_welfare = bids
        .iter()
        .zip(&outcomes)
        .filter(|(_, o)| o.accepted)
        .map(|(b, _)| b.price)
        .sum();
    let revenue = outcomes.iter().map(|o| o.payment).sum();
    let dual_objective = initial_dual + ledger.increments.iter().map(|i| i.dual).sum::<f64>();
    let params = state.params().clone();
    AuctionOutcome {
        outcomes,
        social_welfare,
        revenue,
        initial_dual,
        dual_objective,
        increments: ledger.increments,
        events: ledger.events,
        state,
        params,
    }
}

/// Runs the batch auction over `bids`.
pub fn run_batch_auction(
    bids: &[Bid],
    config: &AuctionConfig,
) -> Result<AuctionOutcome, AuctionError> {
    let mut state = fresh_state(bids, config)?;
    let initial_dual = state.capacity_weighted_prices();
    let mut ledger = Ledger::new(bids.len(), config.record_events);

    // Batch q collects arrivals in ((q-1) theta, q theta].
    let mut order: Vec<usize> = (0..bids.len()).collect();
    order.sort_by_key(|&i| (bids[i].arrival.div_ceil(config.theta), bids[i].id, i));
    let mut start = 0;
    while start < order.len() {
        let batch = bids[order[start]].arrival.div_ceil(config.theta);
        let end = start
            + order[start..]
                .iter()
                .take_while(|&&i| bids[i].arrival.div_ceil(config.theta) == batch)
                .count();
        let admission = batch * config.theta;
        let mut pending = Vec::new();
        for &i in &order[start..end] {
            match screen(&bids[i], config, admission) {
                Some(reason) => ledger.reject(i, &bids[i], batch, reason),
                None => pending.push(i),
            }
        }
        resolve_batch(bids, &pending, batch, config, &mut state, &mut ledger)?;
        start = end;
    }
    Ok(finish(bids, state, ledger, initial_dual))
}

/// Decides one batch of bids sharing an admission slot against `state`,
/// returning one outcome per bid in input order.
///
/// Acceptance indices in the returned outcomes count from zero within this
/// batch.
pub fn process_batch(
    batch: &[Bid],
    state: &mut MarketState,
    theta: u32,
    limits: &SearchLimits,
) -> Result<Vec<BidOutcome>, AuctionError> {
    if theta == 0 {
        return Err(AuctionError::ZeroTheta);
    }
    let config = AuctionConfig {
        horizon: state.horizon(),
        capacities: state.capacities().clone(),
        theta,
        pricing: PricingConfig::default(),
        limits: *limits,
        record_events: false,
    };
    let index = batch
        .iter()
        .map(|b| b.arrival.div_ceil(theta))
        .max()
        .unwrap_or(0);
    let mut ledger = Ledger::new(batch.len(), false);
    let pending: Vec<usize> = (0..batch.len()).collect();
    resolve_batch(batch, &pending, index, &config, state, &mut ledger)?;
    Ok(ledger
        .outcomes
        .into_iter()
        .map(|o| o.expect("resolved"))
        .collect())
}

/// `B / cost` with a zero cost ranking first.
fn unit_value(bid: &Bid, result: &SchedulingResult) -> f64 {
    if result.cost > 0.0 {
        bid.price / result.cost
    } else {
        f64::INFINITY
    }
}

fn resolve_batch(
    bids: &[Bid],
    pending: &[usize],
    batch: u32,
    config: &AuctionConfig,
    state: &mut MarketState,
    ledger: &mut Ledger,
) -> Result<(), AuctionError> {
    let mut pending = pending.to_vec();
    // Results stay valid until a commit touches the bid's window.
    let mut cached: Vec<Option<SchedulingResult>> = vec![None; pending.len()];
    while !pending.is_empty() {
        let frozen: &MarketState = state;
        let fresh: Vec<(usize, Result<SchedulingResult, String>)> = pending
            .par_iter()
            .zip(cached.par_iter())
            .enumerate()
            .filter(|(_, (_, c))| c.is_none())
            .map(|(k, (&i, _))| {
                let r = schedule_bid(&bids[i], frozen, config.theta, &config.limits)
                    .map_err(|e| e.to_string());
                (k, r)
            })
            .collect();
        let mut failed = Vec::new();
        for (k, result) in fresh {
            let bid = &bids[pending[k]];
            match result {
                Ok(r) => {
                    ledger.log(|| Event::Scheduled {
                        batch,
                        bid: bid.id,
                        cost: r.schedule.as_ref().map(|_| r.cost),
                        utility: r.utility,
                    });
                    cached[k] = Some(r);
                }
                Err(e) => failed.push((k, e)),
            }
        }
        let mut drop = vec![false; pending.len()];
        for (k, e) in failed {
            ledger.reject(
                pending[k],
                &bids[pending[k]],
                batch,
                RejectReason::SchedulerError(e),
            );
            drop[k] = true;
        }
        for k in 0..pending.len() {
            if !drop[k]
                && !cached[k]
                    .as_ref()
                    .is_some_and(SchedulingResult::is_scheduled)
            {
                let i = pending[k];
                ledger.reject(i, &bids[i], batch, RejectReason::NoProfitableSchedule);
                drop[k] = true;
            }
        }
        retain_by(&mut pending, &drop);
        retain_by(&mut cached, &drop);

        // Highest unit value wins; ties go to the lower id.
        let Some(best) = (0..pending.len()).reduce(|a, b| {
            let (ba, bb) = (&bids[pending[a]], &bids[pending[b]]);
            let (va, vb) = (
                unit_value(ba, cached[a].as_ref().unwrap()),
                unit_value(bb, cached[b].as_ref().unwrap()),
            );
            if vb > va || (vb == va && bb.id < ba.id) {
                b
            } else {
                a
            }
        }) else {
            break;
        };
        let i = pending.remove(best);
        let result = cached.remove(best).expect("scheduled");
        let bid = &bids[i];
        let schedule = result.schedule.expect("scheduled");
        if result.utility > 0.0 {
            let dual_before = state.capacity_weighted_prices();
            let touched = apply_schedule(&schedule, bid, state)?;
            let dual_gain = result.utility + (state.capacity_weighted_prices() - dual_before);
            ledger.increments.push(Increment {
                bid: bid.id,
                primal: result.utility + result.cost,
                dual: dual_gain,
            });
            ledger.log(|| Event::Accepted {
                batch,
                bid: bid.id,
                payment: result.cost,
                utility: result.utility,
                slots: schedule.assignment().to_vec(),
            });
            if ledger.record {
                for &t in touched.keys() {
                    for r in 0..state.resources() {
                        ledger.events.push(Event::PriceUpdate {
                            bid: bid.id,
                            slot: t,
                            resource: r,
                            allocated: state.allocated(t, r),
                            price: state.price(t, r),
                        });
                    }
                }
            }
            ledger.outcomes[i] = Some(BidOutcome {
                id: bid.id,
                accepted: true,
                schedule: Some(schedule),
                payment: result.cost,
                utility: result.utility,
                batch,
                acceptance_index: Some(ledger.increments.len() - 1),
                reason: None,
            });
            invalidate(bids, &pending, &mut cached, &touched, config.theta);
        } else {
            ledger.reject(i, bid, batch, RejectReason::NoProfitableSchedule);
        }
    }
    Ok(())
}

fn retain_by<T>(items: &mut Vec<T>, drop: &[bool]) {
    let mut k = 0;
    items.retain(|_| {
        let keep = !drop[k];
        k += 1;
        keep
    });
}

/// Forgets cached results of bids whose window contains a re-priced slot.
fn invalidate(
    bids: &[Bid],
    pending: &[usize],
    cached: &mut [Option<SchedulingResult>],
    touched: &Footprint,
    theta: u32,
) {
    for (k, &i) in pending.iter().enumerate() {
        let bid = &bids[i];
        let lo = bid.admission_time(theta);
        if touched.range(lo..=bid.deadline).next().is_some() {
            cached[k] = None;
        }
    }
}

/// Commits `schedule` for `bid`: adds its footprint to the allocation and
/// re-prices every touched slot. Returns the footprint.
///
/// Nothing is changed if any slot would exceed capacity.
pub fn apply_schedule(
    schedule: &Schedule,
    bid: &Bid,
    state: &mut MarketState,
) -> Result<Footprint, AuctionError> {
    let footprint = schedule.footprint(bid);
    for (&t, usage) in &footprint {
        if t == 0 || t > state.horizon() {
            return Err(ModelError::SlotOutOfRange {
                slot: t,
                horizon: state.horizon(),
            }
            .into());
        }
        for r in 0..state.resources() {
            if !fits(state.allocated(t, r) + usage[r], state.capacity(r)) {
                return Err(AuctionError::CapacityExceeded {
                    bid: bid.id,
                    slot: t,
                    resource: r,
                });
            }
        }
    }
    for (&t, usage) in &footprint {
        state.allocate(t, usage)?;
    }
    Ok(footprint)
}

/// First-come-first-served baseline: each bid is scheduled once, in arrival
/// order (ties by id), as soon as it arrives.
pub fn run_fcfs_baseline(
    bids: &[Bid],
    config: &AuctionConfig,
) -> Result<AuctionOutcome, AuctionError> {
    let config = AuctionConfig {
        theta: 1,
        ..config.clone()
    };
    let mut state = fresh_state(bids, &config)?;
    let initial_dual = state.capacity_weighted_prices();
    let mut ledger = Ledger::new(bids.len(), config.record_events);
    let mut order: Vec<usize> = (0..bids.len()).collect();
    order.sort_by_key(|&i| (bids[i].arrival, bids[i].id, i));
    for i in order {
        let bid = &bids[i];
        if let Some(reason) = screen(bid, &config, bid.arrival) {
            ledger.reject(i, bid, bid.arrival, reason);
            continue;
        }
        resolve_batch(bids, &[i], bid.arrival, &config, &mut state, &mut ledger)?;
    }
    Ok(finish(bids, state, ledger, initial_dual))
}

/// Every way the final allocation breaks a constraint: per-winner window,
/// precedence and slot counts, plus the global capacity of every slot.
pub fn audit(bids: &[Bid], outcome: &AuctionOutcome, theta: u32) -> Vec<String> {
    let state = &outcome.state;
    let empty = crate::model::StaticMarket::uniform(
        state.horizon(),
        state.capacities().clone(),
        &vec![0.0; state.resources()],
    );
    let mut problems = Vec::new();
    let mut total: Footprint = Footprint::new();
    for (bid, o) in bids.iter().zip(&outcome.outcomes) {
        let Some(schedule) = o.schedule.as_ref().filter(|_| o.accepted) else {
            continue;
        };
        for v in check_schedule(schedule, bid, &empty, theta) {
            problems.push(format!("bid {}: {v}", bid.id));
        }
        for (t, usage) in schedule.footprint(bid) {
            total
                .entry(t)
                .or_insert_with(|| ResourceVector::zeros(state.resources()))
                .add_assign(&usage);
        }
    }
    for (t, usage) in &total {
        for r in 0..state.resources() {
            if !fits(usage[r], state.capacity(r)) {
                problems.push(format!(
                    "slot {t}: resource {r} sold {} of {}",
                    usage[r],
                    state.capacity(r)
                ));
            }
            if (usage[r] - state.allocated(*t, r)).abs() > 1e-9 * state.capacity(r).max(1.0) {
                problems.push(format!("slot {t}: resource {r} allocation out of sync"));
            }
        }
    }
    problems
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Container, ContainerGraph};
    use crate::pricing::PriceBounds;

    fn one_resource(
        horizon: Slot,
        capacity: f64,
        max: f64,
        min: f64,
        sigma: f64,
        k: Option<f64>,
    ) -> AuctionConfig {
        AuctionConfig::new(
            horizon,
            ResourceVector::new(vec![capacity]),
            1,
            PricingConfig {
                sigma,
                k,
                bounds: PriceBounds::Fixed {
                    max: vec![max],
                    min: vec![min],
                },
            },
        )
    }

    fn single(id: u64, slots: u32, demand: f64, window: (Slot, Slot), price: f64) -> Bid {
        Bid {
            id,
            graph: ContainerGraph::chain(vec![Container::new(slots, vec![demand])]),
            arrival: window.0,
            deadline: window.1,
            price,
        }
    }

    #[test]
    fn no_bids_leaves_floor_prices() {
        let cfg = one_resource(5, 10.0, 4.0, 1.0, 1.0, Some(2.0));
        let out = run_batch_auction(&[], &cfg).unwrap();
        assert_eq!(out.social_welfare, 0.0);
        for t in 1..=5 {
            assert_eq!(out.state.price(t, 0), 0.5);
        }
        assert_eq!(out.dual_objective, 25.0);
    }

    #[test]
    fn lone_bid_pays_floor_cost() {
        let cfg = one_resource(5, 10.0, 4.0, 1.0, 1.0, Some(2.0));
        let bid = single(1, 2, 5.0, (1, 5), 100.0);
        let out = run_batch_auction(std::slice::from_ref(&bid), &cfg).unwrap();
        let o = &out.outcomes[0];
        assert!(o.accepted);
        assert_eq!(o.payment, 2.0 * 5.0 * 0.5);
        assert_eq!(o.utility, 95.0);
        assert_eq!(out.social_welfare, 100.0);
        let fcfs = run_fcfs_baseline(&[bid], &cfg).unwrap();
        assert_eq!(fcfs.outcomes, out.outcomes);
    }

    #[test]
    fn higher_unit_value_wins_the_shared_slot() {
        // One slot, room for one of two identical-demand bids.
        let cfg = one_resource(1, 10.0, 4.0, 1.0, 1.0, Some(2.0));
        let a = single(1, 1, 8.0, (1, 1), 10.0);
        let b = single(2, 1, 8.0, (1, 1), 12.0);
        let out = run_batch_auction(&[a, b], &cfg).unwrap();
        assert!(!out.outcomes[0].accepted);
        assert!(out.outcomes[1].accepted);
        assert_eq!(out.outcomes[1].payment, 4.0);
        // Unit value is price over cost, not price alone.
        let small = single(3, 1, 2.0, (1, 1), 5.0);
        let big = single(4, 1, 9.0, (1, 1), 12.0);
        let out = run_batch_auction(&[big, small], &cfg).unwrap();
        assert!(out.outcomes[1].accepted);
        assert!(!out.outcomes[0].accepted);
    }

    #[test]
    fn twins_split_by_id() {
        let cfg = one_resource(1, 10.0, 4.0, 1.0, 1.0, Some(2.0));
        let out = run_batch_auction(
            &[
                single(7, 1, 8.0, (1, 1), 10.0),
                single(3, 1, 8.0, (1, 1), 10.0),
            ],
            &cfg,
        )
        .unwrap();
        assert!(!out.outcomes[0].accepted);
        assert!(out.outcomes[1].accepted);
    }

    #[test]
    fn losing_bid_changes_nothing() {
        let cfg = one_resource(3, 10.0, 4.0, 1.0, 1.0, Some(2.0));
        let out = run_batch_auction(&[single(1, 2, 5.0, (1, 3), 4.0)], &cfg).unwrap();
        assert!(!out.outcomes[0].accepted);
        assert_eq!(out.outcomes[0].payment, 0.0);
        assert_eq!(
            out.outcomes[0].reason,
            Some(RejectReason::NoProfitableSchedule)
        );
        assert!(out.state.allocated_at(1).iter().all(|&w| w == 0.0));
    }

    #[test]
    fn commit_updates_allocation_and_price() {
        let cfg = one_resource(3, 10.0, 4.0, 1.0, 1.0, Some(2.0));
        let mut state = fresh_state(&[], &cfg).unwrap();
        let bid = single(1, 1, 5.0, (1, 3), 10.0);
        apply_schedule(&Schedule::new(vec![vec![2]]), &bid, &mut state).unwrap();
        assert_eq!(state.allocated(2, 0), 5.0);
        assert!((state.price(2, 0) - 0.5 * 8f64.sqrt()).abs() < 1e-12);
        assert_eq!(state.price(1, 0), 0.5);
        let before = state.clone();
        let overflow = single(2, 1, 6.0, (1, 3), 10.0);
        assert!(matches!(
            apply_schedule(&Schedule::new(vec![vec![2]]), &overflow, &mut state),
            Err(AuctionError::CapacityExceeded { slot: 2, .. })
        ));
        assert_eq!(state, before);
    }

    #[test]
    fn sequential_commits_equal_one_combined_commit() {
        let cfg = one_resource(2, 10.0, 4.0, 1.0, 1.0, Some(2.0));
        let mut split = fresh_state(&[], &cfg).unwrap();
        apply_schedule(
            &Schedule::new(vec![vec![1]]),
            &single(1, 1, 2.0, (1, 2), 1.0),
            &mut split,
        )
        .unwrap();
        apply_schedule(
            &Schedule::new(vec![vec![1]]),
            &single(2, 1, 3.0, (1, 2), 1.0),
            &mut split,
        )
        .unwrap();
        let mut joint = fresh_state(&[], &cfg).unwrap();
        apply_schedule(
            &Schedule::new(vec![vec![1]]),
            &single(3, 1, 5.0, (1, 2), 1.0),
            &mut joint,
        )
        .unwrap();
        assert_eq!(split.allocated(1, 0), joint.allocated(1, 0));
        assert!((split.price(1, 0) - joint.price(1, 0)).abs() < 1e-15);
    }

    #[test]
    fn saturating_commit_pushes_later_bids_elsewhere() {
        // Slot 1 cheaper for nobody; both bids want one slot in [2, 3]
        // with demand 10 = C. The first winner fills its slot at price D.
        let cfg = AuctionConfig {
            theta: 2,
            ..one_resource(3, 10.0, 4.0, 1.0, 1.0, Some(2.0))
        };
        let a = single(1, 1, 10.0, (1, 3), 50.0);
        let b = single(2, 1, 10.0, (2, 3), 40.0);
        let out = run_batch_auction(&[a, b], &cfg).unwrap();
        let sa = out.outcomes[0].schedule.as_ref().unwrap();
        let sb = out.outcomes[1].schedule.as_ref().unwrap();
        assert_eq!(sa.slots(0), &[2]);
        assert_eq!(sb.slots(0), &[3]);
        assert_eq!(out.outcomes[1].payment, 5.0);
        assert_eq!(out.state.price(2, 0), 4.0);
    }

    #[test]
    fn fcfs_loses_to_batching_when_a_cheap_bid_arrives_first() {
        // The early bid grabs slots 1-2 under FCFS, blocking the valuable
        // late bid that can only run in slot 2.
        let cfg = AuctionConfig {
            theta: 2,
            ..one_resource(3, 10.0, 4.0, 1.0, 1.0, Some(2.0))
        };
        let early = single(1, 2, 10.0, (1, 3), 12.0);
        let late = single(2, 1, 10.0, (2, 2), 30.0);
        let batch = run_batch_auction(&[early.clone(), late.clone()], &cfg).unwrap();
        let fcfs = run_fcfs_baseline(&[early, late], &cfg).unwrap();
        assert_eq!(batch.social_welfare, 30.0);
        assert_eq!(fcfs.social_welfare, 12.0);
    }

    #[test]
    fn late_batch_loses_tight_bids() {
        let cfg = AuctionConfig {
            theta: 4,
            ..one_resource(8, 10.0, 4.0, 1.0, 1.0, Some(2.0))
        };
        let out = run_batch_auction(&[single(1, 2, 1.0, (1, 3), 50.0)], &cfg).unwrap();
        assert_eq!(out.outcomes[0].reason, Some(RejectReason::Lost));
        assert_eq!(out.lost(), 1);
    }

    #[test]
    fn dual_bookkeeping_and_events() {
        let mut cfg = one_resource(4, 10.0, 4.0, 1.0, 1.0, Some(2.0));
        cfg.record_events = true;
        let bids = [
            single(1, 2, 3.0, (1, 4), 40.0),
            single(2, 1, 4.0, (1, 2), 30.0),
        ];
        let out = run_batch_auction(&bids, &cfg).unwrap();
        let recomputed: f64 = out.outcomes.iter().map(|o| o.utility).sum::<f64>()
            + out.state.capacity_weighted_prices();
        assert!((recomputed - out.dual_objective).abs() < 1e-9);
        assert!(out.social_welfare <= out.dual_objective);
        for inc in &out.increments {
            let b = bids.iter().find(|b| b.id == inc.bid).unwrap();
            assert!((inc.primal - b.price).abs() < 1e-12);
        }
        let log = out.events_jsonl();
        assert!(log.lines().any(|l| l.contains("\"event\":\"accepted\"")));
        assert!(log
            .lines()
            .any(|l| l.contains("\"event\":\"price_update\"")));
        assert!(audit(&bids, &out, 1).is_empty());
    }

    #[test]
    fn process_batch_resolves_everyone() {
        let cfg = one_resource(2, 10.0, 4.0, 1.0, 1.0, Some(2.0));
        let mut state = fresh_state(&[], &cfg).unwrap();
        let batch = [
            single(1, 1, 8.0, (1, 1), 10.0),
            single(2, 1, 8.0, (1, 1), 2.0),
        ];
        let out = process_batch(&batch, &mut state, 1, &SearchLimits::default()).unwrap();
        assert!(out[0].accepted);
        assert!(!out[1].accepted);
        assert_eq!(state.allocated(1, 0), 8.0);
    }

    #[test]
    fn zero_theta_is_rejected() {
        let cfg = AuctionConfig {
            theta: 0,
            ..one_resource(2, 10.0, 4.0, 1.0, 1.0, Some(2.0))
        };
        assert!(matches!(
            run_batch_auction(&[], &cfg),
            Err(AuctionError::ZeroTheta)
        ));
    }

    #[test]
    fn estimate_mode_needs_bids() {
        let cfg = AuctionConfig {
            pricing: PricingConfig::default(),
            ..one_resource(2, 10.0, 4.0, 1.0, 1.0, Some(2.0))
        };
        assert!(matches!(
            run_batch_auction(&[], &cfg),
            Err(AuctionError::Pricing(PricingError::EmptyPopulation))
        ));
    }
}
