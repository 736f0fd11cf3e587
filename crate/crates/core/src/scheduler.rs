//! Minimum-cost container scheduling against posted prices.
//!
//! Two exact solvers share one contract: given a bid, a market and a batch
//! length, find the cheapest schedule that respects the bid's window, strict
//! precedence along every edge, per-container slot counts and the residual
//! capacity of every slot (including what the job's own containers already
//! use there).
//!
//! * [`schedule_chain`] handles service chains with a dynamic program.
//! * [`schedule_general`] handles arbitrary DAGs with a depth-first
//!   branch-and-bound search, exponential in the number of containers.
//!
//! A schedule is only reported when it leaves the bidder positive utility.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::model::{fits, Bid, Container, ContainerGraph, Market, ResourceVector, Schedule, Slot};

/// Per-slot resource usage, keyed by slot.
pub type Footprint = BTreeMap<Slot, ResourceVector>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScheduleError {
    #[error("container graph is not a chain; route to schedule_general")]
    NotAChain,
    #[error("graph too large for exact search: {containers} containers, limit {limit}")]
    GraphTooLarge { containers: usize, limit: usize },
    #[error("exact search exceeded its budget of {0} nodes")]
    SearchBudgetExceeded(u64),
    #[error("container graph is not a DAG")]
    NotADag,
}

/// Guards on the exponential general-topology search.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SearchLimits {
    /// Largest container count accepted by [`schedule_general`].
    pub max_containers: usize,
    /// Search nodes explored before giving up.
    pub max_nodes: u64,
}

impl Default for SearchLimits {
    fn default() -> Self {
        Self {
            max_containers: 8,
            max_nodes: 5_000_000,
        }
    }
}

/// Outcome of scheduling one bid at fixed prices.
#[derive(Clone, Debug, PartialEq)]
pub struct SchedulingResult {
    /// `max(0, B - cost)`.
    pub utility: f64,
    /// Present iff a feasible schedule with positive utility exists.
    pub schedule: Option<Schedule>,
    /// Posted cost of `schedule`; zero without one.
    pub cost: f64,
    pub footprint: Footprint,
    /// Search nodes explored (zero for the chain dynamic program).
    pub nodes: u64,
}

impl SchedulingResult {
    fn none(nodes: u64) -> Self {
        Self {
            utility: 0.0,
            schedule: None,
            cost: 0.0,
            footprint: Footprint::new(),
            nodes,
        }
    }

    fn found(bid: &Bid, schedule: Schedule, cost: f64, nodes: u64) -> Self {
        let footprint = schedule.footprint(bid);
        Self {
            utility: (bid.price - cost).max(0.0),
            schedule: Some(schedule),
            cost,
            footprint,
            nodes,
        }
    }

    pub fn is_scheduled(&self) -> bool {
        self.schedule.is_some()
    }
}

/// Slots in `[lo, hi]` where `container` still fits, with the cost
/// `c(t) = sum_r h_r kappa_r(t)` of running it there for one slot.
///
/// `extra` is usage already claimed at a slot by the same job.
pub fn feasible_slots<M: Market + ?Sized>(
    container: &Container,
    window: (Slot, Slot),
    market: &M,
    extra: Option<&Footprint>,
) -> Vec<(Slot, f64)> {
    let (lo, hi) = window;
    let hi = hi.min(market.horizon());
    (lo.max(1)..=hi)
        .filter(|&t| market.admits(t, &container.demand, extra.and_then(|e| e.get(&t))))
        .map(|t| (t, market.unit_cost(t, &container.demand)))
        .collect()
}

/// The usable window `[admission, min(deadline, T)]`, if non-empty.
fn bid_window<M: Market + ?Sized>(bid: &Bid, market: &M, theta: u32) -> Option<(Slot, Slot)> {
    let lo = bid.admission_time(theta).max(1);
    let hi = bid.deadline.min(market.horizon());
    (lo <= hi).then_some((lo, hi))
}

/// Utility-maximizing schedule of a service chain.
pub fn schedule_chain<M: Market + ?Sized>(
    bid: &Bid,
    market: &M,
    theta: u32,
) -> Result<SchedulingResult, ScheduleError> {
    let order = bid.graph.chain_order().ok_or(ScheduleError::NotAChain)?;
    let Some(window) = bid_window(bid, market, theta) else {
        return Ok(SchedulingResult::none(0));
    };
    Ok(
        match cheapest_chain(bid, &order, market, window, bid.price) {
            Some((schedule, cost)) => SchedulingResult::found(bid, schedule, cost, 0),
            None => SchedulingResult::none(0),
        },
    )
}

/// Cheapest chain schedule in `window` with cost below `budget`.
///
/// Under strict precedence no two containers of a chain share a slot, so a
/// schedule is a strictly increasing run of `K = sum_m N_m` slots whose
/// first `N_1` go to the first container, the next `N_2` to the second, and
/// so on. `best[p][i]` is the cheapest way to fill the first `p` positions
/// using the first `i` slots of the window; this is the window-pair
/// recurrence over `(t_s, t_e)` collapsed to one slot at a time.
pub fn cheapest_chain<M: Market + ?Sized>(
    bid: &Bid,
    order: &[usize],
    market: &M,
    window: (Slot, Slot),
    budget: f64,
) -> Option<(Schedule, f64)> {
    let (lo, hi) = window;
    let width = (hi + 1).saturating_sub(lo) as usize;
    let owners: Vec<usize> = order
        .iter()
        .flat_map(|&m| std::iter::repeat_n(m, bid.graph.container(m).slots as usize))
        .collect();
    let positions = owners.len();
    if positions > width {
        return None;
    }
    // Unit cost of each container at each window slot; None where it does not fit.
    let unit: BTreeMap<usize, Vec<Option<f64>>> = order
        .iter()
        .map(|&m| {
            let demand = &bid.graph.container(m).demand;
            let costs = (lo..=hi)
                .map(|t| {
                    market
                        .admits(t, demand, None)
                        .then(|| market.unit_cost(t, demand))
                })
                .collect();
            (m, costs)
        })
        .collect();

    let stride = width + 1;
    let mut best = vec![f64::INFINITY; (positions + 1) * stride];
    best[..stride].fill(0.0);
    for p in 1..=positions {
        let costs = &unit[&owners[p - 1]];
        // Position p needs at least p slots.
        for i in p..=width {
            let skip = best[p * stride + i - 1];
            let take = match costs[i - 1] {
                Some(c) => best[(p - 1) * stride + i - 1] + c,
                None => f64::INFINITY,
            };
            best[p * stride + i] = skip.min(take);
        }
    }
    let total = best[positions * stride + width];
    if !(total < budget) {
        return None;
    }

    // Walk back, preferring to leave the current slot unused on ties so that
    // earlier slots win.
    let mut assignment = vec![Vec::new(); bid.graph.len()];
    let (mut p, mut i) = (positions, width);
    while p > 0 {
        if best[p * stride + i - 1] == best[p * stride + i] {
            i -= 1;
        } else {
            assignment[owners[p - 1]].push(lo + (i - 1) as Slot);
            p -= 1;
            i -= 1;
        }
    }
    Some((Schedule::new(assignment), total))
}

/// Utility-maximizing schedule of an arbitrary container DAG by exact
/// depth-first search.
pub fn schedule_general<M: Market + ?Sized>(
    bid: &Bid,
    market: &M,
    theta: u32,
    limits: &SearchLimits,
) -> Result<SchedulingResult, ScheduleError> {
    if bid.graph.len() > limits.max_containers {
        return Err(ScheduleError::GraphTooLarge {
            containers: bid.graph.len(),
            limit: limits.max_containers,
        });
    }
    let Some(window) = bid_window(bid, market, theta) else {
        return Ok(SchedulingResult::none(0));
    };
    let (found, nodes) = cheapest_general(bid, market, window, bid.price, limits.max_nodes)?;
    Ok(match found {
        Some((schedule, cost)) => SchedulingResult::found(bid, schedule, cost, nodes),
        None => SchedulingResult::none(nodes),
    })
}

/// Routes chains to the dynamic program and everything else to the search.
pub fn schedule_bid<M: Market + ?Sized>(
    bid: &Bid,
    market: &M,
    theta: u32,
    limits: &SearchLimits,
) -> Result<SchedulingResult, ScheduleError> {
    if bid.graph.is_chain() {
        schedule_chain(bid, market, theta)
    } else {
        schedule_general(bid, market, theta, limits)
    }
}

/// Cheapest schedule of any DAG in `window` with cost below `budget`, plus
/// the number of search nodes used.
pub fn cheapest_general<M: Market + ?Sized>(
    bid: &Bid,
    market: &M,
    window: (Slot, Slot),
    budget: f64,
    max_nodes: u64,
) -> Result<(Option<(Schedule, f64)>, u64), ScheduleError> {
    let mut search = Search::new(bid, market, window, budget, max_nodes)?;
    if search.feasible_windows() {
        search.descend(0, 0.0)?;
    }
    let found = search
        .best
        .take()
        .map(|(assignment, cost)| (Schedule::new(assignment), cost));
    Ok((found, search.nodes))
}

struct Search<'a> {
    bid: &'a Bid,
    order: Vec<usize>,
    preds: Vec<Vec<usize>>,
    lo: Vec<Slot>,
    hi: Vec<Slot>,
    /// `floor_cost[m][s - base]`: cheapest `N_m` slots in `[s, hi_m]` at
    /// market capacity, ignoring the job's own usage.
    floor_cost: Vec<Vec<f64>>,
    /// `unit[m][t - base]`: cost of running container `m` at slot `t`.
    unit: Vec<Vec<f64>>,
    demand: Vec<Vec<f64>>,
    base: Slot,
    resources: usize,
    capacity: Vec<f64>,
    /// Market allocation, `(T + 1) x R`, indexed by slot.
    allocated: Vec<f64>,
    /// Same-job usage, same layout.
    extra: Vec<f64>,
    /// `parallel[a][b]`: neither container must precede the other, so they
    /// may share a slot.
    parallel: Vec<Vec<bool>>,
    placed: Vec<Vec<Slot>>,
    last_slot: Vec<Option<Slot>>,
    bound: f64,
    best: Option<(Vec<Vec<Slot>>, f64)>,
    nodes: u64,
    max_nodes: u64,
}

impl<'a> Search<'a> {
    fn new<M: Market + ?Sized>(
        bid: &'a Bid,
        market: &M,
        window: (Slot, Slot),
        budget: f64,
        max_nodes: u64,
    ) -> Result<Self, ScheduleError> {
        let graph = &bid.graph;
        let order = graph
            .topological_order()
            .map_err(|_| ScheduleError::NotADag)?;
        let slack = graph.path_slack().map_err(|_| ScheduleError::NotADag)?;
        let n = graph.len();
        let (base, end) = window;
        let lo: Vec<Slot> = (0..n).map(|m| base + slack.before[m]).collect();
        let hi: Vec<Slot> = (0..n).map(|m| end.saturating_sub(slack.after[m])).collect();
        let floor_cost = (0..n)
            .map(|m| cheapest_suffix_costs(graph.container(m), market, base, lo[m], hi[m]))
            .collect();
        let unit = graph
            .containers()
            .iter()
            .map(|c| {
                (base..=end)
                    .map(|t| market.unit_cost(t, &c.demand))
                    .collect()
            })
            .collect();
        let resources = market.resources();
        let horizon = market.horizon();
        let mut allocated = vec![0.0; (horizon as usize + 1) * resources];
        for t in base..=end.min(horizon) {
            for r in 0..resources {
                allocated[t as usize * resources + r] = market.allocated(t, r);
            }
        }
        let parallel = parallel_pairs(graph, &order);
        Ok(Self {
            bid,
            order,
            preds: (0..n).map(|m| graph.predecessors(m).collect()).collect(),
            lo,
            hi,
            floor_cost,
            unit,
            demand: graph
                .containers()
                .iter()
                .map(|c| c.demand.as_slice().to_vec())
                .collect(),
            base,
            resources,
            capacity: (0..resources).map(|r| market.capacity(r)).collect(),
            allocated,
            extra: vec![0.0; (horizon as usize + 1) * resources],
            parallel,
            placed: vec![Vec::new(); n],
            last_slot: vec![None; n],
            bound: budget,
            best: None,
            nodes: 0,
            max_nodes,
        })
    }

    fn feasible_windows(&self) -> bool {
        (0..self.order.len()).all(|m| {
            let need = self.bid.graph.container(m).slots;
            self.lo[m] + need <= self.hi[m] + 1
        })
    }

    fn floor(&self, m: usize, start: Slot) -> f64 {
        if start > self.hi[m] {
            return f64::INFINITY;
        }
        let start = start.max(self.lo[m]);
        self.floor_cost[m][(start - self.base) as usize]
    }

    /// Lower bound on the cost of containers `order[level..]`, optionally
    /// assuming container `q` ends at `last`.
    fn remaining_bound(&self, level: usize, assumed: Option<(usize, Slot)>) -> f64 {
        let graph = &self.bid.graph;
        let mut earliest: Vec<Option<Slot>> = vec![None; self.order.len()];
        let mut total = 0.0;
        for &m in &self.order[level..] {
            let start = self.preds[m]
                .iter()
                .map(|&p| match (assumed, self.last_slot[p]) {
                    (Some((q, last)), _) if q == p => last + 1,
                    (_, Some(last)) => last + 1,
                    _ => earliest[p].unwrap_or(self.lo[p]) + graph.container(p).slots,
                })
                .max()
                .unwrap_or(0)
                .max(self.lo[m]);
            earliest[m] = Some(start);
            total += self.floor(m, start);
            if total.is_infinite() {
                break;
            }
        }
        total
    }

    /// Whether `amount` fits at `t` on top of the market and the job's own
    /// usage.
    fn fits_at(&self, t: Slot, amount: &[f64]) -> bool {
        let i = t as usize * self.resources;
        (0..self.resources).all(|r| {
            fits(
                self.allocated[i + r] + self.extra[i + r] + amount[r],
                self.capacity[r],
            )
        })
    }

    fn descend(&mut self, level: usize, partial: f64) -> Result<(), ScheduleError> {
        self.nodes += 1;
        if self.nodes > self.max_nodes {
            return Err(ScheduleError::SearchBudgetExceeded(self.max_nodes));
        }
        if level == self.order.len() {
            if partial < self.bound {
                self.bound = partial;
                self.best = Some((self.placed.clone(), partial));
            }
            return Ok(());
        }
        let m = self.order[level];
        let need = self.bid.graph.container(m).slots as usize;
        let lo = self.preds[m]
            .iter()
            .filter_map(|&p| self.last_slot[p])
            .map(|t| t + 1)
            .max()
            .unwrap_or(0)
            .max(self.lo[m]);
        let hi = self.hi[m];
        let siblings: Vec<usize> = self.order[level + 1..]
            .iter()
            .copied()
            .filter(|&q| self.parallel[m][q])
            .collect();
        // (slot, cost, neutral): a neutral slot can host this container
        // together with every later parallel sibling that could still use
        // it, so taking it never blocks the rest of the search.
        let demand = &self.demand[m];
        let mut shared = vec![0.0; self.resources];
        let mut candidates: Vec<(Slot, f64, bool)> = Vec::new();
        for t in lo..=hi {
            if !self.fits_at(t, demand) {
                continue;
            }
            shared.copy_from_slice(demand);
            for &q in &siblings {
                if self.fits_at(t, &self.demand[q]) {
                    for (s, h) in shared.iter_mut().zip(&self.demand[q]) {
                        *s += h;
                    }
                }
            }
            let neutral = self.fits_at(t, &shared);
            candidates.push((t, self.unit[m][(t - self.base) as usize], neutral));
        }
        if candidates.len() < need {
            return Ok(());
        }
        if need == 0 {
            return self.place(level, m, Vec::new(), partial);
        }
        // Each candidate as the container's last slot, with the cheapest
        // conceivable completion before it; most promising first.
        let mut cheapest: Vec<f64> = Vec::with_capacity(need);
        let mut options: Vec<(f64, usize)> = Vec::new();
        for (idx, &(_, cost, _)) in candidates.iter().enumerate() {
            if cheapest.len() == need - 1 {
                options.push((cost + cheapest.iter().sum::<f64>(), idx));
            }
            if need > 1 {
                let at = cheapest.partition_point(|&x| x <= cost);
                cheapest.insert(at, cost);
                cheapest.truncate(need - 1);
            }
        }
        options.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for (estimate, idx) in options {
            let (last, cost, _) = candidates[idx];
            let tail = self.remaining_bound(level + 1, Some((m, last)));
            if partial + estimate + tail >= self.bound {
                continue;
            }
            // Among neutral slots before the last only the cheapest matter;
            // critical ones are branched on explicitly.
            let mut neutral: Vec<(f64, Slot)> = Vec::new();
            let mut critical: Vec<(f64, Slot)> = Vec::new();
            for &(t, c, n) in &candidates[..idx] {
                if n {
                    neutral.push((c, t));
                } else {
                    critical.push((c, t));
                }
            }
            let by_cost =
                |a: &(f64, Slot), b: &(f64, Slot)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            neutral.sort_by(by_cost);
            critical.sort_by(by_cost);
            let mut picked = Vec::with_capacity(need - 1);
            self.branch_critical(
                level,
                m,
                (last, cost),
                &neutral,
                &critical,
                0,
                &mut picked,
                partial + cost,
                tail,
            )?;
        }
        Ok(())
    }

    /// Chooses which critical slots join the container, then fills the
    /// remaining need with the cheapest neutral slots.
    #[allow(clippy::too_many_arguments)]
    fn branch_critical(
        &mut self,
        level: usize,
        m: usize,
        last: (Slot, f64),
        neutral: &[(f64, Slot)],
        critical: &[(f64, Slot)],
        start: usize,
        picked: &mut Vec<usize>,
        partial: f64,
        tail: f64,
    ) -> Result<(), ScheduleError> {
        self.nodes += 1;
        if self.nodes > self.max_nodes {
            return Err(ScheduleError::SearchBudgetExceeded(self.max_nodes));
        }
        let need = self.bid.graph.container(m).slots as usize - 1;
        let fill = need - picked.len();
        if fill <= neutral.len() {
            let fill_cost: f64 = neutral[..fill].iter().map(|x| x.0).sum();
            let total = partial + fill_cost;
            if total + tail < self.bound {
                let mut slots: Vec<Slot> = picked
                    .iter()
                    .map(|&i| critical[i].1)
                    .chain(neutral[..fill].iter().map(|x| x.1))
                    .collect();
                slots.push(last.0);
                slots.sort_unstable();
                self.place(level, m, slots, total)?;
            }
        }
        if fill == 0 {
            return Ok(());
        }
        // A critical slot displaces the dearest neutral slot of the fill.
        // Unless it is strictly cheaper, swapping it back is never worse:
        // same last slot, no higher cost, and capacity only freed where it
        // matters.
        let displaced = (fill <= neutral.len()).then(|| neutral[fill - 1].0);
        for i in start..critical.len() {
            if partial + critical[i].0 + tail >= self.bound
                || displaced.is_some_and(|d| critical[i].0 >= d)
            {
                break;
            }
            picked.push(i);
            self.branch_critical(
                level,
                m,
                last,
                neutral,
                critical,
                i + 1,
                picked,
                partial + critical[i].0,
                tail,
            )?;
            picked.pop();
        }
        Ok(())
    }

    fn place(
        &mut self,
        level: usize,
        m: usize,
        slots: Vec<Slot>,
        partial: f64,
    ) -> Result<(), ScheduleError> {
        let last = slots.last().copied();
        let rest = match last {
            Some(t) => self.remaining_bound(level + 1, Some((m, t))),
            None => self.remaining_bound(level + 1, None),
        };
        if partial + rest >= self.bound {
            self.nodes += 1;
            return Ok(());
        }
        let demand = self.demand[m].clone();
        for &t in &slots {
            let i = t as usize * self.resources;
            for (cell, amount) in self.extra[i..i + self.resources].iter_mut().zip(&demand) {
                *cell += amount;
            }
        }
        self.placed[m] = slots;
        self.last_slot[m] = last;
        let outcome = self.descend(level + 1, partial);
        let slots = std::mem::take(&mut self.placed[m]);
        self.last_slot[m] = None;
        for &t in &slots {
            let i = t as usize * self.resources;
            for (cell, amount) in self.extra[i..i + self.resources].iter_mut().zip(&demand) {
                *cell -= amount;
            }
        }
        outcome
    }
}

/// Pairs of containers unordered by the graph's transitive closure.
fn parallel_pairs(graph: &ContainerGraph, order: &[usize]) -> Vec<Vec<bool>> {
    let n = graph.len();
    let mut reach = vec![vec![false; n]; n];
    for &m in order.iter().rev() {
        for q in graph.successors(m) {
            reach[m][q] = true;
            let below = reach[q].clone();
            for (r, b) in below.into_iter().enumerate() {
                reach[m][r] |= b;
            }
        }
    }
    (0..n)
        .map(|a| {
            (0..n)
                .map(|b| a != b && !reach[a][b] && !reach[b][a])
                .collect()
        })
        .collect()
}

/// For each start `s` in `[base, hi]`, the total of the `N` cheapest slots
/// in `[max(s, lo), hi]` where `container` fits at market capacity.
fn cheapest_suffix_costs<M: Market + ?Sized>(
    container: &Container,
    market: &M,
    base: Slot,
    lo: Slot,
    hi: Slot,
) -> Vec<f64> {
    let need = container.slots as usize;
    let len = (hi + 1).saturating_sub(base) as usize;
    let mut out = vec![f64::INFINITY; len.max(1)];
    if hi < lo {
        return out;
    }
    let mut kept: Vec<f64> = Vec::with_capacity(need + 1);
    for t in (lo..=hi).rev() {
        if market.admits(t, &container.demand, None) {
            let c = market.unit_cost(t, &container.demand);
            let at = kept.partition_point(|&x| x <= c);
            kept.insert(at, c);
            kept.truncate(need);
        }
        if kept.len() == need {
            out[(t - base) as usize] = kept.iter().sum();
        }
    }
    let first = out[(lo - base) as usize];
    for v in &mut out[..(lo - base) as usize] {
        *v = first;
    }
    out
}

/// One way a schedule breaks the constraints of its bid.
#[derive(Clone, Debug, PartialEq)]
pub enum ScheduleViolation {
    ContainerCount {
        expected: usize,
        found: usize,
    },
    SlotCount {
        container: usize,
        expected: u32,
        found: usize,
    },
    DuplicateSlot {
        container: usize,
        slot: Slot,
    },
    OutsideWindow {
        container: usize,
        slot: Slot,
        lo: Slot,
        hi: Slot,
    },
    Precedence {
        pred: usize,
        succ: usize,
    },
    Capacity {
        slot: Slot,
        resource: usize,
        used: f64,
        capacity: f64,
    },
}

impl fmt::Display for ScheduleViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::ContainerCount { expected, found } => {
                write!(f, "schedule covers {found} containers, job has {expected}")
            }
            Self::SlotCount {
                container,
                expected,
                found,
            } => write!(
                f,
                "slot count: container {} has {found} slots, needs {expected}",
                container + 1
            ),
            Self::DuplicateSlot { container, slot } => {
                write!(f, "container {} lists slot {slot} twice", container + 1)
            }
            Self::OutsideWindow {
                container,
                slot,
                lo,
                hi,
            } => write!(
                f,
                "window: container {} uses slot {slot} outside [{lo}, {hi}]",
                container + 1
            ),
            Self::Precedence { pred, succ } => write!(
                f,
                "precedence: container {} does not finish before {} starts",
                pred + 1,
                succ + 1
            ),
            Self::Capacity {
                slot,
                resource,
                used,
                capacity,
            } => write!(
                f,
                "capacity: resource {resource} at slot {slot} reaches {used} > {capacity}"
            ),
        }
    }
}

/// Checks window, strict precedence, slot counts and capacity (market
/// allocation plus the schedule's own footprint).
pub fn check_schedule<M: Market + ?Sized>(
    schedule: &Schedule,
    bid: &Bid,
    market: &M,
    theta: u32,
) -> Vec<ScheduleViolation> {
    let graph = &bid.graph;
    let mut out = Vec::new();
    if schedule.containers() != graph.len() {
        out.push(ScheduleViolation::ContainerCount {
            expected: graph.len(),
            found: schedule.containers(),
        });
        return out;
    }
    let lo = bid.admission_time(theta);
    let hi = bid.deadline.min(market.horizon());
    for (m, c) in graph.containers().iter().enumerate() {
        let slots = schedule.slots(m);
        if slots.len() != c.slots as usize {
            out.push(ScheduleViolation::SlotCount {
                container: m,
                expected: c.slots,
                found: slots.len(),
            });
        }
        for pair in slots.windows(2) {
            if pair[0] == pair[1] {
                out.push(ScheduleViolation::DuplicateSlot {
                    container: m,
                    slot: pair[0],
                });
            }
        }
        for &t in slots {
            if t < lo || t > hi {
                out.push(ScheduleViolation::OutsideWindow {
                    container: m,
                    slot: t,
                    lo,
                    hi,
                });
            }
        }
    }
    for &(p, s) in graph.edges() {
        if p >= graph.len() || s >= graph.len() {
            continue;
        }
        if let (Some(&end), Some(&begin)) = (schedule.slots(p).last(), schedule.slots(s).first()) {
            if end >= begin {
                out.push(ScheduleViolation::Precedence { pred: p, succ: s });
            }
        }
    }
    for (t, usage) in schedule.footprint(bid) {
        if t == 0 || t > market.horizon() {
            continue;
        }
        for r in 0..market.resources() {
            let used = market.allocated(t, r) + usage[r];
            if !fits(used, market.capacity(r)) {
                out.push(ScheduleViolation::Capacity {
                    slot: t,
                    resource: r,
                    used,
                    capacity: market.capacity(r),
                });
            }
        }
    }
    out
}
