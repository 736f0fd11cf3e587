//! Domain types shared by every other module: resource vectors, container
//! graphs, bids, schedules and the per-slot resource market.
//!
//! Slots are 1-based (`1..=T`) everywhere. Container indices are 0-based in
//! memory and 1-based in the JSON bid format.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::fmt;
use std::ops::Index;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pricing::{marginal_price, PriceParams, PricingError};

/// A time slot index, `1..=T`.
pub type Slot = u32;

/// Relative slack allowed when comparing an allocation with a capacity.
///
/// Demands are real numbers, so the same footprint summed in a different
/// order may differ in the last bits.
pub const CAPACITY_TOLERANCE: f64 = 1e-9;

/// `used <= capacity` up to [`CAPACITY_TOLERANCE`].
pub fn fits(used: f64, capacity: f64) -> bool {
    used <= capacity + CAPACITY_TOLERANCE * capacity.abs().max(1.0)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("not a DAG: container graph has a directed cycle")]
    NotADag,
    #[error("resource arity mismatch: expected {expected}, found {found}")]
    Arity { expected: usize, found: usize },
    #[error("capacity of resource {0} must be positive")]
    NonPositiveCapacity(usize),
    #[error("horizon must be at least one slot")]
    EmptyHorizon,
    #[error("slot {slot} outside horizon 1..={horizon}")]
    SlotOutOfRange { slot: Slot, horizon: Slot },
    #[error("invalid bid record {id}: {reason}")]
    BadRecord { id: u64, reason: String },
    #[error("malformed bid JSON: {0}")]
    Json(String),
    #[error(transparent)]
    Pricing(#[from] PricingError),
}

/// Amounts of each of the `R` resource types.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ResourceVector(Vec<f64>);

impl ResourceVector {
    pub fn new(amounts: Vec<f64>) -> Self {
        Self(amounts)
    }

    pub fn zeros(resources: usize) -> Self {
        Self(vec![0.0; resources])
    }

    pub fn uniform(resources: usize, amount: f64) -> Self {
        Self(vec![amount; resources])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.0.iter()
    }

    pub fn is_nonnegative(&self) -> bool {
        self.0.iter().all(|&a| a >= 0.0 && a.is_finite())
    }

    pub fn any_positive(&self) -> bool {
        self.0.iter().any(|&a| a > 0.0)
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn add_assign(&mut self, other: &ResourceVector) {
        debug_assert_eq!(self.len(), other.len());
        for (a, b) in self.0.iter_mut().zip(other.iter()) {
            *a += *b;
        }
    }

    /// Inner product with a per-resource price vector.
    pub fn dot(&self, prices: &[f64]) -> f64 {
        self.0.iter().zip(prices).map(|(a, p)| a * p).sum()
    }
}

impl Index<usize> for ResourceVector {
    type Output = f64;

    fn index(&self, r: usize) -> &f64 {
        &self.0[r]
    }
}

impl From<Vec<f64>> for ResourceVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// One sub-task of a job, served by a single container.
#[derive(Clone, Debug, PartialEq)]
pub struct Container {
    /// Number of slots the sub-task must run for. Slots need not be
    /// contiguous: a container may be suspended and resumed.
    pub slots: u32,
    /// Per-slot demand of each resource.
    pub demand: ResourceVector,
}

impl Container {
    pub fn new(slots: u32, demand: impl Into<ResourceVector>) -> Self {
        Self {
            slots,
            demand: demand.into(),
        }
    }
}

/// Dependence graph over a job's containers.
///
/// Construction never fails so that malformed graphs can still be stored and
/// reported by [`validate_bid`]. Edges are kept sorted and de-duplicated.
#[derive(Clone, Debug, PartialEq)]
pub struct ContainerGraph {
    containers: Vec<Container>,
    edges: Vec<(usize, usize)>,
}

impl ContainerGraph {
    pub fn new(containers: Vec<Container>, mut edges: Vec<(usize, usize)>) -> Self {
        edges.sort_unstable();
        edges.dedup();
        Self { containers, edges }
    }

    /// A service chain `0 -> 1 -> ... -> M-1`.
    pub fn chain(containers: Vec<Container>) -> Self {
        let edges = (1..containers.len()).map(|m| (m - 1, m)).collect();
        Self::new(containers, edges)
    }

    pub fn len(&self) -> usize {
        self.containers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.containers.is_empty()
    }

    pub fn containers(&self) -> &[Container] {
        &self.containers
    }

    pub fn container(&self, m: usize) -> &Container {
        &self.containers[m]
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn predecessors(&self, m: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges.iter().filter(move |e| e.1 == m).map(|e| e.0)
    }

    pub fn successors(&self, m: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges.iter().filter(move |e| e.0 == m).map(|e| e.1)
    }

    fn edges_in_range(&self) -> bool {
        let n = self.len();
        self.edges.iter().all(|&(a, b)| a < n && b < n && a != b)
    }

    /// Kahn's algorithm with the smallest ready index taken first.
    pub fn topological_order(&self) -> Result<Vec<usize>, ModelError> {
        let n = self.len();
        if !self.edges_in_range() {
            return Err(ModelError::NotADag);
        }
        let mut indegree = vec![0usize; n];
        let mut adjacency = vec![Vec::new(); n];
        for &(a, b) in &self.edges {
            indegree[b] += 1;
            adjacency[a].push(b);
        }
        let mut ready: BinaryHeap<Reverse<usize>> =
            (0..n).filter(|&m| indegree[m] == 0).map(Reverse).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(Reverse(m)) = ready.pop() {
            order.push(m);
            for &s in &adjacency[m] {
                indegree[s] -= 1;
                if indegree[s] == 0 {
                    ready.push(Reverse(s));
                }
            }
        }
        if order.len() == n {
            Ok(order)
        } else {
            Err(ModelError::NotADag)
        }
    }

    /// True iff the graph is a single directed path through every container.
    pub fn is_chain(&self) -> bool {
        let n = self.len();
        if n <= 1 {
            return self.edges.is_empty();
        }
        if self.edges.len() != n - 1 || !self.edges_in_range() {
            return false;
        }
        let mut indeg = vec![0usize; n];
        let mut outdeg = vec![0usize; n];
        for &(a, b) in &self.edges {
            outdeg[a] += 1;
            indeg[b] += 1;
        }
        if indeg.iter().chain(outdeg.iter()).any(|&d| d > 1) {
            return false;
        }
        // n-1 edges with degrees <= 1 form one path unless a cycle eats some.
        self.topological_order().is_ok()
    }

    /// Containers in chain order, when [`is_chain`](Self::is_chain) holds.
    pub fn chain_order(&self) -> Option<Vec<usize>> {
        if !self.is_chain() {
            return None;
        }
        self.topological_order().ok()
    }

    /// For every container, the largest slot total over directed paths that
    /// end at one of its predecessors (`before`) or start at one of its
    /// successors (`after`).
    pub fn path_slack(&self) -> Result<PathSlack, ModelError> {
        let order = self.topological_order()?;
        let n = self.len();
        let mut before = vec![0u32; n];
        for &m in &order {
            before[m] = self
                .predecessors(m)
                .map(|p| before[p] + self.containers[p].slots)
                .max()
                .unwrap_or(0);
        }
        let mut after = vec![0u32; n];
        for &m in order.iter().rev() {
            after[m] = self
                .successors(m)
                .map(|s| after[s] + self.containers[s].slots)
                .max()
                .unwrap_or(0);
        }
        Ok(PathSlack { before, after })
    }

    /// Slot total along the longest directed path (the job's minimum span).
    pub fn longest_path_slots(&self) -> Result<u32, ModelError> {
        let slack = self.path_slack()?;
        Ok((0..self.len())
            .map(|m| slack.before[m] + self.containers[m].slots + slack.after[m])
            .max()
            .unwrap_or(0))
    }
}

/// See [`ContainerGraph::path_slack`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PathSlack {
    pub before: Vec<u32>,
    pub after: Vec<u32>,
}

/// One user's job bid.
#[derive(Clone, Debug, PartialEq)]
pub struct Bid {
    pub id: u64,
    pub graph: ContainerGraph,
    pub arrival: Slot,
    pub deadline: Slot,
    /// Willingness to pay for finishing the job by `deadline`.
    pub price: f64,
}

impl Bid {
    pub fn admission_time(&self, theta: u32) -> Slot {
        admission_time(self.arrival, theta)
    }

    /// `sum_m N_m * h^r_m`: resource-slot volume of resource `r`.
    pub fn volume(&self, r: usize) -> f64 {
        self.graph
            .containers()
            .iter()
            .map(|c| f64::from(c.slots) * c.demand.as_slice().get(r).copied().unwrap_or(0.0))
            .sum()
    }

    /// Returns a copy bidding `price` instead.
    pub fn with_price(&self, price: f64) -> Bid {
        Bid {
            price,
            ..self.clone()
        }
    }
}

/// End of the batch that collects a bid arriving at `arrival`:
/// `theta * ceil(arrival / theta)`.
pub fn admission_time(arrival: Slot, theta: u32) -> Slot {
    assert!(theta >= 1, "batch length must be at least one slot");
    arrival.div_ceil(theta) * theta
}

/// A single well-formedness problem found by [`validate_bid`].
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    ArrivalOutOfRange {
        arrival: Slot,
        horizon: Slot,
    },
    DeadlineBeforeArrival {
        arrival: Slot,
        deadline: Slot,
    },
    DeadlineBeyondHorizon {
        deadline: Slot,
        horizon: Slot,
    },
    NonPositivePrice(f64),
    NoContainers,
    ZeroSlots {
        container: usize,
    },
    DemandArity {
        container: usize,
        expected: usize,
        found: usize,
    },
    NegativeDemand {
        container: usize,
    },
    ZeroDemand {
        container: usize,
    },
    EdgeOutOfRange {
        pred: usize,
        succ: usize,
    },
    SelfEdge {
        container: usize,
    },
    Cycle,
    NeverFeasible {
        required: u32,
        window: u32,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ArrivalOutOfRange { arrival, horizon } => {
                write!(f, "arrival {arrival} outside 1..={horizon}")
            }
            Violation::DeadlineBeforeArrival { arrival, deadline } => {
                write!(f, "deadline {deadline} before arrival {arrival}")
            }
            Violation::DeadlineBeyondHorizon { deadline, horizon } => {
                write!(f, "deadline {deadline} beyond horizon {horizon}")
            }
            Violation::NonPositivePrice(p) => write!(f, "non-positive price {p}"),
            Violation::NoContainers => write!(f, "job has no containers"),
            Violation::ZeroSlots { container } => {
                write!(f, "container {} requests zero slots", container + 1)
            }
            Violation::DemandArity {
                container,
                expected,
                found,
            } => write!(
                f,
                "container {} has {found} demand entries, expected {expected}",
                container + 1
            ),
            Violation::NegativeDemand { container } => {
                write!(f, "container {} has a negative demand", container + 1)
            }
            Violation::ZeroDemand { container } => {
                write!(f, "container {} demands no resource", container + 1)
            }
            Violation::EdgeOutOfRange { pred, succ } => {
                write!(f, "edge ({}, {}) out of range", pred + 1, succ + 1)
            }
            Violation::SelfEdge { container } => {
                write!(f, "self edge on container {}", container + 1)
            }
            Violation::Cycle => write!(f, "cycle"),
            Violation::NeverFeasible { required, window } => write!(
                f,
                "never feasible: longest path needs {required} slots, window has {window}"
            ),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return write!(f, "ok");
        }
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", parts.join("; "))
    }
}

/// Reports every broken invariant of `bid` against a horizon of `horizon`
/// slots and `resources` resource types.
///
/// The feasibility check uses the bid's own window `[arrival, deadline]`;
/// losses caused by batching delay are accounted for by the auction.
pub fn validate_bid(bid: &Bid, horizon: Slot, resources: usize) -> ValidationReport {
    let mut violations = Vec::new();
    if bid.arrival < 1 || bid.arrival > horizon {
        violations.push(Violation::ArrivalOutOfRange {
            arrival: bid.arrival,
            horizon,
        });
    }
    if bid.deadline < bid.arrival {
        violations.push(Violation::DeadlineBeforeArrival {
            arrival: bid.arrival,
            deadline: bid.deadline,
        });
    }
    if bid.deadline > horizon {
        violations.push(Violation::DeadlineBeyondHorizon {
            deadline: bid.deadline,
            horizon,
        });
    }
    if !(bid.price > 0.0 && bid.price.is_finite()) {
        violations.push(Violation::NonPositivePrice(bid.price));
    }
    if bid.graph.is_empty() {
        violations.push(Violation::NoContainers);
    }
    for (m, c) in bid.graph.containers().iter().enumerate() {
        if c.slots == 0 {
            violations.push(Violation::ZeroSlots { container: m });
        }
        if c.demand.len() != resources {
            violations.push(Violation::DemandArity {
                container: m,
                expected: resources,
                found: c.demand.len(),
            });
        }
        if !c.demand.is_nonnegative() {
            violations.push(Violation::NegativeDemand { container: m });
        } else if !c.demand.any_positive() {
            violations.push(Violation::ZeroDemand { container: m });
        }
    }
    let n = bid.graph.len();
    let mut edges_ok = true;
    for &(a, b) in bid.graph.edges() {
        if a >= n || b >= n {
            violations.push(Violation::EdgeOutOfRange { pred: a, succ: b });
            edges_ok = false;
        } else if a == b {
            violations.push(Violation::SelfEdge { container: a });
            edges_ok = false;
        }
    }
    if edges_ok {
        match bid.graph.longest_path_slots() {
            Err(_) => violations.push(Violation::Cycle),
            Ok(required) => {
                let window = (bid.deadline + 1).saturating_sub(bid.arrival);
                if required > window {
                    violations.push(Violation::NeverFeasible { required, window });
                }
            }
        }
    }
    ValidationReport { violations }
}

/// Slots assigned to each container of one job, each list strictly
/// increasing.
#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Schedule {
    assignment: Vec<Vec<Slot>>,
}

impl Schedule {
    pub fn new(mut assignment: Vec<Vec<Slot>>) -> Self {
        for slots in &mut assignment {
            slots.sort_unstable();
        }
        Self { assignment }
    }

    pub fn containers(&self) -> usize {
        self.assignment.len()
    }

    pub fn slots(&self, m: usize) -> &[Slot] {
        &self.assignment[m]
    }

    pub fn assignment(&self) -> &[Vec<Slot>] {
        &self.assignment
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.iter().all(Vec::is_empty)
    }

    /// Every slot used by at least one container.
    pub fn slots_used(&self) -> BTreeSet<Slot> {
        self.assignment.iter().flatten().copied().collect()
    }

    /// Per-slot resource footprint `f_r(t) = sum over containers at t of h_r`.
    pub fn footprint(&self, bid: &Bid) -> BTreeMap<Slot, ResourceVector> {
        let resources = bid.graph.containers().first().map_or(0, |c| c.demand.len());
        let mut out: BTreeMap<Slot, ResourceVector> = BTreeMap::new();
        for (m, slots) in self.assignment.iter().enumerate() {
            let demand = &bid.graph.container(m).demand;
            for &t in slots {
                out.entry(t)
                    .or_insert_with(|| ResourceVector::zeros(resources))
                    .add_assign(demand);
            }
        }
        out
    }
}

/// Read access to per-slot capacities, allocations and posted prices.
///
/// [`MarketState`] is the live market; [`StaticMarket`] holds arbitrary
/// prices for what-if scheduling.
pub trait Market {
    fn horizon(&self) -> Slot;
    fn resources(&self) -> usize;
    fn capacity(&self, r: usize) -> f64;
    fn allocated(&self, t: Slot, r: usize) -> f64;
    fn price(&self, t: Slot, r: usize) -> f64;

    /// Whether `demand` (plus `extra` already placed by the same job) still
    /// fits at slot `t`.
    fn admits(&self, t: Slot, demand: &ResourceVector, extra: Option<&ResourceVector>) -> bool {
        (0..self.resources()).all(|r| {
            let more = extra.map_or(0.0, |e| e[r]);
            fits(self.allocated(t, r) + more + demand[r], self.capacity(r))
        })
    }

    /// `sum_r h_r * kappa_r(t)`.
    fn unit_cost(&self, t: Slot, demand: &ResourceVector) -> f64 {
        (0..self.resources())
            .map(|r| demand[r] * self.price(t, r))
            .sum()
    }
}

fn check_slot(t: Slot, horizon: Slot) -> Result<usize, ModelError> {
    if t == 0 || t > horizon {
        Err(ModelError::SlotOutOfRange { slot: t, horizon })
    } else {
        Ok((t - 1) as usize)
    }
}

/// The live market: allocations `w_r(t)` and the prices they induce.
#[derive(Clone, Debug, PartialEq)]
pub struct MarketState {
    horizon: Slot,
    capacities: ResourceVector,
    params: PriceParams,
    /// Row-major `T x R`.
    allocated: Vec<f64>,
    prices: Vec<f64>,
}

impl MarketState {
    /// An empty market with every price at its floor.
    pub fn new(
        horizon: Slot,
        capacities: ResourceVector,
        params: PriceParams,
    ) -> Result<Self, ModelError> {
        if horizon == 0 {
            return Err(ModelError::EmptyHorizon);
        }
        let resources = capacities.len();
        if params.resources() != resources {
            return Err(ModelError::Arity {
                expected: resources,
                found: params.resources(),
            });
        }
        if let Some(r) = (0..resources).find(|&r| !(capacities[r] > 0.0)) {
            return Err(ModelError::NonPositiveCapacity(r));
        }
        let floor: Vec<f64> = (0..resources).map(|r| params.floor_price(r)).collect();
        let cells = horizon as usize * resources;
        let prices = (0..cells).map(|i| floor[i % resources]).collect();
        Ok(Self {
            horizon,
            capacities,
            params,
            allocated: vec![0.0; cells],
            prices,
        })
    }

    pub fn capacities(&self) -> &ResourceVector {
        &self.capacities
    }

    pub fn params(&self) -> &PriceParams {
        &self.params
    }

    fn cell(&self, t: Slot, r: usize) -> usize {
        (t as usize - 1) * self.capacities.len() + r
    }

    pub fn allocated_at(&self, t: Slot) -> &[f64] {
        let start = self.cell(t, 0);
        &self.allocated[start..start + self.capacities.len()]
    }

    pub fn prices_at(&self, t: Slot) -> &[f64] {
        let start = self.cell(t, 0);
        &self.prices[start..start + self.capacities.len()]
    }

    /// `sum_t sum_r C_r * kappa_r(t)`.
    pub fn capacity_weighted_prices(&self) -> f64 {
        let r_count = self.capacities.len();
        self.prices
            .iter()
            .enumerate()
            .map(|(i, p)| self.capacities[i % r_count] * p)
            .sum()
    }

    /// Adds `delta` to the allocation at `t` and re-prices that slot.
    ///
    /// Fails without mutating if any resource would exceed its capacity.
    pub fn allocate(&mut self, t: Slot, delta: &ResourceVector) -> Result<(), ModelError> {
        check_slot(t, self.horizon)?;
        let r_count = self.capacities.len();
        if delta.len() != r_count {
            return Err(ModelError::Arity {
                expected: r_count,
                found: delta.len(),
            });
        }
        let base = self.cell(t, 0);
        let mut updated = Vec::with_capacity(r_count);
        for r in 0..r_count {
            let w = self.allocated[base + r] + delta[r];
            let cap = self.capacities[r];
            if !fits(w, cap) {
                return Err(ModelError::Pricing(PricingError::AllocationOutOfRange {
                    allocated: w,
                    capacity: cap,
                }));
            }
            let w = w.min(cap);
            updated.push((w, marginal_price(w, r, &self.params, cap)?));
        }
        for (r, (w, p)) in updated.into_iter().enumerate() {
            self.allocated[base + r] = w;
            self.prices[base + r] = p;
        }
        Ok(())
    }
}

impl Market for MarketState {
    fn horizon(&self) -> Slot {
        self.horizon
    }

    fn resources(&self) -> usize {
        self.capacities.len()
    }

    fn capacity(&self, r: usize) -> f64 {
        self.capacities[r]
    }

    fn allocated(&self, t: Slot, r: usize) -> f64 {
        self.allocated[self.cell(t, r)]
    }

    fn price(&self, t: Slot, r: usize) -> f64 {
        self.prices[self.cell(t, r)]
    }
}

/// A market snapshot with freely chosen prices and allocations.
#[derive(Clone, Debug, PartialEq)]
pub struct StaticMarket {
    horizon: Slot,
    capacities: ResourceVector,
    allocated: Vec<f64>,
    prices: Vec<f64>,
}

impl StaticMarket {
    /// Empty allocation; every slot priced at `prices`.
    pub fn uniform(horizon: Slot, capacities: ResourceVector, prices: &[f64]) -> Self {
        let r_count = capacities.len();
        assert_eq!(prices.len(), r_count);
        let cells = horizon as usize * r_count;
        Self {
            horizon,
            allocated: vec![0.0; cells],
            prices: (0..cells).map(|i| prices[i % r_count]).collect(),
            capacities,
        }
    }

    pub fn set_price(&mut self, t: Slot, r: usize, price: f64) {
        let i = (t as usize - 1) * self.capacities.len() + r;
        self.prices[i] = price;
    }

    pub fn set_allocated(&mut self, t: Slot, r: usize, amount: f64) {
        let i = (t as usize - 1) * self.capacities.len() + r;
        self.allocated[i] = amount;
    }
}

impl From<&MarketState> for StaticMarket {
    fn from(state: &MarketState) -> Self {
        Self {
            horizon: state.horizon,
            capacities: state.capacities.clone(),
            allocated: state.allocated.clone(),
            prices: state.prices.clone(),
        }
    }
}

impl Market for StaticMarket {
    fn horizon(&self) -> Slot {
        self.horizon
    }

    fn resources(&self) -> usize {
        self.capacities.len()
    }

    fn capacity(&self, r: usize) -> f64 {
        self.capacities[r]
    }

    fn allocated(&self, t: Slot, r: usize) -> f64 {
        self.allocated[(t as usize - 1) * self.capacities.len() + r]
    }

    fn price(&self, t: Slot, r: usize) -> f64 {
        self.prices[(t as usize - 1) * self.capacities.len() + r]
    }
}

// JSON bid format: 1-based container indices, as written by users.

#[derive(Serialize, Deserialize)]
struct ContainerRecord {
    slots: u32,
    demand: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct BidRecord {
    id: u64,
    arrival: Slot,
    deadline: Slot,
    price: f64,
    containers: Vec<ContainerRecord>,
    #[serde(default)]
    edges: Vec<[usize; 2]>,
}

impl From<&Bid> for BidRecord {
    fn from(bid: &Bid) -> Self {
        BidRecord {
            id: bid.id,
            arrival: bid.arrival,
            deadline: bid.deadline,
            price: bid.price,
            containers: bid
                .graph
                .containers()
                .iter()
                .map(|c| ContainerRecord {
                    slots: c.slots,
                    demand: c.demand.as_slice().to_vec(),
                })
                .collect(),
            edges: bid
                .graph
                .edges()
                .iter()
                .map(|&(a, b)| [a + 1, b + 1])
                .collect(),
        }
    }
}

impl TryFrom<BidRecord> for Bid {
    type Error = ModelError;

    fn try_from(rec: BidRecord) -> Result<Self, ModelError> {
        let mut edges = Vec::with_capacity(rec.edges.len());
        for [a, b] in rec.edges {
            if a == 0 || b == 0 {
                return Err(ModelError::BadRecord {
                    id: rec.id,
                    reason: "container indices are 1-based".into(),
                });
            }
            edges.push((a - 1, b - 1));
        }
        let containers = rec
            .containers
            .into_iter()
            .map(|c| Container::new(c.slots, c.demand))
            .collect();
        Ok(Bid {
            id: rec.id,
            graph: ContainerGraph::new(containers, edges),
            arrival: rec.arrival,
            deadline: rec.deadline,
            price: rec.price,
        })
    }
}

/// Parses a JSON array of bids.
pub fn bids_from_json(text: &str) -> Result<Vec<Bid>, ModelError> {
    let records: Vec<BidRecord> =
        serde_json::from_str(text).map_err(|e| ModelError::Json(e.to_string()))?;
    records.into_iter().map(Bid::try_from).collect()
}

/// Serializes bids as a pretty-printed JSON array.
pub fn bids_to_json(bids: &[Bid]) -> String {
    let records: Vec<BidRecord> = bids.iter().map(BidRecord::from).collect();
    serde_json::to_string_pretty(&records).expect("bid records always serialize")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(slots: u32) -> Container {
        Container::new(slots, vec![1.0, 0.5, 0.2])
    }

    fn bid(graph: ContainerGraph, arrival: Slot, deadline: Slot) -> Bid {
        Bid {
            id: 1,
            graph,
            arrival,
            deadline,
            price: 5.0,
        }
    }

    #[test]
    fn valid_chain_passes() {
        let b = bid(ContainerGraph::chain(vec![unit(2), unit(3)]), 1, 10);
        let report = validate_bid(&b, 20, 3);
        assert!(report.is_ok(), "{report}");
    }

    #[test]
    fn two_cycle_reported() {
        let g = ContainerGraph::new(vec![unit(1), unit(1)], vec![(0, 1), (1, 0)]);
        let report = validate_bid(&bid(g, 1, 10), 20, 3);
        assert_eq!(report.violations, vec![Violation::Cycle]);
        assert!(report.to_string().contains("cycle"));
    }

    #[test]
    fn oversized_container_never_feasible() {
        let b = bid(ContainerGraph::chain(vec![unit(4)]), 5, 7);
        let report = validate_bid(&b, 20, 3);
        assert_eq!(
            report.violations,
            vec![Violation::NeverFeasible {
                required: 4,
                window: 3
            }]
        );
        assert!(report.to_string().contains("never feasible"));
    }

    #[test]
    fn collects_every_violation() {
        let g = ContainerGraph::new(
            vec![Container::new(0, vec![0.0, 0.0]), unit(1)],
            vec![(0, 0), (0, 5)],
        );
        let b = Bid {
            id: 9,
            graph: g,
            arrival: 0,
            deadline: 30,
            price: -1.0,
        };
        let v = validate_bid(&b, 20, 3).violations;
        assert!(v.contains(&Violation::ArrivalOutOfRange {
            arrival: 0,
            horizon: 20
        }));
        assert!(v.contains(&Violation::DeadlineBeyondHorizon {
            deadline: 30,
            horizon: 20
        }));
        assert!(v.contains(&Violation::NonPositivePrice(-1.0)));
        assert!(v.contains(&Violation::ZeroSlots { container: 0 }));
        assert!(v.contains(&Violation::DemandArity {
            container: 0,
            expected: 3,
            found: 2
        }));
        assert!(v.contains(&Violation::ZeroDemand { container: 0 }));
        assert!(v.contains(&Violation::SelfEdge { container: 0 }));
        assert!(v.contains(&Violation::EdgeOutOfRange { pred: 0, succ: 5 }));
    }

    #[test]
    fn admission_rounds_up_to_batch_end() {
        assert_eq!(admission_time(5, 4), 8);
        assert_eq!(admission_time(8, 4), 8);
        assert_eq!(admission_time(1, 1), 1);
    }

    #[test]
    fn topological_orders() {
        let chain = ContainerGraph::chain(vec![unit(1), unit(1), unit(1)]);
        assert_eq!(chain.topological_order().unwrap(), vec![0, 1, 2]);
        let join = ContainerGraph::new(vec![unit(1), unit(1), unit(1)], vec![(0, 2), (1, 2)]);
        assert_eq!(join.topological_order().unwrap(), vec![0, 1, 2]);
        let free = ContainerGraph::new(vec![unit(1), unit(1), unit(1)], vec![]);
        assert_eq!(free.topological_order().unwrap(), vec![0, 1, 2]);
        let reversed = ContainerGraph::new(vec![unit(1), unit(1), unit(1)], vec![(2, 1), (1, 0)]);
        assert_eq!(reversed.topological_order().unwrap(), vec![2, 1, 0]);
        let cyclic = ContainerGraph::new(vec![unit(1), unit(1)], vec![(0, 1), (1, 0)]);
        assert_eq!(cyclic.topological_order(), Err(ModelError::NotADag));
    }

    #[test]
    fn chain_detection() {
        assert!(ContainerGraph::chain(vec![unit(1), unit(1), unit(1)]).is_chain());
        assert!(ContainerGraph::new(vec![unit(1)], vec![]).is_chain());
        let join = ContainerGraph::new(vec![unit(1), unit(1), unit(1)], vec![(0, 2), (1, 2)]);
        assert!(!join.is_chain());
        let relabeled = ContainerGraph::new(vec![unit(1), unit(1), unit(1)], vec![(2, 0), (0, 1)]);
        assert!(relabeled.is_chain());
        assert_eq!(relabeled.chain_order().unwrap(), vec![2, 0, 1]);
        let split = ContainerGraph::new(vec![unit(1), unit(1), unit(1)], vec![(0, 1)]);
        assert!(!split.is_chain());
    }

    #[test]
    fn path_slack_on_diamond() {
        let g = ContainerGraph::new(
            vec![unit(1), unit(2), unit(3), unit(1)],
            vec![(0, 1), (0, 2), (1, 3), (2, 3)],
        );
        let slack = g.path_slack().unwrap();
        assert_eq!(slack.before, vec![0, 1, 1, 4]);
        assert_eq!(slack.after, vec![4, 1, 1, 0]);
        assert_eq!(g.longest_path_slots().unwrap(), 5);
    }

    #[test]
    fn footprint_sums_overlapping_containers() {
        let g = ContainerGraph::new(
            vec![
                Container::new(1, vec![1.0, 2.0]),
                Container::new(2, vec![0.5, 0.0]),
            ],
            vec![],
        );
        let b = Bid {
            id: 1,
            graph: g,
            arrival: 1,
            deadline: 5,
            price: 1.0,
        };
        let s = Schedule::new(vec![vec![3], vec![4, 3]]);
        let fp = s.footprint(&b);
        assert_eq!(fp[&3].as_slice(), &[1.5, 2.0]);
        assert_eq!(fp[&4].as_slice(), &[0.5, 0.0]);
        assert_eq!(s.slots(1), &[3, 4]);
    }

    #[test]
    fn json_round_trip_uses_one_based_edges() {
        let text = r#"[{"id": 7, "arrival": 2, "deadline": 9, "price": 4.5,
            "containers": [{"slots": 2, "demand": [0.5, 0.1]}, {"slots": 1, "demand": [0.2, 0.3]}],
            "edges": [[1, 2]]}]"#;
        let bids = bids_from_json(text).unwrap();
        assert_eq!(bids[0].graph.edges(), &[(0, 1)]);
        assert_eq!(bids_from_json(&bids_to_json(&bids)).unwrap(), bids);
        let bad = r#"[{"id": 1, "arrival": 1, "deadline": 2, "price": 1,
            "containers": [{"slots": 1, "demand": [1]}], "edges": [[0, 1]]}]"#;
        assert!(matches!(
            bids_from_json(bad),
            Err(ModelError::BadRecord { .. })
        ));
    }
}
