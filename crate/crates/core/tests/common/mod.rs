//! Slow, obviously-correct reference implementations shared by the
//! integration tests. Nothing here reuses library search code.

#![allow(dead_code)]

use batch_auction::model::{Bid, Container, ContainerGraph, Market, Slot, StaticMarket};
use batch_auction::ResourceVector;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-9;

/// All `k`-subsets of `pool`, ascending.
pub fn subsets(pool: &[Slot], k: usize) -> Vec<Vec<Slot>> {
    fn go(pool: &[Slot], k: usize, start: usize, cur: &mut Vec<Slot>, out: &mut Vec<Vec<Slot>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..pool.len() {
            if pool.len() - i < k - cur.len() {
                break;
            }
            cur.push(pool[i]);
            go(pool, k, i + 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(pool, k, 0, &mut Vec::new(), &mut out);
    out
}

/// Every assignment of slots in `[lo, hi]` to the bid's containers that
/// respects strict precedence and fits on top of `used` (per-slot usage
/// indexed `t - 1`) within `caps`. Calls `visit` on each.
///
/// Containers are placed in index order; each edge is checked as soon as
/// both ends are placed, and capacity after every placement.
pub fn for_each_schedule(
    bid: &Bid,
    (lo, hi): (Slot, Slot),
    caps: &[f64],
    used: &[Vec<f64>],
    mut visit: impl FnMut(&[Vec<Slot>]),
) {
    let pool: Vec<Slot> = (lo..=hi).collect();
    let options: Vec<Vec<Vec<Slot>>> = bid
        .graph
        .containers()
        .iter()
        .map(|c| subsets(&pool, c.slots as usize))
        .collect();
    let mut load = used.to_vec();
    let mut assignment = Vec::with_capacity(options.len());
    place(bid, &options, caps, &mut load, &mut assignment, &mut visit);
}

fn place(
    bid: &Bid,
    options: &[Vec<Vec<Slot>>],
    caps: &[f64],
    load: &mut Vec<Vec<f64>>,
    assignment: &mut Vec<Vec<Slot>>,
    visit: &mut impl FnMut(&[Vec<Slot>]),
) {
    let m = assignment.len();
    if m == options.len() {
        visit(assignment);
        return;
    }
    let demand = bid.graph.container(m).demand.as_slice();
    for slots in &options[m] {
        assignment.push(slots.clone());
        let ordered = bid
            .graph
            .edges()
            .iter()
            .filter(|&&(a, b)| a.max(b) == m)
            .all(|&(a, b)| assignment[a].iter().max() < assignment[b].iter().min());
        if ordered {
            add_one(demand, slots, load, 1.0);
            let fits = slots.iter().all(|&t| {
                load[t as usize - 1]
                    .iter()
                    .zip(caps)
                    .all(|(w, c)| *w <= c + TOL)
            });
            if fits {
                place(bid, options, caps, load, assignment, visit);
            }
            add_one(demand, slots, load, -1.0);
        }
        assignment.pop();
    }
}

fn add_one(demand: &[f64], slots: &[Slot], load: &mut [Vec<f64>], sign: f64) {
    for &t in slots {
        for (r, &h) in demand.iter().enumerate() {
            load[t as usize - 1][r] += sign * h;
        }
    }
}

pub fn respects_precedence(bid: &Bid, assignment: &[Vec<Slot>]) -> bool {
    bid.graph.edges().iter().all(|&(a, b)| {
        let last_a = assignment[a].iter().max().copied().unwrap_or(0);
        let first_b = assignment[b].iter().min().copied().unwrap_or(Slot::MAX);
        last_a < first_b
    })
}

/// Price of `assignment` on `market`.
pub fn priced<M: Market>(bid: &Bid, assignment: &[Vec<Slot>], market: &M) -> f64 {
    let mut cost = 0.0;
    for (m, slots) in assignment.iter().enumerate() {
        let demand = bid.graph.container(m).demand.as_slice();
        for &t in slots {
            for (r, &h) in demand.iter().enumerate() {
                cost += h * market.price(t, r);
            }
        }
    }
    cost
}

/// Cheapest schedule cost in `window` on `market`, or `None` when no
/// feasible schedule exists.
pub fn brute_min_cost<M: Market>(bid: &Bid, window: (Slot, Slot), market: &M) -> Option<f64> {
    let r_count = market.resources();
    let caps: Vec<f64> = (0..r_count).map(|r| market.capacity(r)).collect();
    let used: Vec<Vec<f64>> = (1..=market.horizon())
        .map(|t| (0..r_count).map(|r| market.allocated(t, r)).collect())
        .collect();
    let mut best: Option<f64> = None;
    for_each_schedule(bid, window, &caps, &used, |a| {
        let c = priced(bid, a, market);
        if best.is_none_or(|b| c < b) {
            best = Some(c);
        }
    });
    best
}

/// Optimal welfare by enumerating the `x` (serve or not) and `z` (which
/// schedule) variables jointly, one bid at a time, tracking usage.
pub fn brute_opt(bids: &[Bid], horizon: Slot, caps: &[f64]) -> f64 {
    fn go(bids: &[Bid], i: usize, horizon: Slot, caps: &[f64], used: &mut Vec<Vec<f64>>) -> f64 {
        if i == bids.len() {
            return 0.0;
        }
        let mut best = go(bids, i + 1, horizon, caps, used);
        let bid = &bids[i];
        let hi = bid.deadline.min(horizon);
        if bid.arrival.max(1) > hi {
            return best;
        }
        let mut schedules = Vec::new();
        for_each_schedule(bid, (bid.arrival.max(1), hi), caps, used, |a| {
            schedules.push(a.to_vec())
        });
        for a in schedules {
            add(bid, &a, used, 1.0);
            best = best.max(bid.price + go(bids, i + 1, horizon, caps, used));
            add(bid, &a, used, -1.0);
        }
        best
    }
    let mut used = vec![vec![0.0; caps.len()]; horizon as usize];
    go(bids, 0, horizon, caps, &mut used)
}

fn add(bid: &Bid, assignment: &[Vec<Slot>], used: &mut [Vec<f64>], sign: f64) {
    for (m, slots) in assignment.iter().enumerate() {
        add_one(bid.graph.container(m).demand.as_slice(), slots, used, sign);
    }
}

/// A random graph on `m` nodes with forward edges only.
pub fn random_graph(
    rng: &mut ChaCha8Rng,
    m: usize,
    max_slots: u32,
    resources: usize,
    chain: bool,
) -> ContainerGraph {
    let containers = (0..m)
        .map(|_| {
            let demand: Vec<f64> = (0..resources).map(|_| rng.random_range(0.1..1.0)).collect();
            Container::new(rng.random_range(1..=max_slots), ResourceVector::new(demand))
        })
        .collect();
    if chain {
        return ContainerGraph::chain(containers);
    }
    let mut edges = Vec::new();
    for a in 0..m {
        for b in a + 1..m {
            if rng.random_bool(0.4) {
                edges.push((a, b));
            }
        }
    }
    ContainerGraph::new(containers, edges)
}

/// A static market with random prices and partial pre-allocation.
pub fn random_market(
    rng: &mut ChaCha8Rng,
    horizon: Slot,
    resources: usize,
    capacity: f64,
) -> StaticMarket {
    let prices: Vec<f64> = vec![1.0; resources];
    let mut market = StaticMarket::uniform(
        horizon,
        ResourceVector::uniform(resources, capacity),
        &prices,
    );
    for t in 1..=horizon {
        for r in 0..resources {
            market.set_price(t, r, rng.random_range(0.2..3.0));
            if rng.random_bool(0.3) {
                market.set_allocated(t, r, rng.random_range(0.0..capacity));
            }
        }
    }
    market
}
