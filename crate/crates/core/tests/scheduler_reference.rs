mod common;

use batch_auction::model::{Bid, Market, Slot};
use batch_auction::scheduler::{check_schedule, schedule_chain, schedule_general, SearchLimits};
use common::{brute_min_cost, priced, random_graph, random_market};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_bid(rng: &mut ChaCha8Rng, horizon: Slot, m: usize, max_slots: u32, chain: bool) -> Bid {
    let arrival = rng.random_range(1..=horizon);
    Bid {
        id: 1,
        graph: random_graph(rng, m, max_slots, 2, chain),
        arrival,
        deadline: rng.random_range(arrival..=horizon),
        price: if rng.random_bool(0.5) {
            1e6
        } else {
            rng.random_range(1.0..20.0)
        },
    }
}

fn compare(bid: &Bid, market: &impl Market, theta: u32, found: Option<f64>, label: &str) {
    let lo = bid.admission_time(theta).max(1);
    let hi = bid.deadline.min(market.horizon());
    let best = if lo <= hi {
        brute_min_cost(bid, (lo, hi), market)
    } else {
        None
    };
    let expected = best.filter(|&c| c < bid.price);
    match (expected, found) {
        (None, None) => {}
        (Some(e), Some(f)) => assert!(
            (e - f).abs() <= 1e-9 * e.max(1.0),
            "{label}: brute {e} vs {f} for {bid:?}"
        ),
        _ => panic!("{label}: brute {expected:?} vs {found:?} for {bid:?}"),
    }
}

#[test]
fn chain_program_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let horizon = rng.random_range(2..=10);
        let m = rng.random_range(1..=3);
        let bid = random_bid(&mut rng, horizon, m, 3, true);
        let market = random_market(&mut rng, horizon, 2, 2.0);
        let theta = rng.random_range(1..=3);
        let result = schedule_chain(&bid, &market, theta).unwrap();
        if let Some(s) = &result.schedule {
            assert!(check_schedule(s, &bid, &market, theta).is_empty());
            let recomputed = priced(&bid, s.assignment(), &market);
            assert!((recomputed - result.cost).abs() < 1e-9);
        }
        compare(
            &bid,
            &market,
            theta,
            result.schedule.as_ref().map(|_| result.cost),
            "chain",
        );
    }
}

#[test]
fn dag_search_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let limits = SearchLimits::default();
    for _ in 0..100 {
        let horizon = rng.random_range(2..=7);
        let m = rng.random_range(1..=4);
        let chain = rng.random_bool(0.2);
        let bid = random_bid(&mut rng, horizon, m, 2, chain);
        let market = random_market(&mut rng, horizon, 2, 2.0);
        let theta = rng.random_range(1..=2);
        let result = schedule_general(&bid, &market, theta, &limits).unwrap();
        if let Some(s) = &result.schedule {
            assert!(check_schedule(s, &bid, &market, theta).is_empty());
        }
        compare(
            &bid,
            &market,
            theta,
            result.schedule.as_ref().map(|_| result.cost),
            "dag",
        );
        if chain {
            let dp = schedule_chain(&bid, &market, theta).unwrap();
            assert_eq!(dp.is_scheduled(), result.is_scheduled());
            assert!((dp.cost - result.cost).abs() < 1e-9);
        }
    }
}
