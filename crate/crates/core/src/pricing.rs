//! Marginal resource prices.
//!
//! The price of resource `r` grows exponentially with the fraction of its
//! capacity already sold, from `sigma * F_r / k` on an empty slot up to `D_r`
//! on a full one:
//!
//! ```text
//! kappa_r(w) = (sigma F_r / k) * (k D_r / (sigma F_r)) ^ (w / C_r)
//! ```
//!
//! `D_r` and `F_r` are the largest and smallest valuation per resource-slot
//! unit, `sigma` a lower bound on the fraction of capacity eventually sold,
//! and `k > 1` the fixed point of `k - 1 = max_r ln(k D_r / (sigma F_r))`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{fits, Bid, Market, Schedule, Slot};

/// Absolute residual accepted from [`solve_k`].
pub const K_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PricingError {
    #[error("allocation out of range: {allocated} not in [0, {capacity}]")]
    AllocationOutOfRange { allocated: f64, capacity: f64 },
    #[error("bid {bid} uses no resource {resource}")]
    UnusedResource { bid: u64, resource: usize },
    #[error("resource {0} is used by no bid; configure its bounds or enable the sentinel")]
    ResourceUnusedByPopulation(usize),
    #[error("valuation spread below 1 (varpi = {0}); no price coefficient k > 1 exists")]
    DegenerateSpread(f64),
    #[error("cannot estimate price bounds from an empty bid population")]
    EmptyPopulation,
    #[error("invalid price parameters: {0}")]
    InvalidParams(String),
    #[error("slot {slot} outside horizon 1..={horizon}")]
    SlotOutOfRange { slot: Slot, horizon: Slot },
}

/// Parameters of the marginal price curve, one `(D_r, F_r)` pair per
/// resource plus the shared `sigma` and `k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriceParams {
    max_density: Vec<f64>,
    min_density: Vec<f64>,
    sigma: f64,
    k: f64,
}

impl PriceParams {
    /// Builds parameters with an explicit `k`.
    pub fn new(
        max_density: Vec<f64>,
        min_density: Vec<f64>,
        sigma: f64,
        k: f64,
    ) -> Result<Self, PricingError> {
        check_bounds(&max_density, &min_density, sigma)?;
        if !(k > 1.0 && k.is_finite()) {
            return Err(PricingError::InvalidParams(format!(
                "k = {k} must exceed 1"
            )));
        }
        Ok(Self {
            max_density,
            min_density,
            sigma,
            k,
        })
    }

    /// Builds parameters with `k` from [`solve_k`].
    pub fn with_solved_k(
        max_density: Vec<f64>,
        min_density: Vec<f64>,
        sigma: f64,
    ) -> Result<Self, PricingError> {
        check_bounds(&max_density, &min_density, sigma)?;
        let k = solve_k(varpi(&max_density, &min_density, sigma))?;
        Self::new(max_density, min_density, sigma, k)
    }

    pub fn resources(&self) -> usize {
        self.max_density.len()
    }

    pub fn max_density(&self, r: usize) -> f64 {
        self.max_density[r]
    }

    pub fn min_density(&self, r: usize) -> f64 {
        self.min_density[r]
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    /// `max_r D_r / (sigma F_r)`.
    pub fn varpi(&self) -> f64 {
        varpi(&self.max_density, &self.min_density, self.sigma)
    }

    /// `ln(k D_r / (sigma F_r))`, the growth exponent of resource `r`.
    pub fn alpha_r(&self, r: usize) -> f64 {
        (self.k * self.max_density[r] / (self.sigma * self.min_density[r])).ln()
    }

    /// `max_r ln(k D_r / (sigma F_r))`.
    pub fn alpha(&self) -> f64 {
        (0..self.resources())
            .map(|r| self.alpha_r(r))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `k / (k - 1) * alpha`, the competitive-ratio guarantee.
    pub fn ratio_bound(&self) -> f64 {
        self.k / (self.k - 1.0) * self.alpha()
    }

    /// Price on an empty slot, `sigma F_r / k`.
    pub fn floor_price(&self, r: usize) -> f64 {
        self.sigma * self.min_density[r] / self.k
    }
}

fn check_bounds(max: &[f64], min: &[f64], sigma: f64) -> Result<(), PricingError> {
    if max.len() != min.len() || max.is_empty() {
        return Err(PricingError::InvalidParams(format!(
            "need one (D, F) pair per resource, got {} and {}",
            max.len(),
            min.len()
        )));
    }
    for (r, (&d, &f)) in max.iter().zip(min).enumerate() {
        if !(f > 0.0 && d >= f && d.is_finite()) {
            return Err(PricingError::InvalidParams(format!(
                "resource {r}: need D >= F > 0, got D = {d}, F = {f}"
            )));
        }
    }
    if !(sigma > 0.0 && sigma <= 1.0) {
        return Err(PricingError::InvalidParams(format!(
            "sigma = {sigma} must lie in (0, 1]"
        )));
    }
    Ok(())
}

fn varpi(max: &[f64], min: &[f64], sigma: f64) -> f64 {
    max.iter()
        .zip(min)
        .map(|(d, f)| d / (sigma * f))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Root `k > 1` of `k - 1 = ln(k * varpi)` by bracketed bisection.
pub fn solve_k(varpi: f64) -> Result<f64, PricingError> {
    if !(varpi > 1.0 && varpi.is_finite()) {
        return Err(PricingError::DegenerateSpread(varpi));
    }
    let g = |k: f64| k - 1.0 - (k * varpi).ln();
    // g(1) = -ln(varpi) < 0 and g is increasing on (1, inf).
    let mut lo = 1.0;
    let mut hi = 2.0;
    while g(hi) <= 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let k = if g(lo).abs() <= g(hi).abs() { lo } else { hi };
    debug_assert!(g(k).abs() <= K_TOLERANCE);
    Ok(k)
}

/// `kappa_r(w)` for an allocation `w` of a resource with capacity `capacity`.
pub fn marginal_price(
    allocated: f64,
    r: usize,
    params: &PriceParams,
    capacity: f64,
) -> Result<f64, PricingError> {
    if !(allocated >= 0.0) || !fits(allocated, capacity) {
        return Err(PricingError::AllocationOutOfRange {
            allocated,
            capacity,
        });
    }
    let floor = params.floor_price(r);
    let growth = params.max_density(r) / floor;
    let fraction = (allocated / capacity).min(1.0);
    if fraction == 1.0 {
        return Ok(params.max_density(r));
    }
    Ok(floor * growth.powf(fraction))
}

/// `B_i / sum_m N_im h^r_im`: the bid's value per unit of resource `r`.
pub fn valuation_density(bid: &Bid, r: usize) -> Result<f64, PricingError> {
    let volume = bid.volume(r);
    if volume > 0.0 {
        Ok(bid.price / volume)
    } else {
        Err(PricingError::UnusedResource {
            bid: bid.id,
            resource: r,
        })
    }
}

/// Per-resource `(D, F)`: max and min valuation density over `bids`.
///
/// Bids that do not use a resource are skipped for that resource.
pub fn estimate_bounds(
    bids: &[Bid],
    resources: usize,
) -> Result<(Vec<f64>, Vec<f64>), PricingError> {
    if bids.is_empty() {
        return Err(PricingError::EmptyPopulation);
    }
    let mut max = Vec::with_capacity(resources);
    let mut min = Vec::with_capacity(resources);
    for r in 0..resources {
        let (d, f) = density_range(bids, r)?;
        max.push(d);
        min.push(f);
    }
    Ok((max, min))
}

fn density_range(bids: &[Bid], r: usize) -> Result<(f64, f64), PricingError> {
    bids.iter()
        .filter_map(|b| valuation_density(b, r).ok())
        .fold(None, |acc: Option<(f64, f64)>, d| match acc {
            None => Some((d, d)),
            Some((hi, lo)) => Some((hi.max(d), lo.min(d))),
        })
        .ok_or(PricingError::ResourceUnusedByPopulation(r))
}

/// Cost of `schedule` at the prices currently posted in `market`.
pub fn schedule_cost<M: Market + ?Sized>(
    schedule: &Schedule,
    bid: &Bid,
    market: &M,
) -> Result<f64, PricingError> {
    let horizon = market.horizon();
    let mut cost = 0.0;
    for (m, slots) in schedule.assignment().iter().enumerate() {
        let demand = &bid.graph.container(m).demand;
        for &t in slots {
            if t == 0 || t > horizon {
                return Err(PricingError::SlotOutOfRange { slot: t, horizon });
            }
            cost += market.unit_cost(t, demand);
        }
    }
    Ok(cost)
}

/// Where `D_r` and `F_r` come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum PriceBounds {
    /// Estimated from the bid population being auctioned.
    Estimate {
        /// Give a resource that no bid uses `D = F = 1` instead of failing.
        #[serde(default)]
        unused_sentinel: bool,
    },
    /// Known constants.
    Fixed { max: Vec<f64>, min: Vec<f64> },
}

/// User-facing price configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PricingConfig {
    pub sigma: f64,
    /// Solved from the bounds when absent.
    pub k: Option<f64>,
    pub bounds: PriceBounds,
}

impl Default for PricingConfig {
    fn default() -> Self {
        Self {
            sigma: 0.9,
            k: None,
            bounds: PriceBounds::Estimate {
                unused_sentinel: false,
            },
        }
    }
}

impl PricingConfig {
    /// Builds a config from flat keys, rejecting bounds given in
    /// `estimate` mode and missing bounds in `fixed` mode.
    pub fn from_keys(
        sigma: f64,
        k: Option<f64>,
        mode: &str,
        max: Option<Vec<f64>>,
        min: Option<Vec<f64>>,
    ) -> Result<Self, PricingError> {
        let bounds = match (mode, max, min) {
            ("estimate", None, None) => PriceBounds::Estimate {
                unused_sentinel: false,
            },
            ("estimate", _, _) => {
                return Err(PricingError::InvalidParams(
                    "D/F given while price_bounds_mode = estimate".into(),
                ))
            }
            ("fixed", Some(max), Some(min)) => PriceBounds::Fixed { max, min },
            ("fixed", _, _) => {
                return Err(PricingError::InvalidParams(
                    "price_bounds_mode = fixed needs both D and F".into(),
                ))
            }
            (other, _, _) => {
                return Err(PricingError::InvalidParams(format!(
                    "unknown price_bounds_mode {other:?}"
                )))
            }
        };
        Ok(Self { sigma, k, bounds })
    }

    /// Fixed bounds `D_r = max`, `F_r = min` on every resource.
    pub fn fixed_uniform(resources: usize, min: f64, max: f64, sigma: f64) -> Self {
        Self {
            sigma,
            k: None,
            bounds: PriceBounds::Fixed {
                max: vec![max; resources],
                min: vec![min; resources],
            },
        }
    }

    pub fn resolve(&self, bids: &[Bid], resources: usize) -> Result<PriceParams, PricingError> {
        let (max, min) = match &self.bounds {
            PriceBounds::Fixed { max, min } => {
                if max.len() != resources || min.len() != resources {
                    return Err(PricingError::InvalidParams(format!(
                        "fixed bounds need {resources} entries each"
                    )));
                }
                (max.clone(), min.clone())
            }
            PriceBounds::Estimate { unused_sentinel } => {
                if bids.is_empty() {
                    return Err(PricingError::EmptyPopulation);
                }
                let mut max = Vec::with_capacity(resources);
                let mut min = Vec::with_capacity(resources);
                for r in 0..resources {
                    match density_range(bids, r) {
                        Ok((d, f)) => {
                            max.push(d);
                            min.push(f);
                        }
                        Err(PricingError::ResourceUnusedByPopulation(_)) if *unused_sentinel => {
                            max.push(1.0);
                            min.push(1.0);
                        }
                        Err(e) => return Err(e),
                    }
                }
                (max, min)
            }
        };
        match self.k {
            Some(k) => PriceParams::new(max, min, self.sigma, k),
            None => PriceParams::with_solved_k(max, min, self.sigma),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Container, ContainerGraph, ResourceVector, StaticMarket};
    use proptest::prelude::*;

    // Reference roots of k - 1 = ln(k * varpi) from an independent Newton
    // iteration (k_{n+1} = k_n - g / g'), frozen here.
    const K_AT_E: f64 = 3.1461932206205825;
    const K_AT_2: f64 = 2.6783469900166605;
    const K_AT_10: f64 = 4.889720169867429;

    fn bid_with(price: f64, containers: Vec<Container>) -> Bid {
        Bid {
            id: 1,
            graph: ContainerGraph::new(containers, vec![]),
            arrival: 1,
            deadline: 10,
            price,
        }
    }

    #[test]
    fn solve_k_matches_newton_reference() {
        let k = solve_k(std::f64::consts::E).unwrap();
        assert!((k - K_AT_E).abs() < 1e-9);
        assert!((k - 3.1462).abs() < 1e-3);
        assert!((solve_k(2.0).unwrap() - K_AT_2).abs() < 1e-9);
        assert!((solve_k(10.0).unwrap() - K_AT_10).abs() < 1e-9);
    }

    #[test]
    fn solve_k_rejects_degenerate_spread() {
        assert_eq!(solve_k(1.0), Err(PricingError::DegenerateSpread(1.0)));
        assert!(solve_k(0.5).is_err());
        assert!(solve_k(f64::NAN).is_err());
    }

    #[test]
    fn price_curve_endpoints_and_midpoint() {
        let p = PriceParams::new(vec![4.0], vec![1.0], 1.0, 2.0).unwrap();
        assert_eq!(marginal_price(0.0, 0, &p, 10.0).unwrap(), 0.5);
        assert_eq!(marginal_price(10.0, 0, &p, 10.0).unwrap(), 4.0);
        let mid = marginal_price(5.0, 0, &p, 10.0).unwrap();
        assert!((mid - 0.5 * 8f64.sqrt()).abs() < 1e-12);
        assert!(marginal_price(-0.1, 0, &p, 10.0).is_err());
        assert!(marginal_price(10.5, 0, &p, 10.0).is_err());
    }

    #[test]
    fn density_definition() {
        let b = bid_with(12.0, vec![Container::new(3, vec![2.0])]);
        assert_eq!(valuation_density(&b, 0).unwrap(), 2.0);
        let b = bid_with(
            5.0,
            vec![Container::new(1, vec![1.0]), Container::new(1, vec![4.0])],
        );
        assert_eq!(valuation_density(&b, 0).unwrap(), 1.0);
        let b = bid_with(7.0, vec![Container::new(2, vec![0.0, 1.0])]);
        assert!(matches!(
            valuation_density(&b, 0),
            Err(PricingError::UnusedResource { .. })
        ));
    }

    #[test]
    fn bounds_are_max_and_min_density() {
        let a = bid_with(12.0, vec![Container::new(3, vec![2.0])]);
        let b = bid_with(5.0, vec![Container::new(5, vec![1.0])]);
        assert_eq!(
            estimate_bounds(&[a.clone(), b], 1).unwrap(),
            (vec![2.0], vec![1.0])
        );
        assert_eq!(
            estimate_bounds(std::slice::from_ref(&a), 1).unwrap(),
            (vec![2.0], vec![2.0])
        );
        assert_eq!(estimate_bounds(&[], 1), Err(PricingError::EmptyPopulation));
        assert_eq!(
            estimate_bounds(&[a], 2),
            Err(PricingError::ResourceUnusedByPopulation(1))
        );
    }

    #[test]
    fn config_modes() {
        let a = bid_with(12.0, vec![Container::new(3, vec![2.0, 0.0])]);
        let cfg = PricingConfig::from_keys(0.9, None, "estimate", None, None).unwrap();
        assert!(matches!(
            cfg.resolve(std::slice::from_ref(&a), 2),
            Err(PricingError::ResourceUnusedByPopulation(1))
        ));
        let lenient = PricingConfig {
            bounds: PriceBounds::Estimate {
                unused_sentinel: true,
            },
            ..cfg
        };
        let p = lenient.resolve(&[a], 2).unwrap();
        assert_eq!((p.max_density(1), p.min_density(1)), (1.0, 1.0));
        assert!(PricingConfig::from_keys(0.9, None, "estimate", Some(vec![2.0]), None).is_err());
        assert!(PricingConfig::from_keys(0.9, None, "fixed", Some(vec![2.0]), None).is_err());
        let fixed =
            PricingConfig::from_keys(1.0, None, "fixed", Some(vec![2.0]), Some(vec![1.0])).unwrap();
        let p = fixed.resolve(&[], 1).unwrap();
        assert!((p.k() - K_AT_2).abs() < 1e-9);
    }

    #[test]
    fn fig1_narrative_value_at_sigma_point_nine() {
        // D/F = 2 with sigma = 0.9 gives varpi = 2.22 and k close to 2.85.
        let p = PriceParams::with_solved_k(vec![2.0], vec![1.0], 0.9).unwrap();
        assert!((p.k() - 2.8436).abs() < 1e-3);
        assert!((p.ratio_bound() - p.k()).abs() < 1e-9);
    }

    #[test]
    fn schedule_cost_at_posted_prices() {
        let mut market =
            StaticMarket::uniform(5, ResourceVector::new(vec![10.0, 10.0]), &[1.0, 1.0]);
        market.set_price(3, 0, 0.5);
        let one = bid_with(1.0, vec![Container::new(1, vec![2.0, 0.0])]);
        let s = Schedule::new(vec![vec![3]]);
        assert_eq!(schedule_cost(&s, &one, &market).unwrap(), 1.0);
        assert_eq!(
            schedule_cost(&Schedule::new(vec![vec![]]), &one, &market).unwrap(),
            0.0
        );
        let two = bid_with(
            1.0,
            vec![
                Container::new(1, vec![2.0, 0.0]),
                Container::new(1, vec![1.0, 1.0]),
            ],
        );
        let shared = Schedule::new(vec![vec![3], vec![3]]);
        let separate: f64 = schedule_cost(&Schedule::new(vec![vec![3], vec![]]), &two, &market)
            .unwrap()
            + schedule_cost(&Schedule::new(vec![vec![], vec![3]]), &two, &market).unwrap();
        assert_eq!(schedule_cost(&shared, &two, &market).unwrap(), separate);
        assert_eq!(separate, 1.0 + 1.5);
        let late = Schedule::new(vec![vec![6]]);
        assert!(schedule_cost(&late, &one, &market).is_err());
    }

    fn params_strategy() -> impl Strategy<Value = (PriceParams, f64)> {
        (
            0.01f64..100.0,
            1.001f64..1000.0,
            0.05f64..=1.0,
            0.1f64..1000.0,
        )
            .prop_map(|(f, spread, sigma, cap)| {
                let p = PriceParams::with_solved_k(vec![f * spread], vec![f], sigma).unwrap();
                (p, cap)
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn solve_k_residual(varpi in 1.0f64..=1e4) {
            prop_assume!(varpi > 1.0);
            let k = solve_k(varpi).unwrap();
            prop_assert!(k > 1.0);
            prop_assert!((k - 1.0 - (k * varpi).ln()).abs() <= K_TOLERANCE);
        }

        #[test]
        fn boundary_prices((p, cap) in params_strategy()) {
            let lo = marginal_price(0.0, 0, &p, cap).unwrap();
            let hi = marginal_price(cap, 0, &p, cap).unwrap();
            let floor = p.sigma() * p.min_density(0) / p.k();
            prop_assert!(((lo - floor) / floor).abs() <= 1e-12);
            prop_assert!(((hi - p.max_density(0)) / p.max_density(0)).abs() <= 1e-12);
        }

        #[test]
        fn strictly_increasing((p, cap) in params_strategy(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
            prop_assume!((a - b).abs() > 1e-6);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(
                marginal_price(lo * cap, 0, &p, cap).unwrap()
                    < marginal_price(hi * cap, 0, &p, cap).unwrap()
            );
        }

        #[test]
        fn differential_allocation_price_relation(
            (p, cap) in params_strategy(),
            start in 0.0f64..1.0,
            step in 1e-6f64..=0.01,
        ) {
            let alpha = p.alpha();
            let w = start * cap * (1.0 - step);
            let delta = step * cap;
            let before = marginal_price(w, 0, &p, cap).unwrap();
            let after = marginal_price(w + delta, 0, &p, cap).unwrap();
            let lhs = before * delta;
            let rhs = cap * (after - before) / alpha * (1.0 - 10.0 * delta / cap);
            prop_assert!(lhs >= rhs * (1.0 - 1e-12), "lhs {} rhs {} alpha {}", lhs, rhs, alpha);
        }
    }
}
