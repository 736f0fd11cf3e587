//! Batch posted-price primal-dual auction for container jobs.
//!
//! Jobs arrive as bids carrying a DAG of containers, each container asking
//! for a number of (not necessarily contiguous) time slots and a per-slot
//! resource vector. Bids arriving within a batch window are decided together:
//! each is scheduled at the current posted prices, the one with the best
//! value per unit of priced resource wins, pays its posted cost, and prices
//! rise along an exponential curve in the allocated fraction of capacity.

// `!(x > 0.0)` is the NaN-rejecting form used for validation throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod auction;
pub mod model;
pub mod oracle;
pub mod pricing;
pub mod scheduler;
pub mod workload;

pub use model::{
    Bid, Container, ContainerGraph, Market, MarketState, ResourceVector, Schedule, Slot,
};
pub use pricing::{PriceParams, PricingConfig};
pub use scheduler::{SchedulingResult, SearchLimits};
