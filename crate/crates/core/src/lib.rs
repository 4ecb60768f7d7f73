//! Optimal load allocation for MDS-coded distributed matrix-vector
//! multiplication over heterogeneous groups of workers.
//!
//! Workers are partitioned into groups with a common straggling rate and
//! shift parameter; the runtime of a worker follows a shifted exponential
//! distribution whose scale grows with the number of coded rows it holds.
//! The crate computes the allocation minimising a lower bound on the
//! expected job latency, the bound itself, several baseline allocations, and
//! Monte Carlo estimates of the true latency. Independent brute-force
//! oracles live in [`verification`].
//!
//! All numerics are generic over [`Scalar`] (`f32` or `f64`); the `*64`
//! aliases below fix the common double-precision instantiation.

// `!(x > 0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod allocation;
pub mod cluster;
pub mod error;
pub mod latency;
pub mod scalar;
pub mod special;
pub mod verification;

pub use allocation::{
    fixed_r_allocation, group_expected_latency, min_latency_bound, objective_f, optimal_allocation,
    optimal_r_star, reisizadeh_allocation, uniform_allocation_fixed_n,
    uniform_allocation_with_rate, xi, Expectation, RuntimeModel,
};
pub use cluster::{
    validate_cluster, Allocation, ClusterSpec, GroupSpec, LatencyEstimate, LoadRounding,
    OptimalPoint, Scheme, Severity, Violation, ViolationCode,
};
pub use error::{Error, Result};
pub use latency::{
    asymptotic_variance, sample_worker_time, simulate_latency, simulate_latency_with,
    simulate_outcomes, SimOptions, TrialOutcome,
};
pub use scalar::Scalar;
pub use special::{harmonic, lambert_w_minus1};

pub type GroupSpec64 = GroupSpec<f64>;
pub type ClusterSpec64 = ClusterSpec<f64>;
pub type Allocation64 = Allocation<f64>;
pub type OptimalPoint64 = OptimalPoint<f64>;
pub type LatencyEstimate64 = LatencyEstimate<f64>;
pub type TrialOutcome64 = TrialOutcome<f64>;

pub type GroupSpec32 = GroupSpec<f32>;
pub type ClusterSpec32 = ClusterSpec<f32>;
pub type Allocation32 = Allocation<f32>;
pub type OptimalPoint32 = OptimalPoint<f32>;
pub type LatencyEstimate32 = LatencyEstimate<f32>;
