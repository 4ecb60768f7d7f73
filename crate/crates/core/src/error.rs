use thiserror::Error;

use crate::cluster::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{what}: argument {value} outside {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },

    /// `-exp(-(alpha*mu + 1))` is not representable, so the lower Lambert
    /// branch cannot be evaluated for this group.
    #[error("group {group}: W_-1 argument -exp(-{exponent}) underflows")]
    Underflow { group: usize, exponent: f64 },

    #[error("code length n = {n} is below the row count k = {k}")]
    InvalidRate { n: u64, k: u64 },

    #[error("fixed-r equation cannot reach r = {r}; attainable range is ({lo}, {hi})")]
    NoSolution { r: f64, lo: f64, hi: f64 },

    #[error("fixed-r allocation needs one shift parameter shared by all groups")]
    ShiftMismatch,

    #[error("allocation supplies {total} coded rows, fewer than k = {k}")]
    Infeasible { total: f64, k: u64 },

    #[error("grid of {points} points exceeds the cap of {cap}")]
    ComplexityGuard { points: u128, cap: u128 },

    #[error("expected {expected} per-group values, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("invalid cluster: {}", format_violations(.0))]
    InvalidCluster(Vec<Violation>),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
