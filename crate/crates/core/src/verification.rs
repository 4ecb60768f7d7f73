//! Brute-force oracles for the analytic results.
//!
//! Nothing here calls into [`crate::allocation`] or [`crate::special`] to
//! compute a reference value: every oracle re-derives its quantity from the
//! raw model (bisection, exhaustive grids, direct harmonic sums) so that it
//! can be trusted to check them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::allocation::{optimal_allocation, RuntimeModel};
use crate::cluster::{Allocation, ClusterSpec, OptimalPoint};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::special::lambert_w_minus1;

/// Default cap on the number of grid points [`grid_minimize_f`] evaluates.
pub const DEFAULT_GRID_CAP: u128 = 20_000_000;

const LAMBERT_ROUND_TRIP_TOL: f64 = 1e-12;
const LAMBERT_AGREEMENT_TOL: f64 = 1e-10;
const IDENTITY_TOL: f64 = 1e-9;
const ORDERING_TOL: f64 = 1e-12;
/// The log approximation is reported for information; this only flags
/// groups so small that it is badly off.
const LOG_APPROX_TOL: f64 = 5e-2;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleReport {
    pub name: String,
    pub max_abs_error: f64,
    pub max_rel_error: f64,
    pub samples: u64,
    pub tolerance: f64,
    /// `max_rel_error <= tolerance`.
    pub pass: bool,
}

impl OracleReport {
    pub fn new(
        name: &str,
        max_abs_error: f64,
        max_rel_error: f64,
        samples: u64,
        tolerance: f64,
    ) -> Self {
        Self {
            name: name.to_string(),
            max_abs_error,
            max_rel_error,
            samples,
            tolerance,
            pass: max_rel_error <= tolerance,
        }
    }
}

/// Solves `w·e^w = x` for `w ≤ -1` by 200 bisection steps on `[-60, -1]`.
///
/// For `x` closer to zero than `-60·e^{-60}` the lower end is pushed out to
/// `2·log(-x) - 10` so the root stays bracketed. Within 1e-14 of `-1/e`
/// the answer is taken to be the branch point itself: `w·e^w` is flat
/// there and bisection in floating point cannot resolve `w` better than
/// about the square root of machine epsilon.
pub fn lambert_bisection_oracle<T: Scalar>(x: T) -> Result<T> {
    let inv_e = T::E().recip();
    if !(x < T::zero()) || x < -inv_e - T::epsilon() * T::lit(4.0) {
        return Err(Error::Domain {
            what: "lambert_bisection_oracle",
            value: x.to_f64_lossy(),
            domain: "[-1/e, 0)",
        });
    }
    if (x + inv_e).abs() < T::lit(1e-14) {
        return Ok(-T::one());
    }
    let mut lo = T::lit(-60.0).min(T::lit(2.0) * (-x).ln() - T::lit(10.0));
    let mut hi = -T::one();
    for _ in 0..200 {
        let mid = (lo + hi) / T::lit(2.0);
        // w·e^w is decreasing on (-inf, -1]
        if mid * mid.exp() > x {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo + hi) / T::lit(2.0))
}

fn oracle_xi<T: Scalar>(r: T, n: T, mu: T, alpha: T) -> T {
    alpha + (n / (n - r)).ln() / mu
}

fn oracle_f<T: Scalar>(r: &[T], cluster: &ClusterSpec<T>) -> T {
    let denom: T = r
        .iter()
        .zip(&cluster.groups)
        .map(|(&rj, g)| rj / oracle_xi(rj, g.size(), g.mu, g.alpha))
        .sum();
    denom.recip()
}

/// Grid minimum of the objective over the open box of finisher counts.
#[derive(Clone, Debug, PartialEq)]
pub struct GridMinimum<T> {
    pub argmin: Vec<T>,
    pub value: T,
    /// Grid spacing per axis.
    pub cell: Vec<T>,
}

/// Exhaustive scan of `f(r) = 1/Σ r_j/xi(r_j)` on the cell midpoints
/// `r_j = N_j (i + 1/2) / points_per_axis`.
pub fn grid_minimize_f<T: Scalar>(
    cluster: &ClusterSpec<T>,
    points_per_axis: u64,
) -> Result<GridMinimum<T>> {
    grid_minimize_f_capped(cluster, points_per_axis, DEFAULT_GRID_CAP)
}

pub fn grid_minimize_f_capped<T: Scalar>(
    cluster: &ClusterSpec<T>,
    points_per_axis: u64,
    cap: u128,
) -> Result<GridMinimum<T>> {
    if points_per_axis < 10 {
        return Err(Error::Domain {
            what: "points_per_axis",
            value: points_per_axis as f64,
            domain: "[10, inf)",
        });
    }
    let dims = cluster.num_groups() as u32;
    let total = (points_per_axis as u128)
        .checked_pow(dims)
        .unwrap_or(u128::MAX);
    if total > cap {
        return Err(Error::ComplexityGuard { points: total, cap });
    }
    let p = points_per_axis;
    let cell: Vec<T> = cluster
        .groups
        .iter()
        .map(|g| g.size() / T::count(p))
        .collect();
    let coords = |mut idx: u64| -> Vec<T> {
        cell.iter()
            .map(|&c| {
                let i = idx % p;
                idx /= p;
                c * (T::count(i) + T::lit(0.5))
            })
            .collect()
    };
    let (best_idx, value) = (0..total as u64)
        .into_par_iter()
        .map(|idx| (idx, oracle_f(&coords(idx), cluster)))
        .reduce(
            || (u64::MAX, T::infinity()),
            |a, b| {
                if b.1 < a.1 || (b.1 == a.1 && b.0 < a.0) {
                    b
                } else {
                    a
                }
            },
        );
    Ok(GridMinimum {
        argmin: coords(best_idx),
        value,
        cell,
    })
}

/// Expected `r`-th order statistic of `n` i.i.d. worker times, summing the
/// harmonic difference directly:
/// `scale · (alpha + (H_n - H_{n-r}) / mu)`.
pub fn exact_order_statistic_mean<T: Scalar>(
    n: u64,
    r: u64,
    mu: T,
    alpha: T,
    load: T,
    k: u64,
    model: RuntimeModel,
) -> Result<T> {
    if r == 0 || r > n {
        return Err(Error::Domain {
            what: "exact_order_statistic_mean r",
            value: r as f64,
            domain: "[1, N]",
        });
    }
    let h: T = ((n - r + 1)..=n).map(|i| T::count(i).recip()).sum();
    let scale = match model {
        RuntimeModel::PerTask => load / T::count(k),
        RuntimeModel::PerRow => load,
    };
    Ok(scale * (alpha + h / mu))
}

/// Largest pairwise gap between the group products `l_j·xi(r_j*)`, relative
/// to the first group's.
pub fn equalization_residual<T: Scalar>(
    alloc: &Allocation<T>,
    point: &OptimalPoint<T>,
    cluster: &ClusterSpec<T>,
) -> T {
    let products: Vec<T> = alloc
        .loads_real
        .iter()
        .zip(&point.r_star)
        .zip(&cluster.groups)
        .map(|((&l, &r), g)| l * oracle_xi(r, g.size(), g.mu, g.alpha))
        .collect();
    let (lo, hi) = products
        .iter()
        .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    (hi - lo) / products[0]
}

fn uniform_in_box<T: Scalar>(rng: &mut ChaCha8Rng, cluster: &ClusterSpec<T>) -> Vec<T> {
    cluster
        .groups
        .iter()
        .map(|g| g.size() * T::lit(rng.random_range(1e-9..1.0 - 1e-9)))
        .collect()
}

/// Runs every applicable oracle against the cluster's optimal allocation.
pub fn run_oracles<T: Scalar>(
    cluster: &ClusterSpec<T>,
    model: RuntimeModel,
) -> Result<Vec<OracleReport>> {
    let mut reports = vec![lambert_round_trip_report::<T>(10_000)];
    reports.push(lambert_agreement_report::<T>(10_000));

    let (alloc, point) = optimal_allocation(cluster, model)?;
    let k = cluster.rows();
    let g_count = cluster.num_groups() as u64;

    let mut worst = (0.0f64, 0.0f64);
    for (g, &r) in cluster.groups.iter().zip(&point.r_star) {
        let x = oracle_xi(r, g.size(), g.mu, g.alpha);
        let lhs = r / (g.mu * (g.size() - r));
        let abs = (lhs - x).abs().to_f64_lossy();
        worst = (worst.0.max(abs), worst.1.max(abs / x.to_f64_lossy()));
    }
    reports.push(OracleReport::new(
        "stationarity",
        worst.0,
        worst.1,
        g_count,
        IDENTITY_TOL,
    ));

    let budget: T = point
        .r_star
        .iter()
        .zip(&alloc.loads_real)
        .map(|(&r, &l)| r * l)
        .sum();
    let abs = (budget - k).abs().to_f64_lossy();
    reports.push(OracleReport::new(
        "row_budget",
        abs,
        abs / cluster.k as f64,
        g_count,
        IDENTITY_TOL,
    ));

    let eq = equalization_residual(&alloc, &point, cluster).to_f64_lossy();
    reports.push(OracleReport::new(
        "equalization",
        eq,
        eq,
        g_count,
        IDENTITY_TOL,
    ));

    let per_task_bound = match model {
        RuntimeModel::PerTask => point.t_star,
        RuntimeModel::PerRow => point.t_star / k,
    };
    let f_star = oracle_f(&point.r_star, cluster);
    let abs = (f_star - per_task_bound).abs().to_f64_lossy();
    reports.push(OracleReport::new(
        "bound_equals_objective",
        abs,
        abs / f_star.to_f64_lossy(),
        1,
        IDENTITY_TOL,
    ));

    let mut worst = (0.0f64, 0.0f64);
    for (g, &r) in cluster.groups.iter().zip(&point.r_star) {
        let rounded = r.round().max(T::one()).min(g.size() - T::one());
        let Some(ri) = rounded.to_u64() else { continue };
        if ri == 0 || ri >= g.workers {
            continue;
        }
        let exact: T = ((g.workers - ri + 1)..=g.workers)
            .map(|i| T::count(i).recip())
            .sum();
        let approx = (g.size() / (g.size() - rounded)).ln();
        let abs = (exact - approx).abs() / g.mu;
        let rel = abs / oracle_xi(rounded, g.size(), g.mu, g.alpha);
        worst = (
            worst.0.max(abs.to_f64_lossy()),
            worst.1.max(rel.to_f64_lossy()),
        );
    }
    reports.push(OracleReport::new(
        "log_approximation",
        worst.0,
        worst.1,
        g_count,
        LOG_APPROX_TOL,
    ));

    let points = match cluster.num_groups() {
        1 => Some(100_000),
        2 => Some(1_000),
        3 => Some(150),
        _ => None,
    };
    if let Some(p) = points {
        let grid = grid_minimize_f(cluster, p)?;
        let cells = grid
            .argmin
            .iter()
            .zip(&point.r_star)
            .zip(&grid.cell)
            .map(|((&a, &r), &c)| ((a - r) / c).abs().to_f64_lossy())
            .fold(0.0, f64::max);
        let samples = p.pow(cluster.num_groups() as u32);
        reports.push(OracleReport::new(
            "grid_argmin_cells",
            cells,
            cells,
            samples,
            1.0,
        ));
        let below = (f_star - grid.value).max(T::zero()).to_f64_lossy();
        reports.push(OracleReport::new(
            "grid_not_below_bound",
            below,
            below / f_star.to_f64_lossy(),
            samples,
            ORDERING_TOL,
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut below = 0.0f64;
    for _ in 0..10_000 {
        let r = uniform_in_box(&mut rng, cluster);
        below = below.max((f_star - oracle_f(&r, cluster)).to_f64_lossy());
    }
    reports.push(OracleReport::new(
        "random_search_not_below_bound",
        below,
        below / f_star.to_f64_lossy(),
        10_000,
        ORDERING_TOL,
    ));

    let mut worst = (0.0f64, 0.0f64);
    for _ in 0..1_000 {
        let a = uniform_in_box(&mut rng, cluster);
        let b = uniform_in_box(&mut rng, cluster);
        let t = T::lit(rng.random::<f64>());
        let mid: Vec<T> = a
            .iter()
            .zip(&b)
            .map(|(&x, &y)| t * x + (T::one() - t) * y)
            .collect();
        let lhs = oracle_f(&mid, cluster);
        let rhs = t * oracle_f(&a, cluster) + (T::one() - t) * oracle_f(&b, cluster);
        let excess = (lhs - rhs).max(T::zero());
        worst = (
            worst.0.max(excess.to_f64_lossy()),
            worst.1.max((excess / rhs).to_f64_lossy()),
        );
    }
    reports.push(OracleReport::new(
        "convexity_probe",
        worst.0,
        worst.1,
        1_000,
        ORDERING_TOL,
    ));

    Ok(reports)
}

fn log_spaced_domain<T: Scalar>(count: usize) -> Vec<T> {
    let smallest: f64 = if T::min_positive_value().to_f64_lossy() < 1e-300 {
        1e-300
    } else {
        1e-30
    };
    let (lo, hi) = (smallest.ln(), -1.0f64);
    (0..count)
        .map(|i| {
            let t = i as f64 / (count.max(2) - 1) as f64;
            T::lit(-(lo + t * (hi - lo)).exp())
        })
        .collect()
}

fn lambert_round_trip_report<T: Scalar>(count: usize) -> OracleReport {
    let mut worst = (0.0f64, 0.0f64);
    for x in log_spaced_domain::<T>(count) {
        let (abs, rel) = match lambert_w_minus1(x) {
            Ok(w) => {
                let abs = (w * w.exp() - x).abs().to_f64_lossy();
                (abs, abs / x.abs().to_f64_lossy())
            }
            Err(_) => (f64::INFINITY, f64::INFINITY),
        };
        worst = (worst.0.max(abs), worst.1.max(rel));
    }
    OracleReport::new(
        "lambert_round_trip",
        worst.0,
        worst.1,
        count as u64,
        LAMBERT_ROUND_TRIP_TOL,
    )
}

fn lambert_agreement_report<T: Scalar>(count: usize) -> OracleReport {
    let mut worst = (0.0f64, 0.0f64);
    for x in log_spaced_domain::<T>(count) {
        let (abs, rel) = match (lambert_w_minus1(x), lambert_bisection_oracle(x)) {
            (Ok(w), Ok(o)) => {
                let abs = (w - o).abs().to_f64_lossy();
                (abs, abs / o.abs().to_f64_lossy())
            }
            _ => (f64::INFINITY, f64::INFINITY),
        };
        worst = (worst.0.max(abs), worst.1.max(rel));
    }
    OracleReport::new(
        "lambert_vs_bisection",
        worst.0,
        worst.1,
        count as u64,
        LAMBERT_AGREEMENT_TOL,
    )
}
