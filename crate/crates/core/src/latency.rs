//! Monte Carlo estimation of the overall expected latency.
//!
//! A trial samples every worker's completion time, orders the workers by
//! completion (ties broken by worker index), and stops at the first worker
//! whose rows bring the master's total to at least `k`. Workers contribute
//! atomically: partial results are never used.
//!
//! Variates come from a ChaCha8 stream keyed by the master seed, with one
//! stream per trial; worker `i` of trial `t` always consumes the `i`-th draw
//! of stream `t`. Results are therefore identical for any thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::allocation::RuntimeModel;
use crate::cluster::{Allocation, ClusterSpec, GroupSpec, LatencyEstimate, LoadRounding};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Inverse-CDF draw of one worker's completion time from a uniform variate
/// `u ∈ [0, 1)`.
pub fn sample_worker_time<T: Scalar>(
    group: &GroupSpec<T>,
    load: T,
    k: u64,
    model: RuntimeModel,
    u: T,
) -> T {
    model.time_scale(load, k) * (group.alpha - (-u).ln_1p() / group.mu)
}

/// Result of one simulated job.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialOutcome<T> {
    /// Time at which the master holds `k` coded rows.
    pub completion_time: T,
    /// Workers of each group finished by then.
    pub finishers_per_group: Vec<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SimOptions {
    pub trials: u64,
    pub seed: u64,
    pub rounding: LoadRounding,
    /// Worker threads; `None` uses the global rayon pool.
    pub threads: Option<usize>,
}

impl SimOptions {
    pub fn new(trials: u64, seed: u64) -> Self {
        Self {
            trials,
            seed,
            rounding: LoadRounding::Integer,
            threads: None,
        }
    }

    pub fn with_rounding(mut self, rounding: LoadRounding) -> Self {
        self.rounding = rounding;
        self
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = Some(threads);
        self
    }
}

/// Per-worker layout shared by every trial.
struct Workers<T> {
    group_of: Vec<u32>,
    rows: Vec<T>,
    k: T,
}

impl<T: Scalar> Workers<T> {
    fn new(cluster: &ClusterSpec<T>, loads: &[T]) -> Result<Self> {
        if loads.len() != cluster.num_groups() {
            return Err(Error::ShapeMismatch {
                expected: cluster.num_groups(),
                got: loads.len(),
            });
        }
        let total: T = cluster
            .groups
            .iter()
            .zip(loads)
            .map(|(g, &l)| g.size() * l)
            .sum();
        let k = cluster.rows();
        if total < k * (T::one() - slack::<T>()) {
            return Err(Error::Infeasible {
                total: total.to_f64_lossy(),
                k: cluster.k,
            });
        }
        let mut group_of = Vec::with_capacity(cluster.total_workers() as usize);
        let mut rows = Vec::with_capacity(group_of.capacity());
        for (j, (g, &l)) in cluster.groups.iter().zip(loads).enumerate() {
            for _ in 0..g.workers {
                group_of.push(j as u32);
                rows.push(l);
            }
        }
        Ok(Self { group_of, rows, k })
    }
}

/// Relative slack when comparing accumulated rows against `k`, so that real
/// loads summing to `k` up to rounding still complete.
fn slack<T: Scalar>() -> T {
    T::epsilon() * T::lit(64.0)
}

fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

fn run_trial<T: Scalar>(
    cluster: &ClusterSpec<T>,
    workers: &Workers<T>,
    model: RuntimeModel,
    seed: u64,
    trial: u64,
) -> TrialOutcome<T> {
    let mut rng = trial_rng(seed, trial);
    let mut times: Vec<(T, u32)> = workers
        .group_of
        .iter()
        .zip(&workers.rows)
        .enumerate()
        .map(|(i, (&j, &l))| {
            let u = T::lit(rng.random::<f64>());
            let t = sample_worker_time(&cluster.groups[j as usize], l, cluster.k, model, u);
            (t, i as u32)
        })
        .collect();
    times.sort_unstable_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .expect("completion times are finite")
            .then(a.1.cmp(&b.1))
    });

    let target = workers.k * (T::one() - slack::<T>());
    let mut finishers = vec![0u64; cluster.num_groups()];
    let mut collected = T::zero();
    let mut completion = T::zero();
    for &(t, i) in &times {
        let i = i as usize;
        collected = collected + workers.rows[i];
        finishers[workers.group_of[i] as usize] += 1;
        completion = t;
        if collected >= target {
            break;
        }
    }
    TrialOutcome {
        completion_time: completion,
        finishers_per_group: finishers,
    }
}

fn with_pool<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .expect("thread pool")
            .install(f),
        None => f(),
    }
}

/// Runs every trial and returns the outcomes in trial order.
pub fn simulate_outcomes<T: Scalar>(
    cluster: &ClusterSpec<T>,
    loads: &[T],
    model: RuntimeModel,
    opts: &SimOptions,
) -> Result<Vec<TrialOutcome<T>>> {
    let workers = Workers::new(cluster, loads)?;
    Ok(with_pool(opts.threads, || {
        (0..opts.trials)
            .into_par_iter()
            .map(|t| run_trial(cluster, &workers, model, opts.seed, t))
            .collect()
    }))
}

/// Monte Carlo mean and standard error of the latency of `alloc`.
pub fn simulate_latency_with<T: Scalar>(
    cluster: &ClusterSpec<T>,
    alloc: &Allocation<T>,
    model: RuntimeModel,
    opts: &SimOptions,
) -> Result<LatencyEstimate<T>> {
    if opts.trials == 0 {
        return Err(Error::Domain {
            what: "trials",
            value: 0.0,
            domain: "[1, inf)",
        });
    }
    let loads = alloc.loads(opts.rounding);
    let workers = Workers::new(cluster, &loads)?;
    let samples: Vec<T> = with_pool(opts.threads, || {
        (0..opts.trials)
            .into_par_iter()
            .map(|t| run_trial(cluster, &workers, model, opts.seed, t).completion_time)
            .collect()
    });
    let (mean, std_error) = mean_and_std_error(&samples);
    Ok(LatencyEstimate {
        mean,
        std_error,
        trials: opts.trials,
        seed: opts.seed,
    })
}

/// [`simulate_latency_with`] using integer loads and the global pool.
pub fn simulate_latency<T: Scalar>(
    cluster: &ClusterSpec<T>,
    alloc: &Allocation<T>,
    model: RuntimeModel,
    trials: u64,
    seed: u64,
) -> Result<LatencyEstimate<T>> {
    simulate_latency_with(cluster, alloc, model, &SimOptions::new(trials, seed))
}

/// Neumaier-compensated sum.
pub(crate) fn compensated_sum<T: Scalar>(xs: impl IntoIterator<Item = T>) -> T {
    let mut sum = T::zero();
    let mut comp = T::zero();
    for x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp = comp + ((sum - t) + x);
        } else {
            comp = comp + ((x - t) + sum);
        }
        sum = t;
    }
    sum + comp
}

/// Sample mean and standard error of the mean (0 for a single sample).
pub fn mean_and_std_error<T: Scalar>(samples: &[T]) -> (T, T) {
    let n = T::count(samples.len() as u64);
    let mean = compensated_sum(samples.iter().copied()) / n;
    if samples.len() < 2 {
        return (mean, T::zero());
    }
    let ss = compensated_sum(samples.iter().map(|&x| (x - mean) * (x - mean)));
    let var = ss / (n - T::one());
    (mean, (var / n).sqrt())
}

/// Asymptotic variance `q(1-q) / (N_j f_j(eta_j)^2)` of the central order
/// statistic of rank `qN_j` in `group`, where `f_j` is the runtime density at
/// load `alloc_load` and `eta_j` its `q`-quantile.
pub fn asymptotic_variance<T: Scalar>(
    group: &GroupSpec<T>,
    alloc_load: T,
    q: T,
    cluster: &ClusterSpec<T>,
    model: RuntimeModel,
) -> Result<T> {
    if !(q > T::zero() && q < T::one()) {
        return Err(Error::Domain {
            what: "asymptotic_variance q",
            value: q.to_f64_lossy(),
            domain: "(0, 1)",
        });
    }
    if !(alloc_load > T::zero()) {
        return Err(Error::Domain {
            what: "asymptotic_variance load",
            value: alloc_load.to_f64_lossy(),
            domain: "(0, inf)",
        });
    }
    let rate = group.mu / model.time_scale(alloc_load, cluster.k);
    let eta = quantile(group, alloc_load, q, cluster.k, model);
    let shift = model.time_scale(alloc_load, cluster.k) * group.alpha;
    let density = rate * (-rate * (eta - shift)).exp();
    Ok(q * (T::one() - q) / (group.size() * density * density))
}

/// `q`-quantile of one worker's completion time.
pub fn quantile<T: Scalar>(group: &GroupSpec<T>, load: T, q: T, k: u64, model: RuntimeModel) -> T {
    sample_worker_time(group, load, k, model, q)
}
