use std::io::Write;

use anyhow::Context;
use hetalloc::verification::run_oracles;
use hetalloc::{
    fixed_r_allocation, min_latency_bound, optimal_allocation, reisizadeh_allocation,
    simulate_latency_with, uniform_allocation_fixed_n, uniform_allocation_with_rate, Allocation64,
    ClusterSpec64, Error, GroupSpec64, LoadRounding, RuntimeModel, SimOptions,
};

use crate::config::{ExperimentConfig, SchemeSpec, SweepVariable};

/// Outcome of a command that ran to completion.
#[derive(Debug, PartialEq, Eq)]
pub enum Status {
    Ok,
    OracleFailure,
}

pub const SIMULATE_HEADER: [&str; 8] = [
    "scheme",
    "sweep_value",
    "N",
    "rate",
    "mean_latency",
    "std_error",
    "t_star",
    "status",
];
pub const SWEEP_RATE_HEADER: [&str; 6] =
    ["scheme", "rate", "n", "mean_latency", "std_error", "status"];
pub const ALLOCATE_HEADER: [&str; 15] = [
    "group",
    "workers",
    "mu",
    "alpha",
    "load_real",
    "load_int",
    "r_star",
    "q_star",
    "xi_star",
    "n_real",
    "n_int",
    "rate",
    "t_star",
    "N",
    "N_t_star",
];
pub const VERIFY_HEADER: [&str; 6] = [
    "name",
    "max_abs_error",
    "max_rel_error",
    "samples",
    "tolerance",
    "pass",
];

/// Short machine-readable tag for a failed row.
fn status_of(e: &Error) -> &'static str {
    match e {
        Error::Domain { .. } => "domain-error",
        Error::Underflow { .. } => "underflow",
        Error::InvalidRate { .. } => "invalid-rate",
        Error::NoSolution { .. } => "no-solution",
        Error::ShiftMismatch => "shift-mismatch",
        Error::Infeasible { .. } => "infeasible",
        Error::ComplexityGuard { .. } => "complexity-guard",
        Error::ShapeMismatch { .. } => "shape-mismatch",
        Error::InvalidCluster(_) => "invalid-cluster",
    }
}

fn num(x: f64) -> String {
    x.to_string()
}

fn sim_options(cfg: &ExperimentConfig) -> SimOptions {
    let rounding = if cfg.real_loads {
        LoadRounding::Real
    } else {
        LoadRounding::Integer
    };
    let opts = SimOptions::new(cfg.trials, cfg.seed).with_rounding(rounding);
    match cfg.threads {
        Some(t) => opts.with_threads(t),
        None => opts,
    }
}

fn build_allocation(
    scheme: &SchemeSpec,
    cluster: &ClusterSpec64,
    model: RuntimeModel,
) -> Result<Allocation64, Error> {
    match scheme {
        SchemeSpec::Optimal => optimal_allocation(cluster, model).map(|(a, _)| a),
        SchemeSpec::Uniform {
            rate: Some(rate), ..
        } => uniform_allocation_with_rate(cluster, *rate),
        SchemeSpec::Uniform { n: Some(n), .. } => uniform_allocation_fixed_n(cluster, *n),
        SchemeSpec::Uniform { .. } => unreachable!("rejected when the config is parsed"),
        SchemeSpec::UniformNStar => {
            let (opt, _) = optimal_allocation(cluster, model)?;
            uniform_allocation_fixed_n(cluster, (opt.n_real.round() as u64).max(cluster.k))
        }
        SchemeSpec::FixedR { r } => fixed_r_allocation(cluster, *r).map(|(a, _)| a),
        SchemeSpec::Reisizadeh => reisizadeh_allocation(cluster),
    }
}

/// Copy of `base` with `f` applied to one group, or to all when `only` is
/// `None`.
fn scale_groups(
    base: &ClusterSpec64,
    only: Option<usize>,
    f: impl Fn(&mut GroupSpec64),
) -> ClusterSpec64 {
    let mut c = base.clone();
    for (j, g) in c.groups.iter_mut().enumerate() {
        if only.is_none_or(|o| o == j) {
            f(g);
        }
    }
    c
}

/// Per-group optimal allocation table.
pub fn allocate<W: Write>(cfg: &ExperimentConfig, out: W) -> anyhow::Result<Status> {
    let cluster = cfg.cluster();
    let (alloc, point) = optimal_allocation(&cluster, cfg.model)?;
    let n_total = cluster.total_workers();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(ALLOCATE_HEADER)?;
    for (j, g) in cluster.groups.iter().enumerate() {
        w.write_record([
            j.to_string(),
            g.workers.to_string(),
            num(g.mu),
            num(g.alpha),
            num(alloc.loads_real[j]),
            alloc.loads_int[j].to_string(),
            num(point.r_star[j]),
            num(point.q_star[j]),
            num(point.xi_star[j]),
            num(alloc.n_real),
            alloc.n_int.to_string(),
            num(alloc.rate(cluster.k)),
            num(point.t_star),
            n_total.to_string(),
            num(n_total as f64 * point.t_star),
        ])?;
    }
    w.flush()?;
    Ok(Status::Ok)
}

/// Monte Carlo latency of each scheme at each sweep point.
pub fn simulate<W: Write>(cfg: &ExperimentConfig, out: W) -> anyhow::Result<Status> {
    let base = cfg.cluster();
    let points: Vec<(Option<f64>, ClusterSpec64)> = match &cfg.sweep {
        None => vec![(None, base)],
        Some(sweep) => sweep
            .grid
            .iter()
            .map(|&v| {
                let c = match sweep.variable {
                    SweepVariable::NScale => scale_groups(&base, sweep.group, |g| {
                        g.workers = ((g.workers as f64 * v).round() as u64).max(1)
                    }),
                    SweepVariable::MuScale => scale_groups(&base, sweep.group, |g| g.mu *= v),
                    SweepVariable::Rate => {
                        anyhow::bail!("a rate sweep belongs to the sweep-rate command")
                    }
                };
                Ok((Some(v), c))
            })
            .collect::<anyhow::Result<_>>()?,
    };
    let opts = sim_options(cfg);
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SIMULATE_HEADER)?;
    for (value, cluster) in &points {
        let sweep_cell = value.map(num).unwrap_or_default();
        let bound = min_latency_bound(cluster, cfg.model);
        let t_cell = bound.as_ref().map(|&t| num(t)).unwrap_or_default();
        for scheme in &cfg.schemes {
            let result = build_allocation(scheme, cluster, cfg.model)
                .and_then(|a| simulate_latency_with(cluster, &a, cfg.model, &opts).map(|e| (a, e)));
            let mut row = vec![
                scheme.label(),
                sweep_cell.clone(),
                cluster.total_workers().to_string(),
            ];
            match result {
                Ok((a, est)) => row.extend([
                    num(a.rate(cluster.k)),
                    num(est.mean),
                    num(est.std_error),
                    t_cell.clone(),
                    match &bound {
                        Ok(_) => "ok".into(),
                        Err(e) => format!("ok;bound-{}", status_of(e)),
                    },
                ]),
                Err(e) => row.extend([
                    String::new(),
                    String::new(),
                    String::new(),
                    t_cell.clone(),
                    status_of(&e).into(),
                ]),
            }
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(Status::Ok)
}

/// Uniform-scheme latency over a grid of code rates, followed by the
/// optimal scheme as a reference row.
pub fn sweep_rate<W: Write>(cfg: &ExperimentConfig, out: W) -> anyhow::Result<Status> {
    let sweep = cfg
        .sweep
        .as_ref()
        .filter(|s| s.variable == SweepVariable::Rate)
        .context("sweep-rate needs a [sweep] table with variable = \"rate\"")?;
    let cluster = cfg.cluster();
    let opts = sim_options(cfg);
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_RATE_HEADER)?;
    let mut emit = |label: &str, rate: f64, result: Result<(Allocation64, f64, f64), Error>| {
        let row = match result {
            Ok((a, mean, se)) => [
                label.to_string(),
                num(rate),
                a.n_int.to_string(),
                num(mean),
                num(se),
                "ok".into(),
            ],
            Err(e) => [
                label.to_string(),
                if rate.is_finite() {
                    num(rate)
                } else {
                    String::new()
                },
                String::new(),
                String::new(),
                String::new(),
                status_of(&e).into(),
            ],
        };
        w.write_record(&row)
    };
    for &rate in &sweep.grid {
        let result = uniform_allocation_with_rate(&cluster, rate).and_then(|a| {
            simulate_latency_with(&cluster, &a, cfg.model, &opts).map(|e| (a, e.mean, e.std_error))
        });
        emit("uniform", rate, result)?;
    }
    match optimal_allocation(&cluster, cfg.model) {
        Ok((a, _)) => {
            let rate = a.rate(cluster.k);
            let result = simulate_latency_with(&cluster, &a, cfg.model, &opts)
                .map(|e| (a, e.mean, e.std_error));
            emit("optimal", rate, result)?;
        }
        Err(e) => emit("optimal", f64::NAN, Err(e))?,
    }
    w.flush()?;
    Ok(Status::Ok)
}

/// Every applicable oracle on the configured cluster.
pub fn verify<W: Write>(cfg: &ExperimentConfig, out: W) -> anyhow::Result<Status> {
    let reports = run_oracles(&cfg.cluster(), cfg.model)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(VERIFY_HEADER)?;
    for r in &reports {
        w.write_record([
            r.name.clone(),
            num(r.max_abs_error),
            num(r.max_rel_error),
            r.samples.to_string(),
            num(r.tolerance),
            r.pass.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(if reports.iter().all(|r| r.pass) {
        Status::Ok
    } else {
        Status::OracleFailure
    })
}
