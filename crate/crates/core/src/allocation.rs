//! Analytic load-allocation schemes and latency formulas.
//!
//! Everything here works on real-valued loads and finisher counts; integer
//! rounding happens only when an [`Allocation`] is built.

use serde::{Deserialize, Serialize};

use crate::cluster::{Allocation, ClusterSpec, GroupSpec, OptimalPoint, Scheme};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::special::{harmonic_diff, lambert_w_minus1};

/// How a worker's runtime scales with its load.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuntimeModel {
    /// Rate `k·mu/l`, shift `alpha·l/k`: `mu`, `alpha` describe a full
    /// `k`-row task.
    #[default]
    PerTask,
    /// Rate `mu/l`, shift `alpha·l`: `mu`, `alpha` describe a single row.
    PerRow,
}

impl RuntimeModel {
    /// Factor converting a load `l` into the time scale of the runtime
    /// distribution (`l/k` or `l`).
    pub fn time_scale<T: Scalar>(self, load: T, k: u64) -> T {
        match self {
            RuntimeModel::PerTask => load / T::count(k),
            RuntimeModel::PerRow => load,
        }
    }
}

/// Which expectation of the `r`-th order statistic to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Expectation {
    /// `log(N/(N-r))` in place of the harmonic difference; the form under
    /// which all closed-form optima are derived.
    LogApprox,
    /// `H_N - H_{N-r}`; requires an integral `r`.
    Exact,
}

/// `xi(r) = alpha + log(N/(N-r))/mu`, the per-unit-load latency factor of a
/// group waiting for `r` of its workers.
pub fn xi<T: Scalar>(r: T, group: &GroupSpec<T>) -> Result<T> {
    let n = group.size();
    if !(r > T::zero() && r < n) {
        return Err(Error::Domain {
            what: "xi",
            value: r.to_f64_lossy(),
            domain: "(0, N_j)",
        });
    }
    // log(N/(N-r)) = -log1p(-r/N)
    Ok(group.alpha - (-r / n).ln_1p() / group.mu)
}

/// Expected time until `finishers` workers of `group`, each loaded with
/// `load` rows, have finished.
pub fn group_expected_latency<T: Scalar>(
    load: T,
    finishers: T,
    group: &GroupSpec<T>,
    k: u64,
    model: RuntimeModel,
    form: Expectation,
) -> Result<T> {
    if !(load > T::zero()) {
        return Err(Error::Domain {
            what: "group_expected_latency load",
            value: load.to_f64_lossy(),
            domain: "(0, inf)",
        });
    }
    let factor = match form {
        Expectation::LogApprox => xi(finishers, group)?,
        Expectation::Exact => {
            let out_of_range = Error::Domain {
                what: "group_expected_latency finishers",
                value: finishers.to_f64_lossy(),
                domain: "integer in [1, N_j]",
            };
            if finishers.fract() != T::zero() || finishers < T::one() || finishers > group.size() {
                return Err(out_of_range);
            }
            let r = finishers.to_u64().ok_or(out_of_range)?;
            let h: T = harmonic_diff(group.workers, group.workers - r)?;
            group.alpha + h / group.mu
        }
    };
    Ok(model.time_scale(load, k) * factor)
}

/// `W_{-1}(-e^{-(alpha*mu + 1)})` for one group.
fn group_lambert<T: Scalar>(group: &GroupSpec<T>, index: usize) -> Result<T> {
    let a = group.lambert_exponent();
    let x = -(-a).exp();
    if x == T::zero() || !a.is_finite() {
        return Err(Error::Underflow {
            group: index,
            exponent: a.to_f64_lossy(),
        });
    }
    lambert_w_minus1(x)
}

/// Optimal finisher count `r_j* = N_j (1 + 1/W_{-1}(-e^{-(alpha*mu+1)}))`.
pub fn optimal_r_star<T: Scalar>(group: &GroupSpec<T>) -> Result<T> {
    r_star_indexed(group, 0)
}

fn r_star_indexed<T: Scalar>(group: &GroupSpec<T>, index: usize) -> Result<T> {
    let w = group_lambert(group, index)?;
    Ok(group.size() * (w + T::one()) / w)
}

/// Relative residual of the first-order condition
/// `r/(mu(N-r)) = xi(r)` at `r`.
pub fn stationarity_residual<T: Scalar>(r: T, group: &GroupSpec<T>) -> Result<T> {
    let x = xi(r, group)?;
    let lhs = r / (group.mu * (group.size() - r));
    Ok(((lhs - x) / x).abs())
}

/// `f(r) = 1 / Σ_j r_j / xi(r_j)`: the max group latency once loads are
/// equalised, as a function of the finisher counts. Per-task time units.
pub fn objective_f<T: Scalar>(r: &[T], cluster: &ClusterSpec<T>) -> Result<T> {
    if r.len() != cluster.num_groups() {
        return Err(Error::ShapeMismatch {
            expected: cluster.num_groups(),
            got: r.len(),
        });
    }
    let mut denom = T::zero();
    for (&rj, g) in r.iter().zip(&cluster.groups) {
        denom = denom + rj / xi(rj, g)?;
    }
    Ok(denom.recip())
}

/// Closed-form minimum of the latency lower bound:
/// `T* = -1 / Σ_j mu_j N_j / W_{-1}(-e^{-(alpha_j mu_j + 1)})` for the
/// per-task model, `k · T*` for the per-row model.
pub fn min_latency_bound<T: Scalar>(cluster: &ClusterSpec<T>, model: RuntimeModel) -> Result<T> {
    cluster.ensure_valid()?;
    let mut denom = T::zero();
    for (j, g) in cluster.groups.iter().enumerate() {
        let w = group_lambert(g, j)?;
        denom = denom + g.mu * g.size() / w;
    }
    let per_task = -denom.recip();
    Ok(match model {
        RuntimeModel::PerTask => per_task,
        RuntimeModel::PerRow => cluster.rows() * per_task,
    })
}

/// Optimal load allocation and the optimum it attains.
///
/// The loads are the same under both runtime models; only the latency bound
/// differs (by the factor `k`).
pub fn optimal_allocation<T: Scalar>(
    cluster: &ClusterSpec<T>,
    model: RuntimeModel,
) -> Result<(Allocation<T>, OptimalPoint<T>)> {
    cluster.ensure_valid()?;
    let mut r_star = Vec::with_capacity(cluster.num_groups());
    let mut xi_star = Vec::with_capacity(cluster.num_groups());
    for (j, g) in cluster.groups.iter().enumerate() {
        let r = r_star_indexed(g, j)?;
        xi_star.push(xi(r, g)?);
        r_star.push(r);
    }
    let k = cluster.rows();
    let loads: Vec<T> = (0..cluster.num_groups())
        .map(|j| {
            let others: T = (0..cluster.num_groups())
                .filter(|&i| i != j)
                .map(|i| r_star[i] * xi_star[j] / xi_star[i])
                .sum();
            k / (r_star[j] + others)
        })
        .collect();
    let q_star = r_star
        .iter()
        .zip(&cluster.groups)
        .map(|(&r, g)| r / g.size())
        .collect();
    let mut alloc = Allocation::from_real_loads(cluster, Scheme::Optimal, loads)?;
    alloc.required_finishers = Some(r_star.iter().copied().sum());
    alloc.finishers = Some(r_star.clone());
    let point = OptimalPoint {
        model,
        r_star,
        q_star,
        xi_star,
        t_star: min_latency_bound(cluster, model)?,
    };
    Ok((alloc, point))
}

/// Uniform allocation for a fixed `(n, k)` code: every worker gets `n/N`
/// rows, and recovery needs `r = kN/n` finishers.
pub fn uniform_allocation_fixed_n<T: Scalar>(
    cluster: &ClusterSpec<T>,
    n: u64,
) -> Result<Allocation<T>> {
    cluster.ensure_valid()?;
    if n < cluster.k {
        return Err(Error::InvalidRate { n, k: cluster.k });
    }
    let total = T::count(cluster.total_workers());
    let load = T::count(n) / total;
    let mut alloc = Allocation::from_real_loads(
        cluster,
        Scheme::UniformFixedN,
        vec![load; cluster.num_groups()],
    )?;
    alloc.required_finishers = Some(cluster.rows() * total / T::count(n));
    Ok(alloc)
}

/// Uniform allocation at code rate `k/n`, with `n` rounded to the nearest
/// integer (and never below `k`).
pub fn uniform_allocation_with_rate<T: Scalar>(
    cluster: &ClusterSpec<T>,
    rate: T,
) -> Result<Allocation<T>> {
    if !(rate > T::zero() && rate <= T::one()) {
        return Err(Error::Domain {
            what: "code rate",
            value: rate.to_f64_lossy(),
            domain: "(0, 1]",
        });
    }
    let n = (cluster.rows() / rate)
        .round()
        .to_u64()
        .ok_or(Error::Domain {
            what: "code length",
            value: (cluster.rows() / rate).to_f64_lossy(),
            domain: "u64",
        })?
        .max(cluster.k);
    uniform_allocation_fixed_n(cluster, n)
}

/// Left side of the fixed-`r` balance equation minus `r`, taking group
/// `reference` as the anchor:
/// `r_j + Σ_{j'≠j} N_{j'} (1 - (1 - r_j/N_j)^{mu_{j'}/mu_j}) - r`.
pub fn fixed_r_balance<T: Scalar>(cluster: &ClusterSpec<T>, reference: usize, r_ref: T, r: T) -> T {
    let anchor = &cluster.groups[reference];
    let log_tail = (-r_ref / anchor.size()).ln_1p();
    let others: T = cluster
        .groups
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != reference)
        .map(|(_, g)| g.size() * -(log_tail * g.mu / anchor.mu).exp_m1())
        .sum();
    r_ref + others - r
}

/// Uniform allocation `l = k/r` for a fixed number `r` of finishers, with the
/// per-group finisher counts that equalise group latencies.
///
/// All groups must share a shift parameter.
pub fn fixed_r_allocation<T: Scalar>(
    cluster: &ClusterSpec<T>,
    r: u64,
) -> Result<(Allocation<T>, Vec<T>)> {
    cluster.ensure_valid()?;
    let alpha = cluster.groups[0].alpha;
    let tol = T::lit(1e-12) * alpha;
    if cluster.groups.iter().any(|g| (g.alpha - alpha).abs() > tol) {
        return Err(Error::ShiftMismatch);
    }
    let target = T::count(r);
    let anchor = cluster.groups[0].size();
    let lo = T::zero();
    let hi = anchor * (T::one() - T::lit(1e-12));
    let reach = fixed_r_balance(cluster, 0, hi, T::zero());
    if r == 0 || target >= reach {
        return Err(Error::NoSolution {
            r: r as f64,
            lo: 0.0,
            hi: reach.to_f64_lossy(),
        });
    }
    // The balance is continuous and strictly increasing in r_1.
    let (mut a, mut b) = (lo, hi);
    for _ in 0..400 {
        let mid = (a + b) / T::lit(2.0);
        if mid <= a || mid >= b {
            break;
        }
        if fixed_r_balance(cluster, 0, mid, target) < T::zero() {
            a = mid;
        } else {
            b = mid;
        }
    }
    let r1 = (a + b) / T::lit(2.0);
    let log_tail = (-r1 / anchor).ln_1p();
    let mu1 = cluster.groups[0].mu;
    let per_group: Vec<T> = cluster
        .groups
        .iter()
        .enumerate()
        .map(|(j, g)| {
            if j == 0 {
                r1
            } else {
                g.size() * -(log_tail * g.mu / mu1).exp_m1()
            }
        })
        .collect();
    let load = cluster.rows() / target;
    let mut alloc =
        Allocation::from_real_loads(cluster, Scheme::FixedR, vec![load; cluster.num_groups()])?;
    alloc.finishers = Some(per_group.clone());
    alloc.required_finishers = Some(target);
    Ok((alloc, per_group))
}

/// Closed-form allocation of the per-row shifted model baseline:
/// `l_j = k / (s·delta_j)` with `delta_j = -(W_j + 1)/mu_j` and
/// `s = Σ_j N_j mu_j / (1 + mu_j delta_j)`.
pub fn reisizadeh_allocation<T: Scalar>(cluster: &ClusterSpec<T>) -> Result<Allocation<T>> {
    cluster.ensure_valid()?;
    let mut deltas = Vec::with_capacity(cluster.num_groups());
    for (j, g) in cluster.groups.iter().enumerate() {
        let w = group_lambert(g, j)?;
        deltas.push(-(w + T::one()) / g.mu);
    }
    let s: T = cluster
        .groups
        .iter()
        .zip(&deltas)
        .map(|(g, &d)| g.size() * g.mu / (T::one() + g.mu * d))
        .sum();
    let k = cluster.rows();
    let loads = deltas.iter().map(|&d| k / (s * d)).collect();
    Allocation::from_real_loads(cluster, Scheme::ReisizadehStyle, loads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Independent bisection for W_{-1} on [-60, -1].
    fn w_oracle(x: f64) -> f64 {
        let (mut lo, mut hi) = (-60.0_f64, -1.0_f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid * mid.exp() > x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    fn g(n: u64, mu: f64, alpha: f64) -> GroupSpec<f64> {
        GroupSpec::new(n, mu, alpha)
    }

    fn cluster(k: u64, groups: &[(u64, f64, f64)]) -> ClusterSpec<f64> {
        ClusterSpec::new(k, groups.iter().map(|&(n, m, a)| g(n, m, a)).collect()).unwrap()
    }

    #[test]
    fn xi_values() {
        let grp = g(1000, 1.0, 1.0);
        assert_relative_eq!(
            xi(500.0, &grp).unwrap(),
            1.0 + 2f64.ln(),
            max_relative = 1e-14
        );
        assert_relative_eq!(xi(1e-9, &grp).unwrap(), 1.0, max_relative = 1e-9);
        let mut prev = 0.0;
        for r in [900.0, 990.0, 999.0, 999.9, 999.999] {
            let v = xi(r, &grp).unwrap();
            assert!(v > prev);
            prev = v;
        }
        assert!(prev > 1.0 + 13.0);
        assert!(xi(0.0, &grp).is_err());
        assert!(xi(1000.0, &grp).is_err());
    }

    #[test]
    fn expected_latency_single_worker_exact() {
        let grp = g(1, 1.0, 1.0);
        let v = group_expected_latency(
            100.0,
            1.0,
            &grp,
            100,
            RuntimeModel::PerTask,
            Expectation::Exact,
        )
        .unwrap();
        assert_eq!(v, 2.0);
    }

    #[test]
    fn expected_latency_forms() {
        let grp = g(1000, 1.0, 1.0);
        let k = 10_000;
        let approx = group_expected_latency(
            5000.0,
            500.0,
            &grp,
            k,
            RuntimeModel::PerTask,
            Expectation::LogApprox,
        )
        .unwrap();
        assert_relative_eq!(approx, 0.5 * (1.0 + 2f64.ln()), max_relative = 1e-14);
        let exact = group_expected_latency(
            5000.0,
            500.0,
            &grp,
            k,
            RuntimeModel::PerTask,
            Expectation::Exact,
        )
        .unwrap();
        assert!(((exact - approx) / exact).abs() < 1e-3);
        // per-row prefactor is l instead of l/k
        let row = group_expected_latency(
            5000.0,
            500.0,
            &grp,
            k,
            RuntimeModel::PerRow,
            Expectation::LogApprox,
        )
        .unwrap();
        assert_relative_eq!(row, approx * k as f64, max_relative = 1e-14);
        // r = N is finite only for the exact form
        assert!(group_expected_latency(
            1.0,
            1000.0,
            &grp,
            k,
            RuntimeModel::PerTask,
            Expectation::Exact
        )
        .is_ok());
        assert!(group_expected_latency(
            1.0,
            1000.0,
            &grp,
            k,
            RuntimeModel::PerTask,
            Expectation::LogApprox
        )
        .is_err());
        assert!(group_expected_latency(
            1.0,
            10.5,
            &grp,
            k,
            RuntimeModel::PerTask,
            Expectation::Exact
        )
        .is_err());
        assert!(group_expected_latency(
            1.0,
            0.0,
            &grp,
            k,
            RuntimeModel::PerTask,
            Expectation::Exact
        )
        .is_err());
    }

    #[test]
    fn exact_and_log_forms_differ_by_at_most_the_harmonic_gap() {
        let grp = g(200, 0.7, 1.3);
        for r in 1..200u64 {
            let rf = r as f64;
            let a = group_expected_latency(
                1.0,
                rf,
                &grp,
                1,
                RuntimeModel::PerRow,
                Expectation::LogApprox,
            )
            .unwrap();
            let e =
                group_expected_latency(1.0, rf, &grp, 1, RuntimeModel::PerRow, Expectation::Exact)
                    .unwrap();
            let bound = ((200.0f64 / (200.0 - rf)).ln()
                - crate::special::harmonic_diff::<f64>(200, 200 - r).unwrap())
            .abs()
                / 0.7;
            assert!((a - e).abs() <= bound * (1.0 + 1e-12) + 1e-15);
        }
    }

    #[test]
    fn r_star_homogeneous() {
        let grp = g(1000, 1.0, 1.0);
        let r = optimal_r_star(&grp).unwrap();
        let w = w_oracle(-(-2.0f64).exp());
        assert_relative_eq!(r, 1000.0 * (1.0 + 1.0 / w), max_relative = 1e-12);
        assert!((r - 682.156).abs() < 1e-3);
        assert!(stationarity_residual(r, &grp).unwrap() < 1e-9);
        for c in [2u64, 10] {
            let scaled = optimal_r_star(&g(1000 * c, 1.0, 1.0)).unwrap();
            assert_relative_eq!(scaled, c as f64 * r, max_relative = 1e-13);
        }
    }

    #[test]
    fn r_star_stationary_across_parameters() {
        for &mu in &[1e-3, 0.05, 0.5, 1.0, 4.0, 16.0, 100.0, 700.0] {
            for &alpha in &[0.1, 1.0, 3.0] {
                if alpha * mu > 700.0 {
                    continue;
                }
                let grp = g(500, mu, alpha);
                let r = optimal_r_star(&grp).unwrap();
                assert!(r > 0.0 && r < 500.0);
                let res = stationarity_residual(r, &grp).unwrap();
                assert!(res < 1e-9, "mu={mu} alpha={alpha} res={res:e}");
            }
        }
    }

    #[test]
    fn r_star_underflow() {
        let grp = g(10, 800.0, 1.0);
        assert!(matches!(optimal_r_star(&grp), Err(Error::Underflow { .. })));
    }

    #[test]
    fn homogeneous_optimum() {
        let c = cluster(10_000, &[(1000, 1.0, 1.0)]);
        let (alloc, point) = optimal_allocation(&c, RuntimeModel::PerTask).unwrap();
        let w = w_oracle(-(-2.0f64).exp());
        let expected_load = 10_000.0 / (1000.0 * (1.0 + 1.0 / w));
        assert_relative_eq!(alloc.loads_real[0], expected_load, max_relative = 1e-12);
        assert!((alloc.loads_real[0] - 14.66).abs() < 5e-3);
        assert_eq!(alloc.loads_int[0], 15);
        assert_relative_eq!(point.t_star, -w / 1000.0, max_relative = 1e-12);
        assert_relative_eq!(point.t_star, 3.14619e-3, max_relative = 1e-5);
    }

    #[test]
    fn symmetric_groups_get_identical_loads() {
        let c = cluster(10_000, &[(100, 1.0, 1.0), (100, 1.0, 1.0)]);
        let (alloc, _) = optimal_allocation(&c, RuntimeModel::PerTask).unwrap();
        assert_eq!(alloc.loads_real[0], alloc.loads_real[1]);
    }

    fn check_optimum(c: &ClusterSpec<f64>) {
        let (alloc, point) = optimal_allocation(c, RuntimeModel::PerTask).unwrap();
        let k = c.k as f64;
        let budget: f64 = point
            .r_star
            .iter()
            .zip(&alloc.loads_real)
            .map(|(r, l)| r * l)
            .sum();
        assert!(((budget - k) / k).abs() < 1e-9);
        let lat: Vec<f64> = alloc
            .loads_real
            .iter()
            .zip(&point.xi_star)
            .map(|(l, x)| l * x)
            .collect();
        for v in &lat {
            assert!(((v - lat[0]) / lat[0]).abs() < 1e-9);
        }
        let n: f64 = c
            .groups
            .iter()
            .zip(&alloc.loads_real)
            .map(|(g, l)| g.workers as f64 * l)
            .sum();
        assert_relative_eq!(alloc.n_real, n, max_relative = 1e-14);
        let f = objective_f(&point.r_star, c).unwrap();
        assert!(((f - point.t_star) / point.t_star).abs() < 1e-9);
        // equalised latency in per-task units is T*
        assert!(((lat[0] / k - point.t_star) / point.t_star).abs() < 1e-9);
    }

    #[test]
    fn optimum_identities() {
        check_optimum(&cluster(
            10_000,
            &[(1000, 2.0, 1.0), (2000, 1.0, 1.0), (3000, 0.5, 1.0)],
        ));
        check_optimum(&cluster(
            100_000,
            &[(300, 1.0, 1.0), (300, 4.0, 4.0), (400, 8.0, 12.0)],
        ));
        check_optimum(&cluster(
            1_000_000,
            &[
                (300, 16.0, 1.0),
                (400, 12.0, 1.0),
                (500, 8.0, 1.0),
                (600, 4.0, 1.0),
                (700, 1.0, 1.0),
            ],
        ));
    }

    #[test]
    fn perturbing_a_load_increases_the_max_latency() {
        let c = cluster(
            100_000,
            &[(300, 4.0, 1.0), (600, 0.5, 1.0), (200, 2.0, 2.0)],
        );
        let (alloc, point) = optimal_allocation(&c, RuntimeModel::PerTask).unwrap();
        let k = c.k as f64;
        let max_lat = |loads: &[f64]| -> f64 {
            loads
                .iter()
                .zip(&point.xi_star)
                .map(|(l, x)| l * x / k)
                .fold(f64::MIN, f64::max)
        };
        let base = max_lat(&alloc.loads_real);
        for a in 0..3 {
            for b in 0..3 {
                if a == b {
                    continue;
                }
                for sign in [-1.0, 1.0] {
                    let mut loads = alloc.loads_real.clone();
                    loads[a] *= 1.0 + sign * 0.01;
                    let rest: f64 = (0..3)
                        .filter(|&i| i != b)
                        .map(|i| point.r_star[i] * loads[i])
                        .sum();
                    loads[b] = (k - rest) / point.r_star[b];
                    assert!(max_lat(&loads) > base);
                }
            }
        }
    }

    #[test]
    fn global_optimality_and_convexity_random() {
        let c = cluster(10_000, &[(300, 4.0, 1.0), (600, 0.5, 1.0), (100, 2.0, 3.0)]);
        let (_, point) = optimal_allocation(&c, RuntimeModel::PerTask).unwrap();
        let fstar = objective_f(&point.r_star, &c).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let sample = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            c.groups
                .iter()
                .map(|g| g.workers as f64 * rng.random_range(1e-9..1.0 - 1e-9))
                .collect()
        };
        for _ in 0..10_000 {
            let r = sample(&mut rng);
            assert!(objective_f(&r, &c).unwrap() >= fstar);
        }
        for _ in 0..1000 {
            let (a, b) = (sample(&mut rng), sample(&mut rng));
            let t: f64 = rng.random();
            let m: Vec<f64> = a
                .iter()
                .zip(&b)
                .map(|(x, y)| t * x + (1.0 - t) * y)
                .collect();
            let lhs = objective_f(&m, &c).unwrap();
            let rhs = t * objective_f(&a, &c).unwrap() + (1.0 - t) * objective_f(&b, &c).unwrap();
            assert!(lhs <= rhs + 1e-12);
        }
    }

    #[test]
    fn concavity_of_group_term() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..2000 {
            let n = rng.random_range(2.0..5000.0f64);
            let mu = rng.random_range(0.01..50.0f64);
            let alpha = rng.random_range(0.01..10.0f64);
            let h = |x: f64| x / (alpha + (n / (n - x)).ln() / mu);
            let a = rng.random_range(0.0..n * 0.999);
            let b = rng.random_range(0.0..n * 0.999);
            assert!(h(0.5 * (a + b)) >= 0.5 * (h(a) + h(b)) - 1e-9 * h(0.5 * (a + b)).abs());
        }
    }

    #[test]
    fn identical_groups_reduce_to_one() {
        let split = cluster(50_000, &[(100, 2.0, 0.5), (250, 2.0, 0.5), (650, 2.0, 0.5)]);
        let merged = cluster(50_000, &[(1000, 2.0, 0.5)]);
        let (a, p) = optimal_allocation(&split, RuntimeModel::PerTask).unwrap();
        let (b, q) = optimal_allocation(&merged, RuntimeModel::PerTask).unwrap();
        for l in &a.loads_real {
            assert_relative_eq!(*l, b.loads_real[0], max_relative = 1e-12);
        }
        assert_relative_eq!(p.t_star, q.t_star, max_relative = 1e-12);
    }

    #[test]
    fn per_row_duality() {
        let c = cluster(
            100_000,
            &[(750, 1.0, 1.0), (750, 4.0, 4.0), (1000, 8.0, 12.0)],
        );
        let (a, p) = optimal_allocation(&c, RuntimeModel::PerTask).unwrap();
        let (b, q) = optimal_allocation(&c, RuntimeModel::PerRow).unwrap();
        assert_eq!(p.r_star, q.r_star);
        assert_eq!(a.loads_real, b.loads_real);
        assert_eq!(q.t_star, 100_000.0 * p.t_star);
        assert_eq!(q.model, RuntimeModel::PerRow);
    }

    #[test]
    fn t_star_scales_inversely_with_n() {
        let base = cluster(
            10_000,
            &[(1000, 2.0, 1.0), (2000, 1.0, 1.0), (3000, 0.5, 1.0)],
        );
        let t1 = min_latency_bound(&base, RuntimeModel::PerTask).unwrap();
        let t10 =
            min_latency_bound(&base.with_scaled_workers(10.0), RuntimeModel::PerTask).unwrap();
        assert_relative_eq!(6000.0 * t1, 60_000.0 * t10, max_relative = 1e-12);
    }

    #[test]
    fn rate_is_not_monotone_in_second_group_rate() {
        let rate = |mu2: f64| {
            let c = cluster(10_000, &[(100, 1.0, 1.0), (100, mu2, 1.0)]);
            let (a, _) = optimal_allocation(&c, RuntimeModel::PerTask).unwrap();
            a.rate(c.k)
        };
        let grid: Vec<f64> = (0..60)
            .map(|i| 10f64.powf(-3.0 + i as f64 * 0.08))
            .collect();
        let rates: Vec<f64> = grid.iter().map(|&m| rate(m)).collect();
        assert!(rates.windows(2).any(|w| w[1] < w[0]));
        assert!(rates.windows(2).any(|w| w[1] > w[0]));
    }

    #[test]
    fn uniform_allocations() {
        let c = cluster(10_000, &[(300, 4.0, 1.0), (600, 0.5, 1.0)]);
        let unc = uniform_allocation_fixed_n(&c, 10_000).unwrap();
        assert_relative_eq!(unc.loads_real[0], 10_000.0 / 900.0, max_relative = 1e-15);
        assert_relative_eq!(unc.required_finishers.unwrap(), 900.0, max_relative = 1e-15);
        let half = uniform_allocation_fixed_n(&c, 20_000).unwrap();
        assert_relative_eq!(half.loads_real[1], 20_000.0 / 900.0, max_relative = 1e-15);
        assert_relative_eq!(half.rate(c.k), 0.5, max_relative = 1e-15);
        assert!(matches!(
            uniform_allocation_fixed_n(&c, 9_999),
            Err(Error::InvalidRate { .. })
        ));

        let (opt, _) = optimal_allocation(&c, RuntimeModel::PerTask).unwrap();
        let n_star = opt.n_real.round() as u64;
        let same_n = uniform_allocation_fixed_n(&c, n_star).unwrap();
        assert_eq!(same_n.n_real, n_star as f64);
        assert_ne!(same_n.loads_real, opt.loads_real);

        let r = uniform_allocation_with_rate(&c, 0.52).unwrap();
        assert_eq!(r.n_real, (10_000.0f64 / 0.52).round());
        assert!(uniform_allocation_with_rate(&c, 0.0).is_err());
    }

    #[test]
    fn fixed_r_single_group() {
        let c = cluster(1000, &[(500, 2.0, 1.0)]);
        let (a, r) = fixed_r_allocation(&c, 100).unwrap();
        assert_relative_eq!(r[0], 100.0, max_relative = 1e-12);
        assert_eq!(a.loads_real, vec![10.0]);
    }

    /// Bisection oracle on the monotone balance, written against the raw
    /// formula rather than `fixed_r_balance`.
    fn balance_oracle(n: &[f64], mu: &[f64], r: f64) -> Vec<f64> {
        let lhs = |r1: f64| -> f64 {
            r1 + (1..n.len())
                .map(|j| n[j] * (1.0 - (1.0 - r1 / n[0]).powf(mu[j] / mu[0])))
                .sum::<f64>()
        };
        let (mut lo, mut hi) = (0.0, n[0]);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if lhs(mid) < r {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let r1 = 0.5 * (lo + hi);
        (0..n.len())
            .map(|j| {
                if j == 0 {
                    r1
                } else {
                    n[j] * (1.0 - (1.0 - r1 / n[0]).powf(mu[j] / mu[0]))
                }
            })
            .collect()
    }

    #[test]
    fn fixed_r_two_groups() {
        let c = cluster(10_000, &[(300, 4.0, 1.0), (600, 0.5, 1.0)]);
        let (a, r) = fixed_r_allocation(&c, 200).unwrap();
        let oracle = balance_oracle(&[300.0, 600.0], &[4.0, 0.5], 200.0);
        for j in 0..2 {
            assert!((r[j] - oracle[j]).abs() < 1e-9);
            assert!(r[j] > 0.0 && r[j] < c.groups[j].workers as f64);
            assert!(fixed_r_balance(&c, j, r[j], 200.0).abs() < 1e-9);
        }
        assert!((r.iter().sum::<f64>() - 200.0).abs() < 1e-9);
        assert_eq!(a.loads_real, vec![50.0, 50.0]);
        // equal group latencies: log(N/(N-r))/mu agree
        let t: Vec<f64> = (0..2)
            .map(|j| {
                (c.groups[j].workers as f64 / (c.groups[j].workers as f64 - r[j])).ln()
                    / c.groups[j].mu
            })
            .collect();
        assert!((t[0] - t[1]).abs() < 1e-12);
    }

    #[test]
    fn fixed_r_three_groups_solves_when_r_below_n() {
        // The balance sweeps (0, N) continuously, so any r < N is attainable.
        let c = cluster(10_000, &[(100, 3.0, 1.0), (200, 2.0, 1.0), (300, 1.0, 1.0)]);
        let (_, r) = fixed_r_allocation(&c, 200).unwrap();
        for (j, &rj) in r.iter().enumerate() {
            assert!(fixed_r_balance(&c, j, rj, 200.0).abs() < 1e-9);
        }
        assert!(matches!(
            fixed_r_allocation(&c, 600),
            Err(Error::NoSolution { .. })
        ));
        assert!(matches!(
            fixed_r_allocation(&c, 0),
            Err(Error::NoSolution { .. })
        ));
    }

    #[test]
    fn fixed_r_requires_common_shift() {
        let c = cluster(10_000, &[(100, 3.0, 1.0), (200, 2.0, 2.0)]);
        assert_eq!(
            fixed_r_allocation(&c, 50).unwrap_err(),
            Error::ShiftMismatch
        );
    }

    #[test]
    fn reisizadeh_single_group() {
        let c = cluster(100_000, &[(1000, 1.0, 1.0)]);
        let a = reisizadeh_allocation(&c).unwrap();
        let w = w_oracle(-(-2.0f64).exp()).abs();
        assert_relative_eq!(
            a.loads_real[0],
            1e5 * w / (1000.0 * (w - 1.0)),
            max_relative = 1e-12
        );
        let (b, _) = optimal_allocation(&c, RuntimeModel::PerRow).unwrap();
        assert_relative_eq!(a.loads_real[0], b.loads_real[0], max_relative = 1e-12);
    }

    #[test]
    fn reisizadeh_matches_optimal_on_heterogeneous_cluster() {
        let c = cluster(
            100_000,
            &[(750, 1.0, 1.0), (750, 4.0, 4.0), (1000, 8.0, 12.0)],
        );
        let a = reisizadeh_allocation(&c).unwrap();
        let (b, _) = optimal_allocation(&c, RuntimeModel::PerRow).unwrap();
        for (x, y) in a.loads_real.iter().zip(&b.loads_real) {
            assert_relative_eq!(*x, *y, max_relative = 1e-10);
        }
    }

    #[test]
    fn single_precision_optimum() {
        let c: ClusterSpec<f32> =
            ClusterSpec::new(10_000, vec![GroupSpec::new(1000, 1.0f32, 1.0f32)]).unwrap();
        let (_, p) = optimal_allocation(&c, RuntimeModel::PerTask).unwrap();
        assert!((p.t_star - 3.14619e-3).abs() < 1e-6);
    }
}
