//! Heterogeneous cluster description, allocations and validation.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::allocation::RuntimeModel;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Straggling rates at or above this value are outside the range in which the
/// shifted-exponential latency analysis is meaningful.
pub const RATE_VALIDITY_THRESHOLD: f64 = 750.0;

/// Smallest `alpha * mu` for which the optimal finisher fraction is resolvable
/// in double precision; below it `W_{-1}` collapses onto the branch point.
pub const MIN_SHIFTED_RATE: f64 = 1e-12;

/// One group of identical workers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupSpec<T> {
    /// Number of workers `N_j`.
    pub workers: u64,
    /// Straggling rate `mu_(j)`.
    pub mu: T,
    /// Shift parameter `alpha_(j)`.
    pub alpha: T,
}

impl<T: Scalar> GroupSpec<T> {
    pub fn new(workers: u64, mu: T, alpha: T) -> Self {
        Self { workers, mu, alpha }
    }

    pub fn size(&self) -> T {
        T::count(self.workers)
    }

    /// `alpha * mu + 1`, the exponent in the Lambert argument `-e^{-(alpha*mu + 1)}`.
    pub fn lambert_exponent(&self) -> T {
        self.alpha * self.mu + T::one()
    }
}

/// Ordered list of worker groups together with the row count `k` of the task.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterSpec<T> {
    pub k: u64,
    pub groups: Vec<GroupSpec<T>>,
}

impl<T: Scalar> ClusterSpec<T> {
    /// Builds a cluster, rejecting it if any error-class violation is present.
    /// Warnings are accepted; inspect them with [`validate_cluster`].
    pub fn new(k: u64, groups: Vec<GroupSpec<T>>) -> Result<Self> {
        let spec = Self { k, groups };
        spec.ensure_valid()?;
        Ok(spec)
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let errors: Vec<_> = validate_cluster(self)
            .into_iter()
            .filter(|v| v.severity() == Severity::Error)
            .collect();
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidCluster(errors))
        }
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn total_workers(&self) -> u64 {
        self.groups.iter().map(|g| g.workers).sum()
    }

    pub fn rows(&self) -> T {
        T::count(self.k)
    }

    /// Copy with every group size multiplied by `factor`, rounded to the
    /// nearest integer and kept at least 1.
    pub fn with_scaled_workers(&self, factor: f64) -> Self {
        let groups = self
            .groups
            .iter()
            .map(|g| GroupSpec {
                workers: ((g.workers as f64 * factor).round() as u64).max(1),
                ..g.clone()
            })
            .collect();
        Self { k: self.k, groups }
    }

    /// Copy with every straggling rate multiplied by `q`; shifts are unchanged.
    pub fn with_scaled_rates(&self, q: T) -> Self {
        let groups = self
            .groups
            .iter()
            .map(|g| GroupSpec {
                mu: g.mu * q,
                ..g.clone()
            })
            .collect();
        Self { k: self.k, groups }
    }
}

impl<T: Scalar + Serialize> ClusterSpec<T> {
    pub fn to_config_text(&self) -> String {
        toml::to_string(self).expect("cluster fields are always TOML-representable")
    }
}

impl<T: Scalar + for<'de> Deserialize<'de>> ClusterSpec<T> {
    /// Parses the TOML form produced by [`ClusterSpec::to_config_text`].
    /// The result is not validated.
    pub fn from_config_text(text: &str) -> std::result::Result<Self, toml::de::Error> {
        toml::from_str(text)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ViolationCode {
    NoGroups,
    ZeroRows,
    NoWorkers,
    NonFiniteParameter,
    NonPositiveRate,
    NonPositiveShift,
    /// `mu >= 750`; the model is not meaningful there (warning).
    RateAboveModelValidityThreshold,
    /// `-e^{-(alpha*mu + 1)}` underflows to zero.
    ShiftedRateUnderflow,
    /// `alpha * mu` too small for the optimal point to be resolved.
    RateBelowPrecisionFloor,
}

impl ViolationCode {
    pub fn severity(self) -> Severity {
        match self {
            ViolationCode::RateAboveModelValidityThreshold => Severity::Warning,
            _ => Severity::Error,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    /// Offending group, `None` for cluster-level violations.
    pub group: Option<usize>,
    pub code: ViolationCode,
}

impl Violation {
    pub fn severity(&self) -> Severity {
        self.code.severity()
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity() {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        match self.group {
            Some(g) => write!(f, "{sev}: group {g}: {:?}", self.code),
            None => write!(f, "{sev}: {:?}", self.code),
        }
    }
}

/// Every invariant violation of the cluster, in group order. Empty iff valid.
pub fn validate_cluster<T: Scalar>(spec: &ClusterSpec<T>) -> Vec<Violation> {
    let mut out = Vec::new();
    let cluster = |code| Violation { group: None, code };
    if spec.groups.is_empty() {
        out.push(cluster(ViolationCode::NoGroups));
    }
    if spec.k == 0 {
        out.push(cluster(ViolationCode::ZeroRows));
    }
    for (j, g) in spec.groups.iter().enumerate() {
        let mut push = |code| {
            out.push(Violation {
                group: Some(j),
                code,
            })
        };
        if g.workers == 0 {
            push(ViolationCode::NoWorkers);
        }
        if !g.mu.is_finite() || !g.alpha.is_finite() {
            push(ViolationCode::NonFiniteParameter);
            continue;
        }
        let mut basic_ok = true;
        if g.mu <= T::zero() {
            push(ViolationCode::NonPositiveRate);
            basic_ok = false;
        }
        if g.alpha <= T::zero() {
            push(ViolationCode::NonPositiveShift);
            basic_ok = false;
        }
        if !basic_ok {
            continue;
        }
        if g.mu >= T::lit(RATE_VALIDITY_THRESHOLD) {
            push(ViolationCode::RateAboveModelValidityThreshold);
        }
        let a = g.lambert_exponent();
        if (-a).exp() == T::zero() || !a.is_finite() {
            push(ViolationCode::ShiftedRateUnderflow);
        }
        if g.alpha * g.mu < T::lit(MIN_SHIFTED_RATE) {
            push(ViolationCode::RateBelowPrecisionFloor);
        }
    }
    out
}

/// Which scheme produced an [`Allocation`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    Optimal,
    UniformFixedN,
    FixedR,
    ReisizadehStyle,
    Custom,
}

/// Whether simulations use the ceil-rounded integer loads or the real ones.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum LoadRounding {
    #[default]
    Integer,
    Real,
}

/// Per-group coded-row loads and the implied code length.
#[derive(Clone, Debug, PartialEq)]
pub struct Allocation<T> {
    pub scheme: Scheme,
    pub loads_real: Vec<T>,
    /// `ceil(loads_real[j])`.
    pub loads_int: Vec<u64>,
    /// `Σ_j N_j · loads_real[j]`.
    pub n_real: T,
    pub n_int: u64,
    /// Per-group finisher counts `r_j`, for schemes that determine them.
    pub finishers: Option<Vec<T>>,
    /// Total finisher count `r` implied by the scheme, when known.
    pub required_finishers: Option<T>,
}

impl<T: Scalar> Allocation<T> {
    /// Builds an allocation from real per-group loads, deriving the rounded
    /// loads and code lengths.
    pub fn from_real_loads(
        cluster: &ClusterSpec<T>,
        scheme: Scheme,
        loads_real: Vec<T>,
    ) -> Result<Self> {
        if loads_real.len() != cluster.num_groups() {
            return Err(Error::ShapeMismatch {
                expected: cluster.num_groups(),
                got: loads_real.len(),
            });
        }
        if let Some(bad) = loads_real
            .iter()
            .find(|l| !(**l > T::zero()) || !l.is_finite())
        {
            return Err(Error::Domain {
                what: "allocation load",
                value: bad.to_f64_lossy(),
                domain: "(0, inf)",
            });
        }
        let loads_int: Vec<u64> = loads_real
            .iter()
            .map(|l| l.ceil().to_u64().expect("finite positive load fits in u64"))
            .collect();
        let n_real = cluster
            .groups
            .iter()
            .zip(&loads_real)
            .map(|(g, &l)| g.size() * l)
            .sum();
        let n_int = cluster
            .groups
            .iter()
            .zip(&loads_int)
            .map(|(g, &l)| g.workers * l)
            .sum();
        Ok(Self {
            scheme,
            loads_real,
            loads_int,
            n_real,
            n_int,
            finishers: None,
            required_finishers: None,
        })
    }

    /// Code rate `k / n` on the real code length.
    pub fn rate(&self, k: u64) -> T {
        T::count(k) / self.n_real
    }

    /// Loads as used by simulation under the given rounding mode.
    pub fn loads(&self, rounding: LoadRounding) -> Vec<T> {
        match rounding {
            LoadRounding::Real => self.loads_real.clone(),
            LoadRounding::Integer => self.loads_int.iter().map(|&l| T::count(l)).collect(),
        }
    }
}

/// The minimiser of the latency lower bound.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimalPoint<T> {
    pub model: RuntimeModel,
    /// Optimal finisher counts `r_j*` (real, in `(0, N_j)`).
    pub r_star: Vec<T>,
    /// `r_j* / N_j`.
    pub q_star: Vec<T>,
    /// `xi(r_j*)`, the per-unit-load latency factor at the optimum.
    pub xi_star: Vec<T>,
    /// Latency bound `T*` (per-task model) or `T_b*` (per-row model).
    pub t_star: T,
}

/// Monte Carlo estimate of the overall expected latency.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LatencyEstimate<T> {
    pub mean: T,
    pub std_error: T,
    pub trials: u64,
    pub seed: u64,
}
