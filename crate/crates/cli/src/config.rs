//! Experiment configuration files.
//!
//! ```toml
//! k = 100000
//! model = "per-task"
//! trials = 10000
//! seed = 1
//!
//! [[groups]]
//! workers = 300
//! mu = 4.0
//! alpha = 1.0
//!
//! [[schemes]]
//! kind = "optimal"
//!
//! [[schemes]]
//! kind = "uniform"
//! rate = 0.52
//!
//! [sweep]
//! variable = "n-scale"
//! grid = [0.1, 1.0, 10.0]
//! ```

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use hetalloc::{validate_cluster, ClusterSpec64, GroupSpec64, RuntimeModel, Severity};
use serde::Deserialize;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub k: u64,
    #[serde(default)]
    pub model: RuntimeModel,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default)]
    pub seed: u64,
    pub groups: Vec<GroupSpec64>,
    #[serde(default = "default_schemes")]
    pub schemes: Vec<SchemeSpec>,
    pub sweep: Option<Sweep>,
    /// CSV destination; stdout when absent.
    pub output: Option<PathBuf>,
    /// Simulate with the real-valued loads instead of their ceilings.
    #[serde(default)]
    pub real_loads: bool,
    /// Worker threads for the simulator; all cores when absent.
    pub threads: Option<usize>,
}

fn default_trials() -> u64 {
    10_000
}

fn default_schemes() -> Vec<SchemeSpec> {
    vec![SchemeSpec::Optimal]
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SchemeSpec {
    Optimal,
    /// Uniform loads at a code rate `k/n` or an explicit code length `n`.
    Uniform {
        rate: Option<f64>,
        n: Option<u64>,
    },
    /// Uniform loads with the code length of the optimal scheme.
    UniformNStar,
    FixedR {
        r: u64,
    },
    Reisizadeh,
}

impl SchemeSpec {
    pub fn label(&self) -> String {
        match self {
            SchemeSpec::Optimal => "optimal".into(),
            SchemeSpec::Uniform {
                rate: Some(rate), ..
            } => format!("uniform-rate-{rate}"),
            SchemeSpec::Uniform { n: Some(n), .. } => format!("uniform-n-{n}"),
            SchemeSpec::Uniform { .. } => "uniform".into(),
            SchemeSpec::UniformNStar => "uniform-n-star".into(),
            SchemeSpec::FixedR { r } => format!("fixed-r-{r}"),
            SchemeSpec::Reisizadeh => "reisizadeh".into(),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub variable: SweepVariable,
    pub grid: Vec<f64>,
    /// Restrict an `n-scale` or `mu-scale` sweep to this group (0-based).
    pub group: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepVariable {
    /// Multiplies every group size.
    NScale,
    /// Multiplies every straggling rate, leaving shifts alone.
    MuScale,
    /// Code rate of the uniform scheme.
    Rate,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> anyhow::Result<()> {
        if self.schemes.is_empty() {
            bail!("schemes must not be empty");
        }
        if self.trials == 0 {
            bail!("trials must be positive");
        }
        for s in &self.schemes {
            match s {
                SchemeSpec::Uniform {
                    rate: None,
                    n: None,
                }
                | SchemeSpec::Uniform {
                    rate: Some(_),
                    n: Some(_),
                } => {
                    bail!("uniform scheme needs exactly one of `rate` or `n`")
                }
                _ => {}
            }
        }
        if let Some(sweep) = &self.sweep {
            if sweep.grid.is_empty() {
                bail!("sweep grid must not be empty");
            }
            if let Some(v) = sweep.grid.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
                bail!("sweep grid values must be positive and finite, got {v}");
            }
            if sweep.variable == SweepVariable::Rate && sweep.grid.iter().any(|&v| v > 1.0) {
                bail!("code rates must lie in (0, 1]");
            }
            match sweep.group {
                Some(_) if sweep.variable == SweepVariable::Rate => {
                    bail!("`group` applies only to n-scale and mu-scale sweeps")
                }
                Some(g) if g >= self.groups.len() => {
                    bail!(
                        "sweep group {g} out of range for {} groups",
                        self.groups.len()
                    )
                }
                _ => {}
            }
        }
        let errors: Vec<String> = validate_cluster(&self.cluster())
            .into_iter()
            .filter(|v| v.severity() == Severity::Error)
            .map(|v| v.to_string())
            .collect();
        if !errors.is_empty() {
            bail!("invalid cluster:\n  {}", errors.join("\n  "));
        }
        Ok(())
    }

    /// Cluster description without validation (already done by `parse`).
    pub fn cluster(&self) -> ClusterSpec64 {
        ClusterSpec64 {
            k: self.k,
            groups: self.groups.clone(),
        }
    }
}
