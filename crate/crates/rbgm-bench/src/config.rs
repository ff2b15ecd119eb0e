//! Experiment configuration: schema, parsing (TOML or JSON), validation.
//!
//! # Schema
//!
//! ```toml
//! output_dir = "out"          # where CSV/JSON/table files are written
//! seeds = [1, 2, 3]           # one run per (method, seed)
//!
//! [problem]
//! kind = "nepv"               # or "sensing"
//! m = 500                     # grid size (nepv) / ambient rows (sensing)
//! p = 50                      # nepv: number of columns
//! # beta = 10.0               # nepv: Coulomb weight (default 10)
//! # r = 10                    # sensing: rank
//! # n = 100                   # sensing: number of measurements (default 100)
//! # manifold = "fixed-rank"   # sensing: or "stiefel" (compact; required
//! #                           # by the stochastic methods)
//!
//! [[methods]]
//! method = "rsd"              # rsd | rsd-ada | r-rbgd | p-rbgd | p-rbgd-c
//!                             # | s-r-rbgd | s-p-rbgd
//! gamma = 0.0                 # Bregman smoothness coefficient (ignored by
//!                             # rsd / rsd-ada)
//! # alpha0 = 0.5, rho = 0.5, grad_tol = 1e-4, max_iters = 50000,
//! # tau = 1.0, batch_size = 10, fixed_alpha = 1e-3, seed = 0
//! ```
//!
//! A `.json` file with the same structure is accepted as well.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rbgm::manifolds::Manifold;
use rbgm::problems::ProblemDescriptor;
use rbgm::solvers::SolverConfig;
use serde::{Deserialize, Serialize};

fn default_beta() -> f64 {
    10.0
}
fn default_samples() -> usize {
    100
}

/// Which geometry a sensing run optimizes over. The benchmark problem lives
/// on fixed-rank matrices; the Stiefel option restricts the same objective
/// to a compact manifold, which is what the stochastic methods require.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SensingManifold {
    #[default]
    FixedRank,
    Stiefel,
}

/// The benchmark problem to run, as written in config files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    /// Nonlinear eigenvalue problem on the Stiefel manifold St(m, p).
    Nepv {
        m: usize,
        p: usize,
        #[serde(default = "default_beta")]
        beta: f64,
    },
    /// Low-rank quadratic sensing. Instance data are generated from the
    /// run seed, so different seeds test different instances.
    Sensing {
        m: usize,
        r: usize,
        #[serde(default = "default_samples", alias = "N")]
        n: usize,
        #[serde(default)]
        manifold: SensingManifold,
    },
}

impl ProblemSpec {
    /// Problem instance descriptor for one run seed.
    pub fn descriptor(&self, seed: u64) -> ProblemDescriptor {
        match *self {
            ProblemSpec::Nepv { m, p, beta } => ProblemDescriptor::Nepv { m, p, beta },
            ProblemSpec::Sensing { m, r, n, manifold } => ProblemDescriptor::Sensing {
                m,
                r,
                n,
                seed,
                orthonormal: manifold == SensingManifold::Stiefel,
            },
        }
    }

    /// Manifold the solvers iterate on.
    pub fn manifold(&self) -> Manifold {
        match *self {
            ProblemSpec::Nepv { m, p, .. } => Manifold::Stiefel { rows: m, cols: p },
            ProblemSpec::Sensing { m, r, manifold, .. } => match manifold {
                SensingManifold::FixedRank => Manifold::FixedRank {
                    rows: m,
                    cols: r,
                    rank: r,
                },
                SensingManifold::Stiefel => Manifold::Stiefel { rows: m, cols: r },
            },
        }
    }

    /// Short tag used in file names, e.g. `nepv_m500_p50`.
    pub fn tag(&self) -> String {
        match *self {
            ProblemSpec::Nepv { m, p, .. } => format!("nepv_m{m}_p{p}"),
            ProblemSpec::Sensing { m, r, .. } => format!("sensing_m{m}_r{r}"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ProblemSpec::Nepv { m, p, beta } => {
                if p == 0 || m < p {
                    bail!("nepv requires m >= p >= 1, got m={m}, p={p}");
                }
                if !beta.is_finite() || beta < 0.0 {
                    bail!("nepv beta must be finite and >= 0, got {beta}");
                }
            }
            ProblemSpec::Sensing { m, r, n, .. } => {
                if r == 0 || m < r {
                    bail!("sensing requires m >= r >= 1, got m={m}, r={r}");
                }
                if n == 0 {
                    bail!("sensing requires at least one measurement");
                }
            }
        }
        Ok(())
    }
}

/// A full experiment: one problem, a method list, and the seeds to repeat
/// each method over.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub methods: Vec<SolverConfig>,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    /// Parse a config file; the format is chosen by extension (`.json` is
    /// JSON, everything else is TOML).
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let config: Self = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text)
                .with_context(|| format!("parsing JSON config {}", path.display()))?
        } else {
            toml::from_str(&text)
                .with_context(|| format!("parsing TOML config {}", path.display()))?
        };
        config.validate()?;
        Ok(config)
    }

    /// Check the whole experiment before any run starts.
    pub fn validate(&self) -> Result<()> {
        self.problem.validate()?;
        if self.methods.is_empty() {
            bail!("config lists no methods");
        }
        if self.seeds.is_empty() {
            bail!("config lists no seeds");
        }
        let manifold = self.problem.manifold();
        for method in &self.methods {
            method
                .validate()
                .with_context(|| format!("method {}", method.method.name()))?;
            if method.method.is_stochastic() {
                if !manifold.is_compact() {
                    bail!(
                        "method {} is stochastic and requires a compact manifold, \
                         but the configured problem runs on {}; for sensing set \
                         `manifold = \"stiefel\"` on the problem",
                        method.method.name(),
                        manifold.name()
                    );
                }
                if matches!(self.problem, ProblemSpec::Nepv { .. }) {
                    bail!(
                        "method {} is stochastic but the nonlinear eigenvalue \
                         problem has no minibatch oracle; use the sensing problem",
                        method.method.name()
                    );
                }
            }
        }
        Ok(())
    }
}
