//! Executes all `(method, seed)` cells of an experiment on a bounded
//! worker pool.
//!
//! Every cell is fully deterministic given its seed: the initial point is
//! drawn from `Rng::new(seed)`, sensing instance data from the seed through
//! the problem descriptor, and stochastic minibatch draws from a stream
//! derived from the seed. Methods sharing a seed therefore start from the
//! same point on the same problem instance, which is what makes per-seed
//! iteration counts comparable across methods.

use std::collections::VecDeque;
use std::num::NonZeroUsize;
use std::sync::mpsc;
use std::sync::Mutex;

use anyhow::{anyhow, Result};
use rbgm::bregman::ReferenceFunction;
use rbgm::numerics::Rng;
use rbgm::problems::{BuiltProblem, MinibatchOracle};
use rbgm::solvers::{self, IterationRecord, Method, RunReport, RunStatus, SolverConfig};

use crate::config::ExperimentConfig;

/// Seed offset separating the minibatch sampling stream from the
/// initial-point stream.
const ORACLE_STREAM_SALT: u64 = 0xB41D_5EED;

/// Execution options that come from CLI flags rather than the config file.
#[derive(Clone, Copy, Debug)]
pub struct RunOptions {
    /// Worker pool size; defaults to the number of available CPUs.
    pub jobs: Option<NonZeroUsize>,
    /// Zero out all wall-clock fields so outputs are byte-reproducible.
    pub no_timing: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            jobs: None,
            no_timing: false,
        }
    }
}

/// Outcome of one `(method, seed)` cell.
#[derive(Clone, Debug)]
pub struct CellResult {
    pub method_index: usize,
    pub method: Method,
    /// Display label; equals the method name, with a `#k` suffix when the
    /// config lists the same method several times.
    pub label: String,
    pub seed: u64,
    /// The run summary, or the error that prevented / aborted the run.
    pub outcome: Result<CellSummary, String>,
}

impl CellResult {
    pub fn converged(&self) -> bool {
        matches!(
            &self.outcome,
            Ok(summary) if summary.status == RunStatus::Converged
        )
    }
}

/// Everything a report needs about one finished run.
#[derive(Clone, Debug)]
pub struct CellSummary {
    pub status: RunStatus,
    pub final_f: f64,
    pub final_g: f64,
    pub final_grad_norm: Option<f64>,
    pub iterations: usize,
    pub wall_ns: u64,
    pub max_feasibility_residual: f64,
    /// Sensing only: relative recovery error of the outer product.
    pub recovery_error: Option<f64>,
    pub records: Vec<IterationRecord>,
}

impl CellSummary {
    pub fn final_objective(&self) -> f64 {
        self.final_f + self.final_g
    }

    fn from_report(report: RunReport, recovery_error: Option<f64>, no_timing: bool) -> Self {
        let mut summary = Self {
            status: report.status,
            final_f: report.final_f,
            final_g: report.final_g,
            final_grad_norm: report.final_grad_norm,
            iterations: report.iterations,
            wall_ns: report.wall_ns_total,
            max_feasibility_residual: report.max_feasibility_residual,
            recovery_error,
            records: report.records,
        };
        if no_timing {
            summary.wall_ns = 0;
            for record in &mut summary.records {
                record.wall_ns = 0;
            }
        }
        summary
    }
}

/// Labels for the method list; duplicates get `#index` suffixes so file
/// names and report rows stay unambiguous.
pub fn method_labels(methods: &[SolverConfig]) -> Vec<String> {
    methods
        .iter()
        .enumerate()
        .map(|(i, cfg)| {
            let duplicated = methods
                .iter()
                .enumerate()
                .any(|(j, other)| j != i && other.method == cfg.method);
            if duplicated {
                format!("{}#{}", cfg.method.name(), i)
            } else {
                cfg.method.name().to_string()
            }
        })
        .collect()
}

/// Run one `(method, seed)` cell to completion.
pub fn run_cell(config: &ExperimentConfig, method_index: usize, seed: u64) -> Result<CellSummary> {
    run_cell_with(config, method_index, seed, false)
}

fn run_cell_with(
    config: &ExperimentConfig,
    method_index: usize,
    seed: u64,
    no_timing: bool,
) -> Result<CellSummary> {
    let mut solver = config
        .methods
        .get(method_index)
        .ok_or_else(|| anyhow!("method index {method_index} out of range"))?
        .clone();
    solver.seed = seed;
    let built = config.problem.descriptor(seed).build()?;
    let manifold = built.manifold();
    let x0 = manifold.random_point(&mut Rng::new(seed))?;
    // Both benchmark objectives are relatively smooth with respect to the
    // quartic reference; it is the only reference the experiments use.
    let h = ReferenceFunction::quartic();

    let report = if solver.method.is_stochastic() {
        let BuiltProblem::Sensing(problem) = built else {
            return Err(anyhow!(
                "stochastic methods need the sensing problem's minibatch oracle"
            ));
        };
        let oracle_rng = Rng::new(seed ^ ORACLE_STREAM_SALT);
        let mut oracle = MinibatchOracle::sampled(problem, oracle_rng);
        let report = solvers::run_stochastic(&mut oracle, &h, &solver, &x0)?;
        let recovery = oracle
            .base()
            .recovery_error(report.final_point.ambient());
        return Ok(CellSummary::from_report(report, Some(recovery), no_timing));
    } else {
        solvers::run(built.oracle(), Some(&h), &solver, &x0)?
    };

    let recovery = match &built {
        BuiltProblem::Sensing(problem) => {
            Some(problem.recovery_error(report.final_point.ambient()))
        }
        BuiltProblem::Nepv(_) => None,
    };
    Ok(CellSummary::from_report(report, recovery, no_timing))
}

/// Run every `(method, seed)` cell of the experiment.
///
/// Cells execute on a bounded pool of worker threads; results are merged
/// in a stable order (method-major, then seed) regardless of completion
/// order. Individual cell failures do not abort the rest of the grid; they
/// surface as `Err` outcomes in the returned list.
pub fn run_experiment(config: &ExperimentConfig, options: &RunOptions) -> Vec<CellResult> {
    let labels = method_labels(&config.methods);
    let cells: Vec<(usize, usize, u64)> = config
        .methods
        .iter()
        .enumerate()
        .flat_map(|(mi, _)| {
            config
                .seeds
                .iter()
                .map(move |&seed| (mi, seed))
        })
        .enumerate()
        .map(|(flat, (mi, seed))| (flat, mi, seed))
        .collect();

    let workers = options
        .jobs
        .map(NonZeroUsize::get)
        .or_else(|| std::thread::available_parallelism().ok().map(Into::into))
        .unwrap_or(1)
        .min(cells.len().max(1));

    let queue: Mutex<VecDeque<(usize, usize, u64)>> = Mutex::new(cells.iter().copied().collect());
    let (sender, receiver) = mpsc::channel::<(usize, CellResult)>();

    std::thread::scope(|scope| {
        for _ in 0..workers {
            let sender = sender.clone();
            let queue = &queue;
            let labels = &labels;
            scope.spawn(move || loop {
                let Some((flat, method_index, seed)) = queue.lock().unwrap().pop_front() else {
                    break;
                };
                let outcome = run_cell_with(config, method_index, seed, options.no_timing)
                    .map_err(|e| format!("{e:#}"));
                let result = CellResult {
                    method_index,
                    method: config.methods[method_index].method,
                    label: labels[method_index].clone(),
                    seed,
                    outcome,
                };
                if sender.send((flat, result)).is_err() {
                    break;
                }
            });
        }
        drop(sender);

        let mut slots: Vec<Option<CellResult>> = vec![None; cells.len()];
        for (flat, result) in receiver {
            slots[flat] = Some(result);
        }
        slots
            .into_iter()
            .map(|slot| slot.expect("every queued cell reports a result"))
            .collect()
    })
}
