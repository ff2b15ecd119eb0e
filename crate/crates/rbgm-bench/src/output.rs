//! Report assembly and file output.
//!
//! All files are written atomically (temp file in the target directory,
//! then rename), so a crashed or interrupted run never leaves truncated
//! CSV/JSON files behind — at worst a cell's files are missing entirely,
//! which the report marks as failed.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rbgm::solvers::{IterationRecord, RunStatus};
use serde::Serialize;

use crate::config::{ExperimentConfig, ProblemSpec};
use crate::reference::{ReferenceCell, FVAL_RTOL, TABLE1, TABLE2};
use crate::runner::CellResult;

/// Write `bytes` to `path` atomically.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("creating output directory {}", dir.display()))?;
    }
    let file_name = path
        .file_name()
        .and_then(|n| n.to_str())
        .context("output path has no file name")?;
    let tmp = path.with_file_name(format!(
        ".{file_name}.{}.tmp",
        std::process::id()
    ));
    std::fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, path)
        .with_context(|| format!("renaming {} into place", path.display()))?;
    Ok(())
}

/// Lowercase file-name-safe form of a method label (`P-RBGD#2` →
/// `p-rbgd-2`).
pub fn file_slug(label: &str) -> String {
    label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() {
                c.to_ascii_lowercase()
            } else {
                '-'
            }
        })
        .collect()
}

/// Render the per-iteration CSV body for one run.
pub fn render_csv(records: &[IterationRecord]) -> String {
    let mut out = String::from("t,F,grad_norm,v_norm,alpha,ls_trials,wall_ns\n");
    for r in records {
        let grad = r
            .grad_norm
            .map(|g| format!("{g}"))
            .unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.t,
            r.objective(),
            grad,
            r.direction_norm,
            r.alpha,
            r.linesearch_trials,
            r.wall_ns
        );
    }
    out
}

/// Reference table cell matching this problem, when one was published.
pub fn reference_for(problem: &ProblemSpec) -> Option<&'static ReferenceCell> {
    let ProblemSpec::Nepv { m, p, .. } = *problem else {
        return None;
    };
    TABLE1
        .iter()
        .chain(TABLE2.iter())
        .find(|cell| cell.m == m && cell.p == p)
}

#[derive(Debug, Serialize)]
pub struct ReferenceRowReport {
    pub fval: &'static str,
    pub grad: &'static str,
    pub iter: u64,
    pub time_s: &'static str,
}

/// One `(method, seed)` cell in the JSON report. Cells that failed to run
/// carry `failed = true` and the error text instead of result fields.
#[derive(Debug, Serialize)]
pub struct CellReport {
    pub method: String,
    pub label: String,
    pub seed: u64,
    pub failed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub status: Option<RunStatus>,
    pub converged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_f: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_g: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_objective: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_grad_norm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_ns: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_feasibility_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recovery_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv: Option<String>,
}

/// Cross-method summary row (first seed), mirroring the published tables'
/// `Fval, ||grad||, Iter, Time` columns.
#[derive(Debug, Serialize)]
pub struct MethodRow {
    pub method: String,
    pub label: String,
    pub seed: u64,
    pub failed: bool,
    pub converged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fval: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grad_norm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<ReferenceRowReport>,
    /// Whether `fval` is within the comparison tolerance of the published
    /// value; absent when there is no reference.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fval_within_tolerance: Option<bool>,
}

/// The machine-readable experiment report.
#[derive(Debug, Serialize)]
pub struct ComparisonReport {
    pub problem: ProblemSpec,
    pub seeds: Vec<u64>,
    pub fval_rtol: f64,
    pub cells: Vec<CellReport>,
    pub table: Vec<MethodRow>,
}

impl ComparisonReport {
    pub fn build(
        config: &ExperimentConfig,
        results: &[CellResult],
        csv_names: &[Option<String>],
    ) -> Self {
        let reference = reference_for(&config.problem);
        let cells: Vec<CellReport> = results
            .iter()
            .zip(csv_names.iter())
            .map(|(cell, csv)| match &cell.outcome {
                Ok(s) => CellReport {
                    method: cell.method.name().to_string(),
                    label: cell.label.clone(),
                    seed: cell.seed,
                    failed: false,
                    error: None,
                    status: Some(s.status),
                    converged: s.status == RunStatus::Converged,
                    final_f: Some(s.final_f),
                    final_g: Some(s.final_g),
                    final_objective: Some(s.final_objective()),
                    final_grad_norm: s.final_grad_norm,
                    iterations: Some(s.iterations),
                    wall_ns: Some(s.wall_ns),
                    max_feasibility_residual: Some(s.max_feasibility_residual),
                    recovery_error: s.recovery_error,
                    csv: csv.clone(),
                },
                Err(e) => CellReport {
                    method: cell.method.name().to_string(),
                    label: cell.label.clone(),
                    seed: cell.seed,
                    failed: true,
                    error: Some(e.clone()),
                    status: None,
                    converged: false,
                    final_f: None,
                    final_g: None,
                    final_objective: None,
                    final_grad_norm: None,
                    iterations: None,
                    wall_ns: None,
                    max_feasibility_residual: None,
                    recovery_error: None,
                    csv: csv.clone(),
                },
            })
            .collect();

        // One row per method, reporting its first configured seed.
        let first_seed = config.seeds.first().copied().unwrap_or_default();
        let table: Vec<MethodRow> = config
            .methods
            .iter()
            .enumerate()
            .filter_map(|(mi, _)| {
                results
                    .iter()
                    .find(|c| c.method_index == mi && c.seed == first_seed)
            })
            .map(|cell| {
                let ref_row = reference.and_then(|r| r.row(cell.method));
                match &cell.outcome {
                    Ok(s) => {
                        let fval = s.final_objective();
                        let matches = ref_row.map(|r| {
                            let published = r.fval_parsed();
                            (fval - published).abs() <= FVAL_RTOL * published.abs()
                        });
                        MethodRow {
                            method: cell.method.name().to_string(),
                            label: cell.label.clone(),
                            seed: cell.seed,
                            failed: false,
                            converged: s.status == RunStatus::Converged,
                            fval: Some(fval),
                            grad_norm: s.final_grad_norm,
                            iterations: Some(s.iterations),
                            time_s: Some(s.wall_ns as f64 / 1e9),
                            reference: ref_row.map(|r| ReferenceRowReport {
                                fval: r.fval,
                                grad: r.grad,
                                iter: r.iter,
                                time_s: r.time_s,
                            }),
                            fval_within_tolerance: matches,
                        }
                    }
                    Err(_) => MethodRow {
                        method: cell.method.name().to_string(),
                        label: cell.label.clone(),
                        seed: cell.seed,
                        failed: true,
                        converged: false,
                        fval: None,
                        grad_norm: None,
                        iterations: None,
                        time_s: None,
                        reference: ref_row.map(|r| ReferenceRowReport {
                            fval: r.fval,
                            grad: r.grad,
                            iter: r.iter,
                            time_s: r.time_s,
                        }),
                        fval_within_tolerance: ref_row.map(|_| false),
                    },
                }
            })
            .collect();

        Self {
            problem: config.problem.clone(),
            seeds: config.seeds.clone(),
            fval_rtol: FVAL_RTOL,
            cells,
            table,
        }
    }

    /// Render the human-readable summary table.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let problem = match &self.problem {
            ProblemSpec::Nepv { m, p, beta } => {
                format!("nonlinear eigenvalue problem, m={m}, p={p}, beta={beta}")
            }
            ProblemSpec::Sensing { m, r, n, .. } => {
                format!("quadratic sensing, m={m}, r={r}, N={n}")
            }
        };
        let _ = writeln!(out, "Problem: {problem}");
        let _ = writeln!(out, "Seeds: {:?}", self.seeds);
        let has_reference = self.table.iter().any(|r| r.reference.is_some());
        let _ = writeln!(out);
        let _ = write!(
            out,
            "{:<10} {:>13} {:>12} {:>8} {:>10} {:<17}",
            "Solver", "Fval", "||grad||", "Iter", "Time(s)", "Status"
        );
        if has_reference {
            let _ = write!(out, " {:>13} {:>8}  {:<6}", "RefFval", "RefIter", "Fcheck");
        }
        let _ = writeln!(out);
        for row in &self.table {
            if row.failed {
                let _ = write!(
                    out,
                    "{:<10} {:>13} {:>12} {:>8} {:>10} {:<17}",
                    row.label, "-", "-", "-", "-", "failed"
                );
            } else {
                let status = if row.converged {
                    "Converged".to_string()
                } else {
                    format!("{:?}", self.status_of(&row.label))
                };
                let _ = write!(
                    out,
                    "{:<10} {:>13.4e} {:>12.4e} {:>8} {:>10.4} {:<17}",
                    row.label,
                    row.fval.unwrap_or(f64::NAN),
                    row.grad_norm.unwrap_or(f64::NAN),
                    row.iterations.unwrap_or_default(),
                    row.time_s.unwrap_or_default(),
                    status
                );
            }
            if let Some(reference) = &row.reference {
                let check = match row.fval_within_tolerance {
                    Some(true) => "PASS",
                    Some(false) => "FAIL",
                    None => "-",
                };
                let _ = write!(
                    out,
                    " {:>13} {:>8}  {:<6}",
                    reference.fval, reference.iter, check
                );
            } else if has_reference {
                let _ = write!(out, " {:>13} {:>8}  {:<6}", "-", "-", "-");
            }
            let _ = writeln!(out);
        }
        let failed_cells = self.cells.iter().filter(|c| c.failed).count();
        let converged = self.cells.iter().filter(|c| c.converged).count();
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "Cells converged: {}/{}{}",
            converged,
            self.cells.len(),
            if failed_cells > 0 {
                format!(" ({failed_cells} failed to run)")
            } else {
                String::new()
            }
        );
        out
    }

    fn status_of(&self, label: &str) -> RunStatus {
        self.cells
            .iter()
            .find(|c| c.label == label && c.status.is_some())
            .and_then(|c| c.status)
            .unwrap_or(RunStatus::NumericalError)
    }
}

/// Write per-run CSVs, the JSON report, and the text summary for one
/// experiment into `dir`. Returns the report and the number of cells that
/// could not be written or did not run.
pub fn write_outputs(
    config: &ExperimentConfig,
    results: &[CellResult],
    dir: &Path,
) -> Result<ComparisonReport> {
    let tag = config.problem.tag();
    let mut csv_names: Vec<Option<String>> = Vec::with_capacity(results.len());
    for cell in results {
        match &cell.outcome {
            Ok(summary) => {
                let name = format!(
                    "{tag}_{}_seed{}.csv",
                    file_slug(&cell.label),
                    cell.seed
                );
                atomic_write(&dir.join(&name), render_csv(&summary.records).as_bytes())?;
                csv_names.push(Some(name));
            }
            Err(_) => csv_names.push(None),
        }
    }
    let report = ComparisonReport::build(config, results, &csv_names);
    let json = serde_json::to_string_pretty(&report).context("serializing report")?;
    atomic_write(&dir.join("report.json"), json.as_bytes())?;
    atomic_write(&dir.join("summary.txt"), report.render_text().as_bytes())?;
    Ok(report)
}

/// Full path helpers used by tests.
pub fn report_path(dir: &Path) -> PathBuf {
    dir.join("report.json")
}
