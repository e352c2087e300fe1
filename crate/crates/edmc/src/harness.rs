//! Monte Carlo orchestration: trials, sweeps, aggregation and result files.
//!
//! Trial `t` of sweep cell `k` uses seed `base ^ t ^ (k << 32)`. Trials may
//! run on several threads; results are collected in (cell, trial, solver)
//! order, so every file except the timing table is reproducible bit for bit.

use std::path::{Path, PathBuf};
use std::time::Instant;

use edmc_core::baselines::{mds_map, sstress_solve, SStressOptions};
use edmc_core::completion::{solve, IterationRecord, RefineStatus, Variant};
use edmc_core::geometry::{calibration_error, position_error, procrustes_align};
use edmc_core::observation::JITTER_16KHZ;
use edmc_core::{ObservedMatrix, PositionMatrix};
use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::config::{ExperimentConfig, ObservationConfig, ScenarioConfig, SolverId};
use crate::error::{AppError, AppResult};
use crate::io::{fmt_f64, write_positions, write_table};
use crate::scenario::{generate_with, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    N,
    Sigma,
    Missing,
    Jitter,
}

impl Axis {
    pub fn name(&self) -> &'static str {
        match self {
            Axis::N => "n",
            Axis::Sigma => "sigma",
            Axis::Missing => "missing",
            Axis::Jitter => "jitter",
        }
    }
}

/// One point of a sweep: the scenario and observation parameters to use and
/// whether each trial is repeated with synchronisation jitter.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub x: f64,
    pub scenario: ScenarioConfig,
    pub observation: ObservationConfig,
    /// Jitter half-width for a second, jittered run of the same trial.
    pub jitter: Option<f64>,
}

/// Cells of a sweep along `axis` with the configured values.
pub fn sweep_cells(cfg: &ExperimentConfig, axis: Axis) -> AppResult<Vec<Cell>> {
    let base = Cell {
        x: 0.0,
        scenario: cfg.scenario,
        observation: cfg.observation,
        jitter: None,
    };
    let cells = match axis {
        Axis::N => {
            if !cfg.scenario.kind.is_random() {
                return Err(AppError::Config("an N sweep needs a disc or cube scenario".into()));
            }
            cfg.sweep
                .n
                .iter()
                .map(|&n| {
                    let mut c = base.clone();
                    c.x = n as f64;
                    c.scenario.n = n;
                    c
                })
                .collect()
        }
        Axis::Sigma => cfg
            .sweep
            .sigma
            .iter()
            .map(|&s| {
                let mut c = base.clone();
                c.x = s;
                c.observation.varsigma = s;
                c
            })
            .collect(),
        Axis::Missing => cfg
            .sweep
            .missing
            .iter()
            .map(|&m| {
                let mut c = base.clone();
                c.x = m;
                c.observation.p = 1.0 - m;
                c
            })
            .collect(),
        Axis::Jitter => {
            let half = if cfg.observation.jitter > 0.0 { cfg.observation.jitter } else { JITTER_16KHZ };
            cfg.sweep
                .jitter
                .iter()
                .map(|&s| {
                    let mut c = base.clone();
                    c.x = s;
                    c.observation.varsigma = s;
                    c.observation.jitter = 0.0;
                    c.jitter = Some(half);
                    c
                })
                .collect()
        }
    };
    Ok(cells)
}

/// The configured scenario as a single cell (`x` is the number of
/// microphones).
pub fn single_cell(cfg: &ExperimentConfig) -> Cell {
    Cell {
        x: cfg.scenario.n as f64,
        scenario: cfg.scenario,
        observation: cfg.observation,
        jitter: None,
    }
}

pub fn trial_seed(base: u64, trial: usize, cell: usize) -> u64 {
    base ^ trial as u64 ^ ((cell as u64) << 32)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverRun {
    pub positions: PositionMatrix,
    pub completed: Option<DMatrix<f64>>,
    pub iterations: usize,
    pub status: &'static str,
    pub history: Vec<IterationRecord>,
}

fn status_name(s: RefineStatus) -> &'static str {
    match s {
        RefineStatus::Converged => "converged",
        RefineStatus::MaxIterations => "max-iterations",
        RefineStatus::LineSearchFailed => "line-search-failed",
    }
}

/// Run one solver. Input problems (disconnected graph, empty rows) map to
/// input errors; anything else that stops a solver is a solver failure.
pub fn run_solver(id: SolverId, obs: &ObservedMatrix, dim: usize, cfg: &ExperimentConfig, seed: u64) -> AppResult<SolverRun> {
    let classify = |e: edmc_core::Error| match e {
        edmc_core::Error::Degenerate { .. } => AppError::Solver(e.to_string()),
        other => AppError::Input(other),
    };
    let run = match id {
        SolverId::Mc | SolverId::Mc2 | SolverId::Emc => {
            let variant = match id {
                SolverId::Mc => Variant::Mc,
                SolverId::Mc2 => Variant::McCadzow,
                _ => Variant::Emc,
            };
            let out = solve(obs, dim, variant, &cfg.solver_options(seed)).map_err(classify)?;
            SolverRun {
                positions: out.positions,
                completed: Some(out.completed),
                iterations: out.diagnostics.history.len().saturating_sub(1),
                status: status_name(out.diagnostics.status),
                history: out.diagnostics.history,
            }
        }
        SolverId::MdsMap => {
            let out = mds_map(obs, dim).map_err(classify)?;
            SolverRun {
                positions: out.positions,
                completed: None,
                iterations: 0,
                status: if out.degenerate { "degenerate" } else { "converged" },
                history: Vec::new(),
            }
        }
        SolverId::SStress => {
            let opts = SStressOptions {
                weight_exponent: cfg.solver.sstress_weight_exponent,
                restarts: cfg.solver.sstress_restarts,
                seed,
                ..SStressOptions::default()
            };
            let out = sstress_solve(obs, dim, &opts).map_err(classify)?;
            SolverRun {
                positions: out.positions,
                completed: None,
                iterations: 0,
                status: "converged",
                history: Vec::new(),
            }
        }
    };
    if run.positions.as_matrix().iter().any(|v| !v.is_finite()) {
        return Err(AppError::Solver(format!("{id} produced non-finite positions")));
    }
    Ok(run)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub x: f64,
    pub trial: usize,
    pub seed: u64,
    /// Solver name, suffixed with `+jitter` for the jittered rerun.
    pub solver: String,
    pub calibration_error: f64,
    pub position_error: f64,
    pub iterations: usize,
    pub status: String,
    /// Wall-clock seconds; kept out of the reproducible tables.
    pub runtime_s: f64,
}

fn evaluate(truth: &PositionMatrix, obs: &ObservedMatrix, dim: usize, cfg: &ExperimentConfig, id: SolverId, seed: u64) -> (f64, f64, usize, String, f64) {
    let start = Instant::now();
    let run = run_solver(id, obs, dim, cfg, seed);
    let elapsed = start.elapsed().as_secs_f64();
    match run {
        Ok(r) => {
            let c = calibration_error(truth, &r.positions).unwrap_or(f64::NAN);
            let p = position_error(truth, &r.positions).unwrap_or(f64::NAN);
            (c, p, r.iterations, r.status.to_string(), elapsed)
        }
        Err(e) => (f64::NAN, f64::NAN, 0, format!("failed: {e}"), elapsed),
    }
}

/// All configured solvers on one seeded scenario instance.
pub fn run_trial(cfg: &ExperimentConfig, cell: &Cell, trial: usize, seed: u64) -> Vec<TrialRecord> {
    let mut variants: Vec<(ObservationConfig, &str)> = vec![(cell.observation, "")];
    if let Some(j) = cell.jitter {
        let mut o = cell.observation;
        o.jitter = j;
        variants.push((o, "+jitter"));
    }
    let mut out = Vec::with_capacity(variants.len() * cfg.solvers.len());
    for (obs_cfg, suffix) in variants {
        let scenario: Result<Scenario, AppError> = generate_with(&cell.scenario, &obs_cfg, cfg, seed);
        for &id in &cfg.solvers {
            let (c, p, iterations, status, runtime_s) = match &scenario {
                Ok(s) => evaluate(&s.truth, &s.observed, s.dim, cfg, id, seed),
                Err(e) => (f64::NAN, f64::NAN, 0, format!("failed: {e}"), 0.0),
            };
            out.push(TrialRecord {
                x: cell.x,
                trial,
                seed,
                solver: format!("{}{}", id.name(), suffix),
                calibration_error: c,
                position_error: p,
                iterations,
                status,
                runtime_s,
            });
        }
    }
    out
}

fn with_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> AppResult<T> {
    if workers == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| AppError::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// `cfg.trials` trials for every cell, in deterministic order.
pub fn run_cells(cfg: &ExperimentConfig, cells: &[Cell]) -> AppResult<Vec<TrialRecord>> {
    cfg.validate()?;
    let jobs: Vec<(usize, usize)> = (0..cells.len()).flat_map(|k| (0..cfg.trials).map(move |t| (k, t))).collect();
    let nested: Vec<Vec<TrialRecord>> = with_pool(cfg.workers, || {
        jobs.par_iter()
            .map(|&(k, t)| run_trial(cfg, &cells[k], t, trial_seed(cfg.seed, t, k)))
            .collect()
    })?;
    Ok(nested.into_iter().flatten().collect())
}

pub fn run_sweep(cfg: &ExperimentConfig, axis: Axis) -> AppResult<Vec<TrialRecord>> {
    run_cells(cfg, &sweep_cells(cfg, axis)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub x: f64,
    pub solver: String,
    pub trials: usize,
    pub failures: usize,
    pub calibration_mean: f64,
    pub calibration_std: f64,
    pub position_mean: f64,
    pub position_std: f64,
    pub iterations_mean: f64,
}

/// Sample mean and standard deviation (`n − 1`); zero spread for one value,
/// `NaN` for none.
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() == 1 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Mean and spread per (x, solver) over successful trials, in first-seen
/// order.
pub fn aggregate(records: &[TrialRecord]) -> Vec<AggregateRow> {
    let mut keys: Vec<(f64, &str)> = Vec::new();
    for r in records {
        if !keys.iter().any(|&(x, s)| x.to_bits() == r.x.to_bits() && s == r.solver) {
            keys.push((r.x, &r.solver));
        }
    }
    keys.into_iter()
        .map(|(x, solver)| {
            let rows: Vec<&TrialRecord> = records
                .iter()
                .filter(|r| r.x.to_bits() == x.to_bits() && r.solver == solver)
                .collect();
            let ok: Vec<&&TrialRecord> = rows.iter().filter(|r| r.calibration_error.is_finite()).collect();
            let calib: Vec<f64> = ok.iter().map(|r| r.calibration_error).collect();
            let pos: Vec<f64> = ok.iter().map(|r| r.position_error).collect();
            let iters: Vec<f64> = ok.iter().map(|r| r.iterations as f64).collect();
            let (calibration_mean, calibration_std) = mean_std(&calib);
            let (position_mean, position_std) = mean_std(&pos);
            AggregateRow {
                x,
                solver: solver.to_string(),
                trials: rows.len(),
                failures: rows.len() - ok.len(),
                calibration_mean,
                calibration_std,
                position_mean,
                position_std,
                iterations_mean: mean_std(&iters).0,
            }
        })
        .collect()
}

pub const TRIAL_HEADER: [&str; 8] = [
    "x",
    "trial",
    "seed",
    "solver",
    "calibration_error",
    "position_error",
    "iterations",
    "status",
];

pub const AGGREGATE_HEADER: [&str; 9] = [
    "x",
    "solver",
    "trials",
    "failures",
    "calibration_mean",
    "calibration_std",
    "position_mean",
    "position_std",
    "iterations_mean",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ResultFiles {
    pub trials: PathBuf,
    pub aggregate: PathBuf,
    pub plot: PathBuf,
    pub timing: PathBuf,
}

/// Write `{prefix}_trials.csv`, `{prefix}_aggregate.csv`, `{prefix}_plot.csv`
/// (one row per x, mean and std of both metrics per solver) and
/// `{prefix}_timing.csv` into `dir`.
pub fn emit_results(dir: &Path, prefix: &str, records: &[TrialRecord]) -> AppResult<ResultFiles> {
    let files = ResultFiles {
        trials: dir.join(format!("{prefix}_trials.csv")),
        aggregate: dir.join(format!("{prefix}_aggregate.csv")),
        plot: dir.join(format!("{prefix}_plot.csv")),
        timing: dir.join(format!("{prefix}_timing.csv")),
    };
    let trial_rows: Vec<Vec<String>> = records
        .iter()
        .map(|r| {
            vec![
                fmt_f64(r.x),
                r.trial.to_string(),
                r.seed.to_string(),
                r.solver.clone(),
                fmt_f64(r.calibration_error),
                fmt_f64(r.position_error),
                r.iterations.to_string(),
                r.status.clone(),
            ]
        })
        .collect();
    write_table(&files.trials, &TRIAL_HEADER, &trial_rows)?;

    let agg = aggregate(records);
    let agg_rows: Vec<Vec<String>> = agg
        .iter()
        .map(|a| {
            vec![
                fmt_f64(a.x),
                a.solver.clone(),
                a.trials.to_string(),
                a.failures.to_string(),
                fmt_f64(a.calibration_mean),
                fmt_f64(a.calibration_std),
                fmt_f64(a.position_mean),
                fmt_f64(a.position_std),
                fmt_f64(a.iterations_mean),
            ]
        })
        .collect();
    write_table(&files.aggregate, &AGGREGATE_HEADER, &agg_rows)?;

    let mut solvers: Vec<&str> = Vec::new();
    let mut xs: Vec<f64> = Vec::new();
    for a in &agg {
        if !solvers.contains(&a.solver.as_str()) {
            solvers.push(&a.solver);
        }
        if !xs.iter().any(|x| x.to_bits() == a.x.to_bits()) {
            xs.push(a.x);
        }
    }
    let mut header: Vec<String> = vec!["x".into()];
    for s in &solvers {
        for col in ["calibration_mean", "calibration_std", "position_mean", "position_std"] {
            header.push(format!("{s}_{col}"));
        }
    }
    let plot_rows: Vec<Vec<String>> = xs
        .iter()
        .map(|&x| {
            let mut row = vec![fmt_f64(x)];
            for s in &solvers {
                match agg.iter().find(|a| a.x.to_bits() == x.to_bits() && a.solver == *s) {
                    Some(a) => row.extend([a.calibration_mean, a.calibration_std, a.position_mean, a.position_std].map(fmt_f64)),
                    None => row.extend(std::iter::repeat_n("NaN".to_string(), 4)),
                }
            }
            row
        })
        .collect();
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    write_table(&files.plot, &header_refs, &plot_rows)?;

    let timing_rows: Vec<Vec<String>> = records
        .iter()
        .map(|r| vec![fmt_f64(r.x), r.trial.to_string(), r.solver.clone(), fmt_f64(r.runtime_s)])
        .collect();
    write_table(&files.timing, &["x", "trial", "solver", "runtime_s"], &timing_rows)?;
    Ok(files)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayoutEstimate {
    pub solver: SolverId,
    /// Estimate rigidly aligned to the ground truth.
    pub aligned: PositionMatrix,
    pub record: TrialRecord,
}

/// Run every configured solver once on a given partial matrix and score it
/// against the ground-truth layout.
pub fn run_real_layout(observed: &ObservedMatrix, truth: &PositionMatrix, cfg: &ExperimentConfig) -> AppResult<Vec<LayoutEstimate>> {
    cfg.validate()?;
    if observed.len() != truth.len() {
        return Err(AppError::Input(edmc_core::Error::DimensionMismatch {
            expected: (truth.len(), truth.len()),
            found: (observed.len(), observed.len()),
        }));
    }
    let mut out = Vec::with_capacity(cfg.solvers.len());
    for &id in &cfg.solvers {
        let start = Instant::now();
        let run = run_solver(id, observed, truth.dim(), cfg, cfg.seed)?;
        let runtime_s = start.elapsed().as_secs_f64();
        let aligned = procrustes_align(truth, &run.positions)?;
        out.push(LayoutEstimate {
            solver: id,
            record: TrialRecord {
                x: truth.len() as f64,
                trial: 0,
                seed: cfg.seed,
                solver: id.name().to_string(),
                calibration_error: calibration_error(truth, &run.positions)?,
                position_error: position_error(truth, &run.positions)?,
                iterations: run.iterations,
                status: run.status.to_string(),
                runtime_s,
            },
            aligned,
        });
    }
    Ok(out)
}

/// Result tables plus one aligned-positions CSV per solver.
pub fn emit_real_layout(dir: &Path, estimates: &[LayoutEstimate]) -> AppResult<ResultFiles> {
    for e in estimates {
        let name = e.solver.name().to_ascii_lowercase().replace('-', "_");
        write_positions(&dir.join(format!("real_layout_{name}_positions.csv")), &e.aligned)?;
    }
    let records: Vec<TrialRecord> = estimates.iter().map(|e| e.record.clone()).collect();
    emit_results(dir, "real_layout", &records)
}

/// Sub-problem on the first `k` microphones.
pub fn restrict(observed: &ObservedMatrix, truth: &PositionMatrix, k: usize) -> AppResult<(ObservedMatrix, PositionMatrix)> {
    if k == 0 || k > truth.len() {
        return Err(AppError::Config(format!("subset size {k} outside 1..={}", truth.len())));
    }
    let m = observed.to_nan_matrix().view((0, 0), (k, k)).into_owned();
    let x = truth.as_matrix().rows(0, k).into_owned();
    Ok((ObservedMatrix::from_nan_matrix(&m)?, PositionMatrix::new(x)?))
}
