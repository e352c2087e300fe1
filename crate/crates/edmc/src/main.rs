use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use edmc::config::{ExperimentConfig, ScenarioKind, SolverId};
use edmc::error::{AppError, AppResult};
use edmc::harness::{emit_real_layout, emit_results, restrict, run_cells, run_real_layout, run_solver, run_sweep, single_cell, Axis};
use edmc::io::{fmt_f64, read_coherence_curve, read_matrix, read_positions, write_bound_reports, write_diagnostics, write_matrix, write_positions, write_table};
use edmc::layouts::real_layout;
use edmc::scenario::generate;
use edmc_core::coherence::fit_distance;
use edmc_core::observation::SPEED_OF_SOUND;
use edmc_core::theory::{max_ratios_by_n, verify_bounds};
use edmc_core::ObservedMatrix;

#[derive(Parser)]
#[command(name = "edmc", version, about = "Microphone array calibration by Euclidean distance matrix completion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML experiment configuration; built-in presets when omitted.
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Comma-separated solver list, e.g. `E-MC2,MDS-MAP`.
    #[arg(long, value_delimiter = ',')]
    solvers: Option<Vec<String>>,
}

impl Common {
    fn load(&self) -> AppResult<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::preset(ScenarioKind::Disc),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(t) = self.trials {
            cfg.trials = t;
        }
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
        if let Some(d) = &self.output_dir {
            cfg.output_dir = d.clone();
        }
        if let Some(list) = &self.solvers {
            cfg.solvers = list.iter().map(|s| s.parse()).collect::<AppResult<_>>()?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisArg {
    N,
    Sigma,
    Missing,
    Jitter,
}

#[derive(Subcommand)]
enum Command {
    /// Generate one scenario instance: ground truth and observed matrix.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Trial index used to derive the instance seed.
        #[arg(long, default_value_t = 0)]
        trial: usize,
    },
    /// Recover positions from an observed squared-distance matrix (NaN = missing).
    Calibrate {
        #[command(flatten)]
        common: Common,
        #[arg(long, short)]
        input: PathBuf,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value = "E-MC2")]
        solver: String,
        /// The input holds plain distances instead of squared ones.
        #[arg(long)]
        plain: bool,
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long)]
        completed: Option<PathBuf>,
        #[arg(long)]
        diagnostics: Option<PathBuf>,
    },
    /// Monte Carlo sweep along one axis.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        axis: AxisArg,
        /// Override the axis values, comma separated.
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
    },
    /// Run the configured scenario without sweeping.
    Run {
        #[command(flatten)]
        common: Common,
    },
    /// Empirical check of the error-bound scalings.
    VerifyBounds {
        #[command(flatten)]
        common: Common,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Fit distances to coherence curves (CSV: omega, gamma per line).
    CoherenceFit {
        #[command(flatten)]
        common: Common,
        #[arg(long, short, num_args = 1.., required = true)]
        input: Vec<PathBuf>,
        #[arg(long)]
        speed_of_sound: Option<f64>,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Calibrate the bundled (or a given) layout from a partial matrix.
    RealLayout {
        #[command(flatten)]
        common: Common,
        /// Partial squared-distance matrix; synthesized from the configured
        /// scenario when omitted.
        #[arg(long, short)]
        input: Option<PathBuf>,
        #[arg(long)]
        plain: bool,
        /// Ground-truth positions; the bundled 11/12-mic layout by default.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Use only the first k microphones (e.g. 9 for the compact array).
        #[arg(long)]
        subset: Option<usize>,
    },
}

fn read_observed(path: &Path, plain: bool) -> AppResult<ObservedMatrix> {
    let mut m = read_matrix(path)?;
    if plain {
        m.iter_mut().for_each(|v| *v *= *v);
    }
    Ok(ObservedMatrix::from_nan_matrix(&m)?)
}

fn print_aggregate(records: &[edmc::TrialRecord]) {
    println!("x,solver,trials,failures,calibration_mean,position_mean");
    for a in edmc::aggregate(records) {
        println!(
            "{},{},{},{},{},{}",
            fmt_f64(a.x),
            a.solver,
            a.trials,
            a.failures,
            fmt_f64(a.calibration_mean),
            fmt_f64(a.position_mean)
        );
    }
}

fn run(cli: Cli) -> AppResult<()> {
    match cli.command {
        Command::Simulate { common, trial } => {
            let cfg = common.load()?;
            let seed = edmc::harness::trial_seed(cfg.seed, trial, 0);
            let s = generate(&cfg, seed)?;
            let dir = &cfg.output_dir;
            write_positions(&dir.join("truth.csv"), &s.truth)?;
            write_matrix(&dir.join("observed.csv"), &s.observed.to_nan_matrix())?;
            println!(
                "wrote {} microphones, {:.1}% missing, to {}",
                s.truth.len(),
                100.0 * s.observed.mask().missing_fraction(),
                dir.display()
            );
        }
        Command::Calibrate {
            common,
            input,
            dim,
            solver,
            plain,
            out,
            completed,
            diagnostics,
        } => {
            let cfg = common.load()?;
            let id: SolverId = solver.parse()?;
            let obs = read_observed(&input, plain)?;
            let run = run_solver(id, &obs, dim, &cfg, cfg.seed)?;
            write_positions(&out, &run.positions)?;
            if let Some(p) = completed {
                match &run.completed {
                    Some(m) => write_matrix(&p, m)?,
                    None => {
                        let x = &run.positions;
                        write_matrix(&p, edmc_core::geometry::build_squared_distances(x).as_matrix())?
                    }
                }
            }
            if let Some(p) = diagnostics {
                write_diagnostics(&p, &run.history)?;
            }
            eprintln!("{id}: {} after {} iterations", run.status, run.iterations);
        }
        Command::Sweep { common, axis, values } => {
            let mut cfg = common.load()?;
            let axis = match axis {
                AxisArg::N => Axis::N,
                AxisArg::Sigma => Axis::Sigma,
                AxisArg::Missing => Axis::Missing,
                AxisArg::Jitter => Axis::Jitter,
            };
            if let Some(v) = values {
                match axis {
                    Axis::N => {
                        cfg.sweep.n = v
                            .iter()
                            .map(|&x| {
                                if x >= 1.0 && x.fract() == 0.0 {
                                    Ok(x as usize)
                                } else {
                                    Err(AppError::Config(format!("N values must be positive integers, got {x}")))
                                }
                            })
                            .collect::<AppResult<_>>()?
                    }
                    Axis::Sigma => cfg.sweep.sigma = v,
                    Axis::Missing => cfg.sweep.missing = v,
                    Axis::Jitter => cfg.sweep.jitter = v,
                }
                cfg.validate()?;
            }
            let records = run_sweep(&cfg, axis)?;
            let files = emit_results(&cfg.output_dir, &format!("sweep_{}", axis.name()), &records)?;
            print_aggregate(&records);
            eprintln!("results in {}", files.trials.parent().unwrap_or(Path::new(".")).display());
        }
        Command::Run { common } => {
            let cfg = common.load()?;
            let records = run_cells(&cfg, &[single_cell(&cfg)])?;
            emit_results(&cfg.output_dir, "run", &records)?;
            print_aggregate(&records);
        }
        Command::VerifyBounds { common, out } => {
            let cfg = common.load()?;
            let mut sweep = cfg.bounds.clone();
            if let Some(s) = common.seed {
                sweep.seed = s;
            }
            if let Some(t) = common.trials {
                sweep.trials = t;
            }
            let reports = verify_bounds(&sweep)?;
            let path = out.unwrap_or_else(|| cfg.output_dir.join("bounds.csv"));
            write_bound_reports(&path, &reports)?;
            println!("n,max_structured_ratio,max_noise_ratio");
            for (n, s, z) in max_ratios_by_n(&reports) {
                println!("{n},{},{}", fmt_f64(s), fmt_f64(z));
            }
        }
        Command::CoherenceFit {
            common,
            input,
            speed_of_sound,
            out,
        } => {
            let cfg = common.load()?;
            let c = speed_of_sound.unwrap_or(SPEED_OF_SOUND);
            let mut rows = Vec::with_capacity(input.len());
            for path in &input {
                let curve = read_coherence_curve(path, c)?;
                let fit = fit_distance(&curve, &cfg.coherence.fit)?;
                rows.push(vec![
                    path.display().to_string(),
                    fmt_f64(fit.distance),
                    fmt_f64(fit.residual),
                    fit.reliable.to_string(),
                    fit.degenerate.to_string(),
                ]);
            }
            let header = ["file", "distance", "residual", "reliable", "degenerate"];
            match out {
                Some(p) => write_table(&p, &header, &rows)?,
                None => {
                    println!("{}", header.join(","));
                    for r in rows {
                        println!("{}", r.join(","));
                    }
                }
            }
        }
        Command::RealLayout {
            common,
            input,
            plain,
            truth,
            subset,
        } => {
            let cfg = common.load()?;
            let (observed, truth) = match input {
                Some(path) => {
                    let obs = read_observed(&path, plain)?;
                    let x = match truth {
                        Some(t) => read_positions(&t)?,
                        None => real_layout(obs.len() == 12)?,
                    };
                    (obs, x)
                }
                None => {
                    let mut c = cfg.clone();
                    if c.scenario.kind.is_random() {
                        c = ExperimentConfig {
                            solvers: cfg.solvers.clone(),
                            seed: cfg.seed,
                            output_dir: cfg.output_dir.clone(),
                            ..ExperimentConfig::preset(ScenarioKind::RealLayout11)
                        };
                    }
                    let s = generate(&c, cfg.seed)?;
                    (s.observed, s.truth)
                }
            };
            let (observed, truth) = match subset {
                Some(k) => restrict(&observed, &truth, k)?,
                None => (observed, truth),
            };
            let estimates = run_real_layout(&observed, &truth, &cfg)?;
            emit_real_layout(&cfg.output_dir, &estimates)?;
            println!("solver,calibration_error,position_error");
            for e in &estimates {
                println!(
                    "{},{},{}",
                    e.solver,
                    fmt_f64(e.record.calibration_error),
                    fmt_f64(e.record.position_error)
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
