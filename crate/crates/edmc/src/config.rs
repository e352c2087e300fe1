//! TOML experiment configuration.
//!
//! Every field is optional in the file. Missing values come from the preset
//! of the chosen scenario kind, so `kind = "cube"` alone gives the unit-cube
//! missing-ratio setup.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use edmc_core::coherence::{FitOptions, FrequencyBand};
use edmc_core::completion::{Initialization, SolverOptions};
use edmc_core::theory::{BoundSweep, DMaxRule};
use serde::Deserialize;

use crate::error::{AppError, AppResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Deserialize)]
pub enum ScenarioKind {
    #[serde(rename = "disc")]
    Disc,
    #[serde(rename = "cube")]
    Cube,
    #[serde(rename = "distributed-18mic")]
    Distributed18,
    #[serde(rename = "distributed-15mic")]
    Distributed15,
    #[serde(rename = "real-layout-11mic")]
    RealLayout11,
    #[serde(rename = "real-layout-12mic")]
    RealLayout12,
    #[serde(rename = "coherence-pipeline")]
    CoherencePipeline,
}

impl ScenarioKind {
    /// Random layouts whose size can be swept.
    pub fn is_random(&self) -> bool {
        matches!(self, ScenarioKind::Disc | ScenarioKind::Cube)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolverId {
    Mc,
    Mc2,
    Emc,
    MdsMap,
    SStress,
}

impl SolverId {
    pub const ALL: [SolverId; 5] = [SolverId::Emc, SolverId::Mc2, SolverId::Mc, SolverId::MdsMap, SolverId::SStress];

    pub fn name(&self) -> &'static str {
        match self {
            SolverId::Mc => "MC",
            SolverId::Mc2 => "MC2",
            SolverId::Emc => "E-MC2",
            SolverId::MdsMap => "MDS-MAP",
            SolverId::SStress => "s-stress",
        }
    }
}

impl fmt::Display for SolverId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverId {
    type Err = AppError;

    fn from_str(s: &str) -> AppResult<Self> {
        let key: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase();
        match key.as_str() {
            "mc" => Ok(SolverId::Mc),
            "mc2" | "mccadzow" => Ok(SolverId::Mc2),
            "emc2" | "emc" => Ok(SolverId::Emc),
            "mdsmap" => Ok(SolverId::MdsMap),
            "sstress" => Ok(SolverId::SStress),
            _ => Err(AppError::Config(format!("unknown solver {s:?}"))),
        }
    }
}

impl<'de> Deserialize<'de> for SolverId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    pub n: usize,
    pub dim: usize,
    /// Disc radius `a` (m).
    pub radius: f64,
    /// Room dimensions for the cube scenario (m).
    pub room: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservationConfig {
    pub d_max: f64,
    pub p: f64,
    pub varsigma: f64,
    pub additive_std: f64,
    /// Half-width of uniform jitter (m).
    pub jitter: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverSettings {
    pub max_iterations: usize,
    pub rel_tolerance: f64,
    pub init: Initialization,
    pub sstress_restarts: usize,
    pub sstress_weight_exponent: i32,
}

impl Default for SolverSettings {
    fn default() -> Self {
        let core = SolverOptions::default();
        Self {
            max_iterations: core.max_iterations,
            rel_tolerance: core.rel_tolerance,
            init: core.init,
            sstress_restarts: 3,
            sstress_weight_exponent: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherenceConfig {
    pub noise_std: f64,
    pub fit: FitOptions,
    pub band: FrequencyBand,
}

impl Default for CoherenceConfig {
    fn default() -> Self {
        Self {
            noise_std: 0.05,
            fit: FitOptions::default(),
            band: FrequencyBand::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepValues {
    pub n: Vec<usize>,
    pub sigma: Vec<f64>,
    pub missing: Vec<f64>,
    pub jitter: Vec<f64>,
}

impl SweepValues {
    pub fn desk() -> Self {
        Self {
            n: vec![15, 30, 45, 60, 120],
            sigma: vec![0.0056, 0.01, 0.0167, 0.025, 0.04, 0.06, 0.1],
            missing: vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6],
            jitter: vec![0.0056, 0.0167, 0.03, 0.06, 0.1],
        }
    }

    pub fn full_scale() -> Self {
        Self {
            n: vec![15, 30, 45, 60, 90, 120, 150, 200],
            ..Self::desk()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    pub observation: ObservationConfig,
    pub solver: SolverSettings,
    pub coherence: CoherenceConfig,
    pub sweep: SweepValues,
    pub bounds: BoundSweep,
    pub solvers: Vec<SolverId>,
    pub trials: usize,
    pub seed: u64,
    /// Worker threads for trials; 0 means one per available core.
    pub workers: usize,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    /// Desk-scale defaults for a scenario kind.
    pub fn preset(kind: ScenarioKind) -> Self {
        let (n, dim) = match kind {
            ScenarioKind::Disc => (45, 2),
            ScenarioKind::Cube => (60, 3),
            ScenarioKind::Distributed18 => (18, 2),
            ScenarioKind::Distributed15 => (15, 2),
            ScenarioKind::RealLayout11 | ScenarioKind::CoherencePipeline => (11, 2),
            ScenarioKind::RealLayout12 => (12, 2),
        };
        let observation = match kind {
            ScenarioKind::Disc => ObservationConfig {
                d_max: 7.5,
                p: 0.95,
                varsigma: 0.0167,
                additive_std: 0.0,
                jitter: 0.0,
            },
            ScenarioKind::Cube => ObservationConfig {
                d_max: f64::INFINITY,
                p: 0.5,
                varsigma: 0.0,
                additive_std: 0.02,
                jitter: 0.0,
            },
            ScenarioKind::Distributed18 => ObservationConfig {
                d_max: 1.01,
                p: 1.0,
                varsigma: 0.06,
                additive_std: 0.0,
                jitter: 0.0,
            },
            _ => ObservationConfig {
                d_max: 0.73,
                p: 1.0,
                varsigma: 0.06,
                additive_std: 0.0,
                jitter: 0.0,
            },
        };
        Self {
            scenario: ScenarioConfig {
                kind,
                n,
                dim,
                radius: 9.5,
                room: [1.0, 1.0, 1.0],
            },
            observation,
            solver: SolverSettings::default(),
            coherence: CoherenceConfig::default(),
            sweep: SweepValues::desk(),
            bounds: BoundSweep {
                a: 1.0,
                sizes: vec![30, 60, 120, 240],
                p: 0.95,
                varsigma: 0.0167,
                d_max: DMaxRule::LogOverN { c: 1.0 },
                trials: 20,
                seed: 1,
                rank: 4,
            },
            solvers: SolverId::ALL.to_vec(),
            trials: 100,
            seed: 1,
            workers: 0,
            output_dir: PathBuf::from("results"),
        }
    }

    pub fn from_toml_str(text: &str) -> AppResult<Self> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| AppError::Config(e.to_string()))?;
        file.resolve()
    }

    pub fn load(path: &Path) -> AppResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            AppError::Config(msg) => AppError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> AppResult<()> {
        let bad = |msg: &str| Err(AppError::Config(msg.to_string()));
        if self.trials == 0 {
            return bad("trials must be at least 1");
        }
        if self.solvers.is_empty() {
            return bad("solver list is empty");
        }
        if !(1..=3).contains(&self.scenario.dim) {
            return bad("dim must be 1, 2 or 3");
        }
        if self.scenario.kind == ScenarioKind::Disc && self.scenario.dim != 2 {
            return bad("the disc scenario is planar (dim = 2)");
        }
        if !(self.scenario.radius > 0.0) || self.scenario.room.iter().any(|r| !(*r > 0.0)) {
            return bad("radius and room dimensions must be positive");
        }
        let o = &self.observation;
        if !(o.p > 0.0 && o.p <= 1.0) {
            return bad("p must lie in (0, 1]");
        }
        if !(o.d_max > 0.0) || !(o.varsigma >= 0.0) || !(o.additive_std >= 0.0) || !(o.jitter >= 0.0) {
            return bad("d_max must be positive; varsigma, additive_std and jitter non-negative");
        }
        if self.sweep.missing.iter().any(|m| !(0.0..1.0).contains(m)) {
            return bad("missing ratios must lie in [0, 1)");
        }
        if self.bounds.trials == 0 {
            return bad("bounds.trials must be at least 1");
        }
        Ok(())
    }

    pub fn solver_options(&self, seed: u64) -> SolverOptions {
        SolverOptions {
            init: self.solver.init,
            max_iterations: self.solver.max_iterations,
            rel_tolerance: self.solver.rel_tolerance,
            seed,
            ..SolverOptions::default()
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    trials: Option<usize>,
    seed: Option<u64>,
    workers: Option<usize>,
    output_dir: Option<PathBuf>,
    solvers: Option<Vec<SolverId>>,
    full_scale: Option<bool>,
    scenario: Option<ScenarioSection>,
    observation: Option<ObservationSection>,
    solver: Option<SolverSection>,
    coherence: Option<CoherenceSection>,
    sweep: Option<SweepSection>,
    bounds: Option<BoundsSection>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioSection {
    kind: Option<ScenarioKind>,
    n: Option<usize>,
    dim: Option<usize>,
    radius: Option<f64>,
    room: Option<[f64; 3]>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObservationSection {
    d_max: Option<f64>,
    p: Option<f64>,
    varsigma: Option<f64>,
    additive_std: Option<f64>,
    jitter: Option<f64>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum InitName {
    Spectral,
    ShortestPath,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolverSection {
    max_iterations: Option<usize>,
    rel_tolerance: Option<f64>,
    init: Option<InitName>,
    sstress_restarts: Option<usize>,
    sstress_weight_exponent: Option<i32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CoherenceSection {
    noise_std: Option<f64>,
    cutoff: Option<f64>,
    residual_threshold: Option<f64>,
    d_search_max: Option<f64>,
    f_lo: Option<f64>,
    f_hi: Option<f64>,
    sample_rate: Option<f64>,
    frame_len: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepSection {
    n: Option<Vec<usize>>,
    sigma: Option<Vec<f64>>,
    missing: Option<Vec<f64>>,
    jitter: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum DMaxRuleName {
    Fixed,
    LogOverN,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoundsSection {
    a: Option<f64>,
    sizes: Option<Vec<usize>>,
    p: Option<f64>,
    varsigma: Option<f64>,
    d_max_rule: Option<DMaxRuleName>,
    /// Used by the `fixed` rule.
    d_max: Option<f64>,
    /// Used by the `log-over-n` rule.
    c: Option<f64>,
    trials: Option<usize>,
    seed: Option<u64>,
    rank: Option<usize>,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl ConfigFile {
    fn resolve(self) -> AppResult<ExperimentConfig> {
        let section = self.scenario.unwrap_or_default();
        let kind = section.kind.unwrap_or(ScenarioKind::Disc);
        let mut cfg = ExperimentConfig::preset(kind);
        if self.full_scale.unwrap_or(false) {
            cfg.trials = 500;
            cfg.sweep = SweepValues::full_scale();
        }
        if !kind.is_random() && (section.n.is_some() || section.dim.is_some()) {
            return Err(AppError::Config(format!("n and dim are fixed by the {kind:?} layout")));
        }
        set(&mut cfg.scenario.n, section.n);
        set(&mut cfg.scenario.dim, section.dim);
        set(&mut cfg.scenario.radius, section.radius);
        set(&mut cfg.scenario.room, section.room);

        set(&mut cfg.trials, self.trials);
        set(&mut cfg.seed, self.seed);
        set(&mut cfg.workers, self.workers);
        set(&mut cfg.output_dir, self.output_dir);
        set(&mut cfg.solvers, self.solvers);

        if let Some(o) = self.observation {
            let t = &mut cfg.observation;
            set(&mut t.d_max, o.d_max);
            set(&mut t.p, o.p);
            set(&mut t.varsigma, o.varsigma);
            set(&mut t.additive_std, o.additive_std);
            set(&mut t.jitter, o.jitter);
        }
        if let Some(s) = self.solver {
            let t = &mut cfg.solver;
            set(&mut t.max_iterations, s.max_iterations);
            set(&mut t.rel_tolerance, s.rel_tolerance);
            set(
                &mut t.init,
                s.init.map(|i| match i {
                    InitName::Spectral => Initialization::Spectral,
                    InitName::ShortestPath => Initialization::ShortestPath,
                }),
            );
            set(&mut t.sstress_restarts, s.sstress_restarts);
            set(&mut t.sstress_weight_exponent, s.sstress_weight_exponent);
        }
        if let Some(c) = self.coherence {
            let t = &mut cfg.coherence;
            set(&mut t.noise_std, c.noise_std);
            set(&mut t.fit.cutoff, c.cutoff);
            set(&mut t.fit.residual_threshold, c.residual_threshold);
            set(&mut t.fit.d_search_max, c.d_search_max);
            set(&mut t.band.f_lo, c.f_lo);
            set(&mut t.band.f_hi, c.f_hi);
            set(&mut t.band.sample_rate, c.sample_rate);
            set(&mut t.band.frame_len, c.frame_len);
        }
        if let Some(s) = self.sweep {
            set(&mut cfg.sweep.n, s.n);
            set(&mut cfg.sweep.sigma, s.sigma);
            set(&mut cfg.sweep.missing, s.missing);
            set(&mut cfg.sweep.jitter, s.jitter);
        }
        if let Some(b) = self.bounds {
            let t = &mut cfg.bounds;
            set(&mut t.a, b.a);
            set(&mut t.sizes, b.sizes);
            set(&mut t.p, b.p);
            set(&mut t.varsigma, b.varsigma);
            set(&mut t.trials, b.trials);
            set(&mut t.seed, b.seed);
            set(&mut t.rank, b.rank);
            match (b.d_max_rule, b.d_max, b.c) {
                (Some(DMaxRuleName::Fixed), Some(d), _) | (None, Some(d), None) => t.d_max = DMaxRule::Fixed(d),
                (Some(DMaxRuleName::Fixed), None, _) => {
                    return Err(AppError::Config("bounds.d_max_rule = \"fixed\" needs bounds.d_max".into()))
                }
                (Some(DMaxRuleName::LogOverN) | None, None, Some(c)) => t.d_max = DMaxRule::LogOverN { c },
                (Some(DMaxRuleName::LogOverN), _, None) => {}
                (_, Some(_), Some(_)) => {
                    return Err(AppError::Config("set either bounds.d_max or bounds.c, not both".into()))
                }
                (None, None, None) => {}
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
