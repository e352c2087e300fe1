//! Scenario generation: ground-truth layout plus its partial, noisy
//! observation.

use edmc_core::baselines::connected_components;
use edmc_core::coherence::build_observed_from_coherence;
use edmc_core::geometry::pairwise_distances;
use edmc_core::observation::{add_noise, make_mask, observe, squared, NoiseModel};
use edmc_core::rng::{derive_seed, seeded, uniform_in_disc};
use edmc_core::{ObservedMatrix, PositionMatrix};
use rand::Rng;

use crate::config::{ExperimentConfig, ObservationConfig, ScenarioConfig, ScenarioKind};
use crate::error::{AppError, AppResult};
use crate::layouts;

/// Random layouts are redrawn until the observation graph is connected.
pub const MAX_ATTEMPTS: u64 = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub truth: PositionMatrix,
    pub observed: ObservedMatrix,
    pub dim: usize,
    /// Layout draws needed to get a connected observation graph.
    pub attempts: u64,
}

fn random_layout(s: &ScenarioConfig, seed: u64) -> AppResult<PositionMatrix> {
    let mut rng = seeded(seed);
    match s.kind {
        ScenarioKind::Disc => {
            let pts: Vec<[f64; 2]> = (0..s.n).map(|_| uniform_in_disc(&mut rng, s.radius)).collect();
            Ok(PositionMatrix::from_points(&pts)?)
        }
        _ => Ok(PositionMatrix::from_fn(s.n, s.dim, |_, j| s.room[j] * rng.random::<f64>())?),
    }
}

fn fixed_layout(kind: ScenarioKind) -> AppResult<PositionMatrix> {
    match kind {
        ScenarioKind::Distributed18 => Ok(layouts::distributed_18mic()),
        ScenarioKind::Distributed15 => Ok(layouts::distributed_15mic()),
        ScenarioKind::RealLayout12 => layouts::real_layout(true),
        _ => layouts::real_layout(false),
    }
}

/// Noise from stream 1 and the mask from stream 2 of `seed`.
pub fn observe_layout(x: &PositionMatrix, o: &ObservationConfig, seed: u64) -> AppResult<ObservedMatrix> {
    let d = pairwise_distances(x);
    let model = NoiseModel {
        varsigma: o.varsigma,
        additive_std: o.additive_std,
        jitter_halfwidth: o.jitter,
        seed: derive_seed(seed, 1),
        ..NoiseModel::default()
    };
    let noisy = add_noise(&d, &model)?;
    let mask = make_mask(&d, o.d_max, o.p, derive_seed(seed, 2))?;
    Ok(observe(&squared(&noisy), &mask)?)
}

/// Build one scenario instance from the configuration.
pub fn generate(cfg: &ExperimentConfig, seed: u64) -> AppResult<Scenario> {
    generate_with(&cfg.scenario, &cfg.observation, cfg, seed)
}

/// Like [`generate`] with explicit scenario and observation parameters
/// (used by sweeps).
pub fn generate_with(s: &ScenarioConfig, o: &ObservationConfig, cfg: &ExperimentConfig, seed: u64) -> AppResult<Scenario> {
    if s.kind == ScenarioKind::CoherencePipeline {
        let truth = fixed_layout(s.kind)?;
        let omega = cfg.coherence.band.grid()?;
        let out = build_observed_from_coherence(&truth, &omega, cfg.coherence.noise_std, &cfg.coherence.fit, derive_seed(seed, 3))?;
        return Ok(Scenario {
            dim: truth.dim(),
            truth,
            observed: out.observed,
            attempts: 1,
        });
    }
    if !s.kind.is_random() {
        let truth = fixed_layout(s.kind)?;
        let observed = observe_layout(&truth, o, seed)?;
        return Ok(Scenario {
            dim: truth.dim(),
            truth,
            observed,
            attempts: 1,
        });
    }
    for attempt in 0..MAX_ATTEMPTS {
        let truth = random_layout(s, derive_seed(derive_seed(seed, 0), attempt))?;
        let observed = observe_layout(&truth, o, seed)?;
        if connected_components(&observed).len() == 1 {
            return Ok(Scenario {
                truth,
                observed,
                dim: s.dim,
                attempts: attempt + 1,
            });
        }
    }
    Err(AppError::Config(format!(
        "no connected observation graph in {MAX_ATTEMPTS} layout draws; increase d_max or p"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disc_scenario_is_connected_and_in_range() {
        let cfg = ExperimentConfig::preset(ScenarioKind::Disc);
        let s = generate(&cfg, 3).unwrap();
        assert_eq!(s.truth.len(), 45);
        assert_eq!(connected_components(&s.observed).len(), 1);
        let d = pairwise_distances(&s.truth);
        for (i, j, _) in s.observed.known() {
            assert!(d[(i, j)] < 7.5);
        }
        for i in 0..45 {
            let r = s.truth.point(i).iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(r <= 9.5);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = ExperimentConfig::preset(ScenarioKind::Cube);
        assert_eq!(generate(&cfg, 11).unwrap(), generate(&cfg, 11).unwrap());
        assert_ne!(generate(&cfg, 11).unwrap().truth, generate(&cfg, 12).unwrap().truth);
    }

    #[test]
    fn small_disc_redraws_disconnected_layouts() {
        let mut cfg = ExperimentConfig::preset(ScenarioKind::Disc);
        cfg.scenario.n = 15;
        let redrawn = (0..40).map(|t| generate(&cfg, t).unwrap().attempts).filter(|&a| a > 1).count();
        assert!(redrawn > 0);
    }

    #[test]
    fn real_layout_has_the_seven_long_pairs_missing() {
        let mut cfg = ExperimentConfig::preset(ScenarioKind::RealLayout11);
        cfg.observation.varsigma = 0.0;
        let s = generate(&cfg, 0).unwrap();
        assert_eq!(s.observed.mask().pair_count(), 55 - 7);
        let cfg12 = ExperimentConfig::preset(ScenarioKind::RealLayout12);
        let s12 = generate(&cfg12, 0).unwrap();
        assert_eq!(s12.observed.mask().pair_count(), 66 - 7 - 5);
        for (i, j) in [(11, 10), (9, 11), (2, 11), (3, 11), (4, 11)] {
            assert!(!s12.observed.mask().contains(i, j));
        }
    }

    #[test]
    fn coherence_pipeline_matches_structured_layout() {
        let mut cfg = ExperimentConfig::preset(ScenarioKind::CoherencePipeline);
        cfg.coherence.noise_std = 0.0;
        let s = generate(&cfg, 0).unwrap();
        assert_eq!(s.observed.mask().pair_count(), 55 - 7);
    }
}
