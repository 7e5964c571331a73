//! Prediction-error evaluation of the hybrid model against the constant-velocity
//! baseline over a set of episodes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gap::CrossingModel;
use crate::hybrid::{ActionState, GeometryConfig};
use crate::inference::{run_tracker, PredictionConfig, Predictor, TrackerStep};
use crate::metrics::{ade, fde, rmse, TrajPoint, TrajectoryPair};
use crate::sim::Episode;
use crate::tracker::NoiseConfig;

/// Which rollouts are scored, by the ground-truth action at the tick they are issued.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RolloutScope {
    All,
    /// Issued before the pedestrian steps onto the road.
    PreCrossing,
    /// Issued while the pedestrian is waiting at the curb.
    Waiting,
    /// Issued once the pedestrian is on the road or walking away.
    PostCrossing,
    /// Issued while the pedestrian walks away from the crosswalk.
    WalkAway,
}

impl RolloutScope {
    pub const ALL: [RolloutScope; 5] = [
        RolloutScope::All,
        RolloutScope::PreCrossing,
        RolloutScope::Waiting,
        RolloutScope::PostCrossing,
        RolloutScope::WalkAway,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RolloutScope::All => "all",
            RolloutScope::PreCrossing => "pre_crossing",
            RolloutScope::Waiting => "waiting",
            RolloutScope::PostCrossing => "post_crossing",
            RolloutScope::WalkAway => "walk_away",
        }
    }

    pub fn includes(self, truth: ActionState) -> bool {
        match self {
            RolloutScope::All => true,
            RolloutScope::PreCrossing => matches!(truth, ActionState::Approach | ActionState::Wait),
            RolloutScope::Waiting => truth == ActionState::Wait,
            RolloutScope::PostCrossing => matches!(truth, ActionState::Cross | ActionState::WalkAway),
            RolloutScope::WalkAway => truth == ActionState::WalkAway,
        }
    }
}

/// Mean errors at one horizon over all scored rollouts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HorizonErrors {
    pub horizon_s: f64,
    pub steps: usize,
    pub rollouts: usize,
    pub ade: f64,
    pub fde: f64,
    pub rmse: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Sums {
    n: usize,
    ade: f64,
    fde: f64,
    rmse: f64,
}

/// Converts horizons in seconds to whole steps of `dt`.
pub fn horizon_steps(horizons: &[f64], dt: f64) -> Result<Vec<usize>> {
    horizons
        .iter()
        .map(|&h| {
            let k = (h / dt).round();
            if !(k >= 1.0) || ((k * dt) - h).abs() > dt * 1e-6 {
                return Err(Error::invalid("horizons", format!("{h} s is not a positive multiple of dt = {dt}")));
            }
            Ok(k as usize)
        })
        .collect()
}

/// Per-rollout errors for one episode, summed per horizon.
fn score_episode(ep: &Episode, steps: &[TrackerStep], horizons: &[usize], scope: RolloutScope) -> Result<Vec<Sums>> {
    let mut sums = vec![Sums::default(); horizons.len()];
    for s in steps {
        if !scope.includes(ep.ticks[s.tick].action) {
            continue;
        }
        for (slot, &h) in sums.iter_mut().zip(horizons) {
            let end = s.tick + h;
            if end >= ep.ticks.len() || h > s.rollout.steps.len() {
                continue;
            }
            let predicted: Vec<TrajPoint<f64>> = s.rollout.steps[..h]
                .iter()
                .map(|r| TrajPoint::new(r.t, r.kin.x, r.kin.y))
                .collect();
            let actual: Vec<TrajPoint<f64>> = ep.ticks[s.tick + 1..=end]
                .iter()
                .map(|r| TrajPoint::new(r.t, r.ped.x, r.ped.y))
                .collect();
            let pair = TrajectoryPair::new(predicted, actual)?;
            slot.n += 1;
            slot.ade += ade(&pair);
            slot.fde += fde(&pair);
            slot.rmse += rmse(&pair);
        }
    }
    Ok(sums)
}

/// Runs the tracker with `predictor` over every episode and averages the
/// rollout errors per horizon. Horizons no rollout reaches are skipped with a
/// warning. Episodes run in parallel; sums are merged in episode order.
#[allow(clippy::too_many_arguments)]
pub fn prediction_errors(
    episodes: &[Episode],
    predictor: Predictor<'_>,
    horizons_s: &[f64],
    scope: RolloutScope,
    cfg: &PredictionConfig,
    noise: &NoiseConfig<f64>,
    geom: &GeometryConfig<f64>,
) -> Result<Vec<HorizonErrors>> {
    let horizons = horizon_steps(horizons_s, cfg.dt)?;
    if let Some(&max) = horizons.iter().max() {
        if max > cfg.horizon_steps {
            return Err(Error::invalid(
                "horizons",
                format!("{max} steps exceed the rollout length of {} steps", cfg.horizon_steps),
            ));
        }
    }
    let per_episode = episodes
        .par_iter()
        .map(|ep| {
            let traffic = &ep.vehicles;
            let gaze: Vec<bool> = ep.ticks.iter().map(|r| r.gaze).collect();
            let steps = run_tracker(&ep.measurements(), traffic, &gaze, predictor, cfg, noise, geom)?;
            score_episode(ep, &steps, &horizons, scope)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut total = vec![Sums::default(); horizons.len()];
    for sums in &per_episode {
        for (t, s) in total.iter_mut().zip(sums) {
            t.n += s.n;
            t.ade += s.ade;
            t.fde += s.fde;
            t.rmse += s.rmse;
        }
    }
    let mut out = Vec::new();
    for ((&h_s, &h), t) in horizons_s.iter().zip(&horizons).zip(&total) {
        if t.n == 0 {
            log::warn!("no rollout reaches the {h_s} s horizon; skipped");
            continue;
        }
        let n = t.n as f64;
        out.push(HorizonErrors {
            horizon_s: h_s,
            steps: h,
            rollouts: t.n,
            ade: t.ade / n,
            fde: t.fde / n,
            rmse: t.rmse / n,
        });
    }
    Ok(out)
}

/// The model being evaluated, by name.
pub fn predictor_name(p: &Predictor<'_>) -> &'static str {
    match p {
        Predictor::Hybrid(_) => "hybrid",
        Predictor::ConstantVelocity => "cv",
    }
}

/// Hybrid and constant-velocity errors for the same episodes and scope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorComparison {
    pub scope: RolloutScope,
    pub hybrid: Vec<HorizonErrors>,
    pub cv: Vec<HorizonErrors>,
}

#[allow(clippy::too_many_arguments)]
pub fn compare_predictors(
    episodes: &[Episode],
    model: &dyn CrossingModel,
    horizons_s: &[f64],
    scope: RolloutScope,
    cfg: &PredictionConfig,
    noise: &NoiseConfig<f64>,
    geom: &GeometryConfig<f64>,
) -> Result<ErrorComparison> {
    Ok(ErrorComparison {
        scope,
        hybrid: prediction_errors(episodes, Predictor::Hybrid(model), horizons_s, scope, cfg, noise, geom)?,
        cv: prediction_errors(episodes, Predictor::ConstantVelocity, horizons_s, scope, cfg, noise, geom)?,
    })
}

/// The walk-away part of an episode as an episode of its own: ticks from the
/// first `WalkAway` tick onward, with times and traffic kept. A tracker run on
/// it starts cold at the curb.
pub fn walk_away_segment(ep: &Episode) -> Option<Episode> {
    let start = ep.ticks.iter().position(|r| r.action == ActionState::WalkAway)?;
    if ep.ticks.len() - start < 3 {
        return None;
    }
    Some(Episode {
        id: ep.id,
        profile: ep.profile,
        ticks: ep.ticks[start..].to_vec(),
        vehicles: ep.vehicles[start..].to_vec(),
        events: Vec::new(),
    })
}

/// Root-mean-square distance between the filter posterior and the ground
/// truth over all tracked ticks.
pub fn tracking_rmse(
    episodes: &[Episode],
    cfg: &PredictionConfig,
    noise: &NoiseConfig<f64>,
    geom: &GeometryConfig<f64>,
) -> Result<f64> {
    let cfg = PredictionConfig {
        horizon_steps: 1,
        ..cfg.clone()
    };
    let per_episode = episodes
        .par_iter()
        .map(|ep| {
            let gaze: Vec<bool> = ep.ticks.iter().map(|r| r.gaze).collect();
            let steps = run_tracker(&ep.measurements(), &ep.vehicles, &gaze, Predictor::ConstantVelocity, &cfg, noise, geom)?;
            let se: f64 = steps
                .iter()
                .map(|s| {
                    let truth = &ep.ticks[s.tick].ped;
                    (s.state.kin.x - truth.x).powi(2) + (s.state.kin.y - truth.y).powi(2)
                })
                .sum();
            Ok((se, steps.len()))
        })
        .collect::<Result<Vec<_>>>()?;
    let (se, n) = per_episode.iter().fold((0.0, 0), |(a, b), (s, k)| (a + s, b + k));
    if n == 0 {
        return Err(Error::Empty("tracked ticks"));
    }
    Ok((se / n as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseGridPoint {
    pub q_pos: f64,
    pub q_vel: f64,
    pub r_pos: f64,
    pub tracking_rmse: f64,
}

/// Tracking error over the full `q_pos × q_vel × r_pos` grid, in grid order.
pub fn noise_grid_search(
    episodes: &[Episode],
    q_pos: &[f64],
    q_vel: &[f64],
    r_pos: &[f64],
    cfg: &PredictionConfig,
    geom: &GeometryConfig<f64>,
) -> Result<Vec<NoiseGridPoint>> {
    let mut out = Vec::new();
    for &qp in q_pos {
        for &qv in q_vel {
            for &r in r_pos {
                let noise = NoiseConfig {
                    q_pos: qp,
                    q_vel: qv,
                    r_pos: r,
                };
                noise.validate()?;
                out.push(NoiseGridPoint {
                    q_pos: qp,
                    q_vel: qv,
                    r_pos: r,
                    tracking_rmse: tracking_rmse(episodes, cfg, &noise, geom)?,
                });
            }
        }
    }
    Ok(out)
}

/// Episodes in which the pedestrian waits at the curb before crossing.
pub fn is_wait_then_cross(ep: &Episode) -> bool {
    let Some(k) = ep.ticks.iter().position(|r| r.action == ActionState::Cross) else {
        return false;
    };
    ep.ticks[..k].iter().any(|r| r.action == ActionState::Wait)
}
