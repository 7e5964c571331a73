//! Behavior measures computed from datasets: accepted gaps, walking speeds and
//! the parameters of the crossing-start distributions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hybrid::ActionState;
use crate::metrics::{walking_speed_stats, TrajPoint, DEFAULT_SPEED_WINDOW};
use crate::sim::{Dataset, Episode};

/// Time from the last vehicle passing the pedestrian's longitudinal position
/// to the pedestrian stepping onto the road.
///
/// The passing time is interpolated between ticks. `None` when no vehicle
/// passed while the pedestrian was present.
pub fn accepted_gap(ep: &Episode) -> Option<f64> {
    let k_cross = ep.ticks.iter().position(|r| r.action == ActionState::Cross)?;
    let px = ep.ticks[k_cross].ped.x;
    let t_cross = ep.ticks[k_cross].t;
    for k in (1..=k_cross).rev() {
        let (before, after) = (&ep.vehicles[k - 1], &ep.vehicles[k]);
        let mut passed: Option<f64> = None;
        for v in after.iter().filter(|v| v.x >= px) {
            if let Some(u) = before.iter().find(|u| u.id == v.id && u.x < px) {
                let (t0, t1) = (ep.ticks[k - 1].t, ep.ticks[k].t);
                let t = t0 + (t1 - t0) * (px - u.x) / (v.x - u.x);
                passed = Some(passed.map_or(t, |p: f64| p.max(t)));
            }
        }
        if let Some(t) = passed {
            return Some(t_cross - t);
        }
    }
    None
}

/// Accepted gaps of every episode that has one.
pub fn accepted_gaps(ds: &Dataset) -> Vec<f64> {
    ds.episodes.iter().filter_map(accepted_gap).collect()
}

/// Position source for walking-speed estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PositionSource {
    GroundTruth,
    Measured,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedSummary {
    pub source: PositionSource,
    pub crossing_mean: Option<f64>,
    pub sidewalk_mean: Option<f64>,
    pub crossing_ticks: usize,
    pub sidewalk_ticks: usize,
}

/// Tick-weighted walking-speed means over all episodes.
pub fn walking_speeds(ds: &Dataset, source: PositionSource, window: usize) -> Result<SpeedSummary> {
    let (mut cs, mut cn, mut ss, mut sn) = (0.0, 0usize, 0.0, 0usize);
    for ep in &ds.episodes {
        if ep.ticks.len() <= window + 2 {
            continue;
        }
        let traj: Vec<TrajPoint<f64>> = ep
            .ticks
            .iter()
            .map(|r| match source {
                PositionSource::GroundTruth => TrajPoint::new(r.t, r.ped.x, r.ped.y),
                PositionSource::Measured => TrajPoint::new(r.t, r.meas.zx, r.meas.zy),
            })
            .collect();
        let s = walking_speed_stats(&traj, &ep.actions(), window)?;
        if let Some(m) = s.crossing_mean {
            cs += m * s.crossing_ticks as f64;
            cn += s.crossing_ticks;
        }
        if let Some(m) = s.sidewalk_mean {
            ss += m * s.sidewalk_ticks as f64;
            sn += s.sidewalk_ticks;
        }
    }
    Ok(SpeedSummary {
        source,
        crossing_mean: (cn > 0).then(|| cs / cn as f64),
        sidewalk_mean: (sn > 0).then(|| ss / sn as f64),
        crossing_ticks: cn,
        sidewalk_ticks: sn,
    })
}

/// Measured walking speeds with the default smoothing window.
pub fn measured_walking_speeds(ds: &Dataset) -> Result<SpeedSummary> {
    walking_speeds(ds, PositionSource::Measured, DEFAULT_SPEED_WINDOW)
}

/// Crossing-start parameters estimated from a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StartFit {
    /// Maximum-likelihood exponential rate of the delay between the accepted
    /// gap's start and the first crossing tick.
    pub t_cross_rate: f64,
    pub v_start_mean: f64,
    pub v_start_std: f64,
    pub n: usize,
}

/// Fits the crossing delay rate and start-speed distribution from episodes
/// with an accepted gap event. The start speed is the ground-truth lateral
/// speed at the first crossing tick.
pub fn fit_start_params(ds: &Dataset) -> Result<StartFit> {
    let mut delays = Vec::new();
    let mut speeds = Vec::new();
    for ep in &ds.episodes {
        let Some(k) = ep.ticks.iter().position(|r| r.action == ActionState::Cross) else {
            continue;
        };
        let Some(ev) = ep.events.iter().rev().find(|e| e.is_accepted()) else {
            continue;
        };
        delays.push((ep.ticks[k].t - ev.start_time).max(0.0));
        speeds.push(ep.ticks[k].ped.vy);
    }
    let n = delays.len();
    if n < 2 {
        return Err(Error::Data(format!("{n} crossings with an accepted gap; need at least 2")));
    }
    let mean_delay = delays.iter().sum::<f64>() / n as f64;
    if !(mean_delay > 0.0) {
        return Err(Error::Data("all crossing delays are zero".into()));
    }
    let mu = speeds.iter().sum::<f64>() / n as f64;
    let var = speeds.iter().map(|s| (s - mu).powi(2)).sum::<f64>() / (n - 1) as f64;
    Ok(StartFit {
        t_cross_rate: 1.0 / mean_delay,
        v_start_mean: mu,
        v_start_std: var.sqrt(),
        n,
    })
}
