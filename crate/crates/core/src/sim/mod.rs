//! Synthetic pedestrian/vehicle scenarios with a parametric pedestrian oracle.
//!
//! Each episode has its own traffic stream, warmed up before the pedestrian
//! appears, and its own generator seeded from the master seed and the episode
//! index, so episodes can run in any order or in parallel.

pub mod dataset;
pub mod pedestrian;
pub mod vehicle;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hybrid::GeometryConfig;

pub use dataset::{
    generate_dataset, generate_episode, read_dataset, validate_episode, write_dataset, Dataset,
    DatasetSummary, Episode, TickRecord, Violation,
};
pub use pedestrian::{gaze_step, ped_decide, ped_oracle_step, PedAgent, PedPhase};
pub use vehicle::{
    av_step, leader_of, spawn_step, DrivingProfile, ProfileName, Reaction, Spawner, VehicleState,
};

/// splitmix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for item `index` of `stream`, independent of evaluation order.
pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    mix(mix(mix(master) ^ stream) ^ index)
}

/// Driving profile used for the episodes of a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileChoice {
    Defensive,
    Normal,
    Aggressive,
    /// Episode `i` uses the `i mod 3`-th profile.
    Mixed,
}

impl ProfileChoice {
    pub fn for_episode(self, i: usize) -> ProfileName {
        match self {
            ProfileChoice::Defensive => ProfileName::Defensive,
            ProfileChoice::Normal => ProfileName::Normal,
            ProfileChoice::Aggressive => ProfileName::Aggressive,
            ProfileChoice::Mixed => ProfileName::ALL[i % ProfileName::ALL.len()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub dt: f64,
    pub n_crossings: usize,
    pub spawn_gap_choices: Vec<f64>,
    pub spawn_x: f64,
    /// Vehicles are dropped once their front passes this position.
    pub despawn_x: f64,
    pub full_speed: f64,
    pub profile: ProfileChoice,
    pub seed: u64,
    pub geometry: GeometryConfig<f64>,
    /// Standard deviation of the position measurement noise, per axis.
    pub meas_sigma: f64,
    /// Traffic runs this long before the pedestrian appears.
    pub warmup: f64,
    /// Episodes are cut after this long; the pedestrian normally finishes well before.
    pub max_episode_time: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: 0.1,
            n_crossings: 200,
            spawn_gap_choices: vec![3.0, 5.0],
            spawn_x: -150.0,
            despawn_x: 100.0,
            full_speed: 15.6,
            profile: ProfileChoice::Mixed,
            seed: 42,
            geometry: GeometryConfig::default(),
            meas_sigma: 0.1,
            warmup: 15.0,
            max_episode_time: 300.0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid("dt", "must be finite and > 0"));
        }
        if self.n_crossings < 1 {
            return Err(Error::invalid("n_crossings", "must be >= 1"));
        }
        if self.spawn_gap_choices.is_empty() || self.spawn_gap_choices.iter().any(|g| !(*g > 0.0)) {
            return Err(Error::invalid("spawn_gap_choices", "need at least one positive gap"));
        }
        if !(self.despawn_x > self.spawn_x) {
            return Err(Error::invalid("despawn_x", "must lie beyond spawn_x"));
        }
        if !(self.full_speed > 0.0) {
            return Err(Error::invalid("full_speed", "must be > 0"));
        }
        if !(self.meas_sigma >= 0.0) {
            return Err(Error::invalid("meas_sigma", "must be >= 0"));
        }
        if !(self.warmup >= 0.0) || !(self.max_episode_time > 0.0) {
            return Err(Error::invalid("warmup", "warmup >= 0 and max_episode_time > 0 required"));
        }
        self.geometry.validate()
    }

    pub fn profile_for(&self, episode: usize) -> DrivingProfile {
        DrivingProfile {
            full_speed: self.full_speed,
            ..DrivingProfile::named(self.profile.for_episode(episode))
        }
    }
}

/// Parameters of the synthetic pedestrian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PedOracleConfig {
    /// Per-pedestrian critical gap `τ₀ ~ N(mean, std)`.
    pub critical_gap_mean: f64,
    pub critical_gap_std: f64,
    /// Threshold reduction per second waited.
    pub wait_decay: f64,
    pub min_gap: f64,
    pub sidewalk_speed_mean: f64,
    pub sidewalk_speed_std: f64,
    pub crossing_speed_mean: f64,
    pub crossing_speed_std: f64,
    /// Rate of the exponential delay between accepting and stepping off.
    pub start_delay_rate: f64,
    pub gaze_p_wait: f64,
    pub gaze_p_walk: f64,
    /// Initial longitudinal distance from the crosswalk centerline, drawn uniformly.
    pub start_distance: [f64; 2],
    /// Longitudinal distance from the centerline where the pedestrian stops to wait.
    pub stop_distance: [f64; 2],
    /// Lateral position on the near sidewalk.
    pub sidewalk_y: f64,
    /// Distance walked away from the crosswalk after crossing.
    pub walk_away_distance: f64,
}

impl Default for PedOracleConfig {
    fn default() -> Self {
        PedOracleConfig {
            critical_gap_mean: 5.3,
            critical_gap_std: 0.2,
            wait_decay: 0.1,
            min_gap: 1.5,
            sidewalk_speed_mean: 1.52,
            sidewalk_speed_std: 0.15,
            crossing_speed_mean: 1.68,
            crossing_speed_std: 0.15,
            start_delay_rate: 2.5,
            gaze_p_wait: 0.8,
            gaze_p_walk: 0.4,
            start_distance: [8.0, 15.0],
            stop_distance: [0.3, 1.2],
            sidewalk_y: -0.5,
            walk_away_distance: 6.0,
        }
    }
}

impl PedOracleConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("critical_gap_mean", self.critical_gap_mean),
            ("min_gap", self.min_gap),
            ("sidewalk_speed_mean", self.sidewalk_speed_mean),
            ("crossing_speed_mean", self.crossing_speed_mean),
            ("start_delay_rate", self.start_delay_rate),
            ("walk_away_distance", self.walk_away_distance),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, format!("must be finite and > 0, got {v}")));
            }
        }
        let non_negative = [
            ("critical_gap_std", self.critical_gap_std),
            ("wait_decay", self.wait_decay),
            ("sidewalk_speed_std", self.sidewalk_speed_std),
            ("crossing_speed_std", self.crossing_speed_std),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, format!("must be finite and >= 0, got {v}")));
            }
        }
        for (name, p) in [("gaze_p_wait", self.gaze_p_wait), ("gaze_p_walk", self.gaze_p_walk)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid(name, format!("must be a probability, got {p}")));
            }
        }
        let [s0, s1] = self.start_distance;
        let [w0, w1] = self.stop_distance;
        if !(0.0 < w0 && w0 <= w1 && w1 < s0 && s0 <= s1) {
            return Err(Error::invalid(
                "start_distance",
                "need 0 < stop_distance[0] <= stop_distance[1] < start_distance[0] <= start_distance[1]",
            ));
        }
        Ok(())
    }

    /// Acceptance threshold after waiting `wait_time` seconds.
    pub fn threshold(&self, tau0: f64, wait_time: f64) -> f64 {
        self.min_gap.max(tau0 - self.wait_decay * wait_time)
    }
}
