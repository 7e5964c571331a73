//! Traffic gaps, the features observed at gap start, and the classifiers that
//! turn them into a crossing probability.

mod condprob;
mod logistic;
mod model;
mod platt;
mod svm;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::hybrid::{ActionState, GeometryConfig, Kinematics};
use crate::sim::VehicleState;

pub use condprob::CondProbParams;
pub use logistic::LogisticParams;
pub use model::{
    evaluate, grid_search_svm, rank_features, split_events, train, train_on, ConstantModel,
    CrossingModel, GapModel, GridPoint, ModelKind, ModelParams, Normalization, RankingRow,
    TrainSettings, MIN_EVENTS, MODEL_FORMAT_VERSION,
};
pub use platt::PlattSigmoid;
pub use svm::{PolyKernel, SvmParams};

/// Length of the look-back window for gaze ratio and pedestrian speed.
pub const FEATURE_WINDOW: f64 = 1.0;
/// Distance reported when no vehicle is approaching.
pub const NO_VEHICLE_DISTANCE: f64 = 250.0;
/// Label window cap for gaps without an approaching vehicle.
pub const LABEL_HORIZON: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    AvDistance,
    AvSpeed,
    WaitTime,
    GazeRatio,
    CurbDistance,
    CwDistance,
    PedSpeed,
}

impl Feature {
    pub const ALL: [Feature; 7] = [
        Feature::AvDistance,
        Feature::AvSpeed,
        Feature::WaitTime,
        Feature::GazeRatio,
        Feature::CurbDistance,
        Feature::CwDistance,
        Feature::PedSpeed,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Feature::AvDistance => "av_distance",
            Feature::AvSpeed => "av_speed",
            Feature::WaitTime => "wait_time",
            Feature::GazeRatio => "gaze_ratio",
            Feature::CurbDistance => "curb_distance",
            Feature::CwDistance => "cw_distance",
            Feature::PedSpeed => "ped_speed",
        }
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Feature {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Feature::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| format!("unknown feature {s:?}"))
    }
}

/// Inputs of the gap-acceptance model, observed at gap start.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FeatureVector {
    pub av_distance: f64,
    pub av_speed: f64,
    pub wait_time: f64,
    pub gaze_ratio: f64,
    pub curb_distance: f64,
    pub cw_distance: f64,
    pub ped_speed: f64,
}

impl FeatureVector {
    pub fn to_array(&self) -> [f64; 7] {
        [
            self.av_distance,
            self.av_speed,
            self.wait_time,
            self.gaze_ratio,
            self.curb_distance,
            self.cw_distance,
            self.ped_speed,
        ]
    }

    pub fn from_array(a: [f64; 7]) -> Self {
        FeatureVector {
            av_distance: a[0],
            av_speed: a[1],
            wait_time: a[2],
            gaze_ratio: a[3],
            curb_distance: a[4],
            cw_distance: a[5],
            ped_speed: a[6],
        }
    }

    pub fn get(&self, f: Feature) -> f64 {
        self.to_array()[f.index()]
    }

    /// Values of the selected features, in the given order.
    pub fn select(&self, features: &[Feature]) -> Vec<f64> {
        let a = self.to_array();
        features.iter().map(|f| a[f.index()]).collect()
    }

    pub fn is_valid(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite() && *v >= 0.0) && self.gaze_ratio <= 1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GapLabel {
    Accepted,
    Rejected,
    Undetermined,
}

impl GapLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            GapLabel::Accepted => "accepted",
            GapLabel::Rejected => "rejected",
            GapLabel::Undetermined => "undetermined",
        }
    }

    pub fn is_labeled(self) -> bool {
        self != GapLabel::Undetermined
    }
}

impl fmt::Display for GapLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GapLabel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "accepted" => Ok(GapLabel::Accepted),
            "rejected" => Ok(GapLabel::Rejected),
            "undetermined" => Ok(GapLabel::Undetermined),
            _ => Err(format!("unknown gap label {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapEvent {
    pub gap_id: String,
    pub start_time: f64,
    /// Seconds until the next approaching vehicle reaches the pedestrian; `+∞` without one.
    pub traffic_gap: f64,
    pub features: FeatureVector,
    pub label: GapLabel,
}

impl GapEvent {
    pub fn is_accepted(&self) -> bool {
        self.label == GapLabel::Accepted
    }
}

/// Why a gap started.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GapCause {
    /// The given vehicle's front just passed the pedestrian.
    VehiclePassed(u64),
    /// The pedestrian entered the decision zone during a gap.
    EnteredZone,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapStart {
    pub traffic_gap: f64,
    pub cause: GapCause,
}

/// Nearest vehicle whose front has not yet reached longitudinal position `x`,
/// as `(distance, vehicle)`.
pub fn nearest_approaching(traffic: &[VehicleState], x: f64) -> Option<(f64, &VehicleState)> {
    traffic
        .iter()
        .filter(|v| v.x < x)
        .map(|v| (x - v.x, v))
        .min_by(|a, b| a.0.total_cmp(&b.0))
}

/// Time gap to the next approaching vehicle at longitudinal position `x`.
pub fn traffic_gap_at(traffic: &[VehicleState], x: f64) -> f64 {
    nearest_approaching(traffic, x).map_or(f64::INFINITY, |(_, v)| v.time_to_reach(x))
}

/// The vehicle that most recently passed longitudinal position `x`.
pub fn last_passed(traffic: &[VehicleState], x: f64) -> Option<&VehicleState> {
    traffic
        .iter()
        .filter(|v| v.x >= x)
        .min_by(|a, b| a.x.total_cmp(&b.x))
}

/// Detects a gap start for a pedestrian at `ped` this tick.
///
/// A gap starts when a vehicle's front crosses the pedestrian's longitudinal
/// position between `prev_traffic` and `traffic`, or when the pedestrian
/// enters the decision zone this tick (`prev_ped_x` outside it). Nothing is
/// emitted outside the zone or unless approaching or waiting.
pub fn detect_gap_start(
    traffic: &[VehicleState],
    prev_traffic: &[VehicleState],
    ped: &Kinematics<f64>,
    action: ActionState,
    prev_ped_x: Option<f64>,
    geom: &GeometryConfig<f64>,
) -> Option<GapStart> {
    if !matches!(action, ActionState::Approach | ActionState::Wait) {
        return None;
    }
    if !geom.in_decision_zone(ped.x) {
        return None;
    }
    let passed = traffic.iter().find(|v| {
        v.x >= ped.x
            && prev_traffic
                .iter()
                .find(|p| p.id == v.id)
                .is_some_and(|p| p.x < ped.x)
    });
    let cause = match passed {
        Some(v) => GapCause::VehiclePassed(v.id),
        None if prev_ped_x.is_some_and(|px| !geom.in_decision_zone(px)) => GapCause::EnteredZone,
        None => return None,
    };
    Some(GapStart {
        traffic_gap: traffic_gap_at(traffic, ped.x),
        cause,
    })
}

/// One sample of pedestrian history with the gaze indicator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PedSample {
    pub t: f64,
    pub kin: Kinematics<f64>,
    pub gaze: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtractedFeatures {
    pub features: FeatureVector,
    /// History did not cover the full look-back window.
    pub partial: bool,
}

/// Builds the feature vector at time `t` from the pedestrian history (which
/// must end at `t`), the traffic at `t`, and the wait entry time if waiting.
pub fn extract_features(
    history: &[PedSample],
    traffic: &[VehicleState],
    wait_entry_time: Option<f64>,
    geom: &GeometryConfig<f64>,
    t: f64,
) -> ExtractedFeatures {
    let from = t - FEATURE_WINDOW + 1e-6;
    let window: Vec<&PedSample> = history
        .iter()
        .filter(|s| s.t > from && s.t <= t + 1e-9)
        .collect();
    let current = history
        .last()
        .map(|s| s.kin)
        .unwrap_or_default();
    let partial = history.first().is_none_or(|s| s.t > t - FEATURE_WINDOW + 1e-6);

    let n = window.len().max(1) as f64;
    let gaze_ratio = window.iter().filter(|s| s.gaze).count() as f64 / n;
    let ped_speed = window.iter().map(|s| s.kin.speed()).sum::<f64>() / n;

    let (av_distance, av_speed) = match nearest_approaching(traffic, current.x) {
        Some((d, v)) => (d, v.speed),
        None => (NO_VEHICLE_DISTANCE, 0.0),
    };

    ExtractedFeatures {
        features: FeatureVector {
            av_distance,
            av_speed,
            wait_time: wait_entry_time.map_or(0.0, |w| (t - w).max(0.0)),
            gaze_ratio,
            curb_distance: (current.y - geom.curb_y).abs(),
            cw_distance: current.x.abs(),
            ped_speed,
        },
        partial,
    }
}

/// Labels a gap from the pedestrian's lateral trajectory `(t, y)`.
///
/// The window runs from `start_time` for `min(traffic_gap, LABEL_HORIZON)`
/// seconds, cut short at `window_end` (the next gap's start) if given.
/// Accepted iff `y` first exceeds the curb inside the window; undetermined if
/// the trajectory ends before the window closes without a crossing.
pub fn label_gap(
    event: &GapEvent,
    trajectory: &[(f64, f64)],
    curb_y: f64,
    window_end: Option<f64>,
) -> GapEvent {
    let mut end = event.start_time + event.traffic_gap.min(LABEL_HORIZON);
    if let Some(cap) = window_end {
        end = end.min(cap);
    }
    let mut label = GapLabel::Undetermined;
    for &(t, y) in trajectory {
        if t < event.start_time - 1e-9 {
            continue;
        }
        if t >= end - 1e-9 {
            label = GapLabel::Rejected;
            break;
        }
        if y > curb_y {
            label = GapLabel::Accepted;
            break;
        }
    }
    GapEvent {
        label,
        ..event.clone()
    }
}
