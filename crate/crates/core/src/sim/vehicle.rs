//! Vehicle behavior profiles, longitudinal control and spawning.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::hybrid::{GeometryConfig, Kinematics};

/// Front-to-rear length used for car following.
pub const VEHICLE_LENGTH: f64 = 4.5;
/// Standstill spacing kept behind a leader.
pub const MIN_SPACING: f64 = 2.0;
/// Time constant of the speed-tracking controller.
pub const SPEED_TIME_CONSTANT: f64 = 1.0;
/// Speed floor used when converting a distance into a time gap.
pub const GAP_SPEED_EPS: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileName {
    Defensive,
    Normal,
    Aggressive,
}

impl ProfileName {
    pub const ALL: [ProfileName; 3] = [
        ProfileName::Defensive,
        ProfileName::Normal,
        ProfileName::Aggressive,
    ];
}

impl fmt::Display for ProfileName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProfileName::Defensive => "defensive",
            ProfileName::Normal => "normal",
            ProfileName::Aggressive => "aggressive",
        })
    }
}

impl FromStr for ProfileName {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        ProfileName::ALL
            .into_iter()
            .find(|p| p.to_string() == s)
            .ok_or_else(|| format!("unknown driving profile {s:?}"))
    }
}

/// Reaction parameters of one driving behavior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DrivingProfile {
    pub name: ProfileName,
    pub reaction_distance: f64,
    pub stopped_distance: f64,
    pub max_accel: f64,
    /// Target speed while a pedestrian is in the wait area; `None` keeps full speed.
    pub slow_speed: Option<f64>,
    pub full_speed: f64,
}

impl DrivingProfile {
    pub fn defensive() -> Self {
        DrivingProfile {
            name: ProfileName::Defensive,
            reaction_distance: 50.0,
            stopped_distance: 3.0,
            max_accel: 3.0,
            slow_speed: Some(4.0),
            full_speed: 15.6,
        }
    }

    pub fn normal() -> Self {
        DrivingProfile {
            name: ProfileName::Normal,
            reaction_distance: 30.0,
            stopped_distance: 2.0,
            max_accel: 5.0,
            slow_speed: Some(7.0),
            full_speed: 15.6,
        }
    }

    pub fn aggressive() -> Self {
        DrivingProfile {
            name: ProfileName::Aggressive,
            reaction_distance: 10.0,
            stopped_distance: 1.0,
            max_accel: 8.0,
            slow_speed: None,
            full_speed: 15.6,
        }
    }

    pub fn named(name: ProfileName) -> Self {
        match name {
            ProfileName::Defensive => Self::defensive(),
            ProfileName::Normal => Self::normal(),
            ProfileName::Aggressive => Self::aggressive(),
        }
    }

    /// Front-bumper position at which the vehicle should come to rest.
    pub fn stop_x(&self, geom: &GeometryConfig<f64>) -> f64 {
        -geom.crosswalk_halfwidth - self.stopped_distance
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub id: u64,
    pub lane: usize,
    /// Front-bumper position along the road; vehicles travel toward +x.
    pub x: f64,
    pub speed: f64,
    pub accel: f64,
}

impl VehicleState {
    /// Constant-velocity extrapolation by `dt` seconds.
    pub fn extrapolate(&self, dt: f64) -> VehicleState {
        VehicleState {
            x: self.x + self.speed * dt,
            accel: 0.0,
            ..*self
        }
    }

    /// Seconds until the front reaches longitudinal position `x`.
    pub fn time_to_reach(&self, x: f64) -> f64 {
        (x - self.x) / self.speed.max(GAP_SPEED_EPS)
    }
}

/// How the vehicle reacts to the pedestrian at this tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Reaction {
    Full,
    Slow,
    Stop,
}

/// Table-driven reaction: only pedestrians ahead of the front and within the
/// reaction distance matter.
pub fn reaction(
    veh: &VehicleState,
    ped: &Kinematics<f64>,
    profile: &DrivingProfile,
    geom: &GeometryConfig<f64>,
) -> Reaction {
    let ahead = ped.x - veh.x;
    if !(ahead > 0.0 && ahead <= profile.reaction_distance) {
        return Reaction::Full;
    }
    if geom.lane_of(ped.y) == Some(veh.lane) {
        return Reaction::Stop;
    }
    if geom.in_wait_area(ped.x, ped.y) && profile.slow_speed.is_some() {
        return Reaction::Slow;
    }
    Reaction::Full
}

/// Advances one vehicle by `dt`.
///
/// The commanded acceleration is the most restrictive of speed tracking
/// toward the reaction's target speed, a constant deceleration that brings
/// the front to rest at the stop line, and a constant deceleration that
/// matches the leader's speed before closing to [`MIN_SPACING`]. It is
/// clamped to `±max_accel`; speed never goes below zero or above full speed.
pub fn av_step(
    veh: &VehicleState,
    ped: &Kinematics<f64>,
    profile: &DrivingProfile,
    geom: &GeometryConfig<f64>,
    dt: f64,
    leader: Option<&VehicleState>,
) -> VehicleState {
    let v = veh.speed;
    let react = reaction(veh, ped, profile, geom);
    let target = match react {
        Reaction::Full => profile.full_speed,
        Reaction::Slow => profile.slow_speed.unwrap_or(profile.full_speed),
        Reaction::Stop => 0.0,
    };
    let mut a = (target - v) / SPEED_TIME_CONSTANT;

    if react == Reaction::Stop {
        let d = profile.stop_x(geom) - veh.x;
        let a_stop = if d > 1e-6 { -v * v / (2.0 * d) } else { f64::NEG_INFINITY };
        a = a.min(a_stop);
    }

    if let Some(lead) = leader {
        let room = lead.x - VEHICLE_LENGTH - veh.x - MIN_SPACING;
        if v > lead.speed {
            let a_follow = if room > 1e-6 {
                -(v * v - lead.speed * lead.speed) / (2.0 * room)
            } else {
                f64::NEG_INFINITY
            };
            a = a.min(a_follow);
        } else if room <= 0.0 {
            a = a.min(0.0);
        }
    }

    a = a.clamp(-profile.max_accel, profile.max_accel);
    a = a.min((profile.full_speed - v) / dt);

    let v_new = v + a * dt;
    let (x_new, v_new) = if v_new < 1e-9 && a < 0.0 {
        // comes to rest inside the tick
        let stop_dist = if a < 0.0 { v * v / (-2.0 * a) } else { 0.0 };
        (veh.x + stop_dist, 0.0)
    } else {
        (veh.x + 0.5 * (v + v_new) * dt, v_new)
    };

    VehicleState {
        id: veh.id,
        lane: veh.lane,
        x: x_new,
        speed: v_new,
        accel: (v_new - v) / dt,
    }
}

/// Spawns vehicles at `spawn_x` with inter-spawn gaps drawn uniformly from a
/// fixed set, lanes drawn uniformly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spawner {
    pub last_spawn: Option<f64>,
    pub pending_gap: f64,
    pub next_id: u64,
}

impl Default for Spawner {
    fn default() -> Self {
        Spawner {
            last_spawn: None,
            pending_gap: 0.0,
            next_id: 0,
        }
    }
}

impl Spawner {
    pub fn with_first_id(next_id: u64) -> Self {
        Spawner {
            next_id,
            ..Default::default()
        }
    }
}

/// Emits a new vehicle when the pending inter-spawn gap has elapsed since the
/// last spawn (immediately on the first call), then draws the next gap.
#[allow(clippy::too_many_arguments)]
pub fn spawn_step<R: Rng + ?Sized>(
    t: f64,
    spawner: &mut Spawner,
    rng: &mut R,
    gap_choices: &[f64],
    spawn_x: f64,
    full_speed: f64,
    n_lanes: usize,
) -> Option<VehicleState> {
    if let Some(last) = spawner.last_spawn {
        if t - last < spawner.pending_gap - 1e-9 {
            return None;
        }
    }
    let lane = rng.random_range(0..n_lanes);
    spawner.pending_gap = gap_choices[rng.random_range(0..gap_choices.len())];
    spawner.last_spawn = Some(t);
    let id = spawner.next_id;
    spawner.next_id += 1;
    Some(VehicleState {
        id,
        lane,
        x: spawn_x,
        speed: full_speed,
        accel: 0.0,
    })
}

/// Nearest vehicle in the same lane ahead of `veh`.
pub fn leader_of<'a>(veh: &VehicleState, traffic: &'a [VehicleState]) -> Option<&'a VehicleState> {
    traffic
        .iter()
        .filter(|o| o.lane == veh.lane && o.id != veh.id && o.x > veh.x)
        .min_by(|a, b| a.x.total_cmp(&b.x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const DT: f64 = 0.1;

    fn geom() -> GeometryConfig<f64> {
        GeometryConfig::default()
    }

    fn car(x: f64, speed: f64) -> VehicleState {
        VehicleState {
            id: 1,
            lane: 0,
            x,
            speed,
            accel: 0.0,
        }
    }

    fn ped_in_lane0() -> Kinematics<f64> {
        Kinematics::new(0.5, 1.5, 0.0, 1.6)
    }

    /// Runs until the vehicle stops or passes the pedestrian; returns the trace.
    fn drive(mut veh: VehicleState, ped: Kinematics<f64>, profile: &DrivingProfile) -> Vec<VehicleState> {
        let g = geom();
        let mut trace = vec![veh];
        for _ in 0..400 {
            veh = av_step(&veh, &ped, profile, &g, DT, None);
            trace.push(veh);
            if veh.speed == 0.0 || veh.x > ped.x {
                break;
            }
        }
        trace
    }

    #[test]
    fn outside_reaction_distance_holds_full_speed() {
        let p = DrivingProfile::defensive();
        let ped = ped_in_lane0();
        // front 60 m before the pedestrian
        let veh = car(ped.x - 60.0, 15.6);
        assert_eq!(reaction(&veh, &ped, &p, &geom()), Reaction::Full);
        let next = av_step(&veh, &ped, &p, &geom(), DT, None);
        assert_eq!(next.speed, 15.6);
        assert_eq!(next.accel, 0.0);
    }

    #[test]
    fn defensive_stops_before_crosswalk_with_margin() {
        let p = DrivingProfile::defensive();
        let g = geom();
        let ped = ped_in_lane0();
        // enters reaction range at exactly 50 m
        let start = car(ped.x - 50.0, 15.6);
        let needed = 15.6f64.powi(2) / (2.0 * 3.0);
        let available = p.stop_x(&g) - start.x;
        assert!(needed < available, "{needed} vs {available}");
        let trace = drive(start, ped, &p);
        let last = trace.last().unwrap();
        assert_eq!(last.speed, 0.0);
        // front at least stopped_distance - 0.1 from the crosswalk near edge
        assert!(-g.crosswalk_halfwidth - last.x >= p.stopped_distance - 0.1);
        assert!(trace.iter().all(|v| v.accel.abs() <= p.max_accel + 1e-9));
    }

    #[test]
    fn aggressive_overshoots_without_exceeding_clamp() {
        let p = DrivingProfile::aggressive();
        let g = geom();
        let ped = ped_in_lane0();
        let start = car(ped.x - 10.0, 15.6);
        let needed = 15.6f64.powi(2) / (2.0 * 8.0);
        assert!((needed - 15.21).abs() < 0.01);
        assert!(needed > p.stop_x(&g) - start.x);
        let trace = drive(start, ped, &p);
        assert!(trace.iter().all(|v| v.accel.abs() <= p.max_accel + 1e-9));
        assert!(trace.iter().all(|v| v.speed >= 0.0));
        let first_brake = &trace[1];
        assert!((first_brake.accel + 8.0).abs() < 1e-9);
    }

    #[test]
    fn wait_area_slows_defensive_not_aggressive() {
        let g = geom();
        let ped = Kinematics::new(0.5, -0.5, 0.0, 0.0);
        let veh = car(-30.0, 15.6);
        assert_eq!(reaction(&veh, &ped, &DrivingProfile::defensive(), &g), Reaction::Slow);
        assert_eq!(reaction(&veh, &ped, &DrivingProfile::aggressive(), &g), Reaction::Full);
        // sidewalk outside the wait area
        let far = Kinematics::new(6.0, -0.5, -1.5, 0.0);
        assert_eq!(reaction(&car(-10.0, 15.6), &far, &DrivingProfile::defensive(), &g), Reaction::Full);
        // other lane counts as neither stop nor wait area
        let lane1 = Kinematics::new(0.5, 5.0, 0.0, 1.6);
        assert_eq!(reaction(&veh, &lane1, &DrivingProfile::defensive(), &g), Reaction::Full);
    }

    #[test]
    fn resumes_full_speed_after_pedestrian_leaves() {
        let p = DrivingProfile::normal();
        let g = geom();
        let mut veh = car(-10.0, 0.0);
        let gone = Kinematics::new(0.5, 8.0, 1.5, 0.0);
        for _ in 0..100 {
            veh = av_step(&veh, &gone, &p, &g, DT, None);
            assert!(veh.speed <= p.full_speed);
            assert!(veh.accel <= p.max_accel + 1e-9);
        }
        assert!(veh.speed > 15.0);
    }

    #[test]
    fn follower_does_not_run_into_stopped_leader() {
        let p = DrivingProfile::normal();
        let g = geom();
        let ped = Kinematics::new(20.0, -5.0, 0.0, 0.0);
        let leader = VehicleState { id: 0, lane: 0, x: 0.0, speed: 0.0, accel: 0.0 };
        let mut veh = car(-60.0, 15.6);
        for _ in 0..300 {
            veh = av_step(&veh, &ped, &p, &g, DT, Some(&leader));
        }
        assert_eq!(veh.speed, 0.0);
        assert!(veh.x <= leader.x - VEHICLE_LENGTH);
    }

    #[test]
    fn spawn_schedule() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut sp = Spawner::default();
        let first = spawn_step(0.0, &mut sp, &mut rng, &[3.0, 5.0], -150.0, 15.6, 2).unwrap();
        assert_eq!((first.x, first.speed, first.id), (-150.0, 15.6, 0));

        let mut times = vec![0.0];
        let mut t = 0.0;
        let mut lanes = [0usize; 2];
        while times.len() < 10_001 {
            t += DT;
            // integer tick count keeps the clock exact
            let tt = (t / DT).round() * DT;
            if let Some(v) = spawn_step(tt, &mut sp, &mut rng, &[3.0, 5.0], -150.0, 15.6, 2) {
                times.push(tt);
                lanes[v.lane] += 1;
            }
        }
        let gaps: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
        let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
        assert!((3.9..=4.1).contains(&mean), "{mean}");
        assert!(gaps.iter().all(|g| (g - 3.0).abs() < 0.11 || (g - 5.0).abs() < 0.11));
        assert!(lanes[0] > 4500 && lanes[1] > 4500);
    }

    #[test]
    fn spawn_is_deterministic() {
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(99);
            let mut sp = Spawner::default();
            (0..1000)
                .filter_map(|i| spawn_step(i as f64 * DT, &mut sp, &mut rng, &[3.0, 5.0], -150.0, 15.6, 2))
                .map(|v| (v.id, v.lane))
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }
}
