//! Ground-truth pedestrian: a phase machine that walks to the curb, waits for
//! an acceptable gap, crosses and walks away.

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use super::PedOracleConfig;
use crate::gap::GapStart;
use crate::hybrid::{ActionState, GeometryConfig, Kinematics};

/// Gaussian draw redrawn until it is at least `floor`; falls back to `floor`
/// after a bounded number of attempts.
pub(crate) fn truncated_normal<R: Rng + ?Sized>(rng: &mut R, mean: f64, std: f64, floor: f64) -> f64 {
    if std <= 0.0 {
        return mean.max(floor);
    }
    let normal = Normal::new(mean, std).expect("std checked finite and > 0");
    for _ in 0..1000 {
        let v = normal.sample(rng);
        if v >= floor {
            return v;
        }
    }
    floor
}

/// Slowest walking speed the oracle draws.
const MIN_WALK_SPEED: f64 = 0.5;
/// Lateral clearance beyond the far edge of the road where the crossing ends.
const FAR_SIDEWALK_OFFSET: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PedPhase {
    Approach,
    Wait,
    Cross,
    WalkAway,
    Done,
}

impl PedPhase {
    pub fn action(self) -> ActionState {
        match self {
            PedPhase::Approach => ActionState::Approach,
            PedPhase::Wait => ActionState::Wait,
            PedPhase::Cross => ActionState::Cross,
            PedPhase::WalkAway | PedPhase::Done => ActionState::WalkAway,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PedAgent {
    pub kin: Kinematics<f64>,
    pub phase: PedPhase,
    /// Side of the crosswalk the pedestrian comes from, `±1`.
    pub side: f64,
    /// Longitudinal position where the pedestrian stops at the curb.
    pub stop_x: f64,
    pub sidewalk_speed: f64,
    pub crossing_speed: f64,
    /// Personal critical gap.
    pub tau0: f64,
    pub wait_entry: Option<f64>,
    /// Time at which the pedestrian will step off, once a gap is accepted.
    pub cross_at: Option<f64>,
    pub far_y: f64,
}

impl PedAgent {
    pub fn spawn<R: Rng + ?Sized>(oracle: &PedOracleConfig, geom: &GeometryConfig<f64>, rng: &mut R) -> Self {
        let side = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let [s0, s1] = oracle.start_distance;
        let [w0, w1] = oracle.stop_distance;
        let start = if s1 > s0 { rng.random_range(s0..s1) } else { s0 };
        let stop = if w1 > w0 { rng.random_range(w0..w1) } else { w0 };
        let sidewalk_speed = truncated_normal(
            rng,
            oracle.sidewalk_speed_mean,
            oracle.sidewalk_speed_std,
            MIN_WALK_SPEED,
        );
        let crossing_speed = truncated_normal(
            rng,
            oracle.crossing_speed_mean,
            oracle.crossing_speed_std,
            MIN_WALK_SPEED,
        );
        let tau0 = truncated_normal(rng, oracle.critical_gap_mean, oracle.critical_gap_std, 0.0);
        PedAgent {
            kin: Kinematics::new(side * start, oracle.sidewalk_y, -side * sidewalk_speed, 0.0),
            phase: PedPhase::Approach,
            side,
            stop_x: side * stop,
            sidewalk_speed,
            crossing_speed,
            tau0,
            wait_entry: None,
            cross_at: None,
            far_y: geom.curb_y + geom.road_width() + FAR_SIDEWALK_OFFSET,
        }
    }

    pub fn action(&self) -> ActionState {
        self.phase.action()
    }

    pub fn is_done(&self) -> bool {
        self.phase == PedPhase::Done
    }
}

/// Moves the pedestrian from `t - dt` to `t`, switching phase where the
/// current one ends. Velocities are always axis-aligned.
pub fn ped_oracle_step(agent: &mut PedAgent, t: f64, dt: f64, walk_away_distance: f64) {
    let k = &mut agent.kin;
    match agent.phase {
        PedPhase::Approach => {
            k.x += k.vx * dt;
            if agent.side * (k.x - agent.stop_x) <= 0.0 {
                k.x = agent.stop_x;
                k.vx = 0.0;
                agent.phase = PedPhase::Wait;
                agent.wait_entry = Some(t);
            }
        }
        PedPhase::Wait => {
            if agent.cross_at.is_some_and(|c| c <= t + 1e-9) {
                agent.phase = PedPhase::Cross;
                agent.wait_entry = None;
                k.vy = agent.crossing_speed;
                k.y += k.vy * dt;
            }
        }
        PedPhase::Cross => {
            k.y += k.vy * dt;
            if k.y >= agent.far_y {
                k.y = agent.far_y;
                k.vy = 0.0;
                k.vx = agent.side * agent.sidewalk_speed;
                agent.phase = PedPhase::WalkAway;
            }
        }
        PedPhase::WalkAway => {
            k.x += k.vx * dt;
            if (k.x - agent.stop_x).abs() >= walk_away_distance {
                agent.phase = PedPhase::Done;
            }
        }
        PedPhase::Done => {}
    }
}

/// Applies the acceptance rule at a gap start. Returns whether the gap was
/// accepted, or `None` when the pedestrian does not evaluate it (not
/// approaching or waiting, or already committed to a gap).
pub fn ped_decide<R: Rng + ?Sized>(
    agent: &mut PedAgent,
    gap: &GapStart,
    t: f64,
    oracle: &PedOracleConfig,
    rng: &mut R,
) -> Option<bool> {
    if !matches!(agent.phase, PedPhase::Approach | PedPhase::Wait) || agent.cross_at.is_some() {
        return None;
    }
    let wait_time = agent.wait_entry.map_or(0.0, |w| t - w);
    let accepted = gap.traffic_gap > oracle.threshold(agent.tau0, wait_time);
    if accepted {
        let delay: f64 = Exp::new(oracle.start_delay_rate)
            .expect("rate checked > 0")
            .sample(rng);
        agent.cross_at = Some(t + delay.min(0.5 * gap.traffic_gap));
    }
    Some(accepted)
}

/// Gaze-at-vehicle indicator for one tick.
pub fn gaze_step<R: Rng + ?Sized>(phase: PedPhase, rng: &mut R, oracle: &PedOracleConfig) -> bool {
    let p = if phase == PedPhase::Wait {
        oracle.gaze_p_wait
    } else {
        oracle.gaze_p_walk
    };
    rng.random_bool(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gap::GapCause;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn agent() -> PedAgent {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut a = PedAgent::spawn(&PedOracleConfig::default(), &GeometryConfig::default(), &mut rng);
        a.tau0 = 4.5;
        a
    }

    fn gap(g: f64) -> GapStart {
        GapStart {
            traffic_gap: g,
            cause: GapCause::VehiclePassed(0),
        }
    }

    #[test]
    fn decays_threshold_with_wait() {
        let oracle = PedOracleConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut a = agent();
        a.phase = PedPhase::Wait;
        a.wait_entry = Some(0.0);
        assert_eq!(ped_decide(&mut a, &gap(3.8), 10.0, &oracle, &mut rng), Some(true));
        let c = a.cross_at.unwrap();
        assert!((10.0..=10.0 + 1.9).contains(&c));
        // committed: further gaps are not evaluated
        assert_eq!(ped_decide(&mut a, &gap(10.0), 10.5, &oracle, &mut rng), None);
    }

    #[test]
    fn rejects_short_gap_and_accepts_empty_road() {
        let oracle = PedOracleConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut a = agent();
        a.phase = PedPhase::Wait;
        a.wait_entry = Some(0.0);
        assert_eq!(ped_decide(&mut a, &gap(3.0), 1.0, &oracle, &mut rng), Some(false));
        assert_eq!(ped_decide(&mut a, &gap(f64::INFINITY), 1.1, &oracle, &mut rng), Some(true));
    }

    #[test]
    fn crossing_duration() {
        let geom = GeometryConfig::default();
        let mut a = agent();
        a.phase = PedPhase::Cross;
        a.kin = Kinematics::new(0.5, 0.0, 0.0, 1.6);
        a.far_y = geom.road_width();
        let dt = 0.001;
        let mut t = 0.0;
        while a.phase == PedPhase::Cross {
            t += dt;
            ped_oracle_step(&mut a, t, dt, 6.0);
        }
        assert!((t - 7.4 / 1.6).abs() < 2.0 * dt, "{t}");
    }

    #[test]
    fn full_phase_sequence_is_axis_aligned() {
        let oracle = PedOracleConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut a = agent();
        let dt = 0.1;
        let mut seq = vec![a.action()];
        let mut t = 0.0;
        while !a.is_done() && t < 100.0 {
            t += dt;
            ped_oracle_step(&mut a, t, dt, oracle.walk_away_distance);
            if a.phase == PedPhase::Wait && a.cross_at.is_none() {
                ped_decide(&mut a, &gap(f64::INFINITY), t, &oracle, &mut rng);
            }
            assert!(a.kin.vx.abs().min(a.kin.vy.abs()) < 0.05);
            if *seq.last().unwrap() != a.action() {
                seq.push(a.action());
            }
        }
        use ActionState::*;
        assert_eq!(seq, vec![Approach, Wait, Cross, WalkAway]);
    }

    #[test]
    fn gaze_extremes() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let o = PedOracleConfig {
            gaze_p_walk: 0.0,
            gaze_p_wait: 1.0,
            ..Default::default()
        };
        assert!((0..100).all(|_| !gaze_step(PedPhase::Approach, &mut rng, &o)));
        assert!((0..100).all(|_| gaze_step(PedPhase::Wait, &mut rng, &o)));
    }

    #[test]
    fn truncation_floor() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert!((0..10_000).all(|_| truncated_normal(&mut rng, 0.5, 1.0, 0.3) >= 0.3));
        assert_eq!(truncated_normal(&mut rng, 1.6, 0.0, 0.3), 1.6);
    }
}
