//! Real-time predict/update loop: the filter estimates the pedestrian state,
//! and every tick the hybrid model is rolled out over the prediction horizon,
//! with predicted gaps evaluated by the gap-acceptance model.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gap::{nearest_approaching, last_passed, CrossingModel, FeatureVector, FEATURE_WINDOW, NO_VEHICLE_DISTANCE};
use crate::hybrid::{
    classify_guards, reset_velocities, transition, AcceptedGap, ActionState, GapKey, GeometryConfig,
    HybridState, Kinematics,
};
use crate::linalg::Mat4;
use crate::sim::pedestrian::truncated_normal;
use crate::sim::{derive_seed, VehicleState};
use crate::tracker::{cv_predict, cv_step, kalman_update, Measurement, NoiseConfig};

/// Smallest crossing start speed drawn.
pub const V_START_FLOOR: f64 = 0.3;
const ROLLOUT_STREAM: u64 = 0x2011;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RolloutMode {
    /// Mean crossing delay `1/λ` and mean start speed `μ`; consumes no randomness.
    DeterministicMean,
    /// Draws from the delay and start-speed distributions.
    Sampled,
}

impl FromStr for RolloutMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "deterministic_mean" => Ok(RolloutMode::DeterministicMean),
            "sampled" => Ok(RolloutMode::Sampled),
            _ => Err(format!("unknown rollout mode {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PredictionConfig {
    pub horizon_steps: usize,
    pub dt: f64,
    /// Rate `λ` of the exponential crossing delay.
    pub t_cross_rate: f64,
    pub v_start_mean: f64,
    pub v_start_std: f64,
    /// Walking speed used by velocity resets when the current speed is negligible.
    pub v_walk_default: f64,
    pub mode: RolloutMode,
    pub seed: u64,
}

impl Default for PredictionConfig {
    fn default() -> Self {
        PredictionConfig {
            horizon_steps: 60,
            dt: 0.1,
            t_cross_rate: 2.5,
            v_start_mean: 1.6,
            v_start_std: 0.15,
            v_walk_default: 1.5,
            mode: RolloutMode::DeterministicMean,
            seed: 0,
        }
    }
}

impl PredictionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon_steps < 1 {
            return Err(Error::invalid("horizon_steps", "must be >= 1"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid("dt", "must be finite and > 0"));
        }
        if !(self.t_cross_rate > 0.0 && self.t_cross_rate.is_finite()) {
            return Err(Error::invalid("t_cross_rate", "must be finite and > 0"));
        }
        if !(self.v_start_mean > 0.0) {
            return Err(Error::invalid("v_start_mean", "must be > 0"));
        }
        if !(self.v_start_std >= 0.0) {
            return Err(Error::invalid("v_start_std", "must be >= 0"));
        }
        if !(self.v_walk_default > 0.0) {
            return Err(Error::invalid("v_walk_default", "must be > 0"));
        }
        Ok(())
    }
}

/// Exponentially distributed crossing delay with rate `lambda`.
pub fn sample_t_cross<R: Rng + ?Sized>(rng: &mut R, lambda: f64) -> f64 {
    Exp::new(lambda).expect("lambda > 0").sample(rng)
}

/// Gaussian crossing start speed, redrawn below [`V_START_FLOOR`].
pub fn sample_v_start<R: Rng + ?Sized>(rng: &mut R, mu: f64, sigma: f64) -> f64 {
    truncated_normal(rng, mu, sigma, V_START_FLOOR)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RolloutStep {
    pub t: f64,
    pub kin: Kinematics<f64>,
    pub action: ActionState,
    /// Present only where a gap was evaluated.
    pub p_cross: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapEvaluation {
    pub step: usize,
    pub p_cross: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictedRollout {
    /// Steps `1..=N`.
    pub steps: Vec<RolloutStep>,
    pub gap_evaluations: Vec<GapEvaluation>,
    /// Full hybrid state after the first step, including gap bookkeeping.
    pub next_state: HybridState<f64>,
}

impl PredictedRollout {
    /// First step predicted to be crossing.
    pub fn crossing_start(&self) -> Option<f64> {
        self.steps.iter().find(|s| s.action == ActionState::Cross).map(|s| s.t)
    }
}

/// Identity of the gap the pedestrian at `x` is in.
fn current_gap(traffic: &[VehicleState], x: f64) -> GapKey {
    last_passed(traffic, x).map_or(GapKey::Open, |v| GapKey::After(v.id))
}

fn rollout_features(
    kin: &Kinematics<f64>,
    traffic: &[VehicleState],
    wait_time: f64,
    gaze: f64,
    speeds: &[f64],
    geom: &GeometryConfig<f64>,
) -> FeatureVector {
    let (av_distance, av_speed) = match nearest_approaching(traffic, kin.x) {
        Some((d, v)) => (d, v.speed),
        None => (NO_VEHICLE_DISTANCE, 0.0),
    };
    FeatureVector {
        av_distance,
        av_speed,
        wait_time: wait_time.max(0.0),
        gaze_ratio: gaze.clamp(0.0, 1.0),
        curb_distance: (kin.y - geom.curb_y).abs(),
        cw_distance: kin.x.abs(),
        ped_speed: speeds.iter().sum::<f64>() / speeds.len().max(1) as f64,
    }
}

/// Decorrelates the velocity block and sets its variances to at least `var`.
fn inflate_velocity(cov: &Mat4<f64>, var: f64) -> Mat4<f64> {
    let mut c = *cov;
    for i in 2..4 {
        for j in 0..4 {
            if i != j {
                c[(i, j)] = 0.0;
                c[(j, i)] = 0.0;
            }
        }
        c[(i, i)] = c[(i, i)].max(var);
    }
    c
}

/// Rolls the hybrid model forward `N` steps from `state`.
///
/// Per step: vehicles advance at constant velocity; if the pedestrian is
/// predicted to be waiting inside the decision zone in a gap not yet decided,
/// the gap is evaluated once and, when its probability exceeds one half, a
/// crossing delay and start speed are attached. Then the transition function
/// runs, velocities are reset on any change of action, and the continuous
/// state takes one constant-velocity step (held in `Wait`).
#[allow(clippy::too_many_arguments)]
pub fn predict_horizon<M: CrossingModel + ?Sized>(
    state: &HybridState<f64>,
    traffic: &[VehicleState],
    gaze_last: f64,
    model: &M,
    cfg: &PredictionConfig,
    noise: &NoiseConfig<f64>,
    geom: &GeometryConfig<f64>,
) -> Result<PredictedRollout> {
    let dt = cfg.dt;
    let mut rng = match cfg.mode {
        RolloutMode::Sampled => Some(ChaCha8Rng::seed_from_u64(derive_seed(
            cfg.seed,
            ROLLOUT_STREAM,
            state.t.to_bits(),
        ))),
        RolloutMode::DeterministicMean => None,
    };
    let window = (FEATURE_WINDOW / dt).round().max(1.0) as usize;
    let speed0 = state.kin.speed();
    let mut speeds = vec![speed0; window];
    let v_walk = if speed0 > geom.epsilon_v { speed0 } else { cfg.v_walk_default };

    let mut st = *state;
    let mut vehicles = traffic.to_vec();
    let mut steps = Vec::with_capacity(cfg.horizon_steps);
    let mut evaluations = Vec::new();
    let mut next_state = None;

    for k in 1..=cfg.horizon_steps {
        let t = state.t + k as f64 * dt;
        vehicles.iter_mut().for_each(|v| *v = v.extrapolate(dt));

        let mut p_step = None;
        if st.action == ActionState::Wait && geom.in_decision_zone(st.kin.x) && st.accepted_gap.is_none() {
            let key = current_gap(&vehicles, st.kin.x);
            if st.evaluated_gap != Some(key) {
                let wait = st.wait_entry_time.map_or(0.0, |w| t - w);
                let f = rollout_features(&st.kin, &vehicles, wait, gaze_last, &speeds, geom);
                let p = model.crossing_probability(&f);
                let accepted = p > 0.5;
                st.evaluated_gap = Some(key);
                if accepted {
                    let (delay, v_start) = match rng.as_mut() {
                        Some(r) => (
                            sample_t_cross(r, cfg.t_cross_rate),
                            sample_v_start(r, cfg.v_start_mean, cfg.v_start_std),
                        ),
                        None => (1.0 / cfg.t_cross_rate, cfg.v_start_mean),
                    };
                    st.accepted_gap = Some(AcceptedGap {
                        acceptance_time: t,
                        t_cross_delay: delay,
                        v_start,
                        p_cross: p,
                    });
                }
                evaluations.push(GapEvaluation {
                    step: k,
                    p_cross: p,
                    accepted,
                });
                p_step = Some(p);
            }
        }

        let p_cross = st.accepted_gap.map_or(0.0, |g| g.p_cross);
        let prev = st.action;
        let next = transition(prev, &st.kin, p_cross, t, &st, geom);
        let mut kin = st.kin;
        if next != prev {
            let v_start = st.accepted_gap.map_or(cfg.v_start_mean, |g| g.v_start);
            kin = reset_velocities(&kin, prev, next, v_start, v_walk)?;
            st.cov = inflate_velocity(&st.cov, 10.0 * noise.q_vel);
            st.enter(next, t);
        }
        let (kin, cov) = cv_predict(&kin, &st.cov, dt, noise, next)?;
        st.kin = kin;
        st.cov = cov;
        st.t = t;
        speeds.remove(0);
        speeds.push(kin.speed());

        steps.push(RolloutStep {
            t,
            kin,
            action: next,
            p_cross: p_step,
        });
        if k == 1 {
            next_state = Some(st);
        }
    }
    Ok(PredictedRollout {
        steps,
        gap_evaluations: evaluations,
        next_state: next_state.expect("horizon_steps >= 1"),
    })
}

/// Constant-velocity rollout with no discrete layer.
pub fn predict_cv(
    state: &HybridState<f64>,
    cfg: &PredictionConfig,
    noise: &NoiseConfig<f64>,
) -> Result<PredictedRollout> {
    let mut kin = state.kin;
    let mut cov = state.cov;
    let mut steps = Vec::with_capacity(cfg.horizon_steps);
    let mut next_state = None;
    for k in 1..=cfg.horizon_steps {
        (kin, cov) = cv_step(&kin, &cov, cfg.dt, noise)?;
        let t = state.t + k as f64 * cfg.dt;
        steps.push(RolloutStep {
            t,
            kin,
            action: state.action,
            p_cross: None,
        });
        if k == 1 {
            next_state = Some(HybridState { t, kin, cov, ..*state });
        }
    }
    Ok(PredictedRollout {
        steps,
        gap_evaluations: Vec::new(),
        next_state: next_state.expect("horizon_steps >= 1"),
    })
}

/// Measurement update followed by a refresh of the discrete state from the
/// guards of the posterior.
pub fn update_step(
    state: &HybridState<f64>,
    z: &Measurement<f64>,
    noise: &NoiseConfig<f64>,
    geom: &GeometryConfig<f64>,
) -> Result<HybridState<f64>> {
    if z.t < state.t - 1e-9 {
        return Err(Error::invalid("measurement time", format!("{} precedes state time {}", z.t, state.t)));
    }
    let (kin, cov) = kalman_update(&state.kin, &state.cov, z, noise)?;
    let mut next = HybridState {
        t: z.t,
        kin,
        cov,
        ..*state
    };
    let action = classify_guards(&kin, state.action, geom);
    next.enter(action, z.t);
    Ok(next)
}

/// Initial state from two consecutive measurements (finite-difference velocity).
pub fn init_state(
    z0: &Measurement<f64>,
    z1: &Measurement<f64>,
    noise: &NoiseConfig<f64>,
    geom: &GeometryConfig<f64>,
) -> Result<HybridState<f64>> {
    let dt = z1.t - z0.t;
    if !(dt > 0.0) {
        return Err(Error::invalid("measurement time", "initial measurements must be increasing in time"));
    }
    let kin = Kinematics::new(z1.zx, z1.zy, (z1.zx - z0.zx) / dt, (z1.zy - z0.zy) / dt);
    let r = noise.r_pos;
    let rv = 2.0 * r / (dt * dt);
    let cov = Mat4::diag([r, r, rv, rv]);
    // no history: classify as if the pedestrian had been approaching
    let action = classify_guards(&kin, ActionState::Approach, geom);
    Ok(HybridState::new(z1.t, kin, cov, action))
}

/// Which rollout the tracker issues.
#[derive(Clone, Copy)]
pub enum Predictor<'a> {
    Hybrid(&'a dyn CrossingModel),
    ConstantVelocity,
}

impl fmt::Debug for Predictor<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predictor::Hybrid(_) => f.write_str("Hybrid"),
            Predictor::ConstantVelocity => f.write_str("ConstantVelocity"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackerStep {
    /// Index into the input streams.
    pub tick: usize,
    /// Posterior state at this tick.
    pub state: HybridState<f64>,
    pub rollout: PredictedRollout,
    /// The tracker was (re)initialized at this tick.
    pub initialized: bool,
}

/// Runs the tracker over time-aligned streams: at each tick a rollout is
/// issued from the posterior, then the next measurement is fused.
///
/// The filter's time update is the plain constant-velocity step for both
/// predictors, so the posteriors coincide and only the rollouts differ. The
/// hybrid tracker carries the rollout's first-step gap bookkeeping into the
/// next tick. A gap of more than three ticks between measurements restarts
/// the filter from the next two measurements.
#[allow(clippy::too_many_arguments)]
pub fn run_tracker(
    measurements: &[Measurement<f64>],
    traffic: &[Vec<VehicleState>],
    gaze: &[bool],
    predictor: Predictor<'_>,
    cfg: &PredictionConfig,
    noise: &NoiseConfig<f64>,
    geom: &GeometryConfig<f64>,
) -> Result<Vec<TrackerStep>> {
    cfg.validate()?;
    noise.validate()?;
    let n = measurements.len();
    if traffic.len() != n {
        return Err(Error::LengthMismatch(n, traffic.len()));
    }
    if gaze.len() != n {
        return Err(Error::LengthMismatch(n, gaze.len()));
    }
    let window = (FEATURE_WINDOW / cfg.dt).round().max(1.0) as usize;
    let max_gap = 3.0 * cfg.dt + 1e-9;

    let mut out = Vec::new();
    let mut state: Option<HybridState<f64>> = None;
    let mut i = 0;
    while i < n {
        let (st, initialized) = match state.take() {
            Some(s) => (s, false),
            None => {
                if i + 1 >= n {
                    break;
                }
                let (z0, z1) = (&measurements[i], &measurements[i + 1]);
                if z1.t - z0.t > max_gap {
                    log::warn!("measurement gap of {:.3} s at t = {}; skipping", z1.t - z0.t, z0.t);
                    i += 1;
                    continue;
                }
                i += 1;
                (init_state(z0, z1, noise, geom)?, true)
            }
        };

        let lo = (i + 1).saturating_sub(window);
        let gaze_ratio = gaze[lo..=i].iter().filter(|&&g| g).count() as f64 / (i + 1 - lo) as f64;
        let rollout = match predictor {
            Predictor::Hybrid(model) => predict_horizon(&st, &traffic[i], gaze_ratio, model, cfg, noise, geom)?,
            Predictor::ConstantVelocity => predict_cv(&st, cfg, noise)?,
        };

        if i + 1 < n {
            let z = &measurements[i + 1];
            let dtz = z.t - st.t;
            if dtz > max_gap {
                log::warn!("measurement gap of {dtz:.3} s at t = {}; reinitializing", st.t);
            } else {
                let mut prior = match predictor {
                    Predictor::Hybrid(_) => rollout.next_state,
                    Predictor::ConstantVelocity => st,
                };
                (prior.kin, prior.cov) = cv_step(&st.kin, &st.cov, dtz, noise)?;
                prior.t = z.t;
                state = Some(update_step(&prior, z, noise, geom)?);
            }
        }
        out.push(TrackerStep {
            tick: i,
            state: st,
            rollout,
            initialized,
        });
        i += 1;
    }
    Ok(out)
}

/// Writes rollouts as CSV with columns `tick,k,t,x,y,vx,vy,action,p_cross`.
pub fn write_rollouts_csv<W: Write>(w: W, steps: &[TrackerStep]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let io = |e: csv::Error| Error::Data(e.to_string());
    wr.write_record(["tick", "k", "t", "x", "y", "vx", "vy", "action", "p_cross"])
        .map_err(io)?;
    for s in steps {
        for (k, r) in s.rollout.steps.iter().enumerate() {
            wr.serialize((
                s.tick,
                k + 1,
                r.t,
                r.kin.x,
                r.kin.y,
                r.kin.vx,
                r.kin.vy,
                r.action.code(),
                r.p_cross,
            ))
            .map_err(io)?;
        }
    }
    wr.flush().map_err(|e| Error::Data(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gap::ConstantModel;

    fn geom() -> GeometryConfig<f64> {
        GeometryConfig::default()
    }

    fn waiting(x: f64) -> HybridState<f64> {
        HybridState::new(10.0, Kinematics::at_rest(x, -0.5), Mat4::identity().scale(0.01), ActionState::Wait)
    }

    fn veh(id: u64, x: f64) -> VehicleState {
        VehicleState {
            id,
            lane: 0,
            x,
            speed: 15.6,
            accel: 0.0,
        }
    }

    fn cfg(n: usize) -> PredictionConfig {
        PredictionConfig {
            horizon_steps: n,
            ..Default::default()
        }
    }

    #[test]
    fn rejected_gaps_hold_position() {
        let s = waiting(0.8);
        let r = predict_horizon(&s, &[veh(1, -20.0)], 0.5, &ConstantModel(0.2), &cfg(30), &NoiseConfig::default(), &geom()).unwrap();
        assert_eq!(r.steps.len(), 30);
        for st in &r.steps {
            assert_eq!((st.kin.x, st.kin.y), (0.8, -0.5));
            assert_eq!(st.action, ActionState::Wait);
        }
    }

    #[test]
    fn crossing_advances_at_constant_velocity() {
        let mut s = waiting(0.8);
        s.kin = Kinematics::new(0.8, 1.0, 0.0, 1.5);
        s.enter(ActionState::Cross, 10.0);
        let r = predict_horizon(&s, &[], 0.5, &ConstantModel(0.9), &cfg(20), &NoiseConfig::default(), &geom()).unwrap();
        for (k, st) in r.steps.iter().enumerate() {
            assert!((st.kin.y - (1.0 + 0.15 * (k + 1) as f64)).abs() < 1e-12);
        }
        assert!((r.steps[19].kin.y - 4.0).abs() < 1e-12);
    }

    #[test]
    fn accepted_gap_at_step_three_crosses_at_step_seven() {
        let s = waiting(0.8);
        // the vehicle front passes x = 0.8 between steps 2 and 3
        let v = veh(1, 0.8 - 15.6 * 0.25);
        let c = PredictionConfig {
            horizon_steps: 12,
            t_cross_rate: 2.5,
            v_start_mean: 1.6,
            ..Default::default()
        };
        // only the gap that opens after the vehicle passes is accepted
        struct AfterPass;
        impl CrossingModel for AfterPass {
            fn crossing_probability(&self, f: &FeatureVector) -> f64 {
                if f.av_distance >= NO_VEHICLE_DISTANCE { 0.9 } else { 0.1 }
            }
        }
        let r = predict_horizon(&s, &[v], 0.5, &AfterPass, &c, &NoiseConfig::default(), &geom()).unwrap();
        let evals: Vec<(usize, bool)> = r.gap_evaluations.iter().map(|e| (e.step, e.accepted)).collect();
        assert_eq!(evals, vec![(1, false), (3, true)]);
        assert!(r.steps[2].p_cross.is_some() && r.steps[3].p_cross.is_none());
        let actions: Vec<ActionState> = r.steps.iter().map(|s| s.action).collect();
        assert!(actions[..6].iter().all(|a| *a == ActionState::Wait), "{actions:?}");
        assert_eq!(actions[6], ActionState::Cross);
        for k in 6..12 {
            let expect = -0.5 + 0.16 * (k - 5) as f64;
            assert!((r.steps[k].kin.y - expect).abs() < 1e-12, "step {}: {}", k + 1, r.steps[k].kin.y);
        }
    }

    #[test]
    fn outside_zone_never_evaluates() {
        let s = waiting(5.0);
        let r = predict_horizon(&s, &[veh(1, 4.0)], 0.5, &ConstantModel(0.9), &cfg(30), &NoiseConfig::default(), &geom()).unwrap();
        assert!(r.gap_evaluations.is_empty());
        assert!(r.steps.iter().all(|s| s.p_cross.is_none()));
    }

    #[test]
    fn empty_traffic_is_one_open_gap() {
        let s = waiting(0.5);
        let r = predict_horizon(&s, &[], 0.5, &ConstantModel(0.3), &cfg(30), &NoiseConfig::default(), &geom()).unwrap();
        assert_eq!(r.gap_evaluations.len(), 1);
        assert_eq!(r.next_state.evaluated_gap, Some(GapKey::Open));
    }

    #[test]
    fn deterministic_mean_ignores_seed() {
        let s = waiting(0.5);
        let run = |seed| {
            let c = PredictionConfig { seed, ..cfg(20) };
            predict_horizon(&s, &[], 0.5, &ConstantModel(0.9), &c, &NoiseConfig::default(), &geom()).unwrap()
        };
        assert_eq!(run(1), run(2));
    }

    #[test]
    fn sampled_mode_is_reproducible() {
        let s = waiting(0.5);
        let c = PredictionConfig {
            mode: RolloutMode::Sampled,
            seed: 7,
            ..cfg(40)
        };
        let a = predict_horizon(&s, &[], 0.5, &ConstantModel(0.9), &c, &NoiseConfig::default(), &geom()).unwrap();
        let b = predict_horizon(&s, &[], 0.5, &ConstantModel(0.9), &c, &NoiseConfig::default(), &geom()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn update_with_zero_innovation() {
        let mut s = waiting(0.5);
        s.kin = Kinematics::new(0.5, -0.5, -1.0, 0.0);
        s.enter(ActionState::Approach, 10.0);
        let z = Measurement { t: 10.0, zx: 0.5, zy: -0.5 };
        let u = update_step(&s, &z, &NoiseConfig::default(), &geom()).unwrap();
        assert_eq!(u.kin, s.kin);
        assert!(u.cov.trace() < s.cov.trace());
        assert_eq!(u.action, classify_guards(&u.kin, s.action, &geom()));
    }

    #[test]
    fn sampler_means() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let m: f64 = (0..n).map(|_| sample_t_cross(&mut rng, 2.0)).sum::<f64>() / n as f64;
        assert!((0.49..=0.51).contains(&m), "{m}");
        let v: f64 = (0..n).map(|_| sample_v_start(&mut rng, 1.6, 0.2)).sum::<f64>() / n as f64;
        assert!((1.59..=1.61).contains(&v), "{v}");
        assert!((0..n).all(|_| sample_v_start(&mut rng, 0.5, 1.0) >= 0.3));
        assert_eq!(sample_v_start(&mut rng, 1.6, 0.0), 1.6);
    }

    #[test]
    fn t_cross_matches_exponential_cdf() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let lambda = 2.5;
        let mut xs: Vec<f64> = (0..100_000).map(|_| sample_t_cross(&mut rng, lambda)).collect();
        xs.sort_by(f64::total_cmp);
        let n = xs.len() as f64;
        let ks = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = 1.0 - (-lambda * x).exp();
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks < 0.01, "KS = {ks}");
    }

    #[test]
    fn stream_gap_reinitializes() {
        let g = geom();
        let mut meas: Vec<Measurement<f64>> = (0..10)
            .map(|i| Measurement { t: i as f64 * 0.1, zx: 5.0 - 0.15 * i as f64, zy: -0.5 })
            .collect();
        meas.extend((15..25).map(|i| Measurement { t: i as f64 * 0.1, zx: 5.0 - 0.15 * i as f64, zy: -0.5 }));
        let traffic = vec![Vec::new(); meas.len()];
        let gaze = vec![false; meas.len()];
        let out = run_tracker(&meas, &traffic, &gaze, Predictor::ConstantVelocity, &cfg(5), &NoiseConfig::default(), &g).unwrap();
        let inits: Vec<usize> = out.iter().filter(|s| s.initialized).map(|s| s.tick).collect();
        assert_eq!(inits, vec![1, 11]);
    }
}
