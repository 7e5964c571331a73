//! Episode generation, invariant checking and the on-disk dataset format.

use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::pedestrian::{gaze_step, ped_decide, ped_oracle_step, PedAgent, PedPhase};
use super::vehicle::{av_step, leader_of, spawn_step, DrivingProfile, ProfileName, Spawner, VehicleState};
use super::{derive_seed, PedOracleConfig, SimConfig};
use crate::error::{Error, Result};
use crate::gap::{detect_gap_start, extract_features, label_gap, FeatureVector, GapEvent, GapLabel, PedSample};
use crate::hybrid::{ActionState, GeometryConfig, Kinematics};
use crate::tracker::Measurement;

const EPISODE_STREAM: u64 = 0xe915;
pub const DATASET_FORMAT_VERSION: u32 = 1;
pub const EVENTS_FILE: &str = "gap_events.csv";
pub const SCENARIO_FILE: &str = "scenario.json";
pub const EPISODE_DIR: &str = "episodes";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub t: f64,
    /// Ground-truth pedestrian state.
    pub ped: Kinematics<f64>,
    pub action: ActionState,
    pub meas: Measurement<f64>,
    pub gaze: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub id: usize,
    pub profile: ProfileName,
    pub ticks: Vec<TickRecord>,
    /// Traffic at each tick, aligned with `ticks`.
    pub vehicles: Vec<Vec<VehicleState>>,
    pub events: Vec<GapEvent>,
}

impl Episode {
    pub fn actions(&self) -> Vec<ActionState> {
        self.ticks.iter().map(|r| r.action).collect()
    }

    /// Time of the first tick spent crossing.
    pub fn crossing_start(&self) -> Option<f64> {
        self.ticks.iter().find(|r| r.action == ActionState::Cross).map(|r| r.t)
    }

    pub fn measurements(&self) -> Vec<Measurement<f64>> {
        self.ticks.iter().map(|r| r.meas).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub n_episodes: usize,
    pub n_events: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub undetermined: usize,
    /// accepted / rejected
    pub acceptance_ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub sim: SimConfig,
    pub oracle: PedOracleConfig,
    pub episodes: Vec<Episode>,
}

impl Dataset {
    /// All gap events, in episode order.
    pub fn events(&self) -> Vec<GapEvent> {
        self.episodes.iter().flat_map(|e| e.events.iter().cloned()).collect()
    }

    pub fn summary(&self) -> DatasetSummary {
        let events = self.events();
        let count = |l: GapLabel| events.iter().filter(|e| e.label == l).count();
        let (accepted, rejected) = (count(GapLabel::Accepted), count(GapLabel::Rejected));
        DatasetSummary {
            n_episodes: self.episodes.len(),
            n_events: events.len(),
            accepted,
            rejected,
            undetermined: count(GapLabel::Undetermined),
            acceptance_ratio: if rejected > 0 {
                accepted as f64 / rejected as f64
            } else {
                f64::INFINITY
            },
        }
    }
}

fn step_traffic(
    traffic: &[VehicleState],
    ped: &Kinematics<f64>,
    profile: &DrivingProfile,
    geom: &GeometryConfig<f64>,
    cfg: &SimConfig,
) -> Vec<VehicleState> {
    traffic
        .iter()
        .map(|v| av_step(v, ped, profile, geom, cfg.dt, leader_of(v, traffic)))
        .filter(|v| v.x <= cfg.despawn_x)
        .collect()
}

/// Simulates one episode: warm-up traffic, then one pedestrian from approach
/// to walk-away. Gap events are labeled from the pedestrian's trajectory.
pub fn generate_episode(id: usize, cfg: &SimConfig, oracle: &PedOracleConfig) -> Episode {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, EPISODE_STREAM, id as u64));
    let profile = cfg.profile_for(id);
    let geom = &cfg.geometry;
    let dt = cfg.dt;
    let n_lanes = geom.n_lanes;

    let mut spawner = Spawner::default();
    let mut traffic: Vec<VehicleState> = Vec::new();
    let spawn = |t: f64, spawner: &mut Spawner, rng: &mut ChaCha8Rng| {
        spawn_step(t, spawner, rng, &cfg.spawn_gap_choices, cfg.spawn_x, cfg.full_speed, n_lanes)
    };

    // nobody near the road during warm-up
    let absent = Kinematics::at_rest(f64::MAX, geom.curb_y - 100.0);
    let n_warm = (cfg.warmup / dt).round() as i64;
    traffic.extend(spawn(-(n_warm as f64) * dt, &mut spawner, &mut rng));
    for k in 1..=n_warm {
        let t = (k - n_warm) as f64 * dt;
        traffic = step_traffic(&traffic, &absent, &profile, geom, cfg);
        traffic.extend(spawn(t, &mut spawner, &mut rng));
    }

    let noise = Normal::new(0.0, cfg.meas_sigma.max(f64::MIN_POSITIVE)).expect("sigma validated");
    let measure = |kin: &Kinematics<f64>, t: f64, rng: &mut ChaCha8Rng| {
        if cfg.meas_sigma > 0.0 {
            Measurement {
                t,
                zx: kin.x + noise.sample(rng),
                zy: kin.y + noise.sample(rng),
            }
        } else {
            Measurement { t, zx: kin.x, zy: kin.y }
        }
    };

    let mut agent = PedAgent::spawn(oracle, geom, &mut rng);
    let gaze0 = gaze_step(agent.phase, &mut rng, oracle);
    let mut ticks = vec![TickRecord {
        t: 0.0,
        ped: agent.kin,
        action: agent.action(),
        meas: measure(&agent.kin, 0.0, &mut rng),
        gaze: gaze0,
    }];
    let mut vehicles = vec![traffic.clone()];
    let mut history = vec![PedSample {
        t: 0.0,
        kin: agent.kin,
        gaze: gaze0,
    }];
    let mut events: Vec<GapEvent> = Vec::new();

    let max_k = (cfg.max_episode_time / dt).ceil() as usize;
    for k in 1..=max_k {
        let t = k as f64 * dt;
        let prev_traffic = std::mem::take(&mut traffic);
        traffic = step_traffic(&prev_traffic, &agent.kin, &profile, geom, cfg);
        traffic.extend(spawn(t, &mut spawner, &mut rng));

        let prev_x = agent.kin.x;
        ped_oracle_step(&mut agent, t, dt, oracle.walk_away_distance);
        let gaze = gaze_step(agent.phase, &mut rng, oracle);
        history.push(PedSample {
            t,
            kin: agent.kin,
            gaze,
        });

        let eligible = matches!(agent.phase, PedPhase::Approach | PedPhase::Wait) && agent.cross_at.is_none();
        if eligible {
            if let Some(start) =
                detect_gap_start(&traffic, &prev_traffic, &agent.kin, agent.action(), Some(prev_x), geom)
            {
                let features = extract_features(&history, &traffic, agent.wait_entry, geom, t).features;
                events.push(GapEvent {
                    gap_id: format!("{id}:{}", events.len()),
                    start_time: t,
                    traffic_gap: start.traffic_gap,
                    features,
                    label: GapLabel::Undetermined,
                });
                ped_decide(&mut agent, &start, t, oracle, &mut rng);
            }
        }

        ticks.push(TickRecord {
            t,
            ped: agent.kin,
            action: agent.action(),
            meas: measure(&agent.kin, t, &mut rng),
            gaze,
        });
        vehicles.push(traffic.clone());
        if agent.is_done() {
            break;
        }
    }
    if !agent.is_done() {
        log::warn!("episode {id} cut at {} s before the pedestrian finished", cfg.max_episode_time);
    }

    let lateral: Vec<(f64, f64)> = ticks.iter().map(|r| (r.t, r.ped.y)).collect();
    let starts: Vec<f64> = events.iter().map(|e| e.start_time).collect();
    let events = events
        .iter()
        .enumerate()
        .map(|(i, e)| label_gap(e, &lateral, geom.curb_y, starts.get(i + 1).copied()))
        .collect();

    Episode {
        id,
        profile: profile.name,
        ticks,
        vehicles,
        events,
    }
}

/// Generates `n_crossings` independent episodes, in parallel. The result does
/// not depend on the number of worker threads.
pub fn generate_dataset(cfg: &SimConfig, oracle: &PedOracleConfig) -> Result<Dataset> {
    cfg.validate()?;
    oracle.validate()?;
    let episodes = (0..cfg.n_crossings)
        .into_par_iter()
        .map(|i| generate_episode(i, cfg, oracle))
        .collect();
    Ok(Dataset {
        sim: cfg.clone(),
        oracle: oracle.clone(),
        episodes,
    })
}

/// A broken simulator invariant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub episode: usize,
    pub tick: usize,
    pub what: String,
}

/// Re-checks an episode against the simulator invariants: acceleration and
/// speed bounds, stop margins of yielding profiles whenever stopping was
/// kinematically feasible, axis-aligned pedestrian motion and the action
/// order.
pub fn validate_episode(ep: &Episode, cfg: &SimConfig) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut flag = |tick: usize, what: String| {
        out.push(Violation {
            episode: ep.id,
            tick,
            what,
        })
    };
    let profile = cfg.profile_for(ep.id);
    let geom = &cfg.geometry;
    let tol = 1e-9;

    for (k, traffic) in ep.vehicles.iter().enumerate() {
        for v in traffic {
            if v.accel.abs() > profile.max_accel + tol {
                flag(k, format!("vehicle {} accel {} exceeds {}", v.id, v.accel, profile.max_accel));
            }
            if v.speed < 0.0 || v.speed > profile.full_speed + tol {
                flag(k, format!("vehicle {} speed {} out of bounds", v.id, v.speed));
            }
        }
    }

    // yielding profiles must hold the stop line once they could brake in time
    if profile.slow_speed.is_some() {
        let near_edge = -geom.crosswalk_halfwidth;
        let mut committed: Vec<u64> = Vec::new();
        for k in 1..ep.vehicles.len() {
            let ped = ep.ticks[k - 1].ped;
            let ped_lane = geom.lane_of(ped.y);
            committed.retain(|id| {
                ep.vehicles[k - 1]
                    .iter()
                    .find(|v| v.id == *id)
                    .is_some_and(|v| ped_lane == Some(v.lane))
            });
            for prev in &ep.vehicles[k - 1] {
                let ahead = ped.x - prev.x;
                let in_range = ped_lane == Some(prev.lane) && ahead > 0.0 && ahead <= profile.reaction_distance;
                let room = near_edge - profile.stopped_distance - prev.x;
                let braking = prev.speed * prev.speed / (2.0 * profile.max_accel);
                if in_range && room >= braking - 1e-9 && !committed.contains(&prev.id) {
                    committed.push(prev.id);
                }
            }
            for v in &ep.vehicles[k] {
                if committed.contains(&v.id) && near_edge - v.x < profile.stopped_distance - 0.1 {
                    flag(k, format!("vehicle {} front {:.3} inside stop margin", v.id, v.x));
                }
            }
        }
    }

    for (k, r) in ep.ticks.iter().enumerate() {
        if r.ped.vx.abs().min(r.ped.vy.abs()) >= geom.epsilon_v {
            flag(k, "pedestrian motion not axis-aligned".into());
        }
    }

    let mut word: Vec<ActionState> = Vec::new();
    for r in &ep.ticks {
        if word.last() != Some(&r.action) {
            word.push(r.action);
        }
    }
    use ActionState::*;
    let full = [Approach, Wait, Cross, WalkAway];
    if word.len() > full.len() || word[..] != full[..word.len()] {
        flag(0, format!("action order {word:?}"));
    }
    out
}

#[derive(Debug, Serialize, Deserialize)]
struct TrajRow {
    t: f64,
    ped_x: f64,
    ped_y: f64,
    ped_vx: f64,
    ped_vy: f64,
    action: ActionState,
    meas_x: f64,
    meas_y: f64,
    gaze: u8,
}

#[derive(Debug, Serialize, Deserialize)]
struct VehRow {
    t: f64,
    veh_id: u64,
    lane: usize,
    x: f64,
    speed: f64,
    accel: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct EventRow {
    gap_id: String,
    start_time: f64,
    traffic_gap: f64,
    av_distance: f64,
    av_speed: f64,
    wait_time: f64,
    gaze_ratio: f64,
    curb_distance: f64,
    cw_distance: f64,
    ped_speed: f64,
    label: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct EpisodeInfo {
    id: usize,
    profile: ProfileName,
    n_ticks: usize,
    n_events: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioManifest {
    format_version: u32,
    seed: u64,
    sim: SimConfig,
    oracle: PedOracleConfig,
    summary: DatasetSummary,
    episodes: Vec<EpisodeInfo>,
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Data(format!("{}: {other:?}", path.display())),
    }
}

fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    r.deserialize().map(|row| row.map_err(|e| csv_err(path, e))).collect()
}

pub fn write_events_csv(path: &Path, events: &[GapEvent]) -> Result<()> {
    write_rows(
        path,
        events.iter().map(|e| {
            let f = &e.features;
            EventRow {
                gap_id: e.gap_id.clone(),
                start_time: e.start_time,
                traffic_gap: e.traffic_gap,
                av_distance: f.av_distance,
                av_speed: f.av_speed,
                wait_time: f.wait_time,
                gaze_ratio: f.gaze_ratio,
                curb_distance: f.curb_distance,
                cw_distance: f.cw_distance,
                ped_speed: f.ped_speed,
                label: e.label.to_string(),
            }
        }),
    )
}

pub fn read_events_csv(path: &Path) -> Result<Vec<GapEvent>> {
    read_rows::<EventRow>(path)?
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            let label = r
                .label
                .parse()
                .map_err(|e| Error::Data(format!("{} row {}: {e}", path.display(), i + 1)))?;
            let features = FeatureVector {
                av_distance: r.av_distance,
                av_speed: r.av_speed,
                wait_time: r.wait_time,
                gaze_ratio: r.gaze_ratio,
                curb_distance: r.curb_distance,
                cw_distance: r.cw_distance,
                ped_speed: r.ped_speed,
            };
            if !features.is_valid() || !(r.traffic_gap > 0.0) {
                return Err(Error::Data(format!("{} row {}: invalid feature values", path.display(), i + 1)));
            }
            Ok(GapEvent {
                gap_id: r.gap_id,
                start_time: r.start_time,
                traffic_gap: r.traffic_gap,
                features,
                label,
            })
        })
        .collect()
}

pub fn trajectory_path(dir: &Path, id: usize) -> PathBuf {
    dir.join(EPISODE_DIR).join(format!("episode_{id:04}_trajectory.csv"))
}

pub fn vehicles_path(dir: &Path, id: usize) -> PathBuf {
    dir.join(EPISODE_DIR).join(format!("episode_{id:04}_vehicles.csv"))
}

/// Writes the dataset under `dir` and returns the written files, sorted.
pub fn write_dataset(ds: &Dataset, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir.join(EPISODE_DIR)).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for ep in &ds.episodes {
        let tp = trajectory_path(dir, ep.id);
        write_rows(
            &tp,
            ep.ticks.iter().map(|r| TrajRow {
                t: r.t,
                ped_x: r.ped.x,
                ped_y: r.ped.y,
                ped_vx: r.ped.vx,
                ped_vy: r.ped.vy,
                action: r.action,
                meas_x: r.meas.zx,
                meas_y: r.meas.zy,
                gaze: r.gaze as u8,
            }),
        )?;
        let vp = vehicles_path(dir, ep.id);
        write_rows(
            &vp,
            ep.ticks.iter().zip(&ep.vehicles).flat_map(|(r, traffic)| {
                traffic.iter().map(move |v| VehRow {
                    t: r.t,
                    veh_id: v.id,
                    lane: v.lane,
                    x: v.x,
                    speed: v.speed,
                    accel: v.accel,
                })
            }),
        )?;
        files.push(tp);
        files.push(vp);
    }
    let ep_path = dir.join(EVENTS_FILE);
    write_events_csv(&ep_path, &ds.events())?;
    files.push(ep_path);

    let manifest = ScenarioManifest {
        format_version: DATASET_FORMAT_VERSION,
        seed: ds.sim.seed,
        sim: ds.sim.clone(),
        oracle: ds.oracle.clone(),
        summary: ds.summary(),
        episodes: ds
            .episodes
            .iter()
            .map(|e| EpisodeInfo {
                id: e.id,
                profile: e.profile,
                n_ticks: e.ticks.len(),
                n_events: e.events.len(),
            })
            .collect(),
    };
    let sp = dir.join(SCENARIO_FILE);
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Data(e.to_string()))?;
    fs::write(&sp, json + "\n").map_err(|e| Error::io(&sp, e))?;
    files.push(sp);
    files.sort();
    Ok(files)
}

/// Reads a dataset written by [`write_dataset`].
pub fn read_dataset(dir: &Path) -> Result<Dataset> {
    let sp = dir.join(SCENARIO_FILE);
    let text = fs::read_to_string(&sp).map_err(|e| Error::io(&sp, e))?;
    let manifest: ScenarioManifest =
        serde_json::from_str(&text).map_err(|e| Error::Data(format!("{}: {e}", sp.display())))?;
    if manifest.format_version != DATASET_FORMAT_VERSION {
        return Err(Error::Data(format!(
            "{}: format version {} (expected {DATASET_FORMAT_VERSION})",
            sp.display(),
            manifest.format_version
        )));
    }
    let mut events = read_events_csv(&dir.join(EVENTS_FILE))?;
    let mut episodes = Vec::with_capacity(manifest.episodes.len());
    for info in &manifest.episodes {
        let tp = trajectory_path(dir, info.id);
        let ticks = read_rows::<TrajRow>(&tp)?
            .into_iter()
            .map(|r| {
                Ok(TickRecord {
                    t: r.t,
                    ped: Kinematics::new(r.ped_x, r.ped_y, r.ped_vx, r.ped_vy),
                    action: r.action,
                    meas: Measurement {
                        t: r.t,
                        zx: r.meas_x,
                        zy: r.meas_y,
                    },
                    gaze: r.gaze != 0,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let vp = vehicles_path(dir, info.id);
        let mut vehicles: Vec<Vec<VehicleState>> = vec![Vec::new(); ticks.len()];
        let mut k = 0;
        for r in read_rows::<VehRow>(&vp)? {
            while k < ticks.len() && ticks[k].t < r.t {
                k += 1;
            }
            if k == ticks.len() || ticks[k].t != r.t {
                return Err(Error::Data(format!("{}: vehicle row at t = {} has no tick", vp.display(), r.t)));
            }
            vehicles[k].push(VehicleState {
                id: r.veh_id,
                lane: r.lane,
                x: r.x,
                speed: r.speed,
                accel: r.accel,
            });
        }
        let prefix = format!("{}:", info.id);
        let (mine, rest): (Vec<GapEvent>, Vec<GapEvent>) =
            events.into_iter().partition(|e| e.gap_id.starts_with(&prefix));
        events = rest;
        episodes.push(Episode {
            id: info.id,
            profile: info.profile,
            ticks,
            vehicles,
            events: mine,
        });
    }
    if !events.is_empty() {
        return Err(Error::Data(format!("{} events belong to no episode", events.len())));
    }
    Ok(Dataset {
        sim: manifest.sim,
        oracle: manifest.oracle,
        episodes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(n: usize) -> SimConfig {
        SimConfig {
            n_crossings: n,
            ..Default::default()
        }
    }

    #[test]
    fn single_crossing_has_one_accepted_gap() {
        let ds = generate_dataset(&small(1), &PedOracleConfig::default()).unwrap();
        let s = ds.summary();
        assert_eq!(s.accepted, 1, "{s:?}");
        assert!(ds.episodes[0].crossing_start().is_some());
    }

    #[test]
    fn episodes_are_valid() {
        let cfg = small(12);
        let ds = generate_dataset(&cfg, &PedOracleConfig::default()).unwrap();
        for ep in &ds.episodes {
            let v = validate_episode(ep, &cfg);
            assert!(v.is_empty(), "{:?}", &v[..v.len().min(5)]);
            assert_eq!(ep.ticks.len(), ep.vehicles.len());
        }
    }

    #[test]
    fn roundtrip_through_files() {
        let ds = generate_dataset(&small(3), &PedOracleConfig::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_dataset(&ds, dir.path()).unwrap();
        let back = read_dataset(dir.path()).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn validator_flags_bad_order() {
        let cfg = small(1);
        let mut ep = generate_episode(0, &cfg, &PedOracleConfig::default());
        ep.ticks[3].action = ActionState::Cross;
        assert!(validate_episode(&ep, &cfg).iter().any(|v| v.what.starts_with("action order")));
    }
}
