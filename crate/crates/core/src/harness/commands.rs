//! The experiment commands. Each reads its inputs, writes its outputs under
//! one directory together with a manifest, and returns a typed summary.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::behavior::{accepted_gaps, fit_start_params, walking_speeds, PositionSource, SpeedSummary, StartFit};
use super::config::ExperimentConfig;
use super::eval::{compare_predictors, is_wait_then_cross, noise_grid_search, ErrorComparison, NoiseGridPoint, RolloutScope};
use super::manifest::{Manifest, ManifestBuilder};
use crate::error::{Error, Result};
use crate::gap::{evaluate, rank_features, split_events, train, GapModel, ModelKind, RankingRow};
use crate::metrics::{cumulative_gap_curve, kl_divergence, ClassificationReport, DEFAULT_SPEED_WINDOW, KL_DEFAULT_BINS};
use crate::sim::dataset::{read_events_csv, EVENTS_FILE};
use crate::sim::{generate_dataset, read_dataset, validate_episode, write_dataset, Dataset, DatasetSummary, Violation};
use crate::tracker::NoiseConfig;

/// Published classifier results, shown next to ours as an external reference:
/// (model, accuracy, precision, recall, F1).
pub const REFERENCE_CLASSIFIERS: [(&str, f64, f64, f64, f64); 3] = [
    ("svm_poly3", 0.88, 0.75, 0.73, 0.74),
    ("logistic", 0.79, 0.71, 0.52, 0.60),
    ("cond_prob", 0.76, 0.66, 0.51, 0.56),
];

/// Published feature ranking, most important first: (removed feature,
/// accuracy, precision, recall, F1).
pub const REFERENCE_RANKING: [(&str, f64, f64, f64, f64); 7] = [
    ("av_distance", 0.85, 0.74, 0.55, 0.63),
    ("cw_distance", 0.86, 0.71, 0.66, 0.69),
    ("curb_distance", 0.86, 0.71, 0.71, 0.71),
    ("wait_time", 0.87, 0.72, 0.72, 0.72),
    ("av_speed", 0.88, 0.78, 0.68, 0.73),
    ("ped_speed", 0.87, 0.74, 0.71, 0.73),
    ("gaze_ratio", 0.88, 0.76, 0.75, 0.75),
];

/// Published behavior measures: KL divergence between the two observed
/// accepted-gap curves, and crossing/sidewalk speeds of the two populations.
pub const REFERENCE_KL: f64 = 0.17;
pub const REFERENCE_SPEEDS_AV: (f64, f64) = (1.68, 1.52);
pub const REFERENCE_SPEEDS_HDV: (f64, f64) = (1.58, 1.48);

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_file(path: &Path, contents: &str) -> Result<PathBuf> {
    if let Some(parent) = path.parent() {
        create_dir(parent)?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))?;
    Ok(path.to_path_buf())
}

fn write_csv<I, R>(path: &Path, header: &[&str], rows: I) -> Result<PathBuf>
where
    I: IntoIterator<Item = R>,
    R: Serialize,
{
    if let Some(parent) = path.parent() {
        create_dir(parent)?;
    }
    let err = |e: csv::Error| Error::Data(format!("{}: {e}", path.display()));
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(err)?;
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.serialize(r).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(path.to_path_buf())
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    serde_json::to_string_pretty(v)
        .map(|s| s + "\n")
        .map_err(|e| Error::Data(e.to_string()))
}

fn events_path(dataset: &Path) -> PathBuf {
    dataset.join(EVENTS_FILE)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateOutput {
    pub summary: DatasetSummary,
    pub violations: Vec<Violation>,
    pub manifest: Manifest,
}

/// Generates the dataset described by `cfg` into `out`.
pub fn cmd_simulate(cfg: &ExperimentConfig, out: &Path) -> Result<SimulateOutput> {
    cfg.validate()?;
    let ds = generate_dataset(&cfg.sim, &cfg.oracle)?;
    let violations: Vec<Violation> = ds
        .episodes
        .iter()
        .flat_map(|e| validate_episode(e, &cfg.sim))
        .collect();
    for v in &violations {
        log::warn!("episode {} tick {}: {}", v.episode, v.tick, v.what);
    }
    let files = write_dataset(&ds, out)?;
    let summary = ds.summary();
    let mut mix = std::collections::BTreeMap::new();
    for e in &ds.episodes {
        *mix.entry(e.profile.to_string()).or_insert(0usize) += 1;
    }
    let manifest = ManifestBuilder::new().finish(
        "simulate",
        cfg.sim.seed,
        &cfg.to_json()?,
        out,
        &files,
        json!({
            "dataset": summary,
            "profile": cfg.sim.profile,
            "profile_mix": mix,
            "violations": violations.len(),
        }),
    )?;
    Ok(SimulateOutput {
        summary,
        violations,
        manifest,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRow {
    pub kind: ModelKind,
    pub report: ClassificationReport,
    pub n_train: usize,
    pub n_test: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOutput {
    /// Sorted by F1, best first.
    pub rows: Vec<TrainRow>,
    pub manifest: Manifest,
}

fn reference_footer(out: &mut String, title: &str, rows: &[(&str, f64, f64, f64, f64)]) {
    let _ = writeln!(out);
    let _ = writeln!(out, "{title} (external published values, not produced by this run):");
    for (name, a, p, r, f) in rows {
        let _ = writeln!(out, "  {name:<14} {a:>8.2} {p:>9.2} {r:>6.2} {f:>6.2}");
    }
}

fn report_line(out: &mut String, name: &str, r: &ClassificationReport) {
    let _ = writeln!(
        out,
        "{name:<14} {:>8.4} {:>9.4} {:>6.4} {:>6.4}",
        r.accuracy, r.precision, r.recall, r.f1
    );
}

/// Trains each model kind on the 80 % split of the dataset's gap events and
/// reports held-out classification metrics.
pub fn cmd_train_gap(cfg: &ExperimentConfig, dataset: &Path, kinds: &[ModelKind], out: &Path) -> Result<TrainOutput> {
    cfg.validate()?;
    let ev_path = events_path(dataset);
    let events = read_events_csv(&ev_path)?;
    let seed = cfg.split_seed();
    create_dir(out)?;
    let mut builder = ManifestBuilder::new();
    builder.input_file("dataset", dataset, &ev_path)?;

    let (train_set, _) = split_events(&events, seed);
    let mut files = Vec::new();
    let mut rows = Vec::new();
    for &kind in kinds {
        let (model, test) = train(kind, &events, seed, &cfg.train)?;
        let report = evaluate(&model, &test)?;
        files.push(write_file(&out.join(format!("model_{}.json", kind.name())), &(model.to_json()? + "\n"))?);
        rows.push(TrainRow {
            kind,
            report,
            n_train: train_set.len(),
            n_test: test.len(),
        });
    }
    rows.sort_by(|a, b| b.report.f1.total_cmp(&a.report.f1));

    files.push(write_csv(
        &out.join("train_report.csv"),
        &["model", "accuracy", "precision", "recall", "f1", "tp", "fp", "fn", "tn", "n_train", "n_test"],
        rows.iter().map(|r| {
            let c = &r.report;
            (
                r.kind.name(),
                c.accuracy,
                c.precision,
                c.recall,
                c.f1,
                c.tp,
                c.fp,
                c.fn_,
                c.tn,
                r.n_train,
                r.n_test,
            )
        }),
    )?);
    let mut text = String::new();
    let _ = writeln!(text, "{:<14} {:>8} {:>9} {:>6} {:>6}", "model", "accuracy", "precision", "recall", "f1");
    for r in &rows {
        report_line(&mut text, r.kind.name(), &r.report);
    }
    reference_footer(&mut text, "Reference classifier results", &REFERENCE_CLASSIFIERS);
    files.push(write_file(&out.join("train_report.txt"), &text)?);

    let manifest = builder.finish("train-gap", seed, &cfg.to_json()?, out, &files, json!({ "rows": rows }))?;
    Ok(TrainOutput { rows, manifest })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankOutput {
    pub full: ClassificationReport,
    /// Ascending by F1 after removal: most important feature first.
    pub rows: Vec<RankingRow>,
    pub manifest: Manifest,
}

/// Leave-one-feature-out ranking of the SVM model.
pub fn cmd_rank_features(cfg: &ExperimentConfig, dataset: &Path, out: &Path) -> Result<RankOutput> {
    cfg.validate()?;
    let ev_path = events_path(dataset);
    let events = read_events_csv(&ev_path)?;
    let seed = cfg.split_seed();
    create_dir(out)?;
    let mut builder = ManifestBuilder::new();
    builder.input_file("dataset", dataset, &ev_path)?;

    let (full, rows) = rank_features(&events, seed, &cfg.train)?;
    let mut files = vec![write_csv(
        &out.join("feature_ranking.csv"),
        &["removed", "accuracy", "precision", "recall", "f1", "f1_drop"],
        rows.iter().map(|r| {
            let c = &r.report;
            (
                r.removed.name(),
                c.accuracy,
                c.precision,
                c.recall,
                c.f1,
                full.f1 - c.f1,
            )
        }),
    )?];
    let mut text = String::new();
    let _ = writeln!(text, "{:<14} {:>8} {:>9} {:>6} {:>6}", "removed", "accuracy", "precision", "recall", "f1");
    report_line(&mut text, "(none)", &full);
    for r in &rows {
        report_line(&mut text, r.removed.name(), &r.report);
    }
    reference_footer(&mut text, "Reference feature ranking", &REFERENCE_RANKING);
    files.push(write_file(&out.join("feature_ranking.txt"), &text)?);

    let manifest = builder.finish(
        "rank-features",
        seed,
        &cfg.to_json()?,
        out,
        &files,
        json!({ "full": full, "most_important": rows[0].removed.name() }),
    )?;
    Ok(RankOutput { full, rows, manifest })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluateOutput {
    /// One comparison per rollout scope, `All` first.
    pub comparisons: Vec<ErrorComparison>,
    /// Hybrid and CV on the episodes that wait before crossing.
    pub wait_then_cross: ErrorComparison,
    /// Hybrid and CV on rollouts issued while the pedestrian walks away.
    pub walk_away: ErrorComparison,
    /// Largest absolute hybrid−CV difference over the walk-away metrics.
    pub walk_away_max_diff: f64,
    pub start_fit: Option<StartFit>,
    pub speeds: Vec<SpeedSummary>,
    pub accepted_gaps: usize,
    pub manifest: Manifest,
}

const METRICS: [&str; 3] = ["ade", "fde", "rmse"];

fn metric_rows(c: &ErrorComparison) -> Vec<(&'static str, f64, &'static str, f64, usize)> {
    let mut rows = Vec::new();
    for (model, errs) in [("hybrid", &c.hybrid), ("cv", &c.cv)] {
        for m in METRICS {
            for e in errs.iter() {
                let v = match m {
                    "ade" => e.ade,
                    "fde" => e.fde,
                    _ => e.rmse,
                };
                rows.push((m, e.horizon_s, model, v, e.rollouts));
            }
        }
    }
    rows
}

/// Largest absolute difference between two error tables.
pub fn max_abs_diff(c: &ErrorComparison) -> f64 {
    c.hybrid
        .iter()
        .zip(&c.cv)
        .flat_map(|(h, v)| [(h.ade - v.ade).abs(), (h.fde - v.fde).abs(), (h.rmse - v.rmse).abs()])
        .fold(0.0, f64::max)
}

/// Runs the hybrid tracker and the CV baseline over every episode of the
/// dataset and writes per-horizon errors, curve files, the accepted-gap curve
/// and walking speeds.
pub fn cmd_evaluate(cfg: &ExperimentConfig, dataset: &Path, model_path: &Path, out: &Path) -> Result<EvaluateOutput> {
    cfg.validate()?;
    let ds = read_dataset(dataset)?;
    let model_text = fs::read_to_string(model_path).map_err(|e| Error::io(model_path, e))?;
    let model = GapModel::from_json(&model_text)?;
    create_dir(out)?;
    let mut builder = ManifestBuilder::new();
    builder.input_dir("dataset", dataset)?;
    let model_dir = model_path.parent().unwrap_or(Path::new("."));
    builder.input_file("model", model_dir, model_path)?;

    let mut prediction = cfg.prediction.clone();
    let start_fit = if cfg.fit_start_params {
        let fit = fit_start_params(&ds)?;
        prediction.t_cross_rate = fit.t_cross_rate;
        prediction.v_start_mean = fit.v_start_mean;
        prediction.v_start_std = fit.v_start_std;
        Some(fit)
    } else {
        None
    };
    let geom = &ds.sim.geometry;

    let comparisons = RolloutScope::ALL
        .iter()
        .map(|&scope| compare_predictors(&ds.episodes, &model, &cfg.horizons, scope, &prediction, &cfg.noise, geom))
        .collect::<Result<Vec<_>>>()?;
    let wtc: Vec<_> = ds.episodes.iter().filter(|e| is_wait_then_cross(e)).cloned().collect();
    let wait_then_cross = compare_predictors(&wtc, &model, &cfg.horizons, RolloutScope::All, &prediction, &cfg.noise, geom)?;
    let walk_away = comparisons
        .iter()
        .find(|c| c.scope == RolloutScope::WalkAway)
        .cloned()
        .ok_or(Error::Empty("walk-away comparison"))?;
    let walk_away_max_diff = max_abs_diff(&walk_away);

    let mut files = Vec::new();
    let all = &comparisons[0];
    files.push(write_csv(
        &out.join("metrics.csv"),
        &["metric", "horizon_s", "model", "value"],
        metric_rows(all).into_iter().map(|(m, h, model, v, _)| (m, h, model, v)),
    )?);
    let mut scoped = Vec::new();
    let named = comparisons
        .iter()
        .map(|c| (c.scope.name(), c))
        .chain([("wait_then_cross", &wait_then_cross)]);
    for (name, c) in named {
        scoped.extend(
            metric_rows(c)
                .into_iter()
                .map(|(m, h, model, v, n)| (name, m, h, model, v, n)),
        );
    }
    files.push(write_csv(
        &out.join("metrics_by_scope.csv"),
        &["scope", "metric", "horizon_s", "model", "value", "rollouts"],
        scoped,
    )?);
    for (model, errs) in [("hybrid", &all.hybrid), ("cv", &all.cv)] {
        for m in METRICS {
            files.push(write_csv(
                &out.join("curves").join(format!("{m}_{model}.csv")),
                &["horizon_s", m],
                errs.iter().map(|e| {
                    let v = match m {
                        "ade" => e.ade,
                        "fde" => e.fde,
                        _ => e.rmse,
                    };
                    (e.horizon_s, v)
                }),
            )?);
        }
    }

    let gaps = accepted_gaps(&ds);
    if gaps.is_empty() {
        log::warn!("no accepted gaps in the dataset; gap curve skipped");
    } else {
        files.push(write_csv(
            &out.join("gap_curve.csv"),
            &["gap_s", "cumulative_fraction"],
            cumulative_gap_curve(&gaps)?,
        )?);
    }
    let speeds = vec![
        walking_speeds(&ds, PositionSource::GroundTruth, DEFAULT_SPEED_WINDOW)?,
        walking_speeds(&ds, PositionSource::Measured, DEFAULT_SPEED_WINDOW)?,
    ];
    files.push(write_speeds(&out.join("walking_speeds.csv"), &speeds)?);

    let summary = json!({
        "comparisons": comparisons,
        "wait_then_cross": wait_then_cross,
        "walk_away": walk_away,
        "walk_away_max_diff": walk_away_max_diff,
        "start_fit": start_fit,
        "speeds": speeds,
        "accepted_gaps": gaps.len(),
    });
    files.push(write_file(&out.join("metrics_summary.json"), &to_json(&summary)?)?);
    files.sort();
    let manifest = builder.finish("evaluate", prediction.seed, &cfg.to_json()?, out, &files, summary)?;
    Ok(EvaluateOutput {
        comparisons,
        wait_then_cross,
        walk_away,
        walk_away_max_diff,
        start_fit,
        speeds,
        accepted_gaps: gaps.len(),
        manifest,
    })
}

fn write_speeds(path: &Path, speeds: &[SpeedSummary]) -> Result<PathBuf> {
    let src = |s: PositionSource| match s {
        PositionSource::GroundTruth => "ground_truth",
        PositionSource::Measured => "measured",
    };
    write_csv(
        path,
        &["source", "crossing_mean", "sidewalk_mean", "crossing_ticks", "sidewalk_ticks"],
        speeds.iter().map(|s| {
            (
                src(s.source),
                s.crossing_mean,
                s.sidewalk_mean,
                s.crossing_ticks,
                s.sidewalk_ticks,
            )
        }),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareOutput {
    /// `KL(A ‖ B)` of the accepted-gap histograms.
    pub kl: f64,
    pub accepted_a: usize,
    pub accepted_b: usize,
    pub speeds_a: SpeedSummary,
    pub speeds_b: SpeedSummary,
    pub manifest: Manifest,
}

fn gaps_of(ds: &Dataset, dir: &Path) -> Result<Vec<f64>> {
    let g = accepted_gaps(ds);
    if g.is_empty() {
        return Err(Error::Data(format!("{}: no accepted gaps", dir.display())));
    }
    Ok(g)
}

/// Compares accepted-gap distributions and walking speeds of two datasets.
pub fn cmd_compare_behavior(cfg: &ExperimentConfig, a: &Path, b: &Path, out: &Path) -> Result<CompareOutput> {
    cfg.validate()?;
    let (da, db) = (read_dataset(a)?, read_dataset(b)?);
    let (ga, gb) = (gaps_of(&da, a)?, gaps_of(&db, b)?);
    create_dir(out)?;
    let mut builder = ManifestBuilder::new();
    builder.input_dir("a", a)?;
    builder.input_dir("b", b)?;

    let kl = kl_divergence(&ga, &gb, KL_DEFAULT_BINS)?;
    let speeds_a = walking_speeds(&da, PositionSource::Measured, DEFAULT_SPEED_WINDOW)?;
    let speeds_b = walking_speeds(&db, PositionSource::Measured, DEFAULT_SPEED_WINDOW)?;

    let mut files = vec![
        write_csv(
            &out.join("gap_curve_a.csv"),
            &["gap_s", "cumulative_fraction"],
            cumulative_gap_curve(&ga)?,
        )?,
        write_csv(
            &out.join("gap_curve_b.csv"),
            &["gap_s", "cumulative_fraction"],
            cumulative_gap_curve(&gb)?,
        )?,
    ];
    let fmt = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.3}"));
    let mut text = String::new();
    let _ = writeln!(text, "accepted gaps: A {} B {}", ga.len(), gb.len());
    let _ = writeln!(text, "KL(A || B) over {KL_DEFAULT_BINS} bins: {kl:.6}");
    let _ = writeln!(text, "{:<8} {:>14} {:>14}", "speed", "crossing m/s", "sidewalk m/s");
    for (name, s) in [("A", &speeds_a), ("B", &speeds_b)] {
        let _ = writeln!(text, "{name:<8} {:>14} {:>14}", fmt(s.crossing_mean), fmt(s.sidewalk_mean));
    }
    let _ = writeln!(text);
    let _ = writeln!(text, "Reference values (external published values, not produced by this run):");
    let _ = writeln!(text, "  KL between observed accepted-gap curves: {REFERENCE_KL}");
    let _ = writeln!(
        text,
        "  walking speed with automated vehicles: crossing {} m/s, sidewalk {} m/s",
        REFERENCE_SPEEDS_AV.0, REFERENCE_SPEEDS_AV.1
    );
    let _ = writeln!(
        text,
        "  walking speed with human drivers: crossing {} m/s, sidewalk {} m/s",
        REFERENCE_SPEEDS_HDV.0, REFERENCE_SPEEDS_HDV.1
    );
    files.push(write_file(&out.join("behavior_comparison.txt"), &text)?);
    let summary = json!({
        "kl": kl,
        "bins": KL_DEFAULT_BINS,
        "accepted_a": ga.len(),
        "accepted_b": gb.len(),
        "speeds_a": speeds_a,
        "speeds_b": speeds_b,
        "reference": {
            "external": true,
            "kl": REFERENCE_KL,
            "speeds_av": { "crossing": REFERENCE_SPEEDS_AV.0, "sidewalk": REFERENCE_SPEEDS_AV.1 },
            "speeds_hdv": { "crossing": REFERENCE_SPEEDS_HDV.0, "sidewalk": REFERENCE_SPEEDS_HDV.1 },
        },
    });
    files.push(write_file(&out.join("behavior_comparison.json"), &to_json(&summary)?)?);
    let manifest = builder.finish("compare-behavior", cfg.sim.seed, &cfg.to_json()?, out, &files, summary)?;
    Ok(CompareOutput {
        kl,
        accepted_a: ga.len(),
        accepted_b: gb.len(),
        speeds_a,
        speeds_b,
        manifest,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneOutput {
    pub grid: Vec<NoiseGridPoint>,
    pub best: NoiseConfig<f64>,
    pub manifest: Manifest,
}

/// Grid search of the filter noise by tracking error against ground truth.
///
/// The grid spans a decade either side of the configured `q_pos` and `q_vel`
/// and a factor of four either side of `r_pos`.
pub fn cmd_tune_noise(cfg: &ExperimentConfig, dataset: &Path, out: &Path) -> Result<TuneOutput> {
    cfg.validate()?;
    let ds = read_dataset(dataset)?;
    create_dir(out)?;
    let mut builder = ManifestBuilder::new();
    builder.input_dir("dataset", dataset)?;
    let n = cfg.noise;
    let q_pos = [n.q_pos / 10.0, n.q_pos, n.q_pos * 10.0];
    let q_vel = [n.q_vel / 10.0, n.q_vel, n.q_vel * 10.0];
    let r_pos = [n.r_pos / 4.0, n.r_pos, n.r_pos * 4.0];
    let grid = noise_grid_search(&ds.episodes, &q_pos, &q_vel, &r_pos, &cfg.prediction, &ds.sim.geometry)?;
    let best = grid
        .iter()
        .min_by(|a, b| a.tracking_rmse.total_cmp(&b.tracking_rmse))
        .map(|p| NoiseConfig {
            q_pos: p.q_pos,
            q_vel: p.q_vel,
            r_pos: p.r_pos,
        })
        .ok_or(Error::Empty("noise grid"))?;
    let files = vec![write_csv(
        &out.join("noise_grid.csv"),
        &["q_pos", "q_vel", "r_pos", "tracking_rmse"],
        grid.iter().map(|p| (p.q_pos, p.q_vel, p.r_pos, p.tracking_rmse)),
    )?];
    let manifest = builder.finish("tune-noise", cfg.sim.seed, &cfg.to_json()?, out, &files, json!({ "best": best }))?;
    Ok(TuneOutput { grid, best, manifest })
}
