//! Trajectory, classification and distribution metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hybrid::ActionState;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajPoint<T> {
    pub t: T,
    pub x: T,
    pub y: T,
}

impl<T: Real> TrajPoint<T> {
    pub fn new(t: T, x: T, y: T) -> Self {
        TrajPoint { t, x, y }
    }

    fn dist(&self, other: &Self) -> T {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Predicted and actual trajectories over the same timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPair<T> {
    predicted: Vec<TrajPoint<T>>,
    actual: Vec<TrajPoint<T>>,
}

impl<T: Real> TrajectoryPair<T> {
    /// Validates equal, non-zero length and timestamps aligned to a tenth of the step.
    pub fn new(predicted: Vec<TrajPoint<T>>, actual: Vec<TrajPoint<T>>) -> Result<Self> {
        if predicted.is_empty() || actual.is_empty() {
            return Err(Error::Empty("trajectory pair"));
        }
        if predicted.len() != actual.len() {
            return Err(Error::LengthMismatch(predicted.len(), actual.len()));
        }
        let tol = if actual.len() >= 2 {
            (actual[1].t - actual[0].t).abs() / T::lit(10.0)
        } else {
            T::lit(1e-6)
        };
        for (index, (p, a)) in predicted.iter().zip(&actual).enumerate() {
            if (p.t - a.t).abs() > tol {
                return Err(Error::Misaligned {
                    index,
                    a: p.t.to_f64_lossy(),
                    b: a.t.to_f64_lossy(),
                });
            }
        }
        Ok(TrajectoryPair { predicted, actual })
    }

    pub fn len(&self) -> usize {
        self.actual.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn predicted(&self) -> &[TrajPoint<T>] {
        &self.predicted
    }

    pub fn actual(&self) -> &[TrajPoint<T>] {
        &self.actual
    }

    fn distances(&self) -> impl Iterator<Item = T> + '_ {
        self.predicted
            .iter()
            .zip(&self.actual)
            .map(|(p, a)| p.dist(a))
    }
}

/// Average displacement error.
pub fn ade<T: Real>(pair: &TrajectoryPair<T>) -> T {
    let sum = pair.distances().fold(T::zero(), |acc, d| acc + d);
    sum / T::from_usize(pair.len()).unwrap()
}

/// Final displacement error.
pub fn fde<T: Real>(pair: &TrajectoryPair<T>) -> T {
    let n = pair.len() - 1;
    pair.predicted[n].dist(&pair.actual[n])
}

/// Root mean squared Euclidean displacement.
pub fn rmse<T: Real>(pair: &TrajectoryPair<T>) -> T {
    let sum = pair.distances().fold(T::zero(), |acc, d| acc + d * d);
    (sum / T::from_usize(pair.len()).unwrap()).sqrt()
}

pub const KL_SMOOTHING: f64 = 1e-6;
pub const KL_DEFAULT_BINS: usize = 20;

fn smoothed_histogram(samples: &[f64], lo: f64, width: f64, bins: usize) -> Vec<f64> {
    let mut counts = vec![0usize; bins];
    for &s in samples {
        let idx = if width > 0.0 {
            (((s - lo) / width) * bins as f64).floor() as isize
        } else {
            0
        };
        counts[idx.clamp(0, bins as isize - 1) as usize] += 1;
    }
    let n = samples.len() as f64;
    let norm = 1.0 + bins as f64 * KL_SMOOTHING;
    counts
        .into_iter()
        .map(|c| (c as f64 / n + KL_SMOOTHING) / norm)
        .collect()
}

/// Discrete `KL(P‖Q)` in nats between histograms of two sample sets over
/// their pooled range, with additive smoothing.
pub fn kl_divergence(p_samples: &[f64], q_samples: &[f64], bins: usize) -> Result<f64> {
    if p_samples.is_empty() || q_samples.is_empty() {
        return Err(Error::Empty("kl_divergence samples"));
    }
    if bins < 2 {
        return Err(Error::invalid("bins", "must be >= 2"));
    }
    let (lo, hi) = p_samples
        .iter()
        .chain(q_samples)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if !lo.is_finite() || !hi.is_finite() {
        return Err(Error::invalid("samples", "must be finite"));
    }
    let width = hi - lo;
    let p = smoothed_histogram(p_samples, lo, width, bins);
    let q = smoothed_histogram(q_samples, lo, width, bins);
    Ok(p.iter().zip(&q).map(|(&pi, &qi)| pi * (pi / qi).ln()).sum())
}

/// Empirical CDF of accepted gap durations: one `(gap, fraction ≤ gap)` point
/// per distinct value, ascending.
pub fn cumulative_gap_curve(accepted_gaps: &[f64]) -> Result<Vec<(f64, f64)>> {
    if accepted_gaps.is_empty() {
        return Err(Error::Empty("accepted gaps"));
    }
    let mut sorted = accepted_gaps.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut curve: Vec<(f64, f64)> = Vec::new();
    for (i, &g) in sorted.iter().enumerate() {
        let frac = (i + 1) as f64 / n;
        match curve.last_mut() {
            Some(last) if last.0 == g => last.1 = frac,
            _ => curve.push((g, frac)),
        }
    }
    Ok(curve)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkingSpeeds {
    pub crossing_mean: Option<f64>,
    pub sidewalk_mean: Option<f64>,
    pub crossing_ticks: usize,
    pub sidewalk_ticks: usize,
}

pub const DEFAULT_SPEED_WINDOW: usize = 5;

/// Mean walking speed while crossing and while on the sidewalk.
///
/// Velocity components come from central differences of the positions and
/// are smoothed by a centered moving average of `window` samples before the
/// magnitude is taken; only samples with a full window are used.
pub fn walking_speed_stats<T: Real>(
    trajectory: &[TrajPoint<T>],
    actions: &[ActionState],
    window: usize,
) -> Result<WalkingSpeeds> {
    if trajectory.len() != actions.len() {
        return Err(Error::LengthMismatch(trajectory.len(), actions.len()));
    }
    if window == 0 {
        return Err(Error::invalid("window", "must be >= 1"));
    }
    if trajectory.len() <= window + 2 {
        return Err(Error::invalid(
            "trajectory",
            format!("length {} too short for window {}", trajectory.len(), window),
        ));
    }
    let n = trajectory.len();
    // central differences at indices 1..n-1
    let vel: Vec<(f64, f64)> = (1..n - 1)
        .map(|i| {
            let a = &trajectory[i - 1];
            let b = &trajectory[i + 1];
            let dt = (b.t - a.t).to_f64_lossy();
            (
                (b.x - a.x).to_f64_lossy() / dt,
                (b.y - a.y).to_f64_lossy() / dt,
            )
        })
        .collect();
    let half = window / 2;
    let (mut cross_sum, mut cross_n, mut side_sum, mut side_n) = (0.0, 0usize, 0.0, 0usize);
    for c in half..vel.len() {
        let lo = c - half;
        let hi = lo + window;
        if hi > vel.len() {
            break;
        }
        let (sx, sy) = vel[lo..hi]
            .iter()
            .fold((0.0, 0.0), |(ax, ay), (vx, vy)| (ax + vx, ay + vy));
        let speed = (sx / window as f64).hypot(sy / window as f64);
        match actions[c + 1] {
            ActionState::Cross => {
                cross_sum += speed;
                cross_n += 1;
            }
            ActionState::Approach | ActionState::WalkAway => {
                side_sum += speed;
                side_n += 1;
            }
            ActionState::Wait => {}
        }
    }
    Ok(WalkingSpeeds {
        crossing_mean: (cross_n > 0).then(|| cross_sum / cross_n as f64),
        sidewalk_mean: (side_n > 0).then(|| side_sum / side_n as f64),
        crossing_ticks: cross_n,
        sidewalk_ticks: side_n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl ClassificationReport {
    pub fn from_confusion(tp: usize, fp: usize, fn_: usize, tn: usize) -> Self {
        let total = tp + fp + fn_ + tn;
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        ClassificationReport {
            accuracy: ratio(tp + tn, total),
            precision,
            recall,
            f1,
            tp,
            fp,
            fn_,
            tn,
        }
    }
}

/// Decision threshold on the crossing probability.
pub const DECISION_THRESHOLD: f64 = 0.5;

/// Accuracy, precision, recall and F1 with `accepted` as the positive class.
pub fn classification_metrics(labels: &[bool], predicted: &[bool]) -> Result<ClassificationReport> {
    if labels.is_empty() {
        return Err(Error::Empty("labels"));
    }
    if labels.len() != predicted.len() {
        return Err(Error::LengthMismatch(labels.len(), predicted.len()));
    }
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for (&l, &p) in labels.iter().zip(predicted) {
        match (l, p) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (true, false) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    Ok(ClassificationReport::from_confusion(tp, fp, fn_, tn))
}

/// Thresholds probabilities at [`DECISION_THRESHOLD`] (strictly greater is positive).
pub fn classification_metrics_from_probs(labels: &[bool], probs: &[f64]) -> Result<ClassificationReport> {
    let predicted: Vec<bool> = probs.iter().map(|&p| p > DECISION_THRESHOLD).collect();
    classification_metrics(labels, &predicted)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn traj(points: &[(f64, f64)]) -> Vec<TrajPoint<f64>> {
        points
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| TrajPoint::new(i as f64 * 0.1, x, y))
            .collect()
    }

    #[test]
    fn identical_trajectories_have_zero_error() {
        let a = traj(&[(0.0, 0.0), (1.0, 2.0), (3.0, -1.0)]);
        let pair = TrajectoryPair::new(a.clone(), a).unwrap();
        assert_eq!(ade(&pair), 0.0);
        assert_eq!(fde(&pair), 0.0);
        assert_eq!(rmse(&pair), 0.0);
    }

    #[test]
    fn constant_offset() {
        let a = traj(&[(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)]);
        let p = traj(&[(0.3, 0.4), (1.3, 1.4), (2.3, 2.4)]);
        let pair = TrajectoryPair::new(p, a).unwrap();
        assert!((ade(&pair) - 0.5).abs() < 1e-12);
        assert!((rmse(&pair) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn two_point_distances() {
        let a = traj(&[(0.0, 0.0), (0.0, 0.0)]);
        let p = traj(&[(1.0, 0.0), (0.0, 3.0)]);
        let pair = TrajectoryPair::new(p, a).unwrap();
        assert!((ade(&pair) - 2.0).abs() < 1e-12);
        assert!((rmse(&pair) - 5f64.sqrt()).abs() < 1e-12);
        assert!((fde(&pair) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn fde_final_point_and_single_point() {
        let pair = TrajectoryPair::new(traj(&[(0.0, 0.0), (1.0, 0.0)]), traj(&[(0.0, 0.0), (1.5, 0.0)])).unwrap();
        assert!((fde(&pair) - 0.5).abs() < 1e-12);
        let single = TrajectoryPair::new(traj(&[(1.0, 1.0)]), traj(&[(2.0, 3.0)])).unwrap();
        assert_eq!(fde(&single), ade(&single));
    }

    #[test]
    fn pair_validation() {
        assert!(matches!(TrajectoryPair::<f64>::new(vec![], vec![]), Err(Error::Empty(_))));
        assert!(TrajectoryPair::new(traj(&[(0.0, 0.0)]), traj(&[(0.0, 0.0), (1.0, 1.0)])).is_err());
        let mut shifted = traj(&[(0.0, 0.0), (1.0, 1.0)]);
        shifted[1].t += 0.05;
        assert!(matches!(
            TrajectoryPair::new(shifted, traj(&[(0.0, 0.0), (1.0, 1.0)])),
            Err(Error::Misaligned { index: 1, .. })
        ));
    }

    #[test]
    fn kl_examples() {
        let s = [1.0, 2.0, 3.0, 2.5, 1.7];
        assert!(kl_divergence(&s, &s, 20).unwrap().abs() < 1e-9);
        // P all mass in the first bin, Q uniform over two bins
        let p = [0.0, 0.0, 0.0, 0.0];
        let q = [0.0, 0.0, 1.0, 1.0];
        let kl = kl_divergence(&p, &q, 2).unwrap();
        assert!((kl - 2f64.ln()).abs() < 1e-4, "{kl}");
        assert!(kl_divergence(&[], &q, 2).is_err());
        assert!(kl_divergence(&p, &q, 1).is_err());
    }

    #[test]
    fn gap_curve_examples() {
        assert_eq!(cumulative_gap_curve(&[4.0, 2.0]).unwrap(), vec![(2.0, 0.5), (4.0, 1.0)]);
        assert_eq!(cumulative_gap_curve(&[3.0, 3.0, 3.0]).unwrap(), vec![(3.0, 1.0)]);
        assert!(cumulative_gap_curve(&[]).is_err());
    }

    #[test]
    fn classification_examples() {
        let mut labels = vec![true; 3];
        let mut preds = vec![true; 3];
        labels.push(false);
        preds.push(true);
        labels.push(true);
        preds.push(false);
        labels.extend([false; 5]);
        preds.extend([false; 5]);
        let r = classification_metrics(&labels, &preds).unwrap();
        assert_eq!((r.tp, r.fp, r.fn_, r.tn), (3, 1, 1, 5));
        assert!((r.accuracy - 0.8).abs() < 1e-12);
        assert!((r.precision - 0.75).abs() < 1e-12);
        assert!((r.recall - 0.75).abs() < 1e-12);
        assert!((r.f1 - 0.75).abs() < 1e-12);

        let perfect = classification_metrics(&[true, false], &[true, false]).unwrap();
        assert_eq!((perfect.accuracy, perfect.precision, perfect.recall, perfect.f1), (1.0, 1.0, 1.0, 1.0));

        let never = classification_metrics(&[true, false, true], &[false; 3]).unwrap();
        assert_eq!((never.recall, never.f1, never.precision), (0.0, 0.0, 0.0));
        assert!(classification_metrics(&[], &[]).is_err());
    }

    #[test]
    fn constant_crossing_speed_is_recovered() {
        let n = 60;
        let pts: Vec<_> = (0..n)
            .map(|i| TrajPoint::new(i as f64 * 0.1, 0.5, -0.3 + 1.6 * i as f64 * 0.1))
            .collect();
        let actions = vec![ActionState::Cross; n];
        let s = walking_speed_stats(&pts, &actions, 5).unwrap();
        assert!((s.crossing_mean.unwrap() - 1.6).abs() < 0.016);
        assert!(s.sidewalk_mean.is_none());
        assert!(walking_speed_stats(&pts[..6], &actions[..6], 5).is_err());
    }
}
