//! Per-feature conditional histograms combined under an independence
//! assumption.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureHistogram {
    pub lo: f64,
    pub hi: f64,
    /// `P(bin | accepted)`, sums to 1.
    pub accepted: Vec<f64>,
    /// `P(bin | rejected)`, sums to 1.
    pub rejected: Vec<f64>,
}

impl FeatureHistogram {
    fn bin(&self, v: f64) -> usize {
        let n = self.accepted.len();
        if !(self.hi > self.lo) {
            return 0;
        }
        let u = ((v - self.lo) / (self.hi - self.lo) * n as f64).floor();
        if u.is_nan() {
            return 0;
        }
        (u.max(0.0) as usize).min(n - 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CondProbParams {
    pub prior_accepted: f64,
    pub histograms: Vec<FeatureHistogram>,
}

impl CondProbParams {
    pub fn probability(&self, x: &[f64]) -> f64 {
        let mut log_a = self.prior_accepted.ln();
        let mut log_r = (1.0 - self.prior_accepted).ln();
        for (h, &v) in self.histograms.iter().zip(x) {
            let b = h.bin(v);
            log_a += h.accepted[b].ln();
            log_r += h.rejected[b].ln();
        }
        let p = 1.0 / (1.0 + (log_r - log_a).exp());
        p.clamp(1e-12, 1.0 - 1e-12)
    }
}

pub(crate) fn train_condprob(
    x: &[Vec<f64>],
    labels: &[bool],
    bins: usize,
    alpha: f64,
) -> Result<CondProbParams> {
    let n = x.len();
    if n != labels.len() {
        return Err(Error::LengthMismatch(n, labels.len()));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    if n_pos == 0 || n_pos == n {
        return Err(Error::SingleClass(n));
    }
    if bins == 0 {
        return Err(Error::invalid("condprob_bins", "must be >= 1"));
    }
    let d = x[0].len();
    let histograms = (0..d)
        .map(|k| {
            let lo = x.iter().map(|r| r[k]).fold(f64::INFINITY, f64::min);
            let hi = x.iter().map(|r| r[k]).fold(f64::NEG_INFINITY, f64::max);
            let mut h = FeatureHistogram {
                lo,
                hi,
                accepted: vec![alpha; bins],
                rejected: vec![alpha; bins],
            };
            for (row, &l) in x.iter().zip(labels) {
                let b = h.bin(row[k]);
                if l {
                    h.accepted[b] += 1.0;
                } else {
                    h.rejected[b] += 1.0;
                }
            }
            for counts in [&mut h.accepted, &mut h.rejected] {
                let total: f64 = counts.iter().sum();
                counts.iter_mut().for_each(|c| *c /= total);
            }
            h
        })
        .collect();
    Ok(CondProbParams {
        prior_accepted: n_pos as f64 / n as f64,
        histograms,
    })
}
