//! Platt scaling: a sigmoid fitted to decision values by regularized maximum
//! likelihood, using the Newton method with backtracking of Lin, Lin and Weng.

use serde::{Deserialize, Serialize};

const PROB_FLOOR: f64 = 1e-12;

/// `p = 1 / (1 + exp(a·s + b))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlattSigmoid {
    pub a: f64,
    pub b: f64,
}

impl PlattSigmoid {
    /// Probability of the positive class for decision value `s`, kept
    /// strictly inside `(0, 1)`.
    pub fn probability(&self, s: f64) -> f64 {
        let f = s * self.a + self.b;
        let p = if f >= 0.0 {
            let e = (-f).exp();
            e / (1.0 + e)
        } else {
            1.0 / (1.0 + f.exp())
        };
        p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR)
    }

    /// Fits the sigmoid to decision values and labels.
    ///
    /// Targets are smoothed to `(N₊+1)/(N₊+2)` and `1/(N₋+2)` to avoid
    /// overfitting separable data.
    pub fn fit(decision: &[f64], labels: &[bool]) -> PlattSigmoid {
        const MAX_ITER: usize = 100;
        const MIN_STEP: f64 = 1e-10;
        const SIGMA: f64 = 1e-12;
        const EPS: f64 = 1e-5;

        let n_pos = labels.iter().filter(|&&l| l).count() as f64;
        let n_neg = labels.len() as f64 - n_pos;
        let hi = (n_pos + 1.0) / (n_pos + 2.0);
        let lo = 1.0 / (n_neg + 2.0);
        let target: Vec<f64> = labels.iter().map(|&l| if l { hi } else { lo }).collect();

        let objective = |a: f64, b: f64| -> f64 {
            decision
                .iter()
                .zip(&target)
                .map(|(&s, &t)| {
                    let f = s * a + b;
                    if f >= 0.0 {
                        t * f + (-f).exp().ln_1p()
                    } else {
                        (t - 1.0) * f + f.exp().ln_1p()
                    }
                })
                .sum()
        };

        let mut a = 0.0;
        let mut b = ((n_neg + 1.0) / (n_pos + 1.0)).ln();
        let mut fval = objective(a, b);

        for _ in 0..MAX_ITER {
            let (mut h11, mut h22, mut h21, mut g1, mut g2) = (SIGMA, SIGMA, 0.0, 0.0, 0.0);
            for (&s, &t) in decision.iter().zip(&target) {
                let f = s * a + b;
                let (p, q) = if f >= 0.0 {
                    let e = (-f).exp();
                    (e / (1.0 + e), 1.0 / (1.0 + e))
                } else {
                    let e = f.exp();
                    (1.0 / (1.0 + e), e / (1.0 + e))
                };
                let d2 = p * q;
                h11 += s * s * d2;
                h22 += d2;
                h21 += s * d2;
                let d1 = t - p;
                g1 += s * d1;
                g2 += d1;
            }
            if g1.abs() < EPS && g2.abs() < EPS {
                break;
            }
            let det = h11 * h22 - h21 * h21;
            let da = -(h22 * g1 - h21 * g2) / det;
            let db = -(-h21 * g1 + h11 * g2) / det;
            let gd = g1 * da + g2 * db;

            let mut step = 1.0;
            while step >= MIN_STEP {
                let (na, nb) = (a + step * da, b + step * db);
                let nf = objective(na, nb);
                if nf < fval + 1e-4 * step * gd {
                    a = na;
                    b = nb;
                    fval = nf;
                    break;
                }
                step /= 2.0;
            }
            if step < MIN_STEP {
                log::debug!("platt line search stalled at a={a}, b={b}");
                break;
            }
        }
        PlattSigmoid { a, b }
    }
}
