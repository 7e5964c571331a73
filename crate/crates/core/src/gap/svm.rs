//! Soft-margin kernel SVM trained by sequential minimal optimization with
//! second-order working-set selection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const TAU: f64 = 1e-12;

/// `(γ·⟨a, b⟩ + coef0)^degree`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolyKernel {
    pub gamma: f64,
    pub coef0: f64,
    pub degree: i32,
}

impl PolyKernel {
    pub fn cubic(gamma: f64) -> Self {
        PolyKernel {
            gamma,
            coef0: 1.0,
            degree: 3,
        }
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        (self.gamma * dot + self.coef0).powi(self.degree)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub kernel: PolyKernel,
    pub c: f64,
    pub support_vectors: Vec<Vec<f64>>,
    /// `αᵢ·yᵢ` for each support vector.
    pub dual_coef: Vec<f64>,
    pub bias: f64,
}

impl SvmParams {
    /// Signed distance-like score; positive means the accepted class.
    pub fn decision_value(&self, x: &[f64]) -> f64 {
        self.support_vectors
            .iter()
            .zip(&self.dual_coef)
            .map(|(sv, c)| c * self.kernel.eval(sv, x))
            .sum::<f64>()
            + self.bias
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct SmoSettings {
    pub c: f64,
    pub eps: f64,
    pub max_iter: usize,
}

/// Solves the dual `min ½αᵀQα − Σα` subject to `0 ≤ α ≤ C`, `yᵀα = 0`.
pub(crate) fn train_svm(
    x: &[Vec<f64>],
    labels: &[bool],
    kernel: PolyKernel,
    settings: SmoSettings,
) -> Result<SvmParams> {
    let n = x.len();
    if n != labels.len() {
        return Err(Error::LengthMismatch(n, labels.len()));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    if n_pos == 0 || n_pos == n {
        return Err(Error::SingleClass(n));
    }
    let c = settings.c;
    let y: Vec<f64> = labels.iter().map(|&l| if l { 1.0 } else { -1.0 }).collect();

    // Q_ij = y_i y_j K_ij, cached in full
    let mut q = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = y[i] * y[j] * kernel.eval(&x[i], &x[j]);
            q[i * n + j] = v;
            q[j * n + i] = v;
        }
    }
    let qd: Vec<f64> = (0..n).map(|i| q[i * n + i]).collect();

    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let mut iter = 0;

    loop {
        // most violating i
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = usize::MAX;
        for t in 0..n {
            let up = if y[t] > 0.0 { alpha[t] < c } else { alpha[t] > 0.0 };
            if up && -y[t] * grad[t] >= gmax {
                gmax = -y[t] * grad[t];
                i_sel = t;
            }
        }
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j_sel = usize::MAX;
        let mut obj_min = f64::INFINITY;
        if i_sel != usize::MAX {
            let i = i_sel;
            let qi = &q[i * n..(i + 1) * n];
            for t in 0..n {
                let low = if y[t] > 0.0 { alpha[t] > 0.0 } else { alpha[t] < c };
                if !low {
                    continue;
                }
                let v = y[t] * grad[t];
                gmax2 = gmax2.max(v);
                let b = gmax + v;
                if b > 0.0 {
                    let a = qd[i] + qd[t] - 2.0 * y[i] * y[t] * qi[t];
                    let obj = -(b * b) / if a > 0.0 { a } else { TAU };
                    if obj <= obj_min {
                        obj_min = obj;
                        j_sel = t;
                    }
                }
            }
        }
        if gmax + gmax2 < settings.eps || j_sel == usize::MAX {
            break;
        }
        if iter >= settings.max_iter {
            return Err(Error::NotConverged(iter));
        }
        iter += 1;

        let (i, j) = (i_sel, j_sel);
        let (old_ai, old_aj) = (alpha[i], alpha[j]);
        let qij = q[i * n + j];
        if y[i] != y[j] {
            let quad = (qd[i] + qd[j] + 2.0 * qij).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (qd[i] + qd[j] - 2.0 * qij).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (dai, daj) = (alpha[i] - old_ai, alpha[j] - old_aj);
        let (qi, qj) = (&q[i * n..(i + 1) * n], &q[j * n..(j + 1) * n]);
        for t in 0..n {
            grad[t] += qi[t] * dai + qj[t] * daj;
        }
    }

    // offset from free vectors, or the midpoint of the feasible interval
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut n_free, mut sum_free) = (0usize, 0.0);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 {
        sum_free / n_free as f64
    } else {
        (ub + lb) / 2.0
    };

    let mut support_vectors = Vec::new();
    let mut dual_coef = Vec::new();
    for t in 0..n {
        if alpha[t] > 0.0 {
            support_vectors.push(x[t].clone());
            dual_coef.push(alpha[t] * y[t]);
        }
    }
    Ok(SvmParams {
        kernel,
        c,
        support_vectors,
        dual_coef,
        bias: -rho,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn settings() -> SmoSettings {
        SmoSettings {
            c: 1.0,
            eps: 1e-3,
            max_iter: 100_000,
        }
    }

    #[test]
    fn separable_one_feature() {
        let x: Vec<Vec<f64>> = (0..40).map(|i| vec![(i as f64 - 19.5) / 10.0]).collect();
        let y: Vec<bool> = (0..40).map(|i| i >= 20).collect();
        let m = train_svm(&x, &y, PolyKernel::cubic(1.0), settings()).unwrap();
        for (xi, yi) in x.iter().zip(&y) {
            assert_eq!(m.decision_value(xi) > 0.0, *yi, "{xi:?}");
        }
    }

    #[test]
    fn dual_constraints_hold() {
        let x: Vec<Vec<f64>> = (0..30)
            .map(|i| vec![(i % 7) as f64 / 3.0 - 1.0, (i % 5) as f64 / 2.0 - 1.0])
            .collect();
        let y: Vec<bool> = (0..30).map(|i| (i * 7 + 3) % 4 < 2).collect();
        let m = train_svm(&x, &y, PolyKernel::cubic(0.5), settings()).unwrap();
        let sum: f64 = m.dual_coef.iter().sum();
        assert!(sum.abs() < 1e-9, "yᵀα = {sum}");
        assert!(m.dual_coef.iter().all(|c| c.abs() <= 1.0 + 1e-12));
    }

    #[test]
    fn single_class_rejected() {
        let x = vec![vec![0.0], vec![1.0]];
        assert!(matches!(
            train_svm(&x, &[true, true], PolyKernel::cubic(1.0), settings()),
            Err(Error::SingleClass(2))
        ));
    }

    #[test]
    fn kernel_value() {
        let k = PolyKernel::cubic(0.5);
        // (0.5·(1·2 + 2·3) + 1)³ = 5³
        assert_eq!(k.eval(&[1.0, 2.0], &[2.0, 3.0]), 125.0);
    }
}
