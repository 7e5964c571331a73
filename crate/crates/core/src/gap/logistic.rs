//! L2-regularized logistic regression fitted by Newton's method.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LogisticParams {
    pub fn probability(&self, x: &[f64]) -> f64 {
        let z: f64 = self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias;
        sigmoid(z)
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Minimizes the negative log likelihood plus `½·l2·‖w‖²` (bias unpenalized).
pub(crate) fn train_logistic(
    x: &[Vec<f64>],
    labels: &[bool],
    l2: f64,
    max_iter: usize,
) -> Result<LogisticParams> {
    let n = x.len();
    if n != labels.len() {
        return Err(Error::LengthMismatch(n, labels.len()));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    if n_pos == 0 || n_pos == n {
        return Err(Error::SingleClass(n));
    }
    let d = x[0].len();
    let m = d + 1;
    // θ = (w, b)
    let mut theta = vec![0.0; m];
    let row = |i: usize, k: usize| if k < d { x[i][k] } else { 1.0 };

    for iter in 0..max_iter {
        let mut grad = vec![0.0; m];
        let mut hess = vec![vec![0.0; m]; m];
        for i in 0..n {
            let z: f64 = (0..m).map(|k| theta[k] * row(i, k)).sum();
            let p = sigmoid(z);
            let t = if labels[i] { 1.0 } else { 0.0 };
            let w = (p * (1.0 - p)).max(1e-12);
            for a in 0..m {
                grad[a] += (p - t) * row(i, a);
                for b in 0..=a {
                    hess[a][b] += w * row(i, a) * row(i, b);
                }
            }
        }
        for a in 0..m {
            for b in 0..a {
                hess[b][a] = hess[a][b];
            }
        }
        for k in 0..d {
            grad[k] += l2 * theta[k];
            hess[k][k] += l2;
        }
        hess[d][d] += 1e-10;

        let step = solve(hess, grad).ok_or(Error::NotConverged(iter))?;
        let mut max_change: f64 = 0.0;
        for k in 0..m {
            theta[k] -= step[k];
            max_change = max_change.max(step[k].abs());
        }
        if !theta.iter().all(|v| v.is_finite()) {
            return Err(Error::NotConverged(iter));
        }
        if max_change < 1e-10 {
            return Ok(LogisticParams {
                weights: theta[..d].to_vec(),
                bias: theta[d],
            });
        }
    }
    Err(Error::NotConverged(max_iter))
}

/// Gaussian elimination with partial pivoting; `None` if singular.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_small_system() {
        let x = solve(vec![vec![2.0, 1.0], vec![1.0, 3.0]], vec![3.0, 5.0]).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-12 && (x[1] - 1.4).abs() < 1e-12);
    }

    #[test]
    fn gradient_vanishes_at_optimum() {
        let x: Vec<Vec<f64>> = (0..50).map(|i| vec![(i as f64) / 10.0 - 2.5]).collect();
        let y: Vec<bool> = (0..50).map(|i| (i * 37 % 50) < i).collect();
        let l2 = 0.1;
        let m = train_logistic(&x, &y, l2, 50).unwrap();
        let (mut gw, mut gb) = (l2 * m.weights[0], 0.0);
        for (xi, &yi) in x.iter().zip(&y) {
            let r = m.probability(xi) - if yi { 1.0 } else { 0.0 };
            gw += r * xi[0];
            gb += r;
        }
        assert!(gw.abs() < 1e-8 && gb.abs() < 1e-8, "{gw} {gb}");
    }
}
