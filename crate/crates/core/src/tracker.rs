//! Constant-velocity dynamics and the linear Kalman filter built on them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hybrid::{ActionState, Kinematics};
use crate::linalg::Mat4;
use crate::scalar::Real;

/// Diagonal process noise (per step) and isotropic position measurement noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig<T> {
    pub q_pos: T,
    pub q_vel: T,
    pub r_pos: T,
}

impl<T: Real> Default for NoiseConfig<T> {
    fn default() -> Self {
        NoiseConfig {
            q_pos: T::lit(1e-3),
            q_vel: T::lit(1e-2),
            r_pos: T::lit(1e-2),
        }
    }
}

impl<T: Real> NoiseConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.q_pos >= T::zero() && self.q_pos.is_finite()) {
            return Err(Error::invalid("q_pos", "must be finite and >= 0"));
        }
        if !(self.q_vel >= T::zero() && self.q_vel.is_finite()) {
            return Err(Error::invalid("q_vel", "must be finite and >= 0"));
        }
        if !(self.r_pos > T::zero() && self.r_pos.is_finite()) {
            return Err(Error::invalid("r_pos", "must be finite and > 0"));
        }
        Ok(())
    }

    pub fn process_cov(&self) -> Mat4<T> {
        Mat4::diag([self.q_pos, self.q_pos, self.q_vel, self.q_vel])
    }
}

/// Position-only observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measurement<T> {
    pub t: T,
    pub zx: T,
    pub zy: T,
}

fn transition_matrix<T: Real>(dt: T, hold: bool) -> Mat4<T> {
    if hold {
        return Mat4::diag([T::one(), T::one(), T::zero(), T::zero()]);
    }
    let mut f = Mat4::identity();
    f[(0, 2)] = dt;
    f[(1, 3)] = dt;
    f
}

fn propagate<T: Real>(
    kin: &Kinematics<T>,
    cov: &Mat4<T>,
    dt: T,
    noise: &NoiseConfig<T>,
    hold: bool,
) -> Result<(Kinematics<T>, Mat4<T>)> {
    if !(dt > T::zero()) {
        return Err(Error::invalid("dt", format!("must be > 0, got {dt}")));
    }
    let f = transition_matrix(dt, hold);
    let s = kin.as_array();
    let mut next = [T::zero(); 4];
    for (i, out) in next.iter_mut().enumerate() {
        *out = (0..4).fold(T::zero(), |acc, j| acc + f[(i, j)] * s[j]);
    }
    let p = (f.congruence(cov) + noise.process_cov()).symmetrized();
    Ok((Kinematics::from_array(next), p))
}

/// One constant-velocity step.
///
/// In `Wait` the dynamics are stationary: the position is held and the
/// velocity mean is zeroed, with the covariance propagated through the same
/// held transition.
pub fn cv_predict<T: Real>(
    kin: &Kinematics<T>,
    cov: &Mat4<T>,
    dt: T,
    noise: &NoiseConfig<T>,
    action: ActionState,
) -> Result<(Kinematics<T>, Mat4<T>)> {
    propagate(kin, cov, dt, noise, action == ActionState::Wait)
}

/// Plain constant-velocity step, independent of the discrete action. This is
/// the time update of the tracking filter shared by the hybrid model and the
/// CV baseline.
pub fn cv_step<T: Real>(
    kin: &Kinematics<T>,
    cov: &Mat4<T>,
    dt: T,
    noise: &NoiseConfig<T>,
) -> Result<(Kinematics<T>, Mat4<T>)> {
    propagate(kin, cov, dt, noise, false)
}

/// Linear-Gaussian measurement update for a position observation.
///
/// Uses the Joseph form so the posterior stays symmetric positive
/// semidefinite, then symmetrizes.
pub fn kalman_update<T: Real>(
    kin: &Kinematics<T>,
    cov: &Mat4<T>,
    z: &Measurement<T>,
    noise: &NoiseConfig<T>,
) -> Result<(Kinematics<T>, Mat4<T>)> {
    let r = noise.r_pos;
    let s00 = cov[(0, 0)] + r;
    let s01 = cov[(0, 1)];
    let s10 = cov[(1, 0)];
    let s11 = cov[(1, 1)] + r;
    let det = s00 * s11 - s01 * s10;
    let scale = (s00.abs() * s11.abs()).max(T::min_positive_value());
    if !det.is_finite() || !(det > scale * T::epsilon() * T::lit(16.0)) {
        return Err(Error::SingularInnovation {
            det: det.to_f64_lossy(),
        });
    }
    let inv = [[s11 / det, -s01 / det], [-s10 / det, s00 / det]];

    // K = P Hᵀ S⁻¹, with P Hᵀ the first two columns of P.
    let mut gain = [[T::zero(); 2]; 4];
    for (i, row) in gain.iter_mut().enumerate() {
        for (j, g) in row.iter_mut().enumerate() {
            *g = cov[(i, 0)] * inv[0][j] + cov[(i, 1)] * inv[1][j];
        }
    }

    let innov = [z.zx - kin.x, z.zy - kin.y];
    let s = kin.as_array();
    let mut post = [T::zero(); 4];
    for i in 0..4 {
        post[i] = s[i] + gain[i][0] * innov[0] + gain[i][1] * innov[1];
    }

    // I - K H
    let mut ikh = Mat4::identity();
    for i in 0..4 {
        ikh[(i, 0)] = ikh[(i, 0)] - gain[i][0];
        ikh[(i, 1)] = ikh[(i, 1)] - gain[i][1];
    }
    let mut krk = Mat4::zeros();
    for i in 0..4 {
        for j in 0..4 {
            krk[(i, j)] = r * (gain[i][0] * gain[j][0] + gain[i][1] * gain[j][1]);
        }
    }
    let p = (ikh.congruence(cov) + krk).symmetrized();
    Ok((Kinematics::from_array(post), p))
}
