//! Fixed-size 4x4 matrix used for the pedestrian state covariance.

use std::ops::{Add, Index, IndexMut, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Mat4<T>(pub [[T; 4]; 4]);

impl<T: Real> Mat4<T> {
    pub fn zeros() -> Self {
        Mat4([[T::zero(); 4]; 4])
    }

    pub fn identity() -> Self {
        Self::diag([T::one(); 4])
    }

    pub fn diag(d: [T; 4]) -> Self {
        let mut m = Self::zeros();
        for (i, v) in d.into_iter().enumerate() {
            m.0[i][i] = v;
        }
        m
    }

    pub fn transpose(&self) -> Self {
        let mut m = Self::zeros();
        for i in 0..4 {
            for j in 0..4 {
                m.0[i][j] = self.0[j][i];
            }
        }
        m
    }

    pub fn trace(&self) -> T {
        (0..4).fold(T::zero(), |acc, i| acc + self.0[i][i])
    }

    pub fn scale(&self, s: T) -> Self {
        let mut m = *self;
        m.0.iter_mut().flatten().for_each(|v| *v = *v * s);
        m
    }

    /// `(A + Aᵀ) / 2`.
    pub fn symmetrized(&self) -> Self {
        let half = T::lit(0.5);
        let mut m = *self;
        for i in 0..4 {
            for j in (i + 1)..4 {
                let v = (self.0[i][j] + self.0[j][i]) * half;
                m.0[i][j] = v;
                m.0[j][i] = v;
            }
        }
        m
    }

    pub fn max_asymmetry(&self) -> T {
        let mut worst = T::zero();
        for i in 0..4 {
            for j in (i + 1)..4 {
                worst = worst.max((self.0[i][j] - self.0[j][i]).abs());
            }
        }
        worst
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|v| v.is_finite())
    }

    /// `self · other · selfᵀ`
    pub fn congruence(&self, other: &Self) -> Self {
        *self * *other * self.transpose()
    }
}

impl<T: Real> Default for Mat4<T> {
    fn default() -> Self {
        Self::zeros()
    }
}

impl<T> Index<(usize, usize)> for Mat4<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.0[i][j]
    }
}

impl<T> IndexMut<(usize, usize)> for Mat4<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.0[i][j]
    }
}

impl<T: Real> Mul for Mat4<T> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut m = Self::zeros();
        for i in 0..4 {
            for j in 0..4 {
                let mut acc = T::zero();
                for k in 0..4 {
                    acc = acc + self.0[i][k] * rhs.0[k][j];
                }
                m.0[i][j] = acc;
            }
        }
        m
    }
}

impl<T: Real> Add for Mat4<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let mut m = self;
        for i in 0..4 {
            for j in 0..4 {
                m.0[i][j] = m.0[i][j] + rhs.0[i][j];
            }
        }
        m
    }
}

impl<T: Real> Sub for Mat4<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        let mut m = self;
        for i in 0..4 {
            for j in 0..4 {
                m.0[i][j] = m.0[i][j] - rhs.0[i][j];
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_is_neutral() {
        let mut a = Mat4::<f64>::zeros();
        for i in 0..4 {
            for j in 0..4 {
                a[(i, j)] = (i * 4 + j) as f64;
            }
        }
        assert_eq!(a * Mat4::identity(), a);
        assert_eq!(Mat4::identity() * a, a);
        assert_eq!(a.transpose().transpose(), a);
        assert_eq!(a.trace(), 0.0 + 5.0 + 10.0 + 15.0);
    }

    #[test]
    fn symmetrize_removes_asymmetry() {
        let mut a = Mat4::<f64>::identity();
        a[(0, 2)] = 1.0;
        a[(2, 0)] = 0.5;
        assert!(a.max_asymmetry() > 0.4);
        let s = a.symmetrized();
        assert_eq!(s.max_asymmetry(), 0.0);
        assert_eq!(s[(0, 2)], 0.75);
    }
}
