//! Minimal 2x2 real matrix used for Jacobians and variational solutions.

use serde::{Deserialize, Serialize};

/// Row-major 2x2 matrix: `[[a, b], [c, d]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mat2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Mat2 {
    pub const fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Self { a, b, c, d }
    }

    pub const fn identity() -> Self {
        Self::new(1.0, 0.0, 0.0, 1.0)
    }

    pub const fn zero() -> Self {
        Self::new(0.0, 0.0, 0.0, 0.0)
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn mul(&self, rhs: &Mat2) -> Mat2 {
        Mat2::new(
            self.a * rhs.a + self.b * rhs.c,
            self.a * rhs.b + self.b * rhs.d,
            self.c * rhs.a + self.d * rhs.c,
            self.c * rhs.b + self.d * rhs.d,
        )
    }

    pub fn sub(&self, rhs: &Mat2) -> Mat2 {
        Mat2::new(
            self.a - rhs.a,
            self.b - rhs.b,
            self.c - rhs.c,
            self.d - rhs.d,
        )
    }

    /// Entrywise max-norm.
    pub fn max_norm(&self) -> f64 {
        self.a
            .abs()
            .max(self.b.abs())
            .max(self.c.abs())
            .max(self.d.abs())
    }

    pub fn is_finite(&self) -> bool {
        self.a.is_finite() && self.b.is_finite() && self.c.is_finite() && self.d.is_finite()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn det_and_mul() {
        let m = Mat2::new(1.0, 2.0, 3.0, 4.0);
        assert_eq!(m.det(), -2.0);
        let i = Mat2::identity();
        assert_eq!(m.mul(&i), m);
        let n = Mat2::new(0.0, 1.0, 1.0, 0.0);
        assert_eq!(m.mul(&n), Mat2::new(2.0, 1.0, 4.0, 3.0));
    }

    #[test]
    fn norm() {
        let m = Mat2::new(-5.0, 2.0, 3.0, 4.0);
        assert_eq!(m.max_norm(), 5.0);
    }
}
