//! Real 2×2 matrices with closed-form singular values.

use std::fmt;
use std::ops::Mul;

use serde::{Deserialize, Serialize};

/// A real 2×2 matrix stored row-major: `[[a, b], [c, d]]`.
///
/// Serialized as the flat row-major array `[a, b, c, d]`.
#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct Mat2 {
    pub m: [[f64; 2]; 2],
}

impl From<[f64; 4]> for Mat2 {
    fn from(v: [f64; 4]) -> Self {
        Mat2::new(v[0], v[1], v[2], v[3])
    }
}

impl From<Mat2> for [f64; 4] {
    fn from(a: Mat2) -> Self {
        a.to_row_major()
    }
}

impl fmt::Debug for Mat2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[[{}, {}], [{}, {}]]",
            self.m[0][0], self.m[0][1], self.m[1][0], self.m[1][1]
        )
    }
}

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2 {
        m: [[1.0, 0.0], [0.0, 1.0]],
    };

    pub const fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Mat2 { m: [[a, b], [c, d]] }
    }

    pub const fn diag(a: f64, d: f64) -> Self {
        Mat2::new(a, 0.0, 0.0, d)
    }

    /// Counter-clockwise rotation by `phi` radians.
    pub fn rotation(phi: f64) -> Self {
        let (s, c) = phi.sin_cos();
        Mat2::new(c, -s, s, c)
    }

    pub fn to_row_major(self) -> [f64; 4] {
        [self.m[0][0], self.m[0][1], self.m[1][0], self.m[1][1]]
    }

    pub fn det(&self) -> f64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    pub fn trace(&self) -> f64 {
        self.m[0][0] + self.m[1][1]
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.m.iter().flatten().map(|x| x * x).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.m.iter().flatten().fold(0.0_f64, |acc, x| acc.max(x.abs()))
    }

    pub fn transpose(&self) -> Mat2 {
        Mat2::new(self.m[0][0], self.m[1][0], self.m[0][1], self.m[1][1])
    }

    pub fn scale(&self, s: f64) -> Mat2 {
        let m = self.m;
        Mat2::new(s * m[0][0], s * m[0][1], s * m[1][0], s * m[1][1])
    }

    /// Entrywise `(1 - t) self + t other`.
    pub fn lerp(&self, other: &Mat2, t: f64) -> Mat2 {
        let (a, b) = (self.to_row_major(), other.to_row_major());
        let mut out = [0.0; 4];
        for k in 0..4 {
            out[k] = (1.0 - t) * a[k] + t * b[k];
        }
        out.into()
    }

    pub fn inverse(&self) -> Option<Mat2> {
        let det = self.det();
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let m = self.m;
        Some(Mat2::new(m[1][1], -m[0][1], -m[1][0], m[0][0]).scale(1.0 / det))
    }

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [
            self.m[0][0] * v[0] + self.m[0][1] * v[1],
            self.m[1][0] * v[0] + self.m[1][1] * v[1],
        ]
    }

    /// Singular values `(s_max, s_min)` from the trace and determinant of
    /// `αᵀα`. The small one is recovered as `|det| / s_max`, which keeps full
    /// relative precision for nearly singular matrices.
    pub fn singular_values(&self) -> (f64, f64) {
        let f = self.frobenius_sq();
        let det = self.det();
        let disc = ((f - 2.0 * det) * (f + 2.0 * det)).max(0.0);
        let s_max = ((f + disc.sqrt()) / 2.0).sqrt();
        if s_max == 0.0 {
            return (0.0, 0.0);
        }
        (s_max, det.abs() / s_max)
    }

    /// Spectral norm `‖α‖`.
    pub fn norm(&self) -> f64 {
        self.singular_values().0
    }

    /// Co-norm `‖α⁻¹‖⁻¹`, the smallest singular value.
    pub fn conorm(&self) -> f64 {
        self.singular_values().1
    }

    /// True when the matrix is `c·I` up to `tol` relative to its size.
    pub fn is_scalar(&self, tol: f64) -> bool {
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        let m = self.m;
        m[0][1].abs() <= tol * scale && m[1][0].abs() <= tol * scale && (m[0][0] - m[1][1]).abs() <= tol * scale
    }
}

impl Mul for Mat2 {
    type Output = Mat2;

    fn mul(self, rhs: Mat2) -> Mat2 {
        let (a, b) = (self.m, rhs.m);
        Mat2::new(
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conorm_of_jordan_block() {
        let a = Mat2::new(2.0, 1.0, 0.0, 2.0);
        let expected = ((9.0 - 17.0_f64.sqrt()) / 2.0).sqrt();
        assert!((a.conorm() - expected).abs() < 1e-14);
        assert!((a.norm() * a.conorm() - 4.0).abs() < 1e-13);
    }

    #[test]
    fn conorm_is_inverse_norm_reciprocal() {
        let a = Mat2::new(0.3, -1.7, 2.2, 0.9);
        let inv = a.inverse().unwrap();
        assert!((a.conorm() - 1.0 / inv.norm()).abs() < 1e-14);
    }

    #[test]
    fn rotation_has_unit_singular_values() {
        let (s1, s2) = Mat2::rotation(0.77).singular_values();
        assert!((s1 - 1.0).abs() < 1e-15 && (s2 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn serde_is_flat_row_major() {
        let a = Mat2::new(1.0, 2.0, 3.0, 4.0);
        assert_eq!(serde_json::to_string(&a).unwrap(), "[1.0,2.0,3.0,4.0]");
        let back: Mat2 = serde_json::from_str("[1,2,3,4]").unwrap();
        assert_eq!(back, a);
    }
}
