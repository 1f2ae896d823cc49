//! Split-signature 4-vectors and the paraquaternion algebra.
//!
//! A single value type [`Vec4`] plays three roles: a point of R⁴₂, a tangent
//! vector, and a paraquaternion. The paraquaternions are spanned by
//! {1, i, j, k} with
//!
//! ```text
//! i² = −1,   j² = k² = +1,   ij = −ji = k,
//! ```
//!
//! so jk = −i and ki = j. Writing q = x₁ + x₂ i + x₃ j + x₄ k, conjugation
//! negates the i, j, k parts and q q̄ = x₁² + x₂² − x₃² − x₄² is the neutral
//! inner product of signature (+, +, −, −). The norm is multiplicative:
//! ‖pq‖² = ‖p‖²‖q‖², even though it can vanish on nonzero elements.
//!
//! Left multiplication by i, j, k defines three product structures J₁, J₂, J₃
//! on R⁴₂ (J₁² = −Id, J₂² = J₃² = +Id, J₁J₂ = J₃ = −J₂J₁). They are exposed
//! both as [`Vec4::j1`]/[`Vec4::j2`]/[`Vec4::j3`] and as [`Mat4`] constants.

use std::ops::{Add, Div, Index, IndexMut, Mul, Neg, Sub};

/// A 4-vector over `f64`; also a paraquaternion x₁ + x₂ i + x₃ j + x₄ k.
///
/// Component order is (x₁, x₂, x₃, x₄). The inner product carried by this
/// type is the neutral one, see [`Vec4::inner`].
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Vec4(pub [f64; 4]);

impl Vec4 {
    pub const ZERO: Vec4 = Vec4([0.0; 4]);
    /// The unit 1 of the paraquaternion algebra.
    pub const ONE: Vec4 = Vec4([1.0, 0.0, 0.0, 0.0]);
    /// The imaginary unit i (i² = −1).
    pub const I: Vec4 = Vec4([0.0, 1.0, 0.0, 0.0]);
    /// The first para-unit j (j² = +1).
    pub const J: Vec4 = Vec4([0.0, 0.0, 1.0, 0.0]);
    /// The second para-unit k = ij (k² = +1).
    pub const K: Vec4 = Vec4([0.0, 0.0, 0.0, 1.0]);

    pub const fn new(x1: f64, x2: f64, x3: f64, x4: f64) -> Self {
        Vec4([x1, x2, x3, x4])
    }

    /// Neutral inner product ⟨u, v⟩ = u₁v₁ + u₂v₂ − u₃v₃ − u₄v₄.
    pub fn inner(self, v: Vec4) -> f64 {
        let u = self.0;
        let v = v.0;
        u[0] * v[0] + u[1] * v[1] - u[2] * v[2] - u[3] * v[3]
    }

    /// Causal character ⟨q, q⟩; equals q q̄ as a paraquaternion.
    pub fn norm2(self) -> f64 {
        self.inner(self)
    }

    /// Paraquaternion conjugate q̄ (negates the i, j, k parts).
    pub fn conj(self) -> Vec4 {
        Vec4([self.0[0], -self.0[1], -self.0[2], -self.0[3]])
    }

    /// Left multiplication by i; the complex structure J₁ (J₁² = −Id).
    pub fn j1(self) -> Vec4 {
        let [x1, x2, x3, x4] = self.0;
        Vec4([-x2, x1, -x4, x3])
    }

    /// Left multiplication by j; the product structure J₂ (J₂² = +Id).
    pub fn j2(self) -> Vec4 {
        let [x1, x2, x3, x4] = self.0;
        Vec4([x3, -x4, x1, -x2])
    }

    /// Left multiplication by k; the product structure J₃ (J₃² = +Id).
    pub fn j3(self) -> Vec4 {
        let [x1, x2, x3, x4] = self.0;
        Vec4([x4, x3, x2, x1])
    }

    /// Euclidean length, used only for conditioning guards, never as a metric.
    pub fn len_euclid(self) -> f64 {
        self.0.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// Largest absolute component.
    pub fn max_abs(self) -> f64 {
        self.0.iter().fold(0.0f64, |m, c| m.max(c.abs()))
    }
}

impl Index<usize> for Vec4 {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for Vec4 {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl Add for Vec4 {
    type Output = Vec4;
    fn add(self, v: Vec4) -> Vec4 {
        Vec4([
            self.0[0] + v.0[0],
            self.0[1] + v.0[1],
            self.0[2] + v.0[2],
            self.0[3] + v.0[3],
        ])
    }
}

impl Sub for Vec4 {
    type Output = Vec4;
    fn sub(self, v: Vec4) -> Vec4 {
        Vec4([
            self.0[0] - v.0[0],
            self.0[1] - v.0[1],
            self.0[2] - v.0[2],
            self.0[3] - v.0[3],
        ])
    }
}

impl Neg for Vec4 {
    type Output = Vec4;
    fn neg(self) -> Vec4 {
        Vec4([-self.0[0], -self.0[1], -self.0[2], -self.0[3]])
    }
}

impl Mul<f64> for Vec4 {
    type Output = Vec4;
    fn mul(self, s: f64) -> Vec4 {
        Vec4([self.0[0] * s, self.0[1] * s, self.0[2] * s, self.0[3] * s])
    }
}

impl Div<f64> for Vec4 {
    type Output = Vec4;
    fn div(self, s: f64) -> Vec4 {
        self * (1.0 / s)
    }
}

/// Paraquaternion product. Bilinear extension of the unit table
/// i² = −1, j² = k² = 1, ij = k, jk = −i, ki = j (anticommuting pairs).
impl Mul for Vec4 {
    type Output = Vec4;
    fn mul(self, q: Vec4) -> Vec4 {
        let [p1, p2, p3, p4] = self.0;
        let [q1, q2, q3, q4] = q.0;
        Vec4([
            p1 * q1 - p2 * q2 + p3 * q3 + p4 * q4,
            p1 * q2 + p2 * q1 - p3 * q4 + p4 * q3,
            p1 * q3 + p3 * q1 - p2 * q4 + p4 * q2,
            p1 * q4 + p4 * q1 + p2 * q3 - p3 * q2,
        ])
    }
}

/// Row-major 4×4 matrix acting on [`Vec4`] columns.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat4(pub [[f64; 4]; 4]);

impl Mat4 {
    pub const IDENTITY: Mat4 = Mat4([
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ]);

    /// Matrix of J₁ (left multiplication by i).
    pub const J1: Mat4 = Mat4([
        [0.0, -1.0, 0.0, 0.0],
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, -1.0],
        [0.0, 0.0, 1.0, 0.0],
    ]);

    /// Matrix of J₂ (left multiplication by j).
    pub const J2: Mat4 = Mat4([
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, -1.0],
        [1.0, 0.0, 0.0, 0.0],
        [0.0, -1.0, 0.0, 0.0],
    ]);

    /// Matrix of J₃ (left multiplication by k).
    pub const J3: Mat4 = Mat4([
        [0.0, 0.0, 0.0, 1.0],
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 1.0, 0.0, 0.0],
        [1.0, 0.0, 0.0, 0.0],
    ]);

    /// Signature matrix ε = diag(1, 1, −1, −1) of the neutral inner product.
    pub const EPS: Mat4 = Mat4([
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, -1.0, 0.0],
        [0.0, 0.0, 0.0, -1.0],
    ]);

    pub fn from_rows(r1: Vec4, r2: Vec4, r3: Vec4, r4: Vec4) -> Mat4 {
        Mat4([r1.0, r2.0, r3.0, r4.0])
    }

    pub fn row(&self, i: usize) -> Vec4 {
        Vec4(self.0[i])
    }

    pub fn mul_vec(&self, v: Vec4) -> Vec4 {
        let mut out = [0.0; 4];
        for (o, row) in out.iter_mut().zip(self.0.iter()) {
            *o = row[0] * v.0[0] + row[1] * v.0[1] + row[2] * v.0[2] + row[3] * v.0[3];
        }
        Vec4(out)
    }

    pub fn mul_mat(&self, m: &Mat4) -> Mat4 {
        let mut out = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                out[i][j] = (0..4).map(|k| self.0[i][k] * m.0[k][j]).sum();
            }
        }
        Mat4(out)
    }

    pub fn transpose(&self) -> Mat4 {
        let mut out = [[0.0; 4]; 4];
        for (i, row) in self.0.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                out[j][i] = *v;
            }
        }
        Mat4(out)
    }

    pub fn scale(&self, s: f64) -> Mat4 {
        let mut out = self.0;
        out.iter_mut().flatten().for_each(|v| *v *= s);
        Mat4(out)
    }

    pub fn add(&self, m: &Mat4) -> Mat4 {
        let mut out = self.0;
        for (o, r) in out.iter_mut().zip(m.0.iter()) {
            for (a, b) in o.iter_mut().zip(r.iter()) {
                *a += *b;
            }
        }
        Mat4(out)
    }

    pub fn sub(&self, m: &Mat4) -> Mat4 {
        self.add(&m.scale(-1.0))
    }

    /// Determinant by cofactor expansion along the first row.
    pub fn det(&self) -> f64 {
        let m = &self.0;
        let minor = |r: [usize; 3], c: [usize; 3]| -> f64 {
            m[r[0]][c[0]] * (m[r[1]][c[1]] * m[r[2]][c[2]] - m[r[1]][c[2]] * m[r[2]][c[1]])
                - m[r[0]][c[1]] * (m[r[1]][c[0]] * m[r[2]][c[2]] - m[r[1]][c[2]] * m[r[2]][c[0]])
                + m[r[0]][c[2]] * (m[r[1]][c[0]] * m[r[2]][c[1]] - m[r[1]][c[1]] * m[r[2]][c[0]])
        };
        m[0][0] * minor([1, 2, 3], [1, 2, 3]) - m[0][1] * minor([1, 2, 3], [0, 2, 3])
            + m[0][2] * minor([1, 2, 3], [0, 1, 3])
            - m[0][3] * minor([1, 2, 3], [0, 1, 2])
    }

    /// Largest absolute entry, handy for residual norms.
    pub fn max_abs(&self) -> f64 {
        self.0
            .iter()
            .flatten()
            .fold(0.0f64, |acc, v| acc.max(v.abs()))
    }

    /// Whether A ε Aᵗ = ε within `tol`, i.e. A preserves the neutral inner
    /// product (rows are pseudo-orthonormal with signs +, +, −, −).
    pub fn is_pseudo_orthogonal(&self, tol: f64) -> bool {
        let g = self.mul_mat(&Mat4::EPS).mul_mat(&self.transpose());
        g.sub(&Mat4::EPS).max_abs() <= tol
    }
}
