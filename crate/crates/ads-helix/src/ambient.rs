//! The ambient space: an anti-de Sitter quadric with a Berger-like metric.
//!
//! Points live on the quadric H = {q : ⟨q,q⟩ = −4/κ} inside R⁴₂, κ > 0.
//! Left multiplication by the paraquaternion units scales to a global
//! pseudo-orthonormal frame of vector fields
//!
//! ```text
//! X₁(q) = (√κ/2) i q,   X₂(q) = (√κ/2) j q,   X₃(q) = (√κ/2) k q,
//! ```
//!
//! with ⟨X₁,X₁⟩ = −1 and ⟨X₂,X₂⟩ = ⟨X₃,X₃⟩ = 1. X₁ is tangent to the fibers
//! of the Hopf-type submersion onto the hyperbolic plane H²(κ). The
//! Berger-like metric rescales that fiber direction:
//!
//! ```text
//! g_τ(X, Y) = ⟨X, Y⟩ + (1 − τ²) ⟨X, X₁⟩ ⟨Y, X₁⟩,       τ > 0,
//! ```
//!
//! and E₁ = τ⁻¹X₁, E₂ = X₂, E₃ = X₃ is a g_τ-orthonormal frame with E₁
//! timelike. Tangent vectors are handled in two interchangeable forms: raw
//! ambient [`Vec4`]s and frame coefficients [`Frame3`] with respect to
//! {E₁, E₂, E₃}.
//!
//! The Levi-Civita connection of g_τ has constant coefficients in this frame
//! ([`Ambient::connection_table`]); E₁ is Killing, with ∇_X E₁ =
//! −τ(√κ/2) X∧E₁ for the frame cross product [`Ambient::wedge`]. Curvature
//! is available in closed form ([`Ambient::curvature`]) and, independently,
//! by stacked finite differences ([`Ambient::curvature_fd`]) so the closed
//! form can be checked rather than trusted.

use crate::fd::{self, LinearSpace};
use crate::paraquaternion::Vec4;
use crate::rng::SplitMix64;
use crate::{Error, Result};

/// Tangent-vector coefficients with respect to the frame {E₁, E₂, E₃}.
///
/// The frame metric is diag(−1, 1, 1): see [`Frame3::metric`].
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Frame3 {
    pub e1: f64,
    pub e2: f64,
    pub e3: f64,
}

impl Frame3 {
    pub const ZERO: Frame3 = Frame3::new(0.0, 0.0, 0.0);
    /// The timelike frame direction E₁.
    pub const E1: Frame3 = Frame3::new(1.0, 0.0, 0.0);
    pub const E2: Frame3 = Frame3::new(0.0, 1.0, 0.0);
    pub const E3: Frame3 = Frame3::new(0.0, 0.0, 1.0);

    pub const fn new(e1: f64, e2: f64, e3: f64) -> Self {
        Frame3 { e1, e2, e3 }
    }

    /// g_τ restricted to frame coefficients: −u₁v₁ + u₂v₂ + u₃v₃.
    pub fn metric(self, v: Frame3) -> f64 {
        -self.e1 * v.e1 + self.e2 * v.e2 + self.e3 * v.e3
    }

    pub fn norm2(self) -> f64 {
        self.metric(self)
    }

    /// Component along E₁ with respect to g_τ, i.e. g_τ(·, E₁) = −e₁.
    pub fn g_e1(self) -> f64 {
        -self.e1
    }

    pub fn max_abs(self) -> f64 {
        self.e1.abs().max(self.e2.abs()).max(self.e3.abs())
    }

    pub fn add(self, v: Frame3) -> Frame3 {
        Frame3::new(self.e1 + v.e1, self.e2 + v.e2, self.e3 + v.e3)
    }

    pub fn sub(self, v: Frame3) -> Frame3 {
        Frame3::new(self.e1 - v.e1, self.e2 - v.e2, self.e3 - v.e3)
    }

    pub fn scale(self, s: f64) -> Frame3 {
        Frame3::new(self.e1 * s, self.e2 * s, self.e3 * s)
    }
}

impl LinearSpace for Frame3 {
    fn add(self, other: Self) -> Self {
        Frame3::add(self, other)
    }
    fn sub(self, other: Self) -> Self {
        Frame3::sub(self, other)
    }
    fn scale(self, s: f64) -> Self {
        Frame3::scale(self, s)
    }
}

/// A tangent vector field given by its frame coefficients at each point.
pub trait VectorField {
    fn at(&self, q: Vec4) -> Frame3;
}

impl<F: Fn(Vec4) -> Frame3> VectorField for F {
    fn at(&self, q: Vec4) -> Frame3 {
        self(q)
    }
}

/// Connection coefficients ∇_{E_i}E_j in the frame, indexable as `[i][j]`
/// with 0-based indices. Exposed as a value so verification can check a
/// deliberately corrupted table against the finite-difference identities.
#[derive(Clone, Copy, Debug)]
pub struct ConnectionTable(pub [[Frame3; 3]; 3]);

/// The quadric H = {⟨q,q⟩ = −4/κ} with the Berger-like metric g_τ.
#[derive(Clone, Copy, Debug)]
pub struct Ambient {
    pub kappa: f64,
    pub tau: f64,
}

impl Ambient {
    pub fn new(kappa: f64, tau: f64) -> Result<Self> {
        if !(kappa.is_finite() && kappa > 0.0) {
            return Err(Error::InvalidParams(format!(
                "kappa must be finite and positive, got {kappa}"
            )));
        }
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::InvalidParams(format!(
                "tau must be finite and positive, got {tau}"
            )));
        }
        Ok(Ambient { kappa, tau })
    }

    /// Target causal character of points: ⟨q, q⟩ = −4/κ.
    pub fn quadric_norm2(&self) -> f64 {
        -4.0 / self.kappa
    }

    /// Absolute defect |⟨q,q⟩ + 4/κ| of quadric membership.
    pub fn membership_defect(&self, q: Vec4) -> f64 {
        (q.norm2() - self.quadric_norm2()).abs()
    }

    /// Radial projection onto the quadric (rescaling; exact for the
    /// quadric's timelike cone). Fails on vectors with ⟨q,q⟩ ≥ 0.
    pub fn project(&self, q: Vec4) -> Vec4 {
        let n = q.norm2();
        debug_assert!(n < 0.0, "projection needs a timelike vector");
        q * (self.quadric_norm2() / n).sqrt()
    }

    /// Frame field X₁ = (√κ/2) i q (timelike, ⟨X₁,X₁⟩ = −1 on the quadric).
    pub fn x1(&self, q: Vec4) -> Vec4 {
        q.j1() * (self.kappa.sqrt() / 2.0)
    }

    /// Frame field X₂ = (√κ/2) j q.
    pub fn x2(&self, q: Vec4) -> Vec4 {
        q.j2() * (self.kappa.sqrt() / 2.0)
    }

    /// Frame field X₃ = (√κ/2) k q.
    pub fn x3(&self, q: Vec4) -> Vec4 {
        q.j3() * (self.kappa.sqrt() / 2.0)
    }

    /// g_τ-orthonormal frame: E₁ = τ⁻¹X₁ (timelike), E₂ = X₂, E₃ = X₃.
    pub fn e(&self, i: usize, q: Vec4) -> Vec4 {
        match i {
            1 => self.x1(q) * (1.0 / self.tau),
            2 => self.x2(q),
            3 => self.x3(q),
            _ => panic!("frame index must be 1, 2, or 3"),
        }
    }

    /// The Berger-like metric on ambient tangent vectors at q.
    pub fn metric(&self, q: Vec4, u: Vec4, v: Vec4) -> f64 {
        let x1 = self.x1(q);
        u.inner(v) + (1.0 - self.tau * self.tau) * u.inner(x1) * v.inner(x1)
    }

    /// Express an ambient tangent vector in frame coefficients.
    ///
    /// Components are g_τ projections; any radial (off-quadric) component
    /// is discarded.
    pub fn to_frame(&self, q: Vec4, v: Vec4) -> Frame3 {
        Frame3::new(
            -self.metric(q, v, self.e(1, q)),
            self.metric(q, v, self.e(2, q)),
            self.metric(q, v, self.e(3, q)),
        )
    }

    /// Realize frame coefficients as an ambient tangent vector at q.
    pub fn from_frame(&self, q: Vec4, c: Frame3) -> Vec4 {
        self.e(1, q) * c.e1 + self.e(2, q) * c.e2 + self.e(3, q) * c.e3
    }

    /// Frame cross product: E₁∧E₂ = E₃, E₂∧E₃ = −E₁, E₃∧E₁ = E₂,
    /// extended bilinearly and antisymmetrically.
    pub fn wedge(&self, u: Frame3, v: Frame3) -> Frame3 {
        Frame3::new(
            -(u.e2 * v.e3 - u.e3 * v.e2),
            u.e3 * v.e1 - u.e1 * v.e3,
            u.e1 * v.e2 - u.e2 * v.e1,
        )
    }

    /// Levi-Civita connection of g_τ on the frame: the table ∇_{E_i}E_j.
    ///
    /// All coefficients are constant; the two distinct magnitudes are
    /// √κ(τ² − 2)/(2τ) and τ√κ/2, and the table degenerates pleasantly at
    /// τ = √2 (fiber-horizontal mixing vanishes) and τ = 1 (round case).
    pub fn connection_table(&self) -> ConnectionTable {
        let c = self.kappa.sqrt() * (self.tau * self.tau - 2.0) / (2.0 * self.tau);
        let t = self.tau * self.kappa.sqrt() / 2.0;
        let z = Frame3::ZERO;
        ConnectionTable([
            [z, Frame3::new(0.0, 0.0, c), Frame3::new(0.0, -c, 0.0)],
            [Frame3::new(0.0, 0.0, t), z, Frame3::new(t, 0.0, 0.0)],
            [Frame3::new(0.0, -t, 0.0), Frame3::new(-t, 0.0, 0.0), z],
        ])
    }

    /// Directional derivative of each frame coefficient of `field` along the
    /// ambient tangent vector `v` at q, by projected central differences.
    fn dir_deriv_frame(&self, field: &impl VectorField, q: Vec4, v: Vec4, h: f64) -> Frame3 {
        let step = h / v.len_euclid().max(1.0);
        fd::deriv1(|t| field.at(self.project(q + v * t)), 0.0, step)
    }

    /// Covariant derivative ∇_w Z at q for a fixed direction w (frame
    /// coefficients), differentiating with step `h`, using `table` for the
    /// frame Christoffel data.
    pub fn covariant_deriv_dir_with_table(
        &self,
        table: &ConnectionTable,
        w: Frame3,
        z: &impl VectorField,
        q: Vec4,
        h: f64,
    ) -> Frame3 {
        let v = self.from_frame(q, w);
        let dz = self.dir_deriv_frame(z, q, v, h);
        let zq = z.at(q);
        let wc = [w.e1, w.e2, w.e3];
        let zc = [zq.e1, zq.e2, zq.e3];
        let mut out = dz;
        for (i, wi) in wc.iter().enumerate() {
            if *wi == 0.0 {
                continue;
            }
            for (j, zj) in zc.iter().enumerate() {
                if *zj == 0.0 {
                    continue;
                }
                out = out.add(table.0[i][j].scale(wi * zj));
            }
        }
        out
    }

    /// Covariant derivative ∇_w Z at q for a fixed direction w.
    pub fn covariant_deriv_dir(&self, w: Frame3, z: &impl VectorField, q: Vec4) -> Frame3 {
        self.covariant_deriv_dir_with_table(&self.connection_table(), w, z, q, fd::H1)
    }

    /// Covariant derivative ∇_X Z at q (tensorial in X, so only X(q) enters).
    pub fn covariant_deriv(&self, x: &impl VectorField, z: &impl VectorField, q: Vec4) -> Frame3 {
        self.covariant_deriv_dir(x.at(q), z, q)
    }

    /// Lie bracket [X, Y] at q computed coordinate-wise: the fields are
    /// realized as ambient-vector maps on the quadric and differentiated by
    /// central differences, independent of any connection data.
    pub fn bracket_fd(&self, x: &impl VectorField, y: &impl VectorField, q: Vec4) -> Frame3 {
        let xamb = |p: Vec4| self.from_frame(p, x.at(p));
        let yamb = |p: Vec4| self.from_frame(p, y.at(p));
        let dxy = {
            let v = xamb(q);
            let step = fd::H1 / v.len_euclid().max(1.0);
            fd::deriv1(|t| yamb(self.project(q + v * t)), 0.0, step)
        };
        let dyx = {
            let v = yamb(q);
            let step = fd::H1 / v.len_euclid().max(1.0);
            fd::deriv1(|t| xamb(self.project(q + v * t)), 0.0, step)
        };
        self.to_frame(q, dxy - dyx)
    }

    /// Closed-form curvature tensor of g_τ, convention
    /// R(X,Y)Z = ∇_X∇_Y Z − ∇_Y∇_X Z − ∇_{[X,Y]}Z, evaluated on frame
    /// coefficients (the tensor has constant frame components):
    ///
    /// ```text
    /// R(X,Y)Z = (κ/4)(3τ²−4) [g(Y,Z)X − g(X,Z)Y]
    ///         + κ(τ²−1) [ g(Y,E₁)g(Z,E₁)X − g(X,E₁)g(Z,E₁)Y
    ///                    + g(Y,Z)g(X,E₁)E₁ − g(X,Z)g(Y,E₁)E₁ ]
    /// ```
    pub fn curvature(&self, x: Frame3, y: Frame3, z: Frame3) -> Frame3 {
        let k = self.kappa;
        let t2 = self.tau * self.tau;
        let a = k / 4.0 * (3.0 * t2 - 4.0);
        let b = k * (t2 - 1.0);
        let mut out = x
            .scale(a * y.metric(z))
            .sub(y.scale(a * x.metric(z)));
        out = out.add(x.scale(b * y.g_e1() * z.g_e1()));
        out = out.sub(y.scale(b * x.g_e1() * z.g_e1()));
        out = out.add(Frame3::E1.scale(b * (y.metric(z) * x.g_e1() - x.metric(z) * y.g_e1())));
        out
    }

    /// Curvature by stacked finite differences of the covariant derivative:
    /// ∇_X(∇_Y Z) − ∇_Y(∇_X Z) − ∇_{[X,Y]}Z with the bracket from
    /// [`Ambient::bracket_fd`]. Steps: inner derivatives at the default h,
    /// outer at a larger one to keep noise below the truncation budget.
    pub fn curvature_fd(
        &self,
        x: &impl VectorField,
        y: &impl VectorField,
        z: &impl VectorField,
        q: Vec4,
    ) -> Frame3 {
        let table = self.connection_table();
        let nabla_y_z =
            |p: Vec4| self.covariant_deriv_dir_with_table(&table, y.at(p), z, p, fd::H1);
        let nabla_x_z =
            |p: Vec4| self.covariant_deriv_dir_with_table(&table, x.at(p), z, p, fd::H1);
        let t1 = self.covariant_deriv_dir_with_table(&table, x.at(q), &nabla_y_z, q, fd::H2);
        let t2 = self.covariant_deriv_dir_with_table(&table, y.at(q), &nabla_x_z, q, fd::H2);
        let w = self.bracket_fd(x, y, q);
        let t3 = self.covariant_deriv_dir_with_table(&table, w, z, q, fd::H1);
        t1.sub(t2).sub(t3)
    }

    /// Submersion onto the hyperbolic plane H²(κ) ⊂ R³₁ (x₃ > 0 sheet of
    /// x₁² + x₂² − x₃² = −1/κ). In complex pairs q = (z, w),
    /// h(z,w) = (√κ/4)(2 z w̄, |z|² + |w|²).
    pub fn hopf(&self, q: Vec4) -> [f64; 3] {
        let [x1, x2, x3, x4] = q.0;
        let s = self.kappa.sqrt() / 4.0;
        [
            s * 2.0 * (x1 * x3 + x2 * x4),
            s * 2.0 * (x2 * x3 - x1 * x4),
            s * (x1 * x1 + x2 * x2 + x3 * x3 + x4 * x4),
        ]
    }

    /// Covering map onto the unit tangent bundle of H²(κ): the base point
    /// [`Ambient::hopf`] together with the unit spacelike fiber vector
    /// u = −(κ/4)(z² + w̄², 2 Re(zw)).
    pub fn covering(&self, q: Vec4) -> ([f64; 3], [f64; 3]) {
        let [x1, x2, x3, x4] = q.0;
        let s = -self.kappa / 4.0;
        let u = [
            s * (x1 * x1 - x2 * x2 + x3 * x3 - x4 * x4),
            s * 2.0 * (x1 * x2 - x3 * x4),
            s * 2.0 * (x1 * x3 - x2 * x4),
        ];
        (self.hopf(q), u)
    }

    /// The circle action along the Hopf fibers: q ↦ (cos t) q + (sin t) iq.
    pub fn fiber_action(&self, t: f64, q: Vec4) -> Vec4 {
        q * t.cos() + q.j1() * t.sin()
    }

    /// Deterministic sample point on the quadric: free (x₁, x₂) and a free
    /// phase for the (x₃, x₄) pair of forced radius.
    pub fn sample_point(&self, rng: &mut SplitMix64) -> Vec4 {
        let x1 = rng.next_symmetric(1.5);
        let x2 = rng.next_symmetric(1.5);
        let r = (4.0 / self.kappa + x1 * x1 + x2 * x2).sqrt();
        let theta = rng.next_range(0.0, std::f64::consts::TAU);
        Vec4::new(x1, x2, r * theta.cos(), r * theta.sin())
    }

    /// Deterministic sample of frame coefficients in (−scale, scale)³.
    pub fn sample_frame(&self, rng: &mut SplitMix64, scale: f64) -> Frame3 {
        Frame3::new(
            rng.next_symmetric(scale),
            rng.next_symmetric(scale),
            rng.next_symmetric(scale),
        )
    }
}

/// Lorentzian inner product of R³₁ used for the Hopf base and fibers:
/// u₁v₁ + u₂v₂ − u₃v₃.
pub fn lorentz3(u: [f64; 3], v: [f64; 3]) -> f64 {
    u[0] * v[0] + u[1] * v[1] - u[2] * v[2]
}
