//! Constructive generators for constant-angle surfaces.
//!
//! Every surface here is assembled as F(x,y) = A(y)·γ(x): a fixed directrix
//! curve γ moved through the ambient quadric by a one-parameter family A(y)
//! of pseudo-orthogonal matrices commuting with J₁. The shape of γ is
//! decided by the sign of the classification constant
//!
//! ```text
//! B = ν²(τ² − 1) − λ,
//! ```
//!
//! giving three cases:
//!
//! * **B > 0** — γ is a twisted geodesic of a Lorentz torus S¹×S¹, a
//!   two-frequency trigonometric curve with frequencies
//!   α₁,₂ = (√κ/2)(|ν|√B ± B/τ) and slope d = √(α₁/α₂) > 1.
//! * **B = 0** — γ is a straight line through (0, 0, 2/√κ, 0) whose two
//!   quadratic terms cancel on the quadric.
//! * **B < 0** — γ mixes a rotation of frequency α = −(√κ/2)B/(λτ) with a
//!   hyperbolic stretch of rate β = (|ν|/2)√(−κB).
//!
//! The family A(y) is built from four scalar profiles (ξ, ξ₁, ξ₂, ξ₃); its
//! first row is
//!
//! ```text
//! r₁ = (cosh ξ₁ cos ξ₂, −cosh ξ₁ sin ξ₂, sinh ξ₁ cos ξ₃, −sinh ξ₁ sin ξ₃)
//! ```
//!
//! with r₂ = ±J₁r₁, r₃ = sin ξ·J₂r₁ + cos ξ·J₃r₁, r₄ = ±J₁r₃ (upper signs:
//! the branch commuting with J₁; lower: anticommuting). Such a matrix is
//! automatically in O₂(4) for any profile values. Admissibility of the
//! family is one scalar ODE per case, integrated by [`solve_constraint`]
//! (B ≠ 0, solved for ξ₂) or [`solve_xi`] (B = 0, the only case where ξ may
//! vary and the constraint contains ξ′).

use std::sync::Arc;

use crate::ambient::Ambient;
use crate::paraquaternion::{Mat4, Vec4};
use crate::surface::Immersion;
use crate::{Error, Result};

/// |B| below this is treated as B = 0 when classifying.
pub const CLASSIFY_TOL: f64 = 1e-12;
/// Two-frequency curves need α₁² − α₂² = κ|ν|B^{3/2}/τ well away from zero;
/// below this the B > 0 construction is numerically meaningless.
pub const CONDITIONING_FLOOR: f64 = 1e-10;
/// Constraint-ODE denominators this small abort the integration.
pub const DENOMINATOR_FLOOR: f64 = 1e-8;
/// Residual allowed for a solved constraint at collocation points.
pub const CONSTRAINT_AUDIT_TOL: f64 = 1e-8;
/// Fixed RK4 step count over the y-domain.
const RK4_STEPS: usize = 2048;
/// Collocation points for the post-integration residual audit.
const AUDIT_POINTS: usize = 256;
/// A family is a Hopf tube (E₁ tangent) when |g_τ(N, E₁)| stays below this.
pub const HOPF_TUBE_TOL: f64 = 1e-8;

/// Sign class of the classification constant B.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Case {
    BPos,
    BZero,
    BNeg,
}

impl Case {
    /// Stable token used in mesh headers and CLI flags.
    pub fn token(self) -> &'static str {
        match self {
            Case::BPos => "b-pos",
            Case::BZero => "b-zero",
            Case::BNeg => "b-neg",
        }
    }

    pub fn from_token(s: &str) -> Result<Case> {
        match s {
            "b-pos" => Ok(Case::BPos),
            "b-zero" => Ok(Case::BZero),
            "b-neg" => Ok(Case::BNeg),
            _ => Err(Error::InvalidParams(format!(
                "unknown case token {s:?} (expected b-pos, b-zero or b-neg)"
            ))),
        }
    }
}

/// Causal character λ = g_τ(N,N) and target angle function ν of a surface.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfaceParams {
    pub lambda: f64,
    pub nu: f64,
}

impl SurfaceParams {
    /// Validated constructor: λ = ±1 exactly, ν ≠ 0, and |ν| > 1 when
    /// λ = −1 (so that λ + ν² > 0, needed by every √(λ+ν²)).
    pub fn new(lambda: f64, nu: f64) -> Result<Self> {
        if lambda != 1.0 && lambda != -1.0 {
            return Err(Error::InvalidParams(format!(
                "lambda must be +1 or -1, got {lambda}"
            )));
        }
        if !nu.is_finite() || nu == 0.0 {
            return Err(Error::InvalidParams(format!(
                "nu must be finite and nonzero, got {nu}"
            )));
        }
        if lambda == -1.0 && nu.abs() <= 1.0 {
            return Err(Error::InvalidParams(format!(
                "lambda = -1 requires |nu| > 1, got nu = {nu}"
            )));
        }
        Ok(SurfaceParams { lambda, nu })
    }

    /// The classification constant B = ν²(τ²−1) − λ.
    pub fn class_b(&self, tau: f64) -> f64 {
        self.nu * self.nu * (tau * tau - 1.0) - self.lambda
    }

    /// λ + ν², the squared spacelike norm of the tangential projection
    /// scale; positive for all admissible parameters.
    pub fn lambda_nu2(&self) -> f64 {
        self.lambda + self.nu * self.nu
    }

    /// Constants appearing in the position-vector ODE and the derivative
    /// inner-product tables.
    pub fn derived(&self, amb: &Ambient) -> DerivedConstants {
        let b = self.class_b(amb.tau);
        let k = amb.kappa;
        let a_tilde = k / 4.0 * (b / (amb.tau * amb.tau)) * self.lambda_nu2();
        let b_tilde = -k.sqrt() * b / (self.lambda * amb.tau);
        let big_d = 4.0 / k * (a_tilde * b_tilde * b_tilde + 3.0 * a_tilde * a_tilde);
        let big_e = (b_tilde * b_tilde + 2.0 * a_tilde) * big_d - 4.0 / k * a_tilde.powi(3);
        let big_l = a_tilde
            * (2.0 * self.lambda * self.lambda_nu2() / (amb.tau * k.sqrt()) - 4.0 / k * b_tilde);
        DerivedConstants {
            b,
            a_tilde,
            b_tilde,
            big_d,
            big_e,
            big_l,
        }
    }
}

/// Case-independent derived constants: B, the ODE coefficients ã and b̃ of
/// F'''' + (b̃²+2ã)F'' + ã²F = 0, and the inner-product values
/// D = ⟨F_xx,F_xx⟩, E = ⟨F_xxx,F_xxx⟩, L = ⟨J₁F_xx,F_x⟩.
#[derive(Clone, Copy, Debug)]
pub struct DerivedConstants {
    pub b: f64,
    pub a_tilde: f64,
    pub b_tilde: f64,
    pub big_d: f64,
    pub big_e: f64,
    pub big_l: f64,
}

/// Sign classification of B with a dead zone of width `tol` around zero.
pub fn classify(b: f64, tol: f64) -> Case {
    if b.abs() < tol {
        Case::BZero
    } else if b > 0.0 {
        Case::BPos
    } else {
        Case::BNeg
    }
}

// ---------------------------------------------------------------------------
// Directrix curves
// ---------------------------------------------------------------------------

/// Two-frequency curve for B > 0 and its spectral data.
#[derive(Clone, Copy, Debug)]
pub struct BPosCurve {
    pub alpha1: f64,
    pub alpha2: f64,
    pub w11: f64,
    pub w33: f64,
    /// Slope d = √(α₁/α₂) = (√B + τ|ν|)/√(λ+ν²) > 1.
    pub d: f64,
    lambda: f64,
}

/// n-th derivative of (a·cos(ωx), a·sin(ωx)).
fn trig_pair(a: f64, omega: f64, x: f64, n: usize) -> (f64, f64) {
    let s = a * omega.powi(n as i32);
    let (sin, cos) = (omega * x).sin_cos();
    match n % 4 {
        0 => (s * cos, s * sin),
        1 => (-s * sin, s * cos),
        2 => (-s * cos, -s * sin),
        _ => (s * sin, -s * cos),
    }
}

impl BPosCurve {
    pub fn eval(&self, x: f64) -> Vec4 {
        self.deriv(x, 0)
    }

    /// Analytic n-th derivative, n ≤ 4.
    pub fn deriv(&self, x: f64, n: usize) -> Vec4 {
        let (c1, s1) = trig_pair(self.w11.sqrt(), self.alpha1, x, n);
        let (c2, s2) = trig_pair((-self.w33).sqrt(), self.alpha2, x, n);
        Vec4::new(c1, -self.lambda * s1, c2, self.lambda * s2)
    }
}

/// Builds the B > 0 directrix. Fails unless B > 0 (after classification)
/// and the two frequencies are separated enough to be resolvable.
pub fn curve_b_pos(amb: &Ambient, params: &SurfaceParams) -> Result<BPosCurve> {
    let b = params.class_b(amb.tau);
    if classify(b, CLASSIFY_TOL) != Case::BPos {
        return Err(Error::InvalidParams(format!(
            "curve requires B > 0, got B = {b:.3e}"
        )));
    }
    let gap = amb.kappa * params.nu.abs() * b.powf(1.5) / amb.tau;
    if gap < CONDITIONING_FLOOR {
        return Err(Error::IllConditioned(format!(
            "frequency separation kappa*|nu|*B^(3/2)/tau = {gap:.3e} is below {CONDITIONING_FLOOR:.0e}; \
             treat these parameters as the B = 0 case"
        )));
    }
    let sk = amb.kappa.sqrt();
    let alpha1 = sk / 2.0 * (params.nu.abs() * b.sqrt() + b / amb.tau);
    let alpha2 = sk / 2.0 * (params.nu.abs() * b.sqrt() - b / amb.tau);
    let scale = 4.0 * amb.tau / (amb.kappa.powf(1.5) * b);
    let w11 = scale * alpha2;
    let w33 = -scale * alpha1;
    let d = (b.sqrt() + amb.tau * params.nu.abs()) / params.lambda_nu2().sqrt();
    debug_assert!(w11 > 0.0 && w33 < 0.0 && d > 1.0);
    Ok(BPosCurve {
        alpha1,
        alpha2,
        w11,
        w33,
        d,
        lambda: params.lambda,
    })
}

/// The same B > 0 directrix, reparametrized so the neutral inner product
/// gives ⟨γ′,γ′⟩ = 1: γ(s) = (2/√κ)(d²−1)^{−1/2}·(cos((√κ/2)ds),
/// −λ sin((√κ/2)ds), d cos((√κ/2)s/d), λ d sin((√κ/2)s/d)).
#[derive(Clone, Copy, Debug)]
pub struct BPosArcCurve {
    pub d: f64,
    kappa: f64,
    lambda: f64,
}

impl BPosArcCurve {
    pub fn eval(&self, s: f64) -> Vec4 {
        let sk = self.kappa.sqrt();
        let a = 2.0 / sk / (self.d * self.d - 1.0).sqrt();
        let p1 = sk / 2.0 * self.d * s;
        let p2 = sk / 2.0 * s / self.d;
        Vec4::new(
            a * p1.cos(),
            -self.lambda * a * p1.sin(),
            a * self.d * p2.cos(),
            self.lambda * a * self.d * p2.sin(),
        )
    }

    /// Parameter map onto [`BPosCurve`]: s(x) = x·√((4/κ)α₁α₂).
    pub fn s_of_x(&self, curve: &BPosCurve, x: f64) -> f64 {
        x * (4.0 / self.kappa * curve.alpha1 * curve.alpha2).sqrt()
    }
}

pub fn curve_b_pos_arclength(amb: &Ambient, params: &SurfaceParams) -> Result<BPosArcCurve> {
    let c = curve_b_pos(amb, params)?;
    Ok(BPosArcCurve {
        d: c.d,
        kappa: amb.kappa,
        lambda: params.lambda,
    })
}

/// Straight-line directrix for B = 0: γ(x) = (ν²τx, 0, 2/√κ, λν²τx).
#[derive(Clone, Copy, Debug)]
pub struct BZeroCurve {
    dir: Vec4,
    base: Vec4,
}

impl BZeroCurve {
    pub fn eval(&self, x: f64) -> Vec4 {
        self.base + self.dir * x
    }

    pub fn deriv(&self, _x: f64, n: usize) -> Vec4 {
        match n {
            0 => unreachable!("use eval for order 0"),
            1 => self.dir,
            _ => Vec4::ZERO,
        }
    }
}

pub fn curve_b_zero(amb: &Ambient, params: &SurfaceParams) -> Result<BZeroCurve> {
    let b = params.class_b(amb.tau);
    if classify(b, CLASSIFY_TOL) != Case::BZero {
        return Err(Error::InvalidParams(format!(
            "curve requires B = 0, got B = {b:.3e}"
        )));
    }
    let m = params.nu * params.nu * amb.tau;
    Ok(BZeroCurve {
        dir: Vec4::new(m, 0.0, 0.0, m * params.lambda),
        base: Vec4::new(0.0, 0.0, 2.0 / amb.kappa.sqrt(), 0.0),
    })
}

/// Rotation-boost directrix for B < 0 and its spectral data.
#[derive(Clone, Copy, Debug)]
pub struct BNegCurve {
    pub alpha: f64,
    pub beta: f64,
    /// ⟨w¹,w⁴⟩ of the expansion over {cos·cosh, sin·cosh, cos·sinh, sin·sinh}.
    pub w14: f64,
    w: [Vec4; 4],
}

impl BNegCurve {
    /// Basis values (cos·cosh, sin·cosh, cos·sinh, sin·sinh) at x,
    /// differentiated n times via the constant-coefficient system b′ = Mb.
    fn basis(&self, x: f64, n: usize) -> [f64; 4] {
        let (sin, cos) = (self.alpha * x).sin_cos();
        let (sh, ch) = ((self.beta * x).sinh(), (self.beta * x).cosh());
        let mut v = [cos * ch, sin * ch, cos * sh, sin * sh];
        let (a, b) = (self.alpha, self.beta);
        for _ in 0..n {
            v = [
                -a * v[1] + b * v[2],
                a * v[0] + b * v[3],
                b * v[0] - a * v[3],
                b * v[1] + a * v[2],
            ];
        }
        v
    }

    pub fn eval(&self, x: f64) -> Vec4 {
        self.deriv(x, 0)
    }

    pub fn deriv(&self, x: f64, n: usize) -> Vec4 {
        let c = self.basis(x, n);
        self.w[0] * c[0] + self.w[1] * c[1] + self.w[2] * c[2] + self.w[3] * c[3]
    }
}

pub fn curve_b_neg(amb: &Ambient, params: &SurfaceParams) -> Result<BNegCurve> {
    let b = params.class_b(amb.tau);
    if classify(b, CLASSIFY_TOL) != Case::BNeg {
        return Err(Error::InvalidParams(format!(
            "curve requires B < 0, got B = {b:.3e}"
        )));
    }
    let k = amb.kappa;
    let alpha = -k.sqrt() / 2.0 * b / (params.lambda * amb.tau);
    let beta = params.nu.abs() * (-k * b).sqrt() / 2.0;
    let p = 2.0 * params.lambda_nu2().sqrt() / (-k * b).sqrt();
    let q = 2.0 / k.sqrt();
    let s = 2.0 * params.lambda * amb.tau * params.nu.abs() / (-k * b).sqrt();
    debug_assert!(beta > 0.0);
    Ok(BNegCurve {
        alpha,
        beta,
        w14: q * s,
        w: [
            Vec4::new(0.0, 0.0, q, 0.0),
            Vec4::new(0.0, 0.0, 0.0, q),
            Vec4::new(p, 0.0, 0.0, s),
            Vec4::new(0.0, p, -s, 0.0),
        ],
    })
}

/// Directrix for any case, with a uniform evaluation interface.
#[derive(Clone, Copy, Debug)]
pub enum Curve {
    BPos(BPosCurve),
    BZero(BZeroCurve),
    BNeg(BNegCurve),
}

impl Curve {
    pub fn for_params(amb: &Ambient, params: &SurfaceParams) -> Result<Curve> {
        match classify(params.class_b(amb.tau), CLASSIFY_TOL) {
            Case::BPos => Ok(Curve::BPos(curve_b_pos(amb, params)?)),
            Case::BZero => Ok(Curve::BZero(curve_b_zero(amb, params)?)),
            Case::BNeg => Ok(Curve::BNeg(curve_b_neg(amb, params)?)),
        }
    }

    pub fn case(&self) -> Case {
        match self {
            Curve::BPos(_) => Case::BPos,
            Curve::BZero(_) => Case::BZero,
            Curve::BNeg(_) => Case::BNeg,
        }
    }

    pub fn eval(&self, x: f64) -> Vec4 {
        match self {
            Curve::BPos(c) => c.eval(x),
            Curve::BZero(c) => c.eval(x),
            Curve::BNeg(c) => c.eval(x),
        }
    }

    /// Analytic derivative of order 1..=4.
    pub fn deriv(&self, x: f64, n: usize) -> Vec4 {
        assert!((1..=4).contains(&n), "derivative order must be 1..=4");
        match self {
            Curve::BPos(c) => c.deriv(x, n),
            Curve::BZero(c) => c.deriv(x, n),
            Curve::BNeg(c) => c.deriv(x, n),
        }
    }
}

// ---------------------------------------------------------------------------
// Isometry families
// ---------------------------------------------------------------------------

/// Whether A(y) commutes or anticommutes with J₁. Generated surfaces use
/// the commuting branch only; the other is constructible for completeness.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    Commuting,
    Anticommuting,
}

/// One scalar profile of y: closed forms for constants and affine maps,
/// or a cubic-Hermite table produced by the constraint integrator.
#[derive(Clone, Debug)]
pub enum Profile {
    Const(f64),
    Linear { intercept: f64, slope: f64 },
    Table(HermiteTable),
}

impl Profile {
    /// Value and first derivative at y.
    pub fn eval(&self, y: f64) -> (f64, f64) {
        match self {
            Profile::Const(c) => (*c, 0.0),
            Profile::Linear { intercept, slope } => (intercept + slope * y, *slope),
            Profile::Table(t) => t.eval(y),
        }
    }
}

/// Uniform-node cubic Hermite interpolant (values + derivatives per node).
#[derive(Clone, Debug)]
pub struct HermiteTable {
    y0: f64,
    h: f64,
    values: Vec<f64>,
    derivs: Vec<f64>,
}

impl HermiteTable {
    pub fn eval(&self, y: f64) -> (f64, f64) {
        let n = self.values.len() - 1;
        let pos = ((y - self.y0) / self.h).clamp(0.0, n as f64);
        let i = (pos.floor() as usize).min(n - 1);
        let t = pos - i as f64;
        let (v0, v1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.derivs[i] * self.h, self.derivs[i + 1] * self.h);
        let t2 = t * t;
        let t3 = t2 * t;
        let value = (2.0 * t3 - 3.0 * t2 + 1.0) * v0
            + (t3 - 2.0 * t2 + t) * m0
            + (-2.0 * t3 + 3.0 * t2) * v1
            + (t3 - t2) * m1;
        let dval = ((6.0 * t2 - 6.0 * t) * v0
            + (3.0 * t2 - 4.0 * t + 1.0) * m0
            + (-6.0 * t2 + 6.0 * t) * v1
            + (3.0 * t2 - 2.0 * t) * m1)
            / self.h;
        (value, dval)
    }
}

/// One-parameter family A(y) of pseudo-orthogonal matrices determined by
/// the four profiles; see the module docs for the row construction.
#[derive(Clone, Debug)]
pub struct IsometryFamily {
    pub branch: Branch,
    pub xi: Profile,
    pub xi1: Profile,
    pub xi2: Profile,
    pub xi3: Profile,
}

pub fn build_family(
    branch: Branch,
    xi: Profile,
    xi1: Profile,
    xi2: Profile,
    xi3: Profile,
) -> IsometryFamily {
    IsometryFamily {
        branch,
        xi,
        xi1,
        xi2,
        xi3,
    }
}

impl IsometryFamily {
    fn sign(&self) -> f64 {
        match self.branch {
            Branch::Commuting => 1.0,
            Branch::Anticommuting => -1.0,
        }
    }

    /// First row and its y-derivative.
    fn row1(&self, y: f64) -> (Vec4, Vec4) {
        let (x1, d1) = self.xi1.eval(y);
        let (x2, d2) = self.xi2.eval(y);
        let (x3, d3) = self.xi3.eval(y);
        let (sh, ch) = (x1.sinh(), x1.cosh());
        let (s2, c2) = x2.sin_cos();
        let (s3, c3) = x3.sin_cos();
        let r1 = Vec4::new(ch * c2, -ch * s2, sh * c3, -sh * s3);
        let dr1 = Vec4::new(
            d1 * sh * c2 - d2 * ch * s2,
            -d1 * sh * s2 - d2 * ch * c2,
            d1 * ch * c3 - d3 * sh * s3,
            -d1 * ch * s3 - d3 * sh * c3,
        );
        (r1, dr1)
    }

    pub fn matrix(&self, y: f64) -> Mat4 {
        self.matrix_and_deriv(y).0
    }

    /// A(y) together with its analytic derivative A′(y).
    pub fn matrix_and_deriv(&self, y: f64) -> (Mat4, Mat4) {
        let s = self.sign();
        let (xi, dxi) = self.xi.eval(y);
        let (sx, cx) = xi.sin_cos();
        let (r1, dr1) = self.row1(y);
        let r2 = r1.j1() * s;
        let r3 = r1.j2() * sx + r1.j3() * cx;
        let r4 = r3.j1() * s;
        let dr2 = dr1.j1() * s;
        let dr3 = dr1.j2() * sx + dr1.j3() * cx + (r1.j2() * cx - r1.j3() * sx) * dxi;
        let dr4 = dr3.j1() * s;
        (
            Mat4::from_rows(r1, r2, r3, r4),
            Mat4::from_rows(dr1, dr2, dr3, dr4),
        )
    }
}

// ---------------------------------------------------------------------------
// Admissibility constraints
// ---------------------------------------------------------------------------

fn residual_b_pos(xi1: &Profile, xi2: &Profile, xi3: &Profile, y: f64) -> f64 {
    let (x1, _) = xi1.eval(y);
    let (_, d2) = xi2.eval(y);
    let (_, d3) = xi3.eval(y);
    x1.cosh().powi(2) * d2 + x1.sinh().powi(2) * d3
}

fn residual_b_neg(
    params: &SurfaceParams,
    tau: f64,
    xi1: &Profile,
    xi2: &Profile,
    xi3: &Profile,
    y: f64,
) -> f64 {
    let (x1, d1) = xi1.eval(y);
    let (x2, d2) = xi2.eval(y);
    let (x3, d3) = xi3.eval(y);
    let p = params.nu.abs() * params.lambda_nu2().sqrt();
    let q = 2.0 * params.lambda * tau * params.nu * params.nu;
    p * (2.0 * (x2 - x3).cos() * d1 + (d2 + d3) * (x2 - x3).sin() * (2.0 * x1).sinh())
        + q * (x1.cosh().powi(2) * d2 + x1.sinh().powi(2) * d3)
}

fn residual_b_zero(
    lambda: f64,
    xi: &Profile,
    xi1: &Profile,
    xi2: &Profile,
    xi3: &Profile,
    y: f64,
) -> f64 {
    let (_, dx) = xi.eval(y);
    let (x1, d1) = xi1.eval(y);
    let (x2, d2) = xi2.eval(y);
    let (x3, d3) = xi3.eval(y);
    (d2 + d3 - dx) * (x2 - x3).sin() * (2.0 * x1).sinh()
        - 2.0 * lambda * (dx - d2) * x1.cosh().powi(2)
        + 2.0 * ((x2 - x3).cos() * d1 + lambda * d3 * x1.sinh().powi(2))
}

/// Pointwise residual of the case's admissibility constraint.
pub fn constraint_residual(
    amb: &Ambient,
    params: &SurfaceParams,
    case: Case,
    family: &IsometryFamily,
    y: f64,
) -> f64 {
    match case {
        Case::BPos => residual_b_pos(&family.xi1, &family.xi2, &family.xi3, y),
        Case::BNeg => residual_b_neg(params, amb.tau, &family.xi1, &family.xi2, &family.xi3, y),
        Case::BZero => residual_b_zero(
            params.lambda,
            &family.xi,
            &family.xi1,
            &family.xi2,
            &family.xi3,
            y,
        ),
    }
}

/// Classical fixed-step RK4 sampled into a Hermite table. The right-hand
/// side may fail (denominator events); failures abort with the offending y.
fn rk4_table(
    ydomain: (f64, f64),
    init: f64,
    rhs: &dyn Fn(f64, f64) -> Result<f64>,
) -> Result<HermiteTable> {
    let (y0, y1) = ydomain;
    if !(y1 > y0) {
        return Err(Error::InvalidParams(format!(
            "y-domain must be an increasing interval, got {y0}..{y1}"
        )));
    }
    let h = (y1 - y0) / RK4_STEPS as f64;
    let mut values = Vec::with_capacity(RK4_STEPS + 1);
    let mut derivs = Vec::with_capacity(RK4_STEPS + 1);
    let mut v = init;
    for i in 0..RK4_STEPS {
        let y = y0 + i as f64 * h;
        let k1 = rhs(y, v)?;
        values.push(v);
        derivs.push(k1);
        let k2 = rhs(y + h / 2.0, v + h / 2.0 * k1)?;
        let k3 = rhs(y + h / 2.0, v + h / 2.0 * k2)?;
        let k4 = rhs(y + h, v + h * k3)?;
        v += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    values.push(v);
    derivs.push(rhs(y1, v)?);
    Ok(HermiteTable {
        y0,
        h,
        values,
        derivs,
    })
}

fn audit_constraint(
    amb: &Ambient,
    params: &SurfaceParams,
    case: Case,
    family: &IsometryFamily,
    ydomain: (f64, f64),
) -> Result<()> {
    let mut worst = (0.0f64, ydomain.0);
    for i in 0..AUDIT_POINTS {
        let y = ydomain.0 + (i as f64 + 0.5) / AUDIT_POINTS as f64 * (ydomain.1 - ydomain.0);
        let r = constraint_residual(amb, params, case, family, y).abs();
        if r > worst.0 {
            worst = (r, y);
        }
    }
    if worst.0 > CONSTRAINT_AUDIT_TOL {
        return Err(Error::Degenerate(format!(
            "constraint residual {:.3e} at y = {} exceeds {CONSTRAINT_AUDIT_TOL:.0e}",
            worst.0, worst.1
        )));
    }
    Ok(())
}

/// Solves the B ≠ 0 admissibility constraint for ξ₂ given ξ₁ and ξ₃.
///
/// For B > 0 the equation is ξ₂′ = −tanh²(ξ₁)·ξ₃′ (a quadrature); for
/// B < 0 it is a genuine ODE in ξ₂. B = 0 is rejected — that constraint
/// determines ξ instead; see [`solve_xi`].
pub fn solve_constraint(
    amb: &Ambient,
    params: &SurfaceParams,
    case: Case,
    xi1: &Profile,
    xi3: &Profile,
    ydomain: (f64, f64),
    init_xi2: f64,
) -> Result<Profile> {
    let table = match case {
        Case::BPos => {
            let rhs = |y: f64, _v: f64| -> Result<f64> {
                let (x1, _) = xi1.eval(y);
                let (_, d3) = xi3.eval(y);
                Ok(-x1.tanh().powi(2) * d3)
            };
            rk4_table(ydomain, init_xi2, &rhs)?
        }
        Case::BNeg => {
            let p = params.nu.abs() * params.lambda_nu2().sqrt();
            let q = 2.0 * params.lambda * amb.tau * params.nu * params.nu;
            let rhs = |y: f64, v: f64| -> Result<f64> {
                let (x1, d1) = xi1.eval(y);
                let (x3, d3) = xi3.eval(y);
                let delta = v - x3;
                let den = p * delta.sin() * (2.0 * x1).sinh() + q * x1.cosh().powi(2);
                if den.abs() < DENOMINATOR_FLOOR {
                    return Err(Error::Degenerate(format!(
                        "constraint denominator {den:.3e} vanishes at y = {y}"
                    )));
                }
                let num = p * (2.0 * delta.cos() * d1 + d3 * delta.sin() * (2.0 * x1).sinh())
                    + q * x1.sinh().powi(2) * d3;
                Ok(-num / den)
            };
            rk4_table(ydomain, init_xi2, &rhs)?
        }
        Case::BZero => {
            return Err(Error::InvalidParams(
                "the B = 0 constraint determines xi, not xi2; use solve_xi".into(),
            ))
        }
    };
    let xi2 = Profile::Table(table);
    let family = build_family(
        Branch::Commuting,
        Profile::Const(0.0),
        xi1.clone(),
        xi2.clone(),
        xi3.clone(),
    );
    audit_constraint(amb, params, case, &family, ydomain)?;
    Ok(xi2)
}

/// Solves the B = 0 admissibility constraint for ξ given ξ₁, ξ₂, ξ₃
/// (the only case whose constraint contains ξ′). The coefficient of ξ′ is
/// guarded against vanishing.
pub fn solve_xi(
    amb: &Ambient,
    params: &SurfaceParams,
    xi1: &Profile,
    xi2: &Profile,
    xi3: &Profile,
    ydomain: (f64, f64),
    init_xi: f64,
) -> Result<Profile> {
    let lambda = params.lambda;
    let rhs = |y: f64, _v: f64| -> Result<f64> {
        let (x1, d1) = xi1.eval(y);
        let (x2, d2) = xi2.eval(y);
        let (x3, d3) = xi3.eval(y);
        let den = (x2 - x3).sin() * (2.0 * x1).sinh() + 2.0 * lambda * x1.cosh().powi(2);
        if den.abs() < DENOMINATOR_FLOOR {
            return Err(Error::Degenerate(format!(
                "xi-prime coefficient {den:.3e} vanishes at y = {y}"
            )));
        }
        let num = (d2 + d3) * (x2 - x3).sin() * (2.0 * x1).sinh()
            + 2.0 * lambda * d2 * x1.cosh().powi(2)
            + 2.0 * ((x2 - x3).cos() * d1 + lambda * d3 * x1.sinh().powi(2));
        Ok(num / den)
    };
    let xi = Profile::Table(rk4_table(ydomain, init_xi, &rhs)?);
    let family = build_family(
        Branch::Commuting,
        xi.clone(),
        xi1.clone(),
        xi2.clone(),
        xi3.clone(),
    );
    audit_constraint(amb, params, Case::BZero, &family, ydomain)?;
    Ok(xi)
}

// ---------------------------------------------------------------------------
// Named presets
// ---------------------------------------------------------------------------

/// Family presets exposed to the CLI: `identity` (the simplest admissible
/// nontrivial family of each case) and `const-xi1:<c>,linear-xi3`
/// (ξ₁ ≡ c, ξ₃ = y, with ξ₂ — or ξ for B = 0 — solved).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FamilyPreset {
    Identity,
    ConstXi1 { c: f64 },
}

impl FamilyPreset {
    pub fn parse(s: &str) -> Result<FamilyPreset> {
        if s == "identity" {
            return Ok(FamilyPreset::Identity);
        }
        if let Some(rest) = s.strip_prefix("const-xi1:") {
            if let Some(cs) = rest.strip_suffix(",linear-xi3") {
                let c: f64 = cs.parse().map_err(|_| {
                    Error::InvalidParams(format!("cannot parse constant in family preset {s:?}"))
                })?;
                if !c.is_finite() {
                    return Err(Error::InvalidParams("preset constant must be finite".into()));
                }
                return Ok(FamilyPreset::ConstXi1 { c });
            }
        }
        Err(Error::InvalidParams(format!(
            "unknown family preset {s:?} (expected \"identity\" or \"const-xi1:<c>,linear-xi3\")"
        )))
    }
}

/// Builds the preset family for the case selected by the parameters.
pub fn family_from_preset(
    amb: &Ambient,
    params: &SurfaceParams,
    preset: FamilyPreset,
    ydomain: (f64, f64),
) -> Result<IsometryFamily> {
    let case = classify(params.class_b(amb.tau), CLASSIFY_TOL);
    let zero = Profile::Const(0.0);
    let fam = match (preset, case) {
        (FamilyPreset::Identity, Case::BPos) => build_family(
            Branch::Commuting,
            zero.clone(),
            Profile::Linear { intercept: 0.0, slope: 1.0 },
            zero.clone(),
            zero,
        ),
        (FamilyPreset::Identity, Case::BZero) => build_family(
            Branch::Commuting,
            Profile::Linear { intercept: 0.0, slope: 1.0 },
            zero.clone(),
            Profile::Linear { intercept: 0.0, slope: 1.0 },
            zero,
        ),
        (FamilyPreset::Identity, Case::BNeg) => build_family(
            Branch::Commuting,
            zero.clone(),
            Profile::Linear { intercept: 0.0, slope: 1.0 },
            zero,
            Profile::Const(std::f64::consts::FRAC_PI_2),
        ),
        (FamilyPreset::ConstXi1 { c }, Case::BPos) => build_family(
            Branch::Commuting,
            zero,
            Profile::Const(c),
            // Closed form of the quadrature: ξ₂ = −tanh²(c)·y.
            Profile::Linear { intercept: 0.0, slope: -c.tanh().powi(2) },
            Profile::Linear { intercept: 0.0, slope: 1.0 },
        ),
        (FamilyPreset::ConstXi1 { c }, Case::BNeg) => {
            let xi1 = Profile::Const(c);
            let xi3 = Profile::Linear { intercept: 0.0, slope: 1.0 };
            let xi2 = solve_constraint(amb, params, Case::BNeg, &xi1, &xi3, ydomain, 0.0)?;
            build_family(Branch::Commuting, zero, xi1, xi2, xi3)
        }
        (FamilyPreset::ConstXi1 { c }, Case::BZero) => {
            let xi1 = Profile::Const(c);
            let xi2 = Profile::Const(0.0);
            let xi3 = Profile::Linear { intercept: 0.0, slope: 1.0 };
            let xi = solve_xi(amb, params, &xi1, &xi2, &xi3, ydomain, 0.0)?;
            build_family(Branch::Commuting, xi, xi1, xi2, xi3)
        }
    };
    Ok(fam)
}

// ---------------------------------------------------------------------------
// Assembly
// ---------------------------------------------------------------------------

/// A fully assembled surface F(x,y) = A(y)γ(x) with its validated data.
#[derive(Clone, Debug)]
pub struct HelixSurface {
    pub amb: Ambient,
    pub params: SurfaceParams,
    pub case: Case,
    pub curve: Curve,
    pub family: IsometryFamily,
    pub xdomain: (f64, f64),
    pub ydomain: (f64, f64),
}

/// Raw immersion F(x,y) = A(y)γ(x) from parts, with analytic partials.
/// No admissibility checks — used for negative controls and by
/// [`assemble`] after it has validated everything.
pub fn immersion_from_parts(
    curve: Curve,
    family: &IsometryFamily,
    xdomain: (f64, f64),
    ydomain: (f64, f64),
) -> Immersion {
    let fam = Arc::new(family.clone());
    let (f1, f2, f3) = (fam.clone(), fam.clone(), fam);
    Immersion::with_analytic_partials(
        Box::new(move |x, y| f1.matrix(y).mul_vec(curve.eval(x))),
        Box::new(move |x, y| f2.matrix(y).mul_vec(curve.deriv(x, 1))),
        Box::new(move |x, y| f3.matrix_and_deriv(y).1.mul_vec(curve.eval(x))),
        xdomain,
        ydomain,
    )
}

/// Scans |det Gram(F_x, F_y)| over candidate x to pick a window where the
/// parametrization stays an immersion: the two-frequency and straight-line
/// directrices have isolated x-lines where F_y degenerates against F_x,
/// and verification stencils must stay clear of them.
fn select_x_window(
    amb: &Ambient,
    curve: Curve,
    family: &IsometryFamily,
    half_width: f64,
    ydomain: (f64, f64),
) -> Result<(f64, f64)> {
    const SAMPLES: usize = 512;
    const REL_FLOOR: f64 = 1e-3;
    const MIN_WIDTH: f64 = 0.25;
    let imm = immersion_from_parts(curve, family, (-half_width, half_width), ydomain);
    let ys = [
        ydomain.0 + 0.25 * (ydomain.1 - ydomain.0),
        ydomain.0 + 0.5 * (ydomain.1 - ydomain.0),
        ydomain.0 + 0.75 * (ydomain.1 - ydomain.0),
    ];
    let mut gram = vec![0.0f64; SAMPLES];
    for (i, g) in gram.iter_mut().enumerate() {
        let x = -half_width + 2.0 * half_width * i as f64 / (SAMPLES - 1) as f64;
        let mut worst = f64::INFINITY;
        for &y in &ys {
            let q = imm.position(x, y);
            let u = amb.to_frame(q, imm.dx(x, y));
            let v = amb.to_frame(q, imm.dy(x, y));
            let det = u.norm2() * v.norm2() - u.metric(v).powi(2);
            worst = worst.min(det.abs());
        }
        *g = worst;
    }
    let peak = gram.iter().cloned().fold(0.0f64, f64::max);
    if peak < 1e-14 {
        return Err(Error::Degenerate(
            "family yields a degenerate parametrization: tangents never become independent".into(),
        ));
    }
    // Longest run of samples comfortably above the degeneracy floor.
    let good: Vec<bool> = gram.iter().map(|&g| g >= REL_FLOOR * peak).collect();
    let (mut best, mut cur) = ((0usize, 0usize), None::<usize>);
    for i in 0..=SAMPLES {
        match (i < SAMPLES && good[i], cur) {
            (true, None) => cur = Some(i),
            (false, Some(start)) => {
                if i - start > best.1 - best.0 {
                    best = (start, i - 1);
                }
                cur = None;
            }
            _ => {}
        }
    }
    let to_x = |i: usize| -half_width + 2.0 * half_width * i as f64 / (SAMPLES - 1) as f64;
    let (mut a, mut b) = (to_x(best.0), to_x(best.1));
    if best == (0, SAMPLES - 1) {
        return Ok((a, b)); // whole candidate window is clean
    }
    let inset = 0.05 * (b - a);
    a += inset;
    b -= inset;
    if b - a < MIN_WIDTH {
        return Err(Error::Degenerate(format!(
            "largest non-degenerate x-window [{a}, {b}] is narrower than {MIN_WIDTH}"
        )));
    }
    Ok((a, b))
}

/// Validates the family against the case constraint and produces the
/// surface. The x-domain defaults to a scan-selected window inside
/// [−π/max(α₁,1), π/max(α₁,1)] (per-case frequency); pass `xdomain` to
/// override the scan.
pub fn assemble(
    amb: Ambient,
    params: SurfaceParams,
    family: IsometryFamily,
    ydomain: (f64, f64),
    xdomain: Option<(f64, f64)>,
) -> Result<HelixSurface> {
    if !(ydomain.1 > ydomain.0) {
        return Err(Error::InvalidParams(format!(
            "y-domain must be an increasing interval, got {}..{}",
            ydomain.0, ydomain.1
        )));
    }
    if family.branch != Branch::Commuting {
        return Err(Error::InvalidParams(
            "only families commuting with the fiber rotation define constant-angle surfaces; \
             the anticommuting branch is rejected"
                .into(),
        ));
    }
    let case = classify(params.class_b(amb.tau), CLASSIFY_TOL);
    let curve = Curve::for_params(&amb, &params)?;

    // ξ must be constant unless B = 0 (only that constraint contains ξ′).
    if case != Case::BZero {
        for i in 0..=64 {
            let y = ydomain.0 + i as f64 / 64.0 * (ydomain.1 - ydomain.0);
            let (_, dxi) = family.xi.eval(y);
            if dxi.abs() > 1e-12 {
                return Err(Error::InvalidParams(format!(
                    "xi must be constant for B \u{2260} 0 families (xi' = {dxi:.3e} at y = {y})"
                )));
            }
        }
    }
    audit_constraint(&amb, &params, case, &family, ydomain)
        .map_err(|e| Error::InvalidParams(format!("family violates the case constraint: {e}")))?;

    let freq = match &curve {
        Curve::BPos(c) => c.alpha1,
        Curve::BZero(_) => 1.0,
        Curve::BNeg(c) => c.alpha.abs(),
    };
    let half_width = std::f64::consts::PI / freq.max(1.0);
    let xdomain = match xdomain {
        Some(d) => {
            if !(d.1 > d.0) {
                return Err(Error::InvalidParams(format!(
                    "x-domain must be an increasing interval, got {}..{}",
                    d.0, d.1
                )));
            }
            d
        }
        None => select_x_window(&amb, curve, &family, half_width, ydomain)?,
    };

    let surface = HelixSurface {
        amb,
        params,
        case,
        curve,
        family,
        xdomain,
        ydomain,
    };
    surface.reject_hopf_tube()?;
    Ok(surface)
}

impl HelixSurface {
    /// The assembled immersion with analytic first partials.
    pub fn immersion(&self) -> Immersion {
        immersion_from_parts(self.curve, &self.family, self.xdomain, self.ydomain)
    }

    /// Rejects parametrizations whose normal stays g_τ-orthogonal to E₁
    /// everywhere (Hopf tubes: the fiber field is tangent, the angle
    /// function is identically zero and outside this classification).
    fn reject_hopf_tube(&self) -> Result<()> {
        let imm = self.immersion();
        let mut worst = 0.0f64;
        for i in 0..5 {
            for j in 0..5 {
                let x = self.xdomain.0
                    + (i as f64 + 0.5) / 5.0 * (self.xdomain.1 - self.xdomain.0);
                let y = self.ydomain.0
                    + (j as f64 + 0.5) / 5.0 * (self.ydomain.1 - self.ydomain.0);
                let q = imm.position(x, y);
                let u = self.amb.to_frame(q, imm.dx(x, y));
                let v = self.amb.to_frame(q, imm.dy(x, y));
                let n = self.amb.wedge(u, v);
                let n2 = n.norm2().abs();
                if n2 < 1e-18 {
                    return Err(Error::Degenerate(
                        "tangent plane degenerates inside the selected window".into(),
                    ));
                }
                worst = worst.max(n.g_e1().abs() / n2.sqrt());
            }
        }
        if worst < HOPF_TUBE_TOL {
            return Err(Error::Degenerate(format!(
                "family sweeps a Hopf tube: |g(N, E1)| stays below {HOPF_TUBE_TOL:.0e}"
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ambient::lorentz3;
    use crate::fd;
    use crate::rng::SplitMix64;

    const SQ2: f64 = std::f64::consts::SQRT_2;

    fn amb(kappa: f64, tau: f64) -> Ambient {
        Ambient::new(kappa, tau).unwrap()
    }

    #[test]
    fn classification_examples() {
        let p = SurfaceParams::new(1.0, 1.0).unwrap();
        assert_eq!(p.class_b(2.0), 2.0);
        assert_eq!(classify(p.class_b(2.0), CLASSIFY_TOL), Case::BPos);
        assert!(p.class_b(SQ2).abs() < 1e-15);
        assert_eq!(classify(p.class_b(SQ2), CLASSIFY_TOL), Case::BZero);
        assert_eq!(p.class_b(1.0), -1.0);
        assert_eq!(classify(p.class_b(1.0), CLASSIFY_TOL), Case::BNeg);
        assert_eq!(classify(5e-13, CLASSIFY_TOL), Case::BZero);
        assert_eq!(classify(-5e-13, CLASSIFY_TOL), Case::BZero);
    }

    #[test]
    fn parameter_validation() {
        assert!(SurfaceParams::new(1.0, 1.0).is_ok());
        assert!(SurfaceParams::new(-1.0, 2.0).is_ok());
        assert!(SurfaceParams::new(-1.0, 0.5).is_err());
        assert!(SurfaceParams::new(-1.0, 1.0).is_err());
        assert!(SurfaceParams::new(0.7, 1.0).is_err());
        assert!(SurfaceParams::new(1.0, 0.0).is_err());
        assert!(SurfaceParams::new(1.0, f64::NAN).is_err());
    }

    #[test]
    fn b_pos_reference_spectrum() {
        // λ=1, τ=2, ν=1, κ=4: B = 2, α₁ = √2+1, α₂ = √2−1, w₁₁ = (√2−1)/2,
        // d = 1+√2, and w₁₁ = (4/κ)/(d²−1) must agree to 1e−10.
        let a = amb(4.0, 2.0);
        let p = SurfaceParams::new(1.0, 1.0).unwrap();
        let c = curve_b_pos(&a, &p).unwrap();
        assert!((c.alpha1 - (SQ2 + 1.0)).abs() < 1e-14);
        assert!((c.alpha2 - (SQ2 - 1.0)).abs() < 1e-14);
        assert!((c.w11 - (SQ2 - 1.0) / 2.0).abs() < 1e-14);
        assert!((c.w33 + (SQ2 + 1.0) / 2.0).abs() < 1e-14);
        assert!((c.d - (1.0 + SQ2)).abs() < 1e-14);
        assert!((c.w11 - (4.0 / a.kappa) / (c.d * c.d - 1.0)).abs() < 1e-10);
        assert!((c.w33 + (4.0 / a.kappa) * c.d * c.d / (c.d * c.d - 1.0)).abs() < 1e-10);
    }

    #[test]
    fn b_pos_membership_and_speed() {
        let a = amb(4.0, 2.0);
        let p = SurfaceParams::new(1.0, 1.0).unwrap();
        let c = curve_b_pos(&a, &p).unwrap();
        let speed2 = 4.0 / a.kappa * c.alpha1 * c.alpha2;
        for i in 0..100 {
            let x = -3.0 + 6.0 * i as f64 / 99.0;
            assert!(a.membership_defect(c.eval(x)) < 1e-14);
            let d1 = c.deriv(x, 1);
            assert!((d1.inner(d1) - speed2).abs() < 1e-13);
        }
    }

    #[test]
    fn b_pos_conditioning_guard() {
        // B ≈ 1e−8 classifies as BPos but the frequency gap is ~2e−12.
        let b = 1e-8f64;
        let tau = (2.0 + b).sqrt();
        let a = amb(4.0, tau);
        let p = SurfaceParams::new(1.0, 1.0).unwrap();
        match curve_b_pos(&a, &p) {
            Err(Error::IllConditioned(_)) => {}
            other => panic!("expected IllConditioned, got {other:?}"),
        }
    }

    #[test]
    fn b_pos_arclength_matches_the_parametric_form() {
        let a = amb(4.0, 2.0);
        let p = SurfaceParams::new(1.0, 1.0).unwrap();
        let c = curve_b_pos(&a, &p).unwrap();
        let arc = curve_b_pos_arclength(&a, &p).unwrap();
        assert!(arc.d > 1.0);
        for i in 0..50 {
            let x = -2.0 + 4.0 * i as f64 / 49.0;
            let s = arc.s_of_x(&c, x);
            assert!((arc.eval(s) - c.eval(x)).max_abs() < 1e-9);
            // Unit neutral speed of the arclength form.
            let d1 = fd::deriv1(|t| arc.eval(t), s, fd::H1);
            assert!((d1.inner(d1) - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn b_zero_reference_curve() {
        // κ=4, τ=√2, λ=1, ν=1: γ(x) = (√2 x, 0, 1, √2 x).
        let a = amb(4.0, SQ2);
        let p = SurfaceParams::new(1.0, 1.0).unwrap();
        let c = curve_b_zero(&a, &p).unwrap();
        assert_eq!(c.eval(0.0), Vec4::new(0.0, 0.0, 1.0, 0.0));
        let g = c.eval(1.5);
        assert!((g - Vec4::new(1.5 * SQ2, 0.0, 1.0, 1.5 * SQ2)).max_abs() < 1e-15);
        for i in 0..20 {
            let x = -4.0 + 8.0 * i as f64 / 19.0;
            assert!(a.membership_defect(c.eval(x)) < 1e-13);
        }
        // g_τ(γ′,γ′) = (1−τ²)ν⁴τ² = −λ(λ+ν²) = −2.
        let q = c.eval(0.3);
        let d1 = c.deriv(0.3, 1);
        assert!((a.metric(q, d1, d1) + 2.0).abs() < 1e-14);
    }

    #[test]
    fn b_neg_reference_curve() {
        // λ=1, τ=1, ν=1, κ=4: B = −1, α = 1, β = 1.
        let a = amb(4.0, 1.0);
        let p = SurfaceParams::new(1.0, 1.0).unwrap();
        let c = curve_b_neg(&a, &p).unwrap();
        assert!((c.alpha - 1.0).abs() < 1e-15);
        assert!((c.beta - 1.0).abs() < 1e-15);
        assert!((c.w14 - 1.0).abs() < 1e-15);
        assert_eq!(c.eval(0.0), Vec4::new(0.0, 0.0, 1.0, 0.0));
        for i in 0..100 {
            let x = -2.0 + 4.0 * i as f64 / 99.0;
            assert!(a.membership_defect(c.eval(x)) < 1e-12);
            let q = c.eval(x);
            let d1 = c.deriv(x, 1);
            assert!((a.metric(q, d1, d1) + 2.0).abs() < 1e-11);
        }
    }

    #[test]
    fn analytic_curve_derivatives_match_finite_differences() {
        let cases: Vec<(Ambient, SurfaceParams)> = vec![
            (amb(4.0, 2.0), SurfaceParams::new(1.0, 1.0).unwrap()),
            (amb(4.0, SQ2), SurfaceParams::new(1.0, 1.0).unwrap()),
            (amb(4.0, 1.0), SurfaceParams::new(1.0, 1.0).unwrap()),
            (amb(1.0, 0.7), SurfaceParams::new(-1.0, 1.8).unwrap()),
        ];
        for (a, p) in cases {
            let c = Curve::for_params(&a, &p).unwrap();
            for i in 0..7 {
                let x = -0.9 + 0.3 * i as f64;
                let f = |t: f64| c.eval(t);
                assert!((c.deriv(x, 1) - fd::deriv1(f, x, fd::H1)).max_abs() < 1e-8);
                assert!((c.deriv(x, 2) - fd::deriv2(f, x, fd::H2)).max_abs() < 1e-7);
                assert!((c.deriv(x, 3) - fd::deriv3(f, x, fd::H3_DIRECT)).max_abs() < 1e-5);
                assert!((c.deriv(x, 4) - fd::deriv4(f, x, fd::H4)).max_abs() < 1e-4);
            }
        }
    }

    #[test]
    fn families_are_pseudo_orthogonal_per_branch() {
        let mut rng = SplitMix64::new(31);
        for branch in [Branch::Commuting, Branch::Anticommuting] {
            for _ in 0..20 {
                let fam = build_family(
                    branch,
                    Profile::Const(rng.next_symmetric(2.0)),
                    Profile::Linear { intercept: rng.next_symmetric(1.0), slope: rng.next_symmetric(1.0) },
                    Profile::Linear { intercept: rng.next_symmetric(2.0), slope: rng.next_symmetric(1.0) },
                    Profile::Const(rng.next_symmetric(3.0)),
                );
                let y = rng.next_symmetric(1.0);
                let a = fam.matrix(y);
                assert!(a.is_pseudo_orthogonal(1e-9));
                assert!((a.det().abs() - 1.0).abs() < 1e-10);
                let left = Mat4::J1.mul_mat(&a);
                let right = a.mul_mat(&Mat4::J1);
                let res = match branch {
                    Branch::Commuting => left.sub(&right).max_abs(),
                    Branch::Anticommuting => left.add(&right).max_abs(),
                };
                assert!(res < 1e-9, "branch relation residual {res:e}");
            }
        }
    }

    #[test]
    fn zero_profile_family_is_the_expected_constant_matrix() {
        let z = Profile::Const(0.0);
        let fam = build_family(Branch::Commuting, z.clone(), z.clone(), z.clone(), z);
        let a = fam.matrix(0.37);
        let expect = Mat4::from_rows(
            Vec4::new(1.0, 0.0, 0.0, 0.0),
            Vec4::new(0.0, 1.0, 0.0, 0.0),
            Vec4::new(0.0, 0.0, 0.0, 1.0),
            Vec4::new(0.0, 0.0, -1.0, 0.0),
        );
        assert_eq!(a.sub(&expect).max_abs(), 0.0);
        let (_, da) = fam.matrix_and_deriv(0.37);
        assert_eq!(da.max_abs(), 0.0);
    }

    #[test]
    fn family_derivative_matches_finite_differences() {
        let mut rng = SplitMix64::new(32);
        let fam = build_family(
            Branch::Commuting,
            Profile::Linear { intercept: 0.2, slope: 0.9 },
            Profile::Linear { intercept: -0.3, slope: 1.4 },
            Profile::Linear { intercept: 0.5, slope: -0.8 },
            Profile::Linear { intercept: 0.0, slope: 2.2 },
        );
        for _ in 0..10 {
            let y = rng.next_symmetric(1.0);
            let (_, da) = fam.matrix_and_deriv(y);
            for r in 0..4 {
                let col = fd::deriv1(|t| fam.matrix(t).row(r), y, fd::H1);
                assert!((da.row(r) - col).max_abs() < 1e-8);
            }
        }
    }

    #[test]
    fn hermite_tables_reproduce_smooth_functions() {
        // Quadrature of a known derivative: v' = cos(3y), v(0) = 0.
        // Cubic Hermite values are O(h⁴) accurate, slopes only O(h³).
        let table = rk4_table((0.0, 2.0), 0.0, &|y, _| Ok((3.0 * y).cos())).unwrap();
        let p = Profile::Table(table);
        for i in 0..40 {
            let y = 2.0 * i as f64 / 39.0;
            let (v, d) = p.eval(y);
            assert!((v - (3.0 * y).sin() / 3.0).abs() < 1e-12);
            assert!((d - (3.0 * y).cos()).abs() < 5e-9);
        }
    }

    #[test]
    fn solve_constraint_b_pos_matches_the_closed_form() {
        let a = amb(4.0, 2.0);
        let p = SurfaceParams::new(1.0, 1.0).unwrap();
        let c = 0.7f64;
        let xi1 = Profile::Const(c);
        let xi3 = Profile::Linear { intercept: 0.0, slope: 1.0 };
        let xi2 = solve_constraint(&a, &p, Case::BPos, &xi1, &xi3, (0.0, 1.0), 0.25).unwrap();
        for i in 0..30 {
            let y = i as f64 / 29.0;
            let (v, _) = xi2.eval(y);
            assert!((v - (0.25 - c.tanh().powi(2) * y)).abs() < 1e-9);
        }
        // ξ₁ ≡ 0 forces ξ₂ constant.
        let xi2z = solve_constraint(
            &a,
            &p,
            Case::BPos,
            &Profile::Const(0.0),
            &Profile::Linear { intercept: 0.0, slope: 1.0 },
            (0.0, 1.0),
            0.4,
        )
        .unwrap();
        for i in 0..10 {
            let (v, d) = xi2z.eval(i as f64 / 9.0);
            assert!((v - 0.4).abs() < 1e-14 && d.abs() < 1e-14);
        }
    }

    #[test]
    fn solve_constraint_b_neg_reductions_and_audit() {
        let a = amb(4.0, 1.0);
        let p = SurfaceParams::new(1.0, 1.0).unwrap();
        // ξ₁ ≡ 0, ξ₃ ≡ 0: the constraint collapses to 2λτν²ξ₂′ = 0.
        let xi2 = solve_constraint(
            &a,
            &p,
            Case::BNeg,
            &Profile::Const(0.0),
            &Profile::Const(0.0),
            (0.0, 1.0),
            0.8,
        )
        .unwrap();
        for i in 0..10 {
            let (v, d) = xi2.eval(i as f64 / 9.0);
            assert!((v - 0.8).abs() < 1e-13 && d.abs() < 1e-13);
        }
        // A genuinely curved solve passes its own collocation audit.
        let xi1 = Profile::Const(0.4);
        let xi3 = Profile::Linear { intercept: 0.0, slope: 1.0 };
        let xi2 = solve_constraint(&a, &p, Case::BNeg, &xi1, &xi3, (0.0, 1.0), 0.0).unwrap();
        let fam = build_family(Branch::Commuting, Profile::Const(0.0), xi1, xi2, xi3);
        for i in 0..64 {
            let y = (i as f64 + 0.5) / 64.0;
            assert!(constraint_residual(&a, &p, Case::BNeg, &fam, y).abs() < 1e-8);
        }
    }

    #[test]
    fn solve_constraint_b_neg_reports_denominator_events() {
        // Start ξ₂ exactly on the singular manifold of its own ODE:
        // sin(ξ₂−ξ₃)·p·sinh(2ξ₁) = −q·cosh²(ξ₁) makes the ξ₂′ coefficient
        // vanish at the very first evaluation.
        let a = amb(4.0, 0.2);
        let params = SurfaceParams::new(1.0, 1.0).unwrap();
        let c = 2.0f64;
        let p = params.nu.abs() * params.lambda_nu2().sqrt();
        let q = 2.0 * params.lambda * a.tau * params.nu * params.nu;
        let init = (-q * c.cosh().powi(2) / (p * (2.0 * c).sinh())).asin();
        let xi1 = Profile::Const(c);
        let xi3 = Profile::Linear { intercept: 0.0, slope: 1.0 };
        match solve_constraint(&a, &params, Case::BNeg, &xi1, &xi3, (0.0, 2.0), init) {
            Err(Error::Degenerate(msg)) => assert!(msg.contains("denominator")),
            other => panic!("expected a denominator event, got {other:?}"),
        }
    }

    #[test]
    fn solve_xi_reproduces_the_identity_profile() {
        let a = amb(4.0, SQ2);
        let p = SurfaceParams::new(1.0, 1.0).unwrap();
        let xi = solve_xi(
            &a,
            &p,
            &Profile::Const(0.0),
            &Profile::Linear { intercept: 0.0, slope: 1.0 },
            &Profile::Const(0.0),
            (0.0, 1.0),
            0.0,
        )
        .unwrap();
        for i in 0..20 {
            let y = i as f64 / 19.0;
            let (v, d) = xi.eval(y);
            assert!((v - y).abs() < 1e-12 && (d - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_presets_are_exactly_admissible() {
        let configs = [
            (amb(4.0, 2.0), SurfaceParams::new(1.0, 1.0).unwrap(), Case::BPos),
            (amb(4.0, SQ2), SurfaceParams::new(1.0, 1.0).unwrap(), Case::BZero),
            (amb(4.0, 1.0), SurfaceParams::new(1.0, 1.0).unwrap(), Case::BNeg),
        ];
        for (a, p, case) in configs {
            let fam = family_from_preset(&a, &p, FamilyPreset::Identity, (0.0, 1.0)).unwrap();
            for i in 0..50 {
                let y = i as f64 / 49.0;
                let r = constraint_residual(&a, &p, case, &fam, y).abs();
                assert!(r < 1e-15, "{case:?} identity residual {r:e}");
            }
        }
    }

    #[test]
    fn const_xi1_presets_pass_the_audit_in_all_cases() {
        let configs = [
            (amb(4.0, 2.0), SurfaceParams::new(1.0, 1.0).unwrap(), Case::BPos),
            (amb(4.0, SQ2), SurfaceParams::new(1.0, 1.0).unwrap(), Case::BZero),
            (amb(4.0, 1.0), SurfaceParams::new(1.0, 1.0).unwrap(), Case::BNeg),
        ];
        for (a, p, case) in configs {
            let fam =
                family_from_preset(&a, &p, FamilyPreset::ConstXi1 { c: 0.6 }, (0.0, 1.0)).unwrap();
            for i in 0..64 {
                let y = (i as f64 + 0.5) / 64.0;
                let r = constraint_residual(&a, &p, case, &fam, y).abs();
                assert!(r < 1e-8, "{case:?} const-xi1 residual {r:e}");
            }
        }
    }

    #[test]
    fn preset_parsing() {
        assert_eq!(FamilyPreset::parse("identity").unwrap(), FamilyPreset::Identity);
        assert_eq!(
            FamilyPreset::parse("const-xi1:0.8,linear-xi3").unwrap(),
            FamilyPreset::ConstXi1 { c: 0.8 }
        );
        assert!(FamilyPreset::parse("const-xi1:x,linear-xi3").is_err());
        assert!(FamilyPreset::parse("spline").is_err());
    }

    #[test]
    fn assemble_rejects_inadmissible_input() {
        let a = amb(4.0, 2.0);
        let p = SurfaceParams::new(1.0, 1.0).unwrap();
        let fam = family_from_preset(&a, &p, FamilyPreset::Identity, (0.0, 1.0)).unwrap();

        // Anticommuting branch.
        let mut anti = fam.clone();
        anti.branch = Branch::Anticommuting;
        assert!(matches!(
            assemble(a, p, anti, (0.0, 1.0), None),
            Err(Error::InvalidParams(_))
        ));

        // Nonconstant ξ outside the B = 0 case.
        let mut moving_xi = fam.clone();
        moving_xi.xi = Profile::Linear { intercept: 0.0, slope: 0.3 };
        assert!(matches!(
            assemble(a, p, moving_xi, (0.0, 1.0), None),
            Err(Error::InvalidParams(_))
        ));

        // Constraint violation.
        let bad = build_family(
            Branch::Commuting,
            Profile::Const(0.0),
            Profile::Const(0.5),
            Profile::Linear { intercept: 0.0, slope: 0.7 },
            Profile::Linear { intercept: 0.0, slope: 1.0 },
        );
        assert!(matches!(
            assemble(a, p, bad, (0.0, 1.0), None),
            Err(Error::InvalidParams(_))
        ));
    }

    #[test]
    fn assembled_surfaces_stay_on_the_quadric_with_honest_partials() {
        let configs = [
            (amb(4.0, 2.0), SurfaceParams::new(1.0, 1.0).unwrap()),
            (amb(4.0, SQ2), SurfaceParams::new(1.0, 1.0).unwrap()),
            (amb(4.0, 1.0), SurfaceParams::new(1.0, 1.0).unwrap()),
        ];
        for (a, p) in configs {
            let fam = family_from_preset(&a, &p, FamilyPreset::Identity, (0.0, 1.0)).unwrap();
            let srf = assemble(a, p, fam, (0.0, 1.0), None).unwrap();
            let imm = srf.immersion();
            for i in 0..9 {
                for j in 0..9 {
                    let x = srf.xdomain.0
                        + (i as f64 + 0.5) / 9.0 * (srf.xdomain.1 - srf.xdomain.0);
                    let y = srf.ydomain.0
                        + (j as f64 + 0.5) / 9.0 * (srf.ydomain.1 - srf.ydomain.0);
                    assert!(a.membership_defect(imm.position(x, y)) < 1e-12);
                    // Closed-form partials agree with central differences.
                    let fdx = fd::deriv1(|t| imm.position(t, y), x, fd::H1);
                    let fdy = fd::deriv1(|t| imm.position(x, t), y, fd::H1);
                    assert!((imm.dx(x, y) - fdx).max_abs() < 1e-7);
                    assert!((imm.dy(x, y) - fdy).max_abs() < 1e-7);
                }
            }
        }
    }

    #[test]
    fn assembled_twelve_set_matrix_classifies_correctly() {
        let matrix: [(f64, f64, f64, f64, Case); 12] = [
            (1.0, 2.0, 1.0, 4.0, Case::BPos),
            (1.0, 1.5, 1.2, 4.0, Case::BPos),
            (-1.0, 1.0, 2.0, 4.0, Case::BPos),
            (-1.0, 1.3, 1.5, 1.0, Case::BPos),
            (1.0, SQ2, 1.0, 4.0, Case::BZero),
            (1.0, (1.0 + 1.0 / 2.25f64).sqrt(), 1.5, 4.0, Case::BZero),
            (-1.0, 1.0 / SQ2, SQ2, 4.0, Case::BZero),
            (-1.0, 0.75f64.sqrt(), 2.0, 1.0, Case::BZero),
            (1.0, 1.0, 1.0, 4.0, Case::BNeg),
            (1.0, 0.8, 1.5, 4.0, Case::BNeg),
            (-1.0, 0.5, 2.0, 4.0, Case::BNeg),
            (-1.0, 0.7, 1.8, 1.0, Case::BNeg),
        ];
        for (lambda, tau, nu, kappa, case) in matrix {
            let a = amb(kappa, tau);
            let p = SurfaceParams::new(lambda, nu).unwrap();
            let fam = family_from_preset(&a, &p, FamilyPreset::Identity, (0.0, 1.0)).unwrap();
            let srf = assemble(a, p, fam, (0.0, 1.0), None)
                .unwrap_or_else(|e| panic!("assembly failed for {lambda},{tau},{nu},{kappa}: {e}"));
            assert_eq!(srf.case, case);
            assert!(srf.xdomain.1 - srf.xdomain.0 >= 0.25);
        }
    }

    #[test]
    fn hopf_projection_of_a_surface_point_stays_in_the_hyperboloid() {
        // Smoke test tying the generator to the ambient submersion.
        let a = amb(4.0, 2.0);
        let p = SurfaceParams::new(1.0, 1.0).unwrap();
        let fam = family_from_preset(&a, &p, FamilyPreset::Identity, (0.0, 1.0)).unwrap();
        let srf = assemble(a, p, fam, (0.0, 1.0), None).unwrap();
        let imm = srf.immersion();
        let q = imm.position(
            0.5 * (srf.xdomain.0 + srf.xdomain.1),
            0.5 * (srf.ydomain.0 + srf.ydomain.1),
        );
        let b = a.hopf(q);
        assert!((lorentz3(b, b) + 1.0 / a.kappa).abs() < 1e-12);
    }
}
