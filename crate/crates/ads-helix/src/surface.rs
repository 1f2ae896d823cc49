//! First- and second-fundamental-form probes for parametrized surfaces.
//!
//! An [`Immersion`] is a map F(x,y) into the quadric, optionally carrying
//! closed-form first partials. A [`SurfaceProbe`] extracts the extrinsic
//! package at a point:
//!
//! * the unit normal N with causal character λ = g_τ(N,N) = ±1,
//! * the angle function ν = λ·g_τ(N, E₁), so that E₁ = T + νN with T
//!   tangent,
//! * the tangent frame {T, JT} with JT = N ∧ T, for which
//!   g(T,T) = −(1 + λν²), g(JT,JT) = λ + ν², g(T,JT) = 0,
//! * the shape operator A = −∇̃N as a 2×2 matrix on {T, JT} (columns are
//!   the images A(T), A(JT)),
//! * the Gauss curvature via K = −(κ/4)τ² + λ[det A + κν²(1 − τ²)],
//! * μ = g(A(JT),JT)/g(JT,JT) and its tangential derivative T(μ), and
//! * the frame phase φ = atan2(N·E₃, N·E₂) of the normal.
//!
//! Normals come from the frame wedge of the coordinate tangents, so they
//! are exact up to the accuracy of the partials; covariant derivatives of
//! surface fields differentiate frame coefficients in parameter space and
//! add the constant-coefficient frame connection terms.

use crate::ambient::{Ambient, Frame3};
use crate::fd;
use crate::paraquaternion::Vec4;
use crate::{Error, Result};

/// Parameter step for covariant derivatives of surface fields (the normal,
/// shape images). Small enough that the O(h⁴) Richardson remainder is
/// negligible, large enough to clear the ~1e−15 evaluation noise floor.
pub const FIELD_STEP: f64 = 1e-4;
/// Parameter step for derivatives of derived scalars such as μ, which
/// already carry ~1e−10 evaluation noise from the inner differentiation.
pub const SCALAR_STEP: f64 = 5e-3;
/// |g_τ(N,N)| below this means the tangent plane is (numerically)
/// lightlike or degenerate and no unit normal exists.
pub const LIGHTLIKE_TOL: f64 = 1e-12;

type Map = Box<dyn Fn(f64, f64) -> Vec4 + Send + Sync>;

/// A parametrized patch F: [x₀,x₁] × [y₀,y₁] → quadric, with optional
/// closed-form first partials.
pub struct Immersion {
    eval: Map,
    dx: Option<Map>,
    dy: Option<Map>,
    pub xdomain: (f64, f64),
    pub ydomain: (f64, f64),
}

impl Immersion {
    pub fn new(eval: Map, xdomain: (f64, f64), ydomain: (f64, f64)) -> Immersion {
        Immersion {
            eval,
            dx: None,
            dy: None,
            xdomain,
            ydomain,
        }
    }

    pub fn with_analytic_partials(
        eval: Map,
        dx: Map,
        dy: Map,
        xdomain: (f64, f64),
        ydomain: (f64, f64),
    ) -> Immersion {
        Immersion {
            eval,
            dx: Some(dx),
            dy: Some(dy),
            xdomain,
            ydomain,
        }
    }

    pub fn has_analytic_partials(&self) -> bool {
        self.dx.is_some() && self.dy.is_some()
    }

    pub fn position(&self, x: f64, y: f64) -> Vec4 {
        (self.eval)(x, y)
    }

    /// ∂F/∂x — closed form when available, else central differences.
    pub fn dx(&self, x: f64, y: f64) -> Vec4 {
        match &self.dx {
            Some(f) => f(x, y),
            None => fd::deriv1(|t| self.position(t, y), x, fd::H1),
        }
    }

    /// ∂F/∂y — closed form when available, else central differences.
    pub fn dy(&self, x: f64, y: f64) -> Vec4 {
        match &self.dy {
            Some(f) => f(x, y),
            None => fd::deriv1(|t| self.position(x, t), y, fd::H1),
        }
    }
}

/// Coordinate direction in parameter space.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamDir {
    X,
    Y,
}

/// Pointwise tangent package: T and JT = N∧T spanning the tangent plane,
/// the oriented unit normal N, λ = g(N,N), and the angle ν = λ·g(N,E₁).
#[derive(Clone, Copy, Debug)]
pub struct TangentData {
    pub t: Frame3,
    pub jt: Frame3,
    pub n: Frame3,
    pub lambda: f64,
    pub nu: f64,
}

/// Shape operator at a point: `matrix[i][j]` are the {T, JT}-coordinates
/// (row index) of the images A(T), A(JT) (column index).
#[derive(Clone, Copy, Debug)]
pub struct ShapeData {
    pub matrix: [[f64; 2]; 2],
    pub a_t: Frame3,
    pub a_jt: Frame3,
    pub td: TangentData,
}

impl ShapeData {
    pub fn det(&self) -> f64 {
        self.matrix[0][0] * self.matrix[1][1] - self.matrix[0][1] * self.matrix[1][0]
    }

    /// μ — the one shape entry not pinned by the angle geometry.
    pub fn mu(&self) -> f64 {
        self.matrix[1][1]
    }
}

/// Extracts extrinsic geometry from an immersion. The `orientation` sign
/// is folded into every normal so the angle function has a chosen sign.
pub struct SurfaceProbe<'a> {
    pub amb: Ambient,
    pub imm: &'a Immersion,
    orientation: f64,
}

impl<'a> SurfaceProbe<'a> {
    pub fn new(amb: Ambient, imm: &'a Immersion) -> SurfaceProbe<'a> {
        SurfaceProbe {
            amb,
            imm,
            orientation: 1.0,
        }
    }

    /// Probe whose normal is flipped, if needed, so that the angle at the
    /// reference point (x₀, y₀) has the sign of `nu_sign`.
    pub fn oriented_for_nu(
        amb: Ambient,
        imm: &'a Immersion,
        nu_sign: f64,
        x0: f64,
        y0: f64,
    ) -> Result<SurfaceProbe<'a>> {
        let mut probe = SurfaceProbe::new(amb, imm);
        let td = probe.tangent_data(x0, y0)?;
        if td.nu * nu_sign < 0.0 {
            probe.orientation = -1.0;
        }
        Ok(probe)
    }

    pub fn position(&self, x: f64, y: f64) -> Vec4 {
        self.imm.position(x, y)
    }

    pub fn fx(&self, x: f64, y: f64) -> Vec4 {
        self.imm.dx(x, y)
    }

    pub fn fy(&self, x: f64, y: f64) -> Vec4 {
        self.imm.dy(x, y)
    }

    /// Finite-difference ∂ⁿF/∂xⁿ (n = 1..=4). Orders 1, 2 and 4 difference
    /// positions only, independent of any closed-form partials. Order 3
    /// differences the immersion's first partial (validated against
    /// positions by the analytic-partial cross-check) when one is present:
    /// its inner products are held to absolute tolerances that a
    /// position-only third stencil cannot reach once curve frequencies
    /// grow; without analytic partials it falls back to positions.
    pub fn partial_x(&self, x: f64, y: f64, n: usize) -> Vec4 {
        let f = |t: f64| self.imm.position(t, y);
        match n {
            1 => fd::deriv1(f, x, fd::H1),
            2 => fd::deriv2(f, x, fd::H2),
            3 => {
                if self.imm.has_analytic_partials() {
                    fd::deriv2(|t: f64| self.imm.dx(t, y), x, fd::H3)
                } else {
                    fd::deriv3(f, x, fd::H3_DIRECT)
                }
            }
            4 => fd::deriv4(f, x, fd::H4),
            _ => panic!("x-derivative order must be 1..=4"),
        }
    }

    /// Pure finite-difference ∂F/∂y from positions only.
    pub fn partial_y(&self, x: f64, y: f64) -> Vec4 {
        fd::deriv1(|t| self.imm.position(x, t), y, fd::H1)
    }

    /// Frame coefficients of the coordinate tangents at (x, y).
    pub fn tangent_frames(&self, x: f64, y: f64) -> (Frame3, Frame3) {
        let q = self.position(x, y);
        (
            self.amb.to_frame(q, self.fx(x, y)),
            self.amb.to_frame(q, self.fy(x, y)),
        )
    }

    /// Oriented unit normal and its causal character λ = g(N,N).
    pub fn normal(&self, x: f64, y: f64) -> Result<(Frame3, f64)> {
        let (u, v) = self.tangent_frames(x, y);
        let raw = self.amb.wedge(u, v);
        let n2 = raw.norm2();
        if n2.abs() < LIGHTLIKE_TOL {
            return Err(Error::Degenerate(format!(
                "no unit normal at ({x}, {y}): g(N,N) = {n2:.3e} is lightlike or degenerate"
            )));
        }
        let lambda = n2.signum();
        Ok((raw.scale(self.orientation / n2.abs().sqrt()), lambda))
    }

    fn normal_unchecked(&self, x: f64, y: f64) -> Frame3 {
        self.normal(x, y)
            .unwrap_or_else(|e| panic!("normal field sampled at a degenerate point: {e}"))
            .0
    }

    /// Angle function ν = λ·g_τ(N, E₁).
    pub fn angle(&self, x: f64, y: f64) -> Result<f64> {
        let (n, lambda) = self.normal(x, y)?;
        Ok(-lambda * n.e1)
    }

    /// Tangent package at (x, y); fails where the normal degenerates.
    pub fn tangent_data(&self, x: f64, y: f64) -> Result<TangentData> {
        let (n, lambda) = self.normal(x, y)?;
        let nu = -lambda * n.e1;
        let t = Frame3::E1.sub(n.scale(nu));
        let jt = self.amb.wedge(n, t);
        Ok(TangentData {
            t,
            jt,
            n,
            lambda,
            nu,
        })
    }

    /// Coordinates (p, q) of a tangent vector w = p·F_x + q·F_y in the
    /// coordinate basis, by solving the 2×2 first-fundamental-form system.
    pub fn coord_coeffs(&self, x: f64, y: f64, w: Frame3) -> Result<(f64, f64)> {
        let (u, v) = self.tangent_frames(x, y);
        let (guu, gvv, guv) = (u.norm2(), v.norm2(), u.metric(v));
        let det = guu * gvv - guv * guv;
        if det.abs() < 1e-13 {
            return Err(Error::Degenerate(format!(
                "first fundamental form is singular at ({x}, {y}): det = {det:.3e}"
            )));
        }
        let (r1, r2) = (w.metric(u), w.metric(v));
        Ok(((r1 * gvv - r2 * guv) / det, (r2 * guu - r1 * guv) / det))
    }

    /// Covariant derivative ∇̃_{F_dir} Z of a surface field Z given by frame
    /// coefficients over parameter space: coefficient derivatives along the
    /// parameter line plus the constant frame-connection correction.
    pub fn cov_deriv_param(
        &self,
        dir: ParamDir,
        field: &dyn Fn(f64, f64) -> Frame3,
        x: f64,
        y: f64,
        h: f64,
    ) -> Frame3 {
        let dz = match dir {
            ParamDir::X => fd::deriv1(|t| field(t, y), x, h),
            ParamDir::Y => fd::deriv1(|t| field(x, t), y, h),
        };
        let q = self.position(x, y);
        let w = match dir {
            ParamDir::X => self.amb.to_frame(q, self.fx(x, y)),
            ParamDir::Y => self.amb.to_frame(q, self.fy(x, y)),
        };
        let z = field(x, y);
        let table = self.amb.connection_table();
        let wc = [w.e1, w.e2, w.e3];
        let zc = [z.e1, z.e2, z.e3];
        let mut out = dz;
        for (i, wi) in wc.iter().enumerate() {
            for (j, zj) in zc.iter().enumerate() {
                if wi * zj != 0.0 {
                    out = out.add(table.0[i][j].scale(wi * zj));
                }
            }
        }
        out
    }

    /// A(F_dir) = −∇̃_{F_dir} N: the shape image of a coordinate tangent.
    pub fn shape_image_param(&self, dir: ParamDir, x: f64, y: f64) -> Frame3 {
        let nf = |u: f64, v: f64| self.normal_unchecked(u, v);
        self.cov_deriv_param(dir, &nf, x, y, FIELD_STEP).scale(-1.0)
    }

    /// Shape operator on the {T, JT} basis.
    pub fn shape_operator(&self, x: f64, y: f64) -> Result<ShapeData> {
        let td = self.tangent_data(x, y)?;
        let (pt, qt) = self.coord_coeffs(x, y, td.t)?;
        let (pj, qj) = self.coord_coeffs(x, y, td.jt)?;
        let ax = self.shape_image_param(ParamDir::X, x, y);
        let ay = self.shape_image_param(ParamDir::Y, x, y);
        let a_t = ax.scale(pt).add(ay.scale(qt));
        let a_jt = ax.scale(pj).add(ay.scale(qj));
        let (gtt, gjj) = (td.t.norm2(), td.jt.norm2());
        Ok(ShapeData {
            matrix: [
                [a_t.metric(td.t) / gtt, a_jt.metric(td.t) / gtt],
                [a_t.metric(td.jt) / gjj, a_jt.metric(td.jt) / gjj],
            ],
            a_t,
            a_jt,
            td,
        })
    }

    /// Gauss curvature via K = −(κ/4)τ² + λ[det A + κν²(1 − τ²)].
    pub fn gauss_curvature(&self, x: f64, y: f64) -> Result<f64> {
        let s = self.shape_operator(x, y)?;
        let (k, tau) = (self.amb.kappa, self.amb.tau);
        Ok(-k / 4.0 * tau * tau
            + s.td.lambda * (s.det() + k * s.td.nu * s.td.nu * (1.0 - tau * tau)))
    }

    /// μ at a point (see [`ShapeData::mu`]).
    pub fn mu(&self, x: f64, y: f64) -> Result<f64> {
        Ok(self.shape_operator(x, y)?.mu())
    }

    /// Tangential derivative T(μ) = p·∂μ/∂x + q·∂μ/∂y where T = p·F_x + q·F_y.
    pub fn t_mu(&self, x: f64, y: f64) -> Result<f64> {
        let td = self.tangent_data(x, y)?;
        let (p, q) = self.coord_coeffs(x, y, td.t)?;
        let muf = |u: f64, v: f64| {
            self.mu(u, v)
                .unwrap_or_else(|e| panic!("mu sampled at a degenerate point: {e}"))
        };
        let dmx = fd::deriv1(|t| muf(t, y), x, SCALAR_STEP);
        let dmy = fd::deriv1(|t| muf(x, t), y, SCALAR_STEP);
        Ok(p * dmx + q * dmy)
    }

    /// Frame phase of the normal: φ = atan2(N·E₃-coefficient, N·E₂-coefficient).
    pub fn phi(&self, x: f64, y: f64) -> Result<f64> {
        let (n, _) = self.normal(x, y)?;
        Ok(n.e3.atan2(n.e2))
    }
}
