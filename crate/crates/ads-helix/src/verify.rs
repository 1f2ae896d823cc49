//! Residual-based verification of generated surfaces and of the ambient
//! geometry itself.
//!
//! Every check is a named nonnegative residual with a tolerance; a check
//! passes iff the residual is finite and ≤ its tolerance, and a report's
//! verdict is the conjunction of its checks. Reports render as stable
//! plain-text lines (`META`, `CHECK`, `VERDICT`) with full-precision
//! numbers, so runs are diffable.
//!
//! Surface verification probes the immersion on an interior grid (margins
//! keep every finite-difference stencil inside the domain) and tests:
//! membership in the quadric, closed-form vs finite-difference partials,
//! the two tangency identities g_τ(F_x,F_x) = g_τ(E₁,F_x) = −λ(λ+ν²) and
//! g_τ(F_x,F_y) = g_τ(F_y,E₁), constancy of the angle, absence of the
//! Hopf-tube degeneracy, the tangent-frame package, the pinned shape
//! matrix and its self-adjointness, the scalar structure equation
//! T(μ) + νμ² + κνB = 0, the Gauss curvature K = λκν²(1−τ²), the Codazzi
//! identity, the quartic position ODE F⁗ + (b̃²+2ã)F″ + ã²F = 0, the
//! neutral inner-product tables of F and its x-derivatives, the spectral
//! Gram matrix of the directrix expansion, the drift rate of the normal's
//! frame phase, the general-helix property of the x-lines, and the family
//! admissibility constraint.

use crate::ambient::{lorentz3, Ambient, ConnectionTable, Frame3, VectorField};
use crate::fd;
use crate::generate::{
    classify, constraint_residual, curve_b_neg, curve_b_pos, Case, HelixSurface, IsometryFamily,
    SurfaceParams, CLASSIFY_TOL, HOPF_TUBE_TOL,
};
use crate::paraquaternion::Vec4;
use crate::rng::SplitMix64;
use crate::surface::{Immersion, ParamDir, SurfaceProbe, SCALAR_STEP};
use crate::{Error, Result};

/// Tolerances, by check name, in report order.
pub const TOL_MEMBERSHIP: f64 = 1e-8;
pub const TOL_FD_ANALYTIC: f64 = 1e-7;
pub const TOL_HELIX_547: f64 = 1e-6;
pub const TOL_HELIX_548: f64 = 1e-6;
pub const TOL_ANGLE: f64 = 1e-7;
pub const TOL_HOPF_ABSENT: f64 = 1.0;
pub const TOL_TANGENT_DATA: f64 = 1e-7;
pub const TOL_SHAPE: f64 = 1e-5;
pub const TOL_SELF_ADJOINT: f64 = 1e-6;
pub const TOL_STAR: f64 = 1e-3;
pub const TOL_GAUSS: f64 = 1e-4;
pub const TOL_CODAZZI: f64 = 1e-3;
pub const TOL_POSITION_ODE: f64 = 1e-3;
pub const TOL_POSITION_ODE_B0: f64 = 1e-5;
pub const TOL_NORME: f64 = 1e-4;
pub const TOL_IFNORME: f64 = 1e-5;
pub const TOL_W_GRAM: f64 = 1e-7;
pub const TOL_PHI_SLOPE: f64 = 1e-4;
pub const TOL_GENERAL_HELIX: f64 = 1e-8;
pub const TOL_CONSTRAINT: f64 = 1e-8;

/// Ambient selftest tolerances.
pub const TOL_AMB_BRACKET: f64 = 1e-8;
pub const TOL_AMB_TORSION: f64 = 1e-6;
pub const TOL_AMB_COMPAT: f64 = 1e-6;
pub const TOL_AMB_CURVATURE: f64 = 1e-5;
pub const TOL_AMB_KILLING: f64 = 1e-8;
pub const TOL_AMB_BIANCHI: f64 = 1e-11;
pub const TOL_AMB_HOPF_FIBER: f64 = 1e-10;
pub const TOL_AMB_COVERING: f64 = 1e-9;
pub const TOL_AMB_SECTIONAL: f64 = 1e-10;

/// One named residual with its tolerance.
#[derive(Clone, Debug)]
pub struct Check {
    pub name: String,
    pub residual: f64,
    pub tol: f64,
}

impl Check {
    pub fn pass(&self) -> bool {
        self.residual.is_finite() && self.residual <= self.tol
    }
}

/// An ordered list of checks plus free-form metadata, rendering to the
/// stable `META`/`CHECK`/`VERDICT` line format.
#[derive(Clone, Debug, Default)]
pub struct Report {
    pub meta: Vec<(String, String)>,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn new() -> Report {
        Report::default()
    }

    pub fn meta(&mut self, key: &str, value: impl std::fmt::Display) {
        self.meta.push((key.to_string(), value.to_string()));
    }

    pub fn check(&mut self, name: &str, residual: f64, tol: f64) {
        self.checks.push(Check {
            name: name.to_string(),
            residual,
            tol,
        });
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// True iff every check passes.
    pub fn verdict(&self) -> bool {
        self.checks.iter().all(Check::pass)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.meta {
            out.push_str(&format!("META {k} {v}\n"));
        }
        for c in &self.checks {
            out.push_str(&format!(
                "CHECK {} residual={:.16e} tol={:.16e} pass={}\n",
                c.name,
                c.residual,
                c.tol,
                u8::from(c.pass())
            ));
        }
        out.push_str(&format!("VERDICT {}\n", u8::from(self.verdict())));
        out
    }
}

/// Uniform grid nodes over a closed interval.
fn nodes(domain: (f64, f64), n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| domain.0 + (domain.1 - domain.0) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Indices of nodes at least `reach` (and at least three cells) away from
/// both endpoints, so every stencil used on them stays inside the domain.
fn interior(domain: (f64, f64), n: usize, reach: f64) -> Result<Vec<usize>> {
    let cell = (domain.1 - domain.0) / (n - 1) as f64;
    let margin = 3.max((reach / cell).ceil() as usize);
    if n <= 2 * margin + 2 {
        return Err(Error::InvalidParams(format!(
            "grid of {n} nodes over a span of {:.3} cannot keep a {reach} margin on both sides",
            domain.1 - domain.0
        )));
    }
    Ok((margin..n - margin).collect())
}

/// Derivative stencils reach 2·H4 for the fourth order plus slack; scalar
/// derivatives of μ add their own nested reach in both directions.
const X_REACH: f64 = 0.05;
const Y_REACH: f64 = 0.02;

/// Maximum of |g_τ(N̂, E₁)| over an interior grid — near zero exactly when
/// the fiber direction is everywhere tangent (a Hopf tube).
pub fn detect_hopf_tube(
    amb: &Ambient,
    imm: &Immersion,
    nx: usize,
    ny: usize,
) -> Result<f64> {
    let probe = SurfaceProbe::new(*amb, imm);
    let xs = nodes(imm.xdomain, nx);
    let ys = nodes(imm.ydomain, ny);
    let mut worst = 0.0f64;
    for &i in &interior(imm.xdomain, nx, X_REACH)? {
        for &j in &interior(imm.ydomain, ny, Y_REACH)? {
            let (n, _) = probe.normal(xs[i], ys[j])?;
            worst = worst.max(n.g_e1().abs());
        }
    }
    Ok(worst)
}

/// A tube over a circle of hyperbolic radius ρ in the base: the fiber
/// rotation sweeps the x-direction, so E₁ is everywhere tangent and the
/// angle function vanishes identically. Used as a negative control.
pub fn hopf_tube_immersion(amb: &Ambient, rho: f64) -> Immersion {
    let amb = *amb;
    Immersion::new(
        Box::new(move |x, y| {
            let k = amb.kappa;
            let r = (2.0 / k * (rho.cosh() - 1.0)).sqrt();
            let s = (2.0 / k * (rho.cosh() + 1.0)).sqrt();
            let lift = Vec4::new(r * y.cos(), r * y.sin(), s, 0.0);
            amb.fiber_action(x, lift)
        }),
        (-1.5, 1.5),
        (-1.5, 1.5),
    )
}

/// Solves the 4×4 system N·U = R for four right-hand sides by Gaussian
/// elimination with partial pivoting. `rhs[comp]` holds one column.
fn solve4(mut n: [[f64; 4]; 4], mut rhs: [[f64; 4]; 4]) -> Result<[[f64; 4]; 4]> {
    for col in 0..4 {
        let pivot = (col..4)
            .max_by(|&a, &b| n[a][col].abs().total_cmp(&n[b][col].abs()))
            .unwrap();
        if n[pivot][col].abs() < 1e-13 {
            return Err(Error::Degenerate(
                "spectral fit basis is numerically singular on this window".into(),
            ));
        }
        n.swap(col, pivot);
        rhs.iter_mut().for_each(|r| r.swap(col, pivot));
        for row in col + 1..4 {
            let f = n[row][col] / n[col][col];
            for k in col..4 {
                n[row][k] -= f * n[col][k];
            }
            for r in rhs.iter_mut() {
                r[row] -= f * r[col];
            }
        }
    }
    let mut u = [[0.0; 4]; 4];
    for (c, r) in rhs.iter().enumerate() {
        for row in (0..4).rev() {
            let mut v = r[row];
            for k in row + 1..4 {
                v -= n[row][k] * u[c][k];
            }
            u[c][row] = v / n[row][row];
        }
    }
    Ok(u)
}

/// Least-squares fit of F(·, y_mid) against four known basis functions,
/// returning the neutral Gram matrix of the fitted expansion vectors.
fn fitted_gram(
    imm: &Immersion,
    basis: &[Box<dyn Fn(f64) -> f64>; 4],
) -> Result<[[f64; 4]; 4]> {
    const M: usize = 64;
    let y_mid = 0.5 * (imm.ydomain.0 + imm.ydomain.1);
    let mut normal = [[0.0f64; 4]; 4];
    let mut rhs = [[0.0f64; 4]; 4];
    for i in 0..M {
        let x = imm.xdomain.0 + (imm.xdomain.1 - imm.xdomain.0) * i as f64 / (M - 1) as f64;
        let phi = [basis[0](x), basis[1](x), basis[2](x), basis[3](x)];
        let f = imm.position(x, y_mid);
        for a in 0..4 {
            for b in 0..4 {
                normal[a][b] += phi[a] * phi[b] / M as f64;
            }
            for comp in 0..4 {
                rhs[comp][a] += phi[a] * f[comp] / M as f64;
            }
        }
    }
    let u = solve4(normal, rhs)?;
    // u[comp][a]: component comp of expansion vector a.
    let vecs: Vec<Vec4> = (0..4)
        .map(|a| Vec4::new(u[0][a], u[1][a], u[2][a], u[3][a]))
        .collect();
    let mut gram = [[0.0f64; 4]; 4];
    for a in 0..4 {
        for b in 0..4 {
            gram[a][b] = vecs[a].inner(vecs[b]);
        }
    }
    Ok(gram)
}

/// Full surface verification on an assembled surface.
pub fn verify_surface(srf: &HelixSurface, nx: usize, ny: usize, seed: u64) -> Result<Report> {
    let imm = srf.immersion();
    verify_parts(
        &srf.amb,
        &srf.params,
        Some(&srf.family),
        &imm,
        nx,
        ny,
        seed,
    )
}

/// Surface verification from raw parts. The family is optional: without
/// it the admissibility-constraint check is omitted (every other check
/// needs only the immersion and the target parameters).
pub fn verify_parts(
    amb: &Ambient,
    params: &SurfaceParams,
    family: Option<&IsometryFamily>,
    imm: &Immersion,
    nx: usize,
    ny: usize,
    seed: u64,
) -> Result<Report> {
    let case = classify(params.class_b(amb.tau), CLASSIFY_TOL);
    let dc = params.derived(amb);
    let (lambda, nu) = (params.lambda, params.nu);
    let ln2 = params.lambda_nu2();

    let xs = nodes(imm.xdomain, nx);
    let ys = nodes(imm.ydomain, ny);
    let ix = interior(imm.xdomain, nx, X_REACH)?;
    let iy = interior(imm.ydomain, ny, Y_REACH)?;
    let (x_mid, y_mid) = (xs[ix[ix.len() / 2]], ys[iy[iy.len() / 2]]);

    let probe = SurfaceProbe::oriented_for_nu(*amb, imm, nu.signum(), x_mid, y_mid)?;

    let mut rep = Report::new();
    rep.meta("seed", seed);
    rep.meta("grid", format!("{nx}x{ny}"));
    rep.meta(
        "fd-steps",
        format!("{:e},{:e},{:e},{:e}", fd::H1, fd::H2, fd::H3, fd::H4),
    );
    rep.meta("case", case.token());
    rep.meta("kappa", amb.kappa);
    rep.meta("tau", amb.tau);
    rep.meta("lambda", lambda);
    rep.meta("nu", nu);
    rep.meta("xdomain", format!("{}:{}", imm.xdomain.0, imm.xdomain.1));
    rep.meta("ydomain", format!("{}:{}", imm.ydomain.0, imm.ydomain.1));

    // --- membership (full grid) -------------------------------------------
    let mut r_member = 0.0f64;
    for &x in &xs {
        for &y in &ys {
            r_member = r_member.max(amb.membership_defect(imm.position(x, y)));
        }
    }
    rep.check("membership", r_member, TOL_MEMBERSHIP);

    // --- closed-form vs finite-difference partials ------------------------
    let mut r_fd = 0.0f64;
    for &i in &ix {
        for &j in &iy {
            let (x, y) = (xs[i], ys[j]);
            r_fd = r_fd.max((imm.dx(x, y) - probe.partial_x(x, y, 1)).max_abs());
            r_fd = r_fd.max((imm.dy(x, y) - probe.partial_y(x, y)).max_abs());
        }
    }
    rep.check("fd-analytic", r_fd, TOL_FD_ANALYTIC);

    // --- tangency identities, angle, tube detection, tangent frame --------
    let mut r_547 = 0.0f64;
    let mut r_548 = 0.0f64;
    let mut r_angle = 0.0f64;
    let mut r_tangent = 0.0f64;
    let mut r_helix = 0.0f64;
    let mut max_ne1 = 0.0f64;
    for &i in &ix {
        for &j in &iy {
            let (x, y) = (xs[i], ys[j]);
            let (u, v) = probe.tangent_frames(x, y);
            r_547 = r_547.max((u.norm2() + lambda * ln2).abs());
            r_547 = r_547.max((u.g_e1() + lambda * ln2).abs());
            r_548 = r_548.max((u.metric(v) - v.g_e1()).abs());
            let td = probe.tangent_data(x, y)?;
            r_angle = r_angle.max((td.nu - nu).abs());
            max_ne1 = max_ne1.max(td.n.g_e1().abs());
            // The x-direction must be exactly the tangential projection
            // T = E₁ − νN of the fiber field, and the frame must satisfy
            // its algebraic identities.
            r_tangent = r_tangent.max(td.t.sub(u).max_abs());
            r_tangent = r_tangent.max((td.t.norm2() + 1.0 + lambda * td.nu * td.nu).abs());
            r_tangent = r_tangent.max((td.jt.norm2() - td.lambda - td.nu * td.nu).abs());
            r_tangent = r_tangent.max(td.t.metric(td.jt).abs());
            r_tangent = r_tangent.max(td.n.metric(td.t).abs());
            // General-helix property of the x-line through this point.
            let speed = u.norm2().abs().sqrt();
            r_helix = r_helix.max((u.g_e1() / speed + lambda * ln2.sqrt()).abs());
        }
    }
    rep.check("helix-547", r_547, TOL_HELIX_547);
    rep.check("helix-548", r_548, TOL_HELIX_548);
    rep.check("angle-constancy", r_angle, TOL_ANGLE);
    rep.check(
        "hopf-tube-absent",
        HOPF_TUBE_TOL / max_ne1.max(1e-300),
        TOL_HOPF_ABSENT,
    );
    rep.check("tangent-data", r_tangent, TOL_TANGENT_DATA);

    // --- shape operator, structure scalars, curvature ----------------------
    let k = amb.kappa;
    let tau = amb.tau;
    let pinned_a12 = -k.sqrt() / 2.0 * lambda * tau;
    let pinned_a21 = k.sqrt() / 2.0 * tau;
    let k_target = lambda * k * nu * nu * (1.0 - tau * tau);
    let mut r_shape = 0.0f64;
    let mut r_adj = 0.0f64;
    let mut r_star = 0.0f64;
    let mut r_gauss = 0.0f64;
    for &i in &ix {
        for &j in &iy {
            let (x, y) = (xs[i], ys[j]);
            let s = probe.shape_operator(x, y)?;
            r_shape = r_shape.max(s.matrix[0][0].abs());
            r_shape = r_shape.max((s.matrix[0][1] - pinned_a12).abs());
            r_shape = r_shape.max((s.matrix[1][0] - pinned_a21).abs());
            r_adj = r_adj.max((s.a_t.metric(s.td.jt) - s.a_jt.metric(s.td.t)).abs());
            let kg = -k / 4.0 * tau * tau
                + s.td.lambda * (s.det() + k * s.td.nu * s.td.nu * (1.0 - tau * tau));
            r_gauss = r_gauss.max((kg - k_target).abs());
            let tmu = probe.t_mu(x, y)?;
            r_star = r_star.max((tmu + nu * s.mu() * s.mu() + k * nu * dc.b).abs());
        }
    }
    rep.check("shape-matrix", r_shape, TOL_SHAPE);
    rep.check("shape-selfadjoint", r_adj, TOL_SELF_ADJOINT);
    rep.check("star-ode", r_star, TOL_STAR);
    rep.check("gauss-curvature", r_gauss, TOL_GAUSS);

    // --- Codazzi identity on the coordinate fields -------------------------
    // ∇_X(A(Y)) − ∇_Y(A(X)) = −κλν(1−τ²)[g(X,T)Y − g(Y,T)X] for X = F_x,
    // Y = F_y (coordinate fields commute, so no A[X,Y] term).
    let mut r_cod = 0.0f64;
    let cod_coeff = -k * lambda * nu * (1.0 - tau * tau);
    for &i in &ix {
        for &j in &iy {
            let (x, y) = (xs[i], ys[j]);
            let ay = |u: f64, v: f64| probe.shape_image_param(ParamDir::Y, u, v);
            let ax = |u: f64, v: f64| probe.shape_image_param(ParamDir::X, u, v);
            let dxay = probe.cov_deriv_param(ParamDir::X, &ay, x, y, SCALAR_STEP);
            let dyax = probe.cov_deriv_param(ParamDir::Y, &ax, x, y, SCALAR_STEP);
            let lhs = dxay.sub(dyax);
            let td = probe.tangent_data(x, y)?;
            let (u, v) = probe.tangent_frames(x, y);
            let rhs = v
                .scale(u.metric(td.t))
                .sub(u.scale(v.metric(td.t)))
                .scale(cod_coeff);
            r_cod = r_cod.max(lhs.sub(rhs).max_abs());
        }
    }
    rep.check("codazzi", r_cod, TOL_CODAZZI);

    // --- position ODE -------------------------------------------------------
    // B ≠ 0: relative residual of F⁗ + (b̃²+2ã)F″ + ã²F = 0, scaled by the
    // largest term; B = 0: the x-lines are straight, ‖F″‖ itself is small.
    let c2 = dc.b_tilde * dc.b_tilde + 2.0 * dc.a_tilde;
    let c0 = dc.a_tilde * dc.a_tilde;
    let mut r_num = 0.0f64;
    let mut r_scale = 0.0f64;
    let mut r_fxx = 0.0f64;
    for &i in &ix {
        for &j in &iy {
            let (x, y) = (xs[i], ys[j]);
            let f = imm.position(x, y);
            let f2 = probe.partial_x(x, y, 2);
            r_fxx = r_fxx.max(f2.max_abs());
            if case != Case::BZero {
                let f4 = probe.partial_x(x, y, 4);
                r_num = r_num.max((f4 + f2 * c2 + f * c0).max_abs());
                r_scale = r_scale.max(f4.max_abs());
                r_scale = r_scale.max((f2 * c2).max_abs());
                r_scale = r_scale.max((f * c0).max_abs());
            }
        }
    }
    match case {
        Case::BZero => rep.check("position-ode", r_fxx, TOL_POSITION_ODE_B0),
        _ => rep.check("position-ode", r_num / r_scale.max(1e-300), TOL_POSITION_ODE),
    }

    // --- neutral inner-product tables ---------------------------------------
    // Ten relations among F, F′, F″, F‴ and four against J₁-rotations.
    let four_k = 4.0 / k;
    let if_fx = -2.0 * lambda * ln2 / (tau * k.sqrt());
    let mut r_norme = 0.0f64;
    let mut r_if = 0.0f64;
    for &i in &ix {
        for &j in &iy {
            let (x, y) = (xs[i], ys[j]);
            let f = imm.position(x, y);
            let f1 = imm.dx(x, y);
            let f2 = probe.partial_x(x, y, 2);
            let f3 = probe.partial_x(x, y, 3);
            for (value, target) in [
                (f.inner(f), -four_k),
                (f1.inner(f1), four_k * dc.a_tilde),
                (f.inner(f1), 0.0),
                (f1.inner(f2), 0.0),
                (f2.inner(f2), dc.big_d),
                (f.inner(f2), -four_k * dc.a_tilde),
                (f1.inner(f3), -dc.big_d),
                (f2.inner(f3), 0.0),
                (f.inner(f3), 0.0),
                (f3.inner(f3), dc.big_e),
            ] {
                r_norme = r_norme.max((value - target).abs());
            }
            for (value, target) in [
                (f.j1().inner(f1), if_fx),
                (f.j1().inner(f2), 0.0),
                (f2.j1().inner(f1), dc.big_l),
                (f1.j1().inner(f3), 0.0),
            ] {
                r_if = r_if.max((value - target).abs());
            }
        }
    }
    rep.check("norme-table", r_norme, TOL_NORME);
    rep.check("ifnorme-table", r_if, TOL_IFNORME);

    // --- spectral Gram matrix (B ≠ 0 only) ----------------------------------
    if case != Case::BZero {
        let (basis, reference): ([Box<dyn Fn(f64) -> f64>; 4], [[f64; 4]; 4]) = match case {
            Case::BPos => {
                let c = curve_b_pos(amb, params)?;
                let (a1, a2) = (c.alpha1, c.alpha2);
                (
                    [
                        Box::new(move |x| (a1 * x).cos()),
                        Box::new(move |x| (a1 * x).sin()),
                        Box::new(move |x| (a2 * x).cos()),
                        Box::new(move |x| (a2 * x).sin()),
                    ],
                    [
                        [c.w11, 0.0, 0.0, 0.0],
                        [0.0, c.w11, 0.0, 0.0],
                        [0.0, 0.0, c.w33, 0.0],
                        [0.0, 0.0, 0.0, c.w33],
                    ],
                )
            }
            _ => {
                let c = curve_b_neg(amb, params)?;
                let (al, be) = (c.alpha, c.beta);
                (
                    [
                        Box::new(move |x| (al * x).cos() * (be * x).cosh()),
                        Box::new(move |x| (al * x).sin() * (be * x).cosh()),
                        Box::new(move |x| (al * x).cos() * (be * x).sinh()),
                        Box::new(move |x| (al * x).sin() * (be * x).sinh()),
                    ],
                    [
                        [-four_k, 0.0, 0.0, c.w14],
                        [0.0, -four_k, -c.w14, 0.0],
                        [0.0, -c.w14, four_k, 0.0],
                        [c.w14, 0.0, 0.0, four_k],
                    ],
                )
            }
        };
        let gram = fitted_gram(imm, &basis)?;
        let mut r_gram = 0.0f64;
        for a in 0..4 {
            for b in 0..4 {
                r_gram = r_gram.max((gram[a][b] - reference[a][b]).abs());
            }
        }
        rep.check("w-gram", r_gram, TOL_W_GRAM);
    }

    // --- drift rate of the normal phase -------------------------------------
    // φ = atan2(N·E₃, N·E₂) advances linearly in x: slope −√κ·B/(λτ) for
    // B ≠ 0 and slope 0 for B = 0. Consecutive differences are unwrapped
    // mod 2π along each scanline.
    let phi_target = match case {
        Case::BZero => 0.0,
        _ => -k.sqrt() * dc.b / (lambda * tau),
    };
    let mut r_phi = 0.0f64;
    for &j in &iy {
        let mut prev: Option<f64> = None;
        for &i in &ix {
            let phi = probe.phi(xs[i], ys[j])?;
            if let Some(p) = prev {
                let mut d = phi - p;
                d -= 2.0 * std::f64::consts::PI * (d / (2.0 * std::f64::consts::PI)).round();
                let slope = d / (xs[i] - xs[i - 1]);
                r_phi = r_phi.max((slope - phi_target).abs());
            }
            prev = Some(phi);
        }
    }
    rep.check("phi-slope", r_phi, TOL_PHI_SLOPE);

    rep.check("general-helix", r_helix, TOL_GENERAL_HELIX);

    // --- family admissibility constraint -------------------------------------
    if let Some(fam) = family {
        let mut r_con = 0.0f64;
        for i in 0..256 {
            let y = imm.ydomain.0
                + (i as f64 + 0.5) / 256.0 * (imm.ydomain.1 - imm.ydomain.0);
            r_con = r_con.max(constraint_residual(amb, params, case, fam, y).abs());
        }
        rep.check("constraint", r_con, TOL_CONSTRAINT);
    }

    Ok(rep)
}

// ---------------------------------------------------------------------------
// Ambient selftest
// ---------------------------------------------------------------------------

/// Affine frame-coefficient field for differentiation tests: each frame
/// coefficient is c₀ + Σᵢ cᵢ qᵢ. Gradient weights stay small so that the
/// stacked finite differences in the curvature probe keep their truncation
/// error comfortably under the check tolerances at every sampled point.
struct AffineField {
    base: Frame3,
    grad: [Vec4; 3],
}

impl AffineField {
    fn random(rng: &mut SplitMix64) -> AffineField {
        let base = Frame3::new(
            rng.next_symmetric(1.0),
            rng.next_symmetric(1.0),
            rng.next_symmetric(1.0),
        );
        let mut grad = [Vec4::ZERO; 3];
        for g in &mut grad {
            *g = Vec4::new(
                rng.next_symmetric(0.25),
                rng.next_symmetric(0.25),
                rng.next_symmetric(0.25),
                rng.next_symmetric(0.25),
            );
        }
        AffineField { base, grad }
    }
}

fn dot4(a: Vec4, b: Vec4) -> f64 {
    a.0.iter().zip(b.0.iter()).map(|(x, y)| x * y).sum()
}

impl crate::ambient::VectorField for AffineField {
    fn at(&self, q: Vec4) -> Frame3 {
        Frame3::new(
            self.base.e1 + dot4(self.grad[0], q),
            self.base.e2 + dot4(self.grad[1], q),
            self.base.e3 + dot4(self.grad[2], q),
        )
    }
}

/// Verifies the ambient structure at `points` random on-quadric points:
/// frame brackets, torsion-freeness and metric compatibility of the
/// connection, the closed-form curvature against finite differences, the
/// Killing property of E₁, the first Bianchi identity, invariance of the
/// base projection under the fiber rotation, membership of the covering
/// image in the unit tangent bundle, and (for τ = 1) constancy of the
/// sectional curvature.
pub fn ambient_selftest(kappa: f64, tau: f64, seed: u64) -> Result<Report> {
    let amb = Ambient::new(kappa, tau)?;
    ambient_selftest_with_table(&amb, &amb.connection_table(), seed)
}

/// Selftest against an explicit connection table — the hook that mutation
/// tests use to show the torsion and compatibility checks have teeth.
pub fn ambient_selftest_with_table(
    amb: &Ambient,
    table: &ConnectionTable,
    seed: u64,
) -> Result<Report> {
    const POINTS: usize = 50;
    let mut rng = SplitMix64::new(seed);
    let mut rep = Report::new();
    rep.meta("seed", seed);
    rep.meta("kappa", amb.kappa);
    rep.meta("tau", amb.tau);
    rep.meta("points", POINTS);
    rep.meta(
        "fd-steps",
        format!("{:e},{:e},{:e},{:e}", fd::H1, fd::H2, fd::H3, fd::H4),
    );

    let sk = amb.kappa.sqrt();
    let closed_brackets = [
        (Frame3::E1, Frame3::E2, Frame3::new(0.0, 0.0, -sk / amb.tau)),
        (Frame3::E2, Frame3::E3, Frame3::new(amb.tau * sk, 0.0, 0.0)),
        (Frame3::E1, Frame3::E3, Frame3::new(0.0, sk / amb.tau, 0.0)),
    ];

    let mut r_bracket = 0.0f64;
    let mut r_torsion = 0.0f64;
    let mut r_compat = 0.0f64;
    let mut r_curv = 0.0f64;
    let mut r_killing = 0.0f64;
    let mut r_bianchi = 0.0f64;
    let mut r_fiber = 0.0f64;
    let mut r_cover = 0.0f64;
    let mut r_sect = 0.0f64;

    for _ in 0..POINTS {
        let q = amb.sample_point(&mut rng);

        // Frame brackets against their closed forms.
        for (xc, yc, expect) in closed_brackets {
            let xf = move |_: Vec4| xc;
            let yf = move |_: Vec4| yc;
            r_bracket = r_bracket.max(amb.bracket_fd(&xf, &yf, q).sub(expect).max_abs());
        }

        // Torsion and metric compatibility for random affine fields.
        let xf = AffineField::random(&mut rng);
        let yf = AffineField::random(&mut rng);
        let zf = AffineField::random(&mut rng);
        let nabla_xy = amb.covariant_deriv_dir_with_table(table, xf.at(q), &yf, q, fd::H1);
        let nabla_yx = amb.covariant_deriv_dir_with_table(table, yf.at(q), &xf, q, fd::H1);
        let bracket = amb.bracket_fd(&xf, &yf, q);
        r_torsion = r_torsion.max(nabla_xy.sub(nabla_yx).sub(bracket).max_abs());

        // X·g(Y,Z) = g(∇_X Y, Z) + g(Y, ∇_X Z).
        let v = amb.from_frame(q, xf.at(q));
        let scalar = |qq: Vec4| yf.at(qq).metric(zf.at(qq));
        let step = fd::H1 / v.len_euclid().max(1.0);
        let dir_scalar = fd::deriv1(|t| scalar(amb.project(q + v * t)), 0.0, step);
        let nabla_xz = amb.covariant_deriv_dir_with_table(table, xf.at(q), &zf, q, fd::H1);
        r_compat = r_compat
            .max((dir_scalar - nabla_xy.metric(zf.at(q)) - yf.at(q).metric(nabla_xz)).abs());

        // Curvature: finite differences against the closed form.
        let fd_r = amb.curvature_fd(&xf, &yf, &zf, q);
        let closed = amb.curvature(xf.at(q), yf.at(q), zf.at(q));
        r_curv = r_curv.max(fd_r.sub(closed).max_abs());

        // E₁ is Killing with ∇_X E₁ = −τ(√κ/2)·X∧E₁.
        let e1f = move |_: Vec4| Frame3::E1;
        let w = amb.sample_frame(&mut rng, 1.0);
        let lhs = amb.covariant_deriv_dir_with_table(table, w, &e1f, q, fd::H1);
        let rhs = amb.wedge(w, Frame3::E1).scale(-amb.tau * sk / 2.0);
        r_killing = r_killing.max(lhs.sub(rhs).max_abs());

        // First Bianchi identity of the closed-form tensor.
        let (a, b, c) = (
            amb.sample_frame(&mut rng, 1.0),
            amb.sample_frame(&mut rng, 1.0),
            amb.sample_frame(&mut rng, 1.0),
        );
        let cyclic = amb
            .curvature(a, b, c)
            .add(amb.curvature(b, c, a))
            .add(amb.curvature(c, a, b));
        r_bianchi = r_bianchi.max(cyclic.max_abs());

        // The base projection is invariant along fibers.
        let t = rng.next_symmetric(3.0);
        let (h0, h1) = (amb.hopf(q), amb.hopf(amb.fiber_action(t, q)));
        for i in 0..3 {
            r_fiber = r_fiber.max((h0[i] - h1[i]).abs());
        }

        // The covering lands in the unit tangent bundle of the base.
        let (bb, uu) = amb.covering(q);
        r_cover = r_cover.max((lorentz3(bb, bb) + 1.0 / amb.kappa).abs());
        r_cover = r_cover.max((lorentz3(uu, uu) - 1.0).abs());
        r_cover = r_cover.max(lorentz3(bb, uu).abs());

        // Round case: every section has curvature −κ/4.
        if (amb.tau - 1.0).abs() < 1e-14 {
            let denom = a.norm2() * b.norm2() - a.metric(b).powi(2);
            if denom.abs() > 0.1 {
                let sec = amb.curvature(a, b, b).metric(a) / denom;
                r_sect = r_sect.max((sec + amb.kappa / 4.0).abs());
            }
        }
    }

    rep.check("ambient-bracket", r_bracket, TOL_AMB_BRACKET);
    rep.check("ambient-torsion", r_torsion, TOL_AMB_TORSION);
    rep.check("ambient-compat", r_compat, TOL_AMB_COMPAT);
    rep.check("ambient-curvature", r_curv, TOL_AMB_CURVATURE);
    rep.check("ambient-killing", r_killing, TOL_AMB_KILLING);
    rep.check("ambient-bianchi", r_bianchi, TOL_AMB_BIANCHI);
    rep.check("ambient-hopf-fiber", r_fiber, TOL_AMB_HOPF_FIBER);
    rep.check("ambient-covering", r_cover, TOL_AMB_COVERING);
    if (amb.tau - 1.0).abs() < 1e-14 {
        rep.check("ambient-sectional", r_sect, TOL_AMB_SECTIONAL);
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{
        assemble, build_family, family_from_preset, immersion_from_parts, Branch, Curve,
        FamilyPreset, Profile,
    };
    use std::sync::Arc;

    const SQ2: f64 = std::f64::consts::SQRT_2;

    fn surface(kappa: f64, tau: f64, lambda: f64, nu: f64) -> HelixSurface {
        let amb = Ambient::new(kappa, tau).unwrap();
        let params = SurfaceParams::new(lambda, nu).unwrap();
        let fam = family_from_preset(&amb, &params, FamilyPreset::Identity, (0.0, 1.0)).unwrap();
        assemble(amb, params, fam, (0.0, 1.0), None).unwrap()
    }

    #[test]
    fn report_renders_the_documented_line_format() {
        let mut rep = Report::new();
        rep.meta("seed", 7);
        rep.check("alpha", 1e-9, 1e-6);
        rep.check("beta", 2.0, 1.0);
        let text = rep.render();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "META seed 7");
        assert!(lines[1].starts_with("CHECK alpha residual="));
        assert!(lines[1].contains(" tol=") && lines[1].ends_with(" pass=1"));
        assert!(lines[2].starts_with("CHECK beta ") && lines[2].ends_with(" pass=0"));
        assert_eq!(lines[3], "VERDICT 0");
        assert!(!rep.verdict());
        // NaN residuals can never pass.
        let mut bad = Report::new();
        bad.check("gamma", f64::NAN, 1.0);
        assert!(!bad.verdict());
    }

    #[test]
    fn ambient_selftest_passes_and_reports_every_check() {
        let rep = ambient_selftest(4.0, 0.5, 42).unwrap();
        assert!(rep.verdict(), "{}", rep.render());
        for name in [
            "ambient-bracket",
            "ambient-torsion",
            "ambient-compat",
            "ambient-curvature",
            "ambient-killing",
            "ambient-bianchi",
            "ambient-hopf-fiber",
            "ambient-covering",
        ] {
            assert!(rep.get(name).is_some(), "missing {name}");
        }
        // Round case adds the constant-sectional-curvature check.
        let round = ambient_selftest(4.0, 1.0, 42).unwrap();
        assert!(round.verdict(), "{}", round.render());
        assert!(round.get("ambient-sectional").is_some());
    }

    #[test]
    fn corrupted_connection_table_fails_torsion_and_compatibility() {
        let amb = Ambient::new(4.0, 2.0).unwrap();
        let mut table = amb.connection_table();
        table.0[0][1] = table.0[0][1].add(Frame3::new(0.0, 0.0, 0.01));
        let rep = ambient_selftest_with_table(&amb, &table, 42).unwrap();
        assert!(!rep.verdict());
        assert!(!rep.get("ambient-torsion").unwrap().pass());
        assert!(!rep.get("ambient-compat").unwrap().pass());
        // The finite-difference curvature probe is unaffected by the table.
        assert!(rep.get("ambient-curvature").unwrap().pass());

        // Corrupting a ∇_·E₁ entry instead breaks the Killing identity.
        let mut table = amb.connection_table();
        table.0[1][0] = table.0[1][0].add(Frame3::new(0.0, 0.0, 0.01));
        let rep = ambient_selftest_with_table(&amb, &table, 42).unwrap();
        assert!(!rep.get("ambient-killing").unwrap().pass());
        assert!(!rep.get("ambient-torsion").unwrap().pass());
    }

    /// The fiber-invariance residual is not vacuous: rotating along the
    /// wrong product structure moves the submersion image macroscopically.
    #[test]
    fn motion_off_the_fiber_circle_is_detected() {
        let amb = Ambient::new(4.0, 2.0).unwrap();
        let mut rng = SplitMix64::new(9);
        let mut worst = 0.0f64;
        for _ in 0..20 {
            let q = amb.sample_point(&mut rng);
            let wrong = q * 0.7f64.cos() + q.j2() * 0.7f64.sin();
            let (h0, h1) = (amb.hopf(q), amb.hopf(wrong));
            let dev = (0..3).map(|i| (h0[i] - h1[i]).abs()).fold(0.0f64, f64::max);
            worst = worst.max(dev);
        }
        assert!(worst > 1e-2, "wrong-structure motion went undetected: {worst:.3e}");
    }

    #[test]
    fn identity_surfaces_verify_clean_in_all_three_cases() {
        for (tau, expect_case) in [(2.0, "b-pos"), (SQ2, "b-zero"), (1.0, "b-neg")] {
            let srf = surface(4.0, tau, 1.0, 1.0);
            assert_eq!(srf.case.token(), expect_case);
            let rep = verify_surface(&srf, 25, 25, 1).unwrap();
            assert!(rep.verdict(), "case {expect_case}:\n{}", rep.render());
            // The tangency identity for admissible families is tight.
            assert!(rep.get("helix-548").unwrap().residual <= 1e-6);
        }
    }

    #[test]
    fn hopf_tube_fails_the_tube_and_angle_checks() {
        let amb = Ambient::new(4.0, 2.0).unwrap();
        let params = SurfaceParams::new(1.0, 1.0).unwrap();
        let tube = hopf_tube_immersion(&amb, 1.0);
        // The fiber field is tangent along the tube …
        let max_angle = detect_hopf_tube(&amb, &tube, 25, 25).unwrap();
        assert!(max_angle < 1e-9, "tube angle bound {max_angle:e}");
        // … so the dedicated check and the angle target both fail.
        let rep = verify_parts(&amb, &params, None, &tube, 25, 25, 1).unwrap();
        assert!(!rep.verdict());
        assert!(!rep.get("hopf-tube-absent").unwrap().pass());
        assert!(!rep.get("angle-constancy").unwrap().pass());
        assert!(rep.get("membership").unwrap().pass());
        // A genuine surface registers a healthy angle.
        let srf = surface(4.0, 2.0, 1.0, 1.0);
        let detected = detect_hopf_tube(&amb, &srf.immersion(), 25, 25).unwrap();
        assert!((detected - 1.0).abs() < 1e-9, "expected |nu| = 1, got {detected}");
    }

    #[test]
    fn off_quadric_positions_fail_membership() {
        let srf = surface(4.0, 2.0, 1.0, 1.0);
        let base = Arc::new(srf.immersion());
        let shifted = Immersion::new(
            Box::new({
                let base = base.clone();
                move |x, y| base.position(x, y) + Vec4::new(1e-6, 0.0, 0.0, 0.0)
            }),
            base.xdomain,
            base.ydomain,
        );
        let rep = verify_parts(&srf.amb, &srf.params, None, &shifted, 25, 25, 1).unwrap();
        assert!(!rep.get("membership").unwrap().pass());
    }

    #[test]
    fn skewed_analytic_partials_fail_the_cross_check() {
        let srf = surface(4.0, 2.0, 1.0, 1.0);
        let base = Arc::new(srf.immersion());
        let (b1, b2, b3) = (base.clone(), base.clone(), base.clone());
        let skewed = Immersion::with_analytic_partials(
            Box::new(move |x, y| b1.position(x, y)),
            Box::new(move |x, y| b2.dx(x, y) * (1.0 + 1e-4)),
            Box::new(move |x, y| b3.dy(x, y)),
            base.xdomain,
            base.ydomain,
        );
        let rep = verify_parts(&srf.amb, &srf.params, None, &skewed, 25, 25, 1).unwrap();
        assert!(rep.get("membership").unwrap().pass());
        assert!(!rep.get("fd-analytic").unwrap().pass());
    }

    #[test]
    fn reparametrized_x_fails_the_tangency_identities() {
        // F(c·x, y) sweeps the same point set, so membership, the angle and
        // the (covariant) shape matrix stay clean, but the x-speed identity
        // and the T = F_x alignment pick up the factor c.
        let srf = surface(4.0, 2.0, 1.0, 1.0);
        let base = Arc::new(srf.immersion());
        let c = 1.001;
        let (b1, b2, b3) = (base.clone(), base.clone(), base.clone());
        let xdom = (base.xdomain.0 / c, base.xdomain.1 / c);
        let fast = Immersion::with_analytic_partials(
            Box::new(move |x, y| b1.position(c * x, y)),
            Box::new(move |x, y| b2.dx(c * x, y) * c),
            Box::new(move |x, y| b3.dy(c * x, y)),
            xdom,
            base.ydomain,
        );
        let rep = verify_parts(&srf.amb, &srf.params, None, &fast, 25, 25, 1).unwrap();
        assert!(rep.get("membership").unwrap().pass());
        assert!(rep.get("fd-analytic").unwrap().pass());
        assert!(rep.get("angle-constancy").unwrap().pass());
        assert!(rep.get("shape-matrix").unwrap().pass());
        assert!(!rep.get("helix-547").unwrap().pass());
        assert!(!rep.get("tangent-data").unwrap().pass());
        assert!(!rep.get("norme-table").unwrap().pass());
        assert!(!rep.verdict());
    }

    #[test]
    fn violating_family_fails_548_and_the_constraint() {
        let amb = Ambient::new(4.0, 2.0).unwrap();
        let params = SurfaceParams::new(1.0, 1.0).unwrap();
        // ξ₂′ = 0.5 with ξ₁ ≡ 0.8, ξ₃′ = 1 violates the admissibility
        // constraint by ~1.68 pointwise.
        let fam = build_family(
            Branch::Commuting,
            Profile::Const(0.0),
            Profile::Const(0.8),
            Profile::Linear { intercept: 0.0, slope: 0.5 },
            Profile::Linear { intercept: 0.0, slope: 1.0 },
        );
        let curve = Curve::for_params(&amb, &params).unwrap();
        let imm = immersion_from_parts(curve, &fam, (-0.8, 0.8), (0.0, 1.0));
        let rep = verify_parts(&amb, &params, Some(&fam), &imm, 25, 25, 1).unwrap();
        assert!(!rep.get("constraint").unwrap().pass());
        let r548 = rep.get("helix-548").unwrap();
        assert!(!r548.pass());
        assert!(r548.residual > 1e-3, "548 residual {:e}", r548.residual);
    }

    #[test]
    fn bumped_immersion_fails_the_differential_checks() {
        // A smooth in-quadric wobble leaves membership intact but breaks
        // every second-order and spectral identity.
        let srf = surface(4.0, 2.0, 1.0, 1.0);
        let amb = srf.amb;
        let base = Arc::new(srf.immersion());
        let bumped = Immersion::new(
            Box::new({
                let base = base.clone();
                move |x, y| {
                    amb.project(base.position(x, y) + Vec4::new(0.0, 1e-3 * (3.0 * x).sin(), 0.0, 0.0))
                }
            }),
            base.xdomain,
            base.ydomain,
        );
        let rep = verify_parts(&srf.amb, &srf.params, None, &bumped, 25, 25, 1).unwrap();
        assert!(rep.get("membership").unwrap().pass());
        for name in [
            "shape-matrix",
            "shape-selfadjoint",
            "star-ode",
            "gauss-curvature",
            "codazzi",
            "position-ode",
            "norme-table",
            "ifnorme-table",
            "w-gram",
            "phi-slope",
            "general-helix",
        ] {
            let c = rep.get(name).unwrap();
            assert!(!c.pass(), "{name} unexpectedly passed: {:e}", c.residual);
        }
        assert!(!rep.verdict());
    }
}
