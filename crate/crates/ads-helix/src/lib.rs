//! Numerical geometry of helix (constant-angle) surfaces in anti-de Sitter
//! 3-space carrying a Berger-like deformation of its canonical metric.
//!
//! The ambient model is the quadric
//!
//! ```text
//! H = { q ∈ R⁴₂ : ⟨q,q⟩ = −4/κ },      ⟨q,q⟩ = x₁² + x₂² − x₃² − x₄²,
//! ```
//!
//! identified with the unit paraquaternions up to scale. A global frame
//! E₁, E₂, E₃ (E₁ timelike, tangent to the Hopf fibers) carries a one-parameter
//! family of metrics g_τ that rescale the fiber direction; τ = 1 recovers the
//! canonical constant-curvature metric. A surface in (H, g_τ) is a *helix
//! surface* when the angle between its unit normal and E₁ is constant.
//!
//! The crate provides, in dependency order:
//!
//! * [`paraquaternion`] — the split-signature 4-vector/paraquaternion algebra
//!   and the three product structures J₁, J₂, J₃;
//! * [`ambient`] — frames, the Berger-like metric, its Levi-Civita connection
//!   and curvature (closed form and finite differences), Hopf fibration maps;
//! * [`surface`] — finite-difference differential geometry of immersions:
//!   partials, unit normal, angle function, shape operator, Gauss curvature;
//! * [`generate`] — constructive parametrizations of all helix surfaces:
//!   generating curves for the three case signs, admissible one-parameter
//!   isometry families, constraint solving, and surface assembly;
//! * [`verify`] — residual checks turning the structural identities into a
//!   machine-readable pass/fail report;
//! * [`mesh`] — a plain-text quad-mesh format with a parameter sidecar.
//!
//! Scalars are `f64` throughout; verification is finite-difference based so
//! that it does not reuse the closed forms it is checking.

pub mod ambient;
pub mod fd;
pub mod generate;
pub mod mesh;
pub mod paraquaternion;
pub mod rng;
pub mod surface;
pub mod verify;

pub use ambient::Ambient;
pub use generate::{Case, HelixSurface, SurfaceParams};
pub use paraquaternion::{Mat4, Vec4};

/// Errors surfaced by construction, meshing, and verification entry points.
///
/// The CLI maps these onto process exit codes: I/O failures → 1, parameter
/// rejections → 2, degenerate geometry → 3, verification verdicts → 4.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Parameter combination outside the admissible ranges.
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    /// Geometry degenerates (non-immersion, lightlike normal, Hopf tube, …).
    #[error("degenerate geometry: {0}")]
    Degenerate(String),
    /// A requested quantity is too ill-conditioned to trust numerically.
    #[error("ill-conditioned: {0}")]
    IllConditioned(String),
    /// Malformed mesh or sidecar data.
    #[error("format error: {0}")]
    Format(String),
    /// Underlying I/O failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
