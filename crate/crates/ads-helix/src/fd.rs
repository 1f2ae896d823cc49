//! Central finite differences with one level of Richardson extrapolation.
//!
//! All verification in this crate differentiates numerically, so the closed
//! forms under test never feed their own check. Central stencils have error
//! series in even powers of the step; combining evaluations at h and h/2 as
//! (4·D(h/2) − D(h))/3 cancels the h² term, leaving O(h⁴) truncation while
//! keeping the step large enough to stay clear of cancellation noise.
//!
//! Default steps (for unit-scale data, see the per-order constants): first
//! and second derivatives can afford small steps; third and fourth must use
//! larger ones because round-off grows like ε/hᵏ.

/// Values finite differences can act on: anything flat-linear over `f64`.
pub trait LinearSpace: Copy {
    fn add(self, other: Self) -> Self;
    fn sub(self, other: Self) -> Self;
    fn scale(self, s: f64) -> Self;
}

impl LinearSpace for f64 {
    fn add(self, other: f64) -> f64 {
        self + other
    }
    fn sub(self, other: f64) -> f64 {
        self - other
    }
    fn scale(self, s: f64) -> f64 {
        self * s
    }
}

impl LinearSpace for crate::paraquaternion::Vec4 {
    fn add(self, other: Self) -> Self {
        self + other
    }
    fn sub(self, other: Self) -> Self {
        self - other
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
}

/// Default step for first derivatives.
pub const H1: f64 = 1e-5;
/// Default step for second derivatives.
pub const H2: f64 = 1e-3;
/// Default step for third derivatives taken as a second difference of an
/// analytic first partial. Third derivatives feed inner-product tables
/// checked to absolute 1e−4 on data whose x-frequencies reach ≈ 5, which
/// demands ~1e−8 relative accuracy of the third derivative itself — out of
/// reach for any position-only third stencil (round-off ε/h³ meets
/// truncation f⁽⁷⁾h⁴ above that floor). Differencing the first partial
/// twice keeps round-off at ε/h², and this step balances it against
/// truncation with two orders of margin.
pub const H3: f64 = 2e-3;
/// Step for third derivatives taken directly from positions (ε/h³
/// round-off): the fallback when an immersion carries no analytic first
/// partials, accurate to ~1e−3 absolute at unit scale.
pub const H3_DIRECT: f64 = 1e-2;
/// Default step for fourth derivatives.
pub const H4: f64 = 2e-2;

fn richardson<T: LinearSpace>(coarse: T, fine: T) -> T {
    // (4·D(h/2) − D(h)) / 3 cancels the leading h² truncation term.
    fine.scale(4.0 / 3.0).sub(coarse.scale(1.0 / 3.0))
}

fn d1_stencil<T: LinearSpace>(f: &impl Fn(f64) -> T, x: f64, h: f64) -> T {
    f(x + h).sub(f(x - h)).scale(0.5 / h)
}

fn d2_stencil<T: LinearSpace>(f: &impl Fn(f64) -> T, x: f64, h: f64) -> T {
    f(x + h)
        .add(f(x - h))
        .sub(f(x).scale(2.0))
        .scale(1.0 / (h * h))
}

fn d3_stencil<T: LinearSpace>(f: &impl Fn(f64) -> T, x: f64, h: f64) -> T {
    f(x + 2.0 * h)
        .sub(f(x + h).scale(2.0))
        .add(f(x - h).scale(2.0))
        .sub(f(x - 2.0 * h))
        .scale(0.5 / (h * h * h))
}

fn d4_stencil<T: LinearSpace>(f: &impl Fn(f64) -> T, x: f64, h: f64) -> T {
    f(x + 2.0 * h)
        .add(f(x - 2.0 * h))
        .sub(f(x + h).add(f(x - h)).scale(4.0))
        .add(f(x).scale(6.0))
        .scale(1.0 / (h * h * h * h))
}

/// First derivative, Richardson-extrapolated central difference.
pub fn deriv1<T: LinearSpace>(f: impl Fn(f64) -> T, x: f64, h: f64) -> T {
    richardson(d1_stencil(&f, x, h), d1_stencil(&f, x, 0.5 * h))
}

/// Second derivative, Richardson-extrapolated central difference.
pub fn deriv2<T: LinearSpace>(f: impl Fn(f64) -> T, x: f64, h: f64) -> T {
    richardson(d2_stencil(&f, x, h), d2_stencil(&f, x, 0.5 * h))
}

/// Third derivative, Richardson-extrapolated central difference.
pub fn deriv3<T: LinearSpace>(f: impl Fn(f64) -> T, x: f64, h: f64) -> T {
    richardson(d3_stencil(&f, x, h), d3_stencil(&f, x, 0.5 * h))
}

/// Fourth derivative, Richardson-extrapolated central difference.
pub fn deriv4<T: LinearSpace>(f: impl Fn(f64) -> T, x: f64, h: f64) -> T {
    richardson(d4_stencil(&f, x, h), d4_stencil(&f, x, 0.5 * h))
}

/// Widest one-sided parameter margin a stencil of the given order needs:
/// evaluations reach x ± 2h (orders 3, 4) or x ± h (orders 1, 2).
pub fn stencil_reach(order: usize, h: f64) -> f64 {
    match order {
        1 | 2 => h,
        _ => 2.0 * h,
    }
}
