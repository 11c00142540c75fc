//! Numerical toolkit for the q-Gaussian family of probability measures.
//!
//! The q-Gaussian laws interpolate between the Wigner semicircle (q = 0) and the
//! classical normal distribution (q = 1). Everything here works with the
//! variance-normalized family supported on `[-2, 2]`, whose Cauchy transform
//! factors as `G = g_q ∘ G_s` through the entire odd function
//!
//! ```text
//! g_q(w) = Σ_{k≥0} (-1)^k q^{k(k+1)/2} w^{2k+1}
//! ```
//!
//! and the semicircle transform `G_s(z) = (z - √(z²-4))/2`.
//!
//! # Modules
//!
//! - [`qseries`] — special functions: Chebyshev `U_k`, q-Hermite polynomials,
//!   q-Pochhammer products, `g_q` and its derivatives, and the theta function
//!   `Θ(w) = -i q^{1/4} (g_{q²}(w) - g_{q²}(1/w))` in series and product form.
//! - [`transforms`] — branch-aware semicircle and q-Gaussian Cauchy transforms,
//!   the inverse of `g_q` by homotopy continuation in q, and the Voiculescu
//!   transform `φ(z) = F⁻¹(z) - z`.
//! - [`density`] — the density in Chebyshev-series and theta-product form,
//!   adaptive quadrature against kernels, and a Jacobi-matrix moment oracle.
//! - [`geometry`] — real critical points of `g_q`, tracing of the level curve
//!   `γ_q = g_q⁻¹([0,∞))`, argument-principle zero counting on contours, and a
//!   sampled injectivity witness for the region `X_q`.
//! - [`certify`] — grid evaluation of `Im φ` over the upper half-plane and
//!   machine-readable certificates that `φ` maps `C⁺` into `C⁻`.
//! - [`quad`] — adaptive Gauss-Kronrod quadrature used by the density module.
//!
//! Grid certification and injectivity sampling evaluate nodes in parallel with
//! rayon when the default `parallel` feature is enabled; disabling it selects a
//! sequential fallback with identical (bit-for-bit) results.

use serde::{Deserialize, Serialize};
use thiserror::Error;

mod dd;
pub mod certify;
pub mod density;
pub mod geometry;
pub mod qseries;
pub mod quad;
pub mod transforms;

pub use num_complex::Complex64;

/// Largest q accepted by the numerical layer.
///
/// The underlying theory covers q ∈ [0, 1], but every series and product in
/// this crate degenerates as q → 1; evaluation is reliable in double precision
/// up to this ceiling.
pub const Q_MAX: f64 = 0.999;

/// The deformation parameter q, validated to the range `[0, Q_MAX]`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct QParam(f64);

impl QParam {
    /// Validate and wrap a parameter value.
    pub fn new(q: f64) -> Result<Self> {
        if q.is_finite() && (0.0..=Q_MAX).contains(&q) {
            Ok(Self(q))
        } else {
            Err(Error::InvalidParameter(format!(
                "q = {q} outside the supported range [0, {Q_MAX}]"
            )))
        }
    }

    /// The raw parameter value.
    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

/// Truncation policy for all infinite series and products.
///
/// Evaluation stops once the current term magnitude drops to `abs_tol`;
/// reaching `max_terms` first is reported as [`Error::NonConvergence`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesControl {
    pub abs_tol: f64,
    pub max_terms: usize,
}

impl Default for SeriesControl {
    fn default() -> Self {
        Self { abs_tol: 1e-14, max_terms: 512 }
    }
}

/// Errors produced by the numerical layer.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("series or product did not converge within {max_terms} terms")]
    NonConvergence { max_terms: usize },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("newton iteration did not converge")]
    NoConvergence,
    #[error("continuation iterate escaped into the upper half-plane")]
    BranchEscape,
    #[error("no critical point found in (0, {bound}]")]
    NoneFound { bound: f64 },
    #[error("path tracing stalled: {0}")]
    Stall(String),
    #[error("quadrature refinement budget exhausted (requested {tol:.3e}, reached {reached:.3e})")]
    QuadFailure { tol: f64, reached: f64 },
    #[error("a zero of the test function lies on the contour")]
    OnContourZero,
    #[error("accumulated winding {0} is not within 1e-6 of an integer")]
    NonIntegerWinding(f64),
    #[error("density positivity violated at x = {x}: f = {f:.3e}")]
    PositivityViolation { x: f64, f: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
