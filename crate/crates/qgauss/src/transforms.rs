//! Cauchy-Stieltjes transforms of the semicircle and q-Gaussian laws, the
//! inverse of `g_q` by homotopy continuation, and the Voiculescu transform.
//!
//! The semicircle transform is `G_s(z) = (z - s(z))/2` with
//! `s(z) = √(z-2)·√(z+2)` taken with principal square roots in each factor.
//! That choice puts the branch cut exactly on `[-2, 2]`, so the same formula
//! is the Cauchy transform on `C⁺` (with `G_s ~ 1/z` at infinity) and extends
//! analytically through `(-2, 2)`; the continuation onto `C⁻` is the other
//! branch `(z + s(z))/2`, which grows like `z` toward `-i∞`.
//!
//! The q-Gaussian transform is the composition `G = g_q ∘ G_s`, and the
//! Voiculescu transform is recovered from the inverse of `g_q` on the lower
//! half-plane:
//!
//! ```text
//! φ(z) = G⁻¹(1/z) - z = (u + 1/u) - z,   u = g_q⁻¹(1/z),   z ∈ C⁺.
//! ```

use num_complex::Complex64;

use crate::qseries::{self, g_q_dq};
use crate::{Error, QParam, Result, SeriesControl};

/// Derivative magnitudes below this floor abort Newton rather than divide.
const DERIVATIVE_FLOOR: f64 = 1e-14;
/// The continuation step may shrink to base_dq·2^-48 before giving up.
const MAX_BISECT_DEPTH: u32 = 48;

/// Branch selection for the semicircle transform.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BranchTag {
    /// `(z - s(z))/2`: the Cauchy transform on `C⁺ ∪ (-2, 2)`, `~ 1/z` at ∞.
    UpperPrincipal,
    /// `(z + s(z))/2` on `C⁻`: the analytic continuation of the upper branch
    /// through `(-2, 2)`, `~ z` toward `-i∞`.
    ContinuedThroughCut,
}

/// Controls for the homotopy-Newton inversion of `g_q`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InversionPolicy {
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    /// Base number of homotopy steps in q; intervals are bisected further
    /// whenever the corrector strays from the tangent prediction.
    pub continuation_steps: usize,
}

impl Default for InversionPolicy {
    fn default() -> Self {
        Self { newton_tol: 1e-12, newton_max_iter: 50, continuation_steps: 64 }
    }
}

fn sqrt_cut(z: Complex64) -> Complex64 {
    (z - 2.0).sqrt() * (z + 2.0).sqrt()
}

/// Cauchy transform of the semicircular law on the requested branch.
pub fn semicircle_cauchy(z: Complex64, branch: BranchTag) -> Result<Complex64> {
    match branch {
        // (z - s)/2 rewritten as 2/(z + s): the sum never cancels
        // (|z + s| = 4/|z - s|), so the decaying branch stays accurate at
        // large |z| where the difference form loses six digits.
        BranchTag::UpperPrincipal => Ok(Complex64::new(2.0, 0.0) / (z + sqrt_cut(z))),
        BranchTag::ContinuedThroughCut => {
            if z.im >= 0.0 && !z.im.is_sign_negative() {
                return Err(Error::Domain(
                    "the continued branch is defined on the lower half-plane".into(),
                ));
            }
            Ok((z + sqrt_cut(z)) * 0.5)
        }
    }
}

/// Inverse of the semicircle transform, `G_s⁻¹(w) = w + 1/w`.
pub fn semicircle_cauchy_inverse(w: Complex64) -> Result<Complex64> {
    if w.norm() == 0.0 {
        return Err(Error::Domain("G_s⁻¹ is singular at w = 0".into()));
    }
    Ok(w + w.inv())
}

/// Cauchy transform of the q-Gaussian law, `G(z) = g_q(G_s(z))`.
pub fn q_gaussian_cauchy(
    z: Complex64,
    q: QParam,
    branch: BranchTag,
    ctrl: &SeriesControl,
) -> Result<Complex64> {
    qseries::g_q(semicircle_cauchy(z, branch)?, q, ctrl)
}

/// F-transform `F(z) = 1/G(z)` on the principal branch.
pub fn f_transform(z: Complex64, q: QParam, ctrl: &SeriesControl) -> Result<Complex64> {
    let g = q_gaussian_cauchy(z, q, BranchTag::UpperPrincipal, ctrl)?;
    if g.norm() == 0.0 {
        return Err(Error::Domain("Cauchy transform vanished; F undefined".into()));
    }
    Ok(g.inv())
}

/// Inverse of `g_q` on the lower half-plane by homotopy in q.
///
/// At q = 0 the inverse is the identity; q is then stepped upward with a
/// tangent predictor and Newton corrector at each node, bisecting any step
/// whose corrector strays from the prediction. The returned `u` satisfies
/// `|g_q(u) - target| ≤ newton_tol` and stays in the lower half-plane;
/// crossing into `C⁺` reports [`Error::BranchEscape`].
pub fn invert_g(
    target: Complex64,
    q: QParam,
    policy: &InversionPolicy,
    ctrl: &SeriesControl,
) -> Result<Complex64> {
    let mut terms = 0;
    invert_g_counted(target, q, policy, ctrl, &mut terms)
}

pub(crate) fn invert_g_counted(
    target: Complex64,
    q: QParam,
    policy: &InversionPolicy,
    ctrl: &SeriesControl,
    terms: &mut usize,
) -> Result<Complex64> {
    if !(target.im < 0.0) {
        return Err(Error::Domain("inversion target must lie in the open lower half-plane".into()));
    }
    let qv = q.value();
    if qv == 0.0 {
        return Ok(target);
    }
    let base_dq = qv / policy.continuation_steps.max(1) as f64;
    let min_dq = base_dq * 2f64.powi(-(MAX_BISECT_DEPTH as i32));
    let mut u = target;
    let mut q_cur = 0.0;
    let mut dq = base_dq;
    let mut budget = 4_000_000u32;
    while q_cur < qv {
        budget = budget.checked_sub(1).ok_or(Error::NoConvergence)?;
        let q_next = if qv - q_cur <= dq { qv } else { q_cur + dq };
        // first-order predictor along the continuation tangent du/dq = -∂g/∂q / g'
        let pred = {
            let (gp, n) = qseries::g_prime_series(u, q_cur, ctrl)?;
            *terms = (*terms).max(n);
            if gp.norm() > DERIVATIVE_FLOOR {
                let gq = g_q_dq(u, QParam::new(q_cur).expect("interior q"), ctrl)?;
                u - gq / gp * (q_next - q_cur)
            } else {
                u
            }
        };
        let corrected = newton_solve(pred, q_next, target, policy, ctrl, terms);
        let step_scale = (pred - u).norm();
        let accepted = match &corrected {
            Ok(v) => v.im < 0.0 && (v - pred).norm() <= 0.5 * step_scale + 1e-6 * (1.0 + v.norm()),
            Err(_) => false,
        };
        if accepted {
            u = corrected.expect("accepted implies Ok");
            q_cur = q_next;
            dq = (dq * 1.5).min(base_dq);
        } else {
            dq *= 0.5;
            if dq < min_dq {
                return match corrected {
                    Ok(v) if v.im >= 0.0 => Err(Error::BranchEscape),
                    Ok(_) => Err(Error::NoConvergence),
                    Err(e) => Err(e),
                };
            }
        }
    }
    Ok(u)
}

fn newton_solve(
    start: Complex64,
    qv: f64,
    target: Complex64,
    policy: &InversionPolicy,
    ctrl: &SeriesControl,
    terms: &mut usize,
) -> Result<Complex64> {
    let mut u = start;
    for _ in 0..policy.newton_max_iter {
        let (g, n) = qseries::g_series(u, qv, ctrl)?;
        *terms = (*terms).max(n);
        let f = g - target;
        if f.norm() <= policy.newton_tol {
            return Ok(u);
        }
        let (d, n) = qseries::g_prime_series(u, qv, ctrl)?;
        *terms = (*terms).max(n);
        if d.norm() < DERIVATIVE_FLOOR {
            return Err(Error::NoConvergence);
        }
        u -= f / d;
        if !u.is_finite() {
            return Err(Error::NoConvergence);
        }
    }
    Err(Error::NoConvergence)
}

/// Voiculescu transform `φ(z) = F⁻¹(z) - z` for `z ∈ C⁺`.
///
/// `1/z` lands in `C⁻`, where `g_q` is inverted; the semicircle inverse
/// `u + 1/u` then recovers `G⁻¹(1/z)`.
pub fn voiculescu_phi(
    z: Complex64,
    q: QParam,
    policy: &InversionPolicy,
    ctrl: &SeriesControl,
) -> Result<Complex64> {
    let mut terms = 0;
    voiculescu_phi_counted(z, q, policy, ctrl, &mut terms)
}

pub(crate) fn voiculescu_phi_counted(
    z: Complex64,
    q: QParam,
    policy: &InversionPolicy,
    ctrl: &SeriesControl,
    terms: &mut usize,
) -> Result<Complex64> {
    if !(z.im > 0.0) {
        return Err(Error::Domain("φ is defined on the open upper half-plane".into()));
    }
    let u = invert_g_counted(z.inv(), q, policy, ctrl, terms)?;
    Ok(u + u.inv() - z)
}

/// Inverse F-transform `F⁻¹(z) = φ(z) + z`.
pub fn f_inverse(
    z: Complex64,
    q: QParam,
    policy: &InversionPolicy,
    ctrl: &SeriesControl,
) -> Result<Complex64> {
    Ok(voiculescu_phi(z, q, policy, ctrl)? + z)
}
