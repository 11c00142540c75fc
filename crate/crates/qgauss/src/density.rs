//! The q-Gaussian density on `[-2, 2]` in two independent forms, adaptive
//! quadrature against kernels, and a Jacobi-matrix moment oracle.
//!
//! The defining form is the Chebyshev series
//!
//! ```text
//! f_q(x) = (1/2π) √(4-x²) Σ_{k≥1} (-1)^{k-1} q^{k(k-1)/2} U_{2k-2}(x/2),
//! ```
//!
//! normalized so that the support is `[-2, 2]` and the variance is `1 - q`.
//! The alternative theta-product form is, up to a q-dependent constant,
//!
//! ```text
//! f_q(x) = (1/π) sin θ Π_{n≥1} c_n(q) |1 - qⁿ e^{2iθ}|²,   cos θ = x/2,
//! ```
//!
//! where the per-factor coefficient `c_n(q)` admits two typographic readings,
//! `(1 - qⁿ)` and `(1 - q)ⁿ`. [`resolve_theta_form`] evaluates both raw
//! products against the Chebyshev series and selects the agreeing reading;
//! the leftover scale is calibrated at `x = 0` and reported. (Only the raw
//! comparison can discriminate: the two readings differ by an x-independent
//! constant, so any per-reading rescaling would make them identical.)

use num_complex::Complex64;

use crate::{quad, Error, QParam, Result, SeriesControl};

use std::f64::consts::PI;

/// Negative values no larger than this in magnitude are treated as roundoff
/// and clamped to zero; anything more negative falsifies positivity and is
/// reported as an error.
const ROUNDOFF_CLAMP: f64 = 1e-12;

/// Which density representation a consumer asked for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DensityForm {
    ChebyshevSeries,
    ThetaProduct,
}

/// A q-Gaussian density pinned to one representation, ready for repeated
/// evaluation (the theta form resolves its product reading once here).
#[derive(Clone, Copy, Debug)]
pub struct DensityModel {
    pub q: QParam,
    pub form: DensityForm,
    resolution: Option<ThetaFormResolution>,
}

impl DensityModel {
    pub fn new(q: QParam, form: DensityForm, ctrl: &SeriesControl) -> Result<Self> {
        let resolution = match form {
            DensityForm::ThetaProduct => Some(resolve_theta_form(q, ctrl)?),
            DensityForm::ChebyshevSeries => None,
        };
        Ok(Self { q, form, resolution })
    }

    /// The support of the normalized family.
    pub fn support(&self) -> [f64; 2] {
        [-2.0, 2.0]
    }

    pub fn eval(&self, x: f64, ctrl: &SeriesControl) -> Result<f64> {
        match &self.resolution {
            Some(res) => q_gaussian_density_theta_with(res, x, self.q),
            None => q_gaussian_density(x, self.q, ctrl),
        }
    }

    /// The product-reading resolution, present for the theta form.
    pub fn theta_resolution(&self) -> Option<&ThetaFormResolution> {
        self.resolution.as_ref()
    }
}

/// Truncated Jacobi operator of the family: zero diagonal, off-diagonals
/// `b_n = √(1 - qⁿ)` for n = 1…truncation. The `b_n` increase toward 1.
#[derive(Clone, Debug)]
pub struct JacobiOperator {
    truncation: usize,
    offdiag: Vec<f64>,
}

impl JacobiOperator {
    pub fn new(truncation: usize, q: QParam) -> Result<Self> {
        if truncation == 0 {
            return Err(Error::InvalidParameter("truncation must be positive".into()));
        }
        let qv = q.value();
        let mut offdiag = Vec::with_capacity(truncation);
        let mut qn = qv;
        for _ in 1..=truncation {
            offdiag.push((1.0 - qn).sqrt());
            qn *= qv;
        }
        Ok(Self { truncation, offdiag })
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    /// Off-diagonal entries `b_1 … b_N`.
    pub fn offdiag(&self) -> &[f64] {
        &self.offdiag
    }

    /// Moments `m_k = (e₀, Jᵏ e₀)` for k = 0…k_max; odd entries are exactly
    /// zero. Requires `truncation ≥ k_max/2 + 1` so no walk hits the boundary.
    pub fn moments(&self, k_max: usize) -> Result<Vec<f64>> {
        if self.truncation < k_max / 2 + 1 {
            return Err(Error::InvalidParameter(format!(
                "truncation {} too small for k_max {k_max}; need at least {}",
                self.truncation,
                k_max / 2 + 1
            )));
        }
        let dim = self.truncation + 1;
        let mut v = vec![0.0; dim];
        v[0] = 1.0;
        let mut scratch = vec![0.0; dim];
        let mut moments = Vec::with_capacity(k_max + 1);
        moments.push(1.0);
        for _ in 1..=k_max {
            for i in 0..dim {
                let mut acc = 0.0;
                if i > 0 {
                    acc += self.offdiag[i - 1] * v[i - 1];
                }
                if i + 1 < dim {
                    acc += self.offdiag[i] * v[i + 1];
                }
                scratch[i] = acc;
            }
            std::mem::swap(&mut v, &mut scratch);
            moments.push(v[0]);
        }
        Ok(moments)
    }
}

/// The two typographic readings of the theta-product coefficient.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProductReading {
    /// per-factor coefficient `1 - qⁿ`
    OneMinusQPowN,
    /// per-factor coefficient `(1 - q)ⁿ`
    PowNOfOneMinusQ,
}

/// Outcome of the empirical selection between the two product readings.
#[derive(Clone, Copy, Debug)]
pub struct ThetaFormResolution {
    pub reading: ProductReading,
    /// Multiplicative constant matching the selected raw product to the
    /// Chebyshev form at `x = 0`.
    pub scale: f64,
    /// Largest raw gap to the Chebyshev form over the probe set, selected reading.
    pub raw_gap_selected: f64,
    /// Same for the rejected reading.
    pub raw_gap_rejected: f64,
    n_factors: usize,
}

/// Kernel for [`integrate_density`].
#[derive(Clone, Copy, Debug)]
pub enum Kernel {
    Identity,
    /// `1/(z - x)`; the pole must stay off `[-2, 2]`.
    Cauchy(Complex64),
    /// `x^k`
    Power(u32),
}

fn check_support(x: f64) -> Result<()> {
    if (-2.0..=2.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::Domain(format!("x = {x} outside the support [-2, 2]")))
    }
}

fn clamp_roundoff(x: f64, v: f64) -> Result<f64> {
    if v >= 0.0 {
        Ok(v)
    } else if v >= -ROUNDOFF_CLAMP {
        Ok(0.0)
    } else {
        Err(Error::PositivityViolation { x, f: v })
    }
}

/// Density value at `x ∈ [-2, 2]` from the Chebyshev series.
pub fn q_gaussian_density(x: f64, q: QParam, ctrl: &SeriesControl) -> Result<f64> {
    check_support(x)?;
    let s = chebyshev_sum(x, q.value(), ctrl)?;
    let v = (4.0 - x * x).sqrt() * s / (2.0 * PI);
    clamp_roundoff(x, v)
}

/// Σ_{k≥1} (-1)^{k-1} q^{k(k-1)/2} U_{2k-2}(x/2), advancing the Chebyshev
/// recurrence two degrees per term. Terms are cut once the bound
/// `q^{k(k-1)/2} (2k-1) ≥ |coeff·U|` falls below tolerance (|U_n| ≤ n+1 on
/// the support).
fn chebyshev_sum(x: f64, qv: f64, ctrl: &SeriesControl) -> Result<f64> {
    let mut u_even = 1.0; // U_{2k-2}
    let mut u_odd = x; // U_{2k-1} (2y = x)
    let mut sum = 0.0;
    let mut sign = 1.0;
    let mut qpow = 1.0; // q^{k(k-1)/2}
    let mut qstep = qv; // q^k
    for k in 1..=ctrl.max_terms {
        sum += sign * qpow * u_even;
        let next_qpow = qpow * qstep;
        if next_qpow * (2 * k + 1) as f64 <= ctrl.abs_tol {
            return Ok(sum);
        }
        let u_next_even = x * u_odd - u_even;
        let u_next_odd = x * u_next_even - u_odd;
        u_even = u_next_even;
        u_odd = u_next_odd;
        sign = -sign;
        qpow = next_qpow;
        qstep *= qv;
    }
    Err(Error::NonConvergence { max_terms: ctrl.max_terms })
}

/// Number of product factors needed so the tail deviates from 1 by < abs_tol.
fn theta_factor_count(qv: f64, ctrl: &SeriesControl) -> Result<usize> {
    if qv == 0.0 {
        return Ok(0);
    }
    let n = ((ctrl.abs_tol / 4.0).ln() / qv.ln()).ceil() as usize + 1;
    if n > ctrl.max_terms {
        return Err(Error::NonConvergence { max_terms: ctrl.max_terms });
    }
    Ok(n)
}

/// Raw (unscaled) theta-product density under the given reading, truncated at
/// `n_factors` factors.
fn theta_density_raw(x: f64, qv: f64, reading: ProductReading, n_factors: usize) -> f64 {
    let y = x / 2.0;
    let sin_theta = (1.0 - y * y).max(0.0).sqrt();
    let cos_2theta = 2.0 * y * y - 1.0;
    let mut prod = 1.0;
    let mut qn = qv; // qⁿ
    let mut coeff_b = 1.0 - qv; // (1-q)ⁿ
    for _ in 0..n_factors {
        // |1 - qⁿ e^{2iθ}|² = 1 - 2qⁿ cos 2θ + q^{2n}
        let modulus_sq = 1.0 - 2.0 * qn * cos_2theta + qn * qn;
        let coeff = match reading {
            ProductReading::OneMinusQPowN => 1.0 - qn,
            ProductReading::PowNOfOneMinusQ => coeff_b,
        };
        prod *= coeff * modulus_sq;
        qn *= qv;
        coeff_b *= 1.0 - qv;
    }
    sin_theta / PI * prod
}

/// Decide between the two product readings by raw agreement with the
/// Chebyshev series, then calibrate the surviving constant at `x = 0`.
pub fn resolve_theta_form(q: QParam, ctrl: &SeriesControl) -> Result<ThetaFormResolution> {
    let qv = q.value();
    let n_factors = theta_factor_count(qv, ctrl)?;
    let probes = [0.5, 1.0, 1.5];
    let mut gap_a = 0.0f64;
    let mut gap_b = 0.0f64;
    for &x in &probes {
        let reference = q_gaussian_density(x, q, ctrl)?;
        gap_a = gap_a
            .max((theta_density_raw(x, qv, ProductReading::OneMinusQPowN, n_factors) - reference).abs());
        gap_b = gap_b
            .max((theta_density_raw(x, qv, ProductReading::PowNOfOneMinusQ, n_factors) - reference).abs());
    }
    let (reading, raw_gap_selected, raw_gap_rejected) = if gap_a <= gap_b {
        (ProductReading::OneMinusQPowN, gap_a, gap_b)
    } else {
        (ProductReading::PowNOfOneMinusQ, gap_b, gap_a)
    };
    let raw_center = theta_density_raw(0.0, qv, reading, n_factors);
    if raw_center <= 0.0 {
        return Err(Error::Domain("theta-form product vanished at the calibration point".into()));
    }
    let scale = q_gaussian_density(0.0, q, ctrl)? / raw_center;
    Ok(ThetaFormResolution { reading, scale, raw_gap_selected, raw_gap_rejected, n_factors })
}

/// Density value at `x ∈ [-2, 2]` from the calibrated theta-product form.
pub fn q_gaussian_density_theta(x: f64, q: QParam, ctrl: &SeriesControl) -> Result<f64> {
    let res = resolve_theta_form(q, ctrl)?;
    q_gaussian_density_theta_with(&res, x, q)
}

/// Theta-form density reusing a previously computed resolution.
pub fn q_gaussian_density_theta_with(
    res: &ThetaFormResolution,
    x: f64,
    q: QParam,
) -> Result<f64> {
    check_support(x)?;
    let v = res.scale * theta_density_raw(x, q.value(), res.reading, res.n_factors);
    clamp_roundoff(x, v)
}

/// `∫_{-2}^{2} f_q(x) k(x) dx` by adaptive quadrature, with the substitution
/// `x = 2 cos θ` removing the square-root endpoint behavior.
pub fn integrate_density(
    q: QParam,
    kernel: Kernel,
    quad_tol: f64,
    ctrl: &SeriesControl,
) -> Result<Complex64> {
    if let Kernel::Cauchy(z) = kernel {
        if z.im == 0.0 && z.re.abs() <= 2.0 {
            return Err(Error::Domain(format!("Cauchy kernel pole {z} lies on the support")));
        }
    }
    let integrand = |theta: f64| -> Result<Complex64> {
        let x = 2.0 * theta.cos();
        let f = q_gaussian_density(x.clamp(-2.0, 2.0), q, ctrl)?;
        let k = match kernel {
            Kernel::Identity => Complex64::new(1.0, 0.0),
            Kernel::Cauchy(z) => (z - x).inv(),
            Kernel::Power(p) => Complex64::new(x.powi(p as i32), 0.0),
        };
        Ok(k * (f * 2.0 * theta.sin()))
    };
    quad::integrate(integrand, 0.0, PI, quad_tol, 4096)
}

/// Moments of the truncated Jacobi operator; see [`JacobiOperator::moments`].
pub fn jacobi_moments(k_max: usize, q: QParam, truncation: usize) -> Result<Vec<f64>> {
    JacobiOperator::new(truncation, q)?.moments(k_max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qseries::chebyshev_u;
    use crate::transforms::{semicircle_cauchy, BranchTag};

    fn ctrl() -> SeriesControl {
        SeriesControl::default()
    }

    fn qp(q: f64) -> QParam {
        QParam::new(q).unwrap()
    }

    #[test]
    fn semicircle_reduction_at_q_zero() {
        let c = ctrl();
        let v = q_gaussian_density(0.0, qp(0.0), &c).unwrap();
        assert!((v - 1.0 / PI).abs() < 1e-16);
        for i in 0..=1000 {
            let x = -2.0 + 4.0 * i as f64 / 1000.0;
            let expected = (4.0 - x * x).sqrt() / (2.0 * PI);
            assert!((q_gaussian_density(x, qp(0.0), &c).unwrap() - expected).abs() <= 1e-14);
        }
    }

    #[test]
    fn density_vanishes_at_endpoints() {
        let c = ctrl();
        for &q in &[0.0, 0.4, 0.9] {
            assert_eq!(q_gaussian_density(2.0, qp(q), &c).unwrap(), 0.0);
            assert_eq!(q_gaussian_density(-2.0, qp(q), &c).unwrap(), 0.0);
            assert_eq!(q_gaussian_density_theta(2.0, qp(q), &c).unwrap(), 0.0);
        }
        assert!(q_gaussian_density(2.1, qp(0.4), &c).is_err());
    }

    #[test]
    fn density_is_even_and_nonnegative() {
        // evaluation errors out below the -1e-12 roundoff floor, so a clean
        // scan doubles as the positivity check
        let c = ctrl();
        for &q in &[0.1, 0.5, 0.9] {
            for i in 0..=5000 {
                let x = 2.0 * i as f64 / 5000.0;
                let plus = q_gaussian_density(x, qp(q), &c).unwrap();
                let minus = q_gaussian_density(-x, qp(q), &c).unwrap();
                assert!((plus - minus).abs() < 1e-14);
                assert!(plus >= 0.0);
            }
        }
    }

    #[test]
    fn theta_form_selects_the_pochhammer_reading() {
        let c = ctrl();
        for &q in &[0.3, 0.5, 0.7] {
            let res = resolve_theta_form(qp(q), &c).unwrap();
            assert_eq!(res.reading, ProductReading::OneMinusQPowN, "q={q}");
            assert!(res.raw_gap_selected < 1e-11, "q={q}: {}", res.raw_gap_selected);
            assert!(res.raw_gap_rejected > 1e-2, "q={q}: {}", res.raw_gap_rejected);
            // the surviving constant is the identity up to roundoff
            assert!((res.scale - 1.0).abs() < 1e-12, "q={q}: scale {}", res.scale);
        }
    }

    #[test]
    fn forms_agree_pointwise() {
        let c = ctrl();
        for &q in &[0.3, 0.5] {
            let res = resolve_theta_form(qp(q), &c).unwrap();
            let mut max_gap = 0.0f64;
            for i in 0..=100 {
                let x = -2.0 + 4.0 * i as f64 / 100.0;
                let a = q_gaussian_density(x, qp(q), &c).unwrap();
                let b = q_gaussian_density_theta_with(&res, x, qp(q)).unwrap();
                max_gap = max_gap.max((a - b).abs());
            }
            assert!(max_gap <= 1e-9, "q={q}: max gap {max_gap:.3e}");
        }
        // spot value away from the calibration point
        let a = q_gaussian_density(1.0, qp(0.5), &c).unwrap();
        let b = q_gaussian_density_theta(1.0, qp(0.5), &c).unwrap();
        assert!((a - b).abs() <= 1e-10);
    }

    #[test]
    fn theta_form_matches_semicircle_at_q_zero() {
        let c = ctrl();
        let v = q_gaussian_density_theta(0.0, qp(0.0), &c).unwrap();
        assert!((v - 1.0 / PI).abs() < 1e-15);
    }

    #[test]
    fn normalization_by_quadrature() {
        let c = ctrl();
        let v = integrate_density(qp(0.5), Kernel::Identity, 1e-10, &c).unwrap();
        assert!((v.re - 1.0).abs() <= 1e-10, "∫f = {}", v.re);
        assert!(v.im.abs() < 1e-14);
    }

    #[test]
    fn cauchy_kernel_recovers_semicircle_transform() {
        let c = ctrl();
        let z = Complex64::new(0.0, 1.0);
        let v = integrate_density(qp(0.0), Kernel::Cauchy(z), 1e-10, &c).unwrap();
        let expected = semicircle_cauchy(z, BranchTag::UpperPrincipal).unwrap();
        assert!((v - expected).norm() <= 1e-10);
    }

    #[test]
    fn cauchy_kernel_rejects_poles_on_support() {
        let c = ctrl();
        assert!(integrate_density(qp(0.3), Kernel::Cauchy(Complex64::new(0.5, 0.0)), 1e-8, &c)
            .is_err());
    }

    #[test]
    fn second_moment_is_one_minus_q() {
        let c = ctrl();
        let v = integrate_density(qp(0.5), Kernel::Power(2), 1e-10, &c).unwrap();
        assert!((v.re - 0.5).abs() <= 1e-8, "m₂ = {}", v.re);
    }

    #[test]
    fn jacobi_offdiagonals_increase_toward_one() {
        let op = JacobiOperator::new(12, qp(0.6)).unwrap();
        let b = op.offdiag();
        assert_eq!(b.len(), 12);
        for pair in b.windows(2) {
            assert!(pair[0] < pair[1]);
        }
        assert!(b.iter().all(|&x| x > 0.0 && x <= 1.0));
        assert!((b[0] - (1.0f64 - 0.6).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn density_model_dispatches_forms() {
        let c = ctrl();
        let cheb = DensityModel::new(qp(0.4), DensityForm::ChebyshevSeries, &c).unwrap();
        let theta = DensityModel::new(qp(0.4), DensityForm::ThetaProduct, &c).unwrap();
        assert_eq!(cheb.support(), [-2.0, 2.0]);
        assert!(cheb.theta_resolution().is_none());
        assert!(theta.theta_resolution().is_some());
        for i in 0..=50 {
            let x = -2.0 + 4.0 * i as f64 / 50.0;
            let a = cheb.eval(x, &c).unwrap();
            let b = theta.eval(x, &c).unwrap();
            assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn jacobi_moment_values() {
        let m = jacobi_moments(4, qp(0.5), 8).unwrap();
        assert_eq!(m[0], 1.0);
        assert_eq!(m[1], 0.0);
        assert!((m[2] - 0.5).abs() < 1e-14);
        assert_eq!(m[3], 0.0);
        // hand evaluation: m₄ = (1-q)[(1-q) + (1-q²)] = 0.625 at q = 1/2
        assert!((m[4] - 0.625).abs() < 1e-14);
        assert!(jacobi_moments(10, qp(0.5), 3).is_err());
    }

    #[test]
    fn quadrature_moments_match_jacobi() {
        let c = ctrl();
        for &q in &[0.0, 0.5, 0.9] {
            let jac = jacobi_moments(6, qp(q), 8).unwrap();
            for k in 0..=6usize {
                let quad_m =
                    integrate_density(qp(q), Kernel::Power(k as u32), 1e-10, &c).unwrap().re;
                assert!(
                    (quad_m - jac[k]).abs() <= 1e-8,
                    "q={q} k={k}: quad {quad_m} vs jacobi {}",
                    jac[k]
                );
            }
        }
    }

    #[test]
    fn term_by_term_transform_identity() {
        // (1/2π) ∫ U_{2k-2}(x/2) √(4-x²)/(z-x) dx = G_s(z)^{2k-1}
        let z = Complex64::new(1.0, 1.0);
        let gs = semicircle_cauchy(z, BranchTag::UpperPrincipal).unwrap();
        for k in 1..=5usize {
            let integrand = |theta: f64| -> Result<Complex64> {
                let x = 2.0 * theta.cos();
                let u: f64 = chebyshev_u(2 * k - 2, theta.cos());
                let w = 2.0 * theta.sin(); // √(4-x²)
                Ok((z - x).inv() * (u * w * 2.0 * theta.sin() / (2.0 * PI)))
            };
            let lhs = quad::integrate(integrand, 0.0, PI, 1e-11, 4096).unwrap();
            let rhs = gs.powi(2 * k as i32 - 1);
            assert!((lhs - rhs).norm() <= 1e-9, "k={k}: {lhs} vs {rhs}");
        }
    }
}
