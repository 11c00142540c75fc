//! Special functions behind the q-Gaussian family.
//!
//! The load-bearing object is the entire odd function
//!
//! ```text
//! g_q(w) = Σ_{k≥0} (-1)^k q^{k(k+1)/2} w^{2k+1},    |q| < 1,
//! ```
//!
//! of order zero, together with its derivatives in `w` and `q`. The theta
//! function enters through the substitution `w = e^{iz}` applied to the
//! classical θ₁ series:
//!
//! ```text
//! Θ(w) = -i q^{1/4} Σ_{n∈Z} (-1)^n q^{n²+n} w^{2n+1}
//!      = -i q^{1/4} (g_{q²}(w) - g_{q²}(1/w))
//!      = G · (-i q w) Π_{n≥1} (1 - q^{2n-2} w^{-2})(1 - q^{2n} w²),
//! ```
//!
//! where `G` is a w-independent constant. Note the convention: `theta_big`
//! takes the theta parameter q and evaluates `g` at q², so the zeros sit at
//! `w = ±q^{n-1}` and `w = ±q^{-n}` for n = 1, 2, …
//!
//! All evaluations are pure functions of their arguments and are safe to call
//! concurrently.

use num_complex::Complex64;
use num_traits::NumAssign;

use crate::dd::Dd;
use crate::{Error, QParam, Result, SeriesControl};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Chebyshev polynomial of the second kind, `U_k(cos θ) = sin((k+1)θ)/sin θ`,
/// by the forward recurrence `U_{k+1} = 2x U_k - U_{k-1}`.
///
/// Works for real and complex arguments alike.
pub fn chebyshev_u<T: NumAssign + Copy>(k: usize, x: T) -> T {
    let two_x = x + x;
    let mut prev = T::one();
    if k == 0 {
        return prev;
    }
    let mut cur = two_x;
    for _ in 1..k {
        let next = two_x * cur - prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Continuous q-Hermite polynomial `H_n(x|q)` from the three-term recurrence
/// `x H_n = H_{n+1} + ((1-q^n)/(1-q)) H_{n-1}`, `H_0 = 1`, `H_1 = x`.
pub fn q_hermite(n: usize, x: f64, q: QParam) -> f64 {
    let qv = q.value();
    match n {
        0 => 1.0,
        1 => x,
        _ => {
            let mut prev = 1.0;
            let mut cur = x;
            let mut qn = qv; // q^m at step m
            for _ in 1..n {
                let coeff = (1.0 - qn) / (1.0 - qv);
                let next = x * cur - coeff * prev;
                prev = cur;
                cur = next;
                qn *= qv;
            }
            cur
        }
    }
}

/// `g_q(w)` to the requested tolerance. The term-by-term evaluation keeps the
/// symmetries `g_q(-w̄) = -conj g_q(w)` and `g_q(w̄) = conj g_q(w)` exact in
/// floating point.
pub fn g_q(w: Complex64, q: QParam, ctrl: &SeriesControl) -> Result<Complex64> {
    g_series(w, q.value(), ctrl).map(|(v, _)| v)
}

/// Derivative `g_q'(w) = Σ (-1)^k q^{k(k+1)/2} (2k+1) w^{2k}`.
pub fn g_q_prime(w: Complex64, q: QParam, ctrl: &SeriesControl) -> Result<Complex64> {
    g_prime_series(w, q.value(), ctrl).map(|(v, _)| v)
}

/// Partial derivative of `g_q(w)` with respect to q, used as the tangent of
/// homotopy continuation.
pub fn g_q_dq(w: Complex64, q: QParam, ctrl: &SeriesControl) -> Result<Complex64> {
    g_dq_series(w, q.value(), ctrl)
}

/// m-th derivative of `g_q` in `w`. Orders 0 and 1 defer to the dedicated
/// evaluators; higher orders feed the local branch analysis at critical
/// points.
pub fn g_q_derivative(order: u32, w: Complex64, q: QParam, ctrl: &SeriesControl) -> Result<Complex64> {
    match order {
        0 => g_q(w, q, ctrl),
        1 => g_q_prime(w, q, ctrl),
        m => g_higher_derivative(m, w, q.value(), ctrl),
    }
}

pub(crate) fn g_series(w: Complex64, qv: f64, ctrl: &SeriesControl) -> Result<(Complex64, usize)> {
    let w2 = w * w;
    let mut pow_w = w; // w^{2k+1}
    let mut qpow = 1.0; // q^{k(k+1)/2}
    let mut qfac = qv; // q^{k+1}
    let mut sign = 1.0;
    let mut sum = Complex64::new(0.0, 0.0);
    for k in 0..ctrl.max_terms {
        let term = pow_w * (sign * qpow);
        sum += term;
        if !sum.is_finite() {
            return Err(Error::NonConvergence { max_terms: ctrl.max_terms });
        }
        if term.norm() <= ctrl.abs_tol {
            return Ok((sum, k + 1));
        }
        sign = -sign;
        qpow *= qfac;
        qfac *= qv;
        pow_w *= w2;
    }
    Err(Error::NonConvergence { max_terms: ctrl.max_terms })
}

pub(crate) fn g_prime_series(w: Complex64, qv: f64, ctrl: &SeriesControl) -> Result<(Complex64, usize)> {
    let w2 = w * w;
    let mut pow_w = Complex64::new(1.0, 0.0); // w^{2k}
    let mut qpow = 1.0;
    let mut qfac = qv;
    let mut sign = 1.0;
    let mut sum = Complex64::new(0.0, 0.0);
    for k in 0..ctrl.max_terms {
        let term = pow_w * (sign * qpow * (2 * k + 1) as f64);
        sum += term;
        if !sum.is_finite() {
            return Err(Error::NonConvergence { max_terms: ctrl.max_terms });
        }
        if term.norm() <= ctrl.abs_tol {
            return Ok((sum, k + 1));
        }
        sign = -sign;
        qpow *= qfac;
        qfac *= qv;
        pow_w *= w2;
    }
    Err(Error::NonConvergence { max_terms: ctrl.max_terms })
}

fn g_dq_series(w: Complex64, qv: f64, ctrl: &SeriesControl) -> Result<Complex64> {
    // d/dq of q^{T_k} is T_k q^{T_k - 1}; the k = 0 term drops out.
    let w2 = w * w;
    let mut pow_w = w * w2; // w^{2k+1}, starting at k = 1
    let mut qpow = 1.0; // q^{T_k - 1}, T_1 - 1 = 0
    let mut qfac = qv * qv; // q^{k+1}
    let mut sign = -1.0;
    let mut sum = Complex64::new(0.0, 0.0);
    for k in 1..ctrl.max_terms {
        let t_k = (k * (k + 1) / 2) as f64;
        let term = pow_w * (sign * t_k * qpow);
        sum += term;
        if !sum.is_finite() {
            return Err(Error::NonConvergence { max_terms: ctrl.max_terms });
        }
        if term.norm() <= ctrl.abs_tol {
            return Ok(sum);
        }
        sign = -sign;
        qpow *= qfac;
        qfac *= qv;
        pow_w *= w2;
    }
    Err(Error::NonConvergence { max_terms: ctrl.max_terms })
}

fn g_higher_derivative(m: u32, w: Complex64, qv: f64, ctrl: &SeriesControl) -> Result<Complex64> {
    let k0 = (m as usize) / 2; // smallest k with 2k+1 >= m
    let mut sum = Complex64::new(0.0, 0.0);
    for k in k0..ctrl.max_terms {
        let p = 2 * k + 1;
        let mut falling = 1.0;
        for i in 0..m as usize {
            falling *= (p - i) as f64;
        }
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let qpow = qv.powi((k * (k + 1) / 2) as i32);
        let term = w.powi((p - m as usize) as i32) * (sign * falling * qpow);
        sum += term;
        if !sum.is_finite() {
            return Err(Error::NonConvergence { max_terms: ctrl.max_terms });
        }
        if term.norm() <= ctrl.abs_tol && k > k0 {
            return Ok(sum);
        }
    }
    Err(Error::NonConvergence { max_terms: ctrl.max_terms })
}

/// Order of a q-Pochhammer product.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PochhammerOrder {
    Finite(usize),
    Infinite,
}

/// q-Pochhammer symbol `(a; q)_n = Π_{k=0}^{n-1} (1 - a q^k)`.
///
/// The infinite product truncates once the factors are within `abs_tol` of 1.
pub fn q_pochhammer(
    a: Complex64,
    q: QParam,
    order: PochhammerOrder,
    ctrl: &SeriesControl,
) -> Result<Complex64> {
    let qv = q.value();
    match order {
        PochhammerOrder::Finite(n) => {
            let mut prod = Complex64::new(1.0, 0.0);
            let mut aq = a;
            for _ in 0..n {
                prod *= Complex64::new(1.0, 0.0) - aq;
                aq *= qv;
            }
            Ok(prod)
        }
        PochhammerOrder::Infinite => {
            let mut prod = Complex64::new(1.0, 0.0);
            let mut aq = a;
            for _ in 0..ctrl.max_terms {
                prod *= Complex64::new(1.0, 0.0) - aq;
                if aq.norm() <= ctrl.abs_tol {
                    return Ok(prod);
                }
                aq *= qv;
            }
            Err(Error::NonConvergence { max_terms: ctrl.max_terms })
        }
    }
}

/// Which representation of Θ to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ThetaForm {
    Series,
    Product,
}

/// The constant `G` of the theta product form, fitted once per q.
///
/// The product form determines Θ only up to a w-independent constant; rather
/// than deriving it from the triple-product identity, it is calibrated by
/// matching the series form at `w = i`, a point far from every zero.
#[derive(Clone, Copy, Debug)]
pub struct ThetaCalibration {
    pub constant_g: Complex64,
}

impl ThetaCalibration {
    /// Fit the constant for this q.
    pub fn calibrate(q: QParam, ctrl: &SeriesControl) -> Result<Self> {
        let w = I;
        let series = theta_series(w, q, ctrl)?;
        let raw = theta_product_raw(w, q, ctrl)?;
        if raw.norm() == 0.0 {
            return Err(Error::Domain("theta product vanished at the calibration point".into()));
        }
        Ok(Self { constant_g: series / raw })
    }

    /// Calibrated product-form value.
    pub fn eval(&self, w: Complex64, q: QParam, ctrl: &SeriesControl) -> Result<Complex64> {
        Ok(self.constant_g * theta_product_raw(w, q, ctrl)?)
    }
}

/// `Θ(w)` for `w ≠ 0`, in the requested form.
///
/// The product form calibrates its constant internally on every call; hold a
/// [`ThetaCalibration`] to amortize that over many evaluations.
pub fn theta_big(w: Complex64, q: QParam, form: ThetaForm, ctrl: &SeriesControl) -> Result<Complex64> {
    if w.norm() == 0.0 {
        return Err(Error::Domain(
            "theta has an essential singularity at w = 0 (zeros accumulate there)".into(),
        ));
    }
    if q.value() <= 0.0 {
        return Err(Error::Domain("theta requires q > 0".into()));
    }
    match form {
        ThetaForm::Series => theta_series(w, q, ctrl),
        ThetaForm::Product => ThetaCalibration::calibrate(q, ctrl)?.eval(w, q, ctrl),
    }
}

fn theta_series(w: Complex64, q: QParam, ctrl: &SeriesControl) -> Result<Complex64> {
    let qv = q.value();
    let q2 = QParam::new(qv * qv).expect("q² stays within range");
    let inner = g_q(w, q2, ctrl)? - g_q(w.inv(), q2, ctrl)?;
    Ok(-I * qv.powf(0.25) * inner)
}

/// Product form without the constant: `-i q w Π (1 - q^{2n-2} w^{-2})(1 - q^{2n} w²)`.
fn theta_product_raw(w: Complex64, q: QParam, ctrl: &SeriesControl) -> Result<Complex64> {
    let qv = q.value();
    let q2 = qv * qv;
    let w2 = w * w;
    let w2_inv = w2.inv();
    let one = Complex64::new(1.0, 0.0);
    let mut prod = one;
    let mut qe = 1.0; // q^{2n-2}
    for _ in 0..ctrl.max_terms {
        prod *= (one - w2_inv * qe) * (one - w2 * (qe * q2));
        if !prod.is_finite() {
            return Err(Error::NonConvergence { max_terms: ctrl.max_terms });
        }
        qe *= q2;
        // remaining factors deviate from 1 by at most this much
        if qe * w2_inv.norm().max(q2 * w2.norm()) <= ctrl.abs_tol {
            return Ok(-I * qv * w * prod);
        }
    }
    Err(Error::NonConvergence { max_terms: ctrl.max_terms })
}

/// `|Θ(±q^j)|` with the zero location represented exactly as a power of q.
///
/// At the outer zeros the bilateral series cancels terms of size `q^{-n²}`,
/// far beyond what f64 evaluation of [`theta_big`] can resolve, so the sum is
/// carried out in double-double arithmetic with exact integer exponent
/// bookkeeping: the m-th term is `(-1)^m q^{m² + m(1+2j) + j}`. Θ is odd, so
/// the magnitude is the same for both signs of w.
pub fn theta_zero_magnitude(j: i32, q: QParam) -> Result<f64> {
    let qv = q.value();
    if qv <= 0.0 {
        return Err(Error::Domain("theta requires q > 0".into()));
    }
    let exponent = |m: i64| -> i64 {
        let j = j as i64;
        m * m + m * (1 + 2 * j) + j
    };
    // terms beyond ~45 digits below the peak cannot affect a double-double sum
    let e_cut = (104.0 / -qv.ln()).ceil() as i64 + 1;
    let m_center = (-(1 + 2 * i64::from(j)) as f64 / 2.0).floor() as i64;
    let e_min = exponent(m_center).min(exponent(m_center + 1));
    if (e_min as f64) * qv.ln() > 700.0 {
        // the cancelling terms q^{e_min} would overflow f64
        return Err(Error::Domain(format!(
            "theta zero check at q^{j} exceeds the floating-point range for q = {qv}"
        )));
    }
    let half_width = ((e_cut as f64).sqrt().ceil() as i64) + 2;

    let q_dd = Dd::from_f64(qv);
    let mut sum = Dd::ZERO;
    for m in (m_center - half_width)..=(m_center + 1 + half_width) {
        let e = exponent(m);
        if e - e_min > e_cut {
            continue;
        }
        let term = q_dd.powi(e);
        sum = if m.rem_euclid(2) == 0 { sum.add(term) } else { sum.add(term.neg()) };
    }
    Ok(qv.powf(0.25) * sum.to_f64().abs())
}
