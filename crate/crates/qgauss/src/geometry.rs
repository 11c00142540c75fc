//! Computable geometry of `g_q`: real critical points, the level curve
//! `γ_q = g_q⁻¹([0, ∞))`, argument-principle zero counting, and a sampled
//! injectivity witness for the region `X_q` it bounds.
//!
//! The curve starts at the origin and runs along the positive real axis until
//! the first zero `d_q` of `g_q'`. There the preimage of the outgoing ray
//! splits into several branches; the tracer always turns *first to the
//! right*: among the outgoing branch tangents it picks the one with the
//! smallest positive clockwise angle from the incoming direction. Past `d_q`
//! the curve dives into the closed fourth quadrant and is continued by a
//! tangent predictor with Newton correction of `g_q(γ(t)) = t`.
//!
//! `X_q` is bounded by `γ_q`, its mirror `-conj(γ_q)`, and a closing arc at
//! the trace radius; counting preimages of sampled targets in `C⁻` by the
//! argument principle witnesses that `g_q` is a bijection onto `C⁻` there.

use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::qseries::{self, g_q_derivative};
use crate::{Error, QParam, Result, SeriesControl};

use std::f64::consts::PI;
use std::io::Write;

/// |g'| threshold below which the tracer solves for a nearby critical point.
const CRITICAL_APPROACH: f64 = 1e-4;
/// Largest multiplicity handled by the local branch analysis.
const MAX_MULTIPLICITY: u32 = 12;

/// A discretized parametrization of `γ_q`: `g_q(points[j]) = parameters[j]`
/// up to `residuals[j]`.
#[derive(Clone, Debug)]
pub struct PathTrace {
    /// Increasing parameter values `t_j ≥ 0`.
    pub parameters: Vec<f64>,
    /// Curve points `γ(t_j)`, confined to the closed fourth quadrant.
    pub points: Vec<Complex64>,
    /// `|g_q(γ(t_j)) - t_j|`.
    pub residuals: Vec<f64>,
    /// Critical points of `g_q` encountered along the curve, in order.
    pub critical_points: Vec<Complex64>,
}

impl PathTrace {
    /// Largest residual along the trace.
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().cloned().fold(0.0, f64::max)
    }

    /// Mirror image `-conj(γ)`, the left half of `∂X_q`.
    pub fn mirrored_points(&self) -> Vec<Complex64> {
        self.points.iter().map(|w| -w.conj()).collect()
    }

    /// CSV serialization with columns `t,re,im,residual`.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "t,re,im,residual")?;
        for i in 0..self.points.len() {
            writeln!(
                out,
                "{:.17e},{:.17e},{:.17e},{:.3e}",
                self.parameters[i], self.points[i].re, self.points[i].im, self.residuals[i]
            )?;
        }
        Ok(())
    }
}

/// Tuning knobs for [`trace_gamma_with`].
#[derive(Clone, Copy, Debug)]
pub struct TraceOptions {
    pub trace_tol: f64,
    pub escape_radius: f64,
    pub max_points: usize,
    /// Target spacing between stored points, scaled by `1 + |γ|`.
    pub base_step: f64,
}

impl Default for TraceOptions {
    fn default() -> Self {
        Self { trace_tol: 1e-9, escape_radius: 1e3, max_points: 200_000, base_step: 0.01 }
    }
}

/// All zeros of `g_q'` in `(0, search_bound]`, sorted, located by sign-change
/// bisection on a fine grid and polished by Newton.
pub fn real_critical_points(q: QParam, search_bound: f64, ctrl: &SeriesControl) -> Result<Vec<f64>> {
    let qv = q.value();
    if !(search_bound > 0.0) {
        return Err(Error::InvalidParameter(format!("search bound {search_bound} must be positive")));
    }
    if qv == 0.0 {
        // g_0' ≡ 1
        return Err(Error::NoneFound { bound: search_bound });
    }
    let gp = |x: f64| -> Result<f64> {
        Ok(qseries::g_prime_series(Complex64::new(x, 0.0), qv, ctrl)?.0.re)
    };
    let n = 4096;
    let mut roots = Vec::new();
    let mut x_prev = search_bound / n as f64;
    let mut f_prev = gp(x_prev)?;
    for i in 2..=n {
        let x = search_bound * i as f64 / n as f64;
        let f = gp(x)?;
        if f_prev == 0.0 {
            roots.push(x_prev);
        } else if f_prev * f < 0.0 {
            roots.push(bisect_then_polish(&gp, x_prev, x, qv, ctrl)?);
        }
        x_prev = x;
        f_prev = f;
    }
    if f_prev == 0.0 {
        roots.push(x_prev);
    }
    roots.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    if roots.is_empty() {
        Err(Error::NoneFound { bound: search_bound })
    } else {
        Ok(roots)
    }
}

fn bisect_then_polish<F>(gp: &F, mut lo: f64, mut hi: f64, qv: f64, ctrl: &SeriesControl) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let mut f_lo = gp(lo)?;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = gp(mid)?;
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_lo * f_mid < 0.0 {
            hi = mid;
        } else {
            lo = mid;
            f_lo = f_mid;
        }
    }
    let mut d = 0.5 * (lo + hi);
    for _ in 0..4 {
        let g1 = gp(d)?;
        let g2 = g_q_derivative(2, Complex64::new(d, 0.0), QParam::new(qv).expect("valid q"), ctrl)?.re;
        if g2.abs() < 1e-14 {
            break;
        }
        d -= g1 / g2;
    }
    Ok(d)
}

/// Trace `γ_q` up to parameter `t_max` with default options and the given
/// residual tolerance.
pub fn trace_gamma(q: QParam, t_max: f64, trace_tol: f64, ctrl: &SeriesControl) -> Result<PathTrace> {
    trace_gamma_with(q, t_max, TraceOptions { trace_tol, ..TraceOptions::default() }, ctrl)
}

/// Trace `γ_q` with explicit options.
pub fn trace_gamma_with(
    q: QParam,
    t_max: f64,
    opts: TraceOptions,
    ctrl: &SeriesControl,
) -> Result<PathTrace> {
    let qv = q.value();
    if qv <= 0.0 {
        return Err(Error::Domain("tracing requires q > 0; at q = 0 the curve is the real line".into()));
    }
    if !(t_max > 0.0) {
        return Err(Error::InvalidParameter(format!("t_max = {t_max} must be positive")));
    }

    let g = |w: Complex64| -> Result<Complex64> { Ok(qseries::g_series(w, qv, ctrl)?.0) };
    let gp = |w: Complex64| -> Result<Complex64> { Ok(qseries::g_prime_series(w, qv, ctrl)?.0) };

    // First critical point, if it matters before t_max.
    let mut bound = 4.0;
    let d_q = loop {
        match real_critical_points(q, bound, ctrl) {
            Ok(roots) => break Some(roots[0]),
            Err(Error::NoneFound { .. }) => {
                let g_at_bound = g(Complex64::new(bound, 0.0))?.re;
                if g_at_bound >= t_max || bound >= opts.escape_radius {
                    break None;
                }
                bound *= 2.0;
            }
            Err(e) => return Err(e),
        }
    };

    let mut trace = PathTrace {
        parameters: Vec::new(),
        points: Vec::new(),
        residuals: Vec::new(),
        critical_points: Vec::new(),
    };

    let t_star = match d_q {
        Some(d) => g(Complex64::new(d, 0.0))?.re,
        None => f64::INFINITY,
    };

    // Real segment: γ(t) = g⁻¹(t) on [0, min(d_q, g⁻¹(t_max))].
    let x_hi = if t_max >= t_star {
        d_q.expect("t_star finite implies d_q present")
    } else {
        solve_real_increasing(&g, d_q.unwrap_or(opts.escape_radius), t_max)?
    };
    let n_real = 400;
    for i in 0..=n_real {
        let x = x_hi * i as f64 / n_real as f64;
        let w = Complex64::new(x, 0.0);
        let t = g(w)?.re;
        trace.parameters.push(t);
        trace.points.push(w);
        trace.residuals.push(0.0);
    }

    if t_max <= t_star {
        return Ok(trace);
    }

    // Corner at d_q, then continuation in the fourth quadrant.
    let d = d_q.expect("reaching past t_star requires d_q");
    let corner = Complex64::new(d, 0.0);
    let (mut t, mut u, mut u_prev) =
        hop_branch(corner, t_star, 0.0, qv, q, t_max, opts.trace_tol, ctrl, &mut trace)?;
    if t >= t_max {
        return Ok(trace);
    }

    let mut ds = opts.base_step * 0.1;
    loop {
        if t >= t_max - 1e-12 || u.norm() > opts.escape_radius {
            return Ok(trace);
        }
        if trace.points.len() > opts.max_points {
            return Err(Error::Stall(format!("point budget exhausted at t = {t}")));
        }
        let deriv = gp(u)?;
        if deriv.norm() < CRITICAL_APPROACH {
            if let Some((c, t_c)) = resolve_critical_ahead(u, t, qv, q, opts.trace_tol, ctrl)? {
                if t_c >= t_max {
                    // the critical point lies beyond the requested range;
                    // keep stepping toward t_max below
                } else {
                    let heading = (u - u_prev).arg();
                    let (nt, nu, nprev) =
                        hop_branch(c, t_c, heading, qv, q, t_max, opts.trace_tol, ctrl, &mut trace)?;
                    t = nt;
                    u = nu;
                    u_prev = nprev;
                    ds = opts.base_step * 0.1;
                    continue;
                }
            }
        }
        let dt = (ds * deriv.norm()).min(t_max - t);
        if dt <= 1e-13 * (1.0 + t) {
            return Err(Error::Stall(format!("step size collapsed at t = {t}")));
        }
        let predicted = u + deriv.inv() * dt;
        match newton_on_level(predicted, t + dt, qv, opts.trace_tol * 1e-3, ctrl) {
            Ok((v, resid)) if (v - predicted).norm() <= 0.3 * ds * (1.0 + u.norm()) + 1e-12 => {
                t += dt;
                u_prev = u;
                u = v;
                trace.parameters.push(t);
                trace.points.push(u);
                trace.residuals.push(resid);
                ds = (ds * 1.4).min(opts.base_step * (1.0 + u.norm()));
            }
            _ => {
                ds *= 0.5;
                if ds < 1e-12 {
                    return Err(Error::Stall(format!("corrector rejected every step at t = {t}")));
                }
            }
        }
    }
}

/// Solve `g(x) = t` for real x in `[0, hi]` where g is increasing.
fn solve_real_increasing<G>(g: &G, hi: f64, t: f64) -> Result<f64>
where
    G: Fn(Complex64) -> Result<Complex64>,
{
    let mut lo = 0.0f64;
    let mut hi = hi;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(Complex64::new(mid, 0.0))?.re < t {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn newton_on_level(
    start: Complex64,
    t: f64,
    qv: f64,
    tol: f64,
    ctrl: &SeriesControl,
) -> Result<(Complex64, f64)> {
    let mut u = start;
    for _ in 0..30 {
        let f = qseries::g_series(u, qv, ctrl)?.0 - t;
        if f.norm() <= tol {
            return Ok((u, f.norm()));
        }
        let d = qseries::g_prime_series(u, qv, ctrl)?.0;
        if d.norm() < 1e-14 {
            return Err(Error::NoConvergence);
        }
        u -= f / d;
        if !u.is_finite() {
            return Err(Error::NoConvergence);
        }
    }
    Err(Error::NoConvergence)
}

/// Try to pin down a critical point near `u` whose (real) critical value lies
/// ahead on the traced ray.
fn resolve_critical_ahead(
    u: Complex64,
    t: f64,
    qv: f64,
    q: QParam,
    trace_tol: f64,
    ctrl: &SeriesControl,
) -> Result<Option<(Complex64, f64)>> {
    let mut c = u;
    let mut converged = false;
    for _ in 0..50 {
        let d1 = qseries::g_prime_series(c, qv, ctrl)?.0;
        if d1.norm() <= 1e-12 {
            converged = true;
            break;
        }
        let d2 = g_q_derivative(2, c, q, ctrl)?;
        if d2.norm() < 1e-14 {
            break;
        }
        c -= d1 / d2;
        if !c.is_finite() {
            break;
        }
    }
    if !converged || (c - u).norm() > 0.5 * (1.0 + u.norm()) {
        return Ok(None);
    }
    let gc = qseries::g_series(c, qv, ctrl)?.0;
    if gc.im.abs() > 0.5 * trace_tol || gc.re <= t {
        return Ok(None);
    }
    Ok(Some((c, gc.re)))
}

/// Emit the corner point and step onto the branch chosen by the
/// first-to-the-right rule. Returns the new `(t, u, u_prev)` state.
#[allow(clippy::too_many_arguments)]
fn hop_branch(
    c: Complex64,
    t_c: f64,
    heading: f64,
    qv: f64,
    q: QParam,
    t_max: f64,
    trace_tol: f64,
    ctrl: &SeriesControl,
    trace: &mut PathTrace,
) -> Result<(f64, Complex64, Complex64)> {
    let corner_residual = (qseries::g_series(c, qv, ctrl)?.0 - t_c).norm();
    trace.parameters.push(t_c);
    trace.points.push(c);
    trace.residuals.push(corner_residual);
    trace.critical_points.push(c);

    if t_c >= t_max {
        return Ok((t_c, c, c));
    }

    // local model g(w) ≈ t_c + a (w - c)^m
    let (m, a) = local_multiplicity(c, q, ctrl)?;
    let direction = first_right_direction(heading, a, m);
    let radius = 1e-3 * (1.0 + c.norm());
    let dt = (a.norm() * radius.powi(m as i32)).min(0.5 * (t_max - t_c));
    let start = c + Complex64::from_polar(radius, direction);
    let (u, resid) = newton_on_level(start, t_c + dt, qv, trace_tol * 1e-3, ctrl)?;
    let t = t_c + dt;
    trace.parameters.push(t);
    trace.points.push(u);
    trace.residuals.push(resid);
    Ok((t, u, c))
}

/// Order m of the zero of `g - g(c)` at a critical point c and the leading
/// Taylor coefficient `a = g⁽ᵐ⁾(c)/m!`.
fn local_multiplicity(c: Complex64, q: QParam, ctrl: &SeriesControl) -> Result<(u32, Complex64)> {
    let mut factorial = 1.0;
    for m in 2..=MAX_MULTIPLICITY {
        factorial *= m as f64;
        let d = g_q_derivative(m, c, q, ctrl)?;
        if d.norm() > 1e-7 {
            return Ok((m, d / factorial));
        }
    }
    Err(Error::Stall(format!("unresolved branch structure at critical point {c}")))
}

/// Among the m outgoing branch tangents, the one with the smallest positive
/// clockwise angle from the incoming heading.
fn first_right_direction(heading: f64, a: Complex64, m: u32) -> f64 {
    let base = -a.arg();
    let mut best = (f64::INFINITY, 0.0);
    for i in 0..m {
        let theta = (base + 2.0 * PI * i as f64) / m as f64;
        let mut clockwise = (heading - theta).rem_euclid(2.0 * PI);
        if clockwise < 1e-6 {
            clockwise = 2.0 * PI;
        }
        if clockwise < best.0 {
            best = (clockwise, theta);
        }
    }
    best.1
}

/// A closed polyline contour (first vertex equals the last).
#[derive(Clone, Debug)]
pub struct Contour {
    vertices: Vec<Complex64>,
}

impl Contour {
    /// Build from a vertex list, closing it if needed and dropping duplicate
    /// consecutive points.
    pub fn new(points: Vec<Complex64>) -> Result<Self> {
        let mut vertices: Vec<Complex64> = Vec::with_capacity(points.len() + 1);
        for p in points {
            if vertices.last().map_or(true, |l| (l - p).norm() > 0.0) {
                vertices.push(p);
            }
        }
        if vertices.len() < 3 {
            return Err(Error::InvalidParameter("a contour needs at least three distinct vertices".into()));
        }
        if (vertices[0] - vertices[vertices.len() - 1]).norm() > 0.0 {
            vertices.push(vertices[0]);
        }
        Ok(Self { vertices })
    }

    /// Counterclockwise circle.
    pub fn circle(center: Complex64, radius: f64, n: usize) -> Result<Self> {
        let pts = (0..n)
            .map(|i| center + Complex64::from_polar(radius, 2.0 * PI * i as f64 / n as f64))
            .collect();
        Self::new(pts)
    }

    /// Closed vertex list, `vertices[0] == vertices[len-1]`.
    pub fn vertices(&self) -> &[Complex64] {
        &self.vertices
    }

    /// Pairwise check that no two non-adjacent edges intersect.
    pub fn is_simple(&self) -> bool {
        let n = self.vertices.len() - 1; // edges
        for i in 0..n {
            for j in (i + 1)..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                if adjacent {
                    continue;
                }
                if segments_intersect(
                    self.vertices[i],
                    self.vertices[i + 1],
                    self.vertices[j],
                    self.vertices[j + 1],
                ) {
                    return false;
                }
            }
        }
        true
    }
}

fn orient(a: Complex64, b: Complex64, c: Complex64) -> f64 {
    (b.re - a.re) * (c.im - a.im) - (b.im - a.im) * (c.re - a.re)
}

fn segments_intersect(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

/// Number of solutions of `g_q(w) = target` enclosed by the contour, via the
/// winding number of `g_q(·) - target` with adaptive edge refinement keeping
/// every argument increment below π/2.
pub fn count_zeros_contour(
    q: QParam,
    contour: &Contour,
    target: Complex64,
    ctrl: &SeriesControl,
) -> Result<i64> {
    let qv = q.value();
    let h = |w: Complex64| -> Result<Complex64> {
        let v = qseries::g_series(w, qv, ctrl)?.0 - target;
        if v.norm() < 1e-8 {
            return Err(Error::OnContourZero);
        }
        Ok(v)
    };
    let verts = contour.vertices();
    let mut total = 0.0;
    let mut h_prev = h(verts[0])?;
    for i in 1..verts.len() {
        let h_next = h(verts[i])?;
        total += arg_increment(&h, verts[i - 1], verts[i], h_prev, h_next, 0)?;
        h_prev = h_next;
    }
    let winding = total / (2.0 * PI);
    let rounded = winding.round();
    if (winding - rounded).abs() > 1e-6 {
        return Err(Error::NonIntegerWinding(winding));
    }
    Ok(rounded as i64)
}

fn arg_increment<H>(
    h: &H,
    wa: Complex64,
    wb: Complex64,
    ha: Complex64,
    hb: Complex64,
    depth: u32,
) -> Result<f64>
where
    H: Fn(Complex64) -> Result<Complex64>,
{
    let delta = (hb / ha).arg();
    if delta.abs() < PI / 2.0 {
        return Ok(delta);
    }
    if depth >= 36 {
        return Err(Error::OnContourZero);
    }
    let mid = (wa + wb) * 0.5;
    let hm = h(mid)?;
    Ok(arg_increment(h, wa, mid, ha, hm, depth + 1)?
        + arg_increment(h, mid, wb, hm, hb, depth + 1)?)
}

/// `∂X_q` assembled from a trace, plus the data needed to sample targets.
#[derive(Clone, Debug)]
pub struct XqRegion {
    pub contour: Contour,
    /// Smallest `|g_q|` over the closing arc; sampled targets must stay below it.
    pub arc_min_abs_g: f64,
    /// Parameter value at the end of the trace.
    pub t_end: f64,
}

/// Close `γ_q ∪ (-conj γ_q)` with a circular arc at the trace end radius,
/// oriented counterclockwise around `X_q`.
pub fn build_xq_contour(
    q: QParam,
    trace: &PathTrace,
    arc_points: usize,
    ctrl: &SeriesControl,
) -> Result<XqRegion> {
    if trace.points.len() < 8 {
        return Err(Error::InvalidParameter("trace too short to bound a region".into()));
    }
    let right = &trace.points;
    let left = trace.mirrored_points();
    let end = *right.last().expect("nonempty trace");
    if end.im >= 0.0 {
        return Err(Error::InvalidParameter(
            "trace never left the real axis; X_q needs a longer trace (raise t_max)".into(),
        ));
    }
    let radius = end.norm();
    let mirror_end = -end.conj();
    let a0 = mirror_end.arg(); // in (-π, -π/2]
    let a1 = end.arg(); // in [-π/2, 0)

    let mut vertices = Vec::with_capacity(2 * right.len() + arc_points + 2);
    vertices.extend_from_slice(&left);
    let mut arc_min = f64::INFINITY;
    for i in 0..=arc_points {
        let ang = a0 + (a1 - a0) * i as f64 / arc_points as f64;
        let w = Complex64::from_polar(radius, ang);
        arc_min = arc_min.min(qseries::g_series(w, q.value(), ctrl)?.0.norm());
        vertices.push(w);
    }
    vertices.extend(right.iter().rev());
    let contour = Contour::new(vertices)?;
    Ok(XqRegion { contour, arc_min_abs_g: arc_min, t_end: *trace.parameters.last().expect("nonempty") })
}

/// One sampled target whose preimage count differed from 1.
#[derive(Clone, Copy, Debug)]
pub struct InjectivityViolation {
    pub target: Complex64,
    pub count: i64,
}

/// Outcome of the sampled injectivity check.
#[derive(Clone, Debug)]
pub struct InjectivityReport {
    pub samples: usize,
    pub max_target_abs: f64,
    /// Targets whose preimage count came back as exactly 1.
    pub unit_count: usize,
    pub violations: Vec<InjectivityViolation>,
}

impl InjectivityReport {
    pub fn all_unit(&self) -> bool {
        self.violations.is_empty() && self.unit_count == self.samples
    }
}

/// Draw `samples` targets in `C⁻` with `|v| < max_target_abs` (bounded away
/// from the real axis) and count their preimages inside the contour.
pub fn injectivity_witness(
    q: QParam,
    contour: &Contour,
    samples: usize,
    max_target_abs: f64,
    seed: u64,
    ctrl: &SeriesControl,
) -> Result<InjectivityReport> {
    if !(max_target_abs > 0.0) {
        return Err(Error::InvalidParameter("target magnitude bound must be positive".into()));
    }
    let mut rng = StdRng::seed_from_u64(seed);
    let targets: Vec<Complex64> = (0..samples)
        .map(|_| {
            let r = rng.random_range(0.05..0.85) * max_target_abs;
            let ang = rng.random_range(-PI + 0.1..-0.1);
            Complex64::from_polar(r, ang)
        })
        .collect();

    #[cfg(feature = "parallel")]
    let counts: Vec<Result<i64>> = targets
        .par_iter()
        .map(|&v| count_zeros_contour(q, contour, v, ctrl))
        .collect();
    #[cfg(not(feature = "parallel"))]
    let counts: Vec<Result<i64>> = targets
        .iter()
        .map(|&v| count_zeros_contour(q, contour, v, ctrl))
        .collect();

    let mut unit_count = 0;
    let mut violations = Vec::new();
    for (v, c) in targets.iter().zip(counts) {
        match c? {
            1 => unit_count += 1,
            n => violations.push(InjectivityViolation { target: *v, count: n }),
        }
    }
    Ok(InjectivityReport { samples, max_target_abs, unit_count, violations })
}
