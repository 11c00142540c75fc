//! Free-infinite-divisibility certification.
//!
//! The criterion being witnessed: the Voiculescu transform extends to an
//! analytic map `φ: C⁺ → C⁻`. Each certificate evaluates `Im φ` on a grid in
//! the upper half-plane, records every node where it exceeds the tolerance
//! and every node where the inversion failed, and passes only when both lists
//! are empty-equivalent (no failures, max Im φ within tolerance).
//!
//! Failures are data, not exceptions: a certificate with recorded failures is
//! a failed certification, keeping sweeps total. Grid nodes are independent;
//! with the `parallel` feature they are evaluated by rayon and reduced in
//! grid order, so parallel and sequential runs produce identical
//! certificates.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::transforms::{voiculescu_phi_counted, InversionPolicy};
use crate::{Error, QParam, Result, SeriesControl};

use std::time::Instant;

/// Spacing of the grid's imaginary coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImSpacing {
    Linear,
    Logarithmic,
}

/// A rectangular evaluation grid in `C⁺`.
///
/// Violations of `Im φ ≤ 0`, if any existed, would concentrate near the real
/// axis, so the default spacing is logarithmic in the imaginary direction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub re_range: [f64; 2],
    pub im_range: [f64; 2],
    pub nx: usize,
    pub ny: usize,
    pub im_spacing: ImSpacing,
}

/// Inversion conditioning degrades toward the real axis; grids must stay
/// above this height.
pub const GRID_IM_FLOOR: f64 = 1e-6;

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.nx == 0 || self.ny == 0 {
            return Err(Error::InvalidParameter("grid needs nx ≥ 1 and ny ≥ 1".into()));
        }
        if !(self.re_range[0] <= self.re_range[1]) || !(self.im_range[0] <= self.im_range[1]) {
            return Err(Error::InvalidParameter("grid ranges must be ordered".into()));
        }
        if self.im_range[0] < GRID_IM_FLOOR {
            return Err(Error::InvalidParameter(format!(
                "grid im_min {} below the {GRID_IM_FLOOR} floor",
                self.im_range[0]
            )));
        }
        Ok(())
    }

    /// Grid nodes in row-major order: the imaginary coordinate varies in the
    /// outer loop, the real coordinate in the inner loop.
    pub fn nodes(&self) -> Vec<Complex64> {
        let coord = |range: [f64; 2], n: usize, i: usize, log: bool| -> f64 {
            if n == 1 {
                return range[0];
            }
            let s = i as f64 / (n - 1) as f64;
            if log {
                (range[0].ln() + s * (range[1].ln() - range[0].ln())).exp()
            } else {
                range[0] + s * (range[1] - range[0])
            }
        };
        let mut nodes = Vec::with_capacity(self.nx * self.ny);
        for j in 0..self.ny {
            let im = coord(self.im_range, self.ny, j, self.im_spacing == ImSpacing::Logarithmic);
            for i in 0..self.nx {
                nodes.push(Complex64::new(coord(self.re_range, self.nx, i, false), im));
            }
        }
        nodes
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            re_range: [-10.0, 10.0],
            im_range: [1e-3, 10.0],
            nx: 200,
            ny: 100,
            im_spacing: ImSpacing::Logarithmic,
        }
    }
}

/// A grid node where `Im φ` exceeded the tolerance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub z_re: f64,
    pub z_im: f64,
    pub phi_re: f64,
    pub phi_im: f64,
}

/// A grid node where the inversion did not converge.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InversionFailure {
    pub z_re: f64,
    pub z_im: f64,
}

/// Machine-checkable certification report for one q.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidCertificate {
    pub q: f64,
    pub grid: GridSpec,
    pub max_im_phi: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub violations: Vec<Violation>,
    pub inversion_failures: Vec<InversionFailure>,
    pub series_terms_max: usize,
    pub runtime_ms: u64,
}

impl FidCertificate {
    /// Single-document JSON rendering.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }
}

fn eval_node(
    z: Complex64,
    q: QParam,
    policy: &InversionPolicy,
    ctrl: &SeriesControl,
) -> (Result<Complex64>, usize) {
    let mut terms = 0;
    (voiculescu_phi_counted(z, q, policy, ctrl, &mut terms), terms)
}

fn assemble(
    q: QParam,
    grid: &GridSpec,
    tolerance: f64,
    nodes: Vec<Complex64>,
    outcomes: Vec<(Result<Complex64>, usize)>,
    started: Instant,
) -> FidCertificate {
    let mut max_im_phi = f64::NEG_INFINITY;
    let mut violations = Vec::new();
    let mut inversion_failures = Vec::new();
    let mut series_terms_max = 0;
    for (z, (outcome, terms)) in nodes.into_iter().zip(outcomes) {
        series_terms_max = series_terms_max.max(terms);
        match outcome {
            Ok(phi) => {
                max_im_phi = max_im_phi.max(phi.im);
                if phi.im > tolerance {
                    violations.push(Violation { z_re: z.re, z_im: z.im, phi_re: phi.re, phi_im: phi.im });
                }
            }
            Err(_) => inversion_failures.push(InversionFailure { z_re: z.re, z_im: z.im }),
        }
    }
    let pass = inversion_failures.is_empty() && max_im_phi <= tolerance;
    FidCertificate {
        q: q.value(),
        grid: *grid,
        max_im_phi,
        tolerance,
        pass,
        violations,
        inversion_failures,
        series_terms_max,
        runtime_ms: started.elapsed().as_millis() as u64,
    }
}

/// Certify `Im φ ≤ tolerance` over the grid. Uses data-parallel node
/// evaluation when the `parallel` feature is enabled.
pub fn certify_fid(
    q: QParam,
    grid: &GridSpec,
    tolerance: f64,
    policy: &InversionPolicy,
    ctrl: &SeriesControl,
) -> Result<FidCertificate> {
    grid.validate()?;
    let started = Instant::now();
    let nodes = grid.nodes();
    #[cfg(feature = "parallel")]
    let outcomes: Vec<_> = nodes.par_iter().map(|&z| eval_node(z, q, policy, ctrl)).collect();
    #[cfg(not(feature = "parallel"))]
    let outcomes: Vec<_> = nodes.iter().map(|&z| eval_node(z, q, policy, ctrl)).collect();
    Ok(assemble(q, grid, tolerance, nodes, outcomes, started))
}

/// Sequential evaluation path, always available; used as the fallback when
/// the `parallel` feature is off and by the benchmark suite for comparison.
pub fn certify_fid_sequential(
    q: QParam,
    grid: &GridSpec,
    tolerance: f64,
    policy: &InversionPolicy,
    ctrl: &SeriesControl,
) -> Result<FidCertificate> {
    grid.validate()?;
    let started = Instant::now();
    let nodes = grid.nodes();
    let outcomes: Vec<_> = nodes.iter().map(|&z| eval_node(z, q, policy, ctrl)).collect();
    Ok(assemble(q, grid, tolerance, nodes, outcomes, started))
}

/// One certificate per q, computed independently.
pub fn sweep(
    q_values: &[QParam],
    grid: &GridSpec,
    tolerance: f64,
    policy: &InversionPolicy,
    ctrl: &SeriesControl,
) -> Result<Vec<FidCertificate>> {
    q_values.iter().map(|&q| certify_fid(q, grid, tolerance, policy, ctrl)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn qp(q: f64) -> QParam {
        QParam::new(q).unwrap()
    }

    fn small_grid() -> GridSpec {
        GridSpec {
            re_range: [-4.0, 4.0],
            im_range: [1e-3, 5.0],
            nx: 40,
            ny: 20,
            im_spacing: ImSpacing::Logarithmic,
        }
    }

    #[test]
    fn grid_validation_enforces_the_floor() {
        let mut g = small_grid();
        g.im_range[0] = 1e-9;
        assert!(g.validate().is_err());
        g.im_range[0] = 1e-6;
        assert!(g.validate().is_ok());
        g.nx = 0;
        assert!(g.validate().is_err());
    }

    #[test]
    fn node_order_is_row_major() {
        let g = GridSpec {
            re_range: [0.0, 1.0],
            im_range: [1.0, 2.0],
            nx: 2,
            ny: 2,
            im_spacing: ImSpacing::Linear,
        };
        let nodes = g.nodes();
        assert_eq!(nodes.len(), 4);
        assert_eq!(nodes[0], Complex64::new(0.0, 1.0));
        assert_eq!(nodes[1], Complex64::new(1.0, 1.0));
        assert_eq!(nodes[2], Complex64::new(0.0, 2.0));
        assert_eq!(nodes[3], Complex64::new(1.0, 2.0));
    }

    #[test]
    fn exact_semicircle_case_passes() {
        let cert = certify_fid(
            qp(0.0),
            &small_grid(),
            1e-9,
            &InversionPolicy::default(),
            &SeriesControl::default(),
        )
        .unwrap();
        assert!(cert.pass);
        assert!(cert.violations.is_empty());
        assert!(cert.inversion_failures.is_empty());
        // φ(z) = 1/z exactly, so max Im φ = max of -Im z/|z|² < 0
        assert!(cert.max_im_phi < 0.0);
    }

    #[test]
    fn impossible_tolerance_fails_cleanly() {
        let cert = certify_fid(
            qp(0.5),
            &small_grid(),
            -1.0,
            &InversionPolicy::default(),
            &SeriesControl::default(),
        )
        .unwrap();
        assert!(!cert.pass);
        assert!(!cert.violations.is_empty());
        assert!(cert.max_im_phi.is_finite());
    }

    #[test]
    fn parallel_and_sequential_agree_bit_for_bit() {
        let grid = small_grid();
        let policy = InversionPolicy::default();
        let ctrl = SeriesControl::default();
        let mut a = certify_fid(qp(0.6), &grid, 1e-9, &policy, &ctrl).unwrap();
        let mut b = certify_fid_sequential(qp(0.6), &grid, 1e-9, &policy, &ctrl).unwrap();
        a.runtime_ms = 0;
        b.runtime_ms = 0;
        assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn determinism_modulo_runtime() {
        let grid = small_grid();
        let policy = InversionPolicy::default();
        let ctrl = SeriesControl::default();
        let mut a = certify_fid(qp(0.35), &grid, 1e-9, &policy, &ctrl).unwrap();
        let mut b = certify_fid(qp(0.35), &grid, 1e-9, &policy, &ctrl).unwrap();
        a.runtime_ms = 0;
        b.runtime_ms = 0;
        assert_eq!(a, b);
    }

    #[test]
    fn refinement_is_stable() {
        let policy = InversionPolicy::default();
        let ctrl = SeriesControl::default();
        let coarse = certify_fid(qp(0.5), &small_grid(), 1e-9, &policy, &ctrl).unwrap();
        assert!(coarse.pass);
        let mut fine_grid = small_grid();
        fine_grid.nx *= 2;
        fine_grid.ny *= 2;
        let fine = certify_fid(qp(0.5), &fine_grid, 1e-9, &policy, &ctrl).unwrap();
        assert!(fine.max_im_phi <= 1e-9 + policy.newton_tol);
    }

    #[test]
    fn tightened_newton_tolerance_barely_moves_phi() {
        let ctrl = SeriesControl::default();
        let loose = InversionPolicy::default();
        let tight = InversionPolicy { newton_tol: loose.newton_tol / 100.0, ..loose };
        let nodes = small_grid().nodes();
        let mut rng = StdRng::seed_from_u64(2024);
        for _ in 0..20 {
            let z = nodes[rng.random_range(0..nodes.len())];
            let a = crate::transforms::voiculescu_phi(z, qp(0.5), &loose, &ctrl).unwrap();
            let b = crate::transforms::voiculescu_phi(z, qp(0.5), &tight, &ctrl).unwrap();
            assert!((a - b).norm() <= 10.0 * loose.newton_tol, "z={z}");
        }
    }

    #[test]
    fn sweep_is_one_certificate_per_q() {
        let grid = GridSpec { nx: 10, ny: 5, ..small_grid() };
        let policy = InversionPolicy::default();
        let ctrl = SeriesControl::default();
        let qs: Vec<QParam> = [0.1, 0.5].iter().map(|&q| qp(q)).collect();
        let certs = sweep(&qs, &grid, 1e-9, &policy, &ctrl).unwrap();
        assert_eq!(certs.len(), 2);
        assert!(certs.iter().all(|c| c.pass));
        let single = sweep(&[qp(0.0)], &grid, 1e-9, &policy, &ctrl).unwrap();
        assert_eq!(single.len(), 1);
        assert!(single[0].pass);
        assert!(sweep(&[], &grid, 1e-9, &policy, &ctrl).unwrap().is_empty());
    }

    #[test]
    fn certificate_json_schema() {
        let cert = certify_fid(
            qp(0.0),
            &GridSpec { nx: 2, ny: 2, ..small_grid() },
            1e-9,
            &InversionPolicy::default(),
            &SeriesControl::default(),
        )
        .unwrap();
        let json = cert.to_json();
        let value: serde_json::Value = serde_json::from_str(&json).unwrap();
        for key in [
            "q",
            "grid",
            "max_im_phi",
            "tolerance",
            "pass",
            "violations",
            "inversion_failures",
            "series_terms_max",
            "runtime_ms",
        ] {
            assert!(value.get(key).is_some(), "missing key {key}");
        }
        assert_eq!(value["grid"]["im_spacing"], "logarithmic");
    }
}
