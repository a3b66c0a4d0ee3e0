//! Riemann-Liouville integrals of nodal basis functions along axis-aligned
//! segments.
//!
//! For a left integral of order `gamma` evaluated at `t_j`, the contribution
//! of an upstream interval `[lo, hi]` is written as the difference of two
//! integrals anchored at the singular point,
//!
//! ```text
//! int_lo^hi (t_j - xi)^(gamma-1) l(xi) dxi = G(lo) - G(hi),
//! G(s) = ((t_j - s)/2)^gamma * int_{-1}^{1} (1-eta)^(gamma-1) l((t_j+s)/2 + (t_j-s)/2 eta) deta,
//! ```
//!
//! and each `G` is evaluated with a Gauss-Jacobi rule. The host interval
//! ending at `t_j` needs `G(lo)` only. Right integrals mirror this with the
//! weight `(1+eta)^(gamma-1)`. Basis functions are evaluated through their
//! polynomial extension, since the mapped nodes of `G` leave element `m`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::{Axis, Mesh, Side};
use crate::quadrature::{cached_gauss_jacobi, gamma, JacobiRule};
use crate::reference::{modal_values, ReferenceElement};

/// Gauss-Jacobi points per anchored integral for basis degree `n`.
pub fn default_points(degree: usize) -> usize {
    degree + 3
}

/// Reusable evaluator for one fractional order.
#[derive(Debug, Clone)]
pub struct SegmentIntegrator {
    gamma: f64,
    inv_gamma_fn: f64,
    left: Arc<JacobiRule>,
    right: Arc<JacobiRule>,
}

/// Per-thread scratch space for [`SegmentIntegrator::integrate`].
#[derive(Debug, Clone)]
pub struct Scratch {
    modal: Vec<f64>,
    acc: Vec<f64>,
}

impl Scratch {
    pub fn new(np: usize) -> Self {
        Scratch {
            modal: vec![0.0; np],
            acc: vec![0.0; np],
        }
    }
}

impl SegmentIntegrator {
    pub fn new(gamma_order: f64, points: usize) -> Result<Self> {
        if !(gamma_order > 0.0 && gamma_order <= 1.0) {
            return Err(Error::InvalidGamma(gamma_order));
        }
        Ok(SegmentIntegrator {
            gamma: gamma_order,
            inv_gamma_fn: 1.0 / gamma(gamma_order),
            left: cached_gauss_jacobi(points, gamma_order - 1.0, 0.0)?,
            right: cached_gauss_jacobi(points, 0.0, gamma_order - 1.0)?,
        })
    }

    pub fn order(&self) -> f64 {
        self.gamma
    }

    pub(crate) fn inv_gamma_fn(&self) -> f64 {
        self.inv_gamma_fn
    }

    /// Gauss-Jacobi rule whose singular endpoint maps to the target.
    pub(crate) fn rule(&self, side: Side) -> &JacobiRule {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }

    // acc += scale * sum_l w_l * modal(point(eta_l))
    #[allow(clippy::too_many_arguments)]
    fn anchored(
        &self,
        reference: &ReferenceElement,
        mesh: &Mesh,
        m: usize,
        target: f64,
        end: f64,
        across: f64,
        axis: Axis,
        side: Side,
        scale: f64,
        scratch: &mut Scratch,
    ) {
        let half = 0.5 * (end - target).abs();
        let mid = 0.5 * (end + target);
        // the singular endpoint of the weight maps to the target: eta = 1 on
        // the left, eta = -1 on the right
        let rule = self.rule(side);
        let factor = scale * half.powf(self.gamma);
        for (&eta, &w) in rule.nodes().iter().zip(rule.weights()) {
            let t = mid + half * eta;
            let [r, s] = mesh.to_reference(m, axis.join(t, across));
            modal_values(reference.degree, r, s, &mut scratch.modal);
            let c = factor * w;
            for (a, &v) in scratch.acc.iter_mut().zip(&scratch.modal) {
                *a += c * v;
            }
        }
    }

    /// Fractional integral of every basis function of element `m` over
    /// `[lo, hi]`, seen from the point `target` on the line `across`.
    /// `singular` marks the host interval (the one ending at the target).
    /// Writes `Np` values into `out`.
    #[allow(clippy::too_many_arguments)]
    pub fn integrate(
        &self,
        reference: &ReferenceElement,
        mesh: &Mesh,
        m: usize,
        (lo, hi): (f64, f64),
        target: f64,
        across: f64,
        axis: Axis,
        side: Side,
        singular: bool,
        scratch: &mut Scratch,
        out: &mut [f64],
    ) {
        scratch.acc.iter_mut().for_each(|a| *a = 0.0);
        let (far, near) = match side {
            Side::Left => (lo, hi),
            Side::Right => (hi, lo),
        };
        self.anchored(reference, mesh, m, target, far, across, axis, side, 1.0, scratch);
        if !singular {
            self.anchored(reference, mesh, m, target, near, across, axis, side, -1.0, scratch);
        }
        reference.modal_to_nodal(&scratch.acc, out);
        for o in out.iter_mut() {
            *o *= self.inv_gamma_fn;
        }
    }
}

/// `(1/Gamma(gamma)) int_lo^hi |t_j - xi|^(gamma-1) l_i^m(xi) dxi` for every
/// basis function `l_i` of element `m`, along `axis` through `target`.
///
/// For `Side::Left` the interval must lie at or below the target coordinate,
/// for `Side::Right` at or above it. An interval touching the target is
/// treated as the singular host interval.
#[allow(clippy::too_many_arguments)]
pub fn frac_segment_integral(
    reference: &ReferenceElement,
    mesh: &Mesh,
    m: usize,
    [lo, hi]: [f64; 2],
    target: [f64; 2],
    gamma_order: f64,
    axis: Axis,
    side: Side,
) -> Result<Vec<f64>> {
    let integrator = SegmentIntegrator::new(gamma_order, default_points(reference.degree))?;
    let (t, across) = axis.split(target);
    let tol = 1e3 * mesh.eps();
    let outside = || Error::IntervalOutsideElement { element: m, lo, hi };
    if m >= mesh.num_elements() || !(lo < hi) {
        return Err(outside());
    }
    let (clo, chi) = mesh.cross_section(m, axis, across).ok_or_else(outside)?;
    if lo < clo - tol || hi > chi + tol {
        return Err(outside());
    }
    let singular = match side {
        Side::Left if hi <= t + tol => (t - hi).abs() <= tol,
        Side::Right if lo >= t - tol => (lo - t).abs() <= tol,
        _ => return Err(outside()),
    };
    let mut scratch = Scratch::new(reference.np);
    let mut out = vec![0.0; reference.np];
    integrator.integrate(
        reference,
        mesh,
        m,
        (lo, hi),
        t,
        across,
        axis,
        side,
        singular,
        &mut scratch,
        &mut out,
    );
    Ok(out)
}
