//! Semidiscrete LDG right-hand side with central fluxes and homogeneous
//! Dirichlet data.
//!
//! ```text
//! p   = grad u - LIFT(n (u- - u^))          u^ = {u} inside, 0 on the boundary
//! M q = (d+ lS + d- rS) p_x,  (e+ lS + e- rS) p_y
//! u_t = div q - LIFT(n . (q- - q^)) + f     q^ = {q} inside, q- on the boundary
//! ```

use std::sync::Arc;

use nalgebra::DMatrix;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{Axis, Mesh, Side};
use crate::reference::ReferenceElement;
use crate::stiffness::{BlockCsr, FracStiffness};

/// Nodal coefficients of a DG field, element-major (`K * Np` values).
#[derive(Debug, Clone, PartialEq)]
pub struct FieldVector {
    values: Vec<f64>,
    np: usize,
}

impl FieldVector {
    pub fn zeros(num_elements: usize, np: usize) -> Self {
        FieldVector {
            values: vec![0.0; num_elements * np],
            np,
        }
    }

    pub fn from_values(values: Vec<f64>, np: usize) -> Result<Self> {
        if np == 0 || values.len() % np != 0 {
            return Err(Error::DimensionMismatch {
                expected: np * (values.len() / np.max(1) + 1),
                got: values.len(),
            });
        }
        Ok(FieldVector { values, np })
    }

    /// Nodal interpolant of `f` on `mesh`.
    pub fn interpolate(mesh: &Mesh, reference: &ReferenceElement, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut out = FieldVector::zeros(mesh.num_elements(), reference.np);
        for k in 0..mesh.num_elements() {
            for (i, &rs) in reference.nodes.iter().enumerate() {
                let [x, y] = mesh.to_physical(k, rs);
                out.values[k * reference.np + i] = f(x, y);
            }
        }
        out
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn np(&self) -> usize {
        self.np
    }

    pub fn num_elements(&self) -> usize {
        self.values.len() / self.np
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn element(&self, k: usize) -> &[f64] {
        &self.values[k * self.np..(k + 1) * self.np]
    }

    /// `self += a * x`
    pub fn axpy(&mut self, a: f64, x: &FieldVector) {
        for (s, &v) in self.values.iter_mut().zip(&x.values) {
            *s += a * v;
        }
    }

    pub fn scale(&mut self, a: f64) {
        self.values.iter_mut().for_each(|v| *v *= a);
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Diffusion coefficients of the left and right operators in x (`d`) and y (`e`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    pub d_plus: f64,
    pub d_minus: f64,
    pub e_plus: f64,
    pub e_minus: f64,
}

impl Coefficients {
    /// Left-sided problem with `d1` in x and `d2` in y.
    pub fn one_sided(d1: f64, d2: f64) -> Self {
        Coefficients {
            d_plus: d1,
            d_minus: 0.0,
            e_plus: d2,
            e_minus: 0.0,
        }
    }

    pub fn two_sided(d_plus: f64, d_minus: f64, e_plus: f64, e_minus: f64) -> Self {
        Coefficients {
            d_plus,
            d_minus,
            e_plus,
            e_minus,
        }
    }

    fn validate(&self) -> Result<()> {
        let all = [self.d_plus, self.d_minus, self.e_plus, self.e_minus];
        if all.iter().all(|c| c.is_finite() && *c >= 0.0) {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "diffusion coefficients must be finite and non-negative, got {all:?}"
            )))
        }
    }

    fn get(&self, axis: Axis, side: Side) -> f64 {
        match (axis, side) {
            (Axis::X, Side::Left) => self.d_plus,
            (Axis::X, Side::Right) => self.d_minus,
            (Axis::Y, Side::Left) => self.e_plus,
            (Axis::Y, Side::Right) => self.e_minus,
        }
    }
}

/// The four fractional stiffness matrices; only those with a nonzero
/// coefficient need to be present.
#[derive(Debug, Clone, Default)]
pub struct FracSet {
    pub x_left: Option<Arc<FracStiffness>>,
    pub x_right: Option<Arc<FracStiffness>>,
    pub y_left: Option<Arc<FracStiffness>>,
    pub y_right: Option<Arc<FracStiffness>>,
}

impl FracSet {
    pub fn get(&self, axis: Axis, side: Side) -> Option<&Arc<FracStiffness>> {
        match (axis, side) {
            (Axis::X, Side::Left) => self.x_left.as_ref(),
            (Axis::X, Side::Right) => self.x_right.as_ref(),
            (Axis::Y, Side::Left) => self.y_left.as_ref(),
            (Axis::Y, Side::Right) => self.y_right.as_ref(),
        }
    }

    fn slot(&mut self, axis: Axis, side: Side) -> &mut Option<Arc<FracStiffness>> {
        match (axis, side) {
            (Axis::X, Side::Left) => &mut self.x_left,
            (Axis::X, Side::Right) => &mut self.x_right,
            (Axis::Y, Side::Left) => &mut self.y_left,
            (Axis::Y, Side::Right) => &mut self.y_right,
        }
    }

    /// Assemble every matrix whose coefficient is nonzero. At order 2 left
    /// and right matrices coincide and the second is shared.
    pub fn assemble(
        mesh: &Mesh,
        reference: &ReferenceElement,
        alpha: f64,
        beta: f64,
        coefficients: &Coefficients,
    ) -> Result<FracSet> {
        let mut set = FracSet::default();
        for (axis, order) in [(Axis::X, alpha), (Axis::Y, beta)] {
            for side in [Side::Left, Side::Right] {
                if coefficients.get(axis, side) == 0.0 {
                    continue;
                }
                let other = match side {
                    Side::Left => Side::Right,
                    Side::Right => Side::Left,
                };
                let shared = (order == 2.0).then(|| set.get(axis, other).cloned()).flatten();
                let m = match shared {
                    Some(m) => m,
                    None => Arc::new(FracStiffness::assemble(mesh, reference, order, axis, side)?),
                };
                *set.slot(axis, side) = Some(m);
            }
        }
        Ok(set)
    }
}

/// Metric factors of one element.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementMetrics {
    pub rx: f64,
    pub ry: f64,
    pub sx: f64,
    pub sy: f64,
    pub jacobian: f64,
    /// Outward unit normal per face.
    pub normals: [[f64; 2]; 3],
    /// Face Jacobian over volume Jacobian, per face.
    pub fscale: [f64; 3],
}

impl ElementMetrics {
    pub fn new(mesh: &Mesh, k: usize) -> Self {
        let g = &mesh.geometry[k];
        ElementMetrics {
            rx: g.rx,
            ry: g.ry,
            sx: g.sx,
            sy: g.sy,
            jacobian: g.jacobian,
            normals: g.normals,
            fscale: g.face_jacobian.map(|sj| sj / g.jacobian),
        }
    }
}

/// Physical mass and stiffness matrices of one element.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalOperators {
    /// `M_ij = (l_i, l_j)`.
    pub mass: DMatrix<f64>,
    /// `(S_x)_ij = (d l_j / dx, l_i)`.
    pub stiffness_x: DMatrix<f64>,
    pub stiffness_y: DMatrix<f64>,
    /// `M^-1 = reference inverse mass / jacobian`.
    pub jacobian: f64,
}

pub fn local_operators(reference: &ReferenceElement, mesh: &Mesh, k: usize) -> LocalOperators {
    let g = &mesh.geometry[k];
    let mass = &reference.mass * g.jacobian;
    let dx = &reference.d_r * g.rx + &reference.d_s * g.sx;
    let dy = &reference.d_r * g.ry + &reference.d_s * g.sy;
    LocalOperators {
        stiffness_x: &mass * dx,
        stiffness_y: &mass * dy,
        mass,
        jacobian: g.jacobian,
    }
}

/// Everything needed to evaluate the semidiscrete operator.
#[derive(Debug, Clone)]
pub struct LdgContext {
    pub mesh: Arc<Mesh>,
    pub reference: Arc<ReferenceElement>,
    pub alpha: f64,
    pub beta: f64,
    pub coefficients: Coefficients,
    pub matrices: FracSet,
    locals: Vec<ElementMetrics>,
    /// `M^{-1} (d+ lS + d- rS)` per axis; `None` when both coefficients vanish.
    flux_ops: [Option<BlockCsr>; 2],
    // row-major copies of the reference operators
    dr: Vec<f64>,
    ds: Vec<f64>,
    lift: Vec<f64>,
    mass: Vec<f64>,
    /// Interior and exterior global node index per face node, `K * 3 * Nfp`.
    vmap_m: Vec<usize>,
    vmap_p: Vec<usize>,
    boundary: Vec<bool>,
}

fn row_major(m: &nalgebra::DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.nrows() * m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
    out
}

// out = A x for a row-major A with x.len() columns
fn matvec(a: &[f64], x: &[f64], out: &mut [f64]) {
    let n = x.len();
    for (i, o) in out.iter_mut().enumerate() {
        *o = a[i * n..(i + 1) * n].iter().zip(x).map(|(a, b)| a * b).sum();
    }
}

impl LdgContext {
    /// Build the context and assemble the fractional matrices it needs.
    pub fn new(
        mesh: Arc<Mesh>,
        reference: Arc<ReferenceElement>,
        alpha: f64,
        beta: f64,
        coefficients: Coefficients,
    ) -> Result<Self> {
        coefficients.validate()?;
        let matrices = FracSet::assemble(&mesh, &reference, alpha, beta, &coefficients)?;
        Self::with_matrices(mesh, reference, alpha, beta, coefficients, matrices)
    }

    /// Build the context around already assembled matrices.
    pub fn with_matrices(
        mesh: Arc<Mesh>,
        reference: Arc<ReferenceElement>,
        alpha: f64,
        beta: f64,
        coefficients: Coefficients,
        matrices: FracSet,
    ) -> Result<Self> {
        coefficients.validate()?;
        let kk = mesh.num_elements();
        let np = reference.np;
        for axis in [Axis::X, Axis::Y] {
            for side in [Side::Left, Side::Right] {
                if coefficients.get(axis, side) == 0.0 {
                    continue;
                }
                let m = matrices.get(axis, side).ok_or(Error::MissingMatrix { axis, side })?;
                if m.num_elements() != kk || m.np() != np {
                    return Err(Error::DimensionMismatch {
                        expected: kk * np,
                        got: m.num_elements() * m.np(),
                    });
                }
            }
        }
        let locals: Vec<ElementMetrics> = (0..kk).map(|k| ElementMetrics::new(&mesh, k)).collect();
        let inv_mass = row_major(&reference.inv_mass);
        let mut flux_ops = [None, None];
        for (slot, axis) in flux_ops.iter_mut().zip([Axis::X, Axis::Y]) {
            let terms: Vec<(&BlockCsr, f64)> = [Side::Left, Side::Right]
                .into_iter()
                .filter(|&side| coefficients.get(axis, side) != 0.0)
                .filter_map(|side| Some((matrices.get(axis, side)?.matrix(), coefficients.get(axis, side))))
                .collect();
            if !terms.is_empty() {
                let scaled = |k: usize| inv_mass.iter().map(|v| v / locals[k].jacobian).collect();
                *slot = Some(BlockCsr::combine(&terms, scaled)?);
            }
        }

        let nfp = reference.nfp;
        let coords: Vec<[f64; 2]> = (0..kk)
            .flat_map(|k| reference.nodes.iter().map(move |&rs| (k, rs)))
            .map(|(k, rs)| mesh.to_physical(k, rs))
            .collect();
        let tol = 1e-9 * mesh.bbox.extent();
        let mut vmap_m = Vec::with_capacity(kk * 3 * nfp);
        let mut vmap_p = Vec::with_capacity(kk * 3 * nfp);
        let mut boundary = Vec::with_capacity(kk * 3);
        for k in 0..kk {
            for f in 0..3 {
                let on_boundary = mesh.is_boundary_face(k, f);
                boundary.push(on_boundary);
                let (nb, nf) = (mesh.elem_to_elem[k][f], mesh.elem_to_face[k][f]);
                for &i in &reference.face_nodes[f] {
                    let gm = k * np + i;
                    vmap_m.push(gm);
                    if on_boundary {
                        vmap_p.push(gm);
                        continue;
                    }
                    let [x, y] = coords[gm];
                    let gp = reference.face_nodes[nf]
                        .iter()
                        .map(|&j| nb * np + j)
                        .find(|&g| (coords[g][0] - x).abs() <= tol && (coords[g][1] - y).abs() <= tol)
                        .ok_or_else(|| Error::InvalidConfig(format!("unmatched face node of element {k} face {f}")))?;
                    vmap_p.push(gp);
                }
            }
        }

        Ok(LdgContext {
            dr: row_major(&reference.d_r),
            ds: row_major(&reference.d_s),
            lift: row_major(&reference.lift),
            mass: row_major(&reference.mass),
            mesh,
            reference,
            alpha,
            beta,
            coefficients,
            matrices,
            locals,
            flux_ops,
            vmap_m,
            vmap_p,
            boundary,
        })
    }

    pub fn np(&self) -> usize {
        self.reference.np
    }

    pub fn len(&self) -> usize {
        self.mesh.num_elements() * self.reference.np
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn metrics(&self) -> &[ElementMetrics] {
        &self.locals
    }

    pub fn zeros(&self) -> FieldVector {
        FieldVector::zeros(self.mesh.num_elements(), self.np())
    }

    pub fn interpolate(&self, f: impl Fn(f64, f64) -> f64) -> FieldVector {
        FieldVector::interpolate(&self.mesh, &self.reference, f)
    }

    fn check(&self, v: &FieldVector) -> Result<()> {
        if v.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: v.len(),
            });
        }
        Ok(())
    }

    /// Elementwise `(d/dx, d/dy)` of `u` without flux terms, then lifted
    /// face terms `flux(k, f, i) = (fx, fy)` subtracted.
    fn grad_minus_lift(
        &self,
        ux: &[f64],
        uy: &[f64],
        flux: impl Fn(usize, usize) -> [f64; 2],
        out_x: &mut [f64],
        out_y: &mut [f64],
        divergence: bool,
    ) {
        let np = self.np();
        let nfp = self.reference.nfp;
        let mut ar = vec![0.0; np];
        let mut as_ = vec![0.0; np];
        let mut br = vec![0.0; np];
        let mut bs = vec![0.0; np];
        let mut fx = vec![0.0; 3 * nfp];
        let mut fy = vec![0.0; 3 * nfp];
        let mut lx = vec![0.0; np];
        let mut ly = vec![0.0; np];
        for (k, lo) in self.locals.iter().enumerate() {
            let range = k * np..(k + 1) * np;
            matvec(&self.dr, &ux[range.clone()], &mut ar);
            matvec(&self.ds, &ux[range.clone()], &mut as_);
            if divergence {
                matvec(&self.dr, &uy[range.clone()], &mut br);
                matvec(&self.ds, &uy[range.clone()], &mut bs);
            }
            for f in 0..3 {
                for i in 0..nfp {
                    let idx = f * nfp + i;
                    let [a, b] = flux(k * 3 + f, k * 3 * nfp + idx);
                    fx[idx] = lo.fscale[f] * a;
                    fy[idx] = lo.fscale[f] * b;
                }
            }
            matvec(&self.lift, &fx, &mut lx);
            let ox = &mut out_x[range.clone()];
            if divergence {
                for i in 0..np {
                    ox[i] = lo.rx * ar[i] + lo.sx * as_[i] + lo.ry * br[i] + lo.sy * bs[i] - lx[i];
                }
            } else {
                matvec(&self.lift, &fy, &mut ly);
                let oy = &mut out_y[range];
                for i in 0..np {
                    ox[i] = lo.rx * ar[i] + lo.sx * as_[i] - lx[i];
                    oy[i] = lo.ry * ar[i] + lo.sy * as_[i] - ly[i];
                }
            }
        }
    }

    /// Auxiliary variable `p = grad u` with central interior flux and zero
    /// boundary value.
    pub fn compute_gradient(&self, u: &FieldVector) -> Result<(FieldVector, FieldVector)> {
        self.check(u)?;
        let v = u.values();
        let mut px = self.zeros();
        let mut py = self.zeros();
        let flux = |face: usize, node: usize| {
            let um = v[self.vmap_m[node]];
            let du = if self.boundary[face] {
                um
            } else {
                0.5 * (um - v[self.vmap_p[node]])
            };
            let n = self.locals[face / 3].normals[face % 3];
            [n[0] * du, n[1] * du]
        };
        self.grad_minus_lift(v, v, flux, &mut px.values, &mut py.values, false);
        Ok((px, py))
    }

    /// `q = M^{-1} (d+ lS + d- rS) p` in each direction.
    pub fn compute_q(&self, px: &FieldVector, py: &FieldVector) -> Result<(FieldVector, FieldVector)> {
        self.check(px)?;
        self.check(py)?;
        let mut out = [self.zeros(), self.zeros()];
        for ((q, p), op) in out.iter_mut().zip([px, py]).zip(&self.flux_ops) {
            if let Some(op) = op {
                op.apply_into(p.values(), &mut q.values)?;
            }
        }
        let [qx, qy] = out;
        Ok((qx, qy))
    }

    /// `div q` with central interior flux and `q^ = q-` on the boundary.
    pub fn divergence(&self, qx: &FieldVector, qy: &FieldVector) -> Result<FieldVector> {
        self.check(qx)?;
        self.check(qy)?;
        let (vx, vy) = (qx.values(), qy.values());
        let mut out = self.zeros();
        let mut unused = Vec::new();
        let flux = |face: usize, node: usize| {
            if self.boundary[face] {
                return [0.0, 0.0];
            }
            let (m, p) = (self.vmap_m[node], self.vmap_p[node]);
            let n = self.locals[face / 3].normals[face % 3];
            [0.5 * (n[0] * (vx[m] - vx[p]) + n[1] * (vy[m] - vy[p])), 0.0]
        };
        self.grad_minus_lift(vx, vy, flux, &mut out.values, &mut unused, true);
        Ok(out)
    }

    /// The linear part of the operator, `u -> div q(p(u))`.
    pub fn apply_operator(&self, u: &FieldVector) -> Result<FieldVector> {
        let (px, py) = self.compute_gradient(u)?;
        let (qx, qy) = self.compute_q(&px, &py)?;
        self.divergence(&qx, &qy)
    }

    /// `du/dt` including the nodal interpolant of `forcing(x, y, t)`.
    pub fn compute_rhs(
        &self,
        u: &FieldVector,
        t: f64,
        forcing: &dyn Fn(f64, f64, f64) -> f64,
    ) -> Result<FieldVector> {
        let mut rhs = self.apply_operator(u)?;
        let f = self.interpolate(|x, y| forcing(x, y, t));
        rhs.axpy(1.0, &f);
        Ok(rhs)
    }

    /// `sqrt(u^T M u)`.
    pub fn l2_norm(&self, u: &FieldVector) -> f64 {
        let np = self.np();
        let mut mu = vec![0.0; np];
        let mut sum = 0.0;
        for (k, lo) in self.locals.iter().enumerate() {
            let uk = u.element(k);
            matvec(&self.mass, uk, &mut mu);
            sum += lo.jacobian * uk.iter().zip(&mu).map(|(a, b)| a * b).sum::<f64>();
        }
        sum.max(0.0).sqrt()
    }

    /// Numerical flux `n . q^` times the face length at every face node,
    /// `K * 3 * Nfp` values in face-node order. Zero on boundary faces.
    pub fn numerical_flux(&self, qx: &FieldVector, qy: &FieldVector) -> Vec<f64> {
        let nfp = self.reference.nfp;
        let (vx, vy) = (qx.values(), qy.values());
        (0..self.vmap_m.len())
            .map(|node| {
                let face = node / nfp;
                if self.boundary[face] {
                    return 0.0;
                }
                let (m, p) = (self.vmap_m[node], self.vmap_p[node]);
                let lo = &self.locals[face / 3];
                let n = lo.normals[face % 3];
                let qhat = 0.5 * (n[0] * (vx[m] + vx[p]) + n[1] * (vy[m] + vy[p]));
                qhat * self.mesh.geometry[face / 3].face_jacobian[face % 3]
            })
            .collect()
    }

    /// Interior and exterior global node index of each face node.
    pub fn face_maps(&self) -> (&[usize], &[usize]) {
        (&self.vmap_m, &self.vmap_p)
    }
}
