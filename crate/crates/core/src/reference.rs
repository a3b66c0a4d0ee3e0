//! Degree-N nodal basis on the reference triangle with vertices
//! `(-1,-1), (1,-1), (-1,1)`.
//!
//! Nodes are the warp & blend distribution; the modal basis is the
//! orthonormal Dubiner basis built from Jacobi polynomials. Faces are numbered
//! `0: s = -1`, `1: r + s = 0`, `2: r = -1`, matching the mesh's local edge
//! order `(v0,v1), (v1,v2), (v2,v0)`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::quadrature::{gamma, gauss_jacobi};

pub const MAX_DEGREE: usize = 8;

/// Tolerance for "inside the reference triangle" checks, in reference units.
pub const REFERENCE_TOL: f64 = 1e-10;

const NODE_TOL: f64 = 1e-10;

/// Orthonormal Jacobi polynomial `P_n^{(a,b)}` on `[-1, 1]`.
pub fn jacobi_p(x: f64, a: f64, b: f64, n: usize) -> f64 {
    let gamma0 = 2f64.powf(a + b + 1.0) / (a + b + 1.0) * gamma(a + 1.0) * gamma(b + 1.0)
        / gamma(a + b + 1.0);
    let p0 = 1.0 / gamma0.sqrt();
    if n == 0 {
        return p0;
    }
    let gamma1 = (a + 1.0) * (b + 1.0) / (a + b + 3.0) * gamma0;
    let mut p1 = ((a + b + 2.0) * x / 2.0 + (a - b) / 2.0) / gamma1.sqrt();
    if n == 1 {
        return p1;
    }
    let mut p_prev = p0;
    let mut a_old = 2.0 / (2.0 + a + b) * ((a + 1.0) * (b + 1.0) / (a + b + 3.0)).sqrt();
    for i in 1..n {
        let i = i as f64;
        let h1 = 2.0 * i + a + b;
        let a_new = 2.0 / (h1 + 2.0)
            * ((i + 1.0) * (i + 1.0 + a + b) * (i + 1.0 + a) * (i + 1.0 + b)
                / (h1 + 1.0)
                / (h1 + 3.0))
                .sqrt();
        let b_new = -(a * a - b * b) / h1 / (h1 + 2.0);
        let p_next = (-a_old * p_prev + (x - b_new) * p1) / a_new;
        p_prev = p1;
        p1 = p_next;
        a_old = a_new;
    }
    p1
}

/// Derivative of the orthonormal Jacobi polynomial.
pub fn grad_jacobi_p(x: f64, a: f64, b: f64, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        let nf = n as f64;
        (nf * (nf + a + b + 1.0)).sqrt() * jacobi_p(x, a + 1.0, b + 1.0, n - 1)
    }
}

/// Legendre-Gauss-Lobatto points (with Jacobi parameters) on `[-1, 1]`.
fn jacobi_gl(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![-1.0, 1.0];
    }
    let inner = gauss_jacobi(n - 1, a + 1.0, b + 1.0).expect("valid Jacobi parameters");
    let mut x = Vec::with_capacity(n + 1);
    x.push(-1.0);
    x.extend_from_slice(inner.nodes());
    x.push(1.0);
    x
}

fn vandermonde_1d(n: usize, r: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(r.len(), n + 1, |i, j| jacobi_p(r[i], 0.0, 0.0, j))
}

fn warp_factor(n: usize, rout: &[f64]) -> Vec<f64> {
    let lgl = jacobi_gl(0.0, 0.0, n);
    let req: Vec<f64> = (0..=n).map(|i| -1.0 + 2.0 * i as f64 / n as f64).collect();
    let veq = vandermonde_1d(n, &req);
    let veq_t_inv = veq.transpose().try_inverse().expect("equidistant Vandermonde");
    rout.iter()
        .map(|&r| {
            let p = nalgebra::DVector::from_fn(n + 1, |i, _| jacobi_p(r, 0.0, 0.0, i));
            let l = &veq_t_inv * p;
            let mut warp: f64 = (0..=n).map(|i| l[i] * (lgl[i] - req[i])).sum();
            if r.abs() < 1.0 - 1e-10 {
                warp /= 1.0 - r * r;
            } else {
                warp = 0.0;
            }
            warp
        })
        .collect()
}

/// Warp & blend nodes in `(r, s)` coordinates.
pub fn warp_blend_nodes(n: usize) -> Vec<[f64; 2]> {
    const ALPHA_OPT: [f64; 15] = [
        0.0000, 0.0000, 1.4152, 0.1001, 0.2751, 0.9800, 1.0999, 1.2832, 1.3648, 1.4773, 1.4959,
        1.5743, 1.5770, 1.6223, 1.6258,
    ];
    let alpha = if n < 16 { ALPHA_OPT[n - 1] } else { 5.0 / 3.0 };
    let mut l1 = Vec::new();
    let mut l3 = Vec::new();
    for i in 0..=n {
        for j in 0..=(n - i) {
            l1.push(i as f64 / n as f64);
            l3.push(j as f64 / n as f64);
        }
    }
    let l2: Vec<f64> = l1.iter().zip(&l3).map(|(a, c)| 1.0 - a - c).collect();
    let np = l1.len();
    let d1: Vec<f64> = (0..np).map(|i| l3[i] - l2[i]).collect();
    let d2: Vec<f64> = (0..np).map(|i| l1[i] - l3[i]).collect();
    let d3: Vec<f64> = (0..np).map(|i| l2[i] - l1[i]).collect();
    let w1 = warp_factor(n, &d1);
    let w2 = warp_factor(n, &d2);
    let w3 = warp_factor(n, &d3);
    let sqrt3 = 3f64.sqrt();
    let (c2, s2) = ((2.0 * std::f64::consts::PI / 3.0).cos(), (2.0 * std::f64::consts::PI / 3.0).sin());
    let (c3, s3) = ((4.0 * std::f64::consts::PI / 3.0).cos(), (4.0 * std::f64::consts::PI / 3.0).sin());
    (0..np)
        .map(|i| {
            let warp1 = 4.0 * l2[i] * l3[i] * w1[i] * (1.0 + (alpha * l1[i]).powi(2));
            let warp2 = 4.0 * l1[i] * l3[i] * w2[i] * (1.0 + (alpha * l2[i]).powi(2));
            let warp3 = 4.0 * l1[i] * l2[i] * w3[i] * (1.0 + (alpha * l3[i]).powi(2));
            let x = -l2[i] + l3[i] + warp1 + c2 * warp2 + c3 * warp3;
            let y = (-l2[i] - l3[i] + 2.0 * l1[i]) / sqrt3 + s2 * warp2 + s3 * warp3;
            // equilateral -> reference right triangle
            let b1 = (sqrt3 * y + 1.0) / 3.0;
            let b2 = (-3.0 * x - sqrt3 * y + 2.0) / 6.0;
            let b3 = (3.0 * x - sqrt3 * y + 2.0) / 6.0;
            [-b2 + b3 - b1, -b2 - b3 + b1]
        })
        .collect()
}

fn rs_to_ab(r: f64, s: f64) -> (f64, f64) {
    let a = if (s - 1.0).abs() > 1e-14 {
        2.0 * (1.0 + r) / (1.0 - s) - 1.0
    } else {
        -1.0
    };
    (a, s)
}

/// Values of all `Np` orthonormal modes at `(r, s)`, ordered `(i, j)` with
/// `i + j <= n`, `i` outer. Valid for any `(r, s)` (polynomial extension).
pub fn modal_values(n: usize, r: f64, s: f64, out: &mut [f64]) {
    let (a, b) = rs_to_ab(r, s);
    let mut m = 0;
    let mut one_minus_b_pow = 1.0;
    for i in 0..=n {
        let h1 = jacobi_p(a, 0.0, 0.0, i);
        let jac_a = (2 * i + 1) as f64;
        for j in 0..=(n - i) {
            let h2 = jacobi_p(b, jac_a, 0.0, j);
            out[m] = std::f64::consts::SQRT_2 * h1 * h2 * one_minus_b_pow;
            m += 1;
        }
        one_minus_b_pow *= 1.0 - b;
    }
}

/// Gradients `(d/dr, d/ds)` of all modes at `(r, s)`.
fn modal_gradients(n: usize, r: f64, s: f64, dr: &mut [f64], ds: &mut [f64]) {
    let (a, b) = rs_to_ab(r, s);
    let mut m = 0;
    for id in 0..=n {
        for jd in 0..=(n - id) {
            let fa = jacobi_p(a, 0.0, 0.0, id);
            let dfa = grad_jacobi_p(a, 0.0, 0.0, id);
            let ja = (2 * id + 1) as f64;
            let gb = jacobi_p(b, ja, 0.0, jd);
            let dgb = grad_jacobi_p(b, ja, 0.0, jd);
            let half = 0.5 * (1.0 - b);
            let mut dmr = dfa * gb;
            if id > 0 {
                dmr *= half.powi(id as i32 - 1);
            }
            let mut dms = dfa * (gb * (0.5 * (1.0 + a)));
            if id > 0 {
                dms *= half.powi(id as i32 - 1);
            }
            let mut tmp = dgb * half.powi(id as i32);
            if id > 0 {
                tmp -= 0.5 * id as f64 * gb * half.powi(id as i32 - 1);
            }
            dms += fa * tmp;
            let scale = 2f64.powf(id as f64 + 0.5);
            dr[m] = scale * dmr;
            ds[m] = scale * dms;
            m += 1;
        }
    }
}

/// Volume cubature on the reference triangle.
#[derive(Debug, Clone)]
pub struct Cubature {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl Cubature {
    /// Collapsed-coordinate Gauss rule (Gauss-Legendre x Gauss-Jacobi(1,0)) with
    /// `m` points per direction; exact for total degree `2m - 1`.
    pub fn collapsed(m: usize) -> Cubature {
        let ga = gauss_jacobi(m, 0.0, 0.0).expect("Legendre rule");
        let gb = gauss_jacobi(m, 1.0, 0.0).expect("Jacobi(1,0) rule");
        let mut points = Vec::with_capacity(m * m);
        let mut weights = Vec::with_capacity(m * m);
        for (&b, &wb) in gb.nodes().iter().zip(gb.weights()) {
            for (&a, &wa) in ga.nodes().iter().zip(ga.weights()) {
                points.push([0.5 * (1.0 + a) * (1.0 - b) - 1.0, b]);
                weights.push(0.5 * wa * wb);
            }
        }
        Cubature { points, weights }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Nodal reference element of degree `N`.
#[derive(Debug, Clone)]
pub struct ReferenceElement {
    pub degree: usize,
    pub np: usize,
    pub nfp: usize,
    pub nodes: Vec<[f64; 2]>,
    pub vandermonde: DMatrix<f64>,
    /// `V^{-T}`: maps modal values at a point to Lagrange values.
    pub inv_vandermonde_t: DMatrix<f64>,
    pub d_r: DMatrix<f64>,
    pub d_s: DMatrix<f64>,
    pub mass: DMatrix<f64>,
    pub inv_mass: DMatrix<f64>,
    pub face_nodes: [Vec<usize>; 3],
    /// `Np x 3*Nfp` surface-to-volume operator.
    pub lift: DMatrix<f64>,
    pub cubature: Cubature,
    /// `Np x Q` Lagrange basis values at the cubature points.
    pub cubature_basis: DMatrix<f64>,
}

impl ReferenceElement {
    pub fn new(degree: usize) -> Result<Self> {
        if !(1..=MAX_DEGREE).contains(&degree) {
            return Err(Error::UnsupportedDegree(degree));
        }
        let n = degree;
        let np = (n + 1) * (n + 2) / 2;
        let nfp = n + 1;
        let nodes = warp_blend_nodes(n);

        let mut v = DMatrix::zeros(np, np);
        let mut vr = DMatrix::zeros(np, np);
        let mut vs = DMatrix::zeros(np, np);
        let mut row = vec![0.0; np];
        let mut row_r = vec![0.0; np];
        let mut row_s = vec![0.0; np];
        for (i, &[r, s]) in nodes.iter().enumerate() {
            modal_values(n, r, s, &mut row);
            modal_gradients(n, r, s, &mut row_r, &mut row_s);
            for j in 0..np {
                v[(i, j)] = row[j];
                vr[(i, j)] = row_r[j];
                vs[(i, j)] = row_s[j];
            }
        }
        let inv_v = v.clone().try_inverse().expect("Vandermonde is invertible");
        let d_r = &vr * &inv_v;
        let d_s = &vs * &inv_v;
        let inv_mass = &v * v.transpose();
        let mass = inv_v.transpose() * &inv_v;

        let on_face = |f: usize, [r, s]: [f64; 2]| match f {
            0 => (s + 1.0).abs() < NODE_TOL,
            1 => (r + s).abs() < NODE_TOL,
            _ => (r + 1.0).abs() < NODE_TOL,
        };
        let face_nodes: [Vec<usize>; 3] = std::array::from_fn(|f| {
            (0..np).filter(|&i| on_face(f, nodes[i])).collect::<Vec<_>>()
        });
        debug_assert!(face_nodes.iter().all(|fm| fm.len() == nfp));

        let mut emat = DMatrix::zeros(np, 3 * nfp);
        for (f, fmask) in face_nodes.iter().enumerate() {
            let coord: Vec<f64> = fmask
                .iter()
                .map(|&i| if f == 2 { nodes[i][1] } else { nodes[i][0] })
                .collect();
            let v1 = vandermonde_1d(n, &coord);
            let edge_mass = (&v1 * v1.transpose())
                .try_inverse()
                .expect("edge Vandermonde is invertible");
            for (a, &i) in fmask.iter().enumerate() {
                for b in 0..nfp {
                    emat[(i, f * nfp + b)] = edge_mass[(a, b)];
                }
            }
        }
        let lift = &v * (v.transpose() * emat);

        let cubature = Cubature::collapsed(n + 2);
        let inv_vandermonde_t = inv_v.transpose();
        let mut cubature_basis = DMatrix::zeros(np, cubature.len());
        for (q, &[r, s]) in cubature.points.iter().enumerate() {
            modal_values(n, r, s, &mut row);
            for i in 0..np {
                cubature_basis[(i, q)] = (0..np).map(|j| inv_vandermonde_t[(i, j)] * row[j]).sum();
            }
        }

        Ok(ReferenceElement {
            degree: n,
            np,
            nfp,
            nodes,
            vandermonde: v,
            inv_vandermonde_t,
            d_r,
            d_s,
            mass,
            inv_mass,
            face_nodes,
            lift,
            cubature,
            cubature_basis,
        })
    }

    /// Lagrange basis values at `(r, s)`, no containment check; points outside
    /// the triangle evaluate the polynomial extension.
    pub fn basis_at(&self, r: f64, s: f64, modal_scratch: &mut [f64], out: &mut [f64]) {
        modal_values(self.degree, r, s, modal_scratch);
        self.modal_to_nodal(modal_scratch, out);
    }

    /// Apply `V^{-T}` to a vector of modal values (or a weighted sum of them).
    pub fn modal_to_nodal(&self, modal: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate().take(self.np) {
            *o = (0..self.np)
                .map(|j| self.inv_vandermonde_t[(i, j)] * modal[j])
                .sum();
        }
    }

    /// `Np x pts.len()` matrix of Lagrange basis values at reference points.
    pub fn eval_basis(&self, pts: &[[f64; 2]]) -> Result<DMatrix<f64>> {
        let mut out = DMatrix::zeros(self.np, pts.len());
        let mut modal = vec![0.0; self.np];
        let mut col = vec![0.0; self.np];
        for (q, &[r, s]) in pts.iter().enumerate() {
            if r < -1.0 - REFERENCE_TOL || s < -1.0 - REFERENCE_TOL || r + s > REFERENCE_TOL {
                return Err(Error::OutsideReference { r, s });
            }
            self.basis_at(r, s, &mut modal, &mut col);
            for i in 0..self.np {
                out[(i, q)] = col[i];
            }
        }
        Ok(out)
    }
}
