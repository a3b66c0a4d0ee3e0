//! Global fractional stiffness matrices in block-compressed sparse row form.
//!
//! Block `(k, m)` holds, for every cubature point `x_q` of element `k`, the
//! outer product of the basis values `l_i^k(x_q)` with the fractional
//! integrals of `l_j^m` over the part of the traced segment inside `m`.
//! The cubature points of element `k` lie on lines parallel to the traced
//! axis, so each line integral of `v * I p` is a one-dimensional form.

use std::collections::HashMap;
use std::io::Write;

use nalgebra::DMatrix;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fractional::{default_points, SegmentIntegrator};
use crate::mesh::{Axis, Mesh, Side};
use crate::quadrature::cached_gauss_jacobi;
use crate::reference::{ReferenceElement, MAX_DEGREE};

/// Square block-sparse matrix with `np x np` dense blocks, stored by block
/// rows with ascending columns.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockCsr {
    k: usize,
    np: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    /// Row-major `np x np` blocks, in `col_idx` order.
    blocks: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct FracStiffness {
    pub axis: Axis,
    pub side: Side,
    pub alpha: f64,
    matrix: BlockCsr,
}

impl std::ops::Deref for FracStiffness {
    type Target = BlockCsr;

    fn deref(&self) -> &BlockCsr {
        &self.matrix
    }
}

type RowBlocks = Vec<(usize, Vec<f64>)>;

const MAX_NP: usize = (MAX_DEGREE + 1) * (MAX_DEGREE + 2) / 2;

// block rows per rayon task in products; finer splitting costs more than
// the rows themselves
const ROWS_PER_TASK: usize = 128;

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 1.0 && alpha <= 2.0 {
        Ok(())
    } else {
        Err(Error::InvalidAlpha(alpha))
    }
}

fn mass_row(mesh: &Mesh, reference: &ReferenceElement, k: usize) -> RowBlocks {
    let np = reference.np;
    let jac = mesh.geometry[k].jacobian;
    let phi = &reference.cubature_basis;
    let mut block = vec![0.0; np * np];
    for (q, &w) in reference.cubature.weights.iter().enumerate() {
        let wq = jac * w;
        for i in 0..np {
            let a = wq * phi[(i, q)];
            for j in 0..np {
                block[i * np + j] += a * phi[(j, q)];
            }
        }
    }
    vec![(k, block)]
}

/// One Gauss line of a [`StripCubature`] with the element sections it
/// crosses, ordered along the axis.
#[derive(Debug, Clone, PartialEq)]
pub struct StripLine {
    pub across: f64,
    /// Across-direction weight.
    pub weight: f64,
    /// `(element, lo, hi)`, sorted by `lo`.
    pub sections: Vec<(usize, f64, f64)>,
}

/// Cubature on the whole mesh built from lines parallel to an axis. The
/// domain is cut into strips between consecutive vertex coordinates across
/// the axis; each strip carries `per_strip` Gauss lines, so no line meets a
/// vertex and every line is shared by all elements it crosses. Each element
/// section gets `along` Gauss points. Per element the rule is exact for
/// polynomials of degree `min(2 per_strip - 2, 2 along - 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StripCubature {
    pub axis: Axis,
    pub along: usize,
    pub lines: Vec<StripLine>,
    along_rule: Vec<(f64, f64)>,
}

impl StripCubature {
    pub fn new(mesh: &Mesh, axis: Axis, per_strip: usize, along: usize) -> Result<StripCubature> {
        let across_rule = cached_gauss_jacobi(per_strip, 0.0, 0.0)?;
        let along_rule = cached_gauss_jacobi(along, 0.0, 0.0)?;
        let merge = 10.0 * mesh.eps();
        let mut cuts: Vec<f64> = mesh.vertices.iter().map(|&p| axis.split(p).1).collect();
        cuts.sort_by(f64::total_cmp);
        cuts.dedup_by(|b, a| *b - *a <= merge);

        // elements overlapping each strip
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); cuts.len().saturating_sub(1)];
        for k in 0..mesh.num_elements() {
            let c = mesh.corners(k).map(|p| axis.split(p).1);
            let (cmin, cmax) = (c[0].min(c[1]).min(c[2]), c[0].max(c[1]).max(c[2]));
            let first = cuts.partition_point(|&v| v <= cmin + merge).saturating_sub(1);
            let last = cuts.partition_point(|&v| v < cmax - merge);
            for m in members.iter_mut().take(last).skip(first) {
                m.push(k);
            }
        }

        let mut lines = Vec::with_capacity(members.len() * per_strip);
        for (i, elems) in members.iter().enumerate() {
            let half = 0.5 * (cuts[i + 1] - cuts[i]);
            for (&eta, &w) in across_rule.nodes().iter().zip(across_rule.weights()) {
                let across = cuts[i] + half * (1.0 + eta);
                let mut sections: Vec<(usize, f64, f64)> = elems
                    .iter()
                    .filter_map(|&k| {
                        mesh.cross_section(k, axis, across)
                            .filter(|(lo, hi)| hi > lo)
                            .map(|(lo, hi)| (k, lo, hi))
                    })
                    .collect();
                sections.sort_by(|a, b| a.1.total_cmp(&b.1));
                lines.push(StripLine {
                    across,
                    weight: half * w,
                    sections,
                });
            }
        }
        Ok(StripCubature {
            axis,
            along,
            lines,
            along_rule: along_rule.nodes().iter().copied().zip(along_rule.weights().iter().copied()).collect(),
        })
    }

    /// The rule used for degree `n` bases.
    pub fn for_degree(mesh: &Mesh, axis: Axis, degree: usize) -> Result<StripCubature> {
        StripCubature::new(mesh, axis, degree + 1, degree + 2)
    }

    /// Along-axis points and weights on the section `[lo, hi]` of a line
    /// with across weight `weight`.
    fn section_points(&self, weight: f64, lo: f64, hi: f64) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        let half = 0.5 * (hi - lo);
        self.along_rule
            .iter()
            .map(move |&(xi, v)| (xi, lo + half * (1.0 + xi), weight * half * v))
    }

    /// Physical points and weights falling in element `k`.
    pub fn element_points(&self, k: usize) -> Vec<([f64; 2], f64)> {
        let mut out = Vec::new();
        for line in &self.lines {
            for &(e, lo, hi) in &line.sections {
                if e == k {
                    out.extend(
                        self.section_points(line.weight, lo, hi)
                            .map(|(_, t, w)| (self.axis.join(t, line.across), w)),
                    );
                }
            }
        }
        out
    }
}

/// Monomial coefficients in the local variable `s` in [-1, 1] of the
/// restriction of every basis function of one element to a line section.
struct SectionBasis {
    element: usize,
    mid: f64,
    half: f64,
    /// `coeffs[d * np + j]`, coefficient of `s^d` in `l_j`.
    coeffs: Vec<f64>,
}

struct LineAssembler<'a> {
    mesh: &'a Mesh,
    reference: &'a ReferenceElement,
    integrator: &'a SegmentIntegrator,
    axis: Axis,
    side: Side,
    /// Sample points in `s` and the inverse of their monomial Vandermonde.
    samples: Vec<f64>,
    inv_vandermonde: DMatrix<f64>,
}

impl<'a> LineAssembler<'a> {
    fn new(
        mesh: &'a Mesh,
        reference: &'a ReferenceElement,
        integrator: &'a SegmentIntegrator,
        axis: Axis,
        side: Side,
    ) -> Self {
        let n = reference.degree + 1;
        let samples: Vec<f64> = (0..n)
            .map(|p| (std::f64::consts::PI * (2 * p + 1) as f64 / (2 * n) as f64).cos())
            .collect();
        let v = DMatrix::from_fn(n, n, |p, d| samples[p].powi(d as i32));
        let inv_vandermonde = v.try_inverse().expect("Chebyshev Vandermonde is invertible");
        LineAssembler {
            mesh,
            reference,
            integrator,
            axis,
            side,
            samples,
            inv_vandermonde,
        }
    }

    fn section_basis(&self, across: f64, (element, lo, hi): (usize, f64, f64)) -> SectionBasis {
        let np = self.reference.np;
        let n = self.samples.len();
        let mid = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo);
        let mut modal = vec![0.0; np];
        let mut values = vec![0.0; n * np];
        for (p, &s) in self.samples.iter().enumerate() {
            let [r, q] = self.mesh.to_reference(element, self.axis.join(mid + half * s, across));
            self.reference
                .basis_at(r, q, &mut modal, &mut values[p * np..(p + 1) * np]);
        }
        let mut coeffs = vec![0.0; n * np];
        for d in 0..n {
            for p in 0..n {
                let c = self.inv_vandermonde[(d, p)];
                for j in 0..np {
                    coeffs[d * np + j] += c * values[p * np + j];
                }
            }
        }
        SectionBasis {
            element,
            mid,
            half,
            coeffs,
        }
    }

    // mu[d] += scale * (|end - t|/2)^gamma sum_l w_l s(xi_l)^d
    fn anchored(&self, basis: &SectionBasis, t: f64, end: f64, scale: f64, mu: &mut [f64]) {
        let half = 0.5 * (end - t).abs();
        let mid = 0.5 * (end + t);
        let rule = self.integrator.rule(self.side);
        let factor = scale * half.powf(self.integrator.order());
        for (&eta, &w) in rule.nodes().iter().zip(rule.weights()) {
            let s = (mid + half * eta - basis.mid) / basis.half;
            let mut pow = factor * w;
            for m in mu.iter_mut() {
                *m += pow;
                pow *= s;
            }
        }
    }

    /// Adds the contributions of one line to `rows`.
    fn add_line(&self, cubature: &StripCubature, line: &StripLine, rows: &mut [BlockMap]) {
        let np = self.reference.np;
        let n = self.samples.len();
        let bases: Vec<SectionBasis> = line
            .sections
            .iter()
            .map(|&sec| self.section_basis(line.across, sec))
            .collect();
        let mut mu = vec![0.0; n];
        let mut phi = vec![0.0; np];
        let mut f = vec![0.0; np];
        for (pos, (host, &(k, lo, hi))) in bases.iter().zip(&line.sections).enumerate() {
            let upstream: &[SectionBasis] = match self.side {
                Side::Left => &bases[..pos],
                Side::Right => &bases[pos + 1..],
            };
            for (xi, t, wq) in cubature.section_points(line.weight, lo, hi) {
                // basis of the host at the point, from its line restriction
                phi.iter_mut().for_each(|v| *v = 0.0);
                let mut pow = 1.0;
                for d in 0..n {
                    for (v, &c) in phi.iter_mut().zip(&host.coeffs[d * np..(d + 1) * np]) {
                        *v += pow * c;
                    }
                    pow *= xi;
                }
                let host_far = match self.side {
                    Side::Left => lo,
                    Side::Right => hi,
                };
                let targets = upstream.iter().map(|b| (b, false)).chain(std::iter::once((host, true)));
                for (basis, singular) in targets {
                    mu.iter_mut().for_each(|v| *v = 0.0);
                    let (a, b) = (basis.mid - basis.half, basis.mid + basis.half);
                    let (far, near) = match self.side {
                        Side::Left => (a, b),
                        Side::Right => (b, a),
                    };
                    if singular {
                        self.anchored(basis, t, host_far, 1.0, &mut mu);
                    } else {
                        self.anchored(basis, t, far, 1.0, &mut mu);
                        self.anchored(basis, t, near, -1.0, &mut mu);
                    }
                    f.iter_mut().for_each(|v| *v = 0.0);
                    for (d, &md) in mu.iter().enumerate() {
                        for (v, &c) in f.iter_mut().zip(&basis.coeffs[d * np..(d + 1) * np]) {
                            *v += md * c;
                        }
                    }
                    let scale = wq * self.integrator.inv_gamma_fn();
                    let block = rows[k]
                        .entry(basis.element)
                        .or_insert_with(|| vec![0.0; np * np]);
                    for (i, &pi) in phi.iter().enumerate() {
                        let a = scale * pi;
                        for (dst, &fj) in block[i * np..(i + 1) * np].iter_mut().zip(&f) {
                            *dst += a * fj;
                        }
                    }
                }
            }
        }
    }
}

type BlockMap = HashMap<usize, Vec<f64>>;

fn fractional_rows(
    mesh: &Mesh,
    reference: &ReferenceElement,
    alpha: f64,
    axis: Axis,
    side: Side,
) -> Result<Vec<RowBlocks>> {
    let integrator = SegmentIntegrator::new(2.0 - alpha, default_points(reference.degree))?;
    let cubature = StripCubature::for_degree(mesh, axis, reference.degree)?;
    let assembler = LineAssembler::new(mesh, reference, &integrator, axis, side);
    let kk = mesh.num_elements();
    let np = reference.np;
    let maps = cubature
        .lines
        .par_iter()
        .fold(
            || vec![BlockMap::new(); kk],
            |mut rows, line| {
                assembler.add_line(&cubature, line, &mut rows);
                rows
            },
        )
        .reduce_with(|mut a, b| {
            for (ra, rb) in a.iter_mut().zip(b) {
                for (m, blk) in rb {
                    match ra.get_mut(&m) {
                        Some(dst) => dst.iter_mut().zip(&blk).for_each(|(d, s)| *d += s),
                        None => {
                            ra.insert(m, blk);
                        }
                    }
                }
            }
            a
        })
        .unwrap_or_else(|| vec![BlockMap::new(); kk]);
    Ok(maps
        .into_iter()
        .enumerate()
        .map(|(k, mut map)| {
            // the diagonal block is always stored
            map.entry(k).or_insert_with(|| vec![0.0; np * np]);
            let mut row: RowBlocks = map.into_iter().collect();
            row.sort_unstable_by_key(|(m, _)| *m);
            row
        })
        .collect())
}

// `sum_m B_m v_m` over one block row, with the block size known at compile
// time so the loops unroll
fn block_row<const NP: usize>(cols: &[usize], blocks: &[f64], v: &[f64]) -> [f64; MAX_NP] {
    let mut acc = [0.0; NP];
    for (&m, block) in cols.iter().zip(blocks.chunks_exact(NP * NP)) {
        let vm: &[f64; NP] = v[m * NP..(m + 1) * NP].try_into().expect("block width");
        for (row, a) in block.chunks_exact(NP).zip(acc.iter_mut()) {
            for (b, x) in row.iter().zip(vm) {
                *a += b * x;
            }
        }
    }
    let mut out = [0.0; MAX_NP];
    out[..NP].copy_from_slice(&acc);
    out
}

impl FracStiffness {
    /// Assemble the fractional stiffness matrix of order `alpha` in (1, 2]
    /// along `axis` on `side`. At `alpha = 2` the fractional integral is the
    /// identity and the result is the block-diagonal mass matrix.
    pub fn assemble(
        mesh: &Mesh,
        reference: &ReferenceElement,
        alpha: f64,
        axis: Axis,
        side: Side,
    ) -> Result<FracStiffness> {
        check_alpha(alpha)?;
        let kk = mesh.num_elements();
        let rows: Vec<RowBlocks> = if alpha == 2.0 {
            (0..kk)
                .into_par_iter()
                .map(|k| mass_row(mesh, reference, k))
                .collect()
        } else {
            fractional_rows(mesh, reference, alpha, axis, side)?
        };
        Ok(FracStiffness {
            axis,
            side,
            alpha,
            matrix: BlockCsr::from_rows(reference.np, rows),
        })
    }

    pub fn matrix(&self) -> &BlockCsr {
        &self.matrix
    }
}

impl BlockCsr {
    fn from_rows(np: usize, rows: Vec<RowBlocks>) -> BlockCsr {
        let nnz: usize = rows.iter().map(Vec::len).sum();
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut col_idx = Vec::with_capacity(nnz);
        let mut blocks = Vec::with_capacity(nnz * np * np);
        row_ptr.push(0);
        let k = rows.len();
        for row in rows {
            for (m, b) in row {
                col_idx.push(m);
                blocks.extend_from_slice(&b);
            }
            row_ptr.push(col_idx.len());
        }
        BlockCsr {
            k,
            np,
            row_ptr,
            col_idx,
            blocks,
        }
    }

    /// `sum_t c_t A_t` on the union pattern, with each block row `k` then
    /// multiplied from the left by `row_factor(k)` (row-major `np x np`).
    pub fn combine(terms: &[(&BlockCsr, f64)], row_factor: impl Fn(usize) -> Vec<f64> + Sync) -> Result<BlockCsr> {
        let Some((first, _)) = terms.first() else {
            return Err(Error::InvalidConfig("nothing to combine".into()));
        };
        let (kk, np) = (first.k, first.np);
        if let Some((bad, _)) = terms.iter().find(|(a, _)| a.k != kk || a.np != np) {
            return Err(Error::DimensionMismatch {
                expected: kk * np,
                got: bad.k * bad.np,
            });
        }
        let nb = np * np;
        let rows: Vec<RowBlocks> = (0..kk)
            .into_par_iter()
            .map(|k| {
                let mut cols: Vec<usize> = terms.iter().flat_map(|(a, _)| a.row_columns(k).iter().copied()).collect();
                cols.sort_unstable();
                cols.dedup();
                let factor = row_factor(k);
                let mut sum = vec![0.0; nb];
                cols.into_iter()
                    .map(|m| {
                        sum.iter_mut().for_each(|x| *x = 0.0);
                        for (a, c) in terms {
                            if let Some(b) = a.block(k, m) {
                                sum.iter_mut().zip(b).for_each(|(s, v)| *s += c * v);
                            }
                        }
                        let mut out = vec![0.0; nb];
                        for i in 0..np {
                            for l in 0..np {
                                let f = factor[i * np + l];
                                for j in 0..np {
                                    out[i * np + j] += f * sum[l * np + j];
                                }
                            }
                        }
                        (m, out)
                    })
                    .collect()
            })
            .collect();
        Ok(BlockCsr::from_rows(np, rows))
    }

    pub fn num_elements(&self) -> usize {
        self.k
    }

    pub fn np(&self) -> usize {
        self.np
    }

    /// Number of stored `np x np` blocks.
    pub fn nnz_blocks(&self) -> usize {
        self.col_idx.len()
    }

    /// Stored blocks as a fraction of `K^2`.
    pub fn fill_ratio(&self) -> f64 {
        self.nnz_blocks() as f64 / (self.k * self.k) as f64
    }

    /// Column elements stored in block row `k`, ascending.
    pub fn row_columns(&self, k: usize) -> &[usize] {
        &self.col_idx[self.row_ptr[k]..self.row_ptr[k + 1]]
    }

    /// Row-major block `(k, m)`, if stored.
    pub fn block(&self, k: usize, m: usize) -> Option<&[f64]> {
        let cols = self.row_columns(k);
        let nb = self.np * self.np;
        cols.binary_search(&m).ok().map(|p| {
            let start = (self.row_ptr[k] + p) * nb;
            &self.blocks[start..start + nb]
        })
    }

    /// `out = scale * S v + beta * out`, where `beta` is 0 or 1.
    fn gemv(&self, v: &[f64], scale: f64, accumulate: bool, out: &mut [f64]) -> Result<()> {
        let n = self.k * self.np;
        for len in [v.len(), out.len()] {
            if len != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: len,
                });
            }
        }
        let np = self.np;
        let nb = np * np;
        let row = |k: usize, o: &mut [f64]| {
            let range = self.row_ptr[k]..self.row_ptr[k + 1];
            let cols = &self.col_idx[range.clone()];
            let blocks = &self.blocks[range.start * nb..range.end * nb];
            let acc = match np {
                3 => block_row::<3>(cols, blocks, v),
                6 => block_row::<6>(cols, blocks, v),
                10 => block_row::<10>(cols, blocks, v),
                15 => block_row::<15>(cols, blocks, v),
                21 => block_row::<21>(cols, blocks, v),
                28 => block_row::<28>(cols, blocks, v),
                36 => block_row::<36>(cols, blocks, v),
                45 => block_row::<45>(cols, blocks, v),
                _ => unreachable!("block size {np} is not a triangle number up to degree {MAX_DEGREE}"),
            };
            for (oi, a) in o.iter_mut().zip(&acc[..np]) {
                *oi = if accumulate { *oi + scale * a } else { scale * a };
            }
        };
        out.par_chunks_mut(np)
            .enumerate()
            .with_min_len(ROWS_PER_TASK)
            .for_each(|(k, o)| row(k, o));
        Ok(())
    }

    /// `S v`.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; v.len()];
        self.gemv(v, 1.0, false, &mut out)?;
        Ok(out)
    }

    /// `out = S v`.
    pub fn apply_into(&self, v: &[f64], out: &mut [f64]) -> Result<()> {
        self.gemv(v, 1.0, false, out)
    }

    /// `out += scale * S v`.
    pub fn apply_add(&self, v: &[f64], scale: f64, out: &mut [f64]) -> Result<()> {
        self.gemv(v, scale, true, out)
    }

    /// Dense `(K Np) x (K Np)` copy, for tests and small problems.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.k * self.np;
        let np = self.np;
        let mut dense = vec![vec![0.0; n]; n];
        for k in 0..self.k {
            for &m in self.row_columns(k) {
                let b = self.block(k, m).unwrap();
                for i in 0..np {
                    for j in 0..np {
                        dense[k * np + i][m * np + j] = b[i * np + j];
                    }
                }
            }
        }
        dense
    }

    /// Coordinate dump, one `k m i j value` line per stored entry, 0-based.
    pub fn write_coo(&self, mut w: impl Write) -> Result<()> {
        let np = self.np;
        for k in 0..self.k {
            for &m in self.row_columns(k) {
                let b = self.block(k, m).unwrap();
                for i in 0..np {
                    for j in 0..np {
                        writeln!(w, "{k} {m} {i} {j} {:.17e}", b[i * np + j])?;
                    }
                }
            }
        }
        Ok(())
    }
}
