//! Triangulations: loading, connectivity, affine geometry and axis-aligned
//! segment tracing.
//!
//! Local face `f` of triangle `[v0, v1, v2]` is the edge `(v_f, v_{(f+1)%3})`.
//! Boundary faces point to their own element and face (`elem_to_elem[k][f] == k`).

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative geometric tolerance; scaled by the larger bounding-box extent.
pub const GEOM_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

impl Axis {
    /// `(along, across)` coordinates of a point for this axis.
    #[inline]
    pub fn split(self, p: [f64; 2]) -> (f64, f64) {
        match self {
            Axis::X => (p[0], p[1]),
            Axis::Y => (p[1], p[0]),
        }
    }

    #[inline]
    pub fn join(self, along: f64, across: f64) -> [f64; 2] {
        match self {
            Axis::X => [along, across],
            Axis::Y => [across, along],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

impl BoundingBox {
    pub fn extent(&self) -> f64 {
        (self.xmax - self.xmin).max(self.ymax - self.ymin)
    }

    /// `(min, max)` along an axis.
    pub fn range(&self, axis: Axis) -> (f64, f64) {
        match axis {
            Axis::X => (self.xmin, self.xmax),
            Axis::Y => (self.ymin, self.ymax),
        }
    }
}

/// Constant affine factors of one element.
#[derive(Debug, Clone, Copy)]
pub struct ElementGeometry {
    /// `J = area / 2` (reference area is 2).
    pub jacobian: f64,
    pub rx: f64,
    pub ry: f64,
    pub sx: f64,
    pub sy: f64,
    pub normals: [[f64; 2]; 3],
    /// Half the edge length of each face.
    pub face_jacobian: [f64; 3],
    pub diameter: f64,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub vertices: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub elem_to_elem: Vec<[usize; 3]>,
    pub elem_to_face: Vec<[usize; 3]>,
    pub geometry: Vec<ElementGeometry>,
    pub bbox: BoundingBox,
    vertex_to_elems: Vec<Vec<usize>>,
    eps: f64,
}

/// One triangle crossed by a traced segment, with its interval along the axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub element: usize,
    pub lo: f64,
    pub hi: f64,
    /// The element containing the traced point; its interval ends at that point.
    pub host: bool,
}

impl TraceEntry {
    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Elements crossed by a segment from a point to the domain boundary, sorted
/// by ascending interval.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TraceResult {
    pub entries: Vec<TraceEntry>,
}

impl TraceResult {
    pub fn total_length(&self) -> f64 {
        self.entries.iter().map(TraceEntry::len).sum()
    }

    pub fn host(&self) -> Option<&TraceEntry> {
        self.entries.iter().find(|e| e.host)
    }

    /// Crossed elements other than the host.
    pub fn upstream(&self) -> impl Iterator<Item = &TraceEntry> {
        self.entries.iter().filter(|e| !e.host)
    }
}

fn parse_err(file: &str, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        file: file.to_string(),
        line,
        msg: msg.into(),
    }
}

/// Non-comment, non-blank lines with their 1-based line numbers.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.split('#').next().unwrap_or("").trim();
        (!l.is_empty()).then(|| (i + 1, l.split_whitespace().collect()))
    })
}

fn parse_num<T: std::str::FromStr>(file: &str, line: usize, tok: &str) -> Result<T> {
    tok.parse()
        .map_err(|_| parse_err(file, line, format!("cannot parse `{tok}`")))
}

impl Mesh {
    /// Load a `.node` / `.ele` pair from `<prefix>.node` and `<prefix>.ele`.
    pub fn load(prefix: impl AsRef<Path>) -> Result<Mesh> {
        let prefix = prefix.as_ref();
        let read = |ext: &str| {
            let path = prefix.with_extension(ext);
            fs::read_to_string(&path).map_err(|source| Error::File { path, source })
        };
        Mesh::parse(&read("node")?, &read("ele")?)
    }

    /// Parse the text of a `.node` file and an `.ele` file.
    pub fn parse(node_text: &str, ele_text: &str) -> Result<Mesh> {
        let mut lines = data_lines(node_text);
        let (hl, header) = lines
            .next()
            .ok_or_else(|| parse_err("node", 0, "missing header"))?;
        if header.len() < 2 {
            return Err(parse_err("node", hl, "header needs `V 2 0 B`"));
        }
        let nv: usize = parse_num("node", hl, header[0])?;
        let dim: usize = parse_num("node", hl, header[1])?;
        if dim != 2 {
            return Err(parse_err("node", hl, format!("dimension {dim} is not 2")));
        }
        let mut vertices = Vec::with_capacity(nv);
        let mut base = None;
        for (ln, toks) in lines.by_ref().take(nv) {
            if toks.len() < 3 {
                return Err(parse_err("node", ln, "expected `i x y [marker]`"));
            }
            let idx: i64 = parse_num("node", ln, toks[0])?;
            let b = *base.get_or_insert(idx);
            if idx != b + vertices.len() as i64 {
                return Err(parse_err("node", ln, format!("unexpected vertex index {idx}")));
            }
            vertices.push([parse_num("node", ln, toks[1])?, parse_num("node", ln, toks[2])?]);
        }
        if vertices.len() != nv {
            return Err(parse_err("node", 0, format!("expected {nv} vertices, found {}", vertices.len())));
        }
        let base = base.unwrap_or(1);

        let mut lines = data_lines(ele_text);
        let (hl, header) = lines
            .next()
            .ok_or_else(|| parse_err("ele", 0, "missing header"))?;
        let nk: usize = parse_num("ele", hl, header[0])?;
        if header.len() > 1 && header[1] != "3" {
            return Err(parse_err("ele", hl, "only 3-node triangles are supported"));
        }
        let mut triangles = Vec::with_capacity(nk);
        for (ln, toks) in lines.take(nk) {
            if toks.len() < 4 {
                return Err(parse_err("ele", ln, "expected `i v1 v2 v3`"));
            }
            let mut tri = [0usize; 3];
            for (slot, tok) in tri.iter_mut().zip(&toks[1..4]) {
                let v: i64 = parse_num("ele", ln, tok)?;
                let local = v - base;
                if local < 0 || local >= nv as i64 {
                    return Err(Error::VertexOutOfRange {
                        element: triangles.len(),
                        vertex: v,
                        count: nv,
                    });
                }
                *slot = local as usize;
            }
            triangles.push(tri);
        }
        if triangles.len() != nk {
            return Err(parse_err("ele", 0, format!("expected {nk} triangles, found {}", triangles.len())));
        }
        Mesh::from_parts(vertices, triangles)
    }

    /// Build a mesh from 0-based vertex and triangle lists. Clockwise triangles
    /// are reordered.
    pub fn from_parts(vertices: Vec<[f64; 2]>, mut triangles: Vec<[usize; 3]>) -> Result<Mesh> {
        if triangles.is_empty() {
            return Err(Error::EmptyMesh);
        }
        for (k, t) in triangles.iter().enumerate() {
            if let Some(&v) = t.iter().find(|&&v| v >= vertices.len()) {
                return Err(Error::VertexOutOfRange {
                    element: k,
                    vertex: v as i64,
                    count: vertices.len(),
                });
            }
        }
        let mut bbox = BoundingBox {
            xmin: f64::INFINITY,
            xmax: f64::NEG_INFINITY,
            ymin: f64::INFINITY,
            ymax: f64::NEG_INFINITY,
        };
        for &[x, y] in &vertices {
            bbox.xmin = bbox.xmin.min(x);
            bbox.xmax = bbox.xmax.max(x);
            bbox.ymin = bbox.ymin.min(y);
            bbox.ymax = bbox.ymax.max(y);
        }
        let scale = bbox.extent();

        let mut geometry = Vec::with_capacity(triangles.len());
        for (k, t) in triangles.iter_mut().enumerate() {
            let [a, b, c] = t.map(|v| vertices[v]);
            let twice_area = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
            if twice_area.abs() / 4.0 < 1e-14 * scale * scale {
                return Err(Error::DegenerateElement(k));
            }
            if twice_area < 0.0 {
                t.swap(1, 2);
            }
            geometry.push(element_geometry(t.map(|v| vertices[v])));
        }

        let mut edges: HashMap<(usize, usize), Vec<(usize, usize)>> = HashMap::new();
        for (k, t) in triangles.iter().enumerate() {
            for f in 0..3 {
                let (a, b) = (t[f], t[(f + 1) % 3]);
                edges.entry((a.min(b), a.max(b))).or_default().push((k, f));
            }
        }
        let mut elem_to_elem: Vec<[usize; 3]> = (0..triangles.len()).map(|k| [k; 3]).collect();
        let mut elem_to_face: Vec<[usize; 3]> = vec![[0, 1, 2]; triangles.len()];
        for (&(a, b), owners) in &edges {
            match owners.as_slice() {
                [_] => {}
                &[(k1, f1), (k2, f2)] => {
                    elem_to_elem[k1][f1] = k2;
                    elem_to_face[k1][f1] = f2;
                    elem_to_elem[k2][f2] = k1;
                    elem_to_face[k2][f2] = f1;
                }
                _ => return Err(Error::NonConforming(a, b)),
            }
        }

        let mut vertex_to_elems = vec![Vec::new(); vertices.len()];
        for (k, t) in triangles.iter().enumerate() {
            for &v in t {
                vertex_to_elems[v].push(k);
            }
        }

        Ok(Mesh {
            vertices,
            triangles,
            elem_to_elem,
            elem_to_face,
            geometry,
            bbox,
            vertex_to_elems,
            eps: GEOM_REL_TOL * scale,
        })
    }

    pub fn num_elements(&self) -> usize {
        self.triangles.len()
    }

    /// Absolute geometric tolerance.
    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn is_boundary_face(&self, k: usize, f: usize) -> bool {
        self.elem_to_elem[k][f] == k
    }

    pub fn h_max(&self) -> f64 {
        self.geometry.iter().map(|g| g.diameter).fold(0.0, f64::max)
    }

    pub fn h_min(&self) -> f64 {
        self.geometry
            .iter()
            .map(|g| g.diameter)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn corners(&self, k: usize) -> [[f64; 2]; 3] {
        self.triangles[k].map(|v| self.vertices[v])
    }

    /// Reference `(r, s)` -> physical `(x, y)` on element `k`.
    pub fn to_physical(&self, k: usize, [r, s]: [f64; 2]) -> [f64; 2] {
        let [a, b, c] = self.corners(k);
        let (l1, l2, l3) = (-(r + s) / 2.0, (1.0 + r) / 2.0, (1.0 + s) / 2.0);
        [
            l1 * a[0] + l2 * b[0] + l3 * c[0],
            l1 * a[1] + l2 * b[1] + l3 * c[1],
        ]
    }

    /// Physical `(x, y)` -> reference `(r, s)` on element `k` (affine inverse).
    #[inline]
    pub fn to_reference(&self, k: usize, [x, y]: [f64; 2]) -> [f64; 2] {
        let g = &self.geometry[k];
        let a = self.vertices[self.triangles[k][0]];
        let (dx, dy) = (x - a[0], y - a[1]);
        [g.rx * dx + g.ry * dy - 1.0, g.sx * dx + g.sy * dy - 1.0]
    }

    /// Whether `p` lies in the closed triangle `k`, up to the geometric tolerance.
    pub fn contains(&self, k: usize, p: [f64; 2]) -> bool {
        let [a, b, c] = self.corners(k);
        let tol = self.eps * self.bbox.extent().max(1.0);
        let orient = |u: [f64; 2], v: [f64; 2]| {
            let len = ((v[0] - u[0]).powi(2) + (v[1] - u[1]).powi(2)).sqrt();
            ((v[0] - u[0]) * (p[1] - u[1]) - (v[1] - u[1]) * (p[0] - u[0])) / len
        };
        orient(a, b) >= -tol && orient(b, c) >= -tol && orient(c, a) >= -tol
    }

    /// First element containing `p`, by exhaustive search.
    pub fn locate(&self, p: [f64; 2]) -> Option<usize> {
        (0..self.num_elements()).find(|&k| self.contains(k, p))
    }

    /// Interval `[lo, hi]` of along-axis coordinates where the line
    /// `across == c` meets triangle `k`, if it meets it at all.
    pub fn cross_section(&self, k: usize, axis: Axis, c: f64) -> Option<(f64, f64)> {
        let pts = self.corners(k).map(|p| axis.split(p));
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for f in 0..3 {
            // canonical endpoint order so shared edges give identical results
            let (mut p, mut q) = (pts[f], pts[(f + 1) % 3]);
            if (q.1, q.0) < (p.1, p.0) {
                std::mem::swap(&mut p, &mut q);
            }
            let (dp, dq) = (p.1 - c, q.1 - c);
            if dp == 0.0 {
                lo = lo.min(p.0);
                hi = hi.max(p.0);
            }
            if dq == 0.0 {
                lo = lo.min(q.0);
                hi = hi.max(q.0);
            }
            if dp < 0.0 && dq > 0.0 {
                let t = p.0 + (c - p.1) * (q.0 - p.0) / (q.1 - p.1);
                lo = lo.min(t);
                hi = hi.max(t);
            }
        }
        (lo <= hi).then_some((lo, hi))
    }

    /// Trace from `point` along `axis` towards the domain boundary
    /// (`Left`: decreasing coordinate, `Right`: increasing).
    pub fn trace_segment(&self, point: [f64; 2], axis: Axis, side: Side) -> Result<TraceResult> {
        let host = self.locate(point).ok_or(Error::PointOutsideMesh {
            x: point[0],
            y: point[1],
        })?;
        self.trace_from(host, point, axis, side)
    }

    /// As [`Mesh::trace_segment`] with the host element already known.
    pub fn trace_from(
        &self,
        host: usize,
        point: [f64; 2],
        axis: Axis,
        side: Side,
    ) -> Result<TraceResult> {
        // Work in a signed coordinate that always decreases along the trace.
        let sign = match side {
            Side::Left => 1.0,
            Side::Right => -1.0,
        };
        let (t0, c) = axis.split(point);
        let t0 = sign * t0;
        let (bmin, bmax) = self.bbox.range(axis);
        let limit = if sign > 0.0 { bmin } else { -bmax };
        let eps = self.eps;
        let section = |k: usize| {
            self.cross_section(k, axis, c).map(|(lo, hi)| {
                if sign > 0.0 {
                    (lo, hi)
                } else {
                    (-hi, -lo)
                }
            })
        };
        let gap = |at: f64| Error::TraceGap {
            x: point[0],
            y: point[1],
            axis,
            side,
            at: sign * at,
        };

        let (host_lo, host_hi) = section(host).ok_or_else(|| gap(t0))?;
        if t0 < host_lo - eps || t0 > host_hi + eps {
            return Err(Error::PointOutsideMesh {
                x: point[0],
                y: point[1],
            });
        }
        let mut entries = Vec::new();
        if t0 - host_lo > eps {
            entries.push((host, host_lo, t0, true));
        }
        let mut current = host;
        let mut front = host_lo.min(t0);

        let join_tol = 100.0 * eps;
        let continues = |k: usize, front: f64| -> Option<f64> {
            let (lo, hi) = section(k)?;
            ((hi - front).abs() <= join_tol && lo < front - eps).then_some(lo)
        };

        while front > limit + eps {
            let mut next = None;
            for &m in &self.elem_to_elem[current] {
                if m != current {
                    if let Some(lo) = continues(m, front) {
                        next = Some((m, lo));
                        break;
                    }
                }
            }
            if next.is_none() {
                next = self.triangles[current]
                    .iter()
                    .flat_map(|&v| self.vertex_to_elems[v].iter().copied())
                    .filter(|&m| m != current)
                    .find_map(|m| continues(m, front).map(|lo| (m, lo)));
            }
            if next.is_none() {
                next = (0..self.num_elements())
                    .filter(|&m| m != current)
                    .find_map(|m| continues(m, front).map(|lo| (m, lo)));
            }
            match next {
                Some((m, lo)) => {
                    entries.push((m, lo, front, false));
                    current = m;
                    front = lo;
                }
                None => {
                    // Left the domain before the bounding box: allowed only
                    // through a boundary face; resume if the line re-enters.
                    let exit = axis.join(sign * front, c);
                    if !self.on_boundary_near(current, exit) {
                        return Err(gap(front));
                    }
                    let reentry = (0..self.num_elements())
                        .filter_map(|m| section(m).map(|(lo, hi)| (m, lo, hi)))
                        .filter(|&(_, lo, hi)| hi < front - eps && hi - lo > eps)
                        .max_by(|a, b| a.2.total_cmp(&b.2));
                    match reentry {
                        Some((m, lo, hi)) => {
                            entries.push((m, lo, hi, false));
                            current = m;
                            front = lo;
                        }
                        None => break,
                    }
                }
            }
        }

        let mut entries: Vec<TraceEntry> = entries
            .into_iter()
            .map(|(element, lo, hi, host)| {
                let (lo, hi) = if sign > 0.0 { (lo, hi) } else { (-hi, -lo) };
                TraceEntry {
                    element,
                    lo,
                    hi,
                    host,
                }
            })
            .collect();
        if sign > 0.0 {
            entries.reverse();
        }
        Ok(TraceResult { entries })
    }

    fn on_boundary_near(&self, k: usize, p: [f64; 2]) -> bool {
        let tol = 1e3 * self.eps;
        self.triangles[k]
            .iter()
            .flat_map(|&v| self.vertex_to_elems[v].iter().copied())
            .chain(std::iter::once(k))
            .any(|m| {
                (0..3).any(|f| {
                    self.is_boundary_face(m, f) && {
                        let t = self.triangles[m];
                        segment_distance(p, self.vertices[t[f]], self.vertices[t[(f + 1) % 3]])
                            <= tol
                    }
                })
            })
    }
}

fn segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (ux, uy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = ux * ux + uy * uy;
    let t = (((p[0] - a[0]) * ux + (p[1] - a[1]) * uy) / len2).clamp(0.0, 1.0);
    ((p[0] - a[0] - t * ux).powi(2) + (p[1] - a[1] - t * uy).powi(2)).sqrt()
}

fn element_geometry([a, b, c]: [[f64; 2]; 3]) -> ElementGeometry {
    let (xr, yr) = ((b[0] - a[0]) / 2.0, (b[1] - a[1]) / 2.0);
    let (xs, ys) = ((c[0] - a[0]) / 2.0, (c[1] - a[1]) / 2.0);
    let jacobian = xr * ys - xs * yr;
    let raw = [[yr, -xr], [ys - yr, -xs + xr], [-ys, xs]];
    let mut normals = [[0.0; 2]; 3];
    let mut face_jacobian = [0.0; 3];
    for f in 0..3 {
        let len = raw[f][0].hypot(raw[f][1]);
        normals[f] = [raw[f][0] / len, raw[f][1] / len];
        face_jacobian[f] = len;
    }
    let dist = |p: [f64; 2], q: [f64; 2]| (p[0] - q[0]).hypot(p[1] - q[1]);
    ElementGeometry {
        jacobian,
        rx: ys / jacobian,
        ry: -xs / jacobian,
        sx: -yr / jacobian,
        sy: xr / jacobian,
        normals,
        face_jacobian,
        diameter: dist(a, b).max(dist(b, c)).max(dist(c, a)),
    }
}

/// Structured `n x n` square mesh of `[x0,x1] x [y0,y1]`, each cell split along
/// its main diagonal. Handy for tests and small experiments.
pub fn structured_square(n: usize, [x0, x1]: [f64; 2], [y0, y1]: [f64; 2]) -> Result<Mesh> {
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            vertices.push([
                x0 + (x1 - x0) * i as f64 / n as f64,
                y0 + (y1 - y0) * j as f64 / n as f64,
            ]);
        }
    }
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            triangles.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            triangles.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    Mesh::from_parts(vertices, triangles)
}
