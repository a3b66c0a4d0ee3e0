//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use fracdg::quadrature::{
    gamma, gauss_jacobi, rl_integral_shifted_power, rl_integral_shifted_power_right, shift_to_left_powers,
    shift_to_right_powers,
};
use fracdg::harness::exact_solution;
use fracdg::stiffness::StripCubature;
use fracdg::time::{advance, Source, StepSize, TimeSpec};
use fracdg::{Axis, Example, FracStiffness, LdgContext, Mesh, ReferenceElement, Side};

/// The unstructured sweep of [-1, 1]^2, coarse to fine.
pub const SWEEP: [&str; 4] = ["sq034", "sq136", "sq388", "sq902"];

pub fn mesh_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../meshes").join(name)
}

pub fn load_mesh(name: &str) -> Mesh {
    Mesh::load(mesh_path(name)).unwrap()
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let r = gauss_jacobi(n, 0.0, 0.0).unwrap();
    (r.nodes().to_vec(), r.weights().to_vec())
}

/// Composite Gauss-Legendre of `f` on `[a, b]` with `pieces` equal panels.
pub fn composite(f: impl Fn(f64) -> f64, a: f64, b: f64, pieces: usize, pts: usize) -> f64 {
    let (x, w) = legendre(pts);
    let h = (b - a) / pieces as f64;
    let mut sum = 0.0;
    for p in 0..pieces {
        let lo = a + p as f64 * h;
        for (xi, wi) in x.iter().zip(&w) {
            sum += 0.5 * h * wi * f(lo + 0.5 * h * (xi + 1.0));
        }
    }
    sum
}

/// Composite Gauss-Legendre on `[0, b]` with panels graded geometrically
/// towards 0.
pub fn graded(f: impl Fn(f64) -> f64, b: f64, levels: usize, pts: usize) -> f64 {
    let (x, w) = legendre(pts);
    let mut sum = 0.0;
    let mut hi = b;
    for level in 0..levels {
        let lo = if level + 1 == levels { 0.0 } else { 0.5 * hi };
        for (xi, wi) in x.iter().zip(&w) {
            sum += 0.5 * (hi - lo) * wi * f(lo + 0.5 * (hi - lo) * (xi + 1.0));
        }
        hi = lo;
    }
    sum
}

/// `(1/Gamma(g)) int_lo^hi |t - xi|^(g-1) f(xi) dxi` for an interval on one
/// side of `t`, via the substitution `w = |t - xi|^g`, which removes the
/// singularity, and graded composite Gauss-Legendre in `w`.
pub fn rl_oracle(f: impl Fn(f64) -> f64, lo: f64, hi: f64, t: f64, g: f64) -> f64 {
    let (near, far) = if hi <= t { (t - hi, t - lo) } else { (lo - t, hi - t) };
    let dir = if hi <= t { -1.0 } else { 1.0 };
    let near = near.max(0.0);
    let (wa, wb) = (near.powf(g), far.powf(g));
    let integrand = |w: f64| f(t + dir * w.powf(1.0 / g));
    let val = if near == 0.0 {
        graded(integrand, wb, 40, 16)
    } else {
        composite(integrand, wa, wb, 8, 16)
    };
    val / g / gamma(g)
}

/// Intersection of the line `across = c` with triangle `k`, as an interval
/// along the axis, computed by clipping each edge.
pub fn clip(mesh: &Mesh, k: usize, axis: Axis, c: f64) -> Option<(f64, f64)> {
    let v = mesh.corners(k);
    let mut ts = Vec::new();
    for e in 0..3 {
        let (a0, c0) = axis.split(v[e]);
        let (a1, c1) = axis.split(v[(e + 1) % 3]);
        if (c0 - c) * (c1 - c) <= 0.0 && c0 != c1 {
            let s = (c - c0) / (c1 - c0);
            ts.push(a0 + s * (a1 - a0));
        } else if c0 == c && c1 == c {
            ts.push(a0);
            ts.push(a1);
        }
    }
    if ts.is_empty() {
        return None;
    }
    let lo = ts.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = ts.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (hi > lo).then_some((lo, hi))
}

/// Dense brute-force version of the fractional stiffness matrix.
pub fn stiffness_oracle(mesh: &Mesh, reference: &ReferenceElement, alpha: f64, axis: Axis, side: Side) -> Vec<Vec<f64>> {
    let np = reference.np;
    let kk = mesh.num_elements();
    let g = 2.0 - alpha;
    let mut dense = vec![vec![0.0; kk * np]; kk * np];
    let basis = |m: usize, j: usize, along: f64, across: f64| {
        let rs = mesh.to_reference(m, axis.join(along, across));
        let b = reference.eval_basis(&[clamp_ref(rs)]).unwrap();
        b[(j, 0)]
    };
    let cub = StripCubature::for_degree(mesh, axis, reference.degree).unwrap();
    for k in 0..kk {
        for (xq, w) in cub.element_points(k) {
            let (t, c) = axis.split(xq);
            let phi = reference.eval_basis(&[clamp_ref(mesh.to_reference(k, xq))]).unwrap();
            for m in 0..kk {
                let Some((lo, hi)) = clip(mesh, m, axis, c) else { continue };
                let (lo, hi) = match side {
                    Side::Left => (lo, hi.min(t)),
                    Side::Right => (lo.max(t), hi),
                };
                if hi - lo <= 1e-14 {
                    continue;
                }
                for j in 0..np {
                    let fj = rl_oracle(|xi| basis(m, j, xi, c), lo, hi, t, g);
                    for i in 0..np {
                        dense[k * np + i][m * np + j] += w * phi[(i, 0)] * fj;
                    }
                }
            }
        }
    }
    dense
}

// keep round-off from tripping the containment check of `eval_basis`
fn clamp_ref([r, s]: [f64; 2]) -> [f64; 2] {
    let r = r.max(-1.0);
    let s = s.max(-1.0);
    let excess = r + s;
    if excess > 0.0 {
        [r - 0.5 * excess, s - 0.5 * excess]
    } else {
        [r, s]
    }
}

pub fn frobenius_rel(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (ra, rb) in a.iter().zip(b) {
        for (x, y) in ra.iter().zip(rb) {
            num += (x - y) * (x - y);
            den += y * y;
        }
    }
    (num / den).sqrt()
}

pub fn assembled_dense(mesh: &Mesh, reference: &ReferenceElement, alpha: f64, axis: Axis, side: Side) -> Vec<Vec<f64>> {
    FracStiffness::assemble(mesh, reference, alpha, axis, side).unwrap().to_dense()
}

/// Small unstructured meshes with at most four triangles.
pub fn small_meshes() -> Vec<Mesh> {
    vec![
        Mesh::from_parts(vec![[-1.0, -1.0], [1.0, -1.0], [-1.0, 1.0]], vec![[0, 1, 2]]).unwrap(),
        Mesh::from_parts(
            vec![[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]],
            vec![[0, 1, 2], [0, 2, 3]],
        )
        .unwrap(),
        Mesh::from_parts(
            vec![[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0], [0.13, -0.21]],
            vec![[0, 1, 4], [1, 2, 4], [2, 3, 4], [3, 0, 4]],
        )
        .unwrap(),
    ]
}

/// Adaptive Gauss-Legendre: split until a 10-point panel agrees with its two
/// halves to `tol` (absolute) or to round-off.
pub fn adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn panel(f: &dyn Fn(f64) -> f64, a: f64, b: f64, x: &[f64], w: &[f64]) -> f64 {
        let h = 0.5 * (b - a);
        x.iter().zip(w).map(|(xi, wi)| h * wi * f(a + h * (xi + 1.0))).sum()
    }
    fn go(f: &dyn Fn(f64) -> f64, a: f64, b: f64, whole: f64, tol: f64, depth: u32, x: &[f64], w: &[f64]) -> f64 {
        let m = 0.5 * (a + b);
        let (l, r) = (panel(f, a, m, x, w), panel(f, m, b, x, w));
        if (l + r - whole).abs() <= tol.max(8.0 * f64::EPSILON * (l + r).abs()) || depth >= 50 {
            l + r
        } else {
            go(f, a, m, l, 0.5 * tol, depth + 1, x, w) + go(f, m, b, r, 0.5 * tol, depth + 1, x, w)
        }
    }
    let (x, w) = legendre(10);
    let whole = panel(f, a, b, &x, &w);
    go(f, a, b, whole, tol, 0, &x, &w)
}

/// `int_{-1}^{1} (1 - eta)^a eta^d deta` from the recurrence obtained by
/// integrating by parts, `(d + a + 1) m_d = d m_{d-1} + (-1)^d 2^(a+1)`.
pub fn jacobi_moment(a: f64, d: usize) -> f64 {
    let c = 2f64.powf(a + 1.0);
    let mut m = c / (a + 1.0);
    for k in 1..=d {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        m = (k as f64 * m + sign * c) / (k as f64 + a + 1.0);
    }
    m
}

/// Largest relative moment error of the Gauss-Jacobi rules with `n <= nmax`
/// points and weight exponent `1 - alpha` on either side, over degrees
/// `d <= 2n - 1`.
pub fn gauss_jacobi_worst(alphas: &[f64], nmax: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for &alpha in alphas {
        let a = 1.0 - alpha;
        for n in 1..=nmax {
            for (left, rule) in [(true, gauss_jacobi(n, a, 0.0).unwrap()), (false, gauss_jacobi(n, 0.0, a).unwrap())] {
                for d in 0..2 * n {
                    // (1 + eta)^a eta^d is the mirror image of the left weight
                    let sign = if left || d % 2 == 0 { 1.0 } else { -1.0 };
                    let exact = sign * jacobi_moment(a, d);
                    let got: f64 = rule.nodes().iter().zip(rule.weights()).map(|(x, w)| w * x.powi(d as i32)).sum();
                    worst = worst.max((got - exact).abs() / exact.abs());
                }
            }
        }
    }
    worst
}

/// Left Riemann-Liouville integral of `(xi - a)^p` at `x`, by adaptive
/// quadrature after the substitution `w = (x - xi)^g`.
pub fn rl_power_oracle(p: u32, g: f64, a: f64, x: f64) -> f64 {
    let top = (x - a).powf(g);
    let f = |w: f64| (x - w.powf(1.0 / g) - a).max(0.0).powi(p as i32);
    adaptive(&f, 0.0, top, 1e-15) / g / gamma(g)
}

/// Largest relative error of `rl_integral_shifted_power` against
/// [`rl_power_oracle`] for `p <= 6` on a few evaluation points.
pub fn rl_power_worst(gammas: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for &g in gammas {
        for p in 0..=6 {
            for x in [-0.7, 0.0, 0.45, 1.0] {
                let got = rl_integral_shifted_power(p, g, -1.0, x);
                let want = rl_power_oracle(p, g, -1.0, x);
                worst = worst.max((got - want).abs() / want.abs());
            }
        }
    }
    worst
}

/// Worst semigroup defect `I^g2 I^g1 (x-a)^p` against `I^(g1+g2) (x-a)^p`,
/// with the outer integral of the non-integer power done by its Gamma
/// function factor.
pub fn semigroup_worst() -> f64 {
    let mut worst: f64 = 0.0;
    for (g1, g2) in [(0.3, 0.7), (0.25, 0.5), (0.01, 0.99)] {
        for p in 0..=6u32 {
            for x in [-0.5, 0.2, 1.0] {
                let inner = rl_integral_shifted_power(p, g1, -1.0, x) / (x + 1.0f64).powf(p as f64 + g1);
                let q = p as f64 + g1;
                let outer = gamma(q + 1.0) / gamma(q + 1.0 + g2) * (x + 1.0f64).powf(q + g2);
                let twice = inner * outer;
                let once = rl_integral_shifted_power(p, g1 + g2, -1.0, x);
                worst = worst.max((twice - once).abs() / once.abs());
            }
        }
    }
    worst
}

/// Relative gap between `int (I_l^g u) v` and `int u (I_r^g v)` on [-1, 1]
/// for monomial coefficient vectors `u` and `v`, with every term integrated
/// in closed form.
pub fn adjointness_gap(u: &[f64], v: &[f64], g: f64) -> f64 {
    // int_{-1}^{1} (x+1)^e dx = int_{-1}^{1} (1-x)^e dx = 2^(e+1)/(e+1)
    let moment = |e: f64| 2f64.powf(e + 1.0) / (e + 1.0);
    let pair = |a: &[f64], b: &[f64], shift: f64, left: bool| -> f64 {
        let a = if left { shift_to_left_powers(a, shift) } else { shift_to_right_powers(a, -shift) };
        let b = if left { shift_to_left_powers(b, shift) } else { shift_to_right_powers(b, -shift) };
        let mut sum = 0.0;
        for (p, &ap) in a.iter().enumerate() {
            // I^g (shifted power p) = factor * (shifted)^(p+g); the factor is
            // read off the closed form at unit distance
            let factor = if left {
                rl_integral_shifted_power(p as u32, g, -1.0, 0.0)
            } else {
                rl_integral_shifted_power_right(p as u32, g, 1.0, 0.0)
            };
            for (q, &bq) in b.iter().enumerate() {
                sum += ap * factor * bq * moment(p as f64 + q as f64 + g);
            }
        }
        sum
    };
    let lhs = pair(u, v, -1.0, true);
    let rhs = pair(v, u, -1.0, false);
    (lhs - rhs).abs() / lhs.abs().max(rhs.abs())
}

/// Counts of traces checked and failures, and the worst coverage defect
/// relative to the domain extent, over every volume cubature point of a
/// square-domain mesh in all four directions.
pub fn trace_coverage(mesh: &Mesh, reference: &ReferenceElement) -> (usize, usize, f64) {
    let bbox = mesh.bbox;
    let extent = bbox.extent();
    let mut count = 0;
    let mut failures = 0;
    let mut worst: f64 = 0.0;
    for k in 0..mesh.num_elements() {
        for &rs in &reference.cubature.points {
            let p = mesh.to_physical(k, rs);
            for axis in [Axis::X, Axis::Y] {
                let (t, _) = axis.split(p);
                let (lo, hi) = bbox.range(axis);
                for side in [Side::Left, Side::Right] {
                    count += 1;
                    let want = match side {
                        Side::Left => t - lo,
                        Side::Right => hi - t,
                    };
                    let Ok(trace) = mesh.trace_from(k, p, axis, side) else {
                        failures += 1;
                        continue;
                    };
                    let e = &trace.entries;
                    let mut ok = e.windows(2).all(|w| w[0].hi <= w[1].lo + mesh.eps());
                    ok &= e.iter().all(|x| x.hi - x.lo > 0.0);
                    let defect = (trace.total_length() - want).abs() / extent;
                    worst = worst.max(defect);
                    if !ok || defect > 1e-10 {
                        failures += 1;
                    }
                }
            }
        }
    }
    (count, failures, worst)
}

/// Error at t = 1 of `y' = -y`, `y(0) = 1`, integrated with step `dt`.
pub fn decay_error(dt: f64) -> f64 {
    let traj = fracdg::time::integrate(|y, _| Ok(y.iter().map(|v| -v).collect()), &[1.0], 0.0, 1.0, dt, |_, _, _, _| {})
        .unwrap();
    (traj.state[0] - (-1.0f64).exp()).abs()
}

/// Observed orders between consecutive step sizes of [`decay_error`].
pub fn decay_orders(dts: &[f64]) -> Vec<f64> {
    let errs: Vec<f64> = dts.iter().map(|&dt| decay_error(dt)).collect();
    errs.windows(2)
        .zip(dts.windows(2))
        .map(|(e, h)| (e[0] / e[1]).ln() / (h[0] / h[1]).ln())
        .collect()
}

/// Zero-forcing run from the interpolated manufactured solution to `t_final`
/// with the automatic step. Returns the largest one-step growth of the
/// discrete L2 norm and the norms at the start and the end.
pub fn energy_growth(mesh: &Arc<Mesh>, degree: usize, alpha: f64, example: Example, t_final: f64) -> (f64, f64, f64) {
    let reference = Arc::new(ReferenceElement::new(degree).unwrap());
    let ctx = LdgContext::new(Arc::clone(mesh), reference, alpha, alpha, example.default_coefficients()).unwrap();
    let u0 = ctx.interpolate(|x, y| exact_solution(x, y, 0.0));
    let spec = TimeSpec::new(t_final, StepSize::Auto).unwrap();
    let start = ctx.l2_norm(&u0);
    let mut prev = start;
    let mut worst = f64::NEG_INFINITY;
    advance(&ctx, &u0, &spec, &Source::None, |info| {
        worst = worst.max(info.l2 - prev);
        prev = info.l2;
    })
    .unwrap();
    (worst, start, prev)
}
