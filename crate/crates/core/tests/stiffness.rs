mod common;

use common::*;
use fracdg::quadrature::{rl_integral_shifted_power, rl_integral_shifted_power_right};
use fracdg::stiffness::StripCubature;
use fracdg::{Axis, FracStiffness, Mesh, ReferenceElement, Side};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const AXES: [Axis; 2] = [Axis::X, Axis::Y];
const SIDES: [Side; 2] = [Side::Left, Side::Right];

fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

#[test]
fn assembled_matrices_match_brute_force() {
    for degree in 1..=2 {
        let reference = ReferenceElement::new(degree).unwrap();
        for mesh in small_meshes() {
            for alpha in [1.3, 1.7] {
                for axis in AXES {
                    for side in SIDES {
                        let a = assembled_dense(&mesh, &reference, alpha, axis, side);
                        let b = stiffness_oracle(&mesh, &reference, alpha, axis, side);
                        let err = frobenius_rel(&a, &b);
                        assert!(
                            err < 1e-6,
                            "N={degree} K={} alpha={alpha} {axis:?} {side:?}: rel err {err:e}",
                            mesh.num_elements()
                        );
                    }
                }
            }
        }
    }
}

#[test]
fn constant_field_on_two_elements() {
    // a convex quadrilateral, so the fractional integral of 1 at a point only
    // depends on its distance to the boundary along the line
    let mesh = Mesh::from_parts(
        vec![[-1.0, -1.0], [0.7, -0.8], [-0.2, 0.9], [1.0, 0.6]],
        vec![[0, 1, 2], [1, 3, 2]],
    )
    .unwrap();
    let alpha = 1.5;
    let g = 2.0 - alpha;
    for degree in 1..=3 {
        let reference = ReferenceElement::new(degree).unwrap();
        let np = reference.np;
        let ones = vec![1.0; mesh.num_elements() * np];
        for axis in AXES {
            let cub = StripCubature::for_degree(&mesh, axis, degree).unwrap();
            for side in SIDES {
                let s = FracStiffness::assemble(&mesh, &reference, alpha, axis, side).unwrap();
                let got = s.apply(&ones).unwrap();
                let mut expected = vec![0.0; got.len()];
                for k in 0..mesh.num_elements() {
                    for (xq, w) in cub.element_points(k) {
                        let (t, c) = axis.split(xq);
                        let (lo, hi) = (0..mesh.num_elements())
                            .filter_map(|m| clip(&mesh, m, axis, c))
                            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (l, h)| (a.min(l), b.max(h)));
                        let inner = match side {
                            Side::Left => rl_integral_shifted_power(0, g, lo, t),
                            Side::Right => rl_integral_shifted_power_right(0, g, hi, t),
                        };
                        let phi = reference.eval_basis(&[mesh.to_reference(k, xq)]).unwrap();
                        for i in 0..np {
                            expected[k * np + i] += w * phi[(i, 0)] * inner;
                        }
                    }
                }
                let num: f64 = got.iter().zip(&expected).map(|(a, b)| (a - b) * (a - b)).sum();
                let den: f64 = expected.iter().map(|b| b * b).sum();
                let rel = (num / den).sqrt();
                assert!(rel < 1e-8, "N={degree} {axis:?} {side:?}: {rel:e}");
            }
        }
    }
}

#[test]
fn order_two_is_the_limit_of_fractional_orders() {
    let mesh = load_mesh("sq034");
    for degree in 1..=2 {
        let reference = ReferenceElement::new(degree).unwrap();
        for axis in AXES {
            for side in SIDES {
                let a = assembled_dense(&mesh, &reference, 1.999, axis, side);
                let b = assembled_dense(&mesh, &reference, 2.0, axis, side);
                let rel = frobenius_rel(&a, &b);
                assert!(rel < 1e-2, "N={degree} {axis:?} {side:?}: {rel:e}");
            }
        }
    }
}

#[test]
fn blocks_only_reach_upstream_elements() {
    let reference = ReferenceElement::new(1).unwrap();
    for name in ["sq034", "sq136"] {
        let mesh = load_mesh(name);
        let extent = |k: usize, axis: Axis| {
            mesh.corners(k)
                .iter()
                .map(|&v| axis.split(v).0)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)))
        };
        for axis in AXES {
            for side in SIDES {
                let s = FracStiffness::assemble(&mesh, &reference, 1.6, axis, side).unwrap();
                assert!(s.fill_ratio() < 1.0, "{name} {axis:?} {side:?}: fill {}", s.fill_ratio());
                for k in 0..mesh.num_elements() {
                    let (k_lo, k_hi) = extent(k, axis);
                    for &m in s.row_columns(k) {
                        let (m_lo, m_hi) = extent(m, axis);
                        let reachable = match side {
                            Side::Left => m_lo < k_hi,
                            Side::Right => m_hi > k_lo,
                        };
                        assert!(reachable, "{name} {axis:?} {side:?}: block ({k}, {m})");
                    }
                }
            }
        }
    }
}

#[test]
fn apply_is_linear() {
    let mesh = load_mesh("sq136");
    let reference = ReferenceElement::new(2).unwrap();
    let s = FracStiffness::assemble(&mesh, &reference, 1.4, Axis::Y, Side::Right).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = mesh.num_elements() * reference.np;
    let (u, v) = (random_vector(&mut rng, n), random_vector(&mut rng, n));
    let c = -2.75;
    let combined: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a + c * b).collect();
    let lhs = s.apply(&combined).unwrap();
    let (su, sv) = (s.apply(&u).unwrap(), s.apply(&v).unwrap());
    let scale = lhs.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    for i in 0..n {
        assert!((lhs[i] - (su[i] + c * sv[i])).abs() <= 1e-13 * scale);
    }
}

#[test]
fn order_two_apply_inverts_with_the_mass() {
    let mesh = load_mesh("sq136");
    for degree in 1..=3 {
        let reference = ReferenceElement::new(degree).unwrap();
        let np = reference.np;
        let s = FracStiffness::assemble(&mesh, &reference, 2.0, Axis::X, Side::Left).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(degree as u64);
        let v = random_vector(&mut rng, mesh.num_elements() * np);
        let sv = s.apply(&v).unwrap();
        for k in 0..mesh.num_elements() {
            let inv = reference.inv_mass.clone() / mesh.geometry[k].jacobian;
            let back = inv * DMatrix::from_column_slice(np, 1, &sv[k * np..(k + 1) * np]);
            for i in 0..np {
                assert!((back[i] - v[k * np + i]).abs() < 1e-10);
            }
        }
    }
}
