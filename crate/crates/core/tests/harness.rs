mod common;

use std::sync::Arc;

use common::{load_mesh, mesh_path, rl_oracle};
use fracdg::harness::{
    exact_solution, forcing, l2_error, read_csv, run_convergence, solve, write_csv, ManufacturedForcing,
};
use fracdg::mesh::structured_square;
use fracdg::{CaseConfig, Example, FieldVector, Mesh, ReferenceElement, RunResult, StepSize};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cube(v: f64) -> f64 {
    (v * v - 1.0).powi(3)
}

fn cube_dd(v: f64) -> f64 {
    30.0 * v.powi(4) - 36.0 * v * v + 6.0
}

#[test]
fn forcing_reduces_to_the_classical_one_at_order_two() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (example, weight) in [(Example::One, 1.0), (Example::Two, 2.0)] {
        let cfg = CaseConfig::new(example, 1, 2.0, 2.0);
        for _ in 0..20 {
            let (x, y) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let laplacian = cube_dd(x) * cube(y) + cube(x) * cube_dd(y);
            let expected = -(cube(x) * cube(y) + weight * laplacian);
            let got = forcing(&cfg, x, y, 0.0);
            assert!((got - expected).abs() < 1e-8, "{example:?} ({x}, {y}): {got} vs {expected}");
        }
    }
}

#[test]
fn forcing_decays_like_the_solution() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let cfg = CaseConfig::new(Example::Two, 1, 1.3, 1.7);
    let f = ManufacturedForcing::for_case(&cfg);
    for _ in 0..20 {
        let (x, y, t) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(0.0..3.0));
        let at0 = f.eval(x, y, 0.0);
        assert!((f.eval(x, y, t) - (-t as f64).exp() * at0).abs() <= 1e-14 * at0.abs().max(1.0));
    }
}

#[test]
fn forcing_at_the_origin_matches_direct_quadrature() {
    let alpha = 1.5;
    let cfg = CaseConfig::new(Example::One, 1, alpha, alpha);
    // Caputo and Riemann-Liouville agree here since u and u' vanish at -1.
    let g = rl_oracle(cube_dd, -1.0, 0.0, 0.0, 2.0 - alpha);
    let u = cube(0.0);
    let expected = -(u * u + 2.0 * u * g);
    let got = forcing(&cfg, 0.0, 0.0, 0.0);
    assert!((got - expected).abs() < 1e-8, "{got} vs {expected}");
}

#[test]
fn l2_error_of_an_exact_polynomial_vanishes() {
    let mesh = load_mesh("sq136");
    for n in 1..=4 {
        let reference = ReferenceElement::new(n).unwrap();
        let p = |x: f64, y: f64, t: f64| (1.0 + t) * (x.powi(n as i32) - 0.5 * x * y.powi(n as i32 - 1) + 0.25);
        let u = FieldVector::interpolate(&mesh, &reference, |x, y| p(x, y, 0.3));
        let err = l2_error(&mesh, &reference, &u, 0.3, p).unwrap();
        assert!(err <= 1e-12, "N={n}: {err}");
    }
}

#[test]
fn l2_error_of_zero_is_the_norm_of_the_solution() {
    // sqrt((int (1-x^2)^6 dx)^2) = 2^13 (6!)^2 / 13!
    let factorial = |n: u32| (1..=n).map(f64::from).product::<f64>();
    let closed = 2f64.powi(13) * factorial(6).powi(2) / factorial(13);
    let mesh = structured_square(12, [-1.0, 1.0], [-1.0, 1.0]).unwrap();
    let reference = ReferenceElement::new(6).unwrap();
    let zero = FieldVector::zeros(mesh.num_elements(), reference.np);
    let err = l2_error(&mesh, &reference, &zero, 0.0, exact_solution).unwrap();
    assert!((err - closed).abs() < 1e-10, "{err} vs {closed}");
    assert!((closed - 0.681985).abs() < 1e-6);
}

#[test]
fn l2_error_ignores_element_order() {
    let mesh = load_mesh("sq136");
    let mut triangles = mesh.triangles.clone();
    triangles.reverse();
    triangles.rotate_left(17);
    let shuffled = Mesh::from_parts(mesh.vertices.clone(), triangles).unwrap();
    let reference = ReferenceElement::new(2).unwrap();
    let f = |x: f64, y: f64| (3.0 * x).sin() * (2.0 * y).cos();
    let a = FieldVector::interpolate(&mesh, &reference, f);
    let b = FieldVector::interpolate(&shuffled, &reference, f);
    let ea = l2_error(&mesh, &reference, &a, 0.4, exact_solution).unwrap();
    let eb = l2_error(&shuffled, &reference, &b, 0.4, exact_solution).unwrap();
    assert!((ea - eb).abs() <= 1e-13 * ea, "{ea} vs {eb}");
}

#[test]
fn identical_meshes_leave_the_order_empty() {
    let mut cfg = CaseConfig::new(Example::One, 1, 1.5, 1.5);
    cfg.meshes = vec![mesh_path("sq034"), mesh_path("sq034")];
    cfg.t_final = 0.05;
    let results = run_convergence(&cfg).unwrap();
    assert_eq!(results.len(), 2);
    assert!(results.iter().all(|r| r.order.is_none()));
    assert_eq!(results[0].l2_error, results[1].l2_error);

    let mut csv = Vec::new();
    write_csv(&results, &mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("example,K,N,alpha,beta,h_max,l2_error,order,seconds"));
    assert!(lines.next().unwrap().split(',').nth(7) == Some(""));
}

#[test]
fn coarse_sweep_is_rejected() {
    let mut cfg = CaseConfig::new(Example::One, 1, 1.5, 1.5);
    cfg.meshes = vec![mesh_path("sq136"), mesh_path("sq034")];
    assert!(run_convergence(&cfg).is_err());
}

#[test]
fn error_is_continuous_in_alpha() {
    let mesh = Arc::new(load_mesh("sq034"));
    let run = |alpha: f64| {
        let mut cfg = CaseConfig::new(Example::Two, 2, alpha, 1.6);
        cfg.t_final = 0.1;
        cfg.step = StepSize::Fixed(1e-3);
        solve(&cfg, Arc::clone(&mesh)).unwrap().l2_error
    };
    for alpha in [1.2, 1.5, 1.9] {
        let (a, b) = (run(alpha), run(alpha + 1e-6));
        assert!((a - b).abs() < 1e-4 * a, "alpha {alpha}: {a} vs {b}");
    }
}

fn run_result() -> impl Strategy<Value = RunResult> {
    (
        prop::bool::ANY,
        1usize..5000,
        1usize..9,
        1.0f64..=2.0,
        1.0f64..=2.0,
        1e-3f64..3.0,
        0.0f64..1e3,
        prop::option::of(-5.0f64..10.0),
        0.0f64..1e4,
    )
        .prop_map(|(two, k, n, alpha, beta, h_max, l2_error, order, seconds)| RunResult {
            example: if two { Example::Two } else { Example::One },
            k,
            n,
            alpha,
            beta,
            h_max,
            l2_error,
            order,
            seconds,
        })
}

proptest! {
    #[test]
    fn csv_output_round_trips(rows in prop::collection::vec(run_result(), 0..6)) {
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        let back = read_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back, rows);
    }
}
