use dotshape::fem::{assemble, boundary_mass_matrix, h1_matrix, Coefficients, FeSpace, Order, SourceSpec};
use dotshape::mesh::{build_disk_mesh, Mesh};
use dotshape::problems::{evaluate_cost, solve_state};
use dotshape::sparse::dot;
use dotshape::ParametricCurve;
use proptest::prelude::*;
use std::sync::OnceLock;

fn mesh() -> &'static Mesh {
    static M: OnceLock<Mesh> = OnceLock::new();
    M.get_or_init(|| build_disk_mesh(3.0, 0.2, &ParametricCurve::circle(1.5)).unwrap())
}

fn source() -> SourceSpec {
    SourceSpec::Constant { value: 1.0 }
}

fn h1_diff_sq(m: &Mesh, a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    h1_matrix(m, &FeSpace::new(m, Order::P1)).bilinear(&d, &d)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn coercive_and_symmetric(
        alpha in 0.2f64..3.0, mu_out in 0.05f64..3.0, mu_in in 0.05f64..3.0, zeta in 0.05f64..2.0,
        seed in proptest::collection::vec(-1.0f64..1.0, 64),
    ) {
        let m = mesh();
        let c = Coefficients::new(alpha, mu_out, mu_in, zeta);
        let a = assemble(m, &c, Order::P1).matrix;
        prop_assert!(a.max_asymmetry() <= 1e-13 * a.max_abs());
        let h1 = h1_matrix(m, &FeSpace::new(m, Order::P1));
        let x: Vec<f64> = (0..m.num_nodes()).map(|i| seed[i % 64] * (1.0 + (i as f64).sin())).collect();
        let lower = alpha.min(mu_out).min(mu_in);
        prop_assert!(a.bilinear(&x, &x) >= lower * h1.bilinear(&x, &x) * (1.0 - 1e-12));
    }

    #[test]
    fn boundary_light_decreases_with_absorption(mu in 0.5f64..3.0, dmu in 0.05f64..1.0) {
        let m = mesh();
        let c = Coefficients::new(1.0, 1.0, mu, 0.3);
        let mb = boundary_mass_matrix(m, &FeSpace::new(m, Order::P1), None);
        let ones = vec![1.0; m.num_nodes()];
        let lo = solve_state(m, &c, &source()).unwrap();
        let hi = solve_state(m, &c.with_mu_in(mu + dmu), &source()).unwrap();
        prop_assert!(dot(&ones, &mb.mul_vec(&hi.values)) < dot(&ones, &mb.mul_vec(&lo.values)));
    }
}

/// Random pairs of absorptions from the admissible box, deterministic.
fn pairs(seed: u64, n: usize) -> Vec<(f64, f64, f64, f64)> {
    use rand::SeedableRng;
    use rand_distr::{Distribution, Uniform};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let u = Uniform::new(0.5, 3.0).unwrap();
    (0..n).map(|_| (u.sample(&mut rng), u.sample(&mut rng), u.sample(&mut rng), u.sample(&mut rng))).collect()
}

fn lipschitz_ratio(m: &Mesh, (a, b, c, d): (f64, f64, f64, f64)) -> f64 {
    let u1 = solve_state(m, &Coefficients::new(1.0, a, b, 0.3), &source()).unwrap();
    let u2 = solve_state(m, &Coefficients::new(1.0, c, d, 0.3), &source()).unwrap();
    h1_diff_sq(m, &u1.values, &u2.values).sqrt() / (a - c).abs().max((b - d).abs())
}

#[test]
fn parameter_to_state_map_is_lipschitz() {
    let m = mesh();
    let fitted = pairs(1, 20).into_iter().map(|p| lipschitz_ratio(m, p)).fold(0.0, f64::max);
    assert!(fitted.is_finite() && fitted > 0.0);
    for p in pairs(2, 20) {
        let r = lipschitz_ratio(m, p);
        assert!(r <= 1.5 * fitted, "ratio {r} exceeds fitted constant {fitted}");
    }
}

#[test]
fn cost_decomposition_is_exact() {
    let m = mesh();
    let c = Coefficients::new(1.0, 1.0, 1.3, 0.3);
    let u = solve_state(m, &c, &source()).unwrap();
    let h = dotshape::fem::boundary_trace(m, &FeSpace::new(m, Order::P1), &u, None).unwrap();
    let shifted = dotshape::fem::Measurement::new(h.s.clone(), h.values.iter().map(|v| v * 1.1).collect(), h.perimeter, None).unwrap();
    let poly = m.interface_polyline().unwrap();
    let r = evaluate_cost(m, &u, &shifted, &c, 1e-3, 2e-4, &poly).unwrap();
    assert_eq!(r.total - (r.misfit + r.tikhonov + r.perimeter_term), 0.0);
}
