mod common;

use std::sync::{Arc, OnceLock};

use isaacs_fd::discrete_ops::{apply_h_h, apply_l_h, consistency_gap, inf_sup, sup_inf, Symbol};
use isaacs_fd::experiments::fit_rate;
use isaacs_fd::fields::Quadratic;
use isaacs_fd::grid::{Ball, Domain, Ellipsoid, Grid, GridError, GridFunction};
use isaacs_fd::linalg::Matrix;
use isaacs_fd::problem::catalog::{self, Params, Shape, NAMES};
use isaacs_fd::problem::{fuse, make_pucci, FuseMode, IsaacsProblem};
use isaacs_fd::stencil::{
    decompose, decompose_diffusion, generate_lambda, reassemble_drift, split_drift, DecompositionCache,
    StencilError,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{ball_grid, constant_problem, random_s_delta};

fn sym2() -> impl Strategy<Value = Matrix<f64>> {
    (-3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64).prop_map(|(a, b, c)| Matrix::from_rows(&[vec![a, b], vec![b, c]]))
}

fn symbol2() -> impl Strategy<Value = Symbol<f64>> {
    (-2.0..2.0f64, prop::collection::vec(-2.0..2.0f64, 2), sym2()).prop_map(|(u0, grad, hess)| Symbol { u0, grad, hess })
}

struct Fixture {
    grid: Arc<Grid<f64>>,
    problems: Vec<IsaacsProblem<f64>>,
    caches: Vec<DecompositionCache<f64>>,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let shape = Shape::Ball(Ball::centered(2, 1.0));
        let grid = ball_grid(2, 0.1, 1);
        let problems: Vec<_> = NAMES.iter().map(|n| catalog::build(n, &Params::new(), &shape).unwrap()).collect();
        let caches = problems.iter().map(|_| DecompositionCache::new(Arc::clone(grid.directions()), 1e-6)).collect();
        Fixture { grid, problems, caches }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn drift_split_reassembles(b in prop::collection::vec(-5.0..5.0f64, 1..4), m in 1i64..3) {
        let dirs = generate_lambda(b.len(), m);
        let w = split_drift(&b, &dirs);
        prop_assert!(w.iter().all(|&x| x >= 0.0));
        prop_assert_eq!(reassemble_drift(&w, &dirs), b);
    }

    #[test]
    fn decomposition_feasibility_grows_with_m(seed in any::<u64>(), d in 2usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_s_delta(&mut rng, d, 0.2);
        let mut prev: Option<f64> = None;
        for m in 1..=3 {
            match decompose_diffusion(&a, &generate_lambda(d, m), 1e-6) {
                Ok(w) => {
                    if let Some(t) = prev {
                        prop_assert!(w.basis_floor >= t - 1e-9, "floor fell from {} to {} at m = {}", t, w.basis_floor, m);
                    }
                    prev = Some(w.basis_floor);
                }
                Err(StencilError::InsufficientStencil { .. }) => prop_assert!(prev.is_none(), "feasible at smaller m, not at m = {}", m),
                Err(e) => prop_assert!(false, "{}", e),
            }
        }
    }

    #[test]
    fn decomposition_is_deterministic(seed in any::<u64>(), b in prop::collection::vec(-2.0..2.0f64, 2)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_s_delta(&mut rng, 2, 0.3);
        let dirs = generate_lambda(2, 2);
        let first = decompose(&a, &b, &dirs, 1e-6);
        let second = decompose(&a, &b, &dirs, 1e-6);
        prop_assert_eq!(format!("{first:?}"), format!("{second:?}"));
    }

    #[test]
    fn grid_partition_closure_and_classification(
        h in 0.05..0.6f64,
        radius in 0.5..2.0f64,
        d in 1usize..3,
        m in 1i64..3,
        ellipse in any::<bool>(),
    ) {
        let domain: Arc<dyn Domain<f64>> = if ellipse && d == 2 {
            Arc::new(Ellipsoid::centered(vec![radius, 0.6 * radius]))
        } else {
            Arc::new(Ball::centered(d, radius))
        };
        let dirs = Arc::new(generate_lambda(d, m));
        match Grid::build(Arc::clone(&domain), h, Arc::clone(&dirs)) {
            Ok(g) => {
                prop_assert_eq!(g.interior().len() + g.boundary().len(), g.len());
                for &i in g.interior() {
                    prop_assert!(domain.contains_ball(g.point(i), h * dirs.radius()));
                    for l in dirs.directions() {
                        prop_assert!(g.offset(i, l.components()).is_some());
                    }
                }
                for &i in g.boundary() {
                    prop_assert!(!domain.contains_ball(g.point(i), h * dirs.radius() * (1.0 + 1e-12)));
                }
            }
            Err(GridError::EmptyInterior { .. }) => {}
            Err(e) => prop_assert!(false, "{}", e),
        }
    }

    #[test]
    fn pucci_homogeneous_and_convex(u in symbol2(), w in symbol2(), lambda in 0.01..10.0f64) {
        let p = make_pucci(0.5, &generate_lambda(2, 1));
        let pu = p.apply(&u);
        prop_assert!((p.apply(&u.scaled(lambda)) - lambda * pu).abs() <= 1e-12 * (1.0 + lambda * pu.abs()));
        let mid = u.add(&w).scaled(0.5);
        prop_assert!(p.apply(&mid) <= 0.5 * (pu + p.apply(&w)) + 1e-12);
    }

    #[test]
    fn fusion_is_ordered_in_k(s in symbol2(), k1 in 0.0..5.0f64, dk in 0.0..5.0f64, x in prop::collection::vec(-0.5..0.5f64, 2)) {
        let f = fixture();
        let base = Arc::new(f.problems[3].clone());
        let pucci = Arc::new(make_pucci(0.5, &generate_lambda(2, 1)));
        let at = |k, mode| fuse(Arc::clone(&base), Arc::clone(&pucci), k, mode).unwrap().realized().hamiltonian(&s, &x);
        prop_assert!(at(k1, FuseMode::Max) >= at(k1 + dk, FuseMode::Max));
        prop_assert!(at(k1, FuseMode::Min) <= at(k1 + dk, FuseMode::Min));
    }

    #[test]
    fn fit_recovers_planted_exponents(c in 0.01..100.0f64, beta in 0.1..3.0f64, h0 in 0.05..0.5f64) {
        let pairs: Vec<(f64, f64)> = (0..4).map(|k| {
            let h = h0 / 2f64.powi(k);
            (h, c * h.powf(beta))
        }).collect();
        let (rate, resid) = fit_rate(&pairs).unwrap();
        prop_assert!((rate - beta).abs() <= 1e-10);
        prop_assert!(resid <= 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn fusion_matches_two_term_formula(s in symbol2(), k in 0.0..6.0f64, max in any::<bool>(), name in 0usize..5) {
        let f = fixture();
        let x = [0.1, -0.3];
        let base = Arc::new(f.problems[name].clone());
        let pucci = Arc::new(make_pucci(0.5, &generate_lambda(2, 1)));
        let mode = if max { FuseMode::Max } else { FuseMode::Min };
        let fused = fuse(base, pucci, k, mode).unwrap();
        let realized = fused.realized().hamiltonian(&s, &x);
        let direct = fused.direct_value(&s, &x);
        prop_assert!((realized - direct).abs() <= 1e-12 * (1.0 + direct.abs()), "{} vs {}", realized, direct);
    }

    #[test]
    fn h_h_is_monotone(seed in any::<u64>(), name in 0usize..5, pick in any::<prop::sample::Index>()) {
        let f = fixture();
        let (p, cache, g) = (&f.problems[name], &f.caches[name], &f.grid);
        let x0 = g.interior()[pick.index(g.interior().len())];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        use rand::Rng;
        let u: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let w: Vec<f64> = u.iter().enumerate().map(|(i, &v)| if i == x0 { v } else { v + rng.gen_range(0.0..0.5) }).collect();
        let hu = apply_h_h(p, &GridFunction::from_values(Arc::clone(g), u), x0, cache).unwrap().value;
        let hw = apply_h_h(p, &GridFunction::from_values(Arc::clone(g), w), x0, cache).unwrap().value;
        prop_assert!(hu <= hw + 1e-11 * (1.0 + hu.abs()));
    }

    #[test]
    fn h_h_is_local(seed in any::<u64>(), name in 0usize..5, pick in any::<prop::sample::Index>()) {
        let f = fixture();
        let (p, cache, g) = (&f.problems[name], &f.caches[name], &f.grid);
        let x0 = g.interior()[pick.index(g.interior().len())];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        use rand::Rng;
        let u: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut w: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(-5.0..5.0)).collect();
        w[x0] = u[x0];
        for l in g.directions().directions() {
            let j = g.offset(x0, l.components()).unwrap();
            w[j] = u[j];
        }
        let hu = apply_h_h(p, &GridFunction::from_values(Arc::clone(g), u), x0, cache).unwrap();
        let hw = apply_h_h(p, &GridFunction::from_values(Arc::clone(g), w), x0, cache).unwrap();
        prop_assert_eq!(hu, hw);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn sup_inf_never_exceeds_inf_sup(table in prop::collection::vec(-10.0..10.0f64, 1..30), n_a in 1usize..6) {
        let n_b = table.len() / n_a;
        prop_assume!(n_b >= 1);
        let t = &table[..n_a * n_b];
        prop_assert!(sup_inf(t, n_a, n_b).value <= inf_sup(t, n_a, n_b));
    }

    #[test]
    fn quadratics_are_reproduced_exactly(seed in any::<u64>(), m in sym2(), p in prop::collection::vec(-1.0..1.0f64, 2), c in -1.0..1.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_s_delta(&mut rng, 2, 0.5);
        let problem = constant_problem(a, vec![0.0, 0.0], 0.0, 0.0, 0.5);
        let grid = ball_grid(2, 0.2, 3);
        let cache = DecompositionCache::new(Arc::clone(grid.directions()), 1e-6);
        let q = Quadratic { m: m.scale(0.5), p, c };
        let gap = consistency_gap(&problem, 0, 0, &q, &grid, &cache).unwrap();
        prop_assert!(gap <= 1e-11, "{}", gap);
    }

    #[test]
    fn constant_c_only_term(cval in 0.0..2.0f64, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_s_delta(&mut rng, 2, 0.5);
        let problem = constant_problem(a, vec![0.0, 0.0], cval, 0.0, 0.4);
        let grid = ball_grid(2, 0.25, 2);
        let cache = DecompositionCache::new(Arc::clone(grid.directions()), 1e-6);
        let ones = GridFunction::constant(Arc::clone(&grid), 1.0);
        for &i in grid.interior() {
            prop_assert!((apply_l_h(&problem, 0, 0, &ones, i, &cache).unwrap() + cval).abs() <= 1e-12);
        }
    }
}
