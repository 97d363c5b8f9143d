use std::f64::consts::LN_2;

use approx::assert_relative_eq;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use treetrace::boundary::boundary_distance;
use treetrace::operators::{extend, trace};
use treetrace::{BoundaryFunction, DyadicCell, TreeFunction, TreeParams, VertexAddress, YoungPhi};

fn params(k: usize, depth: usize, lambda2: f64) -> TreeParams {
    TreeParams::new(k, LN_2, (k as f64).ln() + LN_2, lambda2, depth, 8).unwrap()
}

fn boundary(k: usize, depth: usize) -> impl Strategy<Value = BoundaryFunction> {
    prop::collection::vec(-10.0..10.0f64, k.pow(depth as u32))
        .prop_map(move |v| BoundaryFunction::new(k, depth, v).unwrap())
}

fn shape() -> impl Strategy<Value = (usize, usize)> {
    (2usize..=3, 1usize..=5)
}

fn random_tree(k: usize, depth: usize, seed: u64) -> TreeFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let levels = (0..=depth)
        .map(|l| (0..k.pow(l as u32)).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    TreeFunction::new(k, levels).unwrap()
}

fn random_vertex(rng: &mut ChaCha8Rng, k: usize, depth: usize) -> VertexAddress {
    let level = rng.gen_range(0..=depth);
    VertexAddress::from_index(k, level, rng.gen_range(0..k.pow(level as u32)))
}

/// `∫_γ g ds` summed edge by edge from the stored gradients.
fn path_integral(f: &TreeFunction, p: &TreeParams, x: &VertexAddress, y: &VertexAddress) -> f64 {
    let g = f.upper_gradient_edges(p).unwrap();
    let c = x.common_prefix_len(y);
    let climb = |v: &VertexAddress| -> f64 {
        (c..v.level())
            .map(|n| g.level(n)[v.ancestor(n + 1).index(f.k())] * p.edge_length(n).unwrap())
            .sum()
    };
    climb(x) + climb(y)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn trace_inverts_extension(((k, n), seed) in (shape(), any::<u64>())) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = BoundaryFunction::new(k, n, (0..k.pow(n as u32)).map(|_| rng.gen()).collect()).unwrap();
        prop_assert_eq!(trace(&extend(&u)), u);
    }

    #[test]
    fn operators_are_linear(
        (u, v) in shape().prop_flat_map(|(k, n)| (boundary(k, n), boundary(k, n))),
        a in -5.0..5.0f64,
        b in -5.0..5.0f64,
    ) {
        let lhs = extend(&u.combine(a, &v, b).unwrap());
        let rhs = extend(&u).combine(a, &extend(&v), b).unwrap();
        for (l, r) in lhs.levels().iter().flatten().zip(rhs.levels().iter().flatten()) {
            prop_assert!((l - r).abs() <= 1e-12 * (1.0 + l.abs()));
        }
        let f = random_tree(u.k(), u.depth(), 1);
        let t = trace(&f.combine(a, &extend(&v), b).unwrap());
        let expected = trace(&f).combine(a, &v, b).unwrap();
        prop_assert_eq!(t, expected);
    }

    #[test]
    fn gauge_is_homogeneous(
        (k, n) in shape(),
        seed in any::<u64>(),
        c in prop_oneof![-8.0..-0.125f64, 0.125..8.0f64],
        lambda1 in -1.0..2.0f64,
    ) {
        let p = params(k, n, 0.0);
        let phi = YoungPhi::new(2.0, lambda1).unwrap();
        let f = random_tree(k, n, seed);
        let base = f.lphi_norm(&p, &phi, 1e-12).unwrap();
        let scaled = f.scaled(c).lphi_norm(&p, &phi, 1e-12).unwrap();
        assert_relative_eq!(scaled, c.abs() * base, max_relative = 1e-9);
        let g = f.gradient_norm(&p, &phi, 1e-12).unwrap();
        let gs = f.scaled(c).gradient_norm(&p, &phi, 1e-12).unwrap();
        assert_relative_eq!(gs, c.abs() * g, max_relative = 1e-9);
    }

    #[test]
    fn boundary_distance_is_an_ultrametric(
        (k, n) in (2usize..=3, 2usize..=7),
        idx in prop::array::uniform3(any::<prop::sample::Index>()),
    ) {
        let p = params(k, n, 0.0);
        let leaves = k.pow(n as u32);
        let [a, b, c] = idx.map(|i| DyadicCell::from_index(k, n, i.index(leaves)));
        prop_assert!(boundary_distance(&p, &a, &a).is_err());
        prop_assume!(a != b && b != c && a != c);
        let d = |x: &DyadicCell, y: &DyadicCell| boundary_distance(&p, x, y).unwrap();
        prop_assert_eq!(d(&a, &b), d(&b, &a));
        prop_assert!(d(&a, &c) <= d(&a, &b).max(d(&b, &c)));
    }
}

#[test]
fn upper_gradient_inequality_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for (k, n, lambda2) in [(2, 6, 0.0), (3, 4, 1.0), (2, 3, -0.5)] {
        let p = params(k, n, lambda2);
        for seed in 0..4 {
            let f = random_tree(k, n, seed);
            for _ in 0..1000 {
                let x = random_vertex(&mut rng, k, n);
                let y = random_vertex(&mut rng, k, n);
                let jump = (f.value(&x).unwrap() - f.value(&y).unwrap()).abs();
                let integral = path_integral(&f, &p, &x, &y);
                assert!(jump <= integral * (1.0 + 1e-12) + 1e-15, "{x} {y}: {jump} > {integral}");
                assert_relative_eq!(
                    integral,
                    f.geodesic_variation(&x, &y).unwrap(),
                    max_relative = 1e-12,
                    epsilon = 1e-15
                );
            }
        }
    }
}
