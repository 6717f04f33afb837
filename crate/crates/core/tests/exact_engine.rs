use proptest::prelude::*;

use hittime::exact::{
    green_function, hitting_matrix, relaxation_time_of, solve_grounded, solve_pcg, spectral_decomposition,
    HittingTable, SolverKind,
};
use hittime::families::{complete_graph, generate, lamplighter, rectangular_torus, FamilyParams};
use hittime::{build_kernel, MarkovKernel};

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

fn assert_routes_agree(kernel: &MarkovKernel) {
    let a = HittingTable::spectral(kernel).unwrap();
    let b = HittingTable::linear_solve(kernel).unwrap();
    let n = kernel.vertex_count();
    for x in 0..n {
        for y in 0..n {
            assert!((a.get(x, y) - b.get(x, y)).abs() <= 1e-6 * (1.0 + b.get(x, y)), "H({x},{y})");
        }
    }
}

/// A spanning tree (bipartite) plus optional extra edges and loops.
fn random_graph() -> impl Strategy<Value = MarkovKernel> {
    (3usize..14)
        .prop_flat_map(|n| {
            (
                Just(n),
                prop::collection::vec((any::<prop::sample::Index>(), 0.2f64..5.0), n - 1),
                prop::collection::vec((0..n, 0..n, 0.2f64..5.0), 0..6),
                prop::option::of((0..n, 0.1f64..2.0)),
            )
        })
        .prop_map(|(n, tree, extra, lp)| {
            let mut edges = Vec::new();
            for (i, (parent, w)) in tree.into_iter().enumerate() {
                let child = i + 1;
                edges.push((parent.index(child), child, w));
            }
            for (a, b, w) in extra {
                if a != b {
                    edges.push((a.min(b), a.max(b), w));
                }
            }
            if let Some((v, w)) = lp {
                edges.push((v, v, w));
            }
            build_kernel(n, &edges).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn routes_agree_on_random_graphs(kernel in random_graph()) {
        assert_routes_agree(&kernel);
    }

    #[test]
    fn laziness_rescales_hitting_times(kernel in random_graph(), lazy_half in any::<bool>()) {
        let eps = if lazy_half { 0.5 } else { 0.25 };
        let h = HittingTable::linear_solve(&kernel).unwrap();
        let he = HittingTable::spectral(&kernel.lazify(eps).unwrap()).unwrap();
        let n = kernel.vertex_count();
        for x in 0..n {
            for y in 0..n {
                prop_assert!(close(he.get(x, y) * (1.0 - eps), h.get(x, y), 1e-6));
            }
        }
    }

    #[test]
    fn green_inverts_the_laplacian(kernel in random_graph()) {
        // Laziness makes the chain aperiodic; then (I − K)G = I − π with G = 𝒢π.
        let k = kernel.lazify(0.25).unwrap();
        let info = k.periodicity();
        let green = green_function(&spectral_decomposition(&k).unwrap(), &info);
        let n = k.vertex_count();
        for x in 0..n {
            for y in 0..n {
                let g = |z: usize| green.get(z, y) * k.pi(y);
                let kg: f64 = k.holding(x) * g(x) + k.neighbors(x).map(|(z, q)| q * g(z)).sum::<f64>();
                let expected = if x == y { 1.0 } else { 0.0 } - k.pi(y);
                prop_assert!((g(x) - kg - expected).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn green_averages_to_zero(kernel in random_graph()) {
        let info = kernel.periodicity();
        let green = green_function(&spectral_decomposition(&kernel).unwrap(), &info);
        let h = HittingTable::linear_solve(&kernel).unwrap();
        let n = kernel.vertex_count();
        for x in 0..n {
            let mean: f64 = (0..n).map(|y| green.get(x, y) * kernel.pi(y)).sum();
            prop_assert!(mean.abs() <= 1e-6);
            let avg: f64 = (0..n).map(|y| kernel.pi(y) * h.get(y, x)).sum();
            let shift = if info.is_bipartite { 0.5 } else { 0.0 };
            prop_assert!(close(green.get(x, x), avg - shift, 1e-6));
        }
    }
}

#[test]
fn routes_agree_on_larger_families() {
    for params in [
        FamilyParams::Heisenberg { n: 4 },
        FamilyParams::Trace2d { alpha: 0.5, n: 12 },
        FamilyParams::Trace3d { alpha: 0.5, beta: 0.5, n: 8 },
        FamilyParams::Vicsek { k: 2 },
        FamilyParams::BirthDeath { alpha: 1.0, n: 30 },
        FamilyParams::Torus { sides: vec![2, 3, 4] },
    ] {
        assert_routes_agree(&generate(&params).unwrap().kernel);
    }
    assert_routes_agree(&lamplighter(&complete_graph(4).unwrap()).unwrap().kernel);
}

#[test]
fn hitting_matrix_has_zero_diagonal() {
    let k = generate(&FamilyParams::Sierpinski { k: 2 }).unwrap().kernel;
    let info = k.periodicity();
    let h = hitting_matrix(&green_function(&spectral_decomposition(&k).unwrap(), &info), &info);
    let n = k.vertex_count();
    assert!((0..n).all(|x| h[x * n + x].abs() < 1e-9));
}

#[test]
fn lanczos_above_the_dense_cap() {
    // 4096 vertices: relaxation time goes through Lanczos.
    let k = rectangular_torus(&[64, 64]).unwrap().kernel.lazify(0.5).unwrap();
    let beta1 = 0.5 + 0.5 * (1.0 + (2.0 * std::f64::consts::PI / 64.0).cos()) / 2.0;
    let t = relaxation_time_of(&k).unwrap();
    assert!(close(t, 1.0 / (1.0 - beta1), 1e-6), "{t}");
}

#[test]
fn conjugate_gradient_matches_cholesky() {
    let k = rectangular_torus(&[30, 40]).unwrap().kernel;
    let rhs: Vec<f64> = (0..k.vertex_count()).map(|x| k.degree(x)).collect();
    let direct = solve_grounded(&k, 7, &rhs).unwrap();
    assert_eq!(direct.solver, SolverKind::Cholesky);
    let iterative = solve_pcg(&k, 7, &rhs, 1e-12, 20_000).unwrap();
    let max = direct.values.iter().cloned().fold(0.0, f64::max);
    for (a, b) in direct.values.iter().zip(&iterative.values) {
        assert!((a - b).abs() <= 1e-7 * max);
    }
}
