mod common;

use common::*;
use gwselect::gw::{
    gw_discrepancy, gw_gradient, gw_gradient_direct, gw_infinity, gw_objective, line_search_step,
    solve_gw, solve_gw_from, GwConfig, PenaltyKind,
};
use gwselect::linear_ot::{coupling_from_permutation, product_coupling, Coupling, Permutation};
use gwselect::mmspace::DistanceMatrix;
use gwselect::rng::SplitMix64;
use ndarray::{array, Array2};
use rand::Rng;

const PENALTIES: [PenaltyKind; 2] = [PenaltyKind::AbsL1, PenaltyKind::SquaredL2];

fn two_point() -> (DistanceMatrix, DistanceMatrix) {
    (
        DistanceMatrix::new(array![[0.0, 1.0], [1.0, 0.0]], "a").unwrap(),
        DistanceMatrix::new(array![[0.0, 2.0], [2.0, 0.0]], "b").unwrap(),
    )
}

#[test]
fn discrepancy_matches_nested_loops() {
    let mut rng = SplitMix64::new(1);
    for case in 0..100 {
        let n = 2 + case % 4;
        let a = random_space(n, 3, &mut rng);
        let b = random_dissimilarity(n, &mut rng);
        let pi = random_coupling(n, &mut rng);
        for kind in PENALTIES {
            let oracle = nested_discrepancy(&pi.weights().to_owned(), &a.values().to_owned(), &b.values().to_owned(), kind);
            let got = gw_discrepancy(&pi, &a, &b, kind).unwrap();
            assert!((got - oracle).abs() <= 1e-10, "case {case}: {got} vs {oracle}");
            let fast = gw_objective(&pi, &a, &b, kind).unwrap();
            assert!((fast - oracle).abs() <= 1e-10, "case {case}: {fast} vs {oracle}");
            assert!(got >= 0.0);
        }
    }
}

#[test]
fn product_coupling_two_point_fixture() {
    let (a, b) = two_point();
    let pi = product_coupling(2).unwrap();
    let oracle = nested_discrepancy(&pi.weights().to_owned(), &a.values().to_owned(), &b.values().to_owned(), PenaltyKind::AbsL1);
    // 16 terms of mass 1/16: |0-0| x4, |0-2| x4, |1-0| x4, |1-2| x4
    assert!((oracle - 1.0).abs() < 1e-15);
    assert!((gw_discrepancy(&pi, &a, &b, PenaltyKind::AbsL1).unwrap() - oracle).abs() < 1e-15);
}

#[test]
fn gradient_matches_nested_loops() {
    let (a, b) = two_point();
    let id = coupling_from_permutation(&Permutation::identity(2));
    let c = gw_gradient(&id, &a, &b, PenaltyKind::AbsL1).unwrap();
    let oracle = nested_gradient(&id.weights().to_owned(), &a.values().to_owned(), &b.values().to_owned(), PenaltyKind::AbsL1);
    for (x, y) in c.iter().zip(oracle.iter()) {
        assert!((x - y).abs() < 1e-15);
    }

    let mut rng = SplitMix64::new(2);
    for case in 0..40 {
        let n = 2 + case % 5;
        let a = random_space(n, 4, &mut rng);
        let b = random_space(n, 2, &mut rng);
        let pi = random_coupling(n, &mut rng);
        for kind in PENALTIES {
            let oracle = nested_gradient(&pi.weights().to_owned(), &a.values().to_owned(), &b.values().to_owned(), kind);
            let got = gw_gradient(&pi, &a, &b, kind).unwrap();
            for (x, y) in got.iter().zip(oracle.iter()) {
                assert!((x - y).abs() < 1e-12, "case {case} {kind:?}: {x} vs {y}");
            }
        }
    }
}

#[test]
fn squared_l2_factorized_gradient_matches_direct_sum() {
    let mut rng = SplitMix64::new(3);
    for n in (2..=50).step_by(4) {
        let a = random_space(n, 5, &mut rng);
        let b = random_space(n, 7, &mut rng);
        let pi = random_coupling(n, &mut rng);
        let fast = gw_gradient(&pi, &a, &b, PenaltyKind::SquaredL2).unwrap();
        let direct = gw_gradient_direct(&pi, &a, &b, PenaltyKind::SquaredL2).unwrap();
        let scale = direct.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (x, y) in fast.iter().zip(direct.iter()) {
            assert!((x - y).abs() <= 1e-8 * scale, "n={n}: {x} vs {y}");
        }
    }
}

/// Interior point of the polytope plus a tangent direction, as raw
/// matrices so `pi +/- h * delta` can be built without clamping.
fn interior_pair(n: usize, rng: &mut SplitMix64) -> (Array2<f64>, Array2<f64>) {
    let product = product_coupling(n).unwrap().into_weights();
    let pi = (&product + &random_coupling(n, rng).into_weights()) * 0.5;
    let delta = random_coupling(n, rng).into_weights() - random_coupling(n, rng).into_weights();
    (pi, delta)
}

#[test]
fn gradient_directional_derivative_by_central_differences() {
    let mut rng = SplitMix64::new(4);
    let h = 1e-6;
    for kind in PENALTIES {
        for case in 0..50 {
            let n = 3 + case % 4;
            let a = random_space(n, 3, &mut rng);
            let b = random_space(n, 4, &mut rng);
            let (pi, delta) = interior_pair(n, &mut rng);
            let c = gw_gradient(&Coupling::new(pi.clone()).unwrap(), &a, &b, kind).unwrap();
            let analytic: f64 = (&c * &delta).sum();
            let plus = Coupling::new(&pi + &(&delta * h)).unwrap();
            let minus = Coupling::new(&pi - &(&delta * h)).unwrap();
            let fd = (gw_discrepancy(&plus, &a, &b, kind).unwrap()
                - gw_discrepancy(&minus, &a, &b, kind).unwrap())
                / (2.0 * h);
            let scale = analytic.abs().max(fd.abs()).max(1e-3);
            assert!(
                (analytic - fd).abs() <= 1e-5 * scale,
                "{kind:?} case {case}: {analytic} vs {fd}"
            );
        }
    }
}

#[test]
fn role_symmetry() {
    let mut rng = SplitMix64::new(5);
    for case in 0..50 {
        let n = 2 + case % 6;
        let a = random_space(n, 3, &mut rng);
        let b = random_dissimilarity(n, &mut rng);
        let pi = random_coupling(n, &mut rng);
        for kind in PENALTIES {
            let ab = gw_discrepancy(&pi, &a, &b, kind).unwrap();
            let ba = gw_discrepancy(&pi.transpose(), &b, &a, kind).unwrap();
            assert!((ab - ba).abs() <= 1e-12, "{ab} vs {ba}");
        }
    }
}

#[test]
fn line_search_beats_dense_grid() {
    let mut rng = SplitMix64::new(6);
    for case in 0..30 {
        let n = 5;
        let a = random_space(n, 3, &mut rng);
        let b = random_space(n, 3, &mut rng);
        let pi = random_coupling(n, &mut rng);
        let vertex = coupling_from_permutation(&Permutation::new(random_permutation(n, &mut rng)).unwrap());
        for kind in PENALTIES {
            let (eta, value) = line_search_step(&pi, &vertex, &a, &b, kind).unwrap();
            assert!((0.0..=1.0).contains(&eta));
            let at_eta = gw_discrepancy(&pi.interpolate(&vertex, eta), &a, &b, kind).unwrap();
            assert!((value - at_eta).abs() < 1e-12);
            let grid_best = (0..=1000)
                .map(|t| {
                    let w = pi.weights().to_owned() * (1.0 - t as f64 / 1000.0)
                        + vertex.weights().to_owned() * (t as f64 / 1000.0);
                    nested_discrepancy(&w, &a.values().to_owned(), &b.values().to_owned(), kind)
                })
                .fold(f64::INFINITY, f64::min);
            assert!(value <= grid_best + 1e-9, "case {case} {kind:?}: {value} > {grid_best}");
            assert!(value <= gw_objective(&pi, &a, &b, kind).unwrap());
        }
    }
}

#[test]
fn line_search_edge_cases() {
    let (a, b) = two_point();
    let id = coupling_from_permutation(&Permutation::identity(2));
    let (eta, value) = line_search_step(&id, &id, &a, &b, PenaltyKind::AbsL1).unwrap();
    assert_eq!(eta, 0.0);
    assert!((value - 0.5).abs() < 1e-15);

    // a == b: moving from the product coupling to the identity vertex is
    // downhill and concave along the segment, so the step is 1
    let same = DistanceMatrix::new(array![[0.0, 1.0], [1.0, 0.0]], "a").unwrap();
    let product = product_coupling(2).unwrap();
    let e0 = gw_discrepancy(&product, &same, &same, PenaltyKind::AbsL1).unwrap();
    let e_half = gw_discrepancy(&product.interpolate(&id, 0.5), &same, &same, PenaltyKind::AbsL1).unwrap();
    let e1 = gw_discrepancy(&id, &same, &same, PenaltyKind::AbsL1).unwrap();
    assert!(e1 < e0 && e1 - 2.0 * e_half + e0 <= 0.0);
    let (eta, value) = line_search_step(&product, &id, &same, &same, PenaltyKind::AbsL1).unwrap();
    assert_eq!(eta, 1.0);
    assert_eq!(value, 0.0);
}

#[test]
fn frank_wolfe_reaches_permutation_oracle_with_all_vertex_starts() {
    let mut rng = SplitMix64::new(7);
    for case in 0..100 {
        let n = 2 + case % 4;
        let a = random_space(n, 3, &mut rng);
        let b = random_space(n, 2, &mut rng);
        let starts: Vec<Coupling> = all_permutations(n)
            .into_iter()
            .map(|p| coupling_from_permutation(&Permutation::new(p).unwrap()))
            .collect();
        for kind in PENALTIES {
            let config = GwConfig { penalty: kind, ..GwConfig::default() };
            let result = solve_gw_from(&a, &b, &config, &starts).unwrap();
            assert_monotone(&result);
            let oracle = brute_force_gw(&a.values().to_owned(), &b.values().to_owned(), kind);
            assert!(result.value <= oracle + 1e-9, "case {case}: {} > {oracle}", result.value);
            let check = gw_discrepancy(&result.coupling, &a, &b, kind).unwrap();
            assert!(close(check, result.value, 1e-10));
        }
    }
}

#[test]
fn all_120_starts_at_n5() {
    let mut rng = SplitMix64::new(8);
    let a = random_space(5, 4, &mut rng);
    let b = random_space(5, 4, &mut rng);
    let starts: Vec<Coupling> = all_permutations(5)
        .into_iter()
        .map(|p| coupling_from_permutation(&Permutation::new(p).unwrap()))
        .collect();
    assert_eq!(starts.len(), 120);
    let result = solve_gw_from(&a, &b, &GwConfig::default(), &starts).unwrap();
    assert_monotone(&result);
    let oracle = brute_force_gw(&a.values().to_owned(), &b.values().to_owned(), PenaltyKind::AbsL1);
    assert!(result.value <= oracle + 1e-9);
}

#[test]
fn identical_spaces_give_zero() {
    let mut rng = SplitMix64::new(9);
    for n in 2..=8 {
        let a = random_space(n, 4, &mut rng);
        let config = GwConfig { restarts: 3, ..GwConfig::default() };
        let result = solve_gw(&a, &a, &config).unwrap();
        assert_monotone(&result);
        assert!(result.value <= 1e-9, "n={n}: {}", result.value);
    }
}

#[test]
fn isometric_copies_give_zero() {
    let mut rng = SplitMix64::new(10);
    for case in 0..20 {
        let n = 3 + case % 4;
        let a = random_space(n, 5, &mut rng);
        let perm = random_permutation(n, &mut rng);
        let b = a.permuted(&perm).unwrap();
        for kind in PENALTIES {
            let config = GwConfig { restarts: 10, seed: case as u64, penalty: kind, ..GwConfig::default() };
            let result = solve_gw(&a, &b, &config).unwrap();
            assert_monotone(&result);
            assert!(result.value <= 1e-9, "case {case} n={n} {kind:?}: {}", result.value);
        }
    }
}

#[test]
fn solver_is_deterministic_and_reports_best_restart() {
    let mut rng = SplitMix64::new(11);
    let a = random_space(12, 6, &mut rng);
    let b = random_space(12, 6, &mut rng);
    let config = GwConfig { restarts: 4, ..GwConfig::default() };
    let first = solve_gw(&a, &b, &config).unwrap();
    let second = solve_gw(&a, &b, &config).unwrap();
    assert_eq!(first, second);
    assert_monotone(&first);
    for r in 1..=4 {
        let fewer = solve_gw(&a, &b, &GwConfig { restarts: r, ..config.clone() }).unwrap();
        assert!(first.value <= fewer.value);
    }
    assert_eq!(first.trace[0].iteration, 0);
    assert!(first.trace.last().unwrap().objective >= 0.0);
}

#[test]
fn solver_traces_monotone_on_random_instances() {
    let mut rng = SplitMix64::new(12);
    for case in 0..20 {
        let n = 5 + rng.random_range(0..30);
        let a = random_space(n, 8, &mut rng);
        let b = random_space(n, 8, &mut rng);
        for kind in PENALTIES {
            let config = GwConfig { restarts: 2, seed: case, penalty: kind, ..GwConfig::default() };
            let result = solve_gw(&a, &b, &config).unwrap();
            assert_monotone(&result);
            assert!(result.iterations_run <= config.max_iters);
            let direct = gw_discrepancy(&result.coupling, &a, &b, kind).unwrap();
            assert!(close(direct, result.value, 1e-10));
        }
    }
}

#[test]
fn shape_mismatch_is_an_error() {
    let mut rng = SplitMix64::new(13);
    let a = random_space(4, 3, &mut rng);
    let b = random_space(5, 3, &mut rng);
    assert!(solve_gw(&a, &b, &GwConfig::default()).is_err());
    assert!(gw_discrepancy(&product_coupling(4).unwrap(), &a, &b, PenaltyKind::AbsL1).is_err());
}

#[test]
fn bottleneck_matches_two_level_enumeration() {
    let mut rng = SplitMix64::new(14);
    for case in 0..30 {
        let n = 2 + case % 5;
        let a = random_space(n, 3, &mut rng);
        let b = random_space(n, 3, &mut rng);
        let (value, perm) = gw_infinity(&a, &b).unwrap();
        let oracle = brute_force_bottleneck(&a.values().to_owned(), &b.values().to_owned());
        assert_eq!(value, oracle, "case {case}");
        let p = perm.as_slice();
        let mut worst = 0.0f64;
        for i in 0..n {
            for k in 0..n {
                worst = worst.max((a.get(i, k) - b.get(p[i], p[k])).abs());
            }
        }
        assert_eq!(worst, value);
    }
}
