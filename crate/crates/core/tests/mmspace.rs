mod common;

use common::*;
use gwselect::embed_io::{EmbeddingSet, Modality};
use gwselect::mmspace::{
    median_scale_match, offdiag_median, pairwise_distances, pairwise_distances_rows, read_dst1,
    write_dst1, DistanceMatrix,
};
use gwselect::rng::SplitMix64;
use ndarray::Array2;
use proptest::prelude::*;
use rand::Rng;

fn scalar_cosine(u: &[f64], v: &[f64]) -> f64 {
    let mut dot = 0.0;
    let mut nu = 0.0;
    let mut nv = 0.0;
    for (a, b) in u.iter().zip(v) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    dot / (nu.sqrt() * nv.sqrt())
}

#[test]
fn pairwise_matches_scalar_loop() {
    let mut rng = SplitMix64::new(30);
    for case in 0..20 {
        let n = 2 + case * 3;
        let x = gaussian(n, 1 + case % 9, &mut rng);
        let d = pairwise_distances_rows(x.view(), "x").unwrap();
        for i in 0..n {
            assert_eq!(d.get(i, i), 0.0);
            for j in 0..n {
                assert_eq!(d.get(i, j), d.get(j, i));
                let u = x.row(i).to_vec();
                let v = x.row(j).to_vec();
                let cos = scalar_cosine(&u, &v).clamp(-1.0, 1.0);
                // compare in cosine space, where both forms are well conditioned
                assert!((d.get(i, j).cos() - cos).abs() < 1e-12, "{i},{j}");
                // and in angle space away from the acos singularities
                if cos.abs() < 0.99 {
                    assert!((d.get(i, j) - cos.acos()).abs() < 1e-12);
                }
            }
        }
    }
}

#[test]
fn pairwise_from_embedding_set_uses_f32_values() {
    let data = Array2::from_shape_vec((3, 2), vec![1.0f32, 0.0, 0.0, 1.0, 1.0, 1.0]).unwrap();
    let set = EmbeddingSet::new(
        vec!["a".into(), "b".into(), "c".into()],
        Modality::Vision,
        data,
        "toy",
    )
    .unwrap();
    let d = pairwise_distances(&set).unwrap();
    assert!((d.get(0, 1) - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
    assert!((d.get(0, 2) - std::f64::consts::FRAC_PI_4).abs() < 1e-15);
    assert_eq!(d.label(), "toy");
}

#[test]
fn median_matches_sorting_oracle() {
    let mut rng = SplitMix64::new(31);
    for n in 2..40 {
        let m = random_dissimilarity(n, &mut rng);
        assert_eq!(offdiag_median(&m).unwrap(), sorted_median(m.upper_triangle()));
    }
    // ties and an even count: upper triangle of this 4x4 is [1,1,2,2,3,3]
    let vals = [[0.0, 1.0, 2.0, 3.0], [1.0, 0.0, 3.0, 1.0], [2.0, 3.0, 0.0, 2.0], [3.0, 1.0, 2.0, 0.0]];
    let m = DistanceMatrix::new(Array2::from_shape_fn((4, 4), |(i, j)| vals[i][j]), "t").unwrap();
    assert_eq!(offdiag_median(&m).unwrap(), 2.0);
}

#[test]
fn scale_matching_equalizes_medians() {
    let mut rng = SplitMix64::new(32);
    for case in 0..100 {
        let n = 3 + case % 30;
        let source = random_space(n, 4, &mut rng);
        let factor = 0.1 + 5.0 * rng.random::<f64>();
        let target_raw = random_space(n, 6, &mut rng);
        let target = DistanceMatrix::new(target_raw.values().mapv(|v| v * factor), "t").unwrap();
        let matched = median_scale_match(&source, &target).unwrap();
        let after = offdiag_median(&matched.scaled).unwrap();
        let want = offdiag_median(&target).unwrap();
        assert!((after - want).abs() <= 1e-12 * want, "case {case}: {after} vs {want}");
        assert_eq!(matched.target_median, want);

        let again = median_scale_match(&matched.scaled, &target).unwrap();
        assert!((again.scale - 1.0).abs() <= 1e-12, "idempotence: {}", again.scale);
    }
}

#[test]
fn dst1_round_trip_is_exact() {
    let mut rng = SplitMix64::new(33);
    let m = random_space(7, 3, &mut rng);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.dst");
    write_dst1(m.values(), &path).unwrap();
    assert_eq!(read_dst1(&path).unwrap(), m.values().to_owned());
}

proptest! {
    #[test]
    fn distances_are_a_symmetric_bounded_matrix(
        seed in any::<u64>(),
        n in 2usize..25,
        d in 1usize..8,
    ) {
        let mut rng = SplitMix64::new(seed);
        let x = gaussian(n, d, &mut rng);
        let m = pairwise_distances_rows(x.view(), "p").unwrap();
        for i in 0..n {
            prop_assert_eq!(m.get(i, i), 0.0);
            for j in 0..n {
                prop_assert_eq!(m.get(i, j), m.get(j, i));
                prop_assert!((0.0..=std::f64::consts::PI).contains(&m.get(i, j)));
            }
        }
    }

    #[test]
    fn angular_triangle_inequality(seed in any::<u64>(), d in 2usize..6) {
        let mut rng = SplitMix64::new(seed);
        let x = gaussian(3, d, &mut rng);
        let m = pairwise_distances_rows(x.view(), "p").unwrap();
        prop_assert!(m.get(0, 2) <= m.get(0, 1) + m.get(1, 2) + 1e-14);
    }

    #[test]
    fn distances_ignore_positive_row_scaling(seed in any::<u64>(), n in 2usize..10) {
        let mut rng = SplitMix64::new(seed);
        let x = gaussian(n, 4, &mut rng);
        let scales: Vec<f64> = (0..n).map(|_| 0.01 + 100.0 * rng.random::<f64>()).collect();
        let mut y = x.clone();
        for (mut row, s) in y.rows_mut().into_iter().zip(&scales) {
            row *= *s;
        }
        let a = pairwise_distances_rows(x.view(), "x").unwrap();
        let b = pairwise_distances_rows(y.view(), "y").unwrap();
        for (u, v) in a.values().iter().zip(b.values().iter()) {
            prop_assert!((u - v).abs() < 1e-13);
        }
    }

    #[test]
    fn permuted_matrix_relabels_entries(seed in any::<u64>(), n in 2usize..10) {
        let mut rng = SplitMix64::new(seed);
        let m = random_dissimilarity(n, &mut rng);
        let p = random_permutation(n, &mut rng);
        let q = m.permuted(&p).unwrap();
        for i in 0..n {
            for k in 0..n {
                prop_assert_eq!(q.get(i, k), m.get(p[i], p[k]));
            }
        }
    }
}
