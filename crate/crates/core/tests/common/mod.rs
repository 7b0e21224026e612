//! Independent reference implementations used as test oracles. None of
//! these call into the solver code they check.

#![allow(dead_code)]

use gwselect::gw::{GwSolveResult, PenaltyKind};
use gwselect::linear_ot::Coupling;
use gwselect::mmspace::{pairwise_distances_rows, DistanceMatrix};
use gwselect::rng::SplitMix64;
use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;

pub fn penalty(kind: PenaltyKind, x: f64, y: f64) -> f64 {
    match kind {
        PenaltyKind::AbsL1 => (x - y).abs(),
        PenaltyKind::SquaredL2 => (x - y) * (x - y),
    }
}

/// Sum over all `(i, j, k, l)`, zeros included.
pub fn nested_discrepancy(pi: &Array2<f64>, a: &Array2<f64>, b: &Array2<f64>, kind: PenaltyKind) -> f64 {
    let n = a.nrows();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    total += penalty(kind, a[[i, k]], b[[j, l]]) * pi[[i, j]] * pi[[k, l]];
                }
            }
        }
    }
    total
}

pub fn nested_gradient(pi: &Array2<f64>, a: &Array2<f64>, b: &Array2<f64>, kind: PenaltyKind) -> Array2<f64> {
    let n = a.nrows();
    Array2::from_shape_fn((n, n), |(i, j)| {
        let mut s = 0.0;
        for k in 0..n {
            for l in 0..n {
                s += penalty(kind, a[[i, k]], b[[j, l]]) * pi[[k, l]];
            }
        }
        2.0 * s
    })
}

/// All permutations of `0..n` by Heap's algorithm (order unspecified).
pub fn all_permutations(n: usize) -> Vec<Vec<usize>> {
    fn heap(k: usize, p: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k <= 1 {
            out.push(p.clone());
            return;
        }
        heap(k - 1, p, out);
        for i in 0..k - 1 {
            if k % 2 == 0 {
                p.swap(i, k - 1);
            } else {
                p.swap(0, k - 1);
            }
            heap(k - 1, p, out);
        }
    }
    let mut p: Vec<usize> = (0..n).collect();
    let mut out = Vec::new();
    heap(n, &mut p, &mut out);
    out
}

pub fn permutation_matrix(p: &[usize]) -> Array2<f64> {
    let n = p.len();
    let mut m = Array2::zeros((n, n));
    for (i, &j) in p.iter().enumerate() {
        m[[i, j]] = 1.0 / n as f64;
    }
    m
}

/// Minimum of the nested discrepancy over all permutation couplings.
pub fn brute_force_gw(a: &Array2<f64>, b: &Array2<f64>, kind: PenaltyKind) -> f64 {
    all_permutations(a.nrows())
        .iter()
        .map(|p| nested_discrepancy(&permutation_matrix(p), a, b, kind))
        .fold(f64::INFINITY, f64::min)
}

/// Minimum of `sum_i cost[i][p(i)] / n` over all permutations.
pub fn brute_force_assignment(cost: &Array2<f64>) -> f64 {
    let n = cost.nrows();
    all_permutations(n)
        .iter()
        .map(|p| p.iter().enumerate().map(|(i, &j)| cost[[i, j]]).sum::<f64>() / n as f64)
        .fold(f64::INFINITY, f64::min)
}

/// Bottleneck distortion by enumerating permutations, then pairs.
pub fn brute_force_bottleneck(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    let n = a.nrows();
    all_permutations(n)
        .iter()
        .map(|p| {
            let mut worst = 0.0f64;
            for i in 0..n {
                for k in 0..n {
                    worst = worst.max((a[[i, k]] - b[[p[i], p[k]]]).abs());
                }
            }
            worst
        })
        .fold(f64::INFINITY, f64::min)
}

pub fn sorted_median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let m = xs.len();
    if m % 2 == 1 {
        xs[m / 2]
    } else {
        (xs[m / 2 - 1] + xs[m / 2]) / 2.0
    }
}

pub fn textbook_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

pub fn gaussian(rows: usize, cols: usize, rng: &mut SplitMix64) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.sample(StandardNormal))
}

/// Angular distances between `n` random Gaussian points in `d` dimensions.
pub fn random_space(n: usize, d: usize, rng: &mut SplitMix64) -> DistanceMatrix {
    pairwise_distances_rows(gaussian(n, d, rng).view(), "random").unwrap()
}

/// Random symmetric zero-diagonal nonnegative matrix (not necessarily a
/// metric).
pub fn random_dissimilarity(n: usize, rng: &mut SplitMix64) -> DistanceMatrix {
    let mut m = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let v: f64 = rng.random();
            m[[i, j]] = v;
            m[[j, i]] = v;
        }
    }
    DistanceMatrix::new(m, "random").unwrap()
}

pub fn random_permutation(n: usize, rng: &mut SplitMix64) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        p.swap(i, j);
    }
    p
}

/// Random convex combination of a few permutation couplings, sometimes
/// mixed with the product coupling. Marginals are exact up to rounding.
pub fn random_coupling(n: usize, rng: &mut SplitMix64) -> Coupling {
    let parts = rng.random_range(1..=3);
    let mut weights: Vec<f64> = (0..parts).map(|_| rng.random::<f64>() + 0.05).collect();
    let with_product = rng.random_bool(0.3);
    if with_product {
        weights.push(rng.random::<f64>() + 0.05);
    }
    let total: f64 = weights.iter().sum();
    let mut m = Array2::zeros((n, n));
    for (idx, w) in weights.iter().enumerate() {
        let w = w / total;
        if with_product && idx == weights.len() - 1 {
            m += &(Array2::from_elem((n, n), w / (n * n) as f64));
        } else {
            m += &(permutation_matrix(&random_permutation(n, rng)) * w);
        }
    }
    Coupling::new(m).unwrap()
}

/// Every trace must be non-increasing in its objective column.
pub fn assert_monotone(result: &GwSolveResult) {
    for w in result.trace.windows(2) {
        assert!(
            w[1].objective <= w[0].objective,
            "trace increased at iteration {}: {} -> {}",
            w[1].iteration,
            w[0].objective,
            w[1].objective
        );
    }
}

/// Relative tolerance for magnitudes above 1, absolute below.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}
