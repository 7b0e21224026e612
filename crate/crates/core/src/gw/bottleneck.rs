//! Bottleneck (infinity-norm) GW by exhaustive search.
//!
//! Under uniform marginals the minimising coupling can be taken to be a
//! permutation. Any feasible plan contains in its support the support of
//! some permutation (Birkhoff-von Neumann), and a supremum over a larger
//! support is never smaller, so the permutation optimum attains the
//! infimum over all plans.

use crate::error::{Error, Result};
use crate::linear_ot::{Permutation, BRUTE_FORCE_LIMIT};
use crate::mmspace::DistanceMatrix;

/// `min_p max_{i,k} |a[i][k] - b[p(i)][p(k)]|` over permutations, for
/// `n <= 9`. Ties resolve to the lexicographically smallest permutation.
pub fn gw_infinity(a: &DistanceMatrix, b: &DistanceMatrix) -> Result<(f64, Permutation)> {
    let n = a.len();
    if b.len() != n {
        return Err(Error::Shape(format!("spaces have {n} and {} points", b.len())));
    }
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::Guard {
            n,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    if n == 0 {
        return Err(Error::InvalidInput("empty spaces".into()));
    }
    let mut search = Search {
        a,
        b,
        n,
        best: f64::INFINITY,
        best_map: Vec::new(),
        map: Vec::with_capacity(n),
        used: vec![false; n],
    };
    search.extend(0.0);
    Ok((search.best, Permutation::new(search.best_map)?))
}

/// Depth-first over partial assignments in lexicographic order, pruning a
/// prefix once its distortion can no longer strictly beat the incumbent.
struct Search<'a> {
    a: &'a DistanceMatrix,
    b: &'a DistanceMatrix,
    n: usize,
    best: f64,
    best_map: Vec<usize>,
    map: Vec<usize>,
    used: Vec<bool>,
}

impl Search<'_> {
    fn extend(&mut self, prefix_max: f64) {
        let i = self.map.len();
        if i == self.n {
            if prefix_max < self.best {
                self.best = prefix_max;
                self.best_map = self.map.clone();
            }
            return;
        }
        for j in 0..self.n {
            if self.used[j] {
                continue;
            }
            let mut worst = prefix_max;
            for (k, &mk) in self.map.iter().enumerate() {
                let gap = (self.a.get(i, k) - self.b.get(j, mk)).abs();
                if gap > worst {
                    worst = gap;
                }
            }
            if worst >= self.best {
                continue;
            }
            self.used[j] = true;
            self.map.push(j);
            self.extend(worst);
            self.map.pop();
            self.used[j] = false;
        }
    }
}
