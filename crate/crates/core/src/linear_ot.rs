//! Linear optimal transport between two uniform measures of equal size.
//!
//! Every vertex of the transport polytope with equal uniform marginals is a
//! permutation matrix scaled by `1/n`, so the linear subproblem reduces to a
//! linear assignment problem. It is solved exactly with a shortest
//! augmenting path method in the style of Jonker and Volgenant: column
//! reduction for the initial duals, then one Dijkstra-like augmentation per
//! row left free.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

/// Tolerance on coupling marginals.
pub const MARGINAL_TOL: f64 = 1e-12;

/// Largest `n` accepted by the factorial-time enumerators.
pub const BRUTE_FORCE_LIMIT: usize = 9;

/// Transport plan with both marginals uniform at `1/n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    weights: Array2<f64>,
}

impl Coupling {
    /// Validates nonnegativity and both marginals.
    pub fn new(weights: Array2<f64>) -> Result<Self> {
        let (n, m) = weights.dim();
        if n != m || n == 0 {
            return Err(Error::Shape(format!("coupling must be square and nonempty, got {n}x{m}")));
        }
        if weights.iter().any(|&w| !w.is_finite() || w < 0.0) {
            return Err(Error::InvalidInput("coupling has a negative or non-finite entry".into()));
        }
        let target = 1.0 / n as f64;
        for (i, row) in weights.rows().into_iter().enumerate() {
            let s: f64 = row.sum();
            if (s - target).abs() > MARGINAL_TOL {
                return Err(Error::InvalidInput(format!("row {i} sums to {s}, expected {target}")));
            }
        }
        for (j, col) in weights.columns().into_iter().enumerate() {
            let s: f64 = col.sum();
            if (s - target).abs() > MARGINAL_TOL {
                return Err(Error::InvalidInput(format!("column {j} sums to {s}, expected {target}")));
            }
        }
        Ok(Self { weights })
    }

    pub fn n(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weights(&self) -> ArrayView2<'_, f64> {
        self.weights.view()
    }

    pub fn into_weights(self) -> Array2<f64> {
        self.weights
    }

    /// Nonzero entries as `(row, col, weight)`, row-major.
    pub fn support(&self) -> Vec<(usize, usize, f64)> {
        self.weights
            .indexed_iter()
            .filter(|(_, &w)| w != 0.0)
            .map(|((i, j), &w)| (i, j, w))
            .collect()
    }

    pub fn transpose(&self) -> Self {
        Self {
            weights: self.weights.t().to_owned(),
        }
    }

    /// `(1 - eta) * self + eta * other`.
    pub fn interpolate(&self, other: &Coupling, eta: f64) -> Self {
        if eta == 0.0 {
            return self.clone();
        }
        if eta == 1.0 {
            return other.clone();
        }
        let mut w = self.weights.clone();
        w.zip_mut_with(&other.weights, |a, &b| *a = (1.0 - eta) * *a + eta * b);
        Self { weights: w }
    }

    /// Frobenius inner product with a cost matrix.
    pub fn dot(&self, cost: ArrayView2<'_, f64>) -> f64 {
        self.weights
            .rows()
            .into_iter()
            .zip(cost.rows())
            .map(|(w, c)| w.dot(&c))
            .sum()
    }
}

/// Bijection on `0..n`; `map[i]` is the column assigned to row `i`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation {
    map: Vec<usize>,
}

impl Permutation {
    pub fn new(map: Vec<usize>) -> Result<Self> {
        let n = map.len();
        let mut seen = vec![false; n];
        for &j in &map {
            if j >= n || std::mem::replace(&mut seen[j], true) {
                return Err(Error::InvalidInput(format!("{map:?} is not a permutation")));
            }
        }
        Ok(Self { map })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            map: (0..n).collect(),
        }
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.map
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.map.len()];
        for (i, &j) in self.map.iter().enumerate() {
            inv[j] = i;
        }
        Self { map: inv }
    }
}

pub fn coupling_from_permutation(p: &Permutation) -> Coupling {
    let n = p.len();
    let w = 1.0 / n as f64;
    let mut weights = Array2::zeros((n, n));
    for (i, &j) in p.map.iter().enumerate() {
        weights[[i, j]] = w;
    }
    Coupling { weights }
}

/// Independence coupling: every entry `1/n^2`.
pub fn product_coupling(n: usize) -> Result<Coupling> {
    if n == 0 {
        return Err(Error::Parameter("product coupling needs n >= 1".into()));
    }
    let w = 1.0 / (n as f64 * n as f64);
    Ok(Coupling {
        weights: Array2::from_elem((n, n), w),
    })
}

fn check_cost(cost: ArrayView2<'_, f64>) -> Result<usize> {
    let (n, m) = cost.dim();
    if n != m {
        return Err(Error::InvalidInput(format!("cost matrix is {n}x{m}, not square")));
    }
    if n == 0 {
        return Err(Error::InvalidInput("empty cost matrix".into()));
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidInput("cost matrix has non-finite entries".into()));
    }
    Ok(n)
}

fn assignment_objective(cost: ArrayView2<'_, f64>, map: &[usize]) -> f64 {
    let total: f64 = map.iter().enumerate().map(|(i, &j)| cost[[i, j]]).sum();
    total / map.len() as f64
}

/// Exact minimiser of `<cost, pi>` over the uniform transport polytope.
///
/// Returns the optimal permutation and `sum_i cost[i][p(i)] / n`. The scan
/// order is fixed and comparisons are strict, so identical inputs always
/// return the same assignment.
pub fn solve_linear_ot(cost: ArrayView2<'_, f64>) -> Result<(Permutation, f64)> {
    check_cost(cost)?;
    let map = Lap::new(cost).solve();
    let objective = assignment_objective(cost, &map);
    Ok((Permutation { map }, objective))
}

const FREE: usize = usize::MAX;

struct Lap<'a> {
    cost: ArrayView2<'a, f64>,
    n: usize,
    // column duals
    v: Vec<f64>,
    // row -> column
    x: Vec<usize>,
    // column -> row
    y: Vec<usize>,
}

impl<'a> Lap<'a> {
    fn new(cost: ArrayView2<'a, f64>) -> Self {
        let n = cost.nrows();
        Self {
            cost,
            n,
            v: vec![0.0; n],
            x: vec![FREE; n],
            y: vec![FREE; n],
        }
    }

    #[inline]
    fn c(&self, i: usize, j: usize) -> f64 {
        self.cost[[i, j]]
    }

    fn solve(mut self) -> Vec<usize> {
        let free_rows = self.column_reduction();
        let mut d = vec![0.0; self.n];
        let mut pred = vec![0usize; self.n];
        let mut cols: Vec<usize> = Vec::with_capacity(self.n);
        for f in free_rows {
            self.augment(f, &mut d, &mut pred, &mut cols);
        }
        self.x
    }

    /// `v[j] = min_i c[i][j]`; a column's minimising row takes it when that
    /// row is still free. Returns the rows left unassigned.
    fn column_reduction(&mut self) -> Vec<usize> {
        let n = self.n;
        for j in 0..n {
            let mut best_row = 0;
            let mut best = self.c(0, j);
            for i in 1..n {
                let c = self.c(i, j);
                if c < best {
                    best = c;
                    best_row = i;
                }
            }
            self.v[j] = best;
            if self.x[best_row] == FREE {
                self.x[best_row] = j;
                self.y[j] = best_row;
            }
        }
        (0..n).filter(|&i| self.x[i] == FREE).collect()
    }

    /// Shortest augmenting path from free row `f` over reduced costs
    /// `c[i][j] - u[i] - v[j]`, with `u` implied by tight assigned edges.
    fn augment(&mut self, f: usize, d: &mut [f64], pred: &mut [usize], cols: &mut Vec<usize>) {
        let n = self.n;
        cols.clear();
        cols.extend(0..n);
        for j in 0..n {
            d[j] = self.c(f, j) - self.v[j];
            pred[j] = f;
        }
        // cols[..low] are settled, cols[low..up] are at the current minimum
        // distance and waiting to be scanned, cols[up..] are unreached.
        let mut low = 0;
        let mut up = 0;
        let mut last = 0;
        let mut min = 0.0;
        let end = 'search: loop {
            if low == up {
                last = low;
                min = d[cols[up]];
                up += 1;
                for k in up..n {
                    let j = cols[k];
                    let h = d[j];
                    if h <= min {
                        if h < min {
                            up = low;
                            min = h;
                        }
                        cols.swap(k, up);
                        up += 1;
                    }
                }
                for &j in &cols[low..up] {
                    if self.y[j] == FREE {
                        break 'search j;
                    }
                }
            }
            let j1 = cols[low];
            low += 1;
            let i = self.y[j1];
            let u1 = self.c(i, j1) - self.v[j1] - min;
            for k in up..n {
                let j = cols[k];
                let h = self.c(i, j) - self.v[j] - u1;
                if h < d[j] {
                    d[j] = h;
                    pred[j] = i;
                    if h == min {
                        if self.y[j] == FREE {
                            break 'search j;
                        }
                        cols.swap(k, up);
                        up += 1;
                    }
                }
            }
        };
        for &j in &cols[..last] {
            self.v[j] += d[j] - min;
        }
        let mut j = end;
        loop {
            let i = pred[j];
            self.y[j] = i;
            let prev = std::mem::replace(&mut self.x[i], j);
            if i == f {
                break;
            }
            j = prev;
        }
    }
}

/// Calls `visit` on every permutation of `0..n` in lexicographic order.
/// Stops early when `visit` returns `false`.
pub(crate) fn visit_permutations(n: usize, mut visit: impl FnMut(&[usize]) -> bool) {
    let mut perm: Vec<usize> = (0..n).collect();
    loop {
        if !visit(&perm) {
            return;
        }
        // next lexicographic permutation
        let Some(k) = (0..n.saturating_sub(1)).rev().find(|&k| perm[k] < perm[k + 1]) else {
            return;
        };
        let l = (k + 1..n).rev().find(|&l| perm[k] < perm[l]).expect("pivot has a successor");
        perm.swap(k, l);
        perm[k + 1..].reverse();
    }
}

/// Exhaustive assignment over all `n!` permutations, for `n <= 9`.
/// Ties resolve to the lexicographically smallest permutation.
pub fn brute_force_lap(cost: ArrayView2<'_, f64>) -> Result<(Permutation, f64)> {
    let n = check_cost(cost)?;
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::Guard {
            n,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let mut best = f64::INFINITY;
    let mut best_map = Vec::new();
    visit_permutations(n, |p| {
        let total: f64 = p.iter().enumerate().map(|(i, &j)| cost[[i, j]]).sum();
        if total < best {
            best = total;
            best_map = p.to_vec();
        }
        true
    });
    let objective = assignment_objective(cost, &best_map);
    Ok((Permutation { map: best_map }, objective))
}
