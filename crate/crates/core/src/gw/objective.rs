use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::linear_ot::Coupling;
use crate::mmspace::DistanceMatrix;

/// Penalty on the gap between two within-space distances.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyKind {
    #[default]
    AbsL1,
    SquaredL2,
}

impl PenaltyKind {
    #[inline(always)]
    pub fn apply(self, x: f64, y: f64) -> f64 {
        match self {
            PenaltyKind::AbsL1 => (x - y).abs(),
            PenaltyKind::SquaredL2 => {
                let d = x - y;
                d * d
            }
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            PenaltyKind::AbsL1 => "l1",
            PenaltyKind::SquaredL2 => "l2",
        }
    }
}

impl std::str::FromStr for PenaltyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l1" | "abs_l1" => Ok(PenaltyKind::AbsL1),
            "l2" | "squared_l2" => Ok(PenaltyKind::SquaredL2),
            other => Err(Error::Parameter(format!("unknown penalty `{other}` (expected l1 or l2)"))),
        }
    }
}

pub(crate) fn check_shapes(pi: &Coupling, a: &DistanceMatrix, b: &DistanceMatrix) -> Result<usize> {
    let n = pi.n();
    if a.len() != n || b.len() != n {
        return Err(Error::Shape(format!(
            "coupling is {n}x{n} but spaces have {} and {} points",
            a.len(),
            b.len()
        )));
    }
    Ok(n)
}

/// Reference GW discrepancy
/// `sum_{i,j,k,l} L(a[i][k], b[j][l]) pi[i][j] pi[k][l]`,
/// summed over the nonzero entries of `pi` only (`O(nnz^2)`).
pub fn gw_discrepancy(
    pi: &Coupling,
    a: &DistanceMatrix,
    b: &DistanceMatrix,
    penalty: PenaltyKind,
) -> Result<f64> {
    check_shapes(pi, a, b)?;
    Ok(discrepancy_sparse(&pi.support(), a.values(), b.values(), penalty))
}

fn discrepancy_sparse(
    support: &[(usize, usize, f64)],
    a: ArrayView2<'_, f64>,
    b: ArrayView2<'_, f64>,
    penalty: PenaltyKind,
) -> f64 {
    exec::sum_indexed(support.len(), |s| {
        let (i, j, w) = support[s];
        let inner: f64 = support
            .iter()
            .map(|&(k, l, w2)| penalty.apply(a[[i, k]], b[[j, l]]) * w2)
            .sum();
        w * inner
    })
    .max(0.0)
}

/// GW discrepancy through the fastest exact path for `penalty`:
/// the factorised form for `SquaredL2`, the sparse double sum for `AbsL1`.
pub fn gw_objective(
    pi: &Coupling,
    a: &DistanceMatrix,
    b: &DistanceMatrix,
    penalty: PenaltyKind,
) -> Result<f64> {
    check_shapes(pi, a, b)?;
    let support = pi.support();
    Ok(match penalty {
        PenaltyKind::AbsL1 => discrepancy_sparse(&support, a.values(), b.values(), penalty),
        PenaltyKind::SquaredL2 => {
            SquaredParts::new(pi, &support, a.values(), b.values()).objective(&support, b.values())
        }
    })
}

/// Gradient of the discrepancy with respect to `pi`.
///
/// `C[i][j] = 2 sum_{k,l} L(a[i][k], b[j][l]) pi[k][l]`. The `SquaredL2`
/// penalty goes through the factorised form
/// `2 ((a*a) p)_i + 2 ((b*b) q)_j - 4 (a pi b)_ij` with `p`, `q` the
/// marginals of `pi`; `AbsL1` sums over the support of `pi`.
pub fn gw_gradient(
    pi: &Coupling,
    a: &DistanceMatrix,
    b: &DistanceMatrix,
    penalty: PenaltyKind,
) -> Result<Array2<f64>> {
    check_shapes(pi, a, b)?;
    let support = pi.support();
    Ok(match penalty {
        PenaltyKind::AbsL1 => gradient_sparse(&support, a.values(), b.values(), penalty),
        PenaltyKind::SquaredL2 => {
            SquaredParts::new(pi, &support, a.values(), b.values()).gradient(b.values())
        }
    })
}

/// Gradient by the direct support sum for either penalty.
pub fn gw_gradient_direct(
    pi: &Coupling,
    a: &DistanceMatrix,
    b: &DistanceMatrix,
    penalty: PenaltyKind,
) -> Result<Array2<f64>> {
    check_shapes(pi, a, b)?;
    Ok(gradient_sparse(&pi.support(), a.values(), b.values(), penalty))
}

fn gradient_sparse(
    support: &[(usize, usize, f64)],
    a: ArrayView2<'_, f64>,
    b: ArrayView2<'_, f64>,
    penalty: PenaltyKind,
) -> Array2<f64> {
    let n = a.nrows();
    let mut out = Array2::<f64>::zeros((n, n));
    let buf = out.as_slice_mut().expect("contiguous");
    exec::for_each_row_mut(buf, n, |i, row| {
        for &(k, l, w) in support {
            let aik = a[[i, k]];
            // b is symmetric, so row l of b holds b[j][l] for every j
            let bl = b.row(l);
            match penalty {
                PenaltyKind::AbsL1 => {
                    for (c, &blj) in row.iter_mut().zip(bl.iter()) {
                        *c += w * (aik - blj).abs();
                    }
                }
                PenaltyKind::SquaredL2 => {
                    for (c, &blj) in row.iter_mut().zip(bl.iter()) {
                        let d = aik - blj;
                        *c += w * d * d;
                    }
                }
            }
        }
        for c in row.iter_mut() {
            *c *= 2.0;
        }
    });
    out
}

/// Support beyond this fraction of `n^2` switches `a pi` to a dense product.
const DENSE_FRACTION: usize = 8;

/// Shared pieces of the factorised squared-loss objective and gradient.
struct SquaredParts {
    /// `(a*a) p`
    ta: Array1<f64>,
    /// `(b*b) q`
    tb: Array1<f64>,
    p: Array1<f64>,
    q: Array1<f64>,
    /// `a pi`
    a_pi: Array2<f64>,
}

impl SquaredParts {
    fn new(
        pi: &Coupling,
        support: &[(usize, usize, f64)],
        a: ArrayView2<'_, f64>,
        b: ArrayView2<'_, f64>,
    ) -> Self {
        let n = a.nrows();
        let w = pi.weights();
        let p = w.sum_axis(ndarray::Axis(1));
        let q = w.sum_axis(ndarray::Axis(0));
        let ta = a.mapv(|x| x * x).dot(&p);
        let tb = b.mapv(|x| x * x).dot(&q);
        let a_pi = if support.len() * DENSE_FRACTION > n * n {
            a.dot(&w)
        } else {
            let mut m = Array2::<f64>::zeros((n, n));
            let buf = m.as_slice_mut().expect("contiguous");
            exec::for_each_row_mut(buf, n, |i, row| {
                for &(k, l, wkl) in support {
                    row[l] += a[[i, k]] * wkl;
                }
            });
            m
        };
        Self { ta, tb, p, q, a_pi }
    }

    fn objective(&self, support: &[(usize, usize, f64)], b: ArrayView2<'_, f64>) -> f64 {
        let constant = self.ta.dot(&self.p) + self.tb.dot(&self.q);
        let cross = exec::sum_indexed(support.len(), |s| {
            let (i, j, w) = support[s];
            w * self.a_pi.row(i).dot(&b.row(j))
        });
        (constant - 2.0 * cross).max(0.0)
    }

    fn gradient(&self, b: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut g = self.a_pi.dot(&b);
        let n = g.nrows();
        let buf = g.as_slice_mut().expect("contiguous");
        exec::for_each_row_mut(buf, n, |i, row| {
            let ti = self.ta[i];
            for (j, c) in row.iter_mut().enumerate() {
                *c = 2.0 * (ti + self.tb[j]) - 4.0 * *c;
            }
        });
        g
    }
}

/// Discrepancy of the permutation vertex `map`, in `O(n^2)`.
pub(crate) fn vertex_objective(
    map: &[usize],
    a: ArrayView2<'_, f64>,
    b: ArrayView2<'_, f64>,
    penalty: PenaltyKind,
) -> f64 {
    let n = map.len();
    let w = 1.0 / n as f64;
    let total = exec::sum_indexed(n, |i| {
        let ji = map[i];
        (0..n).map(|k| penalty.apply(a[[i, k]], b[[ji, map[k]]])).sum()
    });
    total * w * w
}
