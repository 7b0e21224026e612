//! Comparison metrics for paired representation spaces: representational
//! similarity analysis (RSA), canonical correlation analysis (CCA) and
//! mutual nearest neighbours.
//!
//! Each metric has an `EmbeddingSet` entry point and a `*_rows` variant on
//! `f64` feature matrices whose row `i` in both inputs is the same sample.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::embed_io::{check_paired, EmbeddingSet};
use crate::error::{Error, Result};
use crate::exec;
use crate::mmspace::pairwise_distances_rows;
use crate::selection::pearson;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Gw,
    Rsa,
    Cca,
    MutualNn,
    AccuracyExternal,
}

impl MetricKind {
    pub fn direction(self) -> Direction {
        match self {
            MetricKind::Gw => Direction::LowerBetter,
            _ => Direction::HigherBetter,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Gw => "gw",
            MetricKind::Rsa => "rsa",
            MetricKind::Cca => "cca",
            MetricKind::MutualNn => "mutual_nn",
            MetricKind::AccuracyExternal => "accuracy_external",
        }
    }
}

impl std::str::FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "gw" => MetricKind::Gw,
            "rsa" => MetricKind::Rsa,
            "cca" => MetricKind::Cca,
            "mutualnn" | "mutual_nn" => MetricKind::MutualNn,
            "accuracy" | "accuracy_external" => MetricKind::AccuracyExternal,
            other => return Err(Error::Parameter(format!("unknown metric `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    LowerBetter,
    HigherBetter,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricScore {
    pub metric: MetricKind,
    #[serde(serialize_with = "crate::report::num")]
    pub value: f64,
    pub direction: Direction,
}

impl MetricScore {
    pub fn new(metric: MetricKind, value: f64) -> Self {
        Self {
            metric,
            value,
            direction: metric.direction(),
        }
    }
}

pub const DEFAULT_CCA_COMPONENTS: usize = 10;
pub const DEFAULT_NEIGHBORS: usize = 10;
/// Ridge added to each within-modality covariance, relative to its mean
/// eigenvalue.
pub const CCA_RIDGE: f64 = 1e-6;

fn check_rows(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>) -> Result<usize> {
    if x.nrows() != y.nrows() {
        return Err(Error::Pairing(format!(
            "{} vision rows vs {} text rows",
            x.nrows(),
            y.nrows()
        )));
    }
    Ok(x.nrows())
}

/// Pearson correlation between the flattened strict upper triangles of the
/// two within-space cosine-similarity matrices.
pub fn rsa_score(vision: &EmbeddingSet, text: &EmbeddingSet) -> Result<MetricScore> {
    check_paired(vision, text)?;
    rsa_score_rows(vision.to_f64().view(), text.to_f64().view())
}

pub fn rsa_score_rows(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>) -> Result<MetricScore> {
    let n = check_rows(x, y)?;
    if n < 3 {
        return Err(Error::InsufficientSamples { needed: 3, got: n });
    }
    let sx = cosine_upper(x)?;
    let sy = cosine_upper(y)?;
    let r = pearson(&sx, &sy).map_err(|e| match e {
        Error::Degenerate(_) => Error::Degenerate("similarity structure has zero variance".into()),
        other => other,
    })?;
    Ok(MetricScore::new(MetricKind::Rsa, r))
}

fn cosine_upper(rows: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
    let n = rows.nrows();
    let norms: Vec<f64> = rows.axis_iter(Axis(0)).map(|r| r.dot(&r).sqrt()).collect();
    if let Some(i) = norms.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::DegenerateVector(format!("row {i} has zero or non-finite norm")));
    }
    let per_row = exec::map_indexed(n, |i| {
        let ri = rows.row(i);
        ((i + 1)..n)
            .map(|j| ri.dot(&rows.row(j)) / (norms[i] * norms[j]))
            .collect::<Vec<f64>>()
    });
    Ok(per_row.concat())
}

/// Mean of the top `components` canonical correlations, in `[0, 1]`.
///
/// Both sides are centred; each within-modality covariance gets a ridge of
/// `CCA_RIDGE * trace / d` on its diagonal and is whitened by its symmetric
/// inverse square root. The singular values of the whitened
/// cross-covariance are the canonical correlations. At most
/// `min(d_vision, d_text)` correlations exist; fewer are averaged when
/// `components` asks for more.
pub fn cca_score(
    vision: &EmbeddingSet,
    text: &EmbeddingSet,
    components: usize,
) -> Result<MetricScore> {
    check_paired(vision, text)?;
    cca_score_rows(vision.to_f64().view(), text.to_f64().view(), components)
}

pub fn cca_score_rows(
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    components: usize,
) -> Result<MetricScore> {
    let corrs = canonical_correlations(x, y, components)?;
    let top = components.min(corrs.len());
    let mean = corrs[..top].iter().sum::<f64>() / top as f64;
    Ok(MetricScore::new(MetricKind::Cca, mean.clamp(0.0, 1.0)))
}

/// All canonical correlations, descending.
pub fn canonical_correlations(
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    components: usize,
) -> Result<Vec<f64>> {
    let n = check_rows(x, y)?;
    if components == 0 {
        return Err(Error::Parameter("components must be >= 1".into()));
    }
    if n <= components {
        return Err(Error::Rank(format!(
            "{n} samples cannot support {components} components"
        )));
    }
    let xc = centered(x);
    let yc = centered(y);
    let scale = 1.0 / (n as f64 - 1.0);
    let cxx = xc.transpose() * &xc * scale;
    let cyy = yc.transpose() * &yc * scale;
    let cxy = xc.transpose() * &yc * scale;
    if cxx.iter().chain(cyy.iter()).chain(cxy.iter()).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("covariance has non-finite entries".into()));
    }
    let wx = inverse_sqrt(cxx)?;
    let wy = inverse_sqrt(cyy)?;
    let whitened = wx * cxy * wy;
    let mut sv: Vec<f64> = whitened.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    Ok(sv)
}

fn centered(m: ArrayView2<'_, f64>) -> DMatrix<f64> {
    let mean = m.mean_axis(Axis(0)).expect("at least one row");
    let c: Array2<f64> = &m - &mean;
    DMatrix::from_fn(c.nrows(), c.ncols(), |i, j| c[[i, j]])
}

fn inverse_sqrt(mut cov: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = cov.nrows();
    let ridge = CCA_RIDGE * cov.trace() / d as f64;
    if !(ridge > 0.0) {
        return Err(Error::Degenerate("a modality has zero variance".into()));
    }
    for i in 0..d {
        cov[(i, i)] += ridge;
    }
    let eig = SymmetricEigen::new(cov);
    let floor = ridge * 0.5;
    let inv_sqrt = eig.eigenvalues.map(|l| 1.0 / l.max(floor).sqrt());
    let v = &eig.eigenvectors;
    Ok(v * DMatrix::from_diagonal(&inv_sqrt) * v.transpose())
}

/// Average overlap of the `k` angular nearest neighbours of each sample in
/// the two modalities. Neighbour lists exclude the sample itself and break
/// distance ties by smaller index. The vision side is the nominal source;
/// the overlap itself is symmetric.
pub fn mutual_nn_score(vision: &EmbeddingSet, text: &EmbeddingSet, k: usize) -> Result<MetricScore> {
    check_paired(vision, text)?;
    mutual_nn_score_rows(vision.to_f64().view(), text.to_f64().view(), k)
}

pub fn mutual_nn_score_rows(
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    k: usize,
) -> Result<MetricScore> {
    let n = check_rows(x, y)?;
    if k == 0 || k >= n {
        return Err(Error::Parameter(format!("need 0 < k < n, got k = {k}, n = {n}")));
    }
    let nx = knn_lists(x, k)?;
    let ny = knn_lists(y, k)?;
    let total: usize = nx
        .iter()
        .zip(&ny)
        .map(|(a, b)| a.iter().filter(|j| b.contains(j)).count())
        .sum();
    Ok(MetricScore::new(
        MetricKind::MutualNn,
        total as f64 / (n * k) as f64,
    ))
}

/// `k` nearest neighbours of every row under angular distance.
pub fn knn_lists(rows: ArrayView2<'_, f64>, k: usize) -> Result<Vec<Vec<usize>>> {
    let dist = pairwise_distances_rows(rows, "knn")?;
    let n = rows.nrows();
    Ok(exec::map_indexed(n, |i| {
        let row = dist.values().row(i).to_owned();
        let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        let cmp = |a: &usize, b: &usize| row[*a].total_cmp(&row[*b]).then(a.cmp(b));
        if k < others.len() {
            others.select_nth_unstable_by(k, cmp);
            others.truncate(k);
        }
        others.sort_by(cmp);
        others
    }))
}
