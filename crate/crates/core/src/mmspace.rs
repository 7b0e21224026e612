//! Metric-measure spaces over sampled embeddings: angular distance matrices
//! and median-ratio scale matching between modalities.

use std::fs;
use std::path::Path;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};

use crate::embed_io::EmbeddingSet;
use crate::error::{Error, Result};
use crate::exec;

pub const DST1_MAGIC: &[u8; 4] = b"DST1";

/// Symmetric, zero-diagonal, finite and nonnegative pairwise distances.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    values: Array2<f64>,
    label: String,
}

impl DistanceMatrix {
    pub fn new(values: Array2<f64>, label: impl Into<String>) -> Result<Self> {
        let (rows, cols) = values.dim();
        if rows != cols {
            return Err(Error::Shape(format!("distance matrix is {rows}x{cols}")));
        }
        for i in 0..rows {
            if values[[i, i]] != 0.0 {
                return Err(Error::InvalidInput(format!("nonzero diagonal at {i}")));
            }
            for j in 0..rows {
                let v = values[[i, j]];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::InvalidInput(format!(
                        "entry ({i}, {j}) = {v} is not a finite nonnegative distance"
                    )));
                }
                if v != values[[j, i]] {
                    return Err(Error::InvalidInput(format!("asymmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self {
            values,
            label: label.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[[i, j]]
    }

    /// Same geometry with rows and columns relabeled: entry `(i, j)` of the
    /// result is entry `(perm[i], perm[j])` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.len();
        if perm.len() != n {
            return Err(Error::Shape(format!("permutation of length {} for n = {n}", perm.len())));
        }
        let values = Array2::from_shape_fn((n, n), |(i, j)| self.values[[perm[i], perm[j]]]);
        Ok(Self {
            values,
            label: self.label.clone(),
        })
    }

    /// Strict upper triangle, row-major.
    pub fn upper_triangle(&self) -> Vec<f64> {
        let n = self.len();
        let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            out.extend(self.values.row(i).iter().skip(i + 1));
        }
        out
    }

    fn scaled_by(&self, s: f64, label: String) -> Self {
        Self {
            values: self.values.mapv(|v| s * v),
            label,
        }
    }
}

/// Angle between `u` and `v`, in `[0, pi]`: `acos` of their cosine.
///
/// Evaluated as `2 atan2(|u' - v'|, |u' + v'|)` on the unit vectors, which
/// equals the `acos` form but keeps full precision near 0 and `pi`, where
/// `acos` of a rounded cosine is off by up to `1e-8`. Parallel vectors give
/// exactly 0.
pub fn angular_distance(u: ArrayView1<'_, f64>, v: ArrayView1<'_, f64>) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::Shape(format!(
            "vectors of dimension {} and {}",
            u.len(),
            v.len()
        )));
    }
    let nu = u.dot(&u).sqrt();
    let nv = v.dot(&v).sqrt();
    if !(nu > 0.0 && nu.is_finite()) || !(nv > 0.0 && nv.is_finite()) {
        return Err(Error::DegenerateVector(
            "zero-norm or non-finite vector".into(),
        ));
    }
    let u: Vec<f64> = u.iter().map(|x| x / nu).collect();
    let v: Vec<f64> = v.iter().map(|x| x / nv).collect();
    Ok(unit_angle(&u, &v))
}

#[inline]
fn unit_angle(u: &[f64], v: &[f64]) -> f64 {
    let mut diff = 0.0;
    let mut sum = 0.0;
    for (&a, &b) in u.iter().zip(v) {
        diff += (a - b) * (a - b);
        sum += (a + b) * (a + b);
    }
    2.0 * diff.sqrt().atan2(sum.sqrt())
}

/// Angular distance matrix over the rows of an embedding set.
pub fn pairwise_distances(set: &EmbeddingSet) -> Result<DistanceMatrix> {
    pairwise_distances_rows(set.to_f64().view(), set.source())
}

/// Angular distance matrix over the rows of `rows`.
///
/// Each entry is computed independently of the others, so the result does
/// not depend on how rows are spread across threads.
pub fn pairwise_distances_rows(
    rows: ArrayView2<'_, f64>,
    label: impl Into<String>,
) -> Result<DistanceMatrix> {
    let (n, d) = rows.dim();
    let mut unit = rows.to_owned();
    for (i, mut row) in unit.axis_iter_mut(Axis(0)).enumerate() {
        let norm = row.dot(&row).sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::DegenerateVector(format!(
                "row {i} has zero or non-finite norm"
            )));
        }
        row.mapv_inplace(|x| x / norm);
    }
    let unit = unit.as_standard_layout().into_owned();
    let flat = unit.as_slice().expect("standard layout");
    let mut values = Array2::<f64>::zeros((n, n));
    {
        let buf = values
            .as_slice_mut()
            .expect("freshly allocated matrix is contiguous");
        exec::for_each_row_mut(buf, n, |i, out| {
            let ri = &flat[i * d..(i + 1) * d];
            for j in (i + 1)..n {
                out[j] = unit_angle(ri, &flat[j * d..(j + 1) * d]);
            }
        });
    }
    for i in 0..n {
        for j in (i + 1)..n {
            values[[j, i]] = values[[i, j]];
        }
    }
    Ok(DistanceMatrix {
        values,
        label: label.into(),
    })
}

/// Median of the strict upper triangle; even counts average the two middle
/// order statistics.
pub fn offdiag_median(m: &DistanceMatrix) -> Result<f64> {
    if m.len() < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            got: m.len(),
        });
    }
    Ok(median(m.upper_triangle()))
}

pub(crate) fn median(mut xs: Vec<f64>) -> f64 {
    debug_assert!(!xs.is_empty());
    let len = xs.len();
    let mid = len / 2;
    let (_, upper, _) = xs.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if len % 2 == 1 {
        upper
    } else {
        let lower = xs[..mid]
            .iter()
            .copied()
            .max_by(f64::total_cmp)
            .expect("mid > 0 for even len >= 2");
        (lower + upper) / 2.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaleMatchResult {
    pub scale: f64,
    pub scaled: DistanceMatrix,
    pub target_median: f64,
    pub source_median: f64,
}

/// Rescales `source` so its off-diagonal median equals that of `target`.
pub fn median_scale_match(
    source: &DistanceMatrix,
    target: &DistanceMatrix,
) -> Result<ScaleMatchResult> {
    let source_median = offdiag_median(source)?;
    let target_median = offdiag_median(target)?;
    if source_median <= 0.0 {
        return Err(Error::DegenerateSpace(format!(
            "source `{}` has zero median distance",
            source.label
        )));
    }
    let scale = target_median / source_median;
    let scaled = source.scaled_by(scale, source.label.clone());
    Ok(ScaleMatchResult {
        scale,
        scaled,
        target_median,
        source_median,
    })
}

/// Dumps a square `f64` matrix as `DST1`: magic, version u32 = 1, n u32,
/// then n*n little-endian binary64 values row-major.
pub fn write_dst1(values: ArrayView2<'_, f64>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let n = values.nrows();
    if values.ncols() != n {
        return Err(Error::Shape("DST1 stores square matrices only".into()));
    }
    let n32 = u32::try_from(n).map_err(|_| Error::Shape("n exceeds u32".into()))?;
    let mut buf = Vec::with_capacity(12 + 8 * n * n);
    buf.extend_from_slice(DST1_MAGIC);
    buf.extend_from_slice(&1u32.to_le_bytes());
    buf.extend_from_slice(&n32.to_le_bytes());
    for v in values.iter() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn read_dst1(path: impl AsRef<Path>) -> Result<Array2<f64>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 12 || &bytes[..4] != DST1_MAGIC {
        return Err(Error::Format("bad magic, expected DST1".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != 1 {
        return Err(Error::Format(format!("unsupported DST1 version {version}")));
    }
    let n = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let expected = n
        .checked_mul(n)
        .and_then(|c| c.checked_mul(8))
        .and_then(|c| c.checked_add(12))
        .ok_or_else(|| Error::Format("DST1 size overflows".into()))?;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "DST1 payload is {} bytes, expected {expected}",
            bytes.len()
        )));
    }
    let values = bytes[12..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Array2::from_shape_vec((n, n), values).map_err(|e| Error::Format(e.to_string()))
}

/// Reads a `DST1` dump back as a validated distance matrix.
pub fn read_distance_matrix(path: impl AsRef<Path>) -> Result<DistanceMatrix> {
    let label = path
        .as_ref()
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or_default()
        .to_owned();
    DistanceMatrix::new(read_dst1(path)?, label)
}
